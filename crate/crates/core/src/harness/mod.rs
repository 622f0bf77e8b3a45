//! Experiment configuration, seeded batch execution and CSV export.

mod bench;
mod landscape;
mod tools;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::decoders::BfConfig;
use crate::error::{Error, Result};
use crate::parity_code::CheckWeight;
use crate::sampler::Kernel;

pub use bench::{run_iid_bench, BenchRecord, BenchTable};
pub use landscape::{
    load_or_generate_instances, run_error_matrix_report, run_hybrid_landscape, run_landscape_on, write_error_matrices,
    Argmax, ArgmaxRecord, ErrorMatrixReport, LandscapeRow, LandscapeTable,
};
pub use tools::{
    decode_matrix, decode_one, gen_instances, sampler_validate, validation_csv, DecodeOneReport, ValidationRow,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    IidBench,
    HybridLandscape,
    ErrorMatrix,
    DecodeOne,
    GenInstances,
    SamplerValidate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderKind {
    Bf,
    Bp,
    Mcmc,
    Mwd,
}

impl DecoderKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DecoderKind::Bf => "bf",
            DecoderKind::Bp => "bp",
            DecoderKind::Mcmc => "mcmc",
            DecoderKind::Mwd => "mwd",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bf" => Ok(DecoderKind::Bf),
            "bp" => Ok(DecoderKind::Bp),
            "mcmc" => Ok(DecoderKind::Mcmc),
            "mwd" => Ok(DecoderKind::Mwd),
            other => Err(Error::Config(format!("unknown decoder {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IidBenchConfig {
    pub sizes: Vec<usize>,
    pub epsilons: Vec<f64>,
    pub decoders: Vec<DecoderKind>,
    pub trials: usize,
    pub bf: BfConfig,
    pub bp_iterations: usize,
    /// Fixed BP prior; the true flip probability when absent.
    pub bp_prior: Option<f64>,
    pub bp_clamp: f64,
    /// Penalty strength of the syndrome-only sampler.
    pub mcmc_gamma: f64,
    /// Rejection-free steps per physical spin.
    pub mcmc_steps_per_spin: usize,
}

impl Default for IidBenchConfig {
    fn default() -> Self {
        Self {
            sizes: vec![10, 20, 30, 40],
            epsilons: vec![0.05, 0.1, 0.15, 0.2, 0.25, 0.3],
            decoders: vec![DecoderKind::Bf, DecoderKind::Bp, DecoderKind::Mcmc],
            trials: 2000,
            bf: BfConfig::default(),
            bp_iterations: 5,
            bp_prior: None,
            bp_clamp: 40.0,
            mcmc_gamma: 1.0,
            mcmc_steps_per_spin: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LandscapeConfig {
    pub k: usize,
    pub n_instances: usize,
    pub coupling_bound: f64,
    /// Instance cache; `<output_dir>/instances` when absent.
    pub instance_dir: Option<PathBuf>,
    pub beta_min: f64,
    pub beta_max: f64,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub grid_beta: usize,
    pub grid_gamma: usize,
    pub chains: usize,
    /// Recorded states per physical spin for MCMC decoding.
    pub mcmc_budget_factor: usize,
    /// Recorded states per physical spin for hybrid decoding.
    pub hybrid_budget_factor: usize,
    pub hybrid_burn_in_sweeps: usize,
    pub kernel: Kernel,
    pub penalty_weight: u8,
    pub bf: BfConfig,
    /// Recorded states per physical spin for the averaged error matrices.
    pub error_matrix_budget_factor: usize,
}

impl Default for LandscapeConfig {
    fn default() -> Self {
        Self {
            k: 14,
            n_instances: 12,
            coupling_bound: 0.25,
            instance_dir: None,
            beta_min: 0.0,
            beta_max: 14.0,
            gamma_min: 0.0,
            gamma_max: 7.0,
            grid_beta: 8,
            grid_gamma: 8,
            chains: 8,
            mcmc_budget_factor: 1200,
            hybrid_budget_factor: 4,
            hybrid_burn_in_sweeps: 1,
            kernel: Kernel::RejectionFree,
            penalty_weight: 4,
            bf: BfConfig::default(),
            error_matrix_budget_factor: 100,
        }
    }
}

impl LandscapeConfig {
    pub fn betas(&self) -> Vec<f64> {
        linspace(self.beta_min, self.beta_max, self.grid_beta)
    }

    pub fn gammas(&self) -> Vec<f64> {
        linspace(self.gamma_min, self.gamma_max, self.grid_gamma)
    }

    pub fn penalty(&self) -> Result<CheckWeight> {
        CheckWeight::from_weight(self.penalty_weight).map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeOneConfig {
    pub input: Option<PathBuf>,
    pub k: Option<usize>,
    pub decoder: DecoderKind,
    /// Instance whose ground truth is reported against.
    pub instance: Option<PathBuf>,
    pub bf: BfConfig,
    pub bp_prior: f64,
    pub bp_iterations: usize,
}

impl Default for DecodeOneConfig {
    fn default() -> Self {
        Self {
            input: None,
            k: None,
            decoder: DecoderKind::Bf,
            instance: None,
            bf: BfConfig::default(),
            bp_prior: 0.25,
            bp_iterations: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InstanceGenConfig {
    pub k: usize,
    pub count: usize,
    pub coupling_bound: f64,
    pub with_ground_truth: bool,
}

impl Default for InstanceGenConfig {
    fn default() -> Self {
        Self {
            k: 14,
            count: 12,
            coupling_bound: 0.25,
            with_ground_truth: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerValidateConfig {
    /// `(beta, gamma)` points checked against the exact distribution.
    pub points: Vec<[f64; 2]>,
    pub steps: usize,
    pub burn_in_sweeps: usize,
    pub penalty_weight: u8,
    pub coupling_bound: f64,
    pub kernels: Vec<Kernel>,
}

impl Default for SamplerValidateConfig {
    fn default() -> Self {
        Self {
            points: vec![[0.0, 0.0], [2.0, 0.5], [4.0, 1.5]],
            steps: 1_000_000,
            burn_in_sweeps: 100,
            penalty_weight: 4,
            coupling_bound: 0.25,
            kernels: vec![Kernel::Metropolis, Kernel::RejectionFree],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Option<ExperimentKind>,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Worker threads; all available cores when absent.
    pub threads: Option<usize>,
    pub iid: IidBenchConfig,
    pub landscape: LandscapeConfig,
    pub decode: DecodeOneConfig,
    pub instances: InstanceGenConfig,
    pub validate: SamplerValidateConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: None,
            seed: 20_240_601,
            output_dir: PathBuf::from("results"),
            threads: None,
            iid: IidBenchConfig::default(),
            landscape: LandscapeConfig::default(),
            decode: DecodeOneConfig::default(),
            instances: InstanceGenConfig::default(),
            validate: SamplerValidateConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn instance_dir(&self) -> PathBuf {
        self.landscape
            .instance_dir
            .clone()
            .unwrap_or_else(|| self.output_dir.join("instances"))
    }

    /// Checks everything every experiment relies on.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let iid = &self.iid;
        if let Some(&k) = iid.sizes.iter().find(|&&k| k < 4) {
            return bad(format!("code sizes must be at least 4, got {k}"));
        }
        if let Some(&e) = iid.epsilons.iter().find(|e| !(0.0..0.5).contains(*e)) {
            return bad(format!("epsilon must lie in [0, 0.5), got {e}"));
        }
        if iid.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if iid.bf.max_iterations == 0 || iid.bp_iterations == 0 {
            return bad("decoder iterations must be at least 1".into());
        }
        if let Some(p) = iid.bp_prior {
            if !(p > 0.0 && p < 0.5) {
                return bad(format!("bp_prior must lie in (0, 0.5), got {p}"));
            }
        }
        if !(iid.mcmc_gamma >= 0.0) || iid.mcmc_steps_per_spin == 0 {
            return bad("mcmc_gamma must be non-negative and mcmc_steps_per_spin positive".into());
        }
        let l = &self.landscape;
        if l.k < 4 {
            return bad(format!("landscape K must be at least 4, got {}", l.k));
        }
        if l.n_instances == 0 || l.chains == 0 || l.grid_beta == 0 || l.grid_gamma == 0 {
            return bad("instance, chain and grid counts must be at least 1".into());
        }
        if l.mcmc_budget_factor == 0 || l.hybrid_budget_factor == 0 || l.error_matrix_budget_factor == 0 {
            return bad("sample budgets must be at least 1".into());
        }
        if !(l.beta_min >= 0.0 && l.beta_max >= l.beta_min && l.gamma_min >= 0.0 && l.gamma_max >= l.gamma_min) {
            return bad("grid bounds must satisfy 0 <= min <= max".into());
        }
        if !(l.coupling_bound >= 0.0) {
            return bad("coupling_bound must be non-negative".into());
        }
        l.penalty()?;
        if self.decode.bp_iterations == 0 || !(self.decode.bp_prior > 0.0 && self.decode.bp_prior < 0.5) {
            return bad("decode: bp_iterations >= 1 and bp_prior in (0, 0.5) required".into());
        }
        if self.instances.k < 4 || self.instances.count == 0 {
            return bad("instances: K >= 4 and count >= 1 required".into());
        }
        let v = &self.validate;
        if v.steps == 0 || v.points.is_empty() || v.kernels.is_empty() {
            return bad("validate: steps, points and kernels must be non-empty".into());
        }
        CheckWeight::from_weight(v.penalty_weight).map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    /// Runs `f` on a pool with the configured number of threads.
    pub fn with_pool<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        match self.threads {
            None => Ok(f()),
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n.max(1))
                    .build()
                    .map_err(|e| Error::Config(e.to_string()))?;
                Ok(pool.install(f))
            }
        }
    }
}

/// `n` evenly spaced points on `[lo, hi]`; the midpoint when `n = 1`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![(lo + hi) / 2.0],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// CSV text preceded by `# key: value` metadata lines.
pub struct CsvDocument {
    pub metadata: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvDocument {
    pub fn new(header: &[&str]) -> Self {
        Self {
            metadata: Vec::new(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.metadata.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        out.push_str(&String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8"));
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_file(path, &self.render())
    }
}

pub(crate) fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads back the data rows of a [`CsvDocument`], skipping metadata.
pub fn read_csv_rows(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let body: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header = r
        .headers()
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        .iter()
        .map(String::from)
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        rows.push(rec.iter().map(String::from).collect());
    }
    Ok((header, rows))
}

/// Standard error of a binomial proportion.
pub fn binomial_sigma(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_config() {
        let cfg = ExperimentConfig::from_toml("seed = 5\n[iid]\nsizes = [6, 8]\ntrials = 10\n").unwrap();
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.iid.sizes, vec![6, 8]);
        assert_eq!(cfg.iid.epsilons, IidBenchConfig::default().epsilons);
    }

    #[test]
    fn invalid_configs() {
        assert!(ExperimentConfig::from_toml("bogus = 1").is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.iid.sizes = vec![3];
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let mut cfg = ExperimentConfig::default();
        cfg.iid.trials = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.landscape.penalty_weight = 5;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn linspace_points() {
        assert_eq!(linspace(0.0, 1.0, 3), vec![0.0, 0.5, 1.0]);
        assert_eq!(linspace(2.0, 4.0, 1), vec![3.0]);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut doc = CsvDocument::new(&["a", "b"]);
        doc.meta("seed", 3);
        doc.push(vec!["1".into(), "x,y".into()]);
        let path = dir.path().join("t.csv");
        doc.write(&path).unwrap();
        let (h, rows) = read_csv_rows(&path).unwrap();
        assert_eq!(h, vec!["a", "b"]);
        assert_eq!(rows, vec![vec!["1".to_string(), "x,y".to_string()]]);
        assert!(doc.render().starts_with("# seed: 3\n"));
    }
}
