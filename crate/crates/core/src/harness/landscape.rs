//! Success-probability landscapes of MCMC and hybrid decoding over a grid of
//! annealing parameters, and averaged error matrices at the best points.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

use super::{read_csv_rows, CsvDocument, ExperimentConfig, LandscapeConfig};
use crate::channels::{gen_instance, mix_seed, Instance};
use crate::error::{Error, Result};
use crate::oracle::brute_force_ground_state;
use crate::parity_code::{CodeParams, TannerGraph};
use crate::sampler::{
    hybrid_summary, run_chain_with, ErrorMatrixAccumulator, InitState, McmcConfig, Schedule, SlhzHamiltonian,
};

const INSTANCE_TAG: u64 = 0x1a5;
const RAW_TAG: u64 = 0x3a1;
const HYBRID_TAG: u64 = 0x4b2;
const MATRIX_TAG: u64 = 0x5c3;

pub(crate) fn instance_seed(master: u64, idx: usize) -> u64 {
    mix_seed(&[master, INSTANCE_TAG, idx as u64])
}

pub(crate) fn instance_path(dir: &Path, idx: usize) -> PathBuf {
    dir.join(format!("instance_{idx:02}.toml"))
}

/// Loads the cached instance bundle, generating and saving any missing
/// instance. Cached ground truths are checked against a fresh oracle run.
pub fn load_or_generate_instances(cfg: &ExperimentConfig) -> Result<Vec<Instance>> {
    let l = &cfg.landscape;
    let dir = cfg.instance_dir();
    let mut out = Vec::with_capacity(l.n_instances);
    for idx in 0..l.n_instances {
        let path = instance_path(&dir, idx);
        let inst = if path.exists() {
            let inst = Instance::load(&path)?;
            if inst.k != l.k {
                return Err(Error::Config(format!(
                    "{} has K = {}, landscape expects {}",
                    path.display(),
                    inst.k,
                    l.k
                )));
            }
            let fresh = brute_force_ground_state(&inst)?;
            match inst.ground_state() {
                None => {
                    return Err(Error::Config(format!("{} carries no ground truth", path.display())));
                }
                Some(gs) if gs != fresh.minimizer => {
                    return Err(Error::Config(format!(
                        "{}: cached ground truth disagrees with the exact minimiser",
                        path.display()
                    )));
                }
                Some(_) => inst,
            }
        } else {
            let inst = gen_instance(l.k, l.coupling_bound, instance_seed(cfg.seed, idx), true)?;
            inst.save(&path)?;
            inst
        };
        out.push(inst);
    }
    Ok(out)
}

/// Hit counts at one grid point, for one instance or pooled.
#[derive(Debug, Clone, PartialEq)]
pub struct LandscapeRow {
    /// `None` for the row pooled over instances.
    pub instance: Option<usize>,
    pub beta_index: usize,
    pub gamma_index: usize,
    pub beta: f64,
    pub gamma: f64,
    pub chains: usize,
    /// Long MCMC-decoding chains containing the ground truth.
    pub exact_raw: usize,
    pub any_raw: usize,
    /// Short hybrid chains whose BF-decoded samples contain the ground truth.
    pub exact_decoded: usize,
    pub any_decoded: usize,
    /// Short hybrid chains containing the ground truth before decoding.
    pub exact_hybrid_raw: usize,
    pub any_hybrid_raw: usize,
}

impl LandscapeRow {
    fn p(&self, n: usize) -> f64 {
        n as f64 / self.chains as f64
    }

    pub fn p_exact_raw(&self) -> f64 {
        self.p(self.exact_raw)
    }

    pub fn p_any_raw(&self) -> f64 {
        self.p(self.any_raw)
    }

    pub fn p_exact_decoded(&self) -> f64 {
        self.p(self.exact_decoded)
    }

    pub fn p_any_decoded(&self) -> f64 {
        self.p(self.any_decoded)
    }

    pub fn p_exact_hybrid_raw(&self) -> f64 {
        self.p(self.exact_hybrid_raw)
    }

    pub fn p_any_hybrid_raw(&self) -> f64 {
        self.p(self.any_hybrid_raw)
    }
}

/// Best grid region of one method on one instance. When several grid points
/// share the maximal success probability, `beta`/`gamma` are the centroid of
/// that tied set and `beta_index`/`gamma_index` the tied point nearest to it.
#[derive(Debug, Clone, PartialEq)]
pub struct Argmax {
    pub beta_index: usize,
    pub gamma_index: usize,
    pub beta: f64,
    pub gamma: f64,
    pub p: f64,
    pub tied: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArgmaxRecord {
    pub instance: usize,
    /// Best point for raw MCMC decoding.
    pub a: Argmax,
    /// Best point for hybrid decoding.
    pub b: Argmax,
    /// Raw any-code-state probability of the hybrid chains at `b`.
    pub p_any_hybrid_raw_at_b: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandscapeTable {
    pub betas: Vec<f64>,
    pub gammas: Vec<f64>,
    pub rows: Vec<LandscapeRow>,
    pub argmax: Vec<ArgmaxRecord>,
    pub seed: u64,
}

impl LandscapeTable {
    pub fn instance_rows(&self, instance: usize) -> impl Iterator<Item = &LandscapeRow> {
        self.rows.iter().filter(move |r| r.instance == Some(instance))
    }

    pub fn pooled_rows(&self) -> impl Iterator<Item = &LandscapeRow> {
        self.rows.iter().filter(|r| r.instance.is_none())
    }

    pub fn to_csv(&self, l: &LandscapeConfig) -> CsvDocument {
        let mut doc = CsvDocument::new(&[
            "instance",
            "beta",
            "gamma",
            "p_success_exact_raw",
            "p_success_any_raw",
            "p_success_exact_decoded",
            "p_success_any_decoded",
            "p_success_exact_hybrid_raw",
            "p_success_any_hybrid_raw",
            "n_chains",
            "seed",
        ]);
        doc.meta("experiment", "hybrid_landscape")
            .meta("k", l.k)
            .meta("instances", l.n_instances)
            .meta("mcmc_budget", format!("{} * C(K,2)", l.mcmc_budget_factor))
            .meta("hybrid_budget", format!("{} * C(K,2)", l.hybrid_budget_factor))
            .meta("penalty_weight", l.penalty_weight)
            .meta("seed", self.seed);
        for r in &self.rows {
            doc.push(vec![
                r.instance.map_or("all".into(), |i| i.to_string()),
                r.beta.to_string(),
                r.gamma.to_string(),
                format!("{:.6}", r.p_exact_raw()),
                format!("{:.6}", r.p_any_raw()),
                format!("{:.6}", r.p_exact_decoded()),
                format!("{:.6}", r.p_any_decoded()),
                format!("{:.6}", r.p_exact_hybrid_raw()),
                format!("{:.6}", r.p_any_hybrid_raw()),
                r.chains.to_string(),
                self.seed.to_string(),
            ]);
        }
        doc
    }

    pub fn argmax_csv(&self) -> CsvDocument {
        let mut doc = CsvDocument::new(&ARGMAX_HEADER);
        doc.meta("experiment", "hybrid_landscape_argmax").meta("seed", self.seed);
        for a in &self.argmax {
            doc.push(vec![
                a.instance.to_string(),
                a.a.beta_index.to_string(),
                a.a.gamma_index.to_string(),
                a.a.beta.to_string(),
                a.a.gamma.to_string(),
                format!("{:.6}", a.a.p),
                a.a.tied.to_string(),
                a.b.beta_index.to_string(),
                a.b.gamma_index.to_string(),
                a.b.beta.to_string(),
                a.b.gamma.to_string(),
                format!("{:.6}", a.b.p),
                a.b.tied.to_string(),
                format!("{:.6}", a.p_any_hybrid_raw_at_b),
            ]);
        }
        doc
    }

    /// Writes `landscape.csv` and `landscape_argmax.csv` into `dir`.
    pub fn write(&self, dir: &Path, l: &LandscapeConfig) -> Result<()> {
        self.to_csv(l).write(&dir.join("landscape.csv"))?;
        self.argmax_csv().write(&dir.join("landscape_argmax.csv"))
    }
}

const ARGMAX_HEADER: [&str; 14] = [
    "instance",
    "a_beta_index",
    "a_gamma_index",
    "a_beta",
    "a_gamma",
    "a_p_exact_raw",
    "a_tied",
    "b_beta_index",
    "b_gamma_index",
    "b_beta",
    "b_gamma",
    "b_p_exact_decoded",
    "b_tied",
    "b_p_any_hybrid_raw",
];

impl ArgmaxRecord {
    /// Reads the records written by [`LandscapeTable::write`].
    pub fn load_all(path: &Path) -> Result<Vec<ArgmaxRecord>> {
        let (header, rows) = read_csv_rows(path)?;
        if header != ARGMAX_HEADER {
            return Err(Error::Config(format!("{} is not an argmax table", path.display())));
        }
        let bad = |row: usize, col: usize| Error::Parse {
            row: row + 1,
            column: col + 1,
            message: format!("malformed field in {}", path.display()),
        };
        rows.iter()
            .enumerate()
            .map(|(ri, r)| {
                let u = |c: usize| r[c].parse::<usize>().map_err(|_| bad(ri, c));
                let f = |c: usize| r[c].parse::<f64>().map_err(|_| bad(ri, c));
                Ok(ArgmaxRecord {
                    instance: u(0)?,
                    a: Argmax {
                        beta_index: u(1)?,
                        gamma_index: u(2)?,
                        beta: f(3)?,
                        gamma: f(4)?,
                        p: f(5)?,
                        tied: u(6)?,
                    },
                    b: Argmax {
                        beta_index: u(7)?,
                        gamma_index: u(8)?,
                        beta: f(9)?,
                        gamma: f(10)?,
                        p: f(11)?,
                        tied: u(12)?,
                    },
                    p_any_hybrid_raw_at_b: f(13)?,
                })
            })
            .collect()
    }
}

fn argmax_of(rows: &[&LandscapeRow], betas: &[f64], gammas: &[f64], score: impl Fn(&LandscapeRow) -> usize) -> Argmax {
    let best = rows.iter().map(|r| score(r)).max().expect("non-empty grid");
    let tied: Vec<&&LandscapeRow> = rows.iter().filter(|r| score(r) == best).collect();
    let n = tied.len() as f64;
    let beta = tied.iter().map(|r| r.beta).sum::<f64>() / n;
    let gamma = tied.iter().map(|r| r.gamma).sum::<f64>() / n;
    // Distances in grid units so both axes count equally.
    let span = |v: &[f64]| (v[v.len() - 1] - v[0]).max(f64::MIN_POSITIVE);
    let (sb, sg) = (span(betas), span(gammas));
    let nearest = tied
        .iter()
        .min_by(|x, y| {
            let d = |r: &LandscapeRow| ((r.beta - beta) / sb).powi(2) + ((r.gamma - gamma) / sg).powi(2);
            d(x).total_cmp(&d(y))
        })
        .expect("non-empty");
    Argmax {
        beta_index: nearest.beta_index,
        gamma_index: nearest.gamma_index,
        beta,
        gamma,
        p: best as f64 / nearest.chains as f64,
        tied: tied.len(),
    }
}

#[derive(Clone, Copy, Default)]
struct ChainHits {
    exact_raw: bool,
    any_raw: bool,
    exact_decoded: bool,
    any_decoded: bool,
    exact_hybrid_raw: bool,
    any_hybrid_raw: bool,
}

fn chain_config(seed: u64, l: &LandscapeConfig, burn_in: usize, samples: usize) -> McmcConfig {
    McmcConfig {
        kernel: l.kernel,
        burn_in_sweeps: burn_in,
        samples_per_chain: samples,
        stride: 1,
        init: InitState::Random,
        seed,
        schedule: Schedule::Constant,
    }
}

pub fn run_hybrid_landscape(cfg: &ExperimentConfig) -> Result<LandscapeTable> {
    cfg.validate()?;
    let instances = load_or_generate_instances(cfg)?;
    run_landscape_on(cfg, &instances)
}

/// Landscape over explicitly given instances (each must carry ground truth).
pub fn run_landscape_on(cfg: &ExperimentConfig, instances: &[Instance]) -> Result<LandscapeTable> {
    cfg.validate()?;
    let l = &cfg.landscape;
    let penalty = l.penalty()?;
    if let Some(i) = instances.iter().position(|inst| inst.ground_state.is_none()) {
        return Err(Error::Config(format!("instance {i} carries no ground truth")));
    }
    let k = instances.first().map_or(l.k, |i| i.k);
    if instances.iter().any(|i| i.k != k) {
        return Err(Error::Config("all instances must share K".into()));
    }
    let n_v = CodeParams::new(k)?.n_v;
    let graph = Arc::new(TannerGraph::build(k, penalty));
    let (betas, gammas) = (l.betas(), l.gammas());
    let (nb, ng) = (betas.len(), gammas.len());

    let tasks: Vec<(usize, usize, usize, usize)> = (0..instances.len())
        .flat_map(|i| (0..nb).flat_map(move |b| (0..ng).flat_map(move |g| (0..l.chains).map(move |c| (i, b, g, c)))))
        .collect();
    let hits: Vec<ChainHits> = cfg.with_pool(|| {
        tasks
            .par_iter()
            .map(|&(i, b, g, c)| -> Result<ChainHits> {
                let h = SlhzHamiltonian::with_graph(&instances[i], betas[b], gammas[g], penalty, Arc::clone(&graph))?;
                let key = [cfg.seed, i as u64, b as u64, g as u64, c as u64];
                let raw_seed = mix_seed(&[&key[..], &[RAW_TAG]].concat());
                let raw = run_chain_with(&h, &chain_config(raw_seed, l, 0, l.mcmc_budget_factor * n_v), |_| {})?;
                let hyb_seed = mix_seed(&[&key[..], &[HYBRID_TAG]].concat());
                let hyb_cfg = chain_config(hyb_seed, l, l.hybrid_burn_in_sweeps, l.hybrid_budget_factor * n_v);
                let hyb = hybrid_summary(&h, &hyb_cfg, &l.bf)?;
                let dec = hyb.decoded.expect("hybrid summary decodes");
                Ok(ChainHits {
                    exact_raw: raw.raw.exact,
                    any_raw: raw.raw.any,
                    exact_decoded: dec.exact,
                    any_decoded: dec.any,
                    exact_hybrid_raw: hyb.raw.exact,
                    any_hybrid_raw: hyb.raw.any,
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;

    let mut rows = Vec::new();
    let mut pooled: Vec<LandscapeRow> = Vec::new();
    for (b, &beta) in betas.iter().enumerate() {
        for (g, &gamma) in gammas.iter().enumerate() {
            pooled.push(LandscapeRow {
                instance: None,
                beta_index: b,
                gamma_index: g,
                beta,
                gamma,
                chains: 0,
                exact_raw: 0,
                any_raw: 0,
                exact_decoded: 0,
                any_decoded: 0,
                exact_hybrid_raw: 0,
                any_hybrid_raw: 0,
            });
        }
    }
    let mut argmax = Vec::new();
    let per_instance = nb * ng * l.chains;
    for i in 0..instances.len() {
        let mut inst_rows = Vec::with_capacity(nb * ng);
        for b in 0..nb {
            for g in 0..ng {
                let start = i * per_instance + (b * ng + g) * l.chains;
                let chunk = &hits[start..start + l.chains];
                let count = |f: fn(&ChainHits) -> bool| chunk.iter().filter(|h| f(h)).count();
                let row = LandscapeRow {
                    instance: Some(i),
                    beta_index: b,
                    gamma_index: g,
                    beta: betas[b],
                    gamma: gammas[g],
                    chains: l.chains,
                    exact_raw: count(|h| h.exact_raw),
                    any_raw: count(|h| h.any_raw),
                    exact_decoded: count(|h| h.exact_decoded),
                    any_decoded: count(|h| h.any_decoded),
                    exact_hybrid_raw: count(|h| h.exact_hybrid_raw),
                    any_hybrid_raw: count(|h| h.any_hybrid_raw),
                };
                let p = &mut pooled[b * ng + g];
                p.chains += row.chains;
                p.exact_raw += row.exact_raw;
                p.any_raw += row.any_raw;
                p.exact_decoded += row.exact_decoded;
                p.any_decoded += row.any_decoded;
                p.exact_hybrid_raw += row.exact_hybrid_raw;
                p.any_hybrid_raw += row.any_hybrid_raw;
                inst_rows.push(row);
            }
        }
        let refs: Vec<&LandscapeRow> = inst_rows.iter().collect();
        let a = argmax_of(&refs, &betas, &gammas, |r| r.exact_raw);
        let bm = argmax_of(&refs, &betas, &gammas, |r| r.exact_decoded);
        let at_b = &inst_rows[bm.beta_index * ng + bm.gamma_index];
        argmax.push(ArgmaxRecord {
            instance: i,
            p_any_hybrid_raw_at_b: at_b.p_any_hybrid_raw(),
            a,
            b: bm,
        });
        rows.extend(inst_rows);
    }
    rows.extend(pooled);
    Ok(LandscapeTable {
        betas,
        gammas,
        rows,
        argmax,
        seed: cfg.seed,
    })
}

/// Averaged error matrix of sampled states at one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorMatrixReport {
    pub instance: usize,
    /// `"A"` (best raw MCMC point) or `"B"` (best hybrid point).
    pub set: &'static str,
    pub beta: f64,
    pub gamma: f64,
    pub matrix: crate::sampler::AverageErrorMatrix,
}

impl ErrorMatrixReport {
    pub fn to_csv(&self, seed: u64) -> CsvDocument {
        let k = self.matrix.k;
        let header: Vec<String> = (0..k).map(|j| format!("c{j}")).collect();
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut doc = CsvDocument::new(&header_refs);
        doc.meta("experiment", "error_matrix")
            .meta("instance", self.instance)
            .meta("set", self.set)
            .meta("beta", self.beta)
            .meta("gamma", self.gamma)
            .meta("samples", self.matrix.n_samples)
            .meta("seed", seed);
        for i in 0..k {
            doc.push((0..k).map(|j| format!("{:.6}", self.matrix.get(i, j))).collect());
        }
        doc
    }
}

/// Averaged error matrices at parameter sets A and B of every instance,
/// using the argmax table of a previous landscape run.
pub fn run_error_matrix_report(cfg: &ExperimentConfig, argmax: &[ArgmaxRecord]) -> Result<Vec<ErrorMatrixReport>> {
    cfg.validate()?;
    let l = &cfg.landscape;
    let instances = load_or_generate_instances(cfg)?;
    let penalty = l.penalty()?;
    let mut jobs = Vec::new();
    for rec in argmax {
        let inst = instances
            .get(rec.instance)
            .ok_or_else(|| Error::Config(format!("argmax refers to unknown instance {}", rec.instance)))?;
        let betas = l.betas();
        let gammas = l.gammas();
        for (set, pt) in [("A", &rec.a), ("B", &rec.b)] {
            let (beta, gamma) = match (betas.get(pt.beta_index), gammas.get(pt.gamma_index)) {
                (Some(&b), Some(&g)) => (b, g),
                _ => return Err(Error::Config("argmax table does not match the configured grid".into())),
            };
            jobs.push((rec.instance, inst, set, beta, gamma));
        }
    }
    cfg.with_pool(|| {
        jobs.par_iter()
            .map(|&(idx, inst, set, beta, gamma)| {
                let h = SlhzHamiltonian::new(inst, beta, gamma, penalty)?;
                let target = inst
                    .target_code_state()
                    .ok_or_else(|| Error::Config(format!("instance {idx} carries no ground truth")))?;
                let n_v = inst.params().n_v;
                let mut acc = ErrorMatrixAccumulator::new(&target);
                for c in 0..l.chains {
                    let seed = mix_seed(&[cfg.seed, MATRIX_TAG, idx as u64, u64::from(set == "B"), c as u64]);
                    let mc = chain_config(seed, l, 1, l.error_matrix_budget_factor * n_v);
                    let mut part = ErrorMatrixAccumulator::new(&target);
                    run_chain_with(&h, &mc, |s| part.push(&s.chain.state()))?;
                    acc.merge(&part);
                }
                Ok(ErrorMatrixReport {
                    instance: idx,
                    set,
                    beta,
                    gamma,
                    matrix: acc.finish()?,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?
}

/// Writes one CSV grid per report into `dir`.
pub fn write_error_matrices(dir: &Path, reports: &[ErrorMatrixReport], seed: u64) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for r in reports {
        let path = dir.join(format!("error_matrix_{}_{:02}.csv", r.set, r.instance));
        r.to_csv(seed).write(&path)?;
        paths.push(path);
    }
    Ok(paths)
}
