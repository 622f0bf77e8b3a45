//! Single-input decoding traces, instance generation and sampler validation.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::landscape::{instance_path, instance_seed};
use super::{CsvDocument, DecoderKind, ExperimentConfig};
use crate::channels::{gen_instance, mix_seed, stream_rng, Instance};
use crate::decoders::{bf_decode_traced, mwd_decode, BpConfig, BpDecoder, DecodeOutcome};
use crate::error::{Error, Result};
use crate::oracle::{exact_boltzmann, state_index};
use crate::parity_code::{syndrome3, CheckWeight, SpinMatrix};
use crate::sampler::{run_chain_with, InitState, Kernel, McmcConfig, Schedule, SlhzHamiltonian};

const VALIDATE_TAG: u64 = 0x7e4;

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOneReport {
    pub decoder: DecoderKind,
    pub outcome: DecodeOutcome,
    /// The input followed by the state after each iteration.
    pub frames: Vec<SpinMatrix>,
    pub truth: Option<SpinMatrix>,
}

impl DecodeOneReport {
    /// Per-iteration error count (against the truth, when known) and
    /// number of violated weight-3 checks.
    pub fn trace_csv(&self) -> CsvDocument {
        let mut doc = CsvDocument::new(&["iteration", "errors", "violated_checks"]);
        doc.meta("experiment", "decode_one")
            .meta("decoder", self.decoder.as_str())
            .meta("k", self.outcome.final_state.k())
            .meta("status", self.outcome.status.as_str());
        for (n, f) in self.frames.iter().enumerate() {
            doc.push(vec![
                n.to_string(),
                self.truth.as_ref().map_or(String::new(), |t| f.hamming_distance(t).to_string()),
                syndrome3(f).violated().to_string(),
            ]);
        }
        doc
    }

    /// Every frame as `K` rows tagged with the iteration.
    pub fn frames_csv(&self) -> CsvDocument {
        let k = self.outcome.final_state.k();
        let mut header = vec!["iteration".to_string(), "row".to_string()];
        header.extend((0..k).map(|j| format!("c{j}")));
        let refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut doc = CsvDocument::new(&refs);
        doc.meta("experiment", "decode_one_frames").meta("decoder", self.decoder.as_str());
        for (n, f) in self.frames.iter().enumerate() {
            for i in 0..k {
                let mut row = vec![n.to_string(), i.to_string()];
                row.extend(f.row(i).iter().map(|v| v.to_string()));
                doc.push(row);
            }
        }
        doc
    }

    pub fn outcome_csv(&self) -> CsvDocument {
        let header: Vec<&str> = DecodeOutcome::CSV_HEADER.split(',').collect();
        let mut doc = CsvDocument::new(&header);
        doc.meta("decoder", self.decoder.as_str());
        doc.push(
            self.outcome
                .to_csv_row(self.truth.as_ref())
                .split(',')
                .map(String::from)
                .collect(),
        );
        doc
    }

    /// Writes `decode_outcome.csv`, `decode_trace.csv` and `decode_frames.csv`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        self.outcome_csv().write(&dir.join("decode_outcome.csv"))?;
        self.trace_csv().write(&dir.join("decode_trace.csv"))?;
        self.frames_csv().write(&dir.join("decode_frames.csv"))
    }
}

/// Decodes the matrix in `cfg.decode.input` with the selected decoder.
pub fn decode_one(cfg: &ExperimentConfig) -> Result<DecodeOneReport> {
    cfg.validate()?;
    let d = &cfg.decode;
    let path = d
        .input
        .as_ref()
        .ok_or_else(|| Error::Config("decode-one needs an input matrix".into()))?;
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let r = SpinMatrix::from_csv(&text, d.k)?;
    let truth = match &d.instance {
        Some(p) => {
            let inst = Instance::load(p)?;
            if inst.k != r.k() {
                return Err(Error::Config(format!(
                    "instance has K = {}, input has K = {}",
                    inst.k,
                    r.k()
                )));
            }
            inst.target_code_state()
        }
        None => None,
    };
    decode_matrix(&r, d.decoder, cfg, truth)
}

/// [`decode_one`] on an in-memory matrix.
pub fn decode_matrix(
    r: &SpinMatrix,
    decoder: DecoderKind,
    cfg: &ExperimentConfig,
    truth: Option<SpinMatrix>,
) -> Result<DecodeOneReport> {
    let d = &cfg.decode;
    let (outcome, frames) = match decoder {
        DecoderKind::Bf => {
            let mut rng = stream_rng(cfg.seed, 0);
            bf_decode_traced(r, &d.bf, &mut rng)
        }
        DecoderKind::Bp => {
            let bp = BpConfig {
                prior_epsilon: d.bp_prior,
                iterations: d.bp_iterations,
                ..BpConfig::default()
            };
            BpDecoder::new(r.k())?.decode_traced(r, &bp)?
        }
        DecoderKind::Mwd => {
            let out = mwd_decode(r)?;
            let mut frames = vec![r.clone()];
            if out.error_weight > 0 {
                frames.push(out.outcome.final_state.clone());
            }
            (out.outcome, frames)
        }
        DecoderKind::Mcmc => {
            return Err(Error::Config("decode-one supports bf, bp and mwd".into()));
        }
    };
    Ok(DecodeOneReport {
        decoder,
        outcome,
        frames,
        truth,
    })
}

/// Generates `cfg.instances.count` instances into the instance directory.
pub fn gen_instances(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let g = &cfg.instances;
    let dir = cfg.instance_dir();
    let instances: Vec<Instance> = cfg.with_pool(|| {
        (0..g.count)
            .into_par_iter()
            .map(|idx| gen_instance(g.k, g.coupling_bound, instance_seed(cfg.seed, idx), g.with_ground_truth))
            .collect::<Result<Vec<_>>>()
    })??;
    let mut paths = Vec::new();
    for (idx, inst) in instances.iter().enumerate() {
        let path = instance_path(&dir, idx);
        inst.save(&path)?;
        paths.push(path);
    }
    Ok(paths)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationRow {
    pub kernel: Kernel,
    pub beta: f64,
    pub gamma: f64,
    pub steps: usize,
    pub total_variation: f64,
}

/// Total-variation distance between long `K = 4` chains and the exact
/// Boltzmann distribution, holding-time weighted for the rejection-free kernel.
pub fn sampler_validate(cfg: &ExperimentConfig) -> Result<Vec<ValidationRow>> {
    cfg.validate()?;
    let v = &cfg.validate;
    let penalty = CheckWeight::from_weight(v.penalty_weight)?;
    let inst = gen_instance(4, v.coupling_bound, mix_seed(&[cfg.seed, VALIDATE_TAG]), false)?;
    let jobs: Vec<(usize, Kernel)> = (0..v.points.len())
        .flat_map(|p| v.kernels.iter().map(move |&k| (p, k)))
        .collect();
    cfg.with_pool(|| {
        jobs.par_iter()
            .map(|&(p, kernel)| {
                let [beta, gamma] = v.points[p];
                let h = SlhzHamiltonian::new(&inst, beta, gamma, penalty)?;
                let table = exact_boltzmann(&h)?;
                let mc = McmcConfig {
                    kernel,
                    burn_in_sweeps: v.burn_in_sweeps,
                    samples_per_chain: v.steps,
                    stride: 1,
                    init: InitState::Random,
                    seed: mix_seed(&[cfg.seed, VALIDATE_TAG, p as u64, kernel as u64]),
                    schedule: Schedule::Constant,
                };
                let mut hist = vec![0.0; table.probabilities.len()];
                run_chain_with(&h, &mc, |s| {
                    let idx = state_index(&s.chain.state());
                    hist[idx] += s.weight;
                })?;
                Ok(ValidationRow {
                    kernel,
                    beta,
                    gamma,
                    steps: v.steps,
                    total_variation: table.total_variation(&hist),
                })
            })
            .collect::<Result<Vec<_>>>()
    })?
}

pub fn validation_csv(rows: &[ValidationRow], seed: u64) -> CsvDocument {
    let mut doc = CsvDocument::new(&["kernel", "beta", "gamma", "steps", "total_variation"]);
    doc.meta("experiment", "sampler_validate").meta("k", 4).meta("seed", seed);
    for r in rows {
        doc.push(vec![
            match r.kernel {
                Kernel::Metropolis => "metropolis".into(),
                Kernel::RejectionFree => "rejection_free".into(),
            },
            r.beta.to_string(),
            r.gamma.to_string(),
            r.steps.to_string(),
            format!("{:.6}", r.total_variation),
        ]);
    }
    doc
}
