//! Failure probability of each decoder under i.i.d. spin-flip noise, with
//! the all-one code-state transmitted.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use super::{binomial_sigma, CsvDocument, DecoderKind, ExperimentConfig};
use crate::channels::{mix_seed, sample_iid_error, stream_rng, IidNoise};
use crate::decoders::{bf_decode, BpConfig, BpDecoder, DecodeStatus};
use crate::error::Result;
use crate::parity_code::{CheckWeight, CodeParams, SpinMatrix};
use crate::sampler::{ChainState, SlhzHamiltonian};

const IID_TAG: u64 = 0x11d;

/// Smallest prior accepted when the BP prior follows the channel.
const MIN_PRIOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub decoder: DecoderKind,
    pub k: usize,
    pub epsilon: f64,
    pub trials: usize,
    pub successes: usize,
    /// Failures other than ties.
    pub failures: usize,
    pub ties: usize,
    pub wall_time_per_trial: f64,
}

impl BenchRecord {
    pub fn failure_probability(&self) -> f64 {
        (self.failures + self.ties) as f64 / self.trials as f64
    }

    pub fn success_probability(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }

    pub fn sigma(&self) -> f64 {
        binomial_sigma(self.failure_probability(), self.trials)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchTable {
    pub records: Vec<BenchRecord>,
    pub seed: u64,
}

impl BenchTable {
    pub fn get(&self, decoder: DecoderKind, k: usize, epsilon: f64) -> Option<&BenchRecord> {
        self.records
            .iter()
            .find(|r| r.decoder == decoder && r.k == k && r.epsilon == epsilon)
    }

    /// Deterministic table; wall times are left out.
    pub fn to_csv(&self) -> CsvDocument {
        let mut doc = CsvDocument::new(&[
            "decoder",
            "k",
            "epsilon",
            "trials",
            "successes",
            "failures",
            "ties",
            "failure_probability",
            "sigma",
        ]);
        doc.meta("experiment", "iid_bench").meta("seed", self.seed);
        for r in &self.records {
            doc.push(vec![
                r.decoder.as_str().into(),
                r.k.to_string(),
                r.epsilon.to_string(),
                r.trials.to_string(),
                r.successes.to_string(),
                r.failures.to_string(),
                r.ties.to_string(),
                format!("{:.6}", r.failure_probability()),
                format!("{:.6}", r.sigma()),
            ]);
        }
        doc
    }

    pub fn timing_csv(&self) -> CsvDocument {
        let mut doc = CsvDocument::new(&["decoder", "k", "epsilon", "wall_time_per_trial_s"]);
        for r in &self.records {
            doc.push(vec![
                r.decoder.as_str().into(),
                r.k.to_string(),
                r.epsilon.to_string(),
                format!("{:.3e}", r.wall_time_per_trial),
            ]);
        }
        doc
    }

    /// Writes `iid_bench.csv` and `iid_bench_timing.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("iid_bench.csv");
        self.to_csv().write(&path)?;
        self.timing_csv().write(&dir.join("iid_bench_timing.csv"))?;
        Ok(path)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Trial {
    Success,
    Failure,
    Tie,
}

/// Syndrome-only sampler started from the received word: success when the
/// chain visits the transmitted state within the step budget.
fn mcmc_trial(h: &SlhzHamiltonian, r: &SpinMatrix, steps: usize, rng: &mut impl rand::Rng) -> Trial {
    let mut chain = ChainState::new(h, r).expect("dimensions match");
    let is_target = |c: &ChainState| c.is_code_state() && c.spins().iter().all(|&s| s == 1);
    if is_target(&chain) {
        return Trial::Success;
    }
    for _ in 0..steps {
        if chain.rejection_free_move(rng).is_none() {
            break;
        }
        if is_target(&chain) {
            return Trial::Success;
        }
    }
    Trial::Failure
}

pub fn run_iid_bench(cfg: &ExperimentConfig) -> Result<BenchTable> {
    cfg.validate()?;
    let iid = &cfg.iid;
    let mut records = Vec::new();
    for &k in &iid.sizes {
        let params = CodeParams::new(k)?;
        let truth = SpinMatrix::ones(k);
        let bp_decoder = if iid.decoders.contains(&DecoderKind::Bp) {
            Some(BpDecoder::new(k)?)
        } else {
            None
        };
        let sampler = SlhzHamiltonian::syndrome_only(k, iid.mcmc_gamma, CheckWeight::Three)?;
        for &eps in &iid.epsilons {
            let noise = IidNoise::new(eps)?;
            let bp_cfg = BpConfig {
                prior_epsilon: iid.bp_prior.unwrap_or(eps.clamp(MIN_PRIOR, 0.5 - MIN_PRIOR)),
                iterations: iid.bp_iterations,
                clamp: iid.bp_clamp,
                early_stop: true,
            };
            for &decoder in &iid.decoders {
                if decoder == DecoderKind::Mwd && k > crate::oracle::MAX_BRUTE_FORCE_K {
                    return Err(crate::Error::Capacity {
                        what: "minimum-weight decoding",
                        requested: k,
                        limit: crate::oracle::MAX_BRUTE_FORCE_K,
                    });
                }
                let start = Instant::now();
                let outcomes: Vec<Trial> = cfg.with_pool(|| {
                    (0..iid.trials)
                        .into_par_iter()
                        .map(|t| {
                            let trial_seed = mix_seed(&[cfg.seed, IID_TAG, k as u64, eps.to_bits(), t as u64]);
                            let r = sample_iid_error(params, noise, &mut stream_rng(trial_seed, 0));
                            let mut rng = stream_rng(trial_seed, 1);
                            match decoder {
                                DecoderKind::Bf => {
                                    let out = bf_decode(&r, &iid.bf, &mut rng);
                                    if out.status == DecodeStatus::Tie {
                                        Trial::Tie
                                    } else if out.matches(&truth) {
                                        Trial::Success
                                    } else {
                                        Trial::Failure
                                    }
                                }
                                DecoderKind::Bp => {
                                    let dec = bp_decoder.as_ref().expect("built for bp");
                                    let out = dec.decode(&r, &bp_cfg).expect("validated config");
                                    if out.matches(&truth) {
                                        Trial::Success
                                    } else {
                                        Trial::Failure
                                    }
                                }
                                DecoderKind::Mcmc => {
                                    mcmc_trial(&sampler, &r, iid.mcmc_steps_per_spin * params.n_v, &mut rng)
                                }
                                DecoderKind::Mwd => {
                                    let out = crate::decoders::mwd_decode(&r).expect("size checked");
                                    if out.outcome.final_state == truth && out.n_minimizers == 1 {
                                        Trial::Success
                                    } else {
                                        Trial::Failure
                                    }
                                }
                            }
                        })
                        .collect()
                })?;
                let elapsed = start.elapsed().as_secs_f64();
                let count = |want: Trial| outcomes.iter().filter(|&&o| o == want).count();
                records.push(BenchRecord {
                    decoder,
                    k,
                    epsilon: eps,
                    trials: iid.trials,
                    successes: count(Trial::Success),
                    failures: count(Trial::Failure),
                    ties: count(Trial::Tie),
                    wall_time_per_trial: elapsed / iid.trials as f64,
                });
            }
        }
    }
    Ok(BenchTable {
        records,
        seed: cfg.seed,
    })
}
