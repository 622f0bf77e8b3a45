//! Exact, exponential-cost references for small `K`.

use rayon::prelude::*;

use crate::channels::Instance;
use crate::error::{Error, Result};
use crate::parity_code::{encode, matrix_view, CodeParams, LogicalState, SpinMatrix};
use crate::sampler::SlhzHamiltonian;

/// Largest `K` accepted by the exhaustive ground-state search (`2^(K-1)` states).
pub const MAX_BRUTE_FORCE_K: usize = 28;

/// Largest `K` accepted by [`exact_boltzmann`] (`2^C(K,2)` states).
pub const MAX_BOLTZMANN_K: usize = 5;

/// Largest `K` accepted by [`exact_marginals`].
pub const MAX_MARGINALS_K: usize = 16;

/// Minimisers retained when the ground set is highly degenerate.
const MAX_STORED_MINIMIZERS: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct ExactSolution {
    /// Lowest minimiser in bit order, first spin `+1`.
    pub minimizer: LogicalState,
    pub min_energy: f64,
    /// More than one minimiser modulo global flip.
    pub degenerate: bool,
    /// Number of minimisers modulo global flip.
    pub n_minimizers: u64,
    /// All minimisers (first spin `+1`) unless there were too many to keep.
    pub all_minimizers: Option<Vec<LogicalState>>,
}

/// Pairwise weights `w_ij` in canonical pair order; the objective is
/// `E(Z) = -Σ_{i<j} w_ij Z_i Z_j`.
struct PairwiseProblem<'a> {
    k: usize,
    weights: &'a [f64],
}

impl PairwiseProblem<'_> {
    fn weight_matrix(&self) -> Vec<f64> {
        let k = self.k;
        let mut w = vec![0.0; k * k];
        let mut p = 0;
        for i in 0..k {
            for j in i + 1..k {
                w[i * k + j] = self.weights[p];
                w[j * k + i] = self.weights[p];
                p += 1;
            }
        }
        w
    }

    /// Exact energy, summed in canonical pair order.
    fn energy_bits(&self, bits: u64) -> f64 {
        let k = self.k;
        let spin = |i: usize| if bits >> i & 1 == 1 { -1.0 } else { 1.0 };
        let mut e = 0.0;
        let mut p = 0;
        for i in 0..k {
            for j in i + 1..k {
                e -= self.weights[p] * spin(i) * spin(j);
                p += 1;
            }
        }
        e
    }
}

/// Candidate minimisers found in one chunk of the enumeration.
struct ChunkBest {
    energy: f64,
    bits: Vec<u64>,
    count: u64,
}

fn enumerate_chunk(problem: &PairwiseProblem, w: &[f64], high: u64, low_bits: u32, tol: f64) -> ChunkBest {
    let k = problem.k;
    // Spin 0 is fixed at +1; free spins are 1..k, free bit b drives spin b+1.
    let mut bits: u64 = high << (low_bits + 1);
    let mut z: Vec<f64> = (0..k).map(|i| if bits >> i & 1 == 1 { -1.0 } else { 1.0 }).collect();
    let mut field: Vec<f64> = (0..k)
        .map(|m| (0..k).filter(|&j| j != m).map(|j| w[m * k + j] * z[j]).sum())
        .collect();
    let mut energy: f64 = -0.5 * (0..k).map(|m| z[m] * field[m]).sum::<f64>();

    let mut best = ChunkBest {
        energy,
        bits: vec![bits],
        count: 1,
    };
    let consider = |best: &mut ChunkBest, energy: f64, bits: u64| {
        if energy < best.energy - tol {
            best.energy = energy;
            best.bits.clear();
            best.bits.push(bits);
            best.count = 1;
        } else if energy <= best.energy + tol {
            if energy < best.energy {
                best.energy = energy;
            }
            best.count += 1;
            if best.bits.len() < MAX_STORED_MINIMIZERS {
                best.bits.push(bits);
            }
        }
    };

    let steps: u64 = 1u64 << low_bits;
    for g in 1..steps {
        let b = g.trailing_zeros() as usize;
        let m = b + 1;
        energy += 2.0 * z[m] * field[m];
        let old = z[m];
        z[m] = -old;
        bits ^= 1 << m;
        let row = &w[m * k..(m + 1) * k];
        for (j, f) in field.iter_mut().enumerate() {
            if j != m {
                *f -= 2.0 * row[j] * old;
            }
        }
        consider(&mut best, energy, bits);
    }
    best
}

fn minimize_pairwise(problem: &PairwiseProblem) -> ExactSolution {
    let k = problem.k;
    let w = problem.weight_matrix();
    let free = (k - 1) as u32;
    let high_bits = free.min(6);
    let low_bits = free - high_bits;
    let scale: f64 = problem.weights.iter().map(|x| x.abs()).sum::<f64>() + 1.0;
    let tol = 1e-9 * scale;

    let chunks: Vec<ChunkBest> = (0..1u64 << high_bits)
        .into_par_iter()
        .map(|high| enumerate_chunk(problem, &w, high, low_bits, tol))
        .collect();

    let approx_best = chunks.iter().map(|c| c.energy).fold(f64::INFINITY, f64::min);
    let mut total_near = 0u64;
    let mut candidates: Vec<u64> = Vec::new();
    for c in &chunks {
        if c.energy <= approx_best + tol {
            total_near += c.count;
            candidates.extend(c.bits.iter().copied());
        }
    }
    // Re-evaluate candidates exactly and keep the true minimum.
    let exact: Vec<(f64, u64)> = candidates
        .iter()
        .map(|&b| (problem.energy_bits(b), b))
        .collect();
    let min_energy = exact.iter().map(|e| e.0).fold(f64::INFINITY, f64::min);
    let mut minimizers: Vec<u64> = exact
        .iter()
        .filter(|e| e.0 == min_energy)
        .map(|e| e.1)
        .collect();
    minimizers.sort_unstable();
    let truncated = total_near as usize > candidates.len();
    let n_minimizers = if truncated {
        total_near
    } else {
        minimizers.len() as u64
    };
    ExactSolution {
        minimizer: LogicalState::from_bits(k, minimizers[0]),
        min_energy,
        degenerate: n_minimizers > 1,
        n_minimizers,
        all_minimizers: (!truncated)
            .then(|| minimizers.iter().map(|&b| LogicalState::from_bits(k, b)).collect()),
    }
}

/// Exhaustive minimisation of `-Σ J_ij Z_i Z_j` over the `2^(K-1)` states
/// with `Z_1 = +1`. Ties are broken towards the lowest bit pattern.
pub fn brute_force_ground_state(instance: &Instance) -> Result<ExactSolution> {
    brute_force_ground_state_capped(instance, MAX_BRUTE_FORCE_K)
}

pub fn brute_force_ground_state_capped(instance: &Instance, max_k: usize) -> Result<ExactSolution> {
    if instance.k > max_k.min(63) {
        return Err(Error::Capacity {
            what: "brute-force ground state",
            requested: instance.k,
            limit: max_k,
        });
    }
    Ok(minimize_pairwise(&PairwiseProblem {
        k: instance.k,
        weights: &instance.couplings,
    }))
}

/// Ground state of `-Σ g_ij Z_i Z_j` for `g = r`, i.e. the code-state at
/// minimum Hamming distance from `r`. Used by minimum-weight decoding.
pub(crate) fn nearest_code_state(r: &SpinMatrix) -> ExactSolution {
    let weights: Vec<f64> = crate::parity_code::vector_view(r)
        .into_iter()
        .map(f64::from)
        .collect();
    minimize_pairwise(&PairwiseProblem { k: r.k(), weights: &weights })
}

/// Scan over all `2^K` logical states without the global-flip shortcut.
/// Returns the minimum and the minimisers canonicalised to `Z_1 = +1`.
pub fn full_scan_ground_state(instance: &Instance) -> Result<(f64, Vec<LogicalState>)> {
    const LIMIT: usize = 20;
    if instance.k > LIMIT {
        return Err(Error::Capacity {
            what: "full-scan ground state",
            requested: instance.k,
            limit: LIMIT,
        });
    }
    let mut best = f64::INFINITY;
    let mut argmin = Vec::new();
    for bits in 0..1u64 << instance.k {
        let z = LogicalState::from_bits(instance.k, bits);
        let e = instance.source_energy(&z);
        if e < best {
            best = e;
            argmin.clear();
        }
        if e == best {
            argmin.push(z.canonical());
        }
    }
    argmin.sort_by_key(|z| z.spins().iter().enumerate().fold(0u64, |acc, (i, &s)| acc | (u64::from(s < 0) << i)));
    argmin.dedup();
    Ok((best, argmin))
}

/// Exact Boltzmann distribution of an SLHZ Hamiltonian over all symmetric
/// ±1 matrices. State `b` has pair `p` set to `-1` iff bit `p` of `b` is set.
#[derive(Debug, Clone)]
pub struct BoltzmannTable {
    pub k: usize,
    pub energies: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl BoltzmannTable {
    pub fn state(&self, index: usize) -> SpinMatrix {
        state_from_index(self.k, index)
    }

    /// Total-variation distance to an (unnormalised) histogram over states.
    pub fn total_variation(&self, weights: &[f64]) -> f64 {
        assert_eq!(weights.len(), self.probabilities.len());
        let total: f64 = weights.iter().sum();
        0.5 * self
            .probabilities
            .iter()
            .zip(weights)
            .map(|(p, w)| (p - w / total).abs())
            .sum::<f64>()
    }
}

/// Index of a small-`K` matrix in a [`BoltzmannTable`].
pub fn state_index(x: &SpinMatrix) -> usize {
    crate::parity_code::vector_view(x)
        .iter()
        .enumerate()
        .fold(0usize, |acc, (p, &s)| acc | (usize::from(s < 0) << p))
}

pub fn state_from_index(k: usize, index: usize) -> SpinMatrix {
    let n_v = k * (k - 1) / 2;
    let v: Vec<i8> = (0..n_v).map(|p| if index >> p & 1 == 1 { -1 } else { 1 }).collect();
    matrix_view(k, &v).expect("length matches")
}

/// Normalised `exp(-H)/Z` over every state of a `K <= 5` system.
pub fn exact_boltzmann(h: &SlhzHamiltonian) -> Result<BoltzmannTable> {
    let k = h.k();
    if k > MAX_BOLTZMANN_K {
        return Err(Error::Capacity {
            what: "exact Boltzmann table",
            requested: k,
            limit: MAX_BOLTZMANN_K,
        });
    }
    let n_states = 1usize << CodeParams::new(k)?.n_v;
    let energies: Vec<f64> = (0..n_states).map(|b| h.energy(&state_from_index(k, b))).collect();
    let e_min = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = energies.iter().map(|e| (-(e - e_min)).exp()).collect();
    let z: f64 = weights.iter().sum();
    Ok(BoltzmannTable {
        k,
        energies,
        probabilities: weights.into_iter().map(|w| w / z).collect(),
    })
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Posterior LLRs `log P(x_p=+1|r)/P(x_p=-1|r)` per pair, by exact summation
/// over all code-states under i.i.d. flips with probability `epsilon`.
pub fn exact_marginals(r: &SpinMatrix, epsilon: f64) -> Result<Vec<f64>> {
    let k = r.k();
    if k > MAX_MARGINALS_K {
        return Err(Error::Capacity {
            what: "exact marginals",
            requested: k,
            limit: MAX_MARGINALS_K,
        });
    }
    if !(epsilon > 0.0 && epsilon <= 0.5) {
        return Err(Error::invalid(format!("epsilon must lie in (0, 0.5], got {epsilon}")));
    }
    let n_v = k * (k - 1) / 2;
    let (l_agree, l_flip) = ((1.0 - epsilon).ln(), epsilon.ln());
    let rv = crate::parity_code::vector_view(r);
    let mut plus: Vec<Vec<f64>> = vec![Vec::new(); n_v];
    let mut minus: Vec<Vec<f64>> = vec![Vec::new(); n_v];
    for bits in 0..1u64 << (k - 1) {
        let z = encode(&LogicalState::from_bits(k, bits << 1));
        let zv = crate::parity_code::vector_view(&z);
        let d = zv.iter().zip(&rv).filter(|(a, b)| a != b).count();
        let log_l = (n_v - d) as f64 * l_agree + d as f64 * l_flip;
        for (p, &s) in zv.iter().enumerate() {
            if s > 0 {
                plus[p].push(log_l);
            } else {
                minus[p].push(log_l);
            }
        }
    }
    Ok((0..n_v)
        .map(|p| log_sum_exp(&plus[p]) - log_sum_exp(&minus[p]))
        .collect())
}
