//! Hard- and soft-decision decoders on the weight-3 checks: parallel bit
//! flipping, weighted/gradient-descent inversion functions, sum-product
//! belief propagation and exhaustive minimum-weight decoding.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channels::CrosstalkParams;
use crate::error::{Error, Result};
use crate::oracle::{nearest_code_state, MAX_BRUTE_FORCE_K};
use crate::parity_code::{
    encode, is_code_state, matrix_view, pair_index, vector_view, CheckWeight, SpinMatrix, TannerGraph,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TiePolicy {
    /// A tied vote ends decoding as a failure.
    #[default]
    Fail,
    CoinFlip,
    /// A tied vote keeps the current value.
    Keep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BfConfig {
    pub max_iterations: usize,
    pub tie_policy: TiePolicy,
    /// Stop once a code-state is reached or an iteration flips nothing.
    pub early_stop: bool,
}

impl Default for BfConfig {
    fn default() -> Self {
        Self {
            max_iterations: 5,
            tie_policy: TiePolicy::Fail,
            early_stop: true,
        }
    }
}

impl BfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeStatus {
    ConvergedCodeState,
    /// Stopped changing without reaching a code-state.
    ConvergedFixedPoint,
    Tie,
    MaxIterReached,
}

impl DecodeStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            DecodeStatus::ConvergedCodeState => "converged_code_state",
            DecodeStatus::ConvergedFixedPoint => "converged_fixed_point",
            DecodeStatus::Tie => "tie",
            DecodeStatus::MaxIterReached => "max_iter_reached",
        }
    }

    pub fn is_success(self) -> bool {
        self == DecodeStatus::ConvergedCodeState
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutcome {
    pub final_state: SpinMatrix,
    pub iterations_used: usize,
    pub status: DecodeStatus,
    pub flips_per_iteration: Vec<usize>,
    pub ties_per_iteration: Vec<usize>,
}

impl DecodeOutcome {
    pub const CSV_HEADER: &'static str = "status,iterations_used,flips_per_iteration,ties,hamming_to_truth";

    /// Decoded to exactly `truth`.
    pub fn matches(&self, truth: &SpinMatrix) -> bool {
        self.status.is_success() && self.final_state == *truth
    }

    /// One CSV row; flips are `;`-separated, the distance is blank without a truth.
    pub fn to_csv_row(&self, truth: Option<&SpinMatrix>) -> String {
        let flips: Vec<String> = self.flips_per_iteration.iter().map(usize::to_string).collect();
        let ties: usize = self.ties_per_iteration.iter().sum();
        let dist = truth.map_or(String::new(), |t| self.final_state.hamming_distance(t).to_string());
        format!(
            "{},{},{},{},{}",
            self.status.as_str(),
            self.iterations_used,
            flips.join(";"),
            ties,
            dist
        )
    }
}

/// Result of one parallel update.
#[derive(Debug, Clone, PartialEq)]
pub struct BfStep {
    pub next: SpinMatrix,
    pub flips: usize,
    pub ties: usize,
}

/// `sign[x (x - I)]` with the diagonal reset to `+1`. Off-diagonal entry
/// `(i, j)` of `x (x - I)` is `x_ij + Σ_{l≠i,j} x_il x_lj`; since `x` is
/// symmetric it is the dot product of rows `i` and `j` minus `x_ij`.
pub fn bf_step<R: Rng + ?Sized>(x: &SpinMatrix, tie_policy: TiePolicy, rng: &mut R) -> BfStep {
    let k = x.k();
    let mut next = x.clone();
    let (mut flips, mut ties) = (0, 0);
    for i in 0..k {
        let ri = x.row(i);
        for j in i + 1..k {
            let rj = x.row(j);
            let dot: i32 = ri.iter().zip(rj).map(|(&a, &b)| i32::from(a * b)).sum();
            let arg = dot - i32::from(ri[j]);
            let v = match arg.signum() {
                1 => 1,
                -1 => -1,
                _ => {
                    ties += 1;
                    match tie_policy {
                        TiePolicy::CoinFlip => {
                            if rng.gen::<bool>() {
                                1
                            } else {
                                -1
                            }
                        }
                        TiePolicy::Fail | TiePolicy::Keep => ri[j],
                    }
                }
            };
            if v != ri[j] {
                next.set(i, j, v);
                flips += 1;
            }
        }
    }
    BfStep { next, flips, ties }
}

fn bf_run<R: Rng + ?Sized>(
    r: &SpinMatrix,
    cfg: &BfConfig,
    rng: &mut R,
    mut snapshot: impl FnMut(&SpinMatrix),
) -> DecodeOutcome {
    let mut x = r.clone();
    snapshot(&x);
    let mut flips = Vec::new();
    let mut ties = Vec::new();
    if is_code_state(&x) {
        return DecodeOutcome {
            final_state: x,
            iterations_used: 0,
            status: DecodeStatus::ConvergedCodeState,
            flips_per_iteration: flips,
            ties_per_iteration: ties,
        };
    }
    let mut status = DecodeStatus::MaxIterReached;
    for n in 1..=cfg.max_iterations {
        let step = bf_step(&x, cfg.tie_policy, rng);
        flips.push(step.flips);
        ties.push(step.ties);
        x = step.next;
        snapshot(&x);
        if step.ties > 0 && cfg.tie_policy == TiePolicy::Fail {
            return DecodeOutcome {
                final_state: x,
                iterations_used: n,
                status: DecodeStatus::Tie,
                flips_per_iteration: flips,
                ties_per_iteration: ties,
            };
        }
        status = if is_code_state(&x) {
            DecodeStatus::ConvergedCodeState
        } else if step.flips == 0 {
            DecodeStatus::ConvergedFixedPoint
        } else {
            DecodeStatus::MaxIterReached
        };
        if cfg.early_stop && status != DecodeStatus::MaxIterReached {
            break;
        }
    }
    DecodeOutcome {
        final_state: x,
        iterations_used: flips.len(),
        status,
        flips_per_iteration: flips,
        ties_per_iteration: ties,
    }
}

/// Iterated parallel bit flipping.
pub fn bf_decode<R: Rng + ?Sized>(r: &SpinMatrix, cfg: &BfConfig, rng: &mut R) -> DecodeOutcome {
    bf_run(r, cfg, rng, |_| {})
}

/// [`bf_decode`] also returning the input and every iterate.
pub fn bf_decode_traced<R: Rng + ?Sized>(
    r: &SpinMatrix,
    cfg: &BfConfig,
    rng: &mut R,
) -> (DecodeOutcome, Vec<SpinMatrix>) {
    let mut frames = Vec::new();
    let out = bf_run(r, cfg, rng, |x| frames.push(x.clone()));
    (out, frames)
}

/// `Σ_{l≠i,j} s_ijl(x)` over the weight-3 checks containing pair `(i, j)`.
pub fn syndrome_sum(x: &SpinMatrix, i: usize, j: usize) -> i32 {
    let (ri, rj) = (x.row(i), x.row(j));
    let xij = ri[j];
    (0..x.k())
        .filter(|&l| l != i && l != j)
        .map(|l| i32::from(xij * ri[l] * rj[l]))
        .sum()
}

fn weighted_syndrome_sum(x: &SpinMatrix, i: usize, j: usize, weight: impl Fn(usize) -> f64) -> f64 {
    let (ri, rj) = (x.row(i), x.row(j));
    let xij = ri[j];
    (0..x.k())
        .filter(|&l| l != i && l != j)
        .map(|l| weight(l) * f64::from(xij * ri[l] * rj[l]))
        .sum()
}

fn coupling(couplings: &[f64], k: usize, i: usize, j: usize) -> f64 {
    let (i, j) = if i < j { (i, j) } else { (j, i) };
    couplings[pair_index(k, i, j)]
}

/// Bit-flip inversion function `1 + Σ s_ijl(x)`. A negative value marks the
/// pair for flipping.
pub fn inversion_bf(x: &SpinMatrix, i: usize, j: usize) -> f64 {
    f64::from(1 + syndrome_sum(x, i, j))
}

/// Weighted bit-flip inversion function `β|J_ij| + Σ_l w_l s_ijl(x)` with the
/// check weights of `weights` (third index `l`).
pub fn inversion_wbf(
    x: &SpinMatrix,
    couplings: &[f64],
    beta: f64,
    weights: &CrosstalkParams,
    i: usize,
    j: usize,
) -> f64 {
    beta * coupling(couplings, x.k(), i, j).abs()
        + weighted_syndrome_sum(x, i, j, |l| weights.weight_for(l).unwrap_or(0.0))
}

/// Gradient-descent bit-flip inversion function `J_ij x_ij + Σ s_ijl(x)`.
pub fn inversion_gdbf(x: &SpinMatrix, couplings: &[f64], i: usize, j: usize) -> f64 {
    coupling(couplings, x.k(), i, j) * f64::from(x.get(i, j)) + f64::from(syndrome_sum(x, i, j))
}

/// Half the increase of [`energy_bf`] when pair `(i, j)` flips:
/// `x_ij + Σ s_ijl(x)`. Equals [`inversion_bf`] when `x_ij = +1`.
pub fn flip_gain_bf(x: &SpinMatrix, i: usize, j: usize) -> f64 {
    f64::from(i32::from(x.get(i, j)) + syndrome_sum(x, i, j))
}

/// Half the increase of [`energy_wbf`] when pair `(i, j)` flips:
/// `β|J_ij| x_ij + Σ_c w_c s_c(x)`, with one weight per triple in canonical order.
pub fn flip_gain_wbf(
    x: &SpinMatrix,
    couplings: &[f64],
    beta: f64,
    check_weights: &[f64],
    i: usize,
    j: usize,
) -> f64 {
    let k = x.k();
    beta * coupling(couplings, k, i, j).abs() * f64::from(x.get(i, j))
        + weighted_syndrome_sum(x, i, j, |l| check_weights[triple_index(k, i, j, l)])
}

/// Half the increase of [`energy_gdbf`] when pair `(i, j)` flips:
/// `J_ij x_ij + Σ s_ijl(x)`, identical to [`inversion_gdbf`].
pub fn flip_gain_gdbf(x: &SpinMatrix, couplings: &[f64], i: usize, j: usize) -> f64 {
    inversion_gdbf(x, couplings, i, j)
}

/// Index of the triple `{a, b, c}` in canonical triple order.
pub fn triple_index(k: usize, a: usize, b: usize, c: usize) -> usize {
    let mut t = [a, b, c];
    t.sort_unstable();
    let [a, b, c] = t;
    // Triples with first index < a, then second index < b, then third.
    let choose3 = |n: usize| if n < 3 { 0 } else { n * (n - 1) * (n - 2) / 6 };
    let choose2 = |n: usize| if n < 2 { 0 } else { n * (n - 1) / 2 };
    (choose3(k) - choose3(k - a)) + (choose2(k - a - 1) - choose2(k - b)) + (c - b - 1)
}

fn sum_over_triples(x: &SpinMatrix, mut f: impl FnMut(usize, i8) -> f64) -> f64 {
    let k = x.k();
    let mut total = 0.0;
    let mut t = 0;
    for i in 0..k {
        for j in i + 1..k {
            let xij = x.get(i, j);
            for l in j + 1..k {
                total += f(t, xij * x.get(j, l) * x.get(i, l));
                t += 1;
            }
        }
    }
    total
}

/// `-Σ x_p - Σ_c s_c(x)` over weight-3 checks.
pub fn energy_bf(x: &SpinMatrix) -> f64 {
    let field: f64 = vector_view(x).iter().map(|&v| f64::from(v)).sum();
    -field - sum_over_triples(x, |_, s| f64::from(s))
}

/// `-β Σ |J_p| x_p - Σ_c w_c s_c(x)`.
pub fn energy_wbf(x: &SpinMatrix, couplings: &[f64], beta: f64, check_weights: &[f64]) -> f64 {
    let field: f64 = couplings
        .iter()
        .zip(vector_view(x))
        .map(|(j, v)| j.abs() * f64::from(v))
        .sum();
    -beta * field - sum_over_triples(x, |t, s| check_weights[t] * f64::from(s))
}

/// `-Σ J_p x_p - Σ_c s_c(x)`.
pub fn energy_gdbf(x: &SpinMatrix, couplings: &[f64]) -> f64 {
    let field: f64 = couplings
        .iter()
        .zip(vector_view(x))
        .map(|(j, v)| j * f64::from(v))
        .sum();
    -field - sum_over_triples(x, |_, s| f64::from(s))
}

/// Sequential greedy descent: each iteration flips the pair with the most
/// negative gain, stopping when no gain is negative.
fn greedy_descent(
    r: &SpinMatrix,
    max_iterations: usize,
    gain: impl Fn(&SpinMatrix, usize, usize) -> f64,
) -> DecodeOutcome {
    let k = r.k();
    let mut x = r.clone();
    let mut flips = Vec::new();
    let mut status = DecodeStatus::MaxIterReached;
    if is_code_state(&x) {
        status = DecodeStatus::ConvergedCodeState;
    } else {
        for _ in 0..max_iterations {
            let mut best = (0.0, None);
            for i in 0..k {
                for j in i + 1..k {
                    let g = gain(&x, i, j);
                    if g < best.0 {
                        best = (g, Some((i, j)));
                    }
                }
            }
            match best.1 {
                Some((i, j)) => {
                    x.flip(i, j);
                    flips.push(1);
                }
                None => {
                    flips.push(0);
                    status = DecodeStatus::ConvergedFixedPoint;
                    break;
                }
            }
            if is_code_state(&x) {
                status = DecodeStatus::ConvergedCodeState;
                break;
            }
        }
    }
    DecodeOutcome {
        final_state: x,
        iterations_used: flips.len(),
        status,
        ties_per_iteration: vec![0; flips.len()],
        flips_per_iteration: flips,
    }
}

/// Greedy single-flip descent on the GDBF energy (diagnostic decoder).
pub fn gdbf_decode(r: &SpinMatrix, couplings: &[f64], max_iterations: usize) -> DecodeOutcome {
    greedy_descent(r, max_iterations, |x, i, j| flip_gain_gdbf(x, couplings, i, j))
}

/// Greedy single-flip descent on the WBF energy (diagnostic decoder).
pub fn wbf_decode(
    r: &SpinMatrix,
    couplings: &[f64],
    beta: f64,
    check_weights: &[f64],
    max_iterations: usize,
) -> DecodeOutcome {
    greedy_descent(r, max_iterations, |x, i, j| {
        flip_gain_wbf(x, couplings, beta, check_weights, i, j)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BpConfig {
    /// Prior flip probability used for the channel LLRs.
    pub prior_epsilon: f64,
    pub iterations: usize,
    /// Bound on check-to-variable message magnitudes.
    pub clamp: f64,
    /// Stop as soon as the hard decision is a code-state.
    pub early_stop: bool,
}

impl Default for BpConfig {
    fn default() -> Self {
        Self {
            prior_epsilon: 0.25,
            iterations: 5,
            clamp: 40.0,
            early_stop: true,
        }
    }
}

impl BpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.prior_epsilon > 0.0 && self.prior_epsilon < 0.5) {
            return Err(Error::invalid(format!(
                "prior_epsilon must lie in (0, 0.5), got {}",
                self.prior_epsilon
            )));
        }
        if self.iterations == 0 {
            return Err(Error::invalid("BP iterations must be at least 1"));
        }
        if !(self.clamp > 0.0) {
            return Err(Error::invalid("BP clamp must be positive"));
        }
        Ok(())
    }
}

/// Sum-product decoder state for one `K`, reusable across inputs.
#[derive(Debug, Clone)]
pub struct BpDecoder {
    k: usize,
    graph: TannerGraph,
    /// Edge ids of each variable; edge `3c + t` is slot `t` of check `c`.
    var_edges: Vec<Vec<usize>>,
}

impl BpDecoder {
    pub fn new(k: usize) -> Result<Self> {
        if k < 3 {
            return Err(Error::invalid(format!("K must be at least 3, got {k}")));
        }
        let graph = TannerGraph::build(k, CheckWeight::Three);
        let mut var_edges = vec![Vec::new(); graph.var_checks.len()];
        for (c, vars) in graph.check_vars.iter().enumerate() {
            for (t, &v) in vars.iter().enumerate() {
                var_edges[v].push(3 * c + t);
            }
        }
        Ok(Self { k, graph, var_edges })
    }

    /// Runs up to `cfg.iterations` flooding rounds. `on_round` receives the
    /// round number and posterior LLRs and returns `true` to stop.
    fn run(&self, r: &SpinMatrix, cfg: &BpConfig, mut on_round: impl FnMut(usize, &[f64]) -> bool) {
        let rv = vector_view(r);
        let l0 = ((1.0 - cfg.prior_epsilon) / cfg.prior_epsilon).ln();
        let prior: Vec<f64> = rv.iter().map(|&s| f64::from(s) * l0).collect();
        let n_edges = 3 * self.graph.check_vars.len();
        let mut to_check = vec![0.0; n_edges];
        for (v, edges) in self.var_edges.iter().enumerate() {
            for &e in edges {
                to_check[e] = prior[v];
            }
        }
        let mut to_var = vec![0.0; n_edges];
        let mut posterior = prior.clone();
        let mut tanh_half = vec![0.0; n_edges];
        for round in 1..=cfg.iterations {
            for (t, m) in tanh_half.iter_mut().zip(&to_check) {
                *t = (m / 2.0).tanh();
            }
            for c in 0..self.graph.check_vars.len() {
                let e = 3 * c;
                let (a, b, d) = (tanh_half[e], tanh_half[e + 1], tanh_half[e + 2]);
                for (slot, prod) in [(e, b * d), (e + 1, a * d), (e + 2, a * b)] {
                    to_var[slot] = (2.0 * prod.atanh()).clamp(-cfg.clamp, cfg.clamp);
                }
            }
            for (v, edges) in self.var_edges.iter().enumerate() {
                let total = prior[v] + edges.iter().map(|&e| to_var[e]).sum::<f64>();
                posterior[v] = total;
                for &e in edges {
                    to_check[e] = total - to_var[e];
                }
            }
            if on_round(round, &posterior) {
                break;
            }
        }
    }

    /// Posterior LLRs after exactly `cfg.iterations` rounds, canonical pair order.
    pub fn posteriors(&self, r: &SpinMatrix, cfg: &BpConfig) -> Result<Vec<f64>> {
        cfg.validate()?;
        self.check_dim(r)?;
        let mut out = Vec::new();
        self.run(r, cfg, |_, post| {
            out = post.to_vec();
            false
        });
        Ok(out)
    }

    fn check_dim(&self, r: &SpinMatrix) -> Result<()> {
        if r.k() != self.k {
            return Err(Error::invalid(format!(
                "decoder built for K = {}, input has K = {}",
                self.k,
                r.k()
            )));
        }
        Ok(())
    }

    pub fn decode(&self, r: &SpinMatrix, cfg: &BpConfig) -> Result<DecodeOutcome> {
        Ok(self.decode_traced(r, cfg)?.0)
    }

    /// Decode, also returning the input and the hard decision of every round.
    pub fn decode_traced(&self, r: &SpinMatrix, cfg: &BpConfig) -> Result<(DecodeOutcome, Vec<SpinMatrix>)> {
        cfg.validate()?;
        self.check_dim(r)?;
        let mut frames = vec![r.clone()];
        if is_code_state(r) {
            let out = DecodeOutcome {
                final_state: r.clone(),
                iterations_used: 0,
                status: DecodeStatus::ConvergedCodeState,
                flips_per_iteration: Vec::new(),
                ties_per_iteration: Vec::new(),
            };
            return Ok((out, frames));
        }
        let rv = vector_view(r);
        let mut decision = rv.clone();
        let mut flips = Vec::new();
        let mut ties = Vec::new();
        let mut done = false;
        self.run(r, cfg, |_, post| {
            let mut changed = 0;
            let mut zeros = 0;
            for (p, &l) in post.iter().enumerate() {
                // An exactly zero posterior keeps the received value.
                let v = if l > 0.0 {
                    1
                } else if l < 0.0 {
                    -1
                } else {
                    zeros += 1;
                    rv[p]
                };
                if v != decision[p] {
                    decision[p] = v;
                    changed += 1;
                }
            }
            flips.push(changed);
            ties.push(zeros);
            let x = matrix_view(self.k, &decision).expect("length matches");
            done = is_code_state(&x);
            frames.push(x);
            done && cfg.early_stop
        });
        let final_state = frames.last().expect("at least the input").clone();
        let status = if done {
            DecodeStatus::ConvergedCodeState
        } else if flips.last() == Some(&0) {
            DecodeStatus::ConvergedFixedPoint
        } else {
            DecodeStatus::MaxIterReached
        };
        let out = DecodeOutcome {
            final_state,
            iterations_used: flips.len(),
            status,
            flips_per_iteration: flips,
            ties_per_iteration: ties,
        };
        Ok((out, frames))
    }
}

/// Sum-product decoding on the weight-3 Tanner graph with a flooding schedule.
pub fn bp_decode(r: &SpinMatrix, cfg: &BpConfig) -> Result<DecodeOutcome> {
    BpDecoder::new(r.k())?.decode(r, cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MwdOutcome {
    pub outcome: DecodeOutcome,
    /// `e* = r ∘ z*`.
    pub error_pattern: SpinMatrix,
    pub error_weight: usize,
    /// Number of code-states at the minimum distance (modulo nothing: the
    /// encoding is invariant under global flip).
    pub n_minimizers: u64,
}

/// Minimum-weight decoding: the code-state nearest to `r` in Hamming
/// distance, found by exhaustive search over logical states.
pub fn mwd_decode(r: &SpinMatrix) -> Result<MwdOutcome> {
    if r.k() > MAX_BRUTE_FORCE_K {
        return Err(Error::Capacity {
            what: "minimum-weight decoding",
            requested: r.k(),
            limit: MAX_BRUTE_FORCE_K,
        });
    }
    let sol = nearest_code_state(r);
    let z = encode(&sol.minimizer);
    let e = r.hadamard(&z);
    let weight = e.count_negative_pairs();
    Ok(MwdOutcome {
        outcome: DecodeOutcome {
            final_state: z,
            iterations_used: usize::from(weight > 0),
            status: DecodeStatus::ConvergedCodeState,
            flips_per_iteration: if weight > 0 { vec![weight] } else { Vec::new() },
            ties_per_iteration: Vec::new(),
        },
        error_pattern: e,
        error_weight: weight,
        n_minimizers: sol.n_minimizers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{crosstalk, sample_iid_error, stream_rng, IidNoise};
    use crate::oracle::exact_marginals;
    use crate::parity_code::{syndrome4, CodeParams, LogicalState};

    /// Entrywise update `sign(r_ij + Σ_{l≠i,j} r_jl r_li)`; `None` on a tie.
    fn entrywise(x: &SpinMatrix) -> Vec<Option<i8>> {
        let k = x.k();
        let mut out = Vec::new();
        for i in 0..k {
            for j in i + 1..k {
                let mut a = i32::from(x.get(i, j));
                for l in 0..k {
                    if l != i && l != j {
                        a += i32::from(x.get(j, l) * x.get(l, i));
                    }
                }
                out.push(match a.signum() {
                    0 => None,
                    s => Some(s as i8),
                });
            }
        }
        out
    }

    fn random_matrix(k: usize, rng: &mut impl Rng) -> SpinMatrix {
        let v: Vec<i8> = (0..k * (k - 1) / 2).map(|_| if rng.gen() { 1 } else { -1 }).collect();
        matrix_view(k, &v).unwrap()
    }

    #[test]
    fn inversion_bf_examples() {
        let x = SpinMatrix::ones(4).flipped(0, 1);
        assert_eq!(inversion_bf(&x, 0, 1), -1.0);
        assert_eq!(inversion_bf(&x, 0, 2), 1.0);
        for k in 4..9 {
            let z = encode(&LogicalState::from_bits(k, 0b1011));
            assert_eq!(inversion_bf(&z, 1, 2), (k - 1) as f64);
        }
    }

    #[test]
    fn matrix_form_equals_entrywise_exhaustive_k4() {
        let mut rng = stream_rng(0, 0);
        for b in 0..64usize {
            let v: Vec<i8> = (0..6).map(|p| if b >> p & 1 == 1 { -1 } else { 1 }).collect();
            let x = matrix_view(4, &v).unwrap();
            let step = bf_step(&x, TiePolicy::Keep, &mut rng);
            assert_eq!(step.ties, 0);
            let expect: Vec<i8> = entrywise(&x).into_iter().map(Option::unwrap).collect();
            assert_eq!(vector_view(&step.next), expect);
        }
    }

    #[test]
    fn matrix_form_equals_entrywise_random() {
        let mut rng = stream_rng(1, 0);
        for n in 0..1000 {
            let k = 4 + n % 9;
            let x = random_matrix(k, &mut rng);
            let step = bf_step(&x, TiePolicy::Keep, &mut rng);
            let ew = entrywise(&x);
            assert_eq!(step.ties, ew.iter().filter(|v| v.is_none()).count());
            let xv = vector_view(&x);
            let expect: Vec<i8> = ew.iter().zip(&xv).map(|(v, &old)| v.unwrap_or(old)).collect();
            assert_eq!(vector_view(&step.next), expect);
        }
    }

    #[test]
    fn ties_only_for_odd_k() {
        let mut rng = stream_rng(2, 0);
        for k in [4, 6, 8, 10] {
            for _ in 0..200 {
                assert_eq!(bf_step(&random_matrix(k, &mut rng), TiePolicy::Keep, &mut rng).ties, 0);
            }
        }
        let total: usize = (0..200)
            .map(|_| bf_step(&random_matrix(5, &mut rng), TiePolicy::Keep, &mut rng).ties)
            .sum();
        assert!(total > 0);
    }

    #[test]
    fn single_flip_corrected_in_one_step() {
        let mut rng = stream_rng(3, 0);
        let x = SpinMatrix::ones(4).flipped(1, 2);
        assert_eq!(bf_step(&x, TiePolicy::Fail, &mut rng).next, SpinMatrix::ones(4));
    }

    #[test]
    fn code_states_fixed() {
        let mut rng = stream_rng(4, 0);
        for k in 4..12 {
            for bits in [0u64, 1, 5, 0b110110] {
                let z = encode(&LogicalState::from_bits(k, bits));
                let step = bf_step(&z, TiePolicy::Fail, &mut rng);
                assert_eq!(step.next, z);
                let out = bf_decode(&z, &BfConfig::default(), &mut rng);
                assert_eq!(out.status, DecodeStatus::ConvergedCodeState);
                assert_eq!(out.iterations_used, 0);
                let bp = bp_decode(&z, &BpConfig::default()).unwrap();
                assert_eq!(bp.final_state, z);
                assert_eq!(mwd_decode(&z).unwrap().outcome.final_state, z);
            }
        }
    }

    #[test]
    fn gauge_covariance() {
        let mut rng = stream_rng(5, 0);
        for n in 0..300 {
            let k = 4 + 2 * (n % 5);
            let z = encode(&LogicalState::from_bits(k, rng.gen::<u64>() & ((1 << k) - 1)));
            let e = random_matrix(k, &mut rng);
            let lhs = bf_step(&z.hadamard(&e), TiePolicy::Keep, &mut rng).next;
            let rhs = z.hadamard(&bf_step(&e, TiePolicy::Keep, &mut rng).next);
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn tie_policy_fail_stops() {
        let mut rng = stream_rng(6, 0);
        let mut seen = false;
        for _ in 0..200 {
            let x = random_matrix(5, &mut rng);
            let out = bf_decode(&x, &BfConfig::default(), &mut rng);
            if out.status == DecodeStatus::Tie {
                seen = true;
                assert!(out.ties_per_iteration.last().copied().unwrap() > 0);
            }
        }
        assert!(seen);
    }

    #[test]
    fn bf_headline_small_sample() {
        let params = CodeParams::new(40).unwrap();
        let noise = IidNoise::new(0.3).unwrap();
        let mut ok = 0;
        for t in 0..200 {
            let mut rng = stream_rng(10, t);
            let r = sample_iid_error(params, noise, &mut rng);
            if bf_decode(&r, &BfConfig::default(), &mut rng).matches(&SpinMatrix::ones(40)) {
                ok += 1;
            }
        }
        assert!(ok >= 120, "{ok}/200");
    }

    #[test]
    fn triple_index_matches_enumeration() {
        for k in 3..9 {
            let mut t = 0;
            for a in 0..k {
                for b in a + 1..k {
                    for c in b + 1..k {
                        assert_eq!(triple_index(k, a, b, c), t);
                        assert_eq!(triple_index(k, c, a, b), t);
                        t += 1;
                    }
                }
            }
        }
    }

    #[test]
    fn energy_changes_are_twice_flip_gains() {
        let mut rng = stream_rng(7, 0);
        for _ in 0..300 {
            let k = rng.gen_range(4..9);
            let n_v = k * (k - 1) / 2;
            let n_c = k * (k - 1) * (k - 2) / 6;
            let x = random_matrix(k, &mut rng);
            let j_: Vec<f64> = (0..n_v).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let w: Vec<f64> = (0..n_c).map(|_| rng.gen_range(0.1..2.0)).collect();
            let beta = rng.gen_range(0.0..3.0);
            let i = rng.gen_range(0..k);
            let l = (i + rng.gen_range(1..k)) % k;
            let y = x.flipped(i, l);
            let d_bf = energy_bf(&y) - energy_bf(&x);
            assert!((d_bf - 2.0 * flip_gain_bf(&x, i, l)).abs() < 1e-9);
            let d_wbf = energy_wbf(&y, &j_, beta, &w) - energy_wbf(&x, &j_, beta, &w);
            assert!((d_wbf - 2.0 * flip_gain_wbf(&x, &j_, beta, &w, i, l)).abs() < 1e-9);
            let d_gd = energy_gdbf(&y, &j_) - energy_gdbf(&x, &j_);
            assert!((d_gd - 2.0 * flip_gain_gdbf(&x, &j_, i, l)).abs() < 1e-9);
            if x.get(i, l) == 1 {
                assert_eq!(flip_gain_bf(&x, i, l), inversion_bf(&x, i, l));
            }
        }
    }

    #[test]
    fn wbf_reductions() {
        let k = 6;
        let gammas = vec![0.2; 15];
        let ct = crosstalk(k, &gammas, 1, 4).unwrap().approximated();
        let mut rng = stream_rng(8, 0);
        for _ in 0..50 {
            let x = random_matrix(k, &mut rng);
            // β|J| = 1 and unit weights give the plain inversion function.
            let j_ = vec![1.0; 15];
            assert_eq!(inversion_wbf(&x, &j_, 1.0, &ct, 1, 4), inversion_bf(&x, 1, 4));
            assert_eq!(inversion_wbf(&x, &j_, 0.0, &ct, 1, 4), f64::from(syndrome_sum(&x, 1, 4)));
        }
        let exact = crosstalk(k, &gammas, 1, 4).unwrap();
        let z = encode(&LogicalState::from_bits(k, 0b10110));
        assert!(inversion_wbf(&z, &[0.0; 15], 0.0, &exact, 1, 4) > 0.0);
    }

    #[test]
    fn gdbf_reductions() {
        let mut rng = stream_rng(9, 0);
        let zero = vec![0.0; 21];
        for _ in 0..100 {
            let x = random_matrix(7, &mut rng);
            assert_eq!(inversion_gdbf(&x, &zero, 2, 5), f64::from(syndrome_sum(&x, 2, 5)));
            let s3: f64 = crate::parity_code::syndrome3(&x).values.iter().map(|&s| f64::from(s)).sum();
            assert_eq!(energy_gdbf(&x, &zero), -s3);
            let small: Vec<f64> = (0..21).map(|_| rng.gen_range(-0.01..0.01)).collect();
            let ss = syndrome_sum(&x, 2, 5);
            if ss != 0 && x.get(2, 5) == 1 {
                let a = inversion_gdbf(&x, &small, 2, 5);
                let b = inversion_bf(&x, 2, 5);
                if b != 0.0 {
                    assert_eq!(a.signum(), f64::from(ss).signum());
                }
            }
        }
        let ones = SpinMatrix::ones(7);
        assert_eq!(energy_bf(&ones), -(21.0 + 35.0));
    }

    #[test]
    fn greedy_decoders_fix_single_flip() {
        let x = SpinMatrix::ones(6).flipped(0, 3);
        let j_ = vec![0.1; 15];
        let out = gdbf_decode(&x, &j_, 5);
        assert_eq!(out.final_state, SpinMatrix::ones(6));
        let w = vec![1.0; 20];
        let out = wbf_decode(&x, &j_, 1.0, &w, 5);
        assert_eq!(out.final_state, SpinMatrix::ones(6));
    }

    #[test]
    fn bp_matches_exact_marginals_k4_low_weight() {
        let eps = 0.25;
        let cfg = BpConfig {
            prior_epsilon: eps,
            iterations: 5,
            clamp: 40.0,
            early_stop: false,
        };
        let dec = BpDecoder::new(4).unwrap();
        for bits in 0..8u64 {
            let z = encode(&LogicalState::from_bits(4, bits << 1));
            let mut inputs = vec![z.clone()];
            for (i, j) in crate::parity_code::pairs(4) {
                inputs.push(z.flipped(i, j));
            }
            for r in inputs {
                let exact = exact_marginals(&r, eps).unwrap();
                let bp = dec.posteriors(&r, &cfg).unwrap();
                for (a, b) in exact.iter().zip(&bp) {
                    assert_eq!(a.signum(), b.signum(), "exact {exact:?} bp {bp:?}");
                }
            }
        }
    }

    #[test]
    fn bp_corrects_single_flip() {
        for k in 5..12 {
            let dec = BpDecoder::new(k).unwrap();
            for (i, j) in [(0, 1), (1, k - 1), (k - 2, k - 1)] {
                let r = SpinMatrix::ones(k).flipped(i, j);
                let out = dec.decode(&r, &BpConfig::default()).unwrap();
                assert_eq!(out.final_state, SpinMatrix::ones(k));
                assert!(out.iterations_used <= 2);
            }
        }
    }

    #[test]
    fn bp_rejects_bad_prior() {
        let cfg = BpConfig {
            prior_epsilon: 0.5,
            ..BpConfig::default()
        };
        assert!(bp_decode(&SpinMatrix::ones(5), &cfg).is_err());
    }

    #[test]
    fn mwd_is_coset_leader() {
        let mut rng = stream_rng(11, 0);
        for k in [4, 5, 6] {
            let n_v = k * (k - 1) / 2;
            let all: Vec<(Vec<i8>, usize)> = (0..1usize << n_v)
                .map(|b| {
                    let e: Vec<i8> = (0..n_v).map(|p| if b >> p & 1 == 1 { -1 } else { 1 }).collect();
                    let s = syndrome4(&matrix_view(k, &e).unwrap()).values;
                    (s, b.count_ones() as usize)
                })
                .collect();
            for _ in 0..40 {
                let r = random_matrix(k, &mut rng);
                let target = syndrome4(&r).values;
                let best = all.iter().filter(|(s, _)| *s == target).map(|(_, w)| *w).min().unwrap();
                let out = mwd_decode(&r).unwrap();
                assert_eq!(out.error_weight, best);
                assert!(syndrome4(&out.error_pattern.hadamard(&r)).is_all_satisfied());
                assert!(is_code_state(&out.outcome.final_state));
            }
        }
    }

    #[test]
    fn mwd_recovers_single_flip() {
        for (i, j) in crate::parity_code::pairs(6) {
            let z = encode(&LogicalState::from_bits(6, 0b10010));
            let r = z.flipped(i, j);
            let out = mwd_decode(&r).unwrap();
            assert_eq!(out.outcome.final_state, z);
            assert_eq!(out.error_weight, 1);
            assert_eq!(out.n_minimizers, 1);
        }
    }

    #[test]
    fn mwd_capacity() {
        assert!(matches!(
            mwd_decode(&SpinMatrix::ones(29)),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn csv_row() {
        let mut rng = stream_rng(0, 0);
        let r = SpinMatrix::ones(6).flipped(0, 1);
        let out = bf_decode(&r, &BfConfig::default(), &mut rng);
        assert_eq!(out.to_csv_row(Some(&SpinMatrix::ones(6))), "converged_code_state,1,1,0,0");
    }
}
