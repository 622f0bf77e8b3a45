//! Boltzmann sampling of the code Hamiltonian
//! `H(x) = -β Σ J_p x_p + γ Σ_c (1 - s_c(x))/2`
//! with Metropolis and rejection-free single-flip kernels.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channels::{stream_rng, Instance};
use crate::decoders::{bf_decode, BfConfig};
use crate::error::{Error, Result};
use crate::parity_code::{
    is_code_state, matrix_view, pairs, vector_view, CheckWeight, CodeParams, SpinMatrix, TannerGraph,
};

/// `coef * count`, with `∞ * 0 = 0` so that infinite penalties only bite on
/// violated checks.
#[inline]
fn scaled(coef: f64, count: f64) -> f64 {
    if count == 0.0 {
        0.0
    } else {
        coef * count
    }
}

#[derive(Debug, Clone)]
pub struct SlhzHamiltonian {
    k: usize,
    couplings: Vec<f64>,
    beta: f64,
    gamma: f64,
    penalty: CheckWeight,
    graph: Arc<TannerGraph>,
    target: Option<SpinMatrix>,
}

impl SlhzHamiltonian {
    pub fn new(instance: &Instance, beta: f64, gamma: f64, penalty: CheckWeight) -> Result<Self> {
        let graph = Arc::new(TannerGraph::build(instance.k, penalty));
        Self::with_graph(instance, beta, gamma, penalty, graph)
    }

    /// Like [`new`](Self::new) but sharing a prebuilt Tanner graph.
    pub fn with_graph(
        instance: &Instance,
        beta: f64,
        gamma: f64,
        penalty: CheckWeight,
        graph: Arc<TannerGraph>,
    ) -> Result<Self> {
        if instance.k < 3 {
            return Err(Error::invalid(format!("K must be at least 3, got {}", instance.k)));
        }
        if beta.is_nan() || beta < 0.0 || gamma.is_nan() || gamma < 0.0 {
            return Err(Error::invalid(format!(
                "beta and gamma must be non-negative, got beta = {beta}, gamma = {gamma}"
            )));
        }
        if graph.var_checks.len() != instance.params().n_v {
            return Err(Error::invalid("Tanner graph does not match K"));
        }
        Ok(Self {
            k: instance.k,
            couplings: instance.couplings.clone(),
            beta,
            gamma,
            penalty,
            graph,
            target: instance.target_code_state(),
        })
    }

    /// Penalty-only Hamiltonian `γ Σ (1 - s_c)/2` with zero couplings.
    pub fn syndrome_only(k: usize, gamma: f64, penalty: CheckWeight) -> Result<Self> {
        let n_v = CodeParams::new(k)?.n_v;
        let inst = Instance::new(k, vec![0.0; n_v])?;
        Self::new(&inst, 0.0, gamma, penalty)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn penalty(&self) -> CheckWeight {
        self.penalty
    }

    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    pub fn graph(&self) -> &TannerGraph {
        &self.graph
    }

    /// Encoded ground truth of the instance, when known.
    pub fn target(&self) -> Option<&SpinMatrix> {
        self.target.as_ref()
    }

    /// Same Hamiltonian at different annealing parameters.
    pub fn with_parameters(&self, beta: f64, gamma: f64) -> Result<Self> {
        if beta.is_nan() || beta < 0.0 || gamma.is_nan() || gamma < 0.0 {
            return Err(Error::invalid(format!(
                "beta and gamma must be non-negative, got beta = {beta}, gamma = {gamma}"
            )));
        }
        Ok(Self {
            beta,
            gamma,
            ..self.clone()
        })
    }

    fn energy_parts(&self, v: &[i8]) -> (f64, usize) {
        let corr: f64 = self.couplings.iter().zip(v).map(|(j, &x)| j * f64::from(x)).sum();
        let violated = self
            .graph
            .check_vars
            .iter()
            .filter(|vars| vars.iter().map(|&p| v[p]).product::<i8>() < 0)
            .count();
        (corr, violated)
    }

    fn combine(&self, corr: f64, violated: usize) -> f64 {
        -scaled(self.beta, corr) + scaled(self.gamma, violated as f64)
    }

    pub fn energy(&self, x: &SpinMatrix) -> f64 {
        let (corr, violated) = self.energy_parts(&vector_view(x));
        self.combine(corr, violated)
    }

    /// `H(x with pair (i, j) flipped) - H(x)` from the adjacent checks only.
    pub fn delta_energy(&self, x: &SpinMatrix, i: usize, j: usize) -> f64 {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        let p = crate::parity_code::pair_index(self.k, i, j);
        let v = vector_view(x);
        let syn_sum: i32 = self.graph.var_checks[p]
            .iter()
            .map(|&c| i32::from(self.graph.check_vars[c].iter().map(|&q| v[q]).product::<i8>()))
            .sum();
        self.delta_from(p, v[p], syn_sum)
    }

    #[inline]
    fn delta_from(&self, p: usize, xp: i8, syn_sum: i32) -> f64 {
        scaled(2.0 * self.beta, self.couplings[p] * f64::from(xp)) + scaled(self.gamma, f64::from(syn_sum))
    }
}

/// Sum-tree over non-negative rates with proportional sampling.
#[derive(Debug, Clone)]
struct RateTree {
    size: usize,
    nodes: Vec<f64>,
}

impl RateTree {
    fn new(n: usize) -> Self {
        let size = n.next_power_of_two().max(1);
        Self {
            size,
            nodes: vec![0.0; 2 * size],
        }
    }

    fn set(&mut self, i: usize, rate: f64) {
        let mut n = self.size + i;
        self.nodes[n] = rate;
        while n > 1 {
            n /= 2;
            self.nodes[n] = self.nodes[2 * n] + self.nodes[2 * n + 1];
        }
    }

    fn total(&self) -> f64 {
        self.nodes[1]
    }

    /// Leaf `i` with probability `rate_i / total`. Never returns a zero-rate leaf.
    fn sample(&self, mut u: f64) -> usize {
        let mut n = 1;
        while n < self.size {
            let left = self.nodes[2 * n];
            let right = self.nodes[2 * n + 1];
            if left > 0.0 && (u < left || right <= 0.0) {
                n *= 2;
            } else {
                u = (u - left).max(0.0);
                n = 2 * n + 1;
            }
        }
        n - self.size
    }
}

#[inline]
fn acceptance(delta: f64) -> f64 {
    if delta <= 0.0 {
        1.0
    } else {
        (-delta).exp()
    }
}

/// Chain state with incrementally tracked energy and per-pair syndrome sums.
#[derive(Debug, Clone)]
pub struct ChainState {
    h: SlhzHamiltonian,
    pairs: Vec<(usize, usize)>,
    v: Vec<i8>,
    syndromes: Vec<i8>,
    syn_sum: Vec<i32>,
    violated: usize,
    corr: f64,
    rates: Option<RateTree>,
}

impl ChainState {
    pub fn new(h: &SlhzHamiltonian, x: &SpinMatrix) -> Result<Self> {
        if x.k() != h.k {
            return Err(Error::invalid(format!(
                "state has K = {}, Hamiltonian has K = {}",
                x.k(),
                h.k
            )));
        }
        let v = vector_view(x);
        let syndromes: Vec<i8> = h
            .graph
            .check_vars
            .iter()
            .map(|vars| vars.iter().map(|&p| v[p]).product())
            .collect();
        let syn_sum = h
            .graph
            .var_checks
            .iter()
            .map(|cs| cs.iter().map(|&c| i32::from(syndromes[c])).sum())
            .collect();
        let violated = syndromes.iter().filter(|&&s| s < 0).count();
        let corr = h.couplings.iter().zip(&v).map(|(j, &x)| j * f64::from(x)).sum();
        Ok(Self {
            h: h.clone(),
            pairs: pairs(h.k),
            v,
            syndromes,
            syn_sum,
            violated,
            corr,
            rates: None,
        })
    }

    pub fn hamiltonian(&self) -> &SlhzHamiltonian {
        &self.h
    }

    /// Tracked energy (no recomputation).
    pub fn energy(&self) -> f64 {
        self.h.combine(self.corr, self.violated)
    }

    pub fn violated_checks(&self) -> usize {
        self.violated
    }

    /// True iff no penalty check is violated, i.e. the state is a code-state.
    pub fn is_code_state(&self) -> bool {
        self.violated == 0
    }

    pub fn state(&self) -> SpinMatrix {
        matrix_view(self.h.k, &self.v).expect("length matches")
    }

    pub fn spins(&self) -> &[i8] {
        &self.v
    }

    pub fn delta(&self, p: usize) -> f64 {
        self.h.delta_from(p, self.v[p], self.syn_sum[p])
    }

    /// Changes the annealing parameters in place.
    pub fn set_parameters(&mut self, beta: f64, gamma: f64) -> Result<()> {
        self.h = self.h.with_parameters(beta, gamma)?;
        self.rates = None;
        Ok(())
    }

    /// Flips variable `p`, updating all bookkeeping.
    pub fn flip(&mut self, p: usize) {
        let old = self.v[p];
        self.v[p] = -old;
        self.corr -= 2.0 * self.h.couplings[p] * f64::from(old);
        let graph = Arc::clone(&self.h.graph);
        for &c in &graph.var_checks[p] {
            let s_old = self.syndromes[c];
            self.syndromes[c] = -s_old;
            if s_old > 0 {
                self.violated += 1;
            } else {
                self.violated -= 1;
            }
            for &q in &graph.check_vars[c] {
                self.syn_sum[q] -= 2 * i32::from(s_old);
            }
        }
        if self.rates.is_some() {
            let mut tree = self.rates.take().expect("present");
            tree.set(p, acceptance(self.delta(p)));
            for &c in &graph.var_checks[p] {
                for &q in &graph.check_vars[c] {
                    if q != p {
                        tree.set(q, acceptance(self.delta(q)));
                    }
                }
            }
            self.rates = Some(tree);
        }
    }

    /// One Metropolis proposal; returns whether it was accepted.
    pub fn metropolis_move<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        let p = rng.gen_range(0..self.v.len());
        let delta = self.delta(p);
        let accept = delta <= 0.0 || rng.gen::<f64>() < (-delta).exp();
        if accept {
            self.flip(p);
        }
        accept
    }

    fn ensure_rates(&mut self) {
        if self.rates.is_none() {
            let mut tree = RateTree::new(self.v.len());
            for p in 0..self.v.len() {
                tree.set(p, acceptance(self.delta(p)));
            }
            self.rates = Some(tree);
        }
    }

    /// Expected holding time `n_v / Σ rates` of the current state under the
    /// rejection-free kernel; infinite when every rate is zero.
    pub fn holding_weight(&mut self) -> f64 {
        self.ensure_rates();
        let total = self.rates.as_ref().expect("built above").total();
        if total > 0.0 {
            self.v.len() as f64 / total
        } else {
            f64::INFINITY
        }
    }

    /// One rejection-free move. Returns the holding weight of the new state,
    /// or `None` (and no move) when every rate is zero.
    pub fn rejection_free_move<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<f64> {
        self.ensure_rates();
        let tree = self.rates.as_ref().expect("built above");
        let total = tree.total();
        if !(total > 0.0) {
            return None;
        }
        let p = tree.sample(rng.gen::<f64>() * total);
        self.flip(p);
        Some(self.holding_weight())
    }

    /// The pair touched by variable index `p`.
    pub fn pair(&self, p: usize) -> (usize, usize) {
        self.pairs[p]
    }
}

/// Metropolis step: proposes a uniform pair flip, accepts with `min(1, e^{-ΔH})`.
/// `β` and `γ` already play the role of inverse temperature.
pub fn metropolis_step<R: Rng + ?Sized>(h: &SlhzHamiltonian, x: &SpinMatrix, rng: &mut R) -> SpinMatrix {
    let pairs = pairs(h.k);
    let (i, j) = pairs[rng.gen_range(0..pairs.len())];
    let delta = h.delta_energy(x, i, j);
    if delta <= 0.0 || rng.gen::<f64>() < (-delta).exp() {
        x.flipped(i, j)
    } else {
        x.clone()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RejectionFreeStep {
    /// The new state and its own holding weight.
    Moved { state: SpinMatrix, holding_weight: f64 },
    /// Every single-flip rate is zero.
    Frozen,
}

pub fn rejection_free_step<R: Rng + ?Sized>(h: &SlhzHamiltonian, x: &SpinMatrix, rng: &mut R) -> RejectionFreeStep {
    let pairs = pairs(h.k);
    let rates: Vec<f64> = pairs.iter().map(|&(i, j)| acceptance(h.delta_energy(x, i, j))).collect();
    let total: f64 = rates.iter().sum();
    if !(total > 0.0) {
        return RejectionFreeStep::Frozen;
    }
    let mut u = rng.gen::<f64>() * total;
    let mut chosen = rates.iter().rposition(|&r| r > 0.0).expect("total > 0");
    for (p, &r) in rates.iter().enumerate() {
        if r > 0.0 && u < r {
            chosen = p;
            break;
        }
        u -= r;
    }
    let (i, j) = pairs[chosen];
    let state = x.flipped(i, j);
    let next_total: f64 = pairs.iter().map(|&(a, b)| acceptance(h.delta_energy(&state, a, b))).sum();
    RejectionFreeStep::Moved {
        state,
        holding_weight: if next_total > 0.0 {
            pairs.len() as f64 / next_total
        } else {
            f64::INFINITY
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    Metropolis,
    #[default]
    RejectionFree,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum InitState {
    #[default]
    Random,
    Given(SpinMatrix),
}

/// Linear interpolation of `(β, γ)` over the sampling phase, applied once per
/// sweep. `Constant` keeps the Hamiltonian's own values.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Schedule {
    #[default]
    Constant,
    Linear { beta_end: f64, gamma_end: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct McmcConfig {
    pub kernel: Kernel,
    /// Sweeps (`n_v` steps each) discarded before recording; may be zero.
    pub burn_in_sweeps: usize,
    pub samples_per_chain: usize,
    /// Steps between recorded samples.
    pub stride: usize,
    pub init: InitState,
    pub seed: u64,
    pub schedule: Schedule,
}

impl McmcConfig {
    /// MCMC decoding: every state of a `1200·C(K,2)`-step chain is recorded.
    pub fn mcmc_decoding(k: usize, seed: u64) -> Self {
        Self {
            kernel: Kernel::RejectionFree,
            burn_in_sweeps: 0,
            samples_per_chain: 1200 * k * (k - 1) / 2,
            stride: 1,
            init: InitState::Random,
            seed,
            schedule: Schedule::Constant,
        }
    }

    /// Hybrid decoding: `4·C(K,2)` states after one burn-in sweep.
    pub fn hybrid(k: usize, seed: u64) -> Self {
        Self {
            kernel: Kernel::RejectionFree,
            burn_in_sweeps: 1,
            samples_per_chain: 4 * k * (k - 1) / 2,
            stride: 1,
            init: InitState::Random,
            seed,
            schedule: Schedule::Constant,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples_per_chain == 0 {
            return Err(Error::invalid("samples_per_chain must be at least 1"));
        }
        if self.stride == 0 {
            return Err(Error::invalid("stride must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct HitFlags {
    /// The ground-truth code-state appeared.
    pub exact: bool,
    /// Some code-state appeared.
    pub any: bool,
}

/// What a chain saw, without the stored samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSummary {
    pub raw: HitFlags,
    pub decoded: Option<HitFlags>,
    pub steps: usize,
    pub frozen: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainResult {
    pub samples: Vec<SpinMatrix>,
    pub energies: Vec<f64>,
    /// Holding weights (rejection-free) or ones (Metropolis).
    pub weights: Vec<f64>,
    pub contains_target: HitFlags,
    pub decoded_flags: Option<HitFlags>,
    pub frozen: bool,
}

/// A recorded sample handed to a visitor.
pub struct Sample<'a> {
    pub chain: &'a ChainState,
    pub weight: f64,
}

fn initial_state(h: &SlhzHamiltonian, cfg: &McmcConfig, rng: &mut impl Rng) -> Result<SpinMatrix> {
    match &cfg.init {
        InitState::Given(x) => Ok(x.clone()),
        InitState::Random => {
            let n_v = h.k * (h.k - 1) / 2;
            let v: Vec<i8> = (0..n_v).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
            matrix_view(h.k, &v)
        }
    }
}

/// Runs a chain and hands every recorded sample to `visit`. Hit flags are
/// evaluated on recorded samples only.
pub fn run_chain_with<F>(h: &SlhzHamiltonian, cfg: &McmcConfig, mut visit: F) -> Result<ChainSummary>
where
    F: FnMut(&Sample<'_>),
{
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, 0);
    let x0 = initial_state(h, cfg, &mut rng)?;
    let mut chain = ChainState::new(h, &x0)?;
    let n_v = chain.v.len();
    let target = h.target.as_ref().map(vector_view);
    let burn_in = cfg.burn_in_sweeps * n_v;
    let total_steps = burn_in + cfg.samples_per_chain * cfg.stride;
    let (beta0, gamma0) = (h.beta, h.gamma);

    let mut raw = HitFlags::default();
    let mut frozen = false;
    let mut recorded = 0;
    let mut steps = 0;
    let mut last_weight = 1.0;
    for step in 1..=total_steps {
        if let Schedule::Linear { beta_end, gamma_end } = cfg.schedule {
            if step > burn_in && (step - burn_in - 1) % n_v == 0 {
                let sampling = (total_steps - burn_in).max(1) as f64;
                let t = (step - burn_in - 1) as f64 / sampling;
                chain.set_parameters(beta0 + t * (beta_end - beta0), gamma0 + t * (gamma_end - gamma0))?;
            }
        }
        if !frozen {
            match cfg.kernel {
                Kernel::Metropolis => {
                    chain.metropolis_move(&mut rng);
                    last_weight = 1.0;
                }
                Kernel::RejectionFree => match chain.rejection_free_move(&mut rng) {
                    Some(w) => last_weight = w,
                    None => {
                        frozen = true;
                        last_weight = f64::INFINITY;
                    }
                },
            }
            steps += 1;
        }
        if step > burn_in && (step - burn_in) % cfg.stride == 0 {
            if chain.is_code_state() {
                raw.any = true;
                if target.as_deref() == Some(chain.spins()) {
                    raw.exact = true;
                }
            }
            visit(&Sample {
                chain: &chain,
                weight: last_weight,
            });
            recorded += 1;
        }
    }
    debug_assert_eq!(recorded, cfg.samples_per_chain);
    Ok(ChainSummary {
        raw,
        decoded: None,
        steps,
        frozen,
    })
}

/// Runs a chain and stores every recorded sample.
pub fn run_chain(h: &SlhzHamiltonian, cfg: &McmcConfig) -> Result<ChainResult> {
    let mut samples = Vec::with_capacity(cfg.samples_per_chain);
    let mut energies = Vec::with_capacity(cfg.samples_per_chain);
    let mut weights = Vec::with_capacity(cfg.samples_per_chain);
    let summary = run_chain_with(h, cfg, |s| {
        samples.push(s.chain.state());
        energies.push(s.chain.energy());
        weights.push(s.weight);
    })?;
    Ok(ChainResult {
        samples,
        energies,
        weights,
        contains_target: summary.raw,
        decoded_flags: None,
        frozen: summary.frozen,
    })
}

fn decoded_hits(samples: &[SpinMatrix], target: Option<&SpinMatrix>, bf: &BfConfig, seed: u64) -> HitFlags {
    let mut rng = stream_rng(seed, 1);
    let mut flags = HitFlags::default();
    for x in samples {
        let out = bf_decode(x, bf, &mut rng);
        if is_code_state(&out.final_state) && out.status.is_success() {
            flags.any = true;
            if target == Some(&out.final_state) {
                flags.exact = true;
            }
        }
    }
    flags
}

/// Chain followed by BF decoding of every recorded sample.
pub fn hybrid_decode(h: &SlhzHamiltonian, cfg: &McmcConfig, bf: &BfConfig) -> Result<ChainResult> {
    let mut result = run_chain(h, cfg)?;
    result.decoded_flags = Some(decoded_hits(&result.samples, h.target.as_ref(), bf, cfg.seed));
    Ok(result)
}

/// [`hybrid_decode`] without storing samples.
pub fn hybrid_summary(h: &SlhzHamiltonian, cfg: &McmcConfig, bf: &BfConfig) -> Result<ChainSummary> {
    let target = h.target.clone();
    let mut rng = stream_rng(cfg.seed, 1);
    let mut flags = HitFlags::default();
    let mut summary = run_chain_with(h, cfg, |s| {
        if flags.exact {
            return;
        }
        let out = bf_decode(&s.chain.state(), bf, &mut rng);
        if out.status.is_success() {
            flags.any = true;
            if target.as_ref() == Some(&out.final_state) {
                flags.exact = true;
            }
        }
    })?;
    summary.decoded = Some(flags);
    Ok(summary)
}

/// Streaming mean of `x ∘ ẑ` over samples.
#[derive(Debug, Clone)]
pub struct ErrorMatrixAccumulator {
    target: SpinMatrix,
    sums: Vec<i64>,
    n: u64,
}

impl ErrorMatrixAccumulator {
    pub fn new(target: &SpinMatrix) -> Self {
        let k = target.k();
        Self {
            target: target.clone(),
            sums: vec![0; k * k],
            n: 0,
        }
    }

    pub fn push(&mut self, x: &SpinMatrix) {
        for ((s, &a), &b) in self.sums.iter_mut().zip(x.as_slice()).zip(self.target.as_slice()) {
            *s += i64::from(a * b);
        }
        self.n += 1;
    }

    /// Combines two accumulators over the same target; order does not matter.
    pub fn merge(&mut self, other: &ErrorMatrixAccumulator) {
        assert_eq!(self.target, other.target);
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            *a += b;
        }
        self.n += other.n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn finish(&self) -> Result<AverageErrorMatrix> {
        if self.n == 0 {
            return Err(Error::invalid("no samples to average"));
        }
        Ok(AverageErrorMatrix {
            k: self.target.k(),
            mean: self.sums.iter().map(|&s| s as f64 / self.n as f64).collect(),
            n_samples: self.n,
        })
    }
}

/// `⟨ê⟩` as a row-major `K×K` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AverageErrorMatrix {
    pub k: usize,
    pub mean: Vec<f64>,
    pub n_samples: u64,
}

impl AverageErrorMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.mean[i * self.k + j]
    }

    /// Marginal probability that entry `(i, j)` is correct, `(1 + ⟨ê_ij⟩)/2`.
    pub fn p_correct(&self, i: usize, j: usize) -> f64 {
        (1.0 + self.get(i, j)) / 2.0
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for i in 0..self.k {
            let row: Vec<String> = (0..self.k).map(|j| format!("{:.6}", self.get(i, j))).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

pub fn average_error_matrix(samples: &[SpinMatrix], ground_truth: &SpinMatrix) -> Result<AverageErrorMatrix> {
    let mut acc = ErrorMatrixAccumulator::new(ground_truth);
    for x in samples {
        if x.k() != ground_truth.k() {
            return Err(Error::invalid("sample dimension does not match ground truth"));
        }
        acc.push(x);
    }
    acc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::gen_instance;
    use crate::oracle::{exact_boltzmann, state_index};
    use crate::parity_code::{encode, LogicalState};

    fn k4_instance() -> Instance {
        gen_instance(4, 0.25, 11, true).unwrap()
    }

    #[test]
    fn code_state_energy_is_correlation_only() {
        let inst = k4_instance();
        let h = SlhzHamiltonian::new(&inst, 2.0, 5.0, CheckWeight::Four).unwrap();
        let z = encode(&LogicalState::new(vec![1, -1, 1, -1]).unwrap());
        let expect: f64 = -2.0
            * vector_view(&z)
                .iter()
                .zip(&inst.couplings)
                .map(|(&x, j)| j * f64::from(x))
                .sum::<f64>();
        assert!((h.energy(&z) - expect).abs() < 1e-12);
    }

    #[test]
    fn single_flip_penalty_counts_adjacent_triples() {
        for k in 4..9 {
            let h = SlhzHamiltonian::syndrome_only(k, 1.5, CheckWeight::Three).unwrap();
            let x = SpinMatrix::ones(k).flipped(1, 3);
            assert!((h.energy(&x) - 1.5 * (k - 2) as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn energy_lower_bound() {
        let inst = gen_instance(5, 0.25, 3, false).unwrap();
        let h = SlhzHamiltonian::new(&inst, 1.3, 0.7, CheckWeight::Three).unwrap();
        let bound = -1.3 * inst.couplings.iter().map(|j| j.abs()).sum::<f64>();
        let z = encode(&LogicalState::new(vec![1, -1, -1, 1, -1]).unwrap());
        let aligned: Vec<f64> = vector_view(&z).iter().map(|&s| 0.2 * f64::from(s)).collect();
        let h_aligned =
            SlhzHamiltonian::new(&Instance::new(5, aligned).unwrap(), 1.3, 0.7, CheckWeight::Three).unwrap();
        let mut rng = stream_rng(1, 0);
        for _ in 0..200 {
            let v: Vec<i8> = (0..10).map(|_| if rng.gen() { 1 } else { -1 }).collect();
            assert!(h.energy(&matrix_view(5, &v).unwrap()) >= bound - 1e-12);
        }
        assert!((h_aligned.energy(&z) + 1.3 * 0.2 * 10.0).abs() < 1e-12);
        assert!(h_aligned.energy(&z.flipped(0, 1)) > h_aligned.energy(&z));
    }

    #[test]
    fn delta_matches_recomputation() {
        let inst = gen_instance(7, 0.25, 5, false).unwrap();
        let mut rng = stream_rng(2, 0);
        for weight in [CheckWeight::Three, CheckWeight::Four] {
            let h = SlhzHamiltonian::new(&inst, 0.8, 1.7, weight).unwrap();
            for _ in 0..300 {
                let v: Vec<i8> = (0..21).map(|_| if rng.gen() { 1 } else { -1 }).collect();
                let x = matrix_view(7, &v).unwrap();
                let i = rng.gen_range(0..7);
                let j = (i + rng.gen_range(1..7)) % 7;
                let full = h.energy(&x.flipped(i, j)) - h.energy(&x);
                assert!((h.delta_energy(&x, i, j) - full).abs() <= 1e-9);
                let back = x.flipped(i, j);
                assert!((h.delta_energy(&back, i, j) + full).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn code_state_delta_at_zero_beta() {
        let h = SlhzHamiltonian::syndrome_only(6, 2.0, CheckWeight::Four).unwrap();
        let x = SpinMatrix::ones(6);
        for (p, (i, j)) in pairs(6).into_iter().enumerate() {
            let adj = h.graph().var_checks[p].len() as f64;
            assert_eq!(h.delta_energy(&x, i, j), 2.0 * adj);
        }
    }

    #[test]
    fn infinite_penalty_never_leaves_code_space() {
        let h = SlhzHamiltonian::syndrome_only(5, f64::INFINITY, CheckWeight::Three).unwrap();
        let mut rng = stream_rng(9, 0);
        let mut x = SpinMatrix::ones(5);
        for _ in 0..2000 {
            x = metropolis_step(&h, &x, &mut rng);
            assert!(is_code_state(&x));
        }
    }

    #[test]
    fn frozen_signal() {
        let inst = Instance::new(4, vec![1.0; 6]).unwrap();
        let h = SlhzHamiltonian::new(&inst, f64::INFINITY, f64::INFINITY, CheckWeight::Four).unwrap();
        let mut rng = stream_rng(0, 0);
        assert_eq!(rejection_free_step(&h, &SpinMatrix::ones(4), &mut rng), RejectionFreeStep::Frozen);
        let mut chain = ChainState::new(&h, &SpinMatrix::ones(4)).unwrap();
        assert_eq!(chain.rejection_free_move(&mut rng), None);
    }

    #[test]
    fn rejection_free_always_moves() {
        let inst = gen_instance(5, 0.25, 8, false).unwrap();
        let h = SlhzHamiltonian::new(&inst, 3.0, 2.0, CheckWeight::Four).unwrap();
        let mut rng = stream_rng(4, 0);
        let mut x = SpinMatrix::ones(5);
        for _ in 0..500 {
            match rejection_free_step(&h, &x, &mut rng) {
                RejectionFreeStep::Moved { state, holding_weight } => {
                    assert_eq!(state.hamming_distance(&x), 1);
                    assert!(holding_weight >= 1.0);
                    x = state;
                }
                RejectionFreeStep::Frozen => panic!("unexpected freeze"),
            }
        }
    }

    #[test]
    fn uniform_rates_constant_holding_weight() {
        let h = SlhzHamiltonian::syndrome_only(5, 0.0, CheckWeight::Three).unwrap();
        let mut chain = ChainState::new(&h, &SpinMatrix::ones(5)).unwrap();
        let mut rng = stream_rng(4, 1);
        for _ in 0..100 {
            assert_eq!(chain.rejection_free_move(&mut rng), Some(1.0));
        }
    }

    #[test]
    fn tracked_energy_does_not_drift() {
        let inst = gen_instance(10, 0.25, 21, false).unwrap();
        let h = SlhzHamiltonian::new(&inst, 1.1, 0.9, CheckWeight::Four).unwrap();
        let mut chain = ChainState::new(&h, &SpinMatrix::ones(10)).unwrap();
        let mut rng = stream_rng(5, 0);
        for step in 0..100_000 {
            if step % 2 == 0 {
                chain.metropolis_move(&mut rng);
            } else {
                chain.rejection_free_move(&mut rng);
            }
        }
        assert!((chain.energy() - h.energy(&chain.state())).abs() < 1e-6);
        assert_eq!(chain.is_code_state(), is_code_state(&chain.state()));
    }

    fn boltzmann_tv(kernel: Kernel, steps: usize) -> f64 {
        let inst = k4_instance();
        let h = SlhzHamiltonian::new(&inst, 2.0, 0.6, CheckWeight::Four).unwrap();
        let table = exact_boltzmann(&h).unwrap();
        let mut hist = vec![0.0; 64];
        let cfg = McmcConfig {
            kernel,
            burn_in_sweeps: 10,
            samples_per_chain: steps,
            stride: 1,
            init: InitState::Random,
            seed: 77,
            schedule: Schedule::Constant,
        };
        run_chain_with(&h, &cfg, |s| hist[state_index(&s.chain.state())] += s.weight).unwrap();
        table.total_variation(&hist)
    }

    #[test]
    fn metropolis_matches_boltzmann() {
        assert!(boltzmann_tv(Kernel::Metropolis, 300_000) < 0.02);
    }

    #[test]
    fn rejection_free_matches_boltzmann() {
        assert!(boltzmann_tv(Kernel::RejectionFree, 300_000) < 0.02);
    }

    #[test]
    fn chain_at_target_stays() {
        let inst = gen_instance(6, 0.25, 2, true).unwrap();
        let target = inst.target_code_state().unwrap();
        let h = SlhzHamiltonian::new(&inst, 200.0, 200.0, CheckWeight::Four).unwrap();
        let cfg = McmcConfig {
            kernel: Kernel::Metropolis,
            burn_in_sweeps: 0,
            samples_per_chain: 500,
            stride: 1,
            init: InitState::Given(target.clone()),
            seed: 1,
            schedule: Schedule::Constant,
        };
        let res = run_chain(&h, &cfg).unwrap();
        assert!(res.contains_target.exact && res.contains_target.any);
        assert!(res.samples.iter().all(|x| *x == target));
        for (x, e) in res.samples.iter().zip(&res.energies) {
            assert!((h.energy(x) - e).abs() < 1e-9);
        }
    }

    #[test]
    fn budgets() {
        let c = McmcConfig::mcmc_decoding(14, 0);
        assert_eq!(c.samples_per_chain, 1200 * 91);
        let c = McmcConfig::hybrid(14, 0);
        assert_eq!(c.samples_per_chain, 4 * 91);
        assert_eq!(c.burn_in_sweeps, 1);
    }

    #[test]
    fn hybrid_flags_monotone() {
        let inst = gen_instance(8, 0.25, 4, true).unwrap();
        let h = SlhzHamiltonian::new(&inst, 4.0, 1.0, CheckWeight::Four).unwrap();
        for seed in 0..10 {
            let cfg = McmcConfig::hybrid(8, seed);
            let res = hybrid_decode(&h, &cfg, &BfConfig::default()).unwrap();
            let dec = res.decoded_flags.unwrap();
            assert!(!res.contains_target.exact || dec.exact);
            assert!(!res.contains_target.any || dec.any);
            let summary = hybrid_summary(&h, &cfg, &BfConfig::default()).unwrap();
            assert_eq!(summary.raw, res.contains_target);
            assert_eq!(summary.decoded.unwrap().exact, dec.exact);
        }
    }

    #[test]
    fn schedule_hook_runs() {
        let inst = gen_instance(5, 0.25, 4, true).unwrap();
        let h = SlhzHamiltonian::new(&inst, 0.0, 0.0, CheckWeight::Four).unwrap();
        let mut cfg = McmcConfig::hybrid(5, 3);
        cfg.schedule = Schedule::Linear {
            beta_end: 50.0,
            gamma_end: 50.0,
        };
        cfg.samples_per_chain = 400;
        let res = run_chain(&h, &cfg).unwrap();
        assert_eq!(res.samples.len(), 400);
    }

    #[test]
    fn average_error_matrix_basics() {
        let z = encode(&LogicalState::new(vec![1, -1, -1, 1, 1]).unwrap());
        let m = average_error_matrix(&vec![z.clone(); 5], &z).unwrap();
        assert!(m.mean.iter().all(|&v| v == 1.0));
        assert_eq!(m.p_correct(0, 3), 1.0);

        let mut rng = stream_rng(3, 3);
        let samples: Vec<SpinMatrix> = (0..4000)
            .map(|_| {
                let v: Vec<i8> = (0..10).map(|_| if rng.gen() { 1 } else { -1 }).collect();
                matrix_view(5, &v).unwrap()
            })
            .collect();
        let m = average_error_matrix(&samples, &z).unwrap();
        for i in 0..5 {
            assert_eq!(m.get(i, i), 1.0);
            for j in 0..5 {
                if i != j {
                    assert!(m.get(i, j).abs() < 5.0 / (4000f64).sqrt());
                }
            }
        }
        assert!(average_error_matrix(&[], &z).is_err());
    }
}
