//! Noise models, problem instances and channel-derived quantities.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle;
use crate::parity_code::{pair_index, CodeParams, LogicalState, SpinMatrix};

/// Seedable generator used everywhere in the crate.
pub type SimRng = ChaCha8Rng;

/// Independent stream `stream` of the generator seeded by `seed`.
///
/// Streams never overlap, so trial `t` of an experiment can use
/// `stream_rng(master, t)` regardless of execution order.
pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mixes labels into a single 64-bit key (splitmix64 finaliser).
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x9E37_79B9_7F4A_7C15;
    for &p in parts {
        h ^= p.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(h << 6).wrapping_add(h >> 2);
        h = (h ^ (h >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        h = (h ^ (h >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h ^= h >> 31;
    }
    h
}

/// Hard decision with `sign(0) = +1`.
#[inline]
pub fn hard_sign(v: f64) -> i8 {
    if v < 0.0 {
        -1
    } else {
        1
    }
}

/// i.i.d. spin-flip noise with flip probability `epsilon ∈ [0, 0.5)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IidNoise {
    epsilon: f64,
}

impl IidNoise {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&epsilon) {
            return Err(Error::invalid(format!(
                "flip probability must lie in [0, 0.5), got {epsilon}"
            )));
        }
        Ok(Self { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

/// Error matrix with each off-diagonal pair independently `-1` with
/// probability ε. One draw per pair, in canonical pair order.
pub fn sample_iid_error<R: Rng + ?Sized>(params: CodeParams, noise: IidNoise, rng: &mut R) -> SpinMatrix {
    let k = params.k;
    let mut m = SpinMatrix::ones(k);
    if noise.epsilon == 0.0 {
        return m;
    }
    for i in 0..k {
        for j in i + 1..k {
            if rng.gen_bool(noise.epsilon) {
                m.set(i, j, -1);
            }
        }
    }
    m
}

/// BPSK over AWGN: amplitude `|v|`, noise deviation σ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AwgnChannel {
    amplitude: f64,
    sigma: f64,
}

impl AwgnChannel {
    pub fn new(amplitude: f64, sigma: f64) -> Result<Self> {
        if !(amplitude.is_finite() && amplitude > 0.0) {
            return Err(Error::invalid(format!("amplitude must be > 0, got {amplitude}")));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::invalid(format!("sigma must be > 0, got {sigma}")));
        }
        Ok(Self { amplitude, sigma })
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Channel reliability factor `2|v|/σ²`.
    pub fn beta(&self) -> f64 {
        2.0 * self.amplitude / (self.sigma * self.sigma)
    }

    /// Half log-likelihood ratio `B = β y / 2`.
    pub fn llr(&self, y: f64) -> f64 {
        0.5 * self.beta() * y
    }

    /// Noisy observation `|v| z + n` of spin `z`.
    pub fn transmit<R: Rng + ?Sized>(&self, z: i8, rng: &mut R) -> f64 {
        self.amplitude * f64::from(z) + self.sigma * standard_normal(rng)
    }
}

fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // Box-Muller; u1 in (0, 1] keeps the log finite.
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Logical problem: couplings `J_ij` over the `C(K,2)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub k: usize,
    /// Canonical pair order.
    pub couplings: Vec<f64>,
    /// Optional precomputed minimiser of `-Σ J_ij Z_i Z_j`, first spin `+1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_state: Option<Vec<i8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling_bound: Option<f64>,
}

impl Instance {
    pub fn new(k: usize, couplings: Vec<f64>) -> Result<Self> {
        let params = CodeParams::new(k)?;
        if couplings.len() != params.n_v {
            return Err(Error::invalid(format!(
                "expected {} couplings for K = {k}, got {}",
                params.n_v,
                couplings.len()
            )));
        }
        if let Some(bad) = couplings.iter().find(|c| !c.is_finite()) {
            return Err(Error::invalid(format!("coupling {bad} is not finite")));
        }
        Ok(Self {
            k,
            couplings,
            ground_state: None,
            seed: None,
            coupling_bound: None,
        })
    }

    pub fn params(&self) -> CodeParams {
        CodeParams::new(self.k).expect("validated on construction")
    }

    #[inline]
    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.couplings[pair_index(self.k, a, b)]
    }

    /// `H^source(Z) = -Σ_{i<j} J_ij Z_i Z_j`, summed in canonical pair order.
    pub fn source_energy(&self, z: &LogicalState) -> f64 {
        let s = z.spins();
        let mut e = 0.0;
        let mut p = 0;
        for i in 0..self.k {
            for j in i + 1..self.k {
                e -= self.couplings[p] * f64::from(s[i] * s[j]);
                p += 1;
            }
        }
        e
    }

    pub fn ground_state(&self) -> Option<LogicalState> {
        self.ground_state
            .as_ref()
            .map(|g| LogicalState::new(g.clone()).expect("validated on load"))
    }

    /// The code-state `ẑ = ZᵀZ` of the stored ground state.
    pub fn target_code_state(&self) -> Option<SpinMatrix> {
        self.ground_state().map(|z| crate::parity_code::encode(&z))
    }

    /// Matrix of coupling signs with `sign(0) = +1`.
    pub fn sign_matrix(&self) -> SpinMatrix {
        let mut m = SpinMatrix::ones(self.k);
        let mut p = 0;
        for i in 0..self.k {
            for j in i + 1..self.k {
                m.set(i, j, hard_sign(self.couplings[p]));
                p += 1;
            }
        }
        m
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("instance serialises")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: Instance =
            toml::from_str(text).map_err(|e| Error::Config(format!("instance file: {e}")))?;
        let mut inst = Instance::new(raw.k, raw.couplings)?;
        if let Some(g) = raw.ground_state {
            if g.len() != raw.k {
                return Err(Error::invalid(format!(
                    "ground state has {} spins, expected {}",
                    g.len(),
                    raw.k
                )));
            }
            LogicalState::new(g.clone())?;
            inst.ground_state = Some(g);
        }
        inst.seed = raw.seed;
        inst.coupling_bound = raw.coupling_bound;
        Ok(inst)
    }

    /// Writes the TOML form, creating parent directories as needed.
    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(path, self.to_toml()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }
}

/// Random instance with couplings uniform on `[-bound, bound]`.
///
/// With `with_ground_truth` the minimiser is computed by exhaustive search,
/// which is refused above [`oracle::MAX_BRUTE_FORCE_K`].
pub fn gen_instance(k: usize, coupling_bound: f64, seed: u64, with_ground_truth: bool) -> Result<Instance> {
    if !(coupling_bound.is_finite() && coupling_bound >= 0.0) {
        return Err(Error::invalid(format!(
            "coupling bound must be finite and >= 0, got {coupling_bound}"
        )));
    }
    if with_ground_truth && k > oracle::MAX_BRUTE_FORCE_K {
        return Err(Error::Capacity {
            what: "brute-force ground state",
            requested: k,
            limit: oracle::MAX_BRUTE_FORCE_K,
        });
    }
    let params = CodeParams::new(k)?;
    let mut rng = stream_rng(seed, 0);
    let couplings = (0..params.n_v)
        .map(|_| {
            if coupling_bound == 0.0 {
                0.0
            } else {
                rng.gen_range(-coupling_bound..=coupling_bound)
            }
        })
        .collect();
    let mut inst = Instance::new(k, couplings)?;
    inst.seed = Some(seed);
    inst.coupling_bound = Some(coupling_bound);
    if with_ground_truth {
        let sol = oracle::brute_force_ground_state(&inst)?;
        inst.ground_state = Some(sol.minimizer.spins().to_vec());
    }
    Ok(inst)
}

/// Crosstalk probabilities and log-likelihood weights for one pair `{i, j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrosstalkParams {
    pub pair: (usize, usize),
    pub gamma_ij: f64,
    /// Third indices `k ∉ {i, j}`, ascending.
    pub others: Vec<usize>,
    /// `p_k = ½(1 − (1−2γ_jk)(1−2γ_ik))`, aligned with `others`.
    pub p: Vec<f64>,
    /// `log((1−γ_ij)/γ_ij)`.
    pub w0: f64,
    /// `log((1−p_k)/p_k)`, aligned with `others`.
    pub wk: Vec<f64>,
    /// Set when the weights were replaced by the unit majority-vote weights.
    pub approximated: bool,
}

impl CrosstalkParams {
    /// Majority-vote approximation `w0 = wk = 1` used by plain bit flipping.
    pub fn approximated(&self) -> Self {
        Self {
            w0: 1.0,
            wk: vec![1.0; self.wk.len()],
            approximated: true,
            ..self.clone()
        }
    }

    /// Weight for the check formed with third index `k`.
    pub fn weight_for(&self, k: usize) -> Option<f64> {
        self.others.binary_search(&k).ok().map(|idx| self.wk[idx])
    }
}

/// Probability that an odd number of two independent errors occurred.
#[inline]
pub fn odd_parity_probability(g1: f64, g2: f64) -> f64 {
    0.5 * (1.0 - (1.0 - 2.0 * g1) * (1.0 - 2.0 * g2))
}

#[inline]
fn log_odds(p: f64) -> f64 {
    ((1.0 - p) / p).ln()
}

/// Crosstalk parameters of pair `{i, j}` given per-pair prior error
/// probabilities `gammas` (canonical pair order, each in `(0, 0.5)`).
pub fn crosstalk(k: usize, gammas: &[f64], i: usize, j: usize) -> Result<CrosstalkParams> {
    let params = CodeParams::new(k)?;
    if gammas.len() != params.n_v {
        return Err(Error::invalid(format!(
            "expected {} error probabilities, got {}",
            params.n_v,
            gammas.len()
        )));
    }
    if i == j || i >= k || j >= k {
        return Err(Error::invalid(format!("({i}, {j}) is not a valid pair for K = {k}")));
    }
    if let Some(bad) = gammas.iter().find(|g| !(**g > 0.0 && **g < 0.5)) {
        return Err(Error::invalid(format!(
            "error probability {bad} outside (0, 0.5)"
        )));
    }
    let (i, j) = if i < j { (i, j) } else { (j, i) };
    let gamma = |a: usize, b: usize| {
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        gammas[pair_index(k, a, b)]
    };
    let gamma_ij = gamma(i, j);
    let others: Vec<usize> = (0..k).filter(|&l| l != i && l != j).collect();
    let p: Vec<f64> = others
        .iter()
        .map(|&l| odd_parity_probability(gamma(j, l), gamma(i, l)))
        .collect();
    let wk = p.iter().map(|&pk| log_odds(pk)).collect();
    Ok(CrosstalkParams {
        pair: (i, j),
        gamma_ij,
        others,
        p,
        w0: log_odds(gamma_ij),
        wk,
        approximated: false,
    })
}
