//! Photon-number amplitudes of the down-conversion state and of two-mode
//! rotations.
//!
//! The source emits, up to normalization `1/cosh^2(tau)`,
//!
//! ```text
//! sum_n tanh^n(tau) sum_{m=0..n} (-1)^m |n-m, m, m, n-m>
//! ```
//!
//! over the modes `(a_h, a_v, b_h, b_v)`. The rotation applied to a pair of
//! modes is the reflection-type matrix `[[cos(x/2), sin(x/2)], [sin(x/2), -cos(x/2)]]`
//! acting on the creation operators.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One of the four optical modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "a_h")]
    AH,
    #[serde(rename = "a_v")]
    AV,
    #[serde(rename = "b_h")]
    BH,
    #[serde(rename = "b_v")]
    BV,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::AH, Mode::AV, Mode::BH, Mode::BV];

    /// Modes of the sensing path `a` carry the unknown rotation.
    pub const fn is_sensing(self) -> bool {
        matches!(self, Mode::AH | Mode::AV)
    }

    pub const fn index(self) -> usize {
        self as usize
    }

    pub const fn name(self) -> &'static str {
        match self {
            Mode::AH => "a_h",
            Mode::AV => "a_v",
            Mode::BH => "b_h",
            Mode::BV => "b_v",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "a_h" | "ah" => Ok(Mode::AH),
            "a_v" | "av" => Ok(Mode::AV),
            "b_h" | "bh" => Ok(Mode::BH),
            "b_v" | "bv" => Ok(Mode::BV),
            other => Err(Error::domain(format!("unknown mode {other:?}"))),
        }
    }
}

/// Photon numbers in the four modes, ordered `(a_h, a_v, b_h, b_v)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModeOccupation {
    pub a_h: u32,
    pub a_v: u32,
    pub b_h: u32,
    pub b_v: u32,
}

impl ModeOccupation {
    pub const fn new(a_h: u32, a_v: u32, b_h: u32, b_v: u32) -> Self {
        Self { a_h, a_v, b_h, b_v }
    }

    pub const fn path_a(&self) -> u32 {
        self.a_h + self.a_v
    }

    pub const fn path_b(&self) -> u32 {
        self.b_h + self.b_v
    }

    pub const fn total(&self) -> u32 {
        self.path_a() + self.path_b()
    }
}

/// Gain of the source and how far the pair-number sum is carried.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceParams {
    tau: f64,
    trunc_epsilon: f64,
    max_pairs: Option<u32>,
}

impl SourceParams {
    pub const DEFAULT_EPSILON: f64 = 1e-12;

    pub fn new(tau: f64) -> Result<Self> {
        if !tau.is_finite() || tau < 0.0 {
            return Err(Error::domain(format!(
                "tau must be finite and >= 0, got {tau}"
            )));
        }
        Ok(Self {
            tau,
            trunc_epsilon: Self::DEFAULT_EPSILON,
            max_pairs: None,
        })
    }

    pub fn with_epsilon(mut self, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::domain(format!(
                "truncation epsilon must lie in (0,1), got {eps}"
            )));
        }
        self.trunc_epsilon = eps;
        Ok(self)
    }

    /// Fix the pair-number cutoff instead of deriving it from the epsilon.
    pub fn with_max_pairs(mut self, n_max: u32) -> Self {
        self.max_pairs = Some(n_max);
        self
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn trunc_epsilon(&self) -> f64 {
        self.trunc_epsilon
    }

    pub fn max_pairs(&self) -> Option<u32> {
        self.max_pairs
    }

    /// `tanh^2(tau)`, the ratio of successive pair-number weights.
    pub fn pair_ratio(&self) -> f64 {
        let t = self.tau.tanh();
        t * t
    }

    /// Probability that exactly `n` pairs are emitted: `(n+1) tanh^{2n} / cosh^4`.
    pub fn pair_probability(&self, n: u32) -> f64 {
        let x = self.pair_ratio();
        let sech2 = 1.0 / self.tau.cosh().powi(2);
        (n as f64 + 1.0) * x.powi(n as i32) * sech2 * sech2
    }

    /// Probability mass of all pair numbers `>= k`.
    pub fn mass_at_least(&self, k: u32) -> f64 {
        if k == 0 {
            1.0
        } else {
            truncation_tail(self.tau, k - 1)
        }
    }

    /// Pair-number cutoff used by the engines.
    pub fn n_max(&self) -> Result<u32> {
        choose_truncation(self)
    }
}

/// Rotation angles: `phi` on the sensing modes `(a_h, a_v)` and the control
/// angle `theta` on the reference modes `(b_h, b_v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationSpec {
    pub phi: f64,
    pub theta: f64,
}

impl RotationSpec {
    pub const fn new(phi: f64, theta: f64) -> Self {
        Self { phi, theta }
    }

    /// Rotation on the sensing path only.
    pub const fn sensing(phi: f64) -> Self {
        Self { phi, theta: 0.0 }
    }

    /// Angles reduced to `[0, 2pi)` for reporting.
    pub fn reduced(&self) -> (f64, f64) {
        (self.phi.rem_euclid(TAU), self.theta.rem_euclid(TAU))
    }
}

/// Probability mass beyond `n_max` pairs:
/// `sum_{n > n_max} (n+1) x^n (1-x)^2 = x^{n_max+1} (n_max + 2 - (n_max+1) x)`.
pub fn truncation_tail(tau: f64, n_max: u32) -> f64 {
    let x = tau.tanh().powi(2);
    let n = n_max as f64;
    x.powi(n_max as i32 + 1) * (n + 2.0 - (n + 1.0) * x)
}

const TRUNCATION_LIMIT: u32 = 4096;

/// Smallest pair cutoff whose neglected tail is below the source epsilon.
pub fn choose_truncation(src: &SourceParams) -> Result<u32> {
    if let Some(n) = src.max_pairs {
        return Ok(n);
    }
    if src.tau >= 1.0 {
        return Err(Error::UnsupportedRegime(format!(
            "tau = {} >= 1; fix the cutoff explicitly with max_pairs",
            src.tau
        )));
    }
    (0..TRUNCATION_LIMIT)
        .find(|&n| truncation_tail(src.tau, n) < src.trunc_epsilon)
        .ok_or_else(|| Error::UnsupportedRegime("truncation does not converge".into()))
}

/// Normalized amplitude of `|n-m, m, m, n-m>`: `(-1)^m tanh^n(tau) / cosh^2(tau)`.
pub fn pdc_term_amplitude(n: u32, m: u32, src: &SourceParams) -> Result<f64> {
    if m > n {
        return Err(Error::domain(format!(
            "partition index m = {m} exceeds pair index n = {n}"
        )));
    }
    let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
    Ok(sign * src.tau.tanh().powi(n as i32) / src.tau.cosh().powi(2))
}

fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `sqrt(a! b! / (c! d!))` via log-factorials.
fn factorial_ratio_sqrt(a: u32, b: u32, c: u32, d: u32) -> f64 {
    let ln = |k: u32| (1..=k).map(|i| (i as f64).ln()).sum::<f64>();
    (0.5 * (ln(a) + ln(b) - ln(c) - ln(d))).exp()
}

/// `<p', q'| U(angle) |p, q>` for the two-mode rotation, by expanding the
/// transformed creation-operator monomial `(a†)^p (b†)^q`.
pub fn rotation_amplitude(out: (u32, u32), inp: (u32, u32), angle: f64) -> f64 {
    let (po, qo) = out;
    let (p, q) = inp;
    if po + qo != p + q {
        return 0.0;
    }
    let (s, c) = (0.5 * angle).sin_cos();
    let mut sum = 0.0;
    // i h-photons come from (c a† + s b†)^p, the other po - i from (s a† - c b†)^q
    for i in po.saturating_sub(q)..=p.min(po) {
        let j = po - i;
        let from_h = binomial(p, i) * c.powi(i as i32) * s.powi((p - i) as i32);
        let from_v = binomial(q, j) * s.powi(j as i32) * (-c).powi((q - j) as i32);
        sum += from_h * from_v;
    }
    sum * factorial_ratio_sqrt(po, qo, p, q)
}

/// All rotation amplitudes within the `n`-photon block, indexed by the photon
/// number in the first mode: `get(out, in) = <out, n-out| U |in, n-in>`.
#[derive(Debug, Clone)]
pub struct RotationBlock {
    n: u32,
    amps: Vec<f64>,
}

impl RotationBlock {
    pub fn new(n: u32, angle: f64) -> Self {
        let dim = n as usize + 1;
        let mut amps = vec![0.0; dim * dim];
        for out in 0..=n {
            for inp in 0..=n {
                amps[out as usize * dim + inp as usize] =
                    rotation_amplitude((out, n - out), (inp, n - inp), angle);
            }
        }
        Self { n, amps }
    }

    pub fn photons(&self) -> u32 {
        self.n
    }

    #[inline]
    pub fn get(&self, out: u32, inp: u32) -> f64 {
        self.amps[out as usize * (self.n as usize + 1) + inp as usize]
    }
}

/// Closed-form Wigner small-d element with doubled arguments
/// (`two_j = 2j`, `two_mp = 2m'`, `two_m = 2m`).
pub fn wigner_small_d(two_j: i32, two_mp: i32, two_m: i32, beta: f64) -> f64 {
    if (two_j + two_mp) % 2 != 0
        || (two_j + two_m) % 2 != 0
        || two_mp.abs() > two_j
        || two_m.abs() > two_j
    {
        return 0.0;
    }
    let jpm = (two_j + two_m) / 2;
    let jmm = (two_j - two_m) / 2;
    let jpmp = (two_j + two_mp) / 2;
    let jmmp = (two_j - two_mp) / 2;
    let mp_minus_m = (two_mp - two_m) / 2;
    let ln_fact = |k: i32| (1..=k).map(|i| (i as f64).ln()).sum::<f64>();
    let norm = 0.5 * (ln_fact(jpmp) + ln_fact(jmmp) + ln_fact(jpm) + ln_fact(jmm));
    let (s, c) = (0.5 * beta).sin_cos();
    let k_lo = 0.max(-mp_minus_m);
    let k_hi = jpm.min(jmmp);
    let mut sum = 0.0;
    for k in k_lo..=k_hi {
        let denom = ln_fact(jpm - k) + ln_fact(k) + ln_fact(jmmp - k) + ln_fact(k + mp_minus_m);
        let sign = if (k + mp_minus_m) % 2 == 0 { 1.0 } else { -1.0 };
        let cos_pow = two_j - 2 * k - mp_minus_m;
        let sin_pow = 2 * k + mp_minus_m;
        sum += sign * (norm - denom).exp() * c.powi(cos_pow) * s.powi(sin_pow);
    }
    sum
}

/// Amplitude of `|c>` in the rotated `n`-pair term (without the gain weight).
fn rotated_pair_amplitude(
    c_ah: u32,
    c_bh: u32,
    sensing: &RotationBlock,
    reference: &RotationBlock,
) -> f64 {
    let n = sensing.photons();
    (0..=n)
        .map(|m| {
            let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
            sign * sensing.get(c_ah, n - m) * reference.get(c_bh, m)
        })
        .sum()
}

/// Probability of the perfect projection onto `c` after the rotations.
///
/// Vanishes unless both paths hold the same photon number. With `theta = 0`
/// this is `tanh^{2n}/cosh^4 * |<c_ah, c_av| U(phi) |c_bv, c_bh>|^2`.
pub fn ideal_pattern_probability(c: ModeOccupation, rot: RotationSpec, src: &SourceParams) -> f64 {
    if c.path_a() != c.path_b() {
        return 0.0;
    }
    let n = c.path_a();
    let amp = if rot.theta == 0.0 {
        rotation_amplitude((c.a_h, c.a_v), (c.b_v, c.b_h), rot.phi)
    } else {
        let sensing = RotationBlock::new(n, rot.phi);
        let reference = RotationBlock::new(n, rot.theta);
        rotated_pair_amplitude(c.a_h, c.b_h, &sensing, &reference)
    };
    let weight = src.tau.tanh().powi(n as i32) / src.tau.cosh().powi(2);
    (weight * amp).powi(2)
}

/// Ideal (perfect-projection) probabilities of every occupation up to a pair
/// cutoff, stored per pair number `n` as an `(n+1) x (n+1)` table over
/// `(c_ah, c_bh)`.
#[derive(Debug, Clone)]
pub struct IdealTable {
    blocks: Vec<Vec<f64>>,
}

impl IdealTable {
    pub fn new(rot: RotationSpec, src: &SourceParams, n_max: u32) -> Self {
        let t = src.tau.tanh();
        let sech2 = 1.0 / src.tau.cosh().powi(2);
        let blocks = (0..=n_max)
            .map(|n| {
                let dim = n as usize + 1;
                let sensing = RotationBlock::new(n, rot.phi);
                let reference = RotationBlock::new(n, rot.theta);
                let weight = t.powi(n as i32) * sech2;
                let mut block = vec![0.0; dim * dim];
                for c_ah in 0..=n {
                    for c_bh in 0..=n {
                        let amp = weight * rotated_pair_amplitude(c_ah, c_bh, &sensing, &reference);
                        block[c_ah as usize * dim + c_bh as usize] = amp * amp;
                    }
                }
                block
            })
            .collect();
        Self { blocks }
    }

    pub fn n_max(&self) -> u32 {
        self.blocks.len() as u32 - 1
    }

    /// Probability of `(c_ah, n - c_ah, c_bh, n - c_bh)`.
    #[inline]
    pub fn prob(&self, n: u32, c_ah: u32, c_bh: u32) -> f64 {
        self.blocks[n as usize][c_ah as usize * (n as usize + 1) + c_bh as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = (ModeOccupation, f64)> + '_ {
        self.blocks.iter().enumerate().flat_map(|(n, block)| {
            let n = n as u32;
            block.iter().enumerate().map(move |(idx, &p)| {
                let c_ah = idx as u32 / (n + 1);
                let c_bh = idx as u32 % (n + 1);
                (ModeOccupation::new(c_ah, n - c_ah, c_bh, n - c_bh), p)
            })
        })
    }

    pub fn total(&self) -> f64 {
        self.blocks.iter().flatten().sum()
    }
}
