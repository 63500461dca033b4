//! Photon-counting POVMs for multiplexed arrays of binary detectors.
//!
//! A mode split evenly over `d` bucket detectors registers `r` clicks from `c`
//! photons with weight `w_r(c) = d! S(c, r) / ((d - r)! d^c)`: the chance that
//! `c` photons thrown uniformly into `d` bins occupy exactly `r` of them.
//! Loss ahead of the array is a binomial thinning of the photon number, folded
//! into the weights.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{Mode, SourceParams};

/// Stirling number of the second kind `S(c, r)`, exact.
///
/// Returns `None` if the value overflows `u128` (not before `c = 40`).
pub fn stirling2(c: u32, r: u32) -> Option<u128> {
    if r > c {
        return Some(0);
    }
    if r == c {
        return Some(1);
    }
    if r == 0 {
        return Some(0);
    }
    // row-by-row over S(i, j) = j S(i-1, j) + S(i-1, j-1), keeping j <= r
    let r = r as usize;
    let mut row = vec![0u128; r + 1];
    row[0] = 1;
    for i in 1..=c as usize {
        for j in (1..=r.min(i)).rev() {
            row[j] = row[j].checked_mul(j as u128)?.checked_add(row[j - 1])?;
        }
        row[0] = 0;
    }
    Some(row[r])
}

fn falling_factorial(d: u32, r: u32) -> f64 {
    (0..r).map(|i| (d - i) as f64).product()
}

fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `w_r(c) = d! S(c, r) / ((d - r)! d^c)` for a lossless `d`-fold array.
pub fn lossless_weights(d: u32, r: u32, c: u32) -> Result<f64> {
    if d == 0 {
        return Err(Error::domain("multiplexing arity must be >= 1"));
    }
    if r > d {
        return Err(Error::domain(format!("{r} clicks exceed arity {d}")));
    }
    match stirling2(c, r) {
        Some(s) => Ok(falling_factorial(d, r) * s as f64 / (d as f64).powi(c as i32)),
        None => Ok(occupancy_column(d, c)[r as usize]),
    }
}

/// Distribution of the number of occupied bins after `c` uniform throws into
/// `d` bins, by adding one photon at a time.
fn occupancy_column(d: u32, c: u32) -> Vec<f64> {
    let d_f = d as f64;
    let mut col = vec![0.0; d as usize + 1];
    col[0] = 1.0;
    for _ in 0..c {
        for r in (0..=d as usize).rev() {
            let stay = col[r] * r as f64 / d_f;
            let grow = if r > 0 {
                col[r - 1] * (d_f - r as f64 + 1.0) / d_f
            } else {
                0.0
            };
            col[r] = stay + grow;
        }
    }
    col
}

/// Weight of an ideal number-resolving detector: `delta(r, c)`.
pub fn perfect_counting_weights(r: u32, c: u32) -> f64 {
    if r == c {
        1.0
    } else {
        0.0
    }
}

/// How one mode is split over binary detectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Arity {
    /// `d` bucket detectors behind a balanced splitter network.
    Multiplexed(u32),
    /// The `d -> infinity` limit: a perfect photon-number projection.
    PerfectCounting,
}

impl fmt::Display for Arity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arity::Multiplexed(d) => write!(f, "{d}"),
            Arity::PerfectCounting => f.write_str("inf"),
        }
    }
}

impl FromStr for Arity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "perfect" | "infinity" => Ok(Arity::PerfectCounting),
            other => match other.parse::<u32>() {
                Ok(0) | Err(_) => Err(Error::domain(format!(
                    "arity must be a positive integer or 'inf', got {s:?}"
                ))),
                Ok(d) => Ok(Arity::Multiplexed(d)),
            },
        }
    }
}

/// Weight table `w_r(c)` for `r` in `0..=max_clicks`, `c` in `0..=c_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct PovmTable {
    arity: Arity,
    eta: f64,
    c_max: u32,
    r_max: u32,
    weights: Vec<f64>,
}

impl PovmTable {
    pub fn lossless(arity: Arity, c_max: u32) -> Result<Self> {
        let (r_max, weights) = match arity {
            Arity::Multiplexed(0) => return Err(Error::domain("multiplexing arity must be >= 1")),
            Arity::Multiplexed(d) => {
                let cols: Vec<Vec<f64>> = (0..=c_max).map(|c| occupancy_column(d, c)).collect();
                let mut w = vec![0.0; (d as usize + 1) * (c_max as usize + 1)];
                for (c, col) in cols.iter().enumerate() {
                    for (r, &v) in col.iter().enumerate() {
                        w[r * (c_max as usize + 1) + c] = v;
                    }
                }
                (d, w)
            }
            Arity::PerfectCounting => {
                let dim = c_max as usize + 1;
                let mut w = vec![0.0; dim * dim];
                for c in 0..dim {
                    w[c * dim + c] = 1.0;
                }
                (c_max, w)
            }
        };
        Ok(Self {
            arity,
            eta: 1.0,
            c_max,
            r_max,
            weights,
        })
    }

    pub fn arity(&self) -> Arity {
        self.arity
    }

    /// Overall efficiency already folded into the weights.
    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn c_max(&self) -> u32 {
        self.c_max
    }

    pub fn max_clicks(&self) -> u32 {
        self.r_max
    }

    /// `w_r(c)`; zero outside the table.
    #[inline]
    pub fn weight(&self, r: u32, c: u32) -> f64 {
        if r > self.r_max || c > self.c_max {
            return 0.0;
        }
        self.weights[r as usize * (self.c_max as usize + 1) + c as usize]
    }

    /// Apply a loss channel of efficiency `eta` ahead of the detector.
    pub fn with_loss(&self, eta: f64) -> Result<Self> {
        lossy_weights(self, eta)
    }
}

/// `w'_r(c') = sum_{c <= c'} w_r(c) C(c', c) eta^c (1 - eta)^{c' - c}`.
pub fn lossy_weights(table: &PovmTable, eta: f64) -> Result<PovmTable> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::domain(format!(
            "efficiency must lie in [0,1], got {eta}"
        )));
    }
    let dim = table.c_max as usize + 1;
    let mut weights = vec![0.0; (table.r_max as usize + 1) * dim];
    for r in 0..=table.r_max {
        for c_out in 0..=table.c_max {
            let w: f64 = (0..=c_out)
                .map(|c| {
                    table.weight(r, c)
                        * binomial(c_out, c)
                        * eta.powi(c as i32)
                        * (1.0 - eta).powi((c_out - c) as i32)
                })
                .sum();
            weights[r as usize * dim + c_out as usize] = w;
        }
    }
    Ok(PovmTable {
        arity: table.arity,
        eta: table.eta * eta,
        c_max: table.c_max,
        r_max: table.r_max,
        weights,
    })
}

/// Per-mode POVMs of the whole setup. Loss is polarization independent, so
/// both modes of a path share one table.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorModel {
    arity: Arity,
    sensing: PovmTable,
    reference: PovmTable,
}

impl DetectorModel {
    pub fn new(arity: Arity, eta_a: f64, eta_b: f64, c_max: u32) -> Result<Self> {
        let lossless = PovmTable::lossless(arity, c_max)?;
        Ok(Self {
            arity,
            sensing: lossless.with_loss(eta_a)?,
            reference: lossless.with_loss(eta_b)?,
        })
    }

    /// Tables sized for the source truncation (`c_max = 4 n_max`).
    pub fn for_source(arity: Arity, eta_a: f64, eta_b: f64, src: &SourceParams) -> Result<Self> {
        Self::new(arity, eta_a, eta_b, 4 * src.n_max()?)
    }

    /// Equal efficiency on all four modes.
    pub fn uniform(arity: Arity, eta: f64, c_max: u32) -> Result<Self> {
        Self::new(arity, eta, eta, c_max)
    }

    pub fn arity(&self) -> Arity {
        self.arity
    }

    pub fn eta_a(&self) -> f64 {
        self.sensing.eta
    }

    pub fn eta_b(&self) -> f64 {
        self.reference.eta
    }

    pub fn c_max(&self) -> u32 {
        self.sensing.c_max
    }

    pub fn max_clicks(&self) -> u32 {
        self.sensing.r_max
    }

    pub fn table(&self, mode: Mode) -> &PovmTable {
        if mode.is_sensing() {
            &self.sensing
        } else {
            &self.reference
        }
    }
}
