//! Recover the pair probability, the gain and both path efficiencies from
//! phase-averaged singles and two-fold rates, to first order in the pair
//! probability `p`:
//!
//! ```text
//! lone clicks in path a      S_a = p eta_a (1 - eta_b)
//! lone clicks in path b      S_b = p eta_b (1 - eta_a)
//! cross-path two-folds       T   = p eta_a eta_b
//! ```
//!
//! and `p = 2 t (1 - t)^2` with `t = tanh^2(tau)`.

use std::f64::consts::TAU;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detector::{Arity, DetectorModel};
use crate::engine::{DetectionPattern, PatternGrid};
use crate::error::{Error, Location, Result};
use crate::fock::{RotationSpec, SourceParams};

/// Largest value of `2 t (1 - t)^2`, reached at `t = 1/3`.
pub const MAX_PAIR_PROBABILITY: f64 = 8.0 / 27.0;

/// Per-pulse probabilities, averaged over the phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    /// `P(1000) + P(0100)`.
    pub singles_a: f64,
    /// `P(0010) + P(0001)`.
    pub singles_b: f64,
    /// `P(1010) + P(1001) + P(0110) + P(0101)`.
    pub twofold: f64,
}

impl RateSummary {
    fn as_array(&self) -> [f64; 3] {
        [self.singles_a, self.singles_b, self.twofold]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TauEstimate {
    pub tau: f64,
    /// `tanh^2(tau)`.
    pub t: f64,
    /// Set when `p` sits at the top of the physical branch, `t = 1/3`.
    pub at_branch_limit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationResult {
    pub tau: f64,
    pub eta_a: f64,
    pub eta_b: f64,
    pub pair_probability: f64,
    pub at_branch_limit: bool,
    /// Full-model rates at the recovered parameters minus the input rates,
    /// in the order singles a, singles b, two-fold.
    pub residuals: Vec<f64>,
}

/// Solve the three first-order relations for `(eta_a, eta_b, p)`.
pub fn efficiencies_from_rates(rates: &RateSummary) -> Result<(f64, f64, f64)> {
    let values = rates.as_array();
    if values
        .iter()
        .any(|v| !v.is_finite() || !(0.0..=1.0).contains(v))
    {
        return Err(Error::Calibration {
            message: "rates must be probabilities in [0, 1]".into(),
            residuals: values.to_vec(),
        });
    }
    let RateSummary {
        singles_a,
        singles_b,
        twofold,
    } = *rates;
    if !(twofold > 0.0) {
        return Err(Error::Calibration {
            message: "no two-fold coincidences; efficiencies are undetermined".into(),
            residuals: values.to_vec(),
        });
    }
    let eta_a = twofold / (singles_b + twofold);
    let eta_b = twofold / (singles_a + twofold);
    let p = twofold / (eta_a * eta_b);
    if p > 1.0 {
        return Err(Error::Calibration {
            message: format!("rates imply a pair probability of {p} > 1"),
            residuals: vec![
                singles_a - p * eta_a * (1.0 - eta_b),
                singles_b - p * eta_b * (1.0 - eta_a),
                0.0,
            ],
        });
    }
    Ok((eta_a, eta_b, p))
}

/// Smallest root `t` in `[0, 1/3]` of `2 t (1 - t)^2 = p`, and `tau = artanh(sqrt(t))`.
pub fn tau_from_pair_probability(p: f64) -> Result<TauEstimate> {
    if !(p.is_finite() && p >= 0.0) {
        return Err(Error::domain(format!(
            "pair probability must be non-negative, got {p}"
        )));
    }
    const SLACK: f64 = 1e-12;
    if p > MAX_PAIR_PROBABILITY + SLACK {
        return Err(Error::NoSolution(format!(
            "pair probability {p} exceeds the maximum 8/27 of 2t(1-t)^2"
        )));
    }
    if p == 0.0 {
        return Ok(TauEstimate {
            tau: 0.0,
            t: 0.0,
            at_branch_limit: false,
        });
    }
    let at_branch_limit = p >= MAX_PAIR_PROBABILITY - SLACK;
    let p = p.min(MAX_PAIR_PROBABILITY);
    let arg = (-1.0 + 27.0 * p / 4.0).clamp(-1.0, 1.0);
    let mut t = 2.0 / 3.0 + 2.0 / 3.0 * (arg.acos() / 3.0 - 2.0 * TAU / 3.0).cos();
    if !at_branch_limit {
        for _ in 0..4 {
            let f = 2.0 * t * (1.0 - t).powi(2) - p;
            let df = 2.0 * (1.0 - t) * (1.0 - 3.0 * t);
            if df.abs() < 1e-8 {
                break;
            }
            t -= f / df;
        }
    }
    let t = t.clamp(0.0, 1.0 / 3.0);
    Ok(TauEstimate {
        tau: t.sqrt().atanh(),
        t,
        at_branch_limit,
    })
}

/// Forward map `p(tau) = 2 tanh^2(tau) / cosh^4(tau)`.
pub fn pair_probability(tau: f64) -> f64 {
    2.0 * tau.tanh().powi(2) / tau.cosh().powi(4)
}

const LONE_A: [DetectionPattern; 2] = [
    DetectionPattern::new(1, 0, 0, 0),
    DetectionPattern::new(0, 1, 0, 0),
];
const LONE_B: [DetectionPattern; 2] = [
    DetectionPattern::new(0, 0, 1, 0),
    DetectionPattern::new(0, 0, 0, 1),
];
const CROSS: [DetectionPattern; 4] = [
    DetectionPattern::new(1, 0, 1, 0),
    DetectionPattern::new(1, 0, 0, 1),
    DetectionPattern::new(0, 1, 1, 0),
    DetectionPattern::new(0, 1, 0, 1),
];

/// Singles and two-fold rates of the full model at one rotation setting.
pub fn rates_at(rot: RotationSpec, src: &SourceParams, det: &DetectorModel) -> Result<RateSummary> {
    let grid = PatternGrid::compute(rot, src, det)?;
    let sum = |set: &[DetectionPattern]| set.iter().map(|r| grid.get(r)).sum::<f64>();
    Ok(RateSummary {
        singles_a: sum(&LONE_A),
        singles_b: sum(&LONE_B),
        twofold: sum(&CROSS),
    })
}

/// Full-model rates averaged uniformly over the sensing phase.
pub fn simulate_rates(src: &SourceParams, det: &DetectorModel) -> Result<RateSummary> {
    let samples = 2 * src.n_max()? as usize + 1;
    let mut acc = [0.0; 3];
    for j in 0..samples {
        let r = rates_at(
            RotationSpec::sensing(TAU * j as f64 / samples as f64),
            src,
            det,
        )?;
        for (a, v) in acc.iter_mut().zip(r.as_array()) {
            *a += v / samples as f64;
        }
    }
    Ok(RateSummary {
        singles_a: acc[0],
        singles_b: acc[1],
        twofold: acc[2],
    })
}

/// Calibrate from rates and report how well the full model reproduces them.
pub fn calibrate(rates: &RateSummary, arity: Arity) -> Result<CalibrationResult> {
    let (eta_a, eta_b, p) = efficiencies_from_rates(rates)?;
    let est = tau_from_pair_probability(p)?;
    let src = SourceParams::new(est.tau)?;
    let det = DetectorModel::for_source(arity, eta_a, eta_b, &src)?;
    let model = simulate_rates(&src, &det)?;
    let residuals = model
        .as_array()
        .iter()
        .zip(rates.as_array())
        .map(|(m, r)| m - r)
        .collect();
    Ok(CalibrationResult {
        tau: est.tau,
        eta_a,
        eta_b,
        pair_probability: p,
        at_branch_limit: est.at_branch_limit,
        residuals,
    })
}

/// Parse `phi,singles_a,singles_b,twofold` rows (header required, `#` comments)
/// and average them.
pub fn parse_rates_csv(text: &str) -> Result<RateSummary> {
    let mut header_seen = false;
    let mut acc = [0.0; 3];
    let mut rows = 0usize;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if !header_seen {
            if fields != ["phi", "singles_a", "singles_b", "twofold"] {
                return Err(Error::parse(
                    Location::Line(line_no),
                    "expected header phi,singles_a,singles_b,twofold",
                ));
            }
            header_seen = true;
            continue;
        }
        if fields.len() != 4 {
            return Err(Error::parse(
                Location::Line(line_no),
                format!("expected 4 fields, found {}", fields.len()),
            ));
        }
        let mut values = [0.0; 4];
        for (slot, field) in values.iter_mut().zip(&fields) {
            *slot = field
                .parse::<f64>()
                .map_err(|e| Error::parse(Location::Line(line_no), format!("{field:?}: {e}")))?;
        }
        for (a, v) in acc.iter_mut().zip(&values[1..]) {
            *a += v;
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::parse(
            Location::Line(text.lines().count().max(1)),
            "no rate rows",
        ));
    }
    let n = rows as f64;
    Ok(RateSummary {
        singles_a: acc[0] / n,
        singles_b: acc[1] / n,
        twofold: acc[2] / n,
    })
}

pub fn read_rates_file(path: &Path) -> Result<RateSummary> {
    parse_rates_csv(&std::fs::read_to_string(path)?)
}
