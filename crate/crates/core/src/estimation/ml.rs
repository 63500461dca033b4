use std::f64::consts::TAU;

use serde::Serialize;

use super::family::PhaseFamily;
use super::optimize::golden_max;
use crate::error::{Error, Result};

/// Coarse-grid density of the likelihood search, per `2 pi` of interval.
pub const ML_GRID_POINTS: usize = 1000;

/// Grid candidates within this log-likelihood distance of the best are refined.
const CANDIDATE_WINDOW: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MlEstimate {
    pub phi: f64,
    pub log_likelihood: f64,
    /// Every maximizer whose likelihood ties the best, in increasing order.
    pub maximizers: Vec<f64>,
}

impl MlEstimate {
    pub fn is_ambiguous(&self) -> bool {
        self.maximizers.len() > 1
    }
}

/// Multinomial maximum-likelihood phase estimator over a fixed interval,
/// with the model's log-probabilities cached on the search grid.
pub struct MlEstimator<'a, F: PhaseFamily + ?Sized> {
    family: &'a F,
    lo: f64,
    hi: f64,
    grid: Vec<f64>,
    log_p: Vec<f64>,
    outcomes: usize,
}

impl<'a, F: PhaseFamily + ?Sized> MlEstimator<'a, F> {
    pub fn new(family: &'a F, lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::domain(format!(
                "invalid search interval [{lo}, {hi}]"
            )));
        }
        let points = ((ML_GRID_POINTS as f64 * (hi - lo) / TAU).ceil() as usize).max(8) + 1;
        let step = (hi - lo) / (points - 1) as f64;
        let grid: Vec<f64> = (0..points).map(|i| lo + step * i as f64).collect();
        let outcomes = family.outcomes();
        let mut log_p = Vec::with_capacity(points * outcomes);
        for &phi in &grid {
            log_p.extend(family.probabilities(phi).iter().map(|&p| {
                if p > 0.0 {
                    p.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }));
        }
        Ok(Self {
            family,
            lo,
            hi,
            grid,
            log_p,
            outcomes,
        })
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// Log-likelihood of `counts` at an arbitrary phase.
    pub fn log_likelihood(&self, counts: &[f64], phi: f64) -> f64 {
        let p = self.family.probabilities(phi);
        counts
            .iter()
            .zip(&p)
            .filter(|(&n, _)| n > 0.0)
            .map(|(&n, &pi)| {
                if pi > 0.0 {
                    n * pi.ln()
                } else {
                    f64::NEG_INFINITY
                }
            })
            .sum()
    }

    fn grid_log_likelihood(&self, counts: &[f64], g: usize) -> f64 {
        let row = &self.log_p[g * self.outcomes..(g + 1) * self.outcomes];
        counts
            .iter()
            .zip(row)
            .filter(|(&n, _)| n > 0.0)
            .map(|(&n, &lp)| n * lp)
            .sum()
    }

    pub fn estimate(&self, counts: &[f64]) -> Result<MlEstimate> {
        if counts.len() != self.outcomes {
            return Err(Error::domain(format!(
                "expected {} counts, got {}",
                self.outcomes,
                counts.len()
            )));
        }
        if counts.iter().any(|n| !n.is_finite() || *n < 0.0) {
            return Err(Error::domain("counts must be finite and non-negative"));
        }
        let ll: Vec<f64> = (0..self.grid.len())
            .map(|g| self.grid_log_likelihood(counts, g))
            .collect();
        let best = ll.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if best == f64::NEG_INFINITY {
            return Err(Error::domain(
                "observed counts are impossible everywhere in the search interval",
            ));
        }
        let last = ll.len() - 1;
        let step = self.grid[1] - self.grid[0];
        let mut refined: Vec<(f64, f64)> = Vec::new();
        for g in 0..ll.len() {
            let left = if g == 0 { f64::NEG_INFINITY } else { ll[g - 1] };
            let right = if g == last {
                f64::NEG_INFINITY
            } else {
                ll[g + 1]
            };
            if ll[g] < left || ll[g] < right || ll[g] < best - CANDIDATE_WINDOW {
                continue;
            }
            // plateaus: only the first grid point of a run of equal values
            if g > 0 && ll[g] == left {
                continue;
            }
            let a = (self.grid[g] - step).max(self.lo);
            let b = (self.grid[g] + step).min(self.hi);
            let (x, fx) = golden_max(|phi| self.log_likelihood(counts, phi), a, b, 1e-10);
            let (x, fx) = if fx >= ll[g] {
                (x, fx)
            } else {
                (self.grid[g], ll[g])
            };
            refined.push((x, fx));
        }
        let top = refined
            .iter()
            .map(|r| r.1)
            .fold(f64::NEG_INFINITY, f64::max);
        let tol = 1e-9 * top.abs().max(1.0);
        let mut maximizers: Vec<f64> = refined
            .iter()
            .filter(|r| r.1 >= top - tol)
            .map(|r| r.0)
            .collect();
        maximizers.sort_by(f64::total_cmp);
        maximizers.dedup_by(|a, b| (*a - *b).abs() < 2.0 * step);
        let phi = refined
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("at least one candidate")
            .0;
        Ok(MlEstimate {
            phi,
            log_likelihood: top,
            maximizers,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::family::FnFamily;
    use std::f64::consts::PI;

    fn interferometer() -> FnFamily<impl Fn(f64) -> Vec<f64> + Sync> {
        FnFamily::new(2, |phi: f64| {
            vec![(phi / 2.0).cos().powi(2), (phi / 2.0).sin().powi(2)]
        })
    }

    #[test]
    fn exact_proportions_recover_the_phase() {
        let family = interferometer();
        let est = MlEstimator::new(&family, 0.0, PI).unwrap();
        for &phi in &[0.4, 1.0, 2.5] {
            let counts: Vec<f64> = family
                .probabilities(phi)
                .iter()
                .map(|p| p * 1000.0)
                .collect();
            let e = est.estimate(&counts).unwrap();
            assert!((e.phi - phi).abs() < 1e-6);
            assert!(!e.is_ambiguous());
        }
    }

    #[test]
    fn symmetric_interval_reports_both_branches() {
        let family = interferometer();
        let est = MlEstimator::new(&family, -PI, PI).unwrap();
        let counts: Vec<f64> = family
            .probabilities(1.0)
            .iter()
            .map(|p| p * 1000.0)
            .collect();
        let e = est.estimate(&counts).unwrap();
        assert!(e.is_ambiguous());
        assert_eq!(e.maximizers.len(), 2);
        assert!((e.maximizers[0] + 1.0).abs() < 1e-6 && (e.maximizers[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn boundary_maximum() {
        let family = interferometer();
        let est = MlEstimator::new(&family, 0.5, 2.0).unwrap();
        let e = est.estimate(&[10.0, 0.0]).unwrap();
        assert!((e.phi - 0.5).abs() < 1e-9);
    }

    #[test]
    fn rejects_wrong_count_length() {
        let family = interferometer();
        let est = MlEstimator::new(&family, 0.0, PI).unwrap();
        assert!(est.estimate(&[1.0]).is_err());
    }
}
