//! Phase information per sensing-path photon when the reference path heralds
//! photons, with number-resolving detection and one efficiency for all modes.
//!
//! A table cell for herald level `K` gates on at least `K` detected reference
//! photons. Its value is the Fisher information of the gated joint click
//! distribution, divided by the mean number of sensing-path photons (before
//! loss) per gated event, at the phase where it is largest:
//!
//! ```text
//! F_K = max_phi sum_{r : r_b >= K} p_r'(phi)^2 / p_r(phi)
//!       / sum_n P(n) n Pr[Binomial(n, eta) >= K]
//! ```

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::detector::{Arity, DetectorModel};
use crate::engine::PatternGrid;
use crate::error::{Error, Result};
use crate::estimation::{fisher_information_with_floor, fisher_maximum, TheoryFamily};
use crate::fock::{choose_truncation, truncation_tail, RotationSpec, SourceParams};

/// Largest pair number the heralding truncation may reach.
pub const MAX_PAIRS: u32 = 40;

/// Neglected probability mass relative to the mass of heralded terms.
pub const RELATIVE_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeraldSpec {
    pub k: u32,
    pub eta: f64,
    pub tau: f64,
}

impl HeraldSpec {
    pub fn new(k: u32, eta: f64, tau: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::domain(format!(
                "efficiency must lie in [0, 1], got {eta}"
            )));
        }
        if !(tau.is_finite() && tau >= 0.0) {
            return Err(Error::domain(format!(
                "tau must be finite and non-negative, got {tau}"
            )));
        }
        Ok(Self { k, eta, tau })
    }

    /// Source truncated where the neglected tail is small against the heralded mass.
    pub fn source(&self) -> Result<SourceParams> {
        let base = SourceParams::new(self.tau)?;
        choose_truncation(&base)?;
        let heralded = base.mass_at_least(self.k);
        if !(heralded > 0.0) {
            return Err(Error::domain(format!(
                "K = {} has no support at tau = {}",
                self.k, self.tau
            )));
        }
        let n = (self.k..=MAX_PAIRS)
            .find(|&n| truncation_tail(self.tau, n) < RELATIVE_EPSILON * heralded)
            .ok_or_else(|| {
                Error::domain(format!(
                    "K = {} at tau = {} needs more than {MAX_PAIRS} pair terms",
                    self.k, self.tau
                ))
            })?;
        Ok(base.with_max_pairs(n))
    }

    fn detector(&self, src: &SourceParams) -> Result<DetectorModel> {
        DetectorModel::for_source(Arity::PerfectCounting, self.eta, self.eta, src)
    }
}

/// Mean pre-loss sensing-path photons per gated event (unnormalized by the gate rate).
fn gated_photon_mass(spec: &HeraldSpec, src: &SourceParams) -> Result<f64> {
    let n_max = src.n_max()?;
    Ok((spec.k..=n_max)
        .map(|n| src.pair_probability(n) * n as f64 * binomial_tail(n, spec.k, spec.eta))
        .sum())
}

/// `Pr[Binomial(n, eta) >= k]`.
fn binomial_tail(n: u32, k: u32, eta: f64) -> f64 {
    if eta >= 1.0 {
        return if n >= k { 1.0 } else { 0.0 };
    }
    let mut term = (1.0 - eta).powi(n as i32);
    let mut below = 0.0;
    for j in 0..k.min(n + 1) {
        below += term;
        term *= (n - j) as f64 / (j + 1) as f64 * eta / (1.0 - eta);
    }
    (1.0 - below).max(0.0)
}

fn gated_family(spec: &HeraldSpec, src: &SourceParams) -> Result<TheoryFamily> {
    let det = spec.detector(src)?;
    TheoryFamily::unconditioned(0.0, src, &det)?.restrict(|r| r.path_b() >= spec.k)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeraldCell {
    pub phi: f64,
    pub value: f64,
}

/// Information per photon at `phi`, or at its maximum over a period when `phi` is `None`.
pub fn conditional_fisher_per_photon(spec: &HeraldSpec, phi: Option<f64>) -> Result<HeraldCell> {
    let src = spec.source()?;
    let family = gated_family(spec, &src)?;
    let mass = gated_photon_mass(spec, &src)?;
    if !(mass > 0.0) {
        return Err(Error::domain("no sensing photons accompany the herald"));
    }
    let (phi, info) = match phi {
        Some(phi) => (phi, fisher_information_with_floor(&family, phi, 0.0).value),
        None => {
            let best = fisher_maximum(&family, 0.0, PI, 61, 0.0);
            (best.phi, best.value)
        }
    };
    Ok(HeraldCell {
        phi,
        value: info / mass,
    })
}

/// `((r_ah, r_av), probability)` pairs.
pub type SensingDistribution = Vec<((u32, u32), f64)>;

/// Sensing-path click distribution given exactly `K` reference clicks,
/// as `((r_ah, r_av), probability)`, together with the probability of the herald.
pub fn sensing_given_herald(spec: &HeraldSpec, phi: f64) -> Result<(SensingDistribution, f64)> {
    let src = spec.source()?;
    let det = spec.detector(&src)?;
    let grid = PatternGrid::compute(RotationSpec::sensing(phi), &src, &det)?;
    let mut joint: std::collections::BTreeMap<(u32, u32), f64> = Default::default();
    for (r, p) in grid.iter() {
        if r.path_b() == spec.k {
            *joint.entry((r.a_h, r.a_v)).or_default() += p;
        }
    }
    let herald: f64 = joint.values().sum();
    if !(herald > 0.0) {
        return Err(Error::domain(format!("K = {} never occurs", spec.k)));
    }
    Ok((
        joint.into_iter().map(|(a, p)| (a, p / herald)).collect(),
        herald,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeraldTable {
    pub tau: f64,
    pub etas: Vec<f64>,
    pub ks: Vec<u32>,
    /// `cells[i][j]` for `ks[i]` and `etas[j]`.
    pub cells: Vec<Vec<HeraldCell>>,
}

impl HeraldTable {
    pub fn value(&self, k: u32, eta: f64) -> Option<f64> {
        let i = self.ks.iter().position(|&x| x == k)?;
        let j = self.etas.iter().position(|&x| (x - eta).abs() < 1e-12)?;
        Some(self.cells[i][j].value)
    }

    /// Rows by `K`, columns by efficiency.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("K");
        for eta in &self.etas {
            let _ = write!(out, ",eta={eta}");
        }
        out.push('\n');
        for (k, row) in self.ks.iter().zip(&self.cells) {
            let _ = write!(out, "{k}");
            for cell in row {
                let _ = write!(out, ",{:.6}", cell.value);
            }
            out.push('\n');
        }
        out
    }
}

pub fn herald_table(tau: f64, etas: &[f64], ks: &[u32]) -> Result<HeraldTable> {
    let cells = ks
        .par_iter()
        .map(|&k| {
            etas.iter()
                .map(|&eta| conditional_fisher_per_photon(&HeraldSpec::new(k, eta, tau)?, None))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(HeraldTable {
        tau,
        etas: etas.to_vec(),
        ks: ks.to_vec(),
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn binomial_tail_values() {
        assert_abs_diff_eq!(binomial_tail(3, 0, 0.4), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            binomial_tail(3, 1, 0.4),
            1.0 - 0.6f64.powi(3),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(binomial_tail(3, 3, 0.4), 0.4f64.powi(3), epsilon = 1e-15);
        assert_eq!(binomial_tail(2, 3, 0.4), 0.0);
        assert_eq!(binomial_tail(2, 2, 1.0), 1.0);
    }

    #[test]
    fn ideal_low_herald_cells_coincide() {
        for tau in [0.05, 0.1] {
            let k0 = conditional_fisher_per_photon(&HeraldSpec::new(0, 1.0, tau).unwrap(), None)
                .unwrap();
            let k1 = conditional_fisher_per_photon(&HeraldSpec::new(1, 1.0, tau).unwrap(), None)
                .unwrap();
            assert_abs_diff_eq!(k0.value, k1.value, epsilon = 1e-9);
            assert_abs_diff_eq!(k0.value, tau.cosh().powi(2), epsilon = 1e-6);
        }
    }

    #[test]
    fn marginalizing_the_herald_recovers_the_sensing_distribution() {
        let tau = 0.1;
        let phi = 0.9;
        let src = HeraldSpec::new(0, 0.8, tau).unwrap().source().unwrap();
        let n_max = src.n_max().unwrap();
        let det = DetectorModel::for_source(Arity::PerfectCounting, 0.8, 0.8, &src).unwrap();
        let grid = PatternGrid::compute(RotationSpec::sensing(phi), &src, &det).unwrap();
        let mut direct: std::collections::BTreeMap<(u32, u32), f64> = Default::default();
        for (r, p) in grid.iter() {
            *direct.entry((r.a_h, r.a_v)).or_default() += p;
        }
        let mut summed: std::collections::BTreeMap<(u32, u32), f64> = Default::default();
        for k in 0..=n_max {
            let (conditional, herald) =
                sensing_given_herald(&HeraldSpec::new(k, 0.8, tau).unwrap(), phi).unwrap();
            for (a, p) in conditional {
                *summed.entry(a).or_default() += herald * p;
            }
        }
        for (a, p) in &direct {
            assert_abs_diff_eq!(*p, summed.get(a).copied().unwrap_or(0.0), epsilon = 1e-10);
        }
    }

    #[test]
    fn herald_beyond_support_is_an_error() {
        assert!(HeraldSpec::new(2, 0.9, 0.0).unwrap().source().is_err());
        assert!(HeraldSpec::new(45, 0.9, 0.1).unwrap().source().is_err());
        assert!(HeraldSpec::new(0, 1.2, 0.1).is_err());
    }

    #[test]
    fn csv_layout() {
        let table = herald_table(0.05, &[0.9, 1.0], &[0, 1]).unwrap();
        let csv = table.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "K,eta=0.9,eta=1");
        assert!(lines[2].starts_with("1,"));
        assert_eq!(lines.len(), 3);
    }
}
