use std::f64::consts::PI;

use serde::Serialize;

use super::family::TheoryFamily;
use super::fisher::fisher_maximum;
use crate::detector::{Arity, DetectorModel};
use crate::engine::four_photon_term_mean;
use crate::error::{Error, Result};
use crate::fock::SourceParams;

/// Gains at or above this are outside the regime where the shot-noise
/// baseline is defined.
pub const SNL_TAU_LIMIT: f64 = 0.15;

/// Shot-noise Fisher information of a four-photon event: the mean number of
/// sensing-path photons carried by the pair terms that can produce two clicks
/// per path, at one unit of information per photon.
pub fn snl_fisher(src: &SourceParams) -> Result<f64> {
    if src.tau() >= SNL_TAU_LIMIT {
        return Err(Error::UnsupportedRegime(format!(
            "shot-noise baseline is defined for tau < {SNL_TAU_LIMIT}, got {}",
            src.tau()
        )));
    }
    Ok(four_photon_term_mean(src))
}

/// `<N_a^2>` of the sensing-path photon number, summed over the truncated state.
pub fn sensing_second_moment(src: &SourceParams) -> Result<f64> {
    let n_max = src.n_max()?;
    Ok((0..=n_max)
        .map(|n| (n as f64).powi(2) * src.pair_probability(n))
        .sum())
}

/// Heisenberg-limited uncertainty `1 / sqrt(<N_a^2>)`; infinite without photons.
pub fn heisenberg_limit(src: &SourceParams) -> Result<f64> {
    let m2 = sensing_second_moment(src)?;
    Ok(if m2 > 0.0 {
        1.0 / m2.sqrt()
    } else {
        f64::INFINITY
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub eta: f64,
    pub phi_opt: f64,
    pub fisher_max: f64,
    pub delta_phi: f64,
    /// `delta_phi * sqrt(eta * N_a)`; the shot-noise limit is 1.
    pub normalized: f64,
    /// Heisenberg limit on the same scale.
    pub heisenberg: f64,
}

/// Best achievable uncertainty from all click patterns under balanced loss,
/// relative to the shot-noise limit of the detected sensing-path intensity.
pub fn performance_curve(
    src: &SourceParams,
    etas: &[f64],
    arity: Arity,
) -> Result<Vec<CurvePoint>> {
    let n_max = src.n_max()?;
    let mean_a: f64 = (0..=n_max)
        .map(|n| n as f64 * src.pair_probability(n))
        .sum();
    let hl = heisenberg_limit(src)?;
    etas.iter()
        .map(|&eta| {
            let det = DetectorModel::for_source(arity, eta, eta, src)?;
            let family = TheoryFamily::unconditioned(0.0, src, &det)?;
            let best = fisher_maximum(&family, 0.0, PI, 181, 0.0);
            let scale = (eta * mean_a).sqrt();
            let delta_phi = if best.value > 0.0 {
                1.0 / best.value.sqrt()
            } else {
                f64::INFINITY
            };
            Ok(CurvePoint {
                eta,
                phi_opt: best.phi,
                fisher_max: best.value,
                delta_phi,
                normalized: if best.value > 0.0 {
                    delta_phi * scale
                } else {
                    f64::INFINITY
                },
                heisenberg: hl * scale,
            })
        })
        .collect()
}
