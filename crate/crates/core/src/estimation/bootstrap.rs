use rayon::prelude::*;
use serde::Serialize;

use super::fisher::fisher_information;
use super::fringe::{fit_fringes, FringeSample};
use crate::error::{Error, Result};
use crate::sampling::{multinomial, poisson, stream_rng};

pub const MIN_BOOTSTRAP_ITERATIONS: usize = 100;

/// How counts are redrawn in each bootstrap iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Resampling {
    /// Each count replaced by a Poisson draw with that mean.
    Poisson,
    /// Counts redrawn multinomially with each phase's total held fixed.
    Multinomial,
    /// Counts kept as given.
    Noiseless,
}

/// Pointwise 2.5 / 97.5 percentile band of the fitted Fisher information.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FisherBand {
    pub phi: Vec<f64>,
    /// Fisher information of the fit to the original counts.
    pub central: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub iterations: usize,
    pub seed: u64,
}

fn resample(
    samples: &[FringeSample],
    mode: Resampling,
    seed: u64,
    iteration: u64,
) -> Vec<FringeSample> {
    let mut rng = stream_rng(seed, iteration);
    samples
        .iter()
        .map(|s| {
            let counts = match mode {
                Resampling::Noiseless => s.counts.clone(),
                Resampling::Poisson => s.counts.iter().map(|&c| poisson(&mut rng, c)).collect(),
                Resampling::Multinomial => {
                    let total: f64 = s.counts.iter().sum();
                    let p: Vec<f64> = s.counts.iter().map(|c| c / total).collect();
                    multinomial(&mut rng, total.round() as u64, &p)
                        .into_iter()
                        .map(|c| c as f64)
                        .collect()
                }
            };
            FringeSample { phi: s.phi, counts }
        })
        .collect()
}

/// Linear-interpolation percentile of sorted data, `q` in `[0, 1]`.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Resample the counts, refit the fringes and recompute `I(phi)` on the grid
/// `phis`, `iterations` times; return the pointwise percentile band.
pub fn bootstrap_fisher_band(
    samples: &[FringeSample],
    phis: &[f64],
    iterations: usize,
    resampling: Resampling,
    seed: u64,
) -> Result<FisherBand> {
    if iterations < MIN_BOOTSTRAP_ITERATIONS {
        return Err(Error::domain(format!(
            "bootstrap needs at least {MIN_BOOTSTRAP_ITERATIONS} iterations, got {iterations}"
        )));
    }
    let base = fit_fringes(samples)?;
    let central: Vec<f64> = phis
        .iter()
        .map(|&phi| fisher_information(&base, phi).value)
        .collect();
    let curves = (0..iterations)
        .into_par_iter()
        .map(|b| {
            let fit = fit_fringes(&resample(samples, resampling, seed, b as u64))?;
            Ok(phis
                .iter()
                .map(|&phi| fisher_information(&fit, phi).value)
                .collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut lower = Vec::with_capacity(phis.len());
    let mut upper = Vec::with_capacity(phis.len());
    let mut column = vec![0.0; iterations];
    for g in 0..phis.len() {
        for (slot, curve) in column.iter_mut().zip(&curves) {
            *slot = curve[g];
        }
        column.sort_by(f64::total_cmp);
        lower.push(percentile(&column, 0.025));
        upper.push(percentile(&column, 0.975));
    }
    Ok(FisherBand {
        phi: phis.to_vec(),
        central,
        lower,
        upper,
        iterations,
        seed,
    })
}
