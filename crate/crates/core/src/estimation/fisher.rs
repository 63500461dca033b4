use rayon::prelude::*;
use serde::Serialize;

use super::family::PhaseFamily;
use super::optimize::grid_then_golden;

/// Probabilities at or below this value are treated as zero.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

/// Fisher information at one phase, with the outcomes whose probability
/// vanished while their derivative did not.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FisherValue {
    pub value: f64,
    pub divergent: Vec<usize>,
}

impl FisherValue {
    pub fn is_divergent(&self) -> bool {
        !self.divergent.is_empty()
    }
}

/// `dp_i/dphi` for every outcome.
pub fn derivative<F: PhaseFamily + ?Sized>(family: &F, phi: f64) -> Vec<f64> {
    family.derivatives(phi)
}

/// `I(phi) = sum_i (dp_i/dphi)^2 / p_i` with the default probability floor.
pub fn fisher_information<F: PhaseFamily + ?Sized>(family: &F, phi: f64) -> FisherValue {
    fisher_information_with_floor(family, phi, PROBABILITY_FLOOR)
}

/// Fisher information where outcomes with `p_i <= floor` are handled apart:
/// at a double zero the term tends to `2 p_i''`, which is used when the family
/// supplies second derivatives; a vanishing derivative contributes nothing;
/// otherwise `p_i` is clipped at the floor and the outcome is flagged.
pub fn fisher_information_with_floor<F: PhaseFamily + ?Sized>(
    family: &F,
    phi: f64,
    floor: f64,
) -> FisherValue {
    let p = family.probabilities(phi);
    let dp = family.derivatives(phi);
    let mut second: Option<Vec<f64>> = None;
    let mut asked_second = false;
    let mut value = 0.0;
    let mut divergent = Vec::new();
    for (i, (&pi, &di)) in p.iter().zip(&dp).enumerate() {
        if pi > floor {
            value += di * di / pi;
            continue;
        }
        if !asked_second {
            second = family.second_derivatives(phi);
            asked_second = true;
        }
        if let Some(ddp) = &second {
            value += (2.0 * ddp[i]).max(0.0);
        } else if di.abs() > floor.max(f64::MIN_POSITIVE).sqrt() {
            value += di * di / floor.max(f64::MIN_POSITIVE);
            divergent.push(i);
        }
    }
    FisherValue { value, divergent }
}

/// Fisher information over a phase grid, evaluated in parallel.
pub fn fisher_curve<F: PhaseFamily + ?Sized>(
    family: &F,
    phis: &[f64],
    floor: f64,
) -> Vec<FisherValue> {
    phis.par_iter()
        .map(|&phi| fisher_information_with_floor(family, phi, floor))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FisherMaximum {
    pub phi: f64,
    pub value: f64,
}

/// Largest Fisher information on `[lo, hi]`: grid scan then golden-section refinement.
pub fn fisher_maximum<F: PhaseFamily + ?Sized>(
    family: &F,
    lo: f64,
    hi: f64,
    grid_points: usize,
    floor: f64,
) -> FisherMaximum {
    let (phi, value) = grid_then_golden(
        |phi| fisher_information_with_floor(family, phi, floor).value,
        lo,
        hi,
        grid_points,
        1e-9,
    );
    FisherMaximum { phi, value }
}
