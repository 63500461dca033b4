use std::f64::consts::TAU;

use crate::detector::DetectorModel;
use crate::engine::{ConditioningClass, DetectionPattern, PatternGrid};
use crate::error::{Error, Result};
use crate::fock::{RotationSpec, SourceParams};

/// Step used by [`central_difference`] when a family has no analytic derivative.
pub const DEFAULT_STEP: f64 = 1e-5;

/// A discrete outcome distribution parametrized by a phase.
pub trait PhaseFamily: Sync {
    fn outcomes(&self) -> usize;

    fn probabilities(&self, phi: f64) -> Vec<f64>;

    fn derivatives(&self, phi: f64) -> Vec<f64> {
        central_difference(self, phi, DEFAULT_STEP)
    }

    /// Second derivatives, when available in closed form.
    fn second_derivatives(&self, _phi: f64) -> Option<Vec<f64>> {
        None
    }
}

/// Symmetric finite-difference derivative of every outcome probability.
pub fn central_difference<F: PhaseFamily + ?Sized>(family: &F, phi: f64, h: f64) -> Vec<f64> {
    let plus = family.probabilities(phi + h);
    let minus = family.probabilities(phi - h);
    plus.iter()
        .zip(&minus)
        .map(|(p, m)| (p - m) / (2.0 * h))
        .collect()
}

/// A family given by a closed-form probability function.
pub struct FnFamily<F> {
    outcomes: usize,
    f: F,
}

impl<F: Fn(f64) -> Vec<f64> + Sync> FnFamily<F> {
    pub fn new(outcomes: usize, f: F) -> Self {
        Self { outcomes, f }
    }
}

impl<F: Fn(f64) -> Vec<f64> + Sync> PhaseFamily for FnFamily<F> {
    fn outcomes(&self) -> usize {
        self.outcomes
    }

    fn probabilities(&self, phi: f64) -> Vec<f64> {
        let p = (self.f)(phi);
        debug_assert_eq!(p.len(), self.outcomes);
        p
    }
}

/// A real trigonometric polynomial `a_0 + sum_k (a_k cos k phi + b_k sin k phi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigSeries {
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl TrigSeries {
    pub fn new(cos: Vec<f64>, sin: Vec<f64>) -> Result<Self> {
        if cos.is_empty() || cos.len() != sin.len() {
            return Err(Error::domain(
                "cosine and sine coefficient lists must be non-empty and equal in length",
            ));
        }
        Ok(Self { cos, sin })
    }

    /// Exact coefficients of a polynomial of degree at most `(L - 1) / 2`
    /// from its values at the `L` angles `2 pi j / L`.
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        let l = samples.len();
        if l.is_multiple_of(2) {
            return Err(Error::domain(
                "trigonometric interpolation needs an odd number of samples",
            ));
        }
        let degree = (l - 1) / 2;
        let mut cos = vec![0.0; degree + 1];
        let mut sin = vec![0.0; degree + 1];
        cos[0] = samples.iter().sum::<f64>() / l as f64;
        for k in 1..=degree {
            let (mut a, mut b) = (0.0, 0.0);
            for (j, &f) in samples.iter().enumerate() {
                // reduce k j mod L first so the angle stays small
                let angle = TAU * ((k * j) % l) as f64 / l as f64;
                let (s, c) = angle.sin_cos();
                a += f * c;
                b += f * s;
            }
            cos[k] = 2.0 * a / l as f64;
            sin[k] = 2.0 * b / l as f64;
        }
        Ok(Self { cos, sin })
    }

    pub fn degree(&self) -> usize {
        self.cos.len() - 1
    }

    pub fn cos_coefficients(&self) -> &[f64] {
        &self.cos
    }

    pub fn sin_coefficients(&self) -> &[f64] {
        &self.sin
    }

    /// Amplitude of the `k`-th harmonic.
    pub fn harmonic(&self, k: usize) -> f64 {
        match (self.cos.get(k), self.sin.get(k)) {
            (Some(a), Some(b)) => a.hypot(*b),
            _ => 0.0,
        }
    }

    /// Value and first two derivatives at `phi`.
    pub fn eval_with_derivatives(&self, phi: f64) -> (f64, f64, f64) {
        let mut v = self.cos[0];
        let (mut d1, mut d2) = (0.0, 0.0);
        for k in 1..=self.degree() {
            let kf = k as f64;
            let (s, c) = (kf * phi).sin_cos();
            let term = self.cos[k] * c + self.sin[k] * s;
            v += term;
            d1 += kf * (self.sin[k] * c - self.cos[k] * s);
            d2 -= kf * kf * term;
        }
        (v, d1, d2)
    }

    pub fn eval(&self, phi: f64) -> f64 {
        self.eval_with_derivatives(phi).0
    }

    /// Sum of the absolute coefficients, an upper bound on `|f|`.
    pub fn l1_norm(&self) -> f64 {
        self.cos.iter().chain(&self.sin).map(|c| c.abs()).sum()
    }
}

/// Values within this fraction of a series' L1 norm are rounding residue of a zero.
const ZERO_SNAP: f64 = 1e-10;

/// Which detection outcomes a [`TheoryFamily`] exposes.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcomes {
    /// Every pattern reachable within the truncation, unnormalized.
    All,
    /// The members of a class, renormalized within it at each phase.
    Class(ConditioningClass),
    /// An explicit pattern list, renormalized when `normalize` is set.
    Patterns {
        patterns: Vec<DetectionPattern>,
        normalize: bool,
    },
}

/// Pattern probabilities of the model as functions of the sensing phase, held
/// as exact trigonometric polynomials so derivatives are analytic.
#[derive(Debug, Clone)]
pub struct TheoryFamily {
    patterns: Vec<DetectionPattern>,
    series: Vec<TrigSeries>,
    zero_tol: Vec<f64>,
    normalize: bool,
    theta: f64,
}

impl TheoryFamily {
    pub fn new(
        outcomes: Outcomes,
        theta: f64,
        src: &SourceParams,
        det: &DetectorModel,
    ) -> Result<Self> {
        // each pattern probability has phi-harmonics up to the truncation order
        let degree = src.n_max()? as usize;
        let l = 2 * degree + 1;
        let grids = (0..l)
            .map(|j| {
                PatternGrid::compute(
                    RotationSpec::new(TAU * j as f64 / l as f64, theta),
                    src,
                    det,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let (patterns, normalize) = match outcomes {
            Outcomes::All => {
                let mut keep: Vec<DetectionPattern> = Vec::new();
                let mut seen = std::collections::BTreeSet::new();
                for grid in &grids {
                    for (r, p) in grid.iter() {
                        if p != 0.0 && seen.insert(r) {
                            keep.push(r);
                        }
                    }
                }
                keep.sort();
                (keep, false)
            }
            Outcomes::Class(class) => (class.patterns(det.max_clicks()), true),
            Outcomes::Patterns {
                patterns,
                normalize,
            } => {
                if let Some(bad) = patterns.iter().find(|r| r.max_entry() > det.max_clicks()) {
                    return Err(Error::domain(format!(
                        "pattern {bad} exceeds the detector arity"
                    )));
                }
                (patterns, normalize)
            }
        };
        if patterns.is_empty() {
            return Err(Error::domain("phase family has no outcomes"));
        }
        let series = patterns
            .iter()
            .map(|r| TrigSeries::from_samples(&grids.iter().map(|g| g.get(r)).collect::<Vec<_>>()))
            .collect::<Result<Vec<_>>>()?;
        let zero_tol = series.iter().map(|s| ZERO_SNAP * s.l1_norm()).collect();
        let family = Self {
            patterns,
            series,
            zero_tol,
            normalize,
            theta,
        };
        if normalize {
            let mean_total = family.series.iter().map(|s| s.cos[0]).sum::<f64>();
            if !(mean_total > 0.0) {
                return Err(Error::domain(
                    "conditioning class has zero probability at every phase",
                ));
            }
        }
        Ok(family)
    }

    /// The nine two-plus-two patterns, renormalized per phase.
    pub fn fourfold(theta: f64, src: &SourceParams, det: &DetectorModel) -> Result<Self> {
        Self::new(
            Outcomes::Class(ConditioningClass::FOURFOLD),
            theta,
            src,
            det,
        )
    }

    /// Every reachable pattern, unconditioned.
    pub fn unconditioned(theta: f64, src: &SourceParams, det: &DetectorModel) -> Result<Self> {
        Self::new(Outcomes::All, theta, src, det)
    }

    /// The unnormalized sub-family of patterns accepted by `keep`.
    pub fn restrict(&self, keep: impl Fn(&DetectionPattern) -> bool) -> Result<Self> {
        if self.normalize {
            return Err(Error::domain(
                "restriction applies to unnormalized families",
            ));
        }
        let mut out = Self {
            patterns: vec![],
            series: vec![],
            zero_tol: vec![],
            normalize: false,
            theta: self.theta,
        };
        for i in (0..self.patterns.len()).filter(|&i| keep(&self.patterns[i])) {
            out.patterns.push(self.patterns[i]);
            out.series.push(self.series[i].clone());
            out.zero_tol.push(self.zero_tol[i]);
        }
        if out.patterns.is_empty() {
            return Err(Error::domain("restriction leaves no outcomes"));
        }
        Ok(out)
    }

    pub fn patterns(&self) -> &[DetectionPattern] {
        &self.patterns
    }

    /// Unnormalized pattern probabilities as trigonometric series.
    pub fn series(&self) -> &[TrigSeries] {
        &self.series
    }

    pub fn is_normalized(&self) -> bool {
        self.normalize
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    fn snap(&self, i: usize, v: f64) -> f64 {
        if v.abs() <= self.zero_tol[i] {
            0.0
        } else {
            v
        }
    }

    /// Values, first and second derivatives of every outcome. Values within
    /// rounding of zero are returned as exactly zero.
    pub fn evaluate(&self, phi: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let k = self.series.len();
        let (mut f, mut d1, mut d2) = (
            Vec::with_capacity(k),
            Vec::with_capacity(k),
            Vec::with_capacity(k),
        );
        for (i, s) in self.series.iter().enumerate() {
            let (v, a, b) = s.eval_with_derivatives(phi);
            f.push(self.snap(i, v));
            d1.push(a);
            d2.push(b);
        }
        if !self.normalize {
            return (f, d1, d2);
        }
        let s0: f64 = f.iter().sum();
        let s1: f64 = d1.iter().sum();
        let s2: f64 = d2.iter().sum();
        let p = f.iter().map(|v| v / s0).collect();
        let dp = f
            .iter()
            .zip(&d1)
            .map(|(v, a)| a / s0 - v * s1 / (s0 * s0))
            .collect();
        let ddp = f
            .iter()
            .zip(&d1)
            .zip(&d2)
            .map(|((v, a), b)| {
                b / s0 - 2.0 * a * s1 / (s0 * s0) - v * s2 / (s0 * s0)
                    + 2.0 * v * s1 * s1 / (s0 * s0 * s0)
            })
            .collect();
        (p, dp, ddp)
    }
}

impl PhaseFamily for TheoryFamily {
    fn outcomes(&self) -> usize {
        self.patterns.len()
    }

    fn probabilities(&self, phi: f64) -> Vec<f64> {
        let f: Vec<f64> = self
            .series
            .iter()
            .enumerate()
            .map(|(i, s)| self.snap(i, s.eval(phi)))
            .collect();
        if !self.normalize {
            return f;
        }
        let total: f64 = f.iter().sum();
        f.iter().map(|v| v / total).collect()
    }

    fn derivatives(&self, phi: f64) -> Vec<f64> {
        self.evaluate(phi).1
    }

    fn second_derivatives(&self, phi: f64) -> Option<Vec<f64>> {
        Some(self.evaluate(phi).2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::Arity;
    use crate::engine::{fourfold_distribution, pattern_distribution};
    use approx::assert_abs_diff_eq;

    #[test]
    fn interpolation_is_exact() {
        let f = |x: f64| 0.3 + 0.2 * x.cos() - 0.1 * (2.0 * x).sin() + 0.05 * (3.0 * x).cos();
        let samples: Vec<f64> = (0..7).map(|j| f(TAU * j as f64 / 7.0)).collect();
        let s = TrigSeries::from_samples(&samples).unwrap();
        assert_eq!(s.degree(), 3);
        for &x in &[0.1, 1.7, 4.0] {
            let (v, d1, d2) = s.eval_with_derivatives(x);
            assert_abs_diff_eq!(v, f(x), epsilon = 1e-15);
            let exact_d1 = -0.2 * x.sin() - 0.2 * (2.0 * x).cos() - 0.15 * (3.0 * x).sin();
            let exact_d2 = -0.2 * x.cos() + 0.4 * (2.0 * x).sin() - 0.45 * (3.0 * x).cos();
            assert_abs_diff_eq!(d1, exact_d1, epsilon = 1e-14);
            assert_abs_diff_eq!(d2, exact_d2, epsilon = 1e-14);
        }
        assert!(TrigSeries::from_samples(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn theory_family_matches_engine() {
        let src = SourceParams::new(0.061).unwrap();
        let det = DetectorModel::for_source(Arity::Multiplexed(4), 0.23, 0.12, &src).unwrap();
        let family = TheoryFamily::fourfold(0.3, &src, &det).unwrap();
        for &phi in &[0.0, 0.77, 2.5, 5.0] {
            let direct = fourfold_distribution(RotationSpec::new(phi, 0.3), &src, &det).unwrap();
            for (p, q) in family.probabilities(phi).iter().zip(direct.probabilities()) {
                assert_abs_diff_eq!(*p, q, epsilon = 1e-14);
            }
        }
        let all = TheoryFamily::unconditioned(0.0, &src, &det).unwrap();
        let direct = pattern_distribution(RotationSpec::sensing(1.2), &src, &det).unwrap();
        for (r, p) in all.patterns().iter().zip(all.probabilities(1.2)) {
            assert_abs_diff_eq!(p, direct.get(r).unwrap(), epsilon = 1e-15);
        }
    }

    #[test]
    fn analytic_derivatives_match_differences() {
        let src = SourceParams::new(0.1).unwrap();
        let det = DetectorModel::for_source(Arity::Multiplexed(4), 0.5, 0.3, &src).unwrap();
        let family = TheoryFamily::fourfold(0.0, &src, &det).unwrap();
        for &phi in &[0.4, 2.2] {
            let (_, d1, d2) = family.evaluate(phi);
            let fd = central_difference(&family, phi, 1e-4);
            for (a, b) in d1.iter().zip(&fd) {
                assert!((a - b).abs() < 1e-7);
            }
            let h = 1e-3;
            let up = family.derivatives(phi + h);
            let down = family.derivatives(phi - h);
            for (i, b) in d2.iter().enumerate() {
                assert!((b - (up[i] - down[i]) / (2.0 * h)).abs() < 1e-5);
            }
            assert_abs_diff_eq!(d1.iter().sum::<f64>(), 0.0, epsilon = 1e-13);
        }
    }
}
