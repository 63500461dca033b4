//! Least-squares fit of `C0 + C1 cos(phi + phi0) + C2 cos(2 (phi + phi0))` to
//! per-pattern frequencies, with `phi0` shared across patterns.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use super::family::PhaseFamily;
use super::optimize::golden_max;
use crate::error::{Error, Result};

/// Counts per pattern recorded at one phase setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeSample {
    pub phi: f64,
    pub counts: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeParams {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl FringeParams {
    pub fn eval(&self, x: f64) -> f64 {
        self.c0 + self.c1 * x.cos() + self.c2 * (2.0 * x).cos()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeFit {
    pub phi0: f64,
    pub patterns: Vec<FringeParams>,
    /// Root of the summed squared residuals over all patterns and phases.
    pub residual_norm: f64,
}

const PHI0_GRID: usize = 360;

/// Solve the 3x3 normal equations for every pattern at a fixed `phi0`.
fn solve_at(phis: &[f64], freqs: &[Vec<f64>], phi0: f64) -> Option<(Vec<FringeParams>, f64)> {
    let rows: Vec<[f64; 3]> = phis
        .iter()
        .map(|&phi| [1.0, (phi + phi0).cos(), (2.0 * (phi + phi0)).cos()])
        .collect();
    let mut ata = [[0.0; 3]; 3];
    for r in &rows {
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += r[i] * r[j];
            }
        }
    }
    let inv = invert3(&ata)?;
    let k = freqs[0].len();
    let mut params = Vec::with_capacity(k);
    let mut rss = 0.0;
    for pattern in 0..k {
        let mut atb = [0.0; 3];
        for (r, f) in rows.iter().zip(freqs) {
            for i in 0..3 {
                atb[i] += r[i] * f[pattern];
            }
        }
        let c: Vec<f64> = (0..3)
            .map(|i| (0..3).map(|j| inv[i][j] * atb[j]).sum())
            .collect();
        for (r, f) in rows.iter().zip(freqs) {
            let resid = f[pattern] - (c[0] * r[0] + c[1] * r[1] + c[2] * r[2]);
            rss += resid * resid;
        }
        params.push(FringeParams {
            c0: c[0],
            c1: c[1],
            c2: c[2],
        });
    }
    Some((params, rss))
}

fn invert3(m: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let scale = m.iter().flatten().fold(0.0f64, |a, &b| a.max(b.abs()));
    if !(det.abs() > 1e-12 * scale.powi(3)) {
        return None;
    }
    Some(std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let (a, b) = ((j + 1) % 3, (j + 2) % 3);
            let (c, d) = ((i + 1) % 3, (i + 2) % 3);
            (m[a][c] * m[b][d] - m[a][d] * m[b][c]) / det
        })
    }))
}

/// Fit the fringe model to counts sampled at five or more distinct phases.
/// Each sample is normalized to its total count first, so the fitted curves
/// sum to one at every phase.
pub fn fit_fringes(samples: &[FringeSample]) -> Result<FringeFit> {
    let k = samples
        .first()
        .map(|s| s.counts.len())
        .ok_or_else(|| Error::Fit("no samples".into()))?;
    if k == 0 {
        return Err(Error::Fit("samples carry no patterns".into()));
    }
    let mut distinct: Vec<f64> = Vec::new();
    let mut freqs = Vec::with_capacity(samples.len());
    for s in samples {
        if s.counts.len() != k {
            return Err(Error::Fit(
                "samples disagree on the number of patterns".into(),
            ));
        }
        if !s.phi.is_finite() || s.counts.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::Fit(format!("invalid sample at phi = {}", s.phi)));
        }
        let total: f64 = s.counts.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Fit(format!("no counts at phi = {}", s.phi)));
        }
        freqs.push(s.counts.iter().map(|c| c / total).collect::<Vec<f64>>());
        let reduced = s.phi.rem_euclid(TAU);
        if !distinct.iter().any(|d| {
            let gap = (d - reduced).abs();
            gap.min(TAU - gap) < 1e-9
        }) {
            distinct.push(reduced);
        }
    }
    if distinct.len() < 5 {
        return Err(Error::Fit(format!(
            "need at least 5 distinct phases, got {}",
            distinct.len()
        )));
    }
    let phis: Vec<f64> = samples.iter().map(|s| s.phi).collect();
    let rss_at = |phi0: f64| solve_at(&phis, &freqs, phi0).map(|(_, rss)| rss);

    let step = PI / PHI0_GRID as f64;
    let mut best: Option<(f64, f64)> = None;
    for i in 0..PHI0_GRID {
        let phi0 = step * i as f64;
        let rss = rss_at(phi0).ok_or_else(|| Error::Fit("rank-deficient design".into()))?;
        if best.is_none_or(|(_, b)| rss < b) {
            best = Some((phi0, rss));
        }
    }
    let (grid_phi0, grid_rss) = best.expect("grid is non-empty");
    let (refined, neg_rss) = golden_max(
        |phi0| rss_at(phi0).map_or(f64::NEG_INFINITY, |r| -r),
        grid_phi0 - step,
        grid_phi0 + step,
        1e-12,
    );
    let phi0 = if -neg_rss <= grid_rss {
        refined
    } else {
        grid_phi0
    }
    .rem_euclid(PI);
    let (patterns, rss) =
        solve_at(&phis, &freqs, phi0).ok_or_else(|| Error::Fit("rank-deficient design".into()))?;
    Ok(FringeFit {
        phi0,
        patterns,
        residual_norm: rss.sqrt(),
    })
}

impl FringeFit {
    /// `(|C0|, |C1|, |C2|)` per pattern.
    pub fn harmonic_magnitudes(&self) -> Vec<[f64; 3]> {
        self.patterns
            .iter()
            .map(|p| [p.c0.abs(), p.c1.abs(), p.c2.abs()])
            .collect()
    }
}

impl PhaseFamily for FringeFit {
    fn outcomes(&self) -> usize {
        self.patterns.len()
    }

    fn probabilities(&self, phi: f64) -> Vec<f64> {
        self.patterns
            .iter()
            .map(|p| p.eval(phi + self.phi0))
            .collect()
    }

    fn derivatives(&self, phi: f64) -> Vec<f64> {
        let x = phi + self.phi0;
        self.patterns
            .iter()
            .map(|p| -p.c1 * x.sin() - 2.0 * p.c2 * (2.0 * x).sin())
            .collect()
    }

    fn second_derivatives(&self, phi: f64) -> Option<Vec<f64>> {
        let x = phi + self.phi0;
        Some(
            self.patterns
                .iter()
                .map(|p| -p.c1 * x.cos() - 4.0 * p.c2 * (2.0 * x).cos())
                .collect(),
        )
    }
}
