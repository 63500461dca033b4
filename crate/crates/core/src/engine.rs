//! Detection-pattern probabilities: the ideal photon-number distribution of
//! the rotated state composed with the per-mode POVM weights,
//!
//! ```text
//! P_r = sum_c w_{r_ah}(c_ah) w_{r_av}(c_av) w_{r_bh}(c_bh) w_{r_bv}(c_bv) p_c
//! ```
//!
//! Sums run per pair number `n`, since `p_c` vanishes unless `c_a = c_b = n`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::detector::DetectorModel;
use crate::error::{Error, Result};
use crate::fock::{IdealTable, Mode, RotationSpec, SourceParams};

/// Click counts per mode, ordered `(a_h, a_v, b_h, b_v)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DetectionPattern {
    pub a_h: u32,
    pub a_v: u32,
    pub b_h: u32,
    pub b_v: u32,
}

impl DetectionPattern {
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

    pub fn get(&self, mode: Mode) -> u32 {
        match mode {
            Mode::AH => self.a_h,
            Mode::AV => self.a_v,
            Mode::BH => self.b_h,
            Mode::BV => self.b_v,
        }
    }

    pub fn max_entry(&self) -> u32 {
        self.a_h.max(self.a_v).max(self.b_h).max(self.b_v)
    }
}

impl fmt::Display for DetectionPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.max_entry() < 10 {
            write!(f, "{}{}{}{}", self.a_h, self.a_v, self.b_h, self.b_v)
        } else {
            write!(f, "{}:{}:{}:{}", self.a_h, self.a_v, self.b_h, self.b_v)
        }
    }
}

impl FromStr for DetectionPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let parts: Vec<u32> = if s.contains([':', ',']) {
            s.split([':', ','])
                .map(|p| p.trim().parse::<u32>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::domain(format!("bad pattern {s:?}: {e}")))?
        } else {
            s.chars()
                .map(|ch| {
                    ch.to_digit(10)
                        .ok_or_else(|| Error::domain(format!("bad pattern {s:?}")))
                })
                .collect::<Result<_>>()?
        };
        match parts.as_slice() {
            &[a_h, a_v, b_h, b_v] => Ok(Self::new(a_h, a_v, b_h, b_v)),
            _ => Err(Error::domain(format!("pattern {s:?} needs four entries"))),
        }
    }
}

/// The nine two-plus-two click patterns, in the order
/// 2002, 2011, 2020, 1102, 1111, 1120, 0202, 0211, 0220.
pub const FOURFOLD_PATTERNS: [DetectionPattern; 9] = [
    DetectionPattern::new(2, 0, 0, 2),
    DetectionPattern::new(2, 0, 1, 1),
    DetectionPattern::new(2, 0, 2, 0),
    DetectionPattern::new(1, 1, 0, 2),
    DetectionPattern::new(1, 1, 1, 1),
    DetectionPattern::new(1, 1, 2, 0),
    DetectionPattern::new(0, 2, 0, 2),
    DetectionPattern::new(0, 2, 1, 1),
    DetectionPattern::new(0, 2, 2, 0),
];

/// A set of click patterns to condition on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConditioningClass {
    /// Exactly `a` clicks across the sensing modes and `b` across the reference modes.
    ClicksPerPath { a: u32, b: u32 },
}

impl ConditioningClass {
    /// Two clicks in each path: the four-photon events.
    pub const FOURFOLD: ConditioningClass = ConditioningClass::ClicksPerPath { a: 2, b: 2 };

    pub fn contains(&self, r: &DetectionPattern) -> bool {
        match *self {
            ConditioningClass::ClicksPerPath { a, b } => r.path_a() == a && r.path_b() == b,
        }
    }

    /// Member patterns whose entries fit under `max_clicks`, sensing split
    /// outermost with `r_ah` descending, reference split innermost with `r_bh`
    /// ascending.
    pub fn patterns(&self, max_clicks: u32) -> Vec<DetectionPattern> {
        let ConditioningClass::ClicksPerPath { a, b } = *self;
        let mut out = Vec::new();
        for a_h in (0..=a).rev() {
            for b_h in 0..=b {
                let r = DetectionPattern::new(a_h, a - a_h, b_h, b - b_h);
                if r.max_entry() <= max_clicks {
                    out.push(r);
                }
            }
        }
        out
    }
}

impl fmt::Display for ConditioningClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConditioningClass::ClicksPerPath { a, b } => write!(f, "{a}+{b} clicks"),
        }
    }
}

/// Pattern probabilities at one rotation setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternDistribution {
    pub rotation: RotationSpec,
    pub entries: Vec<(DetectionPattern, f64)>,
    /// Set when the entries were renormalized within a conditioning class.
    pub normalized_subset: Option<ConditioningClass>,
}

impl PatternDistribution {
    pub fn get(&self, r: &DetectionPattern) -> Option<f64> {
        self.entries.iter().find(|(p, _)| p == r).map(|&(_, v)| v)
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|&(_, v)| v).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.entries.iter().map(|&(_, v)| v).collect()
    }

    pub fn patterns(&self) -> Vec<DetectionPattern> {
        self.entries.iter().map(|&(p, _)| p).collect()
    }
}

fn check_tables(det: &DetectorModel, n_max: u32) -> Result<()> {
    if det.c_max() < n_max {
        return Err(Error::domain(format!(
            "detector tables cover {} photons per mode, source truncation needs {n_max}",
            det.c_max()
        )));
    }
    Ok(())
}

fn check_pattern(r: &DetectionPattern, det: &DetectorModel) -> Result<()> {
    if r.max_entry() > det.max_clicks() {
        return Err(Error::domain(format!(
            "pattern {r} exceeds the {} clicks a mode can register",
            det.max_clicks()
        )));
    }
    Ok(())
}

/// Dense table of `P_r` over every pattern with at most `side - 1` clicks per mode.
#[derive(Debug, Clone)]
pub(crate) struct PatternGrid {
    side: u32,
    probs: Vec<f64>,
}

impl PatternGrid {
    pub(crate) fn compute(
        rot: RotationSpec,
        src: &SourceParams,
        det: &DetectorModel,
    ) -> Result<Self> {
        let n_max = src.n_max()?;
        check_tables(det, n_max)?;
        let ideal = IdealTable::new(rot, src, n_max);
        let side = det.max_clicks().min(n_max) + 1;
        let s = side as usize;
        let wa = det.table(Mode::AH);
        let wb = det.table(Mode::BH);
        let mut probs = vec![0.0; s * s * s * s];
        let mut b_part = vec![0.0; s * s];
        for n in 0..=n_max {
            let r_top = n.min(side - 1);
            for c_bh in 0..=n {
                let c_bv = n - c_bh;
                for r_bh in 0..=r_top {
                    for r_bv in 0..=r_top {
                        b_part[r_bh as usize * s + r_bv as usize] =
                            wb.weight(r_bh, c_bh) * wb.weight(r_bv, c_bv);
                    }
                }
                for c_ah in 0..=n {
                    let p = ideal.prob(n, c_ah, c_bh);
                    if p == 0.0 {
                        continue;
                    }
                    let c_av = n - c_ah;
                    for r_ah in 0..=r_top.min(c_ah) {
                        let w1 = wa.weight(r_ah, c_ah);
                        for r_av in 0..=r_top.min(c_av) {
                            let wa_pair = p * w1 * wa.weight(r_av, c_av);
                            if wa_pair == 0.0 {
                                continue;
                            }
                            let base = (r_ah as usize * s + r_av as usize) * s * s;
                            for (slot, &wb_pair) in
                                probs[base..base + s * s].iter_mut().zip(&b_part)
                            {
                                *slot += wa_pair * wb_pair;
                            }
                        }
                    }
                }
            }
        }
        Ok(Self { side, probs })
    }

    pub(crate) fn get(&self, r: &DetectionPattern) -> f64 {
        if r.max_entry() >= self.side {
            return 0.0;
        }
        let s = self.side as usize;
        self.probs
            [((r.a_h as usize * s + r.a_v as usize) * s + r.b_h as usize) * s + r.b_v as usize]
    }

    pub(crate) fn iter(&self) -> impl Iterator<Item = (DetectionPattern, f64)> + '_ {
        let s = self.side as usize;
        self.probs.iter().enumerate().map(move |(idx, &p)| {
            let b_v = idx % s;
            let b_h = (idx / s) % s;
            let a_v = (idx / (s * s)) % s;
            let a_h = idx / (s * s * s);
            (
                DetectionPattern::new(a_h as u32, a_v as u32, b_h as u32, b_v as u32),
                p,
            )
        })
    }
}

/// Probability of one click pattern.
pub fn detection_probability(
    r: &DetectionPattern,
    rot: RotationSpec,
    src: &SourceParams,
    det: &DetectorModel,
) -> Result<f64> {
    check_pattern(r, det)?;
    let n_max = src.n_max()?;
    check_tables(det, n_max)?;
    let ideal = IdealTable::new(rot, src, n_max);
    let wa = det.table(Mode::AH);
    let wb = det.table(Mode::BH);
    let mut total = 0.0;
    for n in r.path_a().max(r.path_b())..=n_max {
        for c_ah in 0..=n {
            let wa_pair = wa.weight(r.a_h, c_ah) * wa.weight(r.a_v, n - c_ah);
            if wa_pair == 0.0 {
                continue;
            }
            for c_bh in 0..=n {
                let wb_pair = wb.weight(r.b_h, c_bh) * wb.weight(r.b_v, n - c_bh);
                total += wa_pair * wb_pair * ideal.prob(n, c_ah, c_bh);
            }
        }
    }
    Ok(total)
}

/// Unconditioned probabilities of every pattern reachable within the truncation.
pub fn pattern_distribution(
    rot: RotationSpec,
    src: &SourceParams,
    det: &DetectorModel,
) -> Result<PatternDistribution> {
    let grid = PatternGrid::compute(rot, src, det)?;
    Ok(PatternDistribution {
        rotation: rot,
        entries: grid.iter().collect(),
        normalized_subset: None,
    })
}

/// Probabilities of the given patterns, unnormalized.
pub fn pattern_probabilities(
    patterns: &[DetectionPattern],
    rot: RotationSpec,
    src: &SourceParams,
    det: &DetectorModel,
) -> Result<Vec<f64>> {
    for r in patterns {
        check_pattern(r, det)?;
    }
    let grid = PatternGrid::compute(rot, src, det)?;
    Ok(patterns.iter().map(|r| grid.get(r)).collect())
}

/// Pattern probabilities renormalized within a conditioning class.
pub fn conditioned_distribution(
    class: ConditioningClass,
    rot: RotationSpec,
    src: &SourceParams,
    det: &DetectorModel,
) -> Result<PatternDistribution> {
    let patterns = class.patterns(det.max_clicks());
    let probs = pattern_probabilities(&patterns, rot, src, det)?;
    let total: f64 = probs.iter().sum();
    if !(total > 0.0) {
        return Err(Error::domain(format!(
            "no {class} events are possible with this source and detector"
        )));
    }
    Ok(PatternDistribution {
        rotation: rot,
        entries: patterns
            .into_iter()
            .zip(probs.into_iter().map(|p| p / total))
            .collect(),
        normalized_subset: Some(class),
    })
}

/// The nine two-plus-two patterns normalized to the total four-fold rate.
pub fn fourfold_distribution(
    rot: RotationSpec,
    src: &SourceParams,
    det: &DetectorModel,
) -> Result<PatternDistribution> {
    conditioned_distribution(ConditioningClass::FOURFOLD, rot, src, det)
}

/// Photon-number statistics of the source seen by the detectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanPhotonNumbers {
    /// Mean photons entering the sensing path (before loss).
    pub path_a: f64,
    /// Mean photons entering the reference path (before loss).
    pub path_b: f64,
    pub total: f64,
    /// Mean sensing-path photons given a two-plus-two click event, averaged
    /// uniformly over `phi`.
    pub sensing_given_fourfold: f64,
    /// Mean sensing-path photons over the pair terms that can produce a
    /// four-photon event (`n >= 2`).
    pub sensing_four_photon_terms: f64,
}

/// `E[n | n >= 2]` for the pair-number distribution, evaluated as a ratio of
/// series in `x = tanh^2(tau)` so the `tau -> 0` limit is exact.
pub fn four_photon_term_mean(src: &SourceParams) -> f64 {
    let x = src.pair_ratio();
    let mut num = 0.0;
    let mut den = 0.0;
    let mut xk = 1.0;
    for n in 2u32.. {
        let nf = n as f64;
        num += nf * (nf + 1.0) * xk;
        den += (nf + 1.0) * xk;
        xk *= x;
        if xk * (nf + 2.0) * (nf + 3.0) < 1e-18 * num {
            break;
        }
    }
    num / den
}

pub fn mean_photon_numbers(src: &SourceParams, det: &DetectorModel) -> Result<MeanPhotonNumbers> {
    let n_max = src.n_max()?;
    check_tables(det, n_max)?;
    let path_a: f64 = (0..=n_max)
        .map(|n| n as f64 * src.pair_probability(n))
        .sum();

    // The numerator and denominator are trigonometric polynomials of degree
    // <= n_max in phi; averaging over 2 n_max + 1 equispaced angles is exact.
    let samples = 2 * n_max as usize + 1;
    let wa = det.table(Mode::AH);
    let wb = det.table(Mode::BH);
    let two_clicks = |w: &crate::detector::PovmTable, c_h: u32, c_v: u32| -> f64 {
        (0..=2)
            .map(|r| w.weight(r, c_h) * w.weight(2 - r, c_v))
            .sum()
    };
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..samples {
        let phi = std::f64::consts::TAU * j as f64 / samples as f64;
        let ideal = IdealTable::new(RotationSpec::sensing(phi), src, n_max);
        for n in 0..=n_max {
            for c_ah in 0..=n {
                let pa = two_clicks(wa, c_ah, n - c_ah);
                if pa == 0.0 {
                    continue;
                }
                for c_bh in 0..=n {
                    let joint = pa * two_clicks(wb, c_bh, n - c_bh) * ideal.prob(n, c_ah, c_bh);
                    num += n as f64 * joint;
                    den += joint;
                }
            }
        }
    }
    let sensing_given_fourfold = if den > 0.0 { num / den } else { 2.0 };
    Ok(MeanPhotonNumbers {
        path_a,
        path_b: path_a,
        total: 2.0 * path_a,
        sensing_given_fourfold,
        sensing_four_photon_terms: four_photon_term_mean(src),
    })
}
