//! Simulation and estimation toolkit for loss-tolerant phase estimation with the
//! full multi-photon type-II down-conversion state.
//!
//! The state is a superposition of photon-number singlets across the four modes
//! `(a_h, a_v, b_h, b_v)`. Path `a` passes through the unknown rotation `U(phi)`,
//! path `b` is the reference (optionally carrying a control rotation `theta`).
//! Every mode is read out by a multiplexed array of binary detectors, described
//! by a photon-number-diagonal POVM with loss folded in.
//!
//! Layout:
//!
//! - [`fock`]: state amplitudes, two-mode rotation amplitudes, ideal pattern
//!   probabilities.
//! - [`detector`]: Stirling numbers, multiplexed POVM weight tables, loss.
//! - [`engine`]: detection-pattern probabilities and conditioned distributions.
//! - [`estimation`]: Fisher information, fringe fits, maximum likelihood,
//!   Monte-Carlo error analysis and precision baselines.
//! - [`calibration`]: recover gain and efficiencies from singles and two-folds.
//! - [`heralding`]: information per photon when gating on reference-path clicks.
//! - [`timetag`]: timetag parsing, coincidence counting and a synthetic stream
//!   generator.
//! - [`cli`]: the `spdcm` command-line front end.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod cli;
pub mod detector;
pub mod engine;
pub mod error;
pub mod estimation;
pub mod fock;
pub mod heralding;
mod sampling;
pub mod timetag;

pub use detector::{Arity, DetectorModel, PovmTable};
pub use engine::{ConditioningClass, DetectionPattern, PatternDistribution};
pub use error::{Error, Location, Result};
pub use fock::{Mode, ModeOccupation, RotationSpec, SourceParams};
