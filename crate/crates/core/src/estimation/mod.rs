//! Phase estimation: Fisher information of outcome families, fringe fits,
//! maximum-likelihood estimation, Monte-Carlo and bootstrap error analysis,
//! and the shot-noise and Heisenberg baselines.

mod baselines;
mod bootstrap;
mod family;
mod fisher;
mod fringe;
mod ml;
mod montecarlo;
pub(crate) mod optimize;

pub use baselines::{
    heisenberg_limit, performance_curve, sensing_second_moment, snl_fisher, CurvePoint,
    SNL_TAU_LIMIT,
};
pub use bootstrap::{bootstrap_fisher_band, FisherBand, Resampling, MIN_BOOTSTRAP_ITERATIONS};
pub use family::{central_difference, FnFamily, Outcomes, PhaseFamily, TheoryFamily, TrigSeries};
pub use fisher::{
    derivative, fisher_curve, fisher_information, fisher_information_with_floor, fisher_maximum,
    FisherMaximum, FisherValue, PROBABILITY_FLOOR,
};
pub use fringe::{fit_fringes, FringeFit, FringeParams, FringeSample};
pub use ml::{MlEstimate, MlEstimator, ML_GRID_POINTS};
pub use montecarlo::{
    monte_carlo_ml_fisher, MlFisherResult, MonteCarloConfig, DEFAULT_REPETITIONS, DEFAULT_SAMPLES,
};
