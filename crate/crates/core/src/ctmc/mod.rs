//! Two-state continuous-time Markov chain for punctual and arrival-delayed
//! running, with intensities that are piecewise constant in distance.
//!
//! Covariates are attached per section, and segment indicators switch at
//! the scheme boundaries, so the intensity matrix only changes at spots and
//! boundaries. Transition probabilities between spots are therefore
//! ordered products of two-state matrix exponentials; the unobserved states
//! at boundaries are summed out by that product.

mod fit;
mod likelihood;
mod model;
mod path;
mod predict;

pub use fit::{fit_ctmc, CtmcOptions, MarkovFit, SegmentContrast, TransitionTable};
pub use likelihood::{log_likelihood, log_likelihood_gradient};
pub use model::{intensity_matrix, CtmcParams, SegmentScheme, State, Transition, TransitionParams};
pub use path::{path_transition_probability, CtmcDataset, ObservedPath, OriginConvention};

pub(crate) use path::pieces;
pub use predict::{predict_delay_rate, PredictedRate};
