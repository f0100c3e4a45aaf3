//! Delay modelling for trains running along a single line.
//!
//! Two models share the running distance (km from the initial station) as
//! their time scale:
//!
//! - [`cox`] fits a stratified Cox model to recurrent primary delays, one
//!   stratum per event rank, and produces baseline hazards and survival curves.
//! - [`ctmc`] fits a two-state (punctual / delayed) continuous-time Markov
//!   chain whose intensities are piecewise constant in distance and depend on
//!   section covariates.
//!
//! [`ingest`] turns timetable and weather files into section records,
//! [`validation`] scores the Markov chain with expanding-window walk-forward
//! folds, and [`simulate`] generates synthetic lines with known parameters.

pub mod covariates;
pub mod cox;
pub mod ctmc;
pub mod error;
pub mod inference;
pub mod ingest;
pub mod numerics;
pub mod plot;
pub mod simulate;
pub mod validation;

pub use covariates::{Covariate, CovariateSpec};
pub use error::{Error, ErrorKind, Result};
