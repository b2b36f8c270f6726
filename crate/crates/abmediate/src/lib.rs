//! Estimation of direct and indirect treatment effects in A/B tests.
//!
//! An A/B test measures the total effect of a product change on an outcome
//! metric. When the change also shifts user behaviour in *another* product
//! (a mediating metric, such as organic search clicks), the total effect
//! mixes two channels: the part that acts on the outcome directly and the
//! part transmitted through the induced change in the mediator. This crate
//! separates the two.
//!
//! The pipeline is:
//!
//! 1. [`data`] — ingest user-level logs `(treatment, mediator, outcome)`
//!    into an immutable [`data::ObservationTable`].
//! 2. [`gmm`] — jointly fit the two-equation regression system by
//!    iterative GMM with a HAC weighting matrix, yielding coefficient
//!    estimates and their asymptotic covariance.
//! 3. [`effects`] — map the coefficients to the generalized direct and
//!    indirect effects (`GADE`, `GACME`) and the total effect (`ATE`),
//!    with delta-method standard errors and z-tests.
//! 4. [`sim`] — generate synthetic datasets from a linear structural
//!    equation model with unmeasured mediator blocks, together with
//!    ground-truth effects computed independently of any estimator.
//! 5. [`validation`] — self-checking Monte Carlo suites that verify the
//!    whole chain against the simulator's ground truth.

pub mod data;
pub mod effects;
pub mod gmm;
pub mod sim;
mod util;
pub mod validation;

pub use data::{ingest_csv_path, ingest_csv_reader, summarize, ColumnBindings, ObservationTable};
pub use effects::{build_report, EffectReport};
pub use gmm::{itgmm_fit, itgmm_fit_default, GmmFit, HacConfig, ThetaVector};
pub use sim::{counterfactual_oracle, simulate, true_effects_from_structural, LsemSpec};
