//! Simulation laboratory for molecular signatures of an exposure.
//!
//! Signatures are built either by penalized regression of the exposure on all
//! observed features ("no-screening") or on the features that survive
//! confounder-adjusted univariate tests ("screening"). The [`graph`] module
//! predicts the large-sample selected sets of both strategies from the causal
//! DAG; the remaining modules simulate finite samples from the implied linear
//! Gaussian model and measure how close each strategy gets.

pub mod graph;
pub mod lasso;
pub mod metrics;
pub mod pipeline;
pub mod scenarios;
pub mod screen;
pub mod sem;
