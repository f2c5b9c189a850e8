//! Transient resilience loss from population-activity time series, and a
//! Gamma GLMM relating it to infrastructure, hazard, and socioeconomic
//! covariates.
//!
//! Pipeline: [`data_model::load_inputs`] → [`resilience::quantify`] →
//! [`covariates::assemble_rows`] → [`glmm::fit_glmm`].

pub mod covariates;
pub mod data_model;
pub mod glmm;
pub mod resilience;
pub mod synth;
