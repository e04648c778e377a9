//! Bayesian population size estimation for dual-record systems under
//! behavioural response, with closed-form baselines, convergence
//! diagnostics and a simulation harness.

pub mod data;
pub mod diagnostics;
pub mod distributions;
pub mod error;
pub mod estimators;
pub mod likelihood;
pub mod posterior;
pub mod samplers;
pub mod simstudy;
pub mod special;

pub use data::{c_hat, cell_probabilities, CellProbabilities, DrsData, MtbParams, PopulationSpec};
pub use diagnostics::{burnin_scan, psrf, PsrfReport};
pub use error::{Error, Result};
pub use estimators::{estimate_mb, estimate_mt, estimate_nour, ClosedForm};
pub use posterior::{pooled_phi_summary, pooled_summary, summarize, PosteriorSummary, RealSummary};
pub use samplers::{
    resolve_lambda, resolve_phi_prior, run_ab_con, run_ab_flat, ChainConfig, ChainTrace,
    LambdaSource, NPrior, PUpdate, Param, PhiKnowledge, PhiPriorPolicy,
};
pub use simstudy::{
    builtin_population, generate_dataset, run_study, run_study_detailed, CiPooling, PointEstimator,
    StudyDesign, StudyMethod, StudyOutcome, StudyRow,
};
