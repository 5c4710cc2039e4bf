//! Discrete Bayesian networks learned from incomplete data.
//!
//! The crate covers the whole experimental pipeline: sampling complete data
//! from a reference network, hiding values under MCAR/MAR/MNAR mechanisms,
//! fitting parameters with soft, hard and soft-forced EM, perturbing the
//! structure, and scoring the learned models with PCR, APD and KLD.

pub mod dag;
pub mod data;
pub mod em;
pub mod estimation;
pub mod harness;
pub mod inference;
pub mod metrics;
pub mod missingness;
pub mod network;
pub mod perturbation;

pub use dag::{ArcOp, Dag, DagError, NodeRole};
pub use data::{DataError, DataSet, LedgerEntry};
pub use em::{EmConfig, EmFit, EmVariant, InitPolicy};
pub use estimation::{DirichletPrior, Estimator, SufficientStatistics};
pub use inference::{Evidence, InferenceError, PosteriorTable};
pub use metrics::{KldConditioning, MetricsError, MetricsRecord};
pub use missingness::{AmputationError, AmputationSpec, Balancing, Mechanism, Pattern, SeverityClass};
pub use network::{Cpt, DiscreteBayesNet, NetworkError, SizeClass};
pub use perturbation::{PerturbationError, PerturbationLog};
