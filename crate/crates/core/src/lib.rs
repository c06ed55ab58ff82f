//! Discrimination auditing for probabilistic decision systems.
//!
//! Synthetic data with known ground truth is drawn from a declared
//! data-generating process ([`dgp`]), a logistic model is fitted
//! ([`estimation`]), its predictions drive a decision policy ([`decision`]),
//! and the staged audit in [`legal_audit`] classifies the result using the
//! conditional parity metrics in [`metrics`].

pub mod cli;
pub mod dataset;
pub mod decision;
pub mod design;
pub mod dgp;
pub mod error;
pub mod estimation;
pub mod legal_audit;
pub mod metrics;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod scenarios;

pub use dataset::Dataset;
pub use decision::{DecisionPolicy, UtilityMatrix, FAVOURABLE};
pub use dgp::{DgpSpec, FeatureRole};
pub use error::{Error, Result};
pub use estimation::{FitTarget, FittedModel, ModelSpec, OptimizerConfig};
pub use legal_audit::{run_audit, AuditConfig, AuditFinding, Candidate, Classification, ContextDeclaration};
pub use pipeline::RunConfig;
pub use report::AuditReport;
