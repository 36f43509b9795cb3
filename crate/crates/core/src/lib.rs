//! Angle-based cost-sensitive multicategory classification.
//!
//! Classes are coded as the vertices of a regular simplex in `R^(K-1)`
//! ([`simplex`]). A decision function `f` predicts the class whose vertex
//! makes the smallest angle with `f(x)`. Training minimizes the composite
//! loss `sum_t C[y][t] l(-<f, w_t>)` for a misclassification cost matrix
//! `C` ([`cost`], [`loss`]), which is Fisher consistent for the
//! cost-sensitive Bayes rule whenever `l` is convex with `l' < 0`
//! ([`bayes`]).
//!
//! Two boosting algorithms fit `f` as a weighted sum of classification
//! trees ([`tree`], [`boost`]). [`data`] and [`eval`] provide the
//! synthetic benchmarks, CSV preprocessing and a replication harness.
//!
//! Class indices are zero-based everywhere in the API.

pub mod bayes;
pub mod boost;
pub mod cost;
pub mod data;
pub mod error;
pub mod eval;
mod linalg;
pub mod loss;
pub mod simplex;
pub mod tree;

pub use bayes::{
    bayes_rule, check_fisher_consistency, conditional_risk, expected_costs_from_f,
    minimize_conditional_risk, plug_in_probabilities, recover_probabilities, ClassDistribution, ConsistencyReport,
    RiskMinimizer,
};
pub use boost::{
    adaboost_fit, line_search_beta, logitboost_fit, Algorithm, BoostConfig, Booster, Ensemble,
    RoundInfo,
};
pub use cost::CostMatrix;
pub use data::{Dataset, Generator, Matrix};
pub use error::{Error, Result};
pub use eval::{builtin_cost, run_experiment, test_cost, CostCurve, DataSource, ExperimentSpec};
pub use loss::{cs_loss, empirical_risk, Margin, MarginLoss};
pub use simplex::SimplexCode;
pub use tree::{fit_tree, Tree, WeightTable};
