//! Hierarchical adaptive structural SVMs.
//!
//! A linear multiclass classifier trained on a source domain is adapted to
//! several target domains at once. The target domains sit at the leaves of an
//! adaptation tree; every node of the tree owns a weight vector that is
//! regularized toward its parent's (the root toward the source weights), and
//! every node pays the structured hinge loss of all data below it. The joint
//! problem is convex. It is solved by exact coordinate ascent on the dual,
//! or by LBFGS on the primal subgradients.
//!
//! The crate also carries the single-layer baselines (plain SSVM on source,
//! target or mixed data, one-to-one and pooled adaptive SSVM), a repeated
//! random-split evaluation harness and a synthetic hierarchical domain-shift
//! generator.

// `!(x > 0.0)` is how NaN gets rejected along with the rest.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod dual;
pub mod error;
pub mod experiments;
pub mod feature;
pub mod model;
pub mod objective;
pub mod solver;
pub mod trainers;
pub mod tree;

pub use data::{DatasetOptions, DomainDataset, LabeledSample, Normalization};
pub use dual::{DualOptions, DualStart};
pub use error::{Error, Result, TreeError};
pub use feature::{joint_feature, predict, score};
pub use model::{ModelFile, SourceModel};
pub use objective::{LossReport, ObjectiveReport};
pub use solver::{SolveOptions, SolveResult, SolveStatus};
pub use trainers::{Method, ModelWeights, Optimizer, TrainOptions, TrainedModel};
pub use tree::{AdaptationTree, TreeNode, TreeSpec, WeightStack};
