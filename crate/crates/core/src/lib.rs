//! Group-sparse penalized regression for samples of weighted networks with
//! node covariates.
//!
//! Each observation is an undirected, loop-free weighted network on a shared
//! node set together with per-node covariates and a scalar response. Nodes
//! carry a known community label, and features are grouped by community
//! structure:
//!
//! * **NBG** (node-based groups): one group per community holding its node
//!   covariates and every edge incident to it.
//! * **EBG** (edge-based groups): one group per community pair holding the
//!   edges between the pair and the node covariates of both communities.
//!
//! Groups overlap, so the design is expanded by duplicating shared columns,
//! each group is orthonormalized, and a standardized group LASSO is solved
//! by block coordinate descent (gaussian) or majorize-minimize group descent
//! (binomial). The penalty level is tuned by ten-fold cross-validation with
//! the one-standard-error rule.
//!
//! The loss is scaled by `1/N` where `N` is the number of training samples
//! (not the node count).

pub mod cpm;
pub mod data;
pub mod error;
pub mod grouping;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod preprocess;
pub mod simgen;
pub mod solver;
pub mod tuning;

pub use data::{CommunityMap, Dataset, DesignMatrix, Family, FeatureIndex, Observation, Split};
pub use error::{Error, Result};
pub use grouping::{ExpansionMap, Group, GroupSpec, Scheme};
pub use model::{FitResult, PathEntry, PathFit, Prepared};
pub use solver::{SolverOptions, Solution};
pub use tuning::{CvOptions, CvResult};
