// SPDX-License-Identifier: MIT OR Apache-2.0

//! Conformal root-cause localization for multi-stream changepoint data.
//!
//! Given a `n x K` panel in which every stream may change distribution once,
//! the procedures here return a set of streams that contains the earliest
//! changing stream with probability at least `1 - alpha`. P-values come from
//! permutations that act separately on each stream's pre- and post-change
//! segments.

pub mod conformal;
pub mod density;
pub mod engine;
pub mod error;
pub mod io;
pub mod model;
pub mod permute;
pub mod scores;
pub mod simgen;

pub use conformal::{PValueMethod, PValueTable, RootPValues};
pub use density::DensityModel;
pub use engine::{
    run_conch_agg, run_croc, run_croc_dep, Algorithm, AnalysisResult, GroupPartition, RunOptions,
};
pub use error::{CrocError, Result};
pub use model::{ChangepointConfig, ConfidenceSet, ConstraintSet, StreamPanel};
pub use permute::{RngSeed, SplitPermutation};
pub use scores::{CppScore, LearnedScore, StreamScore};
