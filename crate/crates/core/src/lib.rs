//! Confidence and latent-cognizance scoring over classifier penultimate
//! (logit) vectors, with the evaluation machinery to measure how well each
//! score flags novel inputs: threshold sweeps, AUROC and AUPR, rank-sum and
//! normality tests, density summaries, a grouped rotating fold planner, and
//! a synthetic classifier benchmark to exercise it all end to end.

pub mod cli;
pub mod dataio;
pub mod density;
pub mod error;
pub mod eval;
pub mod report;
pub mod scores;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use scores::{LogitVector, Orientation, ScoreValue, ScorerKind, ScorerSpec};
