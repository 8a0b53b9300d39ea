//! Weakly supervised spatio-temporal action annotation.
//!
//! Given several videos of one action class, each with a pool of candidate
//! proposal tubes, the pipeline ranks proposals by motion and saliency cues,
//! thins each pool with MAP subset selection, measures cross-video proposal
//! similarity and picks one tube per video by solving a generalized maximum
//! clique problem.

pub mod error;
pub mod eval;
pub mod foreground;
pub mod gmcp;
pub mod model;
pub mod pipeline;
pub mod similarity;
pub mod subset;

pub use error::{Error, Result};
