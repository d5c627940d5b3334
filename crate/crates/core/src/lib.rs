//! Continuous touch-stroke authentication with per-user left-right HMMs.
//!
//! Enrollment learns a behavioral template from the owner's strokes only.
//! Each test stroke is scored against the template with a length-normalized
//! likelihood score and a Viterbi state-occupancy ("stroke kinematics")
//! score; the two are averaged and then fused over windows of consecutive
//! strokes. The [`evaluation`] module reproduces a FAR / FRR / EER protocol
//! over intra-session, inter-session and long-term splits, and [`synth`]
//! generates labelled datasets from known ground-truth models.

pub mod enrollment;
mod error;
pub mod evaluation;
pub mod exec;
pub mod hmm;
pub mod scoring;
pub mod seed;
pub mod strokes;
pub mod synth;

pub use error::{Error, ErrorClass, Result};
pub use exec::Exec;
pub use hmm::{Hmm, ObservationSequence};
