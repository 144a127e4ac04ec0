//! GPS-guided bounding-box annotation of a target in fixed-camera video.
//!
//! The pipeline runs in four stages: flow-cluster candidate proposal
//! ([`proposal`]), HMM matching of the GPS trace to candidates
//! ([`matching`]), learned trajectory refinement ([`refine`]) and quality
//! ranking ([`ranking`]). [`simulator`] generates synthetic clips with
//! ground truth and [`evaluation`] runs the cross-validated benchmark.

pub mod benchmark;
pub mod error;
pub mod evaluation;
pub mod exec;
pub mod geometry;
pub mod gps;
pub mod io;
pub mod matching;
pub mod nn;
pub mod pipeline;
pub mod proposal;
pub mod ranking;
pub mod refine;
pub mod simulator;
pub mod suite;
pub mod track;

pub use error::{Error, Result};
pub use exec::Execution;
