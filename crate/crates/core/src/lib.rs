//! Task-dynamic simulation of articulatory gestures and an EMA-style
//! kinematic analysis pipeline.

pub mod coupling;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod landmarks;
pub mod score;
pub mod smoothing;

pub use error::{Error, Result};
pub use score::{Channel, Gesture, GesturalScore, Preset};
