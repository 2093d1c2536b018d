//! Batch front door for the weak-KAM toolkit: JSON run configurations,
//! experiment presets, CSV/JSON artifact emission, and the randomized
//! convex-core lemma battery.

pub mod config;
pub mod emit;
pub mod lemmas;
pub mod run;
