//! Semantic-level characterization of time-varying multipath channels.
//!
//! The crate is organised as a pipeline:
//!
//! * [`scene`] synthesizes multi-tone sounding snapshots from a geometric scene
//!   of labeled scatterers.
//! * [`dsp`] turns frequency responses into impulse responses, power delay
//!   profiles and discrete multipath components.
//! * [`clustering`] groups multipath components with k-power-means.
//! * [`tracking`] links clusters across snapshots into trajectories.
//! * [`engine`] derives status, behavior and event semantics.
//! * [`semantic`] holds the semantic model, its validator and the persistent
//!   store.
//! * [`pipeline`] and [`io`] tie the stages together for the CLI and the C ABI.

pub mod clustering;
pub mod dsp;
pub mod engine;
pub mod error;
pub mod ids;
pub mod io;
pub mod pipeline;
pub mod scene;
pub mod semantic;
pub mod tracking;

pub use error::{Error, Result};

/// Speed of light in vacuum [m/s].
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Converts a round-trip delay [s] to the one-way distance [m].
pub fn delay_to_distance(delay: f64) -> f64 {
    delay * SPEED_OF_LIGHT / 2.0
}

/// Converts a one-way distance [m] to the round-trip delay [s].
pub fn distance_to_delay(distance: f64) -> f64 {
    2.0 * distance / SPEED_OF_LIGHT
}
