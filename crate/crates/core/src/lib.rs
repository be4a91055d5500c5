//! Simulation, grading and receding-horizon dam control for a chain of lakes.
//!
//! The network is the Great Lakes chain Superior → Michigan-Huron → St. Clair →
//! Erie → Ontario, drained by the St. Lawrence with the Ottawa joining at
//! Montreal. Levels evolve on a monthly water balance with a one-month delay
//! per connecting river.

pub mod annealer;
pub mod dataset;
pub mod error;
pub mod grading;
pub mod hydronet;
pub mod indicators;
pub mod scenario;
pub mod sensitivity;
pub mod series;
pub mod synthetic;
pub mod wlpcm;

pub use error::{Error, Result};
