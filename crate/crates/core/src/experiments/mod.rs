//! Instances, metrics and benchmark presets for comparing FPC Bregman with
//! its PDE-accelerated variant.

mod instance;
mod presets;

pub use instance::*;
pub use presets::*;
