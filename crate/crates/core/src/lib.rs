// negated comparisons are deliberate: NaN parameters must fail validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod conv;
pub mod error;
pub mod experiments;
pub mod field;
pub mod motion_pde;
pub mod rng;
pub mod solvers;

pub use error::{Error, Result};
pub use field::{Field, Grid};
