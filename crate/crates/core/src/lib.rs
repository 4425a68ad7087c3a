//! Scheduling of grid-supportive wind turbine modes under temporal-logic
//! frequency specifications.

// `!(x > 0.0)` style checks reject NaN on purpose; index loops mirror the maths.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod afr;
pub mod cases;
pub mod controller;
pub mod dfig;
pub mod error;
pub mod io;
pub mod lti;
pub mod milp;
pub mod reduction;
pub mod scenario;
pub mod solver;
pub mod stl;
pub mod trace;

pub use error::{Error, Result};
