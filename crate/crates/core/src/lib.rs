//! Two-stage stochastic capacity expansion planning with large flexible loads.
#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod builder;
pub mod canonical;
pub mod error;
pub mod lp_format;
pub mod model;
pub mod solver;

pub use error::{Error, Result};
pub mod ef;
pub mod io;
pub mod oracle;
pub mod pha;
pub mod report;
