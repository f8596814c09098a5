// `!(x > y)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod certificate;
pub mod constants;
pub mod error;
pub mod estimators;
pub mod geometry;
pub mod graph;
pub mod mc;
pub mod perfect;
pub mod special;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
