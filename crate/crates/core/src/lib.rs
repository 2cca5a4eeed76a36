// `!(x > 0.0)` guards are deliberate: they reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod heat;
pub mod io;
pub mod mixture;
pub mod observable;
pub mod operator;
pub mod process;
pub mod sampler;
pub mod spectral;

pub use error::{Error, Result};
