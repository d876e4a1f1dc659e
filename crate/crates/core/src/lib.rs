#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod error;
pub mod forward;
pub mod harmonics;
pub mod io;
pub mod qmat;
pub mod reconstruct;
mod seeding;
pub mod uncertainty;

pub use error::{Error, Result};
