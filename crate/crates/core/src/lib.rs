#![allow(clippy::neg_cmp_op_on_partial_ord)] // negated comparisons also reject NaN

pub mod battery;
pub mod cli;
pub mod config;
pub mod energy;
pub mod error;
pub mod mac;
pub mod orbit;
pub mod radio;
pub mod sim;
