//! Indoor bearing estimation from Wi-Fi channel state information.

// NaN-rejecting checks are written as `!(x > y)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aoa;
pub mod calibration;
pub mod cli;
pub mod codec;
pub mod csi;
pub mod scanner;
pub mod synth;
