//! Simulation and signal processing for the smartphone power-line audio side
//! channel: voice injection and eavesdropping over a modified charging cable,
//! audio leakage through charging-current fluctuations, and a spoken-digit
//! recognizer for the leaked audio.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod classifier;
pub mod denoise;
pub mod harness;
pub mod signal;
