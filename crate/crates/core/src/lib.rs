//! Fisher-information bounds on the orientation and position of
//! reflecting surfaces worn on the body, observed by a multi-antenna receiver.
//!
//! `geometry` and `channel` describe the scene and its noise-free OFDM
//! samples, `codes` the per-symbol modulation that separates the sensors,
//! `fim` and `bounds` the information and error bounds, and `harness` the
//! configured sweeps behind the command-line tool.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod codes;
pub mod geometry;
pub mod fim;
pub mod bounds;
pub mod harness;
