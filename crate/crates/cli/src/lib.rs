//! Config parsing, experiment dispatch and manifest reproduction behind the
//! `shiftcompact` binary.

// Negated comparisons are the NaN-rejecting form of every range check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod exec;
pub mod reproduce;
