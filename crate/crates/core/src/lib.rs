// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod fem;
pub mod geometry;
pub mod mesh;
pub mod quadrature;
pub mod singular;
pub mod solver;
pub mod source;
pub mod study;
