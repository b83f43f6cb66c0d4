//! Effective Ginzburg-Landau energies of corner and sector domains.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod effective;
pub mod geometry;
pub mod glmin;
pub mod magspec;
pub mod oned;
pub mod par;
pub mod sparse;
