//! Upper-tail large-deviation solver for the directed landscape.
//!
//! The pipeline runs from conditioning data `(I, f)` through the optimal
//! terminal profile `f*`, the backward Burgers evolution and its shocks, to the
//! minimizing path measure and its rate. Lattice dynamic programs in
//! [`metric`] provide independent checks.

pub mod burgers;
pub mod envelope;
pub mod measures;
pub mod metric;
pub mod multiwedge;
pub mod par;
pub mod pwfn;
