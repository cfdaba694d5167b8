//! Instantiation-based theorem proving over clausal first-order problems.
//!
//! Problems are grounded in two levels of head-symbol instantiation
//! ([`engine`]), the ground clause sets are decided by a SAT solver refined
//! with congruence closure ([`solver`]), and the instances a proof needs are
//! minimized and recorded ([`store`]) for the experiment drivers in
//! [`pipeline`].

pub mod fol;
pub mod solver;
pub mod tptp;
pub mod store;
pub mod engine;
pub mod pipeline;
