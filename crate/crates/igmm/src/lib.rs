//! Reduction and exact minimization of incompletely specified generalized
//! Mealy machines (IGMMs).
//!
//! An IGMM is an input-deterministic transducer whose transition function may
//! be partial and whose output function maps each defined `(state, input)`
//! pair to a non-empty *set* of output valuations.  Undefined transitions
//! implicitly allow any output from then on.
//!
//! The crate provides:
//!
//! - [`boolset`]: valuations, cubes, dense valuation sets and disjoint cube
//!   covers over small proposition sets;
//! - [`machine`]: the machine data model, normalization and statistics;
//! - [`format`]: the KISS2 interchange format and the XKISS extension that
//!   allows unions of output cubes per transition;
//! - [`relations`]: the variation matrix, partial-solution lower bound,
//!   specialization preorder, its condensation graph and bisimulation
//!   partitions;
//! - [`reduce`]: polynomial-time reductions (bisimulation quotient and
//!   specialization-based output assignment);
//! - [`satmin`]: exact minimization through an incremental CNF encoding of
//!   the cover/closure/nonemptiness conditions with lazy, counterexample
//!   guided refinement of the nonemptiness clauses;
//! - [`sat`]: the CDCL solver backing [`satmin`], with DIMACS export;
//! - [`verify`]: independent oracles (specialization and bisimilarity
//!   checking, brute-force minimal class count, seeded random machines).

pub mod boolset;
#[cfg(test)]
pub(crate) mod fixtures;
pub mod format;
pub mod machine;
pub mod reduce;
pub mod relations;
pub mod sat;
pub mod satmin;
pub mod verify;

pub use boolset::{Cube, PropSet, Valuation, ValuationSet};
pub use machine::{Igmm, MachineStats};
