//! Exact symbolic engine for the loop equation of the KdV hierarchy, its
//! free energies, rooted-tree differential operators, and the universal
//! identities they satisfy on concrete Frobenius manifolds.
//!
//! Everything is computed over arbitrary-precision rationals; there is no
//! floating point anywhere. The crate is organized bottom-up:
//!
//! - [`rational`], [`linalg`]: exact scalars and linear algebra.
//! - [`diffpoly`]: the differential polynomial ring in jet variables.
//! - [`intersect`]: an independent oracle for psi-class intersection
//!   numbers via the Dijkgraaf–Verlinde–Verlinde recursion.
//! - [`kdv`]: the loop equation, solved genus by genus for the
//!   Witten–Kontsevich free energies, plus their structural checks.
//! - [`frobenius`]: Frobenius manifold models from polynomial potentials,
//!   with the genus-0 correlator engine derived from them.
//! - [`trees`], [`operators`]: stable rooted trees, their q-assignments,
//!   and the jet-space differential operators they assemble into.
//! - [`identities`]: the universal identities tying tree operators,
//!   free energies, and correlators together, checked exactly.
//! - [`par`]: switchable data-parallel execution for the hot sweeps.

pub mod diffpoly;
pub mod frobenius;
pub mod identities;
pub mod intersect;
pub mod kdv;
pub mod linalg;
pub mod operators;
pub mod par;
pub mod rational;
pub mod trees;
