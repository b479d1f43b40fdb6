//! Graph-energy centrality (GEC) of Fock-space graphs.
//!
//! A Hamiltonian written in a computational basis is a weighted graph: basis
//! states are nodes, off-diagonal matrix elements are edges and diagonal
//! elements are self-loops. The GEC of a node measures how much of the
//! spectral width `Tr H̃²` flows through it. This crate evaluates it exactly
//! per state, in closed form for random-matrix ensembles, and through an exact
//! moment engine for a constrained lattice gas at sizes far beyond exact
//! diagonalization.

// Negated comparisons are how parameter checks reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod diagnostics;
pub mod ensemble;
pub mod error;
pub mod fock;
pub mod io;
pub mod models;
pub mod numerics;
pub mod tlg_moments;

pub use error::{GecError, Result};
pub use fock::{gec_exact, gec_offdiag_form, BasisSpec, FockBasis, GecVector, SparseHamiltonian};
pub use numerics::RngStream;
