//! Discrete Riemann surfaces on quad-graphs.
//!
//! A surface is a cellular complex whose faces are quadrilaterals with a
//! bipartite vertex colouring. The diagonals of the quads form two dual
//! graphs Γ (primal) and Γ* (dual); their disjoint union Λ carries a
//! Hodge star built from positive edge weights ρ.
//!
//! Layout:
//! - [`cellular`]: complexes, chains, cochains, generators, JSON.
//! - [`calculus`]: Hodge star, Laplacian, wedge products, averaging, energies.
//! - [`homology`]: cycle bases, intersection numbers, harmonic bases.
//! - [`periods`]: Gram blocks, holomorphic bases, period matrices.
//! - [`critical`]: rhombic maps, discrete exponentials, polynomials, Green function.
//! - [`integrable`]: cross-ratios, Hirota system, Bäcklund transforms, transfer matrices.
//! - [`verify`]: invariant suites with pass/fail reports.

pub mod calculus;
pub mod cellular;
pub mod critical;
pub mod error;
pub mod homology;
pub mod integrable;
pub mod linalg;
pub mod periods;
pub mod solver;
pub mod verify;

pub use cellular::{Chain, Cochain, Color, ComplexTag, QuadComplex};
pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
