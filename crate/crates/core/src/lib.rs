//! Multidimensional continued fraction algorithms, their natural extensions
//! and invariant densities.
//!
//! Every numeric routine is generic over [`Scalar`], implemented for `f32`,
//! `f64` and exact rationals ([`Rational`]).

pub mod algorithms;
pub mod brun_highdim;
pub mod cone;
pub mod density;
pub mod dilog;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod natext;
pub mod perm;
pub mod quad;
pub mod rng;
pub mod scalar;

pub use algorithms::{AlgorithmKind, AlgorithmSpec, Branch, BranchId, FloatKernel, InverseBranch};
pub use cone::{Cone, Membership};
pub use error::{McfError, Result};
pub use linalg::{normalize_l1, scalar_product, ConeVector, SquareMatrix};
pub use scalar::Scalar;

pub type Rational = num_rational::BigRational;

pub type ConeVectorF64 = ConeVector<f64>;
pub type ConeVectorQ = ConeVector<Rational>;
pub type MatrixF64 = SquareMatrix<f64>;
pub type MatrixQ = SquareMatrix<Rational>;
