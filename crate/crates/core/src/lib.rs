//! Quantum preparations as points of a classical phase space: probabilities
//! and phases, frame changes between bases, the line element, and
//! Hamiltonian flow in these coordinates, with a Hilbert-space oracle for
//! cross-checking.
//!
//! Everything is generic over the scalar (`f32` or `f64`); the `*F64` aliases
//! at the crate root fix it to `f64`.

// `!(x >= 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bloch2;
pub mod dynamics;
pub mod error;
pub mod frame_transform;
pub mod hilbert_oracle;
pub mod io;
pub mod linalg;
pub mod metric;
pub mod operator;
pub mod prep_state;
pub mod random;
pub mod scalar;
pub mod verify;

pub use error::{Error, Result};
pub use frame_transform::FrameChange;
pub use hilbert_oracle::AmplitudeVector;
pub use linalg::{ComplexMatrix, Matrix};
pub use operator::HermitianOperator;
pub use prep_state::{CartesianChart, Preparation, TangentDisplacement};
pub use scalar::Real;

pub type PreparationF64 = Preparation<f64>;
pub type TangentDisplacementF64 = TangentDisplacement<f64>;
pub type FrameChangeF64 = FrameChange<f64>;
pub type HermitianOperatorF64 = HermitianOperator<f64>;
pub type AmplitudeVectorF64 = AmplitudeVector<f64>;
