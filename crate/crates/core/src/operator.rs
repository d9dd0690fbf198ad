use num_complex::Complex;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, ComplexMatrixJson, HermitianEigen};
use crate::prep_state::check_dim;
use crate::scalar::{tol, Real};

/// Hermiticity tolerance, relative to `max(1, max|A_ij|)`.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Hermitian operator: a Hamiltonian (units of 1/time, ħ = 1) or an observable.
/// Serialized as `{"re": [[..]], "im": [[..]]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ComplexMatrixJson<T>", into = "ComplexMatrixJson<T>", bound = "T: Real")]
pub struct HermitianOperator<T> {
    pub(crate) matrix: ComplexMatrix<T>,
}

impl<T: Real> HermitianOperator<T> {
    pub fn new(matrix: ComplexMatrix<T>) -> Result<Self> {
        matrix.require_square()?;
        let residual = matrix.hermiticity_residual();
        let scale = matrix.max_abs().max(T::one());
        if !(residual <= tol::<T>(HERMITIAN_TOL) * scale) {
            return Err(Error::NotHermitian { residual: residual.as_f64() });
        }
        Ok(Self { matrix })
    }

    pub fn diagonal(energies: &[T]) -> Self {
        let n = energies.len();
        Self {
            matrix: ComplexMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    Complex::new(energies[i], T::zero())
                } else {
                    Complex::zero()
                }
            }),
        }
    }

    pub fn zero(n: usize) -> Self {
        Self { matrix: ComplexMatrix::zeros(n, n) }
    }

    pub fn pauli_x() -> Self {
        Self::from_real_rows(&[[0.0, 1.0], [1.0, 0.0]])
    }

    pub fn pauli_y() -> Self {
        let (o, i) = (Complex::zero(), Complex::new(T::zero(), T::one()));
        Self { matrix: ComplexMatrix::from_rows(vec![vec![o, -i], vec![i, o]]).unwrap() }
    }

    pub fn pauli_z() -> Self {
        Self::from_real_rows(&[[1.0, 0.0], [0.0, -1.0]])
    }

    fn from_real_rows<const N: usize>(rows: &[[f64; N]; N]) -> Self {
        Self { matrix: ComplexMatrix::from_fn(N, N, |i, j| Complex::new(T::of(rows[i][j]), T::zero())) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix<T> {
        &self.matrix
    }

    pub fn apply(&self, v: &[Complex<T>]) -> Vec<Complex<T>> {
        self.matrix.matvec(v)
    }

    /// `U† A U`: the operator as seen from the frame `u_ij = ⟨i|j'⟩`.
    pub fn in_frame(&self, u: &ComplexMatrix<T>) -> Result<Self> {
        check_dim(self.dim(), u.rows())?;
        Self::new(u.adjoint().matmul(&self.matrix).matmul(u))
    }

    pub fn eigen(&self) -> HermitianEigen<T> {
        HermitianEigen::new(&self.matrix).expect("square by construction")
    }

    pub fn is_diagonal(&self) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..n).all(|j| i == j || self.matrix[(i, j)] == Complex::zero()))
    }
}

impl<T: Real> TryFrom<ComplexMatrixJson<T>> for HermitianOperator<T> {
    type Error = Error;

    fn try_from(j: ComplexMatrixJson<T>) -> Result<Self> {
        Self::new(ComplexMatrix::try_from(j)?)
    }
}

impl<T: Real> From<HermitianOperator<T>> for ComplexMatrixJson<T> {
    fn from(h: HermitianOperator<T>) -> Self {
        ComplexMatrixJson::from(&h.matrix)
    }
}
