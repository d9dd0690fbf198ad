//! Small dense matrices over real and complex scalars.
//!
//! Everything here is sized for the `n ≤ 16` envelope of the crate: row-major
//! storage, no blocking, no BLAS.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex;
use num_traits::{One, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub type ComplexMatrix<T> = Matrix<Complex<T>>;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<E> {
    rows: usize,
    cols: usize,
    data: Vec<E>,
}

impl<E: Copy> Matrix<E> {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> E) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from nested rows; every row must have the same length.
    pub fn from_rows(rows: Vec<Vec<E>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|row| row.len() != c) {
            return Err(Error::Shape(format!("ragged rows: expected length {c}, found {}", bad.len())));
        }
        Ok(Self { rows: r, cols: c, data: rows.into_iter().flatten().collect() })
    }

    pub fn to_rows(&self) -> Vec<Vec<E>> {
        self.data.chunks(self.cols.max(1)).map(<[E]>::to_vec).take(self.rows).collect()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[E] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn map<F: Copy>(&self, f: impl Fn(E) -> F) -> Matrix<F> {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub(crate) fn require_square(&self) -> Result<usize> {
        if self.is_square() {
            Ok(self.rows)
        } else {
            Err(Error::Shape(format!("expected square matrix, found {}x{}", self.rows, self.cols)))
        }
    }
}

impl<E: Copy + Zero> Matrix<E> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |_, _| E::zero())
    }
}

impl<E: Copy + Zero + One> Matrix<E> {
    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { E::one() } else { E::zero() })
    }
}

impl<E: Copy + Zero + Add<Output = E> + Mul<Output = E>> Matrix<E> {
    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                for j in 0..rhs.cols {
                    out[(i, j)] = out[(i, j)] + a * rhs[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[E]) -> Vec<E> {
        assert_eq!(self.cols, v.len(), "matvec shape mismatch");
        (0..self.rows).map(|i| self.row(i).iter().zip(v).fold(E::zero(), |acc, (&a, &b)| acc + a * b)).collect()
    }
}

impl<E: Copy + Sub<Output = E>> Sub for &Matrix<E> {
    type Output = Matrix<E>;
    fn sub(self, rhs: Self) -> Matrix<E> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Matrix::from_fn(self.rows, self.cols, |i, j| self[(i, j)] - rhs[(i, j)])
    }
}

impl<E> Index<(usize, usize)> for Matrix<E> {
    type Output = E;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &E {
        &self.data[i * self.cols + j]
    }
}

impl<E> IndexMut<(usize, usize)> for Matrix<E> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut E {
        &mut self.data[i * self.cols + j]
    }
}

impl<E: Copy + Serialize> Serialize for Matrix<E> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de, E: Copy + Deserialize<'de>> Deserialize<'de> for Matrix<E> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<E>>::deserialize(d)?;
        Matrix::from_rows(rows).map_err(serde::de::Error::custom)
    }
}

impl<T: Real> Matrix<T> {
    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }

    /// Determinant by LU factorization with partial pivoting.
    pub fn determinant(&self) -> T {
        let n = self.rows;
        assert!(self.is_square(), "determinant of a non-square matrix");
        let mut a = self.clone();
        let mut det = T::one();
        for k in 0..n {
            let pivot = (k..n).max_by(|&i, &j| a[(i, k)].abs().partial_cmp(&a[(j, k)].abs()).unwrap()).unwrap();
            if a[(pivot, k)] == T::zero() {
                return T::zero();
            }
            if pivot != k {
                for j in 0..n {
                    let tmp = a[(k, j)];
                    a[(k, j)] = a[(pivot, j)];
                    a[(pivot, j)] = tmp;
                }
                det = -det;
            }
            let akk = a[(k, k)];
            det *= akk;
            for i in k + 1..n {
                let factor = a[(i, k)] / akk;
                for j in k + 1..n {
                    let v = a[(k, j)];
                    a[(i, j)] -= factor * v;
                }
            }
        }
        det
    }
}

impl<T: Real> Matrix<Complex<T>> {
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, z| m.max(z.norm()))
    }

    /// Splits into real and imaginary parts.
    pub fn parts(&self) -> (Matrix<T>, Matrix<T>) {
        (self.map(|z| z.re), self.map(|z| z.im))
    }

    pub fn from_parts(re: &Matrix<T>, im: &Matrix<T>) -> Result<Self> {
        if (re.rows, re.cols) != (im.rows, im.cols) {
            return Err(Error::Shape(format!(
                "real part is {}x{}, imaginary part is {}x{}",
                re.rows, re.cols, im.rows, im.cols
            )));
        }
        Ok(Self::from_fn(re.rows, re.cols, |i, j| Complex::new(re[(i, j)], im[(i, j)])))
    }

    /// `max(‖U†U − I‖_max, ‖UU† − I‖_max)`; infinite for non-square input.
    pub fn unitarity_residual(&self) -> T {
        if !self.is_square() {
            return T::infinity();
        }
        let id = Self::identity(self.rows);
        let left = (&self.adjoint().matmul(self) - &id).max_abs();
        let right = (&self.matmul(&self.adjoint()) - &id).max_abs();
        left.max(right)
    }

    /// `‖A − A†‖_max`; infinite for non-square input.
    pub fn hermiticity_residual(&self) -> T {
        if !self.is_square() {
            return T::infinity();
        }
        (self - &self.adjoint()).max_abs()
    }
}

/// Re/Im split used for complex matrices on the wire: `{"re": [[...]], "im": [[...]]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ComplexMatrixJson<T> {
    pub re: Matrix<T>,
    pub im: Matrix<T>,
}

impl<T: Real> From<&ComplexMatrix<T>> for ComplexMatrixJson<T> {
    fn from(m: &ComplexMatrix<T>) -> Self {
        let (re, im) = m.parts();
        Self { re, im }
    }
}

impl<T: Real> TryFrom<ComplexMatrixJson<T>> for ComplexMatrix<T> {
    type Error = Error;
    fn try_from(j: ComplexMatrixJson<T>) -> Result<Self> {
        ComplexMatrix::from_parts(&j.re, &j.im)
    }
}

/// Eigendecomposition `A = V diag(λ) V†` of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen<T> {
    /// Eigenvalues in ascending order.
    pub values: Vec<T>,
    /// Unitary matrix whose columns are the eigenvectors.
    pub vectors: ComplexMatrix<T>,
}

impl<T: Real> HermitianEigen<T> {
    /// Cyclic complex Jacobi iteration.
    ///
    /// Each rotation first rephases column `q` so the pivot is real, then applies
    /// the real Jacobi rotation that annihilates it. The input is assumed
    /// Hermitian; only its upper triangle is trusted.
    pub fn new(a: &ComplexMatrix<T>) -> Result<Self> {
        let n = a.require_square()?;
        let mut m = ComplexMatrix::from_fn(n, n, |i, j| match i.cmp(&j) {
            std::cmp::Ordering::Less => a[(i, j)],
            std::cmp::Ordering::Equal => Complex::new(a[(i, i)].re, T::zero()),
            std::cmp::Ordering::Greater => a[(j, i)].conj(),
        });
        let mut v = ComplexMatrix::<T>::identity(n);
        let scale = m.max_abs().max(T::min_positive_value());
        let eps = T::epsilon();

        for _sweep in 0..64 {
            let off: T = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| m[(i, j)].norm_sqr()).sum();
            if off.sqrt() <= eps * scale {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = m[(p, q)];
                    let b = apq.norm();
                    if b <= eps * eps * scale {
                        m[(p, q)] = Complex::zero();
                        m[(q, p)] = Complex::zero();
                        continue;
                    }
                    let phase = apq / b; // e^{iα}
                    let app = m[(p, p)].re;
                    let aqq = m[(q, q)].re;
                    let theta = (aqq - app) / (T::two() * b);
                    let t = theta.signum() / (theta.abs() + (T::one() + theta * theta).sqrt());
                    let c = T::one() / (T::one() + t * t).sqrt();
                    let s = t * c;
                    // Column rotation by V = D P with D = diag(1, e^{-iα}) on (p, q).
                    let vqp = -phase.conj() * s;
                    let vqq = phase.conj() * c;
                    for k in 0..n {
                        let mkp = m[(k, p)];
                        let mkq = m[(k, q)];
                        m[(k, p)] = mkp * c + mkq * vqp;
                        m[(k, q)] = mkp * s + mkq * vqq;
                        let ekp = v[(k, p)];
                        let ekq = v[(k, q)];
                        v[(k, p)] = ekp * c + ekq * vqp;
                        v[(k, q)] = ekp * s + ekq * vqq;
                    }
                    // Row rotation by V†.
                    for k in 0..n {
                        let mpk = m[(p, k)];
                        let mqk = m[(q, k)];
                        m[(p, k)] = mpk * c + mqk * vqp.conj();
                        m[(q, k)] = mpk * s + mqk * vqq.conj();
                    }
                    m[(p, q)] = Complex::zero();
                    m[(q, p)] = Complex::zero();
                    m[(p, p)].im = T::zero();
                    m[(q, q)].im = T::zero();
                }
            }
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| m[(i, i)].re.partial_cmp(&m[(j, j)].re).unwrap());
        let values = order.iter().map(|&i| m[(i, i)].re).collect();
        let vectors = ComplexMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
        Ok(Self { values, vectors })
    }

    /// `V diag(f(λ)) V†`.
    pub fn apply_fn(&self, f: impl Fn(T) -> Complex<T>) -> ComplexMatrix<T> {
        let n = self.values.len();
        let fl: Vec<Complex<T>> = self.values.iter().map(|&l| f(l)).collect();
        ComplexMatrix::from_fn(n, n, |i, j| {
            (0..n).fold(Complex::zero(), |acc, k| acc + self.vectors[(i, k)] * fl[k] * self.vectors[(j, k)].conj())
        })
    }

    pub fn spectral_norm(&self) -> T {
        self.values.iter().fold(T::zero(), |m, l| m.max(l.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(Matrix::from_rows(vec![vec![1.0, 2.0], vec![3.0]]).is_err());
    }

    #[test]
    fn determinant_small_cases() {
        let m = Matrix::from_rows(vec![vec![2.0f64, 1.0], vec![1.0, 3.0]]).unwrap();
        assert!((m.determinant() - 5.0).abs() < 1e-14);
        let p = Matrix::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(p.determinant(), -1.0);
        let s = Matrix::from_rows(vec![vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert_eq!(s.determinant(), 0.0);
    }

    #[test]
    fn pauli_y_eigen() {
        let sy = ComplexMatrix::from_rows(vec![vec![c(0., 0.), c(0., -1.)], vec![c(0., 1.), c(0., 0.)]]).unwrap();
        let e = HermitianEigen::new(&sy).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
        let back = e.apply_fn(|l| c(l, 0.0));
        assert!((&back - &sy).max_abs() < 1e-14);
        assert!(e.vectors.unitarity_residual() < 1e-14);
    }

    #[test]
    fn eigen_reconstructs_dense_hermitian() {
        let rows = vec![
            vec![c(1.0, 0.0), c(0.5, 0.3), c(-0.2, 0.9), c(0.0, 0.1)],
            vec![c(0.5, -0.3), c(-2.0, 0.0), c(0.4, 0.0), c(1.1, -0.7)],
            vec![c(-0.2, -0.9), c(0.4, 0.0), c(0.3, 0.0), c(0.25, 0.25)],
            vec![c(0.0, -0.1), c(1.1, 0.7), c(0.25, -0.25), c(0.8, 0.0)],
        ];
        let a = ComplexMatrix::from_rows(rows).unwrap();
        assert!(a.hermiticity_residual() < 1e-15);
        let e = HermitianEigen::new(&a).unwrap();
        let back = e.apply_fn(|l| c(l, 0.0));
        assert!((&back - &a).max_abs() < 1e-13);
        assert!(e.vectors.unitarity_residual() < 1e-13);
        // trace is the eigenvalue sum
        let tr: f64 = (0..4).map(|i| a[(i, i)].re).sum();
        assert!((e.values.iter().sum::<f64>() - tr).abs() < 1e-13);
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn degenerate_spectrum() {
        let a = ComplexMatrix::<f64>::identity(3);
        let e = HermitianEigen::new(&a).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn json_shape() {
        let m = ComplexMatrix::from_rows(vec![vec![c(1.0, 2.0)], vec![c(3.0, -4.0)]]).unwrap();
        let j = serde_json::to_string(&ComplexMatrixJson::from(&m)).unwrap();
        assert_eq!(j, r#"{"re":[[1.0],[3.0]],"im":[[2.0],[-4.0]]}"#);
        let back: ComplexMatrixJson<f64> = serde_json::from_str(&j).unwrap();
        assert_eq!(ComplexMatrix::try_from(back).unwrap(), m);
    }
}
