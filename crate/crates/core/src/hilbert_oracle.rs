//! Reference quantum mechanics in complex amplitudes.
//!
//! Everything the canonical modules compute has an independent counterpart
//! here: basis changes are matrix–vector products, time evolution is the
//! exponential of a Hermitian eigendecomposition, and observable rates come
//! from commutators. None of it goes through the `(p, φ)` chart.

use num_complex::Complex;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::frame_transform::FRAME_TOL;
use crate::linalg::{ComplexMatrix, HermitianEigen};
pub use crate::operator::HermitianOperator;
use crate::prep_state::{check_dim, check_probabilities, Preparation, EPS_P};
use crate::scalar::{tol, Real};

/// Normalized state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeVector<T> {
    amplitudes: Vec<Complex<T>>,
}

impl<T: Real> AmplitudeVector<T> {
    pub fn new(amplitudes: Vec<Complex<T>>) -> Result<Self> {
        let norm: T = amplitudes.iter().map(Complex::norm_sqr).sum();
        if (norm - T::one()).abs() > tol(1e-9) {
            return Err(Error::NotNormalized { sum: norm.as_f64() });
        }
        Ok(Self { amplitudes })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amplitudes
    }

    pub fn inner(&self, other: &Self) -> Complex<T> {
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn with_global_phase(&self, theta: T) -> Self {
        let g = Complex::from_polar(T::one(), theta);
        Self { amplitudes: self.amplitudes.iter().map(|a| a * g).collect() }
    }
}

/// `ψ_i = √p_i e^{iφ_i}`.
pub fn to_amplitudes<T: Real>(s: &Preparation<T>) -> AmplitudeVector<T> {
    AmplitudeVector { amplitudes: s.p().iter().zip(s.phi()).map(|(&p, &f)| Complex::from_polar(p.sqrt(), f)).collect() }
}

/// `p_i = |ψ_i|²`, `φ_i = arg ψ_i` (0 where `|ψ_i|² < ε_p`).
pub fn to_preparation<T: Real>(v: &AmplitudeVector<T>) -> Result<Preparation<T>> {
    let eps = T::of(EPS_P);
    let (p, phi): (Vec<T>, Vec<T>) = v
        .amplitudes
        .iter()
        .map(|a| {
            let p = a.norm_sqr();
            (p, if p < eps { T::zero() } else { a.arg() })
        })
        .unzip();
    check_probabilities(&p)?;
    Preparation::new(p, phi)
}

/// `ψ'_i = Σ_j u*_ji ψ_j`, i.e. `ψ' = U† ψ` with `u_ij = ⟨i|j'⟩`.
pub fn apply_unitary<T: Real>(u: &ComplexMatrix<T>, v: &AmplitudeVector<T>) -> Result<AmplitudeVector<T>> {
    let n = u.require_square()?;
    check_dim(n, v.dim())?;
    let residual = u.unitarity_residual();
    if !(residual <= tol(FRAME_TOL)) {
        return Err(Error::NotUnitary { residual: residual.as_f64() });
    }
    let amplitudes =
        (0..n).map(|i| (0..n).fold(Complex::zero(), |acc, j| acc + u[(j, i)].conj() * v.amplitudes[j])).collect();
    Ok(AmplitudeVector { amplitudes })
}

/// `e^{−iHt}` built once from the eigendecomposition of `H`.
#[derive(Debug, Clone)]
pub struct Propagator<T> {
    eigen: HermitianEigen<T>,
}

impl<T: Real> Propagator<T> {
    pub fn new(h: &HermitianOperator<T>) -> Self {
        Self { eigen: h.eigen() }
    }

    pub fn unitary(&self, t: T) -> ComplexMatrix<T> {
        self.eigen.apply_fn(|l| Complex::from_polar(T::one(), -l * t))
    }

    /// Applies `e^{−iHt}` to an arbitrary (not necessarily normalized) vector.
    pub fn evolve_raw(&self, v: &[Complex<T>], t: T) -> Vec<Complex<T>> {
        let n = v.len();
        let vecs = &self.eigen.vectors;
        // coefficients in the eigenbasis, phase-advanced, mapped back
        let coeffs: Vec<Complex<T>> = (0..n)
            .map(|k| {
                let c = (0..n).fold(Complex::new(T::zero(), T::zero()), |acc, i| acc + vecs[(i, k)].conj() * v[i]);
                c * Complex::from_polar(T::one(), -self.eigen.values[k] * t)
            })
            .collect();
        (0..n)
            .map(|i| (0..n).fold(Complex::new(T::zero(), T::zero()), |acc, k| acc + vecs[(i, k)] * coeffs[k]))
            .collect()
    }

    pub fn evolve(&self, v: &AmplitudeVector<T>, t: T) -> AmplitudeVector<T> {
        AmplitudeVector { amplitudes: self.evolve_raw(&v.amplitudes, t) }
    }
}

/// `ψ(t) = e^{−iHt} ψ₀`.
pub fn propagate<T: Real>(h: &HermitianOperator<T>, v0: &AmplitudeVector<T>, t: T) -> Result<AmplitudeVector<T>> {
    check_dim(h.dim(), v0.dim())?;
    Ok(Propagator::new(h).evolve(v0, t))
}

fn expectation_complex<T: Real>(a: &ComplexMatrix<T>, v: &[Complex<T>]) -> Complex<T> {
    let av = a.matvec(v);
    v.iter().zip(&av).map(|(x, y)| x.conj() * y).sum()
}

fn require_real<T: Real>(z: Complex<T>, scale: T) -> Result<T> {
    if z.im.abs() > tol::<T>(1e-12) * scale.max(T::one()) {
        return Err(Error::NotHermitian { residual: z.im.abs().as_f64() });
    }
    Ok(z.re)
}

/// `⟨ψ|F|ψ⟩`.
pub fn expectation<T: Real>(f: &HermitianOperator<T>, v: &AmplitudeVector<T>) -> Result<T> {
    check_dim(f.dim(), v.dim())?;
    require_real(expectation_complex(&f.matrix, &v.amplitudes), f.matrix.max_abs())
}

/// `(1/i) ⟨ψ|[F, H]|ψ⟩`.
pub fn commutator_rate<T: Real>(
    f: &HermitianOperator<T>,
    h: &HermitianOperator<T>,
    v: &AmplitudeVector<T>,
) -> Result<T> {
    check_dim(f.dim(), v.dim())?;
    check_dim(h.dim(), v.dim())?;
    let comm = &f.matrix.matmul(&h.matrix) - &h.matrix.matmul(&f.matrix);
    let z = expectation_complex(&comm, &v.amplitudes) * Complex::new(T::zero(), -T::one());
    require_real(z, comm.max_abs())
}
