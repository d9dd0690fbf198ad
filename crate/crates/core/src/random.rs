//! Seeded generators for test cases: Haar unitaries, Hermitian operators,
//! interior preparations and tangent displacements.
//!
//! Sampling is done in `f64` and converted, so a given seed produces the same
//! case for every scalar type.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::linalg::{ComplexMatrix, HermitianEigen};
use crate::prep_state::{Preparation, TangentDisplacement};
use crate::scalar::Real;

pub type CaseRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> CaseRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex<f64> {
    Complex::new(normal(rng), normal(rng))
}

/// Haar-distributed unitary.
///
/// Modified Gram–Schmidt on the columns of a complex Gaussian matrix. Each
/// column is normalized by a positive real, so the implied `R` factor has a
/// positive diagonal and no extra phase correction is needed.
pub fn haar_unitary<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix<T> {
    loop {
        let mut cols: Vec<Vec<Complex<f64>>> = (0..n).map(|_| (0..n).map(|_| complex_normal(rng)).collect()).collect();
        let mut degenerate = false;
        for k in 0..n {
            for _pass in 0..2 {
                for j in 0..k {
                    let proj: Complex<f64> = cols[j].iter().zip(&cols[k]).map(|(a, b)| a.conj() * b).sum();
                    let qj = cols[j].clone();
                    for (x, q) in cols[k].iter_mut().zip(&qj) {
                        *x -= proj * q;
                    }
                }
            }
            let norm = cols[k].iter().map(Complex::norm_sqr).sum::<f64>().sqrt();
            if norm < 1e-8 {
                degenerate = true;
                break;
            }
            cols[k].iter_mut().for_each(|x| *x /= norm);
        }
        if !degenerate {
            return ComplexMatrix::from_fn(n, n, |i, j| Complex::new(T::of(cols[j][i].re), T::of(cols[j][i].im)));
        }
    }
}

/// Hermitian matrix from the Gaussian unitary ensemble, rescaled so that its
/// spectral norm equals `spectral_norm`.
pub fn random_hermitian<T: Real, R: Rng + ?Sized>(n: usize, spectral_norm: f64, rng: &mut R) -> ComplexMatrix<T> {
    let g = ComplexMatrix::from_fn(n, n, |_, _| complex_normal(rng));
    let h = ComplexMatrix::from_fn(n, n, |i, j| (g[(i, j)] + g[(j, i)].conj()) * 0.5);
    let norm = HermitianEigen::new(&h).expect("square").spectral_norm();
    let scale = if norm > 0.0 { spectral_norm / norm } else { 0.0 };
    h.map(|z| Complex::new(T::of(z.re * scale), T::of(z.im * scale)))
}

/// Uniform (Dirichlet(1)) probabilities conditioned on `min p ≥ floor`, with
/// uniform phases.
pub fn random_preparation<T: Real, R: Rng + ?Sized>(n: usize, floor: f64, rng: &mut R) -> Preparation<T> {
    assert!(floor * (n as f64) < 0.5, "floor too large for n = {n}");
    loop {
        let e: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
        let total: f64 = e.iter().sum();
        let p: Vec<f64> = e.iter().map(|x| x / total).collect();
        if p.iter().all(|&x| x >= floor) {
            let phi = (0..n).map(|_| T::of(rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)));
            return Preparation::new(p.into_iter().map(T::of).collect(), phi.collect())
                .expect("normalized by construction");
        }
    }
}

/// Tangent displacement with `dp_i = p_i (g_i − Σ_k p_k g_k)`, so that
/// `|dp_i| ≲ p_i` and `Σ dp = 0`; `dφ` is standard normal.
pub fn random_tangent<T: Real, R: Rng + ?Sized>(s: &Preparation<T>, rng: &mut R) -> TangentDisplacement<T> {
    let p: Vec<f64> = s.p().iter().map(|x| x.as_f64()).collect();
    let g: Vec<f64> = p.iter().map(|_| 0.5 * normal(rng)).collect();
    let mean: f64 = p.iter().zip(&g).map(|(p, g)| p * g).sum();
    let dp: Vec<f64> = p.iter().zip(&g).map(|(p, g)| p * (g - mean)).collect();
    // Remove the residual sum from the largest component.
    let sum: f64 = dp.iter().sum();
    let imax = (0..dp.len()).max_by(|&i, &j| p[i].partial_cmp(&p[j]).unwrap()).unwrap();
    let mut dp = dp;
    dp[imax] -= sum;
    let dphi = p.iter().map(|_| T::of(normal(rng))).collect();
    TangentDisplacement::new(dp.into_iter().map(T::of).collect(), dphi).expect("tangent by construction")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn haar_is_unitary_and_deterministic() {
        for n in 1..=8 {
            let u: ComplexMatrix<f64> = haar_unitary(n, &mut seeded(n as u64));
            assert!(u.unitarity_residual() < 1e-13, "n = {n}");
            let v: ComplexMatrix<f64> = haar_unitary(n, &mut seeded(n as u64));
            assert_eq!(u, v);
        }
    }

    #[test]
    fn hermitian_has_requested_norm() {
        let h: ComplexMatrix<f64> = random_hermitian(5, 2.0, &mut seeded(3));
        assert!(h.hermiticity_residual() == 0.0);
        let e = HermitianEigen::new(&h).unwrap();
        assert!((e.spectral_norm() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn interior_preparations_respect_floor() {
        let mut rng = seeded(9);
        for _ in 0..200 {
            let s: Preparation<f64> = random_preparation(4, 1e-3, &mut rng);
            assert!(s.p().iter().all(|&p| p >= 1e-3));
            let d = random_tangent(&s, &mut rng);
            assert!(d.dp.iter().sum::<f64>().abs() < 1e-15);
        }
    }
}
