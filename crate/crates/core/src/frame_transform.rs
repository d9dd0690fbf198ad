//! Changes of measurement context.
//!
//! A [`FrameChange`] is the pair of `n×n` matrices `(w, β)` of conditional
//! probabilities and phase offsets. It acts on a preparation through
//!
//! ```text
//! √p'_i (cos φ'_i, sin φ'_i) = Σ_j √(w_ij p_j) (cos, sin)(φ_j − β_ij)
//! ```
//!
//! and is admissible when the orthogonality constraints checked by
//! [`validate_frame`] hold. Admissible frames are exactly the unitary matrices
//! via `u_ji = √w_ij e^{iβ_ij}`, and the action above is `ψ'_i = Σ_j u*_ji ψ_j`.
//! Consequently `apply(f2, apply(f1, s)) = apply(frame(u1·u2), s)`, see [`compose`].

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, Matrix};
use crate::prep_state::{check_dim, check_probabilities, polar_from_cartesian, CartesianChart, Preparation};
use crate::random;
use crate::scalar::{tol, wrap_angle, Real};

/// Accepted constraint residual for an admissible frame.
pub const FRAME_TOL: f64 = 1e-10;

/// Minimum probability, before and after the transform, at which the Jacobian is evaluated.
pub const JACOBIAN_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FrameJson<T>", into = "FrameJson<T>", bound = "T: Real")]
pub struct FrameChange<T> {
    w: Matrix<T>,
    beta: Matrix<T>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Real")]
struct FrameJson<T> {
    w: Matrix<T>,
    beta: Matrix<T>,
}

impl<T: Real> TryFrom<FrameJson<T>> for FrameChange<T> {
    type Error = Error;
    fn try_from(j: FrameJson<T>) -> Result<Self> {
        FrameChange::new(j.w, j.beta)
    }
}

impl<T: Real> From<FrameChange<T>> for FrameJson<T> {
    fn from(f: FrameChange<T>) -> Self {
        Self { w: f.w, beta: f.beta }
    }
}

impl<T: Real> FrameChange<T> {
    /// Shape and sign checks only; admissibility is reported by [`validate_frame`].
    pub fn new(w: Matrix<T>, beta: Matrix<T>) -> Result<Self> {
        let n = w.require_square()?;
        if (beta.rows(), beta.cols()) != (n, n) {
            return Err(Error::Shape(format!("w is {n}x{n} but beta is {}x{}", beta.rows(), beta.cols())));
        }
        if n < 2 {
            return Err(Error::DimensionTooSmall(n));
        }
        for i in 0..n {
            for j in 0..n {
                if w[(i, j)] < T::zero() || w[(i, j)].is_nan() {
                    return Err(Error::NegativeProbability { index: i * n + j, value: w[(i, j)].as_f64() });
                }
            }
        }
        Ok(Self { w, beta })
    }

    pub fn dim(&self) -> usize {
        self.w.rows()
    }

    pub fn w(&self) -> &Matrix<T> {
        &self.w
    }

    pub fn beta(&self) -> &Matrix<T> {
        &self.beta
    }

    pub fn identity(n: usize) -> Self {
        Self { w: Matrix::identity(n), beta: Matrix::zeros(n, n) }
    }

    /// `u_ji = √w_ij e^{iβ_ij}`.
    pub fn to_unitary(&self) -> ComplexMatrix<T> {
        ComplexMatrix::from_fn(self.dim(), self.dim(), |j, i| {
            Complex::from_polar(self.w[(i, j)].sqrt(), self.beta[(i, j)])
        })
    }

    /// Raw coordinate map `(p, φ) → (p', φ')` on unnormalized inputs.
    ///
    /// Terms with `w_ij = 0` are skipped. Output phases come from the
    /// two-argument arctangent and are 0 where `p'_i < ε_p`.
    pub fn map_coordinates(&self, p: &[T], phi: &[T]) -> (Vec<T>, Vec<T>) {
        let (x, y) = self.map_cartesian(p, phi);
        polar_from_cartesian(&x, &y).expect("equal lengths")
    }

    fn map_cartesian(&self, p: &[T], phi: &[T]) -> (Vec<T>, Vec<T>) {
        let n = self.dim();
        let mut x = vec![T::zero(); n];
        let mut y = vec![T::zero(); n];
        for i in 0..n {
            for j in 0..n {
                let w = self.w[(i, j)];
                if w == T::zero() {
                    continue;
                }
                let amp = (w * p[j]).sqrt();
                let (sin, cos) = (phi[j] - self.beta[(i, j)]).sin_cos();
                x[i] += amp * cos;
                y[i] += amp * sin;
            }
        }
        (x, y)
    }

    fn require_valid(&self) -> Result<()> {
        let r = validate_frame(self).max_residual;
        if !(r <= tol(FRAME_TOL)) {
            return Err(Error::InvalidFrame { residual: r.as_f64() });
        }
        Ok(())
    }
}

/// Residuals of every admissibility constraint of a frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintReport<T> {
    /// `max_j |Σ_i w_ij − 1|`.
    pub column_sums: T,
    /// `max_j |Σ_i w_ji − 1|`.
    pub row_sums: T,
    /// `max_{j≠k} |Σ_i √(w_ij w_ik) (cos, sin)(β_ik − β_ij)|`.
    pub column_orthogonality: T,
    /// `max_{j≠k} |Σ_i √(w_ji w_ki) (cos, sin)(β_ki − β_ji)|`.
    pub row_orthogonality: T,
    pub max_residual: T,
}

impl<T: Real> ConstraintReport<T> {
    pub fn is_valid(&self) -> bool {
        self.max_residual <= tol(FRAME_TOL)
    }
}

pub fn validate_frame<T: Real>(f: &FrameChange<T>) -> ConstraintReport<T> {
    let n = f.dim();
    let w = &f.w;
    let b = &f.beta;
    let mut column_sums = T::zero();
    let mut row_sums = T::zero();
    for j in 0..n {
        let col: T = (0..n).map(|i| w[(i, j)]).sum();
        let row: T = (0..n).map(|i| w[(j, i)]).sum();
        column_sums = column_sums.max((col - T::one()).abs());
        row_sums = row_sums.max((row - T::one()).abs());
    }
    let mut column_orthogonality = T::zero();
    let mut row_orthogonality = T::zero();
    for j in 0..n {
        for k in 0..n {
            if j == k {
                continue;
            }
            let (mut cc, mut cs, mut rc, mut rs) = (T::zero(), T::zero(), T::zero(), T::zero());
            for i in 0..n {
                let a = (w[(i, j)] * w[(i, k)]).sqrt();
                let (s, c) = (b[(i, k)] - b[(i, j)]).sin_cos();
                cc += a * c;
                cs += a * s;
                let a = (w[(j, i)] * w[(k, i)]).sqrt();
                let (s, c) = (b[(k, i)] - b[(j, i)]).sin_cos();
                rc += a * c;
                rs += a * s;
            }
            column_orthogonality = column_orthogonality.max(cc.abs()).max(cs.abs());
            row_orthogonality = row_orthogonality.max(rc.abs()).max(rs.abs());
        }
    }
    let max_residual = column_sums.max(row_sums).max(column_orthogonality).max(row_orthogonality);
    ConstraintReport { column_sums, row_sums, column_orthogonality, row_orthogonality, max_residual }
}

/// `w_ij = |u_ji|²`, `β_ij = arg u_ji` (0 where `u_ji = 0`).
pub fn frame_from_unitary<T: Real>(u: &ComplexMatrix<T>) -> Result<FrameChange<T>> {
    let n = u.require_square()?;
    let residual = u.unitarity_residual();
    if !(residual <= tol(FRAME_TOL)) {
        return Err(Error::NotUnitary { residual: residual.as_f64() });
    }
    let w = Matrix::from_fn(n, n, |i, j| u[(j, i)].norm_sqr());
    let beta = Matrix::from_fn(n, n, |i, j| if w[(i, j)] == T::zero() { T::zero() } else { u[(j, i)].arg() });
    FrameChange::new(w, beta)
}

/// Frame equivalent to applying `first` and then `second`.
pub fn compose<T: Real>(first: &FrameChange<T>, second: &FrameChange<T>) -> Result<FrameChange<T>> {
    check_dim(first.dim(), second.dim())?;
    frame_from_unitary(&first.to_unitary().matmul(&second.to_unitary()))
}

pub fn apply_frame<T: Real>(f: &FrameChange<T>, s: &Preparation<T>) -> Result<Preparation<T>> {
    check_dim(f.dim(), s.dim())?;
    f.require_valid()?;
    let (p, phi) = f.map_coordinates(s.p(), s.phi());
    check_probabilities(&p)?;
    Ok(Preparation::from_parts_unchecked(p, phi))
}

/// Transformed probabilities split into classical mixing `Σ_j w_ij p_j` and
/// the interference remainder.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct ProbabilitySplit<T> {
    pub transformed: Preparation<T>,
    pub classical: Vec<T>,
    pub interference: Vec<T>,
}

pub fn probability_split<T: Real>(f: &FrameChange<T>, s: &Preparation<T>) -> Result<ProbabilitySplit<T>> {
    let transformed = apply_frame(f, s)?;
    let n = f.dim();
    let classical: Vec<T> = (0..n).map(|i| (0..n).map(|j| f.w[(i, j)] * s.p()[j]).sum()).collect();
    let interference = transformed.p().iter().zip(&classical).map(|(&p, &c)| p - c).collect();
    Ok(ProbabilitySplit { transformed, classical, interference })
}

/// Real-pair coefficients `a_ij = √w_ij cos β_ij`, `b_ij = √w_ij sin β_ij` acting as
/// `x' = a x + b y`, `y' = −b x + a y`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealPairTransform<T> {
    pub a: Matrix<T>,
    pub b: Matrix<T>,
}

impl<T: Real> RealPairTransform<T> {
    pub fn dim(&self) -> usize {
        self.a.rows()
    }

    pub fn apply(&self, c: &CartesianChart<T>) -> Result<CartesianChart<T>> {
        check_dim(self.dim(), c.x.len())?;
        let ax = self.a.matvec(&c.x);
        let by = self.b.matvec(&c.y);
        let bx = self.b.matvec(&c.x);
        let ay = self.a.matvec(&c.y);
        Ok(CartesianChart {
            x: ax.iter().zip(&by).map(|(&p, &q)| p + q).collect(),
            y: ay.iter().zip(&bx).map(|(&p, &q)| p - q).collect(),
        })
    }
}

pub fn to_real_pair<T: Real>(f: &FrameChange<T>) -> RealPairTransform<T> {
    let n = f.dim();
    let a = Matrix::from_fn(n, n, |i, j| f.w[(i, j)].sqrt() * f.beta[(i, j)].cos());
    let b = Matrix::from_fn(n, n, |i, j| f.w[(i, j)].sqrt() * f.beta[(i, j)].sin());
    RealPairTransform { a, b }
}

/// Residuals of the real-pair constraints, in column form and transposed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealPairReport<T> {
    /// `Σ_i (a_ij a_ik + b_ij b_ik) = δ_jk`.
    pub column_orthonormality: T,
    /// `Σ_i (a_ij b_ik − b_ij a_ik) = 0`.
    pub column_symmetry: T,
    /// `Σ_i (a_ji a_ki + b_ji b_ki) = δ_jk`.
    pub row_orthonormality: T,
    /// `Σ_i (a_ji b_ki − b_ji a_ki) = 0`.
    pub row_symmetry: T,
    pub max_residual: T,
}

pub fn real_pair_validate<T: Real>(t: &RealPairTransform<T>) -> RealPairReport<T> {
    let n = t.dim();
    let (a, b) = (&t.a, &t.b);
    let mut r = [T::zero(); 4];
    for j in 0..n {
        for k in 0..n {
            let delta = if j == k { T::one() } else { T::zero() };
            let mut s = [T::zero(); 4];
            for i in 0..n {
                s[0] += a[(i, j)] * a[(i, k)] + b[(i, j)] * b[(i, k)];
                s[1] += a[(i, j)] * b[(i, k)] - b[(i, j)] * a[(i, k)];
                s[2] += a[(j, i)] * a[(k, i)] + b[(j, i)] * b[(k, i)];
                s[3] += a[(j, i)] * b[(k, i)] - b[(j, i)] * a[(k, i)];
            }
            r[0] = r[0].max((s[0] - delta).abs());
            r[1] = r[1].max(s[1].abs());
            r[2] = r[2].max((s[2] - delta).abs());
            r[3] = r[3].max(s[3].abs());
        }
    }
    RealPairReport {
        column_orthonormality: r[0],
        column_symmetry: r[1],
        row_orthonormality: r[2],
        row_symmetry: r[3],
        max_residual: r.iter().copied().fold(T::zero(), T::max),
    }
}

/// Jacobian `M` of `(p, φ) → (p', φ')` together with the symplectic unit `J`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticMatrices<T> {
    /// Blocks `[[∂p'/∂p, ∂p'/∂φ], [∂φ'/∂p, ∂φ'/∂φ]]`.
    pub m: Matrix<T>,
    /// `[[0, I], [−I, 0]]`.
    pub j: Matrix<T>,
}

impl<T: Real> SymplecticMatrices<T> {
    /// `‖M J Mᵀ − J‖_max`.
    pub fn residual(&self) -> T {
        let mjm = self.m.matmul(&self.j).matmul(&self.m.transpose());
        (&mjm - &self.j).max_abs()
    }
}

pub fn symplectic_unit<T: Real>(n: usize) -> Matrix<T> {
    Matrix::from_fn(2 * n, 2 * n, |r, c| {
        if c == r + n {
            T::one()
        } else if r == c + n {
            -T::one()
        } else {
            T::zero()
        }
    })
}

/// Closed-form Jacobian of the frame action at an interior preparation.
///
/// With `C_ij + i S_ij = Σ_k √(w_ij p_j) √(w_ik p_k) e^{i(φ_j − φ_k − β_ij + β_ik)}`
/// and `p'_i = Σ_k C_ik`:
/// `∂p'_i/∂p_j = C_ij/p_j`, `∂p'_i/∂φ_j = −2 S_ij`,
/// `∂φ'_i/∂p_j = S_ij / (2 p_j p'_i)`, `∂φ'_i/∂φ_j = C_ij / p'_i`.
pub fn frame_jacobian<T: Real>(f: &FrameChange<T>, s: &Preparation<T>) -> Result<SymplecticMatrices<T>> {
    check_dim(f.dim(), s.dim())?;
    f.require_valid()?;
    let floor = T::of(JACOBIAN_FLOOR);
    s.require_interior(floor)?;
    let n = f.dim();
    let (p, phi) = (s.p(), s.phi());
    let mut c = Matrix::<T>::zeros(n, n);
    let mut sm = Matrix::<T>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let aj = (f.w[(i, j)] * p[j]).sqrt();
            for k in 0..n {
                let ak = (f.w[(i, k)] * p[k]).sqrt();
                let (sin, cos) = (phi[j] - phi[k] - f.beta[(i, j)] + f.beta[(i, k)]).sin_cos();
                c[(i, j)] += aj * ak * cos;
                sm[(i, j)] += aj * ak * sin;
            }
        }
    }
    let p_new: Vec<T> = (0..n).map(|i| (0..n).map(|k| c[(i, k)]).sum()).collect();
    if let Some((index, &value)) = p_new.iter().enumerate().find(|(_, &v)| v < floor) {
        return Err(Error::BoundaryState { index, value: value.as_f64() });
    }
    let mut m = Matrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = c[(i, j)] / p[j];
            m[(i, n + j)] = -T::two() * sm[(i, j)];
            m[(n + i, j)] = sm[(i, j)] / (T::two() * p[j] * p_new[i]);
            m[(n + i, n + j)] = c[(i, j)] / p_new[i];
        }
    }
    Ok(SymplecticMatrices { m, j: symplectic_unit(n) })
}

/// Central-difference Jacobian of the frame action, same block layout as
/// [`frame_jacobian`]. Probabilities are stepped by `h·p_j`, phases by `h`;
/// image phase differences are wrapped.
pub fn frame_jacobian_fd<T: Real>(f: &FrameChange<T>, s: &Preparation<T>, h: T) -> Result<Matrix<T>> {
    check_dim(f.dim(), s.dim())?;
    f.require_valid()?;
    s.require_interior(T::of(JACOBIAN_FLOOR))?;
    let n = f.dim();
    let mut m = Matrix::zeros(2 * n, 2 * n);
    for col in 0..2 * n {
        let step = if col < n { h * s.p()[col] } else { h };
        let image = |sign: T| {
            let mut p = s.p().to_vec();
            let mut phi = s.phi().to_vec();
            if col < n {
                p[col] += sign * step;
            } else {
                phi[col - n] += sign * step;
            }
            f.map_coordinates(&p, &phi)
        };
        let (pp, fp) = image(T::one());
        let (pm, fm) = image(-T::one());
        for i in 0..n {
            m[(i, col)] = (pp[i] - pm[i]) / (T::two() * step);
            m[(n + i, col)] = wrap_angle(fp[i] - fm[i]) / (T::two() * step);
        }
    }
    Ok(m)
}

/// `max |M_ij − M̃_ij| / max(1, |M_ij|)` between the closed-form and the
/// central-difference Jacobian.
pub fn jacobian_fd_mismatch<T: Real>(f: &FrameChange<T>, s: &Preparation<T>, h: T) -> Result<T> {
    let exact = frame_jacobian(f, s)?.m;
    let fd = frame_jacobian_fd(f, s, h)?;
    let mut worst = T::zero();
    for i in 0..exact.rows() {
        for j in 0..exact.cols() {
            let e = exact[(i, j)];
            worst = worst.max((e - fd[(i, j)]).abs() / e.abs().max(T::one()));
        }
    }
    Ok(worst)
}

/// Haar-random admissible frame, deterministic per seed.
pub fn random_frame<T: Real>(n: usize, seed: u64) -> Result<FrameChange<T>> {
    if n < 2 {
        return Err(Error::DimensionTooSmall(n));
    }
    frame_from_unitary(&random::haar_unitary::<T, _>(n, &mut random::seeded(seed)))
}
