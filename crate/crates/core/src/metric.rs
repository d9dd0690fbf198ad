//! Line element of preparation space.
//!
//! `ds² = Σ dp_i²/(4p_i) + [Σ p_i dφ_i² − (Σ p_i dφ_i)²]`: the statistical
//! distance of the probabilities plus the variance of the phase displacement.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::frame_transform::{FrameChange, JACOBIAN_FLOOR};
use crate::hilbert_oracle::to_amplitudes;
use crate::prep_state::{check_dim, push_forward, CartesianChart, Preparation, TangentDisplacement, EPS_P};
use crate::scalar::{tol, wrap_angle, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineElementBreakdown<T> {
    /// `Σ dp_i² / (4 p_i)`.
    pub classical_part: T,
    /// `Σ p_i dφ_i² − (Σ p_i dφ_i)²`.
    pub variance_part: T,
    pub total: T,
}

/// `Σ dp_i² / (4 p_i)`. Components with `dp_i = 0` contribute nothing, even at `p_i = 0`.
pub fn statistical_distance2<T: Real>(p: &[T], dp: &[T]) -> Result<T> {
    check_dim(p.len(), dp.len())?;
    let sum: T = dp.iter().copied().sum();
    if sum.abs() > tol(1e-9) {
        return Err(Error::NotTangent { sum: sum.as_f64() });
    }
    fisher_sum(p, dp)
}

fn fisher_sum<T: Real>(p: &[T], dp: &[T]) -> Result<T> {
    let eps = T::of(EPS_P);
    let mut acc = T::zero();
    for (i, (&p, &dp)) in p.iter().zip(dp).enumerate() {
        if dp == T::zero() {
            continue;
        }
        if p < eps {
            return Err(Error::BoundaryState { index: i, value: p.as_f64() });
        }
        acc += dp * dp / (T::of(4.0) * p);
    }
    Ok(acc)
}

/// Variance of `dφ` under the distribution `p`, computed in centered form so
/// the result is nonnegative and insensitive to a common offset.
pub fn phase_variance2<T: Real>(p: &[T], dphi: &[T]) -> Result<T> {
    check_dim(p.len(), dphi.len())?;
    let total: T = p.iter().copied().sum();
    if total <= T::zero() {
        return Ok(T::zero());
    }
    let mean = p.iter().zip(dphi).map(|(&p, &d)| p * d).sum::<T>() / total;
    Ok(p.iter().zip(dphi).map(|(&p, &d)| p * (d - mean) * (d - mean)).sum())
}

pub fn line_element2<T: Real>(s: &Preparation<T>, d: &TangentDisplacement<T>) -> Result<LineElementBreakdown<T>> {
    check_dim(s.dim(), d.dim())?;
    let classical_part = statistical_distance2(s.p(), &d.dp)?;
    let variance_part = phase_variance2(s.p(), &d.dphi)?;
    Ok(LineElementBreakdown { classical_part, variance_part, total: classical_part + variance_part })
}

/// `Σ (dx_i² + dy_i²) − [Σ (x_i dy_i − y_i dx_i)]²`.
pub fn cartesian_line_element2<T: Real>(c: &CartesianChart<T>, dx: &[T], dy: &[T]) -> Result<T> {
    check_dim(c.x.len(), dx.len())?;
    check_dim(c.x.len(), dy.len())?;
    let flat: T = dx.iter().zip(dy).map(|(&a, &b)| a * a + b * b).sum();
    let twist: T = (0..dx.len()).map(|i| c.x[i] * dy[i] - c.y[i] * dx[i]).sum();
    Ok(flat - twist * twist)
}

/// Line element evaluated through the Cartesian chart, for cross-checking.
pub fn line_element2_cartesian_route<T: Real>(s: &Preparation<T>, d: &TangentDisplacement<T>) -> Result<T> {
    let (dx, dy) = push_forward(s, d)?;
    cartesian_line_element2(&crate::prep_state::to_cartesian(s), &dx, &dy)
}

/// Angle `arccos |⟨ψ₁|ψ₂⟩|` between the rays of two preparations, in `[0, π/2]`.
///
/// Evaluated as `2 asin(‖ψ₂ − e^{iγ}ψ₁‖ / 2)` with `e^{iγ}` the phase of the
/// overlap, which stays accurate for nearby rays.
pub fn fubini_study_angle<T: Real>(s1: &Preparation<T>, s2: &Preparation<T>) -> Result<T> {
    check_dim(s1.dim(), s2.dim())?;
    let normalized = |s: &Preparation<T>| {
        let v: Vec<Complex<T>> = to_amplitudes(s).amplitudes().to_vec();
        let norm = v.iter().map(Complex::norm_sqr).sum::<T>().sqrt();
        v.into_iter().map(|z| z / norm).collect::<Vec<_>>()
    };
    let a = normalized(s1);
    let b = normalized(s2);
    let overlap: Complex<T> = a.iter().zip(&b).map(|(x, y)| x.conj() * y).sum();
    let r = overlap.norm();
    if r == T::zero() {
        return Ok(T::FRAC_PI_2());
    }
    let phase = overlap / r;
    let chord = a.iter().zip(&b).map(|(x, y)| (y - x * phase).norm_sqr()).sum::<T>().sqrt();
    Ok(T::two() * (chord / T::two()).min(T::one()).asin())
}

/// Relative change `|ds'² − ds²| / ds²` of the line element under a frame change.
///
/// `ds'²` is evaluated at the image of `s` with the image displacement taken by
/// central differences of the frame map between `s − h·d` and `s + h·d`.
/// For a pure-gauge `d` (where `ds² = 0`) the absolute `ds'²` is returned.
pub fn invariance_residual<T: Real>(
    f: &FrameChange<T>,
    s: &Preparation<T>,
    d: &TangentDisplacement<T>,
    h: T,
) -> Result<T> {
    check_dim(f.dim(), s.dim())?;
    check_dim(s.dim(), d.dim())?;
    let report = crate::frame_transform::validate_frame(f);
    if !report.is_valid() {
        return Err(Error::InvalidFrame { residual: report.max_residual.as_f64() });
    }
    let floor = T::of(JACOBIAN_FLOOR);
    s.require_interior(floor)?;
    if !(h > T::zero()) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {h}")));
    }
    let ds2 = line_element2(s, d)?.total;

    let shifted = |sign: T| -> Result<(Vec<T>, Vec<T>)> {
        let p: Vec<T> = s.p().iter().zip(&d.dp).map(|(&p, &dp)| p + sign * h * dp).collect();
        if let Some((index, &value)) = p.iter().enumerate().find(|(_, &v)| v < floor) {
            return Err(Error::BoundaryState { index, value: value.as_f64() });
        }
        let phi: Vec<T> = s.phi().iter().zip(&d.dphi).map(|(&f, &df)| f + sign * h * df).collect();
        Ok(f.map_coordinates(&p, &phi))
    };
    let (p_plus, phi_plus) = shifted(T::one())?;
    let (p_minus, phi_minus) = shifted(-T::one())?;
    let (p_img, _) = f.map_coordinates(s.p(), s.phi());
    if let Some((index, &value)) = p_img.iter().enumerate().find(|(_, &v)| v < floor) {
        return Err(Error::BoundaryState { index, value: value.as_f64() });
    }
    let two_h = T::two() * h;
    let dp_img: Vec<T> = p_plus.iter().zip(&p_minus).map(|(&a, &b)| (a - b) / two_h).collect();
    let dphi_img: Vec<T> = phi_plus.iter().zip(&phi_minus).map(|(&a, &b)| wrap_angle(a - b) / two_h).collect();
    let ds2_img = fisher_sum(&p_img, &dp_img)? + phase_variance2(&p_img, &dphi_img)?;
    if ds2 == T::zero() {
        return Ok(ds2_img.abs());
    }
    Ok((ds2_img - ds2).abs() / ds2)
}
