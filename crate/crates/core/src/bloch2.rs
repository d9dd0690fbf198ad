//! Two-level preparations on the sphere of radius ½.
//!
//! `p₁ = cos²(θ/2)`, `p₂ = sin²(θ/2)`, longitude `φ = φ₁ − φ₂`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame_transform::FrameChange;
use crate::linalg::Matrix;
use crate::prep_state::{Preparation, TangentDisplacement, EPS_P};
use crate::scalar::{wrap_angle, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpherePoint<T> {
    /// Colatitude in `[0, π]`.
    pub theta: T,
    /// Longitude in `(−π, π]`; 0 at the poles.
    pub phi: T,
}

impl<T: Real> SpherePoint<T> {
    pub fn new(theta: T, phi: T) -> Result<Self> {
        if !(theta >= T::zero() && theta <= T::PI()) {
            return Err(Error::InvalidArgument(format!("colatitude {theta} outside [0, π]")));
        }
        let phi = if theta == T::zero() || theta == T::PI() { T::zero() } else { wrap_angle(phi) };
        Ok(Self { theta, phi })
    }

    /// Momentum conjugate to the longitude: `p = ½ cos θ`.
    pub fn momentum(&self) -> T {
        T::half() * self.theta.cos()
    }
}

fn require_two<T: Real>(s: &Preparation<T>) -> Result<()> {
    if s.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: s.dim() });
    }
    Ok(())
}

pub fn to_sphere<T: Real>(s: &Preparation<T>) -> Result<SpherePoint<T>> {
    require_two(s)?;
    let p1 = s.p()[0].max(T::zero());
    let p2 = s.p()[1].max(T::zero());
    let theta = T::two() * p2.sqrt().atan2(p1.sqrt());
    let eps = T::of(EPS_P);
    let phi = if s.p()[0] < eps || s.p()[1] < eps { T::zero() } else { wrap_angle(s.phi()[0] - s.phi()[1]) };
    Ok(SpherePoint { theta, phi })
}

/// Preparation with `φ₂ = 0`.
pub fn from_sphere<T: Real>(pt: &SpherePoint<T>) -> Preparation<T> {
    let half = pt.theta * T::half();
    let (c, s) = (half.cos(), half.sin());
    Preparation::from_parts_unchecked(vec![c * c, s * s], vec![pt.phi, T::zero()])
}

/// `¼ (dθ² + sin²θ dφ²)`.
pub fn sphere_line_element2<T: Real>(pt: &SpherePoint<T>, dtheta: T, dphi: T) -> T {
    let s = pt.theta.sin();
    (dtheta * dtheta + s * s * dphi * dphi) / T::of(4.0)
}

/// The `(dp, dφ)` displacement corresponding to `(dθ, dφ)` at `pt`.
pub fn sphere_displacement<T: Real>(pt: &SpherePoint<T>, dtheta: T, dphi: T) -> TangentDisplacement<T> {
    let dp1 = -T::half() * pt.theta.sin() * dtheta;
    TangentDisplacement { dp: vec![dp1, -dp1], dphi: vec![dphi, T::zero()] }
}

/// Colatitude after the rotation by `alpha` about the equatorial axis at longitude `beta`:
/// `cos θ′ = cos α cos θ + sin α sin θ cos(φ − β)`.
///
/// Evaluated by rotating the unit vector, so the result keeps full precision near the poles.
pub fn cosine_law_theta<T: Real>(pt: &SpherePoint<T>, alpha: T, beta: T) -> T {
    let (st, ct) = pt.theta.sin_cos();
    let (sa, ca) = alpha.sin_cos();
    let (sd, cd) = (pt.phi - beta).sin_cos();
    let z = ca * ct + sa * st * cd;
    let x = ca * st * cd - sa * ct;
    let y = st * sd;
    x.hypot(y).atan2(z)
}

/// Frame change realizing the rotation of [`cosine_law_theta`]:
/// `w₁₁ = w₂₂ = cos²(α/2)`, `w₁₂ = w₂₁ = sin²(α/2)`,
/// phases `β₁₁ = β`, `β₁₂ = β₂₁ = 0`, `β₂₂ = π − β`.
pub fn rotation_frame<T: Real>(alpha: T, beta: T) -> FrameChange<T> {
    let c = (alpha * T::half()).cos();
    let s = (alpha * T::half()).sin();
    let w = Matrix::from_fn(2, 2, |i, j| if i == j { c * c } else { s * s });
    let b = Matrix::from_fn(2, 2, |i, j| match (i, j) {
        (0, 0) => beta,
        (1, 1) => T::PI() - beta,
        _ => T::zero(),
    });
    FrameChange::new(w, b).expect("2×2 with nonnegative weights")
}

/// Free evolution under `diag(E₁, E₂)`: `θ` fixed, `φ(t) = φ(0) − (E₁ − E₂) t`.
pub fn evolve_two_level<T: Real>(pt0: &SpherePoint<T>, e1: T, e2: T, t: T) -> SpherePoint<T> {
    if pt0.theta == T::zero() || pt0.theta == T::PI() {
        return SpherePoint { theta: pt0.theta, phi: T::zero() };
    }
    SpherePoint { theta: pt0.theta, phi: wrap_angle(pt0.phi - (e1 - e2) * t) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{evolve, HermitianOperator, Method};
    use crate::frame_transform::{apply_frame, validate_frame};
    use crate::metric::line_element2;
    use crate::random::seeded;
    use rand::Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, PI};

    fn prep(p: &[f64], phi: &[f64]) -> Preparation<f64> {
        Preparation::new(p.to_vec(), phi.to_vec()).unwrap()
    }

    #[test]
    fn to_sphere_examples() {
        let n = to_sphere(&prep(&[1.0, 0.0], &[0.7, 0.0])).unwrap();
        assert_eq!((n.theta, n.phi), (0.0, 0.0));
        let e = to_sphere(&prep(&[0.5, 0.5], &[FRAC_PI_2, 0.0])).unwrap();
        assert!((e.theta - FRAC_PI_2).abs() < 1e-15 && (e.phi - FRAC_PI_2).abs() < 1e-15);
        let s = to_sphere(&prep(&[0.0, 1.0], &[0.0, 0.0])).unwrap();
        assert_eq!(s.theta, PI);
        assert!(matches!(
            to_sphere(&prep(&[0.2, 0.3, 0.5], &[0.0; 3])),
            Err(Error::DimensionMismatch { expected: 2, found: 3 })
        ));
    }

    #[test]
    fn charts_round_trip() {
        let mut rng = seeded(3);
        for _ in 0..100 {
            let pt = SpherePoint::new(rng.random_range(0.01..PI - 0.01), rng.random_range(-PI..PI)).unwrap();
            let back = to_sphere(&from_sphere(&pt)).unwrap();
            assert!((back.theta - pt.theta).abs() <= 1e-12);
            assert!(wrap_angle(back.phi - pt.phi).abs() <= 1e-12);
        }
    }

    #[test]
    fn line_element_examples() {
        for theta in [0.3f64, 1.0, 2.5] {
            let pt = SpherePoint::new(theta, 0.4).unwrap();
            assert!((sphere_line_element2(&pt, 0.01, 0.0) - 2.5e-5).abs() < 1e-18);
        }
        let eq = SpherePoint::new(FRAC_PI_2, 0.0).unwrap();
        assert!((sphere_line_element2(&eq, 0.0, 0.01) - 2.5e-5).abs() < 1e-18);

        let pt = SpherePoint::new(FRAC_PI_3, 0.2).unwrap();
        let d = sphere_displacement(&pt, 0.01, 0.02);
        let general = line_element2(&from_sphere(&pt), &d).unwrap().total;
        assert!((general - sphere_line_element2(&pt, 0.01, 0.02)).abs() <= 1e-10);
    }

    #[test]
    fn cosine_law_examples() {
        let pt = SpherePoint::new(1.1f64, 0.4).unwrap();
        assert!((cosine_law_theta(&pt, 0.0, 0.9) - 1.1).abs() < 1e-15);
        let eq = SpherePoint::new(FRAC_PI_2, 0.3).unwrap();
        assert!(cosine_law_theta(&eq, FRAC_PI_2, 0.3).abs() < 1e-7);
    }

    #[test]
    fn cosine_law_matches_frame_action() {
        let mut rng = seeded(19);
        for _ in 0..2000 {
            let alpha = rng.random_range(0.0..PI);
            let beta = rng.random_range(-PI..PI);
            let f = rotation_frame(alpha, beta);
            assert!(validate_frame(&f).max_residual <= 1e-14);
            let pt = SpherePoint::new(rng.random_range(0.0..PI), rng.random_range(-PI..PI)).unwrap();
            let image = apply_frame(&f, &from_sphere(&pt)).unwrap();
            let theta_frame = to_sphere(&image).unwrap().theta;
            let theta_law = cosine_law_theta(&pt, alpha, beta);
            assert!((theta_frame - theta_law).abs() <= 1e-10, "{theta_frame} vs {theta_law}");
        }
    }

    #[test]
    fn free_evolution_examples() {
        let pt = SpherePoint::new(0.8, 1.3).unwrap();
        assert_eq!(evolve_two_level(&pt, 1.5, 1.5, 7.0), pt);
        let eq = SpherePoint::new(FRAC_PI_2, 0.0).unwrap();
        let out = evolve_two_level(&eq, 2.0, 1.0, PI);
        assert_eq!(out.theta, FRAC_PI_2);
        assert!((out.phi - PI).abs() < 1e-15);
    }

    #[test]
    fn free_evolution_matches_integrator() {
        let pt = SpherePoint::new(FRAC_PI_3, 0.5).unwrap();
        let (e1, e2) = (1.2, 0.5);
        let traj =
            evolve(&from_sphere(&pt), &HermitianOperator::diagonal(&[e1, e2]), 10.0, 1e-3, Method::ImplicitMidpoint)
                .unwrap();
        for (t, s) in traj.times().iter().zip(traj.states()).step_by(97) {
            let a = to_sphere(s).unwrap();
            let b = evolve_two_level(&pt, e1, e2, *t);
            assert!((a.theta - pt.theta).abs() <= 1e-12);
            assert!(wrap_angle(a.phi - b.phi).abs() <= 1e-9);
        }
    }

    #[test]
    fn sphere_point_validation() {
        assert!(SpherePoint::new(-0.1, 0.0).is_err());
        assert!(SpherePoint::new(4.0, 0.0).is_err());
        assert_eq!(SpherePoint::new(0.0, 2.0).unwrap().phi, 0.0);
        assert!((SpherePoint::new(1.0, 3.0 * PI).unwrap().phi - PI).abs() < 1e-15);
        assert!((SpherePoint::new(FRAC_PI_3, 0.0).unwrap().momentum() - 0.25).abs() < 1e-15);
    }
}
