//! Preparations in the polar chart `(p, φ)` and the Cartesian chart `(x, y)`.
//!
//! A preparation is a probability vector together with one phase per outcome.
//! Only phase differences are physical; [`gauge_fix`] picks the representative
//! whose last populated phase is zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{tol, wrap_angle, Real};

/// Below this probability a phase is undefined and conventionally 0.
pub const EPS_P: f64 = 1e-12;

/// Accepted deviation of `Σ p` from 1 on construction.
pub const NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PreparationJson<T>", into = "PreparationJson<T>", bound = "T: Real")]
pub struct Preparation<T> {
    p: Vec<T>,
    phi: Vec<T>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Real")]
struct PreparationJson<T> {
    p: Vec<T>,
    phi: Vec<T>,
}

impl<T: Real> TryFrom<PreparationJson<T>> for Preparation<T> {
    type Error = Error;
    fn try_from(j: PreparationJson<T>) -> Result<Self> {
        Preparation::new(j.p, j.phi)
    }
}

impl<T: Real> From<Preparation<T>> for PreparationJson<T> {
    fn from(s: Preparation<T>) -> Self {
        Self { p: s.p, phi: s.phi }
    }
}

pub(crate) fn check_probabilities<T: Real>(p: &[T]) -> Result<T> {
    if let Some((index, &value)) = p.iter().enumerate().find(|(_, &v)| v < T::zero() || v.is_nan()) {
        return Err(Error::NegativeProbability { index, value: value.as_f64() });
    }
    let sum: T = p.iter().copied().sum();
    if (sum - T::one()).abs() > tol(NORMALIZATION_TOL) {
        return Err(Error::NotNormalized { sum: sum.as_f64() });
    }
    Ok(sum)
}

impl<T: Real> Preparation<T> {
    /// Validates and normalizes. A probability sum within `1e-9` of one is
    /// rescaled to one; phases are stored unwrapped, exactly as given.
    pub fn new(p: Vec<T>, phi: Vec<T>) -> Result<Self> {
        if p.len() != phi.len() {
            return Err(Error::DimensionMismatch { expected: p.len(), found: phi.len() });
        }
        if p.len() < 2 {
            return Err(Error::DimensionTooSmall(p.len()));
        }
        let sum = check_probabilities(&p)?;
        let p = if sum == T::one() { p } else { p.into_iter().map(|x| x / sum).collect() };
        Ok(Self { p, phi })
    }

    /// Skips the rescale; callers guarantee validity up to round-off.
    pub(crate) fn from_parts_unchecked(p: Vec<T>, phi: Vec<T>) -> Self {
        debug_assert_eq!(p.len(), phi.len());
        Self { p, phi }
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }

    pub fn p(&self) -> &[T] {
        &self.p
    }

    pub fn phi(&self) -> &[T] {
        &self.phi
    }

    pub fn into_parts(self) -> (Vec<T>, Vec<T>) {
        (self.p, self.phi)
    }

    /// Basis preparation `|k⟩` with zero phases.
    pub fn basis(n: usize, k: usize) -> Result<Self> {
        if k >= n {
            return Err(Error::InvalidArgument(format!("basis index {k} out of range for n = {n}")));
        }
        let p = (0..n).map(|i| if i == k { T::one() } else { T::zero() }).collect();
        Self::new(p, vec![T::zero(); n])
    }

    pub fn min_p(&self) -> (usize, T) {
        self.p.iter().copied().enumerate().fold((0, T::infinity()), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc })
    }

    /// Errors with `BoundaryState` unless every `p_i ≥ floor`.
    pub fn require_interior(&self, floor: T) -> Result<()> {
        let (index, value) = self.min_p();
        if value < floor {
            return Err(Error::BoundaryState { index, value: value.as_f64() });
        }
        Ok(())
    }

    /// Adds `c` to every phase; the result is physically the same preparation.
    pub fn shift_all_phases(&self, c: T) -> Self {
        Self { p: self.p.clone(), phi: self.phi.iter().map(|&x| x + c).collect() }
    }

    /// `s + h·d`, renormalized. Fails if a probability would go negative.
    pub fn displaced(&self, d: &TangentDisplacement<T>, h: T) -> Result<Self> {
        check_dim(self.dim(), d.dim())?;
        let p = self.p.iter().zip(&d.dp).map(|(&p, &dp)| p + h * dp).collect();
        let phi = self.phi.iter().zip(&d.dphi).map(|(&f, &df)| f + h * df).collect();
        Self::new(p, phi)
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// `x_i = √p_i cos φ_i`, `y_i = √p_i sin φ_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct CartesianChart<T> {
    pub x: Vec<T>,
    pub y: Vec<T>,
}

impl<T: Real> CartesianChart<T> {
    pub fn norm_sqr(&self) -> T {
        self.x.iter().zip(&self.y).map(|(&x, &y)| x * x + y * y).sum()
    }
}

/// An infinitesimal displacement `(dp, dφ)` tangent to the normalization surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TangentDisplacement<T> {
    pub dp: Vec<T>,
    pub dphi: Vec<T>,
}

impl<T: Real> TangentDisplacement<T> {
    /// Requires `Σ dp = 0` to `1e-12` relative to `max(1, Σ|dp|)`.
    pub fn new(dp: Vec<T>, dphi: Vec<T>) -> Result<Self> {
        check_dim(dp.len(), dphi.len())?;
        let sum: T = dp.iter().copied().sum();
        let scale = dp.iter().map(|x| x.abs()).sum::<T>().max(T::one());
        if sum.abs() > tol::<T>(1e-12) * scale {
            return Err(Error::NotTangent { sum: sum.as_f64() });
        }
        Ok(Self { dp, dphi })
    }

    pub fn zeros(n: usize) -> Self {
        Self { dp: vec![T::zero(); n], dphi: vec![T::zero(); n] }
    }

    pub fn dim(&self) -> usize {
        self.dp.len()
    }

    pub fn scaled(&self, h: T) -> Self {
        Self { dp: self.dp.iter().map(|&x| x * h).collect(), dphi: self.dphi.iter().map(|&x| x * h).collect() }
    }
}

pub fn new_preparation<T: Real>(p: Vec<T>, phi: Vec<T>) -> Result<Preparation<T>> {
    Preparation::new(p, phi)
}

pub fn to_cartesian<T: Real>(s: &Preparation<T>) -> CartesianChart<T> {
    let (x, y) =
        s.p.iter()
            .zip(&s.phi)
            .map(|(&p, &f)| {
                let r = p.sqrt();
                (r * f.cos(), r * f.sin())
            })
            .unzip();
    CartesianChart { x, y }
}

/// Inverse of [`to_cartesian`]. Phases of components with `p_i < ε_p` are set to 0.
pub fn from_cartesian<T: Real>(c: &CartesianChart<T>) -> Result<Preparation<T>> {
    let (p, phi) = polar_from_cartesian(&c.x, &c.y)?;
    check_probabilities(&p)?;
    if p.len() < 2 {
        return Err(Error::DimensionTooSmall(p.len()));
    }
    Ok(Preparation { p, phi })
}

/// Raw polar coordinates of `(x, y)` without any normalization check.
pub(crate) fn polar_from_cartesian<T: Real>(x: &[T], y: &[T]) -> Result<(Vec<T>, Vec<T>)> {
    check_dim(x.len(), y.len())?;
    let eps = T::of(EPS_P);
    Ok(x.iter()
        .zip(y)
        .map(|(&x, &y)| {
            let p = x * x + y * y;
            let phi = if p < eps { T::zero() } else { y.atan2(x) };
            (p, phi)
        })
        .unzip())
}

/// Index of the highest component with `p_i ≥ ε_p`.
fn gauge_reference<T: Real>(p: &[T]) -> usize {
    let eps = T::of(EPS_P);
    p.iter().rposition(|&v| v >= eps).unwrap_or(p.len() - 1)
}

/// Removes the common phase so that the last populated phase is zero, and wraps
/// every phase into `(-π, π]`. Idempotent.
pub fn gauge_fix<T: Real>(s: &Preparation<T>) -> Preparation<T> {
    let eps = T::of(EPS_P);
    let reference = s.phi[gauge_reference(&s.p)];
    let phi =
        s.p.iter().zip(&s.phi).map(|(&p, &f)| if p < eps { T::zero() } else { wrap_angle(f - reference) }).collect();
    Preparation { p: s.p.clone(), phi }
}

/// Gauge-invariant distance: max of `|Δp_i|` and wrapped `|Δφ_i|` after gauge fixing.
pub fn prep_distance_check<T: Real>(a: &Preparation<T>, b: &Preparation<T>) -> Result<T> {
    check_dim(a.dim(), b.dim())?;
    let a = gauge_fix(a);
    let b = gauge_fix(b);
    let dp = a.p.iter().zip(&b.p).map(|(x, y)| (*x - *y).abs());
    let dphi = a.phi.iter().zip(&b.phi).map(|(x, y)| wrap_angle(*x - *y).abs());
    Ok(dp.chain(dphi).fold(T::zero(), T::max))
}

/// Pushes a polar displacement forward to the Cartesian chart.
pub fn push_forward<T: Real>(s: &Preparation<T>, d: &TangentDisplacement<T>) -> Result<(Vec<T>, Vec<T>)> {
    check_dim(s.dim(), d.dim())?;
    let eps = T::of(EPS_P);
    let mut dx = Vec::with_capacity(s.dim());
    let mut dy = Vec::with_capacity(s.dim());
    for i in 0..s.dim() {
        let (p, f) = (s.p[i], s.phi[i]);
        if p < eps && d.dp[i] != T::zero() {
            return Err(Error::BoundaryState { index: i, value: p.as_f64() });
        }
        let r = p.sqrt();
        let dr = if d.dp[i] == T::zero() { T::zero() } else { d.dp[i] / (T::two() * r) };
        let (sin, cos) = f.sin_cos();
        dx.push(dr * cos - r * sin * d.dphi[i]);
        dy.push(dr * sin + r * cos * d.dphi[i]);
    }
    Ok((dx, dy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn prep(p: &[f64], phi: &[f64]) -> Preparation<f64> {
        Preparation::new(p.to_vec(), phi.to_vec()).unwrap()
    }

    #[test]
    fn construction_examples() {
        assert_eq!(prep(&[1.0, 0.0], &[0.0, 0.0]).dim(), 2);
        prep(&[0.5, 0.5], &[0.0, PI]);
        assert!(matches!(Preparation::new(vec![0.7, 0.7], vec![0.0, 0.0]), Err(Error::NotNormalized { .. })));
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(Preparation::new(vec![1.0, 0.0], vec![0.0]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(
            Preparation::new(vec![1.2, -0.2], vec![0.0, 0.0]),
            Err(Error::NegativeProbability { index: 1, .. })
        ));
        assert!(matches!(Preparation::new(vec![1.0], vec![0.0]), Err(Error::DimensionTooSmall(1))));
    }

    #[test]
    fn near_normalized_is_rescaled() {
        let s = prep(&[0.5 + 2e-10, 0.5], &[0.0, 0.0]);
        assert!((s.p().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cartesian_examples() {
        let c = to_cartesian(&prep(&[1.0, 0.0], &[0.0, 0.0]));
        assert_eq!(c.x, vec![1.0, 0.0]);
        assert_eq!(c.y, vec![0.0, 0.0]);

        let c = to_cartesian(&prep(&[0.5, 0.5], &[0.0, PI]));
        assert!((c.x[0] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-8);
        assert!((c.x[1] + std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-8);
        assert!(c.y.iter().all(|y| y.abs() < 1e-15));

        let c = to_cartesian(&prep(&[0.25, 0.75], &[0.0, FRAC_PI_2]));
        assert!((c.x[0] - 0.5).abs() < 1e-15 && c.x[1].abs() < 1e-15);
        assert!(c.y[0].abs() < 1e-15 && (c.y[1] - 0.86602540).abs() < 1e-8);
    }

    #[test]
    fn from_cartesian_examples() {
        let s = from_cartesian(&CartesianChart { x: vec![1.0, 0.0], y: vec![0.0, 0.0] }).unwrap();
        assert_eq!((s.p(), s.phi()), (&[1.0, 0.0][..], &[0.0, 0.0][..]));

        let s = from_cartesian(&CartesianChart { x: vec![0.0, 0.0], y: vec![1.0, 0.0] }).unwrap();
        assert_eq!(s.p(), &[1.0, 0.0]);
        assert_eq!(s.phi(), &[FRAC_PI_2, 0.0]);

        let h = std::f64::consts::FRAC_1_SQRT_2; // the 8-digit literal is 7e-9 off normalization
        let s = from_cartesian(&CartesianChart { x: vec![h, h], y: vec![0.0, 0.0] }).unwrap();
        assert!((s.p()[0] - 0.5).abs() < 1e-8 && (s.p()[1] - 0.5).abs() < 1e-8);
        assert_eq!(s.phi(), &[0.0, 0.0]);

        assert!(matches!(
            from_cartesian(&CartesianChart { x: vec![1.0, 1.0], y: vec![0.0, 0.0] }),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn gauge_fix_examples() {
        let g = gauge_fix(&prep(&[0.5, 0.5], &[1.0, 1.0]));
        assert_eq!(g.phi(), &[0.0, 0.0]);

        let g = gauge_fix(&prep(&[0.5, 0.5], &[FRAC_PI_2, PI]));
        assert_eq!(g.phi(), &[-FRAC_PI_2, 0.0]);

        let g = gauge_fix(&prep(&[1.0, 0.0], &[2.0, 5.0]));
        assert_eq!(g.phi(), &[0.0, 0.0]);
    }

    #[test]
    fn distance_examples() {
        let a = prep(&[0.3, 0.7], &[0.4, -1.0]);
        assert_eq!(prep_distance_check(&a, &a).unwrap(), 0.0);
        assert!(prep_distance_check(&a, &a.shift_all_phases(0.3)).unwrap() < 1e-15);
        let b = prep(&[0.5, 0.5], &[0.0, 0.0]);
        let c = prep(&[0.6, 0.4], &[0.0, 0.0]);
        assert!((prep_distance_check(&b, &c).unwrap() - 0.1).abs() < 1e-15);
        let d = prep(&[0.2, 0.3, 0.5], &[0.0, 0.0, 0.0]);
        assert!(matches!(prep_distance_check(&b, &d), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn distance_across_branch_cut() {
        let a = prep(&[0.5, 0.5], &[PI - 1e-3, 0.0]);
        let b = prep(&[0.5, 0.5], &[-PI + 1e-3, 0.0]);
        assert!((prep_distance_check(&a, &b).unwrap() - 2e-3).abs() < 1e-12);
    }

    #[test]
    fn tangent_requires_zero_sum() {
        assert!(TangentDisplacement::new(vec![0.1, -0.1], vec![0.0, 0.0]).is_ok());
        assert!(matches!(TangentDisplacement::new(vec![0.1, 0.1], vec![0.0, 0.0]), Err(Error::NotTangent { .. })));
    }

    #[test]
    fn json_roundtrip_and_validation() {
        let s = prep(&[0.25, 0.75], &[0.5, -0.5]);
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(j, r#"{"p":[0.25,0.75],"phi":[0.5,-0.5]}"#);
        let back: Preparation<f64> = serde_json::from_str(&j).unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<Preparation<f64>>(r#"{"p":[0.7,0.7],"phi":[0,0]}"#).is_err());
    }

    #[test]
    fn works_in_f32() {
        let s = Preparation::<f32>::new(vec![0.25, 0.75], vec![0.0, 1.0]).unwrap();
        let back = from_cartesian(&to_cartesian(&s)).unwrap();
        assert!(prep_distance_check(&s, &back).unwrap() < 1e-6);
    }
}
