//! Hamiltonian flow on preparation space.
//!
//! With `ℋ(p, φ) = ⟨ψ|H|ψ⟩` the Schrödinger equation becomes
//! `ṗ_k = ∂ℋ/∂φ_k`, `φ̇_k = −∂ℋ/∂p_k`. Integration is done in the (p, φ) chart
//! and drops to the amplitude chart for steps near the boundary of the simplex,
//! where the polar chart is singular but the flow is not.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, Matrix};
pub use crate::operator::HermitianOperator;
use crate::prep_state::{check_dim, Preparation, TangentDisplacement};
use crate::scalar::{tol, wrap_angle, Real};

/// Below this probability the polar chart is not used for a step.
pub const EPS_DYN: f64 = 1e-8;
/// Fixed-point tolerance of the implicit solve, relative to `max(1, |z|)`.
pub const SOLVE_TOL: f64 = 1e-13;
pub const SOLVE_MAX_ITER: usize = 50;
/// Step of the internal integrator used by [`flow_volume_residual`].
pub const FLOW_PROBE_DT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    ImplicitMidpoint,
    Rk4Renormalized,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::ImplicitMidpoint => "implicit-midpoint",
            Method::Rk4Renormalized => "rk4-renormalized",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "implicit-midpoint" => Ok(Method::ImplicitMidpoint),
            "rk4-renormalized" => Ok(Method::Rk4Renormalized),
            other => Err(Error::InvalidArgument(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChartSwitchReason {
    /// Some `p_i < EPS_DYN` at the start of the step.
    NearBoundary,
    /// The polar implicit solve did not converge or left the interior.
    PolarSolveFailed,
}

/// A step that was taken in the amplitude chart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartSwitch<T> {
    pub step: usize,
    pub t: T,
    pub reason: ChartSwitchReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    times: Vec<T>,
    states: Vec<Preparation<T>>,
    energy: Vec<T>,
    dt: T,
    method: Method,
    chart_switches: Vec<ChartSwitch<T>>,
}

impl<T: Real> Trajectory<T> {
    pub fn times(&self) -> &[T] {
        &self.times
    }

    /// States with unwrapped phases, one per entry of `times`.
    pub fn states(&self) -> &[Preparation<T>] {
        &self.states
    }

    /// `ℋ` evaluated at each state.
    pub fn energy(&self) -> &[T] {
        &self.energy
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn chart_switches(&self) -> &[ChartSwitch<T>] {
        &self.chart_switches
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &Preparation<T> {
        self.states.last().expect("trajectory holds the initial state")
    }
}

fn phasors<T: Real>(phi: &[T]) -> Vec<Complex<T>> {
    phi.iter().map(|&f| Complex::from_polar(T::one(), f)).collect()
}

/// `(∂f/∂p, ∂f/∂φ)` of `f = ⟨ψ|F|ψ⟩` at raw coordinates with `p > 0`.
///
/// Only the upper triangle of `m` is read. The diagonal enters `∂f/∂p` as
/// `F_kk` and does not enter `∂f/∂φ` at all, so a diagonal operator yields a
/// gradient that is exact in floating point.
fn gradient_raw<T: Real>(m: &ComplexMatrix<T>, p: &[T], phi: &[T]) -> (Vec<T>, Vec<T>) {
    let n = p.len();
    let sq: Vec<T> = p.iter().map(|x| x.sqrt()).collect();
    let c = phasors(phi);
    let mut dfdp: Vec<T> = (0..n).map(|k| m[(k, k)].re).collect();
    let mut dfdphi = vec![T::zero(); n];
    for k in 0..n {
        for j in k + 1..n {
            let z = m[(k, j)] * c[k].conj() * c[j];
            if z.re == T::zero() && z.im == T::zero() {
                continue;
            }
            let q = T::two() * sq[k] * sq[j] * z.im;
            dfdphi[k] += q;
            dfdphi[j] -= q;
            dfdp[k] += z.re * sq[j] / sq[k];
            dfdp[j] += z.re * sq[k] / sq[j];
        }
    }
    (dfdp, dfdphi)
}

/// `Σ_ij F_ij √(p_i p_j) e^{−i(φ_i − φ_j)}` as a complex number.
fn mean_value_complex<T: Real>(m: &ComplexMatrix<T>, p: &[T], phi: &[T]) -> Complex<T> {
    let n = p.len();
    let amp: Vec<Complex<T>> = phasors(phi).into_iter().zip(p).map(|(c, &p)| c * p.sqrt()).collect();
    let mut acc = Complex::new(T::zero(), T::zero());
    for i in 0..n {
        for j in 0..n {
            acc += amp[i].conj() * m[(i, j)] * amp[j];
        }
    }
    acc
}

fn real_part<T: Real>(z: Complex<T>, m: &ComplexMatrix<T>) -> Result<T> {
    let scale = m.max_abs().max(T::one()) * T::of(m.rows() as f64);
    if z.im.abs() > tol::<T>(1e-12) * scale {
        return Err(Error::NotHermitian { residual: z.im.abs().as_f64() });
    }
    Ok(z.re)
}

/// `f(p, φ) = ⟨ψ|F|ψ⟩`.
pub fn mean_value<T: Real>(s: &Preparation<T>, f: &HermitianOperator<T>) -> Result<T> {
    check_dim(f.dim(), s.dim())?;
    real_part(mean_value_complex(f.matrix(), s.p(), s.phi()), f.matrix())
}

/// The same bilinear form at arbitrary nonnegative `p`, off the normalized
/// simplex; its partials are what [`mean_value_gradient`] returns.
pub fn mean_value_at<T: Real>(f: &HermitianOperator<T>, p: &[T], phi: &[T]) -> Result<T> {
    check_dim(f.dim(), p.len())?;
    check_dim(f.dim(), phi.len())?;
    if let Some((index, &value)) = p.iter().enumerate().find(|(_, &x)| !(x >= T::zero())) {
        return Err(Error::NegativeProbability { index, value: value.as_f64() });
    }
    real_part(mean_value_complex(f.matrix(), p, phi), f.matrix())
}

fn require_dynamic_interior<T: Real>(s: &Preparation<T>) -> Result<()> {
    s.require_interior(T::of(EPS_DYN))
}

/// `(∂f/∂p, ∂f/∂φ)` for `f = mean_value(·, F)`. Needs `p_i ≥ EPS_DYN`.
pub fn mean_value_gradient<T: Real>(s: &Preparation<T>, f: &HermitianOperator<T>) -> Result<(Vec<T>, Vec<T>)> {
    check_dim(f.dim(), s.dim())?;
    require_dynamic_interior(s)?;
    Ok(gradient_raw(f.matrix(), s.p(), s.phi()))
}

/// `(ṗ, φ̇) = (∂ℋ/∂φ, −∂ℋ/∂p)`.
pub fn hamilton_rhs<T: Real>(s: &Preparation<T>, h: &HermitianOperator<T>) -> Result<TangentDisplacement<T>> {
    let (dfdp, dfdphi) = mean_value_gradient(s, h)?;
    Ok(TangentDisplacement { dp: dfdphi, dphi: dfdp.into_iter().map(|x| -x).collect() })
}

/// `{f, g} = Σ_i (∂f/∂p_i ∂g/∂φ_i − ∂f/∂φ_i ∂g/∂p_i)`.
pub fn poisson_bracket<T: Real>(f: &HermitianOperator<T>, g: &HermitianOperator<T>, s: &Preparation<T>) -> Result<T> {
    check_dim(g.dim(), s.dim())?;
    let (fp, fphi) = mean_value_gradient(s, f)?;
    let (gp, gphi) = gradient_raw(g.matrix(), s.p(), s.phi());
    Ok((0..s.dim()).map(|i| fp[i] * gphi[i] - fphi[i] * gp[i]).sum())
}

fn converged<T: Real>(old: &[T], new: &[T]) -> bool {
    let tol = T::of(SOLVE_TOL);
    old.iter().zip(new).all(|(&a, &b)| (a - b).abs() <= tol * b.abs().max(T::one()))
}

/// Increment `(Δp, Δφ)` of one implicit-midpoint step in the polar chart, or
/// `None` when the fixed-point iteration fails or leaves the interior.
fn midpoint_polar<T: Real>(m: &ComplexMatrix<T>, p: &[T], phi: &[T], dt: T) -> Option<(Vec<T>, Vec<T>)> {
    let n = p.len();
    let eps = T::of(EPS_DYN);
    let half = T::half();
    let (gp, gphi) = gradient_raw(m, p, phi);
    let mut dp: Vec<T> = gphi.iter().map(|&x| dt * x).collect();
    let mut dphi: Vec<T> = gp.iter().map(|&x| -dt * x).collect();
    for _ in 0..SOLVE_MAX_ITER {
        let mp: Vec<T> = (0..n).map(|k| p[k] + half * dp[k]).collect();
        if !mp.iter().all(|&x| x >= eps) {
            return None;
        }
        let mphi: Vec<T> = (0..n).map(|k| phi[k] + half * dphi[k]).collect();
        let (gp, gphi) = gradient_raw(m, &mp, &mphi);
        let ndp: Vec<T> = gphi.iter().map(|&x| dt * x).collect();
        let ndphi: Vec<T> = gp.iter().map(|&x| -dt * x).collect();
        let done = converged(&dp, &ndp) && converged(&dphi, &ndphi);
        dp = ndp;
        dphi = ndphi;
        if done {
            return (0..n).all(|k| p[k] + dp[k] >= T::zero()).then_some((dp, dphi));
        }
    }
    None
}

fn rk4_polar<T: Real>(m: &ComplexMatrix<T>, p: &[T], phi: &[T], dt: T) -> Option<(Vec<T>, Vec<T>)> {
    let n = p.len();
    let eps = T::of(EPS_DYN);
    let field = |a: T, kp: &[T], kphi: &[T]| -> Option<(Vec<T>, Vec<T>)> {
        let sp: Vec<T> = (0..n).map(|i| p[i] + a * kp[i]).collect();
        if !sp.iter().all(|&x| x >= eps) {
            return None;
        }
        let sphi: Vec<T> = (0..n).map(|i| phi[i] + a * kphi[i]).collect();
        let (gp, gphi) = gradient_raw(m, &sp, &sphi);
        Some((gphi, gp.into_iter().map(|x| -x).collect()))
    };
    let zero = vec![T::zero(); n];
    let (k1p, k1f) = field(T::zero(), &zero, &zero)?;
    let (k2p, k2f) = field(dt * T::half(), &k1p, &k1f)?;
    let (k3p, k3f) = field(dt * T::half(), &k2p, &k2f)?;
    let (k4p, k4f) = field(dt, &k3p, &k3f)?;
    let sixth = dt / T::of(6.0);
    let comb = |a: &[T], b: &[T], c: &[T], d: &[T]| -> Vec<T> {
        (0..n).map(|i| sixth * (a[i] + T::two() * (b[i] + c[i]) + d[i])).collect()
    };
    let mut dp = comb(&k1p, &k2p, &k3p, &k4p);
    let dphi = comb(&k1f, &k2f, &k3f, &k4f);
    // renormalize: put the total back to 1
    let new_p: Vec<T> = (0..n).map(|i| p[i] + dp[i]).collect();
    if !new_p.iter().all(|&x| x >= T::zero()) {
        return None;
    }
    let total: T = new_p.iter().copied().sum();
    for i in 0..n {
        dp[i] = new_p[i] / total - p[i];
    }
    Some((dp, dphi))
}

fn amplitudes<T: Real>(p: &[T], phi: &[T]) -> Vec<Complex<T>> {
    p.iter().zip(phi).map(|(&p, &f)| Complex::from_polar(p.max(T::zero()).sqrt(), f)).collect()
}

/// Increment that takes `(p, φ)` to the polar form of `psi`, keeping each phase
/// on the branch nearest its previous value.
fn increment_to<T: Real>(p: &[T], phi: &[T], psi: &[Complex<T>]) -> (Vec<T>, Vec<T>) {
    let dp = psi.iter().zip(p).map(|(z, &p)| z.norm_sqr() - p).collect();
    let dphi = psi
        .iter()
        .zip(phi)
        .map(|(z, &f)| if z.norm_sqr() == T::zero() { T::zero() } else { wrap_angle(z.arg() - f) })
        .collect();
    (dp, dphi)
}

/// Implicit midpoint on `iψ̇ = Hψ` (fixed-point solved); same scheme, amplitude chart.
fn midpoint_amplitude<T: Real>(m: &ComplexMatrix<T>, psi: &[Complex<T>], dt: T) -> Option<Vec<Complex<T>>> {
    let n = psi.len();
    let coef = Complex::new(T::zero(), -dt * T::half());
    let h0 = m.matvec(psi);
    let mut next: Vec<Complex<T>> = (0..n).map(|k| psi[k] + coef * h0[k] * T::two()).collect();
    let tol = T::of(SOLVE_TOL);
    for _ in 0..SOLVE_MAX_ITER {
        let h1 = m.matvec(&next);
        let cand: Vec<Complex<T>> = (0..n).map(|k| psi[k] + coef * (h0[k] + h1[k])).collect();
        let delta = cand.iter().zip(&next).map(|(a, b)| (a - b).norm()).fold(T::zero(), T::max);
        let finite = cand.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        next = cand;
        if !finite {
            return None;
        }
        if delta <= tol {
            return Some(next);
        }
    }
    None
}

fn rk4_amplitude<T: Real>(m: &ComplexMatrix<T>, psi: &[Complex<T>], dt: T) -> Option<Vec<Complex<T>>> {
    let n = psi.len();
    let mi = Complex::new(T::zero(), -T::one());
    let field = |v: &[Complex<T>]| -> Vec<Complex<T>> { m.matvec(v).into_iter().map(|z| z * mi).collect() };
    let shift = |a: T, k: &[Complex<T>]| -> Vec<Complex<T>> { (0..n).map(|i| psi[i] + k[i] * a).collect() };
    let k1 = field(psi);
    let k2 = field(&shift(dt * T::half(), &k1));
    let k3 = field(&shift(dt * T::half(), &k2));
    let k4 = field(&shift(dt, &k3));
    let sixth = dt / T::of(6.0);
    let out: Vec<Complex<T>> = (0..n).map(|i| psi[i] + (k1[i] + (k2[i] + k3[i]) * T::two() + k4[i]) * sixth).collect();
    let norm = out.iter().map(Complex::norm_sqr).sum::<T>().sqrt();
    if !(norm > T::zero()) || !norm.is_finite() {
        return None;
    }
    Some(out.into_iter().map(|z| z / norm).collect())
}

type Increment<T> = (Vec<T>, Vec<T>, Option<ChartSwitchReason>);

fn attempt<T: Real>(m: &ComplexMatrix<T>, method: Method, p: &[T], phi: &[T], dt: T) -> Option<Increment<T>> {
    let reason = if p.iter().any(|&x| x < T::of(EPS_DYN)) {
        ChartSwitchReason::NearBoundary
    } else {
        let polar = match method {
            Method::ImplicitMidpoint => midpoint_polar(m, p, phi, dt),
            Method::Rk4Renormalized => rk4_polar(m, p, phi, dt),
        };
        if let Some((dp, dphi)) = polar {
            return Some((dp, dphi, None));
        }
        ChartSwitchReason::PolarSolveFailed
    };
    let psi = amplitudes(p, phi);
    let next = match method {
        Method::ImplicitMidpoint => midpoint_amplitude(m, &psi, dt),
        Method::Rk4Renormalized => rk4_amplitude(m, &psi, dt),
    }?;
    let (dp, dphi) = increment_to(p, phi, &next);
    Some((dp, dphi, Some(reason)))
}

/// Running sum with Kahan compensation, so that many small increments do not
/// accumulate rounding drift.
struct Compensated<T> {
    value: Vec<T>,
    carry: Vec<T>,
}

impl<T: Real> Compensated<T> {
    fn new(value: Vec<T>) -> Self {
        let carry = vec![T::zero(); value.len()];
        Self { value, carry }
    }

    fn add(&mut self, inc: &[T]) {
        for ((v, c), &d) in self.value.iter_mut().zip(&mut self.carry).zip(inc) {
            let y = d - *c;
            let t = *v + y;
            *c = (t - *v) - y;
            *v = t;
        }
    }
}

fn step_count<T: Real>(t_final: T, dt: T) -> usize {
    let ratio = (t_final / dt).as_f64();
    if ratio <= 0.0 {
        0
    } else {
        (ratio - 1e-9).ceil().max(1.0) as usize
    }
}

/// Integrates the canonical equations from `s0` to `t_final`.
///
/// Steps are `dt` except for a shortened last step ending exactly at
/// `t_final`. A step whose solve fails in both charts is retried once as two
/// half steps before [`Error::StepRejected`] is returned.
pub fn evolve<T: Real>(
    s0: &Preparation<T>,
    h: &HermitianOperator<T>,
    t_final: T,
    dt: T,
    method: Method,
) -> Result<Trajectory<T>> {
    check_dim(h.dim(), s0.dim())?;
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("dt must be positive and finite, got {dt}")));
    }
    if !(t_final >= T::zero()) || !t_final.is_finite() {
        return Err(Error::InvalidArgument(format!("t_final must be nonnegative and finite, got {t_final}")));
    }
    let m = h.matrix();
    let steps = step_count(t_final, dt);
    let mut p = Compensated::new(s0.p().to_vec());
    let mut phi = Compensated::new(s0.phi().to_vec());
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut energy = Vec::with_capacity(steps + 1);
    let mut chart_switches = Vec::new();
    let record = |p: &[T], phi: &[T], states: &mut Vec<Preparation<T>>, energy: &mut Vec<T>| -> Result<()> {
        energy.push(real_part(mean_value_complex(m, p, phi), m)?);
        states.push(Preparation::from_parts_unchecked(p.to_vec(), phi.to_vec()));
        Ok(())
    };
    times.push(T::zero());
    record(&p.value, &phi.value, &mut states, &mut energy)?;
    for k in 0..steps {
        let t0 = dt * T::of(k as f64);
        let t1 = if k + 1 == steps { t_final } else { dt * T::of((k + 1) as f64) };
        let h_step = t1 - t0;
        match attempt(m, method, &p.value, &phi.value, h_step) {
            Some((dp, dphi, reason)) => {
                p.add(&dp);
                phi.add(&dphi);
                if let Some(reason) = reason {
                    chart_switches.push(ChartSwitch { step: k, t: t0, reason });
                }
            }
            None => {
                let half = h_step * T::half();
                let mut switched = None;
                for _ in 0..2 {
                    let (dp, dphi, reason) =
                        attempt(m, method, &p.value, &phi.value, half).ok_or(Error::StepRejected {
                            t: t0.as_f64(),
                            dt: h_step.as_f64(),
                            iterations: SOLVE_MAX_ITER,
                        })?;
                    p.add(&dp);
                    phi.add(&dphi);
                    switched = switched.or(reason);
                }
                if let Some(reason) = switched {
                    chart_switches.push(ChartSwitch { step: k, t: t0, reason });
                }
            }
        }
        times.push(t1);
        record(&p.value, &phi.value, &mut states, &mut energy)?;
    }
    Ok(Trajectory { times, states, energy, dt, method, chart_switches })
}

/// `max_k |ℋ(t_k) − ℋ(0)|`.
pub fn conserved_energy_drift<T: Real>(traj: &Trajectory<T>) -> T {
    let e0 = traj.energy[0];
    traj.energy.iter().map(|&e| (e - e0).abs()).fold(T::zero(), T::max)
}

/// Time-`t` map of the polar implicit-midpoint flow on raw coordinates.
fn polar_flow<T: Real>(m: &ComplexMatrix<T>, p: &[T], phi: &[T], t: T) -> Result<(Vec<T>, Vec<T>)> {
    let steps = step_count(t.abs(), T::of(FLOW_PROBE_DT)).max(1);
    let dt = t / T::of(steps as f64);
    let eps = T::of(EPS_DYN);
    let mut zp = Compensated::new(p.to_vec());
    let mut zf = Compensated::new(phi.to_vec());
    for k in 0..steps {
        let now = dt * T::of(k as f64);
        if let Some((index, &value)) = zp.value.iter().enumerate().find(|(_, &x)| x < eps) {
            return Err(Error::BoundaryCrossing { t: now.as_f64(), index, value: value.as_f64() });
        }
        let (dp, dphi) = midpoint_polar(m, &zp.value, &zf.value, dt).ok_or_else(|| {
            let (index, value) = zp
                .value
                .iter()
                .copied()
                .enumerate()
                .min_by(|a, b| a.1.partial_cmp(&b.1).expect("finite"))
                .expect("nonempty");
            if value < T::of(1e-4) {
                Error::BoundaryCrossing { t: now.as_f64(), index, value: value.as_f64() }
            } else {
                Error::StepRejected { t: now.as_f64(), dt: dt.as_f64(), iterations: SOLVE_MAX_ITER }
            }
        })?;
        zp.add(&dp);
        zf.add(&dphi);
    }
    Ok((zp.value, zf.value))
}

/// `|det ∂Φ_t/∂z − 1|` for the time-`t` flow `Φ_t` on the 2n raw coordinates
/// `z = (p, φ)`, with the Jacobian taken by central differences of step
/// `probe`. The flow is integrated with implicit midpoint at step
/// `FLOW_PROBE_DT` in the polar chart only.
pub fn flow_volume_residual<T: Real>(h: &HermitianOperator<T>, s: &Preparation<T>, t: T, probe: T) -> Result<T> {
    check_dim(h.dim(), s.dim())?;
    if !(probe > T::zero()) {
        return Err(Error::InvalidArgument(format!("probe step must be positive, got {probe}")));
    }
    if t == T::zero() {
        return Ok(T::zero());
    }
    let n = s.dim();
    s.require_interior(T::of(EPS_DYN) + probe)?;
    let m = h.matrix();
    let mut jac = Matrix::zeros(2 * n, 2 * n);
    for col in 0..2 * n {
        let shifted = |sign: T| -> Result<Vec<T>> {
            let mut p = s.p().to_vec();
            let mut phi = s.phi().to_vec();
            if col < n {
                p[col] += sign * probe;
            } else {
                phi[col - n] += sign * probe;
            }
            let (p, phi) = polar_flow(m, &p, &phi, t)?;
            Ok(p.into_iter().chain(phi).collect())
        };
        let plus = shifted(T::one())?;
        let minus = shifted(-T::one())?;
        for row in 0..2 * n {
            jac[(row, col)] = (plus[row] - minus[row]) / (T::two() * probe);
        }
    }
    Ok((jac.determinant() - T::one()).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert_oracle::{commutator_rate, propagate, to_amplitudes, to_preparation};
    use crate::prep_state::prep_distance_check;
    use crate::random::{random_hermitian, random_preparation, seeded};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn prep(p: &[f64], phi: &[f64]) -> Preparation<f64> {
        Preparation::new(p.to_vec(), phi.to_vec()).unwrap()
    }

    #[test]
    fn mean_value_examples() {
        let h = HermitianOperator::diagonal(&[1.0, 2.0, 4.0]);
        let s = prep(&[0.2, 0.3, 0.5], &[0.4, -1.0, 2.0]);
        assert!((mean_value(&s, &h).unwrap() - (0.2 + 0.6 + 2.0)).abs() < 1e-15);
        let x = HermitianOperator::pauli_x();
        assert_eq!(mean_value(&prep(&[1.0, 0.0], &[0.0, 0.0]), &x).unwrap(), 0.0);
        assert!((mean_value(&prep(&[0.5, 0.5], &[0.0, 0.0]), &x).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rhs_examples() {
        let h = HermitianOperator::diagonal(&[1.0, 2.0]);
        let d = hamilton_rhs(&prep(&[0.3, 0.7], &[0.1, 0.2]), &h).unwrap();
        assert_eq!(d.dp, vec![0.0, 0.0]);
        assert_eq!(d.dphi, vec![-1.0, -2.0]);
        let d = hamilton_rhs(&prep(&[0.3, 0.7], &[0.1, 0.2]), &HermitianOperator::zero(2)).unwrap();
        assert!(d.dp.iter().chain(&d.dphi).all(|&x| x == 0.0));

        // σ_x at ψ = (1, i)/√2: ψ̇ = −iσ_x ψ = (1, −i)/√2, so ṗ = 2Re(ψ̄ψ̇) = (1, −1)
        let s = prep(&[0.5, 0.5], &[0.0, FRAC_PI_2]);
        let d = hamilton_rhs(&s, &HermitianOperator::pauli_x()).unwrap();
        assert!((d.dp[0] - 1.0).abs() < 1e-15 && (d.dp[1] + 1.0).abs() < 1e-15);
        assert!(d.dphi.iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn rhs_matches_finite_differences() {
        let mut rng = seeded(31);
        for n in 2..=4 {
            for _ in 0..10 {
                let h = HermitianOperator::new(random_hermitian(n, 1.5, &mut rng)).unwrap();
                let s: Preparation<f64> = random_preparation(n, 1e-2, &mut rng);
                let (gp, gphi) = mean_value_gradient(&s, &h).unwrap();
                let m = h.matrix();
                let f = |p: &[f64], phi: &[f64]| mean_value_complex(m, p, phi).re;
                let e = 1e-6;
                for k in 0..n {
                    let mut pp = s.p().to_vec();
                    let mut pm = pp.clone();
                    pp[k] += e;
                    pm[k] -= e;
                    let fd = (f(&pp, s.phi()) - f(&pm, s.phi())) / (2.0 * e);
                    assert!((fd - gp[k]).abs() <= 1e-6 * gp[k].abs().max(1.0), "{fd} {}", gp[k]);
                    let mut fp = s.phi().to_vec();
                    let mut fm = fp.clone();
                    fp[k] += e;
                    fm[k] -= e;
                    let fd = (f(s.p(), &fp) - f(s.p(), &fm)) / (2.0 * e);
                    assert!((fd - gphi[k]).abs() <= 1e-6 * gphi[k].abs().max(1.0));
                }
                let d = hamilton_rhs(&s, &h).unwrap();
                assert!(d.dp.iter().sum::<f64>().abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn rhs_rejects_boundary() {
        let r = hamilton_rhs(&prep(&[1.0, 0.0], &[0.0, 0.0]), &HermitianOperator::pauli_x());
        assert!(matches!(r, Err(Error::BoundaryState { index: 1, .. })));
    }

    #[test]
    fn poisson_examples() {
        let s = prep(&[0.5, 0.5], &[0.0, FRAC_PI_2]);
        let z = HermitianOperator::pauli_z();
        let x = HermitianOperator::pauli_x();
        assert!((poisson_bracket(&z, &x, &s).unwrap() - 2.0).abs() < 1e-14);
        assert!(poisson_bracket(&x, &x, &s).unwrap().abs() < 1e-15);
        let a = HermitianOperator::diagonal(&[1.0, -3.0]);
        let b = HermitianOperator::diagonal(&[0.5, 2.0]);
        assert_eq!(poisson_bracket(&a, &b, &s).unwrap(), 0.0);
    }

    #[test]
    fn poisson_matches_commutator() {
        let mut rng = seeded(8);
        for n in 2..=4 {
            for _ in 0..10 {
                let f = HermitianOperator::new(random_hermitian(n, 1.0, &mut rng)).unwrap();
                let g = HermitianOperator::new(random_hermitian(n, 1.0, &mut rng)).unwrap();
                let s: Preparation<f64> = random_preparation(n, 1e-3, &mut rng);
                let pb = poisson_bracket(&f, &g, &s).unwrap();
                let cr = commutator_rate(&f, &g, &to_amplitudes(&s)).unwrap();
                assert!((pb - cr).abs() <= 1e-9, "{pb} vs {cr}");
            }
        }
    }

    #[test]
    fn evolve_diagonal_closed_form() {
        let h = HermitianOperator::diagonal(&[1.0, 2.0]);
        let s0 = prep(&[0.3, 0.7], &[0.0, 0.0]);
        let traj = evolve(&s0, &h, 1.0, 1e-3, Method::ImplicitMidpoint).unwrap();
        let last = traj.final_state();
        assert_eq!(last.p(), s0.p());
        assert!((last.phi()[0] + 1.0).abs() < 1e-12 && (last.phi()[1] + 2.0).abs() < 1e-12);
        assert_eq!(traj.times().len(), 1001);
        assert_eq!(*traj.times().last().unwrap(), 1.0);
        assert!(conserved_energy_drift(&traj) <= 1e-14);
        assert!(traj.chart_switches().is_empty());
    }

    #[test]
    fn evolve_zero_hamiltonian_is_constant() {
        let s0 = prep(&[0.2, 0.8], &[0.3, -0.1]);
        for method in [Method::ImplicitMidpoint, Method::Rk4Renormalized] {
            let traj = evolve(&s0, &HermitianOperator::zero(2), 0.5, 0.01, method).unwrap();
            assert!(traj.states().iter().all(|s| s == &s0));
            assert_eq!(conserved_energy_drift(&traj), 0.0);
        }
    }

    #[test]
    fn evolve_from_pole_uses_amplitude_chart() {
        let s0 = prep(&[1.0, 0.0], &[0.0, 0.0]);
        let traj = evolve(&s0, &HermitianOperator::pauli_x(), FRAC_PI_4, 1e-3, Method::ImplicitMidpoint).unwrap();
        let p = traj.final_state().p();
        // the first polar steps after leaving the pole cost O(dt) in √p
        assert!((p[0] - 0.5).abs() < 2e-4 && (p[1] - 0.5).abs() < 2e-4, "{p:?}");
        let finer = evolve(&s0, &HermitianOperator::pauli_x(), FRAC_PI_4, 1e-4, Method::ImplicitMidpoint).unwrap();
        assert!((finer.final_state().p()[0] - 0.5).abs() < 2e-5);
        assert!(!traj.chart_switches().is_empty());
        assert_eq!(traj.chart_switches()[0].reason, ChartSwitchReason::NearBoundary);
        for s in traj.states() {
            assert!((s.p().iter().sum::<f64>() - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn evolve_tracks_oracle() {
        let mut rng = seeded(77);
        for n in [2, 3, 5] {
            let h = HermitianOperator::new(random_hermitian(n, 1.0, &mut rng)).unwrap();
            let s0: Preparation<f64> = random_preparation(n, 1e-2, &mut rng);
            for method in [Method::ImplicitMidpoint, Method::Rk4Renormalized] {
                let traj = evolve(&s0, &h, 1.0, 1e-3, method).unwrap();
                let exact = to_preparation(&propagate(&h, &to_amplitudes(&s0), 1.0).unwrap()).unwrap();
                let err = prep_distance_check(traj.final_state(), &exact).unwrap();
                assert!(err < 1e-5, "{method} n={n}: {err}");
            }
        }
    }

    #[test]
    fn midpoint_is_second_order() {
        let mut rng = seeded(4);
        let h = HermitianOperator::new(random_hermitian(3, 2.0, &mut rng)).unwrap();
        let s0: Preparation<f64> = random_preparation(3, 0.05, &mut rng);
        let exact = to_preparation(&propagate(&h, &to_amplitudes(&s0), 1.0).unwrap()).unwrap();
        let err = |dt: f64| {
            let traj = evolve(&s0, &h, 1.0, dt, Method::ImplicitMidpoint).unwrap();
            prep_distance_check(traj.final_state(), &exact).unwrap()
        };
        let ratio = err(2e-3) / err(1e-3);
        assert!((3.5..4.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn evolve_rejects_bad_arguments() {
        let s0 = prep(&[0.5, 0.5], &[0.0, 0.0]);
        let h = HermitianOperator::pauli_x();
        assert!(evolve(&s0, &h, 1.0, 0.0, Method::ImplicitMidpoint).is_err());
        assert!(evolve(&s0, &h, -1.0, 0.1, Method::ImplicitMidpoint).is_err());
        let h = HermitianOperator::new(HermitianOperator::<f64>::pauli_x().matrix().map(|z| z * 1e4)).unwrap();
        assert!(matches!(evolve(&s0, &h, 1.0, 0.1, Method::ImplicitMidpoint), Err(Error::StepRejected { .. })));
    }

    #[test]
    fn flow_volume_examples() {
        let s = prep(&[0.4, 0.6], &[0.2, -0.5]);
        let x = HermitianOperator::pauli_x();
        assert_eq!(flow_volume_residual(&x, &s, 0.0, 1e-5).unwrap(), 0.0);
        let d = HermitianOperator::diagonal(&[0.3, -1.2]);
        assert!(flow_volume_residual(&d, &s, 0.8, 1e-5).unwrap() <= 1e-10);
        assert!(flow_volume_residual(&x, &s, 0.5, 1e-5).unwrap() <= 1e-4);
    }

    #[test]
    fn flow_volume_reports_boundary_crossing() {
        // heads straight for the pole p = (1, 0), reached at t = 0.3
        let (c, sn) = (0.3f64.cos(), 0.3f64.sin());
        let s = prep(&[c * c, sn * sn], &[0.0, FRAC_PI_2]);
        let r = flow_volume_residual(&HermitianOperator::pauli_x(), &s, 1.0, 1e-5);
        assert!(matches!(r, Err(Error::BoundaryCrossing { .. })), "{r:?}");
    }

    #[test]
    fn method_names_round_trip() {
        for m in [Method::ImplicitMidpoint, Method::Rk4Renormalized] {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{m}\""));
        }
        assert!("euler".parse::<Method>().is_err());
    }
}
