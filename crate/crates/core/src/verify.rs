//! Seeded self-check of the module invariants.
//!
//! Every check draws its cases from its own generator, seeded from the run seed,
//! the check name and the dimension, so results do not depend on which checks
//! run or in what order. Checks run in parallel; the report is sorted by
//! `(check, n)`.

use num_complex::Complex;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bloch2::{
    cosine_law_theta, evolve_two_level, from_sphere, rotation_frame, sphere_displacement, sphere_line_element2,
    to_sphere, SpherePoint,
};
use crate::dynamics::{
    evolve, flow_volume_residual, hamilton_rhs, mean_value, mean_value_at, mean_value_gradient, poisson_bracket,
    HermitianOperator, Method,
};
use crate::error::{Error, Result};
use crate::frame_transform::{
    apply_frame, compose, frame_from_unitary, frame_jacobian, jacobian_fd_mismatch, real_pair_validate, to_real_pair,
    validate_frame, FrameChange,
};
use crate::hilbert_oracle::{
    apply_unitary, commutator_rate, expectation, propagate, to_amplitudes, to_preparation, AmplitudeVector, Propagator,
};
use crate::linalg::ComplexMatrix;
use crate::metric::{fubini_study_angle, invariance_residual, line_element2, line_element2_cartesian_route};
use crate::prep_state::{
    from_cartesian, gauge_fix, prep_distance_check, to_cartesian, Preparation, TangentDisplacement,
};
use crate::random::{haar_unitary, random_hermitian, random_preparation, random_tangent, seeded, CaseRng};
use crate::scalar::wrap_angle;

pub const DEFAULT_SEED: u64 = 42;
/// Integration step used by the dynamics checks unless overridden.
pub const DEFAULT_DT: f64 = 1e-4;
/// Horizon of the dynamics oracle check unless overridden.
pub const DEFAULT_T_FINAL: f64 = 5.0;
pub const MAX_DIM: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Replaces every per-check tolerance when set.
    pub tolerance: Option<f64>,
    /// Restricts dimension-generic checks to this `n`.
    pub n: Option<usize>,
    pub dt: f64,
    pub t_final: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { seed: DEFAULT_SEED, tolerance: None, n: None, dt: DEFAULT_DT, t_final: DEFAULT_T_FINAL }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub check: String,
    pub n: usize,
    pub cases: usize,
    /// `null` when a case errored.
    pub max_residual: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub dt: f64,
    pub t_final: f64,
    pub pass: bool,
    pub checks: Vec<CheckResult>,
}

type CheckFn = fn(&mut CaseRng, usize, &VerifyConfig) -> Result<Outcome>;

struct Check {
    name: &'static str,
    dims: &'static [usize],
    /// Checks tied to the two-level sphere ignore `--n`.
    fixed_dim: bool,
    tolerance: f64,
    run: CheckFn,
}

struct Outcome {
    cases: usize,
    max_residual: f64,
}

/// Running maximum in which NaN wins.
#[derive(Default)]
struct Worst {
    cases: usize,
    value: f64,
}

impl Worst {
    fn push(&mut self, r: f64) {
        self.cases += 1;
        if r.is_nan() || r > self.value || self.value.is_nan() {
            self.value = if self.value.is_nan() { f64::NAN } else { r };
        }
    }

    fn done(self) -> Result<Outcome> {
        Ok(Outcome { cases: self.cases, max_residual: self.value })
    }
}

const GENERIC: &[usize] = &[2, 3, 4];
const WIDE: &[usize] = &[2, 3, 4, 8];
const TWO: &[usize] = &[2];

fn checks() -> Vec<Check> {
    let c = |name, dims, tolerance, run| Check { name, dims, fixed_dim: false, tolerance, run };
    let two = |name, tolerance, run| Check { name, dims: TWO, fixed_dim: true, tolerance, run };
    vec![
        c("prep_state.cartesian_round_trip", WIDE, 1e-12, prep_cartesian_round_trip as CheckFn),
        c("prep_state.gauge_fix_idempotent", WIDE, 0.0, prep_gauge_idempotent),
        c("prep_state.phase_shift_invariance", WIDE, 1e-12, prep_phase_shift),
        c("prep_state.chart_normalization", WIDE, 1e-12, prep_chart_normalization),
        c("frame_transform.probability_conservation", WIDE, 1e-12, frame_probability_conservation),
        c("frame_transform.oracle_equivalence", WIDE, 1e-9, frame_oracle_equivalence),
        c("frame_transform.composition", WIDE, 1e-9, frame_composition),
        c("frame_transform.symplectic", GENERIC, 1e-8, frame_symplectic),
        c("frame_transform.jacobian_finite_difference", GENERIC, 1e-6, frame_jacobian_fd),
        c("frame_transform.unitary_constraints", WIDE, 1e-10, frame_unitary_constraints),
        c("frame_transform.real_pair_constraints", WIDE, 1e-10, frame_real_pair),
        c("metric.positivity", GENERIC, 1e-14, metric_positivity),
        c("metric.gauge_invariance", GENERIC, 1e-14, metric_gauge_invariance),
        c("metric.chart_consistency", GENERIC, 1e-10, metric_chart_consistency),
        c("metric.fubini_study_slope", GENERIC, 0.1, metric_fubini_study_slope),
        c("metric.frame_invariance", GENERIC, 1e-6, metric_frame_invariance),
        c("dynamics.gradient", GENERIC, 1e-6, dyn_gradient),
        c("dynamics.rhs_tangent", GENERIC, 1e-12, dyn_rhs_tangent),
        c("dynamics.oracle_equivalence", &[2, 4, 8], 1e-6, dyn_oracle_equivalence),
        c("dynamics.norm_conservation", GENERIC, 1e-10, dyn_norm_conservation),
        c("dynamics.energy_conservation", GENERIC, 1e-8, dyn_energy_conservation),
        c("dynamics.observable_rate", GENERIC, 1e-5, dyn_observable_rate),
        c("dynamics.frame_covariance", GENERIC, 1e-6, dyn_frame_covariance),
        c("dynamics.bracket_algebra", GENERIC, 1e-12, dyn_bracket_algebra),
        c("dynamics.bracket_commutator", GENERIC, 1e-9, dyn_bracket_commutator),
        c("dynamics.flow_volume", GENERIC, 1e-4, dyn_flow_volume),
        two("bloch2.chart_round_trip", 1e-12, bloch_round_trip),
        two("bloch2.line_element", 1e-10, bloch_line_element),
        two("bloch2.cosine_law", 1e-10, bloch_cosine_law),
        two("bloch2.free_evolution", 1e-9, bloch_free_evolution),
        two("bloch2.colatitude_constant", 1e-12, bloch_colatitude_constant),
        c("hilbert_oracle.unitarity", WIDE, 1e-12, oracle_unitarity),
        c("hilbert_oracle.group_property", WIDE, 1e-12, oracle_group_property),
        c("hilbert_oracle.norm_preservation", WIDE, 1e-12, oracle_norm_preservation),
        c("hilbert_oracle.global_phase", WIDE, 1e-14, oracle_global_phase),
        c("hilbert_oracle.round_trip", WIDE, 1e-12, oracle_round_trip),
    ]
}

/// Names of all checks, in report order.
pub fn check_names() -> Vec<&'static str> {
    let mut names: Vec<_> = checks().iter().map(|c| c.name).collect();
    names.sort_unstable();
    names
}

/// FNV-1a of the name, mixed with the seed and dimension (splitmix64 finalizer).
fn case_seed(seed: u64, name: &str, n: usize) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = h ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ (n as u64).rotate_left(32);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn run_verify(cfg: &VerifyConfig) -> Result<VerifyReport> {
    if let Some(n) = cfg.n {
        if !(2..=MAX_DIM).contains(&n) {
            return Err(Error::InvalidArgument(format!("n must be in 2..={MAX_DIM}, got {n}")));
        }
    }
    if !(cfg.dt > 0.0 && cfg.dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {}", cfg.dt)));
    }
    if !(cfg.t_final > 0.0 && cfg.t_final.is_finite()) {
        return Err(Error::InvalidArgument(format!("t_final must be positive, got {}", cfg.t_final)));
    }
    if let Some(t) = cfg.tolerance {
        if !(t >= 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance must be nonnegative, got {t}")));
        }
    }
    let all = checks();
    let jobs: Vec<(&Check, usize)> = all
        .iter()
        .flat_map(|c| {
            let dims: Vec<usize> = match cfg.n {
                Some(n) if !c.fixed_dim => vec![n],
                _ => c.dims.to_vec(),
            };
            dims.into_iter().map(move |n| (c, n))
        })
        .collect();
    let mut results: Vec<CheckResult> = jobs
        .par_iter()
        .map(|&(c, n)| {
            let mut rng = seeded(case_seed(cfg.seed, c.name, n));
            let tolerance = cfg.tolerance.unwrap_or(c.tolerance);
            match (c.run)(&mut rng, n, cfg) {
                Ok(o) => CheckResult {
                    check: c.name.to_string(),
                    n,
                    cases: o.cases,
                    max_residual: o.max_residual.is_finite().then_some(o.max_residual),
                    tolerance,
                    pass: o.max_residual <= tolerance,
                    error: None,
                },
                Err(e) => CheckResult {
                    check: c.name.to_string(),
                    n,
                    cases: 0,
                    max_residual: None,
                    tolerance,
                    pass: false,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    results.sort_by(|a, b| a.check.cmp(&b.check).then(a.n.cmp(&b.n)));
    let pass = results.iter().all(|r| r.pass);
    Ok(VerifyReport { seed: cfg.seed, dt: cfg.dt, t_final: cfg.t_final, pass, checks: results })
}

// ---- case generators ----

fn state(rng: &mut CaseRng, n: usize, floor: f64) -> Preparation<f64> {
    random_preparation(n, floor, rng)
}

/// Random state with one probability exactly zero.
fn boundary_state(rng: &mut CaseRng, n: usize) -> Preparation<f64> {
    let k = rng.random_range(0..n);
    let (mut p, mut phi) = if n == 2 {
        (vec![1.0], vec![rng.random_range(-3.0..3.0)])
    } else {
        let inner: Preparation<f64> = random_preparation(n - 1, 0.0, rng);
        (inner.p().to_vec(), inner.phi().to_vec())
    };
    p.insert(k, 0.0);
    phi.insert(k, rng.random_range(-3.0..3.0));
    Preparation::new(p, phi).expect("normalized")
}

fn unitary(rng: &mut CaseRng, n: usize) -> ComplexMatrix<f64> {
    haar_unitary(n, rng)
}

fn frame(rng: &mut CaseRng, n: usize) -> Result<(ComplexMatrix<f64>, FrameChange<f64>)> {
    let u = unitary(rng, n);
    let f = frame_from_unitary(&u)?;
    Ok((u, f))
}

fn hamiltonian(rng: &mut CaseRng, n: usize, max_norm: f64) -> Result<HermitianOperator<f64>> {
    let norm = rng.random_range(0.0..max_norm);
    HermitianOperator::new(random_hermitian(n, norm, rng))
}

fn oracle_state(s: &Preparation<f64>) -> Result<Preparation<f64>> {
    to_preparation(&to_amplitudes(s))
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn max_complex_diff(a: &[Complex<f64>], b: &[Complex<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Retries a case until it lands away from the chart boundary.
fn interior_case<T>(mut f: impl FnMut() -> Result<T>) -> Result<T> {
    let mut last = None;
    for _ in 0..100 {
        match f() {
            Err(e @ (Error::BoundaryState { .. } | Error::BoundaryCrossing { .. })) => last = Some(e),
            other => return other,
        }
    }
    Err(last.expect("at least one attempt"))
}

// ---- prep_state ----

fn mixed_state(rng: &mut CaseRng, n: usize, k: usize) -> Preparation<f64> {
    if k % 4 == 3 {
        boundary_state(rng, n)
    } else {
        state(rng, n, 0.0)
    }
}

fn prep_cartesian_round_trip(rng: &mut CaseRng, n: usize, _: &VerifyConfig) -> Result<Outcome> {
    let mut w = Worst::default();
    for k in 0..100 {
        let c = to_cartesian(&mixed_state(rng, n, k));
        let back = to_cartesian(&from_cartesian(&c)?);
        w.push(max_abs_diff(&c.x, &back.x).max(max_abs_diff(&c.y, &back.y)));
    }
    w.done()
}

fn prep_gauge_idempotent(rng: &mut CaseRng, n: usize, _: &VerifyConfig) -> Result<Outcome> {
    let mut w = Worst::default();
    for k in 0..100 {
        let g = gauge_fix(&mixed_state(rng, n, k));
        let gg = gauge_fix(&g);
        w.push(max_abs_diff(g.p(), gg.p()).max(max_abs_diff(g.phi(), gg.phi())));
    }
    w.done()
}

fn prep_phase_shift(rng: &mut CaseRng, n: usize, _: &VerifyConfig) -> Result<Outcome> {
    let mut w = Worst::default();
    for k in 0..100 {
        let s = mixed_state(rng, n, k);
        let c = rng.random_range(-10.0..10.0);
        w.push(prep_distance_check(&s, &s.shift_all_phases(c))?);
    }
    w.done()
}

fn prep_chart_normalization(rng: &mut CaseRng, n: usize, _: &VerifyConfig) -> Result<Outcome> {
    let mut w = Worst::default();
    for k in 0..100 {
        let s = mixed_state(rng, n, k);
        let back = from_cartesian(&to_cartesian(&s))?;
        w.push((back.p().iter().sum::<f64>() - s.p().iter().sum::<f64>()).abs());
    }
    w.done()
}

// ---- frame_transform ----

fn frame_probability_conservation(rng: &mut CaseRng, n: usize, _: &VerifyConfig) -> Result<Outcome> {
    let mut w = Worst::default();
    for k in 0..100 {
        let (_, f) = frame(rng, n)?;
        let s = mixed_state(rng, n, k);
        let (p, _) = f.map_coordinates(s.p(), s.phi());
        w.push((p.iter().sum::<f64>() - s.p().iter().sum::<f64>()).abs());
    }
    w.done()
}

fn frame_oracle_equivalence(rng: &mut CaseRng, n: usize, _: &VerifyConfig) -> Result<Outcome> {
    let mut w = Worst::default();
    for k in 0..100 {
        let (u, f) = frame(rng, n)?;
        let s = mixed_state(rng, n, k);
        let oracle = to_preparation(&apply_unitary(&u, &to_amplitudes(&s))?)?;
        w.push(prep_distance_check(&apply_frame(&f, &s)?, &oracle)?);
    }
    w.done()
}

fn frame_composition(rng: &mut CaseRng, n: usize, _: &VerifyConfig) -> Result<Outcome> {
    let mut w = Worst::default();
    for k in 0..100 {
        let (u1, f1) = frame(rng, n)?;
        let (u2, f2) = frame(rng, n)?;
        let s = mixed_state(rng, n, k);
        let stepwise = apply_frame(&f2, &apply_frame(&f1, &s)?)?;
        let product = apply_frame(&frame_from_unitary(&u1.matmul(&u2))?, &s)?;
        let composed = apply_frame(&compose(&f1, &f2)?, &s)?;
        w.push(prep_distance_check(&stepwise, &product)?.max(prep_distance_check(&stepwise, &composed)?));
    }
    w.done()
}

fn frame_symplectic(rng: &mut CaseRng, n: usize, _: &VerifyConfig) -> Result<Outcome> {
    let mut w = Worst::default();
    for _ in 0..20 {
        let (_, f) = frame(rng, n)?;
        for _ in 0..100 {
            let m = interior_case(|| frame_jacobian(&f, &state(rng, n, 1e-3)))?;
            w.push(m.residual());
        }
    }
    w.done()
}

fn frame_jacobian_fd(rng: &mut CaseRng, n: usize, _: &VerifyConfig) -> Result<Outcome> {
    let mut w = Worst::default();
    for _ in 0..50 {
        let (_, f) = frame(rng, n)?;
        w.push(interior_case(|| jacobian_fd_mismatch(&f, &state(rng, n, 1e-3), 1e-6))?);
    }
    w.done()
}

fn frame_unitary_constraints(rng: &mut CaseRng, n: usize, _: &VerifyConfig) -> Result<Outcome> {
    let mut w = Worst::default();
    for _ in 0..100 {
        let (_, f) = frame(rng, n)?;
        w.push(validate_frame(&f).max_residual);
    }
    w.done()
}

fn frame_real_pair(rng: &mut CaseRng, n: usize, _: &VerifyConfig) -> Result<Outcome> {
    let mut w = Worst::default();
    for _ in 0..100 {
        let (_, f) = frame(rng, n)?;
        w.push(real_pair_validate(&to_real_pair(&f)).max_residual);
    }
    w.done()
}

// ---- metric ----

fn metric_positivity(rng: &mut CaseRng, n: usize, _: &VerifyConfig) -> Result<Outcome> {
    let mut w = Worst::default();
    for _ in 0..100 {
        let s = state(rng, n, 1e-6);
        let d = random_tangent(&s, rng);
        w.push((-line_element2(&s, &d)?.total).max(0.0));
        let c = rng.random_range(-3.0..3.0);
        let gauge = TangentDisplacement::new(vec![0.0; n], vec![c; n])?;
        w.push(line_element2(&s, &gauge)?.total.abs());
    }
    w.done()
}

fn metric_gauge_invariance(rng: &mut CaseRng, n: usize, _: &VerifyConfig) -> Result<Outcome> {
    let mut w = Worst::default();
    for _ in 0..100 {
        let s = state(rng, n, 1e-6);
        let d = random_tangent(&s, rng);
        let c = rng.random_range(-3.0..3.0);
        let shifted = TangentDisplacement::new(d.dp.clone(), d.dphi.iter().map(|x| x + c).collect())?;
        let a = line_element2(&s, &d)?.total;
        let b = line_element2(&s, &shifted)?.total;
        w.push((a - b).abs() / a.max(1.0));
    }
    w.done()
}

fn metric_chart_consistency(rng: &mut CaseRng, n: usize, _: &VerifyConfig) -> Result<Outcome> {
    let mut w = Worst::default();
    for _ in 0..100 {
        let s = state(rng, n, 1e-3);
        let d = random_tangent(&s, rng);
        let a = line_element2(&s, &d)?.total;
        let b = line_element2_cartesian_route(&s, &d)?;
        w.push((a - b).abs() / a.max(1.0));
    }
    w.done()
}

/// Least-squares slope of `log |angle² − ε² ds²|` against `log ε`.
pub fn fubini_study_slope(s: &Preparation<f64>, d: &TangentDisplacement<f64>, scales: &[f64]) -> Result<f64> {
    let ds2 = line_element2(s, d)?.total;
    let mut pts = Vec::with_capacity(scales.len());
    for &e in scales {
        let angle = fubini_study_angle(s, &s.displaced(d, e)?)?;
        let gap = (angle * angle - e * e * ds2).abs();
        pts.push((e.ln(), gap.ln()));
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let num: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    Ok(num / den)
}

pub const FUBINI_STUDY_SCALES: [f64; 3] = [1e-2, 1e-3, 1e-4];

fn metric_fubini_study_slope(rng: &mut CaseRng, n: usize, _: &VerifyConfig) -> Result<Outcome> {
    let mut w = Worst::default();
    for _ in 0..20 {
        let slope = interior_case(|| {
            let s = state(rng, n, (0.3 / n as f64).min(0.05));
            let d = random_tangent(&s, rng);
            fubini_study_slope(&s, &d, &FUBINI_STUDY_SCALES)
        })?;
        // shortfall from cubic
        w.push((3.0 - slope).max(0.0));
    }
    w.done()
}

fn metric_frame_invariance(rng: &mut CaseRng, n: usize, _: &VerifyConfig) -> Result<Outcome> {
    let mut w = Worst::default();
    for _ in 0..50 {
        let r = interior_case(|| {
            let (_, f) = frame(rng, n)?;
            let s = state(rng, n, 1e-3);
            let d = random_tangent(&s, rng);
            invariance_residual(&f, &s, &d, 1e-5)
        })?;
        w.push(r);
    }
    w.done()
}

// ---- dynamics ----

fn dyn_gradient(rng: &mut CaseRng, n: usize, _: &VerifyConfig) -> Result<Outcome> {
    let mut w = Worst::default();
    let e = 1e-6;
    for _ in 0..100 {
        let h = hamiltonian(rng, n, 2.0)?;
        let s = state(rng, n, 1e-2);
        let (gp, gphi) = mean_value_gradient(&s, &h)?;
        for k in 0..n {
            let mut pp = s.p().to_vec();
            let mut pm = pp.clone();
            pp[k] += e;
            pm[k] -= e;
            let fd = (mean_value_at(&h, &pp, s.phi())? - mean_value_at(&h, &pm, s.phi())?) / (2.0 * e);
            w.push((fd - gp[k]).abs() / gp[k].abs().max(1.0));
            let mut fp = s.phi().to_vec();
            let mut fm = fp.clone();
            fp[k] += e;
            fm[k] -= e;
            let fd = (mean_value_at(&h, s.p(), &fp)? - mean_value_at(&h, s.p(), &fm)?) / (2.0 * e);
            w.push((fd - gphi[k]).abs() / gphi[k].abs().max(1.0));
        }
    }
    w.done()
}

fn dyn_rhs_tangent(rng: &mut CaseRng, n: usize, _: &VerifyConfig) -> Result<Outcome> {
    let mut w = Worst::default();
    for _ in 0..100 {
        let h = hamiltonian(rng, n, 2.0)?;
        let d = hamilton_rhs(&state(rng, n, 1e-6), &h)?;
        w.push(d.dp.iter().sum::<f64>().abs());
    }
    w.done()
}

/// Final-state mismatch between the canonical integrator and the oracle.
pub fn dynamics_oracle_mismatch(
    s0: &Preparation<f64>,
    h: &HermitianOperator<f64>,
    t: f64,
    dt: f64,
    method: Method,
) -> Result<f64> {
    let traj = evolve(s0, h, t, dt, method)?;
    let exact = to_preparation(&propagate(h, &to_amplitudes(s0), t)?)?;
    prep_distance_check(traj.final_state(), &exact)
}

fn dyn_oracle_equivalence(rng: &mut CaseRng, n: usize, cfg: &VerifyConfig) -> Result<Outcome> {
    let mut w = Worst::default();
    for _ in 0..5 {
        let h = hamiltonian(rng, n, 2.0)?;
        let s0 = state(rng, n, 0.0);
        w.push(dynamics_oracle_mismatch(&s0, &h, cfg.t_final, cfg.dt, Method::ImplicitMidpoint)?);
    }
    w.done()
}

fn dyn_norm_conservation(rng: &mut CaseRng, n: usize, cfg: &VerifyConfig) -> Result<Outcome> {
    let mut w = Worst::default();
    for k in 0..6 {
        let h = hamiltonian(rng, n, 2.0)?;
        let method = if k % 2 == 0 { Method::ImplicitMidpoint } else { Method::Rk4Renormalized };
        let traj = evolve(&mixed_state(rng, n, k), &h, 1.0, cfg.dt, method)?;
        for s in traj.states() {
            w.push((s.p().iter().sum::<f64>() - 1.0).abs());
        }
    }
    w.done()
}

fn dyn_energy_conservation(rng: &mut CaseRng, n: usize, cfg: &VerifyConfig) -> Result<Outcome> {
    let mut w = Worst::default();
    for _ in 0..3 {
        let h = hamiltonian(rng, n, 2.0)?;
        let traj = evolve(&state(rng, n, 1e-2), &h, 1e4 * cfg.dt, cfg.dt, Method::ImplicitMidpoint)?;
        w.push(crate::dynamics::conserved_energy_drift(&traj));
    }
    w.done()
}

fn dyn_observable_rate(rng: &mut CaseRng, n: usize, cfg: &VerifyConfig) -> Result<Outcome> {
    let mut w = Worst::default();
    for _ in 0..5 {
        let h = hamiltonian(rng, n, 2.0)?;
        let f = hamiltonian(rng, n, 2.0)?;
        let traj = evolve(&state(rng, n, 1e-2), &h, 1.0, cfg.dt, Method::ImplicitMidpoint)?;
        let states = traj.states();
        let times = traj.times();
        let stride = (states.len() / 20).max(1);
        for k in (1..states.len() - 1).step_by(stride) {
            let rate =
                (mean_value(&states[k + 1], &f)? - mean_value(&states[k - 1], &f)?) / (times[k + 1] - times[k - 1]);
            w.push((rate - poisson_bracket(&f, &h, &states[k])?).abs());
        }
    }
    w.done()
}

fn dyn_frame_covariance(rng: &mut CaseRng, n: usize, cfg: &VerifyConfig) -> Result<Outcome> {
    let mut w = Worst::default();
    for _ in 0..5 {
        let h = hamiltonian(rng, n, 2.0)?;
        let (u, f) = frame(rng, n)?;
        let s0 = state(rng, n, 1e-2);
        let a = apply_frame(&f, evolve(&s0, &h, 1.0, cfg.dt, Method::ImplicitMidpoint)?.final_state())?;
        let b = evolve(&apply_frame(&f, &s0)?, &h.in_frame(&u)?, 1.0, cfg.dt, Method::ImplicitMidpoint)?;
        w.push(prep_distance_check(&a, b.final_state())?);
    }
    w.done()
}

fn dyn_bracket_algebra(rng: &mut CaseRng, n: usize, _: &VerifyConfig) -> Result<Outcome> {
    let mut w = Worst::default();
    for _ in 0..100 {
        let f = hamiltonian(rng, n, 2.0)?;
        let g = hamiltonian(rng, n, 2.0)?;
        let k = hamiltonian(rng, n, 2.0)?;
        let s = state(rng, n, 1e-3);
        let (a, b) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let fg = poisson_bracket(&f, &g, &s)?;
        let gf = poisson_bracket(&g, &f, &s)?;
        w.push((fg + gf).abs() / fg.abs().max(1.0));
        let combo = HermitianOperator::new(ComplexMatrix::from_fn(n, n, |i, j| {
            f.matrix()[(i, j)] * a + g.matrix()[(i, j)] * b
        }))?;
        let lhs = poisson_bracket(&combo, &k, &s)?;
        let fk = poisson_bracket(&f, &k, &s)?;
        let gk = poisson_bracket(&g, &k, &s)?;
        let scale = (a * fk).abs().max((b * gk).abs()).max(1.0);
        w.push((lhs - a * fk - b * gk).abs() / scale);
    }
    w.done()
}

fn dyn_bracket_commutator(rng: &mut CaseRng, n: usize, _: &VerifyConfig) -> Result<Outcome> {
    let mut w = Worst::default();
    for _ in 0..100 {
        let f = hamiltonian(rng, n, 2.0)?;
        let g = hamiltonian(rng, n, 2.0)?;
        let s = state(rng, n, 1e-3);
        let pb = poisson_bracket(&f, &g, &s)?;
        w.push((pb - commutator_rate(&f, &g, &to_amplitudes(&s))?).abs());
    }
    w.done()
}

fn dyn_flow_volume(rng: &mut CaseRng, n: usize, _: &VerifyConfig) -> Result<Outcome> {
    let mut w = Worst::default();
    for _ in 0..4 {
        let r = interior_case(|| {
            let h = hamiltonian(rng, n, 2.0)?;
            let t = rng.random_range(0.0..1.0);
            flow_volume_residual(&h, &state(rng, n, 0.02), t, 1e-5)
        })?;
        w.push(r);
    }
    w.done()
}

// ---- bloch2 ----

fn sphere_point(rng: &mut CaseRng) -> Result<SpherePoint<f64>> {
    let theta = rng.random_range(1e-3..std::f64::consts::PI - 1e-3);
    SpherePoint::new(theta, rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
}

fn bloch_round_trip(rng: &mut CaseRng, _: usize, _: &VerifyConfig) -> Result<Outcome> {
    let mut w = Worst::default();
    for _ in 0..100 {
        let pt = sphere_point(rng)?;
        let back = to_sphere(&from_sphere(&pt))?;
        w.push((back.theta - pt.theta).abs().max(wrap_angle(back.phi - pt.phi).abs()));
    }
    w.done()
}

fn bloch_line_element(rng: &mut CaseRng, _: usize, _: &VerifyConfig) -> Result<Outcome> {
    let mut w = Worst::default();
    for _ in 0..100 {
        let pt = sphere_point(rng)?;
        let (dt, dp) = (rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1));
        let general = line_element2(&from_sphere(&pt), &sphere_displacement(&pt, dt, dp))?.total;
        w.push((general - sphere_line_element2(&pt, dt, dp)).abs());
    }
    w.done()
}

fn bloch_cosine_law(rng: &mut CaseRng, _: usize, _: &VerifyConfig) -> Result<Outcome> {
    let mut w = Worst::default();
    for _ in 0..100 {
        let alpha = rng.random_range(0.0..std::f64::consts::PI);
        let beta = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let pt = sphere_point(rng)?;
        let image = apply_frame(&rotation_frame(alpha, beta), &from_sphere(&pt))?;
        w.push((to_sphere(&image)?.theta - cosine_law_theta(&pt, alpha, beta)).abs());
    }
    w.done()
}

fn two_level_runs(
    rng: &mut CaseRng,
    cfg: &VerifyConfig,
    mut each: impl FnMut(&SpherePoint<f64>, f64, f64, f64, &SpherePoint<f64>),
) -> Result<usize> {
    let mut runs = 0;
    for _ in 0..3 {
        let pt = sphere_point(rng)?;
        let (e1, e2) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let h = HermitianOperator::diagonal(&[e1, e2]);
        let dt = cfg.dt.max(1e-3);
        let traj = evolve(&from_sphere(&pt), &h, 10.0, dt, Method::ImplicitMidpoint)?;
        for (t, s) in traj.times().iter().zip(traj.states()) {
            each(&pt, e1, e2, *t, &to_sphere(s)?);
        }
        runs += 1;
    }
    Ok(runs)
}

fn bloch_free_evolution(rng: &mut CaseRng, _: usize, cfg: &VerifyConfig) -> Result<Outcome> {
    let mut w = Worst::default();
    two_level_runs(rng, cfg, |pt, e1, e2, t, got| {
        let want = evolve_two_level(pt, e1, e2, t);
        w.push(wrap_angle(got.phi - want.phi).abs());
    })?;
    w.done()
}

fn bloch_colatitude_constant(rng: &mut CaseRng, _: usize, cfg: &VerifyConfig) -> Result<Outcome> {
    let mut w = Worst::default();
    two_level_runs(rng, cfg, |pt, _, _, _, got| w.push((got.theta - pt.theta).abs()))?;
    w.done()
}

// ---- hilbert_oracle ----

fn oracle_unitarity(rng: &mut CaseRng, n: usize, _: &VerifyConfig) -> Result<Outcome> {
    let mut w = Worst::default();
    for _ in 0..50 {
        let h = hamiltonian(rng, n, 2.0)?;
        let t = rng.random_range(-10.0..10.0);
        w.push(Propagator::new(&h).unitary(t).unitarity_residual());
    }
    w.done()
}

fn oracle_group_property(rng: &mut CaseRng, n: usize, _: &VerifyConfig) -> Result<Outcome> {
    let mut w = Worst::default();
    for _ in 0..50 {
        let h = hamiltonian(rng, n, 2.0)?;
        let v = to_amplitudes(&state(rng, n, 0.0));
        let (t1, t2) = (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        let once = propagate(&h, &v, t1 + t2)?;
        let twice = propagate(&h, &propagate(&h, &v, t1)?, t2)?;
        w.push(max_complex_diff(once.amplitudes(), twice.amplitudes()));
    }
    w.done()
}

fn norm(v: &AmplitudeVector<f64>) -> f64 {
    v.amplitudes().iter().map(Complex::norm_sqr).sum::<f64>().sqrt()
}

fn oracle_norm_preservation(rng: &mut CaseRng, n: usize, _: &VerifyConfig) -> Result<Outcome> {
    let mut w = Worst::default();
    for _ in 0..50 {
        let h = hamiltonian(rng, n, 2.0)?;
        let v = to_amplitudes(&state(rng, n, 0.0));
        let t = rng.random_range(-10.0..10.0);
        w.push((norm(&propagate(&h, &v, t)?) - 1.0).abs());
        w.push((norm(&apply_unitary(&unitary(rng, n), &v)?) - 1.0).abs());
    }
    w.done()
}

fn oracle_global_phase(rng: &mut CaseRng, n: usize, _: &VerifyConfig) -> Result<Outcome> {
    let mut w = Worst::default();
    for _ in 0..100 {
        let f = hamiltonian(rng, n, 2.0)?;
        let v = to_amplitudes(&state(rng, n, 0.0));
        let rotated = v.with_global_phase(rng.random_range(-10.0..10.0));
        w.push((expectation(&f, &v)? - expectation(&f, &rotated)?).abs());
    }
    w.done()
}

fn oracle_round_trip(rng: &mut CaseRng, n: usize, _: &VerifyConfig) -> Result<Outcome> {
    let mut w = Worst::default();
    for k in 0..100 {
        let s = mixed_state(rng, n, k);
        w.push(prep_distance_check(&oracle_state(&s)?, &s)?);
    }
    w.done()
}
