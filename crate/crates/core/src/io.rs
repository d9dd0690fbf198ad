//! Wire formats: problem and request JSON, trajectory CSV.
//!
//! CSV floats are written with 17 significant digits; JSON floats use the
//! shortest representation that parses back to the same value.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::bloch2::to_sphere;
use crate::dynamics::{HermitianOperator, Method, Trajectory};
use crate::error::{Error, Result};
use crate::frame_transform::{frame_from_unitary, probability_split, validate_frame, FrameChange};
use crate::linalg::{ComplexMatrix, ComplexMatrixJson};
use crate::metric::{fubini_study_angle, line_element2};
use crate::prep_state::{check_dim, Preparation, TangentDisplacement};
use crate::scalar::{wrap_angle, Real};

/// `{"hamiltonian": {"re", "im"}, "initial": {"p", "phi"}, "t_final", "dt", "method"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", deny_unknown_fields)]
pub struct EvolveProblem<T> {
    pub hamiltonian: HermitianOperator<T>,
    pub initial: Preparation<T>,
    pub t_final: T,
    pub dt: T,
    #[serde(default)]
    pub method: Method,
}

/// A state and a frame, given either as `(w, β)` or as a unitary.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Real", deny_unknown_fields)]
pub struct TransformRequest<T> {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<FrameChange<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unitary: Option<ComplexMatrixJson<T>>,
    pub state: Preparation<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct TransformReport<T> {
    pub state: Preparation<T>,
    pub classical: Vec<T>,
    pub interference: Vec<T>,
    pub interference_sum: T,
    pub frame_residual: T,
}

pub fn run_transform<T: Real>(req: &TransformRequest<T>) -> Result<TransformReport<T>> {
    let frame = match (&req.frame, &req.unitary) {
        (Some(f), None) => f.clone(),
        (None, Some(u)) => frame_from_unitary(&ComplexMatrix::try_from(u.clone())?)?,
        _ => return Err(Error::InvalidArgument("give exactly one of \"frame\" and \"unitary\"".into())),
    };
    let split = probability_split(&frame, &req.state)?;
    let interference_sum = split.interference.iter().copied().sum();
    Ok(TransformReport {
        state: split.transformed,
        classical: split.classical,
        interference: split.interference,
        interference_sum,
        frame_residual: validate_frame(&frame).max_residual,
    })
}

/// Two states; the displacement between them is multiplied by `scale`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Real", deny_unknown_fields)]
pub struct DistanceRequest<T> {
    pub from: Preparation<T>,
    pub to: Preparation<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct DistanceReport<T> {
    pub scale: T,
    pub classical_part: T,
    pub variance_part: T,
    pub total: T,
    pub line_element: T,
    pub fubini_study_angle: T,
}

/// Line element of `scale · (to − from)`, with the phase difference wrapped,
/// evaluated at the mean of the two probability vectors; plus the ray angle.
pub fn run_distance<T: Real>(req: &DistanceRequest<T>) -> Result<DistanceReport<T>> {
    check_dim(req.from.dim(), req.to.dim())?;
    let scale = req.scale.unwrap_or(T::one());
    if !scale.is_finite() {
        return Err(Error::InvalidArgument(format!("scale must be finite, got {scale}")));
    }
    let (a, b) = (&req.from, &req.to);
    let mid: Vec<T> = a.p().iter().zip(b.p()).map(|(&x, &y)| (x + y) * T::half()).collect();
    let dp: Vec<T> = a.p().iter().zip(b.p()).map(|(&x, &y)| scale * (y - x)).collect();
    let dphi: Vec<T> = a.phi().iter().zip(b.phi()).map(|(&x, &y)| scale * wrap_angle(y - x)).collect();
    let at = Preparation::from_parts_unchecked(mid, a.phi().to_vec());
    let parts = line_element2(&at, &TangentDisplacement { dp, dphi })?;
    Ok(DistanceReport {
        scale,
        classical_part: parts.classical_part,
        variance_part: parts.variance_part,
        total: parts.total,
        line_element: parts.total.sqrt(),
        fubini_study_angle: fubini_study_angle(a, b)?,
    })
}

pub fn format_float<T: Real>(x: T) -> String {
    format!("{:.16e}", x.as_f64())
}

fn csv_err(e: impl std::fmt::Display) -> Error {
    Error::Output(e.to_string())
}

/// Columns `t, p_1..p_n, phi_1..phi_n, energy`; phases are unwrapped.
pub fn write_trajectory_csv<T: Real, W: Write>(traj: &Trajectory<T>, out: W) -> Result<()> {
    let n = traj.final_state().dim();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("p_{i}")));
    header.extend((1..=n).map(|i| format!("phi_{i}")));
    header.push("energy".into());
    w.write_record(&header).map_err(csv_err)?;
    for ((t, s), e) in traj.times().iter().zip(traj.states()).zip(traj.energy()) {
        let mut row = vec![format_float(*t)];
        row.extend(s.p().iter().map(|&x| format_float(x)));
        row.extend(s.phi().iter().map(|&x| format_float(x)));
        row.push(format_float(*e));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)
}

/// Columns `t, theta, phi` for a two-level trajectory.
pub fn write_bloch_csv<T: Real, W: Write>(traj: &Trajectory<T>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "theta", "phi"]).map_err(csv_err)?;
    for (t, s) in traj.times().iter().zip(traj.states()) {
        let pt = to_sphere(s)?;
        w.write_record([format_float(*t), format_float(pt.theta), format_float(pt.phi)]).map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)
}
