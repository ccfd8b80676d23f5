//! Trajectory-level metrics: boundary pose error, phase deviation,
//! Procrustes shape deviation and average jerk.
//!
//! Internal units are meters and radians; everything reported here is
//! converted to millimeters and degrees.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::data::{resample, PhaseSchedule, Pose, Trajectory, POSE_DIM};
use crate::error::{Error, Result};
use crate::linalg::rotation_angle_between;
use crate::reparam::TaskSpec;

/// Default number of resampled points for shape comparison.
pub const SHAPE_SAMPLES: usize = 200;

/// Translational and rotational magnitude of a pose difference.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PoseError {
    pub mm: f64,
    pub deg: f64,
}

impl PoseError {
    pub fn between(a: &Pose, b: &Pose) -> Self {
        PoseError {
            mm: (a.position - b.position).norm() * 1e3,
            deg: rotation_angle_between(&a.orientation, &b.orientation).to_degrees(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    #[default]
    None,
    Collision,
    Boundary,
    Invalid,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Jerk {
    /// m/s³
    pub linear: f64,
    /// deg/s³
    pub angular: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub success: bool,
    pub start_error: PoseError,
    pub goal_error: PoseError,
    pub grasp_deviation: PoseError,
    pub release_deviation: PoseError,
    pub shape_deviation: f64,
    pub jerk: Jerk,
    pub failure_reason: FailureReason,
}

impl EvalReport {
    pub fn is_well_formed(&self) -> bool {
        [
            self.start_error.mm,
            self.start_error.deg,
            self.goal_error.mm,
            self.goal_error.deg,
            self.grasp_deviation.mm,
            self.grasp_deviation.deg,
            self.release_deviation.mm,
            self.release_deviation.deg,
            self.shape_deviation,
            self.jerk.linear,
            self.jerk.angular,
        ]
        .iter()
        .all(|v| v.is_finite() && *v >= 0.0)
    }
}

fn require_pose(traj: &Trajectory) -> Result<()> {
    if traj.dim() == POSE_DIM {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "expected a {POSE_DIM}-D pose trajectory, got dimension {}",
            traj.dim()
        )))
    }
}

/// Error of the first and last poses against the task endpoints.
pub fn boundary_error(traj: &Trajectory, task: &TaskSpec) -> Result<(PoseError, PoseError)> {
    require_pose(traj)?;
    Ok((
        PoseError::between(&traj.first_pose(), &task.start),
        PoseError::between(&traj.last_pose(), &task.goal),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhaseDeviation {
    pub grasp: PoseError,
    pub release: PoseError,
}

/// Mean distance of the samples in `[t0, t1]` from their mean pose.
pub fn window_deviation(traj: &Trajectory, t0: f64, t1: f64) -> Result<PoseError> {
    require_pose(traj)?;
    let rows: Vec<&[f64]> = traj.window(t0, t1).map(|(_, r)| r).collect();
    if rows.len() < 2 {
        return Err(Error::invalid(format!(
            "phase window [{t0}, {t1}] holds {} samples, need at least 2",
            rows.len()
        )));
    }
    let n = rows.len() as f64;
    let mut mean = [0.0; POSE_DIM];
    for r in &rows {
        for (m, v) in mean.iter_mut().zip(r.iter()) {
            *m += v / n;
        }
    }
    let mean_pos = Vector3::new(mean[0], mean[1], mean[2]);
    let mean_rot = Vector3::new(mean[3], mean[4], mean[5]);
    let (mut pos, mut rot) = (0.0, 0.0);
    for r in &rows {
        pos += (Vector3::new(r[0], r[1], r[2]) - mean_pos).norm();
        rot += rotation_angle_between(&Vector3::new(r[3], r[4], r[5]), &mean_rot);
    }
    Ok(PoseError {
        mm: pos / n * 1e3,
        deg: (rot / n).to_degrees(),
    })
}

pub fn phase_deviation(traj: &Trajectory, phases: &PhaseSchedule) -> Result<PhaseDeviation> {
    let t0 = traj.start_time();
    Ok(PhaseDeviation {
        grasp: window_deviation(traj, t0, t0 + phases.grasp_end)?,
        release: window_deviation(traj, t0 + phases.release_start, traj.end_time())?,
    })
}

/// Positions resampled to `n` points, centered and scaled to unit Frobenius norm.
fn normalized_shape(traj: &Trajectory, n: usize) -> Result<Vec<Vector3<f64>>> {
    if traj.dim() < 3 {
        return Err(Error::invalid("shape comparison needs 3-D positions"));
    }
    let r = resample(traj, n)?;
    let pts = r.positions();
    let centroid = pts.iter().sum::<Vector3<f64>>() / n as f64;
    let centered: Vec<Vector3<f64>> = pts.iter().map(|p| p - centroid).collect();
    let norm = centered
        .iter()
        .map(|p| p.norm_squared())
        .sum::<f64>()
        .sqrt();
    if !(norm > 1e-12) {
        return Err(Error::invalid("trajectory positions are all identical"));
    }
    Ok(centered.into_iter().map(|p| p / norm).collect())
}

/// Procrustes distance over translation, uniform scale, proper rotation and
/// circular shift: `min_k min_R ‖A - shift_k(B) R‖²_F`, in `[0, 2]`.
pub fn shape_deviation(traj: &Trajectory, reference: &Trajectory, n: usize) -> Result<f64> {
    if n < 8 {
        return Err(Error::invalid(format!(
            "shape comparison needs n >= 8, got {n}"
        )));
    }
    let a = normalized_shape(traj, n)?;
    let b = normalized_shape(reference, n)?;
    let mut best = f64::INFINITY;
    for k in 0..n {
        let mut h = Matrix3::zeros();
        for (i, p) in a.iter().enumerate() {
            h += p * b[(i + k) % n].transpose();
        }
        best = best.min(2.0 - 2.0 * max_rotation_trace(&h));
    }
    Ok(best.max(0.0))
}

/// `max_{R ∈ SO(3)} tr(Rᵀ H)`.
fn max_rotation_trace(h: &Matrix3<f64>) -> f64 {
    let svd = h.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    let sign = (u.determinant() * v_t.determinant()).signum();
    s[0] + s[1] + sign * s[2]
}

/// Mean magnitude of the third time derivative (central differences) of the
/// position and rotation-vector channels, on a uniform grid with the
/// trajectory's own sample count.
pub fn average_jerk(traj: &Trajectory) -> Result<Jerk> {
    require_pose(traj)?;
    if traj.len() < 8 {
        return Err(Error::invalid(format!(
            "jerk needs at least 8 samples, got {}",
            traj.len()
        )));
    }
    let uniform;
    let traj = if traj.is_uniform(1e-9) {
        traj
    } else {
        uniform = resample(traj, traj.len())?;
        &uniform
    };
    let n = traj.len();
    let h = traj.duration() / (n - 1) as f64;
    let denom = 2.0 * h * h * h;
    let (mut lin, mut ang) = (0.0, 0.0);
    for i in 2..n - 2 {
        let (a, b, c, d) = (
            traj.row(i - 2),
            traj.row(i - 1),
            traj.row(i + 1),
            traj.row(i + 2),
        );
        let j: Vec<f64> = (0..POSE_DIM)
            .map(|k| (d[k] - 2.0 * c[k] + 2.0 * b[k] - a[k]) / denom)
            .collect();
        lin += Vector3::new(j[0], j[1], j[2]).norm();
        ang += Vector3::new(j[3], j[4], j[5]).norm();
    }
    let count = (n - 4) as f64;
    Ok(Jerk {
        linear: lin / count,
        angular: (ang / count).to_degrees(),
    })
}
