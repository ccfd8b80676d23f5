//! Trajectories, poses and the CSV trajectory format.
//!
//! Poses are stored as `[px, py, pz, rx, ry, rz]`: position in meters and a
//! rotation vector (axis times angle) in radians. Rotation vectors are treated
//! as plain Euclidean coordinates everywhere except in the angular metrics.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of pose coordinates.
pub const POSE_DIM: usize = 6;

pub const CSV_HEADER: &str = "t,px,py,pz,rx,ry,rz";

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vector3<f64>,
    /// Rotation vector, radians.
    pub orientation: Vector3<f64>,
}

impl Pose {
    pub fn new(position: Vector3<f64>, orientation: Vector3<f64>) -> Result<Self> {
        let pose = Pose {
            position,
            orientation,
        };
        pose.validate()?;
        Ok(pose)
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        if v.len() != POSE_DIM {
            return Err(Error::invalid(format!(
                "pose needs {POSE_DIM} values, got {}",
                v.len()
            )));
        }
        Pose::new(
            Vector3::new(v[0], v[1], v[2]),
            Vector3::new(v[3], v[4], v[5]),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !self.to_array().iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("pose has non-finite entries"));
        }
        if self.orientation.norm() >= PI {
            return Err(Error::invalid(format!(
                "rotation vector magnitude {} is not below pi",
                self.orientation.norm()
            )));
        }
        Ok(())
    }

    pub fn to_array(&self) -> [f64; POSE_DIM] {
        let p = &self.position;
        let r = &self.orientation;
        [p.x, p.y, p.z, r.x, r.y, r.z]
    }

    pub fn rotation(&self) -> Rotation3<f64> {
        Rotation3::from_scaled_axis(self.orientation)
    }
}

/// Timing of the grasp / transport / release phases of a demonstration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSchedule {
    pub grasp_end: f64,
    pub release_start: f64,
    pub total: f64,
}

impl PhaseSchedule {
    pub fn new(grasp_end: f64, release_start: f64, total: f64) -> Result<Self> {
        let s = PhaseSchedule {
            grasp_end,
            release_start,
            total,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.grasp_end > 0.0
            && self.grasp_end < self.release_start
            && self.release_start < self.total
            && self.total.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "phase schedule must satisfy 0 < {} < {} < {}",
                self.grasp_end, self.release_start, self.total
            )))
        }
    }
}

impl Default for PhaseSchedule {
    fn default() -> Self {
        PhaseSchedule {
            grasp_end: 1.0,
            release_start: 6.0,
            total: 7.0,
        }
    }
}

/// Time-stamped samples of a `dim`-dimensional signal. Values are stored
/// row-major, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    values: Vec<f64>,
    dim: usize,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, values: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("trajectory dimension must be positive"));
        }
        if times.len() < 2 {
            return Err(Error::invalid(format!(
                "trajectory needs at least 2 samples, got {}",
                times.len()
            )));
        }
        if values.len() != times.len() * dim {
            return Err(Error::invalid(format!(
                "expected {} values for {} samples of dimension {dim}, got {}",
                times.len() * dim,
                times.len(),
                values.len()
            )));
        }
        if let Some(i) = times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::invalid(format!(
                "time not strictly increasing at sample {}",
                i + 1
            )));
        }
        if !times[0].is_finite() || times[0] < 0.0 || !times[times.len() - 1].is_finite() {
            return Err(Error::invalid(
                "trajectory times must be finite and start at t >= 0",
            ));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("trajectory contains non-finite values"));
        }
        Ok(Trajectory { times, values, dim })
    }

    pub fn from_rows(times: Vec<f64>, rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid("rows have inconsistent lengths"));
        }
        Trajectory::new(times, rows.concat(), dim)
    }

    pub fn from_poses(times: Vec<f64>, poses: &[Pose]) -> Result<Self> {
        let values = poses.iter().flat_map(|p| p.to_array()).collect();
        Trajectory::new(times, values, POSE_DIM)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn start_time(&self) -> f64 {
        self.times[0]
    }

    pub fn end_time(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn duration(&self) -> f64 {
        self.end_time() - self.start_time()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    /// Pose of sample `i`. Panics unless the trajectory is 6-dimensional.
    pub fn pose(&self, i: usize) -> Pose {
        assert_eq!(self.dim, POSE_DIM, "trajectory is not a pose trajectory");
        let r = self.row(i);
        Pose {
            position: Vector3::new(r[0], r[1], r[2]),
            orientation: Vector3::new(r[3], r[4], r[5]),
        }
    }

    pub fn first_pose(&self) -> Pose {
        self.pose(0)
    }

    pub fn last_pose(&self) -> Pose {
        self.pose(self.len() - 1)
    }

    pub fn positions(&self) -> Vec<Vector3<f64>> {
        self.rows()
            .map(|r| Vector3::new(r[0], r[1], r[2]))
            .collect()
    }

    /// Value at time `t` by linear interpolation, clamped to the end samples.
    pub fn sample_at(&self, t: f64) -> Vec<f64> {
        let k = match self.times.partition_point(|&ti| ti <= t) {
            0 => return self.row(0).to_vec(),
            k if k >= self.len() => return self.row(self.len() - 1).to_vec(),
            k => k - 1,
        };
        interpolate(
            self.row(k),
            self.row(k + 1),
            self.times[k],
            self.times[k + 1],
            t,
        )
    }

    /// Samples whose time lies in `[t0, t1]`.
    pub fn window(&self, t0: f64, t1: f64) -> impl Iterator<Item = (f64, &[f64])> {
        self.times
            .iter()
            .copied()
            .zip(self.rows())
            .filter(move |(t, _)| *t >= t0 && *t <= t1)
    }

    /// Samples equally spaced in time.
    pub fn is_uniform(&self, rel_tol: f64) -> bool {
        let h = self.duration() / (self.len() - 1) as f64;
        self.times
            .windows(2)
            .all(|w| ((w[1] - w[0]) - h).abs() <= rel_tol * h)
    }
}

fn interpolate(a: &[f64], b: &[f64], ta: f64, tb: f64, t: f64) -> Vec<f64> {
    let w = (t - ta) / (tb - ta);
    if w == 0.0 {
        return a.to_vec();
    }
    a.iter().zip(b).map(|(x, y)| x + w * (y - x)).collect()
}

/// Uniform time grid of `n` points over `[t0, t1]` with exact endpoints.
pub fn uniform_grid(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    let span = t1 - t0;
    let mut grid: Vec<f64> = (0..n)
        .map(|i| t0 + span * i as f64 / (n - 1) as f64)
        .collect();
    grid[n - 1] = t1;
    grid
}

/// Resample onto `n` uniformly spaced times spanning the trajectory, using
/// per-dimension linear interpolation. Endpoints are copied exactly.
pub fn resample(traj: &Trajectory, n: usize) -> Result<Trajectory> {
    if n < 2 {
        return Err(Error::invalid(format!("resample needs n >= 2, got {n}")));
    }
    if traj.len() < 2 {
        return Err(Error::invalid(
            "cannot resample a trajectory with fewer than 2 samples",
        ));
    }
    let grid = uniform_grid(traj.start_time(), traj.end_time(), n);
    let mut values = Vec::with_capacity(n * traj.dim());
    let mut k = 0;
    for (i, &t) in grid.iter().enumerate() {
        if i == n - 1 {
            values.extend_from_slice(traj.row(traj.len() - 1));
            continue;
        }
        while k + 2 < traj.len() && traj.times[k + 1] <= t {
            k += 1;
        }
        values.extend(interpolate(
            traj.row(k),
            traj.row(k + 1),
            traj.times[k],
            traj.times[k + 1],
            t,
        ));
    }
    Trajectory::new(grid, values, traj.dim())
}

pub fn save_trajectory(traj: &Trajectory, path: &Path) -> Result<()> {
    fs::write(path, trajectory_to_csv(traj)?).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn trajectory_to_csv(traj: &Trajectory) -> Result<String> {
    if traj.dim() != POSE_DIM {
        return Err(Error::invalid(format!(
            "only {POSE_DIM}-D pose trajectories can be written as CSV, got {}",
            traj.dim()
        )));
    }
    let mut out = String::with_capacity(traj.len() * 96);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for (t, row) in traj.times().iter().zip(traj.rows()) {
        // `{}` on f64 prints the shortest representation that round-trips.
        write!(out, "{t}").unwrap();
        for v in row {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn load_trajectory(path: &Path) -> Result<Trajectory> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_trajectory_csv(&text, path)
}

/// Parse the trajectory CSV format. Row numbers in errors are 1-based file
/// lines, the header being line 1.
pub fn parse_trajectory_csv(text: &str, path: &Path) -> Result<Trajectory> {
    let err = |row: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        row,
        msg,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        Some((_, h)) => {
            return Err(err(
                1,
                format!("expected header `{CSV_HEADER}`, found `{h}`"),
            ))
        }
        None => return Err(err(1, "empty file".into())),
    }

    let mut times = Vec::new();
    let mut values = Vec::new();
    for (idx, line) in lines {
        let row = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != POSE_DIM + 1 {
            return Err(err(
                row,
                format!("expected {} columns, found {}", POSE_DIM + 1, fields.len()),
            ));
        }
        let mut parsed = [0.0; POSE_DIM + 1];
        for (slot, field) in parsed.iter_mut().zip(&fields) {
            *slot = field
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(row, format!("malformed number `{field}`")))?;
        }
        if let Some(&prev) = times.last() {
            if parsed[0] <= prev {
                return Err(err(
                    row,
                    format!("time {} is not after previous time {prev}", parsed[0]),
                ));
            }
        }
        Pose::from_slice(&parsed[1..]).map_err(|e| err(row, e.to_string()))?;
        times.push(parsed[0]);
        values.extend_from_slice(&parsed[1..]);
    }
    if times.len() < 2 {
        return Err(err(
            times.len() + 1,
            format!("need at least 2 samples, found {}", times.len()),
        ));
    }
    Trajectory::new(times, values, POSE_DIM).map_err(|e| err(1, e.to_string()))
}

/// Per-sample mean of trajectories that share one time grid.
pub fn mean_trajectory(trajs: &[Trajectory]) -> Result<Trajectory> {
    let first = trajs
        .first()
        .ok_or_else(|| Error::invalid("no trajectories to average"))?;
    if trajs
        .iter()
        .any(|t| t.times() != first.times() || t.dim() != first.dim())
    {
        return Err(Error::invalid("trajectories do not share a time grid"));
    }
    let n = trajs.len() as f64;
    let mut values = vec![0.0; first.values().len()];
    for t in trajs {
        for (acc, v) in values.iter_mut().zip(t.values()) {
            *acc += v;
        }
    }
    values.iter_mut().for_each(|v| *v /= n);
    Trajectory::new(first.times().to_vec(), values, first.dim())
}
