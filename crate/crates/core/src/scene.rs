//! Shelf geometry, box-versus-slab collision checks, trial success
//! classification, task randomization and handle poses.
//!
//! Frame convention: `x` runs along the shelf, `y` points into the shelf
//! (the open front face is at `y = 0`), `z` is up. The manipulated box has
//! dimensions `(w, d, h)` along its local `x`, `y`, `z` axes.

use std::f64::consts::FRAC_PI_4;
use std::fs;
use std::path::Path;

use nalgebra::{Rotation3, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{resample, Pose, Trajectory, POSE_DIM};
use crate::error::{Error, Result};
use crate::metrics::{boundary_error, FailureReason};
use crate::reparam::TaskSpec;

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slab {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Slab {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Result<Self> {
        let s = Slab { min, max };
        if (0..3).all(|i| s.max[i] > s.min[i] && s.min[i].is_finite() && s.max[i].is_finite()) {
            Ok(s)
        } else {
            Err(Error::invalid(format!(
                "degenerate slab {min:?} .. {max:?}"
            )))
        }
    }

    fn center(&self) -> Vector3<f64> {
        (Vector3::from(self.min) + Vector3::from(self.max)) * 0.5
    }

    fn half_extents(&self) -> Vector3<f64> {
        (Vector3::from(self.max) - Vector3::from(self.min)) * 0.5
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub slabs: Vec<Slab>,
    /// `(w, d, h)` of the manipulated box, meters.
    pub box_dims: [f64; 3],
    /// Height of the box center when resting on each shelf level.
    pub levels: Vec<f64>,
    /// Range of the box center along the shelf.
    pub length_range: [f64; 2],
    /// Depth (`y`) of the box center when resting on a shelf.
    #[serde(default)]
    pub rest_depth: f64,
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        for s in &self.slabs {
            Slab::new(s.min, s.max)?;
        }
        if !self.box_dims.iter().all(|v| *v > 0.0 && v.is_finite()) {
            return Err(Error::invalid("box dimensions must be positive"));
        }
        if self.levels.is_empty() || !self.levels.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid(
                "scene needs at least one finite shelf level",
            ));
        }
        let [lo, hi] = self.length_range;
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::invalid(format!("empty length range [{lo}, {hi}]")));
        }
        Ok(())
    }

    /// Two-level open-front desk shelf standing on the floor: boards 0.80 m
    /// long and 0.30 m deep with their top surfaces 0.40 m apart, side and
    /// back panels, a roof board and the floor in front of the shelf. The box
    /// is 0.20 × 0.15 × 0.12 m and rests 5 mm above a board.
    pub fn desk_default() -> Self {
        let (length, depth, t) = (0.80, 0.30, 0.02);
        let tops = [0.10, 0.50, 0.90];
        let mut slabs: Vec<Slab> = tops
            .iter()
            .map(|&z| Slab {
                min: [0.0, 0.0, z - t],
                max: [length, depth, z],
            })
            .collect();
        slabs.push(Slab {
            min: [-t, 0.0, 0.0],
            max: [0.0, depth, tops[2]],
        });
        slabs.push(Slab {
            min: [length, 0.0, 0.0],
            max: [length + t, depth, tops[2]],
        });
        slabs.push(Slab {
            min: [-t, depth, 0.0],
            max: [length + t, depth + t, tops[2]],
        });
        slabs.push(Slab {
            min: [-1.0, -1.0, -0.05],
            max: [2.0, 0.0, 0.0],
        });
        let box_h = 0.12;
        let clearance = 0.005;
        Scene {
            slabs,
            box_dims: [0.20, 0.15, box_h],
            levels: tops[..2]
                .iter()
                .map(|z| z + box_h / 2.0 + clearance)
                .collect(),
            length_range: [0.15, 0.65],
            rest_depth: 0.15,
        }
    }

    /// Resting box pose at shelf position `l` on level `level`, yawed by `yaw`
    /// about the vertical axis from `base` orientation.
    pub fn rest_pose(&self, l: f64, level: usize, base: &Vector3<f64>, yaw: f64) -> Result<Pose> {
        let z = *self
            .levels
            .get(level)
            .ok_or_else(|| Error::invalid(format!("no shelf level {level}")))?;
        let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), yaw)
            * Rotation3::from_scaled_axis(*base);
        Pose::new(Vector3::new(l, self.rest_depth, z), rot.scaled_axis())
    }

    /// True if the box at `pose` intersects any slab.
    pub fn collides(&self, pose: &Pose) -> bool {
        self.slabs
            .iter()
            .any(|s| box_collides(pose, &self.box_dims, s))
    }
}

pub fn load_scene(path: &Path) -> Result<Scene> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let scene: Scene = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    scene.validate()?;
    Ok(scene)
}

pub fn scene_to_json(scene: &Scene) -> String {
    serde_json::to_string_pretty(scene).expect("scene serializes")
}

/// Separating-axis test between the oriented box `box_dims` at `pose` and an
/// axis-aligned slab. Touching bodies do not collide.
pub fn box_collides(pose: &Pose, box_dims: &[f64; 3], slab: &Slab) -> bool {
    let rot = pose.rotation();
    let box_axes = [rot * Vector3::x(), rot * Vector3::y(), rot * Vector3::z()];
    let box_half = Vector3::from(*box_dims) * 0.5;
    let world_axes = [Vector3::x(), Vector3::y(), Vector3::z()];
    let slab_half = slab.half_extents();
    let offset = pose.position - slab.center();

    let separated = |axis: &Vector3<f64>| {
        let r_slab: f64 = (0..3)
            .map(|i| slab_half[i] * world_axes[i].dot(axis).abs())
            .sum();
        let r_box: f64 = (0..3)
            .map(|i| box_half[i] * box_axes[i].dot(axis).abs())
            .sum();
        offset.dot(axis).abs() >= r_slab + r_box
    };

    if world_axes.iter().chain(&box_axes).any(separated) {
        return false;
    }
    for a in &world_axes {
        for b in &box_axes {
            let axis = a.cross(b);
            if axis.norm_squared() > 1e-18 && separated(&axis) {
                return false;
            }
        }
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuccessThresholds {
    pub max_boundary_pos_mm: f64,
    pub max_boundary_rot_deg: f64,
    pub collision_samples: usize,
}

impl Default for SuccessThresholds {
    fn default() -> Self {
        SuccessThresholds {
            max_boundary_pos_mm: 10.0,
            max_boundary_rot_deg: 5.0,
            collision_samples: 200,
        }
    }
}

impl SuccessThresholds {
    pub fn validate(&self) -> Result<()> {
        if self.max_boundary_pos_mm > 0.0
            && self.max_boundary_rot_deg > 0.0
            && self.collision_samples >= 2
        {
            Ok(())
        } else {
            Err(Error::invalid("success thresholds must be positive"))
        }
    }
}

/// Collision-free at every checked pose and within the boundary tolerances.
pub fn trajectory_success(
    traj: &Trajectory,
    scene: &Scene,
    task: &TaskSpec,
    thresholds: &SuccessThresholds,
) -> (bool, FailureReason) {
    if traj.dim() != POSE_DIM || traj.values().iter().any(|v| !v.is_finite()) {
        return (false, FailureReason::Invalid);
    }
    let Ok(checked) = resample(traj, thresholds.collision_samples.max(2)) else {
        return (false, FailureReason::Invalid);
    };
    if (0..checked.len()).any(|i| scene.collides(&checked.pose(i))) {
        return (false, FailureReason::Collision);
    }
    match boundary_error(traj, task) {
        Ok((s, g))
            if s.mm <= thresholds.max_boundary_pos_mm
                && g.mm <= thresholds.max_boundary_pos_mm
                && s.deg <= thresholds.max_boundary_rot_deg
                && g.deg <= thresholds.max_boundary_rot_deg =>
        {
            (true, FailureReason::None)
        }
        Ok(_) => (false, FailureReason::Boundary),
        Err(_) => (false, FailureReason::Invalid),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variation {
    /// New positions, demonstrated orientation.
    Translational,
    /// New positions plus independent yaw of start and goal in `[-π/4, π/4)`.
    Combined,
}

impl std::str::FromStr for Variation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "translational" => Ok(Variation::Translational),
            "combined" => Ok(Variation::Combined),
            other => Err(Error::invalid(format!("unknown variation `{other}`"))),
        }
    }
}

impl std::fmt::Display for Variation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variation::Translational => "translational",
            Variation::Combined => "combined",
        })
    }
}

/// Random start and goal: shelf position uniform over the length range, level
/// uniform over the shelf levels, and for combined variation a uniform yaw.
pub fn sample_task<R: Rng + ?Sized>(
    scene: &Scene,
    variation: Variation,
    base_orientation: &Vector3<f64>,
    rng: &mut R,
) -> Result<TaskSpec> {
    let endpoint = |rng: &mut R| {
        let l = rng.random_range(scene.length_range[0]..scene.length_range[1]);
        let level = rng.random_range(0..scene.levels.len());
        let yaw = match variation {
            Variation::Translational => 0.0,
            Variation::Combined => rng.random_range(-FRAC_PI_4..FRAC_PI_4),
        };
        if yaw == 0.0 {
            Pose::new(
                Vector3::new(l, scene.rest_depth, scene.levels[level]),
                *base_orientation,
            )
        } else {
            scene.rest_pose(l, level, base_orientation, yaw)
        }
    };
    let start = endpoint(rng)?;
    let goal = endpoint(rng)?;
    TaskSpec::new(start, goal)
}

/// Left and right handle poses: the box pose shifted by `∓w/2` along the
/// box's local width axis, orientation unchanged.
pub fn handle_poses(box_pose: &Pose, box_width: f64) -> (Pose, Pose) {
    let axis = box_pose.rotation() * Vector3::x();
    let offset = axis * (box_width / 2.0);
    let at = |sign: f64| Pose {
        position: box_pose.position + offset * sign,
        orientation: box_pose.orientation,
    };
    (at(-1.0), at(1.0))
}
