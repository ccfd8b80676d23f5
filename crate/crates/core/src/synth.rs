//! Synthetic grasp / transport / release demonstrations.
//!
//! Each demonstration holds the box at `A`, carries it to `B` and holds it
//! there. The transport pulls the box out of the shelf, moves it along an arc
//! lifted above the straight `A → B` line in front of the shelf, and pushes it
//! back in. Demonstrations differ by a smooth perturbation: three random
//! low-frequency sinusoids per pose dimension.

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{save_trajectory, uniform_grid, PhaseSchedule, Pose, Trajectory, POSE_DIM};
use crate::error::{Error, Result};
use crate::scene::Scene;

const MAX_ATTEMPTS: usize = 10;
const NOISE_TERMS: usize = 3;
/// Frequency band of the perturbation sinusoids, Hz.
const NOISE_BAND: (f64, f64) = (0.05, 0.25);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub demos: usize,
    pub grasp_duration: f64,
    pub transport_duration: f64,
    pub release_duration: f64,
    pub start: Pose,
    pub goal: Pose,
    /// Height of the transport arc above the straight line at its middle, m.
    pub lift: f64,
    /// Box-center depth in front of the shelf while it is carried, m.
    pub carry_depth: f64,
    pub noise_mm: f64,
    pub noise_deg: f64,
    pub rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig::for_scene(&Scene::desk_default())
    }
}

impl SynthConfig {
    /// Defaults for `scene`: bottom-left to top-right across the shelf.
    pub fn for_scene(scene: &Scene) -> Self {
        let [lo, hi] = scene.length_range;
        let bottom = scene.levels.iter().copied().fold(f64::INFINITY, f64::min);
        let top = scene
            .levels
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let y = scene.rest_depth;
        SynthConfig {
            demos: 5,
            grasp_duration: 1.0,
            transport_duration: 5.0,
            release_duration: 1.0,
            start: Pose {
                position: Vector3::new(lo + 0.2 * (hi - lo), y, bottom),
                orientation: Vector3::zeros(),
            },
            goal: Pose {
                position: Vector3::new(lo + 0.8 * (hi - lo), y, top),
                orientation: Vector3::zeros(),
            },
            lift: 0.10,
            carry_depth: -0.15,
            noise_mm: 2.0,
            noise_deg: 0.5,
            rate: 100.0,
            seed: 0,
        }
    }

    pub fn phases(&self) -> PhaseSchedule {
        let total = self.grasp_duration + self.transport_duration + self.release_duration;
        PhaseSchedule {
            grasp_end: self.grasp_duration,
            release_start: self.grasp_duration + self.transport_duration,
            total,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.grasp_duration,
            self.transport_duration,
            self.release_duration,
            self.rate,
        ];
        if !positive.iter().all(|v| *v > 0.0 && v.is_finite()) {
            return Err(Error::invalid("phase durations and rate must be positive"));
        }
        if !(self.noise_mm >= 0.0 && self.noise_deg >= 0.0) {
            return Err(Error::invalid("noise amplitudes must be non-negative"));
        }
        if self.demos == 0 {
            return Err(Error::invalid("need at least one demonstration"));
        }
        self.start.validate()?;
        self.goal.validate()
    }
}

/// Minimum-jerk time scaling `10τ³ - 15τ⁴ + 6τ⁵`, clamped to `[0, 1]`.
pub fn min_jerk_profile(tau: f64) -> f64 {
    let t = tau.clamp(0.0, 1.0);
    t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
}

/// Quintic point-to-point segment with zero boundary velocity and acceleration.
pub fn min_jerk_segment(p0: &Pose, p1: &Pose, duration: f64, rate: f64) -> Result<Trajectory> {
    if !(duration > 0.0 && rate > 0.0) {
        return Err(Error::invalid("duration and rate must be positive"));
    }
    let n = ((duration * rate).round() as usize + 1).max(2);
    let (a, b) = (p0.to_array(), p1.to_array());
    let times = uniform_grid(0.0, duration, n);
    let mut values = Vec::with_capacity(n * POSE_DIM);
    for (i, t) in times.iter().enumerate() {
        if i == n - 1 {
            values.extend_from_slice(&b);
            continue;
        }
        let s = min_jerk_profile(t / duration);
        values.extend((0..POSE_DIM).map(|d| a[d] + s * (b[d] - a[d])));
    }
    Trajectory::new(times, values, POSE_DIM)
}

/// Fraction of the transport spent pulling the box out (and pushing it in).
const PULL_FRACTION: f64 = 0.35;
/// Perturbation amplitude while the box rests on a board, relative to carry.
const REST_NOISE: f64 = 0.1;

fn transport_phase(cfg: &SynthConfig, t: f64) -> f64 {
    ((t - cfg.grasp_duration) / cfg.transport_duration).clamp(0.0, 1.0)
}

/// 0 while the box sits in the shelf, 1 while it is fully pulled out.
fn pulled_out(u: f64) -> f64 {
    min_jerk_profile(u / PULL_FRACTION)
        - min_jerk_profile((u - (1.0 - PULL_FRACTION)) / PULL_FRACTION)
}

/// Noise-free nominal pose at time `t`.
fn nominal(cfg: &SynthConfig, t: f64) -> [f64; POSE_DIM] {
    let a = cfg.start.to_array();
    let b = cfg.goal.to_array();
    let u = transport_phase(cfg, t);

    // The carry starts once the box is most of the way out and ends
    // symmetrically before it goes back in.
    let out = pulled_out(u);
    let carry_start = 0.22;
    let v = ((u - carry_start) / (1.0 - 2.0 * carry_start)).clamp(0.0, 1.0);
    let s = min_jerk_profile(v);
    let arc = 16.0 * v * v * (1.0 - v) * (1.0 - v);

    let mut p = [0.0; POSE_DIM];
    for d in 0..POSE_DIM {
        p[d] = a[d] + s * (b[d] - a[d]);
    }
    let rest_depth = a[1] + s * (b[1] - a[1]);
    p[1] = rest_depth + out * (cfg.carry_depth - rest_depth);
    p[2] += cfg.lift * arc;
    p
}

#[derive(Debug, Clone)]
struct Perturbation {
    /// Per dimension: (amplitude, angular frequency, phase) triples.
    terms: Vec<[(f64, f64, f64); NOISE_TERMS]>,
}

impl Perturbation {
    fn sample(rng: &mut ChaCha8Rng, sigma: [f64; POSE_DIM]) -> Self {
        // Equal-amplitude terms whose summed variance is sigma².
        let terms = sigma
            .iter()
            .map(|s| {
                let amp = s * (2.0 / NOISE_TERMS as f64).sqrt();
                std::array::from_fn(|_| {
                    let f = rng.random_range(NOISE_BAND.0..NOISE_BAND.1);
                    (amp, TAU * f, rng.random_range(0.0..TAU))
                })
            })
            .collect();
        Perturbation { terms }
    }

    fn at(&self, d: usize, t: f64) -> f64 {
        self.terms[d]
            .iter()
            .map(|(a, w, phi)| a * (w * t + phi).sin())
            .sum()
    }
}

fn one_demo(cfg: &SynthConfig, noise: &Perturbation) -> Result<Trajectory> {
    let phases = cfg.phases();
    let n = (phases.total * cfg.rate).round() as usize + 1;
    let times = uniform_grid(0.0, phases.total, n);
    let values = times
        .iter()
        .flat_map(|&t| {
            let mut p = nominal(cfg, t);
            // A box resting on a board barely moves; variability grows once lifted.
            let gain = REST_NOISE + (1.0 - REST_NOISE) * pulled_out(transport_phase(cfg, t));
            for (d, v) in p.iter_mut().enumerate() {
                *v += gain * noise.at(d, t);
            }
            p
        })
        .collect();
    Trajectory::new(times, values, POSE_DIM)
}

fn first_collision(scene: &Scene, traj: &Trajectory) -> Option<f64> {
    (0..traj.len())
        .find(|&i| scene.collides(&traj.pose(i)))
        .map(|i| traj.times()[i])
}

/// `cfg.demos` noisy demonstrations, each collision-free in `scene`. A
/// colliding draw is retried with half the noise amplitude.
pub fn generate_demonstrations(scene: &Scene, cfg: &SynthConfig) -> Result<Vec<Trajectory>> {
    cfg.validate()?;
    scene.validate()?;
    for (name, p) in [("start", &cfg.start), ("goal", &cfg.goal)] {
        if scene.collides(p) {
            return Err(Error::invalid(format!(
                "{name} pose collides with the scene"
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut demos = Vec::with_capacity(cfg.demos);
    for _ in 0..cfg.demos {
        let mut scale = 1.0;
        let mut last_hit = 0.0;
        let mut accepted = None;
        for _ in 0..MAX_ATTEMPTS {
            let pos = cfg.noise_mm * 1e-3 * scale;
            let rot = cfg.noise_deg.to_radians() * scale;
            let noise = Perturbation::sample(&mut rng, [pos, pos, pos, rot, rot, rot]);
            let demo = one_demo(cfg, &noise)?;
            match first_collision(scene, &demo) {
                None => {
                    accepted = Some(demo);
                    break;
                }
                Some(t) => {
                    last_hit = t;
                    scale *= 0.5;
                }
            }
        }
        demos.push(accepted.ok_or_else(|| Error::Synthesis {
            attempts: MAX_ATTEMPTS,
            reason: format!("demonstration collides at t = {last_hit:.2} s"),
        })?);
    }
    Ok(demos)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub files: Vec<PathBuf>,
    pub seed: u64,
    pub config: SynthConfig,
    pub scene: Scene,
}

/// Write `demo_<j>.csv` files plus `manifest.json` into `dir`.
pub fn write_demonstrations(
    dir: &Path,
    demos: &[Trajectory],
    cfg: &SynthConfig,
    scene: &Scene,
) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut files = Vec::new();
    for (j, demo) in demos.iter().enumerate() {
        let name = PathBuf::from(format!("demo_{j}.csv"));
        save_trajectory(demo, &dir.join(&name))?;
        files.push(name);
    }
    let manifest = Manifest {
        files,
        seed: cfg.seed,
        config: cfg.clone(),
        scene: scene.clone(),
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text).map_err(|source| Error::Io { path, source })?;
    Ok(manifest)
}
