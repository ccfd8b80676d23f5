//! Seeded benchmark harness: sample tasks, generalize, regress, score.
//!
//! Trial `i` draws its task from a ChaCha stream selected by `i`, so every
//! trial is reproducible on its own and the run is identical whether trials
//! execute in parallel or one after another.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{PhaseSchedule, Pose, Trajectory};
use crate::error::{Error, Result};
use crate::gmr::{default_times, Mixture, DEFAULT_RATE};
use crate::metrics::{
    average_jerk, boundary_error, phase_deviation, shape_deviation, EvalReport, FailureReason,
    SHAPE_SAMPLES,
};
use crate::model::GmmModel;
use crate::par::{map_range, Execution};
use crate::reparam::{generalize, ReparamConfig, TaskSpec};
use crate::scene::{sample_task, trajectory_success, Scene, SuccessThresholds, Variation};

/// Column header of the summary table.
pub const SUMMARY_HEADER: &str = "method,success_rate,start_err_mm,start_err_deg,goal_err_mm,\
goal_err_deg,grasp_dev_mm,grasp_dev_deg,release_dev_mm,release_dev_deg,shape_dev,jerk_lin,jerk_ang";

/// Score `traj` against `task`, the scene and a reference path.
pub fn evaluate(
    traj: &Trajectory,
    reference: &Trajectory,
    task: &TaskSpec,
    phases: &PhaseSchedule,
    scene: &Scene,
    thresholds: &SuccessThresholds,
) -> Result<EvalReport> {
    let (success, failure_reason) = trajectory_success(traj, scene, task, thresholds);
    if failure_reason == FailureReason::Invalid {
        return Ok(EvalReport {
            success,
            failure_reason,
            ..EvalReport::default()
        });
    }
    let (start_error, goal_error) = boundary_error(traj, task)?;
    let phase = phase_deviation(traj, phases)?;
    Ok(EvalReport {
        success,
        start_error,
        goal_error,
        grasp_deviation: phase.grasp,
        release_deviation: phase.release,
        shape_deviation: shape_deviation(traj, reference, SHAPE_SAMPLES)?,
        jerk: average_jerk(traj)?,
        failure_reason,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub trials: usize,
    pub variation: Variation,
    pub seed: u64,
    pub rate: f64,
    pub thresholds: SuccessThresholds,
    pub reparam: ReparamConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            trials: 50,
            variation: Variation::Translational,
            seed: 0,
            rate: DEFAULT_RATE,
            thresholds: SuccessThresholds::default(),
            reparam: ReparamConfig::default(),
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("benchmark needs at least one trial"));
        }
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return Err(Error::invalid("regression rate must be positive"));
        }
        self.thresholds.validate()?;
        self.reparam.validate()
    }

    pub fn method(&self) -> &'static str {
        if self.reparam.ablate_covariance {
            "ablated"
        } else {
            "full"
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub method: String,
    pub variation: Variation,
    pub start: Pose,
    pub goal: Pose,
    pub spd_repairs: usize,
    pub report: EvalReport,
}

/// The task of trial `index`, independent of every other trial.
pub fn trial_task(
    scene: &Scene,
    variation: Variation,
    base_orientation: &nalgebra::Vector3<f64>,
    seed: u64,
    index: usize,
) -> Result<TaskSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    sample_task(scene, variation, base_orientation, &mut rng)
}

/// Demonstrated orientation at the start of the model.
fn base_orientation(model: &GmmModel) -> Result<nalgebra::Vector3<f64>> {
    let task = TaskSpec::identity_for(model)?;
    Ok(task.start.orientation)
}

pub fn run_trial(
    model: &GmmModel,
    reference: &Trajectory,
    scene: &Scene,
    cfg: &BenchConfig,
    index: usize,
) -> Result<TrialRecord> {
    let task = trial_task(
        scene,
        cfg.variation,
        &base_orientation(model)?,
        cfg.seed,
        index,
    )?;
    let generalized = generalize(model, &task, &cfg.reparam)?;
    let times = default_times(model.duration, cfg.rate);
    let traj = generalized
        .regressor()
        .trajectory(&times, Execution::Sequential)?;
    let report = evaluate(
        &traj,
        reference,
        &task,
        &model.phases,
        scene,
        &cfg.thresholds,
    )?;
    Ok(TrialRecord {
        trial: index,
        method: cfg.method().to_string(),
        variation: cfg.variation,
        start: task.start,
        goal: task.goal,
        spd_repairs: generalized.repairs,
        report,
    })
}

/// All trials in index order.
pub fn run_benchmark(
    model: &GmmModel,
    reference: &Trajectory,
    scene: &Scene,
    cfg: &BenchConfig,
    exec: Execution,
) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    scene.validate()?;
    model.validate()?;
    map_range(exec, cfg.trials, |i| {
        run_trial(model, reference, scene, cfg, i)
    })
    .into_iter()
    .collect()
}

/// Means over all trials; `success_rate` is a percentage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub method: String,
    pub success_rate: f64,
    pub start_err_mm: f64,
    pub start_err_deg: f64,
    pub goal_err_mm: f64,
    pub goal_err_deg: f64,
    pub grasp_dev_mm: f64,
    pub grasp_dev_deg: f64,
    pub release_dev_mm: f64,
    pub release_dev_deg: f64,
    pub shape_dev: f64,
    pub jerk_lin: f64,
    pub jerk_ang: f64,
}

impl Summary {
    pub fn from_trials(method: &str, trials: &[TrialRecord]) -> Result<Self> {
        if trials.is_empty() {
            return Err(Error::invalid("cannot summarize zero trials"));
        }
        let n = trials.len() as f64;
        let mean = |f: fn(&EvalReport) -> f64| trials.iter().map(|t| f(&t.report)).sum::<f64>() / n;
        Ok(Summary {
            method: method.to_string(),
            success_rate: 100.0 * trials.iter().filter(|t| t.report.success).count() as f64 / n,
            start_err_mm: mean(|r| r.start_error.mm),
            start_err_deg: mean(|r| r.start_error.deg),
            goal_err_mm: mean(|r| r.goal_error.mm),
            goal_err_deg: mean(|r| r.goal_error.deg),
            grasp_dev_mm: mean(|r| r.grasp_deviation.mm),
            grasp_dev_deg: mean(|r| r.grasp_deviation.deg),
            release_dev_mm: mean(|r| r.release_deviation.mm),
            release_dev_deg: mean(|r| r.release_deviation.deg),
            shape_dev: mean(|r| r.shape_deviation),
            jerk_lin: mean(|r| r.jerk.linear),
            jerk_ang: mean(|r| r.jerk.angular),
        })
    }

    fn csv_row(&self) -> String {
        let values = [
            self.success_rate,
            self.start_err_mm,
            self.start_err_deg,
            self.goal_err_mm,
            self.goal_err_deg,
            self.grasp_dev_mm,
            self.grasp_dev_deg,
            self.release_dev_mm,
            self.release_dev_deg,
            self.shape_dev,
            self.jerk_lin,
            self.jerk_ang,
        ];
        let mut row = self.method.clone();
        for v in values {
            write!(row, ",{v}").expect("writing to a String cannot fail");
        }
        row
    }
}

pub fn summary_csv(rows: &[Summary]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmr::regress;
    use crate::metrics::{Jerk, PoseError};
    use crate::model::{fit_demonstrations, FitConfig};
    use crate::synth::{generate_demonstrations, SynthConfig};

    #[test]
    fn header_has_thirteen_columns() {
        assert_eq!(SUMMARY_HEADER.split(',').count(), 13);
        assert!(SUMMARY_HEADER.starts_with("method,success_rate,"));
        assert!(SUMMARY_HEADER.ends_with(",jerk_lin,jerk_ang"));
    }

    fn record(success: bool, mm: f64) -> TrialRecord {
        let pose = Pose::default();
        TrialRecord {
            trial: 0,
            method: "full".into(),
            variation: Variation::Translational,
            start: pose,
            goal: pose,
            spd_repairs: 0,
            report: EvalReport {
                success,
                start_error: PoseError { mm, deg: 0.0 },
                jerk: Jerk {
                    linear: mm,
                    angular: 0.0,
                },
                ..EvalReport::default()
            },
        }
    }

    #[test]
    fn summary_means_and_rate() {
        let s = Summary::from_trials("full", &[record(true, 1.0), record(false, 3.0)]).unwrap();
        assert_eq!(s.success_rate, 50.0);
        assert_eq!(s.start_err_mm, 2.0);
        assert_eq!(s.jerk_lin, 2.0);
        let csv = summary_csv(&[s]);
        let row = csv.lines().nth(1).unwrap();
        assert_eq!(row.split(',').count(), 13);
        assert!(row.starts_with("full,50,2,"));
        assert!(Summary::from_trials("full", &[]).is_err());
    }

    #[test]
    fn trial_tasks_are_independent_of_order() {
        let scene = Scene::desk_default();
        let base = nalgebra::Vector3::zeros();
        let a = trial_task(&scene, Variation::Combined, &base, 7, 3).unwrap();
        let _ = trial_task(&scene, Variation::Combined, &base, 7, 2).unwrap();
        let b = trial_task(&scene, Variation::Combined, &base, 7, 3).unwrap();
        assert_eq!(a, b);
        let c = trial_task(&scene, Variation::Combined, &base, 7, 4).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn parallel_and_sequential_runs_agree() {
        let scene = Scene::desk_default();
        let demos = generate_demonstrations(&scene, &SynthConfig::for_scene(&scene)).unwrap();
        let cfg = SynthConfig::for_scene(&scene);
        let fit = FitConfig {
            components: 6,
            ..FitConfig::default()
        };
        let model = fit_demonstrations(&demos, cfg.phases(), &fit)
            .unwrap()
            .model;
        let reference = regress(&model, &default_times(model.duration, DEFAULT_RATE)).unwrap();
        let bench = BenchConfig {
            trials: 4,
            variation: Variation::Combined,
            ..BenchConfig::default()
        };
        let par = run_benchmark(&model, &reference, &scene, &bench, Execution::Parallel).unwrap();
        let seq = run_benchmark(&model, &reference, &scene, &bench, Execution::Sequential).unwrap();
        assert_eq!(par, seq);
        assert!(par.iter().enumerate().all(|(i, t)| t.trial == i));
    }
}
