use std::fs;
use std::path::{Path, PathBuf};

use gmm_reparam::bench::{run_benchmark, summary_csv, BenchConfig, Summary, TrialRecord};
use gmm_reparam::data::{load_trajectory, save_trajectory, PhaseSchedule, Pose, Trajectory};
use gmm_reparam::gmr::{default_times, Mixture, Regressor, DEFAULT_RATE};
use gmm_reparam::model::{fit_demonstrations, load_model, model_from_json, save_model, GmmModel};
use gmm_reparam::plot::render_svg;
use gmm_reparam::reparam::{
    generalize as retarget, reparam_model_from_json, save_reparam_model, ReparamModel, TaskSpec,
};
use gmm_reparam::scene::{load_scene, Scene, Variation};
use gmm_reparam::synth::{generate_demonstrations, write_demonstrations, SynthConfig};
use gmm_reparam::Execution;

use crate::config::RunConfig;
use crate::{
    BenchmarkArgs, EvaluateArgs, FitArgs, GeneralizeArgs, PlotArgs, RegressArgs, SynthArgs, Usage,
};

type Result<T> = anyhow::Result<T>;

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn parse_pose(flag: &str, text: &str) -> Result<Pose> {
    let values: Vec<f64> = text
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| usage(format!("--{flag} `{text}`: {e}")))?;
    if values.len() != 6 {
        return Err(usage(format!(
            "--{flag} expects 6 comma-separated values x,y,z,rx,ry,rz, got {}",
            values.len()
        )));
    }
    Pose::from_slice(&values).map_err(|e| usage(format!("--{flag}: {e}")))
}

fn scene_or_default(path: Option<&Path>) -> Result<Scene> {
    Ok(match path {
        Some(p) => load_scene(p)?,
        None => Scene::desk_default(),
    })
}

fn rate(cfg: &RunConfig, flag: Option<f64>) -> Result<f64> {
    let rate = flag.or(cfg.rate).unwrap_or(DEFAULT_RATE);
    if rate > 0.0 && rate.is_finite() {
        Ok(rate)
    } else {
        Err(usage(format!("rate must be positive, got {rate}")))
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| anyhow::anyhow!("{}: {e}", dir.display()))?;
    }
    fs::write(path, text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("plain data serializes");
    text.push('\n');
    text
}

/// A model file, either freshly fitted or already retargeted.
enum LoadedModel {
    Source(GmmModel),
    Retargeted(ReparamModel),
}

impl LoadedModel {
    fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        if value.get("task").is_some() {
            Ok(LoadedModel::Retargeted(reparam_model_from_json(
                &text, path,
            )?))
        } else {
            Ok(LoadedModel::Source(model_from_json(&text, path)?))
        }
    }

    fn model(&self) -> &GmmModel {
        match self {
            LoadedModel::Source(m) => m,
            LoadedModel::Retargeted(r) => &r.model,
        }
    }

    fn regressor(&self) -> Regressor {
        match self {
            LoadedModel::Source(m) => m.regressor(),
            LoadedModel::Retargeted(r) => r.regressor(),
        }
    }

    fn regress(&self, rate: f64) -> Result<Trajectory> {
        let times = default_times(self.model().duration, rate);
        Ok(self.regressor().trajectory(&times, Execution::Parallel)?)
    }
}

pub fn synth(cfg: &RunConfig, args: SynthArgs) -> Result<()> {
    let scene = scene_or_default(args.scene.as_deref())?;
    let mut synth = cfg
        .synth
        .clone()
        .unwrap_or_else(|| SynthConfig::for_scene(&scene));
    if let Some(v) = args.demos {
        synth.demos = v;
    }
    if let Some(v) = args.seed.or(cfg.seed) {
        synth.seed = v;
    }
    if let Some(v) = args.noise_mm {
        synth.noise_mm = v;
    }
    if let Some(v) = args.noise_deg {
        synth.noise_deg = v;
    }
    if let Some(v) = args.lift {
        synth.lift = v;
    }
    if let Some(v) = args.rate {
        synth.rate = v;
    }
    let demos = generate_demonstrations(&scene, &synth)?;
    let manifest = write_demonstrations(&args.out, &demos, &synth, &scene)?;
    println!(
        "wrote {} demonstrations to {}",
        manifest.files.len(),
        args.out.display()
    );
    Ok(())
}

pub fn fit(cfg: &RunConfig, args: FitArgs) -> Result<()> {
    let demos = args
        .demos
        .iter()
        .map(|p| load_trajectory(p))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let mut fit = cfg.fit;
    if let Some(v) = args.components {
        fit.components = v;
    }
    if let Some(v) = args.seed.or(cfg.seed) {
        fit.seed = v;
    }
    if let Some(v) = args.max_iters {
        fit.max_iters = v;
    }
    let total = demos
        .iter()
        .map(Trajectory::end_time)
        .fold(f64::NEG_INFINITY, f64::max);
    let phases = PhaseSchedule::new(
        args.grasp_end.unwrap_or(1.0),
        args.release_start.unwrap_or(total - 1.0),
        total,
    )?;
    let result = fit_demonstrations(&demos, phases, &fit)?;
    save_model(&result.model, &args.out)?;
    println!(
        "fitted {} components in {} EM iterations (final log-likelihood {:.3})",
        result.model.len(),
        result.loglik_trace.len(),
        result.loglik_trace.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

pub fn generalize(cfg: &RunConfig, args: GeneralizeArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let task = TaskSpec::new(
        parse_pose("start", &args.start)?,
        parse_pose("goal", &args.goal)?,
    )?;
    let mut reparam = cfg.reparam;
    reparam.ablate_covariance |= args.ablate_covariance;
    let retargeted = retarget(&model, &task, &reparam)?;
    save_reparam_model(&retargeted, &args.out)?;
    if retargeted.repairs > 0 {
        eprintln!(
            "warning: {} covariances needed an SPD repair",
            retargeted.repairs
        );
    }
    if let Some(path) = &args.traj {
        let traj = LoadedModel::Retargeted(retargeted).regress(rate(cfg, args.rate)?)?;
        save_trajectory(&traj, path)?;
    }
    Ok(())
}

pub fn regress(cfg: &RunConfig, args: RegressArgs) -> Result<()> {
    let model = LoadedModel::load(&args.model)?;
    let traj = model.regress(rate(cfg, args.rate)?)?;
    save_trajectory(&traj, &args.out)?;
    Ok(())
}

pub fn evaluate(cfg: &RunConfig, args: EvaluateArgs) -> Result<()> {
    let traj = load_trajectory(&args.traj)?;
    let model = LoadedModel::load(&args.model)?;
    let scene = scene_or_default(args.scene.as_deref())?;
    let default_task = TaskSpec::identity_for(model.model())?;
    let start = match &args.start {
        Some(s) => parse_pose("start", s)?,
        None => default_task.start,
    };
    let goal = match &args.goal {
        Some(s) => parse_pose("goal", s)?,
        None => default_task.goal,
    };
    let task = TaskSpec::new(start, goal)?;
    let reference = match &args.reference {
        Some(p) => load_trajectory(p)?,
        None => model.regress(rate(cfg, None)?)?,
    };
    let report = gmm_reparam::bench::evaluate(
        &traj,
        &reference,
        &task,
        &model.model().phases,
        &scene,
        &cfg.thresholds,
    )?;
    let text = to_json(&report);
    match &args.out {
        Some(path) => write(path, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

pub fn benchmark(cfg: &RunConfig, args: BenchmarkArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let scene = scene_or_default(args.scene.as_deref())?;
    let rate = rate(cfg, None)?;
    let reference = match &args.reference {
        Some(p) => load_trajectory(p)?,
        None => LoadedModel::Source(model.clone()).regress(rate)?,
    };
    let base = BenchConfig {
        trials: args.trials.or(cfg.trials).unwrap_or(50),
        variation: args
            .mode
            .or(cfg.variation)
            .unwrap_or(Variation::Translational),
        seed: args.seed.or(cfg.seed).unwrap_or(0),
        rate,
        thresholds: cfg.thresholds,
        reparam: cfg.reparam,
    };
    let ablation: &[bool] = if args.compare {
        &[false, true]
    } else if args.ablate_covariance || cfg.reparam.ablate_covariance {
        &[true]
    } else {
        &[false]
    };
    let exec = if args.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };

    let mut summaries = Vec::new();
    let mut records: Vec<TrialRecord> = Vec::new();
    for &ablate in ablation {
        let mut bench = base.clone();
        bench.reparam.ablate_covariance = ablate;
        let trials = run_benchmark(&model, &reference, &scene, &bench, exec)?;
        let summary = Summary::from_trials(bench.method(), &trials)?;
        println!(
            "{} {}: success {:.1}% over {} trials",
            bench.variation,
            summary.method,
            summary.success_rate,
            trials.len()
        );
        summaries.push(summary);
        records.extend(trials);
    }
    write(&args.out.join("summary.csv"), &summary_csv(&summaries))?;
    write(&args.out.join("trials.json"), &to_json(&records))?;
    Ok(())
}

fn numbered(path: &Path, index: usize) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}_{index}.{}", ext.to_string_lossy()),
        None => format!("{stem}_{index}"),
    };
    path.with_file_name(name)
}

pub fn plot(args: PlotArgs) -> Result<()> {
    if args.svg.is_none() && args.csv.is_none() {
        return Err(usage("plot needs --svg and/or --csv"));
    }
    let trajs = args
        .traj
        .iter()
        .map(|p| load_trajectory(p))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let scene = args.scene.as_deref().map(load_scene).transpose()?;
    if let Some(path) = &args.svg {
        let named: Vec<(String, &Trajectory)> = args
            .traj
            .iter()
            .zip(&trajs)
            .map(|(p, t)| {
                (
                    p.file_stem()
                        .unwrap_or_default()
                        .to_string_lossy()
                        .into_owned(),
                    t,
                )
            })
            .collect();
        write(path, &render_svg(&named, scene.as_ref())?)?;
    }
    if let Some(path) = &args.csv {
        if trajs.len() == 1 {
            save_trajectory(&trajs[0], path)?;
        } else {
            for (i, t) in trajs.iter().enumerate() {
                save_trajectory(t, &numbered(path, i))?;
            }
        }
    }
    Ok(())
}
