//! Component-level reparameterization of a fitted mixture to a new start and
//! goal pose.
//!
//! Stage one remaps every component mean by the per-dimension ratio of the
//! requested endpoint displacement to the demonstrated one. Stage two rescales
//! each component's slope `m = Σ_xt / Σ_tt` by the ratio of consecutive mean
//! displacements and swaps the slope's rank-one contribution inside
//! `C = Σ_xx / Σ_tt`:
//!
//! ```text
//! C' = C + m' m'ᵀ - m mᵀ
//! ```
//!
//! so the Schur complement `C' - m' m'ᵀ` equals `C - m mᵀ` and the rebuilt
//! `Σ' = Σ_tt [[1, m'ᵀ], [m', C']]` stays positive definite. Priors, `t̄` and
//! `Σ_tt` are never touched.
//!
//! In a scaled dimension every consecutive mean displacement is scaled by the
//! same factor `s_d`, so slopes are scaled by `s_d` as well, including across
//! static segments where the ratio itself would be 0/0.
//!
//! Dimensions whose demonstrated endpoint displacement is (almost) zero cannot
//! be rescaled. Their means instead blend the start and goal offsets linearly
//! in component time, and interior slopes gain the rate of that blend.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{Pose, POSE_DIM};
use crate::error::{Error, Result};
use crate::linalg::{clamp_eigenvalues, symmetrize};
use crate::model::{ComponentFile, GaussianComponent, GmmModel, ModelFile};

/// New start and goal poses for a generalization request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub start: Pose,
    pub goal: Pose,
}

impl TaskSpec {
    pub fn new(start: Pose, goal: Pose) -> Result<Self> {
        start.validate()?;
        goal.validate()?;
        Ok(TaskSpec { start, goal })
    }

    pub fn start_vector(&self) -> DVector<f64> {
        DVector::from_row_slice(&self.start.to_array())
    }

    pub fn goal_vector(&self) -> DVector<f64> {
        DVector::from_row_slice(&self.goal.to_array())
    }

    /// Task whose endpoints are the first and last component means of `model`.
    pub fn identity_for(model: &GmmModel) -> Result<Self> {
        let first = model
            .components
            .first()
            .ok_or_else(|| Error::invalid("empty model"))?;
        let last = model.components.last().unwrap();
        TaskSpec::new(
            Pose::from_slice(first.x_mean().as_slice())?,
            Pose::from_slice(last.x_mean().as_slice())?,
        )
    }
}

/// How the first component's slope is treated. The recurrence for slopes is
/// defined on consecutive pairs, so the first component has no predecessor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FirstSlope {
    /// Scale by the endpoint ratio, like the means.
    #[default]
    EndpointScale,
    /// Leave component 1's slope and covariance untouched.
    Keep,
}

/// Slope update in dimensions whose endpoint displacement is degenerate and
/// whose means are offset-blended instead of scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegenerateSlope {
    /// Add the rate of the linear offset blend, so slopes follow the means.
    #[default]
    Drift,
    /// Leave the demonstrated slope as is.
    Keep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReparamConfig {
    /// Displacement threshold for position dimensions (meters). Also used for
    /// every dimension of models that are not 6-D poses.
    pub degenerate_eps_position: f64,
    /// Displacement threshold for rotation-vector dimensions (radians).
    pub degenerate_eps_rotation: f64,
    /// Keep the source covariances; only the means move.
    pub ablate_covariance: bool,
    /// Eigenvalue floor used if a rebuilt covariance needs repair.
    pub cov_floor: f64,
    pub first_slope: FirstSlope,
    pub degenerate_slope: DegenerateSlope,
}

impl Default for ReparamConfig {
    fn default() -> Self {
        ReparamConfig {
            degenerate_eps_position: 1e-2,
            degenerate_eps_rotation: 5e-2,
            ablate_covariance: false,
            cov_floor: 1e-6,
            first_slope: FirstSlope::EndpointScale,
            degenerate_slope: DegenerateSlope::Drift,
        }
    }
}

impl ReparamConfig {
    pub fn validate(&self) -> Result<()> {
        if self.degenerate_eps_position > 0.0
            && self.degenerate_eps_rotation > 0.0
            && self.cov_floor >= 0.0
        {
            Ok(())
        } else {
            Err(Error::invalid("degenerate thresholds must be positive"))
        }
    }

    pub fn eps(&self, d: usize, dim: usize) -> f64 {
        if dim == POSE_DIM && d >= 3 {
            self.degenerate_eps_rotation
        } else {
            self.degenerate_eps_position
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanUpdate {
    pub means: Vec<DVector<f64>>,
    /// Per dimension: the endpoint scale `s_d`, or `None` where the
    /// demonstrated endpoint displacement was degenerate.
    pub scales: Vec<Option<f64>>,
}

pub fn reparam_means(
    model: &GmmModel,
    start: &DVector<f64>,
    goal: &DVector<f64>,
    cfg: &ReparamConfig,
) -> Result<MeanUpdate> {
    cfg.validate()?;
    let g_count = model.len();
    if g_count < 2 {
        return Err(Error::invalid(
            "reparameterization needs at least 2 components",
        ));
    }
    let dim = model.dim;
    if start.len() != dim || goal.len() != dim {
        return Err(Error::invalid(format!(
            "task endpoints must have dimension {dim}"
        )));
    }
    if !start.iter().chain(goal.iter()).all(|v| v.is_finite()) {
        return Err(Error::invalid("task endpoints must be finite"));
    }

    let first = &model.components[0];
    let last = &model.components[g_count - 1];
    let x1 = first.x_mean();
    let xg = last.x_mean();
    let t1 = first.t_mean();
    let tg = last.t_mean();

    let scales: Vec<Option<f64>> = (0..dim)
        .map(|d| {
            let span = xg[d] - x1[d];
            (span.abs() >= cfg.eps(d, dim)).then(|| (goal[d] - start[d]) / span)
        })
        .collect();

    let mut means: Vec<DVector<f64>> = model
        .components
        .iter()
        .map(|c| {
            let x = c.x_mean();
            let alpha = (c.t_mean() - t1) / (tg - t1);
            DVector::from_fn(dim, |d, _| match scales[d] {
                Some(s) => start[d] + s * (x[d] - x1[d]),
                None => x[d] + (1.0 - alpha) * (start[d] - x1[d]) + alpha * (goal[d] - xg[d]),
            })
        })
        .collect();
    means[0] = start.clone();
    means[g_count - 1] = goal.clone();
    Ok(MeanUpdate { means, scales })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceUpdate {
    pub slopes: Vec<DVector<f64>>,
    pub normalized_covs: Vec<DMatrix<f64>>,
    pub covs: Vec<DMatrix<f64>>,
    /// Rebuilt covariances that failed Cholesky and were eigen-clamped.
    pub repairs: usize,
}

pub fn reparam_covariances(
    model: &GmmModel,
    update: &MeanUpdate,
    cfg: &ReparamConfig,
) -> Result<CovarianceUpdate> {
    let g_count = model.len();
    let dim = model.dim;
    if update.means.len() != g_count {
        return Err(Error::invalid("mean update does not match model"));
    }
    let mut out = CovarianceUpdate {
        slopes: Vec::with_capacity(g_count),
        normalized_covs: Vec::with_capacity(g_count),
        covs: Vec::with_capacity(g_count),
        repairs: 0,
    };

    let t1 = model.components[0].t_mean();
    let tg = model.components[g_count - 1].t_mean();
    let first_mean = model.components[0].x_mean();
    let last_mean = model.components[g_count - 1].x_mean();
    // Offset-blended dimensions drift linearly in component time between the
    // first and last components and are constant outside, so interior slopes
    // pick up the drift rate and the two end components keep theirs.
    let drift: Vec<f64> = (0..dim)
        .map(|d| {
            let start_offset = update.means[0][d] - first_mean[d];
            let goal_offset = update.means[g_count - 1][d] - last_mean[d];
            (goal_offset - start_offset) / (tg - t1)
        })
        .collect();

    for (g, comp) in model.components.iter().enumerate() {
        let m = comp.slope();
        let c = comp.normalized_cov();
        let keep_first = g == 0 && cfg.first_slope == FirstSlope::Keep;
        let slope = |d: usize| -> f64 {
            if keep_first {
                return m[d];
            }
            match update.scales[d] {
                Some(s) => m[d] * s,
                None if g == 0 || g + 1 == g_count => m[d],
                None if cfg.degenerate_slope == DegenerateSlope::Keep => m[d],
                None => m[d] + drift[d],
            }
        };
        let m_new = DVector::from_fn(dim, |d, _| slope(d));
        if m_new == m {
            out.slopes.push(m);
            out.normalized_covs.push(c);
            out.covs.push(comp.cov.clone());
            continue;
        }
        let c_new = symmetrize(&(&c + &m_new * m_new.transpose() - &m * m.transpose()));
        let mut cov = assemble(comp.cov_tt(), &m_new, &c_new);
        if cov.clone().cholesky().is_none() {
            cov = clamp_eigenvalues(&cov, cfg.cov_floor);
            out.repairs += 1;
        }
        out.slopes.push(m_new);
        out.normalized_covs.push(c_new);
        out.covs.push(cov);
    }
    Ok(out)
}

/// `Σ_tt · [[1, mᵀ], [m, C]]`.
fn assemble(cov_tt: f64, m: &DVector<f64>, c: &DMatrix<f64>) -> DMatrix<f64> {
    let d = m.len();
    let mut cov = DMatrix::zeros(d + 1, d + 1);
    cov[(0, 0)] = cov_tt;
    for i in 0..d {
        cov[(0, i + 1)] = cov_tt * m[i];
        cov[(i + 1, 0)] = cov_tt * m[i];
        for j in 0..d {
            cov[(i + 1, j + 1)] = cov_tt * c[(i, j)];
        }
    }
    cov
}

/// A mixture retargeted to new endpoints, with the per-component slope and
/// normalized spatial covariance that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ReparamModel {
    pub model: GmmModel,
    pub slopes: Vec<DVector<f64>>,
    pub normalized_covs: Vec<DMatrix<f64>>,
    pub start: DVector<f64>,
    pub goal: DVector<f64>,
    pub repairs: usize,
    pub ablated: bool,
}

/// Both reparameterization stages for a pose model.
pub fn generalize(model: &GmmModel, task: &TaskSpec, cfg: &ReparamConfig) -> Result<ReparamModel> {
    generalize_to(model, &task.start_vector(), &task.goal_vector(), cfg)
}

/// Both reparameterization stages with endpoints given as raw vectors.
pub fn generalize_to(
    model: &GmmModel,
    start: &DVector<f64>,
    goal: &DVector<f64>,
    cfg: &ReparamConfig,
) -> Result<ReparamModel> {
    let means = reparam_means(model, start, goal, cfg)?;
    let covs = if cfg.ablate_covariance {
        CovarianceUpdate {
            slopes: model
                .components
                .iter()
                .map(GaussianComponent::slope)
                .collect(),
            normalized_covs: model
                .components
                .iter()
                .map(GaussianComponent::normalized_cov)
                .collect(),
            covs: model.components.iter().map(|c| c.cov.clone()).collect(),
            repairs: 0,
        }
    } else {
        reparam_covariances(model, &means, cfg)?
    };

    let components = model
        .components
        .iter()
        .zip(means.means.iter().zip(covs.covs))
        .map(|(c, (x, cov))| {
            let mut mean = c.mean.clone();
            mean.rows_mut(1, model.dim).copy_from(x);
            GaussianComponent {
                prior: c.prior,
                mean,
                cov,
            }
        })
        .collect();
    Ok(ReparamModel {
        model: GmmModel {
            dim: model.dim,
            duration: model.duration,
            phases: model.phases,
            components,
        },
        slopes: covs.slopes,
        normalized_covs: covs.normalized_covs,
        start: start.clone(),
        goal: goal.clone(),
        repairs: covs.repairs,
        ablated: cfg.ablate_covariance,
    })
}

#[derive(Serialize, Deserialize)]
struct ReparamComponentFile {
    #[serde(flatten)]
    base: ComponentFile,
    m: Vec<f64>,
    /// Row-major.
    #[serde(rename = "C")]
    c: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TaskEcho {
    start: Vec<f64>,
    goal: Vec<f64>,
    ablate_covariance: bool,
}

#[derive(Serialize, Deserialize)]
struct ReparamModelFile {
    #[serde(rename = "D")]
    dim: usize,
    #[serde(rename = "T")]
    duration: f64,
    phases: crate::model::PhasesFile,
    components: Vec<ReparamComponentFile>,
    task: TaskEcho,
    spd_repairs: usize,
}

pub fn reparam_model_to_json(r: &ReparamModel) -> String {
    let base = ModelFile::from(&r.model);
    let file = ReparamModelFile {
        dim: base.dim,
        duration: base.duration,
        phases: base.phases,
        components: base
            .components
            .into_iter()
            .zip(r.slopes.iter().zip(&r.normalized_covs))
            .map(|(base, (m, c))| ReparamComponentFile {
                base,
                m: m.iter().copied().collect(),
                c: c.transpose().iter().copied().collect(),
            })
            .collect(),
        task: TaskEcho {
            start: r.start.iter().copied().collect(),
            goal: r.goal.iter().copied().collect(),
            ablate_covariance: r.ablated,
        },
        spd_repairs: r.repairs,
    };
    serde_json::to_string_pretty(&file).expect("reparameterized model serializes")
}

pub fn reparam_model_from_json(text: &str, path: &Path) -> Result<ReparamModel> {
    let file: ReparamModelFile = serde_json::from_str(text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    let dim = file.dim;
    let mut slopes = Vec::new();
    let mut normalized_covs = Vec::new();
    let mut components = Vec::new();
    for (i, c) in file.components.into_iter().enumerate() {
        if c.m.len() != dim || c.c.len() != dim * dim {
            return Err(Error::invalid(format!("component {i}: bad m/C sizes")));
        }
        slopes.push(DVector::from_vec(c.m));
        normalized_covs.push(DMatrix::from_row_slice(dim, dim, &c.c));
        components.push(c.base);
    }
    let model = GmmModel::try_from(ModelFile {
        dim,
        duration: file.duration,
        phases: file.phases,
        components,
    })?;
    if file.task.start.len() != dim || file.task.goal.len() != dim {
        return Err(Error::invalid("task echo has wrong dimension"));
    }
    Ok(ReparamModel {
        model,
        slopes,
        normalized_covs,
        start: DVector::from_vec(file.task.start),
        goal: DVector::from_vec(file.task.goal),
        repairs: file.spd_repairs,
        ablated: file.task.ablate_covariance,
    })
}

pub fn save_reparam_model(r: &ReparamModel, path: &Path) -> Result<()> {
    fs::write(path, reparam_model_to_json(r)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::PhaseSchedule;
    use crate::linalg::min_eigenvalue;

    fn comp_1d(t: f64, x: f64, m: f64, c: f64, cov_tt: f64, prior: f64) -> GaussianComponent {
        GaussianComponent {
            prior,
            mean: DVector::from_vec(vec![t, x]),
            cov: DMatrix::from_row_slice(2, 2, &[cov_tt, cov_tt * m, cov_tt * m, cov_tt * c]),
        }
    }

    fn model_1d(xs: &[f64], m: f64) -> GmmModel {
        let p = 1.0 / xs.len() as f64;
        let comps = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| comp_1d(i as f64, x, m, m * m + 0.5, 0.3, p))
            .collect();
        GmmModel::new(
            1,
            xs.len() as f64,
            PhaseSchedule::new(0.5, 1.0, xs.len() as f64).unwrap(),
            comps,
        )
        .unwrap()
    }

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(x)
    }

    #[test]
    fn hand_evaluated_mean() {
        let model = model_1d(&[0.0, 1.0, 2.0], 0.2);
        let up = reparam_means(&model, &v(&[1.0]), &v(&[5.0]), &ReparamConfig::default()).unwrap();
        assert_eq!(up.means[1][0], 3.0);
        assert_eq!(up.means[0][0], 1.0);
        assert_eq!(up.means[2][0], 5.0);
    }

    #[test]
    fn identity_task_keeps_means() {
        let model = model_1d(&[0.0, 0.7, 1.1, 2.0], 0.2);
        let up = reparam_means(&model, &v(&[0.0]), &v(&[2.0]), &ReparamConfig::default()).unwrap();
        for (a, c) in up.means.iter().zip(&model.components) {
            assert!((a[0] - c.mean[1]).abs() < 1e-15);
        }
    }

    #[test]
    fn translated_task_shifts_means() {
        let model = model_1d(&[0.0, 0.7, 1.1, 2.0], 0.2);
        let up =
            reparam_means(&model, &v(&[0.25]), &v(&[2.25]), &ReparamConfig::default()).unwrap();
        for (a, c) in up.means.iter().zip(&model.components) {
            assert!((a[0] - (c.mean[1] + 0.25)).abs() < 1e-15);
        }
    }

    #[test]
    fn slope_scales_with_consecutive_displacement() {
        // consecutive means 0 -> 1 remapped to 0 -> 3
        let model = model_1d(&[0.0, 1.0], 0.2);
        let up = reparam_means(&model, &v(&[0.0]), &v(&[3.0]), &ReparamConfig::default()).unwrap();
        let cov = reparam_covariances(&model, &up, &ReparamConfig::default()).unwrap();
        assert!((cov.slopes[1][0] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn first_slope_kept_when_requested() {
        let model = model_1d(&[0.0, 1.0, 2.0], 0.2);
        let cfg = ReparamConfig {
            first_slope: FirstSlope::Keep,
            ..ReparamConfig::default()
        };
        let r = generalize_to(&model, &v(&[0.0]), &v(&[6.0]), &cfg).unwrap();
        assert_eq!(r.slopes[0][0], 0.2);
        assert_eq!(r.model.components[0].cov, model.components[0].cov);
        assert!((r.slopes[1][0] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn identity_generalization_is_noop() {
        let model = model_1d(&[0.0, 0.4, 1.7, 2.0], -0.3);
        let r = generalize_to(&model, &v(&[0.0]), &v(&[2.0]), &ReparamConfig::default()).unwrap();
        for (a, b) in r.model.components.iter().zip(&model.components) {
            assert!((&a.mean - &b.mean).norm() < 1e-12);
            assert!((&a.cov - &b.cov).norm() < 1e-12);
            assert_eq!(a.prior, b.prior);
        }
        assert_eq!(r.repairs, 0);
    }

    #[test]
    fn schur_complement_preserved() {
        let model = model_1d(&[0.0, 0.4, 1.7, 2.0], 0.8);
        let r = generalize_to(&model, &v(&[1.0]), &v(&[-7.0]), &ReparamConfig::default()).unwrap();
        for (g, c) in model.components.iter().enumerate() {
            let m = c.slope();
            let before = c.normalized_cov() - &m * m.transpose();
            let mp = &r.slopes[g];
            let after = &r.normalized_covs[g] - mp * mp.transpose();
            assert!((min_eigenvalue(&before) - min_eigenvalue(&after)).abs() < 1e-10);
        }
    }

    #[test]
    fn degenerate_endpoint_blends_offsets() {
        // x̄_1 == x̄_G: offsets 1 at start and 3 at goal blend linearly in t̄
        let model = model_1d(&[0.0, 0.5, 0.0], 0.0);
        let up = reparam_means(&model, &v(&[1.0]), &v(&[3.0]), &ReparamConfig::default()).unwrap();
        assert_eq!(up.scales, vec![None]);
        assert!((up.means[1][0] - (0.5 + 0.5 * 1.0 + 0.5 * 3.0)).abs() < 1e-15);
        assert_eq!(up.means[2][0], 3.0);
    }

    #[test]
    fn scaled_dimension_scales_static_segments_too() {
        let model = model_1d(&[0.0, 0.0, 2.0], 0.1);
        let up = reparam_means(&model, &v(&[0.0]), &v(&[4.0]), &ReparamConfig::default()).unwrap();
        let cov = reparam_covariances(&model, &up, &ReparamConfig::default()).unwrap();
        for g in 0..3 {
            assert!((cov.slopes[g][0] - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn blended_dimension_slopes_follow_the_drift() {
        // endpoints coincide, so the new offsets 1 and 3 are blended over t̄ ∈ [0, 2]
        let model = model_1d(&[0.0, 0.5, 0.0], 0.1);
        let up = reparam_means(&model, &v(&[1.0]), &v(&[3.0]), &ReparamConfig::default()).unwrap();
        assert_eq!(up.scales, vec![None]);
        assert_eq!(up.means[1][0], 2.5);
        let cov = reparam_covariances(&model, &up, &ReparamConfig::default()).unwrap();
        assert_eq!(cov.slopes[0][0], 0.1);
        assert!((cov.slopes[1][0] - 1.1).abs() < 1e-15);
        assert_eq!(cov.slopes[2][0], 0.1);

        let keep = ReparamConfig {
            degenerate_slope: DegenerateSlope::Keep,
            ..ReparamConfig::default()
        };
        let cov = reparam_covariances(&model, &up, &keep).unwrap();
        assert!(cov.slopes.iter().all(|m| m[0] == 0.1));
    }

    #[test]
    fn ablation_keeps_covariances() {
        let model = model_1d(&[0.0, 0.4, 1.7, 2.0], 0.8);
        let cfg = ReparamConfig {
            ablate_covariance: true,
            ..ReparamConfig::default()
        };
        let a = generalize_to(&model, &v(&[1.0]), &v(&[-7.0]), &cfg).unwrap();
        let f = generalize_to(&model, &v(&[1.0]), &v(&[-7.0]), &ReparamConfig::default()).unwrap();
        for g in 0..model.len() {
            assert_eq!(a.model.components[g].mean, f.model.components[g].mean);
            assert_eq!(a.model.components[g].cov, model.components[g].cov);
        }
        assert!((0..model.len()).any(|g| a.model.components[g].cov != f.model.components[g].cov));
    }

    #[test]
    fn rejects_single_component() {
        let model = GmmModel::new(
            1,
            1.0,
            PhaseSchedule::new(0.2, 0.5, 1.0).unwrap(),
            vec![comp_1d(0.5, 0.0, 0.0, 1.0, 1.0, 1.0)],
        )
        .unwrap();
        assert!(reparam_means(&model, &v(&[0.0]), &v(&[1.0]), &ReparamConfig::default()).is_err());
    }

    #[test]
    fn json_round_trip() {
        let model = model_1d(&[0.0, 0.4, 1.7, 2.0], 0.8);
        let r = generalize_to(&model, &v(&[1.0]), &v(&[-7.0]), &ReparamConfig::default()).unwrap();
        let back = reparam_model_from_json(&reparam_model_to_json(&r), Path::new("r")).unwrap();
        assert_eq!(back.slopes, r.slopes);
        assert_eq!(back.start, r.start);
        assert_eq!(back.model.components.len(), r.model.components.len());
        for (a, b) in back.model.components.iter().zip(&r.model.components) {
            assert!((&a.cov - &b.cov).norm() < 1e-15);
        }
    }
}
