//! Joint (time, pose) Gaussian mixture: K-means initialization, EM fitting,
//! block access and JSON persistence.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector, RowDVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{PhaseSchedule, Trajectory};
use crate::error::{Error, Result};
use crate::linalg::{is_spd, log_sum_exp, symmetrize, GaussianEval};

/// Responsibility mass below which a component counts as collapsed.
const COLLAPSE_MASS: f64 = 1e-12;
const KMEANS_MAX_ITERS: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComponent {
    pub prior: f64,
    /// `[t̄, x̄]`, length `D + 1`.
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// Time / pose partition of a component's mean and covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentBlocks {
    pub t_mean: f64,
    pub x_mean: DVector<f64>,
    pub cov_tt: f64,
    pub cov_tx: RowDVector<f64>,
    pub cov_xt: DVector<f64>,
    pub cov_xx: DMatrix<f64>,
}

impl ComponentBlocks {
    pub fn assemble(&self) -> (DVector<f64>, DMatrix<f64>) {
        let d = self.x_mean.len();
        let mut mean = DVector::zeros(d + 1);
        mean[0] = self.t_mean;
        mean.rows_mut(1, d).copy_from(&self.x_mean);
        let mut cov = DMatrix::zeros(d + 1, d + 1);
        cov[(0, 0)] = self.cov_tt;
        cov.view_mut((0, 1), (1, d)).copy_from(&self.cov_tx);
        cov.view_mut((1, 0), (d, 1)).copy_from(&self.cov_xt);
        cov.view_mut((1, 1), (d, d)).copy_from(&self.cov_xx);
        (mean, cov)
    }
}

impl GaussianComponent {
    pub fn dim(&self) -> usize {
        self.mean.len() - 1
    }

    pub fn t_mean(&self) -> f64 {
        self.mean[0]
    }

    pub fn x_mean(&self) -> DVector<f64> {
        self.mean.rows(1, self.dim()).into_owned()
    }

    pub fn cov_tt(&self) -> f64 {
        self.cov[(0, 0)]
    }

    /// Slope `m = Σ_xt / Σ_tt`.
    pub fn slope(&self) -> DVector<f64> {
        self.cov.view((1, 0), (self.dim(), 1)).column(0) / self.cov_tt()
    }

    /// Normalized spatial covariance `C = Σ_xx / Σ_tt`.
    pub fn normalized_cov(&self) -> DMatrix<f64> {
        let d = self.dim();
        self.cov.view((1, 1), (d, d)) / self.cov_tt()
    }

    pub fn blocks(&self) -> ComponentBlocks {
        let d = self.dim();
        ComponentBlocks {
            t_mean: self.mean[0],
            x_mean: self.x_mean(),
            cov_tt: self.cov[(0, 0)],
            cov_tx: self.cov.view((0, 1), (1, d)).row(0).into_owned(),
            cov_xt: self.cov.view((1, 0), (d, 1)).column(0).into_owned(),
            cov_xx: self.cov.view((1, 1), (d, d)).into_owned(),
        }
    }

    pub fn validate(&self, index: usize) -> Result<()> {
        let n = self.mean.len();
        if n < 2 || self.cov.shape() != (n, n) {
            return Err(Error::invalid(format!(
                "component {index}: mean length {n} does not match covariance {:?}",
                self.cov.shape()
            )));
        }
        if !(self.prior > 0.0 && self.prior.is_finite()) {
            return Err(Error::invalid(format!(
                "component {index}: prior {} must be positive",
                self.prior
            )));
        }
        if !self.mean.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid(format!(
                "component {index}: non-finite mean"
            )));
        }
        if !(self.cov_tt() > 0.0) || !is_spd(&self.cov) {
            return Err(Error::NotSpd { component: index });
        }
        Ok(())
    }
}

/// Fitted mixture over `(t, x)` with components ordered by `t̄`.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmModel {
    pub dim: usize,
    pub duration: f64,
    pub phases: PhaseSchedule,
    pub components: Vec<GaussianComponent>,
}

impl GmmModel {
    pub fn new(
        dim: usize,
        duration: f64,
        phases: PhaseSchedule,
        components: Vec<GaussianComponent>,
    ) -> Result<Self> {
        let model = GmmModel {
            dim,
            duration,
            phases,
            components,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::invalid("model has no components"));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::invalid(format!(
                "invalid duration {}",
                self.duration
            )));
        }
        self.phases.validate()?;
        for (i, c) in self.components.iter().enumerate() {
            if c.dim() != self.dim {
                return Err(Error::invalid(format!(
                    "component {i} has dimension {}, model declares {}",
                    c.dim(),
                    self.dim
                )));
            }
            c.validate(i)?;
        }
        let total: f64 = self.components.iter().map(|c| c.prior).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("priors sum to {total}, expected 1")));
        }
        if let Some(i) = self
            .components
            .windows(2)
            .position(|w| !(w[1].t_mean() > w[0].t_mean()))
        {
            return Err(Error::invalid(format!(
                "components {i} and {} are not ordered by time",
                i + 1
            )));
        }
        Ok(())
    }

    /// Log-likelihood of `data` under the model.
    pub fn log_likelihood(&self, data: &[DVector<f64>]) -> Result<f64> {
        let evals = evaluators(&self.components)?;
        let log_priors: Vec<f64> = self.components.iter().map(|c| c.prior.ln()).collect();
        let mut buf = vec![0.0; self.len()];
        Ok(data
            .iter()
            .map(|x| {
                for (g, e) in evals.iter().enumerate() {
                    buf[g] = log_priors[g] + e.log_density(x.as_slice());
                }
                log_sum_exp(&buf)
            })
            .sum())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub components: usize,
    pub max_iters: usize,
    /// Relative log-likelihood change that stops EM.
    pub loglik_tol: f64,
    /// Added to every covariance diagonal (squared internal units).
    pub cov_floor: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            components: 15,
            max_iters: 200,
            loglik_tol: 1e-6,
            cov_floor: 1e-6,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.components < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 components, got {}",
                self.components
            )));
        }
        if !(self.cov_floor >= 0.0) || !(self.loglik_tol >= 0.0) || self.max_iters == 0 {
            return Err(Error::invalid(
                "cov_floor and loglik_tol must be non-negative, max_iters positive",
            ));
        }
        Ok(())
    }
}

/// Stack demonstrations into `(t, x)` points.
pub fn dataset_from_trajectories(demos: &[Trajectory]) -> Result<Vec<DVector<f64>>> {
    let dim = demos
        .first()
        .ok_or_else(|| Error::invalid("no demonstrations"))?
        .dim();
    if demos.iter().any(|d| d.dim() != dim) {
        return Err(Error::invalid("demonstrations have different dimensions"));
    }
    Ok(demos
        .iter()
        .flat_map(|d| {
            d.times().iter().zip(d.rows()).map(move |(&t, row)| {
                let mut v = DVector::zeros(dim + 1);
                v[0] = t;
                v.rows_mut(1, dim).copy_from_slice(row);
                v
            })
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct KmeansInit {
    /// Cluster of each datum, indexing into `components`.
    pub assignments: Vec<usize>,
    pub components: Vec<GaussianComponent>,
}

/// K-means clustering (k-means++ seeding, Lloyd iterations) on `(t, x)` points
/// with the time axis rescaled to the spatial spread, then one Gaussian per cluster.
pub fn kmeans_init(
    data: &[DVector<f64>],
    clusters: usize,
    seed: u64,
    cov_floor: f64,
) -> Result<KmeansInit> {
    if clusters == 0 || data.len() < clusters {
        return Err(Error::invalid(format!(
            "dataset of {} points cannot form {clusters} clusters",
            data.len()
        )));
    }
    let dim = data[0].len();
    if dim < 2 || data.iter().any(|x| x.len() != dim) {
        return Err(Error::invalid(
            "dataset points must share a dimension of at least 2",
        ));
    }

    let time_scale = time_scale(data);
    let scaled: Vec<DVector<f64>> = data
        .iter()
        .map(|x| {
            let mut y = x.clone();
            y[0] *= time_scale;
            y
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_plus_plus(&scaled, clusters, &mut rng);
    let mut assignments = vec![usize::MAX; data.len()];
    for _ in 0..KMEANS_MAX_ITERS {
        let mut changed = false;
        for (a, x) in assignments.iter_mut().zip(&scaled) {
            let best = nearest(&centroids, x).0;
            if *a != best {
                *a = best;
                changed = true;
            }
        }
        reseed_empty(&scaled, &mut centroids, &mut assignments);
        for (k, c) in centroids.iter_mut().enumerate() {
            let mut sum = DVector::zeros(dim);
            let mut count = 0usize;
            for (x, _) in scaled.iter().zip(&assignments).filter(|(_, &a)| a == k) {
                sum += x;
                count += 1;
            }
            *c = sum / count as f64;
        }
        if !changed {
            break;
        }
    }

    let n = data.len() as f64;
    let mut components: Vec<(usize, GaussianComponent)> = (0..clusters)
        .map(|k| {
            let members: Vec<&DVector<f64>> = data
                .iter()
                .zip(&assignments)
                .filter(|(_, &a)| a == k)
                .map(|(x, _)| x)
                .collect();
            let weights = vec![1.0; members.len()];
            let (mean, cov) = weighted_moments(&members, &weights, cov_floor);
            (
                k,
                GaussianComponent {
                    prior: members.len() as f64 / n,
                    mean,
                    cov,
                },
            )
        })
        .collect();
    components.sort_by(|a, b| a.1.t_mean().total_cmp(&b.1.t_mean()));

    let mut relabel = vec![0; clusters];
    for (new, (old, _)) in components.iter().enumerate() {
        relabel[*old] = new;
    }
    Ok(KmeansInit {
        assignments: assignments.iter().map(|&a| relabel[a]).collect(),
        components: components.into_iter().map(|(_, c)| c).collect(),
    })
}

/// Factor applied to the time coordinate so its spread matches the RMS spread
/// of the spatial coordinates.
fn time_scale(data: &[DVector<f64>]) -> f64 {
    let n = data.len() as f64;
    let dim = data[0].len();
    let mean = data.iter().fold(DVector::zeros(dim), |acc, x| acc + x) / n;
    let var = data
        .iter()
        .fold(DVector::zeros(dim), |acc: DVector<f64>, x| {
            acc + (x - &mean).component_mul(&(x - &mean))
        })
        / n;
    let spatial: f64 = var.rows(1, dim - 1).sum().sqrt();
    let temporal = var[0].sqrt();
    if spatial > 0.0 && temporal > 0.0 {
        spatial / temporal
    } else {
        1.0
    }
}

fn sq_dist(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(centroids: &[DVector<f64>], x: &DVector<f64>) -> (usize, f64) {
    centroids
        .iter()
        .enumerate()
        .map(|(k, c)| (k, sq_dist(c, x)))
        .fold(
            (0, f64::INFINITY),
            |best, cur| if cur.1 < best.1 { cur } else { best },
        )
}

fn kmeans_plus_plus(data: &[DVector<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<DVector<f64>> {
    let mut chosen = vec![false; data.len()];
    let first = rng.random_range(0..data.len());
    chosen[first] = true;
    let mut centroids = vec![data[first].clone()];
    let mut d2: Vec<f64> = data.iter().map(|x| sq_dist(x, &data[first])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 {
                    pick = Some(i);
                    if target < w {
                        break;
                    }
                    target -= w;
                }
            }
            pick.expect("positive total implies a positive weight")
        } else {
            chosen.iter().position(|c| !c).expect("k <= n")
        };
        chosen[pick] = true;
        let c = data[pick].clone();
        for (w, x) in d2.iter_mut().zip(data) {
            *w = w.min(sq_dist(x, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Move the centroid of every empty cluster onto the point farthest from its
/// own centroid.
fn reseed_empty(data: &[DVector<f64>], centroids: &mut [DVector<f64>], assignments: &mut [usize]) {
    for k in 0..centroids.len() {
        let mut counts = vec![0usize; centroids.len()];
        assignments.iter().for_each(|&a| counts[a] += 1);
        if counts[k] > 0 {
            continue;
        }
        let far = data
            .iter()
            .enumerate()
            .filter(|(i, _)| counts[assignments[*i]] > 1)
            .map(|(i, x)| (i, sq_dist(x, &centroids[assignments[i]])))
            .fold(
                (usize::MAX, -1.0),
                |best, cur| if cur.1 > best.1 { cur } else { best },
            )
            .0;
        if far != usize::MAX {
            centroids[k] = data[far].clone();
            assignments[far] = k;
        }
    }
}

fn weighted_moments(
    points: &[&DVector<f64>],
    weights: &[f64],
    floor: f64,
) -> (DVector<f64>, DMatrix<f64>) {
    let dim = points[0].len();
    let total: f64 = weights.iter().sum();
    let mut mean = DVector::zeros(dim);
    for (x, w) in points.iter().zip(weights) {
        mean.axpy(*w, x, 1.0);
    }
    mean /= total;
    let mut cov = DMatrix::zeros(dim, dim);
    for (x, w) in points.iter().zip(weights) {
        let d = *x - &mean;
        cov.ger(*w, &d, &d, 1.0);
    }
    cov /= total;
    for i in 0..dim {
        cov[(i, i)] += floor;
    }
    (mean, symmetrize(&cov))
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: GmmModel,
    /// Log-likelihood before the first update and after every accepted EM
    /// iteration; non-decreasing unless a collapsed component was reset.
    pub loglik_trace: Vec<f64>,
    /// Components reset after collapsing.
    pub resets: usize,
}

fn evaluators(components: &[GaussianComponent]) -> Result<Vec<GaussianEval>> {
    components
        .iter()
        .enumerate()
        .map(|(g, c)| GaussianEval::new(&c.mean, &c.cov).ok_or(Error::NotSpd { component: g }))
        .collect()
}

/// Expectation-maximization starting from `init`.
pub fn em_fit(
    data: &[DVector<f64>],
    init: &[GaussianComponent],
    config: &FitConfig,
    duration: f64,
    phases: PhaseSchedule,
) -> Result<FitResult> {
    config.validate()?;
    if init.is_empty() {
        return Err(Error::invalid("no initial components"));
    }
    for (i, c) in init.iter().enumerate() {
        c.validate(i)?;
    }
    let dim = init[0].mean.len();
    if data.iter().any(|x| x.len() != dim) {
        return Err(Error::invalid("data dimension does not match components"));
    }

    let g_count = init.len();
    let mut comps = init.to_vec();
    let mut resp = vec![0.0; data.len() * g_count];
    let mut point_ll = vec![0.0; data.len()];
    let mut trace = Vec::new();
    let mut resets = 0;
    let mut previous: Option<Vec<GaussianComponent>> = None;
    let mut reset_this_step = false;

    for iter in 0..=config.max_iters {
        // E-step.
        let evals = evaluators(&comps)?;
        let log_priors: Vec<f64> = comps.iter().map(|c| c.prior.ln()).collect();
        for (i, x) in data.iter().enumerate() {
            let r = &mut resp[i * g_count..(i + 1) * g_count];
            for g in 0..g_count {
                r[g] = log_priors[g] + evals[g].log_density(x.as_slice());
            }
            let lse = log_sum_exp(r);
            point_ll[i] = lse;
            r.iter_mut().for_each(|v| *v = (*v - lse).exp());
        }
        let ll: f64 = point_ll.iter().sum();
        let prev = trace.last().copied();
        // The covariance floor makes the M-step a regularized update rather
        // than an exact maximizer, so once the fit is at the floor's noise
        // level a step can lose likelihood. Such a step is discarded and the
        // fit ends at the best parameters seen.
        if let (Some(prev), Some(before)) = (prev, &previous) {
            if ll < prev && !reset_this_step {
                comps = before.clone();
                break;
            }
        }
        let converged = prev.is_some_and(|p| (ll - p).abs() <= config.loglik_tol * p.abs());
        trace.push(ll);
        if converged || iter == config.max_iters {
            break;
        }
        previous = Some(comps.clone());
        reset_this_step = false;

        // M-step.
        let n = data.len() as f64;
        let refs: Vec<&DVector<f64>> = data.iter().collect();
        for g in 0..g_count {
            let weights: Vec<f64> = (0..data.len()).map(|i| resp[i * g_count + g]).collect();
            let mass: f64 = weights.iter().sum();
            if mass < COLLAPSE_MASS {
                comps[g] = reset_component(data, &point_ll, config.cov_floor);
                resets += 1;
                reset_this_step = true;
                continue;
            }
            let (mean, cov) = weighted_moments(&refs, &weights, config.cov_floor);
            comps[g] = GaussianComponent {
                prior: mass / n,
                mean,
                cov,
            };
        }
        let total: f64 = comps.iter().map(|c| c.prior).sum();
        comps.iter_mut().for_each(|c| c.prior /= total);
    }

    comps.sort_by(|a, b| a.t_mean().total_cmp(&b.t_mean()));
    let model = GmmModel::new(dim - 1, duration, phases, comps)?;
    Ok(FitResult {
        model,
        loglik_trace: trace,
        resets,
    })
}

/// Replacement for a collapsed component, centred on the worst-explained datum.
fn reset_component(data: &[DVector<f64>], point_ll: &[f64], floor: f64) -> GaussianComponent {
    let worst = point_ll
        .iter()
        .enumerate()
        .fold(
            (0, f64::INFINITY),
            |b, (i, &v)| if v < b.1 { (i, v) } else { b },
        )
        .0;
    let refs: Vec<&DVector<f64>> = data.iter().collect();
    let (_, global) = weighted_moments(&refs, &vec![1.0; data.len()], floor);
    GaussianComponent {
        prior: 1.0 / data.len() as f64,
        mean: data[worst].clone(),
        cov: DMatrix::from_diagonal(&global.diagonal()),
    }
}

/// K-means initialization followed by EM on the stacked demonstrations.
pub fn fit_demonstrations(
    demos: &[Trajectory],
    phases: PhaseSchedule,
    config: &FitConfig,
) -> Result<FitResult> {
    config.validate()?;
    let data = dataset_from_trajectories(demos)?;
    let init = kmeans_init(&data, config.components, config.seed, config.cov_floor)?;
    let duration = demos
        .iter()
        .map(Trajectory::end_time)
        .fold(f64::NEG_INFINITY, f64::max);
    em_fit(&data, &init.components, config, duration, phases)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct PhasesFile {
    pub grasp_end: f64,
    pub release_start: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct ComponentFile {
    pub pi: f64,
    pub mu: Vec<f64>,
    /// Row-major.
    pub sigma: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct ModelFile {
    #[serde(rename = "D")]
    pub dim: usize,
    #[serde(rename = "T")]
    pub duration: f64,
    pub phases: PhasesFile,
    pub components: Vec<ComponentFile>,
}

impl From<&GmmModel> for ModelFile {
    fn from(m: &GmmModel) -> Self {
        ModelFile {
            dim: m.dim,
            duration: m.duration,
            phases: PhasesFile {
                grasp_end: m.phases.grasp_end,
                release_start: m.phases.release_start,
            },
            components: m
                .components
                .iter()
                .map(|c| ComponentFile {
                    pi: c.prior,
                    mu: c.mean.iter().copied().collect(),
                    sigma: c.cov.transpose().iter().copied().collect(),
                })
                .collect(),
        }
    }
}

impl TryFrom<ModelFile> for GmmModel {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        let n = f.dim + 1;
        let components = f
            .components
            .into_iter()
            .enumerate()
            .map(|(i, c)| {
                if c.mu.len() != n || c.sigma.len() != n * n {
                    return Err(Error::invalid(format!(
                        "component {i}: expected mu of length {n} and sigma of length {}",
                        n * n
                    )));
                }
                let cov = DMatrix::from_row_slice(n, n, &c.sigma);
                if !is_spd(&cov) {
                    return Err(Error::NotSpd { component: i });
                }
                Ok(GaussianComponent {
                    prior: c.pi,
                    mean: DVector::from_vec(c.mu),
                    cov: symmetrize(&cov),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let phases = PhaseSchedule::new(f.phases.grasp_end, f.phases.release_start, f.duration)?;
        GmmModel::new(f.dim, f.duration, phases, components)
    }
}

pub fn model_to_json(model: &GmmModel) -> String {
    serde_json::to_string_pretty(&ModelFile::from(model)).expect("model serializes")
}

pub fn model_from_json(text: &str, path: &Path) -> Result<GmmModel> {
    let file: ModelFile = serde_json::from_str(text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    GmmModel::try_from(file)
}

pub fn save_model(model: &GmmModel, path: &Path) -> Result<()> {
    fs::write(path, model_to_json(model)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model(path: &Path) -> Result<GmmModel> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    model_from_json(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::min_eigenvalue;
    use rand_chacha::ChaCha8Rng;

    fn two_clouds(n: usize, seed: u64) -> Vec<DVector<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let (cx, cy) = if i % 2 == 0 { (0.0, 0.0) } else { (10.0, 10.0) };
                DVector::from_vec(vec![
                    cx + rng.random_range(-0.5..0.5),
                    cy + rng.random_range(-0.5..0.5),
                ])
            })
            .collect()
    }

    #[test]
    fn blocks_slice_2x2() {
        let c = GaussianComponent {
            prior: 1.0,
            mean: DVector::from_vec(vec![0.5, 1.5]),
            cov: DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]),
        };
        let b = c.blocks();
        assert_eq!(b.cov_tt, 2.0);
        assert_eq!(b.cov_tx[0], 1.0);
        assert_eq!(b.cov_xt[0], 1.0);
        assert_eq!(b.cov_xx[(0, 0)], 3.0);
        let (mean, cov) = b.assemble();
        assert_eq!(mean, c.mean);
        assert_eq!(cov, c.cov);
    }

    #[test]
    fn blocks_x_mean() {
        let c = GaussianComponent {
            prior: 1.0,
            mean: DVector::from_vec(vec![0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]),
            cov: DMatrix::identity(7, 7),
        };
        assert_eq!(
            c.blocks().x_mean.as_slice(),
            &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
        );
    }

    #[test]
    fn kmeans_separates_clouds() {
        let data = two_clouds(200, 3);
        let init = kmeans_init(&data, 2, 11, 0.0).unwrap();
        // brute force: every point's cluster equals that of the point with the same parity
        for (i, a) in init.assignments.iter().enumerate() {
            assert_eq!(*a, init.assignments[i % 2]);
        }
        assert_ne!(init.assignments[0], init.assignments[1]);
        let lo = &init.components[0].mean;
        let hi = &init.components[1].mean;
        assert!(lo[0].abs() < 0.3 && lo[1].abs() < 0.3);
        assert!((hi[0] - 10.0).abs() < 0.3 && (hi[1] - 10.0).abs() < 0.3);
    }

    #[test]
    fn kmeans_one_point_per_cluster() {
        let data: Vec<DVector<f64>> = (0..6)
            .map(|i| DVector::from_vec(vec![i as f64, (i * i) as f64]))
            .collect();
        let init = kmeans_init(&data, 6, 5, 1e-6).unwrap();
        let mut seen = init.assignments.clone();
        seen.sort();
        assert_eq!(seen, vec![0, 1, 2, 3, 4, 5]);
        for (i, x) in data.iter().enumerate() {
            assert_eq!(&init.components[init.assignments[i]].mean, x);
        }
    }

    #[test]
    fn kmeans_is_deterministic() {
        let data = two_clouds(100, 9);
        let a = kmeans_init(&data, 4, 42, 1e-6).unwrap();
        let b = kmeans_init(&data, 4, 42, 1e-6).unwrap();
        assert_eq!(a.assignments, b.assignments);
    }

    #[test]
    fn kmeans_rejects_too_many_clusters() {
        let data = two_clouds(3, 1);
        assert!(kmeans_init(&data, 4, 0, 0.0).is_err());
    }

    #[test]
    fn single_component_closed_form() {
        let data = two_clouds(50, 2);
        let config = FitConfig {
            components: 2,
            cov_floor: 1e-6,
            max_iters: 1,
            ..FitConfig::default()
        };
        let init = vec![GaussianComponent {
            prior: 1.0,
            mean: DVector::from_vec(vec![1.0, 1.0]),
            cov: DMatrix::identity(2, 2),
        }];
        let phases = PhaseSchedule::new(0.1, 0.2, 10.0).unwrap();
        let fit = em_fit(&data, &init, &config, 10.0, phases).unwrap();
        let n = data.len() as f64;
        let mean = data.iter().fold(DVector::zeros(2), |a, x| a + x) / n;
        let mut cov = data.iter().fold(DMatrix::zeros(2, 2), |a, x| {
            a + (x - &mean) * (x - &mean).transpose()
        }) / n;
        cov[(0, 0)] += 1e-6;
        cov[(1, 1)] += 1e-6;
        let c = &fit.model.components[0];
        assert!((&c.mean - mean).norm() < 1e-12);
        assert!((&c.cov - cov).norm() < 1e-12);
        assert!((c.prior - 1.0).abs() < 1e-15);
    }

    #[test]
    fn em_trace_monotone_and_spd() {
        let data = two_clouds(300, 4);
        let config = FitConfig {
            components: 3,
            seed: 7,
            ..FitConfig::default()
        };
        let init = kmeans_init(&data, 3, config.seed, config.cov_floor).unwrap();
        let phases = PhaseSchedule::new(1.0, 2.0, 10.0).unwrap();
        let fit = em_fit(&data, &init.components, &config, 10.0, phases).unwrap();
        for w in fit.loglik_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "{} -> {}", w[0], w[1]);
        }
        for c in &fit.model.components {
            assert!(min_eigenvalue(&c.cov) >= config.cov_floor - 1e-12);
        }
        let total: f64 = fit.model.components.iter().map(|c| c.prior).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn json_rejects_non_spd() {
        let text = r#"{"D":1,"T":2.0,"phases":{"grasp_end":0.5,"release_start":1.5},
            "components":[{"pi":1.0,"mu":[1.0,0.0],"sigma":[1.0,2.0,2.0,1.0]}]}"#;
        assert!(matches!(
            model_from_json(text, Path::new("m.json")),
            Err(Error::NotSpd { component: 0 })
        ));
    }

    #[test]
    fn json_round_trip() {
        let c = |t: f64| GaussianComponent {
            prior: 0.5,
            mean: DVector::from_vec(vec![t, 0.1 * t, -t]),
            cov: DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.1, 0.2, 2.0, 0.3, 0.1, 0.3, 3.0]),
        };
        let model = GmmModel::new(2, 7.0, PhaseSchedule::default(), vec![c(1.0), c(3.0)]).unwrap();
        let back = model_from_json(&model_to_json(&model), Path::new("m")).unwrap();
        assert_eq!(back, model);
    }
}
