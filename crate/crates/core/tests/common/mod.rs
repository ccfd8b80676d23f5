#![allow(dead_code)]

use gmm_reparam::data::PhaseSchedule;
use gmm_reparam::model::{GaussianComponent, GmmModel};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random valid mixture over `(t, x)` with `dim` spatial dimensions. Component
/// means move monotonically by at least `min_step` per component in every
/// dimension, so no endpoint displacement is degenerate when `min_step`
/// exceeds the thresholds.
pub fn random_model(seed: u64, components: usize, dim: usize, min_step: f64) -> GmmModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let duration = 7.0;
    let mut x = DVector::from_fn(dim, |_, _| rng.random_range(-0.5..0.5));
    let direction: Vec<f64> = (0..dim)
        .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
        .collect();
    let comps = (0..components)
        .map(|g| {
            let t = duration * (g as f64 + 0.5) / components as f64;
            if g > 0 {
                for d in 0..dim {
                    x[d] += direction[d] * rng.random_range(min_step..3.0 * min_step);
                }
            }
            let n = dim + 1;
            let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.3..0.3));
            let mut cov = &a * a.transpose() + DMatrix::identity(n, n) * 1e-3;
            cov[(0, 0)] += 0.1;
            let mut mean = DVector::zeros(n);
            mean[0] = t;
            mean.rows_mut(1, dim).copy_from(&x);
            GaussianComponent {
                prior: rng.random_range(0.5..1.5),
                mean,
                cov: (&cov + cov.transpose()) * 0.5,
            }
        })
        .collect::<Vec<_>>();
    let total: f64 = comps.iter().map(|c| c.prior).sum();
    let comps = comps
        .into_iter()
        .map(|mut c| {
            c.prior /= total;
            c
        })
        .collect();
    GmmModel::new(
        dim,
        duration,
        PhaseSchedule::new(1.0, 6.0, duration).unwrap(),
        comps,
    )
    .unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
