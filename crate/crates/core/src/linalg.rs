//! Small dense linear-algebra helpers shared by the model and reparameterization code.

use nalgebra::{DMatrix, DVector, UnitQuaternion, Vector3};

pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_3;

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Cholesky-based positive-definiteness test on the symmetrized matrix.
pub fn is_spd(m: &DMatrix<f64>) -> bool {
    m.is_square() && m.iter().all(|v| v.is_finite()) && symmetrize(m).cholesky().is_some()
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    symmetrize(m)
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Clamp eigenvalues of the symmetrized matrix from below at `floor`.
pub fn clamp_eigenvalues(m: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let eig = symmetrize(m).symmetric_eigen();
    let clamped = eig.eigenvalues.map(|v| v.max(floor));
    let q = &eig.eigenvectors;
    symmetrize(&(q * DMatrix::from_diagonal(&clamped) * q.transpose()))
}

/// Cached lower-triangular inverse factor for fast Gaussian log-densities.
#[derive(Debug, Clone)]
pub(crate) struct GaussianEval {
    mean: DVector<f64>,
    inv_chol: DMatrix<f64>,
    log_norm: f64,
}

impl GaussianEval {
    pub fn new(mean: &DVector<f64>, cov: &DMatrix<f64>) -> Option<Self> {
        let chol = symmetrize(cov).cholesky()?;
        let l = chol.l();
        let d = mean.len();
        let inv_chol = l.solve_lower_triangular(&DMatrix::identity(d, d))?;
        let log_det: f64 = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Some(GaussianEval {
            mean: mean.clone(),
            inv_chol,
            log_norm: -0.5 * (d as f64 * LN_2PI + log_det),
        })
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let d = self.mean.len();
        let mut maha = 0.0;
        for i in 0..d {
            let acc: f64 = (0..=i)
                .map(|j| self.inv_chol[(i, j)] * (x[j] - self.mean[j]))
                .sum();
            maha += acc * acc;
        }
        self.log_norm - 0.5 * maha
    }
}

pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Angle in radians of the relative rotation between two rotation vectors.
pub fn rotation_angle_between(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    // atan2 form stays accurate (and finite) near zero and π.
    let q = UnitQuaternion::from_scaled_axis(*a).inverse() * UnitQuaternion::from_scaled_axis(*b);
    2.0 * q.imag().norm().atan2(q.w.abs())
}
