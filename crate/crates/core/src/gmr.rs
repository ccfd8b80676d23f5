//! Gaussian mixture regression on time.
//!
//! Each component acts as a linear expert `x̄_g + m_g (t - t̄_g)`; the experts
//! are blended by their normalized temporal responsibilities
//! `h_g(t) ∝ π_g N(t | t̄_g, Σ_tt,g)`, computed in log space.

use nalgebra::{DMatrix, DVector};

use crate::data::{uniform_grid, Trajectory};
use crate::error::{Error, Result};
use crate::linalg::{log_sum_exp, LN_2PI};
use crate::model::GmmModel;
use crate::par::{map_range, Execution};
use crate::reparam::ReparamModel;

/// Default regression rate, Hz.
pub const DEFAULT_RATE: f64 = 100.0;

#[derive(Debug, Clone)]
struct Expert {
    log_prior: f64,
    t_mean: f64,
    cov_tt: f64,
    x_mean: DVector<f64>,
    slope: DVector<f64>,
    /// `Σ_xx - Σ_xt Σ_tx / Σ_tt`.
    cond_cov: DMatrix<f64>,
}

/// Precomputed linear experts of a mixture, ready for conditioning on time.
#[derive(Debug, Clone)]
pub struct Regressor {
    experts: Vec<Expert>,
    dim: usize,
}

pub trait Mixture {
    fn regressor(&self) -> Regressor;
}

impl Mixture for GmmModel {
    fn regressor(&self) -> Regressor {
        let slopes = self.components.iter().map(|c| c.slope()).collect();
        Regressor::build(self, slopes)
    }
}

impl Mixture for ReparamModel {
    fn regressor(&self) -> Regressor {
        Regressor::build(&self.model, self.slopes.clone())
    }
}

impl Regressor {
    fn build(model: &GmmModel, slopes: Vec<DVector<f64>>) -> Self {
        let dim = model.dim;
        let experts = model
            .components
            .iter()
            .zip(slopes)
            .map(|(c, slope)| {
                let b = c.blocks();
                let cond_cov = &b.cov_xx - &b.cov_xt * &b.cov_tx / b.cov_tt;
                Expert {
                    log_prior: c.prior.ln(),
                    t_mean: b.t_mean,
                    cov_tt: b.cov_tt,
                    x_mean: b.x_mean,
                    slope,
                    cond_cov,
                }
            })
            .collect();
        Regressor { experts, dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Normalized activations `h_g(t)`; never NaN for finite `t`.
    pub fn weights(&self, t: f64) -> Vec<f64> {
        let mut logs: Vec<f64> = self
            .experts
            .iter()
            .map(|e| {
                let d = t - e.t_mean;
                e.log_prior - 0.5 * (LN_2PI + e.cov_tt.ln()) - 0.5 * d * d / e.cov_tt
            })
            .collect();
        let lse = log_sum_exp(&logs);
        logs.iter_mut().for_each(|l| *l = (*l - lse).exp());
        logs
    }

    pub fn predict(&self, t: f64) -> DVector<f64> {
        let h = self.weights(t);
        let mut x = DVector::zeros(self.dim);
        for (e, w) in self.experts.iter().zip(h) {
            x.axpy(w, &(&e.x_mean + &e.slope * (t - e.t_mean)), 1.0);
        }
        x
    }

    /// Conditional mean and covariance of `x | t`.
    pub fn predict_with_cov(&self, t: f64) -> (DVector<f64>, DMatrix<f64>) {
        let h = self.weights(t);
        let locals: Vec<DVector<f64>> = self
            .experts
            .iter()
            .map(|e| &e.x_mean + &e.slope * (t - e.t_mean))
            .collect();
        let mut mean = DVector::zeros(self.dim);
        for (l, w) in locals.iter().zip(&h) {
            mean.axpy(*w, l, 1.0);
        }
        let mut cov = DMatrix::zeros(self.dim, self.dim);
        for ((e, l), w) in self.experts.iter().zip(&locals).zip(&h) {
            let d = l - &mean;
            cov += (&e.cond_cov + &d * d.transpose()) * *w;
        }
        (mean, cov)
    }

    pub fn trajectory(&self, times: &[f64], exec: Execution) -> Result<Trajectory> {
        validate_times(times)?;
        let rows = map_range(exec, times.len(), |i| self.predict(times[i]));
        let values = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Trajectory::new(times.to_vec(), values, self.dim)
    }
}

fn validate_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::invalid("regression needs at least one time"));
    }
    if !times.iter().all(|t| t.is_finite()) {
        return Err(Error::invalid("regression times must be finite"));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid(
            "regression times must be strictly increasing",
        ));
    }
    Ok(())
}

pub fn activation_weights(model: &impl Mixture, t: f64) -> Vec<f64> {
    model.regressor().weights(t)
}

/// Expected pose at each of `times`.
pub fn regress(model: &impl Mixture, times: &[f64]) -> Result<Trajectory> {
    model.regressor().trajectory(times, Execution::Sequential)
}

/// `n` = `duration · rate + 1` uniform samples over `[0, duration]`.
pub fn default_times(duration: f64, rate: f64) -> Vec<f64> {
    let n = (duration * rate).round() as usize + 1;
    uniform_grid(0.0, duration, n.max(2))
}
