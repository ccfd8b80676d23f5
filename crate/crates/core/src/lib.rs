//! Generalize Gaussian-mixture encoded demonstrations to new start and goal
//! poses by reparameterizing the mixture components, then reproduce a
//! trajectory by Gaussian mixture regression on time.

// `!(a > b)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod data;
pub mod error;
pub mod gmr;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod par;
pub mod plot;
pub mod reparam;
pub mod scene;
pub mod synth;

pub use data::{PhaseSchedule, Pose, Trajectory};
pub use error::{Error, Result};
pub use gmr::{regress, Mixture, Regressor};
pub use model::{fit_demonstrations, FitConfig, GaussianComponent, GmmModel};
pub use par::Execution;
pub use reparam::{generalize, ReparamConfig, ReparamModel, TaskSpec};
pub use scene::Scene;
