//! Effect of noisy loss feedback on policy-gradient training: the variance
//! of the gradient estimator and the BLER reached after training.

mod sweep;
mod variance;

pub use sweep::{bler_vs_feedback_mse_sweep, SweepConfig, SweepPoint, SweepReport};
pub use variance::{
    closed_form_b, estimate_d_norm_sq, estimate_v, estimate_variance, VariancePoint, VarianceReport,
};
