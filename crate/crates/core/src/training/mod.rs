//! The adversarial training loop and its parts.

mod adam;
mod config;
pub mod mcmc;
mod metrics;
mod steps;
mod trainer;

pub use adam::{adam_update, AdamState, ADAM_FLOOR};
pub use config::{TrainConfig, CONFIG_KEYS};
pub use mcmc::{mcmc_fixed_point_check, minimize_mcmc_objective, InputGradient, LinearField, McmcOptions, McmcPoint};
pub use metrics::{MetricsLog, MetricsRecord, MetricsWriter, ParsedLog};
pub use steps::{
    d_loss_and_grad, d_step, delta_g, g_loss_and_grad, g_step, gradient_penalty, gradient_penalty_node, lsgan_d_loss,
    lsgan_g_loss, DStepStats, GStepStats,
};
pub use trainer::{TrainOutcome, TrainState, Trainer};
