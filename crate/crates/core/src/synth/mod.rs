//! Synthetic data from the biproportional Poisson model and its
//! misspecified variants, the gravity-model baseline, simple ablation
//! baselines and evaluation metrics.

pub mod baselines;
pub mod generate;
pub mod gravity;
pub mod metrics;

pub use baselines::{baseline_col_share, baseline_rank1, baseline_row_share, baseline_scale};
pub use generate::{
    generate_instance, generate_trial, negbinom_params, GenerativeModel, NegBinomParams, SynthConfig,
    SynthInstance,
};
pub use gravity::{fit_gravity, gravity_infer, Distances, GravityModel};
pub use metrics::{cosine_similarity, l2_param_error};
