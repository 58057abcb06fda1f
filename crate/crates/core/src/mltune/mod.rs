//! Learning the Müntz exponent `lambda` from the fractional order `mu`.
//!
//! A small feedforward network maps `mu` to `lambda`. It is trained by
//! running the 1D solver inside the loss: for each manufactured problem
//! `u = t^nu sin(pi x)` the loss is the solution error at the predicted
//! `lambda` divided by the error of the classical `lambda = 1` solve, and the
//! gradient in `lambda` is a central difference chained into backprop.
//! [`spline`] holds the cubic-spline baseline tuner.

pub mod dataset;
pub mod loss;
pub mod network;
pub mod optim;
pub mod spline;
pub mod train;

pub use dataset::{generate_dataset, uniform_grid, Dataset, DatasetKind, Sample};
pub use loss::{batch_loss, batch_loss_and_gradient, BatchLoss, LambdaSource, LossContext};
pub use network::{ForwardTrace, ModelFile, ModelMetadata, Network};
pub use optim::{cawr_lr, Adam, AdamConfig, CawrSchedule};
pub use spline::{optimize_lambda, spline_fit, spline_predict, Knot, KnotFit, SplineConfig, SplineModel};
pub use train::{train, train_from_config, HistoryRow, TrainingConfig, TrainingOutcome};
