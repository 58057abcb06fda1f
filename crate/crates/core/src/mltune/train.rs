//! Mini-batch training with Adam, a warm-restart schedule and multiple
//! restarts; the restart with the smallest final validation loss wins.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::exec::Execution;
use crate::{Error, Result};

use super::dataset::{generate_dataset, Dataset, DatasetKind};
use super::loss::{batch_loss, batch_loss_and_gradient, LambdaSource, LossContext};
use super::network::{ModelMetadata, Network, DEFAULT_NEGATIVE_SLOPE};
use super::optim::{Adam, AdamConfig, CawrSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub n_mu: usize,
    pub n_nu: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub restarts: usize,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub adam: AdamConfig,
    pub schedule: CawrSchedule,
    /// Step of the central difference in `lambda`.
    pub fd_step: f64,
    pub lambda_clamp: (f64, f64),
    pub seed: u64,
    /// Spatial resolution `M` of the training solves (`M - 1` basis functions).
    pub resolution: usize,
    /// Highest temporal mode `N` of the training solves (`N + 1` basis functions).
    pub n_max: usize,
}

impl Default for TrainingConfig {
    /// The full-scale setup: 30 x 30 grids, batches of 100, 400 epochs, 10 restarts.
    fn default() -> Self {
        Self {
            n_mu: 30,
            n_nu: 30,
            batch_size: 100,
            epochs: 400,
            restarts: 10,
            hidden_layers: 2,
            hidden_width: 20,
            adam: AdamConfig::default(),
            schedule: CawrSchedule::default(),
            fd_step: 1e-4,
            lambda_clamp: (0.02, 0.999),
            seed: 2024,
            resolution: 20,
            n_max: 10,
        }
    }
}

impl TrainingConfig {
    /// Desk-scale run: 10 x 10 grids, batches of 10, 100 epochs, 3 restarts.
    pub fn desk() -> Self {
        Self { n_mu: 10, n_nu: 10, batch_size: 10, epochs: 100, restarts: 3, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let n_tr = self.n_mu * self.n_nu;
        if n_tr == 0 {
            return Err(Error::domain("training grid counts must be at least 1"));
        }
        if self.batch_size == 0 || n_tr % self.batch_size != 0 {
            return Err(Error::domain(format!(
                "batch size {} must divide the training set size {n_tr}",
                self.batch_size
            )));
        }
        if self.epochs == 0 || self.restarts == 0 {
            return Err(Error::domain("epochs and restarts must be at least 1"));
        }
        if self.hidden_layers == 0 || self.hidden_width == 0 {
            return Err(Error::domain("the network needs at least one hidden layer of positive width"));
        }
        if self.resolution < 3 {
            return Err(Error::domain(format!("training resolution M must be at least 3, got {}", self.resolution)));
        }
        self.schedule.validate()?;
        LossContext::new(self.resolution, self.n_max, self.lambda_clamp)?;
        let (lo, hi) = self.lambda_clamp;
        if !(self.fd_step > 0.0) || lo - self.fd_step < crate::assembly::MIN_LAMBDA || hi + self.fd_step > 1.0 {
            return Err(Error::domain(format!(
                "fd_step {} must be positive and keep the clamp range [{lo}, {hi}] +- fd_step inside [0.01, 1]",
                self.fd_step
            )));
        }
        Ok(())
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![1];
        sizes.extend(std::iter::repeat(self.hidden_width).take(self.hidden_layers));
        sizes.push(1);
        sizes
    }

    pub fn loss_context(&self) -> Result<LossContext> {
        LossContext::new(self.resolution, self.n_max, self.lambda_clamp)
    }

    /// Training (random, seeded) and validation (uniform) datasets with their
    /// reference errors attached.
    pub fn datasets(&self, ctx: &LossContext) -> Result<(Dataset, Dataset)> {
        let mut training = generate_dataset(DatasetKind::Training, self.n_mu, self.n_nu, self.seed)?;
        let mut validation = generate_dataset(DatasetKind::Validation, self.n_mu, self.n_nu, self.seed)?;
        ctx.attach_reference_errors(&mut training)?;
        ctx.attach_reference_errors(&mut validation)?;
        Ok((training, validation))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRow {
    pub restart: usize,
    pub epoch: usize,
    /// Mean of the epoch's mini-batch losses.
    pub train_loss: f64,
    /// Validation loss after the epoch (one full pass).
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub network: Network,
    pub best_restart: usize,
    pub history: Vec<HistoryRow>,
    /// Final validation loss of every restart.
    pub final_val_losses: Vec<f64>,
    pub metadata: ModelMetadata,
}

impl TrainingOutcome {
    pub fn history_csv(&self) -> String {
        let mut out = String::from("restart,epoch,train_loss,val_loss\n");
        for row in &self.history {
            out.push_str(&format!("{},{},{:.16e},{:.16e}\n", row.restart, row.epoch, row.train_loss, row.val_loss));
        }
        out
    }
}

/// Train one network per restart, each from its own generator stream
/// `(seed, restart)`, and return the restart with the smallest final
/// validation loss.
pub fn train(
    config: &TrainingConfig,
    training: &Dataset,
    validation: &Dataset,
    ctx: &LossContext,
) -> Result<TrainingOutcome> {
    config.validate()?;
    if training.len() % config.batch_size != 0 {
        return Err(Error::domain(format!(
            "batch size {} must divide the training set size {}",
            config.batch_size,
            training.len()
        )));
    }
    if validation.is_empty() {
        return Err(Error::domain("validation dataset is empty"));
    }
    let mut history = Vec::new();
    let mut finals = Vec::with_capacity(config.restarts);
    let mut best: Option<(usize, Network, f64, f64)> = None;
    for restart in 0..config.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(restart as u64);
        let mut net = Network::random(&config.layer_sizes(), DEFAULT_NEGATIVE_SLOPE, &mut rng)?;
        let mut adam = Adam::new(config.adam, net.parameter_count());
        let mut order: Vec<usize> = (0..training.len()).collect();
        let (mut train_loss, mut val_loss) = (f64::NAN, f64::NAN);
        for epoch in 1..=config.epochs {
            let lr = config.schedule.lr(epoch);
            order.shuffle(&mut rng);
            let mut losses = Vec::with_capacity(order.len() / config.batch_size);
            for chunk in order.chunks(config.batch_size) {
                let batch: Vec<_> = chunk.iter().map(|&i| training.samples[i]).collect();
                let (loss, grad) = batch_loss_and_gradient(&net, &batch, ctx, config.fd_step)?;
                let mut params = net.parameters();
                adam.step(&mut params, &grad, lr)?;
                net.set_parameters(&params)?;
                losses.push(loss.loss);
            }
            train_loss = losses.iter().sum::<f64>() / losses.len() as f64;
            val_loss = batch_loss(LambdaSource::Network(&net), &validation.samples, ctx)?.loss;
            log::debug!("restart {restart} epoch {epoch}: lr {lr:.3e} train {train_loss:.6e} val {val_loss:.6e}");
            history.push(HistoryRow { restart, epoch, train_loss, val_loss });
        }
        log::info!("restart {restart}: final train loss {train_loss:.6e}, validation loss {val_loss:.6e}");
        finals.push(val_loss);
        let better = match &best {
            Some((_, _, v, _)) => val_loss < *v,
            None => val_loss.is_finite(),
        };
        if better {
            best = Some((restart, net, val_loss, train_loss));
        }
    }
    let Some((best_restart, network, val, train_loss)) = best.filter(|b| b.2 <= 1.0) else {
        return Err(Error::Training(format!(
            "all {} restarts ended with validation loss above 1 (final losses {finals:?})",
            config.restarts
        )));
    };
    let metadata = ModelMetadata {
        seed: config.seed,
        epochs: config.epochs,
        restarts: config.restarts,
        final_train_loss: train_loss,
        final_val_loss: val,
    };
    Ok(TrainingOutcome { network, best_restart, history, final_val_losses: finals, metadata })
}

/// Convenience: build the context and datasets from `config`, then [`train`].
pub fn train_from_config(config: &TrainingConfig, execution: Execution) -> Result<TrainingOutcome> {
    config.validate()?;
    let ctx = config.loss_context()?.with_execution(execution);
    let (training, validation) = config.datasets(&ctx)?;
    train(config, &training, &validation, &ctx)
}
