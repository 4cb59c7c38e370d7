//! Two-step training with a tanh continuation schedule.
//!
//! Step 1 trains the joint, hashing, and classifier weights with the
//! modality encoders frozen; step 2 fine-tunes everything at a reduced
//! learning rate. Within each step the hashing bandwidth walks the
//! schedule, re-training to tolerance before each increase, which pushes
//! activations toward +-1 without the dead gradients a large fixed
//! bandwidth would cause. Full-batch SGD with momentum; the learning
//! rate decays per stage.

use super::{total_loss, DeepHashError, Gradients, LossWeights, ToyDataset, ToyNetwork};
use crate::analysis::{csv_table, fmt_metric};
use ndarray::Array2;

#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Bandwidth schedule, strictly increasing from 1.
    pub schedule: Vec<f64>,
    pub lr: f64,
    pub momentum: f64,
    /// Learning-rate multiplier applied after each schedule stage.
    pub stage_lr_decay: f64,
    /// Learning-rate multiplier for the fine-tuning step.
    pub step2_lr_scale: f64,
    pub max_epochs_per_stage: usize,
    /// A stage stops once the loss improves by less than this...
    pub tol: f64,
    /// ...for this many consecutive epochs.
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            schedule: vec![1.0, 2.0, 4.0, 8.0, 16.0],
            lr: 0.05,
            momentum: 0.9,
            stage_lr_decay: 0.9,
            step2_lr_scale: 0.1,
            max_epochs_per_stage: 400,
            tol: 1e-4,
            patience: 5,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), DeepHashError> {
        if self.schedule.is_empty() {
            return Err(DeepHashError::Config("empty bandwidth schedule".into()));
        }
        if self.schedule[0] != 1.0 {
            return Err(DeepHashError::Config(format!(
                "schedule must start at bandwidth 1, got {}",
                self.schedule[0]
            )));
        }
        if !self.schedule.windows(2).all(|w| w[0] < w[1]) {
            return Err(DeepHashError::Config(
                "schedule must be strictly increasing".into(),
            ));
        }
        if !(self.lr > 0.0) || !(self.momentum >= 0.0) || self.momentum >= 1.0 {
            return Err(DeepHashError::Config(format!(
                "bad optimizer settings: lr {}, momentum {}",
                self.lr, self.momentum
            )));
        }
        if self.max_epochs_per_stage == 0 || self.patience == 0 {
            return Err(DeepHashError::Config("zero epochs or patience".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub step: u8,
    pub stage: usize,
    pub epoch: usize,
    pub beta_bw: f64,
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
    pub total: f64,
    pub mean_abs_activation: f64,
    pub balance: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub history: Vec<EpochRecord>,
    pub final_mean_abs_activation: f64,
    pub final_balance: f64,
    pub final_total: f64,
}

pub fn history_to_csv(history: &[EpochRecord]) -> String {
    let rows: Vec<Vec<String>> = history
        .iter()
        .map(|r| {
            vec![
                r.step.to_string(),
                r.stage.to_string(),
                r.epoch.to_string(),
                fmt_metric(r.beta_bw),
                fmt_metric(r.e1),
                fmt_metric(r.e2),
                fmt_metric(r.e3),
                fmt_metric(r.total),
                fmt_metric(r.mean_abs_activation),
                fmt_metric(r.balance),
            ]
        })
        .collect();
    csv_table(
        "train_history",
        &[
            "step",
            "stage",
            "epoch",
            "beta_bw",
            "e1",
            "e2",
            "e3",
            "total",
            "mean_abs_activation",
            "balance",
        ],
        &rows,
    )
}

struct Velocity {
    w_face: Array2<f64>,
    w_iris: Array2<f64>,
    w_joint: Array2<f64>,
    w_hash: Array2<f64>,
    w_class: Array2<f64>,
}

impl Velocity {
    fn zeros(net: &ToyNetwork) -> Self {
        Velocity {
            w_face: Array2::zeros(net.w_face.raw_dim()),
            w_iris: Array2::zeros(net.w_iris.raw_dim()),
            w_joint: Array2::zeros(net.w_joint.raw_dim()),
            w_hash: Array2::zeros(net.w_hash.raw_dim()),
            w_class: Array2::zeros(net.w_class.raw_dim()),
        }
    }
}

fn sgd_update(
    net: &mut ToyNetwork,
    grads: &Gradients,
    vel: &mut Velocity,
    lr: f64,
    momentum: f64,
    freeze_encoders: bool,
) {
    let pairs: [(&mut Array2<f64>, &Array2<f64>, &mut Array2<f64>, bool); 5] = [
        (&mut net.w_face, &grads.w_face, &mut vel.w_face, freeze_encoders),
        (&mut net.w_iris, &grads.w_iris, &mut vel.w_iris, freeze_encoders),
        (&mut net.w_joint, &grads.w_joint, &mut vel.w_joint, false),
        (&mut net.w_hash, &grads.w_hash, &mut vel.w_hash, false),
        (&mut net.w_class, &grads.w_class, &mut vel.w_class, false),
    ];
    for (w, g, v, frozen) in pairs {
        if frozen {
            continue;
        }
        v.zip_mut_with(g, |v, &g| *v = momentum * *v - lr * g);
        w.zip_mut_with(v, |w, &v| *w += v);
    }
}

fn activation_stats(net: &ToyNetwork, data: &ToyDataset) -> Result<(f64, f64), DeepHashError> {
    let acts = net.hash_activations(data)?;
    let mean_abs = acts.iter().map(|a| a.abs()).sum::<f64>() / acts.len() as f64;
    let balance = acts
        .rows()
        .into_iter()
        .map(|row| (row.sum() / row.len() as f64).abs())
        .sum::<f64>()
        / acts.nrows() as f64;
    Ok((mean_abs, balance))
}

#[allow(clippy::too_many_arguments)]
fn run_step(
    net: &mut ToyNetwork,
    data: &ToyDataset,
    weights: &LossWeights,
    cfg: &TrainConfig,
    step: u8,
    freeze_encoders: bool,
    base_lr: f64,
    history: &mut Vec<EpochRecord>,
) -> Result<(), DeepHashError> {
    let mut lr = base_lr;
    for (stage, &beta_bw) in cfg.schedule.iter().enumerate() {
        net.beta_bw = beta_bw;
        let mut vel = Velocity::zeros(net);
        let mut best = f64::INFINITY;
        let mut stalled = 0;
        for epoch in 0..cfg.max_epochs_per_stage {
            let (loss, grads) = total_loss(net, data, weights)?;
            if !loss.total.is_finite() {
                return Err(DeepHashError::Diverged {
                    step,
                    beta_bw,
                    epoch,
                });
            }
            let (mean_abs, balance) = activation_stats(net, data)?;
            history.push(EpochRecord {
                step,
                stage,
                epoch,
                beta_bw,
                e1: loss.e1,
                e2: loss.e2,
                e3: loss.e3,
                total: loss.total,
                mean_abs_activation: mean_abs,
                balance,
            });
            sgd_update(net, &grads, &mut vel, lr, cfg.momentum, freeze_encoders);
            if best - loss.total < cfg.tol {
                stalled += 1;
                if stalled >= cfg.patience {
                    break;
                }
            } else {
                stalled = 0;
            }
            best = best.min(loss.total);
        }
        lr *= cfg.stage_lr_decay;
    }
    Ok(())
}

/// Train in two steps, walking the continuation schedule inside each.
pub fn train_two_step(
    net: &mut ToyNetwork,
    data: &ToyDataset,
    weights: &LossWeights,
    cfg: &TrainConfig,
) -> Result<TrainReport, DeepHashError> {
    cfg.validate()?;
    weights.validate()?;
    if data.is_empty() {
        return Err(DeepHashError::Shape("empty dataset".into()));
    }
    let mut history = Vec::new();
    run_step(net, data, weights, cfg, 1, true, cfg.lr, &mut history)?;
    run_step(
        net,
        data,
        weights,
        cfg,
        2,
        false,
        cfg.lr * cfg.step2_lr_scale,
        &mut history,
    )?;
    let (mean_abs, balance) = activation_stats(net, data)?;
    let final_total = history.last().map(|r| r.total).unwrap_or(f64::NAN);
    Ok(TrainReport {
        history,
        final_mean_abs_activation: mean_abs,
        final_balance: balance,
        final_total,
    })
}
