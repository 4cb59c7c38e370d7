//! The train-toy subcommand: builds the clustered toy dataset, runs the
//! two-step continuation trainer, and exports the per-epoch history CSV
//! plus the learned binary codes as a feature JSONL that eval ingests
//! directly.

use crate::config::{FileConfig, ToySection};
use crate::CliError;
use biosketch::deephash::{
    default_candidates, grid_search, toy_dataset, train_two_step, DeepHashError, LossWeights,
    NetShape, ToyDataset, ToyNetwork, TrainConfig, TrainReport,
};
use biosketch::feature::{export_records_jsonl, FeatureRecord};
use std::path::Path;

fn shape_from(section: &ToySection, cfg: &FileConfig) -> Result<NetShape, CliError> {
    Ok(NetShape {
        d_in_face: section.d_in_face,
        d_in_iris: section.d_in_iris,
        d_face: section.d_face,
        d_iris: section.d_iris,
        d_joint: section.d_joint,
        hash_bits: section.hash_bits,
        classes: section.classes,
        fusion: cfg.fusion()?,
    })
}

fn train_config(section: &ToySection) -> TrainConfig {
    TrainConfig {
        schedule: section.schedule.clone(),
        lr: section.lr,
        momentum: section.momentum,
        max_epochs_per_stage: section.max_epochs_per_stage,
        ..TrainConfig::default()
    }
}

fn map_train_err(e: DeepHashError) -> CliError {
    match e {
        DeepHashError::Diverged { .. } => CliError::Internal(format!("training diverged: {e}")),
        other => CliError::Usage(format!("toy configuration rejected: {other}")),
    }
}

fn run_once(
    shape: NetShape,
    data: &ToyDataset,
    weights: &LossWeights,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(ToyNetwork, TrainReport), DeepHashError> {
    let mut net = ToyNetwork::init(shape, seed)?;
    let report = train_two_step(&mut net, data, weights, cfg)?;
    Ok((net, report))
}

/// Coordinate grid search over the loss weights. Triples are scored by a
/// short training run on criteria the weights do not rescale: the raw
/// classification loss, activation saturation, and code balance.
fn search_weights(
    shape: NetShape,
    data: &ToyDataset,
    lambda: f64,
    base: &TrainConfig,
    seed: u64,
) -> Result<(f64, f64, f64), CliError> {
    let probe_cfg = TrainConfig {
        schedule: vec![1.0, 4.0, 16.0],
        max_epochs_per_stage: base.max_epochs_per_stage.min(60),
        ..base.clone()
    };
    let result = grid_search(
        &default_candidates(),
        |alpha, beta, gamma| {
            let weights = LossWeights {
                alpha,
                beta,
                gamma,
                lambda,
            };
            match run_once(shape, data, &weights, &probe_cfg, seed) {
                Ok((_, report)) => {
                    let last = report.history.last().expect("history nonempty");
                    -(last.e1 + (1.0 - report.final_mean_abs_activation) + report.final_balance)
                }
                Err(_) => f64::NEG_INFINITY,
            }
        },
        4,
    )
    .map_err(|e| CliError::Usage(e.to_string()))?;
    if !result.converged {
        eprintln!("grid search hit its iteration budget before settling");
    }
    println!(
        "grid search selected alpha={} beta={} gamma={}",
        result.alpha, result.beta, result.gamma
    );
    Ok((result.alpha, result.beta, result.gamma))
}

pub fn run_train_toy(
    cfg: &FileConfig,
    seed: u64,
    out_dir: &Path,
    grid: bool,
) -> Result<(), CliError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", out_dir.display())))?;
    let section = &cfg.toy;
    let shape = shape_from(section, cfg)?;
    let data = toy_dataset(
        section.classes,
        section.per_class,
        section.d_in_face,
        section.d_in_iris,
        section.spread,
        seed,
    )
    .map_err(|e| CliError::Usage(format!("toy dataset rejected: {e}")))?;
    let tc = train_config(section);

    let (alpha, beta, gamma) = if grid {
        search_weights(shape, &data, section.lambda, &tc, seed ^ 0x9D1D)?
    } else {
        (section.alpha, section.beta, section.gamma)
    };
    let weights = LossWeights {
        alpha,
        beta,
        gamma,
        lambda: section.lambda,
    };
    println!(
        "training with weights alpha={alpha} beta={beta} gamma={gamma} lambda={} schedule {:?}",
        section.lambda, tc.schedule
    );

    let (net, report) =
        run_once(shape, &data, &weights, &tc, seed.wrapping_add(1)).map_err(map_train_err)?;

    let history = biosketch::deephash::history_to_csv(&report.history);
    std::fs::write(out_dir.join("history.csv"), history)
        .map_err(|e| CliError::Data(format!("cannot write history.csv: {e}")))?;

    let codes = net
        .codes(&data)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let records: Vec<FeatureRecord> = codes
        .iter()
        .zip(data.labels.iter())
        .enumerate()
        .map(|(i, (bits, &label))| FeatureRecord {
            subject_id: format!("class{label:02}"),
            sample_id: Some(format!("s{i:04}")),
            bits: bits.clone(),
        })
        .collect();
    std::fs::write(out_dir.join("codes.jsonl"), export_records_jsonl(&records))
        .map_err(|e| CliError::Data(format!("cannot write codes.jsonl: {e}")))?;

    println!(
        "trained {} epochs; final total {:.6}, mean |activation| {:.6}, balance {:.6}",
        report.history.len(),
        report.final_total,
        report.final_mean_abs_activation,
        report.final_balance
    );
    println!(
        "exported {} codes of {} bits to {}",
        records.len(),
        section.hash_bits,
        out_dir.join("codes.jsonl").display()
    );
    Ok(())
}
