//! The eval subcommand: builds the population, runs each requested
//! analysis independently, writes one CSV per curve plus a combined
//! JSON report, and prints a summary table. One analysis failing does
//! not stop the others; failures are summarized at exit.

use crate::config::FileConfig;
use crate::CliError;
use biosketch::analysis::{
    self, aligned_leakage_table, eer, gar_at_far, gs_curve, privacy_leakage, retrieval_metrics,
    roc, roc_area, unlinkability, Compromise, GsConfig, UnlinkConfig,
};
use biosketch::feature::{ingest_features, synth_population, BitChannelModel, FeatureFormat};
use biosketch::{RsCode, RsCodeParams, SubjectPopulation};
use serde_json::{json, Map, Value};
use std::path::Path;

/// Per-analysis seed lanes, derived from the experiment seed so that
/// adding or removing one analysis never shifts another's stream.
fn lane(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.rotate_left(48);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const LANE_SCORES: u64 = 0xD1;
const LANE_GS: u64 = 0xD2;
const LANE_UNLINK: u64 = 0xD3;
const LANE_RETRIEVAL: u64 = 0xD4;
const LANE_POPULATION: u64 = 0xD5;

pub struct EvalOutcome {
    pub failures: Vec<(String, String)>,
}

fn build_population(cfg: &FileConfig, seed: u64) -> Result<SubjectPopulation, CliError> {
    let p = &cfg.population;
    match p.source.as_str() {
        "synthetic" => {
            let channel = match p.channel.as_str() {
                "uniform" => BitChannelModel::uniform(p.j, p.p_genuine, p.p_impostor),
                _ => BitChannelModel::ramp(p.j, p.p_genuine, p.p_impostor),
            }
            .map_err(|e| CliError::Usage(format!("channel parameters rejected: {e}")))?;
            synth_population(p.subjects, channel, lane(seed, LANE_POPULATION))
                .map_err(|e| CliError::Data(e.to_string()))
        }
        _ => {
            let path = p.path.as_deref().expect("validated");
            let path = Path::new(path);
            ingest_features(path, FeatureFormat::from_path(path), lane(seed, LANE_POPULATION))
                .map_err(|e| CliError::Data(format!("ingest failed: {e}")))
        }
    }
}

fn write_out(dir: &Path, name: &str, contents: &str) -> Result<(), String> {
    std::fs::write(dir.join(name), contents)
        .map_err(|e| format!("cannot write {}: {e}", dir.join(name).display()))
}

fn fm(v: f64) -> Value {
    // Reports carry the same fixed precision as the CSV exports so that
    // reruns are byte-identical.
    Value::String(analysis::fmt_metric(v))
}

pub fn run_eval(cfg: &FileConfig, seed: u64, out_dir: &Path) -> Result<EvalOutcome, CliError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", out_dir.display())))?;
    let name = cfg.experiment.name.as_str();
    let policy = cfg.policy()?;
    let scenario = cfg.scenario()?;
    let code_params = RsCodeParams::new(cfg.code.n, cfg.code.k);
    let code =
        RsCode::new(code_params).map_err(|e| CliError::Usage(format!("code rejected: {e}")))?;
    let g = code_params.template_bits();

    let wants = |a: &str| cfg.eval.analyses.iter().any(|x| x == a);
    let needs_population = ["distributions", "eer", "roc", "gs", "unlink", "retrieval"]
        .iter()
        .any(|a| wants(a));
    let population = if needs_population {
        Some(build_population(cfg, seed)?)
    } else {
        None
    };

    let mut metrics = Map::new();
    let mut failures: Vec<(String, String)> = Vec::new();
    let mut summary: Vec<(String, String)> = Vec::new();

    // Score distributions feed eer and roc as well; compute them once.
    let scores = if wants("distributions") || wants("eer") || wants("roc") {
        let pop = population.as_ref().expect("population built");
        match analysis::score_distributions(
            pop,
            g,
            cfg.eval.trials,
            scenario,
            lane(seed, LANE_SCORES),
        ) {
            Ok(s) => Some(s),
            Err(e) => {
                for a in ["distributions", "eer", "roc"] {
                    if wants(a) {
                        failures.push((a.into(), e.to_string()));
                    }
                }
                None
            }
        }
    } else {
        None
    };

    if wants("distributions") {
        if let Some(s) = &scores {
            match write_out(out_dir, "scores.csv", &analysis::scores_to_csv(s)) {
                Ok(()) => {
                    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
                    metrics.insert("genuine_mean_distance".into(), fm(mean(&s.genuine)));
                    metrics.insert("impostor_mean_distance".into(), fm(mean(&s.impostor)));
                    summary.push((
                        "distributions".into(),
                        format!(
                            "genuine mean {} impostor mean {}",
                            analysis::fmt_metric(mean(&s.genuine)),
                            analysis::fmt_metric(mean(&s.impostor))
                        ),
                    ));
                }
                Err(e) => failures.push(("distributions".into(), e)),
            }
        }
    }

    if wants("eer") {
        if let Some(s) = &scores {
            match eer(s) {
                Ok((rate, threshold)) => {
                    metrics.insert("eer".into(), fm(rate));
                    metrics.insert("eer_threshold".into(), fm(threshold));
                    summary.push((
                        "eer".into(),
                        format!(
                            "{} at threshold {}",
                            analysis::fmt_metric(rate),
                            analysis::fmt_metric(threshold)
                        ),
                    ));
                }
                Err(e) => failures.push(("eer".into(), e.to_string())),
            }
        }
    }

    if wants("roc") {
        if let Some(s) = &scores {
            match roc(s) {
                Ok(points) => match write_out(out_dir, "roc.csv", &analysis::roc_to_csv(&points)) {
                    Ok(()) => {
                        let area = roc_area(&points);
                        let gar = gar_at_far(&points, cfg.eval.far_target);
                        metrics.insert("roc_area".into(), fm(area));
                        metrics.insert(
                            format!("gar_at_far_{}", analysis::fmt_metric(cfg.eval.far_target)),
                            fm(gar),
                        );
                        summary.push((
                            "roc".into(),
                            format!("area {}", analysis::fmt_metric(area)),
                        ));
                    }
                    Err(e) => failures.push(("roc".into(), e)),
                },
                Err(e) => failures.push(("roc".into(), e.to_string())),
            }
        }
    }

    if wants("gs") {
        let pop = population.as_ref().expect("population built");
        let gs_cfg = GsConfig {
            code_n: cfg.code.n,
            code_k_list: cfg.code.k_sweep.clone(),
            scenario,
            genuine_probes_per_subject: cfg.eval.gs_probes_per_subject,
            impostor_probes: cfg.eval.gs_impostor_probes,
            policy,
            seed: lane(seed, LANE_GS),
        };
        match gs_curve(pop, &gs_cfg) {
            Ok(curve) => match write_out(out_dir, "gs_curve.csv", &curve.to_csv()) {
                Ok(()) => {
                    let pts: Vec<Value> = curve
                        .points
                        .iter()
                        .map(|p| {
                            json!({
                                "k_bits": p.k_bits,
                                "gar": analysis::fmt_metric(p.gar),
                                "far": analysis::fmt_metric(p.far),
                                "decode_failure_rate": analysis::fmt_metric(p.decode_failure_rate),
                            })
                        })
                        .collect();
                    metrics.insert("gs_curve".into(), Value::Array(pts));
                    let line = curve
                        .points
                        .iter()
                        .map(|p| format!("k={} GAR={}", p.k_bits, analysis::fmt_metric(p.gar)))
                        .collect::<Vec<_>>()
                        .join(" ");
                    summary.push(("gs".into(), line));
                }
                Err(e) => failures.push(("gs".into(), e)),
            },
            Err(e) => failures.push(("gs".into(), e.to_string())),
        }
    }

    if wants("privacy") {
        let j = cfg.privacy.j.unwrap_or(cfg.population.j);
        let n_bits = cfg.privacy.n_bits.unwrap_or(8 * cfg.code.n);
        let k_bits = cfg.privacy.k_bits.unwrap_or(8 * cfg.code.k);
        let result = (|| -> Result<(), String> {
            let key_only = privacy_leakage(j, n_bits, k_bits, Compromise::KeyOnly)
                .map_err(|e| e.to_string())?;
            let sketch_only = privacy_leakage(j, n_bits, k_bits, Compromise::SketchOnly)
                .map_err(|e| e.to_string())?;
            let both = privacy_leakage(j, n_bits, k_bits, Compromise::SketchAndKey)
                .map_err(|e| e.to_string())?;
            let boundary = analysis::zero_leakage_boundary(j);
            let aligned = analysis::zero_leakage_boundary_code_aligned(j);
            let table = aligned_leakage_table(j, cfg.privacy.aligned_step);
            let rows: Vec<Vec<String>> = table
                .iter()
                .map(|&(n, k, leak)| {
                    vec![n.to_string(), k.to_string(), analysis::fmt_metric(leak)]
                })
                .collect();
            write_out(
                out_dir,
                "privacy.csv",
                &analysis::csv_table(name, &["n_bits", "k_bits", "leak_bits"], &rows),
            )?;
            metrics.insert("privacy_key_only_bits".into(), fm(key_only));
            metrics.insert("privacy_sketch_only_bits".into(), fm(sketch_only));
            metrics.insert("privacy_sketch_and_key_bits".into(), fm(both));
            metrics.insert("zero_leakage_boundary_n".into(), json!(boundary));
            metrics.insert("zero_leakage_boundary_n_aligned".into(), json!(aligned));
            summary.push((
                "privacy".into(),
                format!(
                    "sketch+key leak {} bits; zero-leak boundary n = {boundary} (code-aligned {aligned})",
                    analysis::fmt_metric(both)
                ),
            ));
            Ok(())
        })();
        if let Err(e) = result {
            failures.push(("privacy".into(), e));
        }
    }

    if wants("unlink") {
        let pop = population.as_ref().expect("population built");
        let u_cfg = UnlinkConfig {
            g,
            num_databases: cfg.unlink.databases,
            bins: cfg.unlink.bins,
            omega: cfg.unlink.omega,
            policy,
            max_non_mated: cfg.unlink.max_non_mated,
            seed: lane(seed, LANE_UNLINK),
        };
        match unlinkability(pop, &code, &u_cfg) {
            Ok(report) => match write_out(out_dir, "unlinkability.csv", &report.to_csv()) {
                Ok(()) => {
                    metrics.insert("d_sys".into(), fm(report.d_sys));
                    summary.push((
                        "unlink".into(),
                        format!("D_sys {}", analysis::fmt_metric(report.d_sys)),
                    ));
                }
                Err(e) => failures.push(("unlink".into(), e)),
            },
            Err(e) => failures.push(("unlink".into(), e.to_string())),
        }
    }

    if wants("retrieval") {
        let pop = population.as_ref().expect("population built");
        let result = (|| -> Result<(), String> {
            let db_codes: Vec<Vec<u8>> = pop.references().iter().map(|r| r.bits.clone()).collect();
            let db_labels: Vec<usize> = (0..db_codes.len()).collect();
            let mut q_codes = Vec::new();
            let mut q_labels = Vec::new();
            for (idx, reference) in pop.references().iter().enumerate() {
                let samples = pop
                    .sample_genuine(
                        &reference.subject_id,
                        cfg.retrieval.queries_per_subject,
                        lane(seed, LANE_RETRIEVAL).wrapping_add(idx as u64),
                    )
                    .map_err(|e| e.to_string())?;
                for s in samples {
                    q_codes.push(s.bits);
                    q_labels.push(idx);
                }
            }
            let m = retrieval_metrics(
                &db_codes,
                &db_labels,
                &q_codes,
                &q_labels,
                cfg.retrieval.r_cutoff,
                cfg.retrieval.radius,
                &cfg.retrieval.k_points,
            )
            .map_err(|e| e.to_string())?;
            let mut rows = vec![
                vec!["map".into(), analysis::fmt_metric(m.map_at_r)],
                vec![
                    format!("precision_within_radius_{}", m.radius),
                    analysis::fmt_metric(m.precision_within_radius),
                ],
                vec![
                    "radius_empty_queries".into(),
                    m.radius_empty_queries.to_string(),
                ],
            ];
            for (k, p) in &m.precision_at_k {
                rows.push(vec![format!("precision_at_{k}"), analysis::fmt_metric(*p)]);
            }
            write_out(
                out_dir,
                "retrieval.csv",
                &analysis::csv_table(name, &["metric", "value"], &rows),
            )?;
            metrics.insert("map".into(), fm(m.map_at_r));
            metrics.insert(
                "precision_within_radius".into(),
                fm(m.precision_within_radius),
            );
            metrics.insert("radius_empty_queries".into(), json!(m.radius_empty_queries));
            summary.push((
                "retrieval".into(),
                format!("MAP {}", analysis::fmt_metric(m.map_at_r)),
            ));
            Ok(())
        })();
        if let Err(e) = result {
            failures.push(("retrieval".into(), e));
        }
    }

    let params = json!({
        "code_n": cfg.code.n,
        "code_k": cfg.code.k,
        "k_sweep": cfg.code.k_sweep,
        "template_bits": g,
        "j": cfg.population.j,
        "subjects": cfg.population.subjects,
        "channel": cfg.population.channel,
        "scenario": cfg.eval.scenario,
        "policy": cfg.code.policy,
        "trials": cfg.eval.trials,
    });
    let report = json!({
        "experiment": name,
        "params": params,
        "seed": seed,
        "metrics": Value::Object(metrics),
    });
    let pretty = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Internal(format!("report serialization: {e}")))?;
    write_out(out_dir, "report.json", &(pretty + "\n")).map_err(CliError::Data)?;

    println!("{:<14} {}", "analysis", "result");
    for (a, line) in &summary {
        println!("{a:<14} {line}");
    }
    for (a, e) in &failures {
        println!("{a:<14} FAILED: {e}");
    }
    println!("report written to {}", out_dir.join("report.json").display());

    Ok(EvalOutcome { failures })
}
