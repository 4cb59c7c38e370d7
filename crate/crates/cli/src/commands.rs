//! Store-facing subcommands: enroll, auth, revoke.

use crate::CliError;
use biosketch::feature::{
    estimate_channel, read_feature_records, FeatureFormat, FeatureRecord,
};
use biosketch::pipeline::{
    authenticate, enroll_with_retry, revoke_and_reissue, Decision, PipelineError, SketchPolicy,
    TemplateStore, UserKey,
};
use biosketch::{FeatureVector, RsCode, RsCodeParams};
use std::path::Path;

fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

fn map_pipeline(e: PipelineError) -> CliError {
    match e {
        PipelineError::InvalidKey(_) => CliError::Usage(format!("key rejected: {e}")),
        PipelineError::RetryExhausted { .. } | PipelineError::DecodeFailure => {
            CliError::Internal(e.to_string())
        }
        PipelineError::Code(_) => CliError::Internal(e.to_string()),
        _ => CliError::Data(e.to_string()),
    }
}

fn read_records(path: &Path) -> Result<Vec<FeatureRecord>, CliError> {
    read_feature_records(path, FeatureFormat::from_path(path)).map_err(data_err)
}

/// Bitwise majority across a subject's samples; ties toward zero. A
/// single sample is its own consensus.
fn consensus_bits(samples: &[&FeatureRecord]) -> Vec<u8> {
    let j = samples[0].bits.len();
    (0..j)
        .map(|i| {
            let ones = samples.iter().filter(|r| r.bits[i] == 1).count();
            u8::from(2 * ones > samples.len())
        })
        .collect()
}

/// Reference vector for one subject plus a reliability ordering for key
/// issuance. Reliability comes from the empirical channel when the file
/// holds enough samples to estimate one; otherwise every position ranks
/// equally and selection order falls back to index order.
fn subject_feature(
    records: &[FeatureRecord],
    subject: &str,
) -> Result<(FeatureVector, Vec<f64>), CliError> {
    let own: Vec<&FeatureRecord> = records.iter().filter(|r| r.subject_id == subject).collect();
    if own.is_empty() {
        return Err(CliError::Data(format!(
            "no feature records for subject {subject:?}"
        )));
    }
    let bits = consensus_bits(&own);
    let reliability = match estimate_channel(records) {
        Ok(channel) => channel.reliability(),
        Err(_) => vec![1.0; bits.len()],
    };
    if reliability.len() != bits.len() {
        return Err(CliError::Data(format!(
            "feature records disagree on length: {} vs {}",
            reliability.len(),
            bits.len()
        )));
    }
    Ok((FeatureVector::new(subject, bits), reliability))
}

fn load_store(path: &Path) -> Result<TemplateStore, CliError> {
    TemplateStore::load(path).map_err(data_err)
}

fn open_code(store: &TemplateStore) -> Result<RsCode, CliError> {
    RsCode::new(store.params()).map_err(|e| CliError::Internal(e.to_string()))
}

fn emit_key(key: &UserKey, key_out: Option<&Path>) -> Result<(), CliError> {
    let text = key.to_file_string();
    print!("{text}");
    if let Some(path) = key_out {
        std::fs::write(path, &text)
            .map_err(|e| CliError::Data(format!("cannot write key file {}: {e}", path.display())))?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_enroll(
    store_path: &Path,
    features: &Path,
    subject: &str,
    key_out: Option<&Path>,
    n: Option<usize>,
    k: Option<usize>,
    policy: SketchPolicy,
    seed: u64,
) -> Result<(), CliError> {
    let records = read_records(features)?;
    let (feature, reliability) = subject_feature(&records, subject)?;

    let mut store = if store_path.exists() {
        let store = load_store(store_path)?;
        let params = store.params();
        if n.is_some_and(|n| n != params.n) || k.is_some_and(|k| k != params.k) {
            return Err(CliError::Usage(format!(
                "store {} uses code ({}, {}); drop or match the --n/--k flags",
                store_path.display(),
                params.n,
                params.k
            )));
        }
        store
    } else {
        let params = RsCodeParams::new(n.unwrap_or(32), k.unwrap_or(7));
        TemplateStore::new(params)
    };
    let code = open_code(&store)?;
    let g = store.params().template_bits();
    if g > feature.len() {
        return Err(CliError::Data(format!(
            "template needs {g} bits but the feature vector has {}",
            feature.len()
        )));
    }

    let (key, _) = enroll_with_retry(
        &feature,
        &reliability,
        g,
        &code,
        &mut store,
        subject,
        seed,
        policy,
    )
    .map_err(map_pipeline)?;
    store.save(store_path).map_err(data_err)?;
    emit_key(&key, key_out)?;
    eprintln!("enrolled {subject:?}; store size {}", store.len());
    Ok(())
}

pub fn cmd_auth(
    store_path: &Path,
    features: &Path,
    subject: &str,
    key_path: &Path,
    policy: SketchPolicy,
) -> Result<Decision, CliError> {
    let store = load_store(store_path)?;
    let code = open_code(&store)?;
    let key_text = std::fs::read_to_string(key_path)
        .map_err(|e| CliError::Data(format!("cannot read key file {}: {e}", key_path.display())))?;

    let records = read_records(features)?;
    // The claimed identity picks the probe when the file has a matching
    // record; otherwise the first record is the presented capture (the
    // impostor case: someone else's capture under this subject's claim).
    let probe = records
        .iter()
        .find(|r| r.subject_id == subject)
        .or_else(|| records.first())
        .ok_or_else(|| CliError::Data("feature file holds no records".into()))?;
    let feature = FeatureVector::new(subject, probe.bits.clone());

    let key = UserKey::from_file_str(&key_text, feature.len())
        .map_err(|e| CliError::Usage(format!("key parse error: {e}")))?;
    let g = store.params().template_bits();
    if key.g() != g {
        return Err(CliError::Usage(format!(
            "key parse error: {} indices, store expects {g}",
            key.g()
        )));
    }

    let decision = authenticate(&feature, &key, &code, &store, subject, policy)
        .map_err(map_pipeline)?;
    match &decision {
        Decision::Grant => println!("GRANT"),
        Decision::Deny(reason) => println!("DENY ({reason})"),
    }
    Ok(decision)
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_revoke(
    store_path: &Path,
    features: &Path,
    subject: &str,
    key_out: Option<&Path>,
    policy: SketchPolicy,
    seed: u64,
) -> Result<(), CliError> {
    let mut store = load_store(store_path)?;
    let code = open_code(&store)?;
    let records = read_records(features)?;
    let (feature, reliability) = subject_feature(&records, subject)?;
    let g = store.params().template_bits();

    // Salted so that revoking with the seed used at enrollment still
    // rotates to a different key.
    let reissue_seed = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(0x5EED_0001);
    let (key, _) = revoke_and_reissue(
        &mut store,
        subject,
        &feature,
        &reliability,
        g,
        &code,
        reissue_seed,
        policy,
    )
    .map_err(map_pipeline)?;
    store.save(store_path).map_err(data_err)?;
    emit_key(&key, key_out)?;
    eprintln!("reissued key for {subject:?}");
    Ok(())
}
