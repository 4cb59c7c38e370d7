//! Synthetic binary feature model and feature-file ingestion.
//!
//! A population is a set of per-subject reference bit vectors plus a
//! per-bit channel model: p_genuine[i] is the probability a genuine
//! probe flips bit i relative to the subject's reference, p_impostor[i]
//! the probability an impostor disagrees at bit i. Synthesized references
//! are i.i.d. Bernoulli(1/2), which makes between-subject disagreement
//! Bernoulli(1/2) regardless of p_impostor; the impostor profile exists to
//! model correlated populations and to drive the reliability ordering
//! (1 - p_genuine[i]) * p_impostor[i] used at key issue time.

use crate::bits;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("feature length {got} does not match population length {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("unknown subject {0:?}")]
    UnknownSubject(String),
    #[error("channel estimation needs at least two subjects with two samples each")]
    InsufficientSamples,
    #[error("invalid channel model: {0}")]
    InvalidChannel(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

/// A labeled binary feature vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureVector {
    pub subject_id: String,
    pub bits: Vec<u8>,
}

impl FeatureVector {
    pub fn new(subject_id: impl Into<String>, bits: Vec<u8>) -> Self {
        FeatureVector {
            subject_id: subject_id.into(),
            bits,
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// Per-bit genuine flip and impostor disagreement probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BitChannelModel {
    pub p_genuine: Vec<f64>,
    pub p_impostor: Vec<f64>,
}

impl BitChannelModel {
    pub fn new(p_genuine: Vec<f64>, p_impostor: Vec<f64>) -> Result<Self, FeatureError> {
        if p_genuine.len() != p_impostor.len() {
            return Err(FeatureError::InvalidChannel(format!(
                "profile lengths differ: {} vs {}",
                p_genuine.len(),
                p_impostor.len()
            )));
        }
        for &p in p_genuine.iter().chain(&p_impostor) {
            if !(0.0..=1.0).contains(&p) || p.is_nan() {
                return Err(FeatureError::InvalidChannel(format!(
                    "probability {p} outside [0, 1]"
                )));
            }
        }
        Ok(BitChannelModel {
            p_genuine,
            p_impostor,
        })
    }

    /// Constant profile across all bits.
    pub fn uniform(j: usize, p_genuine: f64, p_impostor: f64) -> Result<Self, FeatureError> {
        Self::new(vec![p_genuine; j], vec![p_impostor; j])
    }

    /// Linear per-bit ramp with the given mean genuine flip probability:
    /// p_genuine[i] = 2 * mean * i / (J - 1). Heterogeneous reliability is
    /// what gives the ordering step something to order; a constant profile
    /// leaves it inert.
    pub fn ramp(j: usize, mean_p_genuine: f64, p_impostor: f64) -> Result<Self, FeatureError> {
        if j < 2 {
            return Err(FeatureError::InvalidParams("ramp needs J >= 2".into()));
        }
        let pg = (0..j)
            .map(|i| (2.0 * mean_p_genuine * i as f64 / (j - 1) as f64).min(1.0))
            .collect();
        Self::new(pg, vec![p_impostor; j])
    }

    pub fn len(&self) -> usize {
        self.p_genuine.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_genuine.is_empty()
    }

    /// Per-bit reliability score (1 - p_genuine[i]) * p_impostor[i]:
    /// high when the bit is stable for genuine users yet discriminative.
    pub fn reliability(&self) -> Vec<f64> {
        self.p_genuine
            .iter()
            .zip(&self.p_impostor)
            .map(|(&pg, &pi)| (1.0 - pg) * pi)
            .collect()
    }
}

/// Reference vectors for a set of subjects plus their shared channel model.
#[derive(Debug, Clone)]
pub struct SubjectPopulation {
    references: Vec<FeatureVector>,
    pub channel: BitChannelModel,
    pub seed: u64,
}

impl SubjectPopulation {
    pub fn new(
        references: Vec<FeatureVector>,
        channel: BitChannelModel,
        seed: u64,
    ) -> Result<Self, FeatureError> {
        let j = channel.len();
        for r in &references {
            if r.len() != j {
                return Err(FeatureError::LengthMismatch {
                    expected: j,
                    got: r.len(),
                });
            }
        }
        Ok(SubjectPopulation {
            references,
            channel,
            seed,
        })
    }

    pub fn feature_bits(&self) -> usize {
        self.channel.len()
    }

    pub fn len(&self) -> usize {
        self.references.len()
    }

    pub fn is_empty(&self) -> bool {
        self.references.is_empty()
    }

    pub fn references(&self) -> &[FeatureVector] {
        &self.references
    }

    pub fn reference(&self, subject_id: &str) -> Result<&FeatureVector, FeatureError> {
        self.references
            .iter()
            .find(|r| r.subject_id == subject_id)
            .ok_or_else(|| FeatureError::UnknownSubject(subject_id.to_string()))
    }

    /// Genuine probes for one subject: each bit of the reference flips
    /// independently with its p_genuine probability. Deterministic in
    /// (subject, seed).
    pub fn sample_genuine(
        &self,
        subject_id: &str,
        count: usize,
        seed: u64,
    ) -> Result<Vec<FeatureVector>, FeatureError> {
        let reference = self.reference(subject_id)?.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let bits = reference
                .bits
                .iter()
                .zip(&self.channel.p_genuine)
                .map(|(&b, &p)| if rng.gen::<f64>() < p { b ^ 1 } else { b })
                .collect();
            out.push(FeatureVector::new(reference.subject_id.clone(), bits));
        }
        Ok(out)
    }
}

/// Synthesize a population: references i.i.d. uniform over {0,1}^J.
pub fn synth_population(
    num_subjects: usize,
    channel: BitChannelModel,
    seed: u64,
) -> Result<SubjectPopulation, FeatureError> {
    if num_subjects == 0 || channel.is_empty() {
        return Err(FeatureError::InvalidParams(
            "need at least one subject and one bit".into(),
        ));
    }
    let j = channel.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let references = (0..num_subjects)
        .map(|s| {
            let bits = (0..j).map(|_| rng.gen_range(0..=1u8)).collect();
            FeatureVector::new(format!("s{s:04}"), bits)
        })
        .collect();
    SubjectPopulation::new(references, channel, seed)
}

/// One parsed feature file row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureRecord {
    pub subject_id: String,
    pub sample_id: Option<String>,
    pub bits: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureFormat {
    Jsonl,
    Csv,
}

impl FeatureFormat {
    /// Infer from the file extension; `.csv` is CSV, everything else JSONL.
    pub fn from_path(path: &Path) -> FeatureFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => FeatureFormat::Csv,
            _ => FeatureFormat::Jsonl,
        }
    }
}

#[derive(Deserialize)]
struct JsonlRow {
    subject_id: String,
    #[serde(default)]
    sample_id: Option<String>,
    bits: String,
}

/// Parse a feature file. JSONL rows look like
/// `{"subject_id":"a","sample_id":"a-0","bits":"0101..."}` (sample_id
/// optional); CSV rows are `subject_id,sample_id,b0,b1,...` with one 0/1
/// column per bit. Errors carry 1-based line numbers.
pub fn read_feature_records(
    path: &Path,
    format: FeatureFormat,
) -> Result<Vec<FeatureRecord>, FeatureError> {
    let text = std::fs::read_to_string(path).map_err(|source| FeatureError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_feature_records(&text, format)
}

pub fn parse_feature_records(
    text: &str,
    format: FeatureFormat,
) -> Result<Vec<FeatureRecord>, FeatureError> {
    let mut records = Vec::new();
    let mut expected_len: Option<usize> = None;
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record = match format {
            FeatureFormat::Jsonl => {
                let row: JsonlRow =
                    serde_json::from_str(line).map_err(|e| FeatureError::Parse {
                        line: lineno,
                        msg: e.to_string(),
                    })?;
                let bits = bits::bits_from_str(&row.bits).map_err(|col| FeatureError::Parse {
                    line: lineno,
                    msg: format!("non-binary character in bits at offset {col}"),
                })?;
                FeatureRecord {
                    subject_id: row.subject_id,
                    sample_id: row.sample_id,
                    bits,
                }
            }
            FeatureFormat::Csv => {
                let mut fields = line.split(',');
                let subject_id = fields
                    .next()
                    .filter(|s| !s.is_empty())
                    .ok_or_else(|| FeatureError::Parse {
                        line: lineno,
                        msg: "missing subject_id".into(),
                    })?
                    .to_string();
                let sample_id = fields
                    .next()
                    .filter(|s| !s.is_empty())
                    .ok_or_else(|| FeatureError::Parse {
                        line: lineno,
                        msg: "missing sample_id".into(),
                    })?
                    .to_string();
                let bits = fields
                    .map(|f| match f.trim() {
                        "0" => Ok(0u8),
                        "1" => Ok(1u8),
                        other => Err(FeatureError::Parse {
                            line: lineno,
                            msg: format!("non-binary value {other:?} at line {lineno}"),
                        }),
                    })
                    .collect::<Result<Vec<u8>, _>>()?;
                FeatureRecord {
                    subject_id,
                    sample_id: Some(sample_id),
                    bits,
                }
            }
        };
        if record.bits.is_empty() {
            return Err(FeatureError::Parse {
                line: lineno,
                msg: "empty bit vector".into(),
            });
        }
        match expected_len {
            None => expected_len = Some(record.bits.len()),
            Some(expected) if expected != record.bits.len() => {
                return Err(FeatureError::Parse {
                    line: lineno,
                    msg: format!(
                        "bit vector length {} differs from first record's {expected}",
                        record.bits.len()
                    ),
                });
            }
            _ => {}
        }
        records.push(record);
    }
    Ok(records)
}

/// Canonical JSONL rendering; `export -> parse -> export` is byte-stable.
pub fn export_records_jsonl(records: &[FeatureRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push('{');
        let _ = write!(
            out,
            "\"subject_id\":{}",
            serde_json::to_string(&r.subject_id).expect("string serializes")
        );
        if let Some(sample_id) = &r.sample_id {
            let _ = write!(
                out,
                ",\"sample_id\":{}",
                serde_json::to_string(sample_id).expect("string serializes")
            );
        }
        let _ = write!(out, ",\"bits\":\"{}\"", bits::bits_to_string(&r.bits));
        out.push_str("}\n");
    }
    out
}

/// Majority-vote consensus and empirical channel rates from grouped
/// samples. Within-subject disagreement against the consensus gives
/// p_genuine; pairwise consensus disagreement across subjects gives
/// p_impostor. Needs at least two subjects with two samples each.
pub fn estimate_channel(records: &[FeatureRecord]) -> Result<BitChannelModel, FeatureError> {
    let grouped = group_by_subject(records)?;
    if grouped.len() < 2 || grouped.values().filter(|v| v.len() >= 2).count() < 2 {
        return Err(FeatureError::InsufficientSamples);
    }
    let j = records[0].bits.len();
    let consensus: BTreeMap<&str, Vec<u8>> = grouped
        .iter()
        .map(|(id, samples)| (id.as_str(), majority_bits(samples, j)))
        .collect();

    let mut flips = vec![0u64; j];
    let mut total_samples = 0u64;
    for (id, samples) in &grouped {
        let reference = &consensus[id.as_str() as &str];
        for s in samples {
            total_samples += 1;
            for i in 0..j {
                if s.bits[i] != reference[i] {
                    flips[i] += 1;
                }
            }
        }
    }
    let p_genuine: Vec<f64> = flips
        .iter()
        .map(|&f| f as f64 / total_samples as f64)
        .collect();

    let ids: Vec<&str> = consensus.keys().copied().collect();
    let mut disagreements = vec![0u64; j];
    let mut pairs = 0u64;
    for a in 0..ids.len() {
        for b in (a + 1)..ids.len() {
            pairs += 1;
            let (ra, rb) = (&consensus[ids[a]], &consensus[ids[b]]);
            for i in 0..j {
                if ra[i] != rb[i] {
                    disagreements[i] += 1;
                }
            }
        }
    }
    let p_impostor: Vec<f64> = disagreements
        .iter()
        .map(|&d| d as f64 / pairs as f64)
        .collect();
    BitChannelModel::new(p_genuine, p_impostor)
}

/// Build a population from parsed records: per-subject consensus
/// references plus the estimated channel.
pub fn population_from_records(
    records: &[FeatureRecord],
    seed: u64,
) -> Result<SubjectPopulation, FeatureError> {
    let channel = estimate_channel(records)?;
    let grouped = group_by_subject(records)?;
    let j = channel.len();
    let references = grouped
        .iter()
        .map(|(id, samples)| FeatureVector::new(id.clone(), majority_bits(samples, j)))
        .collect();
    SubjectPopulation::new(references, channel, seed)
}

/// Read a feature file and build the population in one step.
pub fn ingest_features(
    path: &Path,
    format: FeatureFormat,
    seed: u64,
) -> Result<SubjectPopulation, FeatureError> {
    let records = read_feature_records(path, format)?;
    population_from_records(&records, seed)
}

fn group_by_subject(
    records: &[FeatureRecord],
) -> Result<BTreeMap<String, Vec<&FeatureRecord>>, FeatureError> {
    if records.is_empty() {
        return Err(FeatureError::InsufficientSamples);
    }
    let mut grouped: BTreeMap<String, Vec<&FeatureRecord>> = BTreeMap::new();
    for r in records {
        grouped.entry(r.subject_id.clone()).or_default().push(r);
    }
    Ok(grouped)
}

/// Per-bit majority over samples; exact ties resolve to 0.
fn majority_bits(samples: &[&FeatureRecord], j: usize) -> Vec<u8> {
    (0..j)
        .map(|i| {
            let ones = samples.iter().filter(|s| s.bits[i] == 1).count();
            (2 * ones > samples.len()) as u8
        })
        .collect()
}
