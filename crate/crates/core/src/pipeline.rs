//! The protected template pipeline.
//!
//! Enrollment: a user-held key selects G = 8N feature bits in reliability
//! order, the resulting cancelable template is quantized through the
//! [N, K] code into a K-symbol secure sketch, and only the sketch's
//! SHA-256 digest is persisted. Authentication repeats the derivation with
//! the presented key and grants on digest equality. Nothing stored reveals
//! the feature vector, the template, or the key; compromise is handled by
//! reissuing a key drawn from a fresh seed.
//!
//! Sketch derivation policy: bounded-distance decoding corrects up to t
//! symbol errors when the template sits near a codeword. An arbitrary
//! template almost never does (the covered fraction of the space is
//! astronomically small), so the default policy falls back to the
//! systematic projection (the message symbols of the received word,
//! unchanged), which is what practical decoder implementations emit
//! alongside their failure flag. The strict policy instead surfaces
//! decode failure: enrollment retries with a fresh key, authentication
//! denies.

use crate::bits;
use crate::feature::FeatureVector;
use crate::gf256::Gf256;
use crate::rs::{RsCode, RsCodeParams, RsError};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

/// Retry budget for strict-policy enrollment before giving up.
pub const ENROLL_MAX_ATTEMPTS: u32 = 16;

const STORE_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid key: {0}")]
    InvalidKey(String),
    #[error("feature has {got} bits, key expects at least {expected}")]
    FeatureTooShort { expected: usize, got: usize },
    #[error("template is {got} bits, code expects {expected}")]
    TemplateLength { expected: usize, got: usize },
    #[error("no codeword within decoding distance of the template")]
    DecodeFailure,
    #[error("enrollment failed after {attempts} key attempts, none decodable")]
    RetryExhausted { attempts: u32 },
    #[error("subject {0:?} is already enrolled")]
    DuplicateSubject(String),
    #[error("subject {0:?} is not enrolled")]
    UnknownSubject(String),
    #[error("store uses code (m={}, N={}, K={}) but caller supplied (m={}, N={}, K={})",
            .store.m, .store.n, .store.k, .caller.m, .caller.n, .caller.k)]
    CodeMismatch {
        store: RsCodeParams,
        caller: RsCodeParams,
    },
    #[error("malformed store: {0}")]
    MalformedStore(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Code(#[from] RsError),
}

/// Ordered, distinct feature-bit indices; the user-held secret.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserKey {
    indices: Vec<u32>,
}

impl UserKey {
    pub fn new(indices: Vec<u32>, j: usize) -> Result<Self, PipelineError> {
        if indices.is_empty() {
            return Err(PipelineError::InvalidKey("empty index list".into()));
        }
        let mut seen = vec![false; j];
        for &i in &indices {
            let idx = i as usize;
            if idx >= j {
                return Err(PipelineError::InvalidKey(format!(
                    "index {i} out of range for {j} feature bits"
                )));
            }
            if seen[idx] {
                return Err(PipelineError::InvalidKey(format!("duplicate index {i}")));
            }
            seen[idx] = true;
        }
        Ok(UserKey { indices })
    }

    pub fn g(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    /// Key-file rendering: one lowercase hex index per line, selection
    /// order preserved. Keys travel as their own artifact, never inside
    /// the template store.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for &i in &self.indices {
            out.push_str(&format!("{i:x}\n"));
        }
        out
    }

    pub fn from_file_str(text: &str, j: usize) -> Result<Self, PipelineError> {
        let mut indices = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let idx = u32::from_str_radix(line, 16).map_err(|e| {
                PipelineError::InvalidKey(format!("line {}: {e}", lineno + 1))
            })?;
            indices.push(idx);
        }
        UserKey::new(indices, j)
    }
}

/// Issue a fresh key: G indices drawn uniformly without replacement from
/// 0..J, then ordered by descending reliability (ties toward the lower
/// index). J is the reliability profile's length.
pub fn issue_key(reliability: &[f64], g: usize, seed: u64) -> Result<UserKey, PipelineError> {
    let j = reliability.len();
    if g == 0 || g > j {
        return Err(PipelineError::InvalidKey(format!(
            "cannot select {g} of {j} bits"
        )));
    }
    if reliability.iter().any(|r| !r.is_finite()) {
        return Err(PipelineError::InvalidKey(
            "reliability scores must be finite".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool: Vec<u32> = (0..j as u32).collect();
    // Partial Fisher-Yates: only the first g slots are needed.
    for i in 0..g {
        let pick = rng.gen_range(i..j);
        pool.swap(i, pick);
    }
    let mut chosen = pool[..g].to_vec();
    chosen.sort_by(|&a, &b| {
        reliability[b as usize]
            .partial_cmp(&reliability[a as usize])
            .expect("finite scores compare")
            .then(a.cmp(&b))
    });
    Ok(UserKey { indices: chosen })
}

/// The revocable representation: feature bits gathered in key order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CancelableTemplate {
    pub bits: Vec<u8>,
}

/// Select the key's bits from a feature vector, preserving key order.
pub fn select_bits(
    feature: &FeatureVector,
    key: &UserKey,
) -> Result<CancelableTemplate, PipelineError> {
    let needed = key.indices.iter().map(|&i| i as usize + 1).max().unwrap_or(0);
    if feature.len() < needed {
        return Err(PipelineError::FeatureTooShort {
            expected: needed,
            got: feature.len(),
        });
    }
    Ok(CancelableTemplate {
        bits: key.indices.iter().map(|&i| feature.bits[i as usize]).collect(),
    })
}

/// The decoded message as k = 8K bits; the value whose digest is stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecureSketch {
    pub bits: Vec<u8>,
}

impl SecureSketch {
    fn from_symbols(symbols: &[Gf256]) -> Self {
        let bytes: Vec<u8> = symbols.iter().map(|s| s.0).collect();
        SecureSketch {
            bits: bits::unpack_bits(&bytes, bytes.len() * 8),
        }
    }

    /// Canonical digest: SHA-256 over the 4-byte big-endian bit length
    /// followed by the bits packed MSB-first (zero-padded tail). No salt;
    /// equality of sketches must imply equality of digests across runs.
    pub fn digest(&self) -> [u8; 32] {
        let mut hasher = Sha256::new();
        hasher.update((self.bits.len() as u32).to_be_bytes());
        hasher.update(bits::pack_bits(&self.bits));
        hasher.finalize().into()
    }

    pub fn digest_hex(&self) -> String {
        hex::encode(self.digest())
    }
}

/// How sketch derivation treats a template with no codeword in range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SketchPolicy {
    /// Fail: enrollment retries with a fresh key, authentication denies.
    Strict,
    /// Use the systematic projection (message symbols unchanged).
    #[default]
    SystematicFallback,
}

/// Outcome bookkeeping for sketch derivation; the evaluation layer
/// reports how often the fallback fires.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SketchSource {
    Decoded,
    Fallback,
}

pub fn derive_sketch(
    template: &CancelableTemplate,
    code: &RsCode,
    policy: SketchPolicy,
) -> Result<(SecureSketch, SketchSource), PipelineError> {
    let expected = code.params().template_bits();
    if template.bits.len() != expected {
        return Err(PipelineError::TemplateLength {
            expected,
            got: template.bits.len(),
        });
    }
    let packed = bits::pack_bits(&template.bits);
    let symbols: Vec<Gf256> = packed.into_iter().map(Gf256).collect();
    debug_assert_eq!(symbols.len(), code.n());
    match code.decode(&symbols) {
        Ok(msg) => Ok((SecureSketch::from_symbols(&msg), SketchSource::Decoded)),
        Err(RsError::DecodeFailure) => match policy {
            SketchPolicy::Strict => Err(PipelineError::DecodeFailure),
            SketchPolicy::SystematicFallback => {
                let msg = code.systematic_projection(&symbols)?;
                Ok((SecureSketch::from_symbols(&msg), SketchSource::Fallback))
            }
        },
        Err(e) => Err(e.into()),
    }
}

/// What the store keeps per subject: digest and metadata, nothing else.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecureTemplate {
    pub subject_id: String,
    pub digest: [u8; 32],
    pub created_at: u64,
}

impl SecureTemplate {
    pub fn digest_hex(&self) -> String {
        hex::encode(self.digest)
    }
}

/// Authentication outcome. Deny reasons are deliberately coarse; nothing
/// about the stored digest or sketch leaves the API.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Grant,
    Deny(DenyReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DenyReason {
    UnknownSubject,
    DecodeFailure,
    DigestMismatch,
}

impl Decision {
    pub fn granted(&self) -> bool {
        matches!(self, Decision::Grant)
    }
}

impl std::fmt::Display for DenyReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DenyReason::UnknownSubject => "unknown subject",
            DenyReason::DecodeFailure => "decode failure",
            DenyReason::DigestMismatch => "digest mismatch",
        })
    }
}

/// Digest store for one code parameterization. Persists as JSON with
/// records sorted by subject id; writes go through a temp file and an
/// atomic rename.
#[derive(Debug, Clone)]
pub struct TemplateStore {
    params: RsCodeParams,
    records: BTreeMap<String, SecureTemplate>,
}

#[derive(Serialize, Deserialize)]
struct StoreFile {
    version: u32,
    code_params: RsCodeParams,
    records: Vec<StoreRecord>,
}

#[derive(Serialize, Deserialize)]
struct StoreRecord {
    subject_id: String,
    digest_hex: String,
    created_at: u64,
}

impl TemplateStore {
    pub fn new(params: RsCodeParams) -> Self {
        TemplateStore {
            params,
            records: BTreeMap::new(),
        }
    }

    pub fn params(&self) -> RsCodeParams {
        self.params
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn contains(&self, subject_id: &str) -> bool {
        self.records.contains_key(subject_id)
    }

    pub fn get(&self, subject_id: &str) -> Option<&SecureTemplate> {
        self.records.get(subject_id)
    }

    pub fn subject_ids(&self) -> impl Iterator<Item = &str> {
        self.records.keys().map(|s| s.as_str())
    }

    pub fn insert(&mut self, template: SecureTemplate) -> Result<(), PipelineError> {
        if self.records.contains_key(&template.subject_id) {
            return Err(PipelineError::DuplicateSubject(template.subject_id));
        }
        self.records.insert(template.subject_id.clone(), template);
        Ok(())
    }

    pub fn remove(&mut self, subject_id: &str) -> Result<SecureTemplate, PipelineError> {
        self.records
            .remove(subject_id)
            .ok_or_else(|| PipelineError::UnknownSubject(subject_id.to_string()))
    }

    pub fn to_json(&self) -> String {
        let file = StoreFile {
            version: STORE_VERSION,
            code_params: self.params,
            records: self
                .records
                .values()
                .map(|t| StoreRecord {
                    subject_id: t.subject_id.clone(),
                    digest_hex: hex::encode(t.digest),
                    created_at: t.created_at,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("store serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let file: StoreFile = serde_json::from_str(text)
            .map_err(|e| PipelineError::MalformedStore(e.to_string()))?;
        if file.version != STORE_VERSION {
            return Err(PipelineError::MalformedStore(format!(
                "unsupported version {}",
                file.version
            )));
        }
        RsCode::new(file.code_params)?;
        let mut records = BTreeMap::new();
        for r in file.records {
            let raw = hex::decode(&r.digest_hex)
                .map_err(|e| PipelineError::MalformedStore(format!("digest: {e}")))?;
            let digest: [u8; 32] = raw.as_slice().try_into().map_err(|_| {
                PipelineError::MalformedStore(format!(
                    "digest for {:?} is {} bytes, expected 32",
                    r.subject_id,
                    raw.len()
                ))
            })?;
            if records
                .insert(
                    r.subject_id.clone(),
                    SecureTemplate {
                        subject_id: r.subject_id.clone(),
                        digest,
                        created_at: r.created_at,
                    },
                )
                .is_some()
            {
                return Err(PipelineError::MalformedStore(format!(
                    "duplicate subject {:?}",
                    r.subject_id
                )));
            }
        }
        Ok(TemplateStore {
            params: file.code_params,
            records,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        let io_err = |source| PipelineError::Io {
            path: path.display().to_string(),
            source,
        };
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_json()).map_err(io_err)?;
        std::fs::rename(&tmp, path).map_err(io_err)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }
}

fn check_params(store: &TemplateStore, code: &RsCode) -> Result<(), PipelineError> {
    if store.params() != code.params() {
        return Err(PipelineError::CodeMismatch {
            store: store.params(),
            caller: code.params(),
        });
    }
    Ok(())
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Enroll with a caller-supplied key. The key is never persisted; it goes
/// back to the caller. Fails on a duplicate subject rather than
/// overwriting.
pub fn enroll(
    feature: &FeatureVector,
    key: &UserKey,
    code: &RsCode,
    store: &mut TemplateStore,
    subject_id: &str,
    policy: SketchPolicy,
) -> Result<SecureTemplate, PipelineError> {
    check_params(store, code)?;
    if store.contains(subject_id) {
        return Err(PipelineError::DuplicateSubject(subject_id.to_string()));
    }
    let template = select_bits(feature, key)?;
    let (sketch, _) = derive_sketch(&template, code, policy)?;
    let record = SecureTemplate {
        subject_id: subject_id.to_string(),
        digest: sketch.digest(),
        created_at: now_unix(),
    };
    store.insert(record.clone())?;
    Ok(record)
}

fn attempt_seed(seed: u64, attempt: u32) -> u64 {
    // Distinct, deterministic per-attempt streams.
    seed.wrapping_add((attempt as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Issue a key and enroll, retrying with a fresh key on decode failure
/// (reachable under the strict policy only) up to [`ENROLL_MAX_ATTEMPTS`].
#[allow(clippy::too_many_arguments)]
pub fn enroll_with_retry(
    feature: &FeatureVector,
    reliability: &[f64],
    g: usize,
    code: &RsCode,
    store: &mut TemplateStore,
    subject_id: &str,
    seed: u64,
    policy: SketchPolicy,
) -> Result<(UserKey, SecureTemplate), PipelineError> {
    for attempt in 0..ENROLL_MAX_ATTEMPTS {
        let key = issue_key(reliability, g, attempt_seed(seed, attempt))?;
        match enroll(feature, &key, code, store, subject_id, policy) {
            Ok(record) => return Ok((key, record)),
            Err(PipelineError::DecodeFailure) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(PipelineError::RetryExhausted {
        attempts: ENROLL_MAX_ATTEMPTS,
    })
}

/// Grant exactly when the probe's sketch digest equals the stored digest.
pub fn authenticate(
    feature: &FeatureVector,
    key: &UserKey,
    code: &RsCode,
    store: &TemplateStore,
    subject_id: &str,
    policy: SketchPolicy,
) -> Result<Decision, PipelineError> {
    check_params(store, code)?;
    let Some(stored) = store.get(subject_id) else {
        return Ok(Decision::Deny(DenyReason::UnknownSubject));
    };
    let template = select_bits(feature, key)?;
    let sketch = match derive_sketch(&template, code, policy) {
        Ok((sketch, _)) => sketch,
        Err(PipelineError::DecodeFailure) => {
            return Ok(Decision::Deny(DenyReason::DecodeFailure))
        }
        Err(e) => return Err(e),
    };
    if sketch.digest() == stored.digest {
        Ok(Decision::Grant)
    } else {
        Ok(Decision::Deny(DenyReason::DigestMismatch))
    }
}

/// Drop the old record and enroll again under a key from a fresh seed.
/// The old and new keys are independent draws; nothing ties them.
#[allow(clippy::too_many_arguments)]
pub fn revoke_and_reissue(
    store: &mut TemplateStore,
    subject_id: &str,
    feature: &FeatureVector,
    reliability: &[f64],
    g: usize,
    code: &RsCode,
    new_seed: u64,
    policy: SketchPolicy,
) -> Result<(UserKey, SecureTemplate), PipelineError> {
    check_params(store, code)?;
    store.remove(subject_id)?;
    enroll_with_retry(
        feature,
        reliability,
        g,
        code,
        store,
        subject_id,
        new_seed,
        policy,
    )
}
