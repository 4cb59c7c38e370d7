//! Evaluation harness: score distributions, EER/ROC, G-S curves,
//! privacy leakage, unlinkability, and retrieval metrics.
//!
//! Every metric is a pure function over immutable score sets. Monte-Carlo
//! generation derives one RNG stream per trial index and merges in trial
//! order, so results are identical regardless of worker count.

pub mod gs;
pub mod privacy;
pub mod retrieval;
pub mod unlink;

pub use gs::{gs_curve, GsConfig, GsCurve, GsPoint};
pub use privacy::{
    aligned_leakage_table, log2_binomial, privacy_leakage, zero_leakage_boundary,
    zero_leakage_boundary_code_aligned, Compromise,
};
pub use retrieval::{retrieval_metrics, RetrievalMetrics};
pub use unlink::{linkability_from_scores, unlinkability, LinkabilityReport, UnlinkConfig};

use crate::bits;
use crate::feature::{FeatureError, SubjectPopulation};
use crate::pipeline::{issue_key, select_bits, PipelineError, UserKey};
use rayon::prelude::*;

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("empty input: {0}")]
    Empty(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Code(#[from] crate::rs::RsError),
}

/// Verification scenario: what key the impostor presents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Impostor uses an independently issued (synthesized) key.
    UnknownKey,
    /// Impostor uses the victim's own key.
    StolenKey,
}

/// Normalized Hamming distances, one vector per comparison family.
#[derive(Debug, Clone, Default)]
pub struct ScoreSet {
    pub genuine: Vec<f64>,
    pub impostor: Vec<f64>,
    pub attacker_stolen: Option<Vec<f64>>,
}

impl ScoreSet {
    pub fn new(genuine: Vec<f64>, impostor: Vec<f64>) -> Result<Self, AnalysisError> {
        for d in genuine.iter().chain(impostor.iter()) {
            if !(0.0..=1.0).contains(d) {
                return Err(AnalysisError::InvalidParams(format!(
                    "distance {d} outside [0, 1]"
                )));
            }
        }
        Ok(ScoreSet {
            genuine,
            impostor,
            attacker_stolen: None,
        })
    }
}

/// Stream derivation for per-trial RNGs: one seed, many salted lanes.
pub(crate) fn mix(seed: u64, salt: u64, t: u64) -> u64 {
    let mut z = seed
        ^ salt.rotate_left(32)
        ^ t.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) const SALT_SUBJECT_KEY: u64 = 1;
pub(crate) const SALT_GENUINE_A: u64 = 2;
pub(crate) const SALT_GENUINE_B: u64 = 3;
pub(crate) const SALT_IMPOSTOR_PAIR: u64 = 4;
pub(crate) const SALT_IMPOSTOR_CAPTURE: u64 = 5;
pub(crate) const SALT_ATTACKER_KEY: u64 = 6;

/// Genuine and impostor distance distributions over cancelable templates.
///
/// Genuine: two captures of one subject under the subject's key.
/// Impostor: the victim's enrolled template against another subject's
/// capture, selected with the victim's key (stolen) or with a fresh
/// random key (unknown). The popular attack model in between, a key
/// synthesized from partial knowledge, is not modeled; an unknown key is
/// a uniform draw.
pub fn score_distributions(
    population: &SubjectPopulation,
    g: usize,
    trials: usize,
    scenario: Scenario,
    seed: u64,
) -> Result<ScoreSet, AnalysisError> {
    let n_subjects = population.len();
    if n_subjects < 2 {
        return Err(AnalysisError::InvalidParams(
            "score distributions need at least two subjects".into(),
        ));
    }
    if trials == 0 {
        return Err(AnalysisError::Empty("zero trials requested".into()));
    }
    let j = population.feature_bits();
    if g == 0 || g > j {
        return Err(AnalysisError::InvalidParams(format!(
            "cannot select {g} of {j} bits"
        )));
    }
    let reliability = population.channel.reliability();
    let keys: Vec<UserKey> = (0..n_subjects)
        .map(|s| issue_key(&reliability, g, mix(seed, SALT_SUBJECT_KEY, s as u64)))
        .collect::<Result<_, _>>()?;

    let genuine: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<f64, AnalysisError> {
            let s = t % n_subjects;
            let id = &population.references()[s].subject_id;
            let a = population.sample_genuine(id, 1, mix(seed, SALT_GENUINE_A, t as u64))?;
            let b = population.sample_genuine(id, 1, mix(seed, SALT_GENUINE_B, t as u64))?;
            let ta = select_bits(&a[0], &keys[s])?;
            let tb = select_bits(&b[0], &keys[s])?;
            Ok(bits::normalized_hamming(&ta.bits, &tb.bits))
        })
        .collect::<Result<_, _>>()?;

    let impostor: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<f64, AnalysisError> {
            use rand::prelude::*;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(mix(
                seed,
                SALT_IMPOSTOR_PAIR,
                t as u64,
            ));
            let a = rng.gen_range(0..n_subjects);
            let mut b = rng.gen_range(0..n_subjects - 1);
            if b >= a {
                b += 1;
            }
            let id_b = &population.references()[b].subject_id;
            let capture =
                population.sample_genuine(id_b, 1, mix(seed, SALT_IMPOSTOR_CAPTURE, t as u64))?;
            let attacker_key = match scenario {
                Scenario::StolenKey => keys[a].clone(),
                Scenario::UnknownKey => {
                    issue_key(&reliability, g, mix(seed, SALT_ATTACKER_KEY, t as u64))?
                }
            };
            let victim = select_bits(&population.references()[a], &keys[a])?;
            let probe = select_bits(&capture[0], &attacker_key)?;
            Ok(bits::normalized_hamming(&victim.bits, &probe.bits))
        })
        .collect::<Result<_, _>>()?;

    let mut scores = ScoreSet::new(genuine, impostor)?;
    if scenario == Scenario::StolenKey {
        scores.attacker_stolen = Some(scores.impostor.clone());
    }
    Ok(scores)
}

/// (FAR, FRR) at every candidate threshold, swept from the loosest accept
/// threshold downward; FAR is non-increasing and FRR non-decreasing along
/// the sweep. A probe is accepted when its distance is at most theta.
fn sweep_descending(scores: &ScoreSet) -> Result<Vec<(f64, f64, f64)>, AnalysisError> {
    if scores.genuine.is_empty() || scores.impostor.is_empty() {
        return Err(AnalysisError::Empty(
            "both genuine and impostor scores are required".into(),
        ));
    }
    let mut cand: Vec<f64> = scores
        .genuine
        .iter()
        .chain(scores.impostor.iter())
        .copied()
        .collect();
    cand.sort_by(|a, b| b.partial_cmp(a).expect("scores are finite"));
    cand.dedup();
    if cand.len() == 1 {
        return Err(AnalysisError::Degenerate(
            "all scores identical, error trade-off undefined".into(),
        ));
    }
    let mut genuine = scores.genuine.clone();
    let mut impostor = scores.impostor.clone();
    genuine.sort_by(|a, b| a.partial_cmp(b).unwrap());
    impostor.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let ng = genuine.len() as f64;
    let ni = impostor.len() as f64;
    let mut points = Vec::with_capacity(cand.len() + 1);
    for &theta in &cand {
        let far = impostor.partition_point(|&d| d <= theta) as f64 / ni;
        let frr = 1.0 - genuine.partition_point(|&d| d <= theta) as f64 / ng;
        points.push((theta, far, frr));
    }
    // Sentinel: a threshold below every observed score rejects everything.
    points.push((cand[cand.len() - 1], 0.0, 1.0));
    Ok(points)
}

/// Equal error rate and the threshold attaining it, by linear
/// interpolation between the adjacent sweep thresholds where FAR and FRR
/// cross. Discrete score sets rarely cross exactly; interpolation is
/// fixed policy, not an option.
pub fn eer(scores: &ScoreSet) -> Result<(f64, f64), AnalysisError> {
    let points = sweep_descending(scores)?;
    // First sweep point has FAR = 1, FRR = 0; the sentinel has FAR = 0,
    // FRR = 1, so a crossing always exists.
    for w in points.windows(2) {
        let (t1, far1, frr1) = w[0];
        let (t2, far2, frr2) = w[1];
        if frr1 >= far1 {
            return Ok((far1.max(frr1).min(1.0), t1));
        }
        if frr2 >= far2 {
            let gap1 = far1 - frr1;
            let gap2 = frr2 - far2;
            let u = gap1 / (gap1 + gap2);
            let eer = far1 + (far2 - far1) * u;
            let theta = t1 + (t2 - t1) * u;
            return Ok((eer, theta));
        }
    }
    unreachable!("sweep is bracketed by (1,0) and (0,1)");
}

/// ROC as (FAR, GAR) points with GAR non-decreasing in FAR, from the
/// reject-everything endpoint (0, 0) up to (1, 1).
pub fn roc(scores: &ScoreSet) -> Result<Vec<(f64, f64)>, AnalysisError> {
    let mut points = sweep_descending(scores)?;
    points.reverse(); // ascending threshold: FAR and GAR both non-decreasing
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(points.len());
    for (_, far, frr) in points {
        out.push((far, 1.0 - frr));
    }
    Ok(out)
}

/// GAR at a target FAR by linear interpolation on the ROC. Vertical
/// segments (several GARs at one FAR) resolve to the highest GAR.
pub fn gar_at_far(points: &[(f64, f64)], target: f64) -> f64 {
    let mut below: Option<(f64, f64)> = None;
    let mut above: Option<(f64, f64)> = None;
    for &(far, gar) in points {
        if far <= target {
            below = Some((far, gar)); // points ascend, last one wins
        } else {
            above = Some((far, gar));
            break;
        }
    }
    match (below, above) {
        (Some((f1, g1)), Some((f2, g2))) => {
            if f2 > f1 {
                g1 + (g2 - g1) * (target - f1) / (f2 - f1)
            } else {
                g1
            }
        }
        (Some((_, g1)), None) => g1,
        (None, Some((_, g2))) => g2,
        (None, None) => 0.0,
    }
}

/// Trapezoidal area under the ROC.
pub fn roc_area(points: &[(f64, f64)]) -> f64 {
    let mut area = 0.0;
    for w in points.windows(2) {
        let (f1, g1) = w[0];
        let (f2, g2) = w[1];
        area += (f2 - f1) * (g1 + g2) * 0.5;
    }
    area
}

/// Fixed-width float rendering for exports; keeps reruns byte-identical.
pub fn fmt_metric(v: f64) -> String {
    format!("{v:.6}")
}

/// CSV layout shared by every curve export: a row naming the experiment,
/// a column-header row, then data rows.
pub fn csv_table(experiment: &str, columns: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = format!("experiment,{experiment}\n");
    out.push_str(&columns.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn roc_to_csv(points: &[(f64, f64)]) -> String {
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|&(far, gar)| vec![fmt_metric(far), fmt_metric(gar)])
        .collect();
    csv_table("roc", &["far", "gar"], &rows)
}

pub fn scores_to_csv(scores: &ScoreSet) -> String {
    let mut rows: Vec<Vec<String>> = Vec::new();
    for &d in &scores.genuine {
        rows.push(vec!["genuine".into(), fmt_metric(d)]);
    }
    for &d in &scores.impostor {
        rows.push(vec!["impostor".into(), fmt_metric(d)]);
    }
    if let Some(stolen) = &scores.attacker_stolen {
        for &d in stolen {
            rows.push(vec!["attacker_stolen".into(), fmt_metric(d)]);
        }
    }
    csv_table("score_distributions", &["family", "distance"], &rows)
}
