//! GAR-versus-security curves: sweep the code dimension K at fixed N,
//! enroll a population, and measure genuine and impostor accept rates at
//! each security level k = 8K.
//!
//! Captures and keys are shared across the K sweep, so under the
//! fallback sketch policy the grant set at a larger K is a subset of the
//! grant set at a smaller K (the sketch prefix only grows) and GAR is
//! non-increasing in k exactly, not just in expectation.

use super::{mix, AnalysisError, Scenario};
use crate::analysis::{csv_table, fmt_metric};
use crate::feature::SubjectPopulation;
use crate::pipeline::{
    authenticate, enroll, issue_key, Decision, DenyReason, SketchPolicy, TemplateStore, UserKey,
};
use crate::rs::{RsCode, RsCodeParams};
use rayon::prelude::*;

const SALT_GS_KEY: u64 = 16;
const SALT_GS_GENUINE: u64 = 17;
const SALT_GS_PAIR: u64 = 18;
const SALT_GS_CAPTURE: u64 = 19;
const SALT_GS_ATTACKER: u64 = 20;

#[derive(Debug, Clone)]
pub struct GsConfig {
    /// Code length N; the template is 8N bits.
    pub code_n: usize,
    /// Code dimensions to sweep, strictly increasing.
    pub code_k_list: Vec<usize>,
    pub scenario: Scenario,
    pub genuine_probes_per_subject: usize,
    pub impostor_probes: usize,
    pub policy: SketchPolicy,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GsPoint {
    /// Security level in bits, 8K.
    pub k_bits: usize,
    pub gar: f64,
    pub far: f64,
    /// Fraction of probes denied by decode failure (strict policy only;
    /// zero under the fallback policy).
    pub decode_failure_rate: f64,
    pub genuine_trials: usize,
    pub impostor_trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GsCurve {
    pub points: Vec<GsPoint>,
}

impl GsCurve {
    pub fn to_csv(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .points
            .iter()
            .map(|p| {
                vec![
                    p.k_bits.to_string(),
                    fmt_metric(p.gar),
                    fmt_metric(p.far),
                    fmt_metric(p.decode_failure_rate),
                ]
            })
            .collect();
        csv_table("gs_curve", &["k_bits", "gar", "far", "decode_failure_rate"], &rows)
    }
}

struct ProbeOutcome {
    granted: bool,
    decode_failure: bool,
}

fn outcome(decision: Decision) -> ProbeOutcome {
    ProbeOutcome {
        granted: decision.granted(),
        decode_failure: decision == Decision::Deny(DenyReason::DecodeFailure),
    }
}

pub fn gs_curve(population: &SubjectPopulation, cfg: &GsConfig) -> Result<GsCurve, AnalysisError> {
    if cfg.code_k_list.is_empty() {
        return Err(AnalysisError::Empty("no K values to sweep".into()));
    }
    if !cfg.code_k_list.windows(2).all(|w| w[0] < w[1]) {
        return Err(AnalysisError::InvalidParams(
            "K sweep must be strictly increasing".into(),
        ));
    }
    let n_subjects = population.len();
    if n_subjects < 2 {
        return Err(AnalysisError::InvalidParams(
            "curve needs at least two subjects".into(),
        ));
    }
    if cfg.genuine_probes_per_subject == 0 || cfg.impostor_probes == 0 {
        return Err(AnalysisError::Empty("zero probes requested".into()));
    }
    let g = 8 * cfg.code_n;
    let j = population.feature_bits();
    if g > j {
        return Err(AnalysisError::InvalidParams(format!(
            "template of {g} bits exceeds the {j}-bit feature"
        )));
    }
    let reliability = population.channel.reliability();
    let keys: Vec<UserKey> = (0..n_subjects)
        .map(|s| issue_key(&reliability, g, mix(cfg.seed, SALT_GS_KEY, s as u64)))
        .collect::<Result<_, _>>()?;

    // Captures are drawn once and reused at every K so the sweep sees
    // one consistent set of presentations.
    let genuine_total = n_subjects * cfg.genuine_probes_per_subject;
    let genuine_probes: Vec<(usize, crate::feature::FeatureVector)> = (0..genuine_total)
        .into_par_iter()
        .map(|t| -> Result<_, AnalysisError> {
            let s = t / cfg.genuine_probes_per_subject;
            let id = &population.references()[s].subject_id;
            let capture =
                population.sample_genuine(id, 1, mix(cfg.seed, SALT_GS_GENUINE, t as u64))?;
            Ok((s, capture.into_iter().next().unwrap()))
        })
        .collect::<Result<_, _>>()?;

    let impostor_probes: Vec<(usize, UserKey, crate::feature::FeatureVector)> = (0
        ..cfg.impostor_probes)
        .into_par_iter()
        .map(|t| -> Result<_, AnalysisError> {
            use rand::prelude::*;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(mix(
                cfg.seed,
                SALT_GS_PAIR,
                t as u64,
            ));
            let victim = rng.gen_range(0..n_subjects);
            let mut other = rng.gen_range(0..n_subjects - 1);
            if other >= victim {
                other += 1;
            }
            let id = &population.references()[other].subject_id;
            let capture =
                population.sample_genuine(id, 1, mix(cfg.seed, SALT_GS_CAPTURE, t as u64))?;
            let key = match cfg.scenario {
                Scenario::StolenKey => keys[victim].clone(),
                Scenario::UnknownKey => {
                    issue_key(&reliability, g, mix(cfg.seed, SALT_GS_ATTACKER, t as u64))?
                }
            };
            Ok((victim, key, capture.into_iter().next().unwrap()))
        })
        .collect::<Result<_, _>>()?;

    let mut points = Vec::with_capacity(cfg.code_k_list.len());
    for &k in &cfg.code_k_list {
        let code = RsCode::new(RsCodeParams::new(cfg.code_n, k))?;
        let mut store = TemplateStore::new(code.params());
        let mut enrolled = vec![false; n_subjects];
        for (s, reference) in population.references().iter().enumerate() {
            match enroll(reference, &keys[s], &code, &mut store, &reference.subject_id, cfg.policy)
            {
                Ok(_) => enrolled[s] = true,
                // Strict policy can reject a subject outright; their
                // probes then count as denials, which is what the
                // deployed system would do.
                Err(crate::pipeline::PipelineError::DecodeFailure) => enrolled[s] = false,
                Err(e) => return Err(e.into()),
            }
        }

        let genuine_outcomes: Vec<ProbeOutcome> = genuine_probes
            .par_iter()
            .map(|(s, probe)| -> Result<ProbeOutcome, AnalysisError> {
                if !enrolled[*s] {
                    return Ok(ProbeOutcome {
                        granted: false,
                        decode_failure: true,
                    });
                }
                let id = &population.references()[*s].subject_id;
                let decision = authenticate(probe, &keys[*s], &code, &store, id, cfg.policy)?;
                Ok(outcome(decision))
            })
            .collect::<Result<_, _>>()?;

        let impostor_outcomes: Vec<ProbeOutcome> = impostor_probes
            .par_iter()
            .map(|(victim, key, probe)| -> Result<ProbeOutcome, AnalysisError> {
                if !enrolled[*victim] {
                    return Ok(ProbeOutcome {
                        granted: false,
                        decode_failure: true,
                    });
                }
                let id = &population.references()[*victim].subject_id;
                let decision = authenticate(probe, key, &code, &store, id, cfg.policy)?;
                Ok(outcome(decision))
            })
            .collect::<Result<_, _>>()?;

        let gar = genuine_outcomes.iter().filter(|o| o.granted).count() as f64
            / genuine_outcomes.len() as f64;
        let far = impostor_outcomes.iter().filter(|o| o.granted).count() as f64
            / impostor_outcomes.len() as f64;
        let failures = genuine_outcomes
            .iter()
            .chain(impostor_outcomes.iter())
            .filter(|o| o.decode_failure)
            .count() as f64;
        points.push(GsPoint {
            k_bits: 8 * k,
            gar,
            far,
            decode_failure_rate: failures
                / (genuine_outcomes.len() + impostor_outcomes.len()) as f64,
            genuine_trials: genuine_outcomes.len(),
            impostor_trials: impostor_outcomes.len(),
        });
    }
    Ok(GsCurve { points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feature::{synth_population, BitChannelModel};

    fn ramp_population(subjects: usize, j: usize, mean_pg: f64, seed: u64) -> SubjectPopulation {
        let channel = BitChannelModel::ramp(j, mean_pg, 0.5).unwrap();
        synth_population(subjects, channel, seed).unwrap()
    }

    fn config(n: usize, ks: &[usize], seed: u64) -> GsConfig {
        GsConfig {
            code_n: n,
            code_k_list: ks.to_vec(),
            scenario: Scenario::StolenKey,
            genuine_probes_per_subject: 10,
            impostor_probes: 200,
            policy: SketchPolicy::SystematicFallback,
            seed,
        }
    }

    #[test]
    fn noiseless_population_grants_every_genuine_probe() {
        let channel = BitChannelModel::uniform(512, 0.0, 0.5).unwrap();
        let pop = synth_population(6, channel, 3).unwrap();
        let curve = gs_curve(&pop, &config(32, &[3, 7, 13], 1)).unwrap();
        for p in &curve.points {
            assert_eq!(p.gar, 1.0, "k={}", p.k_bits);
            assert_eq!(p.decode_failure_rate, 0.0);
        }
    }

    #[test]
    fn gar_is_non_increasing_in_security() {
        let pop = ramp_population(12, 512, 0.05, 4);
        let curve = gs_curve(&pop, &config(32, &[3, 7, 13], 2)).unwrap();
        assert_eq!(curve.points.len(), 3);
        for w in curve.points.windows(2) {
            assert!(w[0].k_bits < w[1].k_bits);
            assert!(
                w[0].gar >= w[1].gar,
                "gar rose from {} to {}",
                w[0].gar,
                w[1].gar
            );
        }
    }

    #[test]
    fn larger_templates_help_at_fixed_security() {
        // 8K = 104 bits of security from a 768-bit or a 256-bit template.
        // The wider selection captures more of the stable low-error bits,
        // so its message portion survives more often.
        let pop = ramp_population(20, 1024, 0.05, 5);
        let mut cfg = config(96, &[13], 3);
        cfg.genuine_probes_per_subject = 20;
        let wide = gs_curve(&pop, &cfg).unwrap();
        let mut cfg = config(32, &[13], 3);
        cfg.genuine_probes_per_subject = 20;
        let narrow = gs_curve(&pop, &cfg).unwrap();
        assert_eq!(wide.points[0].k_bits, 104);
        assert_eq!(narrow.points[0].k_bits, 104);
        assert!(
            wide.points[0].gar > narrow.points[0].gar,
            "wide {} narrow {}",
            wide.points[0].gar,
            narrow.points[0].gar
        );
    }

    #[test]
    fn impostors_essentially_never_match_the_sketch() {
        let pop = ramp_population(12, 512, 0.05, 6);
        let curve = gs_curve(&pop, &config(32, &[7, 13], 7)).unwrap();
        for p in &curve.points {
            assert!(p.far < 0.01, "far {}", p.far);
        }
    }

    #[test]
    fn curves_are_reproducible_from_seeds() {
        let pop_a = ramp_population(8, 512, 0.05, 8);
        let pop_b = ramp_population(8, 512, 0.05, 8);
        let a = gs_curve(&pop_a, &config(32, &[3, 7], 9)).unwrap();
        let b = gs_curve(&pop_b, &config(32, &[3, 7], 9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn sweep_validation_rejects_bad_requests() {
        let pop = ramp_population(4, 512, 0.05, 10);
        assert!(gs_curve(&pop, &config(32, &[], 0)).is_err());
        assert!(gs_curve(&pop, &config(32, &[7, 7], 0)).is_err());
        assert!(gs_curve(&pop, &config(32, &[13, 7], 0)).is_err());
        // 8 * 96 = 768 > 512 feature bits
        assert!(gs_curve(&pop, &config(96, &[13], 0)).is_err());
        let mut cfg = config(32, &[7], 0);
        cfg.impostor_probes = 0;
        assert!(gs_curve(&pop, &cfg).is_err());
    }

    #[test]
    fn strict_policy_reports_decode_failures_without_aborting() {
        let pop = ramp_population(6, 512, 0.05, 11);
        let mut cfg = config(32, &[7], 12);
        cfg.policy = SketchPolicy::Strict;
        let curve = gs_curve(&pop, &cfg).unwrap();
        // Arbitrary templates essentially never sit near a codeword, so
        // strict enrollment rejects everyone and every probe is a decode
        // failure; the curve still comes back.
        assert_eq!(curve.points[0].gar, 0.0);
        assert!(curve.points[0].decode_failure_rate > 0.99);
    }
}
