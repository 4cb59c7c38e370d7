//! Linkability of protected templates across databases.
//!
//! Each database enrolls the same subjects under independently issued
//! keys. The linkage score between two records is the normalized Hamming
//! distance between their sketches. Mated scores compare one subject's
//! records across databases; non-mated scores compare different
//! subjects. Local linkability maps the likelihood ratio
//! LR(s) = p(s|mated)/p(s|non-mated) through
//! D(s) = max(0, 2*(w*LR)/(1 + w*LR) - 1) with prior ratio w, and the
//! global score is the mated-probability-weighted mean of D(s). Fully
//! overlapping distributions give 0 (unlinkable); disjoint supports give
//! 1 (fully linkable).
//!
//! Histograms use equal-width bins over the observed score range with
//! add-one smoothing so empty bins never divide by zero.

use super::{csv_table, fmt_metric, mix, AnalysisError};
use crate::bits;
use crate::feature::SubjectPopulation;
use crate::pipeline::{derive_sketch, issue_key, select_bits, SketchPolicy};
use crate::rs::RsCode;
use rayon::prelude::*;

const SALT_UNLINK_KEY: u64 = 32;
const SALT_UNLINK_CAPTURE: u64 = 33;
const SALT_UNLINK_SAMPLE: u64 = 34;

#[derive(Debug, Clone)]
pub struct LinkabilityReport {
    /// Left edges of the score bins, plus the right edge of the last bin.
    pub bin_edges: Vec<f64>,
    /// Smoothed mated probability per bin.
    pub mated_hist: Vec<f64>,
    /// Smoothed non-mated probability per bin.
    pub non_mated_hist: Vec<f64>,
    /// Local linkability per bin.
    pub d_local: Vec<f64>,
    /// Global linkability.
    pub d_sys: f64,
    pub mated_count: usize,
    pub non_mated_count: usize,
    pub omega: f64,
}

impl LinkabilityReport {
    pub fn to_csv(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .d_local
            .iter()
            .enumerate()
            .map(|(i, &d)| {
                let center = (self.bin_edges[i] + self.bin_edges[i + 1]) * 0.5;
                vec![
                    fmt_metric(center),
                    fmt_metric(d),
                    fmt_metric(self.mated_hist[i]),
                    fmt_metric(self.non_mated_hist[i]),
                ]
            })
            .collect();
        csv_table(
            "unlinkability",
            &["score", "d_local", "p_mated", "p_non_mated"],
            &rows,
        )
    }
}

/// Linkability from raw score samples.
pub fn linkability_from_scores(
    mated: &[f64],
    non_mated: &[f64],
    bins: usize,
    omega: f64,
) -> Result<LinkabilityReport, AnalysisError> {
    if mated.is_empty() || non_mated.is_empty() {
        return Err(AnalysisError::Empty(
            "both mated and non-mated scores are required".into(),
        ));
    }
    if bins == 0 {
        return Err(AnalysisError::InvalidParams("zero bins".into()));
    }
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(AnalysisError::InvalidParams(format!(
            "prior ratio must be positive and finite, got {omega}"
        )));
    }
    let all = mated.iter().chain(non_mated.iter());
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &s in all {
        if !s.is_finite() {
            return Err(AnalysisError::InvalidParams("non-finite score".into()));
        }
        lo = lo.min(s);
        hi = hi.max(s);
    }
    // A single-point distribution still gets one well-defined bin.
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let bin_of = |s: f64| -> usize {
        let b = ((s - lo) / width).floor() as usize;
        b.min(bins - 1)
    };
    let mut mated_counts = vec![0usize; bins];
    let mut non_mated_counts = vec![0usize; bins];
    for &s in mated {
        mated_counts[bin_of(s)] += 1;
    }
    for &s in non_mated {
        non_mated_counts[bin_of(s)] += 1;
    }
    let m_total = (mated.len() + bins) as f64;
    let nm_total = (non_mated.len() + bins) as f64;
    let mated_hist: Vec<f64> = mated_counts.iter().map(|&c| (c + 1) as f64 / m_total).collect();
    let non_mated_hist: Vec<f64> = non_mated_counts
        .iter()
        .map(|&c| (c + 1) as f64 / nm_total)
        .collect();
    let mut d_local = Vec::with_capacity(bins);
    let mut d_sys = 0.0;
    for i in 0..bins {
        let lr = mated_hist[i] / non_mated_hist[i];
        let d = (2.0 * (omega * lr) / (1.0 + omega * lr) - 1.0).max(0.0).min(1.0);
        d_local.push(d);
        // Smoothed probabilities sum to 1 over the grid, so this is the
        // probability-mass form of the density-times-width integral.
        d_sys += d * mated_hist[i];
    }
    d_sys = d_sys.clamp(0.0, 1.0);
    let bin_edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
    Ok(LinkabilityReport {
        bin_edges,
        mated_hist,
        non_mated_hist,
        d_local,
        d_sys,
        mated_count: mated.len(),
        non_mated_count: non_mated.len(),
        omega,
    })
}

#[derive(Debug, Clone)]
pub struct UnlinkConfig {
    /// Template size in bits; must equal 8N of the code.
    pub g: usize,
    pub num_databases: usize,
    pub bins: usize,
    pub omega: f64,
    pub policy: SketchPolicy,
    /// Cap on non-mated pairs; the full cross product is quadratic.
    pub max_non_mated: usize,
    pub seed: u64,
}

/// Cross-database linkage experiment over a population.
pub fn unlinkability(
    population: &SubjectPopulation,
    code: &RsCode,
    cfg: &UnlinkConfig,
) -> Result<LinkabilityReport, AnalysisError> {
    if cfg.num_databases < 2 {
        return Err(AnalysisError::InvalidParams(
            "linkage needs at least two databases".into(),
        ));
    }
    let n_subjects = population.len();
    if n_subjects < 2 {
        return Err(AnalysisError::InvalidParams(
            "linkage needs at least two subjects".into(),
        ));
    }
    if cfg.g != code.params().template_bits() {
        return Err(AnalysisError::InvalidParams(format!(
            "template size {} does not match the code's {}",
            cfg.g,
            code.params().template_bits()
        )));
    }
    if cfg.g > population.feature_bits() {
        return Err(AnalysisError::InvalidParams(format!(
            "cannot select {} of {} bits",
            cfg.g,
            population.feature_bits()
        )));
    }
    let reliability = population.channel.reliability();

    // One sketch per (subject, database): fresh key, fresh capture.
    let sketches: Vec<Vec<Vec<u8>>> = (0..n_subjects)
        .into_par_iter()
        .map(|s| -> Result<Vec<Vec<u8>>, AnalysisError> {
            let id = &population.references()[s].subject_id;
            (0..cfg.num_databases)
                .map(|d| {
                    let lane = (s * cfg.num_databases + d) as u64;
                    let key =
                        issue_key(&reliability, cfg.g, mix(cfg.seed, SALT_UNLINK_KEY, lane))?;
                    let capture = population.sample_genuine(
                        id,
                        1,
                        mix(cfg.seed, SALT_UNLINK_CAPTURE, lane),
                    )?;
                    let template = select_bits(&capture[0], &key)?;
                    let (sketch, _) = derive_sketch(&template, code, cfg.policy)?;
                    Ok(sketch.bits)
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;

    let mut mated = Vec::new();
    for subject in &sketches {
        for d1 in 0..cfg.num_databases {
            for d2 in d1 + 1..cfg.num_databases {
                mated.push(bits::normalized_hamming(&subject[d1], &subject[d2]));
            }
        }
    }

    // Non-mated pairs sampled deterministically from the cross product.
    use rand::prelude::*;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(mix(cfg.seed, SALT_UNLINK_SAMPLE, 0));
    let target = cfg.max_non_mated.max(mated.len());
    let mut non_mated = Vec::with_capacity(target);
    while non_mated.len() < target {
        let a = rng.gen_range(0..n_subjects);
        let mut b = rng.gen_range(0..n_subjects - 1);
        if b >= a {
            b += 1;
        }
        let d1 = rng.gen_range(0..cfg.num_databases);
        let d2 = rng.gen_range(0..cfg.num_databases);
        non_mated.push(bits::normalized_hamming(&sketches[a][d1], &sketches[b][d2]));
    }

    linkability_from_scores(&mated, &non_mated, cfg.bins, cfg.omega)
}
