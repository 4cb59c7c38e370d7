//! Retrieval quality of labeled binary codes: mean average precision at
//! a rank cutoff, precision within Hamming radius 2, and precision at
//! top-K. Ranking is by Hamming distance with ties broken by database
//! index, so results are reproducible across runs and platforms.

use super::AnalysisError;
use crate::bits;
use rayon::prelude::*;

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalMetrics {
    pub map_at_r: f64,
    pub r_cutoff: usize,
    /// Precision among neighbors within the Hamming radius; queries with
    /// no neighbor in range score 0 by convention and are counted here.
    pub precision_within_radius: f64,
    pub radius: u32,
    pub radius_empty_queries: usize,
    pub precision_at_k: Vec<(usize, f64)>,
    pub queries: usize,
}

/// Rank the database for every query and aggregate the three metrics.
///
/// Average precision at cutoff R sums precision at each relevant rank
/// and divides by the number of relevant items retrieved within the
/// cutoff, the convention behind the usual MAP@1000 tables. A query
/// that retrieves no relevant item in the window (in particular one
/// whose label never occurs in the database) contributes 0.
pub fn retrieval_metrics(
    db_codes: &[Vec<u8>],
    db_labels: &[usize],
    query_codes: &[Vec<u8>],
    query_labels: &[usize],
    r_cutoff: usize,
    radius: u32,
    k_points: &[usize],
) -> Result<RetrievalMetrics, AnalysisError> {
    if db_codes.is_empty() {
        return Err(AnalysisError::Empty("empty code database".into()));
    }
    if query_codes.is_empty() {
        return Err(AnalysisError::Empty("no queries".into()));
    }
    if db_codes.len() != db_labels.len() || query_codes.len() != query_labels.len() {
        return Err(AnalysisError::InvalidParams(
            "codes and labels differ in length".into(),
        ));
    }
    if r_cutoff == 0 {
        return Err(AnalysisError::InvalidParams("zero rank cutoff".into()));
    }
    if k_points.iter().any(|&k| k == 0) {
        return Err(AnalysisError::InvalidParams("zero K in precision curve".into()));
    }
    let code_len = db_codes[0].len();
    if code_len == 0 {
        return Err(AnalysisError::Empty("zero-length codes".into()));
    }
    for c in db_codes.iter().chain(query_codes.iter()) {
        if c.len() != code_len {
            return Err(AnalysisError::InvalidParams(format!(
                "code length {} differs from {}",
                c.len(),
                code_len
            )));
        }
    }

    struct PerQuery {
        ap: f64,
        radius_precision: f64,
        radius_empty: bool,
        hits_at_k: Vec<usize>,
    }

    let per_query: Vec<PerQuery> = query_codes
        .par_iter()
        .zip(query_labels.par_iter())
        .map(|(q, &q_label)| {
            let mut ranked: Vec<(u32, usize)> = db_codes
                .iter()
                .enumerate()
                .map(|(i, c)| (bits::hamming(q, c) as u32, i))
                .collect();
            ranked.sort_unstable();

            let depth = r_cutoff.min(ranked.len());
            let mut hits = 0usize;
            let mut precision_sum = 0.0;
            for (rank, &(_, idx)) in ranked[..depth].iter().enumerate() {
                if db_labels[idx] == q_label {
                    hits += 1;
                    precision_sum += hits as f64 / (rank + 1) as f64;
                }
            }
            let ap = if hits == 0 {
                0.0
            } else {
                precision_sum / hits as f64
            };

            let in_radius = ranked.iter().take_while(|&&(d, _)| d <= radius).count();
            let (radius_precision, radius_empty) = if in_radius == 0 {
                (0.0, true)
            } else {
                let rel = ranked[..in_radius]
                    .iter()
                    .filter(|&&(_, idx)| db_labels[idx] == q_label)
                    .count();
                (rel as f64 / in_radius as f64, false)
            };

            let hits_at_k: Vec<usize> = k_points
                .iter()
                .map(|&k| {
                    ranked[..k.min(ranked.len())]
                        .iter()
                        .filter(|&&(_, idx)| db_labels[idx] == q_label)
                        .count()
                })
                .collect();

            PerQuery {
                ap,
                radius_precision,
                radius_empty,
                hits_at_k,
            }
        })
        .collect();

    let nq = per_query.len() as f64;
    let map_at_r = per_query.iter().map(|p| p.ap).sum::<f64>() / nq;
    let precision_within_radius =
        per_query.iter().map(|p| p.radius_precision).sum::<f64>() / nq;
    let radius_empty_queries = per_query.iter().filter(|p| p.radius_empty).count();
    let precision_at_k: Vec<(usize, f64)> = k_points
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let denom = k.min(db_codes.len()) as f64;
            let mean = per_query
                .iter()
                .map(|p| p.hits_at_k[i] as f64 / denom)
                .sum::<f64>()
                / nq;
            (k, mean)
        })
        .collect();

    Ok(RetrievalMetrics {
        map_at_r,
        r_cutoff,
        precision_within_radius,
        radius,
        radius_empty_queries,
        precision_at_k,
        queries: per_query.len(),
    })
}
