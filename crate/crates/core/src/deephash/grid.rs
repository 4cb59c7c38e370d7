//! Coordinate grid search for the loss weights: sweep beta with (alpha,
//! gamma) held, then gamma, then alpha, and repeat until a full pass
//! changes nothing. Ties break toward the smaller candidate, so a
//! constant objective settles at the smallest triple.

use super::DeepHashError;
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSearchResult {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub best_score: f64,
    /// False when the sweep was still moving at max_iterations.
    pub converged: bool,
    /// Full coordinate passes performed.
    pub iterations: usize,
}

/// The candidate set {1} followed by the even values 2..=30.
pub fn default_candidates() -> Vec<f64> {
    std::iter::once(1.0)
        .chain((1..=15).map(|i| (2 * i) as f64))
        .collect()
}

/// Maximize the callback over the candidate grid, one coordinate at a
/// time in the order beta, gamma, alpha. The callback is memoized, so a
/// repeated visit to a triple does not re-evaluate it; callbacks are
/// expected to be deterministic.
pub fn grid_search(
    candidates: &[f64],
    mut eval: impl FnMut(f64, f64, f64) -> f64,
    max_iterations: usize,
) -> Result<GridSearchResult, DeepHashError> {
    if candidates.is_empty() {
        return Err(DeepHashError::Config("empty candidate set".into()));
    }
    if max_iterations == 0 {
        return Err(DeepHashError::Config("zero iteration budget".into()));
    }
    let mut sorted = candidates.to_vec();
    if sorted.iter().any(|c| !c.is_finite()) {
        return Err(DeepHashError::Config("non-finite candidate".into()));
    }
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite candidates"));
    sorted.dedup();

    let mut memo: HashMap<(u64, u64, u64), f64> = HashMap::new();
    let mut cached = |a: f64, b: f64, g: f64, eval: &mut dyn FnMut(f64, f64, f64) -> f64| -> f64 {
        *memo
            .entry((a.to_bits(), b.to_bits(), g.to_bits()))
            .or_insert_with(|| eval(a, b, g))
    };

    let start = sorted[0];
    let (mut alpha, mut beta, mut gamma) = (start, start, start);
    let mut best_score = cached(alpha, beta, gamma, &mut eval);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iterations {
        iterations += 1;
        let before = (alpha, beta, gamma);
        // Ascending candidate order plus strict improvement implements
        // the smaller-value tie break.
        for &c in &sorted {
            let score = cached(alpha, c, gamma, &mut eval);
            if score > best_score || (score == best_score && c < beta) {
                best_score = score;
                beta = c;
            }
        }
        for &c in &sorted {
            let score = cached(alpha, beta, c, &mut eval);
            if score > best_score || (score == best_score && c < gamma) {
                best_score = score;
                gamma = c;
            }
        }
        for &c in &sorted {
            let score = cached(c, beta, gamma, &mut eval);
            if score > best_score || (score == best_score && c < alpha) {
                best_score = score;
                alpha = c;
            }
        }
        if (alpha, beta, gamma) == before {
            converged = true;
            break;
        }
    }

    Ok(GridSearchResult {
        alpha,
        beta,
        gamma,
        best_score,
        converged,
        iterations,
    })
}
