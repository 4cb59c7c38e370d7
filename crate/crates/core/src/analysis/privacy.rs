//! Information leakage of the stored artifacts, in bits.
//!
//! The feature vector is J i.i.d. uniform bits; the adversary may hold
//! the key, the sketch, or both. The key alone names n of the J
//! positions and says nothing about any bit's value. Sketch plus key
//! exposes the k sketch bits verbatim at known positions. The sketch
//! alone is discounted by the adversary's uncertainty over which of the
//! C(J, n) position sets was used: max(0, k - log2 C(J, n)).
//!
//! The binomial term is computed with exact integer arithmetic; the
//! zero-leakage boundary in n moves by several bits if a Stirling-style
//! approximation is used instead.

use super::AnalysisError;
use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Compromise {
    KeyOnly,
    SketchOnly,
    SketchAndKey,
}

/// Exact C(j, n) by the multiplicative recurrence; every intermediate
/// division is exact.
fn binomial(j: usize, n: usize) -> BigUint {
    let n = n.min(j - n);
    let mut c = BigUint::one();
    for i in 0..n {
        c = c * BigUint::from(j - i) / BigUint::from(i + 1);
    }
    c
}

/// log2 of a positive big integer via its top 53 bits; truncation error
/// is below 2^-52 of a bit, far inside the 1e-9 budget.
fn log2_biguint(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 53 {
        return x.to_f64().expect("fits f64").log2();
    }
    let shift = bits - 53;
    let top = (x >> shift).to_f64().expect("53 bits fit");
    top.log2() + shift as f64
}

pub fn log2_binomial(j: usize, n: usize) -> f64 {
    assert!(n <= j, "binomial arguments out of range");
    log2_biguint(&binomial(j, n))
}

pub fn privacy_leakage(
    j: usize,
    n: usize,
    k: usize,
    compromise: Compromise,
) -> Result<f64, AnalysisError> {
    if k < 1 || k > n || n > j {
        return Err(AnalysisError::InvalidParams(format!(
            "need 1 <= k <= n <= J, got k={k}, n={n}, J={j}"
        )));
    }
    Ok(match compromise {
        Compromise::KeyOnly => 0.0,
        Compromise::SketchAndKey => k as f64,
        Compromise::SketchOnly => (k as f64 - log2_binomial(j, n)).max(0.0),
    })
}

/// Largest n such that sketch-only leakage is zero for every k <= n' at
/// every n' <= n, i.e. the last n before some admissible k leaks. The
/// worst case at each n is k = n, so the condition is n <= log2 C(J, n).
pub fn zero_leakage_boundary(j: usize) -> usize {
    let mut c = BigUint::one(); // C(j, 0)
    let mut boundary = 0;
    for n in 1..=j {
        c = c * BigUint::from(j - n + 1) / BigUint::from(n);
        if (n as f64) <= log2_biguint(&c) {
            boundary = n;
        } else {
            break;
        }
    }
    boundary
}

/// Same boundary restricted to code-realizable sizes: n and k multiples
/// of 8 with k <= n - 8 (the code needs at least one parity symbol), so
/// the worst admissible k at each n is n - 8.
pub fn zero_leakage_boundary_code_aligned(j: usize) -> usize {
    let mut boundary = 0;
    let mut n = 8;
    while n <= j {
        if (n as f64) - 8.0 <= log2_binomial(j, n) {
            boundary = n;
        } else {
            break;
        }
        n += 8;
    }
    boundary
}

/// Sketch-only leakage across the code-aligned grid at the worst
/// admissible k = n - 8; one row per n. Feed for the privacy CSV export.
pub fn aligned_leakage_table(j: usize, n_step: usize) -> Vec<(usize, usize, f64)> {
    assert!(n_step >= 8 && n_step % 8 == 0, "step must be a multiple of 8");
    let mut rows = Vec::new();
    let mut n = n_step.max(16);
    while n <= j {
        let k = n - 8;
        let leak = privacy_leakage(j, n, k, Compromise::SketchOnly).expect("aligned params valid");
        rows.push((n, k, leak));
        n += n_step;
    }
    rows
}
