//! Shortened Reed-Solomon codes over GF(2^8).
//!
//! An [N, K] code here is the mother code [255, K'] with K' = K + (255 - N),
//! shortened by fixing the leading K' - K data symbols to zero and never
//! transmitting them. Codewords are systematic: the K message symbols come
//! first, the N - K parity symbols after. Sequence index j corresponds to
//! the coefficient of x^(N-1-j), so the virtual pad occupies the highest
//! powers and drops out of every polynomial evaluation.
//!
//! The generator polynomial has roots alpha^1 .. alpha^(N-K). Decoding is
//! syndrome computation, Berlekamp-Massey, Chien search, and Forney's
//! formula, with bounded-distance semantics: up to t = floor((N-K)/2)
//! symbol errors are always corrected; beyond that the decoder either
//! reports failure or lands on some other valid codeword (miscorrection),
//! never on the original.

use crate::gf256::Gf256;
use serde::{Deserialize, Serialize};

/// Code geometry. The symbol size is fixed at 8 bits in this crate;
/// it is carried explicitly because persisted stores record it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RsCodeParams {
    pub m: u8,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
}

impl RsCodeParams {
    pub fn new(n: usize, k: usize) -> Self {
        RsCodeParams { m: 8, n, k }
    }

    /// Correctable symbol errors: floor((N - K) / 2).
    pub fn t(&self) -> usize {
        (self.n - self.k) / 2
    }

    /// Security parameter of the sketch built on this code, in bits.
    pub fn sketch_bits(&self) -> usize {
        8 * self.k
    }

    /// Template length the code expects, in bits.
    pub fn template_bits(&self) -> usize {
        8 * self.n
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RsError {
    #[error("invalid code parameters m={m} N={n} K={k}: need m=8 and 1 <= K < N <= 255")]
    InvalidParams { m: u8, n: usize, k: usize },
    #[error("input length {got}, expected {expected} symbols")]
    LengthMismatch { expected: usize, got: usize },
    #[error("no codeword within decoding distance")]
    DecodeFailure,
}

/// One [N, K] codec. All tables are fixed at construction.
#[derive(Debug, Clone)]
pub struct RsCode {
    params: RsCodeParams,
    /// Generator polynomial, ascending powers, monic of degree N - K.
    generator: Vec<Gf256>,
}

const MOTHER_LEN: usize = 255;

impl RsCode {
    pub fn new(params: RsCodeParams) -> Result<Self, RsError> {
        let RsCodeParams { m, n, k } = params;
        if m != 8 || k == 0 || k >= n || n > MOTHER_LEN {
            return Err(RsError::InvalidParams { m, n, k });
        }
        // g(x) = prod_{j=1..N-K} (x - alpha^j), built incrementally.
        let mut g = vec![Gf256::ONE];
        for j in 1..=(n - k) as i32 {
            let root = Gf256::alpha_pow(j);
            let mut next = vec![Gf256::ZERO; g.len() + 1];
            for (i, &c) in g.iter().enumerate() {
                next[i + 1] += c;
                next[i] += c * root;
            }
            g = next;
        }
        Ok(RsCode {
            params,
            generator: g,
        })
    }

    pub fn params(&self) -> RsCodeParams {
        self.params
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn k(&self) -> usize {
        self.params.k
    }

    pub fn t(&self) -> usize {
        self.params.t()
    }

    /// Parity symbol count, equal to the syndrome vector length.
    pub fn parity_len(&self) -> usize {
        self.params.n - self.params.k
    }

    /// Systematic encode: message symbols verbatim, then the remainder of
    /// m(x) * x^(N-K) modulo the generator.
    pub fn encode(&self, message: &[Gf256]) -> Result<Vec<Gf256>, RsError> {
        let (n, k) = (self.params.n, self.params.k);
        if message.len() != k {
            return Err(RsError::LengthMismatch {
                expected: k,
                got: message.len(),
            });
        }
        let r = n - k;
        let mut rem = vec![Gf256::ZERO; r];
        for &sym in message {
            let feedback = sym + rem[0];
            rem.rotate_left(1);
            rem[r - 1] = Gf256::ZERO;
            if !feedback.is_zero() {
                // rem index i holds the coefficient of x^(r-1-i).
                for (i, slot) in rem.iter_mut().enumerate() {
                    *slot += feedback * self.generator[r - 1 - i];
                }
            }
        }
        let mut out = Vec::with_capacity(n);
        out.extend_from_slice(message);
        out.extend_from_slice(&rem);
        Ok(out)
    }

    /// Syndrome vector S_j = r(alpha^(j+1)) for j = 0 .. N-K-1.
    /// All zeros exactly when the input is a codeword.
    pub fn syndromes(&self, word: &[Gf256]) -> Result<Vec<Gf256>, RsError> {
        if word.len() != self.params.n {
            return Err(RsError::LengthMismatch {
                expected: self.params.n,
                got: word.len(),
            });
        }
        let r = self.parity_len();
        let mut s = vec![Gf256::ZERO; r];
        for (j, slot) in s.iter_mut().enumerate() {
            // Horner over sequence order: word[0] is the highest power.
            let x = Gf256::alpha_pow(j as i32 + 1);
            let mut acc = Gf256::ZERO;
            for &sym in word {
                acc = acc * x + sym;
            }
            *slot = acc;
        }
        Ok(s)
    }

    pub fn is_codeword(&self, word: &[Gf256]) -> bool {
        match self.syndromes(word) {
            Ok(s) => s.iter().all(|v| v.is_zero()),
            Err(_) => false,
        }
    }

    /// Bounded-distance decode. Returns the K message symbols of the
    /// codeword found within distance t, or `RsError::DecodeFailure` when
    /// the error locator is inconsistent, a located error falls in the
    /// shortened (virtual zero) region, or the corrected word fails the
    /// final syndrome check.
    pub fn decode(&self, word: &[Gf256]) -> Result<Vec<Gf256>, RsError> {
        let (n, k) = (self.params.n, self.params.k);
        let syn = self.syndromes(word)?;
        if syn.iter().all(|v| v.is_zero()) {
            return Ok(word[..k].to_vec());
        }
        let lambda = berlekamp_massey(&syn);
        let errors = lambda.len() - 1;
        if errors == 0 || errors > self.t() || lambda[errors].is_zero() {
            return Err(RsError::DecodeFailure);
        }

        // Chien search over the whole mother code; roots above the
        // shortened length mean the nearest codeword has nonzero pad data,
        // i.e. it lies outside this code.
        let mut positions = Vec::with_capacity(errors);
        for p in 0..MOTHER_LEN as i32 {
            if poly_eval(&lambda, Gf256::alpha_pow(-p)).is_zero() {
                positions.push(p as usize);
            }
        }
        if positions.len() != errors || positions.iter().any(|&p| p >= n) {
            return Err(RsError::DecodeFailure);
        }

        // Omega(x) = S(x) Lambda(x) mod x^(N-K), then Forney:
        // e = Omega(X^-1) / Lambda'(X^-1) with X = alpha^p.
        let omega = poly_mul_trunc(&syn, &lambda, self.parity_len());
        let mut corrected = word.to_vec();
        for &p in &positions {
            let x_inv = Gf256::alpha_pow(-(p as i32));
            let num = poly_eval(&omega, x_inv);
            let den = poly_eval_odd_derivative(&lambda, x_inv);
            let magnitude = match den.inv() {
                Some(d) => num * d,
                None => return Err(RsError::DecodeFailure),
            };
            if magnitude.is_zero() {
                return Err(RsError::DecodeFailure);
            }
            corrected[n - 1 - p] += magnitude;
        }
        if !self.is_codeword(&corrected) {
            return Err(RsError::DecodeFailure);
        }
        Ok(corrected[..k].to_vec())
    }

    /// Message symbols of the received word, uncorrected. This is the
    /// systematic projection practical decoders emit alongside a failure
    /// flag; the template pipeline uses it as the decode-failure fallback.
    pub fn systematic_projection(&self, word: &[Gf256]) -> Result<Vec<Gf256>, RsError> {
        if word.len() != self.params.n {
            return Err(RsError::LengthMismatch {
                expected: self.params.n,
                got: word.len(),
            });
        }
        Ok(word[..self.params.k].to_vec())
    }
}

/// Minimal LFSR synthesis over the syndrome sequence. Returns the error
/// locator polynomial in ascending powers with Lambda(0) = 1.
fn berlekamp_massey(syn: &[Gf256]) -> Vec<Gf256> {
    let mut lambda = vec![Gf256::ONE];
    let mut prev = vec![Gf256::ONE];
    let mut l = 0usize;
    let mut shift = 1usize;
    let mut prev_delta = Gf256::ONE;
    for i in 0..syn.len() {
        let mut delta = syn[i];
        for j in 1..=l.min(lambda.len() - 1) {
            delta += lambda[j] * syn[i - j];
        }
        if delta.is_zero() {
            shift += 1;
            continue;
        }
        let scale = delta * prev_delta.inv().expect("tracked discrepancy is nonzero");
        let candidate = lambda.clone();
        if lambda.len() < prev.len() + shift {
            lambda.resize(prev.len() + shift, Gf256::ZERO);
        }
        for (j, &c) in prev.iter().enumerate() {
            lambda[j + shift] += scale * c;
        }
        if 2 * l <= i {
            l = i + 1 - l;
            prev = candidate;
            prev_delta = delta;
            shift = 1;
        } else {
            shift += 1;
        }
    }
    lambda.truncate(l + 1);
    lambda
}

fn poly_eval(poly: &[Gf256], x: Gf256) -> Gf256 {
    let mut acc = Gf256::ZERO;
    for &c in poly.iter().rev() {
        acc = acc * x + c;
    }
    acc
}

/// Formal derivative evaluated at x; in characteristic 2 only odd-power
/// terms survive.
fn poly_eval_odd_derivative(poly: &[Gf256], x: Gf256) -> Gf256 {
    let mut acc = Gf256::ZERO;
    let mut pow = Gf256::ONE; // x^(i-1) for i = 1, 3, 5, ...
    let x2 = x * x;
    let mut i = 1;
    while i < poly.len() {
        acc += poly[i] * pow;
        pow *= x2;
        i += 2;
    }
    acc
}

fn poly_mul_trunc(a: &[Gf256], b: &[Gf256], len: usize) -> Vec<Gf256> {
    let mut out = vec![Gf256::ZERO; len];
    for (i, &ai) in a.iter().enumerate() {
        if ai.is_zero() || i >= len {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            if i + j >= len {
                break;
            }
            out[i + j] += ai * bj;
        }
    }
    out
}
