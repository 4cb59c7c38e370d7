//! Bit/byte packing helpers shared by the pipeline and analysis layers.
//!
//! Bits are always handled MSB-first: the first bit of a group of eight
//! becomes the most significant bit of the packed byte.

/// Pack bits (each 0 or 1) into bytes, MSB-first, zero-padding the tail.
pub fn pack_bits(bits: &[u8]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (i, &b) in bits.iter().enumerate() {
        debug_assert!(b <= 1, "bit value out of range");
        out[i / 8] |= b << (7 - (i % 8));
    }
    out
}

/// Inverse of [`pack_bits`] for a known bit count.
pub fn unpack_bits(bytes: &[u8], bit_len: usize) -> Vec<u8> {
    assert!(bit_len <= bytes.len() * 8, "bit_len exceeds input");
    (0..bit_len)
        .map(|i| (bytes[i / 8] >> (7 - (i % 8))) & 1)
        .collect()
}

/// Hamming distance between equal-length bit slices.
pub fn hamming(a: &[u8], b: &[u8]) -> usize {
    assert_eq!(a.len(), b.len(), "length mismatch");
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Hamming distance normalized by length, in [0, 1].
pub fn normalized_hamming(a: &[u8], b: &[u8]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    hamming(a, b) as f64 / a.len() as f64
}

/// Parse a string of '0'/'1' characters into bits.
pub fn bits_from_str(s: &str) -> Result<Vec<u8>, usize> {
    s.bytes()
        .enumerate()
        .map(|(i, c)| match c {
            b'0' => Ok(0),
            b'1' => Ok(1),
            _ => Err(i),
        })
        .collect()
}

/// Render bits as a '0'/'1' string.
pub fn bits_to_string(bits: &[u8]) -> String {
    bits.iter().map(|&b| if b == 0 { '0' } else { '1' }).collect()
}
