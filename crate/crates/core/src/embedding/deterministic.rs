//! Offline, non-semantic stand-in for an embedding model.
//!
//! Pinned bit-exactly: lowercase the text, split on runs of non-alphanumeric
//! characters, hash each token with FNV-1a 64, expand the hash into `dim`
//! components with `splitmix64(seed ^ j)` mapped to [-1, 1), sum the token
//! vectors and normalize. Token order does not matter.

use crate::error::{Error, Result};

use super::EmbeddingVector;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// One step of the splitmix64 generator applied to `x` as the state.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Top 53 bits as a uniform double in [0, 1), then mapped to [-1, 1).
fn unit_interval(bits: u64) -> f64 {
    let u = (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    2.0 * u - 1.0
}

pub(crate) fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

pub fn embed_text_deterministic(text: &str, dim: usize) -> Result<EmbeddingVector> {
    if dim < 2 {
        return Err(Error::invalid(format!("embedding dim must be >= 2, got {dim}")));
    }
    if text.trim().is_empty() {
        return Err(Error::degenerate("cannot embed empty text"));
    }
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(Error::degenerate(format!("text {text:?} has no alphanumeric tokens")));
    }
    let mut acc = vec![0.0f64; dim];
    for token in &tokens {
        let seed = fnv1a64(token.as_bytes());
        for (j, slot) in acc.iter_mut().enumerate() {
            *slot += unit_interval(splitmix64(seed ^ j as u64));
        }
    }
    EmbeddingVector::normalize(acc).map_err(|e| match e {
        Error::DegenerateInput(_) => {
            Error::degenerate(format!("text {text:?} embeds to the zero vector"))
        }
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::norm;

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn splitmix_reference_value() {
        // first output of the reference generator seeded with 0
        assert_eq!(splitmix64(0), 0xe220a8397b1dcdaf);
    }

    #[test]
    fn mapping_stays_in_half_open_range() {
        assert_eq!(unit_interval(0), -1.0);
        assert!(unit_interval(u64::MAX) < 1.0);
    }

    #[test]
    fn deterministic_and_unit_norm() {
        let a = embed_text_deterministic("The quick brown fox", 32).unwrap();
        let b = embed_text_deterministic("The quick brown fox", 32).unwrap();
        assert_eq!(a, b);
        assert!((norm(a.as_slice()) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bag_of_tokens_matches_hand_computation() {
        let dim = 8;
        let by_hand: Vec<f64> = (0..dim as u64)
            .map(|j| {
                let apple = splitmix64(fnv1a64(b"apple") ^ j);
                let banana = splitmix64(fnv1a64(b"banana") ^ j);
                let to_unit = |x: u64| 2.0 * ((x >> 11) as f64 / 9007199254740992.0) - 1.0;
                to_unit(apple) + to_unit(banana)
            })
            .collect();
        let n = by_hand.iter().map(|x| x * x).sum::<f64>().sqrt();
        let expected: Vec<f64> = by_hand.iter().map(|x| x / n).collect();

        let ab = embed_text_deterministic("apple banana", dim).unwrap();
        let ba = embed_text_deterministic("banana apple", dim).unwrap();
        assert_eq!(ab, ba);
        for (x, y) in ab.as_slice().iter().zip(&expected) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn case_and_punctuation_fold() {
        let a = embed_text_deterministic("Apple, BANANA!", 16).unwrap();
        let b = embed_text_deterministic("apple banana", 16).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_text_is_degenerate() {
        assert!(matches!(embed_text_deterministic("   ", 8), Err(Error::DegenerateInput(_))));
        assert!(matches!(embed_text_deterministic("?!", 8), Err(Error::DegenerateInput(_))));
    }
}
