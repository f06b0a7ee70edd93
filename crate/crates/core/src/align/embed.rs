//! Deterministic hashed bag-of-ngrams embedder.
//!
//! Lowercased alphanumeric unigrams and adjacent bigrams are counted, weighted
//! by `ln(1 + count)`, hashed with a seeded FNV-1a/splitmix hash into `dim`
//! signed buckets and L2-normalized.

use std::collections::BTreeMap;

use super::{AlignError, EmbeddingMatrix};

pub const MIN_DIM: usize = 8;

/// Lowercased alphanumeric tokens.
pub fn embed_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Unigram and bigram features with raw counts, keyed `u:tok` / `b:tok tok`.
pub fn features(text: &str) -> BTreeMap<String, u32> {
    let toks = embed_tokens(text);
    let mut out = BTreeMap::new();
    for t in &toks {
        *out.entry(format!("u:{t}")).or_insert(0) += 1;
    }
    for w in toks.windows(2) {
        *out.entry(format!("b:{} {}", w[0], w[1])).or_insert(0) += 1;
    }
    out
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seeded 64-bit hash of a feature string.
pub fn feature_hash(feature: &str, seed: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in seed.to_le_bytes().iter().chain(feature.as_bytes()) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(h)
}

/// Unnormalized hashed vector; all zeros when `text` has no tokens.
pub fn hashed_vector(text: &str, dim: usize, seed: u64) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    for (feat, count) in features(text) {
        let h = feature_hash(&feat, seed);
        let bucket = (h % dim as u64) as usize;
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        v[bucket] += sign * f64::from(count).ln_1p();
    }
    v
}

/// Embeds `texts` into a unit-norm matrix whose ids are `ids`.
pub fn embed_builtin_with_ids(
    ids: Vec<String>,
    texts: &[String],
    dim: usize,
    seed: u64,
) -> Result<EmbeddingMatrix, AlignError> {
    if dim < MIN_DIM {
        return Err(AlignError::DimTooSmall(dim));
    }
    let mut rows = Vec::with_capacity(texts.len() * dim);
    for (i, t) in texts.iter().enumerate() {
        let v = hashed_vector(t, dim, seed);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(AlignError::ZeroVector { index: i });
        }
        rows.extend(v.iter().map(|x| (x / norm) as f32));
    }
    EmbeddingMatrix::new(ids, dim, rows)
}

/// Embeds `texts`, using their positions ("0", "1", ...) as ids.
///
/// A text without any alphanumeric token has no direction and is reported as
/// [`AlignError::ZeroVector`]; callers drop it or fail.
pub fn embed_builtin(
    texts: &[String],
    dim: usize,
    seed: u64,
) -> Result<EmbeddingMatrix, AlignError> {
    let ids = (0..texts.len()).map(|i| i.to_string()).collect();
    embed_builtin_with_ids(ids, texts, dim, seed)
}

/// Single unit vector for `text`.
pub fn embed_one(text: &str, dim: usize, seed: u64) -> Result<Vec<f32>, AlignError> {
    if dim < MIN_DIM {
        return Err(AlignError::DimTooSmall(dim));
    }
    let v = hashed_vector(text, dim, seed);
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(AlignError::ZeroVector { index: 0 });
    }
    Ok(v.iter().map(|x| (x / norm) as f32).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::matrix::dot;

    fn texts(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn duplicates_embed_identically() {
        let m = embed_builtin(&texts(&["dog", "dog", "cat"]), 64, 0).unwrap();
        assert_eq!(m.row(0), m.row(1));
        assert_ne!(m.row(0), m.row(2));
        assert!((dot(m.row(0), m.row(1)) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn deterministic_given_seed() {
        let a = embed_builtin(&texts(&["the red team won"]), 32, 7).unwrap();
        let b = embed_builtin(&texts(&["the red team won"]), 32, 7).unwrap();
        let c = embed_builtin(&texts(&["the red team won"]), 32, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.row(0), c.row(0));
    }

    #[test]
    fn empty_text_is_flagged() {
        assert!(matches!(
            embed_builtin(&texts(&["ok", "  "]), 16, 0),
            Err(AlignError::ZeroVector { index: 1 })
        ));
        assert!(matches!(
            embed_builtin(&texts(&["!!"]), 16, 0),
            Err(AlignError::ZeroVector { index: 0 })
        ));
    }

    #[test]
    fn small_dim_rejected() {
        assert!(matches!(
            embed_builtin(&texts(&["a"]), 4, 0),
            Err(AlignError::DimTooSmall(4))
        ));
    }

    #[test]
    fn features_count_unigrams_and_bigrams() {
        let f = features("The red, the red");
        assert_eq!(f["u:the"], 2);
        assert_eq!(f["b:the red"], 2);
        assert_eq!(f["b:red the"], 1);
        assert_eq!(f.len(), 4);
    }
}
