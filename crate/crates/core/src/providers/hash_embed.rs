use super::{EmbeddingProvider, ProviderError};
use crate::text::word_tokens;

pub const DEFAULT_DIMENSION: usize = 256;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Feature hashing: each case-folded alphanumeric token adds one to bucket
/// `fnv1a(token) % dim`, then the vector is L2-normalized.
pub fn hash_embedding(text: &str, dim: usize) -> Result<Vec<f32>, ProviderError> {
    if dim == 0 {
        return Err(ProviderError::InvalidInput("embedding dimension must be positive".into()));
    }
    let tokens = word_tokens(text);
    if tokens.is_empty() {
        return Err(ProviderError::InvalidInput("cannot embed text without any word tokens".into()));
    }
    let mut v = vec![0f64; dim];
    for t in &tokens {
        v[(fnv1a(t.as_bytes()) % dim as u64) as usize] += 1.0;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(v.into_iter().map(|x| (x / norm) as f32).collect())
}

#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Self {
        HashEmbedder { dim }
    }
}

impl Default for HashEmbedder {
    fn default() -> Self {
        HashEmbedder::new(DEFAULT_DIMENSION)
    }
}

impl EmbeddingProvider for HashEmbedder {
    fn name(&self) -> &str {
        "hash"
    }

    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f32>, ProviderError> {
        hash_embedding(text, self.dim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cosine(a: &[f32], b: &[f32]) -> f64 {
        a.iter().zip(b).map(|(x, y)| f64::from(*x) * f64::from(*y)).sum()
    }

    #[test]
    fn fnv_reference_values() {
        // published FNV-1a 64 test vectors
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn deterministic_and_normalized() {
        let e = HashEmbedder::default();
        let a = e.embed("Kendall smokes a cigarette").unwrap();
        assert_eq!(a, e.embed("Kendall smokes a cigarette").unwrap());
        assert_eq!(a.len(), 256);
        assert!((cosine(&a, &a) - 1.0).abs() < 1e-6);
        assert_eq!(a, e.embed("KENDALL, smokes a cigarette!").unwrap());
    }

    #[test]
    fn empty_text_is_rejected() {
        assert!(matches!(HashEmbedder::default().embed("  ... "), Err(ProviderError::InvalidInput(_))));
    }
}
