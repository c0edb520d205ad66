//! Fixed-length binary vectors and the Hamming metric.
//!
//! [`SdrVector`] is the currency of every processing stage: encoder
//! output, pooler input and pooler activity are all bit vectors. Bits
//! are stored densely in packed 64-bit words because the pooler's
//! overlap stage performs random single-bit reads over all synapses of
//! all columns every frame.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SdrError {
    #[error("bit index {index} out of range for vector of length {length}")]
    IndexOutOfRange { index: usize, length: usize },
    #[error("duplicate active index {index}")]
    DuplicateIndex { index: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("sparsity is undefined for a zero-length vector")]
    ZeroLength,
}

/// Immutable after construction; safe to share across threads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SdrVector {
    len: usize,
    words: Vec<u64>,
}

impl SdrVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    /// Vector with ones exactly at `active`. Rejects out-of-range and
    /// duplicate indices.
    pub fn from_active(len: usize, active: &[usize]) -> Result<Self, SdrError> {
        let mut v = Self::zeros(len);
        for &i in active {
            if i >= len {
                return Err(SdrError::IndexOutOfRange {
                    index: i,
                    length: len,
                });
            }
            if v.get(i) {
                return Err(SdrError::DuplicateIndex { index: i });
            }
            v.words[i / 64] |= 1u64 << (i % 64);
        }
        Ok(v)
    }

    /// Builds from per-bit booleans; used by the encoder.
    pub fn from_bits(bits: impl IntoIterator<Item = bool>) -> Self {
        let mut words = Vec::new();
        let mut len = 0;
        let mut current = 0u64;
        for b in bits {
            if b {
                current |= 1u64 << (len % 64);
            }
            len += 1;
            if len % 64 == 0 {
                words.push(current);
                current = 0;
            }
        }
        if len % 64 != 0 {
            words.push(current);
        }
        Self { len, words }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Bit at `index`; panics when out of range.
    #[inline]
    pub fn get(&self, index: usize) -> bool {
        assert!(
            index < self.len,
            "bit index {index} out of range ({})",
            self.len
        );
        (self.words[index / 64] >> (index % 64)) & 1 == 1
    }

    pub fn popcount(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Fraction of set bits; rejected for zero-length vectors.
    pub fn sparsity(&self) -> Result<f64, SdrError> {
        if self.len == 0 {
            return Err(SdrError::ZeroLength);
        }
        Ok(self.popcount() as f64 / self.len as f64)
    }

    /// Number of differing bit positions. Requires equal lengths.
    pub fn hamming_distance(&self, other: &Self) -> Result<usize, SdrError> {
        if self.len != other.len {
            return Err(SdrError::LengthMismatch {
                left: self.len,
                right: other.len,
            });
        }
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum())
    }

    /// Indices of set bits, ascending.
    pub fn active_indices(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.popcount());
        for (wi, &w) in self.words.iter().enumerate() {
            let mut bits = w;
            while bits != 0 {
                let tz = bits.trailing_zeros() as usize;
                out.push(wi * 64 + tz);
                bits &= bits - 1;
            }
        }
        out
    }

    /// Packed words, trailing bits zero. Exposed for hashing and
    /// serialization.
    pub fn words(&self) -> &[u64] {
        &self.words
    }
}
