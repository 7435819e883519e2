//! Polynomial hash family `h_a(x) = a_0 + a_1 x + ... + a_d x^d` over
//! GF(2^n), truncated to the low `h` bits for packet headers.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gf2n::{FieldElement, FieldError, FieldSpec};
use crate::Word;

/// Degree used when a configuration does not name one.
pub const DEFAULT_DEGREE: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HashError {
    #[error("hash width {h} exceeds field width {n}")]
    Width { h: u8, n: u8 },
    #[error("hash function needs at least one coefficient")]
    NoCoefficients,
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// An `h`-bit hash output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HashValue(pub Word);

impl HashValue {
    pub fn value(self) -> Word {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashFunction {
    spec: FieldSpec,
    coeffs: Vec<Word>,
    width: u8,
}

impl HashFunction {
    /// Builds a hash from explicit coefficients `a_0..a_d`.
    pub fn new(coeffs: &[FieldElement], width: u8) -> Result<Self, HashError> {
        let first = coeffs.first().ok_or(HashError::NoCoefficients)?;
        let spec = first.spec();
        if width > spec.width() {
            return Err(HashError::Width {
                h: width,
                n: spec.width(),
            });
        }
        for c in coeffs {
            if c.spec() != spec {
                return Err(FieldError::SpecMismatch {
                    left: spec.width(),
                    right: c.spec().width(),
                }
                .into());
            }
        }
        Ok(Self {
            spec,
            coeffs: coeffs.iter().map(FieldElement::value).collect(),
            width,
        })
    }

    /// Draws `d + 1` coefficients independently and uniformly from the field.
    pub fn sample<R: Rng + ?Sized>(
        rng: &mut R,
        degree: usize,
        spec: FieldSpec,
        width: u8,
    ) -> Result<Self, HashError> {
        if width > spec.width() {
            return Err(HashError::Width {
                h: width,
                n: spec.width(),
            });
        }
        let coeffs = (0..=degree)
            .map(|_| rng.random_range(0..spec.order()))
            .collect();
        Ok(Self {
            spec,
            coeffs,
            width,
        })
    }

    pub fn spec(&self) -> FieldSpec {
        self.spec
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Output width `h` in bits.
    pub fn width(&self) -> u8 {
        self.width
    }

    pub fn coefficients(&self) -> impl Iterator<Item = FieldElement> + '_ {
        self.coeffs
            .iter()
            .map(|&c| self.spec.element(c).expect("coefficients are in range"))
    }

    #[inline]
    fn out_mask(&self) -> Word {
        ((1u64 << self.width) - 1) as Word
    }

    /// Full-width polynomial value before truncation.
    #[inline]
    pub fn evaluate_full(&self, x: Word) -> Word {
        // Horner
        self.coeffs
            .iter()
            .rev()
            .fold(0, |acc, &a| self.spec.mul_words(acc, x) ^ a)
    }

    /// Hash of a raw word that is already known to lie in the field.
    #[inline]
    pub fn evaluate_word(&self, x: Word) -> HashValue {
        debug_assert!(self.spec.contains(x));
        HashValue(self.evaluate_full(x) & self.out_mask())
    }

    pub fn evaluate(&self, x: &FieldElement) -> Result<HashValue, HashError> {
        if x.spec() != self.spec {
            return Err(FieldError::SpecMismatch {
                left: self.spec.width(),
                right: x.spec().width(),
            }
            .into());
        }
        Ok(self.evaluate_word(x.value()))
    }

    /// Every field word hashing to `target`, in increasing order.
    pub fn preimage_set(&self, target: HashValue) -> Vec<Word> {
        (0..self.spec.order())
            .filter(|&x| self.evaluate_word(x) == target)
            .collect()
    }
}
