//! Arithmetic in the binary extension field GF(2^n), 2 <= n <= 16.
//!
//! Elements are stored as their bit representation: bit `i` of the word is
//! the coefficient of `x^i`. Addition is XOR; multiplication is carry-less
//! shift-and-add, reduced modulo the canonical irreducible polynomial of
//! degree `n` (the numerically smallest one).
//!
//! ```text
//! n = 4   poly = 0b1_0011  (x^4 + x + 1)
//! 0b0010 * 0b1000 = x * x^3 = x^4 = x + 1 = 0b0011
//! ```

use std::fmt;
use std::sync::OnceLock;

use thiserror::Error;

use crate::Word;

/// Smallest supported field width.
pub const MIN_WIDTH: u8 = 2;
/// Largest supported field width.
pub const MAX_WIDTH: u8 = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("field width {0} is outside the supported range {MIN_WIDTH}..={MAX_WIDTH}")]
    UnsupportedWidth(u32),
    #[error("operands live in different fields (GF(2^{left}) vs GF(2^{right}))")]
    SpecMismatch { left: u8, right: u8 },
    #[error("value {value:#x} does not fit in {n} bits")]
    ValueOutOfRange { value: u64, n: u8 },
}

/// Description of GF(2^n): the width and its reduction polynomial.
///
/// Only [`canonical_spec`] constructs these, so two specs with the same
/// width always carry the same polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldSpec {
    n: u8,
    poly: u32,
}

impl FieldSpec {
    #[inline]
    pub fn width(&self) -> u8 {
        self.n
    }

    /// Reduction polynomial including the leading `x^n` term.
    #[inline]
    pub fn reduction_poly(&self) -> u32 {
        self.poly
    }

    /// Number of elements, `2^n`.
    #[inline]
    pub fn order(&self) -> u32 {
        1 << self.n
    }

    #[inline]
    pub fn mask(&self) -> Word {
        (1 << self.n) - 1
    }

    #[inline]
    pub fn contains(&self, w: Word) -> bool {
        w <= self.mask()
    }

    pub fn element(&self, value: Word) -> Result<FieldElement, FieldError> {
        FieldElement::new(value, *self)
    }

    pub fn zero(&self) -> FieldElement {
        FieldElement { value: 0, spec: *self }
    }

    pub fn one(&self) -> FieldElement {
        FieldElement { value: 1, spec: *self }
    }

    /// Product of two raw words. Both must already be below `2^n`.
    #[inline]
    pub fn mul_words(&self, a: Word, b: Word) -> Word {
        debug_assert!(self.contains(a) && self.contains(b));
        let top = 1u32 << self.n;
        let mut a = a;
        let mut b = b;
        let mut acc = 0;
        while b != 0 {
            if b & 1 != 0 {
                acc ^= a;
            }
            b >>= 1;
            a <<= 1;
            if a & top != 0 {
                a ^= self.poly;
            }
        }
        acc
    }

    /// `a^k` by square-and-multiply on raw words.
    pub fn pow_words(&self, a: Word, mut k: u64) -> Word {
        let mut base = a;
        let mut acc = 1;
        while k != 0 {
            if k & 1 != 0 {
                acc = self.mul_words(acc, base);
            }
            base = self.mul_words(base, base);
            k >>= 1;
        }
        acc
    }

    /// Multiplicative inverse via `a^(2^n - 2)`; `None` for zero.
    pub fn inv_words(&self, a: Word) -> Option<Word> {
        if a == 0 {
            None
        } else {
            Some(self.pow_words(a, u64::from(self.order()) - 2))
        }
    }
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GF(2^{}) mod {:#x}", self.n, self.poly)
    }
}

/// An element of GF(2^n) together with the field it belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldElement {
    value: Word,
    spec: FieldSpec,
}

impl FieldElement {
    pub fn new(value: Word, spec: FieldSpec) -> Result<Self, FieldError> {
        if !spec.contains(value) {
            return Err(FieldError::ValueOutOfRange {
                value: u64::from(value),
                n: spec.n,
            });
        }
        Ok(Self { value, spec })
    }

    #[inline]
    pub fn value(&self) -> Word {
        self.value
    }

    #[inline]
    pub fn spec(&self) -> FieldSpec {
        self.spec
    }

    #[inline]
    pub fn is_zero(&self) -> bool {
        self.value == 0
    }

    fn check(&self, other: &Self) -> Result<(), FieldError> {
        if self.spec != other.spec {
            return Err(FieldError::SpecMismatch {
                left: self.spec.n,
                right: other.spec.n,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self, FieldError> {
        self.check(other)?;
        Ok(Self {
            value: self.value ^ other.value,
            spec: self.spec,
        })
    }

    pub fn mul(&self, other: &Self) -> Result<Self, FieldError> {
        self.check(other)?;
        Ok(Self {
            value: self.spec.mul_words(self.value, other.value),
            spec: self.spec,
        })
    }

    pub fn pow(&self, k: u64) -> Self {
        Self {
            value: self.spec.pow_words(self.value, k),
            spec: self.spec,
        }
    }

    pub fn inv(&self) -> Option<Self> {
        self.spec.inv_words(self.value).map(|value| Self {
            value,
            spec: self.spec,
        })
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#0width$b}", self.value, width = self.spec.n as usize + 2)
    }
}

/// Remainder of `a` divided by `b` as polynomials over GF(2).
pub(crate) fn poly_rem(mut a: u64, b: u64) -> u64 {
    debug_assert!(b != 0);
    let db = 63 - b.leading_zeros();
    while a != 0 && 63 - a.leading_zeros() >= db {
        let shift = (63 - a.leading_zeros()) - db;
        a ^= b << shift;
    }
    a
}

/// Irreducibility over GF(2) by trial division with every polynomial of
/// degree `1..=deg/2`.
pub fn is_irreducible(poly: u64) -> bool {
    if poly < 2 {
        return false;
    }
    let deg = 63 - poly.leading_zeros();
    let max_div_deg = deg / 2;
    (2u64..(1u64 << (max_div_deg + 1))).all(|q| poly_rem(poly, q) != 0)
}

fn smallest_irreducible(n: u8) -> u32 {
    let lo = 1u64 << n;
    (lo..lo << 1)
        .find(|&p| is_irreducible(p))
        .expect("an irreducible polynomial exists for every degree") as u32
}

static CANONICAL: OnceLock<[u32; MAX_WIDTH as usize + 1]> = OnceLock::new();

/// The field GF(2^n) reduced by the numerically smallest irreducible
/// polynomial of degree `n`.
pub fn canonical_spec(n: u32) -> Result<FieldSpec, FieldError> {
    if !(u32::from(MIN_WIDTH)..=u32::from(MAX_WIDTH)).contains(&n) {
        return Err(FieldError::UnsupportedWidth(n));
    }
    let table = CANONICAL.get_or_init(|| {
        let mut t = [0u32; MAX_WIDTH as usize + 1];
        for w in MIN_WIDTH..=MAX_WIDTH {
            t[w as usize] = smallest_irreducible(w);
        }
        t
    });
    Ok(FieldSpec {
        n: n as u8,
        poly: table[n as usize],
    })
}
