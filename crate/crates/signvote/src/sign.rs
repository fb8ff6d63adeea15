//! One-bit sign values and packed sign containers.
//!
//! `SignVector` is a bit-packed vector of per-coordinate signs (one worker's
//! quantized gradient, one uplink/downlink transmission). `SignWord` is the
//! per-coordinate view across workers: the length-M received word of the
//! rate-1/M repetition code.

use crate::error::{Error, Result};

/// A one-bit sign, `+1` or `-1`.
///
/// Ties everywhere in this crate resolve to `Plus`: `sign(0) = +1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    /// The sign as `+1.0` or `-1.0`.
    #[inline]
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    #[inline]
    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    /// Sign of a finite value with the `sign(0) = +1` tie-break.
    #[inline]
    pub fn of_finite(x: f64) -> Sign {
        if x < 0.0 {
            Sign::Minus
        } else {
            Sign::Plus
        }
    }

    #[inline]
    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

impl std::ops::Neg for Sign {
    type Output = Sign;
    fn neg(self) -> Sign {
        self.flip()
    }
}

impl std::ops::Mul for Sign {
    type Output = Sign;
    fn mul(self, rhs: Sign) -> Sign {
        if self == rhs {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }
}

/// Quantize a finite real to its sign; `sign(0) = +1`.
pub fn sign_of(x: f64) -> Result<Sign> {
    if !x.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "sign_of requires a finite input, got {x}"
        )));
    }
    Ok(Sign::of_finite(x))
}

/// A length-N vector of signs packed one bit per coordinate.
///
/// A set bit stores `Minus`, so the all-zero buffer is the all-`Plus` vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignVector {
    len: usize,
    words: Vec<u64>,
}

impl SignVector {
    /// Pack a nonempty sequence of signs.
    pub fn pack(signs: &[Sign]) -> Result<Self> {
        if signs.is_empty() {
            return Err(Error::InvalidArgument(
                "cannot pack an empty sign sequence".into(),
            ));
        }
        let mut v = Self::filled(signs.len(), Sign::Plus);
        for (i, &s) in signs.iter().enumerate() {
            v.set(i, s);
        }
        Ok(v)
    }

    /// Elementwise `sign_of` over a nonempty slice of finite values.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument(
                "cannot pack an empty value sequence".into(),
            ));
        }
        let mut v = Self::filled(values.len(), Sign::Plus);
        for (i, &x) in values.iter().enumerate() {
            v.set(i, sign_of(x)?);
        }
        Ok(v)
    }

    /// A vector of `len` copies of `sign`.
    pub fn filled(len: usize, sign: Sign) -> Self {
        assert!(len > 0, "SignVector length must be positive");
        let fill = match sign {
            Sign::Plus => 0u64,
            Sign::Minus => u64::MAX,
        };
        let nwords = len.div_ceil(64);
        let mut words = vec![fill; nwords];
        // Clear bits beyond `len` so equality and popcount stay well-defined.
        let tail = len % 64;
        if tail != 0 {
            words[nwords - 1] &= (1u64 << tail) - 1;
        }
        SignVector { len, words }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Storage cost in bits: one bit per coordinate.
    #[inline]
    pub fn bits(&self) -> u64 {
        self.len as u64
    }

    #[inline]
    pub fn get(&self, i: usize) -> Sign {
        assert!(i < self.len);
        if self.words[i / 64] >> (i % 64) & 1 == 1 {
            Sign::Minus
        } else {
            Sign::Plus
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, s: Sign) {
        assert!(i < self.len);
        let mask = 1u64 << (i % 64);
        match s {
            Sign::Minus => self.words[i / 64] |= mask,
            Sign::Plus => self.words[i / 64] &= !mask,
        }
    }

    pub fn unpack(&self) -> Vec<Sign> {
        (0..self.len).map(|i| self.get(i)).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = Sign> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Number of positions where the two vectors disagree (XOR popcount).
    pub fn mismatches(&self, other: &Self) -> Result<u64> {
        if self.len != other.len {
            return Err(Error::DimensionMismatch(format!(
                "sign vectors of length {} vs {}",
                self.len, other.len
            )));
        }
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as u64)
            .sum())
    }

    /// Invoke `f` with the index of every position where the vectors disagree.
    pub fn for_each_mismatch(&self, other: &Self, mut f: impl FnMut(usize)) -> Result<()> {
        if self.len != other.len {
            return Err(Error::DimensionMismatch(format!(
                "sign vectors of length {} vs {}",
                self.len, other.len
            )));
        }
        for (w, (a, b)) in self.words.iter().zip(&other.words).enumerate() {
            let mut x = a ^ b;
            while x != 0 {
                let bit = x.trailing_zeros() as usize;
                f(w * 64 + bit);
                x &= x - 1;
            }
        }
        Ok(())
    }
}

/// The length-M word received across workers for one gradient coordinate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignWord {
    bits: Vec<Sign>,
}

impl SignWord {
    pub fn new(bits: Vec<Sign>) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::InvalidArgument(
                "a sign word needs at least one worker".into(),
            ));
        }
        Ok(SignWord { bits })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    #[inline]
    pub fn get(&self, m: usize) -> Sign {
        self.bits[m]
    }

    #[inline]
    pub fn as_slice(&self) -> &[Sign] {
        &self.bits
    }
}
