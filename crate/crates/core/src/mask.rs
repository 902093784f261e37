//! Binary composition rules over the sub-likelihood components.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A binary vector ω ∈ {0,1}^M. Bit `m` switches component `m` on.
///
/// Equality and hashing are on the packed bits, so masks can key the
/// objective cache directly.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ComponentMask {
    len: usize,
    words: Vec<u64>,
}

impl ComponentMask {
    pub fn zeros(len: usize) -> Self {
        ComponentMask {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut m = Self::zeros(len);
        for k in 0..len {
            m.set(k, true);
        }
        m
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut m = Self::zeros(bits.len());
        for (k, &b) in bits.iter().enumerate() {
            m.set(k, b);
        }
        m
    }

    pub fn from_indices(len: usize, active: &[usize]) -> Self {
        let mut m = Self::zeros(len);
        for &k in active {
            m.set(k, true);
        }
        m
    }

    /// Mask whose bit `m` is bit `m` of `code`; used for exhaustive scans.
    pub fn from_code(len: usize, code: u64) -> Self {
        assert!(len <= 64);
        let mut m = Self::zeros(len);
        if len > 0 {
            m.words[0] = code;
        }
        m
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, k: usize) -> bool {
        debug_assert!(k < self.len);
        (self.words[k / 64] >> (k % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, k: usize, on: bool) {
        debug_assert!(k < self.len);
        let bit = 1u64 << (k % 64);
        if on {
            self.words[k / 64] |= bit;
        } else {
            self.words[k / 64] &= !bit;
        }
    }

    pub fn with(&self, k: usize, on: bool) -> Self {
        let mut m = self.clone();
        m.set(k, on);
        m
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// True for the all-zero mask, which cannot define an estimator.
    pub fn is_degenerate(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn active(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |&k| self.get(k))
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.len).map(|k| self.get(k)).collect()
    }

    pub fn complement(&self) -> Self {
        let mut m = Self::zeros(self.len);
        for k in 0..self.len {
            m.set(k, !self.get(k));
        }
        m
    }

    /// Number of coordinates where the two masks differ.
    pub fn hamming(&self, other: &Self) -> Result<usize> {
        if self.len != other.len {
            return Err(Error::LengthMismatch {
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

    /// Component-1-first bit string, e.g. `"1011"`.
    pub fn bitstring(&self) -> String {
        (0..self.len).map(|k| if self.get(k) { '1' } else { '0' }).collect()
    }
}

impl fmt::Debug for ComponentMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ComponentMask({})", self.bitstring())
    }
}

impl fmt::Display for ComponentMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.bitstring())
    }
}

impl FromStr for ComponentMask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .trim()
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::InvalidConfig(format!(
                    "mask must be a string of 0/1, found {other:?}"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ComponentMask::from_bools(&bits))
    }
}

impl Serialize for ComponentMask {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.bitstring())
    }
}

impl<'de> Deserialize<'de> for ComponentMask {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
