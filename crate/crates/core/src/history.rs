//! Query histories and their streak structure.
//!
//! A history α = (α₁, …, α_K) records the answer to "is the target found"
//! after each query; α₁ is the earliest. Histories are packed into a `u64`
//! with α₁ in the least significant bit, which also fixes the enumeration
//! order used throughout the crate.

use std::fmt;

use crate::error::{Error, Result};

pub const MAX_HISTORY_LEN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct History {
    bits: u64,
    len: usize,
}

impl History {
    /// Builds a history from the integer encoding (α₁ = bit 0).
    pub fn from_index(index: u64, len: usize) -> Result<Self> {
        if len == 0 || len > MAX_HISTORY_LEN {
            return Err(Error::InvalidInput(format!(
                "history length must lie in [1, {MAX_HISTORY_LEN}], got {len}"
            )));
        }
        if len < 64 && index >> len != 0 {
            return Err(Error::InvalidInput(format!(
                "index {index} does not fit in {len} bits"
            )));
        }
        Ok(Self { bits: index, len })
    }

    /// Builds a history from bits in time order.
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        if bits.is_empty() || bits.len() > MAX_HISTORY_LEN {
            return Err(Error::InvalidInput(format!(
                "history length must lie in [1, {MAX_HISTORY_LEN}], got {}",
                bits.len()
            )));
        }
        let mut packed = 0u64;
        for (i, &b) in bits.iter().enumerate() {
            match b {
                0 => {}
                1 => packed |= 1 << i,
                other => {
                    return Err(Error::InvalidInput(format!(
                        "bit value {other} is not 0 or 1"
                    )))
                }
            }
        }
        Ok(Self {
            bits: packed,
            len: bits.len(),
        })
    }

    /// Same as [`History::from_bits`] for a string such as `"0111"`.
    pub fn parse(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                _ => Err(Error::InvalidInput(format!(
                    "invalid history character {c:?}"
                ))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Self::from_bits(&bits)
    }

    pub fn all_ones(len: usize) -> Result<Self> {
        let bits = if len >= 64 {
            u64::MAX
        } else {
            (1u64 << len) - 1
        };
        Self::from_index(bits, len)
    }

    pub fn all_zeros(len: usize) -> Result<Self> {
        Self::from_index(0, len)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn index(&self) -> u64 {
        self.bits
    }

    /// Bit of the `k`-th query, 1-based as in α_k.
    pub fn bit(&self, k: usize) -> u8 {
        debug_assert!(k >= 1 && k <= self.len);
        ((self.bits >> (k - 1)) & 1) as u8
    }

    pub fn last_bit(&self) -> u8 {
        self.bit(self.len)
    }

    /// Bits in time order.
    pub fn bits(&self) -> impl Iterator<Item = u8> + '_ {
        (1..=self.len).map(move |k| self.bit(k))
    }

    /// Number of streaks: one plus the number of adjacent unequal pairs.
    pub fn streak_count(&self) -> usize {
        let changes = (self.bits ^ (self.bits >> 1)) & self.pair_mask();
        1 + changes.count_ones() as usize
    }

    fn pair_mask(&self) -> u64 {
        if self.len <= 1 {
            0
        } else {
            (1u64 << (self.len - 1)) - 1
        }
    }

    /// All histories of length `len` in ascending integer order.
    pub fn enumerate(len: usize) -> Result<impl Iterator<Item = History>> {
        if len == 0 || len >= 63 {
            return Err(Error::InvalidInput(format!(
                "cannot enumerate histories of length {len}"
            )));
        }
        Ok((0..1u64 << len).map(move |bits| History { bits, len }))
    }
}

impl fmt::Display for History {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.bits() {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

/// One maximal run of equal bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Streak {
    pub bit: u8,
    pub len: usize,
}

/// Run-length encoding of a history in time order (first streak earliest).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreakDecomposition {
    pub streaks: Vec<Streak>,
}

impl StreakDecomposition {
    pub fn n(&self) -> usize {
        self.streaks.len()
    }

    pub fn last_bit(&self) -> u8 {
        self.streaks.last().map_or(0, |s| s.bit)
    }

    pub fn total_len(&self) -> usize {
        self.streaks.iter().map(|s| s.len).sum()
    }

    /// Rebuilds the history. Fails unless streaks are nonempty, alternate
    /// in bit, and have positive lengths.
    pub fn to_history(&self) -> Result<History> {
        if self.streaks.is_empty() {
            return Err(Error::InvalidInput("empty streak decomposition".into()));
        }
        let mut bits = Vec::with_capacity(self.total_len());
        for (i, s) in self.streaks.iter().enumerate() {
            if s.len == 0 || s.bit > 1 {
                return Err(Error::InvalidInput(format!("invalid streak {s:?}")));
            }
            if i > 0 && self.streaks[i - 1].bit == s.bit {
                return Err(Error::InvalidInput("adjacent streaks share a bit".into()));
            }
            bits.extend(std::iter::repeat_n(s.bit, s.len));
        }
        History::from_bits(&bits)
    }
}

pub fn decompose_streaks(h: &History) -> Result<StreakDecomposition> {
    if h.is_empty() {
        return Err(Error::InvalidInput("empty history".into()));
    }
    let mut streaks: Vec<Streak> = Vec::new();
    for b in h.bits() {
        match streaks.last_mut() {
            Some(s) if s.bit == b => s.len += 1,
            _ => streaks.push(Streak { bit: b, len: 1 }),
        }
    }
    Ok(StreakDecomposition { streaks })
}

/// Number of length-`k` histories with `n` streaks and a given final bit:
/// the compositions of K into n parts, C(K−1, n−1).
pub fn count_histories(k: usize, n: usize, _last_bit: u8) -> Result<u128> {
    if n < 1 || n > k {
        return Err(Error::InvalidInput(format!(
            "streak count {n} outside [1, {k}]"
        )));
    }
    crate::specfun::binomial_exact((k - 1) as u64, (n - 1) as u64).ok_or_else(|| {
        Error::InvalidInput(format!(
            "C({}, {}) overflows; use specfun::log_binomial",
            k - 1,
            n - 1
        ))
    })
}
