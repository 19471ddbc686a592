//! Bitstrings and linear algebra over GF(2).
//!
//! Bitstrings are written `x1 x2 ... xn` with `x1` stored in the most
//! significant bit, so `BitString::parse("100")` has `bits() == 4`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const MAX_WIDTH: usize = 16;

/// A fixed-width string of `n` bits, `1 <= n <= 16`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString {
    width: u8,
    bits: u16,
}

impl BitString {
    pub fn new(width: usize, bits: u32) -> Result<Self> {
        if width == 0 || width > MAX_WIDTH {
            return Err(Error::usage(format!(
                "bitstring width {width} outside 1..={MAX_WIDTH}"
            )));
        }
        if u64::from(bits) >= 1u64 << width {
            return Err(Error::usage(format!(
                "value {bits} does not fit in {width} bits"
            )));
        }
        Ok(Self {
            width: width as u8,
            bits: bits as u16,
        })
    }

    /// Builds a bitstring without range checks. Callers guarantee `bits < 2^width`.
    pub(crate) fn from_raw(width: usize, bits: usize) -> Self {
        debug_assert!((1..=MAX_WIDTH).contains(&width) && bits < (1usize << width));
        Self {
            width: width as u8,
            bits: bits as u16,
        }
    }

    pub fn zero(width: usize) -> Result<Self> {
        Self::new(width, 0)
    }

    pub fn parse(s: &str) -> Result<Self> {
        let width = s.len();
        if width == 0 || width > MAX_WIDTH {
            return Err(Error::Parse(format!(
                "bitstring {s:?} must have 1..={MAX_WIDTH} digits"
            )));
        }
        let mut bits = 0u32;
        for c in s.chars() {
            bits <<= 1;
            match c {
                '0' => {}
                '1' => bits |= 1,
                _ => return Err(Error::Parse(format!("invalid bit {c:?} in {s:?}"))),
            }
        }
        Self::new(width, bits)
    }

    pub fn width(&self) -> usize {
        self.width as usize
    }

    pub fn bits(&self) -> usize {
        self.bits as usize
    }

    pub fn is_zero(&self) -> bool {
        self.bits == 0
    }

    /// Bit `i` counted from the left, 1-based (`x_i`).
    pub fn bit(&self, i: usize) -> bool {
        assert!(i >= 1 && i <= self.width(), "bit index {i} out of range");
        (self.bits >> (self.width() - i)) & 1 == 1
    }

    /// Every bitstring of the given width, in ascending order.
    pub fn all(width: usize) -> impl Iterator<Item = BitString> {
        (0..1usize << width).map(move |b| BitString::from_raw(width, b))
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:0width$b}", self.bits, width = self.width())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        BitString::parse(&s).map_err(serde::de::Error::custom)
    }
}

fn check_widths(a: &BitString, b: &BitString) -> Result<()> {
    if a.width != b.width {
        return Err(Error::usage(format!(
            "width mismatch: {a} has {} bits, {b} has {}",
            a.width, b.width
        )));
    }
    Ok(())
}

/// Bitwise sum modulo 2.
pub fn xor(a: BitString, b: BitString) -> Result<BitString> {
    check_widths(&a, &b)?;
    Ok(BitString {
        width: a.width,
        bits: a.bits ^ b.bits,
    })
}

/// Inner product modulo 2.
pub fn dot2(a: BitString, b: BitString) -> Result<bool> {
    check_widths(&a, &b)?;
    Ok(parity(a.bits() & b.bits()))
}

#[inline]
pub(crate) fn parity(x: usize) -> bool {
    x.count_ones() & 1 == 1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gf2Solution {
    /// The null space is exactly `{0, s}`.
    UniqueNonzero(BitString),
    /// The null space has the given dimension, at least 2.
    Ambiguous(usize),
    /// Only the zero vector solves the system.
    NoNonzeroSolution,
}

/// Reduced row echelon form of a set of `n`-bit rows.
struct Echelon {
    n: usize,
    /// Nonzero reduced rows, one per pivot.
    rows: Vec<usize>,
    /// Pivot column (0 = leftmost bit) of each row in `rows`.
    pivots: Vec<usize>,
}

impl Echelon {
    fn new(rows: impl IntoIterator<Item = usize>, n: usize) -> Self {
        let mut reduced: Vec<usize> = Vec::new();
        let mut pivots: Vec<usize> = Vec::new();
        for row in rows {
            let mut r = row;
            for (&p, &pr) in pivots.iter().zip(reduced.iter()) {
                if r & column_mask(n, p) != 0 {
                    r ^= pr;
                }
            }
            if r == 0 {
                continue;
            }
            let p = (0..n)
                .find(|&c| r & column_mask(n, c) != 0)
                .expect("nonzero row");
            // Clear the new pivot column from the rows already reduced.
            for pr in reduced.iter_mut() {
                if *pr & column_mask(n, p) != 0 {
                    *pr ^= r;
                }
            }
            reduced.push(r);
            pivots.push(p);
        }
        Self {
            n,
            rows: reduced,
            pivots,
        }
    }

    fn rank(&self) -> usize {
        self.rows.len()
    }

    /// One basis vector per free column.
    fn null_space_basis(&self) -> Vec<usize> {
        let n = self.n;
        (0..n)
            .filter(|c| !self.pivots.contains(c))
            .map(|free| {
                let mut v = column_mask(n, free);
                for (&p, &r) in self.pivots.iter().zip(self.rows.iter()) {
                    if r & column_mask(n, free) != 0 {
                        v |= column_mask(n, p);
                    }
                }
                v
            })
            .collect()
    }
}

#[inline]
fn column_mask(n: usize, col: usize) -> usize {
    1 << (n - 1 - col)
}

/// Solves `y . s = 0 (mod 2)` for every row `y`, looking for the single nonzero `s`.
pub fn solve_for_secret(rows: &[BitString], n: usize) -> Gf2Solution {
    assert!(
        (1..=MAX_WIDTH).contains(&n),
        "width {n} outside 1..={MAX_WIDTH}"
    );
    assert!(
        rows.iter().all(|r| r.width() == n),
        "all rows must have width {n}"
    );
    solve_raw(rows.iter().map(|r| r.bits()), n)
}

pub(crate) fn solve_raw(rows: impl IntoIterator<Item = usize>, n: usize) -> Gf2Solution {
    let ech = Echelon::new(rows, n);
    let basis = ech.null_space_basis();
    match basis.len() {
        0 => Gf2Solution::NoNonzeroSolution,
        1 => Gf2Solution::UniqueNonzero(BitString::from_raw(n, basis[0])),
        d => Gf2Solution::Ambiguous(d),
    }
}

/// Row rank over GF(2).
pub fn rank2(rows: &[BitString]) -> usize {
    let Some(first) = rows.first() else { return 0 };
    let n = first.width();
    assert!(
        rows.iter().all(|r| r.width() == n),
        "rows must share one width"
    );
    Echelon::new(rows.iter().map(|r| r.bits()), n).rank()
}
