//! Classical post-processing: from `J` measured bitstrings to a guess for `s`.

use std::collections::BTreeMap;
use std::fmt;

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::gf2::{self, BitString, Gf2Solution};

/// Upper bound on the number of lookup-table entries.
pub const MAX_TABLE_ENTRIES: usize = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Guess {
    Secret(BitString),
    Failure,
}

impl Guess {
    pub fn is_secret(&self, s: BitString) -> bool {
        matches!(self, Guess::Secret(g) if *g == s)
    }
}

impl fmt::Display for Guess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Guess::Secret(s) => write!(f, "{s}"),
            Guess::Failure => f.write_str("fail"),
        }
    }
}

impl Guess {
    fn parse(s: &str, n: usize) -> Result<Self> {
        if s == "fail" {
            return Ok(Guess::Failure);
        }
        let b = BitString::parse(s)?;
        if b.width() != n || b.is_zero() {
            return Err(Error::Parse(format!(
                "guess {s:?} is not a nonzero {n}-bit string"
            )));
        }
        Ok(Guess::Secret(b))
    }
}

impl Serialize for Guess {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// Every multiset of size `j` over `{0,1}^n`, as ascending vectors in
/// lexicographic order.
pub fn multisets(n: usize, j: usize) -> Result<Vec<Vec<usize>>> {
    if j == 0 {
        return Err(Error::usage("J must be at least 1"));
    }
    let count = multiset_count(n, j)
        .filter(|&c| c <= MAX_TABLE_ENTRIES as u128)
        .ok_or_else(|| Error::capacity(format!("too many {j}-multisets of {n}-bit strings")))?;
    let out: Vec<Vec<usize>> = (0..1usize << n).combinations_with_replacement(j).collect();
    debug_assert_eq!(out.len() as u128, count);
    Ok(out)
}

/// `C(2^n + j - 1, j)`.
pub fn multiset_count(n: usize, j: usize) -> Option<u128> {
    if n > 20 {
        return None;
    }
    let m = (1u128 << n) + j as u128 - 1;
    let k = j as u128;
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul(m - i)? / (i + 1);
    }
    Some(acc)
}

/// Gaussian elimination: the unique nonzero solution of `y . s = 0`, or failure.
pub fn gf2_postprocess(ys: &[BitString], n: usize) -> Guess {
    match gf2::solve_for_secret(ys, n) {
        Gf2Solution::UniqueNonzero(s) => Guess::Secret(s),
        _ => Guess::Failure,
    }
}

fn gf2_raw(ys: &[usize], n: usize) -> Guess {
    match gf2::solve_raw(ys.iter().copied(), n) {
        Gf2Solution::UniqueNonzero(s) => Guess::Secret(s),
        _ => Guess::Failure,
    }
}

/// A total function from `J`-multisets of measured strings to guesses.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LookupTable {
    n: usize,
    j: usize,
    keys: Vec<Vec<usize>>,
    guesses: Vec<Guess>,
}

impl LookupTable {
    /// Table that reproduces [`gf2_postprocess`] on every input.
    pub fn from_gf2(n: usize, j: usize) -> Result<Self> {
        let keys = multisets(n, j)?;
        let guesses = keys.iter().map(|k| gf2_raw(k, n)).collect();
        Ok(Self {
            n,
            j,
            keys,
            guesses,
        })
    }

    /// Each entry drawn uniformly from `{fail} U {nonzero s}`.
    pub fn random(n: usize, j: usize, seed: u64) -> Result<Self> {
        let keys = multisets(n, j)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let guesses = keys
            .iter()
            .map(|_| match rng.random_range(0..1usize << n) {
                0 => Guess::Failure,
                s => Guess::Secret(BitString::from_raw(n, s)),
            })
            .collect();
        Ok(Self {
            n,
            j,
            keys,
            guesses,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn j(&self) -> usize {
        self.j
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Guesses in the canonical key order of [`multisets`].
    pub fn guesses(&self) -> &[Guess] {
        &self.guesses
    }

    pub fn lookup(&self, ys: &[BitString]) -> Result<Guess> {
        if ys.len() != self.j || ys.iter().any(|y| y.width() != self.n) {
            return Err(Error::usage(format!(
                "table expects {} strings of width {}",
                self.j, self.n
            )));
        }
        let mut key: Vec<usize> = ys.iter().map(|y| y.bits()).collect();
        key.sort_unstable();
        self.keys
            .binary_search(&key)
            .map(|i| self.guesses[i])
            .map_err(|_| Error::Invariant(format!("lookup table has no entry for {key:?}")))
    }

    pub fn swap_entries(&mut self, a: usize, b: usize) {
        self.guesses.swap(a, b);
    }

    fn key_string(&self, key: &[usize]) -> String {
        key.iter()
            .map(|&y| BitString::from_raw(self.n, y).to_string())
            .join(",")
    }
}

/// Sorts the tuple and reads the stored guess.
pub fn table_postprocess(t: &LookupTable, ys: &[BitString]) -> Result<Guess> {
    t.lookup(ys)
}

impl Serialize for LookupTable {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let map: BTreeMap<String, String> = self
            .keys
            .iter()
            .zip(&self.guesses)
            .map(|(k, g)| (self.key_string(k), g.to_string()))
            .collect();
        map.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for LookupTable {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let map = BTreeMap::<String, String>::deserialize(deserializer)?;
        LookupTable::from_entries(&map).map_err(serde::de::Error::custom)
    }
}

impl LookupTable {
    fn from_entries(map: &BTreeMap<String, String>) -> Result<Self> {
        let first = map
            .keys()
            .next()
            .ok_or_else(|| Error::Parse("empty lookup table".into()))?;
        let parts: Vec<&str> = first.split(',').collect();
        let (j, n) = (parts.len(), parts[0].len());
        let keys = multisets(n, j)?;
        let mut by_key: BTreeMap<Vec<usize>, Guess> = BTreeMap::new();
        for (k, v) in map {
            let mut key = k
                .split(',')
                .map(|p| {
                    let b = BitString::parse(p)?;
                    if b.width() != n {
                        return Err(Error::Parse(format!("key {k:?} mixes widths")));
                    }
                    Ok(b.bits())
                })
                .collect::<Result<Vec<usize>>>()?;
            if key.len() != j {
                return Err(Error::Parse(format!("key {k:?} does not have {j} entries")));
            }
            key.sort_unstable();
            if by_key.insert(key, Guess::parse(v, n)?).is_some() {
                return Err(Error::Parse(format!("duplicate multiset key {k:?}")));
            }
        }
        let guesses = keys
            .iter()
            .map(|k| {
                by_key
                    .get(k)
                    .copied()
                    .ok_or_else(|| Error::Parse(format!("lookup table misses key {k:?}")))
            })
            .collect::<Result<Vec<Guess>>>()?;
        Ok(Self {
            n,
            j,
            keys,
            guesses,
        })
    }
}

/// Maps `J` measured strings to a guess for the secret.
#[derive(Clone, Debug, PartialEq)]
pub enum PostProcessor {
    Gf2,
    Table(LookupTable),
}

impl PostProcessor {
    pub fn guess(&self, ys: &[BitString]) -> Result<Guess> {
        match self {
            PostProcessor::Gf2 => {
                let n = ys
                    .first()
                    .map(|y| y.width())
                    .ok_or_else(|| Error::usage("no measurements"))?;
                if ys.iter().any(|y| y.width() != n) {
                    return Err(Error::usage("measurements have mixed widths"));
                }
                Ok(gf2_postprocess(ys, n))
            }
            PostProcessor::Table(t) => t.lookup(ys),
        }
    }

    /// Guesses for every key of `multisets(n, j)`, in that order.
    pub fn guesses_for(&self, n: usize, j: usize, keys: &[Vec<usize>]) -> Result<Vec<Guess>> {
        match self {
            PostProcessor::Gf2 => Ok(keys.iter().map(|k| gf2_raw(k, n)).collect()),
            PostProcessor::Table(t) => {
                if t.n != n || t.j != j {
                    return Err(Error::usage(format!(
                        "lookup table is for n = {}, J = {}; pipeline has n = {n}, J = {j}",
                        t.n, t.j
                    )));
                }
                Ok(t.guesses.clone())
            }
        }
    }
}

/// Random-transposition hill climbing on the table's outputs.
///
/// Each step swaps the guesses of two distinct uniformly chosen entries and
/// keeps the swap only if `cost` strictly decreases. The trace holds the
/// current cost after every step.
pub fn train_table<F>(
    table: &LookupTable,
    mut cost: F,
    steps: usize,
    seed: u64,
) -> (LookupTable, Vec<f64>)
where
    F: FnMut(&LookupTable) -> f64,
{
    let mut t = table.clone();
    let mut trace = Vec::with_capacity(steps);
    if steps == 0 {
        return (t, trace);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut current = cost(&t);
    let len = t.len();
    for _ in 0..steps {
        if len >= 2 {
            let a = rng.random_range(0..len);
            let mut b = rng.random_range(0..len - 1);
            if b >= a {
                b += 1;
            }
            t.swap_entries(a, b);
            let candidate = cost(&t);
            if candidate < current {
                current = candidate;
            } else {
                t.swap_entries(a, b);
            }
        }
        trace.push(current);
    }
    (t, trace)
}
