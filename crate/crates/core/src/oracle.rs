//! Simon-promise functions and their reversible lifts.

use itertools::Itertools;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf2::BitString;

/// Largest `n` for which every canonical oracle may be listed.
pub const MAX_ENUMERATION_N: usize = 4;
/// Largest `n` for the assignment-permuting enumeration.
pub const MAX_FULL_ENUMERATION_N: usize = 3;

/// A function `f: {0,1}^n -> {0,1}^n` together with its claimed secret.
///
/// Construction only checks the shape of the table; [`is_simon_function`]
/// decides whether the promise actually holds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawMappingTable", into = "RawMappingTable")]
pub struct MappingTable {
    n: usize,
    secret: BitString,
    table: Vec<BitString>,
}

#[derive(Serialize, Deserialize)]
struct RawMappingTable {
    n: usize,
    s: BitString,
    table: Vec<BitString>,
}

impl TryFrom<RawMappingTable> for MappingTable {
    type Error = Error;

    fn try_from(raw: RawMappingTable) -> Result<Self> {
        MappingTable::new(raw.n, raw.s, raw.table)
    }
}

impl From<MappingTable> for RawMappingTable {
    fn from(m: MappingTable) -> Self {
        RawMappingTable {
            n: m.n,
            s: m.secret,
            table: m.table,
        }
    }
}

impl MappingTable {
    pub fn new(n: usize, secret: BitString, table: Vec<BitString>) -> Result<Self> {
        if n == 0 || n > crate::gf2::MAX_WIDTH {
            return Err(Error::usage(format!("n = {n} outside 1..=16")));
        }
        if secret.width() != n {
            return Err(Error::usage(format!(
                "secret {secret} is not {n} bits wide"
            )));
        }
        if table.len() != 1 << n {
            return Err(Error::usage(format!(
                "table has {} entries, expected {}",
                table.len(),
                1usize << n
            )));
        }
        if let Some(bad) = table.iter().find(|v| v.width() != n) {
            return Err(Error::usage(format!(
                "table value {bad} is not {n} bits wide"
            )));
        }
        Ok(Self { n, secret, table })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn secret(&self) -> BitString {
        self.secret
    }

    pub fn table(&self) -> &[BitString] {
        &self.table
    }

    pub fn eval(&self, x: BitString) -> BitString {
        self.table[x.bits()]
    }

    /// Checks every promise constraint. Alias of [`is_simon_function`].
    pub fn is_valid(&self) -> bool {
        is_simon_function(self)
    }
}

/// True iff `f` is a strictly 2-to-1 function with period `f.secret()`.
pub fn is_simon_function(f: &MappingTable) -> bool {
    let s = f.secret.bits();
    if s == 0 {
        return false;
    }
    let t = &f.table;
    let size = t.len();
    // f(x) = f(x ^ s) everywhere
    if (0..size).any(|x| t[x] != t[x ^ s]) {
        return false;
    }
    // distinct cosets must have distinct images
    let mut seen = vec![false; size];
    for x in (0..size).filter(|&x| x < x ^ s) {
        let v = t[x].bits();
        if seen[v] {
            return false;
        }
        seen[v] = true;
    }
    true
}

fn check_secret(n: usize, s: BitString) -> Result<()> {
    if s.width() != n {
        return Err(Error::usage(format!("secret {s} is not {n} bits wide")));
    }
    if s.is_zero() {
        return Err(Error::usage("the secret must be nonzero"));
    }
    Ok(())
}

/// Coset representatives `min(x, x ^ s)` in ascending order.
fn coset_minima(n: usize, s: usize) -> Vec<usize> {
    (0..1usize << n).filter(|&x| x < x ^ s).collect()
}

fn assign(n: usize, s: usize, cosets: &[usize], image: &[usize]) -> Vec<BitString> {
    let mut table = vec![BitString::from_raw(n, 0); 1 << n];
    for (&c, &v) in cosets.iter().zip(image) {
        table[c] = BitString::from_raw(n, v);
        table[c ^ s] = BitString::from_raw(n, v);
    }
    table
}

/// One oracle per `2^(n-1)`-element image subset.
///
/// Cosets `{x, x ^ s}` are ordered by their smaller element and the chosen
/// image values are assigned to them in ascending order. Subsets come out in
/// lexicographic order.
pub fn enumerate_canonical_oracles(
    n: usize,
    s: BitString,
) -> Result<impl Iterator<Item = MappingTable>> {
    if n == 0 || n > MAX_ENUMERATION_N {
        return Err(Error::capacity(format!(
            "canonical enumeration supports 1 <= n <= {MAX_ENUMERATION_N}, got {n}"
        )));
    }
    check_secret(n, s)?;
    let cosets = coset_minima(n, s.bits());
    let half = cosets.len();
    Ok((0..1usize << n)
        .combinations(half)
        .map(move |image| MappingTable {
            n,
            secret: s,
            table: assign(n, s.bits(), &cosets, &image),
        }))
}

/// Every valid oracle for `s`, distinguishing which coset receives which value.
pub fn enumerate_full_oracles(n: usize, s: BitString) -> Result<Vec<MappingTable>> {
    if n == 0 || n > MAX_FULL_ENUMERATION_N {
        return Err(Error::capacity(format!(
            "full enumeration supports 1 <= n <= {MAX_FULL_ENUMERATION_N}, got {n}"
        )));
    }
    check_secret(n, s)?;
    let cosets = coset_minima(n, s.bits());
    let half = cosets.len();
    let mut out = Vec::new();
    for image in (0..1usize << n).combinations(half) {
        for perm in image.iter().copied().permutations(half) {
            out.push(MappingTable {
                n,
                secret: s,
                table: assign(n, s.bits(), &cosets, &perm),
            });
        }
    }
    Ok(out)
}

fn binomial(n: u128, k: u128) -> Option<u128> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

/// Number of canonical oracles for one secret: `C(2^n, 2^(n-1))`.
pub fn count_oracles_per_secret(n: usize) -> Result<u128> {
    if n == 0 || n > 7 {
        return Err(Error::capacity(format!(
            "oracle count for n = {n} does not fit in 128 bits"
        )));
    }
    binomial(1u128 << n, 1u128 << (n - 1))
        .ok_or_else(|| Error::capacity(format!("oracle count overflow at n = {n}")))
}

/// `(2^n - 1) * C(2^n, 2^(n-1))` mapping tables across all nonzero secrets.
pub fn count_mapping_tables(n: usize) -> Result<u128> {
    if n == 0 {
        return Err(Error::usage("n must be at least 1"));
    }
    let per = count_oracles_per_secret(n)?;
    per.checked_mul((1u128 << n) - 1)
        .ok_or_else(|| Error::capacity(format!("mapping table count overflow at n = {n}")))
}

/// A uniformly random canonical oracle for `s`, reproducible from `seed`.
pub fn random_oracle(n: usize, s: BitString, seed: u64) -> Result<MappingTable> {
    if n == 0 || n > crate::gf2::MAX_WIDTH {
        return Err(Error::usage(format!("n = {n} outside 1..=16")));
    }
    check_secret(n, s)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut image = sample(&mut rng, 1 << n, 1 << (n - 1)).into_vec();
    image.sort_unstable();
    let cosets = coset_minima(n, s.bits());
    Ok(MappingTable {
        n,
        secret: s,
        table: assign(n, s.bits(), &cosets, &image),
    })
}

/// The map `|x>|b> -> |x>|b ^ f(x)>` as an index permutation on `2^(2n)` basis states.
///
/// Basis index is `x * 2^n + b`, first register most significant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OraclePermutation {
    n: usize,
    perm: Vec<usize>,
}

impl OraclePermutation {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn image(&self, index: usize) -> usize {
        self.perm[index]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.perm
    }

    pub fn is_permutation(&self) -> bool {
        let mut seen = vec![false; self.perm.len()];
        for &p in &self.perm {
            if p >= seen.len() || seen[p] {
                return false;
            }
            seen[p] = true;
        }
        true
    }

    pub fn is_involution(&self) -> bool {
        self.perm
            .iter()
            .enumerate()
            .all(|(i, &p)| self.perm[p] == i)
    }
}

pub fn build_oracle_permutation(f: &MappingTable) -> OraclePermutation {
    let n = f.n;
    let size = 1usize << n;
    let mut perm = Vec::with_capacity(size * size);
    for x in 0..size {
        let fx = f.table[x].bits();
        for b in 0..size {
            perm.push((x << n) | (b ^ fx));
        }
    }
    OraclePermutation { n, perm }
}
