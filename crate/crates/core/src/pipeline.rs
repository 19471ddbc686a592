//! Success probability of the full `J`-query pipeline and the training cost
//! `C = sum_s (1 - p^s)^2`.
//!
//! `p^s` is the probability that `J` independent runs of the circuit,
//! followed by post-processing, output exactly `s`, averaged over the
//! oracles listed for that secret.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf2::BitString;
use crate::oracle::{
    build_oracle_permutation, enumerate_canonical_oracles, is_simon_function, random_oracle,
    MappingTable, OraclePermutation, MAX_ENUMERATION_N,
};
use crate::postprocess::{multisets, Guess, PostProcessor};
use crate::simulator::{
    distribution_with_oracle, output_distribution, CircuitLayout, OutcomeDistribution,
};

/// Exact evaluation enumerates at most this many ordered `J`-tuples.
pub const MAX_EXACT_TUPLES: u64 = 1 << 20;

/// How many oracles to list per secret: a count, or `"all"` canonical ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OraclesPerSecret {
    Count(usize),
    All,
}

impl Default for OraclesPerSecret {
    fn default() -> Self {
        OraclesPerSecret::Count(1)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum OraclesRepr {
    Count(usize),
    Word(String),
}

impl Serialize for OraclesPerSecret {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            OraclesPerSecret::Count(k) => OraclesRepr::Count(*k),
            OraclesPerSecret::All => OraclesRepr::Word("all".into()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for OraclesPerSecret {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match OraclesRepr::deserialize(d)? {
            OraclesRepr::Count(k) => Ok(OraclesPerSecret::Count(k)),
            OraclesRepr::Word(w) if w == "all" => Ok(OraclesPerSecret::All),
            OraclesRepr::Word(w) => Err(serde::de::Error::custom(format!(
                "expected a count or \"all\", got {w:?}"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSet {
    n: usize,
    j: usize,
    per_secret: BTreeMap<BitString, Vec<MappingTable>>,
}

impl TrainingSet {
    pub fn new(
        n: usize,
        j: usize,
        per_secret: BTreeMap<BitString, Vec<MappingTable>>,
    ) -> Result<Self> {
        if j == 0 {
            return Err(Error::usage("J must be at least 1"));
        }
        if per_secret.is_empty() || per_secret.values().any(Vec::is_empty) {
            return Err(Error::usage(
                "training set needs at least one oracle per listed secret",
            ));
        }
        for (s, tables) in &per_secret {
            for f in tables {
                if f.n() != n || f.secret() != *s {
                    return Err(Error::usage(format!(
                        "oracle with secret {} listed under {s}",
                        f.secret()
                    )));
                }
                if !is_simon_function(f) {
                    return Err(Error::usage(format!(
                        "oracle listed under {s} fails is_simon_function"
                    )));
                }
            }
        }
        Ok(Self { n, j, per_secret })
    }

    /// Canonical oracles for each secret: the first `k` in enumeration order,
    /// or all of them. Above the enumeration limit, `Count(k)` draws seeded
    /// random oracles instead.
    pub fn canonical(
        n: usize,
        j: usize,
        secrets: &[BitString],
        oracles: OraclesPerSecret,
        seed: u64,
    ) -> Result<Self> {
        let mut per_secret = BTreeMap::new();
        for &s in secrets {
            let tables: Vec<MappingTable> = match oracles {
                OraclesPerSecret::All => enumerate_canonical_oracles(n, s)?.collect(),
                OraclesPerSecret::Count(k) if n <= MAX_ENUMERATION_N => {
                    enumerate_canonical_oracles(n, s)?.take(k).collect()
                }
                OraclesPerSecret::Count(k) => (0..k as u64)
                    .map(|i| random_oracle(n, s, seed.wrapping_add(i)))
                    .collect::<Result<_>>()?,
            };
            per_secret.insert(s, tables);
        }
        Self::new(n, j, per_secret)
    }

    /// Every nonzero secret of width `n`.
    pub fn all_secrets(n: usize) -> Vec<BitString> {
        BitString::all(n).skip(1).collect()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn j(&self) -> usize {
        self.j
    }

    pub fn secrets(&self) -> impl Iterator<Item = BitString> + '_ {
        self.per_secret.keys().copied()
    }

    pub fn oracles(&self, s: BitString) -> &[MappingTable] {
        self.per_secret.get(&s).map_or(&[], Vec::as_slice)
    }

    pub fn per_secret(&self) -> &BTreeMap<BitString, Vec<MappingTable>> {
        &self.per_secret
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub total: f64,
    #[serde(rename = "per_secret")]
    pub per_secret_p: BTreeMap<BitString, f64>,
    #[serde(rename = "params")]
    pub params_echo: Vec<f64>,
}

/// All `J`-multisets with the number of ordered tuples each one stands for.
#[derive(Clone, Debug)]
pub struct EpisodeSpace {
    keys: Vec<Vec<usize>>,
    weights: Vec<f64>,
}

impl EpisodeSpace {
    pub fn new(n: usize, j: usize) -> Result<Self> {
        let tuples = (1u64 << n)
            .checked_pow(j as u32)
            .filter(|&t| t <= MAX_EXACT_TUPLES);
        if tuples.is_none() {
            return Err(Error::capacity(format!(
                "(2^{n})^{j} tuples exceed the exact limit of {MAX_EXACT_TUPLES}; \
                 use the Monte Carlo estimator"
            )));
        }
        let keys = multisets(n, j)?;
        let factorial = |k: usize| (1..=k).map(|i| i as f64).product::<f64>();
        let weights = keys
            .iter()
            .map(|k| {
                let mut denom = 1.0;
                let mut run = 1;
                for w in k.windows(2) {
                    if w[0] == w[1] {
                        run += 1;
                    } else {
                        denom *= factorial(run);
                        run = 1;
                    }
                }
                denom *= factorial(run);
                factorial(j) / denom
            })
            .collect();
        Ok(Self { keys, weights })
    }

    pub fn keys(&self) -> &[Vec<usize>] {
        &self.keys
    }

    /// `sum over tuples of prod_i D(y_i) * [guess(tuple) == s]`.
    pub fn success(&self, dist: &OutcomeDistribution, guesses: &[Guess], s: BitString) -> f64 {
        let probs = dist.probs();
        self.keys
            .iter()
            .zip(&self.weights)
            .zip(guesses)
            .filter(|(_, g)| g.is_secret(s))
            .map(|((k, w), _)| w * k.iter().map(|&y| probs[y]).product::<f64>())
            .sum()
    }
}

/// Exact probability that the pipeline outputs `f.secret()`.
pub fn success_probability(
    layout: &CircuitLayout,
    params: &[f64],
    f: &MappingTable,
    j: usize,
    post: &PostProcessor,
) -> Result<f64> {
    let space = EpisodeSpace::new(f.n(), j)?;
    let guesses = post.guesses_for(f.n(), j, space.keys())?;
    let dist = output_distribution(layout, params, f)?;
    Ok(space.success(&dist, &guesses, f.secret()))
}

/// Fraction of `shots` sampled episodes whose guess equals `f.secret()`.
pub fn mc_success_probability(
    layout: &CircuitLayout,
    params: &[f64],
    f: &MappingTable,
    j: usize,
    post: &PostProcessor,
    shots: usize,
    seed: u64,
) -> Result<f64> {
    if shots == 0 {
        return Err(Error::usage("shots must be at least 1"));
    }
    if j == 0 {
        return Err(Error::usage("J must be at least 1"));
    }
    let dist = output_distribution(layout, params, f)?;
    let n = f.n();
    let mut cdf: Vec<f64> = dist
        .probs()
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    // Rounding can leave the last entry just under 1.
    if let Some(last) = cdf.last_mut() {
        *last = f64::INFINITY;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ys = vec![BitString::from_raw(n, 0); j];
    let mut hits = 0usize;
    for _ in 0..shots {
        for y in ys.iter_mut() {
            let u: f64 = rng.random();
            let idx = cdf.partition_point(|&c| c <= u);
            *y = BitString::from_raw(n, idx);
        }
        if post.guess(&ys)?.is_secret(f.secret()) {
            hits += 1;
        }
    }
    Ok(hits as f64 / shots as f64)
}

/// Cost report for `params` on a training set.
pub fn cost(
    layout: &CircuitLayout,
    params: &[f64],
    ts: &TrainingSet,
    post: &PostProcessor,
) -> Result<CostReport> {
    Pipeline::new(layout.clone(), ts.clone(), post)?.report(params)
}

/// A layout, training set and post-processor prepared for repeated cost
/// evaluation: oracle permutations and per-multiset guesses are built once.
#[derive(Clone, Debug)]
pub struct Pipeline {
    layout: CircuitLayout,
    training: TrainingSet,
    oracles: Vec<(BitString, Vec<OraclePermutation>)>,
    space: EpisodeSpace,
    guesses: Vec<Guess>,
}

impl Pipeline {
    pub fn new(layout: CircuitLayout, training: TrainingSet, post: &PostProcessor) -> Result<Self> {
        layout.validate()?;
        if layout.n != training.n {
            return Err(Error::usage(format!(
                "layout is for n = {}, training set for n = {}",
                layout.n, training.n
            )));
        }
        let space = EpisodeSpace::new(training.n, training.j)?;
        let guesses = post.guesses_for(training.n, training.j, space.keys())?;
        let oracles = training
            .per_secret
            .iter()
            .map(|(s, tables)| (*s, tables.iter().map(build_oracle_permutation).collect()))
            .collect();
        Ok(Self {
            layout,
            training,
            oracles,
            space,
            guesses,
        })
    }

    pub fn layout(&self) -> &CircuitLayout {
        &self.layout
    }

    pub fn training(&self) -> &TrainingSet {
        &self.training
    }

    pub fn num_params(&self) -> usize {
        self.layout.num_params()
    }

    pub fn set_post(&mut self, post: &PostProcessor) -> Result<()> {
        self.guesses = post.guesses_for(self.training.n, self.training.j, self.space.keys())?;
        Ok(())
    }

    /// `p^s` for every secret in the training set, in ascending key order.
    pub fn success_by_secret(&self, params: &[f64]) -> Result<BTreeMap<BitString, f64>> {
        self.oracles
            .iter()
            .map(|(s, perms)| {
                let mut sum = 0.0;
                for perm in perms {
                    let dist = distribution_with_oracle(&self.layout, params, perm)?;
                    sum += self.space.success(&dist, &self.guesses, *s);
                }
                Ok((*s, sum / perms.len() as f64))
            })
            .collect()
    }

    pub fn report(&self, params: &[f64]) -> Result<CostReport> {
        let per_secret_p = self.success_by_secret(params)?;
        let total = per_secret_p.values().map(|p| (1.0 - p) * (1.0 - p)).sum();
        Ok(CostReport {
            total,
            per_secret_p,
            params_echo: params.to_vec(),
        })
    }

    pub fn total(&self, params: &[f64]) -> Result<f64> {
        self.report(params).map(|r| r.total)
    }

    /// Cost as a plain function; errors map to NaN, which the optimizers reject.
    pub fn objective(&self) -> impl Fn(&[f64]) -> f64 + Sync + '_ {
        move |p: &[f64]| self.total(p).unwrap_or(f64::NAN)
    }
}
