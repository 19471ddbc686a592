//! Dense statevector simulation of the `2n`-qubit trainable circuit.
//!
//! Qubits `1..=n` form the first register (function input, measured) and
//! `n+1..=2n` the second. Basis index `x * 2^n + b` puts the first register
//! in the high bits, and qubit 1 is the most significant bit of `x`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf2::{parity, BitString};
use crate::oracle::{build_oracle_permutation, MappingTable, OraclePermutation};

pub type Mat2 = Matrix2<Complex64>;
pub type Mat4 = Matrix4<Complex64>;

/// Largest `n` the simulator accepts (`2n` qubits).
pub const MAX_SIM_N: usize = 6;

const OMEGA_EPS: f64 = 1e-8;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `sigma_0` (identity), `sigma_x`, `sigma_y`, `sigma_z`.
pub fn pauli(j: usize) -> Mat2 {
    let o = c(0.0, 0.0);
    let l = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    match j {
        0 => Mat2::new(l, o, o, l),
        1 => Mat2::new(o, l, l, o),
        2 => Mat2::new(o, -i, i, o),
        3 => Mat2::new(l, o, o, -l),
        _ => panic!("pauli index {j} out of range"),
    }
}

pub(crate) fn kron2(a: &Mat2, b: &Mat2) -> Mat4 {
    Mat4::from_fn(|r, col| a[(r / 2, col / 2)] * b[(r % 2, col % 2)])
}

/// `[[cos t, sin t], [sin t, -cos t]]`; Hadamard at `t = pi/4`.
pub fn restricted_gate(theta: f64) -> Mat2 {
    let (s, co) = theta.sin_cos();
    Mat2::new(c(co, 0.0), c(s, 0.0), c(s, 0.0), c(-co, 0.0))
}

/// `e^{i a0} (cos W + i sin(W)/W sum_j a_j sigma_j)` with `W = |(a1, a2, a3)|`.
pub fn general_one_qubit_gate(alpha: &[f64; 4]) -> Mat2 {
    let omega = (alpha[1] * alpha[1] + alpha[2] * alpha[2] + alpha[3] * alpha[3]).sqrt();
    let sinc = if omega < OMEGA_EPS {
        1.0
    } else {
        omega.sin() / omega
    };
    let mut m = pauli(0) * c(omega.cos(), 0.0);
    for (j, a) in alpha.iter().enumerate().skip(1) {
        m += pauli(j) * c(0.0, sinc * a);
    }
    m * Complex64::from_polar(1.0, alpha[0])
}

/// `exp(i sum_{j,k} a_{j,k} sigma_j (x) sigma_k)`, with `alpha[4 * j + k] = a_{j,k}`.
///
/// Computed from the eigendecomposition of the Hermitian exponent.
pub fn general_two_qubit_gate(alpha: &[f64; 16]) -> Mat4 {
    let mut h = Mat4::zeros();
    for j in 0..4 {
        for k in 0..4 {
            let a = alpha[4 * j + k];
            if a != 0.0 {
                h += kron2(&pauli(j), &pauli(k)) * c(a, 0.0);
            }
        }
    }
    let eig = h.symmetric_eigen();
    let v = eig.eigenvectors;
    let phases = Mat4::from_diagonal(&eig.eigenvalues.map(|l| Complex64::from_polar(1.0, l)));
    v * phases * v.adjoint()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateKind {
    /// One angle, see [`restricted_gate`].
    Restricted,
    /// Four angles, see [`general_one_qubit_gate`].
    General1q,
    /// Sixteen angles on a qubit pair, see [`general_two_qubit_gate`].
    General2q,
}

impl GateKind {
    pub fn arity(self) -> usize {
        match self {
            GateKind::Restricted => 1,
            GateKind::General1q => 4,
            GateKind::General2q => 16,
        }
    }

    pub fn qubits(self) -> usize {
        match self {
            GateKind::General2q => 2,
            _ => 1,
        }
    }

    /// Whether shifting local parameter `i` by `2 pi` leaves the gate unchanged.
    ///
    /// Only the restricted angle and the global phase terms qualify.
    pub fn is_periodic(self, i: usize) -> bool {
        match self {
            GateKind::Restricted => true,
            GateKind::General1q | GateKind::General2q => i == 0,
        }
    }

    pub fn matrix(self, params: &[f64]) -> Gate {
        debug_assert_eq!(params.len(), self.arity());
        match self {
            GateKind::Restricted => Gate::One(restricted_gate(params[0])),
            GateKind::General1q => Gate::One(general_one_qubit_gate(
                params.try_into().expect("4 parameters"),
            )),
            GateKind::General2q => Gate::Two(general_two_qubit_gate(
                params.try_into().expect("16 parameters"),
            )),
        }
    }
}

/// The gate family a named layout is instantiated with.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateFamily {
    #[default]
    Restricted,
    General1q,
    General2q,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Gate {
    One(Mat2),
    Two(Mat4),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateSlot {
    /// First-register qubits, 1-based. Two entries for [`GateKind::General2q`].
    pub qubits: Vec<usize>,
    pub kind: GateKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layer {
    Pre,
    Post,
}

/// Gate placement before and after the oracle, plus parameter tying.
///
/// Local parameters are numbered across the pre layer then the post layer,
/// each slot taking `kind.arity()` consecutive indices. `tying[l]` is the
/// shared parameter that local index `l` reads.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitLayout {
    pub name: String,
    pub n: usize,
    pub pre: Vec<GateSlot>,
    pub post: Vec<GateSlot>,
    pub tying: Vec<usize>,
}

impl CircuitLayout {
    /// Checks slot ranges, gate arities and that tying covers `0..num_params`.
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n > MAX_SIM_N {
            return Err(Error::usage(format!(
                "layout n = {} outside 1..={MAX_SIM_N}",
                self.n
            )));
        }
        for slot in self.pre.iter().chain(&self.post) {
            if slot.qubits.len() != slot.kind.qubits() {
                return Err(Error::usage(format!(
                    "{:?} gate needs {} qubit(s), got {:?}",
                    slot.kind,
                    slot.kind.qubits(),
                    slot.qubits
                )));
            }
            if let Some(q) = slot.qubits.iter().find(|&&q| q == 0 || q > self.n) {
                return Err(Error::usage(format!(
                    "qubit slot {q} outside the first register 1..={}",
                    self.n
                )));
            }
            if slot.qubits.len() == 2 && slot.qubits[0] == slot.qubits[1] {
                return Err(Error::usage("two-qubit gate on a repeated qubit"));
            }
        }
        let locals = self.local_count();
        if self.tying.len() != locals {
            return Err(Error::usage(format!(
                "tying map has {} entries for {locals} local parameters",
                self.tying.len()
            )));
        }
        let k = self.num_params();
        let mut used = vec![false; k];
        for &id in &self.tying {
            used[id] = true;
        }
        if let Some(unused) = used.iter().position(|u| !u) {
            return Err(Error::usage(format!(
                "shared parameter {unused} is never used"
            )));
        }
        Ok(())
    }

    fn local_count(&self) -> usize {
        self.pre
            .iter()
            .chain(&self.post)
            .map(|s| s.kind.arity())
            .sum()
    }

    pub fn num_params(&self) -> usize {
        self.tying.iter().max().map_or(0, |m| m + 1)
    }

    /// Per shared parameter: true iff every use of it is `2 pi`-periodic.
    pub fn periodic_mask(&self) -> Vec<bool> {
        let mut mask = vec![true; self.num_params()];
        let mut l = 0;
        for slot in self.pre.iter().chain(&self.post) {
            for i in 0..slot.kind.arity() {
                if !slot.kind.is_periodic(i) {
                    mask[self.tying[l]] = false;
                }
                l += 1;
            }
        }
        mask
    }

    fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::usage(format!(
                "layout {} takes {} parameters, got {}",
                self.name,
                self.num_params(),
                params.len()
            )));
        }
        Ok(())
    }

    /// Gate matrices of one layer, evaluated at `params`.
    pub fn layer_gates(&self, layer: Layer, params: &[f64]) -> Result<Vec<(Gate, Vec<usize>)>> {
        self.check_params(params)?;
        let offset = match layer {
            Layer::Pre => 0,
            Layer::Post => self.pre.iter().map(|s| s.kind.arity()).sum(),
        };
        let slots = match layer {
            Layer::Pre => &self.pre,
            Layer::Post => &self.post,
        };
        let mut l = offset;
        let mut out = Vec::with_capacity(slots.len());
        for slot in slots {
            let local: Vec<f64> = self.tying[l..l + slot.kind.arity()]
                .iter()
                .map(|&id| params[id])
                .collect();
            l += slot.kind.arity();
            out.push((slot.kind.matrix(&local), slot.qubits.clone()));
        }
        Ok(out)
    }

    /// Independent angle per first-register slot before the oracle, one
    /// shared angle for the whole layer after it.
    pub fn fig4(n: usize, family: GateFamily) -> Result<Self> {
        let pre: Vec<usize> = (0..n).collect();
        Self::from_pattern("fig4", n, family, &pre, n)
    }

    /// One shared angle for each layer; the two-parameter landscape layout.
    pub fn fig5(n: usize, family: GateFamily) -> Result<Self> {
        Self::from_pattern("fig5", n, family, &vec![0; n], 1)
    }

    /// Shared angle on qubits `2..=n` before the oracle, an independent
    /// angle on qubit 1, and one shared angle after the oracle.
    pub fn fig6(n: usize, family: GateFamily) -> Result<Self> {
        if n < 2 {
            return Err(Error::usage("fig6 layout needs n >= 2"));
        }
        let mut pre = vec![0; n];
        pre[0] = 2;
        Self::from_pattern("fig6", n, family, &pre, 1)
    }

    pub fn named(name: &str, n: usize, family: GateFamily) -> Result<Self> {
        match name {
            "fig4" => Self::fig4(n, family),
            "fig5" => Self::fig5(n, family),
            "fig6" => Self::fig6(n, family),
            other => Err(Error::usage(format!("unknown layout {other:?}"))),
        }
    }

    /// `pre_labels[q]` is the tying label of qubit `q + 1` in the pre layer;
    /// every post-layer slot uses `post_label`. Each (label, kind) pair gets
    /// its own block of shared parameters, numbered by label.
    fn from_pattern(
        name: &str,
        n: usize,
        family: GateFamily,
        pre_labels: &[usize],
        post_label: usize,
    ) -> Result<Self> {
        if n == 0 || n > MAX_SIM_N {
            return Err(Error::usage(format!("n = {n} outside 1..={MAX_SIM_N}")));
        }
        let slots_for = |labels: &[usize]| -> Vec<(GateSlot, usize)> {
            match family {
                GateFamily::Restricted | GateFamily::General1q => {
                    let kind = if family == GateFamily::Restricted {
                        GateKind::Restricted
                    } else {
                        GateKind::General1q
                    };
                    (1..=n)
                        .map(|q| {
                            (
                                GateSlot {
                                    qubits: vec![q],
                                    kind,
                                },
                                labels[q - 1],
                            )
                        })
                        .collect()
                }
                GateFamily::General2q => {
                    let mut v = Vec::new();
                    let mut q = 1;
                    while q < n {
                        v.push((
                            GateSlot {
                                qubits: vec![q, q + 1],
                                kind: GateKind::General2q,
                            },
                            labels[q - 1],
                        ));
                        q += 2;
                    }
                    if q == n {
                        v.push((
                            GateSlot {
                                qubits: vec![q],
                                kind: GateKind::General1q,
                            },
                            labels[q - 1],
                        ));
                    }
                    v
                }
            }
        };
        let pre = slots_for(pre_labels);
        let post = slots_for(&vec![post_label; n]);

        let mut blocks: BTreeMap<(usize, GateKind), usize> = BTreeMap::new();
        for (slot, label) in pre.iter().chain(&post) {
            blocks.insert((*label, slot.kind), 0);
        }
        let mut next = 0;
        for ((_, kind), start) in blocks.iter_mut() {
            *start = next;
            next += kind.arity();
        }
        let mut tying = Vec::new();
        for (slot, label) in pre.iter().chain(&post) {
            let start = blocks[&(*label, slot.kind)];
            tying.extend(start..start + slot.kind.arity());
        }
        let layout = Self {
            name: name.to_string(),
            n,
            pre: pre.into_iter().map(|(s, _)| s).collect(),
            post: post.into_iter().map(|(s, _)| s).collect(),
            tying,
        };
        layout.validate()?;
        Ok(layout)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|0>^(2n)`.
    pub fn zero(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_SIM_N {
            return Err(Error::usage(format!("n = {n} outside 1..={MAX_SIM_N}")));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << (2 * n)];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Self { n, amps })
    }

    pub fn from_amplitudes(n: usize, amps: Vec<Complex64>) -> Result<Self> {
        if n == 0 || n > MAX_SIM_N || amps.len() != 1 << (2 * n) {
            return Err(Error::usage(format!(
                "{} amplitudes do not describe 2n = {} qubits",
                amps.len(),
                2 * n
            )));
        }
        Ok(Self { n, amps })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn bit_of(&self, qubit: usize) -> usize {
        1 << (2 * self.n - qubit)
    }

    pub fn apply_gate(&mut self, gate: &Gate, qubits: &[usize]) -> Result<()> {
        if let Some(&q) = qubits.iter().find(|&&q| q == 0 || q > self.n) {
            return Err(Error::usage(format!(
                "qubit slot {q} outside 1..={}",
                self.n
            )));
        }
        match gate {
            Gate::One(m) => {
                let [q] = qubits else {
                    return Err(Error::usage("one-qubit gate needs exactly one qubit"));
                };
                let mask = self.bit_of(*q);
                for i in 0..self.amps.len() {
                    if i & mask == 0 {
                        let j = i | mask;
                        let (a0, a1) = (self.amps[i], self.amps[j]);
                        self.amps[i] = m[(0, 0)] * a0 + m[(0, 1)] * a1;
                        self.amps[j] = m[(1, 0)] * a0 + m[(1, 1)] * a1;
                    }
                }
            }
            Gate::Two(m) => {
                let [qa, qb] = qubits else {
                    return Err(Error::usage("two-qubit gate needs exactly two qubits"));
                };
                if qa == qb {
                    return Err(Error::usage("two-qubit gate on a repeated qubit"));
                }
                let (ma, mb) = (self.bit_of(*qa), self.bit_of(*qb));
                for i in 0..self.amps.len() {
                    if i & (ma | mb) == 0 {
                        let idx = [i, i | mb, i | ma, i | ma | mb];
                        let a = idx.map(|k| self.amps[k]);
                        for (r, &k) in idx.iter().enumerate() {
                            self.amps[k] = (0..4).map(|col| m[(r, col)] * a[col]).sum();
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// `Pr(first register = y)`, summing over the second register.
    pub fn first_register_distribution(&self) -> OutcomeDistribution {
        let size = 1usize << self.n;
        let probs = self
            .amps
            .chunks(size)
            .map(|row| row.iter().map(|a| a.norm_sqr()).sum())
            .collect();
        OutcomeDistribution { n: self.n, probs }
    }
}

pub fn apply_layer(
    state: &mut StateVector,
    layout: &CircuitLayout,
    layer: Layer,
    params: &[f64],
) -> Result<()> {
    if layout.n != state.n {
        return Err(Error::usage(format!(
            "layout is for n = {}, state has n = {}",
            layout.n, state.n
        )));
    }
    for (gate, qubits) in layout.layer_gates(layer, params)? {
        state.apply_gate(&gate, &qubits)?;
    }
    Ok(())
}

/// Moves the amplitude at `i` to `perm[i]`.
pub fn apply_oracle(state: &mut StateVector, oracle: &OraclePermutation) -> Result<()> {
    if oracle.dim() != state.amps.len() {
        return Err(Error::usage(format!(
            "oracle acts on {} basis states, state has {}",
            oracle.dim(),
            state.amps.len()
        )));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); state.amps.len()];
    for (i, &a) in state.amps.iter().enumerate() {
        out[oracle.image(i)] = a;
    }
    state.amps = out;
    Ok(())
}

/// First-register statistics of `|0>^(2n) -> pre -> oracle -> post`.
pub fn output_distribution(
    layout: &CircuitLayout,
    params: &[f64],
    f: &MappingTable,
) -> Result<OutcomeDistribution> {
    distribution_with_oracle(layout, params, &build_oracle_permutation(f))
}

pub fn distribution_with_oracle(
    layout: &CircuitLayout,
    params: &[f64],
    oracle: &OraclePermutation,
) -> Result<OutcomeDistribution> {
    let mut state = StateVector::zero(layout.n)?;
    apply_layer(&mut state, layout, Layer::Pre, params)?;
    apply_oracle(&mut state, oracle)?;
    apply_layer(&mut state, layout, Layer::Post, params)?;
    Ok(state.first_register_distribution())
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeDistribution {
    n: usize,
    probs: Vec<f64>,
}

impl OutcomeDistribution {
    pub fn new(n: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != 1 << n {
            return Err(Error::usage(format!(
                "{} probabilities for n = {n}",
                probs.len()
            )));
        }
        Ok(Self { n, probs })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, y: BitString) -> f64 {
        self.probs[y.bits()]
    }

    pub fn max_abs_diff(&self, other: &OutcomeDistribution) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `y,prob` CSV with MSB-first bitstrings.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("y,prob\n");
        for (y, p) in self.probs.iter().enumerate() {
            let _ = writeln!(out, "{},{}", BitString::from_raw(self.n, y), p);
        }
        out
    }
}

/// Uniform on the orthogonal complement of `s`, zero elsewhere.
pub fn simon_reference_distribution(n: usize, s: BitString) -> Result<OutcomeDistribution> {
    if s.width() != n || s.is_zero() {
        return Err(Error::usage(format!(
            "secret {s} must be a nonzero {n}-bit string"
        )));
    }
    let p = 1.0 / (1u64 << (n - 1)) as f64;
    let probs = (0..1usize << n)
        .map(|y| if parity(y & s.bits()) { 0.0 } else { p })
        .collect();
    Ok(OutcomeDistribution { n, probs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{enumerate_canonical_oracles, random_oracle};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn b(s: &str) -> BitString {
        BitString::parse(s).unwrap()
    }

    fn max_abs<const R: usize, const C: usize>(m: &nalgebra::SMatrix<Complex64, R, C>) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// exp(A) by Taylor series with scaling and squaring.
    fn expm<const D: usize>(
        a: &nalgebra::SMatrix<Complex64, D, D>,
    ) -> nalgebra::SMatrix<Complex64, D, D> {
        let norm = max_abs(a) * D as f64;
        let squarings = if norm > 0.5 {
            (norm / 0.5).log2().ceil() as u32
        } else {
            0
        };
        let scaled = a / Complex64::new(2f64.powi(squarings as i32), 0.0);
        let mut term = nalgebra::SMatrix::<Complex64, D, D>::identity();
        let mut sum = term;
        for k in 1..30 {
            term = term * scaled / Complex64::new(k as f64, 0.0);
            sum += term;
        }
        for _ in 0..squarings {
            sum = sum * sum;
        }
        sum
    }

    fn unitarity_error<const D: usize>(u: &nalgebra::SMatrix<Complex64, D, D>) -> f64 {
        max_abs(&(u.adjoint() * u - nalgebra::SMatrix::<Complex64, D, D>::identity()))
    }

    fn hadamard() -> Mat2 {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Mat2::new(c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0))
    }

    #[test]
    fn restricted_gate_examples() {
        assert!(max_abs(&(restricted_gate(FRAC_PI_4) - hadamard())) < 1e-15);
        assert!(max_abs(&(restricted_gate(0.0) - pauli(3))) < 1e-15);
        assert!(max_abs(&(restricted_gate(FRAC_PI_2) - pauli(1))) < 1e-15);
    }

    #[test]
    fn restricted_gate_is_unitary_involution() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let g = restricted_gate(rng.random_range(0.0..2.0 * PI));
            assert!(max_abs(&(g * g - Mat2::identity())) < 1e-10);
            assert!(unitarity_error(&g) < 1e-10);
        }
    }

    #[test]
    fn general_one_qubit_examples() {
        assert!(max_abs(&(general_one_qubit_gate(&[0.0; 4]) - Mat2::identity())) < 1e-15);
        let g = general_one_qubit_gate(&[0.0, FRAC_PI_2, 0.0, 0.0]);
        assert!(max_abs(&(g - pauli(1) * c(0.0, 1.0))) < 1e-15);
        // Omega below the cutoff uses sinc = 1
        let tiny = general_one_qubit_gate(&[0.3, 1e-9, 0.0, 0.0]);
        assert!(unitarity_error(&tiny) < 1e-10);
    }

    #[test]
    fn closed_form_matches_matrix_exponential() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let a: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.0..2.0 * PI));
            let mut gen = Mat2::zeros();
            for (j, aj) in a.iter().enumerate() {
                gen += pauli(j) * c(0.0, *aj);
            }
            let closed = general_one_qubit_gate(&a);
            assert!(max_abs(&(closed - expm(&gen))) < 1e-10, "alpha {a:?}");
            assert!(unitarity_error(&closed) < 1e-10);
        }
    }

    #[test]
    fn general_two_qubit_examples() {
        assert!(max_abs(&(general_two_qubit_gate(&[0.0; 16]) - Mat4::identity())) < 1e-12);
        let mut a = [0.0; 16];
        a[0] = 0.7;
        let expect = Mat4::identity() * Complex64::from_polar(1.0, 0.7);
        assert!(max_abs(&(general_two_qubit_gate(&a) - expect)) < 1e-12);
        // (X(x)X)^2 = 1 so exp(i t XX) = cos t + i sin t XX
        let mut a = [0.0; 16];
        a[4 + 1] = FRAC_PI_2;
        let xx = kron2(&pauli(1), &pauli(1));
        assert!(max_abs(&(general_two_qubit_gate(&a) - xx * c(0.0, 1.0))) < 1e-12);
    }

    #[test]
    fn two_qubit_gate_matches_matrix_exponential() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let a: [f64; 16] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            let mut gen = Mat4::zeros();
            for j in 0..4 {
                for k in 0..4 {
                    gen += kron2(&pauli(j), &pauli(k)) * c(0.0, a[4 * j + k]);
                }
            }
            let u = general_two_qubit_gate(&a);
            assert!(max_abs(&(u - expm(&gen))) < 1e-10);
            assert!(unitarity_error(&u) < 1e-10);
        }
    }

    #[test]
    fn layer_of_hadamards_gives_uniform_first_register() {
        let layout = CircuitLayout::fig5(2, GateFamily::Restricted).unwrap();
        let mut st = StateVector::zero(2).unwrap();
        apply_layer(&mut st, &layout, Layer::Pre, &[FRAC_PI_4, 0.0]).unwrap();
        for (i, a) in st.amplitudes().iter().enumerate() {
            let expect = if i & 0b11 == 0 { 0.5 } else { 0.0 };
            assert!((a - c(expect, 0.0)).norm() < 1e-15, "index {i}");
        }
    }

    #[test]
    fn identity_layer_leaves_state_unchanged() {
        let layout = CircuitLayout::fig4(2, GateFamily::General1q).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let amps: Vec<Complex64> = (0..16).map(|_| c(rng.random(), rng.random())).collect();
        let mut st = StateVector::from_amplitudes(2, amps).unwrap();
        let before = st.clone();
        apply_layer(
            &mut st,
            &layout,
            Layer::Pre,
            &vec![0.0; layout.num_params()],
        )
        .unwrap();
        assert_eq!(st, before);
    }

    #[test]
    fn layers_preserve_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for family in [
            GateFamily::Restricted,
            GateFamily::General1q,
            GateFamily::General2q,
        ] {
            for n in 1..=3 {
                let layout = CircuitLayout::fig4(n, family).unwrap();
                let mut amps: Vec<Complex64> = (0..1 << (2 * n))
                    .map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                    .collect();
                let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
                amps.iter_mut().for_each(|a| *a /= norm);
                let mut st = StateVector::from_amplitudes(n, amps).unwrap();
                let params: Vec<f64> = (0..layout.num_params())
                    .map(|_| rng.random_range(0.0..2.0 * PI))
                    .collect();
                apply_layer(&mut st, &layout, Layer::Pre, &params).unwrap();
                apply_layer(&mut st, &layout, Layer::Post, &params).unwrap();
                assert!((st.norm_sqr() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bad_slots_are_rejected() {
        let mut layout = CircuitLayout::fig5(2, GateFamily::Restricted).unwrap();
        layout.pre[0].qubits = vec![3];
        assert!(matches!(layout.validate(), Err(Error::Usage(_))));
        let mut st = StateVector::zero(2).unwrap();
        assert!(st.apply_gate(&Gate::One(pauli(1)), &[3]).is_err());
        assert!(st.apply_gate(&Gate::One(pauli(1)), &[0]).is_err());
        let mut layout = CircuitLayout::fig5(2, GateFamily::Restricted).unwrap();
        layout.tying = vec![0, 0, 2, 2];
        assert!(layout.validate().is_err());
    }

    #[test]
    fn oracle_maps_basis_states() {
        let f = MappingTable::new(2, b("11"), ["00", "01", "01", "00"].map(b).to_vec()).unwrap();
        let u = build_oracle_permutation(&f);
        for x in 0..4usize {
            let mut amps = vec![c(0.0, 0.0); 16];
            amps[x << 2] = c(1.0, 0.0);
            let mut st = StateVector::from_amplitudes(2, amps).unwrap();
            apply_oracle(&mut st, &u).unwrap();
            let target = (x << 2) | f.table()[x].bits();
            assert_eq!(st.amplitudes()[target], c(1.0, 0.0));
            apply_oracle(&mut st, &u).unwrap();
            assert_eq!(st.amplitudes()[x << 2], c(1.0, 0.0));
        }
        let mut small = StateVector::zero(1).unwrap();
        assert!(apply_oracle(&mut small, &u).is_err());
    }

    #[test]
    fn simon_point_distribution_n2() {
        let layout = CircuitLayout::fig5(2, GateFamily::Restricted).unwrap();
        let f = enumerate_canonical_oracles(2, b("11"))
            .unwrap()
            .next()
            .unwrap();
        let d = output_distribution(&layout, &[FRAC_PI_4, FRAC_PI_4], &f).unwrap();
        let expect = [0.5, 0.0, 0.0, 0.5];
        for (p, e) in d.probs().iter().zip(expect) {
            assert!((p - e).abs() < 1e-12);
        }
        let zero = output_distribution(&layout, &[0.0, 0.0], &f).unwrap();
        assert!((zero.probs()[0] - 1.0).abs() < 1e-15);
    }

    /// Builds the whole 2^(2n) x 2^(2n) unitary and multiplies it out.
    fn dense_distribution(layout: &CircuitLayout, params: &[f64], f: &MappingTable) -> Vec<f64> {
        use nalgebra::{DMatrix, DVector};
        let n = layout.n;
        let dim = 1 << (2 * n);
        let layer_matrix = |layer: Layer| {
            let mut full = DMatrix::<Complex64>::identity(dim, dim);
            for (gate, qubits) in layout.layer_gates(layer, params).unwrap() {
                let Gate::One(m) = gate else {
                    panic!("dense oracle handles 1q gates")
                };
                // identity on all but `qubits[0]`
                let mut g = DMatrix::<Complex64>::identity(1, 1);
                for q in 1..=2 * n {
                    let factor = if q == qubits[0] {
                        DMatrix::from_fn(2, 2, |r, col| m[(r, col)])
                    } else {
                        DMatrix::identity(2, 2)
                    };
                    g = g.kronecker(&factor);
                }
                full = g * full;
            }
            full
        };
        let mut uf = DMatrix::<Complex64>::zeros(dim, dim);
        let perm = build_oracle_permutation(f);
        for i in 0..dim {
            uf[(perm.image(i), i)] = c(1.0, 0.0);
        }
        let mut psi = DVector::<Complex64>::zeros(dim);
        psi[0] = c(1.0, 0.0);
        let out = layer_matrix(Layer::Post) * uf * layer_matrix(Layer::Pre) * psi;
        let size = 1 << n;
        (0..size)
            .map(|y| (0..size).map(|b| out[y * size + b].norm_sqr()).sum())
            .collect()
    }

    #[test]
    fn statevector_agrees_with_dense_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for n in 1..=3 {
            for seed in 0..5 {
                let layout = CircuitLayout::fig4(n, GateFamily::General1q).unwrap();
                let s = BitString::from_raw(n, 1 + seed % ((1 << n) - 1));
                let f = random_oracle(n, s, seed as u64).unwrap();
                let params: Vec<f64> = (0..layout.num_params())
                    .map(|_| rng.random_range(0.0..2.0 * PI))
                    .collect();
                let fast = output_distribution(&layout, &params, &f).unwrap();
                let dense = dense_distribution(&layout, &params, &f);
                for (a, d) in fast.probs().iter().zip(dense) {
                    assert!((a - d).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn simon_point_reproduces_reference_for_every_oracle() {
        for n in 2..=3 {
            let layout = CircuitLayout::fig5(n, GateFamily::Restricted).unwrap();
            for s in BitString::all(n).skip(1) {
                let reference = simon_reference_distribution(n, s).unwrap();
                for f in enumerate_canonical_oracles(n, s).unwrap() {
                    let d = output_distribution(&layout, &[FRAC_PI_4, FRAC_PI_4], &f).unwrap();
                    assert!(d.max_abs_diff(&reference) < 1e-9);
                }
            }
        }
    }

    #[test]
    fn reference_distribution_examples() {
        let d = simon_reference_distribution(2, b("11")).unwrap();
        assert_eq!(d.probs(), &[0.5, 0.0, 0.0, 0.5]);
        let d = simon_reference_distribution(3, b("111")).unwrap();
        for y in ["000", "011", "101", "110"] {
            assert_eq!(d.prob(b(y)), 0.25);
        }
        assert_eq!(d.probs().iter().sum::<f64>(), 1.0);
        let d = simon_reference_distribution(2, b("01")).unwrap();
        assert_eq!(d.probs(), &[0.5, 0.0, 0.5, 0.0]);
        assert!(simon_reference_distribution(2, b("00")).is_err());
        assert_eq!(d.to_csv(), "y,prob\n00,0.5\n01,0\n10,0.5\n11,0\n");
    }

    #[test]
    fn global_phase_does_not_change_probabilities() {
        let layout = CircuitLayout::fig4(2, GateFamily::General1q).unwrap();
        let f = random_oracle(2, b("10"), 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let params: Vec<f64> = (0..12).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
            let base = output_distribution(&layout, &params, &f).unwrap();
            let mut shifted = params.clone();
            for block in 0..3 {
                shifted[4 * block] += rng.random_range(0.0..2.0 * PI);
            }
            let d = output_distribution(&layout, &shifted, &f).unwrap();
            assert!(d.max_abs_diff(&base) < 1e-12);
        }
    }

    #[test]
    fn distributions_are_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for family in [
            GateFamily::Restricted,
            GateFamily::General1q,
            GateFamily::General2q,
        ] {
            let layout = CircuitLayout::fig6(3, family).unwrap();
            let f = random_oracle(3, b("011"), 11).unwrap();
            let params: Vec<f64> = (0..layout.num_params())
                .map(|_| rng.random_range(0.0..2.0 * PI))
                .collect();
            let d = output_distribution(&layout, &params, &f).unwrap();
            assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(d.probs().iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn named_layouts_have_expected_tying() {
        let l4 = CircuitLayout::fig4(2, GateFamily::Restricted).unwrap();
        assert_eq!(l4.tying, vec![0, 1, 2, 2]);
        let l5 = CircuitLayout::fig5(2, GateFamily::Restricted).unwrap();
        assert_eq!(l5.tying, vec![0, 0, 1, 1]);
        let l6 = CircuitLayout::fig6(3, GateFamily::Restricted).unwrap();
        assert_eq!(l6.tying, vec![2, 0, 0, 1, 1, 1]);
        assert_eq!(l6.num_params(), 3);
        let g4 = CircuitLayout::fig4(2, GateFamily::General1q).unwrap();
        assert_eq!(g4.num_params(), 12);
        assert_eq!(
            g4.periodic_mask(),
            vec![true, false, false, false, true, false, false, false, true, false, false, false]
        );
        let g2 = CircuitLayout::fig4(3, GateFamily::General2q).unwrap();
        assert_eq!(g2.pre.len(), 2);
        assert_eq!(g2.pre[1].kind, GateKind::General1q);
        assert!(CircuitLayout::fig6(1, GateFamily::Restricted).is_err());
        let json = serde_json::to_string(&l4).unwrap();
        let back: CircuitLayout = serde_json::from_str(&json).unwrap();
        assert_eq!(back, l4);
    }
}
