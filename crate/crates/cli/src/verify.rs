use std::io::Write;

use nalgebra::Matrix2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simon_learn::gf2::{dot2, solve_for_secret};
use simon_learn::optimize::simon_point;
use simon_learn::oracle::{
    build_oracle_permutation, count_mapping_tables, count_oracles_per_secret,
    enumerate_canonical_oracles, is_simon_function, random_oracle, MAX_ENUMERATION_N,
};
use simon_learn::pipeline::OraclesPerSecret;
use simon_learn::simulator::{
    general_one_qubit_gate, general_two_qubit_gate, output_distribution, pauli, restricted_gate,
    simon_reference_distribution,
};
use simon_learn::{BitString, CircuitLayout, GateFamily, Gf2Solution, MappingTable, TrainingSet};

use crate::{CliError, RunConfig};

const GATE_TOL: f64 = 1e-10;
const DIST_TOL: f64 = 1e-9;
const GATE_SAMPLES: usize = 200;
const GF2_SYSTEMS: usize = 2000;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &'static str, failure: Option<String>, ok: impl Into<String>) -> Self {
        match failure {
            Some(detail) => Self {
                name,
                passed: false,
                detail,
            },
            None => Self {
                name,
                passed: true,
                detail: ok.into(),
            },
        }
    }
}

/// Explicit oracles from the config, otherwise every canonical oracle for
/// `n <= 4` and the configured sample above that.
fn oracles_under_test(cfg: &RunConfig) -> Result<Vec<MappingTable>, CliError> {
    if !cfg.oracles.is_empty() {
        return Ok(cfg.oracles.clone());
    }
    let mut out = Vec::new();
    for s in cfg.secrets() {
        if cfg.n <= MAX_ENUMERATION_N {
            out.extend(enumerate_canonical_oracles(cfg.n, s)?);
        } else {
            let k = match cfg.oracles_per_secret {
                OraclesPerSecret::Count(k) => k,
                OraclesPerSecret::All => unreachable!("rejected by config check"),
            };
            for i in 0..k as u64 {
                out.push(random_oracle(cfg.n, s, cfg.seed.wrapping_add(i))?);
            }
        }
    }
    Ok(out)
}

fn max_abs(m: &Matrix2<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn check_simon_functions(oracles: &[MappingTable]) -> CheckResult {
    let bad: Vec<String> = oracles
        .iter()
        .filter(|f| !is_simon_function(f))
        .map(|f| {
            let entries: Vec<String> = f.table().iter().map(|y| y.to_string()).collect();
            format!("[{}] for s={}", entries.join(","), f.secret())
        })
        .collect();
    let failure =
        (!bad.is_empty()).then(|| format!("{} invalid table(s), first {}", bad.len(), bad[0]));
    CheckResult::new(
        "is_simon_function",
        failure,
        format!("{} tables", oracles.len()),
    )
}

fn check_simon_reference(n: usize, oracles: &[MappingTable]) -> Result<CheckResult, CliError> {
    let layout = CircuitLayout::fig4(n, GateFamily::Restricted)?;
    let params = simon_point(layout.num_params());
    let mut worst = 0.0f64;
    let mut checked = 0;
    for f in oracles.iter().filter(|f| is_simon_function(f)) {
        let got = output_distribution(&layout, &params, f)?;
        worst = worst.max(got.max_abs_diff(&simon_reference_distribution(n, f.secret())?));
        checked += 1;
    }
    let failure =
        (worst > DIST_TOL).then(|| format!("max deviation {worst:e} over {checked} oracles"));
    Ok(CheckResult::new(
        "simon_reference",
        failure,
        format!("{checked} oracles, max deviation {worst:e}"),
    ))
}

fn check_oracle_involution(oracles: &[MappingTable]) -> CheckResult {
    let bad = oracles.iter().position(|f| {
        let p = build_oracle_permutation(f);
        !(p.is_permutation() && p.is_involution())
    });
    let failure = bad.map(|i| format!("oracle #{i} does not lift to an involution"));
    CheckResult::new(
        "oracle_involution",
        failure,
        format!("{} oracles", oracles.len()),
    )
}

fn check_oracle_counts(n: usize) -> Result<CheckResult, CliError> {
    let per = count_oracles_per_secret(n)?;
    let total = count_mapping_tables(n)?;
    if n > MAX_ENUMERATION_N {
        return Ok(CheckResult::new(
            "oracle_counts",
            None,
            format!("skipped enumeration above n={MAX_ENUMERATION_N}; formula gives {per} per secret, {total} total"),
        ));
    }
    let mut sum = 0u128;
    let mut failure = None;
    for s in TrainingSet::all_secrets(n) {
        let count = enumerate_canonical_oracles(n, s)?.count() as u128;
        if count != per && failure.is_none() {
            failure = Some(format!("s={s}: enumerated {count}, formula {per}"));
        }
        sum += count;
    }
    if sum != total && failure.is_none() {
        failure = Some(format!("enumerated {sum} in total, formula {total}"));
    }
    Ok(CheckResult::new(
        "oracle_counts",
        failure,
        format!("{per} per secret, {total} total"),
    ))
}

fn check_gates(rng: &mut ChaCha8Rng) -> [CheckResult; 3] {
    let id2 = Matrix2::<Complex64>::identity();
    let mut unitary = 0.0f64;
    let mut involution = 0.0f64;
    let mut closed_form = 0.0f64;
    for k in 0..GATE_SAMPLES {
        let theta = rng.random_range(-10.0..10.0);
        let g = restricted_gate(theta);
        unitary = unitary.max(max_abs(&(g.adjoint() * g - id2)));
        involution = involution.max(max_abs(&(g * g - id2)));

        // Every eighth sample sits near the removable singularity at zero rotation.
        let scale = if k % 8 == 0 { 1e-9 } else { 3.0 };
        let mut alpha = [0.0; 4];
        alpha[0] = rng.random_range(-3.0..3.0);
        for a in alpha.iter_mut().skip(1) {
            *a = rng.random_range(-scale..scale);
        }
        let u = general_one_qubit_gate(&alpha);
        unitary = unitary.max(max_abs(&(u.adjoint() * u - id2)));
        let mut h = Matrix2::<Complex64>::zeros();
        for (j, a) in alpha.iter().enumerate() {
            h += pauli(j) * Complex64::new(0.0, *a);
        }
        closed_form = closed_form.max(max_abs(&(h.exp() - u)));

        let beta: [f64; 16] = std::array::from_fn(|_| rng.random_range(-1.5..1.5));
        let v = general_two_qubit_gate(&beta);
        let dev = (v.adjoint() * v - nalgebra::Matrix4::<Complex64>::identity())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        unitary = unitary.max(dev);
    }
    [
        CheckResult::new(
            "gate_unitarity",
            (unitary > GATE_TOL).then(|| format!("max |U'U - I| = {unitary:e}")),
            format!(
                "{} samples per family, max deviation {unitary:e}",
                GATE_SAMPLES
            ),
        ),
        CheckResult::new(
            "restricted_involution",
            (involution > GATE_TOL).then(|| format!("max |G^2 - I| = {involution:e}")),
            format!("max deviation {involution:e}"),
        ),
        CheckResult::new(
            "one_qubit_closed_form",
            (closed_form > GATE_TOL).then(|| format!("max deviation from expm {closed_form:e}")),
            format!("max deviation from expm {closed_form:e}"),
        ),
    ]
}

fn brute_force_secret(rows: &[BitString], n: usize) -> Gf2Solution {
    let sols: Vec<BitString> = BitString::all(n)
        .skip(1)
        .filter(|&c| rows.iter().all(|&r| !dot2(r, c).expect("same width")))
        .collect();
    match sols.len() {
        0 => Gf2Solution::NoNonzeroSolution,
        1 => Gf2Solution::UniqueNonzero(sols[0]),
        k => Gf2Solution::Ambiguous((k + 1).trailing_zeros() as usize),
    }
}

fn check_gf2(rng: &mut ChaCha8Rng) -> Result<CheckResult, CliError> {
    for _ in 0..GF2_SYSTEMS {
        let n = rng.random_range(1..=4usize);
        let m = rng.random_range(1..=2 * n);
        let rows: Vec<BitString> = (0..m)
            .map(|_| BitString::new(n, rng.random_range(0..1u32 << n)))
            .collect::<Result<_, _>>()?;
        let fast = solve_for_secret(&rows, n);
        let slow = brute_force_secret(&rows, n);
        if fast != slow {
            return Ok(CheckResult::new(
                "gf2_solver",
                Some(format!(
                    "rows {rows:?}: solver {fast:?}, exhaustive {slow:?}"
                )),
                "",
            ));
        }
    }
    Ok(CheckResult::new(
        "gf2_solver",
        None,
        format!("{GF2_SYSTEMS} random systems"),
    ))
}

/// Runs the full invariant suite for `cfg.n`.
pub fn run_checks(cfg: &RunConfig) -> Result<Vec<CheckResult>, CliError> {
    let oracles = oracles_under_test(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = vec![
        check_simon_reference(cfg.n, &oracles)?,
        check_simon_functions(&oracles),
        check_oracle_counts(cfg.n)?,
    ];
    out.extend(check_gates(&mut rng));
    out.push(check_oracle_involution(&oracles));
    out.push(check_gf2(&mut rng)?);
    Ok(out)
}

/// Prints a pass/fail table; fails with the names of the failing checks.
pub fn cmd_verify(cfg: &RunConfig, w: &mut dyn Write) -> Result<(), CliError> {
    let results = run_checks(cfg)?;
    writeln!(w, "verify n={} config_hash={}", cfg.n, cfg.hash())?;
    for r in &results {
        writeln!(
            w,
            "{:<24} {}  {}",
            r.name,
            if r.passed { "PASS" } else { "FAIL" },
            r.detail
        )?;
    }
    let failed: Vec<&str> = results
        .iter()
        .filter(|r| !r.passed)
        .map(|r| r.name)
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Check(failed.join(", ")))
    }
}
