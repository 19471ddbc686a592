//! Reference computations written without the library's simulator or solver,
//! for checking it from the outside. Bitstrings are plain integers with
//! qubit 1 as the most significant bit.

use nalgebra::DMatrix;

pub fn parity(x: usize) -> bool {
    x.count_ones() % 2 == 1
}

/// Uniform `2^-(n-1)` on `{y : y.s = 0}`, zero elsewhere.
pub fn reference_distribution(n: usize, s: usize) -> Vec<f64> {
    let p = 1.0 / (1u64 << (n - 1)) as f64;
    (0..1usize << n)
        .map(|y| if parity(y & s) { 0.0 } else { p })
        .collect()
}

pub fn binomial(n: u128, k: u128) -> u128 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// `(2^n - 1) C(2^n, 2^(n-1))`.
pub fn mapping_table_count(n: u32) -> u128 {
    ((1u128 << n) - 1) * binomial(1 << n, 1 << (n - 1))
}

/// The nonzero `s` orthogonal to every row, when there is exactly one.
pub fn exhaustive_secret(rows: &[usize], n: usize) -> Option<usize> {
    let c: Vec<usize> = (1..1usize << n)
        .filter(|&s| rows.iter().all(|&r| !parity(r & s)))
        .collect();
    (c.len() == 1).then(|| c[0])
}

/// First-register distribution of `(H^n (x) I) O_f (H^n (x) I) |0>` from dense matrices.
pub fn dense_simon_distribution(n: usize, table: &[usize]) -> Vec<f64> {
    let h = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, -1.0]) / 2f64.sqrt();
    let mut hn = DMatrix::<f64>::identity(1, 1);
    for _ in 0..n {
        hn = hn.kronecker(&h);
    }
    let layer = hn.kronecker(&DMatrix::<f64>::identity(1 << n, 1 << n));
    let dim = 1 << (2 * n);
    let mut oracle = DMatrix::<f64>::zeros(dim, dim);
    for x in 0..1usize << n {
        for y in 0..1usize << n {
            oracle[((x << n) | (y ^ table[x]), (x << n) | y)] = 1.0;
        }
    }
    let zero = DMatrix::<f64>::from_fn(dim, 1, |i, _| if i == 0 { 1.0 } else { 0.0 });
    let state = &layer * &oracle * &layer * zero;
    (0..1usize << n)
        .map(|x| {
            (0..1usize << n)
                .map(|y| state[((x << n) | y, 0)].powi(2))
                .sum()
        })
        .collect()
}

/// Probability that `J` i.i.d. draws from `dist` leave exactly `{0, s}` orthogonal to all of them.
pub fn brute_force_success(n: usize, dist: &[f64], j: usize, s: usize) -> f64 {
    let size = 1usize << n;
    let mut total = 0.0;
    let mut tuple = vec![0usize; j];
    for idx in 0..size.pow(j as u32) {
        let mut rest = idx;
        let mut p = 1.0;
        for t in tuple.iter_mut() {
            *t = rest % size;
            rest /= size;
            p *= dist[*t];
        }
        if exhaustive_secret(&tuple, n) == Some(s) {
            total += p;
        }
    }
    total
}
