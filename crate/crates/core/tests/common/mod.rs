//! Reference computations shared by the integration tests. None of them call
//! into the library's own oracles or solvers.
#![allow(dead_code, clippy::needless_range_loop)]

use polyshap::{Coalition, Game};

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Shapley values from the subset formula with factorial weights.
pub fn subset_shapley(game: &dyn Game) -> Vec<f64> {
    let d = game.num_players();
    let values: Vec<f64> = (0..1u128 << d)
        .map(|bits| game.evaluate(&Coalition::from_bits(d, bits).unwrap()).unwrap())
        .collect();
    let total = factorial(d);
    let weights: Vec<f64> = (0..d).map(|s| factorial(s) * factorial(d - s - 1) / total).collect();
    let mut phi = vec![0.0; d];
    for bits in 0..1usize << d {
        let s = bits.count_ones() as usize;
        for (i, p) in phi.iter_mut().enumerate() {
            if bits & (1 << i) == 0 {
                *p += weights[s] * (values[bits | (1 << i)] - values[bits]);
            }
        }
    }
    phi
}

/// Shapley values as the average marginal contribution over all orderings.
pub fn permutation_shapley(game: &dyn Game) -> Vec<f64> {
    let d = game.num_players();
    assert!(d <= 7, "all orderings only for small d");
    let mut order: Vec<usize> = (0..d).collect();
    let mut phi = vec![0.0; d];
    let mut count = 0.0;
    permute(&mut order, 0, &mut |perm| {
        let mut s = Coalition::empty(d).unwrap();
        let mut prev = game.evaluate(&s).unwrap();
        for &i in perm {
            s = s.with(i);
            let v = game.evaluate(&s).unwrap();
            phi[i] += v - prev;
            prev = v;
        }
        count += 1.0;
    });
    phi.iter().map(|p| p / count).collect()
}

fn permute(v: &mut Vec<usize>, k: usize, visit: &mut dyn FnMut(&[usize])) {
    if k == v.len() {
        visit(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, visit);
        v.swap(k, i);
    }
}

/// Solves a square system by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Minimizes `‖Xβ − y‖²` subject to `Σβ = c` through the KKT system.
/// `x` is row-major and must have full column rank.
pub fn kkt_constrained_lstsq(x: &[Vec<f64>], y: &[f64], c: f64) -> Vec<f64> {
    let p = x[0].len();
    let mut a = vec![vec![0.0; p + 1]; p + 1];
    let mut b = vec![0.0; p + 1];
    for (row, &yi) in x.iter().zip(y) {
        for i in 0..p {
            for j in 0..p {
                a[i][j] += row[i] * row[j];
            }
            b[i] += row[i] * yi;
        }
    }
    for i in 0..p {
        a[i][p] = 1.0;
        a[p][i] = 1.0;
    }
    b[p] = c;
    let mut sol = gauss_solve(a, b);
    sol.truncate(p);
    sol
}

/// Shapley values from a 2-additive representation: each pair term is split
/// evenly between its two players.
pub fn split_pairs(d: usize, terms: &[String], values: &[f64]) -> Vec<f64> {
    let mut phi = vec![0.0; d];
    for (t, v) in terms.iter().zip(values) {
        let members: Vec<usize> = Coalition::parse_bitstring(t).unwrap().members().collect();
        assert!(members.len() <= 2, "not a 2-additive representation");
        for i in &members {
            phi[*i] += v / members.len() as f64;
        }
    }
    phi
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
