//! Weighted design matrices and the efficiency-constrained least-squares solve.
//!
//! The constraint `⟨φ, 1⟩ = c` is removed by writing `φ = Pβ + 1·c/d′` with
//! `P = I − 11ᵀ/d′`, which turns the problem into an ordinary least-squares
//! fit of `X̃P` against `ỹ − X̃1·c/d′`. The minimum-norm solution is taken, so
//! rank-deficient designs still produce an answer.

use faer::Mat;

use crate::coalition::{shapley_weight, Coalition};
use crate::error::{Error, Result};
use crate::frontier::InteractionFrontier;
use crate::games::Game;
use crate::sampling::{SampleBatch, SampleRow};

#[derive(Debug, Clone, PartialEq)]
pub struct DesignSystem {
    /// `X̃`, one row per sampled coalition, one column per term.
    pub matrix: Mat<f64>,
    /// `ỹ`, weighted and centered by `ν(∅)`.
    pub target: Vec<f64>,
    /// Singletons in player order, then the frontier terms.
    pub columns: Vec<Coalition>,
    /// `ν(D) − ν(∅)`.
    pub constraint_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub coefficients: Vec<f64>,
    /// Numerical rank of the projected design `X̃P`.
    pub rank: usize,
    /// `rank < d′ − 1`.
    pub rank_deficient: bool,
    /// `‖X̃φ̂ − ỹ‖₂`.
    pub residual_norm: f64,
    /// Singular values at or below this were treated as zero.
    pub cutoff: f64,
}

pub fn build_design(batch: &SampleBatch, frontier: &InteractionFrontier) -> Result<DesignSystem> {
    let d = batch.num_players();
    if frontier.num_players() != d {
        return Err(Error::DimensionMismatch { expected: d, found: frontier.num_players() });
    }
    Ok(design_from_rows(&batch.rows, frontier, batch.empty_value, batch.full_value))
}

fn design_from_rows(rows: &[SampleRow], frontier: &InteractionFrontier, empty: f64, full: f64) -> DesignSystem {
    let columns = frontier.columns();
    let matrix = Mat::from_fn(rows.len(), columns.len(), |i, j| {
        if columns[j].is_subset_of(&rows[i].coalition) {
            rows[i].weight
        } else {
            0.0
        }
    });
    let target = rows.iter().map(|row| row.weight * (row.value - empty)).collect();
    DesignSystem { matrix, target, columns, constraint_value: full - empty }
}

pub fn solve_constrained(sys: &DesignSystem) -> Result<SolveReport> {
    constrained_lstsq(&sys.matrix, &sys.target, sys.constraint_value)
}

/// `argmin ‖Xφ − y‖₂` subject to `Σφ = c`, minimum-norm when `XP` is rank deficient.
pub fn constrained_lstsq(x: &Mat<f64>, y: &[f64], c: f64) -> Result<SolveReport> {
    let (m, n) = (x.nrows(), x.ncols());
    if m == 0 || n == 0 {
        return Err(Error::InvalidArgument(format!("empty system ({m}x{n})")));
    }
    if y.len() != m {
        return Err(Error::DimensionMismatch { expected: m, found: y.len() });
    }
    if (0..n).any(|j| (0..m).any(|i| !x[(i, j)].is_finite())) {
        return Err(Error::NonFinite("design matrix"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("target vector"));
    }
    if !c.is_finite() {
        return Err(Error::NonFinite("constraint value"));
    }

    let shift = c / n as f64;
    let row_sums: Vec<f64> = (0..m).map(|i| (0..n).map(|j| x[(i, j)]).sum()).collect();
    // X P = X − (X1/n) 1ᵀ
    let xp = Mat::from_fn(m, n, |i, j| x[(i, j)] - row_sums[i] / n as f64);
    let rhs: Vec<f64> = (0..m).map(|i| y[i] - row_sums[i] * shift).collect();

    let svd = xp.thin_svd().map_err(|e| Error::InvalidArgument(format!("SVD failed: {e:?}")))?;
    let (u, v, sigma) = (svd.U(), svd.V(), svd.S().column_vector());
    let sigma_max = (0..sigma.nrows()).map(|k| sigma[k]).fold(0.0f64, f64::max);
    let cutoff = sigma_max * m.max(n) as f64 * f64::EPSILON;
    let mut beta = vec![0.0; n];
    let mut rank = 0;
    for k in 0..sigma.nrows() {
        let s = sigma[k];
        if s > cutoff {
            rank += 1;
            let coef = (0..m).map(|i| u[(i, k)] * rhs[i]).sum::<f64>() / s;
            for (j, b) in beta.iter_mut().enumerate() {
                *b += coef * v[(j, k)];
            }
        }
    }

    // β is orthogonal to the null space of X P, which contains 1, so Pβ = β
    // up to rounding; apply P explicitly and pin the sum.
    let mean = beta.iter().sum::<f64>() / n as f64;
    let mut phi: Vec<f64> = beta.iter().map(|b| b - mean + shift).collect();
    let drift = (c - phi.iter().sum::<f64>()) / n as f64;
    phi.iter_mut().for_each(|p| *p += drift);

    let residual_norm = (0..m)
        .map(|i| ((0..n).map(|j| x[(i, j)] * phi[j]).sum::<f64>() - y[i]).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(SolveReport {
        coefficients: phi,
        rank,
        rank_deficient: rank + 1 < n,
        residual_norm,
        cutoff,
    })
}

/// The exact representation: every coalition with `0 < |S| < d`, weighted by `sqrt(μ)`.
pub fn solve_exact_full<G: Game + ?Sized>(game: &G, frontier: &InteractionFrontier) -> Result<SolveReport> {
    let d = game.num_players();
    if d > 14 {
        return Err(Error::TooLarge { d, max: 14 });
    }
    if frontier.num_players() != d {
        return Err(Error::DimensionMismatch { expected: d, found: frontier.num_players() });
    }
    if d < 2 {
        return Err(Error::InvalidDimension("exact representation needs d >= 2".into()));
    }
    let empty = game.evaluate(&Coalition::empty(d)?)?;
    let full = game.evaluate(&Coalition::full(d)?)?;
    let mut rows = Vec::with_capacity((1 << d) - 2);
    for bits in 1..(1u128 << d) - 1 {
        let coalition = Coalition::from_bits(d, bits)?;
        let weight = shapley_weight(coalition.size(), d)?.sqrt();
        rows.push(SampleRow { coalition, weight, value: game.evaluate(&coalition)? });
    }
    solve_constrained(&design_from_rows(&rows, frontier, empty, full))
}
