//! Shared SDP builder for `Σ_λ D_λ(x|k) X_λ = M_{x|k}` with `X_λ ⪰ 0`.
//!
//! Joint measurability uses it with `M = A_k(x)` and steering with
//! `M = σ_{x|k}`. The robustness variant replaces the right-hand side by
//! `ν M + (1−ν) N` and maximizes `ν`.

use crate::conic::{self, BlockId, ConicCertificate, ConicProblem, Equality, SolverTolerances, Status};
use crate::error::{Error, Result};
use crate::hermitian::HermitianOperator;

/// Parent outcome guard shared by both decision problems.
pub const STRATEGY_LIMIT: usize = 4096;

/// Response functions `D_λ(x|k)`, one table per parent outcome `λ`.
#[derive(Debug, Clone)]
pub(crate) struct Columns {
    /// `coeffs[λ][k][x]`.
    pub coeffs: Vec<Vec<Vec<f64>>>,
}

/// Mixed-radix enumeration of `Π_k {0..counts[k]}`, last index fastest.
pub(crate) fn tuples(counts: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = counts.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut cur = vec![0; counts.len()];
    for _ in 0..total {
        out.push(cur.clone());
        for k in (0..counts.len()).rev() {
            cur[k] += 1;
            if cur[k] < counts[k] {
                break;
            }
            cur[k] = 0;
        }
    }
    out
}

/// Product of `counts`, or `Err(product)` when it exceeds `limit`.
pub(crate) fn checked_product(counts: &[usize], limit: usize) -> std::result::Result<usize, usize> {
    let mut p: usize = 1;
    for &c in counts {
        p = p.saturating_mul(c);
    }
    if p > limit {
        Err(p)
    } else {
        Ok(p)
    }
}

impl Columns {
    pub fn deterministic(counts: &[usize]) -> Self {
        let coeffs = tuples(counts)
            .into_iter()
            .map(|t| {
                counts
                    .iter()
                    .zip(&t)
                    .map(|(&n, &xk)| (0..n).map(|x| if x == xk { 1.0 } else { 0.0 }).collect())
                    .collect()
            })
            .collect();
        Self { coeffs }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }
}

pub(crate) struct Model {
    pub problem: ConicProblem,
}

/// `members[k][x]` are the targets; `total` is the common `Σ_x members[k][x]`.
/// With `noise`, the rows become `Σ D X − ν(M − N) = N` and `ν ∈ [0, 1]` is maximized.
pub(crate) fn build(
    dim: usize,
    cols: &Columns,
    members: &[Vec<HermitianOperator>],
    total: &HermitianOperator,
    noise: Option<&[Vec<HermitianOperator>]>,
) -> Result<Model> {
    let mut problem = ConicProblem::new();
    let blocks: Vec<BlockId> = (0..cols.len()).map(|l| problem.add_block(format!("X[{l}]"), dim)).collect();
    let nu = match noise {
        Some(_) => Some(problem.add_scalar("nu", 0.0, Some(1.0))?),
        None => None,
    };
    for (k, row) in members.iter().enumerate() {
        for (x, m) in row.iter().enumerate() {
            let target = match noise {
                Some(n) => n[k][x].clone(),
                None => m.clone(),
            };
            let mut eq = Equality::new(format!("k={k},x={x}"), target);
            for (l, &b) in blocks.iter().enumerate() {
                let c = cols.coeffs[l][k][x];
                if c != 0.0 {
                    eq = eq.block(b, c);
                }
            }
            if let (Some(n), Some(nu)) = (noise, nu) {
                eq = eq.scalar(nu, &n[k][x] - m);
            }
            problem.add_equality(eq)?;
        }
    }
    let mut eq = Equality::new("total", total.clone());
    for &b in &blocks {
        eq = eq.block(b, 1.0);
    }
    problem.add_equality(eq)?;
    if let Some(nu) = nu {
        problem.maximize_scalar(nu)?;
    }
    Ok(Model { problem })
}

pub(crate) fn feasible(model: &Model, tol: &SolverTolerances) -> Result<(bool, ConicCertificate)> {
    let cert = conic::solve(&model.problem, tol)?;
    match cert.status {
        Status::Feasible => Ok((true, cert)),
        Status::Infeasible => Ok((false, cert)),
        Status::NumericalFailure => Err(numerical_failure(&cert)),
    }
}

pub(crate) fn numerical_failure(cert: &ConicCertificate) -> Error {
    let d = &cert.diagnostics;
    Error::NumericalFailure(format!(
        "solver stalled after {} iterations (primal {:.2e}, dual {:.2e}, gap {:.2e})",
        d.iterations, d.primal_infeasibility, d.dual_infeasibility, d.relative_gap
    ))
}

/// Maximizes `ν`. Returns the optimum and the certificate holding the blocks.
pub(crate) fn maximize(model: &Model, tol: &SolverTolerances) -> Result<(f64, ConicCertificate)> {
    let cert = conic::solve(&model.problem, tol)?;
    match (cert.status, cert.objective) {
        (Status::Feasible, Some(v)) => Ok((v.clamp(0.0, 1.0), cert)),
        _ => Err(numerical_failure(&cert)),
    }
}

/// Largest `λ ∈ [0, 1]` with `pred(λ)` true, assuming monotonicity, to `resolution`.
pub(crate) fn bisect(resolution: f64, mut pred: impl FnMut(f64) -> Result<bool>) -> Result<f64> {
    if pred(1.0)? {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > resolution {
        let mid = 0.5 * (lo + hi);
        if pred(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
