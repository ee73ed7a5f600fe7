//! Joint measurability: feasibility, parent POVMs and white-noise robustness.

use serde::Serialize;

use crate::conic::{ConicCertificate, ConicProblem, SolverDiagnostics, SolverTolerances};
use crate::decomposition::{self, checked_product, tuples, Columns, STRATEGY_LIMIT};
use crate::error::{Error, Result};
use crate::hermitian::{norm3, CMatrix, HermitianOperator, C64};
use crate::measurements::{depolarize, depolarize_effect, MeasurementSet, Povm};

/// Offset above `λ_max` at which the infeasibility witness is computed.
pub const WITNESS_OFFSET: f64 = 1e-4;

/// Deterministic post-processing `D_λ(x|k) = [x = λ_k]` over tuple outcomes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PostProcessing {
    pub counts: Vec<usize>,
    /// Parent outcome `λ` as the tuple `(λ_1, …, λ_n)`, last index fastest.
    pub tuples: Vec<Vec<usize>>,
}

impl PostProcessing {
    pub fn deterministic(counts: &[usize]) -> Self {
        Self {
            counts: counts.to_vec(),
            tuples: tuples(counts),
        }
    }

    pub fn response(&self, lambda: usize, k: usize, x: usize) -> f64 {
        if self.tuples[lambda][k] == x {
            1.0
        } else {
            0.0
        }
    }

    /// Marginals `Σ_λ D_λ(x|k) G(λ)`.
    pub fn apply(&self, parent: &[HermitianOperator]) -> Vec<Vec<HermitianOperator>> {
        let dim = parent[0].dim();
        let mut out: Vec<Vec<HermitianOperator>> = self
            .counts
            .iter()
            .map(|&n| vec![HermitianOperator::zeros(dim); n])
            .collect();
        for (t, g) in self.tuples.iter().zip(parent) {
            for (k, &x) in t.iter().enumerate() {
                out[k][x] = &out[k][x] + g;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParentPovm {
    pub povm: Povm,
    pub post: PostProcessing,
    /// Largest entry of the reconstruction error against the input set.
    pub residual: f64,
}

/// Which algorithm produced [`RobustnessResult::lambda`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RobustnessMethod {
    Direct,
    Bisection,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessResult {
    pub lambda: f64,
    pub method: RobustnessMethod,
    /// Feasible certificate at `lambda` (decomposition blocks in order of the tuples).
    pub primal: ConicCertificate,
    /// Certificate at `lambda + WITNESS_OFFSET`, absent when that exceeds 1.
    pub witness: Option<ConicCertificate>,
    pub diagnostics: SolverDiagnostics,
}

fn guard(set: &MeasurementSet) -> Result<usize> {
    checked_product(&set.outcome_counts(), STRATEGY_LIMIT).map_err(|count| Error::TooManyOutcomes {
        count,
        limit: STRATEGY_LIMIT,
    })
}

fn members(set: &MeasurementSet) -> Vec<Vec<HermitianOperator>> {
    set.povms().iter().map(|p| p.effects().to_vec()).collect()
}

fn jm_model(set: &MeasurementSet, cols: &Columns) -> Result<decomposition::Model> {
    decomposition::build(set.dim(), cols, &members(set), &HermitianOperator::identity(set.dim()), None)
}

/// Decides whether a parent POVM over tuple outcomes reproduces every measurement.
/// The feasibility SDP behind [`jm_feasible`], for independent [`conic::verify`](crate::conic::verify) calls.
pub fn jm_problem(set: &MeasurementSet) -> Result<ConicProblem> {
    guard(set)?;
    Ok(jm_model(set, &Columns::deterministic(&set.outcome_counts()))?.problem)
}

pub fn jm_feasible(set: &MeasurementSet, tol: &SolverTolerances) -> Result<(bool, ConicCertificate)> {
    guard(set)?;
    let cols = Columns::deterministic(&set.outcome_counts());
    decomposition::feasible(&jm_model(set, &cols)?, tol)
}

/// Like [`jm_feasible`] with extra stochastic response columns appended.
/// `extra[j][k][x]` must be a conditional distribution in `x` for every `k`.
pub fn jm_feasible_with_columns(
    set: &MeasurementSet,
    extra: &[Vec<Vec<f64>>],
    tol: &SolverTolerances,
) -> Result<(bool, ConicCertificate)> {
    guard(set)?;
    let mut cols = Columns::deterministic(&set.outcome_counts());
    for table in extra {
        if table.len() != set.len() || table.iter().zip(set.povms()).any(|(r, p)| r.len() != p.outcomes()) {
            return Err(Error::ShapeMismatch("response table does not match the set".into()));
        }
        if table.iter().flatten().any(|&v| v < 0.0) || table.iter().any(|r| (r.iter().sum::<f64>() - 1.0).abs() > 1e-12) {
            return Err(Error::RangeError("response table is not stochastic".into()));
        }
        cols.coeffs.push(table.clone());
    }
    decomposition::feasible(&jm_model(set, &cols)?, tol)
}

fn noise_members(set: &MeasurementSet) -> Vec<Vec<HermitianOperator>> {
    set.povms()
        .iter()
        .map(|p| p.effects().iter().map(|e| depolarize_effect(e, 0.0)).collect())
        .collect()
}

/// `λ_max = sup{λ : depolarize(set, λ) is JM}` as a single SDP in `λ`.
pub fn jm_robustness(set: &MeasurementSet, tol: &SolverTolerances) -> Result<RobustnessResult> {
    guard(set)?;
    let cols = Columns::deterministic(&set.outcome_counts());
    let noise = noise_members(set);
    let model = decomposition::build(
        set.dim(),
        &cols,
        &members(set),
        &HermitianOperator::identity(set.dim()),
        Some(&noise),
    )?;
    let (lambda, primal) = decomposition::maximize(&model, tol)?;
    let witness = witness_above(lambda, |l| jm_feasible(&depolarize(set, l)?, tol))?;
    Ok(RobustnessResult {
        lambda,
        method: RobustnessMethod::Direct,
        diagnostics: primal.diagnostics,
        primal,
        witness,
    })
}

pub(crate) fn witness_above(
    lambda: f64,
    decide: impl Fn(f64) -> Result<(bool, ConicCertificate)>,
) -> Result<Option<ConicCertificate>> {
    let above = lambda + WITNESS_OFFSET;
    if above > 1.0 {
        return Ok(None);
    }
    Ok(Some(decide(above)?.1))
}

/// Cross-check of [`jm_robustness`] by bisection on [`jm_feasible`].
pub fn jm_robustness_bisection(set: &MeasurementSet, resolution: f64, tol: &SolverTolerances) -> Result<RobustnessResult> {
    guard(set)?;
    let lambda = decomposition::bisect(resolution, |l| Ok(jm_feasible(&depolarize(set, l)?, tol)?.0))?;
    // certificate at the feasible side of the bracket
    let lo = (lambda - resolution).max(0.0);
    let primal = jm_feasible(&depolarize(set, lo)?, tol)?.1;
    let witness = witness_above(lambda, |l| jm_feasible(&depolarize(set, l)?, tol))?;
    Ok(RobustnessResult {
        lambda,
        method: RobustnessMethod::Bisection,
        diagnostics: primal.diagnostics,
        primal,
        witness,
    })
}

/// Clips negative eigenvalues so the returned effects are exactly PSD.
fn psd_part(op: &HermitianOperator) -> HermitianOperator {
    let eig = nalgebra::SymmetricEigen::new(op.matrix().clone());
    let d = CMatrix::from_diagonal(&eig.eigenvalues.map(|l| C64::new(l.max(0.0), 0.0)));
    HermitianOperator::from_matrix_unchecked(&eig.eigenvectors * d * eig.eigenvectors.adjoint())
}

/// `S^{-1/2} G S^{-1/2}` with `S = Σ G`, so the effects sum to 𝟙 to rounding.
fn complete(effects: Vec<HermitianOperator>) -> Result<Vec<HermitianOperator>> {
    let sum = effects.iter().fold(HermitianOperator::zeros(effects[0].dim()), |acc, g| &acc + g);
    let eig = nalgebra::SymmetricEigen::new(sum.matrix().clone());
    if eig.eigenvalues.min() <= 0.5 {
        return Err(Error::NumericalFailure(format!("parent effects sum to a singular operator ({:.3e})", eig.eigenvalues.min())));
    }
    let d = CMatrix::from_diagonal(&eig.eigenvalues.map(|l| C64::new(l.sqrt().recip(), 0.0)));
    let w = &eig.eigenvectors * d * eig.eigenvectors.adjoint();
    Ok(effects
        .iter()
        .map(|g| {
            let m = &w * g.matrix() * &w;
            HermitianOperator::from_matrix_unchecked((&m + m.adjoint()) * C64::new(0.5, 0.0))
        })
        .collect())
}

/// Verified parent POVM of `depolarize(set, λ)`.
pub fn parent_povm(set: &MeasurementSet, lambda: f64, tol: &SolverTolerances) -> Result<ParentPovm> {
    let noisy = depolarize(set, lambda)?;
    let (ok, cert) = jm_feasible(&noisy, tol)?;
    if !ok {
        return Err(Error::NotJointlyMeasurable { lambda });
    }
    let blocks = cert.primal.expect("feasible certificates carry a primal").blocks;
    let effects = complete(blocks.iter().map(psd_part).collect())?;
    let post = PostProcessing::deterministic(&noisy.outcome_counts());
    let marg = post.apply(&effects);
    let residual = marg
        .iter()
        .zip(noisy.povms())
        .flat_map(|(row, p)| row.iter().zip(p.effects()).map(|(a, b)| a.max_abs_diff(b)))
        .fold(0.0, f64::max);
    if residual > 1e-7 {
        return Err(Error::NumericalFailure(format!("parent reconstruction residual {residual:.3e}")));
    }
    Ok(ParentPovm {
        povm: Povm::new(effects)?,
        post,
        residual,
    })
}

/// Analytic JM test for two unbiased dichotomic qubit measurements with
/// effect Bloch vectors `b₁`, `b₂`: JM iff `‖b₁+b₂‖ + ‖b₁−b₂‖ ≤ 2`.
pub fn qubit_pair_unbiased_criterion(b1: [f64; 3], b2: [f64; 3]) -> Result<bool> {
    for b in [b1, b2] {
        if norm3(&b) > 1.0 + 1e-9 {
            return Err(Error::RangeError(format!("Bloch vector {b:?} longer than 1")));
        }
    }
    let sum = [b1[0] + b2[0], b1[1] + b2[1], b1[2] + b2[2]];
    let diff = [b1[0] - b2[0], b1[1] - b2[1], b1[2] - b2[2]];
    Ok(norm3(&sum) + norm3(&diff) <= 2.0 + 1e-12)
}
