//! Feasibility and linear-objective problems over Hermitian PSD blocks.
//!
//! [`solve`] lowers a [`ConicProblem`] to real standard form, compresses the
//! constraint rows to an orthonormal basis and runs a primal–dual interior
//! point method. Pure feasibility problems are solved through the margin
//! problem `max t  s.t.  A(X' + t·E) = b, X' ⪰ 0` whose dual yields a Farkas
//! witness when `t < 0`. Every returned status is checked by [`verify`], which
//! recomputes residuals from the certificate alone.

mod ipm;
mod lower;
mod problem;

use nalgebra::DVector;
use serde::Serialize;

pub use problem::{BlockId, BlockVar, ConicProblem, Equality, LinearMap, Objective, ScalarId, ScalarVar, Term};

use crate::error::{Error, Result};
use crate::hermitian::{hermitian_eigenvalues, CMatrix, HermitianOperator, C64};
use lower::{hmat, hvec, lower, row_basis, StandardForm};

/// Margins below this are reported as marginal by [`verify`].
pub const MARGINAL_BAND: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverTolerances {
    /// Maximum equality violation and eigenvalue undershoot accepted as feasible.
    pub feasibility: f64,
    /// Relative duality gap for objective problems.
    pub gap: f64,
    /// Minimum normalized separating value of an infeasibility witness.
    pub witness: f64,
    pub max_iter: usize,
}

impl Default for SolverTolerances {
    fn default() -> Self {
        Self {
            feasibility: 1e-8,
            gap: 1e-8,
            witness: 1e-7,
            max_iter: 120,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Feasible,
    Infeasible,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrimalSolution {
    pub blocks: Vec<HermitianOperator>,
    pub scalars: Vec<f64>,
}

/// Hermitian multipliers, one per equality, certifying infeasibility.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualWitness {
    pub multipliers: Vec<HermitianOperator>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residuals {
    pub max_equality_violation: f64,
    pub min_block_eigenvalue: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SolverDiagnostics {
    pub iterations: usize,
    pub rows: usize,
    pub independent_rows: usize,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub relative_gap: f64,
    /// Optimal `t` of the margin problem (feasibility mode only).
    pub margin: Option<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConicCertificate {
    pub status: Status,
    pub primal: Option<PrimalSolution>,
    pub dual: Option<DualWitness>,
    pub residuals: Option<Residuals>,
    /// Value of the maximized objective at `primal`.
    pub objective: Option<f64>,
    /// Matching dual bound.
    pub dual_objective: Option<f64>,
    pub diagnostics: SolverDiagnostics,
}

impl ConicCertificate {
    fn failure(diagnostics: SolverDiagnostics) -> Self {
        Self {
            status: Status::NumericalFailure,
            primal: None,
            dual: None,
            residuals: None,
            objective: None,
            dual_objective: None,
            diagnostics,
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.status == Status::Feasible
    }

    /// SHA-256 of the JSON serialization, hex encoded.
    pub fn digest(&self) -> String {
        crate::json::digest(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub passed: bool,
    pub checked: Status,
    pub max_equality_violation: Option<f64>,
    pub min_block_eigenvalue: Option<f64>,
    pub max_bound_violation: Option<f64>,
    /// Normalized separating value `min_{x∈bounds} Σ g_j x_j − Σ⟨T_e, Y_e⟩`.
    pub witness_margin: Option<f64>,
    /// Normalized largest negative eigenvalue of the multiplier images.
    pub witness_cone_defect: Option<f64>,
    pub marginal: bool,
    pub notes: Vec<String>,
}

impl ConicProblem {
    /// Lowered problem in a self-describing JSON layout.
    pub fn debug_json(&self) -> serde_json::Value {
        lower::debug_json(self)
    }
}

fn identity_point(form: &StandardForm) -> DVector<f64> {
    // A·E where E is the identity in every block and 1 in every LP slot
    let mut v = &form.a_lp * DVector::from_element(form.n_lp(), 1.0);
    for (ab, &n) in form.a_blocks.iter().zip(&form.block_dims) {
        v += ab * hvec(&CMatrix::identity(n, n));
    }
    v
}

fn primal_from_lowered(
    problem: &ConicProblem,
    slots: &[lower::ScalarSlot],
    x_blocks: &[CMatrix],
    x_lp: &DVector<f64>,
    shift: f64,
) -> PrimalSolution {
    let blocks = x_blocks
        .iter()
        .map(|b| {
            let n = b.nrows();
            HermitianOperator::from_matrix_unchecked(b + CMatrix::identity(n, n) * C64::new(shift, 0.0))
        })
        .collect();
    let scalars = problem
        .scalars
        .iter()
        .zip(slots)
        .map(|(s, slot)| s.lower + x_lp[slot.shift] + shift)
        .collect();
    PrimalSolution { blocks, scalars }
}

fn witness_from_rows(problem: &ConicProblem, offsets: &[usize], w: &DVector<f64>) -> DualWitness {
    let multipliers = problem
        .equalities
        .iter()
        .zip(offsets)
        .map(|(eq, &off)| {
            let d = eq.dim();
            HermitianOperator::from_matrix_unchecked(hmat(&w.as_slice()[off..off + d * d], d))
        })
        .collect();
    DualWitness { multipliers }
}

fn normalize_witness(problem: &ConicProblem, witness: DualWitness) -> DualWitness {
    let q = witness_quantities(problem, &witness);
    let norm = q.norm;
    if norm > 0.0 && norm.is_finite() {
        DualWitness {
            multipliers: witness.multipliers.iter().map(|y| y.scale(1.0 / norm)).collect(),
        }
    } else {
        witness
    }
}

/// Decides feasibility (no objective) or maximizes the objective.
pub fn solve(problem: &ConicProblem, tol: &SolverTolerances) -> Result<ConicCertificate> {
    let lowered = lower(problem);
    let basis = row_basis(&lowered.form);
    let mut diagnostics = SolverDiagnostics {
        rows: lowered.form.rows(),
        independent_rows: basis.transform.nrows(),
        ..Default::default()
    };
    let b_norm = lowered.form.b.norm();
    let res_norm = basis.b_residual.norm();
    if res_norm > 1e-9 * (1.0 + b_norm) {
        // b lies outside the range of A: the residual itself separates
        let w = -&basis.b_residual / (res_norm * res_norm);
        let witness = normalize_witness(problem, witness_from_rows(problem, &lowered.eq_row_offsets, &w));
        diagnostics.converged = true;
        let cert = ConicCertificate {
            status: Status::Infeasible,
            primal: None,
            dual: Some(witness),
            residuals: None,
            objective: None,
            dual_objective: None,
            diagnostics,
        };
        return finalize(problem, cert, tol);
    }
    let form = lowered.form.transformed(&basis.transform);
    let settings = ipm::IpmSettings {
        tol: (tol.feasibility.min(tol.gap) * 0.1).max(1e-13),
        max_iter: tol.max_iter,
    };

    if problem.objective.is_some() {
        let sol = ipm::solve(&form, settings);
        diagnostics.iterations = sol.iterations;
        diagnostics.primal_infeasibility = sol.primal_infeasibility;
        diagnostics.dual_infeasibility = sol.dual_infeasibility;
        diagnostics.relative_gap = sol.relative_gap;
        diagnostics.converged = sol.converged;
        let primal = primal_from_lowered(problem, &lowered.slots, &sol.x_blocks, &sol.x_lp, 0.0);
        let residuals = primal_residuals(problem, &primal);
        let gap_ok = sol.relative_gap <= tol.gap;
        if gap_ok && residuals.max_equality_violation <= tol.feasibility && residuals.min_block_eigenvalue >= -tol.feasibility {
            let cert = ConicCertificate {
                status: Status::Feasible,
                objective: Some(objective_value(problem, &primal)),
                dual_objective: Some(-sol.dual_objective),
                residuals: Some(residuals_summary(&residuals)),
                primal: Some(primal),
                dual: None,
                diagnostics,
            };
            return finalize(problem, cert, tol);
        }
        // Distinguish infeasibility from a numerical stall.
        let mut feas_problem = problem.clone();
        feas_problem.objective = None;
        let feas = solve(&feas_problem, tol)?;
        if feas.status == Status::Infeasible {
            return Ok(ConicCertificate { diagnostics, ..feas });
        }
        return Ok(ConicCertificate::failure(diagnostics));
    }

    // margin problem: variables (X', s) with X = X' + (1 − s)·E, minimize s
    let ae = identity_point(&form);
    let mut phase = form.clone();
    let n_lp = form.n_lp();
    phase.a_lp = form.a_lp.clone().insert_column(n_lp, 0.0);
    phase.a_lp.set_column(n_lp, &(-&ae));
    phase.b = &form.b - &ae;
    phase.c_lp = DVector::zeros(n_lp + 1);
    phase.c_lp[n_lp] = 1.0;
    phase.c_offset = 0.0;
    let sol = ipm::solve(&phase, settings);
    let t = 1.0 - sol.x_lp[n_lp];
    diagnostics.iterations = sol.iterations;
    diagnostics.primal_infeasibility = sol.primal_infeasibility;
    diagnostics.dual_infeasibility = sol.dual_infeasibility;
    diagnostics.relative_gap = sol.relative_gap;
    diagnostics.margin = Some(t);
    diagnostics.converged = sol.converged;

    if t >= -tol.feasibility {
        let x_lp = sol.x_lp.rows(0, n_lp).into_owned();
        let primal = primal_from_lowered(problem, &lowered.slots, &sol.x_blocks, &x_lp, t);
        let residuals = primal_residuals(problem, &primal);
        let cert = ConicCertificate {
            status: Status::Feasible,
            residuals: Some(residuals_summary(&residuals)),
            primal: Some(primal),
            dual: None,
            objective: None,
            dual_objective: None,
            diagnostics,
        };
        let report = verify(problem, &cert, tol)?;
        if report.passed {
            return Ok(cert);
        }
    }
    if t < 0.0 {
        let y_orig = basis.transform.transpose() * &sol.y;
        let w = -y_orig;
        let witness = normalize_witness(problem, witness_from_rows(problem, &lowered.eq_row_offsets, &w));
        let cert = ConicCertificate {
            status: Status::Infeasible,
            primal: None,
            dual: Some(witness),
            residuals: None,
            objective: None,
            dual_objective: None,
            diagnostics,
        };
        let report = verify(problem, &cert, tol)?;
        if report.passed {
            return Ok(cert);
        }
        // Inside the marginal band the solver's call stands; verify() reports it as marginal.
        let sign_only = SolverTolerances {
            witness: f64::MIN_POSITIVE,
            ..*tol
        };
        if report.marginal && verify(problem, &cert, &sign_only)?.passed {
            return Ok(cert);
        }
    }
    Ok(ConicCertificate::failure(diagnostics))
}

fn finalize(problem: &ConicProblem, cert: ConicCertificate, tol: &SolverTolerances) -> Result<ConicCertificate> {
    let report = verify(problem, &cert, tol)?;
    if report.passed {
        Ok(cert)
    } else {
        Ok(ConicCertificate::failure(cert.diagnostics))
    }
}

fn objective_value(problem: &ConicProblem, primal: &PrimalSolution) -> f64 {
    problem.objective.as_ref().map_or(0.0, |obj| {
        obj.blocks.iter().map(|(b, c)| c.inner(&primal.blocks[b.0])).sum::<f64>()
            + obj.scalars.iter().map(|(s, c)| c * primal.scalars[s.0]).sum::<f64>()
    })
}

struct PrimalCheck {
    max_equality_violation: f64,
    min_block_eigenvalue: f64,
    max_bound_violation: f64,
}

fn residuals_summary(c: &PrimalCheck) -> Residuals {
    Residuals {
        max_equality_violation: c.max_equality_violation,
        min_block_eigenvalue: c.min_block_eigenvalue,
    }
}

fn primal_residuals(problem: &ConicProblem, primal: &PrimalSolution) -> PrimalCheck {
    let mut max_eq = 0.0_f64;
    for eq in &problem.equalities {
        let mut lhs = -eq.target.matrix().clone();
        for term in &eq.terms {
            match term {
                Term::Block { var, coeff, map } => {
                    lhs += map.apply(primal.blocks[var.0].matrix()) * C64::new(*coeff, 0.0);
                }
                Term::Scalar { var, matrix } => {
                    lhs += matrix.matrix() * C64::new(primal.scalars[var.0], 0.0);
                }
            }
        }
        max_eq = max_eq.max(lhs.iter().map(|z| z.norm()).fold(0.0, f64::max));
    }
    let min_eig = primal
        .blocks
        .iter()
        .map(|b| hermitian_eigenvalues(b.matrix())[0])
        .fold(f64::INFINITY, f64::min);
    let bound = problem
        .scalars
        .iter()
        .zip(&primal.scalars)
        .map(|(s, &x)| (s.lower - x).max(s.upper.map_or(0.0, |u| x - u)).max(0.0))
        .fold(0.0, f64::max);
    PrimalCheck {
        max_equality_violation: max_eq,
        min_block_eigenvalue: if min_eig.is_finite() { min_eig } else { 0.0 },
        max_bound_violation: bound,
    }
}

struct WitnessCheck {
    /// Unnormalized separating value.
    margin: f64,
    /// Unnormalized largest negative eigenvalue over the block images.
    cone_defect: f64,
    norm: f64,
    unbounded_scalar: bool,
}

fn witness_quantities(problem: &ConicProblem, witness: &DualWitness) -> WitnessCheck {
    let mut z: Vec<CMatrix> = problem.blocks.iter().map(|b| CMatrix::zeros(b.dim, b.dim)).collect();
    let mut g = vec![0.0; problem.scalars.len()];
    let mut target_value = 0.0;
    let mut y_scale = 0.0_f64;
    for (eq, y) in problem.equalities.iter().zip(&witness.multipliers) {
        target_value += eq.target.inner(y);
        y_scale = y_scale.max(y.max_abs());
        for term in &eq.terms {
            match term {
                Term::Block { var, coeff, map } => {
                    z[var.0] += map.adjoint(y.matrix()) * C64::new(*coeff, 0.0);
                }
                Term::Scalar { var, matrix } => g[var.0] += matrix.inner(y),
            }
        }
    }
    let mut cone_defect = 0.0_f64;
    let mut norm = 0.0;
    for zb in &z {
        let ev = hermitian_eigenvalues(&((zb + zb.adjoint()) * C64::new(0.5, 0.0)));
        cone_defect = cone_defect.max(-ev[0]);
        norm += ev.iter().map(|e| e.abs()).sum::<f64>();
    }
    norm += g.iter().map(|v| v.abs()).sum::<f64>();
    if norm < 1e-12 * y_scale.max(1e-300) {
        norm = y_scale;
    }
    let mut lower_sum = 0.0;
    let mut unbounded = false;
    for (s, &gj) in problem.scalars.iter().zip(&g) {
        if gj >= 0.0 {
            lower_sum += gj * s.lower;
        } else if let Some(u) = s.upper {
            lower_sum += gj * u;
        } else if gj < -1e-12 * norm {
            unbounded = true;
        }
    }
    WitnessCheck {
        margin: lower_sum - target_value,
        cone_defect,
        norm,
        unbounded_scalar: unbounded,
    }
}

/// Recomputes every residual of `cert` against `problem` from scratch.
pub fn verify(problem: &ConicProblem, cert: &ConicCertificate, tol: &SolverTolerances) -> Result<VerificationReport> {
    let mut report = VerificationReport {
        passed: false,
        checked: cert.status,
        max_equality_violation: None,
        min_block_eigenvalue: None,
        max_bound_violation: None,
        witness_margin: None,
        witness_cone_defect: None,
        marginal: false,
        notes: Vec::new(),
    };
    match cert.status {
        Status::Feasible => {
            let primal = cert
                .primal
                .as_ref()
                .ok_or_else(|| Error::ShapeMismatch("feasible certificate without primal".into()))?;
            if primal.blocks.len() != problem.blocks.len() || primal.scalars.len() != problem.scalars.len() {
                return Err(Error::ShapeMismatch(format!(
                    "primal has {} blocks / {} scalars, problem has {} / {}",
                    primal.blocks.len(),
                    primal.scalars.len(),
                    problem.blocks.len(),
                    problem.scalars.len()
                )));
            }
            for (b, var) in primal.blocks.iter().zip(&problem.blocks) {
                if b.dim() != var.dim {
                    return Err(Error::ShapeMismatch(format!(
                        "block `{}` has dim {}, expected {}",
                        var.name,
                        b.dim(),
                        var.dim
                    )));
                }
            }
            let c = primal_residuals(problem, primal);
            report.passed = c.max_equality_violation <= tol.feasibility
                && c.min_block_eigenvalue >= -tol.feasibility
                && c.max_bound_violation <= tol.feasibility;
            if !report.passed {
                report.notes.push(format!(
                    "residuals exceed tolerance {:.1e}: equality {:.3e}, min eigenvalue {:.3e}, bounds {:.3e}",
                    tol.feasibility, c.max_equality_violation, c.min_block_eigenvalue, c.max_bound_violation
                ));
            }
            if c.min_block_eigenvalue.abs() < MARGINAL_BAND {
                report.marginal = true;
                report.notes.push("solution lies on the cone boundary".into());
            }
            report.max_equality_violation = Some(c.max_equality_violation);
            report.min_block_eigenvalue = Some(c.min_block_eigenvalue);
            report.max_bound_violation = Some(c.max_bound_violation);
        }
        Status::Infeasible => {
            let witness = cert
                .dual
                .as_ref()
                .ok_or_else(|| Error::ShapeMismatch("infeasible certificate without witness".into()))?;
            if witness.multipliers.len() != problem.equalities.len() {
                return Err(Error::ShapeMismatch(format!(
                    "{} multipliers for {} equalities",
                    witness.multipliers.len(),
                    problem.equalities.len()
                )));
            }
            for (y, eq) in witness.multipliers.iter().zip(&problem.equalities) {
                if y.dim() != eq.dim() {
                    return Err(Error::ShapeMismatch(format!("multiplier for `{}` has wrong dim", eq.label)));
                }
            }
            let q = witness_quantities(problem, witness);
            let norm = q.norm.max(1e-300);
            let margin = q.margin / norm;
            let defect = q.cone_defect / norm;
            report.passed = !q.unbounded_scalar && defect <= tol.feasibility && margin >= tol.witness;
            if margin.abs() < MARGINAL_BAND {
                report.marginal = true;
                report.notes.push(format!("marginal separation {margin:.3e}"));
            }
            if q.unbounded_scalar {
                report.notes.push("witness pairs negatively with an unbounded scalar".into());
            }
            report.witness_margin = Some(margin);
            report.witness_cone_defect = Some(defect);
        }
        Status::NumericalFailure => {
            report.notes.push("numerical failure carries nothing to verify".into());
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> SolverTolerances {
        SolverTolerances::default()
    }

    #[test]
    fn forced_identity() {
        let mut p = ConicProblem::new();
        let x = p.add_block("X", 2);
        p.add_equality(Equality::new("X = 1", HermitianOperator::identity(2)).block(x, 1.0))
            .unwrap();
        let cert = solve(&p, &tol()).unwrap();
        assert_eq!(cert.status, Status::Feasible);
        let sol = &cert.primal.as_ref().unwrap().blocks[0];
        assert!(sol.max_abs_diff(&HermitianOperator::identity(2)) < 1e-9);
        assert!(verify(&p, &cert, &tol()).unwrap().passed);
    }

    #[test]
    fn sign_obstruction() {
        let mut p = ConicProblem::new();
        let x = p.add_block("x", 1);
        p.add_equality(Equality::new("x = -1", HermitianOperator::identity(1).scale(-1.0)).block(x, 1.0))
            .unwrap();
        let cert = solve(&p, &tol()).unwrap();
        assert_eq!(cert.status, Status::Infeasible);
        let report = verify(&p, &cert, &tol()).unwrap();
        assert!(report.passed);
        assert!(report.witness_margin.unwrap() > 0.1);
    }

    #[test]
    fn corrupted_primal_fails_verification() {
        let mut p = ConicProblem::new();
        let x = p.add_block("X", 2);
        p.add_equality(Equality::new("X = 1", HermitianOperator::identity(2)).block(x, 1.0))
            .unwrap();
        let mut cert = solve(&p, &tol()).unwrap();
        let primal = cert.primal.as_mut().unwrap();
        let mut m = primal.blocks[0].matrix().clone();
        m[(0, 0)] += C64::new(0.1, 0.0);
        primal.blocks[0] = HermitianOperator::from_matrix_unchecked(m);
        let report = verify(&p, &cert, &tol()).unwrap();
        assert!(!report.passed);
        assert!((report.max_equality_violation.unwrap() - 0.1).abs() < 1e-8);
    }

    #[test]
    fn status_flip_is_caught() {
        let mut p = ConicProblem::new();
        let x = p.add_block("x", 1);
        p.add_equality(Equality::new("x = 2", HermitianOperator::identity(1).scale(2.0)).block(x, 1.0))
            .unwrap();
        let cert = solve(&p, &tol()).unwrap();
        assert!(cert.is_feasible());
        // A witness that does not separate.
        let fake = ConicCertificate {
            status: Status::Infeasible,
            dual: Some(DualWitness {
                multipliers: vec![HermitianOperator::identity(1)],
            }),
            ..cert.clone()
        };
        assert!(!verify(&p, &fake, &tol()).unwrap().passed);
        let missing = ConicCertificate { dual: None, ..fake };
        assert!(matches!(verify(&p, &missing, &tol()), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn linear_inconsistency_gives_witness() {
        let mut p = ConicProblem::new();
        let x = p.add_block("x", 1);
        p.add_equality(Equality::new("x = 1", HermitianOperator::identity(1)).block(x, 1.0))
            .unwrap();
        p.add_equality(Equality::new("x = 2", HermitianOperator::identity(1).scale(2.0)).block(x, 1.0))
            .unwrap();
        let cert = solve(&p, &tol()).unwrap();
        assert_eq!(cert.status, Status::Infeasible);
        assert!(verify(&p, &cert, &tol()).unwrap().passed);
    }

    #[test]
    fn maximize_scalar_with_bounds() {
        // max λ s.t. X = diag(1 − 2λ, 1), X ⪰ 0, λ ∈ [0, 1]  → λ = 1/2
        let mut p = ConicProblem::new();
        let x = p.add_block("X", 2);
        let lam = p.add_scalar("lambda", 0.0, Some(1.0)).unwrap();
        p.add_equality(
            Equality::new("X", HermitianOperator::identity(2))
                .block(x, 1.0)
                .scalar(lam, HermitianOperator::from_real_diagonal(&[2.0, 0.0])),
        )
        .unwrap();
        p.maximize_scalar(lam).unwrap();
        let cert = solve(&p, &tol()).unwrap();
        assert_eq!(cert.status, Status::Feasible);
        assert!((cert.objective.unwrap() - 0.5).abs() < 1e-8);
        assert!((cert.dual_objective.unwrap() - 0.5).abs() < 1e-7);
    }

    #[test]
    fn complex_off_diagonal_constraint() {
        // X ⪰ 0, X_00 = X_11 = 1, X_01 = i·a: feasible iff |a| ≤ 1
        for (a, feasible) in [(0.9, true), (1.1, false)] {
            let mut p = ConicProblem::new();
            let x = p.add_block("X", 2);
            let target = HermitianOperator::new(CMatrix::from_row_slice(
                2,
                2,
                &[C64::new(1.0, 0.0), C64::new(0.0, a), C64::new(0.0, -a), C64::new(1.0, 0.0)],
            ))
            .unwrap();
            p.add_equality(Equality::new("X", target).block(x, 1.0)).unwrap();
            let cert = solve(&p, &tol()).unwrap();
            assert_eq!(cert.is_feasible(), feasible, "a = {a}");
            assert_ne!(cert.status, Status::NumericalFailure);
        }
    }

    #[test]
    fn partial_trace_constraint() {
        // Ω on C²⊗C² with tr_B Ω = 𝟙/2 and tr_A Ω = |0⟩⟨0| is feasible (product).
        let mut p = ConicProblem::new();
        let om = p.add_block("Omega", 4);
        p.add_equality(
            Equality::new("trB", HermitianOperator::identity(2).scale(0.5)).mapped(
                om,
                1.0,
                LinearMap::Reduce {
                    dims: vec![2, 2],
                    keep: vec![0],
                },
            ),
        )
        .unwrap();
        p.add_equality(Equality::new("trA", HermitianOperator::basis_projector(2, 0)).mapped(
            om,
            1.0,
            LinearMap::Reduce {
                dims: vec![2, 2],
                keep: vec![1],
            },
        ))
        .unwrap();
        let cert = solve(&p, &tol()).unwrap();
        assert_eq!(cert.status, Status::Feasible);
        let json = p.debug_json();
        assert_eq!(json["rows"], 8);
        assert!(!json["constraints"].as_array().unwrap().is_empty());
    }

    #[test]
    fn digest_is_stable() {
        let mut p = ConicProblem::new();
        let x = p.add_block("X", 2);
        p.add_equality(Equality::new("X = 1", HermitianOperator::identity(2)).block(x, 1.0))
            .unwrap();
        let a = solve(&p, &tol()).unwrap();
        let b = solve(&p, &tol()).unwrap();
        assert_eq!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
    }
}
