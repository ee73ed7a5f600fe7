//! Assemblages, local-hidden-state models and steering robustness.

use serde::Serialize;
use serde_json::{json, Value};

use crate::conic::{ConicCertificate, ConicProblem, SolverTolerances};
use crate::decomposition::{self, checked_product, Columns, STRATEGY_LIMIT};
use crate::error::{Error, Result};
use crate::hermitian::{reduce_raw, HermitianOperator, PSD_TOL};
use crate::incompatibility::{witness_above, RobustnessMethod, RobustnessResult};
use crate::json;
use crate::measurements::MeasurementSet;

/// Bob's subnormalized conditional states `σ_{x|k}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assemblage {
    dim_b: usize,
    members: Vec<Vec<HermitianOperator>>,
}

impl Assemblage {
    /// Validates positivity, no-signaling and normalization at [`PSD_TOL`].
    pub fn new(members: Vec<Vec<HermitianOperator>>) -> Result<Self> {
        Self::with_tolerance(members, PSD_TOL)
    }

    pub fn with_tolerance(members: Vec<Vec<HermitianOperator>>, tol: f64) -> Result<Self> {
        let first = members
            .first()
            .and_then(|row| row.first())
            .ok_or_else(|| Error::InvalidAssemblage("no members".into()))?;
        let dim_b = first.dim();
        let mut marginal: Option<HermitianOperator> = None;
        for (k, row) in members.iter().enumerate() {
            if row.is_empty() {
                return Err(Error::InvalidAssemblage(format!("measurement {k} has no outcomes")));
            }
            let mut sum = HermitianOperator::zeros(dim_b);
            for (x, m) in row.iter().enumerate() {
                if m.dim() != dim_b {
                    return Err(Error::DimensionMismatch(format!("member ({k}, {x}) has dim {}", m.dim())));
                }
                let ev = m.min_eigenvalue();
                if ev < -tol {
                    return Err(Error::InvalidAssemblage(format!("member ({k}, {x}) has eigenvalue {ev:.3e}")));
                }
                sum = &sum + m;
            }
            match &marginal {
                None => {
                    let t = sum.trace();
                    if (t - 1.0).abs() > tol {
                        return Err(Error::InvalidAssemblage(format!("marginal has trace {t}")));
                    }
                    marginal = Some(sum);
                }
                Some(rho) => {
                    let dev = rho.max_abs_diff(&sum);
                    if dev > tol {
                        return Err(Error::InvalidAssemblage(format!(
                            "no-signaling violated by measurement {k} (deviation {dev:.3e})"
                        )));
                    }
                }
            }
        }
        Ok(Self { dim_b, members })
    }

    pub(crate) fn from_members_unchecked(members: Vec<Vec<HermitianOperator>>) -> Self {
        Self {
            dim_b: members[0][0].dim(),
            members,
        }
    }

    pub fn dim_b(&self) -> usize {
        self.dim_b
    }

    pub fn members(&self) -> &[Vec<HermitianOperator>] {
        &self.members
    }

    pub fn member(&self, k: usize, x: usize) -> &HermitianOperator {
        &self.members[k][x]
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn outcome_counts(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }

    /// `ρ_B = Σ_x σ_{x|0}`.
    pub fn rho_b(&self) -> HermitianOperator {
        self.members[0].iter().fold(HermitianOperator::zeros(self.dim_b), |acc, m| &acc + m)
    }

    /// `t_{x|k} = tr σ_{x|k}`.
    pub fn probabilities(&self) -> Vec<Vec<f64>> {
        self.members.iter().map(|row| row.iter().map(|m| m.trace()).collect()).collect()
    }

    /// `λσ_{x|k} + (1−λ)·t_{x|k}·ρ_B`.
    pub fn depolarize(&self, lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::RangeError(format!("noise parameter {lambda} outside [0, 1]")));
        }
        let noise = self.noise_members();
        let members = self
            .members
            .iter()
            .zip(&noise)
            .map(|(row, nrow)| row.iter().zip(nrow).map(|(m, n)| &m.scale(lambda) + &n.scale(1.0 - lambda)).collect())
            .collect();
        Ok(Self {
            dim_b: self.dim_b,
            members,
        })
    }

    fn noise_members(&self) -> Vec<Vec<HermitianOperator>> {
        let rho = self.rho_b();
        self.members
            .iter()
            .map(|row| row.iter().map(|m| rho.scale(m.trace())).collect())
            .collect()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.members
            .iter()
            .flatten()
            .zip(other.members.iter().flatten())
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "dimB": self.dim_b,
            "outcomes": self.outcome_counts(),
            "members": self.members.iter().map(|row| row.iter().map(json::matrix_to_value).collect::<Vec<_>>()).collect::<Vec<_>>(),
        })
    }

    /// Decodes `{"dimB", "outcomes", "members"}` and validates.
    pub fn from_json(v: &Value) -> Result<Self> {
        let dim_b = json::as_usize(json::field(v, "dimB", "$")?, "dimB")?;
        let outcomes = json::as_array(json::field(v, "outcomes", "$")?, "outcomes")?;
        let rows = json::as_array(json::field(v, "members", "$")?, "members")?;
        if outcomes.len() != rows.len() {
            return Err(json::err(
                "outcomes",
                format!("{} outcome counts for {} measurements", outcomes.len(), rows.len()),
            ));
        }
        let mut members = Vec::with_capacity(rows.len());
        for (k, row) in rows.iter().enumerate() {
            let rp = format!("members[{k}]");
            let n = json::as_usize(&outcomes[k], &format!("outcomes[{k}]"))?;
            let entries = json::as_array(row, &rp)?;
            if entries.len() != n {
                return Err(json::err(&rp, format!("{} members, outcomes says {n}", entries.len())));
            }
            let mut ops = Vec::with_capacity(n);
            for (x, e) in entries.iter().enumerate() {
                let ep = format!("{rp}[{x}]");
                let op = json::matrix_from_value(e, &ep)?;
                if op.dim() != dim_b {
                    return Err(json::err(&ep, format!("member has dim {}, expected {dim_b}", op.dim())));
                }
                ops.push(op);
            }
            members.push(ops);
        }
        Self::new(members).map_err(|e| json::err("members", e))
    }
}

/// Checks a bipartite density operator and returns Bob's dimension.
pub(crate) fn check_state(state: &HermitianOperator, d_a: usize) -> Result<usize> {
    let n = state.dim();
    if !n.is_multiple_of(d_a) {
        return Err(Error::DimensionMismatch(format!("state dim {n} not divisible by dA = {d_a}")));
    }
    let t = state.trace();
    if (t - 1.0).abs() > PSD_TOL {
        return Err(Error::InvalidState(format!("trace {t}")));
    }
    let ev = state.min_eigenvalue();
    if ev < -PSD_TOL {
        return Err(Error::InvalidState(format!("eigenvalue {ev:.3e}")));
    }
    Ok(n / d_a)
}

/// `σ_{x|k} = tr_A[(A_k(x) ⊗ 𝟙) ρ]` without validation of the output.
pub(crate) fn conditional_states(state: &HermitianOperator, alice: &MeasurementSet, d_b: usize) -> Vec<Vec<HermitianOperator>> {
    let d_a = alice.dim();
    let id_b = HermitianOperator::identity(d_b);
    alice
        .povms()
        .iter()
        .map(|p| {
            p.effects()
                .iter()
                .map(|e| {
                    let prod = e.tensor(&id_b).product(state);
                    HermitianOperator::from_matrix_unchecked(reduce_raw(&prod, &[d_a, d_b], &[1]).expect("dims checked"))
                })
                .collect()
        })
        .collect()
}

/// Assemblage prepared on Bob's side when Alice measures `alice` on `state`.
pub fn induced_assemblage(state: &HermitianOperator, alice: &MeasurementSet) -> Result<Assemblage> {
    let d_b = check_state(state, alice.dim())?;
    Assemblage::new(conditional_states(state, alice, d_b))
}

fn guard(asm: &Assemblage) -> Result<()> {
    checked_product(&asm.outcome_counts(), STRATEGY_LIMIT)
        .map(|_| ())
        .map_err(|count| Error::TooManyStrategies {
            count,
            limit: STRATEGY_LIMIT,
        })
}

/// The feasibility SDP behind [`lhs_feasible`].
pub fn lhs_problem(asm: &Assemblage) -> Result<ConicProblem> {
    guard(asm)?;
    let cols = Columns::deterministic(&asm.outcome_counts());
    Ok(decomposition::build(asm.dim_b, &cols, &asm.members, &asm.rho_b(), None)?.problem)
}

/// Decides whether `asm` admits a local-hidden-state model; steerable iff not.
pub fn lhs_feasible(asm: &Assemblage, tol: &SolverTolerances) -> Result<(bool, ConicCertificate)> {
    guard(asm)?;
    let cols = Columns::deterministic(&asm.outcome_counts());
    let model = decomposition::build(asm.dim_b, &cols, &asm.members, &asm.rho_b(), None)?;
    decomposition::feasible(&model, tol)
}

/// `λ_max = sup{λ : asm.depolarize(λ) has an LHS model}` as one SDP.
pub fn steering_robustness(asm: &Assemblage, tol: &SolverTolerances) -> Result<RobustnessResult> {
    guard(asm)?;
    let cols = Columns::deterministic(&asm.outcome_counts());
    let noise = asm.noise_members();
    let model = decomposition::build(asm.dim_b, &cols, &asm.members, &asm.rho_b(), Some(&noise))?;
    let (lambda, primal) = decomposition::maximize(&model, tol)?;
    let witness = witness_above(lambda, |l| lhs_feasible(&asm.depolarize(l)?, tol))?;
    Ok(RobustnessResult {
        lambda,
        method: RobustnessMethod::Direct,
        diagnostics: primal.diagnostics,
        primal,
        witness,
    })
}

/// Cross-check of [`steering_robustness`] by bisection on [`lhs_feasible`].
pub fn steering_robustness_bisection(asm: &Assemblage, resolution: f64, tol: &SolverTolerances) -> Result<RobustnessResult> {
    guard(asm)?;
    let lambda = decomposition::bisect(resolution, |l| Ok(lhs_feasible(&asm.depolarize(l)?, tol)?.0))?;
    let primal = lhs_feasible(&asm.depolarize((lambda - resolution).max(0.0))?, tol)?.1;
    let witness = witness_above(lambda, |l| lhs_feasible(&asm.depolarize(l)?, tol))?;
    Ok(RobustnessResult {
        lambda,
        method: RobustnessMethod::Bisection,
        diagnostics: primal.diagnostics,
        primal,
        witness,
    })
}
