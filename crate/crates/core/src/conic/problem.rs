use serde::Serialize;

use crate::error::{Error, Result};
use crate::hermitian::{expand_raw, partial_transpose_raw, reduce_raw, CMatrix, HermitianOperator};

/// Handle to a Hermitian PSD block variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct BlockId(pub usize);

/// Handle to a bounded real scalar variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct ScalarId(pub usize);

/// Real-linear map applied to a block variable inside an equality.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum LinearMap {
    Identity,
    Transpose,
    /// Partial trace over the subsystems not in `keep`, output ordered as `keep`.
    Reduce { dims: Vec<usize>, keep: Vec<usize> },
    PartialTranspose { dims: Vec<usize>, system: usize },
}

impl LinearMap {
    pub fn output_dim(&self, input_dim: usize) -> Result<usize> {
        match self {
            LinearMap::Identity | LinearMap::Transpose => Ok(input_dim),
            LinearMap::Reduce { dims, keep } => {
                check_factorization(dims, input_dim)?;
                if keep.iter().any(|&k| k >= dims.len()) {
                    return Err(Error::DimensionMismatch(format!("kept subsystems {keep:?} out of range")));
                }
                Ok(keep.iter().map(|&k| dims[k]).product())
            }
            LinearMap::PartialTranspose { dims, system } => {
                check_factorization(dims, input_dim)?;
                if *system >= dims.len() {
                    return Err(Error::DimensionMismatch(format!("subsystem {system} out of range")));
                }
                Ok(input_dim)
            }
        }
    }

    pub fn apply(&self, x: &CMatrix) -> CMatrix {
        match self {
            LinearMap::Identity => x.clone(),
            LinearMap::Transpose => x.transpose(),
            LinearMap::Reduce { dims, keep } => reduce_raw(x, dims, keep).expect("validated map"),
            LinearMap::PartialTranspose { dims, system } => {
                partial_transpose_raw(x, dims, *system).expect("validated map")
            }
        }
    }

    /// Adjoint with respect to `Re tr(A B)`.
    pub fn adjoint(&self, y: &CMatrix) -> CMatrix {
        match self {
            LinearMap::Identity => y.clone(),
            LinearMap::Transpose => y.transpose(),
            LinearMap::Reduce { dims, keep } => expand_raw(y, dims, keep).expect("validated map"),
            LinearMap::PartialTranspose { dims, system } => {
                partial_transpose_raw(y, dims, *system).expect("validated map")
            }
        }
    }
}

fn check_factorization(dims: &[usize], n: usize) -> Result<()> {
    if dims.iter().product::<usize>() != n {
        return Err(Error::DimensionMismatch(format!("dims {dims:?} do not multiply to {n}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockVar {
    pub name: String,
    pub dim: usize,
}

/// Real scalar with `lower ≤ x ≤ upper` (upper optional).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalarVar {
    pub name: String,
    pub lower: f64,
    pub upper: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Term {
    Block { var: BlockId, coeff: f64, map: LinearMap },
    Scalar { var: ScalarId, matrix: HermitianOperator },
}

/// `Σ terms = target`, a Hermitian matrix equation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equality {
    pub label: String,
    pub terms: Vec<Term>,
    pub target: HermitianOperator,
}

impl Equality {
    pub fn new(label: impl Into<String>, target: HermitianOperator) -> Self {
        Self {
            label: label.into(),
            terms: Vec::new(),
            target,
        }
    }

    pub fn block(mut self, var: BlockId, coeff: f64) -> Self {
        self.terms.push(Term::Block {
            var,
            coeff,
            map: LinearMap::Identity,
        });
        self
    }

    pub fn mapped(mut self, var: BlockId, coeff: f64, map: LinearMap) -> Self {
        self.terms.push(Term::Block { var, coeff, map });
        self
    }

    pub fn scalar(mut self, var: ScalarId, matrix: HermitianOperator) -> Self {
        self.terms.push(Term::Scalar { var, matrix });
        self
    }

    pub fn dim(&self) -> usize {
        self.target.dim()
    }
}

/// Real-linear functional to maximize: `Σ Re tr(C_b X_b) + Σ c_j x_j`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Objective {
    pub blocks: Vec<(BlockId, HermitianOperator)>,
    pub scalars: Vec<(ScalarId, f64)>,
}

/// Feasibility or maximization problem over Hermitian PSD blocks and
/// bounded scalars with Hermitian affine equalities. Immutable once solved.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ConicProblem {
    pub(crate) blocks: Vec<BlockVar>,
    pub(crate) scalars: Vec<ScalarVar>,
    pub(crate) equalities: Vec<Equality>,
    pub(crate) objective: Option<Objective>,
}

impl ConicProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_block(&mut self, name: impl Into<String>, dim: usize) -> BlockId {
        assert!(dim >= 1, "block dimension must be positive");
        self.blocks.push(BlockVar { name: name.into(), dim });
        BlockId(self.blocks.len() - 1)
    }

    pub fn add_scalar(&mut self, name: impl Into<String>, lower: f64, upper: Option<f64>) -> Result<ScalarId> {
        if !lower.is_finite() || upper.is_some_and(|u| !u.is_finite() || u < lower) {
            return Err(Error::RangeError(format!("invalid scalar bounds [{lower}, {upper:?}]")));
        }
        self.scalars.push(ScalarVar {
            name: name.into(),
            lower,
            upper,
        });
        Ok(ScalarId(self.scalars.len() - 1))
    }

    pub fn add_equality(&mut self, eq: Equality) -> Result<()> {
        let d = eq.dim();
        for term in &eq.terms {
            match term {
                Term::Block { var, map, coeff } => {
                    let block = self
                        .blocks
                        .get(var.0)
                        .ok_or_else(|| Error::ShapeMismatch(format!("unknown block {}", var.0)))?;
                    let out = map.output_dim(block.dim)?;
                    if out != d || !coeff.is_finite() {
                        return Err(Error::DimensionMismatch(format!(
                            "equality `{}`: term on `{}` has output dim {out}, target dim {d}",
                            eq.label, block.name
                        )));
                    }
                }
                Term::Scalar { var, matrix } => {
                    if var.0 >= self.scalars.len() {
                        return Err(Error::ShapeMismatch(format!("unknown scalar {}", var.0)));
                    }
                    if matrix.dim() != d {
                        return Err(Error::DimensionMismatch(format!(
                            "equality `{}`: scalar coefficient of dim {}, target dim {d}",
                            eq.label,
                            matrix.dim()
                        )));
                    }
                }
            }
        }
        self.equalities.push(eq);
        Ok(())
    }

    pub fn set_objective(&mut self, objective: Objective) -> Result<()> {
        for (b, c) in &objective.blocks {
            let block = self
                .blocks
                .get(b.0)
                .ok_or_else(|| Error::ShapeMismatch(format!("objective references unknown block {}", b.0)))?;
            if block.dim != c.dim() {
                return Err(Error::DimensionMismatch(format!(
                    "objective coefficient for `{}` has dim {}",
                    block.name,
                    c.dim()
                )));
            }
        }
        if let Some((s, _)) = objective.scalars.iter().find(|(s, _)| s.0 >= self.scalars.len()) {
            return Err(Error::ShapeMismatch(format!("objective references unknown scalar {}", s.0)));
        }
        self.objective = Some(objective);
        Ok(())
    }

    pub fn maximize_scalar(&mut self, var: ScalarId) -> Result<()> {
        self.set_objective(Objective {
            blocks: Vec::new(),
            scalars: vec![(var, 1.0)],
        })
    }

    pub fn blocks(&self) -> &[BlockVar] {
        &self.blocks
    }

    pub fn scalars(&self) -> &[ScalarVar] {
        &self.scalars
    }

    pub fn equalities(&self) -> &[Equality] {
        &self.equalities
    }

    pub fn objective(&self) -> Option<&Objective> {
        self.objective.as_ref()
    }

    /// Number of real equality rows before redundancy elimination.
    pub fn num_rows(&self) -> usize {
        self.equalities.iter().map(|e| e.dim() * e.dim()).sum::<usize>()
            + self.scalars.iter().filter(|s| s.upper.is_some()).count()
    }
}
