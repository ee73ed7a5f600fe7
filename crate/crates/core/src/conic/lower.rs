//! Lowering of a [`ConicProblem`] to real standard form
//! `min ⟨c, x⟩  s.t.  A x = b,  x ∈ PSD blocks × R₊^q`.
//!
//! Hermitian blocks are vectorized over the orthonormal basis
//! `{E_ii} ∪ {(E_ij + E_ji)/√2} ∪ {i(E_ij − E_ji)/√2}`, so the real inner
//! product `Re tr(XY)` becomes the Euclidean one.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde_json::json;

use super::problem::{ConicProblem, Term};
use crate::hermitian::{CMatrix, C64};

const SQRT2: f64 = std::f64::consts::SQRT_2;

pub(crate) fn hvec_len(n: usize) -> usize {
    n * n
}

pub(crate) fn hvec(m: &CMatrix) -> DVector<f64> {
    let n = m.nrows();
    let mut v = DVector::zeros(n * n);
    let mut k = 0;
    for i in 0..n {
        v[k] = m[(i, i)].re;
        k += 1;
        for j in i + 1..n {
            v[k] = SQRT2 * m[(i, j)].re;
            v[k + 1] = SQRT2 * m[(i, j)].im;
            k += 2;
        }
    }
    v
}

pub(crate) fn hmat(v: &[f64], n: usize) -> CMatrix {
    let mut m = CMatrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        m[(i, i)] = C64::new(v[k], 0.0);
        k += 1;
        for j in i + 1..n {
            let z = C64::new(v[k] / SQRT2, v[k + 1] / SQRT2);
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
            k += 2;
        }
    }
    m
}

/// Where a scalar variable lives among the nonnegative coordinates.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ScalarSlot {
    pub shift: usize,
    pub slack: Option<usize>,
}

/// Standard-form data shared by the solver and the debug dump.
#[derive(Debug, Clone)]
pub(crate) struct StandardForm {
    pub block_dims: Vec<usize>,
    pub a_blocks: Vec<DMatrix<f64>>,
    pub a_lp: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c_blocks: Vec<DVector<f64>>,
    pub c_lp: DVector<f64>,
    /// Constant added to `⟨c, x⟩` to recover the (minimized) objective.
    pub c_offset: f64,
}

impl StandardForm {
    pub fn rows(&self) -> usize {
        self.b.len()
    }

    pub fn n_lp(&self) -> usize {
        self.c_lp.len()
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Lowered {
    pub form: StandardForm,
    pub slots: Vec<ScalarSlot>,
    /// First row of each equality; bound rows follow the equalities.
    pub eq_row_offsets: Vec<usize>,
}

pub(crate) fn lower(problem: &ConicProblem) -> Lowered {
    let mut slots = Vec::with_capacity(problem.scalars.len());
    let mut n_lp = 0;
    for s in &problem.scalars {
        let shift = n_lp;
        n_lp += 1;
        let slack = s.upper.map(|_| {
            n_lp += 1;
            n_lp - 1
        });
        slots.push(ScalarSlot { shift, slack });
    }
    let m = problem.num_rows();
    let mut a_blocks: Vec<DMatrix<f64>> = problem
        .blocks
        .iter()
        .map(|b| DMatrix::zeros(m, hvec_len(b.dim)))
        .collect();
    let mut a_lp = DMatrix::zeros(m, n_lp);
    let mut b = DVector::zeros(m);
    let mut eq_row_offsets = Vec::with_capacity(problem.equalities.len());

    let mut row = 0;
    for eq in &problem.equalities {
        eq_row_offsets.push(row);
        let d = eq.dim();
        let nr = d * d;
        let mut rhs = hvec(eq.target.matrix());
        for term in &eq.terms {
            match term {
                Term::Block { var, coeff, map } => {
                    let ab = &mut a_blocks[var.0];
                    if matches!(map, super::LinearMap::Identity) {
                        for r in 0..nr {
                            ab[(row + r, r)] += coeff;
                        }
                    } else {
                        let mut unit = vec![0.0; nr];
                        for r in 0..nr {
                            unit[r] = 1.0;
                            let adj = hvec(&map.adjoint(&hmat(&unit, d)));
                            unit[r] = 0.0;
                            for (col, val) in adj.iter().enumerate() {
                                if *val != 0.0 {
                                    ab[(row + r, col)] += coeff * val;
                                }
                            }
                        }
                    }
                }
                Term::Scalar { var, matrix } => {
                    let h = hvec(matrix.matrix());
                    let slot = slots[var.0];
                    let lower = problem.scalars[var.0].lower;
                    for r in 0..nr {
                        a_lp[(row + r, slot.shift)] += h[r];
                        rhs[r] -= lower * h[r];
                    }
                }
            }
        }
        b.rows_mut(row, nr).copy_from(&rhs);
        row += nr;
    }
    for (s, slot) in problem.scalars.iter().zip(&slots) {
        if let (Some(upper), Some(slack)) = (s.upper, slot.slack) {
            a_lp[(row, slot.shift)] = 1.0;
            a_lp[(row, slack)] = 1.0;
            b[row] = upper - s.lower;
            row += 1;
        }
    }
    debug_assert_eq!(row, m);

    // Objective: maximize → minimize the negation.
    let mut c_blocks: Vec<DVector<f64>> = problem.blocks.iter().map(|b| DVector::zeros(hvec_len(b.dim))).collect();
    let mut c_lp = DVector::zeros(n_lp);
    let mut c_offset = 0.0;
    if let Some(obj) = &problem.objective {
        for (id, c) in &obj.blocks {
            c_blocks[id.0] -= hvec(c.matrix());
        }
        for (id, c) in &obj.scalars {
            c_lp[slots[id.0].shift] -= c;
            c_offset -= c * problem.scalars[id.0].lower;
        }
    }

    Lowered {
        form: StandardForm {
            block_dims: problem.blocks.iter().map(|b| b.dim).collect(),
            a_blocks,
            a_lp,
            b,
            c_blocks,
            c_lp,
            c_offset,
        },
        slots,
        eq_row_offsets,
    }
}

/// Row-space compression `A → T A` with orthonormal rows.
pub(crate) struct RowBasis {
    /// `T = Λ^{-1/2} Uᵀ` (rank × m).
    pub transform: DMatrix<f64>,
    /// Component of `b` outside the row space of `A`.
    pub b_residual: DVector<f64>,
}

pub(crate) fn row_basis(form: &StandardForm) -> RowBasis {
    let m = form.rows();
    let mut gram = DMatrix::<f64>::zeros(m, m);
    for ab in &form.a_blocks {
        gram += ab * ab.transpose();
    }
    gram += &form.a_lp * form.a_lp.transpose();
    let eig = SymmetricEigen::new(gram);
    let max_ev = eig.eigenvalues.iter().copied().fold(0.0_f64, f64::max);
    let cutoff = 1e-11 * max_ev.max(1e-300);
    let keep: Vec<usize> = (0..m).filter(|&i| eig.eigenvalues[i] > cutoff).collect();
    let mut transform = DMatrix::zeros(keep.len(), m);
    let mut proj_b = DVector::zeros(m);
    for (r, &i) in keep.iter().enumerate() {
        let u = eig.eigenvectors.column(i);
        let scale = eig.eigenvalues[i].sqrt().recip();
        for j in 0..m {
            transform[(r, j)] = u[j] * scale;
        }
        proj_b += u * u.dot(&form.b);
    }
    RowBasis {
        transform,
        b_residual: &form.b - proj_b,
    }
}

impl StandardForm {
    pub fn transformed(&self, t: &DMatrix<f64>) -> StandardForm {
        StandardForm {
            block_dims: self.block_dims.clone(),
            a_blocks: self.a_blocks.iter().map(|a| t * a).collect(),
            a_lp: t * &self.a_lp,
            b: t * &self.b,
            c_blocks: self.c_blocks.clone(),
            c_lp: self.c_lp.clone(),
            c_offset: self.c_offset,
        }
    }
}

/// Self-describing JSON of the lowered problem with sparse constraint
/// triplets, for cross-checking against external solvers.
pub(crate) fn debug_json(problem: &ConicProblem) -> serde_json::Value {
    let lowered = lower(problem);
    let f = &lowered.form;
    let mut triplets = Vec::new();
    for (bi, ab) in f.a_blocks.iter().enumerate() {
        for r in 0..ab.nrows() {
            for c in 0..ab.ncols() {
                let v = ab[(r, c)];
                if v != 0.0 {
                    triplets.push(json!({"row": r, "var": format!("block:{bi}"), "coord": c, "value": v}));
                }
            }
        }
    }
    for r in 0..f.a_lp.nrows() {
        for c in 0..f.a_lp.ncols() {
            let v = f.a_lp[(r, c)];
            if v != 0.0 {
                triplets.push(json!({"row": r, "var": "lp", "coord": c, "value": v}));
            }
        }
    }
    json!({
        "format": "jmsteer-conic-debug/1",
        "vectorization": "hermitian orthonormal basis: E_ii, sqrt2*Re, sqrt2*Im (row-major upper triangle)",
        "blocks": problem.blocks,
        "scalars": problem.scalars,
        "equality_labels": problem.equalities.iter().map(|e| e.label.clone()).collect::<Vec<_>>(),
        "equality_row_offsets": lowered.eq_row_offsets,
        "rows": f.rows(),
        "lp_columns": f.n_lp(),
        "constraints": triplets,
        "rhs": f.b.as_slice(),
        "objective_blocks": f.c_blocks.iter().map(|c| c.as_slice().to_vec()).collect::<Vec<_>>(),
        "objective_lp": f.c_lp.as_slice(),
        "sense": "minimize",
    })
}
