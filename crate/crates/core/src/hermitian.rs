//! Dense complex Hermitian operators.
//!
//! Bipartite and multipartite indexing is row-major over the subsystem
//! digits with the first subsystem most significant, so `a ⊗ b` places `a`
//! on subsystem 0.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Default hermiticity tolerance used when constructing operators.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Default tolerance for positive semidefiniteness checks.
pub const PSD_TOL: f64 = 1e-9;

#[derive(Clone, PartialEq)]
pub struct HermitianOperator {
    mat: CMatrix,
}

/// Which factor of a bipartite system to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    A,
    B,
}

/// Result of [`validate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValidationReport {
    pub hermiticity_defect: f64,
    pub min_eigenvalue: f64,
    pub passed: bool,
}

/// Largest `|m[i][j] - conj(m[j][i])|`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Checks hermiticity and, optionally, positive semidefiniteness of a raw
/// square matrix. The eigenvalues are taken from the Hermitian part.
pub fn validate(m: &CMatrix, psd_required: bool, tol: f64) -> Result<ValidationReport> {
    if m.nrows() != m.ncols() {
        return Err(Error::NonSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let defect = hermiticity_defect(m);
    let min_eig = if m.nrows() == 0 {
        0.0
    } else {
        let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
        hermitian_eigenvalues(&h)[0]
    };
    let passed = defect <= tol && (!psd_required || min_eig >= -tol);
    Ok(ValidationReport {
        hermiticity_defect: defect,
        min_eigenvalue: min_eig,
        passed,
    })
}

/// Ascending eigenvalues of a matrix assumed Hermitian.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

fn digits_of(mut index: usize, dims: &[usize], out: &mut [usize]) {
    for s in (0..dims.len()).rev() {
        out[s] = index % dims[s];
        index /= dims[s];
    }
}

/// Precomputed index maps for tracing out every subsystem not listed in
/// `keep`. The kept subsystems appear in the output in `keep` order.
struct ReductionPlan {
    kept_index: Vec<usize>,
    groups: Vec<Vec<usize>>,
    out_dim: usize,
}

impl ReductionPlan {
    fn new(dims: &[usize], keep: &[usize]) -> Result<Self> {
        let mut seen = vec![false; dims.len()];
        for &k in keep {
            if k >= dims.len() || seen[k] {
                return Err(Error::DimensionMismatch(format!(
                    "invalid kept subsystem list {keep:?} for dims {dims:?}"
                )));
            }
            seen[k] = true;
        }
        let total: usize = dims.iter().product();
        let traced: Vec<usize> = (0..dims.len()).filter(|s| !seen[*s]).collect();
        let traced_dim: usize = traced.iter().map(|&s| dims[s]).product();
        let out_dim: usize = keep.iter().map(|&s| dims[s]).product();
        let mut kept_index = vec![0; total];
        let mut groups = vec![Vec::new(); traced_dim];
        let mut digits = vec![0; dims.len()];
        for i in 0..total {
            digits_of(i, dims, &mut digits);
            let k = keep.iter().fold(0, |acc, &s| acc * dims[s] + digits[s]);
            let t = traced.iter().fold(0, |acc, &s| acc * dims[s] + digits[s]);
            kept_index[i] = k;
            groups[t].push(i);
        }
        Ok(Self {
            kept_index,
            groups,
            out_dim,
        })
    }

    fn reduce(&self, m: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.out_dim, self.out_dim);
        for g in &self.groups {
            for &i in g {
                for &j in g {
                    out[(self.kept_index[i], self.kept_index[j])] += m[(i, j)];
                }
            }
        }
        out
    }

    fn expand(&self, y: &CMatrix) -> CMatrix {
        let total = self.kept_index.len();
        let mut out = CMatrix::zeros(total, total);
        for g in &self.groups {
            for &i in g {
                for &j in g {
                    out[(i, j)] = y[(self.kept_index[i], self.kept_index[j])];
                }
            }
        }
        out
    }
}

fn check_dims(m: &CMatrix, dims: &[usize]) -> Result<()> {
    let total: usize = dims.iter().product();
    if m.nrows() != total || dims.contains(&0) {
        return Err(Error::DimensionMismatch(format!(
            "operator of dim {} does not factor as {dims:?}",
            m.nrows()
        )));
    }
    Ok(())
}

/// Partial trace of a raw matrix over all subsystems not in `keep`; output
/// ordering follows `keep`, so this also permutes subsystems.
pub fn reduce_raw(m: &CMatrix, dims: &[usize], keep: &[usize]) -> Result<CMatrix> {
    check_dims(m, dims)?;
    Ok(ReductionPlan::new(dims, keep)?.reduce(m))
}

/// Adjoint of [`reduce_raw`]: embeds `y` (ordered as `keep`) tensored with
/// the identity on the traced subsystems.
pub fn expand_raw(y: &CMatrix, dims: &[usize], keep: &[usize]) -> Result<CMatrix> {
    let plan = ReductionPlan::new(dims, keep)?;
    if y.nrows() != plan.out_dim || y.ncols() != plan.out_dim {
        return Err(Error::DimensionMismatch(format!(
            "operator of dim {} does not match kept dimension {}",
            y.nrows(),
            plan.out_dim
        )));
    }
    Ok(plan.expand(y))
}

/// Partial transpose of subsystem `system`.
pub fn partial_transpose_raw(m: &CMatrix, dims: &[usize], system: usize) -> Result<CMatrix> {
    check_dims(m, dims)?;
    if system >= dims.len() {
        return Err(Error::DimensionMismatch(format!(
            "subsystem {system} out of range for dims {dims:?}"
        )));
    }
    let total = m.nrows();
    let stride: usize = dims[system + 1..].iter().product();
    let d = dims[system];
    let mut out = CMatrix::zeros(total, total);
    for i in 0..total {
        let di = (i / stride) % d;
        for j in 0..total {
            let dj = (j / stride) % d;
            let ni = i - di * stride + dj * stride;
            let nj = j - dj * stride + di * stride;
            out[(ni, nj)] = m[(i, j)];
        }
    }
    Ok(out)
}

impl HermitianOperator {
    /// Wraps a matrix after checking it is square and Hermitian to
    /// [`HERMITICITY_TOL`] (relative to its largest entry). The stored matrix
    /// is the exact Hermitian part.
    pub fn new(mat: CMatrix) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::NonSquare {
                rows: mat.nrows(),
                cols: mat.ncols(),
            });
        }
        if mat.nrows() == 0 {
            return Err(Error::DimensionMismatch("dimension must be at least 1".into()));
        }
        let scale = mat.iter().map(|z| z.norm()).fold(1.0_f64, f64::max);
        let defect = hermiticity_defect(&mat);
        if defect > HERMITICITY_TOL * scale {
            return Err(Error::NotHermitian { defect });
        }
        Ok(Self::from_matrix_unchecked(mat))
    }

    /// Takes the Hermitian part of `mat` without any checks.
    pub fn from_matrix_unchecked(mat: CMatrix) -> Self {
        let adj = mat.adjoint();
        Self {
            mat: (mat + adj) * C64::new(0.5, 0.0),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            mat: CMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mat: CMatrix::identity(dim, dim),
        }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            mat: CMatrix::from_fn(n, n, |i, j| if i == j { C64::new(diag[i], 0.0) } else { C64::new(0.0, 0.0) }),
        }
    }

    /// Real symmetric matrix given row by row.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::NonSquare {
                rows: n,
                cols: rows.first().map_or(0, |r| r.len()),
            });
        }
        Self::new(CMatrix::from_fn(n, n, |i, j| C64::new(rows[i][j], 0.0)))
    }

    /// `|v⟩⟨v|` (not normalized).
    pub fn projector(v: &DVector<C64>) -> Self {
        Self::from_matrix_unchecked(v * v.adjoint())
    }

    /// `|i⟩⟨i|` in dimension `dim`.
    pub fn basis_projector(dim: usize, i: usize) -> Self {
        let mut m = CMatrix::zeros(dim, dim);
        m[(i, i)] = C64::new(1.0, 0.0);
        Self { mat: m }
    }

    pub fn pauli_x() -> Self {
        Self::from_matrix_unchecked(CMatrix::from_row_slice(
            2,
            2,
            &[C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
        ))
    }

    pub fn pauli_y() -> Self {
        Self::from_matrix_unchecked(CMatrix::from_row_slice(
            2,
            2,
            &[C64::new(0.0, 0.0), C64::new(0.0, -1.0), C64::new(0.0, 1.0), C64::new(0.0, 0.0)],
        ))
    }

    pub fn pauli_z() -> Self {
        Self::from_real_diagonal(&[1.0, -1.0])
    }

    /// `|φ⁺⟩⟨φ⁺|` with `|φ⁺⟩ = Σ_i |ii⟩ / √d`.
    pub fn max_entangled(d: usize) -> Self {
        let mut v = DVector::from_element(d * d, C64::new(0.0, 0.0));
        let amp = 1.0 / (d as f64).sqrt();
        for i in 0..d {
            v[i * d + i] = C64::new(amp, 0.0);
        }
        Self::projector(&v)
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn trace(&self) -> f64 {
        self.mat.diagonal().iter().map(|z| z.re).sum()
    }

    /// `Re tr(self · other)`, the real inner product on Hermitian matrices.
    pub fn inner(&self, other: &Self) -> f64 {
        self.mat
            .iter()
            .zip(other.mat.transpose().iter())
            .map(|(a, b)| (a * b).re)
            .sum()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.mat)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn validate(&self, psd_required: bool, tol: f64) -> ValidationReport {
        validate(&self.mat, psd_required, tol).expect("square by construction")
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.min_eigenvalue() >= -tol
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            mat: &self.mat * C64::new(c, 0.0),
        }
    }

    /// Largest entrywise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch in max_abs_diff");
        (&self.mat - &other.mat)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.mat.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `u · self · u†`.
    pub fn conjugate_by(&self, u: &CMatrix) -> Result<Self> {
        if u.nrows() != self.dim() || u.ncols() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "unitary of shape {}x{} for operator of dim {}",
                u.nrows(),
                u.ncols(),
                self.dim()
            )));
        }
        Ok(Self::from_matrix_unchecked(u * &self.mat * u.adjoint()))
    }

    /// Kronecker product `self ⊗ other`.
    pub fn tensor(&self, other: &Self) -> Self {
        Self {
            mat: self.mat.kronecker(&other.mat),
        }
    }

    /// Matrix product; the result is Hermitian only when the factors commute,
    /// so it is returned as a raw matrix.
    pub fn product(&self, other: &Self) -> CMatrix {
        &self.mat * &other.mat
    }

    /// Reduced operator of a bipartite `dA·dB` operator on the kept side.
    pub fn partial_trace(&self, dims: (usize, usize), keep: Side) -> Result<Self> {
        let keep = match keep {
            Side::A => [0],
            Side::B => [1],
        };
        self.reduce(&[dims.0, dims.1], &keep)
    }

    /// Partial trace over every subsystem not in `keep`, output ordered as
    /// `keep`.
    pub fn reduce(&self, dims: &[usize], keep: &[usize]) -> Result<Self> {
        Ok(Self::from_matrix_unchecked(reduce_raw(&self.mat, dims, keep)?))
    }

    pub fn partial_transpose(&self, dims: &[usize], system: usize) -> Result<Self> {
        Ok(Self {
            mat: partial_transpose_raw(&self.mat, dims, system)?,
        })
    }

    pub fn transpose(&self) -> Self {
        Self {
            mat: self.mat.transpose(),
        }
    }

    /// Pauli coordinates of a qubit operator.
    pub fn bloch(&self) -> Result<BlochVector> {
        if self.dim() != 2 {
            return Err(Error::DimensionMismatch(format!(
                "Bloch coordinates need dim 2, got {}",
                self.dim()
            )));
        }
        let m = &self.mat;
        Ok(BlochVector {
            weight: m[(0, 0)].re + m[(1, 1)].re,
            vec: [2.0 * m[(0, 1)].re, -2.0 * m[(0, 1)].im, m[(0, 0)].re - m[(1, 1)].re],
        })
    }

    pub fn from_bloch(b: &BlochVector) -> Self {
        let [x, y, z] = b.vec;
        let w = b.weight;
        Self::from_matrix_unchecked(CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new((w + z) / 2.0, 0.0),
                C64::new(x / 2.0, -y / 2.0),
                C64::new(x / 2.0, y / 2.0),
                C64::new((w - z) / 2.0, 0.0),
            ],
        ))
    }

    /// Reads a `dim×dim` array of `[re, im]` pairs.
    pub fn from_pairs(rows: &[Vec<[f64; 2]>]) -> Result<Self> {
        let n = rows.len();
        for r in rows {
            if r.len() != n {
                return Err(Error::NonSquare { rows: n, cols: r.len() });
            }
        }
        Self::new(CMatrix::from_fn(n, n, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
    }

    pub fn to_pairs(&self) -> Vec<Vec<[f64; 2]>> {
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| [self.mat[(i, j)].re, self.mat[(i, j)].im]).collect())
            .collect()
    }
}

impl fmt::Debug for HermitianOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HermitianOperator(dim={}) {}", self.dim(), self.mat)
    }
}

impl Add for &HermitianOperator {
    type Output = HermitianOperator;
    fn add(self, rhs: Self) -> HermitianOperator {
        HermitianOperator {
            mat: &self.mat + &rhs.mat,
        }
    }
}

impl Sub for &HermitianOperator {
    type Output = HermitianOperator;
    fn sub(self, rhs: Self) -> HermitianOperator {
        HermitianOperator {
            mat: &self.mat - &rhs.mat,
        }
    }
}

impl Neg for &HermitianOperator {
    type Output = HermitianOperator;
    fn neg(self) -> HermitianOperator {
        self.scale(-1.0)
    }
}

impl Mul<&HermitianOperator> for f64 {
    type Output = HermitianOperator;
    fn mul(self, rhs: &HermitianOperator) -> HermitianOperator {
        rhs.scale(self)
    }
}

impl Serialize for HermitianOperator {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_pairs().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for HermitianOperator {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<[f64; 2]>>::deserialize(deserializer)?;
        HermitianOperator::from_pairs(&rows).map_err(D::Error::custom)
    }
}

/// Qubit operator in Pauli coordinates: `op = (weight·𝟙 + vec·σ)/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub weight: f64,
    pub vec: [f64; 3],
}

impl BlochVector {
    pub fn new(weight: f64, vec: [f64; 3]) -> Self {
        Self { weight, vec }
    }

    pub fn norm(&self) -> f64 {
        norm3(&self.vec)
    }

    /// The operator is PSD iff `‖vec‖ ≤ weight`.
    pub fn is_psd(&self, tol: f64) -> bool {
        self.norm() <= self.weight + tol
    }
}

pub(crate) fn norm3(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}
