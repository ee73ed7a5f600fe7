//! Infeasible-start primal–dual path-following method with Nesterov–Todd
//! scaling and Mehrotra predictor–corrector steps, for standard-form data
//! with orthonormal constraint rows.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use super::lower::{hmat, hvec, StandardForm};
use crate::hermitian::{CMatrix, C64};

/// Iterations without improvement of the merit before giving up.
const STALL_LIMIT: usize = 6;

#[derive(Debug, Clone, Copy)]
pub(crate) struct IpmSettings {
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct IpmSolution {
    pub x_blocks: Vec<CMatrix>,
    pub x_lp: DVector<f64>,
    pub y: DVector<f64>,
    pub iterations: usize,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub relative_gap: f64,
    pub dual_objective: f64,
    pub converged: bool,
}

#[derive(Clone)]
struct Point {
    blocks: Vec<CMatrix>,
    lp: DVector<f64>,
}

impl Point {
    fn inner(&self, other: &Point) -> f64 {
        let mut acc = self.lp.dot(&other.lp);
        for (a, b) in self.blocks.iter().zip(&other.blocks) {
            acc += a.iter().zip(b.iter()).map(|(x, y)| (x * y.conj()).re).sum::<f64>();
        }
        acc
    }

    fn norm(&self) -> f64 {
        self.inner(self).max(0.0).sqrt()
    }

    fn axpy(&mut self, alpha: f64, other: &Point) {
        let a = C64::new(alpha, 0.0);
        for (x, y) in self.blocks.iter_mut().zip(&other.blocks) {
            *x += y * a;
        }
        self.lp.axpy(alpha, &other.lp, 1.0);
    }

    fn symmetrize(&mut self) {
        for b in &mut self.blocks {
            let adj = b.adjoint();
            *b = (&*b + adj) * C64::new(0.5, 0.0);
        }
    }
}

/// NT scaling of one block: `W = G G†`, `G⁻¹ X G⁻† = G† S G = diag(sigma)`.
struct BlockScaling {
    g: CMatrix,
    g_inv: CMatrix,
    w: CMatrix,
    sigma: Vec<f64>,
}

fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(h);
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

fn scale_columns(q: &CMatrix, s: &[f64]) -> CMatrix {
    let mut out = q.clone();
    for (j, sj) in s.iter().enumerate() {
        out.column_mut(j).scale_mut(*sj);
    }
    out
}

fn nt_scaling(x: &CMatrix, s: &CMatrix) -> BlockScaling {
    let floor = 1e-300;
    let (ex, qx) = hermitian_eigen(x);
    let sq: Vec<f64> = ex.iter().map(|e| e.max(floor).sqrt()).collect();
    let isq: Vec<f64> = sq.iter().map(|v| v.recip()).collect();
    let p = scale_columns(&qx, &sq) * qx.adjoint();
    let p_inv = scale_columns(&qx, &isq) * qx.adjoint();
    let t = &p * s * &p;
    let (lam, q) = hermitian_eigen(&t);
    let lam: Vec<f64> = lam.iter().map(|l| l.max(floor)).collect();
    let quarter: Vec<f64> = lam.iter().map(|l| l.powf(-0.25)).collect();
    let g = &p * scale_columns(&q, &quarter);
    let inv_quarter: Vec<f64> = lam.iter().map(|l| l.powf(0.25)).collect();
    let g_inv = scale_columns(&q, &inv_quarter).adjoint() * &p_inv;
    let w = &g * g.adjoint();
    BlockScaling {
        g,
        g_inv,
        w,
        sigma: lam.iter().map(|l| l.sqrt()).collect(),
    }
}

struct Problem<'a> {
    f: &'a StandardForm,
    c: Point,
}

impl<'a> Problem<'a> {
    fn apply_a(&self, x: &Point) -> DVector<f64> {
        let mut out = &self.f.a_lp * &x.lp;
        for (ab, xb) in self.f.a_blocks.iter().zip(&x.blocks) {
            out += ab * hvec(xb);
        }
        out
    }

    fn apply_at(&self, y: &DVector<f64>) -> Point {
        let blocks = self
            .f
            .a_blocks
            .iter()
            .zip(&self.f.block_dims)
            .map(|(ab, &n)| hmat((ab.transpose() * y).as_slice(), n))
            .collect();
        Point {
            blocks,
            lp: self.f.a_lp.transpose() * y,
        }
    }
}

fn max_step_psd(sigma: &[f64], d_scaled: &CMatrix) -> f64 {
    // largest α with diag(σ) + α·D ⪰ 0
    let n = sigma.len();
    let isq: Vec<f64> = sigma.iter().map(|s| s.sqrt().recip()).collect();
    let m = CMatrix::from_fn(n, n, |i, j| d_scaled[(i, j)] * (isq[i] * isq[j]));
    let (ev, _) = hermitian_eigen(&m);
    let min = ev.iter().copied().fold(f64::INFINITY, f64::min);
    if min < 0.0 {
        -1.0 / min
    } else {
        f64::INFINITY
    }
}

fn max_step_lp(x: &DVector<f64>, dx: &DVector<f64>) -> f64 {
    x.iter()
        .zip(dx.iter())
        .filter(|(_, d)| **d < 0.0)
        .map(|(xi, di)| -xi / di)
        .fold(f64::INFINITY, f64::min)
}

struct Scalings {
    blocks: Vec<BlockScaling>,
    lp_w2: DVector<f64>,
}

impl Scalings {
    fn apply_w(&self, p: &Point) -> Point {
        Point {
            blocks: self.blocks.iter().zip(&p.blocks).map(|(s, b)| &s.w * b * &s.w).collect(),
            lp: p.lp.component_mul(&self.lp_w2),
        }
    }
}

fn schur(problem: &Problem<'_>, sc: &Scalings) -> DMatrix<f64> {
    let f = problem.f;
    let m = f.rows();
    let mut mat = &f.a_lp * DMatrix::from_diagonal(&sc.lp_w2) * f.a_lp.transpose();
    for ((ab, &n), bs) in f.a_blocks.iter().zip(&f.block_dims).zip(&sc.blocks) {
        let nn = n * n;
        if nn <= m {
            // explicit W⊗W operator on the hvec space
            let mut k = DMatrix::<f64>::zeros(nn, nn);
            let mut unit = vec![0.0; nn];
            for r in 0..nn {
                unit[r] = 1.0;
                let e = hmat(&unit, n);
                unit[r] = 0.0;
                k.set_column(r, &hvec(&(&bs.w * e * &bs.w)));
            }
            mat += ab * k * ab.transpose();
        } else {
            let mut p = DMatrix::<f64>::zeros(m, nn);
            for i in 0..m {
                let row: Vec<f64> = ab.row(i).iter().copied().collect();
                if row.iter().all(|v| *v == 0.0) {
                    continue;
                }
                let ai = hmat(&row, n);
                p.set_row(i, &hvec(&(&bs.w * ai * &bs.w)).transpose());
            }
            mat += ab * p.transpose();
        }
    }
    (&mat + mat.transpose()) * 0.5
}

/// Cholesky factor of the Schur matrix, regularized if needed; solves are
/// refined against the unregularized matrix.
struct Schur {
    m: DMatrix<f64>,
    chol: Cholesky<f64, nalgebra::Dyn>,
}

impl Schur {
    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let mut x = self.chol.solve(rhs);
        for _ in 0..2 {
            let r = rhs - &self.m * &x;
            x += self.chol.solve(&r);
        }
        x
    }
}

fn factor(m: DMatrix<f64>) -> Option<Schur> {
    let scale = m.diagonal().iter().copied().fold(0.0_f64, f64::max).max(1e-300);
    let mut reg = 0.0;
    let mut work = m.clone();
    for _ in 0..8 {
        if let Some(chol) = Cholesky::new(work.clone()) {
            return Some(Schur { m, chol });
        }
        reg = if reg == 0.0 { 1e-14 * scale } else { reg * 100.0 };
        for i in 0..work.nrows() {
            work[(i, i)] += reg;
        }
    }
    None
}

/// Least-squares return to `A x = b`, kept only if `x` stays in the cone.
/// Removes the residual that accumulates from cancellation in `dx` once the
/// iterates approach the boundary.
fn restore_primal(problem: &Problem<'_>, gram: &Cholesky<f64, nalgebra::Dyn>, x: &mut Point) {
    let rp = &problem.f.b - problem.apply_a(x);
    let corr = problem.apply_at(&gram.solve(&rp));
    let mut trial = x.clone();
    trial.axpy(1.0, &corr);
    trial.symmetrize();
    if trial.lp.iter().any(|v| *v <= 0.0) {
        return;
    }
    for b in &trial.blocks {
        let (ev, _) = hermitian_eigen(b);
        if ev.iter().copied().fold(f64::INFINITY, f64::min) <= 0.0 {
            return;
        }
    }
    *x = trial;
}

struct Direction {
    dx: Point,
    dy: DVector<f64>,
    ds: Point,
}

fn solve_direction(
    problem: &Problem<'_>,
    sc: &Scalings,
    chol: &Schur,
    gram: Option<&Cholesky<f64, nalgebra::Dyn>>,
    rp: &DVector<f64>,
    rd: &Point,
    rc: &Point,
) -> Direction {
    let w_rd = sc.apply_w(rd);
    let rhs = rp - problem.apply_a(rc) + problem.apply_a(&w_rd);
    let dy = chol.solve(&rhs);
    let mut ds = rd.clone();
    ds.axpy(-1.0, &problem.apply_at(&dy));
    let mut dx = rc.clone();
    dx.axpy(-1.0, &sc.apply_w(&ds));
    // dx loses hermiticity and A·dx = rp to cancellation once W is badly scaled
    dx.symmetrize();
    ds.symmetrize();
    if let Some(gram) = gram {
        let r = rp - problem.apply_a(&dx);
        dx.axpy(1.0, &problem.apply_at(&gram.solve(&r)));
    }
    Direction { dx, dy, ds }
}

fn scaled(sc: &Scalings, d: &Direction) -> (Vec<CMatrix>, Vec<CMatrix>) {
    let xs = sc
        .blocks
        .iter()
        .zip(&d.dx.blocks)
        .map(|(s, dx)| &s.g_inv * dx * s.g_inv.adjoint())
        .collect();
    let ss = sc
        .blocks
        .iter()
        .zip(&d.ds.blocks)
        .map(|(s, ds)| s.g.adjoint() * ds * &s.g)
        .collect();
    (xs, ss)
}

fn step_lengths(sc: &Scalings, x: &Point, s: &Point, d: &Direction, dxs: &[CMatrix], dss: &[CMatrix]) -> (f64, f64) {
    let mut ap = max_step_lp(&x.lp, &d.dx.lp);
    let mut ad = max_step_lp(&s.lp, &d.ds.lp);
    for (i, bs) in sc.blocks.iter().enumerate() {
        ap = ap.min(max_step_psd(&bs.sigma, &dxs[i]));
        ad = ad.min(max_step_psd(&bs.sigma, &dss[i]));
    }
    (ap, ad)
}

pub(crate) fn solve(f: &StandardForm, settings: IpmSettings) -> IpmSolution {
    let c = Point {
        blocks: f.c_blocks.iter().zip(&f.block_dims).map(|(c, &n)| hmat(c.as_slice(), n)).collect(),
        lp: f.c_lp.clone(),
    };
    let nu = f.block_dims.iter().sum::<usize>() as f64 + f.n_lp() as f64;
    let problem = Problem { f, c };

    let b_norm = f.b.norm();
    let c_norm = problem.c.norm();
    let b_max = f.b.amax();
    let xi = 10.0_f64.max(b_max * (nu.sqrt()));
    let eta = 10.0_f64.max(c_norm);
    let mut x = Point {
        blocks: f.block_dims.iter().map(|&n| CMatrix::identity(n, n) * C64::new(xi, 0.0)).collect(),
        lp: DVector::from_element(f.n_lp(), xi),
    };
    let mut s = Point {
        blocks: f.block_dims.iter().map(|&n| CMatrix::identity(n, n) * C64::new(eta, 0.0)).collect(),
        lp: DVector::from_element(f.n_lp(), eta),
    };
    let mut y = DVector::zeros(f.rows());
    let gram = {
        let mut g = &f.a_lp * f.a_lp.transpose();
        for ab in &f.a_blocks {
            g += ab * ab.transpose();
        }
        Cholesky::new(g)
    };

    let mut best: Option<(f64, IpmSolution)> = None;
    let mut iterations = 0;
    let mut converged = false;
    let mut since_best = 0;
    loop {
        let rp = &f.b - problem.apply_a(&x);
        let mut rd = problem.c.clone();
        rd.axpy(-1.0, &problem.apply_at(&y));
        rd.axpy(-1.0, &s);
        let pobj = problem.c.inner(&x) + f.c_offset;
        let dobj = f.b.dot(&y) + f.c_offset;
        let xs = x.inner(&s);
        let pinf = rp.norm() / (1.0 + b_norm);
        let dinf = rd.norm() / (1.0 + c_norm);
        let gap = xs.abs().max((pobj - dobj).abs()) / (1.0 + pobj.abs() + dobj.abs());
        let merit = if pinf.is_nan() || dinf.is_nan() || gap.is_nan() { f64::NAN } else { pinf.max(dinf).max(gap) };
        if merit.is_finite() && best.as_ref().is_none_or(|(m, _)| merit < *m) {
            since_best = 0;
            best = Some((
                merit,
                IpmSolution {
                    x_blocks: x.blocks.clone(),
                    x_lp: x.lp.clone(),
                    y: y.clone(),
                    iterations,
                    primal_infeasibility: pinf,
                    dual_infeasibility: dinf,
                    relative_gap: gap,
                    dual_objective: dobj,
                    converged: false,
                },
            ));
        }
        if merit <= settings.tol {
            converged = true;
            break;
        }
        since_best += 1;
        if !merit.is_finite() || iterations >= settings.max_iter || since_best > STALL_LIMIT {
            break;
        }
        iterations += 1;

        let mu = xs / nu;
        let sc = Scalings {
            blocks: x.blocks.iter().zip(&s.blocks).map(|(xb, sb)| nt_scaling(xb, sb)).collect(),
            lp_w2: x.lp.component_div(&s.lp),
        };
        let m = schur(&problem, &sc);
        let Some(chol) = factor(m) else { break };

        // predictor
        let rc_aff = Point {
            blocks: x.blocks.iter().map(|b| -b).collect(),
            lp: -&x.lp,
        };
        let aff = solve_direction(&problem, &sc, &chol, gram.as_ref(), &rp, &rd, &rc_aff);
        let (dxs_a, dss_a) = scaled(&sc, &aff);
        let (ap, ad) = step_lengths(&sc, &x, &s, &aff, &dxs_a, &dss_a);
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let mut xa = x.clone();
        xa.axpy(ap, &aff.dx);
        let mut sa = s.clone();
        sa.axpy(ad, &aff.ds);
        let mu_aff = xa.inner(&sa) / nu;
        let ratio = (mu_aff / mu).clamp(0.0, 1.0);
        let exponent = if mu > 1e-6 { 2.0_f64.max(3.0 * ap.min(ad).powi(2)) } else { 3.0 };
        let sigma_c = ratio.powf(exponent).min(1.0);

        // corrector
        let target = sigma_c * mu;
        let mut rc_blocks = Vec::with_capacity(sc.blocks.len());
        for (i, bs) in sc.blocks.iter().enumerate() {
            let n = bs.sigma.len();
            let h = &dxs_a[i] * &dss_a[i] + &dss_a[i] * &dxs_a[i];
            let d = CMatrix::from_fn(n, n, |r, c| {
                let diag = if r == c { 2.0 * target - 2.0 * bs.sigma[r] * bs.sigma[r] } else { 0.0 };
                (C64::new(diag, 0.0) - h[(r, c)]) / (bs.sigma[r] + bs.sigma[c])
            });
            rc_blocks.push(&bs.g * d * bs.g.adjoint());
        }
        let rc_lp = DVector::from_fn(f.n_lp(), |j, _| {
            (target - x.lp[j] * s.lp[j] - aff.dx.lp[j] * aff.ds.lp[j]) / s.lp[j]
        });
        let rc = Point {
            blocks: rc_blocks,
            lp: rc_lp,
        };
        let dir = solve_direction(&problem, &sc, &chol, gram.as_ref(), &rp, &rd, &rc);
        let (dxs, dss) = scaled(&sc, &dir);
        let (ap_max, ad_max) = step_lengths(&sc, &x, &s, &dir, &dxs, &dss);
        let gamma = 0.9 + 0.09 * ap_max.min(ad_max).min(1.0);
        let ap = (gamma * ap_max).min(1.0);
        let ad = (gamma * ad_max).min(1.0);
        if !(ap.is_finite() && ad.is_finite()) || (ap < 1e-12 && ad < 1e-12) {
            break;
        }
        x.axpy(ap, &dir.dx);
        y.axpy(ad, &dir.dy, 1.0);
        s.axpy(ad, &dir.ds);
        x.symmetrize();
        s.symmetrize();
        if let Some(gram) = &gram {
            restore_primal(&problem, gram, &mut x);
        }
    }
    let (_, mut sol) = best.expect("initial iterate is finite");
    sol.converged = converged;
    if converged {
        sol.iterations = iterations;
    }
    sol
}
