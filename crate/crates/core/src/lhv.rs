//! LHV-decomposition search for the two-qubit family
//! `ρ(s; U_A, λ) = λ (U_A⊗𝟙)|ψ_s⟩⟨ψ_s|(U_A⊗𝟙)† + (1−λ) 𝟙/2 ⊗ tr_A[|ψ_s⟩⟨ψ_s|]`.
//!
//! A target is decomposed into a convex combination of
//! - noisy Bell states `0.6595·(U C_j ⊗ 𝟙)|φ⁺⟩⟨φ⁺|(…)† + 0.3405·𝟙/4`, with `C_j`
//!   the 24 single-qubit Clifford unitaries and `U = U_A`,
//! - states with a symmetric extension to three copies of A,
//! - optionally states with a symmetric extension to `n_bob` copies of B,
//!
//! all inside one SDP.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::conic::{self, BlockId, ConicCertificate, ConicProblem, Equality, LinearMap, ScalarId, SolverTolerances, Status};
use crate::decomposition::numerical_failure;
use crate::error::{Error, Result};
use crate::hermitian::{reduce_raw, CMatrix, HermitianOperator, Side, C64};

/// Visibility up to which noisy Bell states have an LHV model for projective measurements.
pub const NOISY_BELL_LAMBDA: f64 = 0.6595;
pub const MAX_COPIES: usize = 6;
/// Copies of A in class (ii).
pub const CLASS_II_COPIES: usize = 3;

/// `U = Rz(α) Ry(β) Rz(γ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EulerAngles {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl EulerAngles {
    pub const IDENTITY: Self = Self {
        alpha: 0.0,
        beta: 0.0,
        gamma: 0.0,
    };

    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Self {
        Self { alpha, beta, gamma }
    }

    pub fn unitary(&self) -> CMatrix {
        let rz = |t: f64| {
            CMatrix::from_row_slice(
                2,
                2,
                &[C64::from_polar(1.0, -t / 2.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::from_polar(1.0, t / 2.0)],
            )
        };
        let (c, s) = ((self.beta / 2.0).cos(), (self.beta / 2.0).sin());
        let ry = CMatrix::from_row_slice(2, 2, &[C64::new(c, 0.0), C64::new(-s, 0.0), C64::new(s, 0.0), C64::new(c, 0.0)]);
        rz(self.alpha) * ry * rz(self.gamma)
    }

    /// Haar-random angles.
    pub fn random(rng: &mut impl Rng) -> Self {
        let u: f64 = rng.random();
        Self {
            alpha: rng.random::<f64>() * 2.0 * PI,
            beta: (1.0 - 2.0 * u).clamp(-1.0, 1.0).acos(),
            gamma: rng.random::<f64>() * 2.0 * PI,
        }
    }
}

/// Euler grid `n_α × n_β × n_γ` (α, γ on `[0, 2π)`, β on `[0, π]`) plus `random` Haar samples.
pub fn ua_samples(grid: [usize; 3], random: usize, seed: u64) -> Vec<EulerAngles> {
    let mut out = Vec::with_capacity(grid.iter().product::<usize>() + random);
    for i in 0..grid[0] {
        for j in 0..grid[1] {
            for k in 0..grid[2] {
                let beta = if grid[1] > 1 { PI * j as f64 / (grid[1] - 1) as f64 } else { 0.0 };
                out.push(EulerAngles::new(
                    2.0 * PI * i as f64 / grid[0] as f64,
                    beta,
                    2.0 * PI * k as f64 / grid[2] as f64,
                ));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    out.extend((0..random).map(|_| EulerAngles::random(&mut rng)));
    out
}

/// Default sampling: 6×6×6 grid plus 50 random unitaries.
pub fn default_ua_samples(seed: u64) -> Vec<EulerAngles> {
    ua_samples([6, 6, 6], 50, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateFamilyPoint {
    pub s: f64,
    pub ua: EulerAngles,
    pub lambda: f64,
    pub state: HermitianOperator,
}

fn family_parts(s: f64, ua: &EulerAngles) -> Result<(HermitianOperator, HermitianOperator)> {
    if !(std::f64::consts::FRAC_1_SQRT_2 - 1e-12..=1.0 + 1e-12).contains(&s) {
        return Err(Error::RangeError(format!("Schmidt coefficient {s} outside [1/sqrt2, 1]")));
    }
    let s = s.clamp(0.0, 1.0);
    let c = (1.0 - s * s).max(0.0).sqrt();
    let psi = DVector::from_vec(vec![C64::new(s, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(c, 0.0)]);
    let u = ua.unitary().kronecker(&CMatrix::identity(2, 2));
    let pure = HermitianOperator::projector(&(u * psi));
    let noise = HermitianOperator::identity(2)
        .scale(0.5)
        .tensor(&HermitianOperator::from_real_diagonal(&[s * s, c * c]));
    Ok((pure, noise))
}

pub fn state_family(s: f64, ua: EulerAngles, lambda: f64) -> Result<StateFamilyPoint> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::RangeError(format!("noise parameter {lambda} outside [0, 1]")));
    }
    let (pure, noise) = family_parts(s, &ua)?;
    Ok(StateFamilyPoint {
        s,
        ua,
        lambda,
        state: &pure.scale(lambda) + &noise.scale(1.0 - lambda),
    })
}

/// The 24 single-qubit Clifford unitaries modulo global phase.
pub fn clifford_group() -> Vec<CMatrix> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let h = CMatrix::from_row_slice(2, 2, &[C64::new(r, 0.0), C64::new(r, 0.0), C64::new(r, 0.0), C64::new(-r, 0.0)]);
    let s = CMatrix::from_row_slice(2, 2, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 1.0)]);
    let canonical = |m: &CMatrix| {
        let pivot = m.iter().find(|z| z.norm() > 1e-9).copied().unwrap_or(C64::new(1.0, 0.0));
        m * (pivot.conj() / pivot.norm())
    };
    let mut group = vec![CMatrix::identity(2, 2)];
    let mut frontier = group.clone();
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for g in &frontier {
            for gen in [&h, &s] {
                let cand = canonical(&(gen * g));
                if !group.iter().any(|e| (e - &cand).norm() < 1e-9) {
                    group.push(cand.clone());
                    next.push(cand);
                }
            }
        }
        frontier = next;
    }
    group
}

/// Noisy Bell dictionary relative to `U_A`.
pub fn noisy_bell_dictionary(ua: &EulerAngles) -> Vec<HermitianOperator> {
    let phi = HermitianOperator::max_entangled(2);
    let white = HermitianOperator::identity(4).scale((1.0 - NOISY_BELL_LAMBDA) / 4.0);
    let u = ua.unitary();
    clifford_group()
        .iter()
        .map(|c| {
            let w = (&u * c).kronecker(&CMatrix::identity(2, 2));
            &phi.conjugate_by(&w).expect("unitary").scale(NOISY_BELL_LAMBDA) + &white
        })
        .collect()
}

/// Layout of a symmetric extension of a two-qubit state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ExtensionShape {
    pub copies: usize,
    pub side: Side,
}

impl ExtensionShape {
    pub fn new(copies: usize, side: Side) -> Result<Self> {
        if copies > MAX_COPIES {
            return Err(Error::TooManyCopies {
                copies,
                limit: MAX_COPIES,
            });
        }
        if copies < 2 {
            return Err(Error::RangeError(format!("an extension needs at least 2 copies, got {copies}")));
        }
        Ok(Self { copies, side })
    }

    /// Subsystem dims: `A₁…A_k B` for side A and `A B₁…B_k` for side B.
    pub fn dims(&self) -> Vec<usize> {
        vec![2; self.copies + 1]
    }

    pub fn dim(&self) -> usize {
        1 << (self.copies + 1)
    }

    /// Kept subsystems for the `i`-th two-party marginal, in the order (A, B).
    pub fn marginal(&self, i: usize) -> Vec<usize> {
        match self.side {
            Side::A => vec![i, self.copies],
            Side::B => vec![0, 1 + i],
        }
    }

    fn marginal_map(&self, i: usize) -> LinearMap {
        LinearMap::Reduce {
            dims: self.dims(),
            keep: self.marginal(i),
        }
    }

    /// Index of the unextended party, used for the optional PPT cut.
    fn other_party(&self) -> usize {
        match self.side {
            Side::A => self.copies,
            Side::B => 0,
        }
    }

    fn copy_positions(&self) -> Vec<usize> {
        match self.side {
            Side::A => (0..self.copies).collect(),
            Side::B => (1..=self.copies).collect(),
        }
    }
}

/// Adds `Ω ⪰ 0` with all copy marginals equal. Returns the block and the
/// map to its first marginal.
fn add_extension(problem: &mut ConicProblem, shape: ExtensionShape, ppt: bool, name: &str) -> Result<(BlockId, LinearMap)> {
    let om = problem.add_block(name, shape.dim());
    for i in 1..shape.copies {
        problem.add_equality(
            Equality::new(format!("{name}: marginal 0 = marginal {i}"), HermitianOperator::zeros(4))
                .mapped(om, 1.0, shape.marginal_map(0))
                .mapped(om, -1.0, shape.marginal_map(i)),
        )?;
    }
    if ppt {
        let z = problem.add_block(format!("{name}: partial transpose"), shape.dim());
        problem.add_equality(
            Equality::new(format!("{name}: ppt"), HermitianOperator::zeros(shape.dim()))
                .block(z, 1.0)
                .mapped(
                    om,
                    -1.0,
                    LinearMap::PartialTranspose {
                        dims: shape.dims(),
                        system: shape.other_party(),
                    },
                ),
        )?;
    }
    Ok((om, shape.marginal_map(0)))
}

fn permute_systems(m: &CMatrix, dims: &[usize], perm: &[usize]) -> CMatrix {
    // output subsystem j carries input subsystem perm[j]
    let n = m.nrows();
    let k = dims.len();
    let mut strides = vec![1; k];
    for j in (0..k.saturating_sub(1)).rev() {
        strides[j] = strides[j + 1] * dims[j + 1];
    }
    let map: Vec<usize> = (0..n)
        .map(|idx| {
            let mut src = 0;
            for j in 0..k {
                let digit = (idx / strides[j]) % dims[j];
                src += digit * strides[perm[j]];
            }
            src
        })
        .collect();
    CMatrix::from_fn(n, n, |i, j| m[(map[i], map[j])])
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head);
            out.push(p);
        }
    }
    out
}

/// Average of `Ω` over permutations of the copies.
fn twirl(omega: &CMatrix, shape: &ExtensionShape) -> CMatrix {
    let dims = shape.dims();
    let pos = shape.copy_positions();
    let perms = permutations(&pos);
    let mut acc = CMatrix::zeros(omega.nrows(), omega.ncols());
    for p in &perms {
        let mut full: Vec<usize> = (0..dims.len()).collect();
        for (slot, src) in pos.iter().zip(p) {
            full[*slot] = *src;
        }
        acc += permute_systems(omega, &dims, &full);
    }
    acc / C64::new(perms.len() as f64, 0.0)
}

fn max_marginal_gap(omega: &CMatrix, shape: &ExtensionShape, target: &CMatrix) -> f64 {
    (0..shape.copies)
        .map(|i| {
            let m = reduce_raw(omega, &shape.dims(), &shape.marginal(i)).expect("valid dims");
            (m - target).iter().map(|z| z.norm()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetricExtension {
    pub shape: ExtensionShape,
    /// Copy-permutation-symmetric extension operator (subsystem order of [`ExtensionShape::dims`]).
    pub operator: HermitianOperator,
    /// Largest deviation of any two-party marginal from the extended state.
    pub marginal_residual: f64,
    pub min_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymExtOutcome {
    pub feasible: bool,
    pub certificate: ConicCertificate,
    pub extension: Option<SymmetricExtension>,
}

/// Does the two-qubit `state` have a symmetric extension to `copies` copies of `side`?
pub fn sym_ext_feasible(
    state: &HermitianOperator,
    copies: usize,
    side: Side,
    ppt: bool,
    tol: &SolverTolerances,
) -> Result<SymExtOutcome> {
    let shape = ExtensionShape::new(copies, side)?;
    if state.dim() != 4 {
        return Err(Error::DimensionMismatch(format!("expected a two-qubit state, got dim {}", state.dim())));
    }
    let mut problem = ConicProblem::new();
    let (om, map) = add_extension(&mut problem, shape, ppt, "Omega")?;
    problem.add_equality(Equality::new("extends state", state.clone()).mapped(om, 1.0, map))?;
    let cert = conic::solve(&problem, tol)?;
    match cert.status {
        Status::Feasible => {
            let raw = cert.primal.as_ref().expect("feasible").blocks[0].matrix().clone();
            let sym = HermitianOperator::from_matrix_unchecked(twirl(&raw, &shape));
            let residual = max_marginal_gap(sym.matrix(), &shape, state.matrix());
            let extension = SymmetricExtension {
                shape,
                min_eigenvalue: sym.min_eigenvalue(),
                operator: sym,
                marginal_residual: residual,
            };
            Ok(SymExtOutcome {
                feasible: true,
                certificate: cert,
                extension: Some(extension),
            })
        }
        Status::Infeasible => Ok(SymExtOutcome {
            feasible: false,
            certificate: cert,
            extension: None,
        }),
        Status::NumericalFailure => Err(numerical_failure(&cert)),
    }
}

/// Classes of states with a known LHV model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum LhvClass {
    /// Class (i): noisy Bell dictionary.
    NoisyBell,
    /// Class (ii): symmetric extension to three copies of A.
    SymExtA2,
    /// Class (iii): symmetric extension to `n_bob` copies of B.
    SymExtB { n_bob: usize },
}

impl fmt::Display for LhvClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LhvClass::NoisyBell => write!(f, "noisy_bell"),
            LhvClass::SymExtA2 => write!(f, "sym_ext_A_2"),
            LhvClass::SymExtB { n_bob } => write!(f, "sym_ext_B_{}", n_bob - 1),
        }
    }
}

impl LhvClass {
    /// Accepts `noisy_bell`, `sym_ext_A_2`, `sym_ext_B` (with `n_bob`) and
    /// `sym_ext_B_<m>` (`m` extensions, so `n_bob = m + 1`).
    pub fn parse(name: &str, n_bob: Option<usize>) -> Result<Self> {
        let class = match name {
            "noisy_bell" => LhvClass::NoisyBell,
            "sym_ext_A_2" => LhvClass::SymExtA2,
            "sym_ext_B" => {
                let n = n_bob.ok_or_else(|| Error::UnknownClass("sym_ext_B requires n_bob".into()))?;
                LhvClass::SymExtB { n_bob: n }
            }
            other => match other.strip_prefix("sym_ext_B_").and_then(|m| m.parse::<usize>().ok()) {
                Some(m) => {
                    if n_bob.is_some_and(|n| n != m + 1) {
                        return Err(Error::UnknownClass(format!("{other} conflicts with n_bob = {}", n_bob.unwrap())));
                    }
                    LhvClass::SymExtB { n_bob: m + 1 }
                }
                None => return Err(Error::UnknownClass(other.to_string())),
            },
        };
        if let LhvClass::SymExtB { n_bob } = class {
            ExtensionShape::new(n_bob, Side::B)?;
        }
        Ok(class)
    }

    /// Parses a comma- or plus-separated list.
    pub fn parse_list(list: &str, n_bob: Option<usize>) -> Result<Vec<Self>> {
        let mut out: Vec<Self> = Vec::new();
        for name in list.split([',', '+']).map(str::trim).filter(|s| !s.is_empty()) {
            let c = Self::parse(name, n_bob)?;
            if !out.contains(&c) {
                out.push(c);
            }
        }
        if out.is_empty() {
            return Err(Error::UnknownClass("empty class list".into()));
        }
        Ok(out)
    }

    fn shape(&self) -> Option<ExtensionShape> {
        match self {
            LhvClass::NoisyBell => None,
            LhvClass::SymExtA2 => Some(ExtensionShape {
                copies: CLASS_II_COPIES,
                side: Side::A,
            }),
            LhvClass::SymExtB { n_bob } => Some(ExtensionShape {
                copies: *n_bob,
                side: Side::B,
            }),
        }
    }
}

pub fn classes_tag(classes: &[LhvClass]) -> String {
    classes.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("+")
}

/// Default classes: every class without restrictions on Bob.
pub fn full_classes() -> Vec<LhvClass> {
    vec![LhvClass::NoisyBell, LhvClass::SymExtA2]
}

struct LhvModel {
    problem: ConicProblem,
    dictionary: Vec<HermitianOperator>,
    dict_weights: Vec<ScalarId>,
    extensions: Vec<(LhvClass, ExtensionShape, BlockId, LinearMap)>,
}

enum Target<'a> {
    Fixed(&'a HermitianOperator),
    /// `λ·pure + (1−λ)·noise` with `λ` maximized.
    Family(&'a HermitianOperator, &'a HermitianOperator),
}

fn build_model(target: Target<'_>, ua: &EulerAngles, classes: &[LhvClass], ppt: bool) -> Result<LhvModel> {
    let mut problem = ConicProblem::new();
    let mut dictionary = Vec::new();
    let mut dict_weights = Vec::new();
    let mut extensions = Vec::new();
    for class in classes {
        match class.shape() {
            None => {
                for (j, d) in noisy_bell_dictionary(ua).into_iter().enumerate() {
                    dict_weights.push(problem.add_scalar(format!("w[{j}]"), 0.0, None)?);
                    dictionary.push(d);
                }
            }
            Some(shape) => {
                let (b, map) = add_extension(&mut problem, shape, ppt, &class.to_string())?;
                extensions.push((*class, shape, b, map));
            }
        }
    }
    let (rhs, family) = match target {
        Target::Fixed(t) => (t.clone(), None),
        Target::Family(pure, noise) => (noise.clone(), Some(pure - noise)),
    };
    let mut eq = Equality::new("decomposition", rhs);
    for (w, d) in dict_weights.iter().zip(&dictionary) {
        eq = eq.scalar(*w, d.clone());
    }
    for (_, _, b, map) in &extensions {
        eq = eq.mapped(*b, 1.0, map.clone());
    }
    if let Some(diff) = family {
        let lam = problem.add_scalar("lambda", 0.0, Some(1.0))?;
        eq = eq.scalar(lam, -&diff);
        problem.add_equality(eq)?;
        problem.maximize_scalar(lam)?;
    } else {
        problem.add_equality(eq)?;
    }
    Ok(LhvModel {
        problem,
        dictionary,
        dict_weights,
        extensions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Component {
    pub class: String,
    pub weight: f64,
    /// Normalized component state.
    pub state: HermitianOperator,
    /// Marginal mismatch of the underlying extension (0 for dictionary elements).
    pub certificate_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionResult {
    pub components: Vec<Component>,
    /// `max |Σ p_i ρ_i − target|`.
    pub residual: f64,
    pub certificate: ConicCertificate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum DecompositionOutcome {
    Found(DecompositionResult),
    Infeasible { certificate: ConicCertificate },
}

const WEIGHT_FLOOR: f64 = 1e-12;

fn extract(model: &LhvModel, cert: ConicCertificate, target: &HermitianOperator) -> DecompositionResult {
    let primal = cert.primal.as_ref().expect("feasible");
    let mut components = Vec::new();
    for (w, d) in model.dict_weights.iter().zip(&model.dictionary) {
        let p = primal.scalars[w.0];
        if p > WEIGHT_FLOOR {
            components.push(Component {
                class: LhvClass::NoisyBell.to_string(),
                weight: p,
                state: d.clone(),
                certificate_residual: 0.0,
            });
        }
    }
    for (class, shape, b, map) in &model.extensions {
        let omega = primal.blocks[b.0].matrix();
        let marg = HermitianOperator::from_matrix_unchecked(map.apply(omega));
        let p = marg.trace();
        if p > WEIGHT_FLOOR {
            let sym = twirl(omega, shape);
            let gap = max_marginal_gap(&sym, shape, marg.matrix()) / p;
            components.push(Component {
                class: class.to_string(),
                weight: p,
                state: marg.scale(1.0 / p),
                certificate_residual: gap,
            });
        }
    }
    let total: f64 = components.iter().map(|c| c.weight).sum();
    for c in &mut components {
        c.weight /= total;
    }
    let recon = components
        .iter()
        .fold(HermitianOperator::zeros(4), |acc, c| &acc + &c.state.scale(c.weight));
    DecompositionResult {
        residual: recon.max_abs_diff(target),
        components,
        certificate: cert,
    }
}

/// Searches for a convex decomposition of `target.state` into the given classes.
pub fn lhv_decompose(
    target: &StateFamilyPoint,
    classes: &[LhvClass],
    ppt: bool,
    tol: &SolverTolerances,
) -> Result<DecompositionOutcome> {
    let model = build_model(Target::Fixed(&target.state), &target.ua, classes, ppt)?;
    let cert = conic::solve(&model.problem, tol)?;
    match cert.status {
        Status::Feasible => Ok(DecompositionOutcome::Found(extract(&model, cert, &target.state))),
        Status::Infeasible => Ok(DecompositionOutcome::Infeasible { certificate: cert }),
        Status::NumericalFailure => Err(numerical_failure(&cert)),
    }
}

/// Largest `λ` for which `ρ(s; U_A, λ)` decomposes, with the decomposition there.
/// Class (i) alone only reaches targets with `tr_A ρ = 𝟙/2`, i.e. `s = 1/√2`.
pub fn lambda_max(
    s: f64,
    ua: EulerAngles,
    classes: &[LhvClass],
    ppt: bool,
    tol: &SolverTolerances,
) -> Result<(f64, DecompositionResult)> {
    let (pure, noise) = family_parts(s, &ua)?;
    let model = build_model(Target::Family(&pure, &noise), &ua, classes, ppt)?;
    let cert = conic::solve(&model.problem, tol)?;
    match (cert.status, cert.objective) {
        (Status::Feasible, Some(lam)) => {
            let lam = lam.clamp(0.0, 1.0);
            let target = &pure.scale(lam) + &noise.scale(1.0 - lam);
            Ok((lam, extract(&model, cert, &target)))
        }
        (Status::Infeasible, _) => Err(Error::NoDecomposition { s }),
        _ => Err(numerical_failure(&cert)),
    }
}

/// Bisection on [`lhv_decompose`]; cross-check for [`lambda_max`].
pub fn lambda_max_bisection(
    s: f64,
    ua: EulerAngles,
    classes: &[LhvClass],
    width: f64,
    tol: &SolverTolerances,
) -> Result<f64> {
    crate::decomposition::bisect(width, |l| {
        let point = state_family(s, ua, l)?;
        Ok(matches!(lhv_decompose(&point, classes, false, tol)?, DecompositionOutcome::Found(_)))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    pub s: f64,
    pub lambda_max: f64,
    /// Sample attaining the minimum over `U_A`.
    pub ua: EulerAngles,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveTable {
    pub classes: String,
    pub ua_samples: usize,
    pub sampling: String,
    pub rows: Vec<CurveRow>,
}

impl CurveTable {
    pub fn write_csv<W: Write>(&self, out: W) -> std::result::Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["s", "lambda_max", "ua_alpha", "ua_beta", "ua_gamma", "classes"])?;
        for r in &self.rows {
            w.write_record([
                fmt12(r.s),
                fmt12(r.lambda_max),
                fmt12(r.ua.alpha),
                fmt12(r.ua.beta),
                fmt12(r.ua.gamma),
                self.classes.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `v` rounded to 12 significant digits.
pub fn round12(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{v:.11e}").parse().expect("float formatting parses")
}

/// Number formatted with 12 significant digits.
pub fn fmt12(v: f64) -> String {
    format!("{}", round12(v))
}

/// `λ_max(s) = min over U_A samples of` [`lambda_max`], parallel over all pairs.
pub fn scan_lambda_max(
    s_grid: &[f64],
    ua: &[EulerAngles],
    classes: &[LhvClass],
    ppt: bool,
    sampling: &str,
    tol: &SolverTolerances,
) -> Result<CurveTable> {
    if s_grid.is_empty() || ua.is_empty() {
        return Err(Error::RangeError("scan needs at least one s and one U_A sample".into()));
    }
    let tasks: Vec<(usize, usize)> = (0..s_grid.len()).flat_map(|i| (0..ua.len()).map(move |j| (i, j))).collect();
    let values: Vec<Result<f64>> = tasks
        .par_iter()
        .map(|&(i, j)| lambda_max(s_grid[i], ua[j], classes, ppt, tol).map(|(l, _)| l))
        .collect();
    let mut rows = Vec::with_capacity(s_grid.len());
    for (i, &s) in s_grid.iter().enumerate() {
        let mut best: Option<(f64, usize)> = None;
        for (j, _) in ua.iter().enumerate() {
            let v = values[i * ua.len() + j].clone()?;
            if best.is_none_or(|(b, _)| v < b) {
                best = Some((v, j));
            }
        }
        let (lambda_max, j) = best.expect("non-empty");
        rows.push(CurveRow { s, lambda_max, ua: ua[j] });
    }
    Ok(CurveTable {
        classes: classes_tag(classes),
        ua_samples: ua.len(),
        sampling: sampling.to_string(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> SolverTolerances {
        SolverTolerances::default()
    }

    #[test]
    fn clifford_group_has_24_elements() {
        let g = clifford_group();
        assert_eq!(g.len(), 24);
        for u in &g {
            assert!((u * u.adjoint() - CMatrix::identity(2, 2)).norm() < 1e-12);
        }
    }

    #[test]
    fn euler_identity_and_unitarity() {
        assert!((EulerAngles::IDENTITY.unitary() - CMatrix::identity(2, 2)).norm() < 1e-15);
        let u = EulerAngles::new(0.3, 1.1, -2.0).unitary();
        assert!((&u * u.adjoint() - CMatrix::identity(2, 2)).norm() < 1e-14);
        assert_eq!(default_ua_samples(1).len(), 266);
    }

    #[test]
    fn family_limits() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let p = state_family(s, EulerAngles::IDENTITY, 1.0).unwrap();
        assert!(p.state.max_abs_diff(&HermitianOperator::max_entangled(2)) < 1e-15);
        let p = state_family(0.9, EulerAngles::new(0.2, 0.4, 0.6), 0.0).unwrap();
        let expected = HermitianOperator::identity(2)
            .scale(0.5)
            .tensor(&HermitianOperator::from_real_diagonal(&[0.81, 0.19]));
        assert!(p.state.max_abs_diff(&expected) < 1e-15);
        assert!(state_family(0.5, EulerAngles::IDENTITY, 0.5).is_err());
        assert!(state_family(0.8, EulerAngles::IDENTITY, 1.5).is_err());
    }

    #[test]
    fn permutation_twirl_is_symmetric() {
        let shape = ExtensionShape::new(3, Side::A).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = crate::random::random_density(&mut rng, 16, 16);
        let t = twirl(m.matrix(), &shape);
        let swapped = permute_systems(&t, &shape.dims(), &[1, 0, 2, 3]);
        assert!((swapped - &t).norm() < 1e-14);
        assert!((t.trace() - C64::new(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn sym_ext_examples() {
        let phi = HermitianOperator::max_entangled(2);
        assert!(!sym_ext_feasible(&phi, 2, Side::A, false, &tol()).unwrap().feasible);
        let sep = HermitianOperator::from_real_diagonal(&[0.5, 0.0, 0.0, 0.5]);
        let out = sym_ext_feasible(&sep, 4, Side::B, false, &tol()).unwrap();
        assert!(out.feasible);
        assert!(out.extension.unwrap().marginal_residual < 1e-7);
        assert!(matches!(
            sym_ext_feasible(&sep, 7, Side::B, false, &tol()),
            Err(Error::TooManyCopies { copies: 7, limit: 6 })
        ));
    }

    #[test]
    fn class_parsing() {
        assert_eq!(LhvClass::parse("sym_ext_B", Some(4)).unwrap(), LhvClass::SymExtB { n_bob: 4 });
        assert_eq!(LhvClass::parse("sym_ext_B_5", None).unwrap(), LhvClass::SymExtB { n_bob: 6 });
        assert!(matches!(LhvClass::parse("sym_ext_B_6", None), Err(Error::TooManyCopies { .. })));
        assert!(matches!(LhvClass::parse("bogus", None), Err(Error::UnknownClass(_))));
        let list = LhvClass::parse_list("noisy_bell+sym_ext_A_2", None).unwrap();
        assert_eq!(classes_tag(&list), "noisy_bell+sym_ext_A_2");
    }

    #[test]
    fn noisy_bell_target_is_one_dictionary_element() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let point = state_family(s, EulerAngles::IDENTITY, 0.6).unwrap();
        match lhv_decompose(&point, &[LhvClass::NoisyBell], false, &tol()).unwrap() {
            DecompositionOutcome::Found(r) => {
                assert!(r.residual < 1e-7);
                let total: f64 = r.components.iter().map(|c| c.weight).sum();
                assert!((total - 1.0).abs() < 1e-9);
            }
            DecompositionOutcome::Infeasible { .. } => panic!("noisy Bell state at 0.6 must decompose"),
        }
        let beyond = state_family(s, EulerAngles::IDENTITY, 0.66).unwrap();
        assert!(matches!(
            lhv_decompose(&beyond, &[LhvClass::NoisyBell], false, &tol()).unwrap(),
            DecompositionOutcome::Infeasible { .. }
        ));
    }

    #[test]
    fn csv_layout() {
        let table = CurveTable {
            classes: "noisy_bell".into(),
            ua_samples: 1,
            sampling: "identity".into(),
            rows: vec![CurveRow {
                s: 1.0,
                lambda_max: 0.123456789012345,
                ua: EulerAngles::IDENTITY,
            }],
        };
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "s,lambda_max,ua_alpha,ua_beta,ua_gamma,classes\n1,0.123456789012,0,0,0,noisy_bell\n");
    }
}
