//! POVMs, measurement sets, white noise and the named constructions.
//!
//! Outcomes are positional: for dichotomic measurements index 0 is the `+`
//! outcome and index 1 the `−` outcome.

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::hermitian::{hermitian_eigenvalues, CMatrix, HermitianOperator, C64, PSD_TOL};
use crate::json;
use crate::random::{ginibre, haar_unitary};

/// Outcome of [`validate_povm`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PovmReport {
    /// Smallest eigenvalue over all effects.
    pub min_eigenvalue: f64,
    /// Index of the effect attaining `min_eigenvalue`.
    pub worst_effect: usize,
    /// Largest entry of `Σ_x E(x) − 𝟙` in modulus.
    pub completeness_defect: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Povm {
    dim: usize,
    effects: Vec<HermitianOperator>,
}

impl Povm {
    /// Checks positivity and completeness at [`PSD_TOL`].
    pub fn new(effects: Vec<HermitianOperator>) -> Result<Self> {
        let p = Self::from_effects_unchecked(effects)?;
        let report = validate_povm(&p, PSD_TOL)?;
        if !report.passed {
            return Err(Error::InvalidMeasurement(format!(
                "effect {} has eigenvalue {:.3e}, completeness defect {:.3e}",
                report.worst_effect, report.min_eigenvalue, report.completeness_defect
            )));
        }
        Ok(p)
    }

    /// Only checks that the effects are non-empty and of equal dimension.
    pub fn from_effects_unchecked(effects: Vec<HermitianOperator>) -> Result<Self> {
        let dim = effects.first().ok_or(Error::EmptyOutcomeList)?.dim();
        if let Some(bad) = effects.iter().find(|e| e.dim() != dim) {
            return Err(Error::DimensionMismatch(format!("effect of dim {} in a dim-{dim} POVM", bad.dim())));
        }
        Ok(Self { dim, effects })
    }

    /// Projective measurement onto the columns of a unitary.
    pub fn from_basis(u: &CMatrix) -> Result<Self> {
        let effects = (0..u.ncols())
            .map(|j| HermitianOperator::projector(&u.column(j).into_owned()))
            .collect();
        Self::new(effects)
    }

    /// Dichotomic qubit POVM `(𝟙 ± r·σ)/2`.
    pub fn qubit_dichotomic(r: [f64; 3]) -> Result<Self> {
        let plus = qubit_effect(1.0, r);
        let minus = qubit_effect(1.0, [-r[0], -r[1], -r[2]]);
        Self::new(vec![plus, minus])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn outcomes(&self) -> usize {
        self.effects.len()
    }

    pub fn effects(&self) -> &[HermitianOperator] {
        &self.effects
    }

    pub fn effect(&self, x: usize) -> &HermitianOperator {
        &self.effects[x]
    }

    /// Effect-wise white noise `λE + (1−λ)/d·tr(E)·𝟙`.
    pub fn depolarize(&self, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Self {
            dim: self.dim,
            effects: self.effects.iter().map(|e| depolarize_effect(e, lambda)).collect(),
        })
    }

    /// Random POVM: `S^{-1/2} W_x S^{-1/2}` with Wishart `W_x` of the given rank.
    pub fn random(rng: &mut impl Rng, dim: usize, outcomes: usize, rank: usize) -> Self {
        let ws: Vec<CMatrix> = (0..outcomes)
            .map(|_| {
                let g = ginibre(rng, dim, rank.max(1));
                &g * g.adjoint()
            })
            .collect();
        let total: CMatrix = ws.iter().fold(CMatrix::zeros(dim, dim), |acc, w| acc + w);
        let eig = nalgebra::SymmetricEigen::new(total);
        let inv_sqrt = &eig.eigenvectors
            * CMatrix::from_diagonal(&eig.eigenvalues.map(|l| C64::new(l.max(1e-300).sqrt().recip(), 0.0)))
            * eig.eigenvectors.adjoint();
        let effects = ws
            .iter()
            .map(|w| HermitianOperator::from_matrix_unchecked(&inv_sqrt * w * &inv_sqrt))
            .collect();
        Self { dim, effects }
    }

    /// Projective measurement in a Haar-random basis.
    pub fn random_pvm(rng: &mut impl Rng, dim: usize) -> Self {
        Self::from_basis(&haar_unitary(rng, dim)).expect("unitary columns form a PVM")
    }
}

pub(crate) fn qubit_effect(weight: f64, r: [f64; 3]) -> HermitianOperator {
    HermitianOperator::from_bloch(&crate::hermitian::BlochVector::new(weight, r))
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::RangeError(format!("noise parameter {lambda} outside [0, 1]")));
    }
    Ok(())
}

pub(crate) fn depolarize_effect(e: &HermitianOperator, lambda: f64) -> HermitianOperator {
    let d = e.dim();
    let noise = HermitianOperator::identity(d).scale((1.0 - lambda) * e.trace() / d as f64);
    &e.scale(lambda) + &noise
}

/// Checks effect positivity and completeness.
pub fn validate_povm(p: &Povm, tol: f64) -> Result<PovmReport> {
    if p.effects.is_empty() {
        return Err(Error::EmptyOutcomeList);
    }
    let mut min_eig = f64::INFINITY;
    let mut worst = 0;
    let mut sum = CMatrix::zeros(p.dim, p.dim);
    for (i, e) in p.effects.iter().enumerate() {
        let ev = hermitian_eigenvalues(e.matrix())[0];
        if ev < min_eig {
            min_eig = ev;
            worst = i;
        }
        sum += e.matrix();
    }
    sum -= CMatrix::identity(p.dim, p.dim);
    let defect = sum.iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(PovmReport {
        min_eigenvalue: min_eig,
        worst_effect: worst,
        completeness_defect: defect,
        passed: min_eig >= -tol && defect <= tol,
    })
}

/// Measurements `A_k`, all on the same Hilbert space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasurementSet {
    dim: usize,
    povms: Vec<Povm>,
}

impl MeasurementSet {
    pub fn new(povms: Vec<Povm>) -> Result<Self> {
        let dim = povms
            .first()
            .ok_or_else(|| Error::InvalidMeasurement("empty measurement set".into()))?
            .dim;
        if let Some(bad) = povms.iter().position(|p| p.dim != dim) {
            return Err(Error::DimensionMismatch(format!(
                "measurement {bad} has dim {}, expected {dim}",
                povms[bad].dim
            )));
        }
        Ok(Self { dim, povms })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.povms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.povms.is_empty()
    }

    pub fn povms(&self) -> &[Povm] {
        &self.povms
    }

    pub fn povm(&self, k: usize) -> &Povm {
        &self.povms[k]
    }

    pub fn outcome_counts(&self) -> Vec<usize> {
        self.povms.iter().map(Povm::outcomes).collect()
    }

    /// `A_k(x)`.
    pub fn effect(&self, k: usize, x: usize) -> &HermitianOperator {
        &self.povms[k].effects[x]
    }

    pub fn with(&self, extra: Povm) -> Result<Self> {
        let mut povms = self.povms.clone();
        povms.push(extra);
        Self::new(povms)
    }

    pub fn subset(&self, ks: &[usize]) -> Result<Self> {
        Self::new(ks.iter().map(|&k| self.povms[k].clone()).collect())
    }

    /// Largest completeness or positivity violation over all measurements.
    pub fn validate(&self, tol: f64) -> Result<Vec<PovmReport>> {
        self.povms.iter().map(|p| validate_povm(p, tol)).collect()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "dim": self.dim,
            "povms": self.povms.iter().map(|p| p.effects.iter().map(json::matrix_to_value).collect::<Vec<_>>()).collect::<Vec<_>>(),
        })
    }

    /// Decodes `{"dim": d, "povms": [[matrix, ...], ...]}` and validates at [`PSD_TOL`].
    pub fn from_json(v: &Value) -> Result<Self> {
        let dim = json::as_usize(json::field(v, "dim", "$")?, "dim")?;
        let povms = json::as_array(json::field(v, "povms", "$")?, "povms")?;
        if povms.is_empty() {
            return Err(json::err("povms", "no measurements"));
        }
        let mut out = Vec::with_capacity(povms.len());
        for (k, p) in povms.iter().enumerate() {
            let pp = format!("povms[{k}]");
            let effects = json::as_array(p, &pp)?;
            if effects.is_empty() {
                return Err(json::err(&pp, Error::EmptyOutcomeList));
            }
            let mut ops = Vec::with_capacity(effects.len());
            for (x, e) in effects.iter().enumerate() {
                let ep = format!("{pp}[{x}]");
                let op = json::matrix_from_value(e, &ep)?;
                if op.dim() != dim {
                    return Err(json::err(&ep, format!("effect has dim {}, expected {dim}", op.dim())));
                }
                ops.push(op);
            }
            out.push(Povm::new(ops).map_err(|e| json::err(&pp, e))?);
        }
        Self::new(out)
    }
}

/// White noise applied to every effect of every measurement.
pub fn depolarize(set: &MeasurementSet, lambda: f64) -> Result<MeasurementSet> {
    check_lambda(lambda)?;
    MeasurementSet::new(set.povms.iter().map(|p| p.depolarize(lambda)).collect::<Result<_>>()?)
}

/// Parameters of the named constructions; unused fields are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetParams {
    /// Sharpness `η` (or `λ` for `spin_directions`).
    pub eta: f64,
    /// Unit vectors for `spin_directions`.
    pub directions: Vec<[f64; 3]>,
}

impl Default for SetParams {
    fn default() -> Self {
        Self {
            eta: 1.0,
            directions: Vec::new(),
        }
    }
}

impl SetParams {
    pub fn eta(eta: f64) -> Self {
        Self {
            eta,
            ..Self::default()
        }
    }
}

pub const STANDARD_NAMES: [&str; 6] = [
    "pauli_xz",
    "pauli_xyz",
    "spin_directions",
    "coexistence_c3_pair",
    "coexistence_c3_parent",
    "smeared_joint_G",
];

const E_X: [f64; 3] = [1.0, 0.0, 0.0];
const E_Y: [f64; 3] = [0.0, 1.0, 0.0];
const E_Z: [f64; 3] = [0.0, 0.0, 1.0];

fn spin(eta: f64, n: [f64; 3]) -> Result<Povm> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::RangeError(format!("sharpness {eta} outside [0, 1]")));
    }
    Povm::qubit_dichotomic([eta * n[0], eta * n[1], eta * n[2]])
}

fn phi_c3() -> DVector<C64> {
    DVector::from_element(3, C64::new(1.0 / 3f64.sqrt(), 0.0))
}

/// `{A₁, A₂}` on C³: `A₁(i) = ½(𝟙 − |i⟩⟨i|)`, `A₂ = {½|φ⟩⟨φ|, 𝟙 − ½|φ⟩⟨φ|}`.
pub fn coexistence_c3_pair() -> MeasurementSet {
    let id = HermitianOperator::identity(3);
    let a1 = (0..3)
        .map(|i| (&id - &HermitianOperator::basis_projector(3, i)).scale(0.5))
        .collect();
    let half_phi = HermitianOperator::projector(&phi_c3()).scale(0.5);
    let a2 = vec![half_phi.clone(), &id - &half_phi];
    MeasurementSet::new(vec![Povm::new(a1).expect("valid"), Povm::new(a2).expect("valid")]).expect("same dim")
}

/// Five-outcome `G` whose range contains both effects families of the pair.
pub fn coexistence_c3_parent() -> Povm {
    let id = HermitianOperator::identity(3);
    let phi = HermitianOperator::projector(&phi_c3());
    let mut effects: Vec<_> = (0..3).map(|i| HermitianOperator::basis_projector(3, i).scale(0.5)).collect();
    effects.push(phi.scale(0.5));
    effects.push((&id - &phi).scale(0.5));
    Povm::new(effects).expect("valid")
}

/// `G(i,j) = ¼(𝟙 + (i/√2)σ_x + (j/√2)σ_z)` with outcome order `(+,+), (+,−), (−,+), (−,−)`.
pub fn smeared_joint_g() -> Povm {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let effects = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)]
        .iter()
        .map(|&(i, j)| qubit_effect(0.5, [0.5 * i * s, 0.0, 0.5 * j * s]))
        .collect();
    Povm::new(effects).expect("valid")
}

/// Named constructions; single-POVM constructions return a one-element set.
pub fn standard_set(name: &str, params: &SetParams) -> Result<MeasurementSet> {
    match name {
        "pauli_xz" => MeasurementSet::new(vec![spin(params.eta, E_X)?, spin(params.eta, E_Z)?]),
        "pauli_xyz" => MeasurementSet::new(vec![spin(params.eta, E_X)?, spin(params.eta, E_Y)?, spin(params.eta, E_Z)?]),
        "spin_directions" => {
            if params.directions.is_empty() {
                return Err(Error::RangeError("spin_directions needs at least one direction".into()));
            }
            let povms = params
                .directions
                .iter()
                .map(|n| {
                    let norm = crate::hermitian::norm3(n);
                    if (norm - 1.0).abs() > 1e-9 {
                        return Err(Error::RangeError(format!("direction {n:?} is not a unit vector")));
                    }
                    spin(params.eta, *n)
                })
                .collect::<Result<_>>()?;
            MeasurementSet::new(povms)
        }
        "coexistence_c3_pair" => Ok(coexistence_c3_pair()),
        "coexistence_c3_parent" => MeasurementSet::new(vec![coexistence_c3_parent()]),
        "smeared_joint_G" => MeasurementSet::new(vec![smeared_joint_g()]),
        other => Err(Error::UnknownName(other.to_string())),
    }
}

/// Mutually unbiased bases in prime dimension `d` (computational plus Fourier-type).
pub fn mub_pvms(d: usize, count: usize) -> Result<MeasurementSet> {
    if d < 2 || !(2..d).all(|p| !d.is_multiple_of(p)) {
        return Err(Error::RangeError(format!("MUB construction needs prime d, got {d}")));
    }
    if count == 0 || count > d + 1 {
        return Err(Error::RangeError(format!("{count} MUBs requested in d = {d}")));
    }
    let mut povms = vec![Povm::from_basis(&CMatrix::identity(d, d))?];
    let omega = |k: f64| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k / d as f64);
    for b in 0..count.saturating_sub(1) {
        // |e_j^b⟩ = d^{-1/2} Σ_n ω^{b n² + j n}; for d = 2 use the quadratic phase i^{n} instead
        let u = CMatrix::from_fn(d, d, |n, j| {
            let (nf, jf, bf) = (n as f64, j as f64, b as f64);
            let quad = if d == 2 { C64::new(0.0, 1.0).powf(bf * nf) } else { omega(bf * nf * nf) };
            quad * omega(jf * nf) / (d as f64).sqrt()
        });
        povms.push(Povm::from_basis(&u)?);
    }
    MeasurementSet::new(povms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: &HermitianOperator, b: &HermitianOperator, tol: f64) -> bool {
        a.max_abs_diff(b) < tol
    }

    #[test]
    fn trivial_and_sharp_povms_validate() {
        let half = HermitianOperator::identity(2).scale(0.5);
        assert!(Povm::new(vec![half.clone(), half]).is_ok());
        assert!(Povm::qubit_dichotomic(E_X).is_ok());
        assert!(Povm::qubit_dichotomic([1.1, 0.0, 0.0]).is_err());
        assert_eq!(Povm::new(vec![]), Err(Error::EmptyOutcomeList));
    }

    #[test]
    fn c3_parent_validates_tightly() {
        let g = coexistence_c3_parent();
        let r = validate_povm(&g, 1e-12).unwrap();
        assert!(r.passed);
        assert!(r.min_eigenvalue.abs() < 1e-12);
    }

    #[test]
    fn depolarize_examples() {
        let set = standard_set("pauli_xz", &SetParams::default()).unwrap();
        assert_eq!(depolarize(&set, 1.0).unwrap(), set);
        let zero = depolarize(&set, 0.0).unwrap();
        for p in zero.povms() {
            for e in p.effects() {
                assert!(close(e, &HermitianOperator::identity(2).scale(0.5), 1e-15));
            }
        }
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let half = depolarize(&set, s).unwrap();
        let expected = Povm::qubit_dichotomic([s, 0.0, 0.0]).unwrap();
        assert!(close(half.effect(0, 0), expected.effect(0), 1e-15));
        assert!(close(half.effect(0, 1), expected.effect(1), 1e-15));
        assert!(matches!(depolarize(&set, 1.5), Err(Error::RangeError(_))));
    }

    #[test]
    fn depolarize_composes() {
        let set = standard_set("pauli_xyz", &SetParams::eta(0.9)).unwrap();
        let twice = depolarize(&depolarize(&set, 0.7).unwrap(), 0.4).unwrap();
        let once = depolarize(&set, 0.28).unwrap();
        for k in 0..3 {
            for x in 0..2 {
                assert!(close(twice.effect(k, x), once.effect(k, x), 1e-12));
            }
        }
    }

    #[test]
    fn smeared_joint_marginals() {
        let g = smeared_joint_g();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let sx = Povm::qubit_dichotomic([s, 0.0, 0.0]).unwrap();
        let sz = Povm::qubit_dichotomic([0.0, 0.0, s]).unwrap();
        // outcome index 2i + j
        for i in 0..2 {
            let m = g.effect(2 * i) + g.effect(2 * i + 1);
            assert!(close(&m, sx.effect(i), 1e-15));
            let m = g.effect(i) + g.effect(2 + i);
            assert!(close(&m, sz.effect(i), 1e-15));
        }
    }

    #[test]
    fn c3_pair_structure() {
        let pair = coexistence_c3_pair();
        assert_eq!(pair.outcome_counts(), vec![3, 2]);
        let sum: HermitianOperator = pair.povm(0).effects().iter().fold(HermitianOperator::zeros(3), |a, e| &a + e);
        assert!(close(&sum, &HermitianOperator::identity(3), 1e-15));
        // every effect of the pair is a sum of parent effects
        let g = coexistence_c3_parent();
        let a1_0 = g.effect(1) + g.effect(2);
        assert!(close(&a1_0, pair.effect(0, 0), 1e-15));
        assert!(close(g.effect(3), pair.effect(1, 0), 1e-15));
    }

    #[test]
    fn spin_directions_orthonormal_gives_pvms() {
        let params = SetParams {
            eta: 1.0,
            directions: vec![E_X, E_Y, E_Z],
        };
        let set = standard_set("spin_directions", &params).unwrap();
        for p in set.povms() {
            for e in p.effects() {
                let sq = HermitianOperator::from_matrix_unchecked(e.product(e));
                assert!(close(&sq, e, 1e-15));
            }
        }
        let bad = SetParams {
            eta: 1.0,
            directions: vec![[1.0, 1.0, 0.0]],
        };
        assert!(standard_set("spin_directions", &bad).is_err());
        assert!(matches!(standard_set("nope", &params), Err(Error::UnknownName(_))));
    }

    #[test]
    fn every_standard_set_validates() {
        let params = SetParams {
            eta: 0.8,
            directions: vec![E_Z],
        };
        for name in STANDARD_NAMES {
            let set = standard_set(name, &params).unwrap();
            for r in set.validate(1e-12).unwrap() {
                assert!(r.passed, "{name}");
            }
        }
    }

    #[test]
    fn mubs_are_unbiased() {
        for (d, count) in [(2, 3), (3, 4), (5, 3)] {
            let set = mub_pvms(d, count).unwrap();
            for a in 0..count {
                for b in a + 1..count {
                    for x in 0..d {
                        for y in 0..d {
                            let overlap = set.effect(a, x).inner(set.effect(b, y));
                            assert!((overlap - 1.0 / d as f64).abs() < 1e-12, "d={d} {a}{b}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn random_povms_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let p = Povm::random(&mut rng, 3, 4, 1);
            assert!(validate_povm(&p, 1e-10).unwrap().passed);
        }
    }

    #[test]
    fn json_round_trip_and_paths() {
        let set = coexistence_c3_pair();
        let v = set.to_json();
        assert_eq!(MeasurementSet::from_json(&v).unwrap().povms().len(), 2);
        let mut bad = v.clone();
        bad["povms"][1][0][0][0][0] = json!(5.0);
        let e = MeasurementSet::from_json(&bad).unwrap_err();
        assert!(e.to_string().contains("povms[1]"), "{e}");
        let mut bad = v;
        bad["dim"] = json!(2);
        let e = MeasurementSet::from_json(&bad).unwrap_err();
        assert!(e.to_string().contains("povms[0][0]"), "{e}");
    }
}
