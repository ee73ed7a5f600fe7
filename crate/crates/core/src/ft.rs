//! Fermat–Torricelli steering criterion for three unbiased qubit measurements.
//!
//! With `x_k` the Bloch vectors of Bob's normalized `+` states, the data is
//! steerable iff `min_z Σ_i ‖y_i − z‖ > 4` over the anchors
//! `y = ±x₁ ± x₂ ± x₃` with an even number of minus signs flipped.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hermitian::norm3;
use crate::steering::Assemblage;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 100_000;
/// Half-width of the band around 4 reported as marginal.
pub const VERDICT_BAND: f64 = 1e-9;
const ANCHOR_SNAP: f64 = 1e-12;

type V3 = [f64; 3];

fn sub(a: &V3, b: &V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn add(a: &V3, b: &V3) -> V3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn scale(a: &V3, c: f64) -> V3 {
    [a[0] * c, a[1] * c, a[2] * c]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FtPoint {
    pub point: V3,
    pub sum: f64,
    pub iterations: usize,
}

pub fn distance_sum(anchors: &[V3], z: &V3) -> f64 {
    anchors.iter().map(|y| norm3(&sub(y, z))).sum()
}

/// Sum of unit vectors from `z` towards the anchors, skipping anchors at `z`,
/// and the number of skipped anchors.
fn pull(anchors: &[V3], z: &V3) -> (V3, usize) {
    let mut r = [0.0; 3];
    let mut at = 0;
    for y in anchors {
        let d = sub(y, z);
        let n = norm3(&d);
        if n <= ANCHOR_SNAP {
            at += 1;
        } else {
            r = add(&r, &scale(&d, 1.0 / n));
        }
    }
    (r, at)
}

/// Geometric median by Weiszfeld iteration from the centroid.
///
/// Anchors are tested for optimality first (`‖pull‖ ≤ multiplicity`), which
/// covers the case Weiszfeld reaches only sublinearly. Iterates that land on
/// an anchor step off along the pull direction.
pub fn ft_point(anchors: &[V3], tol: f64, max_iter: usize) -> Result<FtPoint> {
    if anchors.is_empty() {
        return Err(Error::RangeError("at least one anchor is required".into()));
    }
    for y in anchors {
        let (r, at) = pull(anchors, y);
        if norm3(&r) <= at as f64 + tol {
            return Ok(FtPoint {
                point: *y,
                sum: distance_sum(anchors, y),
                iterations: 0,
            });
        }
    }
    let n = anchors.len() as f64;
    let mut z = scale(&anchors.iter().fold([0.0; 3], |acc, y| add(&acc, y)), 1.0 / n);
    for it in 1..=max_iter {
        let (r, at) = pull(anchors, &z);
        if at == 0 && norm3(&r) <= tol {
            return Ok(FtPoint {
                point: z,
                sum: distance_sum(anchors, &z),
                iterations: it - 1,
            });
        }
        if at > 0 {
            // not optimal (checked above): move a little along the descent direction
            let rn = norm3(&r);
            z = add(&z, &scale(&r, 1e-6 / rn));
            continue;
        }
        let mut num = [0.0; 3];
        let mut den = 0.0;
        for y in anchors {
            let w = 1.0 / norm3(&sub(y, &z));
            num = add(&num, &scale(y, w));
            den += w;
        }
        let next = scale(&num, 1.0 / den);
        if norm3(&sub(&next, &z)) < 1e-15 * (1.0 + norm3(&z)) {
            // fixed point to machine precision
            return Ok(FtPoint {
                point: next,
                sum: distance_sum(anchors, &next),
                iterations: it,
            });
        }
        z = next;
    }
    let (r, _) = pull(anchors, &z);
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual: norm3(&r),
    })
}

/// Bloch vectors `x_k` of Bob's normalized conditional states for outcome `+`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FtInstance {
    pub x: [V3; 3],
}

impl FtInstance {
    pub fn new(x1: V3, x2: V3, x3: V3) -> Result<Self> {
        for x in [x1, x2, x3] {
            if norm3(&x) > 1.0 + 1e-9 {
                return Err(Error::RangeError(format!("Bloch vector {x:?} longer than 1")));
            }
        }
        Ok(Self { x: [x1, x2, x3] })
    }

    /// `y₁ = x₁+x₂+x₃, y₂ = x₁−x₂−x₃, y₃ = −x₁+x₂−x₃, y₄ = −x₁−x₂+x₃`.
    pub fn anchors(&self) -> [V3; 4] {
        let [a, b, c] = self.x;
        let comb = |s: [f64; 3]| {
            let mut v = [0.0; 3];
            for i in 0..3 {
                v[i] = s[0] * a[i] + s[1] * b[i] + s[2] * c[i];
            }
            v
        };
        [
            comb([1.0, 1.0, 1.0]),
            comb([1.0, -1.0, -1.0]),
            comb([-1.0, 1.0, -1.0]),
            comb([-1.0, -1.0, 1.0]),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FtVerdict {
    Steerable,
    Unsteerable,
    Marginal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FtEvaluation {
    pub value: f64,
    pub point: V3,
    pub verdict: FtVerdict,
}

pub fn verdict(value: f64) -> FtVerdict {
    if (value - 4.0).abs() <= VERDICT_BAND {
        FtVerdict::Marginal
    } else if value > 4.0 {
        FtVerdict::Steerable
    } else {
        FtVerdict::Unsteerable
    }
}

/// Minimal four-anchor distance sum and the resulting verdict.
pub fn ft_steering_value(inst: &FtInstance) -> Result<FtEvaluation> {
    let fp = ft_point(&inst.anchors(), DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    Ok(FtEvaluation {
        value: fp.sum,
        point: fp.point,
        verdict: verdict(fp.sum),
    })
}

/// Reads `x_k` from a qubit assemblage of three unbiased dichotomic measurements.
pub fn ft_from_assemblage(asm: &Assemblage) -> Result<FtInstance> {
    if asm.dim_b() != 2 {
        return Err(Error::DimensionMismatch(format!("criterion needs a qubit, dimB = {}", asm.dim_b())));
    }
    if asm.outcome_counts() != [2, 2, 2] {
        return Err(Error::InvalidAssemblage(format!(
            "criterion needs three dichotomic measurements, got outcomes {:?}",
            asm.outcome_counts()
        )));
    }
    let rho = asm.rho_b().bloch()?;
    let deviation = (rho.weight - 1.0).abs().max(rho.norm() / 2.0);
    if deviation > 1e-8 {
        return Err(Error::NonMaximallyMixedMarginal { deviation });
    }
    let mut x = [[0.0; 3]; 3];
    for (k, xk) in x.iter_mut().enumerate() {
        let b = asm.member(k, 0).bloch()?;
        if (b.weight - 0.5).abs() > 1e-8 {
            return Err(Error::BiasedMeasurement {
                index: k,
                trace: b.weight,
            });
        }
        *xk = scale(&b.vec, 1.0 / b.weight);
    }
    FtInstance::new(x[0], x[1], x[2])
}
