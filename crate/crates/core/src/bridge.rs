//! Maps between measurement sets and maximally-entangled assemblages,
//! state/measurement noise duality and the PVM noise threshold.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hermitian::{HermitianOperator, Side};
use crate::measurements::{depolarize, MeasurementSet, Povm};
use crate::steering::{check_state, conditional_states, Assemblage};

/// Tolerance on `ρ_B = 𝟙/d` for [`measurements_of`].
pub const MARGINAL_TOL: f64 = 1e-8;

/// `σ_{x|k} = A_k(x)ᵀ/d`, the assemblage of `|φ⁺⟩` without forming the state.
pub fn assemblage_of(set: &MeasurementSet) -> Assemblage {
    let d = set.dim() as f64;
    let members = set
        .povms()
        .iter()
        .map(|p| p.effects().iter().map(|e| e.transpose().scale(1.0 / d)).collect())
        .collect();
    Assemblage::from_members_unchecked(members)
}

/// `A_k(x) = d·σ_{x|k}ᵀ`; needs a maximally mixed marginal.
pub fn measurements_of(asm: &Assemblage) -> Result<MeasurementSet> {
    let d = asm.dim_b();
    let deviation = asm
        .rho_b()
        .max_abs_diff(&HermitianOperator::identity(d).scale(1.0 / d as f64));
    if deviation > MARGINAL_TOL {
        return Err(Error::MarginalNotMaximallyMixed { deviation });
    }
    let povms = asm
        .members()
        .iter()
        .map(|row| Povm::new(row.iter().map(|m| m.transpose().scale(d as f64)).collect()))
        .collect::<Result<_>>()?;
    MeasurementSet::new(povms)
}

/// `ρ^λ = λρ + (1−λ)·𝟙/d_A ⊗ tr_A ρ`.
pub fn depolarize_state(state: &HermitianOperator, d_a: usize, lambda: f64) -> Result<HermitianOperator> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::RangeError(format!("noise parameter {lambda} outside [0, 1]")));
    }
    if d_a == 0 || !state.dim().is_multiple_of(d_a) {
        return Err(Error::DimensionMismatch(format!("state dim {} not divisible by {d_a}", state.dim())));
    }
    let d_b = state.dim() / d_a;
    let rho_b = state.partial_trace((d_a, d_b), Side::B)?;
    let noise = HermitianOperator::identity(d_a).scale(1.0 / d_a as f64).tensor(&rho_b);
    Ok(&state.scale(lambda) + &noise.scale(1.0 - lambda))
}

/// Largest entry difference between the assemblages of `(ρ^λ, A)` and `(ρ, A^λ)`.
pub fn noise_duality_check(state: &HermitianOperator, alice: &MeasurementSet, lambda: f64) -> Result<f64> {
    let d_b = check_state(state, alice.dim())?;
    let noisy_state = depolarize_state(state, alice.dim(), lambda)?;
    let left = conditional_states(&noisy_state, alice, d_b);
    let right = conditional_states(state, &depolarize(alice, lambda)?, d_b);
    Ok(left
        .iter()
        .flatten()
        .zip(right.iter().flatten())
        .map(|(a, b)| a.max_abs_diff(b))
        .fold(0.0, f64::max))
}

/// `H_d` and `λ* = (H_d − 1)/(d − 1)`: white noise that makes every set of
/// sharp observables in dimension `d` jointly measurable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdTable {
    pub d: usize,
    pub harmonic: f64,
    pub lambda_star: f64,
}

fn gcd(a: u128, b: u128) -> u128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// `H_d − 1` as an exact fraction, while it fits.
fn harmonic_tail(d: usize) -> Option<(u128, u128)> {
    let (mut num, mut den) = (0u128, 1u128);
    for n in 2..=d as u128 {
        // num/den + 1/n
        let g = gcd(den, n);
        let lcm = den.checked_mul(n / g)?;
        num = num.checked_mul(lcm / den)?.checked_add(lcm / n)?;
        den = lcm;
        let r = gcd(num, den);
        num /= r;
        den /= r;
    }
    Some((num, den))
}

pub fn pvm_threshold(d: usize) -> Result<ThresholdTable> {
    if d < 2 {
        return Err(Error::RangeError(format!("threshold needs d >= 2, got {d}")));
    }
    let harmonic: f64 = (1..=d).map(|n| 1.0 / n as f64).sum();
    // one rounding when the fraction is representable, so small d are exact
    let lambda_star = match harmonic_tail(d).and_then(|(n, m)| Some((n, m.checked_mul(d as u128 - 1)?))) {
        Some((n, m)) if n < 1 << 53 && m < 1 << 53 => n as f64 / m as f64,
        _ => (harmonic - 1.0) / (d as f64 - 1.0),
    };
    Ok(ThresholdTable {
        d,
        harmonic,
        lambda_star,
    })
}
