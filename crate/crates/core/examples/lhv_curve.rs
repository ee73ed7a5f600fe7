//! Prints λ_max(s) at U_A = 𝟙, with and without a six-copy extension on Bob.

use std::time::Instant;

use jmsteer::conic::SolverTolerances;
use jmsteer::lhv::{full_classes, lambda_max, EulerAngles, LhvClass};

fn main() {
    let tol = SolverTolerances::default();
    let with_bob = [LhvClass::NoisyBell, LhvClass::SymExtA2, LhvClass::SymExtB { n_bob: 6 }];
    println!("{:>8} {:>12} {:>12}", "s", "full", "with B ext");
    for s in [std::f64::consts::FRAC_1_SQRT_2, 0.75, 0.8, 0.835, 0.87, 0.9, 0.95] {
        let start = Instant::now();
        let (full, _) = lambda_max(s, EulerAngles::IDENTITY, &full_classes(), false, &tol).unwrap();
        let (bob, _) = lambda_max(s, EulerAngles::IDENTITY, &with_bob, false, &tol).unwrap();
        println!("{s:>8.4} {full:>12.6} {bob:>12.6}   ({:.1?})", start.elapsed());
    }
}
