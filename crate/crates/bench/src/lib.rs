//! Benchmark fixtures.

use mfac_core::controller::{CostProblem, GainPolynomial};
use mfac_core::harness::builtin;
use mfac_core::{PgVector, PseudoOrders, Scenario};

pub fn scenario(name: &str) -> Scenario {
    builtin(name).expect("built-in scenario")
}

pub fn example2_pg() -> PgVector {
    PgVector::new(PseudoOrders::new(1, 2).unwrap(), vec![-0.8, -0.5, -0.2], 0).unwrap()
}

/// Quartic cost instance with an interior minimizer.
pub fn quartic_problem() -> CostProblem {
    CostProblem {
        bracket: 0.4,
        gain: GainPolynomial::new(vec![0.9, -0.3, 0.5]).unwrap(),
        lambda: 0.2,
    }
}
