//! Modeled LP-solver costs used to compare solver families at equal accuracy.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Matrix-multiplication exponent used for the exact classical solver.
pub const MATMUL_EXPONENT: f64 = 2.372;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostModel {
    /// `sqrt(m + d) · eps^-2.5`
    Quantum,
    /// `(m + d) · eps^-2`
    ClassicalApprox,
    /// `max(m, d)^2.372`
    ClassicalExact,
}

pub fn modeled_cost(model: CostModel, m: usize, d: usize, eps: f64) -> Result<f64> {
    let size = (m + d) as f64;
    match model {
        CostModel::ClassicalExact => Ok((m.max(d) as f64).powf(MATMUL_EXPONENT)),
        _ if !(eps > 0.0 && eps.is_finite()) => invalid("eps must be positive"),
        CostModel::Quantum => Ok(size.sqrt() * eps.powf(-2.5)),
        CostModel::ClassicalApprox => Ok(size * eps.powi(-2)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        let q = modeled_cost(CostModel::Quantum, 3, 2, 0.1).unwrap();
        assert!((q - 5f64.sqrt() * 10f64.powf(2.5)).abs() < 1e-9);
        assert!((q - 707.1).abs() < 0.05);
        let c = modeled_cost(CostModel::ClassicalApprox, 3, 2, 0.1).unwrap();
        assert!((c - 500.0).abs() < 1e-9);
    }

    #[test]
    fn quantum_wins_only_for_large_instances() {
        let at = |n: usize| {
            (
                modeled_cost(CostModel::Quantum, n, n, 0.1).unwrap(),
                modeled_cost(CostModel::ClassicalApprox, n, n, 0.1).unwrap(),
            )
        };
        let (q, c) = at(2);
        assert!(q > c);
        let (q, c) = at(1000);
        assert!(q < c);
    }
}
