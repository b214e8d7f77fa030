//! Linear programs: an exact dense simplex, a brute-force vertex oracle, and an
//! approximate solver via reduction to a zero-sum game.

mod approx;
mod brute;
mod cost;
mod game;
mod simplex;

use serde::{Deserialize, Serialize};

pub use approx::{
    default_scale, scale_for_approx, solve_approx, solve_approx_idealized, ApproxOptions, GameSolver, ScaledLp,
};
pub use brute::brute_force_vertices;
pub use cost::{modeled_cost, CostModel};
pub use game::{build_game, solve_zero_sum_mw, solve_zero_sum_optimistic, GameMatrix, GameSolution};
pub use simplex::solve_exact;

/// Tolerance for feasibility and optimality decisions.
pub const LP_TOL: f64 = 1e-9;

/// `max objectiveᵀx s.t. A x <= rhs, geq_A x >= geq_rhs, x >= 0, x_k = 0 for k in pins`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    #[serde(rename = "A", default)]
    pub a: Vec<Vec<f64>>,
    #[serde(default)]
    pub rhs: Vec<f64>,
    #[serde(default)]
    pub pins: Vec<usize>,
    #[serde(rename = "geq_A", default)]
    pub geq_a: Vec<Vec<f64>>,
    #[serde(default)]
    pub geq_rhs: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    ApproxFailed,
}

/// Solver output. `value`, `x` and the duals are meaningful only when `Optimal`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub value: f64,
    pub x: Vec<f64>,
    /// Multipliers of the `<=` rows (nonnegative at optimality).
    pub dual: Vec<f64>,
    /// Multipliers of the `>=` rows (nonnegative at optimality).
    pub dual_geq: Vec<f64>,
    /// Largest violation of any constraint or sign bound at `x`.
    #[serde(rename = "feas_violation")]
    pub feasibility_violation: f64,
}

impl LpSolution {
    pub(crate) fn with_status(status: LpStatus) -> Self {
        LpSolution {
            status,
            value: f64::NAN,
            x: vec![],
            dual: vec![],
            dual_geq: vec![],
            feasibility_violation: f64::NAN,
        }
    }
}

impl LpProblem {
    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn validate(&self) -> crate::Result<()> {
        let n = self.num_vars();
        let err = |m: String| Err(crate::BwkError::InvalidArgument(m));
        if n == 0 {
            return err("LP has no variables".into());
        }
        if self.a.len() != self.rhs.len() {
            return err(format!("A has {} rows but rhs has {}", self.a.len(), self.rhs.len()));
        }
        if self.geq_a.len() != self.geq_rhs.len() {
            return err(format!(
                "geq_A has {} rows but geq_rhs has {}",
                self.geq_a.len(),
                self.geq_rhs.len()
            ));
        }
        for (k, row) in self.a.iter().chain(&self.geq_a).enumerate() {
            if row.len() != n {
                return err(format!("constraint row {k} has {} entries, expected {n}", row.len()));
            }
        }
        if let Some(p) = self.pins.iter().find(|&&p| p >= n) {
            return err(format!("pinned variable {p} out of range"));
        }
        let all = self
            .objective
            .iter()
            .chain(self.a.iter().flatten())
            .chain(&self.rhs)
            .chain(self.geq_a.iter().flatten())
            .chain(&self.geq_rhs);
        if all.clone().any(|v| !v.is_finite()) {
            return err("LP contains non-finite coefficients".into());
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest violation of any row, sign bound or pin at `x`.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let dot = |row: &[f64]| row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>();
        let le = self.a.iter().zip(&self.rhs).map(|(r, b)| dot(r) - b);
        let ge = self.geq_a.iter().zip(&self.geq_rhs).map(|(r, b)| b - dot(r));
        let signs = x.iter().map(|v| -v);
        let pins = self.pins.iter().map(|&p| x[p].abs());
        le.chain(ge).chain(signs).chain(pins).fold(0.0, f64::max)
    }
}
