//! Approximate LP solving on the scaled problem (feasible `x` satisfy `Σx <= 1`).
//!
//! Accuracy contract for accuracy `eps` on the scaled LP, restated in original
//! units: `|objᵀx - OPT| <= eps·S` and every constraint holds up to `eps·S`.

use rand::Rng;

use super::game::{build_game, solve_zero_sum_mw, solve_zero_sum_optimistic, GameSolution};
use super::{solve_exact, GameMatrix, LpProblem, LpSolution, LpStatus};
use crate::error::{invalid, Result};

/// An LP whose right-hand sides were divided by `scale`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledLp {
    pub lp: LpProblem,
    pub scale: f64,
}

/// Divide every right-hand side by `scale` and check that the remaining
/// coefficients lie in `[-1, 1]`.
pub fn scale_for_approx(lp: &LpProblem, scale: f64) -> Result<ScaledLp> {
    lp.validate()?;
    if !(scale > 0.0 && scale.is_finite()) {
        return invalid("scale must be positive");
    }
    let coeffs = lp
        .objective
        .iter()
        .chain(lp.a.iter().flatten())
        .chain(lp.geq_a.iter().flatten());
    if let Some(v) = coeffs.clone().find(|v| v.abs() > 1.0) {
        return invalid(format!("coefficient {v} outside [-1, 1]; rescale the LP first"));
    }
    let mut scaled = lp.clone();
    scaled.rhs.iter_mut().for_each(|b| *b /= scale);
    scaled.geq_rhs.iter_mut().for_each(|b| *b /= scale);
    Ok(ScaledLp { lp: scaled, scale })
}

/// Scale for [`scale_for_approx`] when the caller has none: a bound on `Σx`
/// from the rows whose coefficients are all positive, `min_k rhs_k / min_i A_ki`,
/// or 1 when no such row exists.
pub fn default_scale(lp: &LpProblem) -> f64 {
    let bound =
        lp.a.iter()
            .zip(&lp.rhs)
            .filter(|(row, b)| row.iter().all(|&v| v > 0.0) && **b > 0.0)
            .map(|(row, b)| b / row.iter().copied().fold(f64::INFINITY, f64::min))
            .fold(f64::INFINITY, f64::min);
    if bound.is_finite() {
        bound
    } else {
        1.0
    }
}

/// Which self-play dynamics decide each bisection step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum GameSolver {
    /// Learning rate `eps/2`.
    Standard,
    /// Optimistic updates with a constant learning rate.
    #[default]
    Optimistic,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ApproxOptions {
    pub solver: GameSolver,
}

enum Decision {
    Accept(Vec<f64>),
    Reject,
    Failed,
}

struct Reduction {
    /// Objective over the original variables plus a zero-cost null variable.
    objective: Vec<f64>,
    /// All rows in `<=` form, null column appended.
    a: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    n: usize,
}

impl Reduction {
    fn new(lp: &LpProblem) -> Result<Self> {
        let n = lp.num_vars();
        let keep = |k: usize| !lp.pins.contains(&k);
        let objective: Vec<f64> = (0..n)
            .map(|k| if keep(k) { lp.objective[k] } else { 0.0 })
            .chain(std::iter::once(0.0))
            .collect();
        let mut a = Vec::new();
        let mut rhs = Vec::new();
        let mut push = |row: &[f64], b: f64, sign: f64| {
            a.push(
                (0..n)
                    .map(|k| if keep(k) { sign * row[k] } else { 0.0 })
                    .chain(std::iter::once(0.0))
                    .collect(),
            );
            rhs.push(sign * b);
        };
        for (row, b) in lp.a.iter().zip(&lp.rhs) {
            push(row, *b, 1.0);
        }
        for (row, b) in lp.geq_a.iter().zip(&lp.geq_rhs) {
            push(row, *b, -1.0);
        }
        // Pinned columns would otherwise let the player hide mass in them.
        for &p in &lp.pins {
            let mut row = vec![0.0; n + 1];
            row[p] = 1.0;
            a.push(row);
            rhs.push(0.0);
        }
        if let Some(b) = rhs.iter().find(|b| b.abs() > 1.0) {
            return invalid(format!(
                "scaled right-hand side {b} outside [-1, 1]; choose a larger scale"
            ));
        }
        Ok(Reduction { objective, a, rhs, n })
    }

    fn game(&self, alpha: f64) -> Result<GameMatrix> {
        build_game(&self.objective, &self.a, &self.rhs, alpha)
    }

    fn decide(&self, alpha: f64, eps_game: f64, solver: GameSolver) -> Result<Decision> {
        let g = self.game(alpha)?;
        let sol: GameSolution = match solver {
            GameSolver::Standard => solve_zero_sum_mw(&g, eps_game)?,
            GameSolver::Optimistic => solve_zero_sum_optimistic(&g, eps_game)?,
        };
        if sol.upper > 2.0 * eps_game {
            // value >= upper - eps_game > 0: certified infeasible at alpha.
            return Ok(Decision::Reject);
        }
        let hom = sol.col_strategy[self.n + 2];
        if hom < eps_game {
            return Ok(Decision::Failed);
        }
        Ok(Decision::Accept(
            sol.col_strategy[..self.n].iter().map(|v| v / hom).collect(),
        ))
    }
}

/// Bisect the objective level over `[-1, 1]`, deciding each level with a game at
/// accuracy `eps / (6 R (r + 1))` where `R = 1` and `r = 1 + 1/b_min` bounds the
/// dual mass (`b_min` is the smallest positive scaled `<=` right-hand side).
/// Returns `x` and value in original units.
pub fn solve_approx(scaled: &ScaledLp, eps: f64, opts: ApproxOptions) -> Result<LpSolution> {
    if !(eps > 0.0 && eps.is_finite()) {
        return invalid("eps must be positive");
    }
    let red = Reduction::new(&scaled.lp)?;
    let b_min = scaled
        .lp
        .rhs
        .iter()
        .copied()
        .filter(|b| *b > 0.0)
        .fold(f64::INFINITY, f64::min);
    let r_bound = if b_min.is_finite() { 1.0 + 1.0 / b_min } else { 1.0 };
    let radius = 1.0;
    let mut eps_game = eps / (6.0 * radius * (r_bound + 1.0));

    for _attempt in 0..2 {
        let mut best = match red.decide(-radius, eps_game, opts.solver)? {
            Decision::Accept(x) => x,
            Decision::Reject => return Ok(LpSolution::with_status(LpStatus::Infeasible)),
            Decision::Failed => {
                eps_game /= 2.0;
                continue;
            }
        };
        let (mut lo, mut hi) = (-radius, radius);
        let mut failed = false;
        while hi - lo > eps / 2.0 {
            let mid = 0.5 * (lo + hi);
            match red.decide(mid, eps_game, opts.solver)? {
                Decision::Accept(x) => {
                    lo = mid;
                    best = x;
                }
                Decision::Reject => hi = mid,
                Decision::Failed => {
                    failed = true;
                    break;
                }
            }
        }
        if failed {
            eps_game /= 2.0;
            continue;
        }
        return Ok(finish(scaled, best));
    }
    Ok(LpSolution::with_status(LpStatus::ApproxFailed))
}

fn finish(scaled: &ScaledLp, x_scaled: Vec<f64>) -> LpSolution {
    let x: Vec<f64> = x_scaled.iter().map(|v| v.max(0.0) * scaled.scale).collect();
    let mut original = scaled.lp.clone();
    original.rhs.iter_mut().for_each(|b| *b *= scaled.scale);
    original.geq_rhs.iter_mut().for_each(|b| *b *= scaled.scale);
    LpSolution {
        status: LpStatus::Optimal,
        value: original.objective_value(&x),
        feasibility_violation: original.violation(&x),
        x,
        dual: vec![],
        dual_geq: vec![],
    }
}

/// Emulated approximate solver: the exact optimum moved by a random perturbation
/// small enough that the accuracy contract still holds at `eps`.
pub fn solve_approx_idealized<R: Rng + ?Sized>(scaled: &ScaledLp, eps: f64, rng: &mut R) -> Result<LpSolution> {
    if !(eps > 0.0 && eps.is_finite()) {
        return invalid("eps must be positive");
    }
    let exact = solve_exact(&scaled.lp)?;
    if exact.status != LpStatus::Optimal {
        return Ok(exact);
    }
    let lp = &scaled.lp;
    let row_mass =
        lp.a.iter()
            .chain(&lp.geq_a)
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .chain(std::iter::once(lp.objective.iter().map(|v| v.abs()).sum()))
            .fold(1.0, f64::max);
    let half_width = eps / row_mass;
    let x: Vec<f64> = exact
        .x
        .iter()
        .enumerate()
        .map(|(k, v)| {
            if lp.pins.contains(&k) {
                0.0
            } else {
                (v + rng.gen_range(-half_width..=half_width)).max(0.0)
            }
        })
        .collect();
    Ok(finish(scaled, x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn canonical_scaled() -> ScaledLp {
        let lp = LpProblem {
            objective: vec![0.9, 0.5],
            a: vec![vec![0.5, 0.5], vec![1.0, 0.2]],
            rhs: vec![50.0, 50.0],
            ..Default::default()
        };
        scale_for_approx(&lp, 100.0).unwrap()
    }

    #[test]
    fn scaling_divides_rhs_only() {
        let s = canonical_scaled();
        assert_eq!(s.lp.rhs, vec![0.5, 0.5]);
        assert_eq!(s.lp.objective, vec![0.9, 0.5]);
        assert!(scale_for_approx(&s.lp, 0.0).is_err());
    }

    #[test]
    fn canonical_within_contract() {
        let s = canonical_scaled();
        let sol = solve_approx(&s, 0.02, ApproxOptions::default()).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.value - 65.0).abs() <= 2.0, "value {}", sol.value);
        assert!(sol.feasibility_violation <= 2.0);
    }

    #[test]
    fn idealized_within_contract() {
        let s = canonical_scaled();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let sol = solve_approx_idealized(&s, 0.01, &mut rng).unwrap();
            assert!((sol.value - 65.0).abs() <= 1.0 + 1e-9);
            assert!(sol.feasibility_violation <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn infeasible_is_reported() {
        let lp = LpProblem {
            objective: vec![0.5],
            a: vec![vec![1.0]],
            rhs: vec![0.5],
            geq_a: vec![vec![1.0]],
            geq_rhs: vec![0.9],
            ..Default::default()
        };
        let s = scale_for_approx(&lp, 1.0).unwrap();
        let sol = solve_approx(&s, 0.05, ApproxOptions::default()).unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
    }

    #[test]
    fn default_scale_uses_positive_rows() {
        let lp = LpProblem {
            objective: vec![0.9, 0.5],
            a: vec![vec![0.5, 0.5], vec![1.0, 0.2], vec![-1.0, 1.0]],
            rhs: vec![50.0, 50.0, 10.0],
            ..Default::default()
        };
        assert_eq!(default_scale(&lp), 100.0);
        let free = LpProblem {
            objective: vec![1.0],
            a: vec![vec![-1.0]],
            rhs: vec![1.0],
            ..Default::default()
        };
        assert_eq!(default_scale(&free), 1.0);
    }
}
