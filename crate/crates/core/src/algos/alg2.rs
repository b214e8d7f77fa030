//! Two-phase algorithm: identify the optimal support and the slack resources by
//! comparing optimistic and pessimistic LP values, then play the normalized
//! solution of an adaptive LP over the remaining budget.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::common::{
    AlgorithmKind, Event, LpFamily, LpMode, LpOracle, ProblemParams, QmcTarget, RunConfig, RunStatus, RunTrace, Runner,
};
use crate::error::{BwkError, Result};
use crate::estimators::{qmc2_eps_for_queries, qmc_multivariate, qmc_univariate, ConfidenceState};
use crate::lp::{LpProblem, LpStatus};
use crate::model::{compute_ground_truth, primal_lp, BwkInstance, GroundTruth};

/// Threshold on cost radii below which the tight allocation LP is used:
/// `min{ min(1,σ²)·min(χ,δ) / (12 min(m²,d²)), (2 + 1/b)⁻²·δ/5 }`.
pub fn alg2_theta(m: usize, d: usize, b: f64, p: &ProblemParams) -> f64 {
    let k = (m.min(d) as f64).powi(2);
    let first = p.sigma.powi(2).min(1.0) * p.chi.min(p.delta) / (12.0 * k);
    let second = (2.0 + 1.0 / b).powi(-2) * p.delta / 5.0;
    first.min(second)
}

/// Half-width of the budget-ratio window: `min(1,σ)·min(χ,δ)·b / (5 d^1.5)`.
pub fn alg2_window(d: usize, b: f64, p: &ProblemParams) -> f64 {
    p.sigma.min(1.0) * p.chi.min(p.delta) * b / (5.0 * (d as f64).powf(1.5))
}

/// Largest per-round LP accuracy that keeps the regret guarantee:
/// `min{ σχ ln²T / (40 min(m,d)^1.5), 2bθ·min(χ,δ)·ln²T / 405, δ/4 }`.
pub fn theorem4_eps_lp(m: usize, d: usize, b: f64, horizon: u64, p: &ProblemParams) -> f64 {
    let log2t = (horizon as f64).ln().powi(2);
    let k = (m.min(d) as f64).powf(1.5);
    let theta = alg2_theta(m, d, b, p);
    let first = p.sigma * p.chi * log2t / (40.0 * k);
    let second = 2.0 * b * theta * p.chi.min(p.delta) * log2t / 405.0;
    first.min(second).min(p.delta / 4.0)
}

/// Per-arm Phase-I pull budget used as a sanity bound: `10 (2 + 1/b) sqrt(d) ln T / δ`.
pub fn phase1_pull_bound(b: f64, d: usize, horizon: u64, delta: f64) -> f64 {
    10.0 * (2.0 + 1.0 / b) * (d as f64).sqrt() * (horizon as f64).ln() / delta
}

/// Failure probability of each Phase-I QMC call: `d / T³`.
pub fn phase1_qmc_delta(d: usize, horizon: u64) -> f64 {
    d as f64 / (horizon as f64).powi(3)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AllocationLp {
    /// Maximize optimistic reward under the remaining budget.
    Plain,
    /// Additionally hold the tight constraints at equality.
    Tight,
}

/// Tight LP iff every identified arm has cost radius `<= theta` and every tight
/// row's per-round remaining budget lies within `window` of `b`.
pub fn phase2_condition(cost_radii: &[f64], theta: f64, budget_ratio: &[f64], b: f64, window: f64) -> AllocationLp {
    let radii_ok = cost_radii.iter().all(|&r| r <= theta);
    let ratio_ok = budget_ratio.iter().all(|&x| (x - b).abs() <= window);
    if radii_ok && ratio_ok {
        AllocationLp::Tight
    } else {
        AllocationLp::Plain
    }
}

/// Allocation LP over `active` arms with per-round budget `rhs`.
pub fn allocation_lp(
    reward_upper: &[f64],
    cost_lower: &[Vec<f64>],
    rhs: &[f64],
    active: &[usize],
    tight_rows: &[usize],
    choice: AllocationLp,
) -> LpProblem {
    let m = reward_upper.len();
    let mut lp = primal_lp(reward_upper, cost_lower, rhs, None);
    lp.pins = (0..m).filter(|i| !active.contains(i)).collect();
    if choice == AllocationLp::Tight {
        for &j in tight_rows {
            lp.geq_a.push(cost_lower[j].clone());
            lp.geq_rhs.push(rhs[j]);
        }
    }
    lp
}

/// Normalize an LP solution into a distribution over arms. Falls back to uniform
/// over `active` (second value `true`) when the solution has no mass.
pub fn allocation_distribution(x: &[f64], active: &[usize]) -> (Vec<f64>, bool) {
    let mass: f64 = x.iter().map(|v| v.max(0.0)).sum();
    if mass <= 1e-12 {
        let mut p = vec![0.0; x.len()];
        for &i in active {
            p[i] = 1.0 / active.len() as f64;
        }
        return (p, true);
    }
    (x.iter().map(|v| v.max(0.0) / mass).collect(), false)
}

/// Optimistic constraint-removal LP for row `j`:
/// `min bᵀη - b_j s.t. C_Lᵀη >= r_U + C_U[j], η >= 0`, as a maximization of `-bᵀη`.
fn removal_lp_bounds(
    reward_upper: &[f64],
    cost_lower: &[Vec<f64>],
    cost_upper: &[Vec<f64>],
    rhs: &[f64],
    j: usize,
) -> LpProblem {
    let m = reward_upper.len();
    let d = cost_lower.len();
    LpProblem {
        objective: rhs.iter().map(|b| -b).collect(),
        geq_a: (0..m).map(|i| (0..d).map(|k| cost_lower[k][i]).collect()).collect(),
        geq_rhs: (0..m).map(|i| reward_upper[i] + cost_upper[j][i]).collect(),
        ..Default::default()
    }
}

/// The same value through its primal: `max (r_U + C_U[j])ᵀx s.t. C_L x <= b`, minus `b_j`.
/// The objective is halved so coefficients stay in `[-1, 1]`.
fn removal_primal_halved(
    reward_upper: &[f64],
    cost_lower: &[Vec<f64>],
    cost_upper: &[Vec<f64>],
    rhs: &[f64],
    j: usize,
) -> LpProblem {
    let obj = reward_upper
        .iter()
        .zip(&cost_upper[j])
        .map(|(r, c)| 0.5 * (r + c))
        .collect::<Vec<_>>();
    primal_lp(&obj, cost_lower, rhs, None)
}

fn optimal(sol: &crate::lp::LpSolution, what: &str) -> Result<f64> {
    if sol.status != LpStatus::Optimal {
        return Err(BwkError::Invariant(format!("{what} LP is {:?}", sol.status)));
    }
    Ok(sol.value)
}

/// Problem parameters for a run: the instance's own values or the configured ones.
pub fn resolve_params(cfg: &RunConfig, gt: &GroundTruth) -> Result<ProblemParams> {
    if cfg.supply_ground_truth_params {
        return Ok(ProblemParams {
            sigma: gt.sigma,
            delta: gt.delta,
            chi: gt.chi,
        });
    }
    cfg.problem_params.ok_or_else(|| {
        BwkError::InvalidArgument(
            "Algorithm 2 needs (sigma, delta, chi): set problem_params or supply_ground_truth_params".into(),
        )
    })
}

pub fn run_alg2(inst: &BwkInstance, cfg: &RunConfig, seed: u64) -> Result<RunTrace> {
    cfg.validate()?;
    let quantum = match cfg.algorithm {
        AlgorithmKind::Alg2Quantum => true,
        AlgorithmKind::Alg2Classical => false,
        other => {
            return Err(BwkError::InvalidArgument(format!(
                "run_alg2 called with {}",
                other.name()
            )))
        }
    };
    if inst.horizon() < 2 {
        return Err(BwkError::InvalidArgument("horizon must be at least 2".into()));
    }
    let gt = compute_ground_truth(inst)?;
    if !gt.nondegenerate {
        return Err(BwkError::Degenerate(format!(
            "Algorithm 2 needs a unique optimum with |I*| = |J*| and a positive gap (got |I*| = {}, |J*| = {}, delta = {:.3e})",
            gt.i_star.len(),
            gt.j_star.len(),
            gt.delta
        )));
    }
    let params = resolve_params(cfg, &gt)?;
    let m = inst.num_arms();
    let d = inst.num_resources();
    let horizon = inst.horizon();
    let b = inst.per_round_budget();
    let log_t = (horizon as f64).ln();
    let theta = alg2_theta(m, d, b, &params);
    let window = alg2_window(d, b, &params);
    let eps_lp = cfg.eps_lp.unwrap_or_else(|| theorem4_eps_lp(m, d, b, horizon, &params));
    let qmc_delta = phase1_qmc_delta(d, horizon);
    let oracle = LpOracle {
        mode: cfg.lp_mode,
        backend: cfg.approx_backend,
        m,
        d,
    };
    let budget_rhs = vec![b; d];

    let mut run = Runner::new(inst, cfg.algorithm, seed);
    run.trace.eps_lp = Some(eps_lp);
    let mut state = ConfidenceState::new(m, d, b);
    let mut arms_found: BTreeSet<usize> = BTreeSet::new();
    let mut slack_found: BTreeSet<usize> = BTreeSet::new();

    run.event(Event::Phase { t: 0, phase: 1 });
    let mut resolution = 1.0_f64;
    'phase1: loop {
        let batch = (log_t / resolution).ceil() as u64;
        for i in 0..m {
            for _ in 0..batch {
                if !run.can_pull() {
                    run.trace.status = RunStatus::Phase1BudgetExhausted;
                    run.stop("phase1-budget-exhausted");
                    break 'phase1;
                }
                let out = run.pull(i, 1)?;
                state.record_pull(i, &out);
            }
            if quantum {
                phase1_quantum_estimate(&mut run, cfg, &mut state, i, batch, qmc_delta)?;
            } else {
                let rad = (2.0 * log_t / state.pulls[i] as f64).sqrt();
                let mean = state.reward_mean(i);
                state.set_reward_interval(i, mean - rad, mean + rad);
                state.refresh_cost(i, rad);
            }
        }
        resolution /= 2.0;

        let (r_lo, r_hi) = (state.reward_lower.clone(), state.reward_upper.clone());
        let (c_lo, c_hi) = (state.cost_lower_clipped(), state.cost_upper_clipped());
        let eps = Some(eps_lp);
        let pess = oracle.solve(
            &mut run,
            &primal_lp(&r_lo, &c_hi, &budget_rhs, None),
            eps,
            LpFamily::Pessimistic,
        )?;
        let pess = optimal(&pess, "pessimistic")?;
        let open_arms: Vec<usize> = (0..m).filter(|i| !arms_found.contains(i)).collect();
        for i in open_arms {
            let sol = oracle.solve(
                &mut run,
                &primal_lp(&r_hi, &c_lo, &budget_rhs, Some(i)),
                eps,
                LpFamily::ArmRemoved,
            )?;
            if pess > optimal(&sol, "arm-removal")? {
                arms_found.insert(i);
                let t = run.t();
                run.event(Event::IdentifiedArm { t, arm: i });
            }
        }
        let open_rows: Vec<usize> = (0..d).filter(|j| !slack_found.contains(j)).collect();
        for j in open_rows {
            let value = match cfg.lp_mode {
                LpMode::Exact => {
                    let lp = removal_lp_bounds(&r_hi, &c_lo, &c_hi, &budget_rhs, j);
                    -optimal(
                        &oracle.solve(&mut run, &lp, eps, LpFamily::ResourceRemoved)?,
                        "constraint-removal",
                    )? - budget_rhs[j]
                }
                LpMode::Approx => {
                    let lp = removal_primal_halved(&r_hi, &c_lo, &c_hi, &budget_rhs, j);
                    let half = eps.map(|e| e / 2.0);
                    2.0 * optimal(
                        &oracle.solve(&mut run, &lp, half, LpFamily::ResourceRemoved)?,
                        "constraint-removal",
                    )? - budget_rhs[j]
                }
            };
            if pess > value {
                slack_found.insert(j);
                let t = run.t();
                run.event(Event::IdentifiedSlack { t, resource: j });
            }
        }
        if arms_found.len() + slack_found.len() >= d {
            break;
        }
    }
    run.trace.phase1_rounds = run.t();
    run.trace.identified_arms = Some(arms_found.iter().copied().collect());
    run.trace.identified_slack = Some(slack_found.iter().copied().collect());
    if run.trace.status == RunStatus::Phase1BudgetExhausted {
        return Ok(run.trace);
    }

    let active: Vec<usize> = arms_found.iter().copied().collect();
    if active.is_empty() {
        return Err(BwkError::Invariant("phase 1 ended without identifying any arm".into()));
    }
    let tight: Vec<usize> = (0..d).filter(|j| !slack_found.contains(j)).collect();
    let t = run.t();
    run.event(Event::Phase { t, phase: 2 });

    // The quantum variant keeps its last QMC intervals and intersects them with
    // Hoeffding intervals built from phase-2 samples only.
    let qmc_snapshot = state.clone();
    let mut fresh = ConfidenceState::new(m, d, b);
    let eps2 = Some(eps_lp / log_t.powi(2));
    while run.can_pull() {
        let remaining_rounds = (horizon - run.t()) as f64;
        let ratio: Vec<f64> = run
            .trace
            .remaining_budget
            .iter()
            .map(|r| r / remaining_rounds)
            .collect();
        let radii: Vec<f64> = active.iter().map(|&i| state.cost_radius(i)).collect();
        let tight_ratio: Vec<f64> = tight.iter().map(|&j| ratio[j]).collect();
        let choice = phase2_condition(&radii, theta, &tight_ratio, b, window);
        let c_lo = state.cost_lower_clipped();
        let family = match choice {
            AllocationLp::Plain => LpFamily::Allocation,
            AllocationLp::Tight => LpFamily::AllocationTight,
        };
        let lp = allocation_lp(&state.reward_upper, &c_lo, &ratio, &active, &tight, choice);
        let mut sol = oracle.solve(&mut run, &lp, eps2, family)?;
        if sol.status != LpStatus::Optimal && choice == AllocationLp::Tight {
            let t = run.t();
            run.event(Event::Fallback {
                t,
                reason: "tight allocation LP infeasible; using the plain LP".into(),
            });
            let lp = allocation_lp(&state.reward_upper, &c_lo, &ratio, &active, &tight, AllocationLp::Plain);
            sol = oracle.solve(&mut run, &lp, eps2, LpFamily::Allocation)?;
        }
        optimal(&sol, "allocation")?;
        let (dist, fell_back) = allocation_distribution(&sol.x, &active);
        if fell_back {
            let t = run.t();
            run.event(Event::Fallback {
                t,
                reason: "allocation has no mass; playing uniformly".into(),
            });
        }
        let arm = run.sample_index(&dist);
        let out = run.pull(arm, 2)?;
        if quantum {
            fresh.record_pull(arm, &out);
            intersect_update(&mut state, &qmc_snapshot, &fresh, arm, log_t);
        } else {
            state.record_pull(arm, &out);
            let rad = (2.0 * log_t / state.pulls[arm] as f64).sqrt();
            let mean = state.reward_mean(arm);
            state.set_reward_interval(arm, mean - rad, mean + rad);
            state.refresh_cost(arm, rad);
        }
    }
    if run.t() < horizon {
        run.stop("a resource budget fell below 1");
    }
    Ok(run.trace)
}

fn phase1_quantum_estimate(
    run: &mut Runner<'_>,
    cfg: &RunConfig,
    state: &mut ConfidenceState,
    arm: usize,
    batch: u64,
    qmc_delta: f64,
) -> Result<()> {
    let eps_r = cfg.c1 * (1.0 / qmc_delta).ln() / batch as f64;
    let est = qmc_univariate(
        run.means[arm],
        eps_r,
        qmc_delta,
        cfg.estimator_backend,
        cfg.c1,
        &mut run.rng,
    )?;
    // Earlier sweeps' intervals stay valid under the union bound, so keep the overlap.
    let (lo, hi) = intersect(
        (state.reward_lower[arm], state.reward_upper[arm]),
        (est.value - eps_r, est.value + eps_r),
    );
    state.set_reward_interval(arm, lo, hi);
    state.qmc_samples[arm] = est.queries;
    run.record_qmc(arm, QmcTarget::Reward, est.queries, eps_r);

    let d_user = run.inst.d_user();
    if d_user > 0 {
        let means = run.inst.arms()[arm].mean_cost(d_user);
        let eps_c = qmc2_eps_for_queries(d_user, batch, qmc_delta, cfg.c2);
        let est = qmc_multivariate(&means, eps_c, qmc_delta, cfg.estimator_backend, cfg.c2, &mut run.rng)?;
        for (k, v) in est.values.iter().enumerate() {
            let (lo, hi) = intersect(
                (state.cost_lower[k + 1][arm], state.cost_upper[k + 1][arm]),
                (v - eps_c, v + eps_c),
            );
            state.set_cost_interval(arm, k + 1, lo, hi);
        }
        run.record_qmc(arm, QmcTarget::Cost, est.queries, eps_c);
    }
    Ok(())
}

fn intersect(q: (f64, f64), h: (f64, f64)) -> (f64, f64) {
    let lo = q.0.max(h.0);
    let hi = q.1.min(h.1);
    if lo <= hi {
        (lo, hi)
    } else {
        h
    }
}

fn intersect_update(
    state: &mut ConfidenceState,
    qmc: &ConfidenceState,
    fresh: &ConfidenceState,
    arm: usize,
    log_t: f64,
) {
    let rad = (2.0 * log_t / fresh.pulls[arm] as f64).sqrt();
    let mean = fresh.reward_mean(arm);
    let (lo, hi) = intersect((qmc.reward_lower[arm], qmc.reward_upper[arm]), (mean - rad, mean + rad));
    state.set_reward_interval(arm, lo, hi);
    for j in 1..state.num_resources() {
        let mean = fresh.cost_mean(arm, j);
        let (lo, hi) = intersect(
            (qmc.cost_lower[j][arm], qmc.cost_upper[j][arm]),
            (mean - rad, mean + rad),
        );
        state.set_cost_interval(arm, j, lo, hi);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::solve_exact;
    use crate::model::{canonical_extended_instance, canonical_instance};

    #[test]
    fn condition_requires_both_tests() {
        assert_eq!(phase2_condition(&[0.01], 0.1, &[0.5], 0.5, 0.01), AllocationLp::Tight);
        assert_eq!(phase2_condition(&[0.2], 0.1, &[0.5], 0.5, 0.01), AllocationLp::Plain);
        assert_eq!(phase2_condition(&[0.01], 0.1, &[0.52], 0.5, 0.01), AllocationLp::Plain);
    }

    #[test]
    fn zero_radius_square_system() {
        let c = vec![vec![0.5, 0.25], vec![0.25, 0.5]];
        let lp = allocation_lp(&[0.7, 0.3], &c, &[0.375, 0.375], &[0, 1], &[0, 1], AllocationLp::Tight);
        let sol = solve_exact(&lp).unwrap();
        let (p, fell_back) = allocation_distribution(&sol.x, &[0, 1]);
        assert!(!fell_back);
        assert!((p[0] - 0.5).abs() < 1e-9 && (p[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn empty_allocation_falls_back_to_uniform() {
        let (p, fell_back) = allocation_distribution(&[0.0, 0.0, 0.0], &[0, 2]);
        assert!(fell_back);
        assert_eq!(p, vec![0.5, 0.0, 0.5]);
    }

    #[test]
    fn removal_forms_agree() {
        let inst = canonical_extended_instance(100);
        let r = inst.reward_means();
        let c = inst.cost_means();
        let rhs = vec![0.5; 3];
        for j in 0..3 {
            let dual = solve_exact(&removal_lp_bounds(&r, &c, &c, &rhs, j)).unwrap();
            let primal = solve_exact(&removal_primal_halved(&r, &c, &c, &rhs, j)).unwrap();
            assert!((-dual.value - 2.0 * primal.value).abs() < 1e-9);
        }
    }

    #[test]
    fn constants_on_extended_instance() {
        let gt = compute_ground_truth(&canonical_extended_instance(1 << 15)).unwrap();
        let p = ProblemParams {
            sigma: gt.sigma,
            delta: gt.delta,
            chi: gt.chi,
        };
        let theta = alg2_theta(3, 3, 0.5, &p);
        let expected = (gt.sigma.powi(2) * 0.15 / 108.0).min(0.15 / 80.0);
        assert!((theta - expected).abs() < 1e-15);
        assert!(theorem4_eps_lp(3, 3, 0.5, 1 << 15, &p) <= 0.15 / 4.0);
    }

    #[test]
    fn refuses_degenerate_instances() {
        let mut spec = canonical_instance().to_spec();
        spec.arms[1] = spec.arms[0].clone();
        let inst = crate::model::augment_time_resource(&spec).unwrap();
        let err = run_alg2(&inst, &RunConfig::new(AlgorithmKind::Alg2Quantum), 1).unwrap_err();
        assert!(matches!(err, BwkError::Degenerate(_)));
    }

    #[test]
    fn identifies_support_on_extended_instance() {
        let inst = canonical_extended_instance(20_000);
        let trace = run_alg2(&inst, &RunConfig::new(AlgorithmKind::Alg2Quantum), 3).unwrap();
        assert_eq!(trace.identified_arms, Some(vec![0, 1]));
        assert_eq!(trace.identified_slack, Some(vec![2]));
        assert_eq!(trace.status, RunStatus::Completed);
    }
}
