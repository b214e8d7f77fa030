//! Optimistic bang-per-buck algorithm with multiplicative resource weights.
//!
//! The quantum variant estimates rewards with batched QMC calls whose accuracy
//! halves per batch; costs always use classical Hoeffding bounds.

use super::common::{AlgorithmKind, Event, QmcTarget, RunConfig, RunTrace, Runner};
use crate::error::{BwkError, Result};
use crate::estimators::{
    hoeffding_radius, qmc1_queries, qmc_univariate, update_bounds_alg1, ConfidenceState, RewardUpdate,
};
use crate::model::BwkInstance;

/// Batch length for a QMC call at accuracy `rad`: `ceil(2 c1 ln T / rad)`.
pub fn qmc_batch_len(horizon: u64, c1: f64, rad: f64) -> u64 {
    (2.0 * c1 * (horizon as f64).ln() / rad).ceil() as u64
}

/// Upper bound on QMC reward estimates over a run: `m log2(T / (2 m c1 ln T) + 1) + m`.
pub fn qmc_call_bound(m: usize, horizon: u64, c1: f64) -> f64 {
    let mf = m as f64;
    let t = horizon as f64;
    mf * (t / (2.0 * mf * c1 * t.ln()) + 1.0).log2() + mf
}

/// Weight-update rate: the override if given, else `sqrt(ln d / B)`.
pub fn mw_rate(cfg: &RunConfig, d: usize, budget: f64) -> f64 {
    cfg.mw_eps_override.unwrap_or_else(|| ((d as f64).ln() / budget).sqrt())
}

/// Arm maximizing `r_U / (C_L⁺ · v)`; ties go to the lowest index and a zero
/// denominator ranks first.
pub fn select_arm(state: &ConfidenceState, weights: &[f64]) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for i in 0..state.num_arms() {
        let denom: f64 = (0..weights.len())
            .map(|j| state.cost_lower[j][i].max(0.0) * weights[j])
            .sum();
        let score = if denom <= 0.0 {
            f64::INFINITY
        } else {
            state.reward_upper[i] / denom
        };
        if score > best_score {
            best = i;
            best_score = score;
        }
    }
    best
}

fn update_weights(weights: &mut [f64], state: &ConfidenceState, arm: usize, rate: f64) {
    for (j, w) in weights.iter_mut().enumerate() {
        *w *= (1.0 + rate).powf(state.cost_lower[j][arm].clamp(0.0, 1.0));
    }
    // Only ratios matter; keep the weights bounded.
    let top = weights.iter().cloned().fold(0.0, f64::max);
    if top > 0.0 {
        weights.iter_mut().for_each(|w| *w /= top);
    }
}

pub fn run_alg1(inst: &BwkInstance, cfg: &RunConfig, seed: u64) -> Result<RunTrace> {
    cfg.validate()?;
    let quantum = match cfg.algorithm {
        AlgorithmKind::Alg1Quantum => true,
        AlgorithmKind::Alg1Classical => false,
        other => {
            return Err(BwkError::InvalidArgument(format!(
                "run_alg1 called with {}",
                other.name()
            )))
        }
    };
    if inst.horizon() < 2 {
        return Err(BwkError::InvalidArgument("horizon must be at least 2".into()));
    }
    let m = inst.num_arms();
    let d = inst.num_resources();
    let horizon = inst.horizon();
    let qmc_delta = 1.0 / (horizon as f64).powi(2);
    let rate = mw_rate(cfg, d, inst.budget());
    let mut run = Runner::new(inst, cfg.algorithm, seed);
    let mut state = ConfidenceState::new(m, d, inst.per_round_budget());
    let mut rad = vec![1.0_f64; m];
    let mut pending = vec![0u64; m];

    run.event(Event::Phase { t: 0, phase: 1 });
    'init: for i in 0..m {
        let batch = if quantum {
            qmc_batch_len(horizon, cfg.c1, rad[i])
        } else {
            1
        };
        for _ in 0..batch {
            if !run.can_pull() {
                run.stop("budget or horizon exhausted during initialization");
                break 'init;
            }
            let out = run.pull(i, 1)?;
            state.record_pull(i, &out);
        }
        let update = if quantum {
            qmc_step(&mut run, cfg, i, rad[i], qmc_delta)?
        } else {
            RewardUpdate::Classical
        };
        update_bounds_alg1(&mut state, i, update, horizon, cfg.c1)?;
        if quantum {
            rad[i] /= 2.0;
        }
    }
    run.trace.phase1_rounds = run.t();

    let t = run.t();
    run.event(Event::Phase { t, phase: 2 });
    let mut weights = vec![1.0; d];
    while run.can_pull() {
        let i = select_arm(&state, &weights);
        let out = run.pull(i, 2)?;
        state.record_pull(i, &out);
        if quantum {
            pending[i] += 1;
            if pending[i] >= qmc_batch_len(horizon, cfg.c1, rad[i]) {
                let update = qmc_step(&mut run, cfg, i, rad[i], qmc_delta)?;
                update_bounds_alg1(&mut state, i, update, horizon, cfg.c1)?;
                rad[i] /= 2.0;
                pending[i] = 0;
            } else {
                state.refresh_cost(i, hoeffding_radius(state.pulls[i], horizon));
            }
        } else {
            update_bounds_alg1(&mut state, i, RewardUpdate::Classical, horizon, cfg.c1)?;
        }
        update_weights(&mut weights, &state, i, rate);
    }
    if run.t() < horizon {
        run.stop("a resource budget fell below 1");
    }
    Ok(run.trace)
}

fn qmc_step(run: &mut Runner<'_>, cfg: &RunConfig, arm: usize, rad: f64, delta: f64) -> Result<RewardUpdate> {
    let mean = run.means[arm];
    let est = qmc_univariate(mean, rad, delta, cfg.estimator_backend, cfg.c1, &mut run.rng)?;
    debug_assert_eq!(est.queries, qmc1_queries(rad, delta, cfg.c1)?);
    run.record_qmc(arm, QmcTarget::Reward, est.queries, rad);
    Ok(RewardUpdate::Qmc {
        estimate: est.value,
        queries: est.queries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::canonical_instance;

    #[test]
    fn zero_denominator_ranks_first() {
        let mut s = ConfidenceState::new(2, 2, 0.0);
        s.cost_lower[1] = vec![0.5, 0.0];
        s.reward_upper = vec![1.0, 0.01];
        assert_eq!(select_arm(&s, &[1.0, 1.0]), 1);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let s = ConfidenceState::new(3, 2, 0.5);
        assert_eq!(select_arm(&s, &[1.0, 1.0]), 0);
    }

    #[test]
    fn batch_length_matches_query_count() {
        let (t, c1) = (4096u64, 1.0);
        for rad in [1.0, 0.5, 0.125] {
            let q = qmc1_queries(rad, 1.0 / (t as f64).powi(2), c1).unwrap();
            assert_eq!(q, qmc_batch_len(t, c1, rad));
        }
    }

    #[test]
    fn deterministic_for_a_seed() {
        let inst = canonical_instance().with_horizon(2000, 1000.0).unwrap();
        let cfg = RunConfig::new(AlgorithmKind::Alg1Quantum);
        let a = run_alg1(&inst, &cfg, 9).unwrap();
        let b = run_alg1(&inst, &cfg, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_other_algorithms() {
        let cfg = RunConfig::new(AlgorithmKind::Alg2Quantum);
        assert!(run_alg1(&canonical_instance(), &cfg, 0).is_err());
    }
}
