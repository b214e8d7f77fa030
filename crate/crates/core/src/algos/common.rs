use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{BwkError, Result};
use crate::estimators::EstimatorBackend;
use crate::lp::{
    modeled_cost, solve_approx, solve_approx_idealized, solve_exact, ApproxOptions, CostModel, LpProblem, LpSolution,
    ScaledLp,
};
use crate::model::{BwkInstance, Outcome};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlgorithmKind {
    Alg1Quantum,
    Alg1Classical,
    Alg2Quantum,
    Alg2Classical,
}

impl AlgorithmKind {
    pub const ALL: [AlgorithmKind; 4] = [
        AlgorithmKind::Alg1Quantum,
        AlgorithmKind::Alg1Classical,
        AlgorithmKind::Alg2Quantum,
        AlgorithmKind::Alg2Classical,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AlgorithmKind::Alg1Quantum => "alg1-quantum",
            AlgorithmKind::Alg1Classical => "alg1-classical",
            AlgorithmKind::Alg2Quantum => "alg2-quantum",
            AlgorithmKind::Alg2Classical => "alg2-classical",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn is_quantum(self) -> bool {
        matches!(self, AlgorithmKind::Alg1Quantum | AlgorithmKind::Alg2Quantum)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LpMode {
    #[default]
    Exact,
    Approx,
}

/// Solver behind `LpMode::Approx` inside the algorithms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ApproxBackend {
    /// Exact optimum perturbed within the accuracy contract.
    #[default]
    Idealized,
    /// The zero-sum-game reduction.
    Game,
}

/// Problem-dependent parameters handed to Algorithm 2 (per-round units).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemParams {
    pub sigma: f64,
    pub delta: f64,
    pub chi: f64,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub algorithm: AlgorithmKind,
    #[serde(default)]
    pub estimator_backend: EstimatorBackend,
    #[serde(default)]
    pub lp_mode: LpMode,
    #[serde(default)]
    pub approx_backend: ApproxBackend,
    /// Accuracy target for approximate LPs, per-round units. `None` uses the
    /// problem-dependent default of Algorithm 2.
    #[serde(default)]
    pub eps_lp: Option<f64>,
    #[serde(default = "one")]
    pub c1: f64,
    #[serde(default = "one")]
    pub c2: f64,
    /// Replaces the weight-update rate `sqrt(ln d / B)` of Algorithm 1.
    #[serde(default)]
    pub mw_eps_override: Option<f64>,
    /// Feed Algorithm 2 the instance's true `(σ, δ, χ)`.
    #[serde(default = "yes")]
    pub supply_ground_truth_params: bool,
    /// Explicit `(σ, δ, χ)`, used when ground-truth parameters are not supplied.
    #[serde(default)]
    pub problem_params: Option<ProblemParams>,
}

impl RunConfig {
    pub fn new(algorithm: AlgorithmKind) -> Self {
        RunConfig {
            algorithm,
            estimator_backend: EstimatorBackend::default(),
            lp_mode: LpMode::default(),
            approx_backend: ApproxBackend::default(),
            eps_lp: None,
            c1: 1.0,
            c2: 1.0,
            mw_eps_override: None,
            supply_ground_truth_params: true,
            problem_params: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(BwkError::InvalidArgument(m.into()));
        if !(self.c1 > 0.0 && self.c1.is_finite() && self.c2 > 0.0 && self.c2.is_finite()) {
            return bad("c1 and c2 must be positive");
        }
        if let Some(e) = self.eps_lp {
            if !(e > 0.0 && e.is_finite()) {
                return bad("eps_lp must be positive");
            }
        }
        if let Some(e) = self.mw_eps_override {
            if !(e >= 0.0 && e.is_finite()) {
                return bad("mw_eps_override must be nonnegative");
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: u64,
    pub arm: usize,
    pub phase: u8,
    pub reward: f64,
    pub cost: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QmcTarget {
    Reward,
    Cost,
}

/// LP families solved by Algorithm 2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LpFamily {
    /// Pessimistic value: lower rewards, upper costs.
    Pessimistic,
    /// Optimistic value with one arm removed.
    ArmRemoved,
    /// Optimistic constraint-removal value.
    ResourceRemoved,
    /// Adaptive allocation over the identified arms.
    Allocation,
    /// Adaptive allocation with the tight constraints held at equality.
    AllocationTight,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Event {
    Phase {
        t: u64,
        phase: u8,
    },
    Qmc {
        t: u64,
        arm: usize,
        target: QmcTarget,
        queries: u64,
        eps: f64,
    },
    LpSolve {
        t: u64,
        family: LpFamily,
        eps: Option<f64>,
        quantum_cost: f64,
        classical_cost: f64,
    },
    IdentifiedArm {
        t: u64,
        arm: usize,
    },
    IdentifiedSlack {
        t: u64,
        resource: usize,
    },
    Fallback {
        t: u64,
        reason: String,
    },
    Stop {
        t: u64,
        reason: String,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Completed,
    Phase1BudgetExhausted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub algorithm: AlgorithmKind,
    pub seed: u64,
    pub horizon: u64,
    pub budget: f64,
    pub status: RunStatus,
    /// Rounds played.
    pub tau: u64,
    pub phase1_rounds: u64,
    pub pulls: Vec<u64>,
    /// Sum of mean rewards of the pulled arms.
    pub expected_reward: f64,
    pub realized_reward: f64,
    pub remaining_budget: Vec<f64>,
    pub qmc_query_total: u64,
    /// Number of QMC reward estimates per arm.
    pub qmc_reward_calls: Vec<u64>,
    pub lp_solve_count: u64,
    pub modeled_quantum_cost: f64,
    pub modeled_classical_cost: f64,
    pub eps_lp: Option<f64>,
    pub identified_arms: Option<Vec<usize>>,
    pub identified_slack: Option<Vec<usize>>,
    pub events: Vec<Event>,
    pub rounds: Vec<RoundRecord>,
}

/// Mutable state shared by every algorithm: RNG, remaining budget and the trace.
pub(crate) struct Runner<'a> {
    pub inst: &'a BwkInstance,
    pub rng: ChaCha8Rng,
    pub means: Vec<f64>,
    pub trace: RunTrace,
}

impl<'a> Runner<'a> {
    pub fn new(inst: &'a BwkInstance, kind: AlgorithmKind, seed: u64) -> Self {
        let m = inst.num_arms();
        Runner {
            inst,
            rng: ChaCha8Rng::seed_from_u64(seed),
            means: inst.reward_means(),
            trace: RunTrace {
                algorithm: kind,
                seed,
                horizon: inst.horizon(),
                budget: inst.budget(),
                status: RunStatus::Completed,
                tau: 0,
                phase1_rounds: 0,
                pulls: vec![0; m],
                expected_reward: 0.0,
                realized_reward: 0.0,
                remaining_budget: vec![inst.budget(); inst.num_resources()],
                qmc_query_total: 0,
                qmc_reward_calls: vec![0; m],
                lp_solve_count: 0,
                modeled_quantum_cost: 0.0,
                modeled_classical_cost: 0.0,
                eps_lp: None,
                identified_arms: None,
                identified_slack: None,
                events: Vec::new(),
                rounds: Vec::new(),
            },
        }
    }

    pub fn t(&self) -> u64 {
        self.trace.tau
    }

    /// Another round may be played: rounds remain and every budget is at least 1.
    pub fn can_pull(&self) -> bool {
        self.trace.tau < self.inst.horizon() && self.trace.remaining_budget.iter().all(|&b| b >= 1.0)
    }

    pub fn pull(&mut self, arm: usize, phase: u8) -> Result<Outcome> {
        let out = self.inst.sample_arm(arm, &mut self.rng)?;
        for (b, c) in self.trace.remaining_budget.iter_mut().zip(&out.cost) {
            *b -= c;
        }
        self.trace.tau += 1;
        self.trace.pulls[arm] += 1;
        self.trace.expected_reward += self.means[arm];
        self.trace.realized_reward += out.reward;
        self.trace.rounds.push(RoundRecord {
            t: self.trace.tau,
            arm,
            phase,
            reward: out.reward,
            cost: out.cost.clone(),
        });
        Ok(out)
    }

    pub fn event(&mut self, e: Event) {
        self.trace.events.push(e);
    }

    pub fn stop(&mut self, reason: &str) {
        let t = self.t();
        self.event(Event::Stop {
            t,
            reason: reason.into(),
        });
    }

    pub fn record_qmc(&mut self, arm: usize, target: QmcTarget, queries: u64, eps: f64) {
        self.trace.qmc_query_total += queries;
        if target == QmcTarget::Reward {
            self.trace.qmc_reward_calls[arm] += 1;
        }
        let t = self.t();
        self.event(Event::Qmc {
            t,
            arm,
            target,
            queries,
            eps,
        });
    }

    /// Draw an index from a probability vector.
    pub fn sample_index(&mut self, probs: &[f64]) -> usize {
        let u: f64 = self.rng.gen();
        let mut acc = 0.0;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }
}

/// Dispatches LP solves according to the run configuration and books their cost.
pub(crate) struct LpOracle {
    pub mode: LpMode,
    pub backend: ApproxBackend,
    pub m: usize,
    pub d: usize,
}

impl LpOracle {
    /// Solve an LP already on the per-round scale. `eps` is the target accuracy on
    /// that scale; it is ignored in exact mode except for cost accounting.
    pub fn solve(
        &self,
        runner: &mut Runner<'_>,
        lp: &LpProblem,
        eps: Option<f64>,
        family: LpFamily,
    ) -> Result<LpSolution> {
        let sol = match (self.mode, eps) {
            (LpMode::Exact, _) => solve_exact(lp)?,
            (LpMode::Approx, None) => return Err(BwkError::InvalidArgument("approximate LP needs an accuracy".into())),
            (LpMode::Approx, Some(e)) => {
                let scaled = ScaledLp {
                    lp: lp.clone(),
                    scale: 1.0,
                };
                match self.backend {
                    ApproxBackend::Idealized => solve_approx_idealized(&scaled, e, &mut runner.rng)?,
                    ApproxBackend::Game => solve_approx(&scaled, e, ApproxOptions::default())?,
                }
            }
        };
        let quantum_cost = match eps {
            Some(e) => modeled_cost(CostModel::Quantum, self.m, self.d, e)?,
            None => 0.0,
        };
        let classical_cost = modeled_cost(CostModel::ClassicalExact, self.m, self.d, 1.0)?;
        runner.trace.lp_solve_count += 1;
        runner.trace.modeled_quantum_cost += quantum_cost;
        runner.trace.modeled_classical_cost += classical_cost;
        let t = runner.t();
        runner.event(Event::LpSolve {
            t,
            family,
            eps,
            quantum_cost,
            classical_cost,
        });
        Ok(sol)
    }
}
