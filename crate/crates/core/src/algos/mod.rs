//! The learning algorithms and their shared run plumbing.

mod alg1;
mod alg2;
mod common;

pub use alg1::{mw_rate, qmc_batch_len, qmc_call_bound, run_alg1, select_arm};
pub use alg2::{
    alg2_theta, alg2_window, allocation_distribution, allocation_lp, phase1_pull_bound, phase1_qmc_delta,
    phase2_condition, resolve_params, run_alg2, theorem4_eps_lp, AllocationLp,
};
pub use common::{
    AlgorithmKind, ApproxBackend, Event, LpFamily, LpMode, ProblemParams, QmcTarget, RoundRecord, RunConfig, RunStatus,
    RunTrace,
};

use crate::error::Result;
use crate::model::BwkInstance;

/// Run the configured algorithm once.
pub fn run(inst: &BwkInstance, cfg: &RunConfig, seed: u64) -> Result<RunTrace> {
    match cfg.algorithm {
        AlgorithmKind::Alg1Quantum | AlgorithmKind::Alg1Classical => run_alg1(inst, cfg, seed),
        AlgorithmKind::Alg2Quantum | AlgorithmKind::Alg2Classical => run_alg2(inst, cfg, seed),
    }
}
