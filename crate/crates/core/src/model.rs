//! Instance model: finitely supported arm distributions, the time-augmented
//! cost matrix, and the LP ground truth used to score runs.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{BwkError, Result};
use crate::lp::{solve_exact, LpProblem, LpStatus};

/// Tolerance used to decide positivity of ξ* and tightness of constraints.
pub const CLASSIFY_TOL: f64 = 1e-9;

const PROB_TOL: f64 = 1e-12;

/// One support point of an arm's joint (reward, cost) distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atom {
    pub p: f64,
    pub reward: f64,
    /// Consumption of each user resource (time excluded).
    pub cost: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmDistribution {
    pub atoms: Vec<Atom>,
}

impl ArmDistribution {
    pub fn mean_reward(&self) -> f64 {
        self.atoms.iter().map(|a| a.p * a.reward).sum()
    }

    pub fn mean_cost(&self, d_user: usize) -> Vec<f64> {
        let mut out = vec![0.0; d_user];
        for a in &self.atoms {
            for (o, c) in out.iter_mut().zip(&a.cost) {
                *o += a.p * c;
            }
        }
        out
    }

    fn validate(&self, arm: usize, d_user: usize) -> Result<()> {
        let bad = |msg: String| Err(BwkError::InvalidInstance(format!("arm {arm}: {msg}")));
        if self.atoms.is_empty() {
            return bad("no atoms".into());
        }
        let mut total = 0.0;
        for (k, a) in self.atoms.iter().enumerate() {
            if !(0.0..=1.0).contains(&a.p) {
                return bad(format!("atom {k} has probability {} outside [0,1]", a.p));
            }
            if !(0.0..=1.0).contains(&a.reward) {
                return bad(format!("atom {k} has reward {} outside [0,1]", a.reward));
            }
            if a.cost.len() != d_user {
                return bad(format!("atom {k} has {} cost entries, expected {d_user}", a.cost.len()));
            }
            if let Some(c) = a.cost.iter().find(|c| !(0.0..=1.0).contains(*c)) {
                return bad(format!("atom {k} has cost {c} outside [0,1]"));
            }
            total += a.p;
        }
        if (total - 1.0).abs() > PROB_TOL {
            return bad(format!("atom probabilities sum to {total}"));
        }
        Ok(())
    }
}

/// Serialized instance as read from disk. `T` and `B` exclude the time resource.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    pub m: usize,
    pub d_user: usize,
    #[serde(rename = "T")]
    pub horizon: u64,
    #[serde(rename = "B")]
    pub budget: f64,
    pub arms: Vec<ArmDistribution>,
}

/// A validated instance. Resource 0 is time, consumed at rate `B/T` by every arm;
/// resources `1..d` are the user resources.
#[derive(Clone, Debug, PartialEq)]
pub struct BwkInstance {
    horizon: u64,
    budget: f64,
    d_user: usize,
    arms: Vec<ArmDistribution>,
}

/// Outcome of one pull. `cost[0]` is the time consumption.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub reward: f64,
    pub cost: Vec<f64>,
}

/// Validate a serialized instance and prepend the deterministic time resource.
pub fn augment_time_resource(spec: &InstanceSpec) -> Result<BwkInstance> {
    if spec.m == 0 || spec.arms.len() != spec.m {
        return Err(BwkError::InvalidInstance(format!(
            "m = {} but {} arms given",
            spec.m,
            spec.arms.len()
        )));
    }
    if spec.horizon == 0 {
        return Err(BwkError::InvalidInstance("T must be positive".into()));
    }
    if !(spec.budget > 0.0 && spec.budget <= spec.horizon as f64) {
        return Err(BwkError::InvalidInstance(format!(
            "B = {} must satisfy 0 < B <= T = {}",
            spec.budget, spec.horizon
        )));
    }
    for (i, arm) in spec.arms.iter().enumerate() {
        arm.validate(i, spec.d_user)?;
    }
    Ok(BwkInstance {
        horizon: spec.horizon,
        budget: spec.budget,
        d_user: spec.d_user,
        arms: spec.arms.clone(),
    })
}

impl BwkInstance {
    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    /// Per-round budget `b = B/T`, also the time row of the cost matrix.
    pub fn per_round_budget(&self) -> f64 {
        self.budget / self.horizon as f64
    }

    pub fn num_arms(&self) -> usize {
        self.arms.len()
    }

    /// Number of resources including time.
    pub fn num_resources(&self) -> usize {
        self.d_user + 1
    }

    pub fn d_user(&self) -> usize {
        self.d_user
    }

    pub fn arms(&self) -> &[ArmDistribution] {
        &self.arms
    }

    /// Same arms with a different horizon and budget.
    pub fn with_horizon(&self, horizon: u64, budget: f64) -> Result<BwkInstance> {
        augment_time_resource(&InstanceSpec {
            horizon,
            budget,
            ..self.to_spec()
        })
    }

    pub fn to_spec(&self) -> InstanceSpec {
        InstanceSpec {
            m: self.arms.len(),
            d_user: self.d_user,
            horizon: self.horizon,
            budget: self.budget,
            arms: self.arms.clone(),
        }
    }

    pub fn reward_means(&self) -> Vec<f64> {
        self.arms.iter().map(ArmDistribution::mean_reward).collect()
    }

    /// Mean cost matrix, `d` rows (time first) by `m` columns.
    pub fn cost_means(&self) -> Vec<Vec<f64>> {
        let b = self.per_round_budget();
        let mut rows = vec![vec![b; self.arms.len()]];
        let cols: Vec<Vec<f64>> = self.arms.iter().map(|a| a.mean_cost(self.d_user)).collect();
        for j in 0..self.d_user {
            rows.push(cols.iter().map(|c| c[j]).collect());
        }
        rows
    }

    pub fn sample_arm<R: Rng + ?Sized>(&self, arm: usize, rng: &mut R) -> Result<Outcome> {
        let dist = self
            .arms
            .get(arm)
            .ok_or_else(|| BwkError::InvalidArgument(format!("arm {arm} out of range (m = {})", self.arms.len())))?;
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut chosen = dist.atoms.last().expect("validated non-empty");
        for atom in &dist.atoms {
            acc += atom.p;
            if u < acc {
                chosen = atom;
                break;
            }
        }
        let mut cost = Vec::with_capacity(self.d_user + 1);
        cost.push(self.per_round_budget());
        cost.extend_from_slice(&chosen.cost);
        Ok(Outcome {
            reward: chosen.reward,
            cost,
        })
    }
}

/// LP ground truth of an instance. Values and ξ* are in original units;
/// `delta` and `chi` are per-round quantities (divided by `T`).
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GroundTruth {
    pub reward_means: Vec<f64>,
    pub cost_means: Vec<Vec<f64>>,
    pub opt_lp: f64,
    pub xi_star: Vec<f64>,
    pub eta_star: Vec<f64>,
    /// Optimal value with arm `i` forced to zero.
    pub opt_without_arm: Vec<f64>,
    /// Value of the constraint-removal LP for resource `j`.
    pub opt_without_resource: Vec<f64>,
    pub i_star: Vec<usize>,
    pub i_prime: Vec<usize>,
    pub j_star: Vec<usize>,
    pub j_prime: Vec<usize>,
    pub delta: f64,
    pub sigma: f64,
    pub chi: f64,
    pub nondegenerate: bool,
}

/// Index sets: arms with positive weight, and tight constraints.
pub fn classify(xi: &[f64], cost: &[Vec<f64>], budget: &[f64], tol: f64) -> (Vec<usize>, Vec<usize>) {
    let arms = (0..xi.len()).filter(|&i| xi[i] > tol).collect();
    let rows = (0..cost.len())
        .filter(|&j| {
            let used: f64 = cost[j].iter().zip(xi).map(|(c, x)| c * x).sum();
            (budget[j] - used).abs() <= tol
        })
        .collect();
    (arms, rows)
}

/// Smallest singular value of the submatrix with the given rows and columns.
pub fn sigma_min(matrix: &[Vec<f64>], rows: &[usize], cols: &[usize]) -> f64 {
    if rows.is_empty() || cols.is_empty() {
        return 0.0;
    }
    let sub = DMatrix::from_fn(rows.len(), cols.len(), |a, b| matrix[rows[a]][cols[b]]);
    sub.singular_values().iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Primal LP `max rᵀx s.t. Cx <= rhs` in normalized units, optionally pinning one arm.
pub(crate) fn primal_lp(reward: &[f64], cost: &[Vec<f64>], rhs: &[f64], pin: Option<usize>) -> LpProblem {
    LpProblem {
        objective: reward.to_vec(),
        a: cost.to_vec(),
        rhs: rhs.to_vec(),
        pins: pin.into_iter().collect(),
        geq_a: vec![],
        geq_rhs: vec![],
    }
}

/// Constraint-removal LP for row `j`: `min rhsᵀη - rhs_j s.t. Cᵀη >= r + C_j, η >= 0`,
/// posed as a maximization of `-rhsᵀη`.
pub(crate) fn removal_lp(reward: &[f64], cost: &[Vec<f64>], rhs: &[f64], j: usize) -> LpProblem {
    let d = cost.len();
    let m = reward.len();
    let geq_a = (0..m).map(|i| (0..d).map(|k| cost[k][i]).collect()).collect();
    let geq_rhs = (0..m).map(|i| reward[i] + cost[j][i]).collect();
    LpProblem {
        objective: rhs.iter().map(|b| -b).collect(),
        a: vec![],
        rhs: vec![],
        pins: vec![],
        geq_a,
        geq_rhs,
    }
}

/// Value of the constraint-removal LP for row `j` (normalized units).
pub(crate) fn removal_value(reward: &[f64], cost: &[Vec<f64>], rhs: &[f64], j: usize) -> Result<f64> {
    let sol = solve_exact(&removal_lp(reward, cost, rhs, j))?;
    match sol.status {
        LpStatus::Optimal => Ok(-sol.value - rhs[j]),
        s => Err(BwkError::Lp(format!("removal LP for resource {j} is {s:?}"))),
    }
}

/// Solve the LP relaxation and all removal LPs; derive δ, σ, χ and nondegeneracy.
///
/// Everything is solved on the per-round scale (budget `b`) and multiplied back by `T`.
pub fn compute_ground_truth(inst: &BwkInstance) -> Result<GroundTruth> {
    let t = inst.horizon() as f64;
    let b = inst.per_round_budget();
    let reward = inst.reward_means();
    let cost = inst.cost_means();
    let m = reward.len();
    let d = cost.len();
    let rhs = vec![b; d];

    let main = solve_exact(&primal_lp(&reward, &cost, &rhs, None))?;
    if main.status != LpStatus::Optimal {
        return Err(BwkError::Lp(format!("LP relaxation is {:?}", main.status)));
    }
    let x = main.x.clone();
    let (i_star, j_star) = classify(&x, &cost, &rhs, CLASSIFY_TOL);
    let i_set: BTreeSet<usize> = i_star.iter().copied().collect();
    let j_set: BTreeSet<usize> = j_star.iter().copied().collect();
    let i_prime: Vec<usize> = (0..m).filter(|i| !i_set.contains(i)).collect();
    let j_prime: Vec<usize> = (0..d).filter(|j| !j_set.contains(j)).collect();

    let mut opt_without_arm = Vec::with_capacity(m);
    for i in 0..m {
        let sol = solve_exact(&primal_lp(&reward, &cost, &rhs, Some(i)))?;
        if sol.status != LpStatus::Optimal {
            return Err(BwkError::Lp(format!("arm-removal LP {i} is {:?}", sol.status)));
        }
        opt_without_arm.push(sol.value);
    }
    let mut opt_without_resource = Vec::with_capacity(d);
    for j in 0..d {
        opt_without_resource.push(removal_value(&reward, &cost, &rhs, j)?);
    }

    let competitor = i_star
        .iter()
        .map(|&i| opt_without_arm[i])
        .chain(j_prime.iter().map(|&j| opt_without_resource[j]))
        .fold(f64::NEG_INFINITY, f64::max);
    let delta = if competitor.is_finite() {
        main.value - competitor
    } else {
        f64::NAN
    };
    let sigma = sigma_min(&cost, &j_star, &i_star);
    let chi = i_star.iter().map(|&i| x[i]).fold(f64::INFINITY, f64::min);
    let chi = if chi.is_finite() { chi } else { 0.0 };

    let nondegenerate = !i_star.is_empty()
        && i_star.len() == j_star.len()
        && sigma > CLASSIFY_TOL
        && delta > CLASSIFY_TOL
        && solution_is_stable(&reward, &cost, &rhs, &x)?;

    Ok(GroundTruth {
        opt_lp: main.value * t,
        xi_star: x.iter().map(|v| v * t).collect(),
        eta_star: main.dual.clone(),
        opt_without_arm: opt_without_arm.iter().map(|v| v * t).collect(),
        opt_without_resource: opt_without_resource.iter().map(|v| v * t).collect(),
        i_star,
        i_prime,
        j_star,
        j_prime,
        delta,
        sigma,
        chi,
        nondegenerate,
        reward_means: reward,
        cost_means: cost,
    })
}

/// Uniqueness heuristic: nudging each reward coefficient up and down must not move
/// the optimizer.
fn solution_is_stable(reward: &[f64], cost: &[Vec<f64>], rhs: &[f64], x: &[f64]) -> Result<bool> {
    const NUDGE: f64 = 1e-7;
    const MOVE_TOL: f64 = 1e-7;
    for i in 0..reward.len() {
        for sign in [-1.0, 1.0] {
            let mut r = reward.to_vec();
            r[i] += sign * NUDGE;
            let sol = solve_exact(&primal_lp(&r, cost, rhs, None))?;
            if sol.status != LpStatus::Optimal {
                return Ok(false);
            }
            if sol.x.iter().zip(x).any(|(a, b)| (a - b).abs() > MOVE_TOL) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Two-armed, two-resource instance used throughout the tests and docs.
/// Arm means: rewards (0.9, 0.5), resource costs (1.0, 0.2); T = 100, B = 50.
pub fn canonical_instance() -> BwkInstance {
    let arm = |reward: f64, cost: f64| ArmDistribution {
        atoms: vec![Atom {
            p: 1.0,
            reward,
            cost: vec![cost],
        }],
    };
    augment_time_resource(&InstanceSpec {
        m: 2,
        d_user: 1,
        horizon: 100,
        budget: 50.0,
        arms: vec![arm(0.9, 1.0), arm(0.5, 0.2)],
    })
    .expect("canonical instance is valid")
}

/// The canonical instance plus a dominated third arm and a slack resource.
///
/// Arm 3 has reward 0.1 and costs 1.0 on the first user resource; every arm
/// costs 0.1 on the second user resource.
pub fn canonical_extended_instance(horizon: u64) -> BwkInstance {
    let arm = |reward: f64, cost: f64| ArmDistribution {
        atoms: vec![Atom {
            p: 1.0,
            reward,
            cost: vec![cost, 0.1],
        }],
    };
    augment_time_resource(&InstanceSpec {
        m: 3,
        d_user: 2,
        horizon,
        budget: horizon as f64 / 2.0,
        arms: vec![arm(0.9, 1.0), arm(0.5, 0.2), arm(0.1, 1.0)],
    })
    .expect("extended canonical instance is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn time_row_is_prepended() {
        let inst = canonical_instance();
        assert_eq!(inst.num_resources(), 2);
        assert_eq!(inst.cost_means()[0], vec![0.5, 0.5]);
        assert_eq!(inst.cost_means()[1], vec![1.0, 0.2]);
    }

    #[test]
    fn rejects_probabilities_not_summing_to_one() {
        let spec = InstanceSpec {
            m: 1,
            d_user: 1,
            horizon: 10,
            budget: 5.0,
            arms: vec![ArmDistribution {
                atoms: vec![Atom {
                    p: 0.7,
                    reward: 0.5,
                    cost: vec![0.5],
                }],
            }],
        };
        assert!(augment_time_resource(&spec).is_err());
    }

    #[test]
    fn rejects_budget_above_horizon() {
        let mut spec = canonical_instance().to_spec();
        spec.budget = 101.0;
        assert!(augment_time_resource(&spec).is_err());
    }

    #[test]
    fn sample_out_of_range_arm_fails() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(canonical_instance().sample_arm(2, &mut rng).is_err());
    }

    #[test]
    fn sampling_matches_atom_frequencies() {
        let spec = InstanceSpec {
            m: 1,
            d_user: 1,
            horizon: 10,
            budget: 5.0,
            arms: vec![ArmDistribution {
                atoms: vec![
                    Atom {
                        p: 0.3,
                        reward: 1.0,
                        cost: vec![0.0],
                    },
                    Atom {
                        p: 0.7,
                        reward: 0.0,
                        cost: vec![1.0],
                    },
                ],
            }],
        };
        let inst = augment_time_resource(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 20_000;
        let hits = (0..n)
            .filter(|_| inst.sample_arm(0, &mut rng).unwrap().reward == 1.0)
            .count();
        assert!((hits as f64 / n as f64 - 0.3).abs() < 0.02);
    }

    #[test]
    fn classify_uses_tolerance() {
        let cost = vec![vec![0.5, 0.5], vec![1.0, 0.2]];
        let (arms, rows) = classify(&[0.375, 0.625], &cost, &[0.5, 0.5], 1e-9);
        assert_eq!(arms, vec![0, 1]);
        assert_eq!(rows, vec![0, 1]);
        let (arms, rows) = classify(&[0.5, 0.0], &cost, &[0.5, 0.5], 1e-9);
        assert_eq!(arms, vec![0]);
        assert_eq!(rows, vec![1]);
    }

    #[test]
    fn extended_instance_ground_truth() {
        let gt = compute_ground_truth(&canonical_extended_instance(100)).unwrap();
        assert!((gt.opt_lp - 65.0).abs() < 1e-9);
        assert_eq!(gt.i_star, vec![0, 1]);
        assert_eq!(gt.j_prime, vec![2]);
        assert!((gt.opt_without_resource[2] - 25.0).abs() < 1e-9);
        assert!((gt.delta - 0.15).abs() < 1e-9);
        assert!(gt.nondegenerate);
    }

    #[test]
    fn tied_arms_are_degenerate() {
        let arm = ArmDistribution {
            atoms: vec![Atom {
                p: 1.0,
                reward: 0.5,
                cost: vec![0.5],
            }],
        };
        let inst = augment_time_resource(&InstanceSpec {
            m: 2,
            d_user: 1,
            horizon: 100,
            budget: 50.0,
            arms: vec![arm.clone(), arm],
        })
        .unwrap();
        assert!(!compute_ground_truth(&inst).unwrap().nondegenerate);
    }
}
