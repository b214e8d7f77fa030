//! Property tests for the invariants every module promises.

use bwk_core::algos::{self, AlgorithmKind, RunConfig, RunStatus};
use bwk_core::bench::{fit_loglog_slope, generate_planted, regret_decomposition, to_csv, verify_trace, RegretRecord};
use bwk_core::estimators::{ae_outcome_law, hoeffding_radius, qmc1_queries, qmc2_eps_for_queries, qmc2_queries};
use bwk_core::lp::{brute_force_vertices, build_game, modeled_cost, solve_exact, CostModel, LpProblem, LpStatus};
use bwk_core::model::{augment_time_resource, compute_ground_truth, ArmDistribution, Atom, InstanceSpec};
use proptest::prelude::*;

fn arm_strategy(d_user: usize) -> impl Strategy<Value = ArmDistribution> {
    (0.05..0.95f64, prop::collection::vec(0.05..0.95f64, d_user)).prop_map(|(reward, cost)| ArmDistribution {
        atoms: vec![Atom { p: 1.0, reward, cost }],
    })
}

fn instance_strategy() -> impl Strategy<Value = InstanceSpec> {
    (2usize..=4, 1usize..=3, 0.2..0.8f64).prop_flat_map(|(m, d_user, b)| {
        prop::collection::vec(arm_strategy(d_user), m).prop_map(move |arms| InstanceSpec {
            m,
            d_user,
            horizon: 1000,
            budget: b * 1000.0,
            arms,
        })
    })
}

fn lp_strategy() -> impl Strategy<Value = LpProblem> {
    (1usize..=5, 1usize..=5).prop_flat_map(|(n, rows)| {
        (
            prop::collection::vec(-0.5..1.0f64, n),
            prop::collection::vec(prop::collection::vec(-0.3..1.0f64, n), rows - 1),
            prop::collection::vec(0.1..1.0f64, n),
            prop::collection::vec(0.1..2.0f64, rows),
        )
            .prop_map(|(objective, mut a, positive, rhs)| {
                a.push(positive);
                LpProblem {
                    objective,
                    a,
                    rhs,
                    ..Default::default()
                }
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn strong_duality_on_instances(spec in instance_strategy()) {
        let inst = augment_time_resource(&spec).unwrap();
        let gt = compute_ground_truth(&inst).unwrap();
        let dual_value: f64 = gt.eta_star.iter().map(|e| e * inst.budget()).sum();
        prop_assert!((gt.opt_lp - dual_value).abs() <= 1e-8 * gt.opt_lp.max(1.0));
    }

    #[test]
    fn removal_gaps_classify_sets(spec in instance_strategy()) {
        let inst = augment_time_resource(&spec).unwrap();
        let gt = compute_ground_truth(&inst).unwrap();
        prop_assume!(gt.nondegenerate);
        for i in 0..inst.num_arms() {
            let drops = gt.opt_without_arm[i] < gt.opt_lp - 1e-9;
            prop_assert_eq!(drops, gt.i_star.contains(&i));
        }
        for j in 0..inst.num_resources() {
            let drops = gt.opt_without_resource[j] < gt.opt_lp - 1e-9;
            prop_assert_eq!(drops, gt.j_prime.contains(&j));
        }
    }

    #[test]
    fn problem_parameters_are_bounded(spec in instance_strategy()) {
        let inst = augment_time_resource(&spec).unwrap();
        let gt = compute_ground_truth(&inst).unwrap();
        let t = inst.horizon() as f64;
        prop_assert!(gt.delta * t <= gt.opt_lp + 1e-9);
        let min_pos = gt.xi_star.iter().copied().filter(|&x| x > 1e-9).fold(f64::INFINITY, f64::min);
        prop_assert!(gt.chi * t <= min_pos + 1e-9);
        prop_assert!(gt.sigma <= (gt.j_star.len() as f64).sqrt() + 1e-12);
    }

    #[test]
    fn exact_matches_vertex_enumeration(lp in lp_strategy()) {
        let exact = solve_exact(&lp).unwrap();
        let brute = brute_force_vertices(&lp).unwrap();
        prop_assert_eq!(exact.status, LpStatus::Optimal);
        prop_assert_eq!(brute.status, LpStatus::Optimal);
        prop_assert!((exact.value - brute.value).abs() <= 1e-8);
        prop_assert!(lp.violation(&exact.x) <= 1e-12);
        let dual_value: f64 = exact.dual.iter().zip(&lp.rhs).map(|(y, b)| y * b).sum();
        prop_assert!((exact.value - dual_value).abs() <= 1e-8);
    }

    #[test]
    fn game_blocks_round_trip(
        (n, rows) in (1usize..=3, 1usize..=3),
        seed in any::<u64>(),
        alpha in 0.0..1.0f64,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let objective: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a: Vec<Vec<f64>> = (0..rows).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let rhs: Vec<f64> = (0..rows).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g = build_game(&objective, &a, &rhs, alpha).unwrap().to_rows();
        // Rows: two simplex rows, the objective threshold row, then A; columns: the
        // variables, an auxiliary column and the homogenizing column.
        prop_assert_eq!(g.len(), rows + 3);
        prop_assert_eq!(&g[0], &[vec![1.0; n], vec![1.0, -1.0]].concat());
        prop_assert_eq!(&g[1], &[vec![-1.0; n], vec![1.0, 1.0]].concat());
        let neg_obj: Vec<f64> = objective.iter().map(|c| -c).collect();
        prop_assert_eq!(&g[2], &[neg_obj, vec![0.0, alpha]].concat());
        for k in 0..rows {
            prop_assert_eq!(&g[3 + k], &[a[k].clone(), vec![0.0, -rhs[k]]].concat());
        }
    }

    #[test]
    fn modeled_cost_monotone(m in 1usize..20, d in 1usize..20, eps in 0.001..0.5f64) {
        for model in [CostModel::Quantum, CostModel::ClassicalApprox, CostModel::ClassicalExact] {
            let base = modeled_cost(model, m, d, eps).unwrap();
            prop_assert!(modeled_cost(model, m, d, eps / 2.0).unwrap() >= base);
            prop_assert!(modeled_cost(model, m + 1, d, eps).unwrap() >= base);
        }
    }

    #[test]
    fn radius_crossover(n in 1u64..100_000, t in 3u64..1_000_000, c1 in 1.0..4.0f64) {
        let log_t = (t as f64).ln();
        let quantum = 2.0 * c1 * log_t / n as f64;
        let classical = hoeffding_radius(n, t);
        let threshold = 4.0 * c1 * c1 / 3.0 * log_t;
        let nf = n as f64;
        // Skip counts within rounding of the threshold.
        prop_assume!((nf - threshold).abs() > 1e-6 * threshold);
        prop_assert_eq!(quantum <= classical, nf >= threshold);
    }

    #[test]
    fn query_counts_are_deterministic(eps in 1e-3..0.5f64, delta in 1e-9..0.5f64, d in 1usize..10, c in 1.0..3.0f64) {
        prop_assert_eq!(qmc1_queries(eps, delta, c).unwrap(), qmc1_queries(eps, delta, c).unwrap());
        prop_assert_eq!(qmc2_queries(d, eps, delta, c).unwrap(), qmc2_queries(d, eps, delta, c).unwrap());
        prop_assert!(qmc1_queries(eps / 2.0, delta, c).unwrap() >= qmc1_queries(eps, delta, c).unwrap());
    }

    #[test]
    fn radii_shrink_with_samples(n in 1u64..10_000, t in 2u64..100_000, d in 1usize..6) {
        prop_assert!(hoeffding_radius(n + 1, t) <= hoeffding_radius(n, t));
        let delta = 1e-6;
        prop_assert!(qmc2_eps_for_queries(d, n + 10, delta, 1.0) <= qmc2_eps_for_queries(d, n, delta, 1.0));
    }

    #[test]
    fn ae_law_sums_to_one(a in 0.0..=1.0f64, k in 1u32..9) {
        let law = ae_outcome_law(a, 1 << k).unwrap();
        prop_assert!((law.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn slope_recovers_power_laws(p in -1.0..2.0f64, c in 0.1..10.0f64) {
        let xs: Vec<f64> = (12..=16).map(|k| 2f64.powi(k)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| c * x.powf(p)).collect();
        prop_assert!((fit_loglog_slope(&xs, &ys).unwrap() - p).abs() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn runs_are_budget_safe_and_deterministic(
        seed in any::<u64>(),
        inst_seed in 0u64..1000,
        kind in prop::sample::select(AlgorithmKind::ALL.to_vec()),
    ) {
        let inst = generate_planted(3, 1, 0.4, 0.05, 2048, inst_seed).unwrap();
        let cfg = RunConfig::new(kind);
        let a = algos::run(&inst, &cfg, seed).unwrap();
        let b = algos::run(&inst, &cfg, seed).unwrap();
        prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        prop_assert!(verify_trace(&a, &inst).is_ok());
        // Play stops only once a budget is below one or the horizon is reached.
        if a.tau < inst.horizon() {
            prop_assert!(a.remaining_budget.iter().any(|&r| r < 1.0));
        }
        if kind == AlgorithmKind::Alg1Quantum {
            let calls: u64 = a.qmc_reward_calls.iter().sum();
            prop_assert!(calls as f64 <= algos::qmc_call_bound(3, inst.horizon(), cfg.c1));
        }
        let gt = compute_ground_truth(&inst).unwrap();
        if a.status == RunStatus::Completed {
            let (sub, left) = regret_decomposition(&a, &gt);
            prop_assert!(gt.opt_lp - a.expected_reward <= sub + left + 1e-6 * gt.opt_lp);
        }
    }

    #[test]
    fn planted_instances_satisfy_request(seed in any::<u64>(), m in 2usize..=5, margin in 0.01..0.05f64) {
        let d_user = 1;
        if let Ok(inst) = generate_planted(m, d_user, 0.3, margin, 1000, seed) {
            let gt = compute_ground_truth(&inst).unwrap();
            prop_assert!(gt.nondegenerate);
            prop_assert!(gt.delta >= margin);
            let again = generate_planted(m, d_user, 0.3, margin, 1000, seed).unwrap();
            prop_assert_eq!(inst, again);
        }
    }
}

#[test]
fn csv_header_is_stable() {
    let inst = generate_planted(3, 1, 0.25, 0.05, 512, 1).unwrap();
    let gt = compute_ground_truth(&inst).unwrap();
    let trace = algos::run(&inst, &RunConfig::new(AlgorithmKind::Alg1Classical), 2).unwrap();
    let rec = RegretRecord::from_trace(&trace, &gt, algos::LpMode::Exact, 0);
    let csv = String::from_utf8(to_csv(&[rec]).unwrap()).unwrap();
    let header = csv.lines().next().unwrap();
    assert_eq!(
        header,
        "algo,lp_mode,T,B,m,d,replication,seed,pseudo_regret,realized_regret,tau,phase1_rounds,\
identification_correct,pulls,qmc_query_total,lp_solve_count,modeled_quantum_cost,modeled_classical_cost,\
suboptimal_term,leftover_term,status"
    );
}
