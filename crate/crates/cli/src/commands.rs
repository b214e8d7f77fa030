use std::path::{Path, PathBuf};

use bwk_core::algos::{
    self, alg2_theta, alg2_window, theorem4_eps_lp, AlgorithmKind, LpMode, ProblemParams, RunConfig,
};
use bwk_core::bench::{
    fit_loglog_slope, lp_mode_name, run_sweep, thread_cap_from_env, verify_trace, write_atomic, SweepSpec,
};
use bwk_core::lp::{
    default_scale, modeled_cost, scale_for_approx, solve_approx, solve_exact, ApproxOptions, CostModel, LpProblem,
    LpSolution,
};
use bwk_core::model::compute_ground_truth;
use serde::Serialize;
use serde_json::json;

use crate::config::{read_json, CliConfig};
use crate::{CliError, Mode};

fn load_config(path: &Path) -> Result<(CliConfig, PathBuf), CliError> {
    let cfg: CliConfig = read_json(path, "config")?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((cfg, base))
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value).map_err(|e| CliError::Core(e.into()))
}

pub fn inspect(config: &Path, horizon: Option<u64>) -> Result<(), CliError> {
    let (cfg, base) = load_config(config)?;
    let family = cfg.instance.resolve(&base)?;
    let inst = family.at(horizon.unwrap_or(family.default_horizon))?;
    let gt = compute_ground_truth(&inst)?;
    let (m, d, b) = (inst.num_arms(), inst.num_resources(), inst.per_round_budget());
    let constants = gt.nondegenerate.then(|| {
        let p = ProblemParams {
            sigma: gt.sigma,
            delta: gt.delta,
            chi: gt.chi,
        };
        (
            alg2_theta(m, d, b, &p),
            alg2_window(d, b, &p),
            theorem4_eps_lp(m, d, b, inst.horizon(), &p),
        )
    });

    println!("arms m = {m}, resources d = {d} (time first)");
    println!(
        "horizon T = {}, budget B = {}, per-round b = {b}",
        inst.horizon(),
        inst.budget()
    );
    println!("OPT_LP = {}", gt.opt_lp);
    println!("optimal allocation xi* = {:?}", gt.xi_star);
    println!("optimal duals eta* = {:?}", gt.eta_star);
    println!(
        "optimal arms I* = {:?}, binding resources J* = {:?}",
        gt.i_star, gt.j_star
    );
    println!("delta = {}, sigma = {}, chi = {}", gt.delta, gt.sigma, gt.chi);
    println!("nondegenerate = {}", gt.nondegenerate);
    match constants {
        Some((theta, window, eps_lp)) => {
            println!("theta = {theta:.6e}, eps_phase2 = {window:.6e}");
            println!("eps_LP bound = {eps_lp:.6e}");
        }
        None => println!("theta, eps_phase2 and the eps_LP bound are undefined for degenerate instances"),
    }
    let report = json!({
        "m": m,
        "d": d,
        "T": inst.horizon(),
        "B": inst.budget(),
        "b": b,
        "opt_lp": gt.opt_lp,
        "xi_star": gt.xi_star,
        "eta_star": gt.eta_star,
        "i_star": gt.i_star,
        "j_star": gt.j_star,
        "j_prime": gt.j_prime,
        "opt_without_arm": gt.opt_without_arm,
        "opt_without_resource": gt.opt_without_resource,
        "delta": gt.delta,
        "sigma": gt.sigma,
        "chi": gt.chi,
        "nondegenerate": gt.nondegenerate,
        "theta": constants.map(|c| c.0),
        "eps_phase2": constants.map(|c| c.1),
        "eps_lp_bound": constants.map(|c| c.2),
    });
    println!();
    println!("{}", to_json(&report)?);
    Ok(())
}

pub struct SimulateRequest {
    pub config: PathBuf,
    pub algo: Option<String>,
    pub horizon: Option<u64>,
    pub seed: Option<u64>,
    pub mode: Option<Mode>,
    pub out: Option<PathBuf>,
}

fn pick_algorithm(cfg: &CliConfig, name: Option<&str>) -> Result<RunConfig, CliError> {
    let Some(name) = name else {
        return cfg
            .algorithms
            .first()
            .cloned()
            .ok_or_else(|| CliError::Usage("no --algo given and the config lists no algorithms".into()));
    };
    let kind = AlgorithmKind::from_name(name).ok_or_else(|| {
        let known: Vec<&str> = AlgorithmKind::ALL.iter().map(|k| k.name()).collect();
        CliError::Usage(format!(
            "unknown algorithm {name:?}; expected one of {}",
            known.join(", ")
        ))
    })?;
    Ok(cfg
        .algorithms
        .iter()
        .find(|c| c.algorithm == kind)
        .cloned()
        .unwrap_or_else(|| RunConfig::new(kind)))
}

fn lp_mode(mode: Mode) -> LpMode {
    match mode {
        Mode::Exact => LpMode::Exact,
        Mode::Approx => LpMode::Approx,
    }
}

pub fn simulate(req: &SimulateRequest) -> Result<(), CliError> {
    let (cfg, base) = load_config(&req.config)?;
    let family = cfg.instance.resolve(&base)?;
    let inst = family.at(req.horizon.unwrap_or(family.default_horizon))?;
    let mut run_cfg = pick_algorithm(&cfg, req.algo.as_deref())?;
    if let Some(mode) = req.mode {
        run_cfg.lp_mode = lp_mode(mode);
    }
    let seed = req.seed.unwrap_or(cfg.experiment.seed);
    let trace = algos::run(&inst, &run_cfg, seed)?;
    verify_trace(&trace, &inst)?;
    let gt = compute_ground_truth(&inst)?;

    let dir = req
        .out
        .clone()
        .or(cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let path = dir.join(format!("trace-{}-{seed}.json", run_cfg.algorithm.name()));
    write_atomic(&path, to_json(&trace)?.as_bytes())?;
    println!(
        "algo={} seed={seed} T={} tau={} pseudo_regret={:.4} realized_regret={:.4} qmc_queries={} lp_solves={} status={:?} trace={}",
        run_cfg.algorithm.name(),
        inst.horizon(),
        trace.tau,
        gt.opt_lp - trace.expected_reward,
        gt.opt_lp - trace.realized_reward,
        trace.qmc_query_total,
        trace.lp_solve_count,
        trace.status,
        path.display()
    );
    Ok(())
}

pub fn sweep(config: &Path, seed: Option<u64>, dry_run: bool, out: Option<&Path>) -> Result<(), CliError> {
    let (cfg, base) = load_config(config)?;
    if cfg.t_grid.is_empty() {
        return Err(CliError::Usage("t_grid must not be empty".into()));
    }
    if cfg.algorithms.is_empty() {
        return Err(CliError::Usage("algorithms must not be empty".into()));
    }
    if cfg.experiment.replications == 0 {
        return Err(CliError::Usage("experiment.replications must be at least 1".into()));
    }
    let dir = out
        .map(Path::to_path_buf)
        .or(cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    if dry_run {
        for a in &cfg.algorithms {
            for t in &cfg.t_grid {
                println!(
                    "planned: algo={} lp_mode={} T={t} replications={}",
                    a.algorithm.name(),
                    lp_mode_name(a.lp_mode),
                    cfg.experiment.replications
                );
            }
        }
        println!(
            "would write {} and {}",
            dir.join("runs.csv").display(),
            dir.join("summary.csv").display()
        );
        return Ok(());
    }
    let family = cfg.instance.resolve(&base)?;
    let spec = SweepSpec {
        instance: family.template,
        budget_rule: family.budget_rule,
        t_grid: cfg.t_grid.clone(),
        algorithms: cfg.algorithms.clone(),
        replications: cfg.experiment.replications,
        seed: seed.unwrap_or(cfg.experiment.seed),
    };
    if let Some(name) = &cfg.experiment.name {
        println!("experiment {name}");
    }
    let outcome = run_sweep(&spec, Some(&dir), thread_cap_from_env())?;
    println!("wrote {}", dir.join("runs.csv").display());
    println!("wrote {}", dir.join("summary.csv").display());
    let mut cells: Vec<(String, String)> = Vec::new();
    for row in &outcome.summary {
        let key = (row.algo.clone(), row.lp_mode.clone());
        if !cells.contains(&key) {
            cells.push(key);
        }
    }
    for (algo, mode) in cells {
        let rows: Vec<_> = outcome
            .summary
            .iter()
            .filter(|r| r.algo == algo && r.lp_mode == mode)
            .collect();
        let xs: Vec<f64> = rows.iter().map(|r| r.horizon as f64).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.pseudo_regret_mean).collect();
        match fit_loglog_slope(&xs, &ys) {
            Ok(s) => println!("{algo} ({mode} LP): log-log regret slope {s:.3}"),
            Err(e) => println!("{algo} ({mode} LP): no slope ({e})"),
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct CostUnits {
    quantum: f64,
    classical_approx: f64,
    classical_exact: f64,
}

#[derive(Serialize)]
struct LpReport {
    mode: &'static str,
    eps: Option<f64>,
    scale: Option<f64>,
    #[serde(flatten)]
    solution: LpSolution,
    cost_units: CostUnits,
}

pub fn lp(file: &Path, mode: Mode, eps: f64, scale: Option<f64>) -> Result<(), CliError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(CliError::Usage("eps must be positive".into()));
    }
    let problem: LpProblem = read_json(file, "LP file")?;
    problem.validate()?;
    let (n, rows) = (problem.num_vars(), problem.a.len() + problem.geq_a.len());
    let cost_units = CostUnits {
        quantum: modeled_cost(CostModel::Quantum, n, rows, eps)?,
        classical_approx: modeled_cost(CostModel::ClassicalApprox, n, rows, eps)?,
        classical_exact: modeled_cost(CostModel::ClassicalExact, n, rows, eps)?,
    };
    let report = match mode {
        Mode::Exact => LpReport {
            mode: "exact",
            eps: None,
            scale: None,
            solution: solve_exact(&problem)?,
            cost_units,
        },
        Mode::Approx => {
            let s = scale.unwrap_or_else(|| default_scale(&problem));
            let scaled = scale_for_approx(&problem, s)?;
            LpReport {
                mode: "approx",
                eps: Some(eps),
                scale: Some(s),
                solution: solve_approx(&scaled, eps, ApproxOptions::default())?,
                cost_units,
            }
        }
    };
    println!("{}", to_json(&report)?);
    Ok(())
}
