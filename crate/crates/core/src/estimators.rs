//! Confidence bounds: classical Hoeffding radii and emulated quantum Monte Carlo
//! mean estimation (univariate and multivariate), plus the per-arm bound state
//! shared by the algorithms.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::Outcome;

/// How emulated quantum estimates are drawn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorBackend {
    /// With probability `1 - delta` uniform on `[mu - eps, mu + eps] ∩ [0, 1]`,
    /// otherwise uniform on `[0, 1]`.
    #[default]
    Idealized,
    /// Median of independent draws from the amplitude-estimation outcome law.
    AeAnalytic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QmcEstimate {
    pub value: f64,
    pub queries: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QmcVecEstimate {
    pub values: Vec<f64>,
    pub queries: u64,
}

pub fn hoeffding_radius(n: u64, horizon: u64) -> f64 {
    (3.0 * (horizon as f64).ln() / n as f64).sqrt()
}

/// Two-sided Hoeffding radius at failure probability `delta`: `sqrt(ln(2/delta) / (2n))`.
/// `hoeffding_radius(n, T)` is this radius at `delta = 2 T^-6`.
pub fn hoeffding_radius_for_delta(n: u64, delta: f64) -> f64 {
    ((2.0 / delta).ln() / (2.0 * n as f64)).sqrt()
}

/// `mean ± sqrt(3 ln T / n)`, not projected onto `[0, 1]`.
pub fn hoeffding_bounds(sum: f64, n: u64, horizon: u64) -> Result<(f64, f64)> {
    if n == 0 {
        return invalid("hoeffding bounds need at least one sample");
    }
    if horizon < 2 {
        return invalid("horizon must be at least 2");
    }
    let mean = sum / n as f64;
    let rad = hoeffding_radius(n, horizon);
    Ok((mean - rad, mean + rad))
}

fn check_accuracy(eps: f64, delta: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return invalid("eps must be positive");
    }
    if !(delta > 0.0 && delta < 1.0) {
        return invalid("delta must lie in (0, 1)");
    }
    Ok(())
}

/// Queries for a univariate estimate: `ceil((c1/eps) ln(1/delta))`.
pub fn qmc1_queries(eps: f64, delta: f64, c1: f64) -> Result<u64> {
    check_accuracy(eps, delta)?;
    Ok((c1 / eps * (1.0 / delta).ln()).ceil() as u64)
}

/// Queries for a `d`-dimensional estimate in sup norm:
/// `ceil(c2 · x · sqrt(ln x))` with `x = sqrt(d) ln(d/delta) / eps`.
/// The inner logarithm is floored at 1 so tiny problems still cost `ceil(c2 x)`.
pub fn qmc2_queries(d: usize, eps: f64, delta: f64, c2: f64) -> Result<u64> {
    check_accuracy(eps, delta)?;
    if d == 0 {
        return invalid("dimension must be positive");
    }
    let x = qmc2_scale(d, eps, delta);
    Ok((c2 * x * x.ln().max(1.0).sqrt()).ceil() as u64)
}

fn qmc2_scale(d: usize, eps: f64, delta: f64) -> f64 {
    let d = d as f64;
    d.sqrt() * (d / delta).ln() / eps
}

/// Largest accuracy achievable with `queries` multivariate queries: inverts
/// `queries = c2 · n · sqrt(ln n)` for `n` by bisection and returns
/// `sqrt(d) ln(d/delta) / n`.
pub fn qmc2_eps_for_queries(d: usize, queries: u64, delta: f64, c2: f64) -> f64 {
    let target = queries as f64;
    let f = |n: f64| c2 * n * n.ln().max(1.0).sqrt();
    let (mut lo, mut hi) = (1.0_f64, target.max(2.0));
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if f(mid) <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let d_f = d as f64;
    d_f.sqrt() * (d_f / delta).ln() / lo
}

fn idealized_draw<R: Rng + ?Sized>(mean: f64, eps: f64, success: bool, rng: &mut R) -> f64 {
    if success {
        let lo = (mean - eps).max(0.0);
        let hi = (mean + eps).min(1.0);
        if hi > lo {
            rng.gen_range(lo..=hi)
        } else {
            lo
        }
    } else {
        rng.gen_range(0.0..=1.0)
    }
}

pub fn qmc_univariate<R: Rng + ?Sized>(
    mean: f64,
    eps: f64,
    delta: f64,
    backend: EstimatorBackend,
    c1: f64,
    rng: &mut R,
) -> Result<QmcEstimate> {
    if !(0.0..=1.0).contains(&mean) {
        return invalid(format!("mean {mean} outside [0, 1]"));
    }
    let queries = qmc1_queries(eps, delta, c1)?;
    let value = match backend {
        EstimatorBackend::Idealized => {
            let ok = rng.gen::<f64>() >= delta;
            idealized_draw(mean, eps, ok, rng)
        }
        EstimatorBackend::AeAnalytic => ae_estimate(mean, eps, delta, rng),
    };
    Ok(QmcEstimate { value, queries })
}

pub fn qmc_multivariate<R: Rng + ?Sized>(
    means: &[f64],
    eps: f64,
    delta: f64,
    backend: EstimatorBackend,
    c2: f64,
    rng: &mut R,
) -> Result<QmcVecEstimate> {
    if let Some(v) = means.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return invalid(format!("mean {v} outside [0, 1]"));
    }
    let queries = qmc2_queries(means.len(), eps, delta, c2)?;
    let values = match backend {
        EstimatorBackend::Idealized => {
            let ok = rng.gen::<f64>() >= delta;
            means.iter().map(|&mu| idealized_draw(mu, eps, ok, rng)).collect()
        }
        EstimatorBackend::AeAnalytic => {
            let per = delta / means.len() as f64;
            means.iter().map(|&mu| ae_estimate(mu, eps, per, rng)).collect()
        }
    };
    Ok(QmcVecEstimate { values, queries })
}

/// Per-sample success probability of amplitude estimation.
pub const AE_SUCCESS: f64 = 8.0 / (std::f64::consts::PI * std::f64::consts::PI);

/// `2π sqrt(a(1-a)) / M + π² / M²`.
pub fn ae_error_bound(a: f64, grid: u64) -> f64 {
    let pi = std::f64::consts::PI;
    let m = grid as f64;
    2.0 * pi * (a * (1.0 - a)).sqrt() / m + pi * pi / (m * m)
}

/// Outcome probability of grid point `y` when the phase is `theta`.
fn ae_probability(theta: f64, y: u64, grid: u64) -> f64 {
    let pi = std::f64::consts::PI;
    let m = grid as f64;
    let gap = theta - y as f64 / m;
    let den = (gap * pi).sin();
    if den.abs() < 1e-12 {
        return 1.0;
    }
    let num = (m * gap * pi).sin();
    (num * num) / (m * m * den * den)
}

/// Probability of each grid outcome `y` in `0..grid` for amplitude `a`.
pub fn ae_outcome_law(a: f64, grid: u64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&a) {
        return invalid(format!("amplitude {a} outside [0, 1]"));
    }
    if grid < 2 {
        return invalid("grid size must be at least 2");
    }
    let theta = a.sqrt().asin() / std::f64::consts::PI;
    Ok((0..grid).map(|y| ae_probability(theta, y, grid)).collect())
}

/// One amplitude-estimation readout for amplitude `a` on a grid of size `grid`.
pub fn amplitude_estimation_sample<R: Rng + ?Sized>(a: f64, grid: u64, rng: &mut R) -> Result<f64> {
    if !(0.0..=1.0).contains(&a) {
        return invalid(format!("amplitude {a} outside [0, 1]"));
    }
    if grid < 2 {
        return invalid("grid size must be at least 2");
    }
    let theta = a.sqrt().asin() / std::f64::consts::PI;
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut pick = grid - 1;
    for y in 0..grid {
        acc += ae_probability(theta, y, grid);
        if u < acc {
            pick = y;
            break;
        }
    }
    let s = (std::f64::consts::PI * pick as f64 / grid as f64).sin();
    Ok(s * s)
}

pub fn median_amplify(samples: &[f64]) -> Result<f64> {
    if samples.len().is_multiple_of(2) {
        return invalid("median amplification needs an odd number of samples");
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s[s.len() / 2])
}

/// Grid size and repetition count for the amplitude-estimation backend: the
/// smallest power-of-two grid whose worst-case error is at most `eps`, and the
/// smallest odd repetition count whose median fails with probability at most `delta`.
pub fn ae_plan(eps: f64, delta: f64) -> (u64, usize) {
    let mut grid = 4u64;
    while ae_error_bound(0.5, grid) > eps && grid < 1 << 40 {
        grid *= 2;
    }
    let q = 1.0 - AE_SUCCESS;
    let mut k = 1usize;
    loop {
        let mut pmf = (1.0 - q).powi(k as i32);
        let mut tail = 0.0;
        for j in 0..=k {
            if j >= k.div_ceil(2) {
                tail += pmf;
            }
            pmf *= (k - j) as f64 / (j + 1) as f64 * q / (1.0 - q);
        }
        if tail <= delta || k > 10_000 {
            return (grid, k);
        }
        k += 2;
    }
}

fn ae_estimate<R: Rng + ?Sized>(mean: f64, eps: f64, delta: f64, rng: &mut R) -> f64 {
    let (grid, reps) = ae_plan(eps, delta);
    let draws: Vec<f64> = (0..reps)
        .map(|_| amplitude_estimation_sample(mean, grid, rng).expect("validated amplitude"))
        .collect();
    median_amplify(&draws).expect("odd repetition count")
}

/// Per-arm confidence intervals plus the classical sample statistics behind them.
///
/// Cost rows are indexed time first; the time row is known exactly and its
/// interval never changes. Reward intervals are kept inside `[0, 1]`; cost
/// intervals are stored unprojected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceState {
    pub reward_lower: Vec<f64>,
    pub reward_upper: Vec<f64>,
    /// `d × m`.
    pub cost_lower: Vec<Vec<f64>>,
    /// `d × m`.
    pub cost_upper: Vec<Vec<f64>>,
    pub pulls: Vec<u64>,
    pub reward_sum: Vec<f64>,
    /// `d × m`.
    pub cost_sum: Vec<Vec<f64>>,
    /// Query count of the most recent reward QMC call per arm.
    pub qmc_samples: Vec<u64>,
}

impl ConfidenceState {
    pub fn new(m: usize, d: usize, time_cost: f64) -> Self {
        let mut lower = vec![vec![0.0; m]; d];
        let mut upper = vec![vec![1.0; m]; d];
        lower[0] = vec![time_cost; m];
        upper[0] = vec![time_cost; m];
        ConfidenceState {
            reward_lower: vec![0.0; m],
            reward_upper: vec![1.0; m],
            cost_lower: lower,
            cost_upper: upper,
            pulls: vec![0; m],
            reward_sum: vec![0.0; m],
            cost_sum: vec![vec![0.0; m]; d],
            qmc_samples: vec![0; m],
        }
    }

    pub fn num_arms(&self) -> usize {
        self.pulls.len()
    }

    pub fn num_resources(&self) -> usize {
        self.cost_sum.len()
    }

    pub fn record_pull(&mut self, arm: usize, outcome: &Outcome) {
        self.pulls[arm] += 1;
        self.reward_sum[arm] += outcome.reward;
        for (row, c) in self.cost_sum.iter_mut().zip(&outcome.cost) {
            row[arm] += c;
        }
    }

    pub fn reward_mean(&self, arm: usize) -> f64 {
        self.reward_sum[arm] / self.pulls[arm].max(1) as f64
    }

    pub fn cost_mean(&self, arm: usize, row: usize) -> f64 {
        self.cost_sum[row][arm] / self.pulls[arm].max(1) as f64
    }

    pub fn set_reward_interval(&mut self, arm: usize, lo: f64, hi: f64) {
        self.reward_lower[arm] = lo.clamp(0.0, 1.0);
        self.reward_upper[arm] = hi.clamp(0.0, 1.0);
    }

    /// Sets a user-resource interval; row 0 (time) is ignored.
    pub fn set_cost_interval(&mut self, arm: usize, row: usize, lo: f64, hi: f64) {
        if row > 0 {
            self.cost_lower[row][arm] = lo;
            self.cost_upper[row][arm] = hi;
        }
    }

    /// Largest half-width over the user-resource intervals of `arm`.
    pub fn cost_radius(&self, arm: usize) -> f64 {
        (1..self.num_resources())
            .map(|j| 0.5 * (self.cost_upper[j][arm] - self.cost_lower[j][arm]))
            .fold(0.0, f64::max)
    }

    /// Lower cost bounds clipped to `[0, 1]`, for use as LP coefficients.
    pub fn cost_lower_clipped(&self) -> Vec<Vec<f64>> {
        clip(&self.cost_lower)
    }

    /// Upper cost bounds clipped to `[0, 1]`, for use as LP coefficients.
    pub fn cost_upper_clipped(&self) -> Vec<Vec<f64>> {
        clip(&self.cost_upper)
    }

    /// Recompute classical cost intervals for `arm` as `mean ± radius`.
    pub fn refresh_cost(&mut self, arm: usize, radius: f64) {
        for j in 1..self.num_resources() {
            let mean = self.cost_mean(arm, j);
            self.set_cost_interval(arm, j, mean - radius, mean + radius);
        }
    }
}

fn clip(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|r| r.iter().map(|v| v.clamp(0.0, 1.0)).collect())
        .collect()
}

/// Source of the reward interval in an Algorithm-1 update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RewardUpdate {
    /// A fresh QMC estimate computed from `queries` oracle calls.
    Qmc { estimate: f64, queries: u64 },
    /// The classical sample mean.
    Classical,
}

/// Refresh the bounds of `arm` after its samples were recorded.
///
/// Rewards: QMC gives `proj(r̂ ± 2 c1 ln T / n_qmc)`, classical gives
/// `proj(mean ± sqrt(3 ln T / n))`. Costs always use `mean ± sqrt(3 ln T / n)`.
pub fn update_bounds_alg1(
    state: &mut ConfidenceState,
    arm: usize,
    update: RewardUpdate,
    horizon: u64,
    c1: f64,
) -> Result<()> {
    let n = state.pulls[arm];
    if n == 0 {
        return invalid("arm has no samples");
    }
    let log_t = (horizon as f64).ln();
    match update {
        RewardUpdate::Qmc { estimate, queries } => {
            if queries == 0 {
                return invalid("QMC estimate without queries");
            }
            let rad = 2.0 * c1 * log_t / queries as f64;
            state.set_reward_interval(arm, estimate - rad, estimate + rad);
            state.qmc_samples[arm] = queries;
        }
        RewardUpdate::Classical => {
            let (lo, hi) = hoeffding_bounds(state.reward_sum[arm], n, horizon)?;
            state.set_reward_interval(arm, lo, hi);
        }
    }
    state.refresh_cost(arm, hoeffding_radius(n, horizon));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn horizon_radius_is_delta_radius() {
        let t = 4096u64;
        let delta = 2.0 * (t as f64).powi(-6);
        assert!((hoeffding_radius(37, t) - hoeffding_radius_for_delta(37, delta)).abs() < 1e-12);
    }

    #[test]
    fn hoeffding_reference() {
        let (lo, hi) = hoeffding_bounds(30.0, 100, 1000).unwrap();
        assert!((lo + 0.15521).abs() < 1e-4 && (hi - 0.75521).abs() < 1e-4);
        assert!(hoeffding_bounds(0.0, 0, 1000).is_err());
    }

    #[test]
    fn query_counts() {
        assert_eq!(qmc1_queries(0.1, 0.01, 2.0).unwrap(), 93);
        let x: f64 = 10.0 * 10f64.ln();
        let expected = (x * x.ln().sqrt()).ceil() as u64;
        assert_eq!(qmc2_queries(1, 0.1, 0.1, 1.0).unwrap(), expected);
        assert!(qmc1_queries(0.0, 0.1, 1.0).is_err());
        assert!(qmc1_queries(0.1, 1.0, 1.0).is_err());
    }

    #[test]
    fn radius_crossover() {
        // 2 c1 ln T / N <= sqrt(3 ln T / N) exactly when N >= (4 c1² / 3) ln T.
        let (c1, t) = (1.0, 4096u64);
        let threshold = 4.0 * c1 * c1 / 3.0 * (t as f64).ln();
        for n in [threshold.floor() as u64 - 1, threshold.ceil() as u64 + 1] {
            let quantum = 2.0 * c1 * (t as f64).ln() / n as f64;
            assert_eq!(quantum <= hoeffding_radius(n, t), n as f64 >= threshold);
        }
    }

    #[test]
    fn qmc2_inverse_round_trip() {
        let (d, delta) = (3, 1e-6);
        let eps = qmc2_eps_for_queries(d, 5000, delta, 1.0);
        let q = qmc2_queries(d, eps, delta, 1.0).unwrap();
        assert!((q as i64 - 5000).abs() <= 1, "q = {q}");
    }

    #[test]
    fn ae_boundary_amplitudes_are_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for a in [0.0, 1.0] {
            for _ in 0..20 {
                let v = amplitude_estimation_sample(a, 64, &mut rng).unwrap();
                assert!((v - a).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ae_law_sums_to_one() {
        let theta = 0.25f64.sqrt().asin() / std::f64::consts::PI + 0.003;
        let total: f64 = (0..64).map(|y| ae_probability(theta, y, 64)).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn median_needs_odd_length() {
        assert_eq!(median_amplify(&[3.0, 1.0, 2.0]).unwrap(), 2.0);
        assert!(median_amplify(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn ae_plan_meets_accuracy() {
        let (grid, reps) = ae_plan(0.01, 1e-3);
        assert!(ae_error_bound(0.5, grid) <= 0.01);
        assert!(ae_error_bound(0.5, grid / 2) > 0.01);
        assert_eq!(reps % 2, 1);
    }

    #[test]
    fn alg1_update_projects_rewards_only() {
        let mut s = ConfidenceState::new(1, 2, 0.5);
        let out = Outcome {
            reward: 0.9,
            cost: vec![0.5, 0.1],
        };
        s.record_pull(0, &out);
        update_bounds_alg1(&mut s, 0, RewardUpdate::Classical, 1000, 1.0).unwrap();
        assert_eq!(s.reward_upper[0], 1.0);
        assert!(s.cost_lower[1][0] < 0.0);
        assert_eq!(s.cost_lower[0][0], 0.5);
        update_bounds_alg1(
            &mut s,
            0,
            RewardUpdate::Qmc {
                estimate: 0.5,
                queries: 1000,
            },
            1000,
            1.0,
        )
        .unwrap();
        let rad = 2.0 * 1000f64.ln() / 1000.0;
        assert!((s.reward_upper[0] - 0.5 - rad).abs() < 1e-12);
        assert_eq!(s.qmc_samples[0], 1000);
    }
}
