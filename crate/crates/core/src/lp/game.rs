//! Zero-sum games: the LP feasibility game and multiplicative-weights self-play.
//!
//! Convention: the row player maximizes, the column player minimizes, and the
//! value is `min_y max_i (A y)_i`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameMatrix {
    pub rows: usize,
    pub cols: usize,
    /// Row-major entries, all in `[-1, 1]`.
    pub data: Vec<f64>,
}

impl GameMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || cols == 0 || rows.iter().any(|r| r.len() != cols) {
            return invalid("game matrix must be non-empty and rectangular");
        }
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        if let Some(v) = data.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return invalid(format!("game entry {v} outside [-1, 1]"));
        }
        Ok(GameMatrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }
}

/// Game whose value is zero iff `{x >= 0, Σx = 1, objᵀx >= alpha, A x <= rhs}` is
/// non-empty, and positive otherwise.
///
/// Columns are the `n` variables, an auxiliary column, and the homogenizing
/// column. Rows are `[1 | 1 | -1]`, `[-1 | 1 | 1]`, `[-obj | 0 | alpha]` and
/// `[A | 0 | -rhs]`.
pub fn build_game(objective: &[f64], a: &[Vec<f64>], rhs: &[f64], alpha: f64) -> Result<GameMatrix> {
    let n = objective.len();
    if a.len() != rhs.len() || a.iter().any(|r| r.len() != n) {
        return invalid("constraint matrix and rhs shapes disagree");
    }
    let mut rows = Vec::with_capacity(a.len() + 3);
    let block = |head: Vec<f64>, aux: f64, hom: f64| {
        let mut r = head;
        r.push(aux);
        r.push(hom);
        r
    };
    rows.push(block(vec![1.0; n], 1.0, -1.0));
    rows.push(block(vec![-1.0; n], 1.0, 1.0));
    rows.push(block(objective.iter().map(|c| -c).collect(), 0.0, alpha));
    for (row, b) in a.iter().zip(rhs) {
        rows.push(block(row.clone(), 0.0, -b));
    }
    GameMatrix::from_rows(&rows)
}

/// Approximate equilibrium with certified bounds `lower <= value <= upper`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameSolution {
    pub value: f64,
    pub row_strategy: Vec<f64>,
    pub col_strategy: Vec<f64>,
    /// `max_i (A ȳ)_i` for the averaged column strategy.
    pub upper: f64,
    /// `min_j (x̄ᵀ A)_j` for the averaged row strategy.
    pub lower: f64,
    pub iterations: u64,
}

fn softmax(scores: &[f64], scale: f64, out: &mut [f64]) {
    let top = scores.iter().map(|s| s * scale).fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, s) in out.iter_mut().zip(scores) {
        *o = (s * scale - top).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// Iteration cap shared by both self-play variants.
pub fn mw_iteration_cap(g: &GameMatrix, eps: f64) -> u64 {
    (16.0 * ((g.rows + g.cols) as f64).ln() / (eps * eps)).ceil() as u64
}

/// Self-play loop. `step` is the learning rate; `optimistic` adds the most recent
/// payoff once more to the cumulative score. Stops once `upper - lower <= eps`.
fn self_play(g: &GameMatrix, eps: f64, step: f64, optimistic: bool) -> Result<GameSolution> {
    if !(eps > 0.0 && eps.is_finite()) {
        return invalid("eps must be positive");
    }
    let (nr, nc) = (g.rows, g.cols);
    let cap = mw_iteration_cap(g, eps);
    let mut gain = vec![0.0; nr]; // Σ_t A y_t
    let mut loss = vec![0.0; nc]; // Σ_t x_tᵀ A
    let mut last_gain = vec![0.0; nr];
    let mut last_loss = vec![0.0; nc];
    let mut score_r = vec![0.0; nr];
    let mut score_c = vec![0.0; nc];
    let mut x = vec![0.0; nr];
    let mut y = vec![0.0; nc];
    let mut x_sum = vec![0.0; nr];
    let mut y_sum = vec![0.0; nc];
    let mut iters = 0u64;
    let (mut upper, mut lower) = (f64::INFINITY, f64::NEG_INFINITY);
    while iters < cap {
        if optimistic {
            for i in 0..nr {
                score_r[i] = gain[i] + last_gain[i];
            }
            for j in 0..nc {
                score_c[j] = loss[j] + last_loss[j];
            }
            softmax(&score_r, step, &mut x);
            softmax(&score_c, -step, &mut y);
        } else {
            softmax(&gain, step, &mut x);
            softmax(&loss, -step, &mut y);
        }
        last_loss.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..nr {
            let row = &g.data[i * nc..(i + 1) * nc];
            let mut ay = 0.0;
            for j in 0..nc {
                ay += row[j] * y[j];
                last_loss[j] += x[i] * row[j];
            }
            last_gain[i] = ay;
        }
        for i in 0..nr {
            gain[i] += last_gain[i];
            x_sum[i] += x[i];
        }
        for j in 0..nc {
            loss[j] += last_loss[j];
            y_sum[j] += y[j];
        }
        iters += 1;
        let t = iters as f64;
        upper = gain.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)) / t;
        lower = loss.iter().fold(f64::INFINITY, |a, &b| a.min(b)) / t;
        if upper - lower <= eps {
            break;
        }
    }
    let t = iters as f64;
    Ok(GameSolution {
        value: 0.5 * (upper + lower),
        row_strategy: x_sum.iter().map(|v| v / t).collect(),
        col_strategy: y_sum.iter().map(|v| v / t).collect(),
        upper,
        lower,
        iterations: iters,
    })
}

/// Multiplicative-weights self-play with learning rate `eps/2`, averaged iterates,
/// and at most `ceil(16 ln(rows + cols) / eps²)` rounds.
pub fn solve_zero_sum_mw(g: &GameMatrix, eps: f64) -> Result<GameSolution> {
    self_play(g, eps, eps / 2.0, false)
}

/// Learning rate of the optimistic variant; constant in `eps`.
pub const OPTIMISTIC_STEP: f64 = 0.25;

/// Optimistic multiplicative weights with a constant learning rate. The averaged
/// duality gap shrinks like `1/t` rather than `1/sqrt(t)`.
pub fn solve_zero_sum_optimistic(g: &GameMatrix, eps: f64) -> Result<GameSolution> {
    self_play(g, eps, OPTIMISTIC_STEP, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_matches_reference_example() {
        let g = build_game(&[0.5], &[vec![0.5]], &[0.5], 0.0).unwrap();
        assert_eq!(
            g.to_rows(),
            vec![
                vec![1.0, 1.0, -1.0],
                vec![-1.0, 1.0, 1.0],
                vec![-0.5, 0.0, 0.0],
                vec![0.5, 0.0, -0.5],
            ]
        );
    }

    #[test]
    fn rejects_out_of_range_entries() {
        assert!(build_game(&[0.5], &[vec![1.5]], &[0.5], 0.0).is_err());
        assert!(build_game(&[0.5], &[vec![0.5]], &[0.5], 1.5).is_err());
    }

    #[test]
    fn matching_pennies() {
        let g = GameMatrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
        for s in [
            solve_zero_sum_mw(&g, 0.01).unwrap(),
            solve_zero_sum_optimistic(&g, 0.01).unwrap(),
        ] {
            assert!(s.value.abs() < 0.01);
            assert!(s.lower <= 1e-12 && s.upper >= -1e-12);
        }
    }

    #[test]
    fn dominant_row() {
        let g = GameMatrix::from_rows(&[vec![0.5, 0.7], vec![0.1, 0.2]]).unwrap();
        let s = solve_zero_sum_optimistic(&g, 1e-3).unwrap();
        assert!((s.value - 0.5).abs() <= 1e-3);
    }

    #[test]
    fn zero_eps_rejected() {
        let g = GameMatrix::from_rows(&[vec![0.0]]).unwrap();
        assert!(solve_zero_sum_mw(&g, 0.0).is_err());
    }
}
