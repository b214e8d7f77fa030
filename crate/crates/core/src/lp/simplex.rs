//! Two-phase dense tableau simplex with Bland's rule.

use super::{LpProblem, LpSolution, LpStatus, LP_TOL};
use crate::error::{BwkError, Result};

const ENTER_TOL: f64 = 1e-11;
const PIVOT_TOL: f64 = 1e-10;
const MAX_PIVOTS: usize = 100_000;

struct Tableau {
    cols: usize,
    data: Vec<f64>,
    basis: Vec<usize>,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn width(&self) -> usize {
        self.cols + 1
    }

    fn row(&self, r: usize) -> &[f64] {
        let w = self.width();
        &self.data[r * w..(r + 1) * w]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.row(r)[self.cols]
    }

    fn pivot(&mut self, obj: &mut [f64], r: usize, c: usize) {
        let w = self.width();
        let rows = self.basis.len();
        let p = self.data[r * w + c];
        for v in &mut self.data[r * w..(r + 1) * w] {
            *v /= p;
        }
        let pivot_row: Vec<f64> = self.row(r).to_vec();
        for i in (0..rows).filter(|&i| i != r) {
            let f = self.data[i * w + c];
            if f != 0.0 {
                for (v, pr) in self.data[i * w..(i + 1) * w].iter_mut().zip(&pivot_row) {
                    *v -= f * pr;
                }
            }
        }
        let f = obj[c];
        if f != 0.0 {
            for (v, pr) in obj.iter_mut().zip(&pivot_row) {
                *v -= f * pr;
            }
        }
        self.basis[r] = c;
    }

    /// Maximize with reduced costs in `obj` (last entry holds minus the objective).
    fn run(&mut self, obj: &mut [f64], allowed: &dyn Fn(usize) -> bool) -> Result<Outcome> {
        for _ in 0..MAX_PIVOTS {
            let Some(c) = (0..self.cols).find(|&j| allowed(j) && obj[j] > ENTER_TOL) else {
                return Ok(Outcome::Optimal);
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.basis.len() {
                let a = self.row(r)[c];
                if a <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.rhs(r) / a;
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((best, br)) => {
                        let tie = (ratio - br).abs() <= 1e-12 * (1.0 + br.abs());
                        if (!tie && ratio < br) || (tie && self.basis[r] < self.basis[best]) {
                            Some((r, ratio))
                        } else {
                            Some((best, br))
                        }
                    }
                };
            }
            let Some((r, _)) = leave else {
                return Ok(Outcome::Unbounded);
            };
            self.pivot(obj, r, c);
        }
        Err(BwkError::Lp("simplex pivot limit reached".into()))
    }
}

/// Solve exactly. Pinned variables are deleted before solving and reported as zero.
pub fn solve_exact(lp: &LpProblem) -> Result<LpSolution> {
    lp.validate()?;
    let n_all = lp.num_vars();
    let free: Vec<usize> = (0..n_all).filter(|k| !lp.pins.contains(k)).collect();
    let n = free.len();
    let n_le = lp.a.len();

    // Every row in <= form over the free variables.
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n_le + lp.geq_a.len());
    for (row, b) in lp.a.iter().zip(&lp.rhs) {
        rows.push((free.iter().map(|&k| row[k]).collect(), *b));
    }
    for (row, b) in lp.geq_a.iter().zip(&lp.geq_rhs) {
        rows.push((free.iter().map(|&k| -row[k]).collect(), -*b));
    }
    let k = rows.len();
    let negated: Vec<bool> = rows.iter().map(|(_, b)| *b < 0.0).collect();
    let n_art = negated.iter().filter(|&&s| s).count();
    let cols = n + k + n_art;
    let w = cols + 1;

    let mut t = Tableau {
        cols,
        data: vec![0.0; k * w],
        basis: vec![0; k],
    };
    let mut next_art = n + k;
    for (r, (row, b)) in rows.iter().enumerate() {
        let s = if negated[r] { -1.0 } else { 1.0 };
        for (j, a) in row.iter().enumerate() {
            t.data[r * w + j] = s * a;
        }
        t.data[r * w + n + r] = s;
        t.data[r * w + cols] = s * b;
        if negated[r] {
            t.data[r * w + next_art] = 1.0;
            t.basis[r] = next_art;
            next_art += 1;
        } else {
            t.basis[r] = n + r;
        }
    }
    let is_art = |j: usize| j >= n + k;

    if n_art > 0 {
        let mut obj = vec![0.0; w];
        for r in 0..k {
            if is_art(t.basis[r]) {
                for (o, v) in obj.iter_mut().zip(t.row(r)) {
                    *o += v;
                }
            }
        }
        for j in n + k..cols {
            obj[j] = 0.0;
        }
        t.run(&mut obj, &|_| true)?;
        let scale = 1.0 + rows.iter().map(|(_, b)| b.abs()).fold(0.0, f64::max);
        if obj[cols] > LP_TOL * scale {
            return Ok(LpSolution::with_status(LpStatus::Infeasible));
        }
        // Drive remaining (zero-level) artificials out of the basis.
        for r in 0..k {
            if is_art(t.basis[r]) {
                let row = t.row(r);
                if let Some(c) = (0..n + k).find(|&j| row[j].abs() > PIVOT_TOL) {
                    let mut dummy = vec![0.0; w];
                    t.pivot(&mut dummy, r, c);
                }
            }
        }
    }

    let cost = |j: usize| if j < n { lp.objective[free[j]] } else { 0.0 };
    let mut obj = vec![0.0; w];
    for (j, o) in obj.iter_mut().enumerate().take(n) {
        *o = cost(j);
    }
    for r in 0..k {
        let cb = cost(t.basis[r]);
        if cb != 0.0 {
            let row = t.row(r).to_vec();
            for (o, v) in obj.iter_mut().zip(&row) {
                *o -= cb * v;
            }
        }
    }
    if let Outcome::Unbounded = t.run(&mut obj, &|j| !is_art(j))? {
        return Ok(LpSolution::with_status(LpStatus::Unbounded));
    }

    let mut x = vec![0.0; n_all];
    for r in 0..k {
        let j = t.basis[r];
        if j < n {
            x[free[j]] = t.rhs(r).max(0.0);
        }
    }
    let dual_all: Vec<f64> = (0..k).map(|r| (-obj[n + r]).max(0.0)).collect();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        value: lp.objective_value(&x),
        feasibility_violation: lp.violation(&x),
        dual: dual_all[..n_le].to_vec(),
        dual_geq: dual_all[n_le..].to_vec(),
        x,
    })
}
