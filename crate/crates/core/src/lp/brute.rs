//! Vertex enumeration oracle for small LPs.

use nalgebra::{DMatrix, DVector};

use super::{LpProblem, LpSolution, LpStatus, LP_TOL};
use crate::error::{BwkError, Result};

/// Largest `vars + rows` accepted; the enumeration is combinatorial.
pub const BRUTE_FORCE_LIMIT: usize = 12;

/// Enumerate all basic solutions (every choice of `n` tight constraints among the
/// rows and sign bounds), keep the feasible ones and return the best.
///
/// Unboundedness is not detected: an unbounded LP reports its best vertex.
pub fn brute_force_vertices(lp: &LpProblem) -> Result<LpSolution> {
    lp.validate()?;
    let n_all = lp.num_vars();
    let free: Vec<usize> = (0..n_all).filter(|k| !lp.pins.contains(k)).collect();
    let n = free.len();
    let n_rows = lp.a.len() + lp.geq_a.len();
    if n + n_rows > BRUTE_FORCE_LIMIT {
        return Err(BwkError::InvalidArgument(format!(
            "brute force limited to vars + rows <= {BRUTE_FORCE_LIMIT}, got {}",
            n + n_rows
        )));
    }

    // All constraints as g·x <= h over the free variables, sign bounds last.
    let mut cons: Vec<(Vec<f64>, f64)> = Vec::new();
    for (row, b) in lp.a.iter().zip(&lp.rhs) {
        cons.push((free.iter().map(|&k| row[k]).collect(), *b));
    }
    for (row, b) in lp.geq_a.iter().zip(&lp.geq_rhs) {
        cons.push((free.iter().map(|&k| -row[k]).collect(), -*b));
    }
    for j in 0..n {
        let mut g = vec![0.0; n];
        g[j] = -1.0;
        cons.push((g, 0.0));
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    let total = cons.len();
    for mask in 0u32..(1u32 << total) {
        if mask.count_ones() as usize != n {
            continue;
        }
        let chosen: Vec<usize> = (0..total).filter(|i| mask & (1 << i) != 0).collect();
        let x = if n == 0 {
            vec![]
        } else {
            let g = DMatrix::from_fn(n, n, |r, c| cons[chosen[r]].0[c]);
            let h = DVector::from_iterator(n, chosen.iter().map(|&i| cons[i].1));
            match g.lu().solve(&h) {
                Some(v) if v.iter().all(|x| x.is_finite()) => v.iter().copied().collect(),
                _ => continue,
            }
        };
        let feasible = cons.iter().all(|(g, h)| {
            let lhs: f64 = g.iter().zip(&x).map(|(a, v)| a * v).sum();
            lhs <= h + LP_TOL * (1.0 + h.abs())
        });
        if !feasible {
            continue;
        }
        let mut full = vec![0.0; n_all];
        for (j, &k) in free.iter().enumerate() {
            full[k] = x[j].max(0.0);
        }
        let value = lp.objective_value(&full);
        if best.as_ref().is_none_or(|(v, _)| value > *v) {
            best = Some((value, full));
        }
    }
    Ok(match best {
        None => LpSolution::with_status(LpStatus::Infeasible),
        Some((value, x)) => LpSolution {
            status: LpStatus::Optimal,
            value,
            feasibility_violation: lp.violation(&x),
            x,
            dual: vec![],
            dual_geq: vec![],
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_vertices() {
        let lp = LpProblem {
            objective: vec![0.9, 0.5],
            a: vec![vec![0.5, 0.5], vec![1.0, 0.2]],
            rhs: vec![50.0, 50.0],
            ..Default::default()
        };
        let s = brute_force_vertices(&lp).unwrap();
        assert!((s.value - 65.0).abs() < 1e-9);
        assert!((s.x[0] - 37.5).abs() < 1e-9);
    }

    #[test]
    fn size_guard() {
        let lp = LpProblem {
            objective: vec![1.0; 7],
            a: vec![vec![1.0; 7]; 6],
            rhs: vec![1.0; 6],
            ..Default::default()
        };
        assert!(brute_force_vertices(&lp).is_err());
    }
}
