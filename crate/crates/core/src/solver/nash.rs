//! Maximum Nash welfare over a fixed column set.
//!
//! Maximizes `sum_u m_u ln p_u` with `p = A q`, `q` on the simplex, by a
//! log-barrier method on the dual
//!
//! ```text
//! min  -sum_u m_u ln lambda_u   s.t.  lambda . a_j <= M  for every column j
//! ```
//!
//! with `M = sum_u m_u`. At the optimum `lambda_u = m_u / p_u`, which is also
//! the pricing vector for new columns.

use super::lp::{self, Lp, Sense};
use super::master::Column;

pub(crate) struct NashSolution {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

const GAP_TOL: f64 = 1e-13;

fn cholesky_solve(h: &mut [f64], n: usize, rhs: &mut [f64]) -> bool {
    for j in 0..n {
        let mut d = h[j * n + j];
        for k in 0..j {
            d -= h[j * n + k] * h[j * n + k];
        }
        if d <= 0.0 || !d.is_finite() {
            return false;
        }
        let d = d.sqrt();
        h[j * n + j] = d;
        for i in j + 1..n {
            let mut s = h[i * n + j];
            for k in 0..j {
                s -= h[i * n + k] * h[j * n + k];
            }
            h[i * n + j] = s / d;
        }
    }
    for i in 0..n {
        let mut s = rhs[i];
        for k in 0..i {
            s -= h[i * n + k] * rhs[k];
        }
        rhs[i] = s / h[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = rhs[i];
        for k in i + 1..n {
            s -= h[k * n + i] * rhs[k];
        }
        rhs[i] = s / h[i * n + i];
    }
    true
}

/// `None` when some unit is covered by no column (the welfare is then unbounded below).
pub(crate) fn solve(mult: &[f64], columns: &[Column]) -> Option<NashSolution> {
    let units = mult.len();
    let mut covered = vec![false; units];
    for col in columns {
        for &(u, a) in &col.0 {
            if a > 0.0 {
                covered[u] = true;
            }
        }
    }
    if columns.is_empty() || covered.iter().any(|c| !c) {
        return None;
    }
    let big_m: f64 = mult.iter().sum();
    let nj = columns.len() as f64;
    let widest = columns
        .iter()
        .map(|c| c.0.iter().map(|e| e.1).sum::<f64>())
        .fold(0.0, f64::max);
    let mut lambda = vec![0.5 * big_m / widest; units];
    let slack = |lambda: &[f64]| -> Vec<f64> {
        columns
            .iter()
            .map(|c| big_m - c.0.iter().map(|&(u, a)| lambda[u] * a).sum::<f64>())
            .collect()
    };
    let barrier = |lambda: &[f64], mu: f64| -> f64 {
        let s = slack(lambda);
        if lambda.iter().any(|&l| l <= 0.0) || s.iter().any(|&x| x <= 0.0) {
            return f64::INFINITY;
        }
        -mult.iter().zip(lambda).map(|(m, l)| m * l.ln()).sum::<f64>()
            - mu * s.iter().map(|x| x.ln()).sum::<f64>()
    };

    let mut mu = 0.1 * big_m / nj;
    loop {
        for _ in 0..200 {
            let s = slack(&lambda);
            let mut g: Vec<f64> = (0..units).map(|u| -mult[u] / lambda[u]).collect();
            let mut h = vec![0.0; units * units];
            for u in 0..units {
                h[u * units + u] = mult[u] / (lambda[u] * lambda[u]);
            }
            for (col, &sj) in columns.iter().zip(&s) {
                let w = mu / sj;
                let c = mu / (sj * sj);
                for &(u, a) in &col.0 {
                    g[u] += w * a;
                    for &(v, b) in &col.0 {
                        h[u * units + v] += c * a * b;
                    }
                }
            }
            let mut step: Vec<f64> = g.iter().map(|x| -x).collect();
            if !cholesky_solve(&mut h, units, &mut step) {
                break;
            }
            let decrement: f64 = -g.iter().zip(&step).map(|(a, b)| a * b).sum::<f64>();
            if decrement < 1e-14 * big_m {
                break;
            }
            // fraction to the boundary
            let mut alpha: f64 = 1.0;
            for u in 0..units {
                if step[u] < 0.0 {
                    alpha = alpha.min(-0.99 * lambda[u] / step[u]);
                }
            }
            for (col, &sj) in columns.iter().zip(&s) {
                let ds: f64 = -col.0.iter().map(|&(u, a)| step[u] * a).sum::<f64>();
                if ds < 0.0 {
                    alpha = alpha.min(-0.99 * sj / ds);
                }
            }
            let f0 = barrier(&lambda, mu);
            let mut moved = false;
            for _ in 0..60 {
                let trial: Vec<f64> = lambda.iter().zip(&step).map(|(l, d)| l + alpha * d).collect();
                if barrier(&trial, mu) <= f0 - 0.25 * alpha * decrement {
                    lambda = trial;
                    moved = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !moved {
                break;
            }
        }
        if nj * mu <= GAP_TOL * big_m {
            break;
        }
        mu *= 0.2;
    }

    // Stationarity gives p_u = m_u / lambda_u. The barrier multipliers lose
    // precision as slacks shrink, so weights are recovered by an L1 fit instead.
    let target: Vec<f64> = mult.iter().zip(&lambda).map(|(m, l)| m / l).collect();
    let q = fit_weights(columns, &target)?;
    let p = super::master::unit_probs(units, columns, &q);
    Some(NashSolution { q, p })
}

// min sum |A q - target| over the simplex
fn fit_weights(columns: &[Column], target: &[f64]) -> Option<Vec<f64>> {
    let mut lp = Lp::default();
    let nq = columns.len();
    for _ in 0..nq {
        lp.add_var(0.0);
    }
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); target.len()];
    for (j, col) in columns.iter().enumerate() {
        for &(u, a) in &col.0 {
            rows[u].push((j, a));
        }
    }
    for (u, mut row) in rows.into_iter().enumerate() {
        let over = lp.add_var(1.0);
        let under = lp.add_var(1.0);
        row.push((over, -1.0));
        row.push((under, 1.0));
        lp.add_row(row, Sense::Eq, target[u]);
    }
    lp.add_row((0..nq).map(|j| (j, 1.0)).collect(), Sense::Eq, 1.0);
    let sol = lp::solve(&lp).ok()?;
    let q: Vec<f64> = sol.x[..nq].to_vec();
    let total: f64 = q.iter().sum();
    Some(q.into_iter().map(|x| x / total).collect())
}
