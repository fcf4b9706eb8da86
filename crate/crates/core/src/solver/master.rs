//! Restricted master problems over a fixed set of columns.
//!
//! A column is a panel (or composition) described by its coverage `a_u` of each
//! unit; unit probabilities are `p_u = sum_j a_uj q_j` with `q` on the simplex.
//! The linear masters minimize `alpha x - beta t` with `p_u <= x` / `p_u >= t`
//! (or fixed bounds) per unit.

use super::lp::{self, Lp, LpError, Sense};

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Column(pub Vec<(usize, f64)>);

impl Column {
    pub fn score(&self, eta: &[f64]) -> f64 {
        self.0.iter().map(|&(u, a)| eta[u] * a).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Bound {
    Free,
    Var,
    Fixed(f64),
}

#[derive(Clone, Debug)]
pub(crate) struct MasterSpec {
    pub lower: Vec<Bound>,
    pub upper: Vec<Bound>,
    pub alpha: f64,
    pub beta: f64,
}

impl MasterSpec {
    pub fn maximin(units: usize) -> Self {
        Self {
            lower: vec![Bound::Var; units],
            upper: vec![Bound::Free; units],
            alpha: 0.0,
            beta: 1.0,
        }
    }

    pub fn minimax(units: usize) -> Self {
        Self {
            lower: vec![Bound::Free; units],
            upper: vec![Bound::Var; units],
            alpha: 1.0,
            beta: 0.0,
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct MasterSolution {
    pub q: Vec<f64>,
    pub x: f64,
    pub t: f64,
    /// Pricing weights: lower-bound multiplier minus upper-bound multiplier.
    pub eta: Vec<f64>,
    pub lower_dual: Vec<f64>,
    /// Total violation of fixed bounds; positive means the column set cannot meet them.
    pub elastic: f64,
}

// Fixed bounds are elastic so a thin column set never makes the master infeasible.
const ELASTIC_PENALTY: f64 = 1e3;

pub(crate) fn solve(units: usize, columns: &[Column], spec: &MasterSpec) -> Result<MasterSolution, LpError> {
    let mut lp = Lp::default();
    let nq = columns.len();
    for _ in 0..nq {
        lp.add_var(0.0);
    }
    let x = spec
        .upper
        .contains(&Bound::Var)
        .then(|| lp.add_var(spec.alpha));
    let t = spec
        .lower
        .contains(&Bound::Var)
        .then(|| lp.add_var(-spec.beta));

    let mut cover: Vec<Vec<(usize, f64)>> = vec![Vec::new(); units];
    for (j, col) in columns.iter().enumerate() {
        for &(u, a) in &col.0 {
            cover[u].push((j, a));
        }
    }

    let mut upper_rows = vec![None; units];
    let mut lower_rows = vec![None; units];
    let mut slacks = Vec::new();
    for u in 0..units {
        match spec.upper[u] {
            Bound::Free => {}
            Bound::Var => {
                let mut c = cover[u].clone();
                c.push((x.unwrap(), -1.0));
                upper_rows[u] = Some((lp.add_row(c, Sense::Le, 0.0), false));
            }
            Bound::Fixed(cap) => {
                let s = lp.add_var(ELASTIC_PENALTY);
                slacks.push(s);
                let mut c = cover[u].clone();
                c.push((s, -1.0));
                upper_rows[u] = Some((lp.add_row(c, Sense::Le, cap), false));
            }
        }
        match spec.lower[u] {
            Bound::Free => {}
            Bound::Var => {
                let mut c: Vec<(usize, f64)> = cover[u].iter().map(|&(j, a)| (j, -a)).collect();
                c.push((t.unwrap(), 1.0));
                lower_rows[u] = Some((lp.add_row(c, Sense::Le, 0.0), false));
            }
            Bound::Fixed(floor) => {
                let s = lp.add_var(ELASTIC_PENALTY);
                slacks.push(s);
                let mut c = cover[u].clone();
                c.push((s, 1.0));
                lower_rows[u] = Some((lp.add_row(c, Sense::Ge, floor), true));
            }
        }
    }
    lp.add_row((0..nq).map(|j| (j, 1.0)).collect(), Sense::Eq, 1.0);

    let sol = lp::solve(&lp)?;
    let multiplier = |row: Option<(usize, bool)>| match row {
        None => 0.0,
        Some((r, ge)) => {
            let d = sol.duals[r];
            (if ge { d } else { -d }).max(0.0)
        }
    };
    let lower_dual: Vec<f64> = lower_rows.iter().map(|&r| multiplier(r)).collect();
    let eta = (0..units)
        .map(|u| lower_dual[u] - multiplier(upper_rows[u]))
        .collect();
    let xv = x.map_or(0.0, |i| sol.x[i]);
    let tv = t.map_or(0.0, |i| sol.x[i]);
    Ok(MasterSolution {
        q: sol.x[..nq].to_vec(),
        x: xv,
        t: tv,
        eta,
        lower_dual,
        elastic: slacks.iter().map(|&s| sol.x[s]).sum(),
    })
}

pub(crate) fn unit_probs(units: usize, columns: &[Column], q: &[f64]) -> Vec<f64> {
    let mut p = vec![0.0; units];
    for (col, &w) in columns.iter().zip(q) {
        for &(u, a) in &col.0 {
            p[u] += a * w;
        }
    }
    p
}
