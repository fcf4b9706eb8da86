//! Two-phase revised simplex with an explicit basis inverse.
//!
//! Problems are `min c'x` over `x >= 0` with `<=`, `>=` and `=` rows. The
//! returned duals are shadow prices: the derivative of the optimal value with
//! respect to each row's right-hand side.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
pub(crate) struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Clone, Debug, Default)]
pub(crate) struct Lp {
    pub cost: Vec<f64>,
    pub rows: Vec<Row>,
}

impl Lp {
    pub fn add_var(&mut self, cost: f64) -> usize {
        self.cost.push(cost);
        self.cost.len() - 1
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> usize {
        self.rows.push(Row { coeffs, sense, rhs });
        self.rows.len() - 1
    }
}

#[derive(Clone, Debug)]
pub(crate) struct LpSolution {
    pub x: Vec<f64>,
    #[cfg_attr(not(test), allow(dead_code))]
    pub objective: f64,
    pub duals: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum LpError {
    Infeasible,
    Unbounded,
    IterationLimit,
}

impl std::fmt::Display for LpError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LpError::Infeasible => write!(f, "infeasible"),
            LpError::Unbounded => write!(f, "unbounded"),
            LpError::IterationLimit => write!(f, "iteration limit"),
        }
    }
}

const OPT_TOL: f64 = 1e-10;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 50;

struct Tableau {
    m: usize,
    // sparse columns of the standard-form matrix
    cols: Vec<Vec<(usize, f64)>>,
    b: Vec<f64>,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    barred: Vec<bool>,
    since_refactor: usize,
}

impl Tableau {
    fn binv_col(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut u = vec![0.0; m];
        for &(r, a) in &self.cols[j] {
            for (i, ui) in u.iter_mut().enumerate() {
                *ui += self.binv[i * m + r] * a;
            }
        }
        u
    }

    fn prices(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (i, &bi) in self.basis.iter().enumerate() {
            let c = cost[bi];
            if c != 0.0 {
                for (r, yr) in y.iter_mut().enumerate() {
                    *yr += c * self.binv[i * m + r];
                }
            }
        }
        y
    }

    fn reduced_cost(&self, j: usize, cost: &[f64], y: &[f64]) -> f64 {
        cost[j] - self.cols[j].iter().map(|&(r, a)| y[r] * a).sum::<f64>()
    }

    fn refactor(&mut self) -> bool {
        let m = self.m;
        // Gauss-Jordan on [B | I]
        let mut a = vec![0.0; m * m];
        for (i, &j) in self.basis.iter().enumerate() {
            for &(r, v) in &self.cols[j] {
                a[r * m + i] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let p = (c..m)
                .max_by(|&x, &y| a[x * m + c].abs().total_cmp(&a[y * m + c].abs()))
                .unwrap();
            if a[p * m + c].abs() < 1e-12 {
                return false;
            }
            if p != c {
                for k in 0..m {
                    a.swap(p * m + k, c * m + k);
                    inv.swap(p * m + k, c * m + k);
                }
            }
            let piv = a[c * m + c];
            for k in 0..m {
                a[c * m + k] /= piv;
                inv[c * m + k] /= piv;
            }
            for r in 0..m {
                if r != c {
                    let f = a[r * m + c];
                    if f != 0.0 {
                        for k in 0..m {
                            a[r * m + k] -= f * a[c * m + k];
                            inv[r * m + k] -= f * inv[c * m + k];
                        }
                    }
                }
            }
        }
        self.binv = inv;
        for i in 0..m {
            self.xb[i] = (0..m).map(|r| self.binv[i * m + r] * self.b[r]).sum();
        }
        self.since_refactor = 0;
        true
    }

    fn pivot(&mut self, row: usize, entering: usize, u: &[f64]) {
        let m = self.m;
        let piv = u[row];
        let theta = self.xb[row] / piv;
        for i in 0..m {
            if i != row {
                self.xb[i] -= theta * u[i];
            }
        }
        self.xb[row] = theta;
        for k in 0..m {
            self.binv[row * m + k] /= piv;
        }
        for i in 0..m {
            if i != row && u[i] != 0.0 {
                let f = u[i];
                for k in 0..m {
                    self.binv[i * m + k] -= f * self.binv[row * m + k];
                }
            }
        }
        self.in_basis[self.basis[row]] = false;
        self.basis[row] = entering;
        self.in_basis[entering] = true;
        self.since_refactor += 1;
        if self.since_refactor >= REFACTOR_EVERY {
            self.refactor();
        }
    }

    fn run(&mut self, cost: &[f64], limit: usize) -> Result<(), LpError> {
        let mut stalls = 0usize;
        for _ in 0..limit {
            let y = self.prices(cost);
            let bland = stalls > 30;
            let mut entering = None;
            let mut best = -OPT_TOL;
            for j in 0..self.cols.len() {
                if self.in_basis[j] || self.barred[j] {
                    continue;
                }
                let d = self.reduced_cost(j, cost, &y);
                if d < best {
                    entering = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(j) = entering else {
                return Ok(());
            };
            let u = self.binv_col(j);
            let mut leave: Option<usize> = None;
            let mut ratio = f64::INFINITY;
            for i in 0..self.m {
                if u[i] > PIVOT_TOL {
                    let r = self.xb[i].max(0.0) / u[i];
                    let better = match leave {
                        None => true,
                        Some(l) => {
                            if r < ratio - 1e-12 {
                                true
                            } else if r <= ratio + 1e-12 {
                                if bland {
                                    self.basis[i] < self.basis[l]
                                } else {
                                    u[i] > u[l]
                                }
                            } else {
                                false
                            }
                        }
                    };
                    if better {
                        leave = Some(i);
                        ratio = r;
                    }
                }
            }
            let Some(row) = leave else {
                return Err(LpError::Unbounded);
            };
            if ratio < 1e-12 {
                stalls += 1;
            } else {
                stalls = 0;
            }
            self.pivot(row, j, &u);
        }
        Err(LpError::IterationLimit)
    }
}

pub(crate) fn solve(lp: &Lp) -> Result<LpSolution, LpError> {
    let n = lp.cost.len();
    let m = lp.rows.len();
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut b = vec![0.0; m];
    let mut flipped = vec![false; m];
    let mut basis = vec![usize::MAX; m];
    let mut artificial = Vec::new();
    let mut cost2 = lp.cost.clone();

    for (r, row) in lp.rows.iter().enumerate() {
        let flip = row.rhs < 0.0;
        flipped[r] = flip;
        let s = if flip { -1.0 } else { 1.0 };
        b[r] = s * row.rhs;
        for &(j, a) in &row.coeffs {
            if a != 0.0 {
                cols[j].push((r, s * a));
            }
        }
        let sense = match (row.sense, flip) {
            (Sense::Le, true) => Sense::Ge,
            (Sense::Ge, true) => Sense::Le,
            (sense, _) => sense,
        };
        match sense {
            Sense::Le => {
                cols.push(vec![(r, 1.0)]);
                cost2.push(0.0);
                basis[r] = cols.len() - 1;
            }
            Sense::Ge => {
                cols.push(vec![(r, -1.0)]);
                cost2.push(0.0);
            }
            Sense::Eq => {}
        }
        if basis[r] == usize::MAX {
            cols.push(vec![(r, 1.0)]);
            cost2.push(0.0);
            basis[r] = cols.len() - 1;
            artificial.push(cols.len() - 1);
        }
    }
    // merge duplicate (row) entries within a column
    for col in cols.iter_mut().take(n) {
        col.sort_by_key(|e| e.0);
        col.dedup_by(|a, b| {
            if a.0 == b.0 {
                b.1 += a.1;
                true
            } else {
                false
            }
        });
    }

    let total = cols.len();
    let mut in_basis = vec![false; total];
    for &j in &basis {
        in_basis[j] = true;
    }
    let mut binv = vec![0.0; m * m];
    for i in 0..m {
        binv[i * m + i] = 1.0;
    }
    let mut tab = Tableau {
        m,
        cols,
        xb: b.clone(),
        b,
        basis,
        in_basis,
        binv,
        barred: vec![false; total],
        since_refactor: 0,
    };
    let limit = 50 * (m + total) + 10_000;

    if !artificial.is_empty() {
        let mut cost1 = vec![0.0; total];
        for &a in &artificial {
            cost1[a] = 1.0;
        }
        tab.run(&cost1, limit)?;
        tab.refactor();
        let infeas: f64 = tab
            .basis
            .iter()
            .zip(&tab.xb)
            .filter(|(j, _)| cost1[**j] > 0.0)
            .map(|(_, x)| x.max(0.0))
            .sum();
        if infeas > 1e-8 * (1.0 + tab.b.iter().map(|x| x.abs()).sum::<f64>()) {
            return Err(LpError::Infeasible);
        }
        for &a in &artificial {
            tab.barred[a] = true;
        }
        // pivot zero-level artificials out where a structural column can replace them
        for row in 0..m {
            if !artificial.contains(&tab.basis[row]) {
                continue;
            }
            let candidate = (0..total).find(|&j| {
                !tab.in_basis[j] && !tab.barred[j] && {
                    let u = tab.binv_col(j);
                    u[row].abs() > 1e-7
                }
            });
            if let Some(j) = candidate {
                let u = tab.binv_col(j);
                tab.pivot(row, j, &u);
            }
        }
    }

    tab.run(&cost2, limit)?;
    tab.refactor();

    let mut x = vec![0.0; n];
    for (i, &j) in tab.basis.iter().enumerate() {
        if j < n {
            x[j] = tab.xb[i].max(0.0);
        }
    }
    let y = tab.prices(&cost2);
    let duals = y
        .iter()
        .zip(&flipped)
        .map(|(&d, &f)| if f { -d } else { d })
        .collect();
    let objective = x.iter().zip(&lp.cost).map(|(a, c)| a * c).sum();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(LpError::IterationLimit);
    }
    Ok(LpSolution {
        x,
        objective,
        duals,
    })
}
