//! Tables of extremal probabilities, ratio tables, feature-drop sweeps and
//! rounding summaries. Floats are written with 6 decimals; undefined values as NaN.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{Map, Value};

use crate::adversary::drop_features;
use crate::error::{Error, Result};
use crate::model::Instance;
use crate::objectives::{gini, EqualityObjective, ObjectiveKind, TieBreak};
use crate::panels::{PanelDistribution, ProbabilityAssignment};
use crate::rounding::{lottery_marginals, pipage_round, rounding_bounds};
use crate::solver::{approximation_ratios, solve, SolveConfig, SolveResult};

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Str(String),
    Int(i64),
    Float(f64),
    Bool(bool),
}

impl Cell {
    fn text(&self) -> String {
        match self {
            Cell::Str(s) => s.clone(),
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => fmt6(*x),
            Cell::Bool(b) => b.to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Str(s) => Value::String(s.clone()),
            Cell::Int(i) => Value::from(*i),
            Cell::Float(x) if x.is_finite() => {
                // same digits as the CSV
                Value::from(fmt6(*x).parse::<f64>().unwrap_or(*x))
            }
            Cell::Float(_) => Value::Null,
            Cell::Bool(b) => Value::Bool(*b),
        }
    }
}

pub fn fmt6(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        let s = format!("{x:.6}");
        if s == "-0.000000" {
            "0.000000".into()
        } else {
            s
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::text))?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Malformed(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Malformed(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let mut m = Map::new();
                for (h, c) in self.header.iter().zip(row) {
                    m.insert(h.clone(), c.json());
                }
                Value::Object(m)
            })
            .collect();
        Ok(serde_json::to_string_pretty(&rows)? + "\n")
    }
}

fn s(x: impl Into<String>) -> Cell {
    Cell::Str(x.into())
}

fn f(x: f64) -> Cell {
    Cell::Float(x)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub label: String,
    pub objective: String,
    pub n: usize,
    pub k: u32,
    pub vectors: usize,
    pub n_min: usize,
    pub min: f64,
    pub max: f64,
    pub gini: f64,
    pub value: f64,
    pub converged: bool,
    pub wall_ms: f64,
}

impl RunRecord {
    pub fn new(label: &str, inst: &Instance, r: &SolveResult, wall_ms: f64) -> Result<Self> {
        check(inst, &r.pi)?;
        let st = inst.stats();
        Ok(Self {
            label: label.into(),
            objective: r.objective.to_string(),
            n: inst.n(),
            k: inst.k(),
            vectors: st.num_vectors(),
            n_min: st.n_min,
            min: r.pi.min(),
            max: r.pi.max(),
            gini: gini(r.pi.values())?,
            value: r.objective_value,
            converged: r.converged,
            wall_ms,
        })
    }

    pub const HEADER: [&'static str; 11] = [
        "instance", "objective", "n", "k", "vectors", "n_min", "min", "max", "gini", "value", "converged",
    ];

    /// Row without the wall time, which goes to a separate timing file.
    pub fn cells(&self) -> Vec<Cell> {
        vec![
            s(&self.label),
            s(&self.objective),
            Cell::Int(self.n as i64),
            Cell::Int(self.k as i64),
            Cell::Int(self.vectors as i64),
            Cell::Int(self.n_min as i64),
            f(self.min),
            f(self.max),
            f(self.gini),
            f(self.value),
            Cell::Bool(self.converged),
        ]
    }
}

const SUM_TOL: f64 = 1e-6;

/// Re-checks a result before it is written: probabilities sum to `k`, and
/// agents sharing a vector share a probability.
pub fn check(inst: &Instance, pi: &ProbabilityAssignment) -> Result<()> {
    if (pi.sum() - inst.k() as f64).abs() > SUM_TOL {
        return Err(Error::InvalidDistribution(format!(
            "probabilities sum to {} instead of {}",
            pi.sum(),
            inst.k()
        )));
    }
    if pi.anonymity_gap(inst) > 0.01 + SUM_TOL {
        return Err(Error::InvalidDistribution(format!(
            "anonymity gap {}",
            pi.anonymity_gap(inst)
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct RatioRow {
    pub objective: String,
    pub min: f64,
    pub max: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
}

fn is_plain(obj: &EqualityObjective, kind: ObjectiveKind) -> bool {
    obj.kind == kind && obj.tie_break == TieBreak::None
}

/// Approximation pair of each algorithm against the maximin minimum and the
/// minimax maximum.
pub fn table_maxes_mins(
    inst: &Instance,
    algorithms: &[EqualityObjective],
    cfg: &SolveConfig,
) -> Result<Vec<RatioRow>> {
    let lo = solve(inst, &cfg.with_objective(EqualityObjective::maximin()))?;
    let hi = solve(inst, &cfg.with_objective(EqualityObjective::minimax()))?;
    let results: Vec<Result<SolveResult>> = algorithms
        .par_iter()
        .map(|obj| {
            if is_plain(obj, ObjectiveKind::Maximin) {
                Ok(lo.clone())
            } else if is_plain(obj, ObjectiveKind::Minimax) {
                Ok(hi.clone())
            } else {
                solve(inst, &cfg.with_objective(*obj))
            }
        })
        .collect();
    let (min_opt, max_opt) = (lo.pi.min(), hi.pi.max());
    results
        .into_iter()
        .map(|r| {
            let r = r?;
            check(inst, &r.pi)?;
            let (ratio_min, ratio_max) = approximation_ratios(&r.pi, min_opt, max_opt);
            Ok(RatioRow {
                objective: r.objective.to_string(),
                min: r.pi.min(),
                max: r.pi.max(),
                ratio_min,
                ratio_max,
            })
        })
        .collect()
}

pub fn ratio_table(rows: &[RatioRow]) -> Table {
    let mut t = Table::new(&["objective", "min", "max", "ratio_min", "ratio_max"]);
    for r in rows {
        t.push(vec![s(&r.objective), f(r.min), f(r.max), f(r.ratio_min), f(r.ratio_max)]);
    }
    t
}

#[derive(Clone, Debug, PartialEq)]
pub struct DropRow {
    pub drops: usize,
    pub objective: String,
    pub min: f64,
    pub max: f64,
    pub min_opt: f64,
    pub max_opt: f64,
}

/// For each number of dropped features, the extremes of every objective and of
/// the two baselines.
pub fn feature_drop_sweep(
    inst: &Instance,
    objectives: &[EqualityObjective],
    max_drop: usize,
    cfg: &SolveConfig,
) -> Result<Vec<DropRow>> {
    if max_drop > inst.scheme().num_features() {
        return Err(Error::Domain(format!(
            "max-drop {max_drop} exceeds {} features",
            inst.scheme().num_features()
        )));
    }
    let levels: Vec<Instance> = (0..=max_drop)
        .map(|d| drop_features(inst, d))
        .collect::<Result<_>>()?;
    let mut cells: Vec<(usize, EqualityObjective)> = Vec::new();
    for d in 0..=max_drop {
        cells.push((d, EqualityObjective::maximin()));
        cells.push((d, EqualityObjective::minimax()));
        for o in objectives {
            cells.push((d, *o));
        }
    }
    let solved: Vec<Result<SolveResult>> = cells
        .par_iter()
        .map(|(d, o)| solve(&levels[*d], &cfg.with_objective(*o)))
        .collect();
    let per_level = objectives.len() + 2;
    let mut rows = Vec::new();
    let mut solved = solved.into_iter();
    for (d, level) in levels.iter().enumerate() {
        let chunk: Vec<SolveResult> = solved.by_ref().take(per_level).collect::<Result<_>>()?;
        for r in &chunk {
            check(level, &r.pi)?;
        }
        let (min_opt, max_opt) = (chunk[0].pi.min(), chunk[1].pi.max());
        for r in &chunk[2..] {
            rows.push(DropRow {
                drops: d,
                objective: r.objective.to_string(),
                min: r.pi.min(),
                max: r.pi.max(),
                min_opt,
                max_opt,
            });
        }
    }
    Ok(rows)
}

pub fn drop_table(rows: &[DropRow]) -> Table {
    let mut t = Table::new(&["drops", "objective", "min", "max", "min_opt", "max_opt"]);
    for r in rows {
        t.push(vec![
            Cell::Int(r.drops as i64),
            s(&r.objective),
            f(r.min),
            f(r.max),
            f(r.min_opt),
            f(r.max_opt),
        ]);
    }
    t
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundingSummary {
    pub m: usize,
    pub runs: usize,
    pub target_min: f64,
    pub target_max: f64,
    pub mean_min: f64,
    pub std_min: f64,
    pub mean_max: f64,
    pub std_max: f64,
    /// Largest `|rounded - target|` over all agents and runs.
    pub max_deviation: f64,
    pub b1: f64,
    pub b2: f64,
    /// Per-agent mean and sample standard deviation of the rounded probability.
    pub mean_pi: Vec<f64>,
    pub std_pi: Vec<f64>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Repeated pipage roundings of `dist`; run `r` uses the `r`-th draw of a
/// generator seeded with `seed`.
pub fn rounding_report(
    inst: &Instance,
    dist: &PanelDistribution,
    m: usize,
    runs: usize,
    seed: u64,
) -> Result<RoundingSummary> {
    if runs < 1 {
        return Err(Error::Domain("runs must be at least 1".into()));
    }
    let target = crate::panels::marginals(inst, dist)?;
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<u64> = (0..runs).map(|_| master.next_u64()).collect();
    let rounded: Vec<Vec<f64>> = seeds
        .par_iter()
        .map(|&sd| {
            let l = pipage_round(dist, m, sd)?;
            Ok(lottery_marginals(inst, &l).0)
        })
        .collect::<Result<_>>()?;
    let mins: Vec<f64> = rounded
        .iter()
        .map(|p| p.iter().cloned().fold(f64::INFINITY, f64::min))
        .collect();
    let maxs: Vec<f64> = rounded.iter().map(|p| p.iter().cloned().fold(0.0, f64::max)).collect();
    let max_deviation = rounded
        .iter()
        .flat_map(|p| p.iter().zip(target.values()).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max);
    let mut mean_pi = Vec::with_capacity(inst.n());
    let mut std_pi = Vec::with_capacity(inst.n());
    for i in 0..inst.n() {
        let col: Vec<f64> = rounded.iter().map(|p| p[i]).collect();
        let (mu, sd) = mean_std(&col);
        mean_pi.push(mu);
        std_pi.push(sd);
    }
    let (mean_min, std_min) = mean_std(&mins);
    let (mean_max, std_max) = mean_std(&maxs);
    let (b1, b2) = match rounding_bounds(inst.k(), inst.groups().len(), m) {
        Ok(b) => b,
        Err(_) => (inst.k() as f64 / m as f64, f64::NAN),
    };
    Ok(RoundingSummary {
        m,
        runs,
        target_min: target.min(),
        target_max: target.max(),
        mean_min,
        std_min,
        mean_max,
        std_max,
        max_deviation,
        b1,
        b2,
        mean_pi,
        std_pi,
    })
}

pub fn rounding_table(r: &RoundingSummary) -> Table {
    let mut t = Table::new(&[
        "m", "runs", "target_min", "target_max", "mean_min", "std_min", "mean_max", "std_max",
        "max_deviation", "b1", "b2",
    ]);
    t.push(vec![
        Cell::Int(r.m as i64),
        Cell::Int(r.runs as i64),
        f(r.target_min),
        f(r.target_max),
        f(r.mean_min),
        f(r.std_min),
        f(r.mean_max),
        f(r.std_max),
        f(r.max_deviation),
        f(r.b1),
        f(r.b2),
    ]);
    t
}
