//! Fixture runs plus a compact set of closed-form checks.

use std::path::Path;
use std::time::Instant;

use sortition_core::adversary::{
    fairness, make_lb_instance, manip_metric_exhaustive, LbKind, Metric,
    DEFAULT_BUDGET,
};
use sortition_core::fixtures;
use sortition_core::model::Instance;
use sortition_core::objectives::EqualityObjective;
use sortition_core::report::{rounding_report, table_maxes_mins, Cell, RunRecord, Table};
use sortition_core::solver::{solve, Backend, SolveConfig, SolveResult};

use crate::{write_table, Format};

const OBJECTIVES: [&str; 5] = ["maximin", "minimax", "nash", "leximin", "goldilocks:1"];

struct Checks(Table);

impl Checks {
    fn new() -> Self {
        Self(Table::new(&["check", "observed", "expected", "tolerance", "pass"]))
    }

    fn near(&mut self, name: &str, observed: f64, expected: f64, tol: f64) {
        let pass = (observed - expected).abs() <= tol;
        self.row(name, observed, expected, tol, pass);
    }

    fn row(&mut self, name: &str, observed: f64, expected: f64, tol: f64, pass: bool) {
        self.0.push(vec![
            Cell::Str(name.into()),
            Cell::Float(observed),
            Cell::Float(expected),
            Cell::Float(tol),
            Cell::Bool(pass),
        ]);
    }

    fn passed(&self) -> usize {
        self.0.rows.iter().filter(|r| r[4] == Cell::Bool(true)).count()
    }
}

fn objective(spec: &str) -> EqualityObjective {
    spec.parse().expect("built-in objective")
}

fn p(inst: &Instance, r: &SolveResult, w: &str) -> f64 {
    r.pi.prob_of_vector(inst, w).unwrap_or(f64::NAN)
}

pub fn run(out: &Path, format: Format, seed: u64) -> anyhow::Result<()> {
    let mut base = SolveConfig::new(Backend::Colgen, EqualityObjective::maximin());
    base.seed = seed;
    let (b_truth, b_rep) = fixtures::instance_b();
    let named: Vec<(&str, Instance)> = vec![
        ("t1", fixtures::t1()),
        ("e1", fixtures::e1()),
        ("e2", fixtures::e2()),
        ("b_truthful", b_truth.clone()),
        ("b_reported", b_rep.clone()),
    ];

    let mut runs = Table::new(&RunRecord::HEADER);
    let mut timings = Table::new(&["instance", "objective", "wall_ms"]);
    let mut solved: Vec<(String, String, SolveResult)> = Vec::new();
    for (label, inst) in &named {
        for spec in OBJECTIVES {
            let t0 = Instant::now();
            let r = solve(inst, &base.with_objective(objective(spec)))?;
            let ms = t0.elapsed().as_secs_f64() * 1e3;
            let rec = RunRecord::new(label, inst, &r, ms)?;
            runs.push(rec.cells());
            timings.push(vec![Cell::Str(label.to_string()), Cell::Str(spec.into()), Cell::Float(ms)]);
            solved.push((label.to_string(), spec.to_string(), r));
        }
    }
    let get = |label: &str, spec: &str| -> &SolveResult {
        &solved
            .iter()
            .find(|(l, s, _)| l == label && s == spec)
            .expect("solved above")
            .2
    };

    let mut ratios = Table::new(&["instance", "objective", "min", "max", "ratio_min", "ratio_max"]);
    let algos: Vec<EqualityObjective> = OBJECTIVES.iter().map(|s| objective(s)).collect();
    for (label, inst) in named.iter().filter(|(l, _)| *l == "e2" || *l == "b_reported") {
        for row in table_maxes_mins(inst, &algos, &base)? {
            ratios.push(vec![
                Cell::Str(label.to_string()),
                Cell::Str(row.objective),
                Cell::Float(row.min),
                Cell::Float(row.max),
                Cell::Float(row.ratio_min),
                Cell::Float(row.ratio_max),
            ]);
        }
    }

    let mut checks = Checks::new();
    let s3 = 3f64.sqrt();
    let g = get("e2", "goldilocks:1");
    checks.near("e2 goldilocks value", g.objective_value, 2.0 * s3, 1e-4);
    checks.near("e2 goldilocks min", g.pi.min(), s3 / 6.0, 1e-5);
    checks.near("e2 goldilocks max", g.pi.max(), s3 / 2.0, 1e-5);
    checks.near("e2 maximin min", get("e2", "maximin").pi.min(), 1.0 / 3.0, 1e-5);
    checks.near("e2 minimax max", get("e2", "minimax").pi.max(), 2.0 / 3.0, 1e-5);

    checks.near("b leximin p010", p(&b_rep, get("b_reported", "leximin"), "0|1|0"), 0.125, 1e-5);
    checks.near("b nash p010", p(&b_rep, get("b_reported", "nash"), "0|1|0"), 2.0 / 21.0, 1e-4);
    for spec in OBJECTIVES {
        let name = format!("b {spec} p111");
        checks.near(&name, p(&b_rep, get("b_reported", spec), "1|1|1"), 2.0 / 9.0, 1e-6);
    }

    let (_, mis) = make_lb_instance(LbKind::Thm43, fixtures::INSTANCE_B)?;
    let gain = |spec: &str| -> f64 {
        let before = get("b_truthful", spec);
        let after = get("b_reported", spec);
        mis.coalition()
            .iter()
            .filter_map(|id| {
                let j = b_rep.agent_index(id)?;
                let i = b_truth.agent_index(id)?;
                Some(after.pi.values()[j] - before.pi.values()[i])
            })
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let (gold, lex) = (gain("goldilocks:1"), gain("leximin"));
    checks.row("b coalition gain goldilocks below leximin", gold, lex, 0.0, gold < lex);

    let e1 = &named[1].1;
    let brute = SolveConfig::new(Backend::Brute, EqualityObjective::maximin());
    for (metric, expected) in [(Metric::Int, 0.0), (Metric::Ext, 1.0 / 6.0), (Metric::Comp, 0.4)] {
        let r = manip_metric_exhaustive(e1, 1, metric, &brute, false, DEFAULT_BUDGET)?;
        checks.near(&format!("e1 maximin {metric}"), r.value, expected, 1e-6);
    }
    checks.near("excluded fairness", fairness(&fixtures::excluded(), &base)?, 0.0, 0.0);

    for (label, inst) in named.iter().filter(|(l, _)| *l == "t1" || *l == "e2") {
        let r = get(label, "goldilocks:1");
        let s = rounding_report(inst, &r.distribution, 1000, 1000, seed)?;
        checks.row(&format!("{label} rounding std_min"), s.std_min, 0.0015, 0.0, s.std_min <= 0.0015);
        checks.row(&format!("{label} rounding std_max"), s.std_max, 0.0015, 0.0, s.std_max <= 0.0015);
    }

    write_table(out, "bench", &runs, format)?;
    write_table(out, "ratios", &ratios, format)?;
    write_table(out, "checks", &checks.0, format)?;
    write_table(out, "timings", &timings, format)?;
    println!(
        "{} runs, {}/{} checks passed -> {}",
        runs.rows.len(),
        checks.passed(),
        checks.0.rows.len(),
        out.display()
    );
    Ok(())
}
