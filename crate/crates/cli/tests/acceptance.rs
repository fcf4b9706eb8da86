//! One line per acceptance criterion; the test fails if any line says FAIL.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sortition_core::adversary::{
    fairness, make_lb_instance, manip_metric_exhaustive, LbKind, Metric, DEFAULT_BUDGET,
};
use sortition_core::fixtures;
use sortition_core::model::{parse_instance, Instance};
use sortition_core::objectives::{gini, EqualityObjective};
use sortition_core::rounding::pipage_round;
use sortition_core::solver::{deviation_delta, solve, Backend, SolveConfig, SolveResult};
use sortition_core::Error;

type Outcome = Result<String, String>;

fn obj(spec: &str) -> EqualityObjective {
    spec.parse().unwrap()
}

fn run(inst: &Instance, backend: Backend, spec: &str) -> SolveResult {
    solve(inst, &SolveConfig::new(backend, obj(spec))).unwrap()
}

fn ensure(cond: bool, msg: String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg)
    }
}

/// Random pools with n <= 12, k <= 4 and one or two binary features, quotas
/// bracketing proportional representation. Pools where some agent fits no
/// panel are redrawn.
fn random_instances(count: usize, seed: u64) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let n = rng.gen_range(4..=12usize);
        let k = rng.gen_range(2..=4u32.min(n as u32 - 1));
        let nf = rng.gen_range(1..=2usize);
        let names = ["x", "y"];
        let rows: Vec<Vec<u8>> = (0..n)
            .map(|_| (0..nf).map(|_| rng.gen_range(0..2u8)).collect())
            .collect();
        let mut agents = format!("id,{}\n", names[..nf].join(","));
        for (i, r) in rows.iter().enumerate() {
            let cells: Vec<String> = r.iter().map(|v| v.to_string()).collect();
            agents.push_str(&format!("p{i},{}\n", cells.join(",")));
        }
        let mut quotas = String::from("feature,value,min,max\n");
        for (f, name) in names[..nf].iter().enumerate() {
            for v in 0..2u8 {
                let have = rows.iter().filter(|r| r[f] == v).count();
                let ideal = k as f64 * have as f64 / n as f64;
                let lo = (ideal.floor() as i64 - rng.gen_range(0..=1)).max(0) as u32;
                let hi = ((ideal.ceil() as u32) + rng.gen_range(0..=1)).min(k);
                let lo = lo.min(have as u32);
                quotas.push_str(&format!("{name},{v},{lo},{hi}\n"));
            }
        }
        let Ok(inst) = parse_instance(&agents, &quotas, k) else { continue };
        match solve(&inst, &SolveConfig::new(Backend::Brute, EqualityObjective::maximin())) {
            Ok(_) => out.push(inst),
            Err(Error::StructuralExclusion(_)) | Err(Error::NoValidPanel) => continue,
            Err(e) => panic!("unexpected error while drawing instances: {e}"),
        }
    }
    out
}

fn backend_equivalence() -> Outcome {
    let t0 = Instant::now();
    let mut worst = [0.0f64; 4];
    let specs = ["maximin", "minimax", "goldilocks:1", "nash"];
    for inst in random_instances(100, 1) {
        for (s, spec) in specs.iter().enumerate() {
            let a = run(&inst, Backend::Brute, spec).objective_value;
            let b = run(&inst, Backend::Colgen, spec).objective_value;
            worst[s] = worst[s].max((a - b).abs());
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    ensure(worst[..3].iter().all(|&d| d <= 1e-5), format!("max gap {:?}", worst))?;
    ensure(worst[3] <= 1e-4, format!("nash gap {}", worst[3]))?;
    ensure(secs < 60.0, format!("took {secs:.1}s"))?;
    Ok(format!("max gaps {:?} in {secs:.1}s", worst))
}

// E2 distributions are mixtures of the (2,2,0,0) and (1,1,1,1) compositions over
// (00, 11, 10, 01); d is the weight of the mixed one.
fn e2_probs(d: f64) -> [f64; 4] {
    [1.0 - d / 2.0, 1.0 - d / 2.0, d / 3.0, d]
}

fn grid_argbest(score: impl Fn([f64; 4]) -> f64) -> (f64, f64) {
    let steps = 1_000_000;
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..=steps {
        let d = i as f64 / steps as f64;
        let v = score(e2_probs(d));
        if v < best.0 {
            best = (v, d);
        }
    }
    best
}

fn e2_closed_forms() -> Outcome {
    let t0 = Instant::now();
    let e2 = fixtures::e2();
    let mx = |p: [f64; 4]| p.iter().cloned().fold(0.0, f64::max);
    let mn = |p: [f64; 4]| p.iter().cloned().fold(1.0, f64::min);
    let (g_val, g_d) = grid_argbest(|p| mx(p) / 0.5 + 0.5 / mn(p));
    let (lo_val, lo_d) = grid_argbest(|p| -mn(p));
    let (hi_val, hi_d) = grid_argbest(mx);

    let g = run(&e2, Backend::Colgen, "goldilocks:1");
    let d2 = g.pi.prob_of_vector(&e2, "0|1").unwrap();
    let s3 = 3f64.sqrt();
    ensure((d2 - s3 / 2.0).abs() <= 1e-4 && (d2 - g_d).abs() <= 1e-4, format!("goldilocks d2 {d2}"))?;
    ensure(
        (g.objective_value - 2.0 * s3).abs() <= 1e-4 && (g.objective_value - g_val).abs() <= 1e-4,
        format!("goldilocks value {}", g.objective_value),
    )?;
    ensure((g.pi.min() - s3 / 6.0).abs() <= 1e-5, format!("goldilocks min {}", g.pi.min()))?;
    ensure((g.pi.max() - s3 / 2.0).abs() <= 1e-5, format!("goldilocks max {}", g.pi.max()))?;

    let lo = run(&e2, Backend::Colgen, "maximin");
    let lo_d2 = lo.pi.prob_of_vector(&e2, "0|1").unwrap();
    ensure((lo.pi.min() - 1.0 / 3.0).abs() <= 1e-5 && (lo.pi.min() + lo_val).abs() <= 1e-5, format!("maximin min {}", lo.pi.min()))?;
    ensure((lo_d2 - 1.0).abs() <= 1e-5 && (lo_d - 1.0).abs() <= 1e-5, format!("maximin d2 {lo_d2}"))?;

    let hi = run(&e2, Backend::Colgen, "minimax");
    let hi_d2 = hi.pi.prob_of_vector(&e2, "0|1").unwrap();
    ensure((hi.pi.max() - 2.0 / 3.0).abs() <= 1e-5 && (hi.pi.max() - hi_val).abs() <= 1e-5, format!("minimax max {}", hi.pi.max()))?;
    ensure((hi_d2 - 2.0 / 3.0).abs() <= 1e-5 && (hi_d - 2.0 / 3.0).abs() <= 1e-5, format!("minimax d2 {hi_d2}"))?;

    let secs = t0.elapsed().as_secs_f64();
    ensure(secs < 5.0, format!("took {secs:.2}s"))?;
    Ok(format!("goldilocks d2={d2:.6} value={:.6}; maximin min={:.6}; minimax max={:.6}", g.objective_value, lo.pi.min(), hi.pi.max()))
}

fn instance_b() -> Outcome {
    let (_, b) = fixtures::instance_b();
    let p = |r: &SolveResult, w: &str| r.pi.prob_of_vector(&b, w).unwrap();
    let lex = run(&b, Backend::Colgen, "leximin");
    let nash = run(&b, Backend::Colgen, "nash");
    ensure((p(&lex, "0|1|0") - 0.125).abs() <= 1e-5, format!("leximin d2 {}", p(&lex, "0|1|0")))?;
    ensure((p(&nash, "0|1|0") - 2.0 / 21.0).abs() <= 1e-4, format!("nash d2 {}", p(&nash, "0|1|0")))?;
    for spec in ["maximin", "minimax", "nash", "leximin", "goldilocks:1"] {
        let r = run(&b, Backend::Colgen, spec);
        ensure((p(&r, "1|1|1") - 2.0 / 9.0).abs() <= 1e-6, format!("{spec} p111 {}", p(&r, "1|1|1")))?;
    }
    Ok(format!("leximin d2={:.6} nash d2={:.6} p111=2/9", p(&lex, "0|1|0"), p(&nash, "0|1|0")))
}

fn sandwich() -> Outcome {
    let mut tightest = f64::INFINITY;
    for inst in random_instances(50, 2) {
        let cfg = SolveConfig::new(Backend::Brute, EqualityObjective::goldilocks(1.0));
        let delta = deviation_delta(&inst, &cfg).map_err(|e| e.to_string())?;
        let r = solve(&inst, &cfg).unwrap();
        let base = inst.k() as f64 / inst.n() as f64;
        let (lo, hi) = (base / (2.0 * delta) - 1e-6, base * 2.0 * delta + 1e-6);
        ensure(r.pi.min() >= lo && r.pi.max() <= hi, format!("pi in [{}, {}] outside [{lo}, {hi}]", r.pi.min(), r.pi.max()))?;
        tightest = tightest.min((r.pi.min() - lo).min(hi - r.pi.max()));
    }
    Ok(format!("smallest slack {tightest:.6}"))
}

// Best gain of a coalition member from re-solving the truthful and reported pools.
fn best_gain(truth: &Instance, after: &Instance, coalition: &[&str], spec: &str) -> f64 {
    let before = run(truth, Backend::Colgen, spec);
    let now = run(after, Backend::Colgen, spec);
    coalition
        .iter()
        .filter_map(|id| {
            let j = after.agent_index(id)?;
            let i = truth.agent_index(id)?;
            Some(now.pi.values()[j] - before.pi.values()[i])
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn separation() -> Outcome {
    let (truth, mis) = make_lb_instance(LbKind::Thm43, fixtures::INSTANCE_B).unwrap();
    let (_, after) = fixtures::instance_b();
    let coalition = mis.coalition();
    let gold = best_gain(&truth, &after, &coalition, "goldilocks:1");
    let lex = best_gain(&truth, &after, &coalition, "leximin");
    let msg = format!("c=6: goldilocks gain {gold:.6}, leximin gain {lex:.6}");
    ensure(gold < lex, msg.clone())?;
    Ok(msg)
}

fn e1_metrics() -> Outcome {
    let e1 = fixtures::e1();
    let cfg = SolveConfig::new(Backend::Brute, EqualityObjective::maximin());
    let mut vals = Vec::new();
    for (metric, want) in [(Metric::Int, 0.0), (Metric::Ext, 1.0 / 6.0), (Metric::Comp, 0.4)] {
        let r = manip_metric_exhaustive(&e1, 1, metric, &cfg, false, DEFAULT_BUDGET).unwrap();
        ensure((r.value - want).abs() <= 1e-6, format!("{metric} = {}", r.value))?;
        vals.push(format!("{metric}={:.6}", r.value));
    }
    Ok(vals.join(" "))
}

fn pipage() -> Outcome {
    let t0 = Instant::now();
    let (runs, m) = (1000usize, 1000usize);
    let mut report = Vec::new();
    for (label, inst) in [("t1", fixtures::t1()), ("e2", fixtures::e2())] {
        let r = run(&inst, Backend::Colgen, "goldilocks:1");
        let target = r.pi.values().to_vec();
        let mut per_run: Vec<Vec<f64>> = Vec::with_capacity(runs);
        for s in 0..runs as u64 {
            let l = pipage_round(&r.distribution, m, 1000 + s).map_err(|e| e.to_string())?;
            ensure(l.tickets.len() == m && l.m == m, format!("{label}: {} tickets", l.tickets.len()))?;
            l.validate(&inst).map_err(|e| e.to_string())?;
            let mut hits = vec![0usize; inst.n()];
            for t in &l.tickets {
                for &i in t.members() {
                    hits[i] += 1;
                }
            }
            per_run.push(hits.iter().map(|&h| h as f64 / m as f64).collect());
        }
        let stats = |xs: &[f64]| {
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
            (mean, var.sqrt())
        };
        for i in 0..inst.n() {
            let col: Vec<f64> = per_run.iter().map(|p| p[i]).collect();
            let (mean, sd) = stats(&col);
            let se = sd / (runs as f64).sqrt();
            ensure((mean - target[i]).abs() <= 3.0 * se + 1e-12, format!("{label} agent {i}: mean {mean} target {} se {se}", target[i]))?;
        }
        let mins: Vec<f64> = per_run.iter().map(|p| p.iter().cloned().fold(1.0, f64::min)).collect();
        let maxs: Vec<f64> = per_run.iter().map(|p| p.iter().cloned().fold(0.0, f64::max)).collect();
        let (s_min, s_max) = (stats(&mins).1, stats(&maxs).1);
        ensure(s_min <= 0.0015 && s_max <= 0.0015, format!("{label}: std min {s_min} max {s_max}"))?;
        report.push(format!("{label} std(min)={s_min:.6} std(max)={s_max:.6}"));
    }
    let secs = t0.elapsed().as_secs_f64();
    ensure(secs < 30.0, format!("took {secs:.1}s"))?;
    Ok(report.join("; "))
}

fn axioms() -> Outcome {
    let mut pool: Vec<Instance> = vec![fixtures::t1(), fixtures::e1(), fixtures::e2()];
    pool.extend(random_instances(30, 3));
    let specs = ["maximin", "minimax", "nash", "leximin", "goldilocks:1", "maximin-tb", "minimax-tb"];
    let mut uniform_cases = 0;
    for inst in &pool {
        let base = inst.k() as f64 / inst.n() as f64;
        // k/n for everyone is feasible exactly when the maximin optimum reaches it
        let feasible = run(inst, Backend::Brute, "maximin").pi.min() >= base - 1e-9;
        for spec in specs {
            let r = run(inst, Backend::Colgen, spec);
            ensure(r.pi.anonymity_gap(inst) <= 0.01 + 1e-6, format!("{spec}: anonymity gap {}", r.pi.anonymity_gap(inst)))?;
            if feasible {
                let dev = r.pi.values().iter().map(|p| (p - base).abs()).fold(0.0, f64::max);
                ensure(dev <= 0.01 + 1e-6, format!("{spec}: not uniform, deviation {dev}"))?;
                let g = gini(r.pi.values()).unwrap();
                ensure(g <= 1e-9, format!("{spec}: gini {g} on a uniform result"))?;
                uniform_cases += 1;
            }
        }
    }
    Ok(format!("{} instances, {uniform_cases} uniform results", pool.len()))
}

fn exclusion() -> Outcome {
    let cfg = SolveConfig::new(Backend::Brute, EqualityObjective::goldilocks(1.0));
    let f = fairness(&fixtures::excluded(), &cfg).map_err(|e| e.to_string())?;
    ensure(f == 0.0, format!("fairness {f}"))?;
    let strict = manip_metric_exhaustive(&fixtures::e1(), 1, Metric::Int, &cfg, true, DEFAULT_BUDGET);
    ensure(
        matches!(strict, Err(Error::RestrictionViolated { .. })),
        format!("strict harness accepted c=1 on E1: {strict:?}"),
    )?;
    Ok("fairness 0; strict harness rejects c=1 > n_min-k".into())
}

fn bench_into(dir: &Path, format: &str) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_sortition"))
        .args(["bench", "--seed", "7", "--format", format, "--out"])
        .arg(dir)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn determinism() -> Outcome {
    let mut compared = 0;
    for (format, ext) in [("csv", "csv"), ("json", "json")] {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        bench_into(a.path(), format)?;
        bench_into(b.path(), format)?;
        for stem in ["bench", "ratios", "checks"] {
            let name = format!("{stem}.{ext}");
            let x = std::fs::read(a.path().join(&name)).map_err(|e| e.to_string())?;
            let y = std::fs::read(b.path().join(&name)).map_err(|e| e.to_string())?;
            ensure(!x.is_empty() && x == y, format!("{name} differs between runs"))?;
            compared += 1;
        }
    }
    Ok(format!("{compared} artifacts byte-identical"))
}

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("backend equivalence", backend_equivalence),
        ("E2 closed forms", e2_closed_forms),
        ("instance B closed forms", instance_b),
        ("goldilocks sandwich", sandwich),
        ("manipulation separation", separation),
        ("E1 manipulation metrics", e1_metrics),
        ("pipage rounding", pipage),
        ("axiom suite", axioms),
        ("structural exclusion", exclusion),
        ("bench determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {:>2} PASS {name}: {detail}", i + 1),
            Err(detail) => {
                println!("criterion {:>2} FAIL {name}: {detail}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
