use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sortition_core::adversary::{
    apply_misreport, manip_metric_exhaustive, make_lb_instance, worst_mu_manipulator, LbKind,
    LbParams, ManipReport, Metric, DEFAULT_BUDGET,
};
use sortition_core::model::{duplicate_pool, load_instance, Instance};
use sortition_core::objectives::EqualityObjective;
use sortition_core::panels::structurally_excluded;
use sortition_core::report::{
    drop_table, feature_drop_sweep, rounding_report, rounding_table, Cell, RunRecord, Table,
};
use sortition_core::rounding::{pipage_round, write_lottery, DEFAULT_M};
use sortition_core::solver::{
    solve, solve_legacy, Backend, SolveConfig, SolveResult, SolveResultDoc,
};

mod bench;

#[derive(Parser)]
#[command(name = "sortition", version, about = "Fair panel selection under quotas")]
struct Cli {
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Directory for written artifacts.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct InstanceArgs {
    #[arg(long)]
    agents: PathBuf,
    #[arg(long)]
    quotas: PathBuf,
    #[arg(short, long)]
    k: u32,
}

impl InstanceArgs {
    fn load(&self) -> anyhow::Result<Instance> {
        Ok(load_instance(&self.agents, &self.quotas, self.k)?)
    }
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value = "goldilocks:1", value_parser = parse_objective)]
    objective: EqualityObjective,
    #[arg(long, default_value = "colgen", value_parser = parse_backend)]
    backend: Backend,
    /// Pricing tolerance for column generation.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    max_columns: Option<usize>,
}

impl SolverArgs {
    fn config(&self, seed: u64) -> SolveConfig {
        let mut cfg = SolveConfig::new(self.backend, self.objective);
        if let Some(e) = self.eps {
            cfg.eps_colgen = e;
        }
        if let Some(m) = self.max_columns {
            cfg.max_columns = m;
        }
        cfg.seed = seed;
        cfg
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Strategy {
    Mu,
    Exhaustive,
}

#[derive(Subcommand)]
enum Command {
    /// Load and check an instance; write per-vector pool counts.
    Validate {
        #[command(flatten)]
        inst: InstanceArgs,
    },
    /// Solve for a maximally equal panel distribution.
    Select {
        #[command(flatten)]
        inst: InstanceArgs,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Shorthand for `select --objective leximin`.
    Leximin {
        #[command(flatten)]
        inst: InstanceArgs,
        #[arg(long, default_value = "colgen", value_parser = parse_backend)]
        backend: Backend,
    },
    /// Greedy legacy selection; several runs give empirical marginals.
    Legacy {
        #[command(flatten)]
        inst: InstanceArgs,
        #[arg(long, default_value_t = 1)]
        runs: usize,
    },
    /// Round a saved distribution to an m-uniform lottery.
    Round {
        #[arg(long)]
        result: PathBuf,
        #[arg(long, default_value_t = DEFAULT_M)]
        m: usize,
        /// Extra independent roundings summarised in a table.
        #[arg(long, default_value_t = 1)]
        runs: usize,
    },
    /// Manipulation metrics.
    Manip {
        #[command(flatten)]
        inst: InstanceArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, value_enum, default_value_t = Strategy::Mu)]
        strategy: Strategy,
        #[arg(long, default_value_t = 1)]
        c: usize,
        #[arg(long, default_value = "int", value_parser = parse_metric)]
        metric: Metric,
        #[arg(long, default_value_t = 1)]
        copies: usize,
        /// Reject coalitions above max(0, n_min - k).
        #[arg(long)]
        strict: bool,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u128,
    },
    /// Extremal probabilities as the most biased features are dropped.
    FeatureDrop {
        #[command(flatten)]
        inst: InstanceArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value_t = 1)]
        max_drop: usize,
    },
    /// Built-in fixtures and checks; deterministic tables plus a timing file.
    Bench,
    /// Write one of the constructed instances and its coalition misreport.
    GenLb {
        #[arg(long, value_parser = parse_kind)]
        kind: LbKind,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: u32,
        #[arg(long)]
        nmin: usize,
        #[arg(long)]
        c: usize,
    },
}

fn parse_objective(s: &str) -> Result<EqualityObjective, String> {
    s.parse().map_err(|e: sortition_core::Error| e.to_string())
}

fn parse_backend(s: &str) -> Result<Backend, String> {
    s.parse().map_err(|e: sortition_core::Error| e.to_string())
}

fn parse_metric(s: &str) -> Result<Metric, String> {
    s.parse().map_err(|e: sortition_core::Error| e.to_string())
}

fn parse_kind(s: &str) -> Result<LbKind, String> {
    s.parse().map_err(|e: sortition_core::Error| e.to_string())
}

pub(crate) fn write_table(out: &Path, stem: &str, table: &Table, format: Format) -> anyhow::Result<PathBuf> {
    let (ext, body) = match format {
        Format::Csv => ("csv", table.to_csv()?),
        Format::Json => ("json", table.to_json()?),
    };
    let path = out.join(format!("{stem}.{ext}"));
    fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn write_result(out: &Path, inst: &Instance, r: &SolveResult) -> anyhow::Result<PathBuf> {
    let path = out.join("result.json");
    fs::write(&path, serde_json::to_string_pretty(&r.to_doc(inst))? + "\n")?;
    Ok(path)
}

fn select(cli: &Cli, inst: &Instance, cfg: &SolveConfig) -> anyhow::Result<()> {
    let t0 = Instant::now();
    let r = solve(inst, cfg)?;
    let ms = t0.elapsed().as_secs_f64() * 1e3;
    let rec = RunRecord::new("input", inst, &r, ms)?;
    let mut t = Table::new(&RunRecord::HEADER);
    t.push(rec.cells());
    write_table(&cli.out, "record", &t, cli.format)?;
    let path = write_result(&cli.out, inst, &r)?;
    if !r.converged {
        eprintln!(
            "warning: column generation stopped at the column budget (gap {:?})",
            r.certificate
        );
    }
    println!(
        "{} min={:.6} max={:.6} value={:.6} -> {}",
        r.objective,
        rec.min,
        rec.max,
        rec.value,
        path.display()
    );
    Ok(())
}

fn manip_table(r: &ManipReport, inst: &Instance, c: usize, copies: usize) -> Table {
    let (ids, vecs) = r.witness.columns(inst.scheme());
    let mut t = Table::new(&[
        "metric",
        "c",
        "search",
        "value",
        "witness_coalition",
        "witness_vectors",
        "copies",
    ]);
    t.push(vec![
        Cell::Str(r.metric.to_string()),
        Cell::Int(c as i64),
        Cell::Str(r.search.to_string()),
        Cell::Float(r.value),
        Cell::Str(ids),
        Cell::Str(vecs),
        Cell::Int(copies as i64),
    ]);
    t
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    match &cli.command {
        Command::Validate { inst } => {
            let inst = inst.load()?;
            let st = inst.stats();
            let mut t = Table::new(&["vector", "count"]);
            for (w, c) in &st.counts {
                t.push(vec![Cell::Str(inst.scheme().format_vector(w)), Cell::Int(*c as i64)]);
            }
            write_table(&cli.out, "vectors", &t, cli.format)?;
            let excluded = structurally_excluded(&inst);
            if !excluded.is_empty() {
                let ids: Vec<&str> = excluded.iter().map(|&i| inst.agents()[i].id.as_str()).collect();
                eprintln!("warning: agents in no valid panel: {}", ids.join(","));
            }
            println!(
                "n={} k={} vectors={} n_min={} excluded={}",
                st.n,
                inst.k(),
                st.num_vectors(),
                st.n_min,
                excluded.len()
            );
        }
        Command::Select { inst, solver } => {
            let inst = inst.load()?;
            select(cli, &inst, &solver.config(cli.seed))?;
        }
        Command::Leximin { inst, backend } => {
            let inst = inst.load()?;
            let mut cfg = SolveConfig::new(*backend, EqualityObjective::leximin());
            cfg.seed = cli.seed;
            select(cli, &inst, &cfg)?;
        }
        Command::Legacy { inst, runs } => {
            let inst = inst.load()?;
            if *runs < 1 {
                bail!(sortition_core::Error::Domain("runs must be at least 1".into()));
            }
            let mut master = ChaCha8Rng::seed_from_u64(cli.seed);
            let mut hits = vec![0usize; inst.n()];
            let mut lines = String::new();
            for _ in 0..*runs {
                let p = solve_legacy(&inst, master.next_u64())?;
                for &i in p.members() {
                    hits[i] += 1;
                }
                lines.push_str(&p.ids(&inst).join(","));
                lines.push('\n');
            }
            fs::write(cli.out.join("panels.txt"), lines)?;
            let mut t = Table::new(&["id", "probability"]);
            for (a, h) in inst.agents().iter().zip(&hits) {
                t.push(vec![Cell::Str(a.id.clone()), Cell::Float(*h as f64 / *runs as f64)]);
            }
            let path = write_table(&cli.out, "legacy", &t, cli.format)?;
            println!("{runs} legacy panels -> {}", path.display());
        }
        Command::Round { result, m, runs } => {
            let text = fs::read_to_string(result).with_context(|| format!("reading {}", result.display()))?;
            let doc: SolveResultDoc = serde_json::from_str(&text).map_err(sortition_core::Error::from)?;
            let (inst, r) = SolveResult::from_doc(doc)?;
            let n = inst.n() as f64;
            if (*m as f64) < n * n.sqrt() {
                eprintln!("warning: m={m} is below n*sqrt(n)={:.0}; rounding error may be large", n * n.sqrt());
            }
            let lottery = pipage_round(&r.distribution, *m, cli.seed)?;
            let path = cli.out.join("lottery.tsv");
            write_lottery(&inst, &lottery, cli.seed, &path)?;
            if *runs > 1 {
                let summary = rounding_report(&inst, &r.distribution, *m, *runs, cli.seed)?;
                write_table(&cli.out, "rounding", &rounding_table(&summary), cli.format)?;
            }
            println!("{m} tickets -> {}", path.display());
        }
        Command::Manip {
            inst,
            solver,
            strategy,
            c,
            metric,
            copies,
            strict,
            budget,
        } => {
            let inst = duplicate_pool(&inst.load()?, *copies)?;
            let cfg = solver.config(cli.seed);
            let r = match strategy {
                Strategy::Mu => worst_mu_manipulator(&inst, &cfg)?,
                Strategy::Exhaustive => manip_metric_exhaustive(&inst, *c, *metric, &cfg, *strict, *budget)?,
            };
            let c_used = match strategy {
                Strategy::Mu => 1,
                Strategy::Exhaustive => *c,
            };
            let path = write_table(&cli.out, "manip", &manip_table(&r, &inst, c_used, *copies), cli.format)?;
            println!("{} {} = {:.6} -> {}", r.search, r.metric, r.value, path.display());
        }
        Command::FeatureDrop { inst, solver, max_drop } => {
            let inst = inst.load()?;
            let cfg = solver.config(cli.seed);
            let rows = feature_drop_sweep(&inst, &[cfg.objective], *max_drop, &cfg)?;
            let path = write_table(&cli.out, "feature_drop", &drop_table(&rows), cli.format)?;
            println!("{} rows -> {}", rows.len(), path.display());
        }
        Command::Bench => bench::run(&cli.out, cli.format, cli.seed)?,
        Command::GenLb { kind, n, k, nmin, c } => {
            let p = LbParams {
                n: *n,
                k: *k,
                n_min: *nmin,
                c: *c,
            };
            let (inst, mis) = make_lb_instance(*kind, p)?;
            inst.save_csv(&cli.out.join("agents.csv"), &cli.out.join("quotas.csv"))?;
            let after = apply_misreport(&inst, &mis)?;
            after.save_csv(&cli.out.join("agents_reported.csv"), &cli.out.join("quotas_reported.csv"))?;
            fs::remove_file(cli.out.join("quotas_reported.csv"))?;
            let reports: Vec<serde_json::Value> = mis
                .reports
                .iter()
                .map(|(id, w)| serde_json::json!({ "id": id, "reported": inst.scheme().format_vector(w) }))
                .collect();
            let doc = serde_json::json!({ "k": k, "misreport": reports });
            fs::write(cli.out.join("misreport.json"), serde_json::to_string_pretty(&doc)? + "\n")?;
            println!("n={} k={} coalition={} -> {}", inst.n(), k, mis.len(), cli.out.display());
        }
    }
    Ok(())
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("SORTITION_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .with_context(|| format!("SORTITION_THREADS must be a positive integer, got `{v}`"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error[USAGE]: {e:#}");
        return ExitCode::from(2);
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = e
                .chain()
                .find_map(|c| c.downcast_ref::<sortition_core::Error>())
                .map_or("IO", |c| c.code());
            eprintln!("error[{code}]: {e:#}");
            ExitCode::from(1)
        }
    }
}
