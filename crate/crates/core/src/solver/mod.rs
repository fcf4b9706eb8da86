//! Maximally equal panel distributions.

mod engine;
mod legacy;
mod lp;
mod master;
mod nash;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Instance, InstanceDoc};
use crate::objectives::{
    evaluate, gamma_balanced, gamma_selection_bias, EqualityObjective, Gamma, ObjectiveKind,
    TieBreak,
};
use crate::panels::{
    self, marginals, DistributionDoc, PanelComposition, PanelDistribution,
    ProbabilityAssignment,
};

use engine::Engine;
use master::{Bound, MasterSolution, MasterSpec};

pub use legacy::{solve_legacy, RESTART_LIMIT};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backend {
    /// Every valid panel enumerated; agent-level masters.
    Brute,
    /// Compositions generated on demand; group-level masters.
    Colgen,
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "brute" => Ok(Backend::Brute),
            "colgen" => Ok(Backend::Colgen),
            other => Err(Error::Domain(format!("unknown backend `{other}`"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveConfig {
    pub backend: Backend,
    pub objective: EqualityObjective,
    pub eps_master: f64,
    pub eps_colgen: f64,
    pub tau_anon: f64,
    pub max_columns: usize,
    pub seed: u64,
    pub panel_cap: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            backend: Backend::Colgen,
            objective: EqualityObjective::goldilocks(1.0),
            eps_master: 1e-8,
            eps_colgen: 1e-7,
            tau_anon: 0.01,
            max_columns: 10_000,
            seed: 42,
            panel_cap: panels::DEFAULT_PANEL_CAP,
        }
    }
}

impl SolveConfig {
    pub fn new(backend: Backend, objective: EqualityObjective) -> Self {
        Self {
            backend,
            objective,
            ..Self::default()
        }
    }

    pub fn with_objective(&self, objective: EqualityObjective) -> Self {
        Self {
            objective,
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    /// The objective with any automatic γ replaced by its value.
    pub objective: EqualityObjective,
    pub distribution: PanelDistribution,
    pub pi: ProbabilityAssignment,
    pub objective_value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Remaining pricing gap when the run stopped.
    pub certificate: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveResultDoc {
    pub objective: String,
    pub gamma: Option<f64>,
    pub value: f64,
    pub converged: bool,
    pub pi: BTreeMap<String, f64>,
    pub panels: Vec<panels::PanelDoc>,
    pub iterations: usize,
    pub instance_hash: String,
    pub instance: InstanceDoc,
}

impl SolveResult {
    pub fn to_doc(&self, inst: &Instance) -> SolveResultDoc {
        SolveResultDoc {
            objective: self.objective.to_string(),
            gamma: self.objective.uses_gamma().then(|| self.objective.gamma_value()).flatten(),
            value: self.objective_value,
            converged: self.converged,
            pi: inst
                .agents()
                .iter()
                .zip(self.pi.values())
                .map(|(a, &p)| (a.id.clone(), p))
                .collect(),
            panels: self.distribution.to_doc(inst).panels,
            iterations: self.iterations,
            instance_hash: inst.hash(),
            instance: inst.to_doc(),
        }
    }

    /// Rebuilds the instance and distribution from a saved result.
    pub fn from_doc(doc: SolveResultDoc) -> Result<(Instance, SolveResult)> {
        let inst = Instance::from_doc(doc.instance)?;
        let objective: EqualityObjective = doc.objective.parse()?;
        let distribution =
            PanelDistribution::from_doc(&inst, &DistributionDoc { panels: doc.panels })?;
        let pi = marginals(&inst, &distribution)?;
        Ok((
            inst,
            SolveResult {
                objective,
                distribution,
                pi,
                objective_value: doc.value,
                iterations: doc.iterations,
                converged: doc.converged,
                certificate: None,
            },
        ))
    }
}

fn check_assumptions(inst: &Instance) -> Result<()> {
    if panels::CompositionSearch::new(inst).any() {
        let excluded = panels::structurally_excluded(inst);
        if excluded.is_empty() {
            return Ok(());
        }
        return Err(Error::StructuralExclusion(
            excluded.iter().map(|&i| inst.agents()[i].id.clone()).collect(),
        ));
    }
    Err(Error::NoValidPanel)
}

/// Replaces an automatic γ by its value for this instance.
pub fn resolve_gamma(inst: &Instance, cfg: &SolveConfig) -> Result<EqualityObjective> {
    let mut obj = cfg.objective;
    match obj.gamma {
        Gamma::Fixed(_) => {}
        Gamma::SelectionBias => obj.gamma = Gamma::Fixed(gamma_selection_bias(inst)?),
        Gamma::Balanced => {
            let lo = solve(inst, &cfg.with_objective(EqualityObjective::maximin()))?;
            let hi = solve(inst, &cfg.with_objective(EqualityObjective::minimax()))?;
            obj.gamma = Gamma::Fixed(gamma_balanced(lo.pi.min(), hi.pi.max(), inst.n(), inst.k()));
        }
    }
    Ok(obj)
}

pub fn solve(inst: &Instance, cfg: &SolveConfig) -> Result<SolveResult> {
    check_assumptions(inst)?;
    let objective = resolve_gamma(inst, cfg)?;
    if inst.groups().len() == 1 {
        let comp = PanelComposition(vec![inst.k()]);
        let distribution =
            panels::expand_composition_distribution(inst, &[(comp, 1.0)], cfg.panel_cap)?;
        return finish(inst, objective, distribution, 0, true, Some(0.0));
    }
    let mut eng = Engine::new(inst, cfg)?;
    let units = eng.units();
    let q = match (objective.kind, objective.tie_break) {
        (ObjectiveKind::Maximin, TieBreak::None) => eng.lp(&MasterSpec::maximin(units))?.q,
        (ObjectiveKind::Minimax, TieBreak::None) => eng.lp(&MasterSpec::minimax(units))?.q,
        (ObjectiveKind::Maximin, TieBreak::OppositeExtreme) => {
            let first = eng.lp(&MasterSpec::maximin(units))?;
            let mut spec = MasterSpec::minimax(units);
            spec.lower = vec![Bound::Fixed(first.t - cfg.eps_master); units];
            feasible(eng.lp(&spec)?)?.q
        }
        (ObjectiveKind::Minimax, TieBreak::OppositeExtreme) => {
            let first = eng.lp(&MasterSpec::minimax(units))?;
            let mut spec = MasterSpec::maximin(units);
            spec.upper = vec![Bound::Fixed(first.x + cfg.eps_master); units];
            feasible(eng.lp(&spec)?)?.q
        }
        (ObjectiveKind::Linear, _) => {
            let spec = MasterSpec {
                lower: vec![Bound::Var; units],
                upper: vec![Bound::Var; units],
                alpha: 1.0,
                beta: objective.gamma_value().unwrap_or(0.0),
            };
            eng.lp(&spec)?.q
        }
        (ObjectiveKind::Leximin, _) => leximin(&mut eng)?.q,
        (ObjectiveKind::Nash, _) => eng.nash()?.q,
        (ObjectiveKind::Goldilocks, _) => {
            goldilocks(&mut eng, objective.gamma_value().unwrap_or(0.0))?.q
        }
    };
    let distribution = eng.distribution(&q)?;
    finish(
        inst,
        objective,
        distribution,
        eng.iterations,
        eng.converged,
        Some(eng.gap),
    )
}

pub fn solve_leximin(inst: &Instance, cfg: &SolveConfig) -> Result<SolveResult> {
    solve(inst, &cfg.with_objective(EqualityObjective::leximin()))
}

pub fn solve_nash(inst: &Instance, cfg: &SolveConfig) -> Result<SolveResult> {
    solve(inst, &cfg.with_objective(EqualityObjective::nash()))
}

fn finish(
    inst: &Instance,
    objective: EqualityObjective,
    distribution: PanelDistribution,
    iterations: usize,
    converged: bool,
    certificate: Option<f64>,
) -> Result<SolveResult> {
    let pi = marginals(inst, &distribution)?;
    let objective_value = evaluate(&objective, pi.values(), inst.k(), inst.n());
    Ok(SolveResult {
        objective,
        distribution,
        pi,
        objective_value,
        iterations,
        converged,
        certificate,
    })
}

fn feasible(sol: MasterSolution) -> Result<MasterSolution> {
    if sol.elastic > 1e-9 {
        return Err(Error::Numerical(format!(
            "bounds violated by {} after convergence",
            sol.elastic
        )));
    }
    Ok(sol)
}

/// Maximize the lowest unfrozen probability, freeze the units that provably
/// cannot rise further (positive multiplier), repeat.
fn leximin(eng: &mut Engine) -> Result<MasterSolution> {
    let units = eng.units();
    let mut frozen: Vec<Option<f64>> = vec![None; units];
    loop {
        let spec = MasterSpec {
            lower: frozen
                .iter()
                .map(|f| match f {
                    Some(v) => Bound::Fixed(*v),
                    None => Bound::Var,
                })
                .collect(),
            upper: vec![Bound::Free; units],
            alpha: 0.0,
            beta: 1.0,
        };
        let sol = feasible(eng.lp(&spec)?)?;
        let p = eng.unit_probs(&sol.q);
        let open: Vec<usize> = (0..units).filter(|&u| frozen[u].is_none()).collect();
        let mut binding: Vec<usize> = open
            .iter()
            .copied()
            .filter(|&u| sol.lower_dual[u] > 1e-9)
            .collect();
        if binding.is_empty() {
            binding = open.iter().copied().filter(|&u| p[u] <= sol.t + 1e-9).collect();
        }
        if binding.is_empty() {
            binding = open.clone();
        }
        for u in binding {
            frozen[u] = Some(sol.t);
        }
        if frozen.iter().all(Option::is_some) {
            return Ok(sol);
        }
    }
}

/// Minimax with every unit held at or above `floor`.
fn floored_minimax(eng: &mut Engine, floor: f64) -> Result<MasterSolution> {
    let units = eng.units();
    let mut spec = MasterSpec::minimax(units);
    spec.lower = vec![Bound::Fixed(floor); units];
    eng.lp(&spec)
}

// Golden-section search over s = ln t of (n/k) M(e^s) + gamma (k/n) e^-s, where
// M(t) is the floored minimax value. Both terms are convex in s.
fn goldilocks(eng: &mut Engine, gamma: f64) -> Result<MasterSolution> {
    let units = eng.units();
    if gamma == 0.0 {
        return eng.lp(&MasterSpec::minimax(units));
    }
    let ratio = eng.inst.k() as f64 / eng.inst.n() as f64;
    let t_max = eng.lp(&MasterSpec::maximin(units))?.t;
    if t_max <= 0.0 {
        return Err(Error::Numerical("maximin value is zero".into()));
    }
    let mut best: Option<(f64, MasterSolution)> = None;
    let mut eval = |eng: &mut Engine, s: f64| -> Result<f64> {
        let t = s.exp().min(t_max);
        let sol = floored_minimax(eng, t)?;
        let value = if sol.elastic > 1e-9 {
            f64::INFINITY
        } else {
            sol.x / ratio + gamma * ratio / t
        };
        if best.as_ref().map_or(true, |(b, _)| value < *b) {
            best = Some((value, sol));
        }
        Ok(value)
    };
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (t_max.ln() - 25.0, t_max.ln());
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = eval(eng, c)?;
    let mut fd = eval(eng, d)?;
    eval(eng, b)?;
    while b - a > 1e-12 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = eval(eng, c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = eval(eng, d)?;
        }
    }
    Ok(best.expect("evaluated at least once").1)
}

/// `(min(pi) / min-opt, max(pi) / max-opt)`; the first entry is NaN when min-opt is 0.
pub fn approximation_ratios(pi: &ProbabilityAssignment, min_opt: f64, max_opt: f64) -> (f64, f64) {
    let lo = if min_opt > 0.0 { pi.min() / min_opt } else { f64::NAN };
    (lo, pi.max() / max_opt)
}

/// Smallest achievable `max{(k/n)/min(pi), max(pi)/(k/n)}`, by bisection on the
/// probability floor with floored minimax solves.
pub fn deviation_delta(inst: &Instance, cfg: &SolveConfig) -> Result<f64> {
    check_assumptions(inst)?;
    let ratio = inst.k() as f64 / inst.n() as f64;
    if inst.groups().len() == 1 {
        return Ok(1.0);
    }
    let mut eng = Engine::new(inst, cfg)?;
    let units = eng.units();
    let t_max = eng.lp(&MasterSpec::maximin(units))?.t;
    let side = |eng: &mut Engine, t: f64| -> Result<(f64, f64)> {
        let m = floored_minimax(eng, t)?;
        Ok((ratio / t, m.x / ratio))
    };
    let (low, high) = side(&mut eng, t_max)?;
    if low >= high {
        return Ok(low);
    }
    // low side falls and high side rises as the floor grows
    let (mut a, mut b) = (0.0, t_max);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= 0.0 {
            break;
        }
        let (l, h) = side(&mut eng, mid)?;
        if l > h {
            a = mid;
        } else {
            b = mid;
        }
        if b - a < 1e-14 {
            break;
        }
    }
    let (l, h) = side(&mut eng, b)?;
    let at_b = l.max(h);
    if a > 0.0 {
        let (l, h) = side(&mut eng, a)?;
        return Ok(at_b.min(l.max(h)));
    }
    Ok(at_b)
}
