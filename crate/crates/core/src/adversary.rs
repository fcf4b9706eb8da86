//! Misreports, manipulation metrics and the constructed lower-bound instances.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Agent, FeatureScheme, FeatureVector, Instance, Quota};
use crate::panels::{remove_agents, strip_self_excluders, structurally_excluded};
use crate::solver::{solve, SolveConfig};

pub const DEFAULT_BUDGET: u128 = 100_000;

/// Coalition members with the vectors they report; everyone else is truthful.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Misreport {
    pub reports: Vec<(String, FeatureVector)>,
}

impl Misreport {
    pub fn coalition(&self) -> Vec<&str> {
        self.reports.iter().map(|(id, _)| id.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.reports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reports.is_empty()
    }

    fn indices(&self, inst: &Instance) -> Result<Vec<usize>> {
        self.reports
            .iter()
            .map(|(id, _)| {
                inst.agent_index(id)
                    .ok_or_else(|| Error::Malformed(format!("misreport names unknown agent `{id}`")))
            })
            .collect()
    }

    /// `ids` and `vectors`, each `;`-joined, for tabular output.
    pub fn columns(&self, scheme: &FeatureScheme) -> (String, String) {
        let ids: Vec<&str> = self.coalition();
        let vecs: Vec<String> = self
            .reports
            .iter()
            .map(|(_, w)| scheme.format_vector(w))
            .collect();
        (ids.join(";"), vecs.join(";"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    Int,
    Ext,
    Comp,
    Fairness,
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "int" => Ok(Metric::Int),
            "ext" => Ok(Metric::Ext),
            "comp" => Ok(Metric::Comp),
            "fairness" => Ok(Metric::Fairness),
            other => Err(Error::Domain(format!("unknown metric `{other}`"))),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Int => "INT",
            Metric::Ext => "EXT",
            Metric::Comp => "COMP",
            Metric::Fairness => "FAIRNESS",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Search {
    Exhaustive,
    Mu,
}

impl fmt::Display for Search {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Search::Exhaustive => "EXHAUSTIVE",
            Search::Mu => "MU",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManipReport {
    pub metric: Metric,
    pub value: f64,
    pub witness: Misreport,
    pub algorithm: String,
    pub search: Search,
    pub evaluations: usize,
}

fn reported_agents(inst: &Instance, mis: &Misreport) -> Result<Vec<Agent>> {
    let idx = mis.indices(inst)?;
    let mut agents = inst.agents().to_vec();
    for (&i, (_, w)) in idx.iter().zip(&mis.reports) {
        if w.0.len() != inst.scheme().num_features()
            || w.0.iter().enumerate().any(|(f, &v)| v as usize >= inst.scheme().values(f).len())
        {
            return Err(Error::Malformed(format!("bad reported vector for `{}`", agents[i].id)));
        }
        agents[i].vector = w.clone();
    }
    Ok(agents)
}

/// The instance the algorithm sees, with self-excluding coalition members removed.
pub fn apply_misreport(inst: &Instance, mis: &Misreport) -> Result<Instance> {
    if mis.is_empty() {
        return Ok(inst.clone());
    }
    let reported = inst.with_agents(reported_agents(inst, mis)?)?;
    let coalition = mis.indices(inst)?;
    Ok(strip_self_excluders(&reported, &coalition)?.0)
}

/// Selection probabilities under `cfg` after every structurally excluded agent
/// is dropped. Excluded coalition members map to `None`, other excluded agents
/// to `Some(0)`.
fn probabilities(inst: &Instance, coalition: &[usize], cfg: &SolveConfig) -> Result<Vec<Option<f64>>> {
    let excluded = structurally_excluded(inst);
    let mut out: Vec<Option<f64>> = (0..inst.n())
        .map(|i| (!coalition.contains(&i)).then_some(0.0))
        .collect();
    if excluded.len() == inst.n() {
        return Ok(out);
    }
    let kept = remove_agents(inst, &excluded)?;
    let r = solve(&kept, cfg)?;
    for (a, &p) in kept.agents().iter().zip(r.pi.values()) {
        out[inst.agent_index(&a.id).expect("kept agent")] = Some(p);
    }
    Ok(out)
}

pub fn truthful_probabilities(inst: &Instance, cfg: &SolveConfig) -> Result<Vec<f64>> {
    Ok(probabilities(inst, &[], cfg)?
        .into_iter()
        .map(|p| p.unwrap_or(0.0))
        .collect())
}

/// Minimum selection probability; zero whenever some agent fits no panel.
pub fn fairness(inst: &Instance, cfg: &SolveConfig) -> Result<f64> {
    Ok(truthful_probabilities(inst, cfg)?
        .into_iter()
        .fold(f64::INFINITY, f64::min))
}

fn manipulated(inst: &Instance, mis: &Misreport, truth: &[f64], cfg: &SolveConfig) -> Result<Vec<Option<f64>>> {
    let idx = mis.indices(inst)?;
    if mis
        .reports
        .iter()
        .zip(&idx)
        .all(|((_, w), &i)| *w == inst.agents()[i].vector)
    {
        return Ok(truth.iter().map(|&p| Some(p)).collect());
    }
    let reported = inst.with_agents(reported_agents(inst, mis)?)?;
    probabilities(&reported, &idx, cfg)
}

fn score(inst: &Instance, metric: Metric, coalition: &[usize], truth: &[f64], after: &[Option<f64>]) -> f64 {
    match metric {
        Metric::Int => coalition
            .iter()
            .filter_map(|&i| after[i].map(|p| p - truth[i]))
            .fold(f64::NEG_INFINITY, f64::max),
        Metric::Ext => (0..inst.n())
            .filter(|i| !coalition.contains(i))
            .map(|i| truth[i] - after[i].unwrap_or(0.0))
            .fold(f64::NEG_INFINITY, f64::max),
        Metric::Comp => {
            let scheme = inst.scheme();
            let mut best = f64::NEG_INFINITY;
            for f in 0..scheme.num_features() {
                for v in 0..scheme.values(f).len() {
                    let total: f64 = (0..inst.n())
                        .filter(|&i| inst.agents()[i].vector.value(f) == v)
                        .map(|i| after[i].unwrap_or(0.0) - truth[i])
                        .sum();
                    best = best.max(total);
                }
            }
            best
        }
        Metric::Fairness => after.iter().flatten().fold(f64::INFINITY, |a, &b| a.min(b)),
    }
}

fn better(metric: Metric, a: f64, b: f64) -> bool {
    match metric {
        Metric::Fairness => a < b,
        _ => a > b,
    }
}

/// Largest coalition allowed when no group may fall below `k`.
pub fn coalition_limit(inst: &Instance) -> usize {
    inst.stats().n_min.saturating_sub(inst.k() as usize)
}

fn multichoose(n: u128, r: u128) -> u128 {
    // C(n + r - 1, r)
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc.saturating_mul(n + i) / (i + 1);
    }
    acc
}

// every way to split `c` seats over groups of the given sizes
fn coalition_shapes(sizes: &[usize], c: usize) -> Vec<Vec<usize>> {
    fn rec(sizes: &[usize], left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == sizes.len() {
            if left == 0 {
                out.push(cur.clone());
            }
            return;
        }
        let g = cur.len();
        for take in 0..=left.min(sizes[g]) {
            cur.push(take);
            rec(sizes, left - take, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(sizes, c, &mut Vec::new(), &mut out);
    out
}

// non-decreasing index sequences of length r over 0..n
fn multisets(n: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(r);
    fn rec(n: usize, r: usize, from: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for x in from..n {
            cur.push(x);
            rec(n, r, x, cur, out);
            cur.pop();
        }
    }
    rec(n, r, 0, &mut cur, &mut out);
    out
}

/// Exact metric over all coalitions of size `c` and all reported vectors.
///
/// Agents of one truthful vector are interchangeable, so coalitions are taken as
/// seat counts per group (the lowest-index members) and the reports of one
/// group as a multiset.
pub fn manip_metric_exhaustive(
    inst: &Instance,
    c: usize,
    metric: Metric,
    cfg: &SolveConfig,
    strict: bool,
    budget: u128,
) -> Result<ManipReport> {
    if strict && c > coalition_limit(inst) {
        return Err(Error::RestrictionViolated {
            size: c,
            limit: coalition_limit(inst),
        });
    }
    let vectors = inst.scheme().all_vectors();
    let sizes: Vec<usize> = inst.groups().iter().map(|g| g.size()).collect();
    let shapes = coalition_shapes(&sizes, c);
    let needed: u128 = shapes
        .iter()
        .map(|s| {
            s.iter()
                .map(|&t| multichoose(vectors.len() as u128, t as u128))
                .fold(1u128, |a, b| a.saturating_mul(b))
        })
        .fold(0u128, |a, b| a.saturating_add(b));
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }

    let truth = truthful_probabilities(inst, cfg)?;
    let mut candidates: Vec<Misreport> = Vec::new();
    for shape in &shapes {
        let mut partial: Vec<Vec<(String, FeatureVector)>> = vec![Vec::new()];
        for (g, &t) in shape.iter().enumerate() {
            if t == 0 {
                continue;
            }
            let members = &inst.groups()[g].members[..t];
            let mut next = Vec::new();
            for prefix in &partial {
                for choice in multisets(vectors.len(), t) {
                    let mut r = prefix.clone();
                    for (&i, &w) in members.iter().zip(&choice) {
                        r.push((inst.agents()[i].id.clone(), vectors[w].clone()));
                    }
                    next.push(r);
                }
            }
            partial = next;
        }
        candidates.extend(partial.into_iter().map(|reports| Misreport { reports }));
    }

    let scored: Vec<Result<f64>> = candidates
        .par_iter()
        .map(|mis| {
            let after = manipulated(inst, mis, &truth, cfg)?;
            Ok(score(inst, metric, &mis.indices(inst)?, &truth, &after))
        })
        .collect();
    let mut best: Option<(f64, usize)> = None;
    for (j, s) in scored.into_iter().enumerate() {
        let s = s?;
        if best.map_or(true, |(b, _)| better(metric, s, b)) {
            best = Some((s, j));
        }
    }
    let (value, witness) = match best {
        Some((v, j)) => (v, candidates[j].clone()),
        None => (0.0, Misreport::default()),
    };
    // an empty coalition has no member to gain and no outsider it can hurt below 0
    let value = match metric {
        Metric::Fairness => value,
        _ => value.max(0.0),
    };
    Ok(ManipReport {
        metric,
        value,
        witness,
        algorithm: cfg.objective.to_string(),
        search: Search::Exhaustive,
        evaluations: candidates.len(),
    })
}

/// Per feature, the value with the largest quota midpoint relative to its pool
/// share; the first such value on ties.
pub fn mu_vector(inst: &Instance) -> Result<FeatureVector> {
    let scheme = inst.scheme();
    let mut counts: Vec<Vec<u64>> = (0..scheme.num_features())
        .map(|f| vec![0; scheme.values(f).len()])
        .collect();
    for a in inst.agents() {
        for (f, &v) in a.vector.0.iter().enumerate() {
            counts[f][v as usize] += 1;
        }
    }
    let mut out = Vec::with_capacity(scheme.num_features());
    for f in 0..scheme.num_features() {
        // ratio (l + u) / count, compared by cross-multiplication
        let mut best: Option<(usize, u64, u64)> = None;
        for v in 0..scheme.values(f).len() {
            let q = inst.quota(f, v);
            let n_v = counts[f][v];
            if n_v == 0 {
                if inst.is_constrained(f, v) {
                    return Err(Error::ZeroShare {
                        feature: scheme.features()[f].clone(),
                        value: scheme.values(f)[v].clone(),
                    });
                }
                continue;
            }
            let mid = (q.min + q.max) as u64;
            if best.map_or(true, |(_, bm, bn)| mid * bn > bm * n_v) {
                best = Some((v, mid, n_v));
            }
        }
        let (v, _, _) = best.ok_or_else(|| Error::Domain("feature with no agents".into()))?;
        out.push(v as u16);
    }
    Ok(FeatureVector(out))
}

/// Largest gain any single agent gets by reporting the MU vector alone.
pub fn worst_mu_manipulator(inst: &Instance, cfg: &SolveConfig) -> Result<ManipReport> {
    let target = mu_vector(inst)?;
    let truth = truthful_probabilities(inst, cfg)?;
    // one representative per truthful vector suffices by anonymity
    let reps: Vec<usize> = inst
        .groups()
        .iter()
        .filter(|g| g.vector != target)
        .map(|g| g.members[0])
        .collect();
    let gains: Vec<Result<f64>> = reps
        .par_iter()
        .map(|&i| {
            let mis = Misreport {
                reports: vec![(inst.agents()[i].id.clone(), target.clone())],
            };
            let after = manipulated(inst, &mis, &truth, cfg)?;
            Ok(after[i].unwrap_or(0.0) - truth[i])
        })
        .collect();
    let mut best = (0.0, Misreport::default());
    for (&i, g) in reps.iter().zip(gains) {
        let g = g?;
        if g > best.0 {
            best = (
                g,
                Misreport {
                    reports: vec![(inst.agents()[i].id.clone(), target.clone())],
                },
            );
        }
    }
    Ok(ManipReport {
        metric: Metric::Int,
        value: best.0,
        witness: best.1,
        algorithm: cfg.objective.to_string(),
        search: Search::Mu,
        evaluations: reps.len(),
    })
}

/// Per feature, the spread between its most and least over-demanded value
/// (quota midpoint over pool share). Values absent from the pool are skipped.
pub fn feature_bias(inst: &Instance) -> Vec<f64> {
    let s = inst.stats();
    (0..inst.scheme().num_features())
        .map(|f| {
            let ratios: Vec<f64> = s.shares[f]
                .iter()
                .enumerate()
                .filter(|(_, &phi)| phi > 0.0)
                .map(|(v, &phi)| {
                    let q = inst.quota(f, v);
                    (q.min + q.max) as f64 / 2.0 / phi
                })
                .collect();
            let hi = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
            if ratios.is_empty() {
                0.0
            } else {
                hi - lo
            }
        })
        .collect()
}

/// Features in dropping order: largest bias first, scheme order on ties.
pub fn drop_order(inst: &Instance) -> Vec<usize> {
    let bias = feature_bias(inst);
    let mut order: Vec<usize> = (0..bias.len()).collect();
    order.sort_by(|&a, &b| bias[b].total_cmp(&bias[a]));
    order
}

/// Relaxes the quotas of the `count` most biased features to `(0, k)`.
pub fn drop_features(inst: &Instance, count: usize) -> Result<Instance> {
    if count > inst.scheme().num_features() {
        return Err(Error::Domain(format!(
            "cannot drop {count} of {} features",
            inst.scheme().num_features()
        )));
    }
    let mut quotas = inst.quotas().to_vec();
    for &f in drop_order(inst).iter().take(count) {
        for q in &mut quotas[f] {
            *q = Quota { min: 0, max: inst.k() };
        }
    }
    inst.with_quotas(quotas)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LbKind {
    Example1,
    Example2,
    Thm31,
    Thm43,
}

impl FromStr for LbKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "").as_str() {
            "EXAMPLE1" => Ok(LbKind::Example1),
            "EXAMPLE2" => Ok(LbKind::Example2),
            "THM31" => Ok(LbKind::Thm31),
            "THM43" => Ok(LbKind::Thm43),
            _ => Err(Error::Domain(format!("unknown instance kind `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LbParams {
    pub n: usize,
    pub k: u32,
    pub n_min: usize,
    pub c: usize,
}

fn binary_scheme(names: &[&str], first: &str) -> Result<FeatureScheme> {
    let second = if first == "0" { "1" } else { "0" };
    FeatureScheme::new(
        names.iter().map(|s| s.to_string()).collect(),
        names
            .iter()
            .map(|_| vec![first.to_string(), second.to_string()])
            .collect(),
    )
}

fn exact(x: u32) -> Quota {
    Quota { min: x, max: x }
}

// agents a1.. in the order of `groups`, each `(vector, count)`
fn pool(groups: &[(Vec<u16>, usize)]) -> Vec<Agent> {
    let mut agents = Vec::new();
    for (w, count) in groups {
        for _ in 0..*count {
            agents.push(Agent {
                id: format!("a{}", agents.len() + 1),
                vector: FeatureVector(w.clone()),
            });
        }
    }
    agents
}

fn range_err(what: &str) -> Error {
    Error::Domain(format!("parameters out of range: {what}"))
}

/// Builds one of the constructed instances together with its coalition misreport.
pub fn make_lb_instance(kind: LbKind, p: LbParams) -> Result<(Instance, Misreport)> {
    let k = p.k;
    let ku = k as usize;
    match kind {
        LbKind::Example1 => {
            // one feature; exactly one seat for value 1, held by the n_min small group
            if ku < 2 || p.n_min < 1 || p.n_min + ku > p.n + 1 || p.c > p.n - p.n_min {
                return Err(range_err("need k >= 2, 1 <= n_min <= n-k+1, c <= n-n_min"));
            }
            let scheme = binary_scheme(&["f"], "1")?;
            let agents = pool(&[(vec![0], p.n_min), (vec![1], p.n - p.n_min)]);
            let inst = Instance::new(scheme, agents, k, vec![vec![exact(1), exact(k - 1)]])?;
            // value-0 agents join the small group
            let reports = inst.agents()[p.n_min..p.n_min + p.c]
                .iter()
                .map(|a| (a.id.clone(), FeatureVector(vec![0])))
                .collect();
            Ok((inst, Misreport { reports }))
        }
        LbKind::Example2 => {
            if p.n % 4 != 0 || p.n < 8 || ku % 2 != 0 || p.c > p.n / 2 - 1 {
                return Err(range_err("need n divisible by 4 and >= 8, even k, c <= n/2-1"));
            }
            let scheme = binary_scheme(&["f1", "f2"], "0")?;
            let agents = pool(&[
                (vec![0, 0], p.n / 4),
                (vec![0, 1], 1),
                (vec![1, 0], p.n / 2 - 1),
                (vec![1, 1], p.n / 4),
            ]);
            let half = exact(k / 2);
            let inst = Instance::new(scheme, agents, k, vec![vec![half, half], vec![half, half]])?;
            // 10 agents claiming the linked 01 vector
            let start = p.n / 4 + 1;
            let reports = inst.agents()[start..start + p.c]
                .iter()
                .map(|a| (a.id.clone(), FeatureVector(vec![0, 1])))
                .collect();
            Ok((inst, Misreport { reports }))
        }
        LbKind::Thm31 | LbKind::Thm43 => {
            let (min_c, slack) = if kind == LbKind::Thm31 { (3, 3) } else { (5, 5) };
            if ku % 2 != 0 || ku < 6 || ku + slack > p.n_min {
                return Err(range_err("need even k with 6 <= k <= n_min - slack"));
            }
            if p.c < min_c || p.c + ku > p.n_min {
                return Err(range_err("coalition size outside its range"));
            }
            if p.n <= p.n_min || (p.n - p.n_min) % 2 != 0 || (p.n - p.n_min) / 2 < ku / 2 - 1 {
                return Err(range_err("n - n_min must be even and leave room for k/2-1 seats"));
            }
            let scheme = binary_scheme(&["f1", "f2", "f3"], "0")?;
            let side = (p.n - p.n_min) / 2;
            let agents = pool(&[(vec![0, 0, 0], side), (vec![1, 1, 0], side), (vec![1, 1, 1], p.n_min)]);
            let balance = vec![exact(k / 2 - 1), exact(k / 2 + 1)];
            let quotas = vec![balance.clone(), balance, vec![exact(k - 2), exact(2)]];
            let inst = Instance::new(scheme, agents, k, quotas)?;
            let id = |i: usize| inst.agents()[i].id.clone();
            let v = |w: [u16; 3]| FeatureVector(w.to_vec());
            let first_111 = 2 * side;
            let mut reports = Vec::new();
            if kind == LbKind::Thm31 {
                reports.push((id(first_111), v([1, 1, 1])));
                reports.push((id(first_111 + 1), v([0, 1, 0])));
                for j in 2..p.c {
                    reports.push((id(first_111 + j), v([1, 0, 0])));
                }
            } else {
                reports.push((id(0), v([1, 1, 1])));
                reports.push((id(side), v([0, 1, 0])));
                reports.push((id(first_111), v([0, 0, 0])));
                reports.push((id(first_111 + 1), v([1, 1, 0])));
                for j in 2..p.c - 2 {
                    reports.push((id(first_111 + j), v([1, 0, 0])));
                }
            }
            Ok((inst, Misreport { reports }))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_instance;
    use crate::objectives::EqualityObjective;
    use crate::panels::enumerate_panels;
    use crate::solver::Backend;

    fn e1() -> Instance {
        parse_instance(
            "id,f\na,1\nb,1\nc,0\nd,0\ne,0\nf,0\n",
            "feature,value,min,max\nf,1,1,1\nf,0,2,2\n",
            3,
        )
        .unwrap()
    }

    fn maximin() -> SolveConfig {
        SolveConfig::new(Backend::Brute, EqualityObjective::maximin())
    }

    fn group_sizes(inst: &Instance) -> Vec<(String, usize)> {
        inst.groups()
            .iter()
            .map(|g| (inst.scheme().format_vector(&g.vector), g.size()))
            .collect()
    }

    #[test]
    fn e1_single_misreport_counts() {
        let inst = e1();
        let mis = Misreport {
            reports: vec![("c".into(), FeatureVector(vec![0]))],
        };
        let m = apply_misreport(&inst, &mis).unwrap();
        let counts = group_sizes(&m);
        assert_eq!(counts, vec![("1".to_string(), 3), ("0".to_string(), 3)]);
        assert_eq!(apply_misreport(&inst, &Misreport::default()).unwrap(), inst);
    }

    #[test]
    fn e1_exact_metrics() {
        let inst = e1();
        let cfg = maximin();
        let run = |m| manip_metric_exhaustive(&inst, 1, m, &cfg, false, DEFAULT_BUDGET).unwrap();
        assert!(run(Metric::Int).value.abs() < 1e-9);
        assert!((run(Metric::Ext).value - 1.0 / 6.0).abs() < 1e-6);
        let comp = run(Metric::Comp);
        assert!((comp.value - 0.4).abs() < 1e-6);
        assert_eq!(comp.witness.coalition(), vec!["a"]);
        // one coalition per group, two reports each
        assert_eq!(comp.evaluations, 4);
    }

    #[test]
    fn empty_coalition() {
        let inst = e1();
        let cfg = maximin();
        for m in [Metric::Int, Metric::Ext, Metric::Comp] {
            assert_eq!(manip_metric_exhaustive(&inst, 0, m, &cfg, false, DEFAULT_BUDGET).unwrap().value, 0.0);
        }
        let f = manip_metric_exhaustive(&inst, 0, Metric::Fairness, &cfg, false, DEFAULT_BUDGET).unwrap();
        assert!((f.value - fairness(&inst, &cfg).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn restriction_and_budget() {
        let inst = e1();
        let cfg = maximin();
        assert!(matches!(
            manip_metric_exhaustive(&inst, 1, Metric::Int, &cfg, true, DEFAULT_BUDGET),
            Err(Error::RestrictionViolated { size: 1, limit: 0 })
        ));
        assert!(matches!(
            manip_metric_exhaustive(&inst, 2, Metric::Int, &cfg, false, 3),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn mu_on_e1_and_gender() {
        assert_eq!(mu_vector(&e1()).unwrap(), FeatureVector(vec![0]));
        // 7 m and 3 w, both with midpoint 5
        let agents: String = (0..10)
            .map(|i| format!("p{i},{}\n", if i < 7 { "m" } else { "w" }))
            .collect();
        let inst = parse_instance(
            &format!("id,gender\n{agents}"),
            "feature,value,min,max\ngender,m,4,6\ngender,w,4,6\n",
            10,
        )
        .unwrap();
        let w = inst.scheme().value_index(0, "w").unwrap() as u16;
        assert_eq!(mu_vector(&inst).unwrap(), FeatureVector(vec![w]));
    }

    #[test]
    fn mu_manipulation_on_e1_is_useless() {
        let inst = e1();
        let r = worst_mu_manipulator(&inst, &maximin()).unwrap();
        assert_eq!(r.value, 0.0);
        let big = crate::model::duplicate_pool(&inst, 2).unwrap();
        assert_eq!(worst_mu_manipulator(&big, &maximin()).unwrap().value, 0.0);
    }

    #[test]
    fn fairness_zero_under_exclusion() {
        let inst = parse_instance(
            "id,f,g\na,0,0\nb,1,0\nc,1,1\n",
            "feature,value,min,max\nf,0,1,1\nf,1,1,1\ng,0,2,2\ng,1,0,0\n",
            2,
        )
        .unwrap();
        let cfg = maximin();
        assert_eq!(fairness(&inst, &cfg).unwrap(), 0.0);
        let r = manip_metric_exhaustive(&inst, 1, Metric::Fairness, &cfg, false, DEFAULT_BUDGET).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn dropping_features() {
        // f: ratios 16.67 vs 7.14; g: 2 vs 2
        let mut rows = String::from("id,f,g\n");
        for i in 0..10 {
            rows.push_str(&format!("p{i},{},{}\n", if i < 7 { "m" } else { "w" }, i % 2));
        }
        let inst = parse_instance(
            &rows,
            "feature,value,min,max\nf,m,4,6\nf,w,4,6\ng,0,4,6\ng,1,4,6\n",
            10,
        )
        .unwrap();
        let bias = feature_bias(&inst);
        assert!((bias[0] - (5.0 / 0.3 - 5.0 / 0.7)).abs() < 1e-9);
        assert!(bias[1].abs() < 1e-12);
        assert_eq!(drop_order(&inst), vec![0, 1]);
        let d = drop_features(&inst, 1).unwrap();
        assert_eq!(d.quota(0, 0), Quota { min: 0, max: 10 });
        assert_eq!(d.quota(1, 0), inst.quota(1, 0));
        assert_eq!(drop_features(&inst, 0).unwrap(), inst);
    }

    #[test]
    fn drop_grows_panel_set() {
        let e2 = make_lb_instance(LbKind::Example2, LbParams { n: 8, k: 4, n_min: 1, c: 0 }).unwrap().0;
        let mut last = enumerate_panels(&e2, 10_000).unwrap().len();
        for d in 1..=2 {
            let now = enumerate_panels(&drop_features(&e2, d).unwrap(), 10_000).unwrap().len();
            assert!(now >= last);
            last = now;
        }
        assert_eq!(last, 70);
    }

    #[test]
    fn thm31_composition() {
        let (inst, mis) = make_lb_instance(LbKind::Thm31, LbParams { n: 40, k: 6, n_min: 12, c: 6 }).unwrap();
        assert_eq!(mis.len(), 6);
        let m = apply_misreport(&inst, &mis).unwrap();
        let mut counts = group_sizes(&m);
        counts.sort();
        let expect: Vec<(String, usize)> = [("0|0|0", 14), ("0|1|0", 1), ("1|0|0", 4), ("1|1|0", 14), ("1|1|1", 7)]
            .iter()
            .map(|(w, c)| (w.to_string(), *c))
            .collect();
        assert_eq!(counts, expect);
    }

    #[test]
    fn thm43_composition() {
        let (inst, mis) = make_lb_instance(LbKind::Thm43, LbParams { n: 72, k: 6, n_min: 12, c: 6 }).unwrap();
        assert_eq!(inst.stats().n_min, 12);
        let m = apply_misreport(&inst, &mis).unwrap();
        let mut counts = group_sizes(&m);
        counts.sort();
        let expect: Vec<(String, usize)> = [("0|0|0", 30), ("0|1|0", 1), ("1|0|0", 2), ("1|1|0", 30), ("1|1|1", 9)]
            .iter()
            .map(|(w, c)| (w.to_string(), *c))
            .collect();
        assert_eq!(counts, expect);
    }

    #[test]
    fn example2_is_e2() {
        let (inst, mis) = make_lb_instance(LbKind::Example2, LbParams { n: 8, k: 4, n_min: 1, c: 0 }).unwrap();
        assert!(mis.is_empty());
        let sizes: Vec<usize> = inst.groups().iter().map(|g| g.size()).collect();
        assert_eq!(sizes, vec![2, 1, 3, 2]);
    }

    #[test]
    fn bad_parameters() {
        assert!(make_lb_instance(LbKind::Thm31, LbParams { n: 40, k: 5, n_min: 12, c: 6 }).is_err());
        assert!(make_lb_instance(LbKind::Thm43, LbParams { n: 72, k: 6, n_min: 12, c: 7 }).is_err());
        assert!(make_lb_instance(LbKind::Example2, LbParams { n: 10, k: 4, n_min: 1, c: 0 }).is_err());
    }
}
