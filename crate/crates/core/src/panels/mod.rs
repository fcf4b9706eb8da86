//! Valid panels, distributions over them, and the composition machinery that
//! makes them tractable.

mod search;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Instance;

pub(crate) use search::CompositionSearch;

pub const DEFAULT_PANEL_CAP: usize = 1_000_000;
const PROB_TOL: f64 = 1e-9;

/// A set of agents, stored as sorted agent indices of the owning instance.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Panel(Vec<usize>);

impl Panel {
    pub fn new(mut members: Vec<usize>) -> Self {
        members.sort_unstable();
        members.dedup();
        Panel(members)
    }

    pub fn members(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, agent: usize) -> bool {
        self.0.binary_search(&agent).is_ok()
    }

    pub fn ids<'a>(&self, inst: &'a Instance) -> Vec<&'a str> {
        let mut ids: Vec<&str> = self.0.iter().map(|&i| inst.agents()[i].id.as_str()).collect();
        ids.sort_unstable();
        ids
    }

    pub fn composition(&self, inst: &Instance) -> PanelComposition {
        let mut counts = vec![0; inst.groups().len()];
        for &i in &self.0 {
            counts[inst.group_of(i)] += 1;
        }
        PanelComposition(counts)
    }

    pub fn is_valid(&self, inst: &Instance) -> bool {
        self.0.len() == inst.k() as usize
            && self.0.iter().all(|&i| i < inst.n())
            && self.composition(inst).is_valid(inst)
    }
}

/// Seats per vector group, indexed like [`Instance::groups`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PanelComposition(pub Vec<u32>);

impl PanelComposition {
    pub fn counts(&self) -> &[u32] {
        &self.0
    }

    pub fn is_valid(&self, inst: &Instance) -> bool {
        if self.0.len() != inst.groups().len() {
            return false;
        }
        if self.0.iter().sum::<u32>() != inst.k() {
            return false;
        }
        let scheme = inst.scheme();
        let mut taken: Vec<Vec<u32>> = (0..scheme.num_features())
            .map(|f| vec![0; scheme.values(f).len()])
            .collect();
        for (g, &c) in self.0.iter().enumerate() {
            let group = &inst.groups()[g];
            if c as usize > group.size() {
                return false;
            }
            for (f, &v) in group.vector.0.iter().enumerate() {
                taken[f][v as usize] += c;
            }
        }
        taken.iter().enumerate().all(|(f, row)| {
            row.iter().enumerate().all(|(v, &t)| {
                let q = inst.quota(f, v);
                q.min <= t && t <= q.max
            })
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PanelDistribution {
    support: Vec<(Panel, f64)>,
}

impl PanelDistribution {
    /// Merges repeated panels, drops zero entries and checks the total is 1.
    pub fn new(entries: impl IntoIterator<Item = (Panel, f64)>) -> Result<Self> {
        let mut merged: BTreeMap<Panel, f64> = BTreeMap::new();
        for (p, q) in entries {
            if !(q >= -PROB_TOL) || !q.is_finite() {
                return Err(Error::InvalidDistribution(format!("probability {q}")));
            }
            *merged.entry(p).or_default() += q.max(0.0);
        }
        let support: Vec<(Panel, f64)> = merged.into_iter().filter(|(_, q)| *q > 0.0).collect();
        let total: f64 = support.iter().map(|(_, q)| q).sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}"
            )));
        }
        Ok(Self { support })
    }

    pub fn point(panel: Panel) -> Self {
        Self {
            support: vec![(panel, 1.0)],
        }
    }

    pub fn support(&self) -> &[(Panel, f64)] {
        &self.support
    }

    pub fn validate(&self, inst: &Instance) -> Result<()> {
        for (p, _) in &self.support {
            if !p.is_valid(inst) {
                return Err(Error::InvalidPanel(p.ids(inst).join(",")));
            }
        }
        Ok(())
    }

    pub fn to_doc(&self, inst: &Instance) -> DistributionDoc {
        DistributionDoc {
            panels: self
                .support
                .iter()
                .map(|(p, q)| PanelDoc {
                    members: p.ids(inst).into_iter().map(String::from).collect(),
                    prob: *q,
                })
                .collect(),
        }
    }

    pub fn from_doc(inst: &Instance, doc: &DistributionDoc) -> Result<Self> {
        let mut entries = Vec::with_capacity(doc.panels.len());
        for p in &doc.panels {
            let members = p
                .members
                .iter()
                .map(|id| {
                    inst.agent_index(id)
                        .ok_or_else(|| Error::InvalidPanel(format!("unknown agent `{id}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            entries.push((Panel::new(members), p.prob));
        }
        let dist = Self::new(entries)?;
        dist.validate(inst)?;
        Ok(dist)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PanelDoc {
    pub members: Vec<String>,
    pub prob: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DistributionDoc {
    pub panels: Vec<PanelDoc>,
}

/// Selection probability per agent, indexed like [`Instance::agents`].
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityAssignment(pub Vec<f64>);

impl ProbabilityAssignment {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Mean probability of each vector group.
    pub fn group_probs(&self, inst: &Instance) -> Vec<f64> {
        inst.groups()
            .iter()
            .map(|g| g.members.iter().map(|&i| self.0[i]).sum::<f64>() / g.size() as f64)
            .collect()
    }

    /// Largest within-group spread of probabilities.
    pub fn anonymity_gap(&self, inst: &Instance) -> f64 {
        inst.groups()
            .iter()
            .map(|g| {
                let (lo, hi) = g.members.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |acc, &i| {
                    (acc.0.min(self.0[i]), acc.1.max(self.0[i]))
                });
                hi - lo
            })
            .fold(0.0, f64::max)
    }

    /// Group probability for vector `w` given as label text, if present in the pool.
    pub fn prob_of_vector(&self, inst: &Instance, w: &str) -> Option<f64> {
        let w = inst.scheme().parse_vector(w).ok()?;
        let g = inst.group_index(&w)?;
        Some(self.group_probs(inst)[g])
    }
}

pub fn marginals(inst: &Instance, dist: &PanelDistribution) -> Result<ProbabilityAssignment> {
    dist.validate(inst)?;
    let mut pi = vec![0.0; inst.n()];
    for (p, q) in dist.support() {
        for &i in p.members() {
            pi[i] += q;
        }
    }
    Ok(ProbabilityAssignment(pi))
}

/// All valid compositions in lexicographic order.
pub fn enumerate_compositions(inst: &Instance, cap: usize) -> Result<Vec<PanelComposition>> {
    let mut out = Vec::new();
    let mut overflow = false;
    CompositionSearch::new(inst).for_each(|c| {
        if out.len() == cap {
            overflow = true;
            return false;
        }
        out.push(PanelComposition(c.to_vec()));
        true
    });
    if overflow {
        return Err(Error::CapExceeded(cap));
    }
    Ok(out)
}

/// Every valid panel exactly once: compositions in lexicographic order, each
/// expanded to its agent subsets in lexicographic order of member indices.
pub fn enumerate_panels(inst: &Instance, cap: usize) -> Result<Vec<Panel>> {
    let mut out: Vec<Panel> = Vec::new();
    let mut overflow = false;
    CompositionSearch::new(inst).for_each(|counts| {
        let mut picks: Vec<Vec<Vec<usize>>> = Vec::with_capacity(counts.len());
        for (g, &c) in counts.iter().enumerate() {
            picks.push(subsets(&inst.groups()[g].members, c as usize));
        }
        let mut idx = vec![0usize; picks.len()];
        loop {
            if out.len() == cap {
                overflow = true;
                return false;
            }
            let members = idx
                .iter()
                .enumerate()
                .flat_map(|(g, &j)| picks[g][j].iter().copied())
                .collect();
            out.push(Panel::new(members));
            // odometer over the per-group subset choices
            let mut g = picks.len();
            loop {
                if g == 0 {
                    return true;
                }
                g -= 1;
                idx[g] += 1;
                if idx[g] < picks[g].len() {
                    break;
                }
                idx[g] = 0;
            }
        }
    });
    if overflow {
        return Err(Error::CapExceeded(cap));
    }
    Ok(out)
}

fn subsets(items: &[usize], r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(r);
    fn rec(items: &[usize], r: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for i in start..=items.len() - (r - cur.len()) {
            cur.push(items[i]);
            rec(items, r, i + 1, cur, out);
            cur.pop();
        }
    }
    rec(items, r, 0, &mut cur, &mut out);
    out
}

/// Valid composition maximizing `sum_g seat_weight[g] * c_g`, lexicographically smallest on ties.
pub fn best_composition(inst: &Instance, seat_weight: &[f64]) -> Option<(PanelComposition, f64)> {
    let gains: Vec<Vec<f64>> = inst
        .groups()
        .iter()
        .zip(seat_weight)
        .map(|(g, &w)| vec![w; g.size().min(inst.k() as usize)])
        .collect();
    CompositionSearch::new(inst)
        .best(&gains)
        .map(|(c, v)| (PanelComposition(c), v))
}

/// Valid panel of maximum total weight, or `None` when no valid panel exists.
///
/// Ties go to the lexicographically smallest composition, then to agents with the
/// smallest ids.
pub fn panel_oracle(inst: &Instance, weights: &[f64]) -> Option<(Panel, f64)> {
    assert_eq!(weights.len(), inst.n(), "one weight per agent");
    let ranked: Vec<Vec<usize>> = inst
        .groups()
        .iter()
        .map(|g| {
            let mut m = g.members.clone();
            m.sort_by(|&a, &b| {
                weights[b]
                    .total_cmp(&weights[a])
                    .then_with(|| inst.agents()[a].id.cmp(&inst.agents()[b].id))
            });
            m
        })
        .collect();
    let gains: Vec<Vec<f64>> = ranked
        .iter()
        .map(|m| m.iter().take(inst.k() as usize).map(|&i| weights[i]).collect())
        .collect();
    let (counts, _) = CompositionSearch::new(inst).best(&gains)?;
    let members: Vec<usize> = counts
        .iter()
        .zip(&ranked)
        .flat_map(|(&c, m)| m[..c as usize].iter().copied())
        .collect();
    let total = members.iter().map(|&i| weights[i]).sum();
    Some((Panel::new(members), total))
}

/// Agents that sit on no valid panel. Agents of one group share their status, so
/// one forced-inclusion query per group suffices.
pub fn structurally_excluded(inst: &Instance) -> Vec<usize> {
    let mut out = Vec::new();
    for (g, group) in inst.groups().iter().enumerate() {
        if !CompositionSearch::new(inst).require(g, 1).any() {
            out.extend(&group.members);
        }
    }
    out.sort_unstable();
    out
}

/// Excluded agents split by coalition membership.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Exclusions {
    pub coalition: Vec<usize>,
    pub others: Vec<usize>,
}

pub fn classify_exclusions(inst: &Instance, coalition: &[usize]) -> Exclusions {
    let mut ex = Exclusions::default();
    for i in structurally_excluded(inst) {
        if coalition.contains(&i) {
            ex.coalition.push(i);
        } else {
            ex.others.push(i);
        }
    }
    ex
}

/// Removes the agents listed (by index) and returns the smaller instance.
pub fn remove_agents(inst: &Instance, drop: &[usize]) -> Result<Instance> {
    let agents = inst
        .agents()
        .iter()
        .enumerate()
        .filter(|(i, _)| !drop.contains(i))
        .map(|(_, a)| a.clone())
        .collect();
    inst.with_agents(agents)
}

/// Drops coalition members whose reported vector fits no valid panel.
///
/// Returns the reduced instance with the ids removed. A truthful agent losing
/// every panel is an error.
pub fn strip_self_excluders(inst: &Instance, coalition: &[usize]) -> Result<(Instance, Vec<String>)> {
    let ex = classify_exclusions(inst, coalition);
    if !ex.others.is_empty() {
        return Err(Error::NoncoalitionExclusion(
            ex.others.iter().map(|&i| inst.agents()[i].id.clone()).collect(),
        ));
    }
    if ex.coalition.is_empty() {
        return Ok((inst.clone(), Vec::new()));
    }
    let removed = ex.coalition.iter().map(|&i| inst.agents()[i].id.clone()).collect();
    Ok((remove_agents(inst, &ex.coalition)?, removed))
}

fn gcd(a: u128, b: u128) -> u128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Turns a distribution over compositions into one over panels whose marginals
/// are exactly `t_w / n_w` for every member of group `w`.
///
/// Each composition is spread over `L` panels, `L` the least common multiple of
/// `n_w / gcd(n_w, c_w)`; panel `j` seats members `(j c_w + s) mod n_w` of group `w`.
pub fn expand_composition_distribution(
    inst: &Instance,
    comps: &[(PanelComposition, f64)],
    cap: usize,
) -> Result<PanelDistribution> {
    let mut entries: Vec<(Panel, f64)> = Vec::new();
    for (comp, q) in comps {
        if !comp.is_valid(inst) {
            return Err(Error::InvalidPanel(format!(
                "composition {:?} is not valid",
                comp.counts()
            )));
        }
        let mut period: u128 = 1;
        for (g, &c) in comp.counts().iter().enumerate() {
            let n_w = inst.groups()[g].size() as u128;
            let cycle = n_w / gcd(n_w, c as u128);
            period = period / gcd(period, cycle) * cycle;
            if period > cap as u128 {
                return Err(Error::ExpansionTooLarge(period));
            }
        }
        let share = q / period as f64;
        for j in 0..period as usize {
            let mut members = Vec::with_capacity(inst.k() as usize);
            for (g, &c) in comp.counts().iter().enumerate() {
                let m = &inst.groups()[g].members;
                for s in 0..c as usize {
                    members.push(m[(j * c as usize + s) % m.len()]);
                }
            }
            entries.push((Panel::new(members), share));
        }
        if entries.len() > cap {
            return Err(Error::ExpansionTooLarge(entries.len() as u128));
        }
    }
    PanelDistribution::new(entries)
}
