//! Column management shared by every objective.
//!
//! The BRUTE backend loads every valid panel up front with one unit per agent.
//! COLGEN works with one unit per vector group and compositions as columns,
//! adding the best-pricing composition until no column beats the current
//! support by more than `eps_colgen`.

use std::collections::{BTreeMap, HashSet};

use super::master::{self, Column, MasterSolution, MasterSpec};
use super::nash::{self, NashSolution};
use super::{Backend, SolveConfig};
use crate::error::{Error, Result};
use crate::model::Instance;
use crate::panels::{
    self, expand_composition_distribution, Panel, PanelComposition, PanelDistribution,
};

const SUPPORT_TOL: f64 = 1e-12;

pub(crate) struct Engine<'a> {
    pub inst: &'a Instance,
    cfg: &'a SolveConfig,
    /// Agents represented by each unit.
    pub mult: Vec<f64>,
    pub columns: Vec<Column>,
    panels: Vec<Panel>,
    comps: Vec<PanelComposition>,
    seen: HashSet<Vec<u32>>,
    pub iterations: usize,
    pub converged: bool,
    /// Largest pricing gap left at the end of the most recent solve.
    pub gap: f64,
}

impl<'a> Engine<'a> {
    pub fn new(inst: &'a Instance, cfg: &'a SolveConfig) -> Result<Self> {
        let mut engine = Self {
            inst,
            cfg,
            mult: Vec::new(),
            columns: Vec::new(),
            panels: Vec::new(),
            comps: Vec::new(),
            seen: HashSet::new(),
            iterations: 0,
            converged: true,
            gap: 0.0,
        };
        match cfg.backend {
            Backend::Brute => {
                engine.mult = vec![1.0; inst.n()];
                for p in panels::enumerate_panels(inst, cfg.panel_cap)? {
                    engine
                        .columns
                        .push(Column(p.members().iter().map(|&i| (i, 1.0)).collect()));
                    engine.panels.push(p);
                }
                if engine.columns.is_empty() {
                    return Err(Error::NoValidPanel);
                }
            }
            Backend::Colgen => {
                engine.mult = inst.groups().iter().map(|g| g.size() as f64).collect();
                // seed with, for each group, a composition giving it as many seats as possible
                for g in 0..inst.groups().len() {
                    let mut w = vec![0.0; inst.groups().len()];
                    w[g] = 1.0;
                    if let Some((c, _)) = panels::best_composition(inst, &w) {
                        engine.add_comp(c);
                    }
                }
                if engine.columns.is_empty() {
                    return Err(Error::NoValidPanel);
                }
            }
        }
        Ok(engine)
    }

    pub fn units(&self) -> usize {
        self.mult.len()
    }

    fn add_comp(&mut self, c: PanelComposition) -> bool {
        if !self.seen.insert(c.0.clone()) {
            return false;
        }
        let col = c
            .0
            .iter()
            .enumerate()
            .filter(|(_, &s)| s > 0)
            .map(|(g, &s)| (g, s as f64 / self.mult[g]))
            .collect();
        self.columns.push(Column(col));
        self.comps.push(c);
        true
    }

    fn over_budget(&mut self) -> bool {
        if self.columns.len() >= self.cfg.max_columns {
            self.converged = false;
            true
        } else {
            false
        }
    }

    // Best composition for per-seat weights; returns it with its score.
    fn price(&self, seat_weight: &[f64]) -> Option<(PanelComposition, f64)> {
        panels::best_composition(self.inst, seat_weight)
    }

    /// Solves a linear master to column-generation convergence.
    pub fn lp(&mut self, spec: &MasterSpec) -> Result<MasterSolution> {
        loop {
            let sol = master::solve(self.units(), &self.columns, spec)
                .map_err(|e| Error::Numerical(e.to_string()))?;
            if self.cfg.backend == Backend::Brute {
                self.gap = 0.0;
                return Ok(sol);
            }
            let threshold = self
                .columns
                .iter()
                .zip(&sol.q)
                .filter(|(_, &q)| q > SUPPORT_TOL)
                .map(|(c, _)| c.score(&sol.eta))
                .fold(f64::NEG_INFINITY, f64::max);
            let seat: Vec<f64> = sol.eta.iter().zip(&self.mult).map(|(e, m)| e / m).collect();
            let Some((comp, score)) = self.price(&seat) else {
                return Err(Error::NoValidPanel);
            };
            self.gap = (score - threshold).max(0.0);
            if self.gap <= self.cfg.eps_colgen || self.over_budget() {
                return Ok(sol);
            }
            if !self.add_comp(comp) {
                // the best column is already present: numerically converged
                return Ok(sol);
            }
            self.iterations += 1;
        }
    }

    /// Maximum Nash welfare, column generation on the gradient.
    pub fn nash(&mut self) -> Result<NashSolution> {
        let k = self.inst.k() as f64;
        let n = self.inst.n() as f64;
        loop {
            let sol = nash::solve(&self.mult, &self.columns)
                .ok_or_else(|| Error::Numerical("no strictly positive Nash start".into()))?;
            if self.cfg.backend == Backend::Brute {
                self.gap = 0.0;
                return Ok(sol);
            }
            // gradient of the welfare in k-scaled units; every support column sits at k
            let seat: Vec<f64> = sol.p.iter().map(|p| (k / n) / p).collect();
            let Some((comp, score)) = self.price(&seat) else {
                return Err(Error::NoValidPanel);
            };
            self.gap = (score - k).max(0.0);
            if self.gap <= self.cfg.eps_colgen || self.over_budget() {
                return Ok(sol);
            }
            if !self.add_comp(comp) {
                return Ok(sol);
            }
            self.iterations += 1;
        }
    }

    pub fn unit_probs(&self, q: &[f64]) -> Vec<f64> {
        master::unit_probs(self.units(), &self.columns, q)
    }

    /// Panel distribution for column weights `q`, symmetrized within vector groups.
    pub fn distribution(&self, q: &[f64]) -> Result<PanelDistribution> {
        let mut by_comp: BTreeMap<PanelComposition, f64> = BTreeMap::new();
        for (j, &w) in q.iter().enumerate() {
            if w <= SUPPORT_TOL {
                continue;
            }
            let comp = match self.cfg.backend {
                Backend::Brute => self.panels[j].composition(self.inst),
                Backend::Colgen => self.comps[j].clone(),
            };
            *by_comp.entry(comp).or_default() += w;
        }
        let total: f64 = by_comp.values().sum();
        let comps: Vec<(PanelComposition, f64)> =
            by_comp.into_iter().map(|(c, w)| (c, w / total)).collect();
        expand_composition_distribution(self.inst, &comps, self.cfg.panel_cap)
    }
}
