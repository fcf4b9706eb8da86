//! Greedy quota-chasing baseline.
//!
//! Each step finds the feature value whose unmet lower quota is largest relative
//! to the agents still available with it, then seats a uniformly random such
//! agent. Agents whose value hits an upper quota leave the pool. A dead end
//! restarts the draw with a fresh seed derived from the master seed.

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::Instance;
use crate::panels::Panel;

pub const RESTART_LIMIT: usize = 10_000;

pub fn solve_legacy(inst: &Instance, seed: u64) -> Result<Panel> {
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..RESTART_LIMIT {
        let mut rng = ChaCha8Rng::seed_from_u64(master.next_u64());
        if let Some(panel) = attempt(inst, &mut rng) {
            return Ok(panel);
        }
    }
    Err(Error::RestartLimit(RESTART_LIMIT))
}

/// The feature value to fill next, or `None` when no agent is left.
pub(crate) fn most_desperate(inst: &Instance, taken: &[Vec<u32>], pool: &[usize]) -> Option<(usize, usize)> {
    let scheme = inst.scheme();
    let mut best: Option<((usize, usize), f64)> = None;
    for f in 0..scheme.num_features() {
        for v in 0..scheme.values(f).len() {
            let left = pool
                .iter()
                .filter(|&&i| inst.agents()[i].vector.value(f) == v)
                .count();
            if left == 0 {
                continue;
            }
            let need = inst.quota(f, v).min as f64 - taken[f][v] as f64;
            let ratio = need / left as f64;
            if best.map_or(true, |(_, r)| ratio > r) {
                best = Some(((f, v), ratio));
            }
        }
    }
    best.map(|(fv, _)| fv)
}

/// Agents still eligible: not seated and no value at its upper quota.
pub(crate) fn eligible(inst: &Instance, taken: &[Vec<u32>], seated: &[usize]) -> Vec<usize> {
    (0..inst.n())
        .filter(|i| !seated.contains(i))
        .filter(|&i| {
            inst.agents()[i]
                .vector
                .0
                .iter()
                .enumerate()
                .all(|(f, &v)| taken[f][v as usize] < inst.quota(f, v as usize).max)
        })
        .collect()
}

fn attempt(inst: &Instance, rng: &mut ChaCha8Rng) -> Option<Panel> {
    let scheme = inst.scheme();
    let mut taken: Vec<Vec<u32>> = (0..scheme.num_features())
        .map(|f| vec![0; scheme.values(f).len()])
        .collect();
    let mut seated = Vec::with_capacity(inst.k() as usize);
    for _ in 0..inst.k() {
        let pool = eligible(inst, &taken, &seated);
        let (f, v) = most_desperate(inst, &taken, &pool)?;
        let choices: Vec<usize> = pool
            .into_iter()
            .filter(|&i| inst.agents()[i].vector.value(f) == v)
            .collect();
        let &pick = choices.choose(rng)?;
        for (g, &w) in inst.agents()[pick].vector.0.iter().enumerate() {
            taken[g][w as usize] += 1;
        }
        seated.push(pick);
    }
    let panel = Panel::new(seated);
    panel.is_valid(inst).then_some(panel)
}
