//! Rounding a panel distribution to an m-ticket uniform lottery.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Instance;
use crate::panels::{Panel, PanelDistribution, ProbabilityAssignment};

pub const DEFAULT_M: usize = 1000;

const FRAC_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct UniformLottery {
    pub m: usize,
    pub tickets: Vec<Panel>,
}

impl UniformLottery {
    pub fn validate(&self, inst: &Instance) -> Result<()> {
        if self.tickets.len() != self.m {
            return Err(Error::InvalidDistribution(format!(
                "{} tickets for m = {}",
                self.tickets.len(),
                self.m
            )));
        }
        if let Some(p) = self.tickets.iter().find(|p| !p.is_valid(inst)) {
            return Err(Error::InvalidPanel(p.ids(inst).join(",")));
        }
        Ok(())
    }

    /// Distinct panels with their ticket counts, in first-ticket order.
    pub fn counts(&self) -> Vec<(Panel, usize)> {
        let mut out: Vec<(Panel, usize)> = Vec::new();
        for t in &self.tickets {
            match out.iter_mut().find(|(p, _)| p == t) {
                Some((_, c)) => *c += 1,
                None => out.push((t.clone(), 1)),
            }
        }
        out
    }
}

fn frac(x: f64) -> f64 {
    x - x.floor()
}

fn is_fractional(x: f64) -> bool {
    let f = frac(x);
    f > FRAC_TOL && f < 1.0 - FRAC_TOL
}

/// Pipage rounding of `m * d`, pairing the two lowest-index fractional entries.
pub fn pipage_round(dist: &PanelDistribution, m: usize, seed: u64) -> Result<UniformLottery> {
    if m < 1 {
        return Err(Error::Domain("m must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let support = dist.support();
    let mut x: Vec<f64> = support.iter().map(|(_, d)| d * m as f64).collect();
    loop {
        let mut open = (0..x.len()).filter(|&i| is_fractional(x[i]));
        let (Some(i), Some(j)) = (open.next(), open.next()) else {
            break;
        };
        let (fi, fj) = (frac(x[i]), frac(x[j]));
        // raise i / lower j by a, or lower i / raise j by b
        let a = (1.0 - fi).min(fj);
        let b = fi.min(1.0 - fj);
        if rng.gen::<f64>() < b / (a + b) {
            x[i] += a;
            x[j] -= a;
        } else {
            x[i] -= b;
            x[j] += b;
        }
        for v in [i, j] {
            if !is_fractional(x[v]) {
                x[v] = x[v].round();
            }
        }
    }
    let mut counts: Vec<usize> = x.iter().map(|v| v.round().max(0.0) as usize).collect();
    // a lone leftover fraction can only come from float drift in the input
    let total: usize = counts.iter().sum();
    if total != m {
        let big = (0..counts.len()).max_by_key(|&i| counts[i]).unwrap_or(0);
        counts[big] = (counts[big] + m)
            .checked_sub(total)
            .ok_or_else(|| Error::InvalidDistribution("probabilities do not sum to 1".into()))?;
    }
    let tickets = support
        .iter()
        .zip(&counts)
        .flat_map(|((p, _), &c)| std::iter::repeat(p.clone()).take(c))
        .collect();
    Ok(UniformLottery { m, tickets })
}

/// `(k/m, discrepancy bound)` on the worst-case deviation of an m-uniform rounding.
pub fn rounding_bounds(k: u32, w_count: usize, m: usize) -> Result<(f64, f64)> {
    if w_count < 2 || m < 1 {
        return Err(Error::Domain("need at least two vectors and m >= 1".into()));
    }
    let w = w_count as f64;
    let lw = w.ln();
    let b2 = ((0.5 * (1.0 + 2f64.ln() / lw)).sqrt() * (w * lw).sqrt() + 1.0) / m as f64;
    Ok((k as f64 / m as f64, b2))
}

pub fn lottery_marginals(inst: &Instance, lottery: &UniformLottery) -> ProbabilityAssignment {
    let mut hits = vec![0usize; inst.n()];
    for t in &lottery.tickets {
        for &i in t.members() {
            hits[i] += 1;
        }
    }
    ProbabilityAssignment(hits.into_iter().map(|h| h as f64 / lottery.m as f64).collect())
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct LotteryMeta {
    pub m: usize,
    pub instance_hash: String,
    pub seed: u64,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// `ticket<TAB>ids` lines, tickets numbered from 1.
pub fn format_lottery(inst: &Instance, lottery: &UniformLottery) -> String {
    let mut out = String::new();
    for (t, p) in lottery.tickets.iter().enumerate() {
        out.push_str(&format!("{}\t{}\n", t + 1, p.ids(inst).join(",")));
    }
    out
}

pub fn write_lottery(inst: &Instance, lottery: &UniformLottery, seed: u64, path: &Path) -> Result<()> {
    fs::write(path, format_lottery(inst, lottery))?;
    let meta = LotteryMeta {
        m: lottery.m,
        instance_hash: inst.hash(),
        seed,
    };
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

pub fn read_lottery(inst: &Instance, path: &Path) -> Result<(UniformLottery, LotteryMeta)> {
    let meta: LotteryMeta = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)?;
    if meta.instance_hash != inst.hash() {
        return Err(Error::Malformed("lottery was drawn for a different instance".into()));
    }
    let mut tickets = Vec::new();
    for line in fs::read_to_string(path)?.lines().filter(|l| !l.trim().is_empty()) {
        let (_, ids) = line
            .split_once('\t')
            .ok_or_else(|| Error::Malformed(format!("ticket line `{line}`")))?;
        let members = ids
            .split(',')
            .map(|id| {
                inst.agent_index(id)
                    .ok_or_else(|| Error::Malformed(format!("unknown agent `{id}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        tickets.push(Panel::new(members));
    }
    let lottery = UniformLottery { m: meta.m, tickets };
    lottery.validate(inst)?;
    Ok((lottery, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_instance;
    use proptest::prelude::*;

    fn t1() -> Instance {
        parse_instance(
            "id,f\na1,0\na2,0\na3,1\na4,1\n",
            "feature,value,min,max\nf,0,1,1\nf,1,1,1\n",
            2,
        )
        .unwrap()
    }

    fn t1_dist(weights: &[f64]) -> PanelDistribution {
        let panels = [vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3]];
        PanelDistribution::new(
            panels
                .iter()
                .zip(weights)
                .map(|(p, &w)| (Panel::new(p.clone()), w)),
        )
        .unwrap()
    }

    #[test]
    fn already_uniform_is_unchanged() {
        let d = t1_dist(&[0.25, 0.25, 0.5]);
        let l = pipage_round(&d, 4, 1).unwrap();
        let c: Vec<usize> = l.counts().iter().map(|x| x.1).collect();
        assert_eq!(c, vec![1, 1, 2]);
    }

    #[test]
    fn single_step_split() {
        let d = t1_dist(&[0.35, 0.65]);
        let mut low = 0;
        let runs = 4000;
        for seed in 0..runs {
            let c: Vec<usize> = pipage_round(&d, 10, seed).unwrap().counts().iter().map(|x| x.1).collect();
            assert!(c == vec![3, 7] || c == vec![4, 6], "{c:?}");
            low += (c[0] == 3) as usize;
        }
        let share = low as f64 / runs as f64;
        assert!((share - 0.5).abs() < 4.0 * (0.25 / runs as f64).sqrt());
    }

    #[test]
    fn point_mass() {
        let d = PanelDistribution::point(Panel::new(vec![0, 2]));
        let l = pipage_round(&d, 7, 0).unwrap();
        assert_eq!(l.tickets.len(), 7);
        assert_eq!(l.counts().len(), 1);
    }

    #[test]
    fn zero_m_rejected() {
        let d = PanelDistribution::point(Panel::new(vec![0, 2]));
        assert!(matches!(pipage_round(&d, 0, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn bounds_arithmetic() {
        let (b1, _) = rounding_bounds(30, 10, 1000).unwrap();
        assert!((b1 - 0.03).abs() < 1e-15);
        let (_, b2) = rounding_bounds(30, 202, 1000).unwrap();
        assert!((b2 - 0.02562).abs() < 5e-6, "{b2}");
        let (c1, c2) = rounding_bounds(30, 202, 10_000).unwrap();
        assert!((c1 * 10.0 - b1).abs() < 1e-15 && (c2 * 10.0 - b2).abs() < 1e-15);
        assert!(rounding_bounds(30, 1, 10).is_err());
    }

    #[test]
    fn marginals_count_tickets() {
        let inst = t1();
        let l = pipage_round(&t1_dist(&[0.25; 4]), 1000, 3).unwrap();
        let pi = lottery_marginals(&inst, &l);
        for &p in pi.values() {
            assert!((p - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn file_round_trip() {
        let inst = t1();
        let l = pipage_round(&t1_dist(&[0.3, 0.2, 0.1, 0.4]), 20, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lottery.tsv");
        write_lottery(&inst, &l, 5, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("1\ta1,a3\n"));
        let (back, meta) = read_lottery(&inst, &path).unwrap();
        assert_eq!(back, l);
        assert_eq!(meta.seed, 5);
    }

    proptest! {
        #[test]
        fn lottery_is_m_uniform(
            raw in prop::collection::vec(0.01f64..1.0, 4),
            m in 1usize..300,
            seed in any::<u64>(),
        ) {
            let total: f64 = raw.iter().sum();
            let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
            let d = t1_dist(&w);
            let inst = t1();
            let l = pipage_round(&d, m, seed).unwrap();
            prop_assert!(l.validate(&inst).is_ok());
            // each count is the floor or ceiling of m d
            for (p, x) in d.support() {
                let c = l.tickets.iter().filter(|t| *t == p).count() as f64;
                prop_assert!(c >= (x * m as f64).floor() - 1e-9 && c <= (x * m as f64).ceil() + 1e-9);
            }
            let pi = lottery_marginals(&inst, &l);
            prop_assert!((pi.sum() - 2.0).abs() < 1e-9);
            for &v in pi.values() {
                let scaled = v * m as f64;
                prop_assert!((scaled - scaled.round()).abs() < 1e-9);
            }
        }
    }
}
