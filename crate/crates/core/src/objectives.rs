//! Equality objectives over selection probabilities. Lower values are more equal.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::Instance;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ObjectiveKind {
    Maximin,
    Minimax,
    Nash,
    Leximin,
    Goldilocks,
    Linear,
}

/// How γ is chosen for Goldilocks and Linear.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gamma {
    Fixed(f64),
    /// `(n/k)^2 * max-opt * min-opt`, from Minimax and Maximin solves.
    Balanced,
    /// Product of the extreme quota-to-pool representation ratios.
    SelectionBias,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TieBreak {
    None,
    /// After optimizing one extreme, optimize the other with the first held fixed.
    OppositeExtreme,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EqualityObjective {
    pub kind: ObjectiveKind,
    pub gamma: Gamma,
    pub tie_break: TieBreak,
}

impl EqualityObjective {
    fn plain(kind: ObjectiveKind) -> Self {
        Self {
            kind,
            gamma: Gamma::Fixed(0.0),
            tie_break: TieBreak::None,
        }
    }

    pub fn maximin() -> Self {
        Self::plain(ObjectiveKind::Maximin)
    }

    pub fn minimax() -> Self {
        Self::plain(ObjectiveKind::Minimax)
    }

    pub fn nash() -> Self {
        Self::plain(ObjectiveKind::Nash)
    }

    pub fn leximin() -> Self {
        Self::plain(ObjectiveKind::Leximin)
    }

    pub fn goldilocks(gamma: f64) -> Self {
        Self {
            gamma: Gamma::Fixed(gamma),
            ..Self::plain(ObjectiveKind::Goldilocks)
        }
    }

    pub fn linear(gamma: f64) -> Self {
        Self {
            gamma: Gamma::Fixed(gamma),
            ..Self::plain(ObjectiveKind::Linear)
        }
    }

    pub fn with_tie_break(mut self) -> Self {
        self.tie_break = TieBreak::OppositeExtreme;
        self
    }

    /// Numeric γ once resolved; `None` for the automatic choices.
    pub fn gamma_value(&self) -> Option<f64> {
        match self.gamma {
            Gamma::Fixed(g) => Some(g),
            _ => None,
        }
    }

    pub fn uses_gamma(&self) -> bool {
        matches!(self.kind, ObjectiveKind::Goldilocks | ObjectiveKind::Linear)
    }
}

impl FromStr for EqualityObjective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::ObjectiveSpec(s.to_string());
        let spec = s.trim().to_ascii_lowercase();
        let (head, arg) = match spec.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (spec.as_str(), None),
        };
        let gamma = |arg: Option<&str>, auto: bool| -> Result<Gamma> {
            match arg {
                Some("auto1") if auto => Ok(Gamma::Balanced),
                Some("auto2") if auto => Ok(Gamma::SelectionBias),
                Some(x) => {
                    let g: f64 = x.parse().map_err(|_| bad())?;
                    if g.is_finite() && g >= 0.0 {
                        Ok(Gamma::Fixed(g))
                    } else {
                        Err(bad())
                    }
                }
                None => Err(bad()),
            }
        };
        let obj = match (head, arg) {
            ("maximin", None) => Self::maximin(),
            ("minimax", None) => Self::minimax(),
            ("maximin-tb", None) => Self::maximin().with_tie_break(),
            ("minimax-tb", None) => Self::minimax().with_tie_break(),
            ("leximin", None) => Self::leximin(),
            ("nash", None) => Self::nash(),
            ("goldilocks", a) => Self {
                gamma: gamma(a, true)?,
                ..Self::plain(ObjectiveKind::Goldilocks)
            },
            ("linear", a) => Self {
                gamma: gamma(a, false)?,
                ..Self::plain(ObjectiveKind::Linear)
            },
            _ => return Err(bad()),
        };
        Ok(obj)
    }
}

impl fmt::Display for EqualityObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tb = if self.tie_break == TieBreak::OppositeExtreme { "-tb" } else { "" };
        let gamma = match self.gamma {
            Gamma::Fixed(g) => format!("{g}"),
            Gamma::Balanced => "auto1".into(),
            Gamma::SelectionBias => "auto2".into(),
        };
        match self.kind {
            ObjectiveKind::Maximin => write!(f, "maximin{tb}"),
            ObjectiveKind::Minimax => write!(f, "minimax{tb}"),
            ObjectiveKind::Nash => write!(f, "nash"),
            ObjectiveKind::Leximin => write!(f, "leximin"),
            ObjectiveKind::Goldilocks => write!(f, "goldilocks:{gamma}"),
            ObjectiveKind::Linear => write!(f, "linear:{gamma}"),
        }
    }
}

fn extremes(pi: &[f64]) -> (f64, f64) {
    pi.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| (lo.min(p), hi.max(p)))
}

/// Objective value of `pi` for panel size `k` and pool size `n`.
///
/// Leximin is scored by its first criterion, the minimum. An unresolved automatic
/// γ yields NaN.
pub fn evaluate(obj: &EqualityObjective, pi: &[f64], k: u32, n: usize) -> f64 {
    let (lo, hi) = extremes(pi);
    let ratio = k as f64 / n as f64;
    let gamma = obj.gamma_value().unwrap_or(f64::NAN);
    match obj.kind {
        ObjectiveKind::Maximin | ObjectiveKind::Leximin => -lo,
        ObjectiveKind::Minimax => hi,
        ObjectiveKind::Nash => {
            if lo <= 0.0 {
                return 0.0;
            }
            let mean_log = pi.iter().map(|p| p.ln()).sum::<f64>() / pi.len() as f64;
            -mean_log.exp()
        }
        ObjectiveKind::Goldilocks => {
            let low_term = if gamma == 0.0 {
                0.0
            } else if lo <= 0.0 {
                f64::INFINITY
            } else {
                gamma * ratio / lo
            };
            hi / ratio + low_term
        }
        ObjectiveKind::Linear => hi - gamma * lo,
    }
}

pub fn gamma_star(z: f64, n_min: usize, c: usize, n: usize, k: u32) -> Result<f64> {
    if c >= n_min {
        return Err(Error::Domain(format!("need c < n_min, got c={c}, n_min={n_min}")));
    }
    if !(z > 0.0 && z <= 1.0 / n as f64 + 1e-15) {
        return Err(Error::Domain(format!("z={z} outside (0, 1/n]")));
    }
    let scale = n as f64 / k as f64;
    Ok(z * (1.0 / (n_min - c) as f64).max(c as f64 * z) * scale * scale)
}

pub fn gamma_balanced(min_opt: f64, max_opt: f64, n: usize, k: u32) -> f64 {
    let scale = n as f64 / k as f64;
    scale * scale * max_opt * min_opt
}

/// Representation ratios `((l+u)/2) / (k * phi)` of every constrained pair.
///
/// Dividing by `k` puts the ratio on a scale where an unbiased pool scores 1.
pub fn representation_ratios(inst: &Instance) -> Result<Vec<(usize, usize, f64)>> {
    let shares = inst.stats().shares;
    let k = inst.k() as f64;
    let mut out = Vec::new();
    for (f, row) in inst.quotas().iter().enumerate() {
        for (v, q) in row.iter().enumerate() {
            if !inst.is_constrained(f, v) {
                continue;
            }
            let phi = shares[f][v];
            if phi <= 0.0 {
                return Err(Error::ZeroShare {
                    feature: inst.scheme().features()[f].clone(),
                    value: inst.scheme().values(f)[v].clone(),
                });
            }
            out.push((f, v, (q.min + q.max) as f64 / 2.0 / (k * phi)));
        }
    }
    Ok(out)
}

pub fn gamma_selection_bias(inst: &Instance) -> Result<f64> {
    let ratios = representation_ratios(inst)?;
    if ratios.is_empty() {
        return Ok(1.0);
    }
    let (lo, hi) = ratios
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r.2), hi.max(r.2)));
    Ok(lo * hi)
}

/// `sum_{i,j} |pi_i - pi_j| / (2 (sum pi)^2)`.
pub fn gini(pi: &[f64]) -> Result<f64> {
    let total: f64 = pi.iter().sum();
    if total <= 0.0 {
        return Err(Error::Domain("gini of an all-zero assignment".into()));
    }
    let mut sorted = pi.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    // each ordered pair counted twice in the double sum
    let spread: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, x)| (2.0 * i as f64 - n + 1.0) * x)
        .sum::<f64>()
        * 2.0;
    Ok((spread / (2.0 * total * total)).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_instance;
    use proptest::prelude::*;

    const KINDS: [&str; 6] = ["maximin", "minimax", "nash", "leximin", "goldilocks:1", "linear:0.5"];

    fn obj(s: &str) -> EqualityObjective {
        s.parse().unwrap()
    }

    #[test]
    fn uniform_values() {
        let pi = vec![0.25; 8];
        assert!((evaluate(&obj("goldilocks:1"), &pi, 2, 8) - 2.0).abs() < 1e-12);
        assert!((evaluate(&obj("goldilocks:0.3"), &pi, 2, 8) - 1.3).abs() < 1e-12);
        assert_eq!(evaluate(&obj("maximin"), &pi, 2, 8), -0.25);
        assert_eq!(evaluate(&obj("minimax"), &pi, 2, 8), 0.25);
        assert!((evaluate(&obj("nash"), &[0.5; 4], 2, 4) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn goldilocks_two_valued() {
        let s3 = 3f64.sqrt();
        let pi = [s3 / 2.0, s3 / 6.0];
        assert!((evaluate(&obj("goldilocks:1"), &pi, 1, 2) - 2.0 * s3).abs() < 1e-12);
    }

    #[test]
    fn zero_minimum() {
        let pi = [1.0, 0.0];
        assert_eq!(evaluate(&obj("goldilocks:1"), &pi, 1, 2), f64::INFINITY);
        assert_eq!(evaluate(&obj("goldilocks:0"), &pi, 1, 2), 2.0);
        assert_eq!(evaluate(&obj("nash"), &pi, 1, 2), 0.0);
    }

    #[test]
    fn spec_grammar_round_trips() {
        for s in [
            "maximin", "minimax", "maximin-tb", "minimax-tb", "leximin", "nash",
            "goldilocks:1", "goldilocks:0.25", "goldilocks:auto1", "goldilocks:auto2", "linear:2",
        ] {
            assert_eq!(obj(s).to_string(), s);
        }
        for s in ["goldilocks", "linear:auto1", "median", "goldilocks:-1", "nash:2"] {
            assert!(s.parse::<EqualityObjective>().is_err(), "{s}");
        }
    }

    #[test]
    fn gamma_star_values() {
        let g = gamma_star(0.005, 30, 4, 100, 10).unwrap();
        assert!((g - 0.005 / 26.0 * 100.0).abs() < 1e-12);
        assert!((g - 0.019231).abs() < 1e-6);
        // c z = 1/(n_min - c): both branches agree
        let (n_min, c) = (12, 2);
        let z = 1.0 / (c as f64 * (n_min - c) as f64);
        let a = gamma_star(z, n_min, c, 20, 4).unwrap();
        assert!((a - z / (n_min - c) as f64 * 25.0).abs() < 1e-12);
        assert!((a - z * c as f64 * z * 25.0).abs() < 1e-12);
        assert!(gamma_star(0.005, 4, 4, 100, 10).is_err());
        assert!(gamma_star(0.5, 30, 4, 100, 10).is_err());
    }

    #[test]
    fn gamma_star_symmetric_gap() {
        // z = 1/(n sqrt c) with c z >= 1/(n_min - c): gamma* = c z^2 (n/k)^2
        let (n, k, c, n_min) = (400usize, 20u32, 4usize, 300usize);
        let z = 1.0 / (n as f64 * (c as f64).sqrt());
        let g = gamma_star(z, n_min, c, n, k).unwrap();
        let scale = n as f64 / k as f64;
        assert!((g - c as f64 * z * z * scale * scale).abs() < 1e-12);
        // the optimal max/min pair sits at sqrt(gamma) * (k/n) around k/n in ratio terms
        assert!((g.sqrt() * (k as f64 / n as f64) - (c as f64).sqrt() * z).abs() < 1e-12);
    }

    #[test]
    fn gamma_balanced_values() {
        assert!((gamma_balanced(0.2, 0.2, 10, 2) - 1.0).abs() < 1e-12);
        assert!((gamma_balanced(0.2, 1.0, 10, 2) - 5.0).abs() < 1e-12);
        assert_eq!(gamma_balanced(0.0, 0.7, 10, 2), 0.0);
    }

    fn biased(quotas: &str, k: u32) -> Instance {
        // pool: 8 agents with f=a, 2 with f=b
        let mut agents = String::from("id,f\n");
        for i in 0..10 {
            agents += &format!("p{i},{}\n", if i < 8 { "a" } else { "b" });
        }
        parse_instance(&agents, quotas, k).unwrap()
    }

    #[test]
    fn selection_bias_products() {
        // k=4: mids 1.5 and 2.5 over k*phi of 3.2 and 0.8
        let inst = biased("feature,value,min,max\nf,a,1,2\nf,b,2,3\n", 4);
        let expect = (1.5 / 3.2) * (2.5 / 0.8);
        assert!((gamma_selection_bias(&inst).unwrap() - expect).abs() < 1e-12);
        // k=5: ratios 2/4 = 0.5 and 2/1 = 2 → 1
        let inst = biased("feature,value,min,max\nf,a,1,3\nf,b,2,2\n", 5);
        let r = representation_ratios(&inst).unwrap();
        assert!((r[0].2 - 0.5).abs() < 1e-12 && (r[1].2 - 2.0).abs() < 1e-12);
        assert!((gamma_selection_bias(&inst).unwrap() - 1.0).abs() < 1e-12);
        // unbiased: quotas match shares exactly
        let inst = biased("feature,value,min,max\nf,a,4,4\nf,b,1,1\n", 5);
        assert!((gamma_selection_bias(&inst).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn selection_bias_four() {
        // pool 9 a / 1 b, k=5: ratios 4.5/4.5 = 1 and 2/0.5 = 4
        let mut agents = String::from("id,f\n");
        for i in 0..10 {
            agents += &format!("p{i},{}\n", if i < 9 { "a" } else { "b" });
        }
        let inst = parse_instance(&agents, "feature,value,min,max\nf,a,4,5\nf,b,1,3\n", 5).unwrap();
        assert!((gamma_selection_bias(&inst).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn zero_share_rejected() {
        let inst = parse_instance(
            "id,f\na,x\nb,x\n",
            "feature,value,min,max\nf,x,1,2\nf,y,0,1\n",
            2,
        )
        .unwrap();
        assert_eq!(gamma_selection_bias(&inst).unwrap_err().code(), "ZERO_SHARE");
    }

    #[test]
    fn gini_values() {
        assert_eq!(gini(&[0.5; 4]).unwrap(), 0.0);
        assert!((gini(&[1.0, 0.0]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(gini(&[1.0, 1.0]).unwrap(), 0.0);
        assert!(gini(&[0.0, 0.0]).is_err());
        let pi = [0.1, 0.7, 0.3, 0.9];
        let mut brute = 0.0;
        for a in pi {
            for b in pi {
                brute += f64::abs(a - b);
            }
        }
        let total: f64 = pi.iter().sum();
        assert!((gini(&pi).unwrap() - brute / (2.0 * total * total)).abs() < 1e-12);
    }

    // random assignment in [0,1]^n with sum k, built by water-filling
    fn assignment(n: usize, k: u32) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.01f64..1.0, n).prop_map(move |raw| {
            let mut pi = raw;
            for _ in 0..100 {
                let s: f64 = pi.iter().sum();
                let scale = k as f64 / s;
                pi.iter_mut().for_each(|p| *p = (*p * scale).min(1.0));
                if (pi.iter().sum::<f64>() - k as f64).abs() < 1e-12 {
                    break;
                }
            }
            pi
        })
    }

    proptest! {
        #[test]
        fn uniform_is_best(pi in assignment(8, 3)) {
            let uniform = vec![3.0 / 8.0; 8];
            for s in KINDS {
                let o = obj(s);
                prop_assert!(evaluate(&o, &uniform, 3, 8) <= evaluate(&o, &pi, 3, 8) + 1e-12, "{}", s);
            }
        }

        #[test]
        fn convex(a in assignment(6, 2), b in assignment(6, 2), lam in 0.0f64..=1.0) {
            let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| lam * x + (1.0 - lam) * y).collect();
            for s in ["maximin", "minimax", "nash", "goldilocks:1", "goldilocks:0.2", "linear:0.5"] {
                let o = obj(s);
                let lhs = evaluate(&o, &mix, 2, 6);
                let rhs = lam * evaluate(&o, &a, 2, 6) + (1.0 - lam) * evaluate(&o, &b, 2, 6);
                prop_assert!(lhs <= rhs + 1e-9, "{}: {} > {}", s, lhs, rhs);
            }
        }

        #[test]
        fn goldilocks_terms_scale(hi in 0.3f64..0.5, lo in 0.05f64..0.25, gamma in 0.0f64..3.0) {
            // k/n = 0.25; two-valued assignment
            let o = EqualityObjective::goldilocks(gamma);
            let one = evaluate(&o, &[hi, lo, lo, lo], 1, 4);
            prop_assert!((one - (hi / 0.25 + gamma * 0.25 / lo)).abs() < 1e-9);
            let two = evaluate(&o, &[2.0 * hi, 2.0 * lo, 2.0 * lo, 2.0 * lo], 1, 4);
            prop_assert!((two - (2.0 * hi / 0.25 + gamma * 0.25 / (2.0 * lo))).abs() < 1e-9);
        }

        #[test]
        fn gini_matches_pairwise(pi in proptest::collection::vec(0.0f64..1.0, 1..12)) {
            let total: f64 = pi.iter().sum();
            prop_assume!(total > 1e-6);
            let mut brute = 0.0;
            for a in &pi {
                for b in &pi {
                    brute += f64::abs(a - b);
                }
            }
            prop_assert!((gini(&pi).unwrap() - brute / (2.0 * total * total)).abs() < 1e-9);
        }
    }
}
