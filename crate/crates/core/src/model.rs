//! Selection instances: feature schemes, agents, quotas and pool statistics.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Ordered feature names with their admissible value labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureScheme {
    features: Vec<String>,
    values: Vec<Vec<String>>,
}

impl FeatureScheme {
    pub fn new(features: Vec<String>, values: Vec<Vec<String>>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::InvalidScheme("no features".into()));
        }
        if features.len() != values.len() {
            return Err(Error::InvalidScheme(
                "feature and value lists differ in length".into(),
            ));
        }
        let mut seen = HashSet::new();
        for (f, vals) in features.iter().zip(&values) {
            if !seen.insert(f.as_str()) {
                return Err(Error::InvalidScheme(format!("feature `{f}` repeated")));
            }
            if vals.len() < 2 {
                return Err(Error::InvalidScheme(format!(
                    "feature `{f}` needs at least two values, has {}",
                    vals.len()
                )));
            }
            let mut labels = HashSet::new();
            for v in vals {
                if !labels.insert(v.as_str()) {
                    return Err(Error::InvalidScheme(format!(
                        "value `{v}` repeated for feature `{f}`"
                    )));
                }
            }
        }
        Ok(Self { features, values })
    }

    pub fn features(&self) -> &[String] {
        &self.features
    }

    pub fn num_features(&self) -> usize {
        self.features.len()
    }

    pub fn values(&self, f: usize) -> &[String] {
        &self.values[f]
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f == name)
    }

    pub fn value_index(&self, f: usize, label: &str) -> Option<usize> {
        self.values[f].iter().position(|v| v == label)
    }

    /// Builds a vector from labels given in feature order.
    pub fn vector<S: AsRef<str>>(&self, labels: &[S]) -> Result<FeatureVector> {
        if labels.len() != self.features.len() {
            return Err(Error::Malformed(format!(
                "vector has {} entries, scheme has {} features",
                labels.len(),
                self.features.len()
            )));
        }
        let mut idx = Vec::with_capacity(labels.len());
        for (f, label) in labels.iter().enumerate() {
            let label = label.as_ref();
            let v = self
                .value_index(f, label)
                .ok_or_else(|| Error::InadmissibleValue {
                    agent: String::new(),
                    feature: self.features[f].clone(),
                    value: label.to_string(),
                })?;
            idx.push(v as u16);
        }
        Ok(FeatureVector(idx))
    }

    pub fn labels<'a>(&'a self, w: &FeatureVector) -> Vec<&'a str> {
        w.0.iter()
            .enumerate()
            .map(|(f, &v)| self.values[f][v as usize].as_str())
            .collect()
    }

    /// Compact text form used in reports: labels joined by `|`.
    pub fn format_vector(&self, w: &FeatureVector) -> String {
        self.labels(w).join("|")
    }

    pub fn parse_vector(&self, text: &str) -> Result<FeatureVector> {
        let parts: Vec<&str> = if self.features.len() == 1 {
            vec![text]
        } else {
            text.split('|').collect()
        };
        self.vector(&parts)
    }

    /// Every vector of the scheme's product space, in lexicographic index order.
    pub fn all_vectors(&self) -> Vec<FeatureVector> {
        let mut out = vec![FeatureVector(Vec::new())];
        for vals in &self.values {
            let mut next = Vec::with_capacity(out.len() * vals.len());
            for w in &out {
                for v in 0..vals.len() {
                    let mut w = w.clone();
                    w.0.push(v as u16);
                    next.push(w);
                }
            }
            out = next;
        }
        out
    }

    pub fn product_size(&self) -> u128 {
        self.values.iter().map(|v| v.len() as u128).product()
    }
}

/// One value index per feature, in scheme order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FeatureVector(pub Vec<u16>);

impl FeatureVector {
    pub fn value(&self, f: usize) -> usize {
        self.0[f] as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Agent {
    pub id: String,
    pub vector: FeatureVector,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Quota {
    pub min: u32,
    pub max: u32,
}

/// Agents sharing one feature vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Group {
    pub vector: FeatureVector,
    pub members: Vec<usize>,
}

impl Group {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

#[derive(Clone, Debug)]
pub struct Instance {
    scheme: FeatureScheme,
    agents: Vec<Agent>,
    k: u32,
    quotas: Vec<Vec<Quota>>,
    groups: Vec<Group>,
    group_of: Vec<usize>,
}

impl PartialEq for Instance {
    fn eq(&self, other: &Self) -> bool {
        self.scheme == other.scheme
            && self.agents == other.agents
            && self.k == other.k
            && self.quotas == other.quotas
    }
}

impl Instance {
    /// Validates and builds an instance. `quotas[f][v]` must cover the whole scheme.
    pub fn new(
        scheme: FeatureScheme,
        agents: Vec<Agent>,
        k: u32,
        quotas: Vec<Vec<Quota>>,
    ) -> Result<Self> {
        let mut ids = HashSet::new();
        for a in &agents {
            if !ids.insert(a.id.as_str()) {
                return Err(Error::DuplicateId(a.id.clone()));
            }
            if a.vector.0.len() != scheme.num_features() {
                return Err(Error::Malformed(format!(
                    "agent `{}` has {} feature entries",
                    a.id,
                    a.vector.0.len()
                )));
            }
            for (f, &v) in a.vector.0.iter().enumerate() {
                if v as usize >= scheme.values(f).len() {
                    return Err(Error::InadmissibleValue {
                        agent: a.id.clone(),
                        feature: scheme.features()[f].clone(),
                        value: format!("#{v}"),
                    });
                }
            }
        }
        if k == 0 || k as usize > agents.len() {
            return Err(Error::InvalidPanelSize {
                k,
                n: agents.len(),
            });
        }
        if quotas.len() != scheme.num_features() {
            return Err(Error::Malformed("quota table does not match scheme".into()));
        }
        for (f, row) in quotas.iter().enumerate() {
            let feature = &scheme.features()[f];
            if row.len() != scheme.values(f).len() {
                return Err(Error::Malformed(format!(
                    "quota row for `{feature}` does not match scheme"
                )));
            }
            for (v, q) in row.iter().enumerate() {
                let bad = |reason: String| Error::InvalidQuota {
                    feature: feature.clone(),
                    value: scheme.values(f)[v].clone(),
                    reason,
                };
                if q.min > q.max {
                    return Err(bad(format!("min {} > max {}", q.min, q.max)));
                }
                if q.max > k {
                    return Err(bad(format!("max {} > k = {k}", q.max)));
                }
            }
            let lo: u32 = row.iter().map(|q| q.min).sum();
            let hi: u32 = row.iter().map(|q| q.max).sum();
            if lo > k {
                return Err(Error::InfeasibleQuotas {
                    feature: feature.clone(),
                    reason: format!("lower quotas sum to {lo} > k = {k}"),
                });
            }
            if hi < k {
                return Err(Error::InfeasibleQuotas {
                    feature: feature.clone(),
                    reason: format!("upper quotas sum to {hi} < k = {k}"),
                });
            }
        }

        let mut by_vector: BTreeMap<&FeatureVector, Vec<usize>> = BTreeMap::new();
        for (i, a) in agents.iter().enumerate() {
            by_vector.entry(&a.vector).or_default().push(i);
        }
        let groups: Vec<Group> = by_vector
            .into_iter()
            .map(|(w, members)| Group {
                vector: w.clone(),
                members,
            })
            .collect();
        let mut group_of = vec![0; agents.len()];
        for (g, group) in groups.iter().enumerate() {
            for &i in &group.members {
                group_of[i] = g;
            }
        }
        Ok(Self {
            scheme,
            agents,
            k,
            quotas,
            groups,
            group_of,
        })
    }

    pub fn scheme(&self) -> &FeatureScheme {
        &self.scheme
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn n(&self) -> usize {
        self.agents.len()
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn quota(&self, f: usize, v: usize) -> Quota {
        self.quotas[f][v]
    }

    pub fn quotas(&self) -> &[Vec<Quota>] {
        &self.quotas
    }

    /// Vector groups present in the pool, sorted by vector.
    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn group_of(&self, agent: usize) -> usize {
        self.group_of[agent]
    }

    pub fn group_index(&self, w: &FeatureVector) -> Option<usize> {
        self.groups.binary_search_by(|g| g.vector.cmp(w)).ok()
    }

    pub fn agent_index(&self, id: &str) -> Option<usize> {
        self.agents.iter().position(|a| a.id == id)
    }

    /// A copy with a different agent list (same scheme, k and quotas).
    pub fn with_agents(&self, agents: Vec<Agent>) -> Result<Self> {
        Self::new(self.scheme.clone(), agents, self.k, self.quotas.clone())
    }

    pub fn with_quotas(&self, quotas: Vec<Vec<Quota>>) -> Result<Self> {
        Self::new(self.scheme.clone(), self.agents.clone(), self.k, quotas)
    }

    /// Whether the pair (f, v) carries a real constraint, i.e. differs from (0, k).
    pub fn is_constrained(&self, f: usize, v: usize) -> bool {
        let q = self.quotas[f][v];
        !(q.min == 0 && q.max == self.k)
    }

    pub fn stats(&self) -> InstanceStats {
        stats(self)
    }

    pub fn to_doc(&self) -> InstanceDoc {
        let scheme = SchemeDoc {
            features: self.scheme.features.clone(),
            values: self.scheme.values.clone(),
        };
        let agents = self
            .agents
            .iter()
            .map(|a| AgentDoc {
                id: a.id.clone(),
                vector: self
                    .scheme
                    .labels(&a.vector)
                    .into_iter()
                    .map(String::from)
                    .collect(),
            })
            .collect();
        let mut quotas = Vec::new();
        for (f, row) in self.quotas.iter().enumerate() {
            for (v, q) in row.iter().enumerate() {
                quotas.push(QuotaDoc {
                    feature: self.scheme.features[f].clone(),
                    value: self.scheme.values[f][v].clone(),
                    min: q.min,
                    max: q.max,
                });
            }
        }
        InstanceDoc {
            scheme,
            agents,
            k: self.k,
            quotas,
        }
    }

    pub fn from_doc(doc: InstanceDoc) -> Result<Self> {
        let scheme = FeatureScheme::new(doc.scheme.features, doc.scheme.values)?;
        let mut agents = Vec::with_capacity(doc.agents.len());
        for a in doc.agents {
            let vector = scheme.vector(&a.vector).map_err(|e| match e {
                Error::InadmissibleValue { feature, value, .. } => Error::InadmissibleValue {
                    agent: a.id.clone(),
                    feature,
                    value,
                },
                other => other,
            })?;
            agents.push(Agent { id: a.id, vector });
        }
        let quotas = quota_table(&scheme, doc.k, doc.quotas.into_iter().map(|q| {
            (q.feature, q.value, q.min, q.max)
        }))?;
        Self::new(scheme, agents, doc.k, quotas)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("instance serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_doc(serde_json::from_str(text)?)
    }

    /// SHA-256 of the canonical compact JSON export, hex encoded.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(&self.to_doc()).expect("instance serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        let mut out = String::with_capacity(64);
        for b in digest {
            write!(out, "{b:02x}").unwrap();
        }
        out
    }

    /// Writes the agents and quotas CSV files read by [`load_instance`].
    pub fn save_csv(&self, agents_path: &Path, quotas_path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(agents_path)?;
        let mut header = vec!["id".to_string()];
        header.extend(self.scheme.features.iter().cloned());
        w.write_record(&header)?;
        for a in &self.agents {
            let mut row = vec![a.id.as_str()];
            row.extend(self.scheme.labels(&a.vector));
            w.write_record(&row)?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(quotas_path)?;
        w.write_record(["feature", "value", "min", "max"])?;
        for (f, row) in self.quotas.iter().enumerate() {
            for (v, q) in row.iter().enumerate() {
                w.write_record([
                    self.scheme.features[f].as_str(),
                    self.scheme.values[f][v].as_str(),
                    &q.min.to_string(),
                    &q.max.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SchemeDoc {
    pub features: Vec<String>,
    pub values: Vec<Vec<String>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AgentDoc {
    pub id: String,
    pub vector: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuotaDoc {
    pub feature: String,
    pub value: String,
    pub min: u32,
    pub max: u32,
}

/// JSON export of an instance; field order is fixed for diffing.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstanceDoc {
    pub scheme: SchemeDoc,
    pub agents: Vec<AgentDoc>,
    pub k: u32,
    pub quotas: Vec<QuotaDoc>,
}

// Missing (feature, value) pairs default to (0, k).
fn quota_table(
    scheme: &FeatureScheme,
    k: u32,
    rows: impl IntoIterator<Item = (String, String, u32, u32)>,
) -> Result<Vec<Vec<Quota>>> {
    let mut table: Vec<Vec<Quota>> = (0..scheme.num_features())
        .map(|f| vec![Quota { min: 0, max: k }; scheme.values(f).len()])
        .collect();
    for (feature, value, min, max) in rows {
        let f = scheme
            .feature_index(&feature)
            .ok_or_else(|| Error::UnknownFeature(feature.clone()))?;
        let v = scheme
            .value_index(f, &value)
            .ok_or_else(|| Error::InvalidQuota {
                feature: feature.clone(),
                value: value.clone(),
                reason: "value not in scheme".into(),
            })?;
        table[f][v] = Quota { min, max };
    }
    Ok(table)
}

/// Reads an agents CSV (`id,<feature...>`) and a quotas CSV (`feature,value,min,max`).
///
/// Value labels are collected from the quota rows first, then from agent rows, in
/// order of first appearance.
pub fn load_instance(agents_path: &Path, quotas_path: &Path, k: u32) -> Result<Instance> {
    let agents_text = std::fs::read_to_string(agents_path)?;
    let quotas_text = std::fs::read_to_string(quotas_path)?;
    parse_instance(&agents_text, &quotas_text, k)
}

/// Same as [`load_instance`] over in-memory CSV text.
pub fn parse_instance(agents_csv: &str, quotas_csv: &str, k: u32) -> Result<Instance> {
    let mut agents_rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(agents_csv.as_bytes());
    let header = agents_rdr.headers()?.clone();
    if header.len() < 2 || &header[0] != "id" {
        return Err(Error::Malformed(
            "agents header must be `id,<feature>,...`".into(),
        ));
    }
    let features: Vec<String> = header.iter().skip(1).map(String::from).collect();
    let mut values: Vec<Vec<String>> = vec![Vec::new(); features.len()];
    let note = |values: &mut Vec<Vec<String>>, f: usize, label: &str| {
        if !values[f].iter().any(|v| v == label) {
            values[f].push(label.to_string());
        }
    };

    let mut quota_rows = Vec::new();
    let mut quotas_rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(quotas_csv.as_bytes());
    let qheader = quotas_rdr.headers()?.clone();
    if qheader.iter().collect::<Vec<_>>() != ["feature", "value", "min", "max"] {
        return Err(Error::Malformed(
            "quotas header must be `feature,value,min,max`".into(),
        ));
    }
    for rec in quotas_rdr.records() {
        let rec = rec?;
        let feature = rec[0].to_string();
        let value = rec[1].to_string();
        let f = features
            .iter()
            .position(|x| *x == feature)
            .ok_or_else(|| Error::UnknownFeature(feature.clone()))?;
        let parse = |s: &str| -> Result<u32> {
            s.parse().map_err(|_| Error::InvalidQuota {
                feature: feature.clone(),
                value: value.clone(),
                reason: format!("`{s}` is not a non-negative integer"),
            })
        };
        let (min, max) = (parse(&rec[2])?, parse(&rec[3])?);
        note(&mut values, f, &value);
        quota_rows.push((feature, value, min, max));
    }

    let mut raw_agents = Vec::new();
    for rec in agents_rdr.records() {
        let rec = rec?;
        let id = rec[0].to_string();
        if rec.len() != header.len() {
            return Err(Error::Malformed(format!(
                "agent `{id}` has {} cells, header has {}",
                rec.len(),
                header.len()
            )));
        }
        let mut labels = Vec::with_capacity(features.len());
        for (f, cell) in rec.iter().skip(1).enumerate() {
            if cell.is_empty() {
                return Err(Error::BlankCell {
                    agent: id,
                    feature: features[f].clone(),
                });
            }
            note(&mut values, f, cell);
            labels.push(cell.to_string());
        }
        raw_agents.push((id, labels));
    }

    let scheme = FeatureScheme::new(features, values)?;
    let agents = raw_agents
        .into_iter()
        .map(|(id, labels)| {
            let vector = scheme.vector(&labels)?;
            Ok(Agent { id, vector })
        })
        .collect::<Result<Vec<_>>>()?;
    let quotas = quota_table(&scheme, k, quota_rows)?;
    Instance::new(scheme, agents, k, quotas)
}

/// Pool-level statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceStats {
    pub n: usize,
    /// `(vector, n_w)` for every vector present, sorted by vector.
    pub counts: Vec<(FeatureVector, usize)>,
    pub n_min: usize,
    /// Pool share `phi[f][v]` of each feature value.
    pub shares: Vec<Vec<f64>>,
}

impl InstanceStats {
    pub fn num_vectors(&self) -> usize {
        self.counts.len()
    }

    pub fn count(&self, w: &FeatureVector) -> usize {
        self.counts
            .iter()
            .find(|(v, _)| v == w)
            .map_or(0, |(_, c)| *c)
    }
}

pub fn stats(instance: &Instance) -> InstanceStats {
    let n = instance.n();
    let counts: Vec<(FeatureVector, usize)> = instance
        .groups()
        .iter()
        .map(|g| (g.vector.clone(), g.size()))
        .collect();
    let n_min = counts.iter().map(|(_, c)| *c).min().unwrap_or(0);
    let scheme = instance.scheme();
    let mut tallies: Vec<Vec<usize>> = (0..scheme.num_features())
        .map(|f| vec![0; scheme.values(f).len()])
        .collect();
    for a in instance.agents() {
        for (f, &v) in a.vector.0.iter().enumerate() {
            tallies[f][v as usize] += 1;
        }
    }
    let shares = tallies
        .into_iter()
        .map(|row| row.into_iter().map(|c| c as f64 / n as f64).collect())
        .collect();
    InstanceStats {
        n,
        counts,
        n_min,
        shares,
    }
}

/// Repeats every agent `copies` times. Copies get ids `<id>#<j>` for `j` in `1..=copies`.
pub fn duplicate_pool(instance: &Instance, copies: usize) -> Result<Instance> {
    if copies == 0 {
        return Err(Error::Domain("copies must be at least 1".into()));
    }
    if copies == 1 {
        return Ok(instance.clone());
    }
    let mut agents = Vec::with_capacity(instance.n() * copies);
    for a in instance.agents() {
        for j in 1..=copies {
            agents.push(Agent {
                id: format!("{}#{j}", a.id),
                vector: a.vector.clone(),
            });
        }
    }
    instance.with_agents(agents)
}

#[cfg(test)]
mod tests {
    use super::*;

    const T1_AGENTS: &str = "id,f\na1,0\na2,0\na3,1\na4,1\n";
    const T1_QUOTAS: &str = "feature,value,min,max\nf,0,1,1\nf,1,1,1\n";

    fn t1() -> Instance {
        parse_instance(T1_AGENTS, T1_QUOTAS, 2).unwrap()
    }

    #[test]
    fn t1_loads() {
        let inst = t1();
        let s = inst.stats();
        assert_eq!(s.n, 4);
        assert_eq!(s.n_min, 2);
        assert_eq!(s.num_vectors(), 2);
        assert_eq!(s.counts[0].1, 2);
        assert_eq!(s.counts[1].1, 2);
        assert_eq!(s.shares[0], vec![0.5, 0.5]);
    }

    #[test]
    fn duplicate_id_rejected() {
        let err = parse_instance("id,f\na1,0\na1,1\n", T1_QUOTAS, 1).unwrap_err();
        assert_eq!(err.code(), "DUPLICATE_ID");
    }

    #[test]
    fn lower_sum_above_k_is_infeasible() {
        let q = "feature,value,min,max\nf,0,2,3\nf,1,2,3\n";
        let err = parse_instance("id,f\na,0\nb,0\nc,1\nd,1\n", q, 3).unwrap_err();
        assert_eq!(err.code(), "INFEASIBLE_QUOTAS");
    }

    #[test]
    fn upper_sum_below_k_is_infeasible() {
        let q = "feature,value,min,max\nf,0,0,1\nf,1,0,1\n";
        let err = parse_instance(T1_AGENTS, q, 3).unwrap_err();
        assert_eq!(err.code(), "INFEASIBLE_QUOTAS");
    }

    #[test]
    fn min_above_max_rejected() {
        let q = "feature,value,min,max\nf,0,2,1\n";
        let err = parse_instance(T1_AGENTS, q, 2).unwrap_err();
        assert_eq!(err.code(), "INVALID_QUOTA");
    }

    #[test]
    fn unknown_feature_rejected() {
        let q = "feature,value,min,max\ng,0,1,1\n";
        let err = parse_instance(T1_AGENTS, q, 2).unwrap_err();
        assert_eq!(err.code(), "UNKNOWN_FEATURE");
    }

    #[test]
    fn blank_cell_rejected() {
        let err = parse_instance("id,f,g\na,0,x\nb,,y\n", "feature,value,min,max\n", 1)
            .unwrap_err();
        assert_eq!(err.code(), "BLANK_CELL");
    }

    #[test]
    fn missing_quota_rows_default_to_open() {
        let inst = parse_instance(T1_AGENTS, "feature,value,min,max\n", 3).unwrap();
        assert_eq!(inst.quota(0, 0), Quota { min: 0, max: 3 });
        assert!(!inst.is_constrained(0, 1));
    }

    #[test]
    fn quota_values_come_first_in_scheme() {
        let q = "feature,value,min,max\nf,1,1,1\nf,0,1,1\n";
        let inst = parse_instance(T1_AGENTS, q, 2).unwrap();
        assert_eq!(inst.scheme().values(0), ["1", "0"]);
    }

    #[test]
    fn single_vector_pool() {
        let inst = parse_instance("id,f\na,0\nb,0\nc,0\n", "feature,value,min,max\nf,1,0,0\n", 2)
            .unwrap();
        let s = inst.stats();
        assert_eq!(s.num_vectors(), 1);
        assert_eq!(s.n_min, 3);
    }

    #[test]
    fn duplicate_pool_counts() {
        let inst = t1();
        let d = duplicate_pool(&inst, 2).unwrap();
        assert_eq!(d.n(), 8);
        assert_eq!(d.k(), 2);
        assert_eq!(d.stats().counts[0].1, 4);
        assert_eq!(duplicate_pool(&inst, 1).unwrap(), inst);
        assert!(duplicate_pool(&inst, 0).is_err());
    }

    #[test]
    fn json_round_trip() {
        let inst = t1();
        let back = Instance::from_json(&inst.to_json()).unwrap();
        assert_eq!(back, inst);
        assert_eq!(back.hash(), inst.hash());
        let json = inst.to_json();
        let keys: Vec<usize> = ["\"scheme\"", "\"agents\"", "\"k\"", "\"quotas\""]
            .iter()
            .map(|k| json.find(k).unwrap())
            .collect();
        assert!(keys.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn csv_round_trip() {
        let inst = t1();
        let dir = tempfile::tempdir().unwrap();
        let (a, q) = (dir.path().join("a.csv"), dir.path().join("q.csv"));
        inst.save_csv(&a, &q).unwrap();
        assert_eq!(load_instance(&a, &q, 2).unwrap(), inst);
    }

    #[test]
    fn vector_text_forms() {
        let inst = parse_instance("id,f,g\na,0,x\nb,1,y\n", "feature,value,min,max\n", 1).unwrap();
        let w = inst.scheme().parse_vector("1|x").unwrap();
        assert_eq!(inst.scheme().format_vector(&w), "1|x");
        assert_eq!(inst.scheme().all_vectors().len(), 4);
        assert!(inst.scheme().parse_vector("2|x").is_err());
    }
}
