//! Exact inference by variable elimination, with brute-force joint
//! enumeration kept alongside as an independent check.
//!
//! Queries are restricted to the ancestral closure of the targets and the
//! observed variables; every other node sums to one and is dropped.

mod factor;

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

pub use factor::Factor;

use crate::model::{topological_indices, Cpt, Evidence, ModelError, Network, NodeKind};

/// Largest joint state space [`enumerate_joint`] will walk.
pub const ENUMERATION_LIMIT: u128 = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InferenceError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("the evidence has zero probability under the model")]
    ImpossibleEvidence,
    #[error("decision `{0}` must be fixed by the evidence for this query")]
    UnresolvedDecision(String),
    #[error("`{0}` is a utility node and cannot be queried")]
    UtilityTarget(String),
    #[error("`{0}` appears more than once among the targets")]
    DuplicateTarget(String),
    #[error("joint state space of {size} exceeds the enumeration limit of {limit}")]
    StateSpaceTooLarge { size: u128, limit: u128 },
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Query {
    pub targets: Vec<String>,
    pub evidence: Evidence,
}

impl Query {
    pub fn new<S: Into<String>>(targets: impl IntoIterator<Item = S>, evidence: Evidence) -> Self {
        Self { targets: targets.into_iter().map(Into::into).collect(), evidence }
    }

    pub fn single(target: impl Into<String>, evidence: Evidence) -> Self {
        Self { targets: vec![target.into()], evidence }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum EliminationOrder {
    #[default]
    MinDegree,
    MinFill,
    Topological,
    ReverseTopological,
    /// Variables eliminated in this order; unlisted ones follow in
    /// declaration order.
    Custom(Vec<String>),
}

/// Joint distribution over the target variables, odometer ordered (last
/// target fastest).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Distribution {
    variables: Vec<String>,
    levels: Vec<Vec<String>>,
    probabilities: Vec<f64>,
}

impl Distribution {
    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn levels(&self) -> &[Vec<String>] {
        &self.levels
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn prob(&self, levels: &[usize]) -> f64 {
        let idx = levels
            .iter()
            .zip(&self.levels)
            .fold(0, |acc, (&l, names)| acc * names.len() + l);
        self.probabilities[idx]
    }

    /// Probability of a named level of a single-target distribution, or of
    /// one variable's marginal otherwise.
    pub fn prob_of(&self, variable: &str, level: &str) -> Option<f64> {
        let pos = self.variables.iter().position(|v| v == variable)?;
        let l = self.levels[pos].iter().position(|n| n == level)?;
        Some(self.marginal(variable)?[l])
    }

    pub fn marginal(&self, variable: &str) -> Option<Vec<f64>> {
        let pos = self.variables.iter().position(|v| v == variable)?;
        let card = self.levels[pos].len();
        let inner: usize = self.levels[pos + 1..].iter().map(Vec::len).product();
        let mut out = vec![0.0; card];
        for (i, p) in self.probabilities.iter().enumerate() {
            out[(i / inner) % card] += p;
        }
        Some(out)
    }

    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }
}

/// Allowed levels per variable. Hard evidence is a one-hot mask; the
/// complement of an event is a mask with one level removed.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Findings {
    masks: BTreeMap<usize, Vec<bool>>,
}

impl Findings {
    pub fn from_evidence(net: &Network, evidence: &Evidence) -> Result<Self, ModelError> {
        let mut out = Self::default();
        for (node, level) in evidence.resolve(net)? {
            let mut mask = vec![false; net.nodes()[node].cardinality()];
            mask[level] = true;
            out.masks.insert(node, mask);
        }
        Ok(out)
    }

    fn locate(net: &Network, variable: &str, level: &str) -> Result<(usize, usize), ModelError> {
        let ev = Evidence::new().with(variable, level);
        Ok(ev.resolve(net)?[0])
    }

    /// Intersects with `variable = level`.
    pub fn restrict(&mut self, net: &Network, variable: &str, level: &str) -> Result<(), ModelError> {
        let (node, l) = Self::locate(net, variable, level)?;
        let card = net.nodes()[node].cardinality();
        let mask = self.masks.entry(node).or_insert_with(|| vec![true; card]);
        for (k, allowed) in mask.iter_mut().enumerate() {
            *allowed &= k == l;
        }
        Ok(())
    }

    /// Intersects with `variable != level`.
    pub fn exclude(&mut self, net: &Network, variable: &str, level: &str) -> Result<(), ModelError> {
        let (node, l) = Self::locate(net, variable, level)?;
        let card = net.nodes()[node].cardinality();
        self.masks.entry(node).or_insert_with(|| vec![true; card])[l] = false;
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }
}

/// Resolved, fully expanded view of a network for one query.
struct Compiled {
    cards: Vec<usize>,
    parents: Vec<Vec<usize>>,
    tables: Vec<Option<Cpt>>,
    kinds: Vec<NodeKind>,
    names: Vec<String>,
    topo_rank: Vec<usize>,
}

impl Compiled {
    fn new(net: &Network) -> Result<Self, InferenceError> {
        let topo = topological_indices(net)?;
        let mut topo_rank = vec![0; net.len()];
        for (rank, &i) in topo.iter().enumerate() {
            topo_rank[i] = rank;
        }
        let mut parents = Vec::with_capacity(net.len());
        let mut tables = Vec::with_capacity(net.len());
        for node in net.nodes() {
            parents.push(node.parents.iter().map(|p| net.require(p)).collect::<Result<Vec<_>, _>>()?);
            tables.push(match node.kind {
                NodeKind::Chance | NodeKind::Deterministic => Some(net.cpt_of(node.name())?.into_owned()),
                NodeKind::Decision | NodeKind::Utility => None,
            });
        }
        Ok(Self {
            cards: net.nodes().iter().map(|n| n.cardinality()).collect(),
            parents,
            tables,
            kinds: net.nodes().iter().map(|n| n.kind).collect(),
            names: net.nodes().iter().map(|n| n.name().to_string()).collect(),
            topo_rank,
        })
    }

    fn targets(&self, net: &Network, names: &[String]) -> Result<Vec<usize>, InferenceError> {
        let mut seen = BTreeSet::new();
        names
            .iter()
            .map(|t| {
                let i = net.require(t)?;
                if self.kinds[i] == NodeKind::Utility {
                    return Err(InferenceError::UtilityTarget(t.clone()));
                }
                if !seen.insert(i) {
                    return Err(InferenceError::DuplicateTarget(t.clone()));
                }
                Ok(i)
            })
            .collect()
    }

    /// Ancestral closure of `seeds`, in topological order.
    fn ancestral(&self, seeds: impl IntoIterator<Item = usize>) -> Vec<usize> {
        let mut keep = vec![false; self.cards.len()];
        let mut stack: Vec<usize> = seeds.into_iter().collect();
        while let Some(v) = stack.pop() {
            if !keep[v] {
                keep[v] = true;
                stack.extend(self.parents[v].iter().copied());
            }
        }
        let mut out: Vec<usize> = (0..keep.len()).filter(|&i| keep[i]).collect();
        out.sort_by_key(|&i| self.topo_rank[i]);
        out
    }

    fn decision_level(&self, node: usize, findings: &Findings) -> Result<usize, InferenceError> {
        let unresolved = || InferenceError::UnresolvedDecision(self.names[node].clone());
        let mask = findings.masks.get(&node).ok_or_else(unresolved)?;
        let mut allowed = mask.iter().enumerate().filter(|(_, &a)| a).map(|(l, _)| l);
        match (allowed.next(), allowed.next()) {
            (Some(l), None) => Ok(l),
            _ => Err(unresolved()),
        }
    }

    fn factors(&self, relevant: &[usize], findings: &Findings) -> Result<Vec<Factor>, InferenceError> {
        let mut out = Vec::new();
        for &v in relevant {
            match self.kinds[v] {
                NodeKind::Decision => {
                    self.decision_level(v, findings)?;
                }
                NodeKind::Utility => unreachable!("utility nodes have no children and are never targets"),
                NodeKind::Chance | NodeKind::Deterministic => {
                    let table = self.tables[v].as_ref().expect("compiled table");
                    let mut scope = self.parents[v].clone();
                    scope.push(v);
                    let cards = scope.iter().map(|&s| self.cards[s]).collect();
                    out.push(Factor::new(scope, cards, table.probabilities().to_vec()));
                }
            }
            if let Some(mask) = findings.masks.get(&v) {
                out.push(Factor::indicator(v, mask));
            }
        }
        Ok(out)
    }

    fn order(&self, net: &Network, eliminate: &[usize], factors: &[Factor], how: &EliminationOrder) -> Result<Vec<usize>, InferenceError> {
        let mut vars = eliminate.to_vec();
        match how {
            EliminationOrder::Topological => vars.sort_by_key(|&v| self.topo_rank[v]),
            EliminationOrder::ReverseTopological => vars.sort_by_key(|&v| std::cmp::Reverse(self.topo_rank[v])),
            EliminationOrder::Custom(names) => {
                let mut ordered = Vec::with_capacity(vars.len());
                for name in names {
                    let i = net.require(name)?;
                    if vars.contains(&i) && !ordered.contains(&i) {
                        ordered.push(i);
                    }
                }
                vars.sort_unstable();
                ordered.extend(vars.into_iter().filter(|v| !ordered.contains(v)).collect::<Vec<_>>());
                vars = ordered;
            }
            EliminationOrder::MinDegree | EliminationOrder::MinFill => {
                vars = greedy_order(&vars, factors, matches!(how, EliminationOrder::MinFill));
            }
        }
        Ok(vars)
    }
}

/// Greedy elimination ordering on the interaction graph; ties go to the
/// lowest node index.
fn greedy_order(eliminate: &[usize], factors: &[Factor], min_fill: bool) -> Vec<usize> {
    let mut adj: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for f in factors {
        for &a in f.scope() {
            let entry = adj.entry(a).or_default();
            entry.extend(f.scope().iter().copied().filter(|&b| b != a));
        }
    }
    let mut remaining: BTreeSet<usize> = eliminate.iter().copied().collect();
    let mut order = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        let cost = |v: usize| -> usize {
            let nbrs = adj.get(&v).cloned().unwrap_or_default();
            if !min_fill {
                return nbrs.len();
            }
            let list: Vec<usize> = nbrs.into_iter().collect();
            let mut fill = 0;
            for (i, a) in list.iter().enumerate() {
                for b in &list[i + 1..] {
                    if !adj.get(a).is_some_and(|s| s.contains(b)) {
                        fill += 1;
                    }
                }
            }
            fill
        };
        let best = *remaining.iter().min_by_key(|&&v| (cost(v), v)).expect("non-empty");
        remaining.remove(&best);
        order.push(best);
        let nbrs = adj.remove(&best).unwrap_or_default();
        for &a in &nbrs {
            if let Some(set) = adj.get_mut(&a) {
                set.remove(&best);
                set.extend(nbrs.iter().copied().filter(|&b| b != a));
            }
        }
    }
    order
}

fn variable_elimination(
    net: &Network,
    targets: &[String],
    findings: &Findings,
    how: &EliminationOrder,
) -> Result<(Vec<usize>, Factor, Compiled), InferenceError> {
    let compiled = Compiled::new(net)?;
    let target_idx = compiled.targets(net, targets)?;
    let relevant = compiled.ancestral(target_idx.iter().copied().chain(findings.masks.keys().copied()));
    let mut factors = compiled.factors(&relevant, findings)?;
    let eliminate: Vec<usize> = relevant.iter().copied().filter(|v| !target_idx.contains(v)).collect();
    for var in compiled.order(net, &eliminate, &factors, how)? {
        let (touching, rest): (Vec<Factor>, Vec<Factor>) = factors.into_iter().partition(|f| f.contains(var));
        factors = rest;
        if let Some(merged) = touching.into_iter().reduce(|a, b| a.product(&b)) {
            factors.push(merged.sum_out(var));
        }
    }
    let joint = factors.into_iter().fold(Factor::unit(), |a, b| a.product(&b));
    let joint = joint.permuted(&target_idx);
    Ok((target_idx, joint, compiled))
}

fn normalized(net: &Network, targets: &[usize], values: Vec<f64>) -> Result<Distribution, InferenceError> {
    let z: f64 = values.iter().sum();
    if z <= 0.0 {
        return Err(InferenceError::ImpossibleEvidence);
    }
    Ok(Distribution {
        variables: targets.iter().map(|&t| net.nodes()[t].name().to_string()).collect(),
        levels: targets.iter().map(|&t| net.nodes()[t].variable.levels().to_vec()).collect(),
        probabilities: values.into_iter().map(|v| v / z).collect(),
    })
}

/// Posterior over the query targets given its evidence.
pub fn posterior(net: &Network, query: &Query) -> Result<Distribution, InferenceError> {
    posterior_with(net, query, &EliminationOrder::default())
}

pub fn posterior_with(net: &Network, query: &Query, order: &EliminationOrder) -> Result<Distribution, InferenceError> {
    let findings = Findings::from_evidence(net, &query.evidence)?;
    posterior_given(net, &query.targets, &findings, order)
}

/// Posterior under arbitrary level restrictions.
pub fn posterior_given(
    net: &Network,
    targets: &[String],
    findings: &Findings,
    order: &EliminationOrder,
) -> Result<Distribution, InferenceError> {
    let (target_idx, joint, _) = variable_elimination(net, targets, findings, order)?;
    normalized(net, &target_idx, joint.values().to_vec())
}

/// Marginal probability of the evidence; 1 when nothing is observed.
pub fn prob_of_evidence(net: &Network, evidence: &Evidence) -> Result<f64, InferenceError> {
    let findings = Findings::from_evidence(net, evidence)?;
    prob_of_findings(net, &findings)
}

pub fn prob_of_findings(net: &Network, findings: &Findings) -> Result<f64, InferenceError> {
    let (_, joint, _) = variable_elimination(net, &[], findings, &EliminationOrder::default())?;
    Ok(joint.total())
}

/// Same contract as [`posterior`], by summing the product of table entries
/// over every joint state of the relevant variables.
pub fn enumerate_joint(net: &Network, query: &Query) -> Result<Distribution, InferenceError> {
    let findings = Findings::from_evidence(net, &query.evidence)?;
    enumerate_given(net, &query.targets, &findings)
}

pub fn enumerate_given(net: &Network, targets: &[String], findings: &Findings) -> Result<Distribution, InferenceError> {
    let c = Compiled::new(net)?;
    let target_idx = c.targets(net, targets)?;
    let relevant = c.ancestral(target_idx.iter().copied().chain(findings.masks.keys().copied()));

    let mut domains: Vec<Vec<usize>> = Vec::with_capacity(relevant.len());
    for &v in &relevant {
        let domain: Vec<usize> = match c.kinds[v] {
            NodeKind::Decision => vec![c.decision_level(v, findings)?],
            _ => match findings.masks.get(&v) {
                Some(mask) => (0..c.cards[v]).filter(|&l| mask[l]).collect(),
                None => (0..c.cards[v]).collect(),
            },
        };
        domains.push(domain);
    }
    let size: u128 = domains.iter().map(|d| d.len() as u128).product();
    if size > ENUMERATION_LIMIT {
        return Err(InferenceError::StateSpaceTooLarge { size, limit: ENUMERATION_LIMIT });
    }

    let out_cards: Vec<usize> = target_idx.iter().map(|&t| c.cards[t]).collect();
    let mut joint = vec![0.0; out_cards.iter().product()];
    if domains.iter().any(Vec::is_empty) {
        return normalized(net, &target_idx, joint);
    }
    // depth-first over the relevant variables in topological order, so each
    // table entry is multiplied in once its parents are assigned
    let mut order: Vec<usize> = (0..relevant.len()).collect();
    order.sort_by_key(|&k| c.topo_rank[relevant[k]]);
    let walk = Walk {
        c: &c,
        vars: order.iter().map(|&k| relevant[k]).collect(),
        domains: order.iter().map(|&k| domains[k].clone()).collect(),
        targets: &target_idx,
        out_cards: &out_cards,
    };
    let mut level = vec![0usize; c.cards.len()];
    walk.visit(0, 1.0, &mut level, &mut joint);
    normalized(net, &target_idx, joint)
}

struct Walk<'a> {
    c: &'a Compiled,
    vars: Vec<usize>,
    domains: Vec<Vec<usize>>,
    targets: &'a [usize],
    out_cards: &'a [usize],
}

impl Walk<'_> {
    fn visit(&self, depth: usize, weight: f64, level: &mut [usize], joint: &mut [f64]) {
        let Some(&v) = self.vars.get(depth) else {
            let idx = self.targets.iter().zip(self.out_cards).fold(0, |acc, (&t, &card)| acc * card + level[t]);
            joint[idx] += weight;
            return;
        };
        let row = self.c.tables[v].as_ref().map(|table| {
            let parent_levels: Vec<usize> = self.c.parents[v].iter().map(|&p| level[p]).collect();
            table.row(table.row_index(&parent_levels))
        });
        for &l in &self.domains[depth] {
            let w = row.map_or(weight, |r| weight * r[l]);
            if w == 0.0 {
                continue;
            }
            level[v] = l;
            self.visit(depth + 1, w, level, joint);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Cpt, Node, VariableSpec};

    fn cold_stress(p_none_given_stress: f64) -> Network {
        let region = VariableSpec::new("ColdStressRegion", ["absent", "present"]).unwrap();
        let reports = VariableSpec::new("ReportsOfColdStress", ["none", "reported"]).unwrap();
        Network::new(vec![
            Node::chance(region, &[], Cpt::new(vec![], 2, vec![0.05, 0.95]).unwrap()),
            Node::chance(
                reports,
                &["ColdStressRegion"],
                Cpt::new(vec![2], 2, vec![0.95, 0.05, p_none_given_stress, 1.0 - p_none_given_stress]).unwrap(),
            ),
        ])
        .unwrap()
    }

    fn no_reports() -> Evidence {
        Evidence::new().with("ReportsOfColdStress", "none")
    }

    #[test]
    fn cold_stress_posteriors() {
        let q = Query::single("ColdStressRegion", no_reports());
        let low = posterior(&cold_stress(0.025), &q).unwrap();
        assert!((low.prob_of("ColdStressRegion", "present").unwrap() - 1.0 / 3.0).abs() < 1e-9);
        let high = posterior(&cold_stress(0.1), &q).unwrap();
        assert!((high.prob_of("ColdStressRegion", "present").unwrap() - 2.0 / 3.0).abs() < 1e-9);
        let oracle = enumerate_joint(&cold_stress(0.025), &q).unwrap();
        assert!((oracle.probabilities()[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn evidence_probability() {
        let net = cold_stress(0.025);
        assert_eq!(prob_of_evidence(&net, &Evidence::new()).unwrap(), 1.0);
        let p = prob_of_evidence(&net, &no_reports()).unwrap();
        assert!((p - (0.95 * 0.025 + 0.05 * 0.95)).abs() < 1e-15);
    }

    #[test]
    fn empty_evidence_gives_prior() {
        let d = posterior(&cold_stress(0.025), &Query::single("ColdStressRegion", Evidence::new())).unwrap();
        assert_eq!(d.probabilities(), &[0.05, 0.95]);
    }

    #[test]
    fn impossible_evidence_is_reported() {
        let net = cold_stress(0.025)
            .with_cpd("ColdStressRegion", crate::model::Cpd::Table(Cpt::new(vec![], 2, vec![1.0, 0.0]).unwrap()))
            .unwrap();
        let ev = Evidence::new().with("ColdStressRegion", "present");
        assert_eq!(prob_of_evidence(&net, &ev).unwrap(), 0.0);
        assert_eq!(
            posterior(&net, &Query::single("ReportsOfColdStress", ev)),
            Err(InferenceError::ImpossibleEvidence)
        );
    }

    #[test]
    fn observed_target_is_certain() {
        let d = posterior(&cold_stress(0.025), &Query::single("ReportsOfColdStress", no_reports())).unwrap();
        assert_eq!(d.probabilities(), &[1.0, 0.0]);
    }

    #[test]
    fn complement_findings() {
        let net = cold_stress(0.025);
        let mut f = Findings::default();
        f.exclude(&net, "ReportsOfColdStress", "reported").unwrap();
        let d = posterior_given(&net, &["ColdStressRegion".into()], &f, &EliminationOrder::default()).unwrap();
        assert!((d.probabilities()[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn bad_names_are_model_errors() {
        let net = cold_stress(0.025);
        assert!(matches!(
            posterior(&net, &Query::single("Nope", Evidence::new())),
            Err(InferenceError::Model(ModelError::UnknownNode(_)))
        ));
        let ev = Evidence::new().with("ReportsOfColdStress", "maybe");
        assert!(matches!(
            posterior(&net, &Query::single("ColdStressRegion", ev)),
            Err(InferenceError::Model(ModelError::UnknownLevel { .. }))
        ));
    }
}
