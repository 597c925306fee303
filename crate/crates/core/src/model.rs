//! Variables, nodes, conditional probability tables and network topology.
//!
//! A [`Network`] is a plain container: construction only rejects duplicate
//! node names. Everything else (cycles, dangling parents, table shapes, row
//! normalization) is reported by [`validate`], which never fails.

use std::borrow::Cow;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical::{compile_to_cpt, CanonicalError, NoisyMaxSpec, NoisyOrSpec};
use crate::decision::UtilityTable;

/// Tolerance on the sum of every probability row.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// Rows whose sum is off by less than this are left untouched on load.
const RENORMALIZE_FLOOR: f64 = 1e-12;

/// The approximate numbers used when quantifying assessed probabilities.
/// Values off this set are reported as lints, never as errors.
pub const PROBABILITY_PALETTE: [f64; 13] =
    [0.0, 0.01, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.8, 0.9, 0.95, 0.99, 1.0];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("variable `{0}` needs at least two levels")]
    TooFewLevels(String),
    #[error("variable `{variable}` declares level `{level}` more than once")]
    DuplicateLevel { variable: String, level: String },
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("node `{node}` has no level `{level}`")]
    UnknownLevel { node: String, level: String },
    #[error("cycle through {}", .0.join(", "))]
    Cycle(Vec<String>),
    #[error("table shape mismatch: expected {expected} entries, found {found}")]
    Shape { expected: usize, found: usize },
    #[error("level sets differ: `{0}` does not share the child's levels")]
    LevelSetMismatch(String),
    #[error("node `{0}` carries no probability distribution")]
    NoDistribution(String),
    #[error("node `{node}`: {source}")]
    Canonical {
        node: String,
        #[source]
        source: Box<CanonicalError>,
    },
    #[error("utility node `{0}` cannot be observed")]
    UtilityEvidence(String),
}

/// A discrete variable with named, ordered levels. Level 0 is the
/// "absent" state for causal variables and levels are severity ordered.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableSpec {
    name: String,
    levels: Vec<String>,
}

impl VariableSpec {
    pub fn new<S: Into<String>>(
        name: impl Into<String>,
        levels: impl IntoIterator<Item = S>,
    ) -> Result<Self, ModelError> {
        let name = name.into();
        let levels: Vec<String> = levels.into_iter().map(Into::into).collect();
        if levels.len() < 2 {
            return Err(ModelError::TooFewLevels(name));
        }
        let mut seen = BTreeSet::new();
        for level in &levels {
            if !seen.insert(level.as_str()) {
                return Err(ModelError::DuplicateLevel { variable: name, level: level.clone() });
            }
        }
        Ok(Self { name, levels })
    }

    /// The value carried by a utility node has no levels.
    pub fn utility(name: impl Into<String>) -> Self {
        Self { name: name.into(), levels: Vec::new() }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn levels(&self) -> &[String] {
        &self.levels
    }

    pub fn cardinality(&self) -> usize {
        self.levels.len()
    }

    pub fn level_index(&self, level: &str) -> Option<usize> {
        self.levels.iter().position(|l| l == level)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Chance,
    Deterministic,
    Decision,
    Utility,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Chance => "chance",
            NodeKind::Deterministic => "deterministic",
            NodeKind::Decision => "decision",
            NodeKind::Utility => "utility",
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NodeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "chance" => Ok(NodeKind::Chance),
            "deterministic" => Ok(NodeKind::Deterministic),
            "decision" => Ok(NodeKind::Decision),
            "utility" => Ok(NodeKind::Utility),
            other => Err(format!("unknown node kind `{other}`")),
        }
    }
}

/// A full conditional probability table.
///
/// Rows are ordered by an odometer over the parents in declared order, last
/// parent fastest; each row is a distribution over the child's levels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cpt {
    parent_cards: Vec<usize>,
    child_card: usize,
    probs: Vec<f64>,
}

impl Cpt {
    /// Checks the shape only. Normalization is a [`validate`] concern so a
    /// malformed table can still be represented and reported.
    pub fn new(parent_cards: Vec<usize>, child_card: usize, probs: Vec<f64>) -> Result<Self, ModelError> {
        let expected = parent_cards.iter().product::<usize>() * child_card;
        if probs.len() != expected {
            return Err(ModelError::Shape { expected, found: probs.len() });
        }
        Ok(Self { parent_cards, child_card, probs })
    }

    pub fn from_rows(parent_cards: Vec<usize>, rows: &[Vec<f64>]) -> Result<Self, ModelError> {
        let child_card = rows.first().map_or(0, Vec::len);
        let expected_rows = parent_cards.iter().product::<usize>();
        if rows.len() != expected_rows || rows.iter().any(|r| r.len() != child_card) {
            return Err(ModelError::Shape {
                expected: expected_rows * child_card.max(1),
                found: rows.iter().map(Vec::len).sum(),
            });
        }
        Ok(Self { parent_cards, child_card, probs: rows.concat() })
    }

    pub fn parent_cards(&self) -> &[usize] {
        &self.parent_cards
    }

    pub fn child_card(&self) -> usize {
        self.child_card
    }

    pub fn num_rows(&self) -> usize {
        self.parent_cards.iter().product()
    }

    pub fn row(&self, index: usize) -> &[f64] {
        &self.probs[index * self.child_card..(index + 1) * self.child_card]
    }

    pub fn row_mut(&mut self, index: usize) -> &mut [f64] {
        &mut self.probs[index * self.child_card..(index + 1) * self.child_card]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.probs.chunks(self.child_card.max(1))
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    /// Row index of a parent assignment.
    pub fn row_index(&self, parent_levels: &[usize]) -> usize {
        parent_levels
            .iter()
            .zip(&self.parent_cards)
            .fold(0, |acc, (&level, &card)| acc * card + level)
    }

    /// Parent assignment of a row index (inverse of [`Cpt::row_index`]).
    pub fn parent_assignment(&self, mut row: usize) -> Vec<usize> {
        let mut out = vec![0; self.parent_cards.len()];
        for (slot, &card) in out.iter_mut().zip(&self.parent_cards).rev() {
            *slot = row % card;
            row /= card;
        }
        out
    }

    pub fn prob(&self, parent_levels: &[usize], child_level: usize) -> f64 {
        self.probs[self.row_index(parent_levels) * self.child_card + child_level]
    }

    /// Rescales rows whose sum is within [`ROW_SUM_TOLERANCE`] of one.
    /// Rows further off are left for [`validate`] to report.
    pub fn renormalize_within_tolerance(&mut self) {
        let card = self.child_card.max(1);
        for row in self.probs.chunks_mut(card) {
            let sum: f64 = row.iter().sum();
            let off = (sum - 1.0).abs();
            if off > RENORMALIZE_FLOOR && off <= ROW_SUM_TOLERANCE {
                row.iter_mut().for_each(|p| *p /= sum);
            }
        }
    }
}

/// The distribution (or value table) attached to a node.
#[derive(Clone, Debug, PartialEq)]
pub enum Cpd {
    Table(Cpt),
    NoisyOr(NoisyOrSpec),
    NoisyMax(NoisyMaxSpec),
    /// Deterministic maximum of the parents' levels.
    Max,
    Utility(UtilityTable),
    None,
}

impl Cpd {
    pub fn is_canonical(&self) -> bool {
        matches!(self, Cpd::NoisyOr(_) | Cpd::NoisyMax(_))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub variable: VariableSpec,
    pub kind: NodeKind,
    pub parents: Vec<String>,
    pub cpd: Cpd,
    /// Free-form attributes such as `diagnosis` or `indicant`.
    pub tags: Vec<String>,
}

impl Node {
    pub fn new(variable: VariableSpec, kind: NodeKind, parents: Vec<String>, cpd: Cpd) -> Self {
        Self { variable, kind, parents, cpd, tags: Vec::new() }
    }

    pub fn chance(variable: VariableSpec, parents: &[&str], cpt: Cpt) -> Self {
        Self::new(
            variable,
            NodeKind::Chance,
            parents.iter().map(|p| p.to_string()).collect(),
            Cpd::Table(cpt),
        )
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.tags.push(tag.into());
        self
    }

    pub fn name(&self) -> &str {
        self.variable.name()
    }

    pub fn cardinality(&self) -> usize {
        self.variable.cardinality()
    }

    pub fn has_tag(&self, tag: &str) -> bool {
        self.tags.iter().any(|t| t == tag)
    }
}

/// A named collection of nodes; edges are implied by parent lists.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    nodes: Vec<Node>,
    index: HashMap<String, usize>,
}

impl Network {
    pub fn new(nodes: Vec<Node>) -> Result<Self, ModelError> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, node) in nodes.iter().enumerate() {
            if index.insert(node.name().to_string(), i).is_some() {
                return Err(ModelError::DuplicateNode(node.name().to_string()));
            }
        }
        Ok(Self { nodes, index })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, name: &str) -> Option<&Node> {
        self.index.get(name).map(|&i| &self.nodes[i])
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn require(&self, name: &str) -> Result<usize, ModelError> {
        self.index_of(name).ok_or_else(|| ModelError::UnknownNode(name.to_string()))
    }

    /// Replaces the distribution of one node, keeping everything else.
    pub fn with_cpd(&self, name: &str, cpd: Cpd) -> Result<Network, ModelError> {
        let i = self.require(name)?;
        let mut net = self.clone();
        net.nodes[i].cpd = cpd;
        Ok(net)
    }

    /// Parent indices of every node; unresolved parents are skipped.
    pub fn parent_indices(&self) -> Vec<Vec<usize>> {
        self.nodes
            .iter()
            .map(|n| n.parents.iter().filter_map(|p| self.index_of(p)).collect())
            .collect()
    }

    pub fn children_of(&self, name: &str) -> Vec<&str> {
        self.nodes
            .iter()
            .filter(|n| n.parents.iter().any(|p| p == name))
            .map(Node::name)
            .collect()
    }

    pub fn utility_node(&self) -> Option<&Node> {
        self.nodes.iter().find(|n| n.kind == NodeKind::Utility)
    }

    pub fn decision_nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Decision)
    }

    pub fn tagged<'a>(&'a self, tag: &'a str) -> impl Iterator<Item = &'a Node> + 'a {
        self.nodes.iter().filter(move |n| n.has_tag(tag))
    }

    /// The full table for a chance or deterministic node, expanding
    /// canonical and deterministic-MAX specifications on the fly.
    pub fn cpt_of(&self, name: &str) -> Result<Cow<'_, Cpt>, ModelError> {
        let node = &self.nodes[self.require(name)?];
        let parent_specs = node
            .parents
            .iter()
            .map(|p| self.node(p).map(|n| &n.variable).ok_or_else(|| ModelError::UnknownNode(p.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        let parent_cards: Vec<usize> = parent_specs.iter().map(|v| v.cardinality()).collect();
        let canonical = |e| ModelError::Canonical { node: node.name().to_string(), source: Box::new(e) };
        match &node.cpd {
            Cpd::Table(cpt) => Ok(Cow::Borrowed(cpt)),
            Cpd::NoisyOr(spec) => compile_to_cpt(spec, &parent_cards).map(Cow::Owned).map_err(canonical),
            Cpd::NoisyMax(spec) => compile_to_cpt(spec, &parent_cards).map(Cow::Owned).map_err(canonical),
            Cpd::Max => {
                let owned: Vec<VariableSpec> = parent_specs.into_iter().cloned().collect();
                expand_deterministic_max(&owned, &node.variable).map(Cow::Owned)
            }
            Cpd::Utility(_) | Cpd::None => Err(ModelError::NoDistribution(node.name().to_string())),
        }
    }
}

/// Observed levels, keyed by variable name.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    assignments: BTreeMap<String, String>,
}

impl Evidence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, variable: impl Into<String>, level: impl Into<String>) -> Self {
        self.set(variable, level);
        self
    }

    pub fn set(&mut self, variable: impl Into<String>, level: impl Into<String>) -> Option<String> {
        self.assignments.insert(variable.into(), level.into())
    }

    pub fn remove(&mut self, variable: &str) -> Option<String> {
        self.assignments.remove(variable)
    }

    pub fn get(&self, variable: &str) -> Option<&str> {
        self.assignments.get(variable).map(String::as_str)
    }

    pub fn contains(&self, variable: &str) -> bool {
        self.assignments.contains_key(variable)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.assignments.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    /// Overlays `other` on top of `self`.
    pub fn merged(&self, other: &Evidence) -> Evidence {
        let mut out = self.clone();
        for (k, v) in other.iter() {
            out.set(k, v);
        }
        out
    }

    /// Resolves every assignment to `(node index, level index)`.
    pub fn resolve(&self, net: &Network) -> Result<Vec<(usize, usize)>, ModelError> {
        self.iter()
            .map(|(var, level)| {
                let i = net.require(var)?;
                let node = &net.nodes()[i];
                if node.kind == NodeKind::Utility {
                    return Err(ModelError::UtilityEvidence(var.to_string()));
                }
                let l = node.variable.level_index(level).ok_or_else(|| ModelError::UnknownLevel {
                    node: var.to_string(),
                    level: level.to_string(),
                })?;
                Ok((i, l))
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Lint,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ViolationKind {
    Cycle { nodes: Vec<String> },
    DanglingParent { parent: String },
    DuplicateParent { parent: String },
    TooFewLevels,
    Shape { message: String },
    RowSum { row: usize, sum: f64 },
    EntryRange { row: usize, column: usize, value: f64 },
    MissingDistribution,
    UnexpectedDistribution,
    Canonical { message: String },
    MultipleUtility { nodes: Vec<String> },
    UtilityHasChildren { children: Vec<String> },
    OffPalette { location: String, values: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub severity: Severity,
    pub node: Option<String>,
    #[serde(flatten)]
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(node) = &self.node {
            write!(f, "node `{node}`: ")?;
        }
        match &self.kind {
            ViolationKind::Cycle { nodes } => write!(f, "cycle through {}", nodes.join(", ")),
            ViolationKind::DanglingParent { parent } => write!(f, "unknown parent `{parent}`"),
            ViolationKind::DuplicateParent { parent } => write!(f, "parent `{parent}` listed twice"),
            ViolationKind::TooFewLevels => write!(f, "fewer than two levels"),
            ViolationKind::Shape { message } => write!(f, "{message}"),
            ViolationKind::RowSum { row, sum } => write!(f, "row {row} sums to {sum}, not 1"),
            ViolationKind::EntryRange { row, column, value } => {
                write!(f, "row {row} column {column} holds {value}, outside [0, 1]")
            }
            ViolationKind::MissingDistribution => write!(f, "missing distribution"),
            ViolationKind::UnexpectedDistribution => write!(f, "decision nodes carry no distribution"),
            ViolationKind::Canonical { message } => write!(f, "{message}"),
            ViolationKind::MultipleUtility { nodes } => {
                write!(f, "more than one utility node: {}", nodes.join(", "))
            }
            ViolationKind::UtilityHasChildren { children } => {
                write!(f, "utility node has children: {}", children.join(", "))
            }
            ViolationKind::OffPalette { location, values } => {
                let shown: Vec<String> = values.iter().map(|v| v.to_string()).collect();
                let noun = if values.len() == 1 { "value" } else { "values" };
                write!(f, "{location} uses unusual assessment {noun} {}", shown.join(", "))
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn errors(&self) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(|v| v.severity == Severity::Error)
    }

    pub fn lints(&self) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(|v| v.severity == Severity::Lint)
    }

    /// True when no error-severity violation was found. Lints do not count.
    pub fn is_well_formed(&self) -> bool {
        self.errors().next().is_none()
    }

    fn error(&mut self, node: Option<&str>, kind: ViolationKind) {
        self.violations.push(Violation { severity: Severity::Error, node: node.map(str::to_string), kind });
    }

    fn lint(&mut self, node: &str, kind: ViolationKind) {
        self.violations.push(Violation { severity: Severity::Lint, node: Some(node.to_string()), kind });
    }
}

fn on_palette(p: f64) -> bool {
    PROBABILITY_PALETTE.iter().any(|q| (p - q).abs() <= ROW_SUM_TOLERANCE)
}

/// Structural and numerical checks. All problems become report entries.
pub fn validate(net: &Network) -> ValidationReport {
    let mut report = ValidationReport::default();

    for scc in cyclic_components(net) {
        report.error(None, ViolationKind::Cycle { nodes: scc });
    }

    let utilities: Vec<String> = net
        .nodes()
        .iter()
        .filter(|n| n.kind == NodeKind::Utility)
        .map(|n| n.name().to_string())
        .collect();
    if utilities.len() > 1 {
        report.error(None, ViolationKind::MultipleUtility { nodes: utilities.clone() });
    }

    for node in net.nodes() {
        let name = node.name();
        let mut parents_ok = true;
        let mut seen = BTreeSet::new();
        for parent in &node.parents {
            if !seen.insert(parent.as_str()) {
                report.error(Some(name), ViolationKind::DuplicateParent { parent: parent.clone() });
                parents_ok = false;
            }
            match net.node(parent) {
                None => {
                    report.error(Some(name), ViolationKind::DanglingParent { parent: parent.clone() });
                    parents_ok = false;
                }
                Some(p) if p.kind == NodeKind::Utility => {
                    // reported once below via UtilityHasChildren
                }
                Some(_) => {}
            }
        }

        if node.kind != NodeKind::Utility && node.cardinality() < 2 {
            report.error(Some(name), ViolationKind::TooFewLevels);
        }

        match (node.kind, &node.cpd) {
            (NodeKind::Decision, Cpd::None) => {}
            (NodeKind::Decision, _) => report.error(Some(name), ViolationKind::UnexpectedDistribution),
            (NodeKind::Utility, Cpd::Utility(table)) => {
                if parents_ok {
                    let expected: usize = node
                        .parents
                        .iter()
                        .filter_map(|p| net.node(p))
                        .map(Node::cardinality)
                        .product();
                    if table.values().len() != expected {
                        report.error(
                            Some(name),
                            ViolationKind::Shape {
                                message: format!(
                                    "utility table has {} values, expected {expected}",
                                    table.values().len()
                                ),
                            },
                        );
                    }
                }
                if table.values().iter().any(|v| !v.is_finite()) {
                    report.error(
                        Some(name),
                        ViolationKind::Shape { message: "utility values must be finite".into() },
                    );
                }
            }
            (NodeKind::Utility, _) => report.error(Some(name), ViolationKind::MissingDistribution),
            (_, Cpd::None) | (_, Cpd::Utility(_)) => {
                report.error(Some(name), ViolationKind::MissingDistribution)
            }
            (_, cpd) => {
                if parents_ok {
                    check_distribution(net, node, cpd, &mut report);
                }
            }
        }

        if node.kind == NodeKind::Utility {
            let children: Vec<String> = net.children_of(name).into_iter().map(str::to_string).collect();
            if !children.is_empty() {
                report.error(Some(name), ViolationKind::UtilityHasChildren { children });
            }
        }
    }
    report
}

fn check_distribution(net: &Network, node: &Node, cpd: &Cpd, report: &mut ValidationReport) {
    let name = node.name();
    // lint the assessed numbers, not the compiled ones
    let mut lint = |location: String, values: &[f64]| {
        let off: Vec<f64> = values.iter().copied().filter(|&p| (0.0..=1.0).contains(&p) && !on_palette(p)).collect();
        if !off.is_empty() {
            report.lint(name, ViolationKind::OffPalette { location, values: off });
        }
    };
    match cpd {
        Cpd::Table(cpt) => {
            for (r, row) in cpt.rows().enumerate() {
                lint(format!("row {r}"), row);
            }
        }
        Cpd::NoisyOr(spec) => {
            lint("leak".into(), &[spec.leak]);
            for (cause, p) in &spec.causes {
                lint(format!("cause {cause}"), &[*p]);
            }
        }
        Cpd::NoisyMax(spec) => {
            // a binary child's entry is a single written probability
            let skip = usize::from(spec.child_card == 2);
            if let Some(leak) = &spec.leak {
                lint("leak".into(), &leak[skip..]);
            }
            for (cause, level, dist) in spec.assessed_distributions() {
                lint(format!("cause {cause}:{level}"), &dist[skip..]);
            }
        }
        _ => {}
    }

    let cpt = match net.cpt_of(name) {
        Ok(cpt) => cpt,
        Err(ModelError::Canonical { source, .. }) => {
            report.error(Some(name), ViolationKind::Canonical { message: source.to_string() });
            return;
        }
        Err(e) => {
            report.error(Some(name), ViolationKind::Shape { message: e.to_string() });
            return;
        }
    };
    let parent_cards: Vec<usize> =
        node.parents.iter().filter_map(|p| net.node(p)).map(Node::cardinality).collect();
    if cpt.parent_cards() != parent_cards.as_slice() || cpt.child_card() != node.cardinality() {
        report.error(
            Some(name),
            ViolationKind::Shape {
                message: format!(
                    "table is {:?} -> {}, parents and levels require {:?} -> {}",
                    cpt.parent_cards(),
                    cpt.child_card(),
                    parent_cards,
                    node.cardinality()
                ),
            },
        );
        return;
    }
    for (r, row) in cpt.rows().enumerate() {
        for (c, &p) in row.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) || p.is_nan() {
                report.error(Some(name), ViolationKind::EntryRange { row: r, column: c, value: p });
            }
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
            report.error(Some(name), ViolationKind::RowSum { row: r, sum });
        }
    }
}

/// Node order with every parent before its children. Ties go to the
/// earliest declared node. Parents that do not resolve are ignored here.
pub fn topological_order(net: &Network) -> Result<Vec<String>, ModelError> {
    topological_indices(net).map(|order| order.into_iter().map(|i| net.nodes()[i].name().to_string()).collect())
}

pub(crate) fn topological_indices(net: &Network) -> Result<Vec<usize>, ModelError> {
    let parents = net.parent_indices();
    let n = net.len();
    let mut indegree: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut children = vec![Vec::new(); n];
    for (child, ps) in parents.iter().enumerate() {
        for &p in ps {
            children[p].push(child);
        }
    }
    let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(i) = ready.pop_first() {
        order.push(i);
        for &c in &children[i] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.insert(c);
            }
        }
    }
    if order.len() == n {
        Ok(order)
    } else {
        let scc = cyclic_components(net).into_iter().next().unwrap_or_default();
        Err(ModelError::Cycle(scc))
    }
}

/// Strongly connected components that contain a cycle, each listed in
/// declaration order; components ordered by their first member.
fn cyclic_components(net: &Network) -> Vec<Vec<String>> {
    let parents = net.parent_indices();
    let n = net.len();
    // Tarjan over parent edges; the component sets are the same either way.
    struct State {
        index: Vec<Option<usize>>,
        low: Vec<usize>,
        on_stack: Vec<bool>,
        stack: Vec<usize>,
        next: usize,
        out: Vec<Vec<usize>>,
    }
    fn strong(v: usize, g: &[Vec<usize>], s: &mut State) {
        s.index[v] = Some(s.next);
        s.low[v] = s.next;
        s.next += 1;
        s.stack.push(v);
        s.on_stack[v] = true;
        for &w in &g[v] {
            match s.index[w] {
                None => {
                    strong(w, g, s);
                    s.low[v] = s.low[v].min(s.low[w]);
                }
                Some(iw) if s.on_stack[w] => s.low[v] = s.low[v].min(iw),
                Some(_) => {}
            }
        }
        if Some(s.low[v]) == s.index[v] {
            let mut comp = Vec::new();
            loop {
                let w = s.stack.pop().expect("tarjan stack");
                s.on_stack[w] = false;
                comp.push(w);
                if w == v {
                    break;
                }
            }
            s.out.push(comp);
        }
    }
    let mut s = State {
        index: vec![None; n],
        low: vec![0; n],
        on_stack: vec![false; n],
        stack: Vec::new(),
        next: 0,
        out: Vec::new(),
    };
    for v in 0..n {
        if s.index[v].is_none() {
            strong(v, &parents, &mut s);
        }
    }
    let mut cycles: Vec<Vec<usize>> = s
        .out
        .into_iter()
        .filter(|c| c.len() > 1 || parents[c[0]].contains(&c[0]))
        .map(|mut c| {
            c.sort_unstable();
            c
        })
        .collect();
    cycles.sort();
    cycles
        .into_iter()
        .map(|c| c.into_iter().map(|i| net.nodes()[i].name().to_string()).collect())
        .collect()
}

/// Degenerate table putting all mass on the maximum parent level.
pub fn expand_deterministic_max(parents: &[VariableSpec], child: &VariableSpec) -> Result<Cpt, ModelError> {
    for p in parents {
        if p.levels() != child.levels() {
            return Err(ModelError::LevelSetMismatch(p.name().to_string()));
        }
    }
    let card = child.cardinality();
    let parent_cards = vec![card; parents.len()];
    let rows: usize = parent_cards.iter().product();
    let mut probs = vec![0.0; rows * card];
    let mut cpt_shape = Cpt { parent_cards, child_card: card, probs: Vec::new() };
    for r in 0..rows {
        let max = cpt_shape.parent_assignment(r).into_iter().max().unwrap_or(0);
        probs[r * card + max] = 1.0;
    }
    cpt_shape.probs = probs;
    Ok(cpt_shape)
}

/// Whether `xs` and `ys` are d-separated given `given`, with optional extra
/// virtual root parents attached to listed nodes (used to model an
/// assessment error feeding a single node). Virtual nodes are addressed as
/// `net.len() + k` in `xs`.
pub(crate) fn d_separated_with_virtual(
    net: &Network,
    xs: &[usize],
    ys: &[usize],
    given: &[usize],
    virtual_parent_of: &[usize],
) -> bool {
    let n = net.len();
    let total = n + virtual_parent_of.len();
    let mut parents = net.parent_indices();
    parents.resize(total, Vec::new());
    for (k, &child) in virtual_parent_of.iter().enumerate() {
        parents[child].push(n + k);
    }
    let mut children = vec![Vec::new(); total];
    for (c, ps) in parents.iter().enumerate() {
        for &p in ps {
            children[p].push(c);
        }
    }
    let observed: BTreeSet<usize> = given.iter().copied().collect();

    // ancestors of the observed set (for collider activation)
    let mut anc_obs = vec![false; total];
    let mut stack: Vec<usize> = observed.iter().copied().collect();
    while let Some(v) = stack.pop() {
        if !anc_obs[v] {
            anc_obs[v] = true;
            stack.extend(parents[v].iter().copied());
        }
    }

    // reachable search over (node, arrived-from-child?) pairs
    let mut visited = BTreeSet::new();
    let mut frontier: Vec<(usize, bool)> = xs.iter().map(|&x| (x, true)).collect();
    let targets: BTreeSet<usize> = ys.iter().copied().collect();
    while let Some((v, from_child)) = frontier.pop() {
        if !visited.insert((v, from_child)) {
            continue;
        }
        let is_obs = observed.contains(&v);
        if !is_obs && targets.contains(&v) {
            return false;
        }
        if from_child {
            if !is_obs {
                frontier.extend(parents[v].iter().map(|&p| (p, true)));
                frontier.extend(children[v].iter().map(|&c| (c, false)));
            }
        } else {
            if !is_obs {
                frontier.extend(children[v].iter().map(|&c| (c, false)));
            }
            if anc_obs[v] {
                frontier.extend(parents[v].iter().map(|&p| (p, true)));
            }
        }
    }
    true
}

/// Classic d-separation test between two node sets.
pub fn d_separated(net: &Network, xs: &[&str], ys: &[&str], given: &[&str]) -> Result<bool, ModelError> {
    let idx = |names: &[&str]| names.iter().map(|n| net.require(n)).collect::<Result<Vec<_>, _>>();
    Ok(d_separated_with_virtual(net, &idx(xs)?, &idx(ys)?, &idx(given)?, &[]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary(name: &str) -> VariableSpec {
        VariableSpec::new(name, ["no", "yes"]).unwrap()
    }

    fn chain() -> Network {
        Network::new(vec![
            Node::chance(binary("A"), &[], Cpt::new(vec![], 2, vec![0.3, 0.7]).unwrap()),
            Node::chance(binary("B"), &["A"], Cpt::new(vec![2], 2, vec![0.9, 0.1, 0.2, 0.8]).unwrap()),
        ])
        .unwrap()
    }

    #[test]
    fn well_formed_chain_has_no_violations() {
        let report = validate(&chain());
        assert!(report.violations.is_empty(), "{:?}", report.violations);
    }

    #[test]
    fn two_cycle_is_reported_once() {
        let net = Network::new(vec![
            Node::chance(binary("A"), &["B"], Cpt::new(vec![2], 2, vec![0.5; 4]).unwrap()),
            Node::chance(binary("B"), &["A"], Cpt::new(vec![2], 2, vec![0.5; 4]).unwrap()),
        ])
        .unwrap();
        let report = validate(&net);
        let cycles: Vec<_> = report
            .errors()
            .filter_map(|v| match &v.kind {
                ViolationKind::Cycle { nodes } => Some(nodes.clone()),
                _ => None,
            })
            .collect();
        assert_eq!(cycles, vec![vec!["A".to_string(), "B".to_string()]]);
        assert_eq!(topological_order(&net), Err(ModelError::Cycle(vec!["A".into(), "B".into()])));
    }

    #[test]
    fn bad_row_sum_names_row_and_sum() {
        let net = chain()
            .with_cpd("B", Cpd::Table(Cpt::new(vec![2], 2, vec![0.9, 0.1, 0.6, 0.5]).unwrap()))
            .unwrap();
        let report = validate(&net);
        let errs: Vec<_> = report.errors().collect();
        assert_eq!(errs.len(), 1);
        match &errs[0].kind {
            ViolationKind::RowSum { row, sum } => {
                assert_eq!(*row, 1);
                assert!((sum - 1.1).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn off_palette_values_are_lints_only() {
        let net = chain()
            .with_cpd("A", Cpd::Table(Cpt::new(vec![], 2, vec![0.025, 0.975]).unwrap()))
            .unwrap();
        let report = validate(&net);
        assert!(report.is_well_formed());
        let lints: Vec<_> = report.lints().collect();
        assert_eq!(lints.len(), 1);
        assert!(matches!(&lints[0].kind, ViolationKind::OffPalette { values, .. } if values == &[0.025, 0.975]));
    }

    #[test]
    fn topological_order_breaks_ties_by_declaration() {
        let u = |n: &str| Node::chance(binary(n), &[], Cpt::new(vec![], 2, vec![0.5, 0.5]).unwrap());
        let net = Network::new(vec![u("Y"), u("X")]).unwrap();
        assert_eq!(topological_order(&net).unwrap(), vec!["Y", "X"]);

        let fan = Network::new(vec![
            u("A"),
            Node::chance(binary("B"), &["A"], Cpt::new(vec![2], 2, vec![0.5; 4]).unwrap()),
            Node::chance(binary("C"), &["A"], Cpt::new(vec![2], 2, vec![0.5; 4]).unwrap()),
        ])
        .unwrap();
        assert_eq!(topological_order(&fan).unwrap(), vec!["A", "B", "C"]);
    }

    #[test]
    fn dangling_parent_and_multiple_utilities() {
        let net = Network::new(vec![
            Node::chance(binary("A"), &["Ghost"], Cpt::new(vec![2], 2, vec![0.5; 4]).unwrap()),
            Node::new(VariableSpec::utility("U1"), NodeKind::Utility, vec![], Cpd::Utility(UtilityTable::new(vec![0.0]))),
            Node::new(VariableSpec::utility("U2"), NodeKind::Utility, vec![], Cpd::Utility(UtilityTable::new(vec![0.0]))),
        ])
        .unwrap();
        let kinds: Vec<_> = validate(&net).errors().map(|v| v.kind.clone()).collect();
        assert!(kinds.contains(&ViolationKind::DanglingParent { parent: "Ghost".into() }));
        assert!(kinds.iter().any(|k| matches!(k, ViolationKind::MultipleUtility { .. })));
    }

    #[test]
    fn max_of_recoverable_and_none_is_recoverable() {
        let levels = ["None", "Recoverable", "BeyondRecovery"];
        let water = VariableSpec::new("WaterStress", levels).unwrap();
        let winter = VariableSpec::new("WinterStress", levels).unwrap();
        let abiotic = VariableSpec::new("AbioticStress", levels).unwrap();
        let cpt = expand_deterministic_max(&[water, winter], &abiotic).unwrap();
        assert_eq!(cpt.row(cpt.row_index(&[1, 0])), &[0.0, 1.0, 0.0]);
        assert_eq!(cpt.row(cpt.row_index(&[0, 0])), &[1.0, 0.0, 0.0]);
        for r in 0..cpt.num_rows() {
            let assignment = cpt.parent_assignment(r);
            let max = *assignment.iter().max().unwrap();
            for (k, &p) in cpt.row(r).iter().enumerate() {
                assert_eq!(p, if k == max { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn max_rejects_mismatched_levels() {
        let a = VariableSpec::new("A", ["none", "some"]).unwrap();
        let b = VariableSpec::new("B", ["none", "lots"]).unwrap();
        assert_eq!(
            expand_deterministic_max(&[a.clone(), b], &a),
            Err(ModelError::LevelSetMismatch("B".into()))
        );
    }

    #[test]
    fn variable_spec_rejects_duplicates_and_singletons() {
        assert!(VariableSpec::new("X", ["a"]).is_err());
        assert!(VariableSpec::new("X", ["a", "a"]).is_err());
    }

    #[test]
    fn renormalize_only_within_tolerance() {
        let mut cpt = Cpt::new(vec![2], 2, vec![0.5, 0.5 + 5e-10, 0.6, 0.5]).unwrap();
        cpt.renormalize_within_tolerance();
        assert!((cpt.row(0).iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(cpt.row(1), &[0.6, 0.5]);
    }

    #[test]
    fn collider_d_separation() {
        let u = |n: &str| Node::chance(binary(n), &[], Cpt::new(vec![], 2, vec![0.5, 0.5]).unwrap());
        let net = Network::new(vec![
            u("A"),
            u("B"),
            Node::chance(binary("C"), &["A", "B"], Cpt::new(vec![2, 2], 2, vec![0.5; 8]).unwrap()),
        ])
        .unwrap();
        assert!(d_separated(&net, &["A"], &["B"], &[]).unwrap());
        assert!(!d_separated(&net, &["A"], &["B"], &["C"]).unwrap());
    }
}
