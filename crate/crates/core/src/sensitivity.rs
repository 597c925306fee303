//! How much posteriors and decisions move when assessed probabilities are
//! wrong.
//!
//! The sensitivity range of `y` with respect to a pivot event `x` is
//! `P(y | x) - P(y | not x)`. When `y` is independent of an assessment error
//! given `x`, `P(y | e)` is affine in `P(x | e)` with exactly that slope, so
//! it bounds how far any error in `P(x | e)` can push `P(y | e)`.
//!
//! For diagnostic links the odds-likelihood form is used instead:
//! `p(a | b) = L * O / (L * O + 1)` with `dp / dL = O / (L * O + 1)^2`.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::decision::{decision_node, recommend, AlternativeValue, DecisionError};
use crate::inference::{posterior_given, EliminationOrder, Findings, InferenceError};
use crate::model::{d_separated_with_virtual, Cpd, Evidence, ModelError, Network, NodeKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SensitivityError {
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Decision(#[from] DecisionError),
    #[error("pivot `{event}` has zero probability when {}", if *.negated { "negated" } else { "asserted" })]
    ZeroProbabilityPivot { event: String, negated: bool },
    #[error("`{from}` is not a parent of `{to}`")]
    PathViolation { from: String, to: String },
    #[error("a chain needs at least two events")]
    ChainTooShort,
    #[error("row {row} of `{node}` has no mass left to rescale")]
    DegenerateRow { node: String, row: usize },
    #[error("cell {0} is outside the table")]
    CellOutOfRange(CellRef),
    #[error("sweep value {0} is not a probability")]
    ValueOutOfRange(f64),
    #[error("`{0}` has no probability table")]
    NotAProbabilityNode(String),
    #[error("malformed {what} `{text}`")]
    Syntax { what: &'static str, text: String },
}

impl From<ModelError> for SensitivityError {
    fn from(e: ModelError) -> Self {
        SensitivityError::Inference(e.into())
    }
}

/// `variable = level`, with complement `variable != level`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Event {
    pub variable: String,
    pub level: String,
}

impl Event {
    pub fn new(variable: impl Into<String>, level: impl Into<String>) -> Self {
        Self { variable: variable.into(), level: level.into() }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.variable, self.level)
    }
}

impl FromStr for Event {
    type Err = SensitivityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once('=') {
            Some((v, l)) if !v.trim().is_empty() && !l.trim().is_empty() => Ok(Event::new(v.trim(), l.trim())),
            _ => Err(SensitivityError::Syntax { what: "event", text: s.to_string() }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SensitivityRange {
    pub target: Event,
    pub pivot: Event,
    pub given_pivot: f64,
    pub given_not_pivot: f64,
    pub value: f64,
    /// Whether the target is independent of an error on the pivot given
    /// the pivot. When false the value is still returned, with `warning`.
    pub independent: bool,
    pub warning: Option<String>,
}

fn target_prob(net: &Network, target: &Event, findings: &Findings) -> Result<f64, InferenceError> {
    let dist = posterior_given(net, std::slice::from_ref(&target.variable), findings, &EliminationOrder::default())?;
    dist.prob_of(&target.variable, &target.level).ok_or_else(|| {
        ModelError::UnknownLevel { node: target.variable.clone(), level: target.level.clone() }.into()
    })
}

fn conditioned(net: &Network, target: &Event, background: &Evidence, pivot: &Event, negated: bool) -> Result<f64, SensitivityError> {
    let mut findings = Findings::from_evidence(net, background)?;
    if negated {
        findings.exclude(net, &pivot.variable, &pivot.level)?;
    } else {
        findings.restrict(net, &pivot.variable, &pivot.level)?;
    }
    match target_prob(net, target, &findings) {
        Err(InferenceError::ImpossibleEvidence) => {
            Err(SensitivityError::ZeroProbabilityPivot { event: pivot.to_string(), negated })
        }
        other => Ok(other?),
    }
}

/// Whether `target` is d-separated from a virtual error node feeding
/// `pivot`, given the pivot and the background evidence.
fn error_independent(net: &Network, target: &str, pivot: &str, background: &Evidence) -> Result<bool, ModelError> {
    let t = net.require(target)?;
    let x = net.require(pivot)?;
    let mut given = vec![x];
    for (var, _) in background.iter() {
        given.push(net.require(var)?);
    }
    Ok(d_separated_with_virtual(net, &[net.len()], &[t], &given, &[x]))
}

/// `P(target | pivot, bg) - P(target | not pivot, bg)`.
pub fn sensitivity_range(net: &Network, target: &Event, pivot: &Event, background: &Evidence) -> Result<SensitivityRange, SensitivityError> {
    let given_pivot = conditioned(net, target, background, pivot, false)?;
    let given_not_pivot = conditioned(net, target, background, pivot, true)?;
    let independent = error_independent(net, &target.variable, &pivot.variable, background)?;
    let warning = (!independent).then(|| {
        format!(
            "{} is not independent of an error on {} given {}; the range is not a bound on that error's effect",
            target.variable, pivot.variable, pivot.variable
        )
    });
    Ok(SensitivityRange {
        target: target.clone(),
        pivot: pivot.clone(),
        given_pivot,
        given_not_pivot,
        value: given_pivot - given_not_pivot,
        independent,
        warning,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainSensitivity {
    pub links: Vec<SensitivityRange>,
    /// Product of the per-link ranges.
    pub product: f64,
    /// Range of the last event with respect to the first, computed directly.
    pub end_to_end: f64,
    /// True when every downstream event depends on the first only through
    /// its predecessor and every intermediate variable is binary, so the
    /// product equals the end-to-end range.
    pub exact: bool,
    pub warnings: Vec<String>,
}

/// Sensitivity along a directed path `x1 -> x2 -> ... -> xn`.
pub fn chain_sensitivity(net: &Network, chain: &[Event], background: &Evidence) -> Result<ChainSensitivity, SensitivityError> {
    if chain.len() < 2 {
        return Err(SensitivityError::ChainTooShort);
    }
    for pair in chain.windows(2) {
        let child = net.node(&pair[1].variable).ok_or_else(|| ModelError::UnknownNode(pair[1].variable.clone()))?;
        if !child.parents.iter().any(|p| *p == pair[0].variable) {
            return Err(SensitivityError::PathViolation { from: pair[0].variable.clone(), to: pair[1].variable.clone() });
        }
    }
    let links = chain
        .windows(2)
        .map(|pair| sensitivity_range(net, &pair[1], &pair[0], background))
        .collect::<Result<Vec<_>, _>>()?;
    let product = links.iter().map(|l| l.value).product();
    let end_to_end = sensitivity_range(net, &chain[chain.len() - 1], &chain[0], background)?.value;

    let mut warnings = Vec::new();
    for w in chain.windows(2).skip(1) {
        let t = net.require(&w[1].variable)?;
        let x1 = net.require(&chain[0].variable)?;
        let mut given = vec![net.require(&w[0].variable)?];
        for (var, _) in background.iter() {
            given.push(net.require(var)?);
        }
        if !d_separated_with_virtual(net, &[net.len()], &[t], &given, &[x1]) {
            warnings.push(format!("{} depends on {} other than through {}", w[1].variable, chain[0].variable, w[0].variable));
        }
    }
    for e in &chain[1..chain.len() - 1] {
        if net.node(&e.variable).is_some_and(|n| n.cardinality() != 2) {
            warnings.push(format!("{} is not binary; its complement mixes several levels", e.variable));
        }
    }
    Ok(ChainSensitivity { exact: warnings.is_empty(), links, product, end_to_end, warnings })
}

pub fn odds(p: f64) -> f64 {
    p / (1.0 - p)
}

/// `L * O / (L * O + 1)`; an infinite product gives 1.
pub fn posterior_from_odds(prior_odds: f64, likelihood_ratio: f64) -> f64 {
    let lo = likelihood_ratio * prior_odds;
    if lo.is_infinite() {
        1.0
    } else {
        lo / (lo + 1.0)
    }
}

/// `d posterior / d L = O / (L * O + 1)^2`.
pub fn likelihood_sensitivity(prior_odds: f64, likelihood_ratio: f64) -> f64 {
    prior_odds / (likelihood_ratio * prior_odds + 1.0).powi(2)
}

/// Bayes' rule in odds-likelihood form for a binary hypothesis `a` and
/// finding `b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OddsForm {
    pub prior_odds: f64,
    pub likelihood_ratio: f64,
    pub posterior: f64,
}

impl OddsForm {
    pub fn new(prior_odds: f64, likelihood_ratio: f64) -> Self {
        Self { prior_odds, likelihood_ratio, posterior: posterior_from_odds(prior_odds, likelihood_ratio) }
    }

    pub fn from_probabilities(prior: f64, p_b_given_a: f64, p_b_given_not_a: f64) -> Self {
        Self::new(odds(prior), p_b_given_a / p_b_given_not_a)
    }

    pub fn likelihood_sensitivity(&self) -> f64 {
        likelihood_sensitivity(self.prior_odds, self.likelihood_ratio)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LogOdds {
    pub prior: f64,
    pub log_likelihood: f64,
    pub posterior: f64,
    /// Set when a zero or infinite odds or likelihood ratio made any term
    /// infinite (certainty rather than near-certainty).
    pub saturated: bool,
}

impl LogOdds {
    pub fn posterior_probability(&self) -> f64 {
        if self.posterior == f64::INFINITY {
            1.0
        } else {
            1.0 / (1.0 + (-self.posterior).exp())
        }
    }
}

/// `ln O(a|b) = ln O(a) + ln L(b, a)`.
pub fn log_odds_decomposition(prior_odds: f64, likelihood_ratio: f64) -> LogOdds {
    let prior = prior_odds.ln();
    let log_likelihood = likelihood_ratio.ln();
    let posterior = prior + log_likelihood;
    let saturated = !prior.is_finite() || !log_likelihood.is_finite();
    LogOdds { prior, log_likelihood, posterior, saturated }
}

/// One entry of a probability table: `node/row/column`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CellRef {
    pub node: String,
    pub row: usize,
    pub column: usize,
}

impl fmt::Display for CellRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.node, self.row, self.column)
    }
}

impl FromStr for CellRef {
    type Err = SensitivityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || SensitivityError::Syntax { what: "cell", text: s.to_string() };
        let mut parts = s.split('/');
        let (Some(node), Some(row), Some(col), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
            return Err(bad());
        };
        Ok(CellRef {
            node: node.to_string(),
            row: row.parse().map_err(|_| bad())?,
            column: col.parse().map_err(|_| bad())?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub value: f64,
    pub posterior: f64,
    pub alternatives: Vec<AlternativeValue>,
    pub recommended: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThresholdCrossing {
    pub lower: f64,
    pub upper: f64,
    pub from: String,
    pub to: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepTrace {
    pub cell: CellRef,
    pub target: Event,
    pub points: Vec<SweepPoint>,
    pub crossings: Vec<ThresholdCrossing>,
}

/// Network with one table cell set to `value`, the rest of its row
/// rescaled proportionally. Canonical nodes are expanded first.
pub fn with_cell(net: &Network, cell: &CellRef, value: f64) -> Result<Network, SensitivityError> {
    if !(0.0..=1.0).contains(&value) {
        return Err(SensitivityError::ValueOutOfRange(value));
    }
    let node = net.node(&cell.node).ok_or_else(|| ModelError::UnknownNode(cell.node.clone()))?;
    if !matches!(node.kind, NodeKind::Chance | NodeKind::Deterministic) {
        return Err(SensitivityError::NotAProbabilityNode(cell.node.clone()));
    }
    let mut cpt = net.cpt_of(&cell.node)?.into_owned();
    if cell.row >= cpt.num_rows() || cell.column >= cpt.child_card() {
        return Err(SensitivityError::CellOutOfRange(cell.clone()));
    }
    let row = cpt.row_mut(cell.row);
    let rest = 1.0 - row[cell.column];
    if rest <= 0.0 {
        return Err(SensitivityError::DegenerateRow { node: cell.node.clone(), row: cell.row });
    }
    let scale = (1.0 - value) / rest;
    for (k, p) in row.iter_mut().enumerate() {
        *p = if k == cell.column { value } else { *p * scale };
    }
    Ok(net.with_cpd(&cell.node, Cpd::Table(cpt))?)
}

/// Traces `P(target | evidence)` and, when the network has a decision and a
/// utility node, every alternative's expected utility across `grid`.
pub fn cpt_parameter_sweep(
    net: &Network,
    target: &Event,
    evidence: &Evidence,
    cell: &CellRef,
    grid: &[f64],
) -> Result<SweepTrace, SensitivityError> {
    let has_decision = net.utility_node().is_some() && decision_node(net).is_ok();
    let points = grid
        .par_iter()
        .map(|&value| {
            let swept = with_cell(net, cell, value)?;
            let findings = Findings::from_evidence(&swept, evidence)?;
            let posterior = target_prob(&swept, target, &findings)?;
            let (alternatives, recommended) = if has_decision {
                let rec = recommend(&swept, evidence)?;
                (rec.alternatives, Some(rec.recommended))
            } else {
                (Vec::new(), None)
            };
            Ok(SweepPoint { value, posterior, alternatives, recommended })
        })
        .collect::<Result<Vec<_>, SensitivityError>>()?;
    let crossings = points
        .windows(2)
        .filter_map(|w| match (&w[0].recommended, &w[1].recommended) {
            (Some(a), Some(b)) if a != b => Some(ThresholdCrossing {
                lower: w[0].value,
                upper: w[1].value,
                from: a.clone(),
                to: b.clone(),
            }),
            _ => None,
        })
        .collect();
    Ok(SweepTrace { cell: cell.clone(), target: target.clone(), points, crossings })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IndicantSensitivity {
    pub indicant: String,
    /// Level whose range has the largest magnitude.
    pub level: String,
    pub sensitivity_range: f64,
}

/// Unobserved candidates ordered by the magnitude of their strongest
/// sensitivity range toward `target`; ties keep the candidate order.
pub fn rank_indicants(
    net: &Network,
    evidence: &Evidence,
    target: &Event,
    candidates: &[String],
) -> Result<Vec<IndicantSensitivity>, SensitivityError> {
    let mut out = Vec::new();
    for name in candidates.iter().filter(|c| !evidence.contains(c)) {
        let node = net.node(name).ok_or_else(|| ModelError::UnknownNode(name.clone()))?;
        let mut best: Option<(String, f64)> = None;
        for level in node.variable.levels() {
            let pivot = Event::new(name.clone(), level.clone());
            match sensitivity_range(net, target, &pivot, evidence) {
                Ok(sr) => {
                    if best.as_ref().is_none_or(|(_, b)| sr.value.abs() > b.abs()) {
                        best = Some((level.clone(), sr.value));
                    }
                }
                Err(SensitivityError::ZeroProbabilityPivot { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        let (level, sensitivity_range) = best.unwrap_or_else(|| (node.variable.levels()[0].clone(), 0.0));
        out.push(IndicantSensitivity { indicant: name.clone(), level, sensitivity_range });
    }
    out.sort_by(|a, b| b.sensitivity_range.abs().total_cmp(&a.sensitivity_range.abs()));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Cpt, Node, VariableSpec};

    fn link(p_y_given_x: f64, p_y_given_not_x: f64) -> Network {
        Network::new(vec![
            Node::chance(VariableSpec::new("X", ["no", "yes"]).unwrap(), &[], Cpt::new(vec![], 2, vec![0.6, 0.4]).unwrap()),
            Node::chance(
                VariableSpec::new("Y", ["no", "yes"]).unwrap(),
                &["X"],
                Cpt::new(vec![2], 2, vec![1.0 - p_y_given_not_x, p_y_given_not_x, 1.0 - p_y_given_x, p_y_given_x]).unwrap(),
            ),
        ])
        .unwrap()
    }

    #[test]
    fn direct_link_range() {
        let sr = sensitivity_range(&link(0.9, 0.2), &Event::new("Y", "yes"), &Event::new("X", "yes"), &Evidence::new()).unwrap();
        assert!((sr.value - 0.7).abs() < 1e-12);
        assert!(sr.independent && sr.warning.is_none());
    }

    #[test]
    fn deterministic_link_reaches_one() {
        let sr = sensitivity_range(&link(1.0, 0.0), &Event::new("Y", "yes"), &Event::new("X", "yes"), &Evidence::new()).unwrap();
        assert_eq!(sr.value, 1.0);
    }

    #[test]
    fn diagnostic_pivot_warns() {
        // error on Y's assessment, target X upstream: X -> Y <- e is a collider given Y
        let sr = sensitivity_range(&link(0.9, 0.2), &Event::new("X", "yes"), &Event::new("Y", "yes"), &Evidence::new()).unwrap();
        assert!(!sr.independent);
        assert!(sr.warning.is_some());
    }

    #[test]
    fn zero_probability_pivot() {
        let net = link(0.9, 0.2)
            .with_cpd("X", Cpd::Table(Cpt::new(vec![], 2, vec![1.0, 0.0]).unwrap()))
            .unwrap();
        let err = sensitivity_range(&net, &Event::new("Y", "yes"), &Event::new("X", "yes"), &Evidence::new()).unwrap_err();
        assert_eq!(err, SensitivityError::ZeroProbabilityPivot { event: "X=yes".into(), negated: false });
    }

    #[test]
    fn odds_examples() {
        assert!((posterior_from_odds(19.0, 0.025 / 0.95) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(posterior_from_odds(1.0, 1.0), 0.5);
        assert!((posterior_from_odds(3.0, 1.0) - 0.75).abs() < 1e-15);
        assert_eq!(posterior_from_odds(f64::INFINITY, 2.0), 1.0);
        assert!((likelihood_sensitivity(19.0, 1.0 / 38.0) - 19.0 / 2.25).abs() < 1e-12);
        assert_eq!(likelihood_sensitivity(7.0, 0.0), 7.0);
    }

    #[test]
    fn log_odds_examples() {
        let zero = log_odds_decomposition(1.0, 1.0);
        assert_eq!((zero.prior, zero.log_likelihood, zero.posterior), (0.0, 0.0, 0.0));
        let cold = log_odds_decomposition(19.0, 1.0 / 38.0);
        assert!((cold.posterior - 0.5f64.ln()).abs() < 1e-12);
        assert!((cold.posterior_probability() - 1.0 / 3.0).abs() < 1e-12);
        let sat = log_odds_decomposition(0.0, 2.0);
        assert!(sat.saturated);
        assert_eq!(sat.prior, f64::NEG_INFINITY);
    }

    #[test]
    fn parse_event_and_cell() {
        assert_eq!("A=yes".parse::<Event>().unwrap(), Event::new("A", "yes"));
        assert!("A".parse::<Event>().is_err());
        assert_eq!(
            "Node/3/1".parse::<CellRef>().unwrap(),
            CellRef { node: "Node".into(), row: 3, column: 1 }
        );
        assert!("Node/3".parse::<CellRef>().is_err());
    }

    #[test]
    fn degenerate_row_cannot_be_swept() {
        let net = link(1.0, 0.0);
        let cell = CellRef { node: "Y".into(), row: 1, column: 1 };
        assert!(matches!(with_cell(&net, &cell, 0.5), Err(SensitivityError::DegenerateRow { .. })));
    }

    #[test]
    fn chain_must_follow_edges() {
        let err = chain_sensitivity(&link(0.9, 0.2), &[Event::new("Y", "yes"), Event::new("X", "yes")], &Evidence::new()).unwrap_err();
        assert!(matches!(err, SensitivityError::PathViolation { .. }));
    }
}
