//! Expected-utility evaluation of a single decision node.
//!
//! Utilities are stored as negated cost, so maximizing expected utility is
//! the same as minimizing expected dollar cost.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inference::{posterior, InferenceError, Query};
use crate::model::{Cpd, Evidence, ModelError, Network, NodeKind};

/// Absolute tolerance under which two alternatives count as tied.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecisionError {
    #[error("network has no utility node")]
    NoUtility,
    #[error("network has no decision node")]
    NoDecision,
    #[error("expected exactly one decision node, found {0}")]
    MultipleDecisions(usize),
    #[error("decision `{0}` is not assigned")]
    MissingDecision(String),
    #[error(transparent)]
    Inference(#[from] InferenceError),
}

impl From<ModelError> for DecisionError {
    fn from(e: ModelError) -> Self {
        DecisionError::Inference(e.into())
    }
}

/// Utility per assignment of the utility node's parents, odometer ordered.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtilityTable {
    values: Vec<f64>,
}

impl UtilityTable {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Applies `u -> scale * u + shift` to every entry.
    pub fn affine(&self, scale: f64, shift: f64) -> Self {
        Self { values: self.values.iter().map(|u| scale * u + shift).collect() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlternativeValue {
    pub alternative: String,
    pub expected_utility: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecisionRecommendation {
    pub decision: String,
    pub alternatives: Vec<AlternativeValue>,
    pub recommended: String,
    pub tie: bool,
}

impl DecisionRecommendation {
    pub fn expected_utility_of(&self, alternative: &str) -> Option<f64> {
        self.alternatives.iter().find(|a| a.alternative == alternative).map(|a| a.expected_utility)
    }
}

fn utility_parts(net: &Network) -> Result<(&[String], &UtilityTable), DecisionError> {
    let node = net.utility_node().ok_or(DecisionError::NoUtility)?;
    match &node.cpd {
        Cpd::Utility(table) => Ok((&node.parents, table)),
        _ => Err(DecisionError::NoUtility),
    }
}

/// `sum_u P(u | evidence, alternative) * U(u)` over assignments `u` of the
/// utility node's parents. The alternative overrides any decision already
/// present in the evidence.
pub fn expected_utility(net: &Network, evidence: &Evidence, alternative: &Evidence) -> Result<f64, DecisionError> {
    let (parents, table) = utility_parts(net)?;
    let full = evidence.merged(alternative);
    for d in net.decision_nodes() {
        if !full.contains(d.name()) {
            return Err(DecisionError::MissingDecision(d.name().to_string()));
        }
    }
    let resolved = full.resolve(net)?;
    let cards: Vec<usize> = parents
        .iter()
        .map(|p| net.node(p).map(|n| n.cardinality()).ok_or_else(|| ModelError::UnknownNode(p.clone())))
        .collect::<Result<_, _>>()?;
    let fixed: Vec<Option<usize>> = parents
        .iter()
        .map(|p| {
            let i = net.index_of(p).expect("resolved above");
            resolved.iter().find(|(n, _)| *n == i).map(|&(_, l)| l)
        })
        .collect();
    let free: Vec<String> = parents
        .iter()
        .zip(&fixed)
        .filter(|(_, f)| f.is_none())
        .map(|(p, _)| p.clone())
        .collect();

    let index_of = |levels: &[usize]| levels.iter().zip(&cards).fold(0, |acc, (&l, &c)| acc * c + l);

    if free.is_empty() {
        // still rejects impossible evidence
        if crate::inference::prob_of_evidence(net, &full)? <= 0.0 {
            return Err(InferenceError::ImpossibleEvidence.into());
        }
        let levels: Vec<usize> = fixed.iter().map(|f| f.expect("all fixed")).collect();
        return Ok(table.values()[index_of(&levels)]);
    }

    let dist = posterior(net, &Query::new(free.clone(), full))?;
    let free_cards: Vec<usize> = dist.levels().iter().map(Vec::len).collect();
    let mut assign = vec![0usize; free_cards.len()];
    let mut eu = 0.0;
    for &p in dist.probabilities() {
        let mut it = assign.iter();
        let levels: Vec<usize> = fixed.iter().map(|f| f.unwrap_or_else(|| *it.next().expect("free level"))).collect();
        eu += p * table.values()[index_of(&levels)];
        for pos in (0..assign.len()).rev() {
            assign[pos] += 1;
            if assign[pos] < free_cards[pos] {
                break;
            }
            assign[pos] = 0;
        }
    }
    Ok(eu)
}

/// The single decision node of the network.
pub fn decision_node(net: &Network) -> Result<&crate::model::Node, DecisionError> {
    let decisions: Vec<_> = net.nodes().iter().filter(|n| n.kind == NodeKind::Decision).collect();
    match decisions.as_slice() {
        [] => Err(DecisionError::NoDecision),
        [one] => Ok(one),
        many => Err(DecisionError::MultipleDecisions(many.len())),
    }
}

/// Evaluates every alternative of the single decision and picks the best;
/// ties within [`TIE_TOLERANCE`] go to the first declared alternative.
pub fn recommend(net: &Network, evidence: &Evidence) -> Result<DecisionRecommendation, DecisionError> {
    let decision = decision_node(net)?;
    let name = decision.name().to_string();
    let mut alternatives = Vec::with_capacity(decision.cardinality());
    for level in decision.variable.levels() {
        let choice = Evidence::new().with(name.clone(), level.clone());
        alternatives.push(AlternativeValue {
            alternative: level.clone(),
            expected_utility: expected_utility(net, evidence, &choice)?,
        });
    }
    let best = alternatives.iter().map(|a| a.expected_utility).fold(f64::NEG_INFINITY, f64::max);
    let winners: Vec<&AlternativeValue> = alternatives
        .iter()
        .filter(|a| a.expected_utility >= best - TIE_TOLERANCE)
        .collect();
    Ok(DecisionRecommendation {
        decision: name,
        recommended: winners[0].alternative.clone(),
        tie: winners.len() > 1,
        alternatives,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Cpt, Node, VariableSpec};

    /// Outcome -> Utility <- Treat, with P(bad) given and cost table.
    fn tiny(p_bad: f64, utilities: Vec<f64>) -> Network {
        Network::new(vec![
            Node::chance(
                VariableSpec::new("Outcome", ["good", "bad"]).unwrap(),
                &[],
                Cpt::new(vec![], 2, vec![1.0 - p_bad, p_bad]).unwrap(),
            ),
            Node::new(VariableSpec::new("Treat", ["no", "yes"]).unwrap(), NodeKind::Decision, vec![], Cpd::None),
            Node::new(
                VariableSpec::utility("Cost"),
                NodeKind::Utility,
                vec!["Treat".into(), "Outcome".into()],
                Cpd::Utility(UtilityTable::new(utilities)),
            ),
        ])
        .unwrap()
    }

    #[test]
    fn two_term_mixture() {
        let net = tiny(0.75, vec![0.0, -100.0, 0.0, -100.0]);
        let eu = expected_utility(&net, &Evidence::new(), &Evidence::new().with("Treat", "no")).unwrap();
        assert!((eu - -75.0).abs() < 1e-12);
    }

    #[test]
    fn observed_utility_parents_are_a_lookup() {
        let net = tiny(0.75, vec![0.0, -100.0, -10.0, -30.0]);
        let ev = Evidence::new().with("Outcome", "bad");
        assert_eq!(expected_utility(&net, &ev, &Evidence::new().with("Treat", "yes")).unwrap(), -30.0);
    }

    #[test]
    fn identical_utilities_tie_to_first() {
        let net = tiny(0.5, vec![-5.0, -5.0, -5.0, -5.0]);
        let rec = recommend(&net, &Evidence::new()).unwrap();
        assert_eq!(rec.recommended, "no");
        assert!(rec.tie);
    }

    #[test]
    fn dominant_alternative_wins() {
        let net = tiny(0.5, vec![-50.0, -100.0, -10.0, -20.0]);
        let rec = recommend(&net, &Evidence::new()).unwrap();
        assert_eq!(rec.recommended, "yes");
        assert!(!rec.tie);
    }

    #[test]
    fn missing_decision_is_an_error() {
        let net = tiny(0.5, vec![0.0; 4]);
        assert_eq!(
            expected_utility(&net, &Evidence::new(), &Evidence::new()),
            Err(DecisionError::MissingDecision("Treat".into()))
        );
    }
}
