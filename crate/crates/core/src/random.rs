//! Random networks and evidence for property tests and benchmarks.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::canonical::{LeakConvention, MaxCause, NoisyMaxSpec};
use crate::model::{Cpt, Evidence, Network, Node, VariableSpec};

#[derive(Clone, Debug)]
pub struct RandomNetworkConfig {
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub min_levels: usize,
    pub max_levels: usize,
    pub max_parents: usize,
    /// Every table entry is at least this large before normalization, which
    /// keeps all probabilities strictly inside (0, 1) when positive.
    pub floor: f64,
    /// Declare nodes in a shuffled order instead of a topological one.
    pub shuffle_declarations: bool,
}

impl Default for RandomNetworkConfig {
    fn default() -> Self {
        Self {
            min_nodes: 2,
            max_nodes: 8,
            min_levels: 2,
            max_levels: 4,
            max_parents: 3,
            floor: 0.05,
            shuffle_declarations: false,
        }
    }
}

/// A distribution with every entry at least `floor / (n * (1 + floor))`.
pub fn random_distribution<R: Rng + ?Sized>(rng: &mut R, n: usize, floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| floor + rng.gen::<f64>()).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / sum).collect()
}

pub fn random_cpt<R: Rng + ?Sized>(rng: &mut R, parent_cards: &[usize], child_card: usize, floor: f64) -> Cpt {
    let rows: usize = parent_cards.iter().product();
    let probs = (0..rows).flat_map(|_| random_distribution(rng, child_card, floor)).collect();
    Cpt::new(parent_cards.to_vec(), child_card, probs).expect("shape by construction")
}

/// Random DAG over nodes `N0..Nk`; edges only go from lower to higher index.
pub fn random_network<R: Rng + ?Sized>(rng: &mut R, cfg: &RandomNetworkConfig) -> Network {
    let n = rng.gen_range(cfg.min_nodes..=cfg.max_nodes);
    let mut specs: Vec<VariableSpec> = Vec::with_capacity(n);
    let mut nodes = Vec::with_capacity(n);
    for i in 0..n {
        let card = rng.gen_range(cfg.min_levels..=cfg.max_levels);
        let spec = VariableSpec::new(format!("N{i}"), (0..card).map(|l| format!("l{l}"))).expect("valid levels");
        let mut candidates: Vec<usize> = (0..i).collect();
        candidates.shuffle(rng);
        let k = rng.gen_range(0..=cfg.max_parents.min(i));
        let mut parents: Vec<usize> = candidates.into_iter().take(k).collect();
        parents.sort_unstable();
        let parent_cards: Vec<usize> = parents.iter().map(|&p| specs[p].cardinality()).collect::<Vec<_>>();
        let cpt = random_cpt(rng, &parent_cards, card, cfg.floor);
        let parent_names: Vec<String> = parents.iter().map(|&p| format!("N{p}")).collect();
        let refs: Vec<&str> = parent_names.iter().map(String::as_str).collect();
        nodes.push(Node::chance(spec.clone(), &refs, cpt));
        specs.push(spec);
    }
    if cfg.shuffle_declarations {
        nodes.shuffle(rng);
    }
    Network::new(nodes).expect("unique names")
}

/// Observes up to `max_observed` random nodes at random levels.
pub fn random_evidence<R: Rng + ?Sized>(rng: &mut R, net: &Network, max_observed: usize) -> Evidence {
    let mut idx: Vec<usize> = (0..net.len()).collect();
    idx.shuffle(rng);
    let k = rng.gen_range(0..=max_observed.min(net.len().saturating_sub(1)));
    let mut ev = Evidence::new();
    for &i in &idx[..k] {
        let node = &net.nodes()[i];
        let level = rng.gen_range(0..node.cardinality());
        ev.set(node.name(), node.variable.levels()[level].clone());
    }
    ev
}

/// Pure chain `C0 -> C1 -> ... -> C{n-1}` of variables with `card` levels.
pub fn random_chain<R: Rng + ?Sized>(rng: &mut R, n: usize, card: usize, floor: f64) -> Network {
    let mut nodes = Vec::with_capacity(n);
    for i in 0..n {
        let spec = VariableSpec::new(format!("C{i}"), (0..card).map(|l| format!("l{l}"))).expect("valid levels");
        let parent = format!("C{}", i.wrapping_sub(1));
        let (parents, cards): (Vec<&str>, Vec<usize>) = if i == 0 { (vec![], vec![]) } else { (vec![parent.as_str()], vec![card]) };
        nodes.push(Node::chance(spec, &parents, random_cpt(rng, &cards, card, floor)));
    }
    Network::new(nodes).expect("unique names")
}

/// Random noisy-MAX specification together with the pure distribution each
/// active cause level produces on its own, `pure[cause][level - 1]`.
///
/// Under [`LeakConvention::Included`] the written assessments are derived
/// from the pure ones by folding the leak in, so every generated spec is
/// consistent.
pub fn random_noisy_max<R: Rng + ?Sized>(
    rng: &mut R,
    parent_cards: &[usize],
    child_card: usize,
    leak: bool,
    convention: LeakConvention,
) -> (NoisyMaxSpec, Vec<Vec<Vec<f64>>>) {
    let leak = leak.then(|| random_distribution(rng, child_card, 0.0));
    let pure: Vec<Vec<Vec<f64>>> = parent_cards
        .iter()
        .map(|&card| (1..card).map(|_| random_distribution(rng, child_card, 0.0)).collect())
        .collect();
    let causes = pure
        .iter()
        .zip(parent_cards)
        .enumerate()
        .map(|(i, (dists, &card))| {
            let active = dists
                .iter()
                .map(|d| match (&leak, convention) {
                    (Some(l), LeakConvention::Included) => fold_leak(d, l),
                    _ => d.clone(),
                })
                .collect();
            MaxCause::new(format!("P{i}"), (0..card).map(|l| format!("l{l}")), active)
        })
        .collect();
    (NoisyMaxSpec::new(child_card, causes, leak).with_convention(convention), pure)
}

/// Distribution of `max(a, b)` for independent `a ~ pure` and `b ~ leak`.
fn fold_leak(pure: &[f64], leak: &[f64]) -> Vec<f64> {
    let (mut ca, mut cb, mut prev) = (0.0, 0.0, 0.0);
    pure.iter()
        .zip(leak)
        .map(|(a, b)| {
            ca += a;
            cb += b;
            let c = ca * cb;
            let p = (c - prev).max(0.0);
            prev = c;
            p
        })
        .collect()
}
