#![allow(dead_code)]

use std::path::PathBuf;

use beliefnet::inference::{enumerate_joint, Query};
use beliefnet::model::{Cpd, Evidence, Network};
use beliefnet::netlang::parse_network;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn load(name: &str) -> Network {
    let text = std::fs::read_to_string(fixture(name)).expect("fixture exists");
    parse_network(&text).expect("fixture parses").value
}

pub fn orchard() -> Network {
    load("orchard-mini.bn")
}

pub fn cold_stress() -> Network {
    load("coldstress.bn")
}

/// Child distribution of a noisy-MAX node obtained by enumerating every
/// joint draw of the active causes and the leak, with the child taking the
/// largest drawn level.
pub fn joint_draw_max(pure: &[Vec<Vec<f64>>], leak: Option<&[f64]>, assignment: &[usize], child_card: usize) -> Vec<f64> {
    let mut sources: Vec<&[f64]> = Vec::new();
    if let Some(l) = leak {
        sources.push(l);
    }
    for (cause, &level) in pure.iter().zip(assignment) {
        if level > 0 {
            sources.push(&cause[level - 1]);
        }
    }
    let mut out = vec![0.0; child_card];
    let mut draw = vec![0usize; sources.len()];
    loop {
        let p: f64 = sources.iter().zip(&draw).map(|(d, &k)| d[k]).product();
        let max = draw.iter().copied().max().unwrap_or(0);
        out[max] += p;
        let mut pos = draw.len();
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            draw[pos] += 1;
            if draw[pos] < child_card {
                break;
            }
            draw[pos] = 0;
        }
    }
}

/// Expected utility of `decision = alternative` from the enumerated joint
/// of the utility node's parents.
pub fn oracle_expected_utility(net: &Network, evidence: &Evidence, decision: &str, alternative: &str) -> f64 {
    let utility = net.utility_node().expect("utility node");
    let Cpd::Utility(table) = &utility.cpd else { panic!("utility table") };
    let full = evidence.clone().with(decision, alternative);
    let parents: Vec<_> = utility.parents.iter().map(|p| net.node(p).expect("parent")).collect();
    let free: Vec<String> = utility.parents.iter().filter(|p| !full.contains(p)).cloned().collect();
    let dist = (!free.is_empty()).then(|| enumerate_joint(net, &Query::new(free.clone(), full.clone())).expect("oracle"));
    let cards: Vec<usize> = parents.iter().map(|n| n.cardinality()).collect();
    let mut eu = 0.0;
    for (index, &u) in table.values().iter().enumerate() {
        let mut rest = index;
        let mut levels = vec![0; cards.len()];
        for (slot, &card) in levels.iter_mut().zip(&cards).rev() {
            *slot = rest % card;
            rest /= card;
        }
        let consistent = parents
            .iter()
            .zip(&levels)
            .all(|(n, &l)| full.get(n.name()).is_none_or(|observed| n.variable.levels()[l] == observed));
        if !consistent {
            continue;
        }
        let free_levels: Vec<usize> =
            parents.iter().zip(&levels).filter(|(n, _)| !full.contains(n.name())).map(|(_, &l)| l).collect();
        eu += dist.as_ref().map_or(1.0, |d| d.prob(&free_levels)) * u;
    }
    eu
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}
