//! Recomputes every expectation in a scenario suite with the enumeration
//! oracle and prints the updated suite.
//!
//! ```text
//! cargo run --example freeze_expectations -- orchard-mini.bn scenarios.toml > new.toml
//! ```
//!
//! Probabilities come from `enumerate_joint` and recommendations from
//! expected utilities summed over the enumerated joint, so the frozen values
//! never depend on variable elimination.

use std::path::Path;
use std::process::ExitCode;

use beliefnet::inference::{enumerate_joint, Query};
use beliefnet::model::{Cpd, Evidence, Network};
use beliefnet::netlang::{parse_evidence, parse_network};

fn oracle_expected_utility(net: &Network, evidence: &Evidence, decision: &str, alternative: &str) -> f64 {
    let utility = net.utility_node().expect("network has a utility node");
    let Cpd::Utility(table) = &utility.cpd else { panic!("utility node without a table") };
    let full = evidence.clone().with(decision, alternative);
    let parents: Vec<_> = utility.parents.iter().map(|p| net.node(p).expect("parent exists")).collect();
    let free: Vec<String> = utility.parents.iter().filter(|p| !full.contains(p)).cloned().collect();
    let dist = enumerate_joint(net, &Query::new(free.clone(), full.clone())).expect("evidence is possible");
    let cards: Vec<usize> = parents.iter().map(|n| n.cardinality()).collect();
    let mut eu = 0.0;
    for (index, &u) in table.values().iter().enumerate() {
        let mut rest = index;
        let mut levels = vec![0; cards.len()];
        for (slot, &card) in levels.iter_mut().zip(&cards).rev() {
            *slot = rest % card;
            rest /= card;
        }
        let consistent = parents.iter().zip(&levels).all(|(n, &l)| {
            full.get(n.name()).is_none_or(|observed| n.variable.levels()[l] == observed)
        });
        if !consistent {
            continue;
        }
        let free_levels: Vec<usize> = parents
            .iter()
            .zip(&levels)
            .filter(|(n, _)| !full.contains(n.name()))
            .map(|(_, &l)| l)
            .collect();
        let p = if free.is_empty() { 1.0 } else { dist.prob(&free_levels) };
        eu += p * u;
    }
    eu
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let [net_path, suite_path] = args.as_slice() else {
        eprintln!("usage: freeze_expectations <network.bn> <suite.toml>");
        return ExitCode::from(2);
    };
    let net = parse_network(&std::fs::read_to_string(net_path).expect("readable network")).expect("valid network").value;
    let suite_text = std::fs::read_to_string(suite_path).expect("readable suite");
    let mut suite: toml::Table = suite_text.parse().expect("valid TOML");
    let base = Path::new(suite_path).parent().unwrap_or(Path::new("."));
    let decision = net.decision_nodes().next().cloned();

    for scenario in suite.get_mut("scenario").and_then(|s| s.as_array_mut()).expect("[[scenario]] entries") {
        let table = scenario.as_table_mut().expect("scenario table");
        let mut evidence = match table.get("evidence").and_then(|e| e.as_str()) {
            Some(rel) => {
                let text = std::fs::read_to_string(base.join(rel)).expect("readable evidence");
                parse_evidence(&text, &net).expect("valid evidence")
            }
            None => Evidence::new(),
        };
        if let Some(observe) = table.get("observe").and_then(|o| o.as_table()) {
            for (k, v) in observe {
                evidence.set(k.clone(), v.as_str().expect("level name"));
            }
        }
        if let Some(expect) = table.get_mut("expect").and_then(|e| e.as_array_mut()) {
            for e in expect {
                let e = e.as_table_mut().expect("expectation table");
                let variable = e["variable"].as_str().expect("variable").to_string();
                let level = e["level"].as_str().expect("level").to_string();
                let dist = enumerate_joint(&net, &Query::single(variable.clone(), evidence.clone())).expect("oracle");
                let p = dist.prob_of(&variable, &level).expect("level exists");
                e.insert("probability".into(), toml::Value::Float((p * 1e6).round() / 1e6));
            }
        }
        if let (Some(d), true) = (&decision, table.contains_key("recommendation")) {
            let mut best: Option<(String, f64)> = None;
            for alt in d.variable.levels() {
                let eu = oracle_expected_utility(&net, &evidence, d.name(), alt);
                if best.as_ref().is_none_or(|(_, b)| eu > *b + 1e-9) {
                    best = Some((alt.clone(), eu));
                }
                eprintln!("{}: EU({alt}) = {eu}", table["name"].as_str().unwrap_or("?"));
            }
            table.insert("recommendation".into(), toml::Value::String(best.expect("alternatives").0));
        }
    }
    print!("{}", toml::to_string_pretty(&suite).expect("serializable"));
    ExitCode::SUCCESS
}
