mod common;

use beliefnet::inference::{posterior, Query};
use beliefnet::model::{Cpt, Evidence, Network, Node, VariableSpec};
use beliefnet::random::{random_chain, random_evidence, random_network, RandomNetworkConfig};
use beliefnet::sensitivity::{
    chain_sensitivity, cpt_parameter_sweep, likelihood_sensitivity, log_odds_decomposition, odds, posterior_from_odds,
    sensitivity_range, with_cell, CellRef, Event, OddsForm,
};
use common::{close, cold_stress, orchard};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn prob(net: &Network, event: &Event, evidence: &Evidence) -> f64 {
    posterior(net, &Query::single(event.variable.clone(), evidence.clone()))
        .unwrap()
        .prob_of(&event.variable, &event.level)
        .unwrap()
}

/// Adds a binary child `Virtual` of `pivot` whose `yes` likelihood is
/// `weight` on the pivot level and 1 elsewhere, so observing it moves
/// belief in the pivot without touching anything downstream of the pivot.
fn with_virtual_finding(net: &Network, pivot: &Event, weight: f64) -> Network {
    let node = net.node(&pivot.variable).unwrap();
    let rows: Vec<Vec<f64>> = node
        .variable
        .levels()
        .iter()
        .map(|l| if *l == pivot.level { vec![1.0 - weight, weight] } else { vec![0.0, 1.0] })
        .collect();
    let spec = VariableSpec::new("Virtual", ["no", "yes"]).unwrap();
    let cpt = Cpt::from_rows(vec![node.cardinality()], &rows).unwrap();
    let mut nodes = net.nodes().to_vec();
    nodes.push(Node::chance(spec, &[pivot.variable.as_str()], cpt));
    Network::new(nodes).unwrap()
}

fn pick_events(rng: &mut ChaCha8Rng, net: &Network, evidence: &Evidence) -> Option<(Event, Event)> {
    let free: Vec<_> = net.nodes().iter().filter(|n| !evidence.contains(n.name())).collect();
    if free.len() < 2 {
        return None;
    }
    let i = rng.gen_range(0..free.len());
    let mut j = rng.gen_range(0..free.len() - 1);
    if j >= i {
        j += 1;
    }
    let level = |n: &beliefnet::Node, r: &mut ChaCha8Rng| n.variable.levels()[r.gen_range(0..n.cardinality())].clone();
    let target = Event::new(free[i].name(), level(free[i], rng));
    let pivot = Event::new(free[j].name(), level(free[j], rng));
    Some((target, pivot))
}

#[test]
fn sensitivity_range_is_strictly_bounded() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut checked = 0;
    while checked < 50 {
        let net = random_network(&mut rng, &RandomNetworkConfig { min_nodes: 3, ..Default::default() });
        let evidence = random_evidence(&mut rng, &net, 1);
        let Some((target, pivot)) = pick_events(&mut rng, &net, &evidence) else { continue };
        let sr = sensitivity_range(&net, &target, &pivot, &evidence).unwrap();
        assert!(sr.value.abs() < 1.0, "{sr:?}");
        checked += 1;
    }
}

#[test]
fn target_is_linear_in_pivot_belief() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut checked = 0;
    while checked < 50 {
        let net = random_network(&mut rng, &RandomNetworkConfig { min_nodes: 3, ..Default::default() });
        let evidence = random_evidence(&mut rng, &net, 1);
        let Some((target, pivot)) = pick_events(&mut rng, &net, &evidence) else { continue };
        let observed = evidence.clone().with("Virtual", "yes");
        let points: Vec<(f64, f64)> = [0.05, 0.25, 0.5, 0.75, 1.0]
            .iter()
            .map(|&w| {
                let swept = with_virtual_finding(&net, &pivot, w);
                (prob(&swept, &pivot, &observed), prob(&swept, &target, &observed))
            })
            .collect();
        let (x0, y0) = points[0];
        let (x4, y4) = points[4];
        if (x4 - x0).abs() < 1e-6 {
            continue;
        }
        let slope = (y4 - y0) / (x4 - x0);
        for &(x, y) in &points[1..4] {
            assert!((y - (y0 + slope * (x - x0))).abs() < 1e-9, "curvature in {points:?}");
        }
        let sr = sensitivity_range(&net, &target, &pivot, &evidence).unwrap();
        assert!(close(slope, sr.value, 1e-8), "slope {slope} vs range {}", sr.value);
        checked += 1;
    }
}

#[test]
fn chain_product_equals_end_to_end() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let net = random_chain(&mut rng, 4, 2, 0.05);
        let chain: Vec<Event> = (0..4).map(|i| Event::new(format!("C{i}"), "l1")).collect();
        let result = chain_sensitivity(&net, &chain, &Evidence::new()).unwrap();
        assert!(result.exact, "{:?}", result.warnings);
        assert!(close(result.product, result.end_to_end, 1e-12), "{} vs {}", result.product, result.end_to_end);
    }
}

#[test]
fn multilevel_chain_is_flagged_inexact() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let net = random_chain(&mut rng, 3, 3, 0.05);
    let chain: Vec<Event> = (0..3).map(|i| Event::new(format!("C{i}"), "l2")).collect();
    let result = chain_sensitivity(&net, &chain, &Evidence::new()).unwrap();
    assert!(!result.exact);
}

fn two_node(prior: f64, p_b_given_a: f64, p_b_given_not_a: f64) -> Network {
    let a = VariableSpec::new("A", ["no", "yes"]).unwrap();
    let b = VariableSpec::new("B", ["no", "yes"]).unwrap();
    Network::new(vec![
        Node::chance(a, &[], Cpt::from_rows(vec![], &[vec![1.0 - prior, prior]]).unwrap()),
        Node::chance(
            b,
            &["A"],
            Cpt::from_rows(vec![2], &[vec![1.0 - p_b_given_not_a, p_b_given_not_a], vec![1.0 - p_b_given_a, p_b_given_a]])
                .unwrap(),
        ),
    ])
    .unwrap()
}

#[test]
fn odds_form_agrees_with_inference_and_derivatives() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let log_uniform = |r: &mut ChaCha8Rng| 10f64.powf(r.gen_range(-2.0..2.0));
    for _ in 0..1000 {
        let o = log_uniform(&mut rng);
        let l = log_uniform(&mut rng);
        let q = rng.gen_range(0.01..0.99) / l.max(1.0);
        let net = two_node(o / (1.0 + o), l * q, q);
        let inferred = prob(&net, &Event::new("A", "yes"), &Evidence::new().with("B", "yes"));
        let form = OddsForm::new(o, l);
        assert!(close(form.posterior, inferred, 1e-12), "O={o} L={l}");
        assert!(close(posterior_from_odds(o, l), inferred, 1e-12));

        let h = 1e-5 * l;
        let fd = (posterior_from_odds(o, l + h) - posterior_from_odds(o, l - h)) / (2.0 * h);
        let analytic = likelihood_sensitivity(o, l);
        assert!(((fd - analytic) / analytic).abs() < 1e-6, "O={o} L={l}: {fd} vs {analytic}");

        let lo = log_odds_decomposition(o, l);
        assert!(!lo.saturated);
        assert_eq!(lo.posterior, lo.prior + lo.log_likelihood);
        assert!(close(lo.posterior, (o * l).ln(), 1e-12));
        assert!(close(lo.posterior_probability(), inferred, 1e-12));
    }
}

#[test]
fn odds_helpers_handle_extremes() {
    assert_eq!(posterior_from_odds(f64::INFINITY, 2.0), 1.0);
    assert_eq!(posterior_from_odds(0.0, 5.0), 0.0);
    assert!(log_odds_decomposition(0.0, 2.0).saturated);
    assert_eq!(log_odds_decomposition(f64::INFINITY, 2.0).posterior_probability(), 1.0);
    assert!(close(odds(0.2), 0.25, 1e-15));
    let f = OddsForm::from_probabilities(0.95, 0.025, 0.95);
    assert!(close(f.posterior, 1.0 / 3.0, 1e-12));
}

#[test]
fn cold_stress_sensitivity_factor() {
    let net = cold_stress();
    let a = Event::new("ColdStressRegion", "present");
    let b = Evidence::new().with("ReportsOfColdStress", "none");
    let before = prob(&net, &a, &b);
    assert!(close(before, 0.3333, 1e-3));
    let cell = CellRef { node: "ReportsOfColdStress".into(), row: 1, column: 0 };
    let after = prob(&with_cell(&net, &cell, 0.1).unwrap(), &a, &b);
    assert!(close(after, 0.6667, 1e-3));
    let factor = (after - before) / (0.1 - 0.025);
    assert!(close(factor, 4.44, 0.1), "{factor}");
}

#[test]
fn treatment_flips_across_effectiveness_sweep() {
    let net = orchard();
    let cell: CellRef = "ActivePhytophthora/3/0".parse().unwrap();
    let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let trace = cpt_parameter_sweep(&net, &Event::new("Phytophthora", "present"), &Evidence::new(), &cell, &grid).unwrap();
    assert_eq!(trace.crossings.len(), 1);
    let crossing = &trace.crossings[0];
    assert_eq!((crossing.from.as_str(), crossing.to.as_str()), ("no_treat", "treat"));
    assert!(close(crossing.lower, 0.8, 1e-12) && close(crossing.upper, 0.9, 1e-12));
    // the swept cell is downstream of the target, so its posterior stays put
    let first = trace.points[0].posterior;
    assert!(trace.points.iter().all(|p| close(p.posterior, first, 1e-12)));
}

#[test]
fn separated_indicant_has_zero_range() {
    let net = orchard();
    let sr = sensitivity_range(&net, &Event::new("Phytophthora", "present"), &Event::new("BorerFrass", "present"), &Evidence::new())
        .unwrap();
    assert!(sr.value.abs() < 1e-12);
    assert!(sr.independent && sr.warning.is_none());
}
