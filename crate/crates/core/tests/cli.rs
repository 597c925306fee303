mod common;

use std::process::{Command, Output};

use common::fixture;
use serde_json::Value;

fn beliefnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_beliefnet")).args(args).output().expect("binary runs")
}

fn path(name: &str) -> String {
    fixture(name).display().to_string()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(args: &[&str]) -> Value {
    let mut full = vec!["--format", "json"];
    full.extend_from_slice(args);
    let out = beliefnet(&full);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn cold_stress_posterior() {
    let out = beliefnet(&["infer", &path("coldstress.bn"), "--evidence", &path("noreports.ev")]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("ColdStressRegion"));
    assert!(text.lines().any(|l| l.trim_start().starts_with("present") && l.ends_with("0.3333")), "{text}");
}

#[test]
fn expand_prints_the_full_table() {
    let out = beliefnet(&["expand", &path("orchard-mini.bn"), "--node", "LateSeasonGrowth"]);
    assert!(out.status.success());
    let text = stdout(&out);
    for yes in ["0.1000", "0.6000", "0.8000", "0.9111", "0.9556", "0.9802"] {
        assert!(text.contains(yes), "{yes} missing from\n{text}");
    }
    assert!(text.contains("parameters: full 8, canonical 4"));
    let report = json(&["expand", &path("orchard-mini.bn"), "--node", "LateSeasonGrowth"]);
    assert_eq!(report["rows"].as_array().unwrap().len(), 8);
}

#[test]
fn scenario_suite_passes() {
    let out = beliefnet(&["scenario", &path("orchard-mini.bn"), &path("scenarios.toml")]);
    assert!(out.status.success(), "{}", stdout(&out));
    assert!(stdout(&out).contains("8/8 scenarios passed"));
}

#[test]
fn failing_scenario_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("bad.toml");
    std::fs::write(
        &suite,
        "[[scenario]]\nname = \"wrong\"\n[[scenario.expect]]\nvariable = \"Phytophthora\"\nlevel = \"present\"\nprobability = 0.9\n",
    )
    .unwrap();
    let out = beliefnet(&["scenario", &path("orchard-mini.bn"), suite.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("FAIL"));
}

#[test]
fn output_is_deterministic() {
    let args = ["sense", &path("orchard-mini.bn"), "--target", "Phytophthora=present", "--rank-indicants"];
    let first = beliefnet(&args);
    for _ in 0..3 {
        assert_eq!(beliefnet(&args).stdout, first.stdout);
    }
}

#[test]
fn json_matches_text_numbers() {
    let net = path("orchard-mini.bn");
    let ev = path("scenarios/mixed-root-signs.ev");
    let text = stdout(&beliefnet(&["infer", &net, "--evidence", &ev]));
    let report = json(&["infer", &net, "--evidence", &ev]);
    for post in report["posteriors"].as_array().unwrap() {
        for (level, p) in post["levels"].as_array().unwrap().iter().zip(post["probabilities"].as_array().unwrap()) {
            let line = format!("  {}", level.as_str().unwrap());
            let shown = format!("{:.4}", p.as_f64().unwrap());
            assert!(text.lines().any(|l| l.starts_with(&line) && l.ends_with(&shown)), "{line} {shown}\n{text}");
        }
    }
    let decide = json(&["decide", &net]);
    assert_eq!(decide["recommended"], "no_treat");
    let decide_text = stdout(&beliefnet(&["decide", &net]));
    for alt in decide["alternatives"].as_array().unwrap() {
        let shown = format!("{:.4}", alt["expected_utility"].as_f64().unwrap());
        assert!(decide_text.contains(&shown), "{shown}\n{decide_text}");
    }
}

#[test]
fn sensitivity_commands() {
    let cold = path("coldstress.bn");
    let range = json(&["sense", &cold, "--target", "ColdStressRegion=present", "--pivot", "ReportsOfColdStress=none"]);
    let value = range["range"]["value"].as_f64().unwrap();
    assert!((value - (1.0 / 3.0 - 0.95 * 0.975 / (0.95 * 0.975 + 0.05 * 0.05))).abs() < 1e-12);

    let sweep = json(&[
        "sense",
        &path("orchard-mini.bn"),
        "--target",
        "Phytophthora=present",
        "--sweep",
        "ActivePhytophthora/3/0",
        "--grid",
        "0:1:11",
    ]);
    let crossings = sweep["sweep"]["crossings"].as_array().unwrap();
    assert_eq!(crossings.len(), 1);
    assert_eq!(crossings[0]["to"], "treat");

    let odds = json(&["sense", "--odds", "0.0526315789", "--likelihood", "0.0263157895"]);
    assert!((odds["odds"]["posterior"].as_f64().unwrap() - 0.001383).abs() < 1e-5);

    let chain = json(&[
        "sense",
        &path("orchard-mini.bn"),
        "--pivot",
        "ColdEpisodeRecords=yes",
        "--chain",
        "ColdStressRegion=present",
        "--target",
        "ColdStressOrchard=yes",
    ]);
    assert_eq!(chain["chain"]["links"].as_array().unwrap().len(), 2);
}

#[test]
fn exit_codes() {
    assert_eq!(beliefnet(&["validate", &path("orchard-mini.bn")]).status.code(), Some(0));
    assert_eq!(beliefnet(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(beliefnet(&["infer"]).status.code(), Some(2));
    assert_eq!(beliefnet(&["--help"]).status.code(), Some(0));
    assert_eq!(beliefnet(&["infer", "/no/such/file.bn"]).status.code(), Some(1));
    assert_eq!(beliefnet(&["sense", &path("coldstress.bn")]).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.bn");
    std::fs::write(&broken, "variable A { levels no yes }\nnode A { kind chance; parents Ghost; cpd table { row 1 0 } }\n").unwrap();
    let out = beliefnet(&["validate", broken.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("broken.bn:2:"), "{stderr}");
    assert!(stdout(&out).contains("invalid"));
}

#[test]
fn decide_needs_a_decision() {
    let out = beliefnet(&["decide", &path("coldstress.bn")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}
