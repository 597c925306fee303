use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use beliefnet_ffi::*;

fn fixture(name: &str) -> CString {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name);
    CString::new(std::fs::read_to_string(path).unwrap()).unwrap()
}

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn parse(name: &str) -> *mut BnNetwork {
    let mut net = ptr::null_mut();
    assert_eq!(unsafe { bn_network_parse(fixture(name).as_ptr(), &mut net) }, BnStatus::Ok);
    assert!(!net.is_null());
    net
}

fn last_error() -> String {
    let p = bn_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn cold_stress_round_trip() {
    let net = parse("coldstress.bn");
    unsafe {
        assert_eq!(bn_network_node_count(net), 2);
        let ev = bn_evidence_new();
        assert_eq!(bn_evidence_set(ev, c("ReportsOfColdStress").as_ptr(), c("none").as_ptr()), BnStatus::Ok);
        let mut out = [0.0; 2];
        let mut n = 0;
        assert_eq!(bn_posterior(net, ev, c("ColdStressRegion").as_ptr(), out.as_mut_ptr(), 2, &mut n), BnStatus::Ok);
        assert_eq!(n, 2);
        assert!((out[1] - 1.0 / 3.0).abs() < 1e-12);

        let mut pe = 0.0;
        assert_eq!(bn_evidence_probability(net, ev, &mut pe), BnStatus::Ok);
        assert!((pe - (0.05 * 0.95 + 0.95 * 0.025)).abs() < 1e-12);

        assert_eq!(bn_evidence_clear(ev, c("ReportsOfColdStress").as_ptr()), BnStatus::Ok);
        assert_eq!(bn_posterior(net, ev, c("ColdStressRegion").as_ptr(), out.as_mut_ptr(), 2, &mut n), BnStatus::Ok);
        assert!((out[1] - 0.95).abs() < 1e-12);
        assert_eq!(bn_posterior(net, ptr::null(), c("ColdStressRegion").as_ptr(), out.as_mut_ptr(), 2, &mut n), BnStatus::Ok);

        let mut sr = 0.0;
        let status = bn_sensitivity_range(
            net,
            ptr::null(),
            c("ColdStressRegion").as_ptr(),
            c("present").as_ptr(),
            c("ReportsOfColdStress").as_ptr(),
            c("none").as_ptr(),
            &mut sr,
        );
        assert_eq!(status, BnStatus::Ok);
        assert!(sr < 0.0 && sr > -1.0);

        let mut text = ptr::null_mut();
        assert_eq!(bn_network_serialize(net, &mut text), BnStatus::Ok);
        let mut again = ptr::null_mut();
        assert_eq!(bn_network_parse(text, &mut again), BnStatus::Ok);
        assert_eq!(bn_network_node_count(again), 2);
        bn_string_free(text);
        bn_network_free(again);
        bn_evidence_free(ev);
        bn_network_free(net);
    }
}

#[test]
fn decisions() {
    let net = parse("orchard-mini.bn");
    unsafe {
        let mut alt = ptr::null_mut();
        let mut eu = 0.0;
        assert_eq!(bn_recommend(net, ptr::null(), &mut alt, &mut eu), BnStatus::Ok);
        assert_eq!(CStr::from_ptr(alt).to_str().unwrap(), "no_treat");
        bn_string_free(alt);
        let mut treat = 0.0;
        assert_eq!(bn_expected_utility(net, ptr::null(), c("treat").as_ptr(), &mut treat), BnStatus::Ok);
        assert!(treat < eu);
        assert_eq!(bn_expected_utility(net, ptr::null(), c("prune").as_ptr(), &mut treat), BnStatus::UnknownName);
        bn_network_free(net);
    }
}

#[test]
fn error_codes() {
    unsafe {
        let mut net = ptr::null_mut();
        let bad = c("variable A { levels no yes }\nnode A { kind chance; parents Ghost; cpd table { row 1 0 } }\n");
        assert_eq!(bn_network_parse(bad.as_ptr(), &mut net), BnStatus::ParseError);
        assert!(net.is_null());
        assert!(last_error().contains("Ghost"));
        assert_eq!(bn_network_parse(ptr::null(), &mut net), BnStatus::NullArgument);

        let invalid = [0xffu8, 0xfe, 0];
        assert_eq!(bn_network_parse(invalid.as_ptr().cast(), &mut net), BnStatus::InvalidUtf8);

        let net = parse("orchard-mini.bn");
        let mut out = [0.0; 1];
        let mut n = 0;
        assert_eq!(bn_posterior(net, ptr::null(), c("TissueDamage").as_ptr(), out.as_mut_ptr(), 1, &mut n), BnStatus::BufferTooSmall);
        assert_eq!(n, 4);
        let ev = bn_evidence_new();
        bn_evidence_set(ev, c("WinterStress").as_ptr(), c("BeyondRecovery").as_ptr());
        bn_evidence_set(ev, c("AbioticStress").as_ptr(), c("None").as_ptr());
        let mut pe = 1.0;
        assert_eq!(bn_evidence_probability(net, ev, &mut pe), BnStatus::Ok);
        assert_eq!(pe, 0.0);
        let mut four = [0.0; 4];
        assert_eq!(
            bn_posterior(net, ev, c("Phytophthora").as_ptr(), four.as_mut_ptr(), 4, &mut n),
            BnStatus::ImpossibleEvidence
        );
        bn_evidence_set(ev, c("AbioticStress").as_ptr(), c("Sideways").as_ptr());
        assert_eq!(bn_posterior(net, ev, c("Phytophthora").as_ptr(), four.as_mut_ptr(), 4, &mut n), BnStatus::UnknownName);
        assert_eq!(bn_posterior(ptr::null(), ev, c("Phytophthora").as_ptr(), four.as_mut_ptr(), 4, &mut n), BnStatus::NullArgument);
        let mut card = 0;
        assert_eq!(bn_variable_cardinality(net, c("TissueDamage").as_ptr(), &mut card), BnStatus::Ok);
        assert_eq!(card, 4);
        assert!(bn_last_error().is_null());
        bn_evidence_free(ev);
        bn_network_free(net);
    }
}

#[test]
fn counts_and_odds() {
    let (mut full, mut canonical) = (0, 0);
    let cards = [2usize, 3, 3];
    assert_eq!(unsafe { bn_parameter_counts(cards.as_ptr(), 3, 2, false, &mut full, &mut canonical) }, BnStatus::Ok);
    assert_eq!((full, canonical), (18, 5));
    assert_eq!(unsafe { bn_parameter_counts(ptr::null(), 0, 2, true, &mut full, &mut canonical) }, BnStatus::Ok);
    assert_eq!((full, canonical), (1, 1));
    let p = bn_posterior_from_odds(0.05 / 0.95, 0.025 / 0.95);
    assert!((p - 0.05 * 0.025 / (0.05 * 0.025 + 0.95 * 0.95)).abs() < 1e-15);
    assert!(bn_likelihood_sensitivity(1.0, 1.0) - 0.25 < 1e-15);
    assert!(!bn_version().is_null());
}

#[test]
fn header_is_current_and_usable_from_c() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/beliefnet.h")).unwrap();
    for symbol in ["bn_network_parse", "bn_posterior", "bn_recommend", "bn_last_error", "BN_STATUS_IMPOSSIBLE_EVIDENCE"] {
        assert!(header.contains(symbol), "{symbol} missing from header");
    }
    // the static library sits next to the test binary's deps directory
    let exe = std::env::current_exe().unwrap();
    let lib_dir = exe.parent().and_then(|d| d.parent()).unwrap();
    let staticlib = lib_dir.join("libbeliefnet_ffi.a");
    if !staticlib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping C build: no static library or C compiler");
        return;
    }
    let out_dir = tempfile::tempdir().unwrap();
    let binary = out_dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(dir.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(dir.join("include"))
        .arg(&staticlib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&binary)
        .status()
        .unwrap();
    assert!(status.success());
    let run = Command::new(&binary).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "0.3333");
}
