use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use rulerank::harness::{synthesize_one, SynthConfig};
use rulerank::scenario::save_document;
use rulerank_ffi::*;

fn doc_bytes() -> Vec<u8> {
    let s = synthesize_one(&SynthConfig { seed: 3, ..SynthConfig::default() }, 0).unwrap();
    save_document(&s.document())
}

fn last_error() -> String {
    let p = rr_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn select_round_trip() {
    let bytes = doc_bytes();
    unsafe {
        let mut engine = ptr::null_mut();
        assert_eq!(rr_engine_new(ptr::null(), &mut engine), RrStatus::Ok);
        let mut scenario = ptr::null_mut();
        assert_eq!(rr_scenario_load(bytes.as_ptr(), bytes.len(), &mut scenario), RrStatus::Ok);
        let mut k = 0;
        assert_eq!(rr_scenario_candidate_count(scenario, &mut k), RrStatus::Ok);
        assert_eq!(k, 6);

        let mut sel = RrSelection::default();
        assert_eq!(rr_select(engine, scenario, RrStrategy::Lexicographic, &mut sel), RrStatus::Ok);
        assert!(sel.selected < k);
        assert!(sel.tier_scores.iter().all(|s| (0.0..=1.0).contains(s)));
        assert!(rr_last_error().is_null());

        let mut json = ptr::null_mut();
        assert_eq!(rr_evaluate_json(engine, scenario, &mut json), RrStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
        assert_eq!(v["tier_scores"].as_array().unwrap().len(), k);
        assert_eq!(v["tier_scores"][sel.selected][0].as_f64().unwrap(), sel.tier_scores[0]);
        rr_string_free(json);

        rr_scenario_free(scenario);
        rr_engine_free(engine);
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut engine = ptr::null_mut();
        let bad = CString::new(r#"{"scalarization_base": 100}"#).unwrap();
        assert_eq!(rr_engine_new(bad.as_ptr(), &mut engine), RrStatus::Config);
        assert!(engine.is_null());
        assert!(last_error().contains("base"), "{}", last_error());

        let unknown = CString::new(r#"{"nope": 1}"#).unwrap();
        assert_eq!(rr_engine_new(unknown.as_ptr(), &mut engine), RrStatus::Parse);

        let mut scenario = ptr::null_mut();
        let junk = b"{not json";
        assert_eq!(rr_scenario_load(junk.as_ptr(), junk.len(), &mut scenario), RrStatus::Parse);
        assert_eq!(rr_scenario_load(ptr::null(), 0, &mut scenario), RrStatus::NullPointer);

        let mut sel = RrSelection::default();
        assert_eq!(rr_select(ptr::null(), ptr::null(), RrStrategy::ConfidenceOnly, &mut sel), RrStatus::NullPointer);
        assert!(last_error().contains("engine"));

        // freeing null is a no-op
        rr_engine_free(ptr::null_mut());
        rr_scenario_free(ptr::null_mut());
        rr_string_free(ptr::null_mut());
    }
}

#[test]
fn document_without_candidates_is_rejected() {
    let s = synthesize_one(&SynthConfig::default(), 1).unwrap();
    let bytes = rulerank::scenario::save_scenario(&s.scenario);
    let mut scenario = ptr::null_mut();
    let st = unsafe { rr_scenario_load(bytes.as_ptr(), bytes.len(), &mut scenario) };
    assert_eq!(st, RrStatus::MissingCandidates);
}

#[test]
fn verify_through_abi() {
    let mut ok = false;
    assert_eq!(unsafe { rr_verify(5, 200, &mut ok) }, RrStatus::Ok);
    assert!(ok);
    let v = unsafe { CStr::from_ptr(rr_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn header() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/rulerank.h")
}

#[test]
fn header_declares_every_entry_point() {
    let h = std::fs::read_to_string(header()).unwrap();
    for f in [
        "rr_last_error", "rr_version", "rr_engine_new", "rr_engine_free", "rr_scenario_load", "rr_scenario_free",
        "rr_scenario_candidate_count", "rr_select", "rr_evaluate_json", "rr_string_free", "rr_verify",
    ] {
        assert!(h.contains(&format!("{f}(")), "{f} missing from header");
    }
    assert!(h.contains("typedef struct RrEngine RrEngine;"));
    assert!(h.contains("RR_STATUS_OK = 0"));
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include "rulerank.h"

int main(int argc, char **argv) {
    FILE *f = fopen(argv[1], "rb");
    if (!f) return 10;
    static unsigned char buf[1 << 22];
    size_t n = fread(buf, 1, sizeof buf, f);
    fclose(f);
    RrEngine *engine = NULL;
    RrScenario *scenario = NULL;
    if (rr_engine_new(NULL, &engine) != RR_STATUS_OK) return 11;
    if (rr_scenario_load(buf, n, &scenario) != RR_STATUS_OK) return 12;
    RrSelection sel;
    if (rr_select(engine, scenario, RR_STRATEGY_LEXICOGRAPHIC, &sel) != RR_STATUS_OK) return 13;
    printf("%zu %d\n", sel.selected, (int)sel.infeasible);
    if (rr_engine_new("{\"scalarization_base\": 100}", &engine) != RR_STATUS_CONFIG) return 14;
    if (rr_last_error() == NULL) return 15;
    rr_scenario_free(scenario);
    return 0;
}
"#;

#[test]
fn c_program_links_against_static_library() {
    // the archive next to the test binary is rebuilt by `cargo test`; the
    // copy one level up is only refreshed by `cargo build`
    let deps = std::env::current_exe().unwrap().parent().unwrap().to_path_buf();
    let lib = deps.join("librulerank_ffi.a");
    assert!(lib.exists(), "static library not built at {}", lib.display());

    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let exe = dir.path().join("main");
    let doc = dir.path().join("doc.json");
    std::fs::write(&src, C_PROGRAM).unwrap();
    std::fs::write(&doc, doc_bytes()).unwrap();

    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(header().parent().unwrap())
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("C compiler available");
    assert!(status.success());

    let out = Command::new(&exe).arg(&doc).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());

    let mut sel = RrSelection::default();
    let bytes = doc_bytes();
    unsafe {
        let (mut e, mut s) = (ptr::null_mut(), ptr::null_mut());
        rr_engine_new(ptr::null(), &mut e);
        rr_scenario_load(bytes.as_ptr(), bytes.len(), &mut s);
        rr_select(e, s, RrStrategy::Lexicographic, &mut sel);
        rr_scenario_free(s);
        rr_engine_free(e);
    }
    let expected = format!("{} {}\n", sel.selected, sel.infeasible as i32);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), expected);
}
