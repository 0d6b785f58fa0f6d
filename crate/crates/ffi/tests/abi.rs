use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use kgalign_ffi::*;

fn last_error() -> String {
    let p = kga_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn toy_pair_statistics() {
    unsafe {
        let mut pair = ptr::null_mut();
        assert_eq!(kga_pair_toy_cycles(8, 4, &mut pair), KgaStatus::Ok);
        let mut s = KgaStatistics::default();
        assert_eq!(kga_pair_statistics(pair, &mut s), KgaStatus::Ok);
        assert_eq!(s.left.triples, 8);
        assert_eq!(s.right.entities, 8);
        assert_eq!(s.alignments, 8);
        kga_pair_free(pair);
    }
}

#[test]
fn null_arguments_are_reported() {
    unsafe {
        let mut s = KgaStatistics::default();
        assert_eq!(kga_pair_statistics(ptr::null(), &mut s), KgaStatus::NullPointer);
        assert!(last_error().contains("pair"));
        let mut cfg = ptr::null_mut();
        assert_eq!(kga_config_parse(ptr::null(), &mut cfg), KgaStatus::NullPointer);
        kga_pair_free(ptr::null_mut());
        kga_string_free(ptr::null_mut());
    }
}

#[test]
fn error_codes_follow_categories() {
    unsafe {
        let mut cfg = ptr::null_mut();
        let bad = CString::new("dataset.family = toy-cycles\nencoder.layers = 9\n").unwrap();
        assert_eq!(kga_config_parse(bad.as_ptr(), &mut cfg), KgaStatus::Config);
        assert!(last_error().contains("layers"));

        let mut pair = ptr::null_mut();
        let fam = CString::new("dbp15k-jape").unwrap();
        let sub = CString::new("zh-en").unwrap();
        let root = CString::new("/nonexistent/kgalign").unwrap();
        assert_eq!(
            kga_pair_load(fam.as_ptr(), sub.as_ptr(), root.as_ptr(), &mut pair),
            KgaStatus::Dataset
        );
        assert!(pair.is_null());

        let invalid = [0xffu8, 0];
        assert_eq!(
            kga_config_parse(invalid.as_ptr().cast(), &mut cfg),
            KgaStatus::InvalidUtf8
        );
    }
}

#[test]
fn run_and_read_report() {
    unsafe {
        let text = CString::new(
            "dataset.family = toy-cycles\nsplit.enabled = false\nencoder.dim = 32\ntraining.epochs = 300\n",
        )
        .unwrap();
        let mut cfg = ptr::null_mut();
        assert_eq!(kga_config_parse(text.as_ptr(), &mut cfg), KgaStatus::Ok);

        let id = kga_config_run_id(cfg);
        assert_eq!(CStr::from_ptr(id).to_bytes().len(), 16);
        kga_string_free(id);
        let round = kga_config_to_text(cfg);
        assert!(CStr::from_ptr(round).to_str().unwrap().contains("encoder.dim = 32"));
        kga_string_free(round);

        let mut report = ptr::null_mut();
        assert_eq!(kga_run(cfg, ptr::null(), 0, &mut report), KgaStatus::Ok);
        let mut m = KgaMetrics::default();
        assert_eq!(
            kga_report_test_metrics(report, KgaDirection::Mean, &mut m),
            KgaStatus::Ok
        );
        assert_eq!(m.n_queries, 4);
        assert_eq!(m.hits_at_1, 100.0);
        assert_eq!(m.mrr, 1.0);
        let json = kga_report_json(report);
        let parsed: serde_json::Value =
            serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
        assert_eq!(parsed["test"]["mean"]["mean_rank"], 1.0);
        kga_string_free(json);
        kga_report_free(report);
        kga_config_free(cfg);
    }
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(kga_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

/// Directory holding the built static library (`target/<profile>`).
fn artifact_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn header_compiles_and_links_from_c() {
    let lib = artifact_dir().join("libkgalign_ffi.a");
    if Command::new("cc").arg("--version").output().is_err() || !lib.is_file() {
        eprintln!("skipping: no C compiler or static library at {}", lib.display());
        return;
    }
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let out = tempfile_path("kgalign_smoke");
    let status = Command::new("cc")
        .arg(crate_dir.join("tests/smoke.c"))
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-o")
        .arg(&out)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let run = Command::new(&out).output().unwrap();
    let _ = std::fs::remove_file(&out);
    assert!(
        run.status.success(),
        "smoke binary exited with {:?}: {}",
        run.status.code(),
        String::from_utf8_lossy(&run.stdout)
    );
    assert!(String::from_utf8_lossy(&run.stdout).contains("h1=100.00"));
}

fn tempfile_path(stem: &str) -> PathBuf {
    std::env::temp_dir().join(format!("{stem}_{}", std::process::id()))
}
