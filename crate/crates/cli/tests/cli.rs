use std::process::{Command, Output};

const SMALL: [&str; 8] = ["--set", "m=8", "--set", "k=2", "--set", "l=2", "--set", "n=4"];

fn risnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_risnet"))
        .args(args)
        .env_remove("RISNET_THREADS")
        .output()
        .expect("failed to launch risnet")
}

fn with_small<'a>(head: &[&'a str]) -> Vec<&'a str> {
    head.iter().copied().chain(SMALL).collect()
}

#[test]
fn unknown_subcommand_fails_with_usage() {
    let out = risnet(&["frobnicate"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn unknown_preset_fails() {
    let out = risnet(&["preset", "fig9"]);
    assert!(!out.status.success());
}

#[test]
fn preset_output_identical_across_runs_and_threads() {
    let base = with_small(&["preset", "fig2", "--samples", "50"]);
    let mut one = base.clone();
    one.extend(["--threads", "1"]);
    let mut four = base.clone();
    four.extend(["--threads", "4"]);
    let a = risnet(&one);
    let b = risnet(&one);
    let c = risnet(&four);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
    assert_eq!(String::from_utf8_lossy(&a.stdout).lines().count(), 1 + 10 * 6);
}

#[test]
fn fig4_without_samples_is_deterministic_only() {
    let args = with_small(&["preset", "fig4", "--samples", "0", "--format", "json"]);
    let out = risnet(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let table = risnet_core::experiment::read_results(&text, risnet_core::experiment::OutputFormat::Json).unwrap();
    assert_eq!(table.rows.len(), 7 * 3);
    assert!(table.rows.iter().all(|r| r.sinr_mc.is_none() && r.netrate_inst_bps_hz.is_none()));
    let pga = table.rows.iter().filter(|r| r.design == risnet_core::experiment::RisDesign::ScsiPga);
    assert!(pga.clone().count() == 14 && pga.clone().all(|r| r.netrate_det_bps_hz.is_some()));
}

#[test]
fn run_writes_file_and_validate_accepts_it() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.json");
    let out_path = dir.path().join("table.csv");
    std::fs::write(
        &config,
        r#"{
            "name": "small",
            "scenario": {"m": 4, "k": 2, "l": 1, "n": 2, "p_max_dbm": 30},
            "sweep": {"axis": "m", "values": [4, 8]},
            "protocols": ["dft", "de"],
            "designs": ["random"],
            "mc_samples": 20
        }"#,
    )
    .unwrap();
    let cfg = config.to_str().unwrap();
    let v = risnet(&["validate", cfg]);
    assert!(v.status.success(), "{}", String::from_utf8_lossy(&v.stderr));
    let r = risnet(&["run", cfg, "--out", out_path.to_str().unwrap(), "--seed", "9"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let text = std::fs::read_to_string(&out_path).unwrap();
    let table = risnet_core::experiment::read_results(&text, risnet_core::experiment::OutputFormat::Csv).unwrap();
    assert_eq!(table.rows.len(), 4);
    assert!(table.rows.iter().all(|r| r.seed == 9 && r.status == "ok"));
}

#[test]
fn invalid_config_reports_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.json");
    std::fs::write(
        &config,
        r#"{"name":"bad","sweep":{"axis":"p_max","values":[1]},"protocols":[],"designs":["random"]}"#,
    )
    .unwrap();
    let out = risnet(&["validate", config.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("protocol"));
    let out = risnet(&["run", "/nonexistent/exp.json"]);
    assert!(!out.status.success());
}

#[test]
fn bad_override_rejected() {
    let out = risnet(&["preset", "fig2", "--set", "warp=9"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warp"));
}

#[test]
fn selftest_passes_and_repeats() {
    let a = risnet(&["selftest"]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stdout));
    assert_eq!(a.stdout, risnet(&["selftest", "--threads", "2"]).stdout);
}
