use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn instances() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../instances")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aisbound")).args(args).env_remove("AISBOUND_SEED").output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn region_builtin_prints_six_vertices() {
    let o = run(&["region"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = String::from_utf8(o.stdout).unwrap();
    assert!(!csv.contains('\r'));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "vertex,d1,d2,d1_decimal,d2_decimal");
    assert_eq!(lines.len(), 7);
    assert!(lines.contains(&"3,13/9,7/3,1.4444444444444444,2.3333333333333335"));
}

#[test]
fn region_expectation_mismatch_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "r.json",
        r#"{"schema_version":1,"kind":"region","body":{"region":{"builtin":"mimo-ic"},"expect":[{"d1":"0","d2":"0"}]}}"#,
    );
    assert_eq!(run(&["region", &f]).status.code(), Some(1));
}

#[test]
fn unbounded_region_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "r.json",
        r#"{"schema_version":1,"kind":"region","body":{"region":{"half-planes":[{"a1":"-1","a2":"0","b":"0"}]}}}"#,
    );
    let o = run(&["region", &f]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unbounded"));
}

#[test]
fn builtin_certificates_pass() {
    let o = run(&["certificate"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["check"]["valid"], true);
    assert_eq!(v["manifest"]["kind"], "certificate");
    let f = instances().join("certificate-weighted.json");
    assert_eq!(run(&["certificate", f.to_str().unwrap()]).status.code(), Some(0));
}

#[test]
fn perturbed_certificate_exits_one_with_residual() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "c.json",
        r#"{"schema_version":1,"kind":"certificate","body":{"certificate":{"custom":{
            "premises":[{"premise":{"builtin":"rx1-chain"},"weight":"1001/1000"},{"premise":{"builtin":"rx2-chain"},"weight":"1"}],
            "target":{"terms":{"nR1":"3","nR2":"3"},"bound":"34/3"}}}}}"#,
    );
    let o = run(&["certificate", &f]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["check"]["valid"], false);
    assert!(!v["check"]["residual"].as_object().unwrap().is_empty());
}

#[test]
fn monotone_violation_reports_triple() {
    let f = instances().join("monotone-violation.json");
    let o = run(&["verify", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("(k, a, b) = (1, 1, 2)"), "{}", stderr(&o));
}

#[test]
fn diagnostics_are_distinct() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", "{\"schema_version\": 1,");
    let unknown = write(dir.path(), "unknown.json", r#"{"schema_version":1,"kind":"certificate","body":{"certificate":{"builtin":"sum-rate"},"x":1}}"#);
    let wrong_kind = write(dir.path(), "kind.json", r#"{"schema_version":1,"kind":"region","body":{"region":{"builtin":"mimo-ic"}}}"#);
    let cap = write(
        dir.path(),
        "cap.json",
        r#"{"schema_version":1,"kind":"theorem-verify","body":{
            "instance":{"preset":{"name":"two-band","lambda1":"1","lambda2":"1/2"}},"pbars":[4,64],"trials":2,"cap":4096}}"#,
    );
    let cases = [
        (vec!["verify", bad.as_str()], "malformed JSON"),
        (vec!["certificate", unknown.as_str()], "schema violation"),
        (vec!["verify", wrong_kind.as_str()], "does not match subcommand"),
        (vec!["verify", cap.as_str(), "--strict"], "cap is 4096"),
        (vec!["verify", "/nonexistent/instance.json"], "i/o error"),
    ];
    for (args, needle) in cases {
        let o = run(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(stderr(&o).contains(needle), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn capped_point_is_skipped_without_strict() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "cap.json",
        r#"{"schema_version":1,"kind":"theorem-verify","body":{
            "instance":{"preset":{"name":"two-band","lambda1":"1","lambda2":"1/2"}},"pbars":[4,8,64],"trials":2,"cap":4096}}"#,
    );
    let out = dir.path().join("run.csv");
    let o = run(&["verify", &f, "--out", out.to_str().unwrap()]);
    assert!(matches!(o.status.code(), Some(0 | 1)));
    assert!(stderr(&o).contains("pbar=64 skipped"));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 3);
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("run.manifest.json")).unwrap()).unwrap();
    assert!(m["tasks"].as_array().unwrap().iter().any(|t| t["status"] == "error"));
}

#[test]
fn verify_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let f = instances().join("two-band-verify.json");
    let out = dir.path().join("sweep.csv");
    let o = run(&["verify", f.to_str().unwrap(), "--trials", "4", "--out", out.to_str().unwrap()]);
    assert!(matches!(o.status.code(), Some(0 | 1)), "{}", stderr(&o));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("P,pbar,lhs_bits,rhs_bits,gap_bits,normalized_gap,condition_ok\n"));
    assert_eq!(csv.lines().count(), 4);
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("sweep.manifest.json")).unwrap()).unwrap();
    let bytes = std::fs::read(&f).unwrap();
    use sha2::Digest;
    assert_eq!(m["input_sha256"], hex::encode(sha2::Sha256::digest(&bytes)));
    assert_eq!(m["trials"], 4);
    assert!(m["wall_time_seconds"].as_f64().unwrap() > 0.0);
}

#[test]
fn seed_precedence_flag_over_env_over_file() {
    let dir = tempfile::tempdir().unwrap();
    let f = instances().join("two-band-verify.json");
    let f = f.to_str().unwrap();
    let seed_of = |extra: &[&str], env: Option<&str>| -> (u64, Vec<u8>) {
        let out = dir.path().join("s.csv");
        let mut c = Command::new(env!("CARGO_BIN_EXE_aisbound"));
        c.args(["verify", f, "--trials", "3", "--out", out.to_str().unwrap()]).args(extra).env_remove("AISBOUND_SEED");
        if let Some(e) = env {
            c.env("AISBOUND_SEED", e);
        }
        let o = c.output().unwrap();
        assert!(matches!(o.status.code(), Some(0 | 1)));
        let m: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("s.manifest.json")).unwrap()).unwrap();
        (m["seed"].as_u64().unwrap(), std::fs::read(&out).unwrap())
    };
    let (default_seed, default_csv) = seed_of(&[], None);
    let (env_seed, env_csv) = seed_of(&[], Some("99"));
    let (flag_seed, _) = seed_of(&["--seed", "5"], Some("99"));
    assert_eq!(default_seed, aisbound::DEFAULT_SEED);
    assert_eq!(env_seed, 99);
    assert_eq!(flag_seed, 5);
    assert_ne!(default_csv, env_csv);
}

#[test]
fn ais_json_embeds_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "a.json",
        r#"{"schema_version":1,"kind":"ais-oracle","body":{
            "instance":{"preset":{"name":"two-band","lambda1":"1/2","lambda2":"1/2"}},"pbar":16,"draws":200,"pairs":true}}"#,
    );
    let o = run(&["ais", &f]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["manifest"]["kind"], "ais-oracle");
    assert_eq!(v["pbar"], 16);
    assert!(v["cardinality"]["expected_cardinality"].as_f64().unwrap() >= 1.0);
    assert_eq!(v["pairs"]["violations"].as_array().unwrap().len(), 0);
}

#[test]
fn partition_table_reconstructs() {
    let f = instances().join("partition.json");
    let o = run(&["partition", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let csv = String::from_utf8(o.stdout).unwrap();
    assert!(csv.starts_with("x,band1,band2,band3,reconstructed\n"));
    for line in csv.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[0], cells[4]);
    }
    assert!(csv.contains("\n200,0,2,12,200\n"));
}

#[test]
fn partition_rejects_out_of_layout_signal() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "p.json", r#"{"schema_version":1,"kind":"partition-demo","body":{"pbar":4,"levels":["1"],"values":[4]}}"#);
    let o = run(&["partition", &f]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("does not fit"));
}

#[test]
fn lemma1_sweep_csv() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "l.json", r#"{"schema_version":1,"kind":"lemma1","body":{"pbars":[16,32],"trials":4}}"#);
    let o = run(&["lemma1", &f]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = String::from_utf8(o.stdout).unwrap();
    assert!(csv.starts_with("P,pbar,dominant_bits,lhs_bits,gap_bits,normalized_gap,violation\n"));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn thread_count_does_not_change_output() {
    let f = instances().join("two-band-verify.json");
    let a = run(&["verify", f.to_str().unwrap(), "--trials", "4", "--threads", "1"]);
    let b = run(&["verify", f.to_str().unwrap(), "--trials", "4", "--threads", "3"]);
    assert_eq!(a.stdout, b.stdout);
}
