use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

fn btq(args: &[&str], cache_env: Option<&Path>) -> (i32, String, String) {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_btq"));
    cmd.args(args).env("RUST_LOG", "warn");
    match cache_env {
        Some(p) => cmd.env("BTQ_CACHE", p),
        None => cmd.env_remove("BTQ_CACHE"),
    };
    let out = cmd.output().expect("binary runs");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into(), String::from_utf8_lossy(&out.stderr).into())
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.cfg");
    fs::write(&path, body).unwrap();
    path.display().to_string()
}

#[test]
fn fock_verify_passes_quickly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[model]\nkind = plane\nB0 = 1\n");
    let out = dir.path().join("out");
    let start = Instant::now();
    let (code, stdout, stderr) = btq(&["fock-verify", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(code, 0, "{stdout}\n{stderr}");
    assert!(start.elapsed().as_secs() < 10);
    assert!(stdout.contains("ExactVanishing"));
    assert!(out.join("fock-verify.json").exists() && out.join("fock-verify.csv").exists());
}

#[test]
fn gap_on_constant_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[model]\nkind = torus2\nN = 1\n");
    let out = dir.path().join("out");
    let (code, stdout, stderr) = btq(&["gap", "--config", &cfg, "--out", out.to_str().unwrap(), "--p", "4,8,16", "--jobs", "2"], None);
    assert_eq!(code, 0, "{stdout}\n{stderr}");
    let json = fs::read_to_string(out.join("gap.json")).unwrap();
    assert!(json.contains("\"verdict\": \"Pass\""));
    assert!(json.contains("\"config_hash\""));
}

#[test]
fn corrupted_cache_is_recomputed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[model]\nkind = torus2\nN = 1\n[sweep]\np = 2, 3, 4\n");
    let cache = dir.path().join("cache");
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        let r = btq(&["gap", "density", "--config", &cfg, "--out", out.to_str().unwrap()], Some(&cache));
        (r, out)
    };
    let ((code, _, _), first) = run("a");
    assert_eq!(code, 0);
    let entries: Vec<_> = fs::read_dir(&cache).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(entries.len(), 3);
    let mut bytes = fs::read(&entries[0]).unwrap();
    let k = bytes.len() / 2;
    bytes[k] ^= 0x55;
    fs::write(&entries[0], bytes).unwrap();
    let ((code, _, stderr), second) = run("b");
    assert_eq!(code, 0);
    assert!(stderr.contains("checksum"), "{stderr}");
    let strip = |p: &Path| btq_core::runner::strip_timestamp(&fs::read_to_string(p).unwrap());
    assert_eq!(strip(&first.join("gap.json")), strip(&second.join("gap.json")));
}

#[test]
fn errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "[model]\nkind = torus2\nB0 = 5\n");
    let (code, _, stderr) = btq(&["gap", "--config", &bad], None);
    assert_eq!(code, 1);
    assert!(stderr.contains("flux"), "{stderr}");
    let good = write_config(dir.path(), "[model]\nkind = torus2\n");
    assert_eq!(btq(&["bogus", "--config", &good], None).0, 1);
    let unknown = write_config(dir.path(), "[model]\nkind = torus2\nspeed = 3\n");
    assert_eq!(btq(&["gap", "--config", &unknown], None).0, 1);
}

#[test]
fn inconclusive_exits_two() {
    // an R² gate of 1.1 can never be met, so every rate verdict is inconclusive
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[model]\nkind = torus2\nN = 1\n[tolerances]\nmin_r2 = 1.1\n");
    let out = dir.path().join("out");
    let (code, stdout, _) = btq(&["symbol", "--config", &cfg, "--out", out.to_str().unwrap(), "--p", "2,3,4"], None);
    assert_eq!(code, 2, "{stdout}");
}
