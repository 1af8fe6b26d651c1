use std::process::Command;

fn uwas() -> Command {
    Command::new(env!("CARGO_BIN_EXE_uwas"))
}

#[test]
fn run_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(&cfg, "[plan]\nsamples_per_slot = 1024\n").unwrap();
    let out = uwas()
        .args(["run", "--config"])
        .arg(&cfg)
        .args([
            "--seed",
            "1,2",
            "--slots",
            "20",
            "--policy",
            "IMP,WUCB",
            "--geometry",
            "3-Sparse",
            "--gain-db",
            "10",
            "--mode",
            "sns",
            "--out-dir",
        ])
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(dir.path().join("out/slots.csv")).unwrap();
    // header plus 2 seeds x 2 policies x 20 slots
    assert_eq!(csv.lines().count(), 1 + 80);
    assert!(dir.path().join("out/summary.json").exists());
}

#[test]
fn config_errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "directions = 2\n").unwrap();
    let out = uwas().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    let missing = uwas()
        .args(["run", "--config", "/nonexistent.toml"])
        .output()
        .unwrap();
    assert!(!missing.status.success());
    let bad_flag = uwas()
        .args(["run", "--geometry", "5-ULA"])
        .output()
        .unwrap();
    assert!(!bad_flag.status.success());
}

#[test]
fn sweep_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(&cfg, "[plan]\nsamples_per_slot = 1024\n").unwrap();
    let out = uwas()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .args([
            "--seed",
            "1",
            "--slots",
            "10",
            "--geometry",
            "4-ULA",
            "--gain-db",
            "0,10",
            "--users",
            "3:62",
            "--out-dir",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let sweep = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 1 + 2 * 3);
    let doa = std::fs::read_to_string(dir.path().join("doa_sweep.csv")).unwrap();
    assert_eq!(doa.lines().count(), 1 + 2 * 2);
}
