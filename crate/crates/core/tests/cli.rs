use std::path::Path;
use std::process::Command;

fn lowmach() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lowmach"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn sweep_then_check_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.cfg", "grid.nx = 64\nsweep.epsilons = [0.4, 0.2, 0.1]\ntime.t_end = 0.1\n");
    let out = dir.path().join("out");
    let run = lowmach()
        .args(["sweep", cfg.to_str().unwrap(), "--output-dir", out.to_str().unwrap(), "--threads", "2", "--no-plots"])
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(matches!(run.status.code(), Some(0) | Some(2)), "{stdout}");
    assert!(stdout.lines().any(|l| l.starts_with("PASS") || l.starts_with("FAIL")));
    assert!(out.join("sweep.csv").exists());
    assert!(!out.join("sweep_loglog.svg").exists());

    let text = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(!text.contains('\r'));

    let check = lowmach().args(["check", out.join("sweep.csv").to_str().unwrap()]).output().unwrap();
    assert!(matches!(check.status.code(), Some(0) | Some(2)));
    let check = lowmach()
        .args(["check", out.join("diagnostics_eps_0.2.csv").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(check.status.code(), Some(0), "{}", String::from_utf8_lossy(&check.stdout));
}

#[test]
fn single_runs_and_assumptions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "r.cfg", "grid.nx = 32\ntime.t_end = 0.05\nrun.epsilon = 0.2\n");
    let out = dir.path().join("o");
    for sub in ["run-compressible", "run-modelh", "verify-assumptions"] {
        let r = lowmach()
            .args([sub, cfg.to_str().unwrap(), "--output-dir", out.to_str().unwrap()])
            .output()
            .unwrap();
        assert_eq!(r.status.code(), Some(0), "{sub}: {}", String::from_utf8_lossy(&r.stdout));
    }
    assert!(out.join("diagnostics_eps_0.2.csv").exists());
    assert!(out.join("modelh.csv").exists());
}

#[test]
fn errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.cfg", "grid.nx = 2\n");
    let r = lowmach().args(["sweep", bad.to_str().unwrap()]).output().unwrap();
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("error"));

    let typo = write(dir.path(), "typo.cfg", "grid.nxx = 64\n");
    let r = lowmach().args(["run-compressible", typo.to_str().unwrap()]).output().unwrap();
    assert_eq!(r.status.code(), Some(1));

    let r = lowmach().args(["check", dir.path().join("missing.csv").to_str().unwrap()]).output().unwrap();
    assert_eq!(r.status.code(), Some(1));
}

#[test]
fn inadmissible_gamma_is_rejected_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "g.cfg", "physics.gamma = 1.4\n");
    let r = lowmach().args(["verify-assumptions", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("3/2"));
}

#[test]
fn low_gamma_warns_but_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "g.cfg", "physics.gamma = 2\n");
    let r = lowmach().args(["verify-assumptions", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(r.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&r.stderr).contains("warning"));
    assert_eq!(String::from_utf8_lossy(&r.stdout).lines().filter(|l| l.starts_with("PASS")).count(), 9);
}
