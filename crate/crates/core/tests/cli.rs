use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn cvroute(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cvroute"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

#[test]
fn net_validate_accepts_and_rejects() {
    let ok = cvroute(&["net", "validate", scenarios().join("junction.net").to_str().unwrap()]);
    assert!(ok.status.success(), "{}", text(&ok.stderr));
    assert!(text(&ok.stdout).contains("7 nodes, 7 edges"), "{}", text(&ok.stdout));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.net");
    fs::write(&bad, "NODE a 0 0\nNODE b 9 0\nEDGE x a b ten 1 1\n").unwrap();
    let out = cvroute(&["net", "validate", bad.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(text(&out.stderr).contains("line 3"), "{}", text(&out.stderr));
}

#[test]
fn run_writes_outputs_and_honors_seed() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = scenarios().join("exp6_midlink_enabled.toml");
    let out_dir = dir.path().join("a");
    let out = cvroute(&[
        "run",
        "--scenario",
        scenario.to_str().unwrap(),
        "--seed",
        "11",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(text(&out.stdout).contains("400/400 arrived"), "{}", text(&out.stdout));
    for f in ["config.toml", "vehicles.csv", "trace.csv", "detectors.csv", "messages.csv", "summary.json"] {
        assert!(out_dir.join(f).is_file(), "{f}");
    }
    let echoed = fs::read_to_string(out_dir.join("config.toml")).unwrap();
    assert!(echoed.contains("seed = 11"), "{echoed}");
}

#[test]
fn bad_inputs_exit_nonzero_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("s.toml");
    fs::write(&scenario, "[scenario]\nname = \"x\"\nnetwork = \"builtin:junction\"\nend_time_s = 10\nbogus = 1\n").unwrap();
    for args in [
        vec!["run", "--scenario", scenario.to_str().unwrap()],
        vec!["run", "--scenario", "/nonexistent/s.toml"],
        vec!["matrix", "--config", "/nonexistent/m.toml"],
    ] {
        let out = cvroute(&args);
        assert!(!out.status.success(), "{args:?}");
        assert!(text(&out.stderr).starts_with("error: "), "{}", text(&out.stderr));
    }
    assert!(!cvroute(&["frobnicate"]).status.success());
}

#[test]
fn matrix_prints_the_comparison_and_writes_each_run() {
    let dir = tempfile::tempdir().unwrap();
    // a two-run matrix over the bundled junction scenarios
    let m = dir.path().join("m.toml");
    let base = scenarios();
    fs::write(
        &m,
        format!(
            "name = \"pair\"\n\n[[run]]\nid = \"off\"\nscenario = \"{0}/exp2_junction_disabled.toml\"\ngroup = \"j\"\nrole = \"disabled\"\n\n\
             [[run]]\nid = \"on\"\nscenario = \"{0}/exp3_junction_enabled.toml\"\ngroup = \"j\"\nrole = \"enabled\"\n",
            base.display()
        ),
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = cvroute(&["matrix", "--config", m.to_str().unwrap(), "--jobs", "2", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    assert!(stdout.contains("delay ratio disabled/enabled"), "{stdout}");
    for f in ["off/vehicles.csv", "on/trace.csv", "comparison.json", "comparison.txt"] {
        assert!(out_dir.join(f).is_file(), "{f}");
    }
}
