//! CLI surface tests: every subcommand runs against real files and the
//! deterministic-artifact properties hold (byte-identical rows on rerun,
//! plots a pure function of rows).

use std::path::Path;
use std::process::Command;

fn forage() -> Command {
    Command::new(env!("CARGO_BIN_EXE_forage"))
}

fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().expect("spawn forage");
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn generate_simulate_predict_compare_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("ss.toml");
    run_ok(forage().args([
        "generate",
        "--kind",
        "SS",
        "--arena",
        "16x8",
        "--robots",
        "6",
        "--blocks",
        "30",
        "--seed",
        "1",
        "--out",
        scenario.to_str().unwrap(),
    ]));
    assert!(scenario.exists());

    let sim_out = dir.path().join("sim");
    let stdout = run_ok(forage().args([
        "simulate",
        "--scenario",
        scenario.to_str().unwrap(),
        "--horizon",
        "1500",
        "--replicates",
        "2",
        "--seed",
        "9",
        "--out",
        sim_out.to_str().unwrap(),
    ]));
    assert!(stdout.contains("replay seed: 9"));
    assert!(sim_out.join("rep_000.csv").exists());
    assert!(sim_out.join("rep_001.csv").exists());
    let manifest = std::fs::read_to_string(sim_out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("seed = 9"));
    assert!(manifest.contains("scenario_hash"));
    let rep = std::fs::read_to_string(sim_out.join("rep_000.csv")).unwrap();
    assert!(rep.starts_with("t,n_s,n_h,n_av_s,n_av_h,collected_cum"));

    // Uncalibrated predict still produces the parameter block.
    let pred_out = dir.path().join("pred");
    let stdout = run_ok(forage().args([
        "predict",
        "--scenario",
        scenario.to_str().unwrap(),
        "--horizon",
        "1500",
        "--out",
        pred_out.to_str().unwrap(),
    ]));
    assert!(stdout.contains("tau_h ="));
    assert!(stdout.contains("predicted performance"));
    let trajectory = std::fs::read_to_string(pred_out.join("trajectory.csv")).unwrap();
    assert!(trajectory.starts_with("t,n_s,n_h,n_av_s,n_av_h,b_total"));

    let cmp_out = dir.path().join("cmp");
    let stdout = run_ok(forage().args([
        "compare",
        "--scenario",
        scenario.to_str().unwrap(),
        "--horizon",
        "1500",
        "--replicates",
        "2",
        "--seed",
        "9",
        "--out",
        cmp_out.to_str().unwrap(),
    ]));
    assert!(stdout.starts_with("kind,N,rho,"));
    assert!(cmp_out.join("rows.csv").exists());
}

fn write_tiny_plan(path: &Path, seed: u64) {
    std::fs::write(
        path,
        format!(
            r#"
regime = "const-rho-small"
kinds = ["SS"]
swarm_sizes = [3, 5]
densities = [0.02]
horizon = 1200.0
replicates = 2
seed = {seed}
total_blocks = 60
calibration_sizes = [3, 5]
"#
        ),
    )
    .unwrap();
}

#[test]
fn sweep_is_deterministic_and_report_is_pure() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.toml");
    write_tiny_plan(&plan, 7);

    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        run_ok(forage().args([
            "sweep",
            "--plan",
            plan.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]));
    }
    let rows_a = std::fs::read(out_a.join("rows.csv")).unwrap();
    let rows_b = std::fs::read(out_b.join("rows.csv")).unwrap();
    assert_eq!(rows_a, rows_b, "rows.csv differs between identical sweeps");
    assert!(out_a.join("report.txt").exists());
    assert!(out_a.join("fits.toml").exists());
    for stem in ["n_h", "n_av", "p"] {
        assert!(out_a.join(format!("plot_const-rho-small_{stem}.svg")).exists());
    }

    // Plots regenerate identically from the same CSV.
    let rep1 = dir.path().join("rep1");
    let rep2 = dir.path().join("rep2");
    for rep in [&rep1, &rep2] {
        run_ok(forage().args([
            "report",
            "--rows",
            out_a.join("rows.csv").to_str().unwrap(),
            "--regime",
            "const-rho-small",
            "--out",
            rep.to_str().unwrap(),
        ]));
    }
    for stem in ["n_h", "n_av", "p"] {
        let name = format!("plot_const-rho-small_{stem}.svg");
        let a = std::fs::read(rep1.join(&name)).unwrap();
        let b = std::fs::read(rep2.join(&name)).unwrap();
        assert_eq!(a, b, "{name} not reproducible");
        // And identical to the sweep's own plot.
        let orig = std::fs::read(out_a.join(&name)).unwrap();
        assert_eq!(a, orig, "{name} differs from sweep output");
    }

    // Reusing fits skips calibration and still yields identical rows.
    let out_c = dir.path().join("c");
    run_ok(forage().args([
        "sweep",
        "--plan",
        plan.to_str().unwrap(),
        "--fit-from",
        out_a.to_str().unwrap(),
        "--out",
        out_c.to_str().unwrap(),
    ]));
    let rows_c = std::fs::read(out_c.join("rows.csv")).unwrap();
    assert_eq!(rows_a, rows_c, "rows differ when reusing fits");
}

#[test]
fn sweep_rejects_empty_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.toml");
    std::fs::write(
        &plan,
        r#"
regime = "const-rho-small"
kinds = []
swarm_sizes = [3]
densities = [0.02]
seed = 1
"#,
    )
    .unwrap();
    let out = forage()
        .args([
            "sweep",
            "--plan",
            plan.to_str().unwrap(),
            "--out",
            dir.path().join("x").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("no scenario kinds"), "stderr: {stderr}");
}
