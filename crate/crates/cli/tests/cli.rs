use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn exe() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chemolab"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    exe().args(args).output().expect("binary runs")
}

fn run_with(cmd: &str, cfg: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

fn write_cfg(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const LOGISTIC: &str = "model.dim = 1\nmodel.lx = pi\nmodel.a = 1\nmodel.b = 1\nmodel.theta = 2\nmodel.kappa = 1\nmodel.beta = 1\n";

#[test]
fn classify_three_dimensional_example() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_with("classify", &configs().join("classify_3d.cfg"), tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(0));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.lines().any(|l| l == "StrictBorderlineInequality"), "{stdout}");
    let manifest = fs::read_to_string(tmp.path().join("manifest.txt")).unwrap();
    assert!(manifest.contains("artifact: classify.csv"));
    assert!(manifest.contains("input.model.b: 0.4"));
    assert!(manifest.lines().all(|l| l.contains(": ")));
}

#[test]
fn simulate_converges_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("convergent.cfg");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let o = run_with("simulate", &cfg, &a, &[]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8(o.stdout).unwrap().starts_with("Converged"));
    assert_eq!(run_with("simulate", &cfg, &b, &[]).status.code(), Some(0));
    for f in ["timeseries.csv", "final.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let strip = |p: &Path| {
        fs::read_to_string(p.join("manifest.txt"))
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with("created_unix"))
            .map(|l| l.replace(a.to_str().unwrap(), "").replace(b.to_str().unwrap(), ""))
            .collect::<Vec<_>>()
    };
    assert_eq!(strip(&a), strip(&b));
    let ts = fs::read_to_string(a.join("timeseries.csv")).unwrap();
    assert!(ts.starts_with("t,mass,linf_u,lp_u,linf_v,linf_gradv,dt\n"));
    assert!(ts.lines().last().unwrap().starts_with("# status=Converged"));
}

#[test]
fn noise_depends_only_on_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        tmp.path(),
        "n.cfg",
        &format!("{LOGISTIC}model.chi = 0.4\ngrid.nx = 32\nsim.horizon = 0.5\nsim.u0 = noise\nsim.snapshot_times = 0\n"),
    );
    let snap = |dir: &str, seed: &str| {
        let out = tmp.path().join(dir);
        assert_eq!(run_with("simulate", &cfg, &out, &["--seed", seed]).status.code(), Some(0));
        fs::read(out.join("snapshot_000.csv")).unwrap()
    };
    assert_eq!(snap("a", "5"), snap("b", "5"));
    assert_ne!(snap("a", "5"), snap("c", "6"));
}

#[test]
fn blowup_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    // u' = u + u² explodes in finite time; constant data keeps it uniform.
    let kinetics = format!("{LOGISTIC}model.chi = 0.1\nkinetics.f_kind = polynomial\nkinetics.coeffs = 0, 1, 1\ngrid.nx = 16\nsim.horizon = 5\n");
    let cfg = write_cfg(tmp.path(), "b.cfg", &format!("{kinetics}sim.u0 = constant\nsim.u0_level = 1\n"));
    let o = run_with("simulate", &cfg, &tmp.path().join("o"), &[]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stdout));
    let ts = fs::read_to_string(tmp.path().join("o/timeseries.csv")).unwrap();
    assert!(ts.contains("# status=BlowUp"));
    // A structured blow-up on 16 cells outruns the resolution: a solver failure.
    let cfg = write_cfg(tmp.path(), "r.cfg", &format!("{kinetics}sim.u0_level = 1\n"));
    let o = run_with("simulate", &cfg, &tmp.path().join("r"), &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8(o.stderr).unwrap().contains("negative overshoot"));
}

#[test]
fn usage_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run(&["simulate", "--bogus"]).status.code(), Some(1));
    assert_eq!(run(&["simulate"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    let missing = tmp.path().join("nope.cfg");
    assert_eq!(run_with("simulate", &missing, tmp.path(), &[]).status.code(), Some(1));
    let typo = write_cfg(tmp.path(), "t.cfg", &format!("{LOGISTIC}model.chi = 0.4\nmodel.chii = 1\n"));
    let o = run_with("classify", &typo, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stderr).unwrap().contains("model.chii"));
    let bad = write_cfg(tmp.path(), "c.cfg", &format!("{LOGISTIC}model.chi = 1.5\ncompare.u0_min = 0.5\ncompare.u0_max = 1.5\n"));
    assert_eq!(run_with("compare-ode", &bad, tmp.path(), &[]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn steady_onset_state_validates() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_with("steady", &configs().join("onset.cfg"), tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(0));
    let v = fs::read_to_string(tmp.path().join("validation.csv")).unwrap();
    assert!(v.starts_with("name,observed,bound,tol,applicable,pass,detail\n"));
    assert!(!v.contains(",true,false,"), "{v}");
    let state = fs::read_to_string(tmp.path().join("state.csv")).unwrap();
    assert_eq!(state.lines().count(), 257);
}

#[test]
fn stability_scan_matches_table() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_with("stability", &configs().join("onset.cfg"), tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(0));
    let table = fs::read_to_string(tmp.path().join("table.csv")).unwrap();
    assert!(table.starts_with("k,sigma,multiplicity,chi_hat,proven\n"));
    let scan = fs::read_to_string(tmp.path().join("scan.csv")).unwrap();
    let roots: Vec<f64> = scan.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(roots.len(), 3);
    for (r, want) in roots.iter().zip([4.0, 6.25, 100.0 / 9.0]) {
        assert!((r - want).abs() / want < 2e-3, "{r} vs {want}");
    }
}

#[test]
fn compare_ode_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        tmp.path(),
        "c.cfg",
        &format!("{LOGISTIC}model.chi = 0.4\ncompare.u0_min = 0.5\ncompare.u0_max = 1.5\ncompare.envelope = true\n"),
    );
    let o = run_with("compare-ode", &cfg, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(0));
    let t = fs::read_to_string(tmp.path().join("trajectory.csv")).unwrap();
    assert!(t.starts_with("t,ubar,ulow,log_ratio\n"));
    assert_eq!(t.lines().count(), 502);
    assert!(tmp.path().join("envelope.csv").exists());
}

#[test]
fn stability_sweep_reproduces_crossings() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_with("sweep", &configs().join("chi_sweep.cfg"), tmp.path(), &["--threads", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let summary = fs::read_to_string(tmp.path().join("summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(
        lines.next().unwrap(),
        "index,model.chi,exit_code,pattern_status,modes_above_one,max_mu_plus,error"
    );
    for (i, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[0], i.to_string());
        let chi: f64 = cells[1].parse().unwrap();
        let expected = if chi < 4.0 {
            // Complex eigenvalues: no real spectrum to count.
            "-"
        } else if chi <= 4.0 {
            "0"
        } else if chi <= 6.25 {
            "1"
        } else {
            "2"
        };
        assert_eq!(cells[4], expected, "chi = {chi}");
    }
    let manifest = fs::read_to_string(tmp.path().join("manifest.txt")).unwrap();
    assert!(manifest.contains("artifact: point_0014/spectrum.csv"));
}

#[test]
fn sweep_edge_cases() {
    let tmp = tempfile::tempdir().unwrap();
    let base = format!("{LOGISTIC}model.chi = 1\nsweep.command = compare-ode\ncompare.u0_min = 0.5\ncompare.u0_max = 1.5\ncompare.horizon = 5\n");
    let empty = write_cfg(tmp.path(), "e.cfg", &format!("{base}sweep.param = model.chi\nsweep.range = 0.1, 0.4\nsweep.count = 0\n"));
    assert_eq!(run_with("sweep", &empty, &tmp.path().join("e"), &[]).status.code(), Some(1));
    // b <= chi fails for the upper half of the grid only.
    let partial = write_cfg(tmp.path(), "p.cfg", &format!("{base}sweep.param = model.chi\nsweep.range = 0.2, 1.4\nsweep.count = 4\n"));
    let out = tmp.path().join("p");
    assert_eq!(run_with("sweep", &partial, &out, &[]).status.code(), Some(0));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let codes: Vec<&str> = summary.lines().skip(1).map(|l| l.split(',').nth(2).unwrap()).collect();
    assert_eq!(codes, ["0", "0", "1", "1"]);
    let all_bad = write_cfg(tmp.path(), "a.cfg", &format!("{base}sweep.param = model.chi\nsweep.range = 1.2, 1.4\nsweep.count = 2\n"));
    assert_eq!(run_with("sweep", &all_bad, &tmp.path().join("a"), &[]).status.code(), Some(1));
}
