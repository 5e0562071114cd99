//! End-to-end acceptance criteria. Run with `cargo test --test acceptance -- --nocapture`
//! to see the per-criterion report.

use std::f64::consts::PI;
use std::time::Instant;

use chemolab::compare::{check_sandwich, solve_sandwich};
use chemolab::diagnostics::fit_exponential_decay;
use chemolab::evolve::{l1_bound, run, RunOptions, RunReport, RunStatus};
use chemolab::grid::{neumann_eigenvalues, solve_helmholtz, Field, Grid};
use chemolab::model::{Growth, Kinetics, ModelParams, Secretion};
use chemolab::stability::{
    bifurcation_table, chi_hat_closed_form, discrete_linearization, lambda_pm, mu_for_sigmas,
    singularity_scan, EquilibriumInfo,
};
use chemolab::steady::{solve_stationary_deflated, validate_steady, DeflatedRoot, NEWTON_TOL};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Runs shared between criteria; every report also feeds the mass-law check.
#[derive(Default)]
struct Ledger {
    reports: Vec<(&'static str, RunReport)>,
}

impl Ledger {
    fn keep(&mut self, name: &'static str, r: RunReport) -> &RunReport {
        self.reports.push((name, r));
        &self.reports.last().unwrap().1
    }

    fn get(&self, name: &str) -> Option<&RunReport> {
        self.reports.iter().find(|(n, _)| *n == name).map(|(_, r)| r)
    }
}

fn logistic_1d(chi: f64) -> (ModelParams, Kinetics) {
    let p = ModelParams::new(chi, 1.0, 1.0, 2.0, 1.0, 1.0, vec![PI]).unwrap();
    let k = Kinetics::logistic(&p);
    (p, k)
}

fn convergence_run(nx: usize) -> Result<RunReport, String> {
    let (p, k) = logistic_1d(0.4);
    let g = Grid::new(&[PI], &[nx]).unwrap();
    let u0 = g.sample(|x| 1.0 + 0.5 * x[0].cos());
    let opts = RunOptions {
        horizon: 100.0,
        target: Some(1.0),
        output_interval: 0.1,
        keep_snapshots: true,
        ..RunOptions::default()
    };
    run(&p, &k, u0, &opts).map_err(|e| e.to_string())
}

fn criterion_1(ledger: &mut Ledger) -> Outcome {
    let start = Instant::now();
    let r = convergence_run(256)?;
    let secs = start.elapsed().as_secs_f64();
    let r = ledger.keep("convergence_256", r);
    let last = r.final_state.clone();
    let err_u = last.u.values().iter().fold(0.0_f64, |m, x| m.max((x - 1.0).abs()));
    let err_v = last.v.values().iter().fold(0.0_f64, |m, x| m.max((x - 1.0).abs()));
    let series: Vec<(f64, f64)> = r.rows.iter().map(|row| (row.t, row.target_error.unwrap())).collect();
    let fit = fit_exponential_decay(&series, 0.5).map_err(|e| e.to_string())?;
    check(
        r.status == RunStatus::Converged && err_u < 1e-6 && err_v < 1e-6 && r.final_time < 100.0 && fit.rate < 0.0 && secs < 60.0,
        format!(
            "status {} at t = {:.2}, |u-1| = {err_u:.2e}, |v-1| = {err_v:.2e}, fitted rate {:.4}, {secs:.1} s",
            r.status, r.final_time, fit.rate
        ),
    )
}

fn sandwich_violation(r: &RunReport) -> Result<(f64, f64), String> {
    let (p, _) = logistic_1d(0.4);
    let u0 = &r.snapshots[0].u;
    let horizon = r.snapshots.last().unwrap().t;
    let traj = solve_sandwich(&p, u0.min(), u0.max(), horizon, 0.1).map_err(|e| e.to_string())?;
    let c = check_sandwich(&traj, r, &p).map_err(|e| e.to_string())?;
    Ok((c.max_violation, c.tol))
}

fn criterion_2(ledger: &mut Ledger) -> Outcome {
    let fine = ledger.get("convergence_256").ok_or("criterion 1 run missing")?;
    let (v256, tol) = sandwich_violation(fine)?;
    let coarse = convergence_run(128)?;
    let (v128, _) = sandwich_violation(ledger.keep("convergence_128", coarse))?;
    // Written as a product: the discrete flow can keep both violations at 0.
    check(
        v256 <= tol && 3.5 * v256 <= v128,
        format!("violation nx=256 {v256:.3e} (tol {tol:.3e}), nx=128 {v128:.3e}"),
    )
}

fn criterion_3() -> Outcome {
    let (p, _) = logistic_1d(0.4);
    let traj = solve_sandwich(&p, 0.5, 1.5, 50.0, 0.1).map_err(|e| e.to_string())?;
    let eps0 = traj.epsilon0.ok_or("no decay rate for b < 2 chi")?.value;
    let rate = traj.fitted_rate(0.5).map_err(|e| e.to_string())?;
    check(
        (eps0 - 1.0 / 15.0).abs() < 1e-15 && rate <= -eps0 * (1.0 - 1e-3),
        format!("eps0 = {eps0:.15}, fitted rate {rate:.6}"),
    )
}

fn criterion_4() -> Outcome {
    let (p, k) = logistic_1d(1.0);
    let e = EquilibriumInfo::new(&k, 1.0).map_err(|e| e.to_string())?;
    let rows = bifurcation_table(&e, &p.lengths, 3).map_err(|e| e.to_string())?.rows;
    let want = [4.0, 6.25, 100.0 / 9.0];
    let table_err = rows.iter().zip(want).map(|(r, w)| (r.chi_hat - w).abs()).fold(0.0_f64, f64::max);
    let g = Grid::new(&[PI], &[256]).unwrap();
    let roots = singularity_scan(&e, &g, (3.5, 12.0), 200).map_err(|e| e.to_string())?;
    let sig: Vec<f64> = neumann_eigenvalues(&g, 4).map_err(|e| e.to_string())?[1..]
        .iter()
        .map(|p| p.modes[0].sigma_h)
        .collect();
    let mut scan_rel: f64 = 0.0;
    let mut discrete_rel: f64 = 0.0;
    for ((r, s), w) in roots.iter().zip(&sig).zip(want) {
        scan_rel = scan_rel.max((r.chi - w).abs() / w);
        let d = chi_hat_closed_form(&e, *s);
        discrete_rel = discrete_rel.max((r.chi - d).abs() / d);
    }
    let mut vieta: f64 = 0.0;
    let floor = e.chi_floor.unwrap_or(0.0);
    for i in 0..100 {
        let chi = floor + 0.2 * i as f64;
        let (m, pl) = lambda_pm(&e, chi).map_err(|e| e.to_string())?;
        let c = e.gu() * chi;
        let tr = c + e.f_prime + 1.0;
        vieta = vieta.max((m + pl - tr).abs() / tr.abs().max(1.0)).max((m * pl - c).abs() / c.max(1.0));
    }
    check(
        rows.len() == 3 && table_err < 1e-12 && roots.len() == 3 && discrete_rel < 2e-3 && vieta < 1e-12,
        format!(
            "table err {table_err:.1e}, {} scan roots, rel err vs discrete {discrete_rel:.1e}, vs continuum {scan_rel:.1e}, Vieta {vieta:.1e}",
            roots.len()
        ),
    )
}

fn criterion_5() -> Outcome {
    let p = ModelParams::new(4.2, 0.5, 0.5, 2.0, 1.0, 1.0, vec![PI]).unwrap();
    let k = Kinetics::new(
        Growth::Logistic { a: 1.0, b: 1.0, exponent: 1.0 },
        Secretion { beta: 1.0, kappa: 1.0 },
    )
    .unwrap();
    let g = Grid::new(&[PI], &[256]).unwrap();
    let u = g.sample(|x| 1.0 + 0.05 * x[0].cos());
    let v = solve_helmholtz(&g, &u).map_err(|e| e.to_string())?;
    let root = DeflatedRoot::constant(&g, &k, 1.0);
    let s = solve_stationary_deflated(&p, &k, &u, &v, &[root]).map_err(|e| e.to_string())?;
    let report = validate_steady(&s, &p, &k);
    let failed: Vec<&str> = report.rows.iter().filter(|r| !(r.applicable && r.pass)).map(|r| r.name).collect();
    let amp = s.amplitude(1.0);
    check(
        amp > 0.05 && s.residual < NEWTON_TOL && failed.is_empty(),
        format!(
            "amplitude {amp:.4}, residual {:.1e}, {} iterations, {} validator rows, failed {failed:?}",
            s.residual,
            s.iterations,
            report.rows.len()
        ),
    )
}

fn plateau(r: &RunReport, horizon: f64) -> (f64, f64) {
    let mid = r.max_over(horizon / 4.0, horizon / 2.0, |row| row.linf_u);
    let late = r.max_over(horizon / 2.0, horizon, |row| row.linf_u);
    (mid, late)
}

fn criterion_6(ledger: &mut Ledger) -> Outcome {
    let (a, b) = (1.0, 0.5);
    let p = ModelParams::new(1.0, a, b, 3.0, 2.0, 1.0, vec![PI, PI]).unwrap();
    let k = Kinetics::new(Growth::PowerEnvelope { a, b, theta: 3.0 }, Secretion { beta: 1.0, kappa: 2.0 }).unwrap();
    let g = Grid::new(&[PI, PI], &[64, 64]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let level = (a / b).powf(0.5);
    let u0 = Field::new(g, (0..g.cell_count()).map(|_| level * (1.0 + 0.3 * rng.random::<f64>())).collect()).unwrap();
    let opts = RunOptions {
        horizon: 50.0,
        output_interval: 0.1,
        ..RunOptions::default()
    };
    let start = Instant::now();
    let r = run(&p, &k, u0, &opts).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let r = ledger.keep("borderline_2d", r);
    let (mid, late) = plateau(r, 50.0);
    let growth = late / mid - 1.0;
    check(
        r.status == RunStatus::ReachedHorizon && r.blowup.is_none() && growth < 0.01 && secs < 600.0,
        format!("status {}, max|u| [12.5,25] {mid:.6}, [25,50] {late:.6}, excess {growth:.2e}, {secs:.1} s", r.status),
    )
}

fn criterion_7(ledger: &mut Ledger) -> Outcome {
    let (a, b) = (1.0, 1.0);
    let p = ModelParams::new(1.0, a, b, 3.0, 1.0, 1.0, vec![PI]).unwrap();
    let k = Kinetics::new(Growth::PowerEnvelope { a, b, theta: 3.0 }, Secretion { beta: 1.0, kappa: 1.0 }).unwrap();
    let g = Grid::new(&[PI], &[256]).unwrap();
    let u0 = g.sample(|x| 1.0 + 0.5 * x[0].cos());
    let mass0 = u0.integral();
    let opts = RunOptions {
        horizon: 50.0,
        output_interval: 0.1,
        ..RunOptions::default()
    };
    let r = run(&p, &k, u0, &opts).map_err(|e| e.to_string())?;
    let r = ledger.keep("subcritical_1d", r);
    let (mid, late) = plateau(r, 50.0);
    let growth = late / mid - 1.0;
    let bound = l1_bound(&p, mass0);
    let worst = r.rows.iter().map(|row| row.mass / bound).fold(0.0_f64, f64::max);
    check(
        r.status == RunStatus::ReachedHorizon && growth < 0.01 && worst <= 1.01,
        format!("status {}, plateau excess {growth:.2e}, max mass / L1 bound {worst:.4}", r.status),
    )
}

fn criterion_8(ledger: &Ledger) -> Outcome {
    let error = |nx: usize| {
        let g = Grid::new(&[PI], &[nx]).unwrap();
        let src = g.sample(|x| 2.0 * x[0].cos());
        let v = solve_helmholtz(&g, &src).unwrap();
        let exact = g.sample(|x| x[0].cos());
        let compat = (v.values().iter().sum::<f64>() - src.values().iter().sum::<f64>()).abs()
            / src.values().iter().map(|x| x.abs()).sum::<f64>();
        (v.max_abs_diff(&exact), compat)
    };
    let (e128, c128) = error(128);
    let (e256, c256) = error(256);
    let ratio = e128 / e256;
    // Every stored (u, v) pair solved (-Δ_h + I) v = β u^κ.
    let mut compat = c128.max(c256);
    for (_, r) in &ledger.reports {
        let kappa = if r.final_state.u.grid().dim() == 2 { 2.0 } else { 1.0 };
        let states = r.snapshots.iter().map(|s| (&s.u, &s.v)).chain([(&r.final_state.u, &r.final_state.v)]);
        for (u, v) in states {
            let src: f64 = u.values().iter().map(|x| x.powf(kappa)).sum();
            let sv: f64 = v.values().iter().sum();
            compat = compat.max((sv - src).abs() / src.abs());
        }
    }
    check(
        (3.6..=4.4).contains(&ratio) && compat <= 1e-12,
        format!("errors {e128:.3e} -> {e256:.3e}, ratio {ratio:.3}, worst compatibility {compat:.1e}"),
    )
}

fn criterion_9() -> Outcome {
    let (_, k) = logistic_1d(5.0);
    let e = EquilibriumInfo::new(&k, 1.0).map_err(|e| e.to_string())?;
    let g = Grid::new(&[PI], &[64]).unwrap();
    let eigs = discrete_linearization(&e, &g, 5.0).map_err(|e| e.to_string())?.complex_eigenvalues();
    let sig: Vec<f64> = neumann_eigenvalues(&g, 5).map_err(|e| e.to_string())?.iter().map(|p| p.modes[0].sigma_h).collect();
    let mut worst: f64 = 0.0;
    for m in mu_for_sigmas(&e, 5.0, &sig).map_err(|e| e.to_string())? {
        for mu in [m.mu_minus, m.mu_plus] {
            let d = eigs.iter().map(|z| ((z.re - mu).powi(2) + z.im.powi(2)).sqrt()).fold(f64::INFINITY, f64::min);
            worst = worst.max(d);
        }
    }
    check(worst < 1e-8, format!("{} modes, worst distance {worst:.1e}", sig.len()))
}

fn criterion_10(ledger: &Ledger) -> Outcome {
    let worst = ledger.reports.iter().map(|(_, r)| r.max_mass_residual).fold(0.0_f64, f64::max);
    let steps: usize = ledger.reports.iter().map(|(_, r)| r.steps).sum();
    check(
        !ledger.reports.is_empty() && worst <= 1e-12,
        format!("{} runs, {steps} steps, worst relative residual {worst:.1e}", ledger.reports.len()),
    )
}

#[test]
fn acceptance_criteria() {
    let mut ledger = Ledger::default();
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut record = |n: usize, name: &'static str, o: Outcome| {
        let (tag, detail) = match &o {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        println!("[{tag}] {n:>2} {name}: {detail}");
        results.push((n, name, o));
    };
    record(1, "global convergence", criterion_1(&mut ledger));
    record(2, "sandwich comparison", criterion_2(&mut ledger));
    record(3, "explicit decay rate", criterion_3());
    record(4, "bifurcation thresholds", criterion_4());
    record(5, "pattern near onset", criterion_5());
    record(6, "borderline boundedness", criterion_6(&mut ledger));
    record(7, "subcritical boundedness", criterion_7(&mut ledger));
    record(8, "elliptic solver order", criterion_8(&ledger));
    record(9, "spectrum cross-check", criterion_9());
    record(10, "mass law", criterion_10(&ledger));
    let failed: Vec<_> = results.iter().filter(|r| r.2.is_err()).map(|r| r.0).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
