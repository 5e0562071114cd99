//! Spatially homogeneous comparison ODEs: the sandwich pair `(ū, u̲)`, its
//! explicit decay rate `ε₀`, and the envelope ODEs for general kinetics.

use std::io::{self, Write};

use thiserror::Error;

use crate::diagnostics::{self, DiagnosticsError};
use crate::evolve::RunReport;
use crate::model::{Kinetics, ModelParams};
use crate::ode::{self, OdeError, Tolerance};

pub const RTOL: f64 = 1e-10;
pub const RETRY_RTOL: f64 = 1e-12;
/// Absolute slack for the ordering invariants.
pub const ORDER_TOL: f64 = 1e-9;
/// Slack for the monotone log ratio between consecutive outputs.
pub const MONOTONE_SLACK: f64 = 1e-12;
pub const Z_LIMIT: f64 = 1e6;
pub const STATIONARY_TOL: f64 = 1e-10;
/// Sandwich-check tolerance is `SANDWICH_FACTOR * h²`.
pub const SANDWICH_FACTOR: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompareError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("invariant breach at t = {t}: {what}")]
    InvariantBreach { t: f64, what: String },
    #[error("parameter mismatch: {0}")]
    Mismatch(String),
    #[error("no trajectory output at snapshot time {0}")]
    TimeMismatch(f64),
    #[error("z exceeded {limit} at t = {t}")]
    ZUnbounded { t: f64, limit: f64 },
    #[error("z not stationary at the horizon: |z'| = {derivative}")]
    NotStationary { derivative: f64 },
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
}

/// Decay rate of `ln(ū^κ/u̲)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Epsilon0 {
    pub value: f64,
    /// `b = 2χ`: the bound gives no decay.
    pub degenerate: bool,
}

/// `ε₀ = κ (u̲(0)/ū(0)^κ) (a/b) (b - 2χ)`.
pub fn epsilon0(p: &ModelParams, ulow0: f64, ubar0: f64) -> Result<Epsilon0, CompareError> {
    let (chi, a, b, kappa) = (p.chi, p.a, p.b, p.kappa);
    if b < 2.0 * chi {
        return Err(CompareError::Precondition(format!("b = {b} < 2 chi = {}", 2.0 * chi)));
    }
    if !(ulow0 > 0.0) {
        return Err(CompareError::Precondition(format!("lower datum {ulow0} must be > 0")));
    }
    let eq = (a / b).powf(1.0 / kappa);
    let slack = 1e-12 * eq.max(1.0);
    if ubar0 < eq - slack {
        return Err(CompareError::Precondition(format!(
            "upper datum {ubar0} below equilibrium {eq}"
        )));
    }
    if ulow0.powf(1.0 / kappa) > eq + slack {
        return Err(CompareError::Precondition(format!(
            "lower datum {ulow0} above equilibrium level {}",
            eq.powf(kappa)
        )));
    }
    let degenerate = b == 2.0 * chi;
    let value = if degenerate {
        0.0
    } else {
        kappa * (ulow0 / ubar0.powf(kappa)) * (a / b) * (b - 2.0 * chi)
    };
    Ok(Epsilon0 { value, degenerate })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SandwichTrajectory {
    pub chi: f64,
    pub a: f64,
    pub b: f64,
    pub kappa: f64,
    pub u0_min: f64,
    pub u0_max: f64,
    pub times: Vec<f64>,
    pub ubar: Vec<f64>,
    /// `w = u̲^{1/κ}`.
    pub w: Vec<f64>,
    /// `None` when `b < 2χ`.
    pub epsilon0: Option<Epsilon0>,
    pub rtol: f64,
}

impl SandwichTrajectory {
    pub fn ulow(&self, i: usize) -> f64 {
        self.w[i].powf(self.kappa)
    }

    /// `ln(ū^κ / u̲)`.
    pub fn log_ratio(&self, i: usize) -> f64 {
        self.kappa * (self.ubar[i].ln() - self.w[i].ln())
    }

    pub fn index_at(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * t.abs().max(1.0);
        let i = self.times.partition_point(|&s| s < t - tol);
        (i < self.times.len() && (self.times[i] - t).abs() <= tol).then_some(i)
    }

    /// Least-squares decay rate of the log ratio over the trailing
    /// `window_fraction` of the horizon.
    pub fn fitted_rate(&self, window_fraction: f64) -> Result<f64, CompareError> {
        let series: Vec<(f64, f64)> =
            (0..self.times.len()).map(|i| (self.times[i], self.log_ratio(i))).collect();
        Ok(diagnostics::fit_exponential_decay(&series, window_fraction)?.rate)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,ubar,ulow,log_ratio")?;
        for i in 0..self.times.len() {
            writeln!(
                out,
                "{:.10e},{:.16e},{:.16e},{:.16e}",
                self.times[i],
                self.ubar[i],
                self.ulow(i),
                self.log_ratio(i)
            )?;
        }
        Ok(())
    }
}

/// Integrates the sandwich pair from `ū(0) = max(max u₀, (a/b)^{1/κ})` and
/// `w(0) = min(min u₀, (a/b)^{1/κ})`, with outputs every `interval`.
pub fn solve_sandwich(
    p: &ModelParams,
    u0_min: f64,
    u0_max: f64,
    horizon: f64,
    interval: f64,
) -> Result<SandwichTrajectory, CompareError> {
    let (chi, a, b) = (p.chi, p.a, p.b);
    if !(b > chi) {
        return Err(CompareError::Precondition(format!("need b > chi, got b = {b}, chi = {chi}")));
    }
    if !(a > 0.0) {
        return Err(CompareError::Precondition(format!("need a > 0, got {a}")));
    }
    if !(u0_min > 0.0 && u0_max >= u0_min && u0_max.is_finite()) {
        return Err(CompareError::Precondition(format!(
            "need 0 < min u0 <= max u0, got {u0_min}, {u0_max}"
        )));
    }
    if !(horizon > 0.0 && interval > 0.0 && interval <= horizon) {
        return Err(CompareError::Precondition(format!(
            "bad horizon {horizon} / interval {interval}"
        )));
    }
    match sandwich_with(p, u0_min, u0_max, horizon, interval, RTOL) {
        Err(CompareError::InvariantBreach { .. }) => {
            sandwich_with(p, u0_min, u0_max, horizon, interval, RETRY_RTOL)
        }
        other => other,
    }
}

fn sandwich_with(
    p: &ModelParams,
    u0_min: f64,
    u0_max: f64,
    horizon: f64,
    interval: f64,
    rtol: f64,
) -> Result<SandwichTrajectory, CompareError> {
    let (chi, a, b, kappa) = (p.chi, p.a, p.b, p.kappa);
    let eq = (a / b).powf(1.0 / kappa);
    let f = |u: f64| u * (a - b * u.powf(kappa));
    let rhs = |_: f64, y: &[f64; 2]| {
        let (ub, w) = (y[0], y[1]);
        let (ubk, ul) = (ub.powf(kappa), w.powf(kappa));
        [chi * ub * (ubk - ul) + f(ub), chi * w * (ul - ubk) + f(w)]
    };
    let y0 = [u0_max.max(eq), u0_min.min(eq)];
    let tol = Tolerance { rtol, atol: rtol * 1e-2 };
    let run = ode::integrate(rhs, 0.0, y0, horizon, interval, tol, |_| true)?;
    let eps0 = if b >= 2.0 * chi {
        Some(epsilon0(p, y0[1].powf(kappa), y0[0])?)
    } else {
        None
    };
    let traj = SandwichTrajectory {
        chi,
        a,
        b,
        kappa,
        u0_min,
        u0_max,
        times: run.outputs.iter().map(|o| o.0).collect(),
        ubar: run.outputs.iter().map(|o| o.1[0]).collect(),
        w: run.outputs.iter().map(|o| o.1[1]).collect(),
        epsilon0: eps0,
        rtol,
    };
    check_invariants(&traj, eq)?;
    Ok(traj)
}

fn check_invariants(traj: &SandwichTrajectory, eq: f64) -> Result<(), CompareError> {
    let breach = |t: f64, what: String| Err(CompareError::InvariantBreach { t, what });
    for i in 0..traj.times.len() {
        let (t, ub, w) = (traj.times[i], traj.ubar[i], traj.w[i]);
        if !(w > 0.0) {
            return breach(t, format!("lower solution {w} not positive"));
        }
        if w > eq + ORDER_TOL || ub < eq - ORDER_TOL {
            return breach(t, format!("ordering w = {w} <= {eq} <= ubar = {ub} violated"));
        }
        if traj.b > 2.0 * traj.chi && i > 0 {
            let (prev, cur) = (traj.log_ratio(i - 1), traj.log_ratio(i));
            if cur > prev + MONOTONE_SLACK {
                return breach(t, format!("log ratio increased from {prev} to {cur}"));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SandwichCheck {
    pub max_violation: f64,
    pub worst_time: f64,
    pub tol: f64,
    pub snapshots: usize,
    pub pass: bool,
}

/// Largest violation of `u̲(t) ≤ u^κ(x, t) ≤ ū(t)^κ` over the run's snapshots.
pub fn check_sandwich(
    traj: &SandwichTrajectory,
    run: &RunReport,
    p: &ModelParams,
) -> Result<SandwichCheck, CompareError> {
    for (name, x, y) in [
        ("chi", traj.chi, p.chi),
        ("a", traj.a, p.a),
        ("b", traj.b, p.b),
        ("kappa", traj.kappa, p.kappa),
    ] {
        if x != y {
            return Err(CompareError::Mismatch(format!("{name}: trajectory {x}, run {y}")));
        }
    }
    if !(p.b > 2.0 * p.chi) {
        return Err(CompareError::Precondition(format!("need b > 2 chi, got b = {}", p.b)));
    }
    let Some(first) = run.snapshots.first() else {
        return Err(CompareError::Precondition("run kept no snapshots".into()));
    };
    if first.t != 0.0 {
        return Err(CompareError::Precondition("first snapshot is not the initial datum".into()));
    }
    let (lo, hi) = (first.u.min(), first.u.max());
    let rel = |x: f64, y: f64| (x - y).abs() <= 1e-12 * y.abs().max(1.0);
    if !rel(lo, traj.u0_min) || !rel(hi, traj.u0_max) {
        return Err(CompareError::Mismatch(format!(
            "initial extremes: run [{lo}, {hi}], trajectory [{}, {}]",
            traj.u0_min, traj.u0_max
        )));
    }
    let h = first.u.grid().min_spacing();
    let mut worst = (0.0_f64, 0.0_f64);
    for s in &run.snapshots {
        let i = traj.index_at(s.t).ok_or(CompareError::TimeMismatch(s.t))?;
        let (ulow, uhigh) = (traj.ulow(i), traj.ubar[i].powf(p.kappa));
        for &u in s.u.values() {
            let uk = u.powf(p.kappa);
            let viol = (ulow - uk).max(uk - uhigh).max(0.0);
            if viol > worst.0 {
                worst = (viol, s.t);
            }
        }
    }
    let tol = SANDWICH_FACTOR * h * h;
    Ok(SandwichCheck {
        max_violation: worst.0,
        worst_time: worst.1,
        tol,
        snapshots: run.snapshots.len(),
        pass: worst.0 <= tol,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeTrajectories {
    pub z: Vec<(f64, f64)>,
    pub z_inf: f64,
    pub y: Vec<(f64, f64)>,
    /// Infimum of `y` over the second half of the horizon.
    pub y_inf: f64,
}

/// Upper envelope `z' = f(z) + χ z^{κ+1}` from `max u₀`, then lower envelope
/// `y' = f(y) + χ y^{κ+1} - χ z_∞^κ y` from `min u₀`.
pub fn envelope_odes(
    p: &ModelParams,
    k: &Kinetics,
    u0_min: f64,
    u0_max: f64,
    horizon: f64,
) -> Result<EnvelopeTrajectories, CompareError> {
    if !(u0_min > 0.0 && u0_max >= u0_min && u0_max.is_finite()) {
        return Err(CompareError::Precondition(format!(
            "need 0 < min u0 <= max u0, got {u0_min}, {u0_max}"
        )));
    }
    if !(horizon > 0.0) {
        return Err(CompareError::Precondition(format!("bad horizon {horizon}")));
    }
    let chi = p.chi;
    let kappa = k.secretion.kappa;
    let interval = horizon / 1000.0;
    let tol = Tolerance { rtol: RTOL, atol: 1e-14 };
    let zrhs = |z: f64| k.f(z) + chi * z.powf(kappa + 1.0);
    let run = ode::integrate(|_, y: &[f64; 1]| [zrhs(y[0])], 0.0, [u0_max], horizon, interval, tol, |y| {
        y[0] <= Z_LIMIT
    })?;
    let &(t_end, z_end) = run.outputs.last().expect("integration keeps the initial point");
    if run.stopped {
        return Err(CompareError::ZUnbounded { t: t_end, limit: Z_LIMIT });
    }
    let z_inf = z_end[0];
    let derivative = zrhs(z_inf).abs();
    if !(derivative < STATIONARY_TOL) {
        return Err(CompareError::NotStationary { derivative });
    }
    let zk = z_inf.powf(kappa);
    let yrhs = |_: f64, y: &[f64; 1]| [k.f(y[0]) + chi * y[0].powf(kappa + 1.0) - chi * zk * y[0]];
    let yrun = ode::integrate(yrhs, 0.0, [u0_min], horizon, interval, tol, |_| true)?;
    let y: Vec<(f64, f64)> = yrun.outputs.iter().map(|&(t, y)| (t, y[0])).collect();
    let y_inf = y
        .iter()
        .filter(|&&(t, _)| t >= horizon / 2.0)
        .fold(f64::INFINITY, |m, &(_, v)| m.min(v));
    Ok(EnvelopeTrajectories {
        z: run.outputs.iter().map(|&(t, z)| (t, z[0])).collect(),
        z_inf,
        y,
        y_inf,
    })
}
