//! IMEX time stepping of the parabolic-elliptic system.
//!
//! Each step treats the chemotactic flux and the reaction explicitly, the
//! diffusion implicitly, and then re-solves the elliptic equation for `v`
//! from the new `u`. The chemotactic flux is assembled on cell faces with an
//! arithmetic face average of `u`, so the explicit part telescopes and the
//! discrete mass changes only through `dt Σ f(u)`.

use std::io::{self, Write};

use thiserror::Error;

use crate::diagnostics::{lp_norm, Exponent, DEFAULT_EPS};
use crate::grid::{solve_helmholtz_from, solve_shifted, Field, GridError};
use crate::model::{pow, Kinetics, ModelParams};

pub const SAFETY: f64 = 0.4;
pub const DT_MIN: f64 = 1e-12;
/// `dt_max = DT_MAX_FACTOR h²`.
pub const DT_MAX_FACTOR: f64 = 10.0;
pub const BLOWUP_THRESHOLD: f64 = 1e6;
/// Negatives above `-CLAMP_FRACTION max(u)` are set to zero.
pub const CLAMP_FRACTION: f64 = 1e-12;
/// Negatives below `-OVERSHOOT_FRACTION max(u)` abort the step.
pub const OVERSHOOT_FRACTION: f64 = 1e-8;
pub const CONVERGENCE_TOL: f64 = 1e-6;

const TINY: f64 = 1e-30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvolveError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("negative overshoot at t = {t}: min u = {min} against max u = {max}")]
    NegativeOvershoot { t: f64, min: f64, max: f64 },
    #[error("time step stalled: dt = {dt:e} < {DT_MIN:e}")]
    StalledDt { dt: f64 },
    #[error("invalid initial data: {0}")]
    InvalidInitialData(String),
    #[error("invalid run options: {0}")]
    InvalidOptions(String),
}

/// Current solution and step size.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub u: Field,
    pub v: Field,
    pub dt: f64,
    pub steps: usize,
}

impl SimState {
    /// Validates `u0` and solves for the matching `v`.
    pub fn new(p: &ModelParams, k: &Kinetics, u0: Field) -> Result<Self, EvolveError> {
        u0.check_finite()?;
        if let Some(c) = u0.values().iter().position(|&x| x < 0.0) {
            return Err(EvolveError::InvalidInitialData(format!(
                "u0 = {} < 0 at cell {c}",
                u0.values()[c]
            )));
        }
        if u0.values().iter().all(|&x| x == 0.0) {
            return Err(EvolveError::InvalidInitialData("u0 is identically zero".into()));
        }
        let grid = *u0.grid();
        let (v, _) = solve_helmholtz_from(&grid, &u0.map(|x| k.g(x)), None)?;
        let mut s = Self {
            t: 0.0,
            u: u0,
            v,
            dt: 0.0,
            steps: 0,
        };
        s.dt = adapt_dt(&s, p, k)?;
        Ok(s)
    }
}

/// Bookkeeping for one step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepStats {
    /// `|Σu_new - Σu - dt Σf(u)| / Σu`, measured before any clamping.
    pub mass_residual: f64,
    pub clamped: usize,
    /// Negative entries kept (between the clamp and overshoot thresholds).
    pub monitored_negatives: usize,
    pub cg_iterations: usize,
}

/// Advances by `s.dt`.
pub fn step(s: &SimState, p: &ModelParams, k: &Kinetics) -> Result<(SimState, StepStats), EvolveError> {
    let grid = *s.u.grid();
    let dt = s.dt;
    let u = s.u.values();
    let v = s.v.values();

    let mut rhs: Vec<f64> = u.iter().map(|&uc| uc + dt * k.f(uc)).collect();
    for (c, d, h) in grid.faces() {
        let flux = p.chi * 0.5 * (u[c] + u[d]) * (v[d] - v[c]) / h;
        rhs[c] -= dt * flux / h;
        rhs[d] += dt * flux / h;
    }
    let (mut u_new, it_u) = solve_shifted(&grid, dt, &rhs, Some(u))?;

    let mass_old: f64 = u.iter().sum();
    let reaction: f64 = u.iter().map(|&uc| k.f(uc)).sum();
    let mass_new: f64 = u_new.iter().sum();
    let mass_residual = (mass_new - mass_old - dt * reaction).abs() / mass_old.abs().max(TINY);

    let max_u = u_new.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_u = u_new.iter().copied().fold(f64::INFINITY, f64::min);
    let t_new = s.t + dt;
    if min_u < -OVERSHOOT_FRACTION * max_u.abs() {
        return Err(EvolveError::NegativeOvershoot {
            t: t_new,
            min: min_u,
            max: max_u,
        });
    }
    let mut clamped = 0;
    let mut monitored = 0;
    for x in u_new.iter_mut().filter(|x| **x < 0.0) {
        if *x >= -CLAMP_FRACTION * max_u {
            *x = 0.0;
            clamped += 1;
        } else {
            monitored += 1;
        }
    }

    let u_new = Field::new(grid, u_new)?;
    let (v_new, it_v) = solve_helmholtz_from(&grid, &u_new.map(|x| k.g(x)), Some(&s.v))?;
    Ok((
        SimState {
            t: t_new,
            u: u_new,
            v: v_new,
            dt,
            steps: s.steps + 1,
        },
        StepStats {
            mass_residual,
            clamped,
            monitored_negatives: monitored,
            cg_iterations: it_u + it_v,
        },
    ))
}

/// `0.4 min(h / (χ max|∇v|), 1 / max|f'(u)|)`, capped at `10 h²`.
pub fn adapt_dt(s: &SimState, p: &ModelParams, k: &Kinetics) -> Result<f64, EvolveError> {
    let h = s.u.grid().min_spacing();
    let advective = h / (p.chi * s.v.max_face_gradient() + TINY);
    let (lo, hi) = (s.u.min(), s.u.max());
    let mut fp = s.u.values().iter().map(|&x| k.f_prime(x).abs()).fold(0.0, f64::max);
    for i in 0..=32 {
        let x = lo + (hi - lo) * i as f64 / 32.0;
        fp = fp.max(k.f_prime(x).abs());
    }
    let reactive = 1.0 / (fp + TINY);
    let dt = (SAFETY * advective.min(reactive)).min(DT_MAX_FACTOR * h * h);
    if !(dt >= DT_MIN) {
        return Err(EvolveError::StalledDt { dt });
    }
    Ok(dt)
}

/// True when `‖u‖∞` exceeds the blow-up threshold or the step size stalled.
pub fn detect_blowup(s: &SimState) -> bool {
    let linf = s.u.values().iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    !(linf <= BLOWUP_THRESHOLD) || s.dt < DT_MIN
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Converged,
    ReachedHorizon,
    BlowUp,
    StalledDt,
}

impl std::fmt::Display for RunStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            RunStatus::Converged => "Converged",
            RunStatus::ReachedHorizon => "ReachedHorizon",
            RunStatus::BlowUp => "BlowUp",
            RunStatus::StalledDt => "StalledDt",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub horizon: f64,
    /// Constant target for `u`; the run stops once `‖u - target‖∞` and
    /// `‖v - g(target)‖∞` both fall below [`CONVERGENCE_TOL`].
    pub target: Option<f64>,
    pub output_interval: f64,
    /// `ε` in the monitored exponent `p* = κn/2 + ε`.
    pub eps: f64,
    pub keep_snapshots: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            horizon: 10.0,
            target: None,
            output_interval: 0.1,
            eps: DEFAULT_EPS,
            keep_snapshots: false,
        }
    }
}

/// One time-series row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticRow {
    pub t: f64,
    pub mass: f64,
    pub linf_u: f64,
    pub lp_u: f64,
    pub linf_v: f64,
    pub linf_gradv: f64,
    pub dt: f64,
    pub min_u: f64,
    /// `‖u - target‖∞` when a target was given.
    pub target_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub u: Field,
    pub v: Field,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClampStats {
    pub clamped: usize,
    pub monitored_negatives: usize,
}

/// Norms recorded when the blow-up detector fired.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowupRecord {
    pub t: f64,
    pub linf_u: f64,
    pub lp_u: f64,
    /// Whether `‖u‖_{p*}` was at its running maximum when the detector fired.
    pub lp_at_running_max: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub status: RunStatus,
    pub final_time: f64,
    pub p_star: f64,
    pub rows: Vec<DiagnosticRow>,
    pub snapshots: Vec<Snapshot>,
    pub clamps: ClampStats,
    pub steps: usize,
    pub cg_iterations: usize,
    /// Largest per-step relative mass-law residual.
    pub max_mass_residual: f64,
    pub blowup: Option<BlowupRecord>,
    pub final_state: SimState,
}

impl RunReport {
    /// Maximum of `metric` over rows with `t` in `[t0, t1]`.
    pub fn max_over(&self, t0: f64, t1: f64, metric: impl Fn(&DiagnosticRow) -> f64) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.t >= t0 - 1e-9 && r.t <= t1 + 1e-9)
            .map(metric)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Writes the time series with header `t,mass,linf_u,lp_u,linf_v,linf_gradv,dt`
    /// and a `# status=...` footer.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,mass,linf_u,lp_u,linf_v,linf_gradv,dt")?;
        for r in &self.rows {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.t, r.mass, r.linf_u, r.lp_u, r.linf_v, r.linf_gradv, r.dt
            )?;
        }
        writeln!(
            out,
            "# status={} final_time={:.16e} steps={}",
            self.status, self.final_time, self.steps
        )
    }
}

fn diagnostic_row(s: &SimState, p_star: f64, target: Option<f64>) -> DiagnosticRow {
    DiagnosticRow {
        t: s.t,
        mass: s.u.integral(),
        linf_u: lp_norm(&s.u, Exponent::Infinity).unwrap_or(f64::NAN),
        lp_u: lp_norm(&s.u, Exponent::Finite(p_star)).unwrap_or(f64::NAN),
        linf_v: lp_norm(&s.v, Exponent::Infinity).unwrap_or(f64::NAN),
        linf_gradv: s.v.max_face_gradient(),
        dt: s.dt,
        min_u: s.u.min(),
        target_error: target.map(|c| s.u.values().iter().fold(0.0_f64, |m, x| m.max((x - c).abs()))),
    }
}

/// Monitored exponent `max(κn/2 + ε, 1)`.
pub fn monitored_exponent(p: &ModelParams, eps: f64) -> f64 {
    (p.kappa * p.dim as f64 / 2.0 + eps).max(1.0)
}

/// Integrates from `u0` until the horizon, convergence to the target, or blow-up.
pub fn run(
    p: &ModelParams,
    k: &Kinetics,
    u0: Field,
    opts: &RunOptions,
) -> Result<RunReport, EvolveError> {
    if !(opts.horizon > 0.0 && opts.output_interval > 0.0 && opts.eps > 0.0) {
        return Err(EvolveError::InvalidOptions(format!(
            "horizon {}, output interval {} and eps {} must be positive",
            opts.horizon, opts.output_interval, opts.eps
        )));
    }
    let p_star = monitored_exponent(p, opts.eps);
    let mut state = SimState::new(p, k, u0)?;
    let mut rows = vec![diagnostic_row(&state, p_star, opts.target)];
    let mut snapshots = Vec::new();
    if opts.keep_snapshots {
        snapshots.push(Snapshot {
            t: 0.0,
            u: state.u.clone(),
            v: state.v.clone(),
        });
    }
    let mut clamps = ClampStats::default();
    let mut cg_iterations = 0;
    let mut max_mass_residual: f64 = 0.0;
    let mut lp_running_max = rows[0].lp_u;
    let mut next_output = 1usize;
    let g_target = opts.target.map(|c| k.g(c));

    let status = loop {
        if state.t >= opts.horizon {
            break RunStatus::ReachedHorizon;
        }
        let dt = match adapt_dt(&state, p, k) {
            Ok(dt) => dt,
            Err(EvolveError::StalledDt { dt }) => {
                state.dt = dt;
                break RunStatus::StalledDt;
            }
            Err(e) => return Err(e),
        };
        let t_out = (next_output as f64 * opts.output_interval).min(opts.horizon);
        let t_next = (state.t + dt).min(t_out);
        state.dt = t_next - state.t;
        let (mut next, stats) = step(&state, p, k)?;
        next.t = t_next;
        next.dt = dt.min(next.dt);
        state = next;
        max_mass_residual = max_mass_residual.max(stats.mass_residual);
        clamps.clamped += stats.clamped;
        clamps.monitored_negatives += stats.monitored_negatives;
        cg_iterations += stats.cg_iterations;

        if detect_blowup(&state) {
            break RunStatus::BlowUp;
        }
        let converged = match (opts.target, g_target) {
            (Some(c), Some(gc)) => {
                state.u.values().iter().all(|x| (x - c).abs() < CONVERGENCE_TOL)
                    && state.v.values().iter().all(|x| (x - gc).abs() < CONVERGENCE_TOL)
            }
            _ => false,
        };
        let at_output = t_next >= t_out;
        if at_output || converged {
            let row = diagnostic_row(&state, p_star, opts.target);
            lp_running_max = lp_running_max.max(row.lp_u);
            rows.push(row);
            if opts.keep_snapshots {
                snapshots.push(Snapshot {
                    t: state.t,
                    u: state.u.clone(),
                    v: state.v.clone(),
                });
            }
            if at_output {
                next_output += 1;
            }
        }
        if converged {
            break RunStatus::Converged;
        }
    };

    let blowup = matches!(status, RunStatus::BlowUp | RunStatus::StalledDt).then(|| {
        let row = diagnostic_row(&state, p_star, opts.target);
        if rows.last().map(|r| r.t) != Some(state.t) {
            rows.push(row);
        }
        BlowupRecord {
            t: state.t,
            linf_u: row.linf_u,
            lp_u: row.lp_u,
            lp_at_running_max: row.lp_u >= lp_running_max,
        }
    });

    Ok(RunReport {
        status,
        final_time: state.t,
        p_star,
        rows,
        snapshots,
        clamps,
        steps: state.steps,
        cg_iterations,
        max_mass_residual,
        blowup,
        final_state: state,
    })
}

/// `c = max_{s >= 0} (a - b s^θ + s)`, attained at `s = (1/(bθ))^(1/(θ-1))`.
pub fn l1_growth_constant(p: &ModelParams) -> f64 {
    let s = (1.0 / (p.b * p.theta)).powf(1.0 / (p.theta - 1.0));
    p.a - p.b * pow(s, p.theta) + s
}

/// A-priori mass bound `max(∫u0, c|Ω|)` for kinetics below `a - b u^θ`.
pub fn l1_bound(p: &ModelParams, initial_mass: f64) -> f64 {
    initial_mass.max(l1_growth_constant(p) * p.measure())
}
