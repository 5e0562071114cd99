//! Stationary states: damped Newton on the discrete steady problem,
//! parameter continuation from a bifurcation point, and a validator that
//! checks a computed state against the a-priori bounds every steady state
//! must satisfy.
//!
//! The discrete residual is the same finite-volume operator the time stepper
//! uses, so a converged state is a fixed point of [`crate::evolve::step`] and
//! `Σ f(u) = 0` holds to the Newton tolerance.

use std::io::{self, Write};

use thiserror::Error;

use crate::banded::BandMatrix;
use crate::grid::{
    elliptic_identity_residual, elliptic_identity_residual_faces, neumann_eigenvalues,
    solve_helmholtz, Field, Grid, GridError,
};
use crate::model::{pow, verify_growth_envelope, zeros_of_f, Growth, Kinetics, ModelParams};
use crate::stability::{chi_hat, chi_hat_closed_form, EquilibriumInfo, StabilityError};

pub const NEWTON_TOL: f64 = 1e-9;
pub const MAX_ITERATIONS: usize = 50;
pub const MAX_HALVINGS: usize = 20;
/// Seed amplitude relative to `u₀`.
pub const SEED_FRACTION: f64 = 0.05;
/// States closer than this to `u₀` in `∞`-norm count as constant.
pub const CONSTANT_AMPLITUDE: f64 = 1e-6;
/// Relative tolerance for exact identities in the validator.
pub const IDENTITY_TOL: f64 = 1e-6;
/// Relative tolerance for discretization-limited bounds.
pub const BOUND_TOL: f64 = 0.02;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SteadyError {
    #[error("invalid guess: {0}")]
    InvalidGuess(String),
    #[error("Newton did not converge: residual {:e} after {} iterations", .best.residual, .best.iterations)]
    NoConvergence { best: Box<SteadyState> },
    #[error("singular Jacobian at iteration {iteration}")]
    SingularJacobian { iteration: usize },
    #[error("{0}")]
    OutOfRange(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Stability(#[from] StabilityError),
}

/// A solution of the discrete stationary problem.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub u: Field,
    pub v: Field,
    pub chi: f64,
    /// `max(‖R_u‖∞, ‖R_v‖∞)` at the returned iterate.
    pub residual: f64,
    pub iterations: usize,
    /// Residual norm before each Newton update, then the final one.
    pub history: Vec<f64>,
    pub seed_mode: Option<usize>,
    pub seed_delta: Option<f64>,
    pub continuation_step: Option<usize>,
}

impl SteadyState {
    /// `‖u - u₀‖∞`
    pub fn amplitude(&self, u0: f64) -> f64 {
        self.u.values().iter().fold(0.0, |m, x| m.max((x - u0).abs()))
    }
}

/// `R_u = Δ_h u - div_h(χ ū_face ∇_h v) + f(u)` and `R_v = Δ_h v - v + g(u)`.
pub fn stationary_residual(chi: f64, k: &Kinetics, u: &Field, v: &Field) -> (Vec<f64>, Vec<f64>) {
    let grid = u.grid();
    let (uu, vv) = (u.values(), v.values());
    let mut ru: Vec<f64> = uu.iter().map(|&x| k.f(x)).collect();
    let mut rv: Vec<f64> = uu.iter().zip(vv).map(|(&x, &y)| k.g(x) - y).collect();
    for (c, d, h) in grid.faces() {
        let flux = (uu[d] - uu[c]) / h - chi * 0.5 * (uu[c] + uu[d]) * (vv[d] - vv[c]) / h;
        ru[c] += flux / h;
        ru[d] -= flux / h;
        let dv = (vv[d] - vv[c]) / (h * h);
        rv[c] += dv;
        rv[d] -= dv;
    }
    (ru, rv)
}

fn residual_norm(r: &(Vec<f64>, Vec<f64>)) -> f64 {
    r.0.iter().chain(&r.1).fold(0.0, |m, x| m.max(x.abs()))
}

/// Largest index distance between face neighbours.
fn stride(grid: &Grid) -> usize {
    if grid.dim() == 1 {
        1
    } else {
        grid.cells_per_axis()[0]
    }
}

/// Jacobian of [`stationary_residual`] with unknowns interleaved as
/// `(u_0, v_0, u_1, v_1, ...)`.
fn jacobian(chi: f64, k: &Kinetics, u: &Field, v: &Field) -> BandMatrix {
    let grid = u.grid();
    let n = grid.cell_count();
    let band = 2 * stride(grid) + 1;
    let mut j = BandMatrix::new(2 * n, band, band);
    let (uu, vv) = (u.values(), v.values());
    for c in 0..n {
        j.add(2 * c, 2 * c, k.f_prime(uu[c]));
        j.add(2 * c + 1, 2 * c, k.g_prime(uu[c]));
        j.add(2 * c + 1, 2 * c + 1, -1.0);
    }
    for (c, d, h) in grid.faces() {
        let (iu_c, iv_c, iu_d, iv_d) = (2 * c, 2 * c + 1, 2 * d, 2 * d + 1);
        let half_dv = 0.5 * chi * (vv[d] - vv[c]) / h;
        let u_face = 0.5 * (uu[c] + uu[d]);
        // Partial derivatives of the face flux, divided by h.
        let partials = [
            (iu_c, (-1.0 / h - half_dv) / h),
            (iu_d, (1.0 / h - half_dv) / h),
            (iv_c, chi * u_face / (h * h)),
            (iv_d, -chi * u_face / (h * h)),
        ];
        for (col, val) in partials {
            j.add(iu_c, col, val);
            j.add(iu_d, col, -val);
        }
        let w = 1.0 / (h * h);
        j.add(iv_c, iv_d, w);
        j.add(iv_c, iv_c, -w);
        j.add(iv_d, iv_c, w);
        j.add(iv_d, iv_d, -w);
    }
    j
}

/// Damped Newton from `(guess_u, guess_v)` at `p.chi`.
pub fn solve_stationary(
    p: &ModelParams,
    k: &Kinetics,
    guess_u: &Field,
    guess_v: &Field,
) -> Result<SteadyState, SteadyError> {
    solve_stationary_deflated(p, k, guess_u, guess_v, &[])
}

/// A known root `(u*, v*)` to steer Newton away from.
#[derive(Debug, Clone, PartialEq)]
pub struct DeflatedRoot {
    pub u: Field,
    pub v: Field,
}

impl DeflatedRoot {
    /// The constant state `(u₀, g(u₀))`.
    pub fn constant(grid: &Grid, k: &Kinetics, u0: f64) -> Self {
        Self {
            u: grid.constant(u0),
            v: grid.constant(k.g(u0)),
        }
    }

    /// `q = ‖(u, v) - (u*, v*)‖²` in the discrete L² norm.
    fn distance2(&self, u: &Field, v: &Field) -> f64 {
        let vol = u.grid().cell_volume();
        let du: f64 = u.values().iter().zip(self.u.values()).map(|(a, b)| (a - b) * (a - b)).sum();
        let dv: f64 = v.values().iter().zip(self.v.values()).map(|(a, b)| (a - b) * (a - b)).sum();
        (du + dv) * vol
    }
}

/// Deflation factor `M = Π (1 + 1/q_i)`.
fn deflation_factor(roots: &[DeflatedRoot], u: &Field, v: &Field) -> f64 {
    roots.iter().map(|r| 1.0 + 1.0 / r.distance2(u, v)).product()
}

/// Newton on `M(x) R(x)` where `M` blows up at each deflated root. The
/// deflated step is the plain Newton step `d` scaled by
/// `1 / (1 - ∇M·d / M)`, so any limit is still a root of `R`.
pub fn solve_stationary_deflated(
    p: &ModelParams,
    k: &Kinetics,
    guess_u: &Field,
    guess_v: &Field,
    deflate: &[DeflatedRoot],
) -> Result<SteadyState, SteadyError> {
    let grid = *guess_u.grid();
    if guess_v.grid() != &grid {
        return Err(SteadyError::InvalidGuess("u and v live on different grids".into()));
    }
    if guess_u.check_finite().is_err() || guess_v.check_finite().is_err() {
        return Err(SteadyError::InvalidGuess("guess is not finite".into()));
    }
    if guess_u.min() < 0.0 {
        return Err(SteadyError::InvalidGuess(format!("guess has u = {} < 0", guess_u.min())));
    }
    let chi = p.chi;
    let n = grid.cell_count();
    let mut u = guess_u.clone();
    let mut v = guess_v.clone();
    let mut r = stationary_residual(chi, k, &u, &v);
    let mut norm = residual_norm(&r);
    let mut history = vec![norm];
    let mut iterations = 0;

    let state = |u: Field, v: Field, norm: f64, iterations: usize, history: Vec<f64>| SteadyState {
        u,
        v,
        chi,
        residual: norm,
        iterations,
        history,
        seed_mode: None,
        seed_delta: None,
        continuation_step: None,
    };

    while norm >= NEWTON_TOL {
        if iterations == MAX_ITERATIONS {
            return Err(SteadyError::NoConvergence {
                best: Box::new(state(u, v, norm, iterations, history)),
            });
        }
        let lu = jacobian(chi, k, &u, &v)
            .factor()
            .map_err(|_| SteadyError::SingularJacobian { iteration: iterations })?;
        let mut delta: Vec<f64> = (0..n).flat_map(|c| [-r.0[c], -r.1[c]]).collect();
        lu.solve(&mut delta);
        if !deflate.is_empty() {
            let vol = grid.cell_volume();
            // ∇M·d / M = Σ_i -2 vol (x - x*_i)·d / (q_i (1 + q_i))
            let mut ratio = 0.0;
            for root in deflate {
                let q = root.distance2(&u, &v);
                let dot: f64 = (0..n)
                    .map(|c| {
                        (u.values()[c] - root.u.values()[c]) * delta[2 * c]
                            + (v.values()[c] - root.v.values()[c]) * delta[2 * c + 1]
                    })
                    .sum();
                ratio += -2.0 * vol * dot / (q * (1.0 + q));
            }
            let tau = 1.0 / (1.0 - ratio);
            if tau.is_finite() {
                delta.iter_mut().for_each(|d| *d *= tau);
            }
        }
        let merit = |u: &Field, v: &Field, norm: f64| {
            if deflate.is_empty() {
                norm
            } else {
                deflation_factor(deflate, u, v) * norm
            }
        };
        let current = merit(&u, &v, norm);

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let mut tu = u.clone();
            let mut tv = v.clone();
            for c in 0..n {
                tu.values_mut()[c] += alpha * delta[2 * c];
                tv.values_mut()[c] += alpha * delta[2 * c + 1];
            }
            let tr = stationary_residual(chi, k, &tu, &tv);
            let tn = residual_norm(&tr);
            if merit(&tu, &tv, tn) < (1.0 - 1e-4 * alpha) * current {
                accepted = Some((tu, tv, tr, tn));
                break;
            }
            alpha *= 0.5;
        }
        iterations += 1;
        let Some((tu, tv, tr, tn)) = accepted else {
            return Err(SteadyError::NoConvergence {
                best: Box::new(state(u, v, norm, iterations, history)),
            });
        };
        u = tu;
        v = tv;
        r = tr;
        norm = tn;
        history.push(norm);
    }
    if u.min() < 0.0 {
        return Err(SteadyError::NoConvergence {
            best: Box::new(state(u, v, norm, iterations, history)),
        });
    }
    Ok(state(u, v, norm, iterations, history))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationOptions {
    /// Index of the distinct Neumann eigenvalue used for the seed (`>= 1`).
    pub mode: usize,
    pub chi_range: (f64, f64),
    pub steps: usize,
    /// `+1` or `-1`: orientation of the seed perturbation.
    pub seed_sign: f64,
}

/// Result of [`continuation`].
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub u0: f64,
    pub seed_mode: usize,
    pub seed_delta: f64,
    pub chi_hat: f64,
    /// Nonconstant states in order of increasing step.
    pub states: Vec<SteadyState>,
    /// `χ` values where Newton fell back to the constant state.
    pub constant_points: Vec<f64>,
    /// Reason the branch stopped early, if it did.
    pub terminated: Option<String>,
}

impl Branch {
    /// CSV with header `chi,amplitude,residual,seed_mode`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "chi,amplitude,residual,seed_mode")?;
        for s in &self.states {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{}",
                s.chi,
                s.amplitude(self.u0),
                s.residual,
                self.seed_mode
            )?;
        }
        Ok(())
    }
}

/// Follows the branch bifurcating from `e` at mode `opts.mode` over
/// `opts.steps` equally spaced `χ` values. The constant state is deflated so
/// the small seed is not pulled back onto it.
pub fn continuation(
    p: &ModelParams,
    k: &Kinetics,
    e: &EquilibriumInfo,
    grid: &Grid,
    opts: &ContinuationOptions,
) -> Result<Branch, SteadyError> {
    let (lo, hi) = opts.chi_range;
    if opts.steps == 0 {
        return Err(SteadyError::OutOfRange("steps must be >= 1".into()));
    }
    if opts.mode == 0 {
        return Err(SteadyError::OutOfRange("mode must be >= 1".into()));
    }
    if !(lo > 0.0 && hi >= lo) {
        return Err(SteadyError::OutOfRange(format!("bad chi range ({lo}, {hi})")));
    }
    let eig = neumann_eigenvalues(grid, opts.mode + 1)?;
    let pair = eig
        .get(opts.mode)
        .ok_or_else(|| SteadyError::OutOfRange(format!("mode {} not on grid", opts.mode)))?;
    let target = chi_hat(e, pair.sigma).unwrap_or_else(|_| chi_hat_closed_form(e, pair.sigma));
    if lo >= target && lo < 1.01 * target {
        return Err(SteadyError::OutOfRange(format!(
            "chi range must start at least 1% above chi_hat = {target} (got {lo})"
        )));
    }
    let delta = SEED_FRACTION * e.u0;
    let shape = pair.modes[0].eigenfunction(grid);
    let seed_u = shape.map(|s| e.u0 + opts.seed_sign.signum() * delta * s);
    let seed_v = solve_helmholtz(grid, &seed_u.map(|x| k.g(x)))?;

    let mut branch = Branch {
        u0: e.u0,
        seed_mode: opts.mode,
        seed_delta: delta,
        chi_hat: target,
        states: Vec::new(),
        constant_points: Vec::new(),
        terminated: None,
    };
    let constant = DeflatedRoot::constant(grid, k, e.u0);
    let mut previous: Option<(Field, Field)> = None;
    for i in 0..opts.steps {
        let chi = if opts.steps == 1 {
            lo
        } else {
            lo + (hi - lo) * i as f64 / (opts.steps - 1) as f64
        };
        let (gu, gv) = previous.clone().unwrap_or_else(|| (seed_u.clone(), seed_v.clone()));
        let pc = p.with_chi(chi);
        // Without a nearby nonconstant root the deflated iteration wanders;
        // plain Newton then settles the point on the constant state.
        let solved = solve_stationary_deflated(&pc, k, &gu, &gv, std::slice::from_ref(&constant))
            .or_else(|_| solve_stationary(&pc, k, &gu, &gv));
        match solved {
            Ok(mut s) => {
                s.seed_mode = Some(opts.mode);
                s.seed_delta = Some(delta);
                s.continuation_step = Some(i);
                if s.amplitude(e.u0) < CONSTANT_AMPLITUDE {
                    branch.constant_points.push(chi);
                    previous = None;
                } else {
                    previous = Some((s.u.clone(), s.v.clone()));
                    branch.states.push(s);
                }
            }
            Err(err) => {
                branch.terminated = Some(format!("chi = {chi}: {err}"));
                break;
            }
        }
    }
    Ok(branch)
}

/// One validator row. `pass` iff `observed <= bound (1 + tol)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub name: &'static str,
    pub observed: f64,
    pub bound: f64,
    pub tol: f64,
    /// False when the hypotheses of the bound do not hold for this model.
    pub applicable: bool,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub rows: Vec<CheckRow>,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| !r.applicable || r.pass)
    }

    pub fn row(&self, name: &str) -> Option<&CheckRow> {
        self.rows.iter().find(|r| r.name == name)
    }
}

fn check(name: &'static str, observed: f64, bound: f64, tol: f64, detail: String) -> CheckRow {
    CheckRow {
        name,
        observed,
        bound,
        tol,
        applicable: true,
        pass: observed <= bound * (1.0 + tol),
        detail,
    }
}

fn skipped(name: &'static str, detail: String) -> CheckRow {
    CheckRow {
        name,
        observed: f64::NAN,
        bound: f64::NAN,
        tol: 0.0,
        applicable: false,
        pass: false,
        detail,
    }
}

/// Checks `s` against the a-priori steady-state bounds. `p.a`, `p.b`,
/// `p.theta` are used as the growth envelope `f(u) <= a - b u^θ`; bounds that
/// depend on it are skipped when sampling shows the envelope fails.
pub fn validate_steady(s: &SteadyState, p: &ModelParams, k: &Kinetics) -> ValidationReport {
    let grid = s.u.grid();
    let vol = grid.cell_volume();
    let omega = grid.measure();
    let (u, v) = (s.u.values(), s.v.values());
    let (a, b, theta) = (p.a, p.b, p.theta);
    let (beta, kappa) = (k.secretion.beta, k.secretion.kappa);
    let mut rows = Vec::new();

    let envelope = verify_growth_envelope(k, a, b, theta, 1025);
    let envelope_ok = matches!(envelope, Ok(ref c) if c.holds);
    let envelope_note = match &envelope {
        Ok(c) => format!("envelope f <= {a} - {b} u^{theta}: worst violation {:e}", c.worst_violation),
        Err(e) => format!("envelope check failed: {e}"),
    };

    let int_u_theta: f64 = u.iter().map(|&x| pow(x, theta)).sum::<f64>() * vol;
    if envelope_ok {
        rows.push(check(
            "integral_u_theta",
            int_u_theta,
            a / b * omega,
            BOUND_TOL,
            format!("∫u^θ <= (a/b)|Ω|; {envelope_note}"),
        ));
    } else {
        rows.push(skipped("integral_u_theta", envelope_note.clone()));
    }

    match zeros_of_f(k, p.zero_search_bound()) {
        Ok(z) => rows.push(check(
            "min_u_le_K",
            s.u.min(),
            z.largest(),
            IDENTITY_TOL,
            format!("min u <= K = {}", z.largest()),
        )),
        Err(e) => rows.push(skipped("min_u_le_K", e.to_string())),
    }

    let int_v: f64 = v.iter().sum::<f64>() * vol;
    if envelope_ok {
        rows.push(check(
            "integral_v",
            int_v,
            beta * (a / b).powf(kappa / theta) * omega,
            BOUND_TOL,
            "∫v <= β (a/b)^(κ/θ) |Ω|".into(),
        ));
    } else {
        rows.push(skipped("integral_v", envelope_note.clone()));
    }

    let level = (a / b).powf(1.0 / theta);
    if envelope_ok {
        let ratio = u
            .iter()
            .zip(v)
            .map(|(&x, &y)| x / (level * (p.chi * y).exp()))
            .fold(0.0, f64::max);
        rows.push(check(
            "u_le_level_exp_chi_v",
            ratio,
            1.0,
            BOUND_TOL,
            "max u / ((a/b)^(1/θ) e^(χv)) <= 1".into(),
        ));
    } else {
        rows.push(skipped("u_le_level_exp_chi_v", envelope_note.clone()));
    }

    let positive_below_level = (1..1000).all(|i| k.f(level * i as f64 / 1000.0) > 0.0);
    if envelope_ok && positive_below_level {
        let spread = p.chi * (s.v.max() - s.v.min());
        let lower = level * (-spread).exp();
        let upper = level * spread.exp();
        let worst = u
            .iter()
            .map(|&x| (lower / x).max(x / upper))
            .fold(0.0, f64::max);
        rows.push(check(
            "two_sided_u_bound",
            worst,
            1.0,
            BOUND_TOL,
            format!("{lower} <= u <= {upper}"),
        ));
    } else {
        rows.push(skipped(
            "two_sided_u_bound",
            format!("needs the envelope and f > 0 on (0, {level})"),
        ));
    }

    match elliptic_identity_residual_faces(&s.u, &s.v, beta, kappa) {
        Ok(res) => rows.push(check(
            "elliptic_identity",
            res.abs(),
            IDENTITY_TOL * omega,
            0.0,
            "|Σ(δv/h)²/(v_c v_d) + βΣu^κ/v - |Ω|| on faces".into(),
        )),
        Err(e) => rows.push(skipped("elliptic_identity", e.to_string())),
    }
    let h = grid.min_spacing();
    match elliptic_identity_residual(&s.u, &s.v, beta, kappa) {
        Ok(res) => rows.push(check(
            "elliptic_identity_centered",
            res.abs(),
            10.0 * h * h * omega,
            0.0,
            "same identity with centered gradients, O(h²)".into(),
        )),
        Err(e) => rows.push(skipped("elliptic_identity_centered", e.to_string())),
    }

    match k.growth {
        Growth::Logistic { a: ca, b: cb, exponent } if cb > 0.0 => {
            let q = exponent + 1.0;
            let int_uq: f64 = u.iter().map(|&x| pow(x, q)).sum::<f64>() * vol;
            let int_u: f64 = u.iter().sum::<f64>() * vol;
            rows.push(check(
                "stationary_identity",
                (int_uq - ca / cb * int_u).abs(),
                IDENTITY_TOL * int_uq,
                0.0,
                format!("∫u^{q} = ({ca}/{cb}) ∫u"),
            ));
        }
        _ => rows.push(skipped(
            "stationary_identity",
            "only for f = c u - b u^θ".into(),
        )),
    }
    ValidationReport { rows }
}
