//! Subcommand plans: every config key is read and checked before any compute.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chemolab::compare::{envelope_odes, solve_sandwich, CompareError};
use chemolab::config::{Config, ConfigError};
use chemolab::evolve::{run, EvolveError, RunOptions, RunStatus};
use chemolab::grid::{make_grid, neumann_eigenvalues, solve_helmholtz, write_field_csv, Field, Grid, GridError};
use chemolab::model::{classify_regime, zeros_of_f, Kinetics, ModelError, ModelParams};
use chemolab::stability::{bifurcation_table, singularity_scan, EquilibriumInfo, PatternStatus, StabilityError};
use chemolab::steady::{
    continuation, solve_stationary, solve_stationary_deflated, validate_steady, ContinuationOptions,
    DeflatedRoot, SteadyError, SEED_FRACTION,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_BLOWUP: i32 = 2;
pub const EXIT_NO_CONVERGENCE: i32 = 3;

/// An error with its exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }

    fn solver(message: impl ToString) -> Self {
        Self { code: EXIT_NO_CONVERGENCE, message: message.to_string() }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Self::usage(e.to_string())
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        Self::usage(e.to_string())
    }
}

impl From<GridError> for Failure {
    fn from(e: GridError) -> Self {
        match e {
            GridError::NoConvergence { .. } => Self::solver(e),
            _ => Self::usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::usage(format!("i/o: {e}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Simulate,
    Steady,
    Stability,
    CompareOde,
    Classify,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Simulate => "simulate",
            CommandKind::Steady => "steady",
            CommandKind::Stability => "stability",
            CommandKind::CompareOde => "compare-ode",
            CommandKind::Classify => "classify",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        [Self::Simulate, Self::Steady, Self::Stability, Self::CompareOde, Self::Classify]
            .into_iter()
            .find(|k| k.name() == name)
    }

    /// Summary scalars reported per sweep point.
    pub fn summary_columns(self) -> &'static [&'static str] {
        match self {
            CommandKind::Simulate => &["status", "final_time", "max_linf_u", "final_linf_u"],
            CommandKind::Steady => &["amplitude", "residual", "iterations", "validated"],
            CommandKind::Stability => &["pattern_status", "modes_above_one", "max_mu_plus"],
            CommandKind::CompareOde => &["epsilon0", "fitted_rate", "final_log_ratio"],
            CommandKind::Classify => &["regimes"],
        }
    }
}

/// Key prefixes owned by each command; a shared config may carry all of them.
const SECTIONS: [(&str, CommandKind); 4] = [
    ("sim.", CommandKind::Simulate),
    ("steady.", CommandKind::Steady),
    ("stability.", CommandKind::Stability),
    ("compare.", CommandKind::CompareOde),
];

/// What a finished command produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    /// Human-readable lines for stdout.
    pub lines: Vec<String>,
    /// Values for [`CommandKind::summary_columns`], in order.
    pub summary: Vec<String>,
    pub artifacts: Vec<String>,
}

#[derive(Debug, Clone)]
enum InitialData {
    Cosine { level: f64, amp: f64 },
    Noise { level: f64, amp: f64 },
    Constant { level: f64 },
}

#[derive(Debug, Clone)]
struct SimulatePlan {
    grid: Grid,
    u0: InitialData,
    opts: RunOptions,
    snapshot_times: Vec<f64>,
}

#[derive(Debug, Clone)]
struct SteadyPlan {
    grid: Grid,
    u0: f64,
    mode: usize,
    sign: f64,
    deflate: bool,
    continuation: Option<(f64, usize)>,
}

#[derive(Debug, Clone)]
struct StabilityPlan {
    u0: f64,
    rows: usize,
    modes: usize,
    scan: Option<(Grid, (f64, f64), usize)>,
}

#[derive(Debug, Clone)]
struct ComparePlan {
    u0_min: f64,
    u0_max: f64,
    horizon: f64,
    interval: f64,
    envelope: bool,
}

#[derive(Debug, Clone)]
enum Task {
    Simulate(SimulatePlan),
    Steady(SteadyPlan),
    Stability(StabilityPlan),
    Compare(ComparePlan),
    Classify,
}

/// A validated command ready to execute.
#[derive(Debug, Clone)]
pub struct Plan {
    params: ModelParams,
    kinetics: Kinetics,
    seed: u64,
    task: Task,
}

fn bool_or(cfg: &Config, key: &str, default: bool) -> Result<bool, ConfigError> {
    match cfg.raw(key) {
        None => Ok(default),
        Some("true") => Ok(true),
        Some("false") => Ok(false),
        Some(v) => Err(ConfigError::BadValue {
            key: key.into(),
            value: v.into(),
            expected: "true or false",
        }),
    }
}

fn grid_from(cfg: &Config, p: &ModelParams, default_nx: usize) -> Result<Grid, Failure> {
    let nx = cfg.usize_or("grid.nx", default_nx)?;
    let cells = if p.dim == 2 { vec![nx, cfg.usize_or("grid.ny", nx)?] } else { vec![nx] };
    if p.dim == 3 {
        return Err(Failure::usage("dim = 3 is supported by classify only"));
    }
    Ok(make_grid(p, &cells)?)
}

/// Largest zero of `f`, or 1 when `f` has no positive zero.
fn default_level(p: &ModelParams, k: &Kinetics) -> f64 {
    zeros_of_f(k, p.zero_search_bound())
        .map(|z| z.largest())
        .ok()
        .filter(|&z| z > 0.0)
        .unwrap_or(1.0)
}

fn positive(key: &str, x: f64) -> Result<f64, Failure> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(Failure::usage(format!("{key} must be a positive number, got {x}")))
    }
}

impl Plan {
    pub fn build(kind: CommandKind, cfg: &Config, seed: u64) -> Result<Self, Failure> {
        let params = ModelParams::from_config(cfg)?;
        let kinetics = Kinetics::from_config(cfg, &params)?;
        let task = match kind {
            CommandKind::Simulate => {
                let grid = grid_from(cfg, &params, 128)?;
                let horizon = positive("sim.horizon", cfg.f64_or("sim.horizon", 10.0)?)?;
                let interval = positive("sim.output_interval", cfg.f64_or("sim.output_interval", horizon / 500.0)?)?;
                let level = cfg.f64_or("sim.u0_level", default_level(&params, &kinetics))?;
                let u0 = match cfg.raw("sim.u0").unwrap_or("cosine") {
                    "cosine" => InitialData::Cosine { level, amp: cfg.f64_or("sim.u0_amp", 0.5)? },
                    "noise" => InitialData::Noise { level, amp: cfg.f64_or("sim.u0_amp", 0.3)? },
                    "constant" => InitialData::Constant { level },
                    other => return Err(Failure::usage(format!("sim.u0: unknown initial data `{other}`"))),
                };
                let target = match cfg.raw("sim.target") {
                    None | Some("none") => None,
                    Some("equilibrium") => Some(default_level(&params, &kinetics)),
                    Some(_) => Some(cfg.require_f64("sim.target")?),
                };
                let snapshot_times = cfg.f64_list("sim.snapshot_times")?.unwrap_or_default();
                let opts = RunOptions {
                    horizon,
                    target,
                    output_interval: interval,
                    eps: positive("sim.eps", cfg.f64_or("sim.eps", chemolab::diagnostics::DEFAULT_EPS)?)?,
                    keep_snapshots: !snapshot_times.is_empty(),
                };
                Task::Simulate(SimulatePlan { grid, u0, opts, snapshot_times })
            }
            CommandKind::Steady => {
                let grid = grid_from(cfg, &params, 128)?;
                let continuation = match cfg.f64("steady.chi_max")? {
                    Some(hi) => Some((hi, cfg.usize_or("steady.steps", 10)?)),
                    None => None,
                };
                let sign = cfg.f64_or("steady.seed_sign", 1.0)?;
                if sign == 0.0 {
                    return Err(Failure::usage("steady.seed_sign must be nonzero"));
                }
                Task::Steady(SteadyPlan {
                    grid,
                    u0: cfg.f64_or("steady.u0", default_level(&params, &kinetics))?,
                    mode: cfg.usize_or("steady.mode", 1)?,
                    sign,
                    deflate: bool_or(cfg, "steady.deflate", true)?,
                    continuation,
                })
            }
            CommandKind::Stability => {
                let range = cfg.f64_list("stability.scan")?;
                // The grid only matters for the scan, but a shared config may set it.
                let grid = if range.is_some() || cfg.contains("grid.nx") {
                    Some(grid_from(cfg, &params, 256)?)
                } else {
                    None
                };
                let scan = match (range, grid) {
                    (Some(r), Some(grid)) if r.len() == 2 && r[0] < r[1] => {
                        Some((grid, (r[0], r[1]), cfg.usize_or("stability.scan_points", 200)?))
                    }
                    (Some(_), _) => return Err(Failure::usage("stability.scan must be `lo, hi` with lo < hi")),
                    (None, _) => None,
                };
                Task::Stability(StabilityPlan {
                    u0: cfg.f64_or("stability.u0", default_level(&params, &kinetics))?,
                    rows: cfg.usize_or("stability.rows", 6)?,
                    modes: cfg.usize_or("stability.modes", 8)?,
                    scan,
                })
            }
            CommandKind::CompareOde => {
                let horizon = positive("compare.horizon", cfg.f64_or("compare.horizon", 50.0)?)?;
                Task::Compare(ComparePlan {
                    u0_min: cfg.require_f64("compare.u0_min")?,
                    u0_max: cfg.require_f64("compare.u0_max")?,
                    horizon,
                    interval: positive("compare.interval", cfg.f64_or("compare.interval", horizon / 500.0)?)?,
                    envelope: bool_or(cfg, "compare.envelope", false)?,
                })
            }
            CommandKind::Classify => Task::Classify,
        };
        let foreign: Vec<String> = cfg
            .iter()
            .map(|(k, _)| k)
            .filter(|k| SECTIONS.iter().any(|(prefix, owner)| k.starts_with(prefix) && *owner != kind))
            .map(String::from)
            .collect();
        for key in foreign {
            cfg.raw(&key);
        }
        cfg.ensure_all_used()?;
        Ok(Self { params, kinetics, seed, task })
    }

    /// Runs the plan, writing artifacts into `out`.
    pub fn execute(&self, out: &Path) -> Result<Outcome, Failure> {
        std::fs::create_dir_all(out)?;
        match &self.task {
            Task::Simulate(s) => self.simulate(s, out),
            Task::Steady(s) => self.steady(s, out),
            Task::Stability(s) => self.stability(s, out),
            Task::Compare(c) => self.compare(c, out),
            Task::Classify => self.classify(out),
        }
    }

    fn initial_field(&self, s: &SimulatePlan) -> Field {
        let g = &s.grid;
        match s.u0 {
            InitialData::Cosine { level, amp } => g.sample(|x| {
                let shape = if g.dim() == 2 { x[0].cos() * x[1].cos() } else { x[0].cos() };
                level * (1.0 + amp * shape)
            }),
            InitialData::Noise { level, amp } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let values = (0..g.cell_count()).map(|_| level * (1.0 + amp * rng.random::<f64>())).collect();
                Field::new(*g, values).expect("length matches the grid")
            }
            InitialData::Constant { level } => g.constant(level),
        }
    }

    fn simulate(&self, s: &SimulatePlan, out: &Path) -> Result<Outcome, Failure> {
        let u0 = self.initial_field(s);
        let report = run(&self.params, &self.kinetics, u0, &s.opts).map_err(|e| match e {
            EvolveError::InvalidInitialData(_) | EvolveError::InvalidOptions(_) => Failure::usage(e.to_string()),
            EvolveError::Grid(g) => g.into(),
            _ => Failure::solver(e),
        })?;
        let mut artifacts = vec!["timeseries.csv".to_string()];
        report.write_csv(BufWriter::new(File::create(out.join("timeseries.csv"))?))?;
        let fs = &report.final_state;
        write_field_csv(BufWriter::new(File::create(out.join("final.csv"))?), &fs.u, &fs.v)?;
        artifacts.push("final.csv".into());
        for (i, &t) in s.snapshot_times.iter().enumerate() {
            let Some(snap) = report
                .snapshots
                .iter()
                .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
            else {
                continue;
            };
            let name = format!("snapshot_{i:03}.csv");
            write_field_csv(BufWriter::new(File::create(out.join(&name))?), &snap.u, &snap.v)?;
            artifacts.push(name);
        }
        let max_linf = report.rows.iter().map(|r| r.linf_u).fold(0.0_f64, f64::max);
        let final_linf = report.rows.last().map_or(f64::NAN, |r| r.linf_u);
        let code = match report.status {
            RunStatus::Converged | RunStatus::ReachedHorizon => EXIT_OK,
            RunStatus::BlowUp | RunStatus::StalledDt => EXIT_BLOWUP,
        };
        let mut lines = vec![format!(
            "{} at t = {:.6} after {} steps; max |u| = {max_linf:.6e}",
            report.status, report.final_time, report.steps
        )];
        if let Some(b) = report.blowup {
            lines.push(format!("blow-up at t = {:.6}: |u|inf = {:.3e}, |u|p* = {:.3e}", b.t, b.linf_u, b.lp_u));
        }
        Ok(Outcome {
            code,
            lines,
            summary: vec![
                report.status.to_string(),
                format!("{:.10e}", report.final_time),
                format!("{max_linf:.10e}"),
                format!("{final_linf:.10e}"),
            ],
            artifacts,
        })
    }

    fn steady(&self, s: &SteadyPlan, out: &Path) -> Result<Outcome, Failure> {
        let stab = |e: StabilityError| match e {
            StabilityError::InvalidEquilibrium(_) => Failure::usage(e.to_string()),
            _ => Failure::solver(e),
        };
        let steady_err = |e: SteadyError| match e {
            SteadyError::InvalidGuess(_) | SteadyError::OutOfRange(_) => Failure::usage(e.to_string()),
            SteadyError::Grid(g) => g.into(),
            SteadyError::Stability(e) => stab(e),
            _ => Failure::solver(e),
        };
        let eq = EquilibriumInfo::new(&self.kinetics, s.u0).map_err(stab)?;
        if let Some((hi, steps)) = s.continuation {
            let opts = ContinuationOptions {
                mode: s.mode,
                chi_range: (self.params.chi, hi),
                steps,
                seed_sign: s.sign,
            };
            let branch = continuation(&self.params, &self.kinetics, &eq, &s.grid, &opts).map_err(steady_err)?;
            branch.write_csv(BufWriter::new(File::create(out.join("branch.csv"))?))?;
            let last = branch.states.last();
            let amp = last.map_or(0.0, |st| st.amplitude(s.u0));
            let mut lines = vec![format!(
                "branch from chi_hat = {:.10}: {} nonconstant states, {} constant points",
                branch.chi_hat,
                branch.states.len(),
                branch.constant_points.len()
            )];
            if let Some(why) = &branch.terminated {
                lines.push(format!("terminated: {why}"));
            }
            return Ok(Outcome {
                code: if branch.states.is_empty() { EXIT_NO_CONVERGENCE } else { EXIT_OK },
                lines,
                summary: vec![
                    format!("{amp:.10e}"),
                    format!("{:.3e}", last.map_or(f64::NAN, |st| st.residual)),
                    last.map_or(0, |st| st.iterations).to_string(),
                    "-".into(),
                ],
                artifacts: vec!["branch.csv".into()],
            });
        }
        let eig = neumann_eigenvalues(&s.grid, s.mode + 1)?;
        let pair = eig
            .get(s.mode)
            .ok_or_else(|| Failure::usage(format!("steady.mode {} not resolved on the grid", s.mode)))?;
        let shape = pair.modes[0].eigenfunction(&s.grid);
        let delta = SEED_FRACTION * s.u0 * s.sign.signum();
        let gu = shape.map(|x| s.u0 + delta * x);
        let gv = solve_helmholtz(&s.grid, &gu.map(|x| self.kinetics.g(x)))?;
        let state = if s.deflate {
            let root = DeflatedRoot::constant(&s.grid, &self.kinetics, s.u0);
            solve_stationary_deflated(&self.params, &self.kinetics, &gu, &gv, &[root])
        } else {
            solve_stationary(&self.params, &self.kinetics, &gu, &gv)
        }
        .map_err(steady_err)?;
        write_field_csv(BufWriter::new(File::create(out.join("state.csv"))?), &state.u, &state.v)?;
        let report = validate_steady(&state, &self.params, &self.kinetics);
        let mut w = BufWriter::new(File::create(out.join("validation.csv"))?);
        writeln!(w, "name,observed,bound,tol,applicable,pass,detail")?;
        for r in &report.rows {
            writeln!(
                w,
                "{},{:.10e},{:.10e},{:.1e},{},{},{}",
                r.name,
                r.observed,
                r.bound,
                r.tol,
                r.applicable,
                r.pass,
                r.detail.replace(',', ";")
            )?;
        }
        w.flush()?;
        let amp = state.amplitude(s.u0);
        let mut lines = vec![format!(
            "steady state at chi = {}: amplitude {amp:.6e}, residual {:.2e}, {} iterations",
            state.chi, state.residual, state.iterations
        )];
        for r in &report.rows {
            let verdict = if !r.applicable { "skip" } else if r.pass { "pass" } else { "FAIL" };
            lines.push(format!("  {verdict} {}: {:.3e} vs {:.3e}", r.name, r.observed, r.bound));
        }
        Ok(Outcome {
            code: EXIT_OK,
            lines,
            summary: vec![
                format!("{amp:.10e}"),
                format!("{:.3e}", state.residual),
                state.iterations.to_string(),
                report.all_pass().to_string(),
            ],
            artifacts: vec!["state.csv".into(), "validation.csv".into()],
        })
    }

    fn stability(&self, s: &StabilityPlan, out: &Path) -> Result<Outcome, Failure> {
        let stab = |e: StabilityError| match e {
            StabilityError::InvalidEquilibrium(_) | StabilityError::OutOfRange(_) => Failure::usage(e.to_string()),
            _ => Failure::solver(e),
        };
        let eq = EquilibriumInfo::new(&self.kinetics, s.u0).map_err(stab)?;
        let mut report = bifurcation_table(&eq, &self.params.lengths, s.rows).map_err(stab)?;
        let chi = self.params.chi;
        let mut lines = Vec::new();
        for r in &report.rows {
            lines.push(format!("k = {}: sigma = {}, chi_hat = {:.10}", r.k, r.sigma, r.chi_hat));
        }
        let mut artifacts = vec!["table.csv".to_string()];
        report.write_csv(BufWriter::new(File::create(out.join("table.csv"))?))?;
        let status = match report.pattern_status(chi) {
            PatternStatus::InPatternInterval { k } => format!("interval{k}"),
            PatternStatus::Unknown => "unknown".into(),
        };
        lines.push(format!("chi = {chi}: pattern status {status}"));
        let (mut above, mut max_mu) = (String::from("-"), String::from("-"));
        match report.record_chi(&self.params.lengths, chi, s.modes) {
            Ok(()) => {
                let rec = report.records.last().expect("just recorded");
                let mut w = BufWriter::new(File::create(out.join("spectrum.csv"))?);
                writeln!(w, "j,sigma,mu_minus,mu_plus")?;
                for m in &rec.mu {
                    writeln!(w, "{},{:.16e},{:.16e},{:.16e}", m.j, m.sigma, m.mu_minus, m.mu_plus)?;
                }
                w.flush()?;
                artifacts.push("spectrum.csv".into());
                let nonconstant = rec.mu.iter().filter(|m| m.sigma > 1.0);
                above = nonconstant.clone().filter(|m| m.mu_plus > 1.0).count().to_string();
                max_mu = format!("{:.10e}", nonconstant.map(|m| m.mu_plus).fold(f64::NEG_INFINITY, f64::max));
            }
            Err(e) => lines.push(format!("no spectrum at chi = {chi}: {e}")),
        }
        if let Some((grid, range, points)) = &s.scan {
            let roots = singularity_scan(&eq, grid, *range, *points).map_err(stab)?;
            let mut w = BufWriter::new(File::create(out.join("scan.csv"))?);
            writeln!(w, "chi,sigma_min")?;
            for r in &roots {
                writeln!(w, "{:.16e},{:.6e}", r.chi, r.sigma_min)?;
                lines.push(format!("singular at chi = {:.10}", r.chi));
            }
            w.flush()?;
            artifacts.push("scan.csv".into());
        }
        Ok(Outcome { code: EXIT_OK, lines, summary: vec![status, above, max_mu], artifacts })
    }

    fn compare(&self, c: &ComparePlan, out: &Path) -> Result<Outcome, Failure> {
        let cmp = |e: CompareError| match e {
            CompareError::Precondition(_) | CompareError::Mismatch(_) => Failure::usage(e.to_string()),
            CompareError::ZUnbounded { .. } => Failure { code: EXIT_BLOWUP, message: e.to_string() },
            _ => Failure::solver(e),
        };
        let traj = solve_sandwich(&self.params, c.u0_min, c.u0_max, c.horizon, c.interval).map_err(cmp)?;
        traj.write_csv(BufWriter::new(File::create(out.join("trajectory.csv"))?))?;
        let mut artifacts = vec!["trajectory.csv".to_string()];
        let last = traj.times.len() - 1;
        let rate = traj.fitted_rate(0.5).ok();
        let eps0 = traj.epsilon0.map(|e| e.value);
        let mut lines = vec![format!(
            "ubar({}) = {:.10}, ulow = {:.10}, eps0 = {}, fitted rate = {}",
            traj.times[last],
            traj.ubar[last],
            traj.ulow(last),
            eps0.map_or("-".into(), |e| format!("{e:.10}")),
            rate.map_or("-".into(), |r| format!("{r:.10}"))
        )];
        if c.envelope {
            let env = envelope_odes(&self.params, &self.kinetics, c.u0_min, c.u0_max, c.horizon).map_err(cmp)?;
            let mut w = BufWriter::new(File::create(out.join("envelope.csv"))?);
            writeln!(w, "t,z,y")?;
            for (z, y) in env.z.iter().zip(&env.y) {
                writeln!(w, "{:.10e},{:.16e},{:.16e}", z.0, z.1, y.1)?;
            }
            w.flush()?;
            artifacts.push("envelope.csv".into());
            lines.push(format!("z_inf = {:.12}, y_inf = {:.12}", env.z_inf, env.y_inf));
        }
        Ok(Outcome {
            code: EXIT_OK,
            lines,
            summary: vec![
                eps0.map_or("-".into(), |e| format!("{e:.10e}")),
                rate.map_or("-".into(), |r| format!("{r:.10e}")),
                format!("{:.10e}", traj.log_ratio(last)),
            ],
            artifacts,
        })
    }

    fn classify(&self, out: &Path) -> Result<Outcome, Failure> {
        let report = classify_regime(&self.params, &self.kinetics);
        let mut w = BufWriter::new(File::create(out.join("classify.csv"))?);
        writeln!(w, "tag,satisfied,margin,condition")?;
        for v in &report.verdicts {
            writeln!(
                w,
                "{},{},{:.10e},{}",
                v.tag.to_string().replace(", ", ";"),
                v.satisfied,
                v.margin,
                v.condition.replace(',', ";")
            )?;
        }
        w.flush()?;
        let tags: Vec<String> = report.satisfied().map(|v| v.tag.to_string()).collect();
        let mut lines = tags.clone();
        if lines.is_empty() {
            lines.push("Unclassified".into());
        }
        Ok(Outcome {
            code: EXIT_OK,
            summary: vec![lines.join(";").replace(", ", ";")],
            lines,
            artifacts: vec!["classify.csv".into()],
        })
    }
}
