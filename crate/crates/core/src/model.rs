//! Model parameters, kinetic functions and the parameter-regime classifier.

use std::fmt;

use thiserror::Error;

use crate::config::{Config, ConfigError};
use crate::stability::{self, EquilibriumInfo};

/// Relative tolerance used for every equality test between parameters.
pub const EQUALITY_RTOL: f64 = 1e-12;

/// Number of uniform samples used to bracket sign changes of `f`.
pub const ZERO_SCAN_SAMPLES: usize = 4096;

/// Absolute tolerance of the zero bisection.
pub const ZERO_ATOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("parameter out of range: {name} ({detail})")]
    OutOfRange { name: &'static str, detail: String },
    #[error("f has no nonnegative zero below {bound}")]
    NoZeroFound { bound: f64 },
    #[error("invalid kinetics: {0}")]
    InvalidKinetics(String),
    #[error("strong dissipativity fails: eta0 = {eta0} at (r, s) = ({r}, {s})")]
    NotDissipative { eta0: f64, r: f64, s: f64 },
}

fn out_of_range(name: &'static str, detail: impl Into<String>) -> ModelError {
    ModelError::OutOfRange {
        name,
        detail: detail.into(),
    }
}

/// `|x - y| <= EQUALITY_RTOL * max(|x|, |y|)`.
pub fn approx_eq(x: f64, y: f64) -> bool {
    (x - y).abs() <= EQUALITY_RTOL * x.abs().max(y.abs())
}

/// `u^p`, using integer powers where possible and treating negative `u` as 0
/// for fractional exponents.
#[inline]
pub(crate) fn pow(u: f64, p: f64) -> f64 {
    if p.fract() == 0.0 && p.abs() < 64.0 {
        u.powi(p as i32)
    } else {
        u.max(0.0).powf(p)
    }
}

/// Scalar parameters of the chemotaxis-growth system.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub chi: f64,
    pub a: f64,
    pub b: f64,
    pub theta: f64,
    pub kappa: f64,
    pub beta: f64,
    /// Spatial dimension. Grids support 1 and 2; the classifier also accepts 3.
    pub dim: usize,
    pub lengths: Vec<f64>,
}

impl ModelParams {
    pub fn new(
        chi: f64,
        a: f64,
        b: f64,
        theta: f64,
        kappa: f64,
        beta: f64,
        lengths: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let p = Self {
            chi,
            a,
            b,
            theta,
            kappa,
            beta,
            dim: lengths.len(),
            lengths,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let pos = |name: &'static str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(out_of_range(name, format!("{name} = {x} must be > 0")))
            }
        };
        pos("chi", self.chi)?;
        pos("b", self.b)?;
        pos("kappa", self.kappa)?;
        pos("beta", self.beta)?;
        if !(self.a.is_finite() && self.a >= 0.0) {
            return Err(out_of_range("a", format!("a = {} must be >= 0", self.a)));
        }
        if !(self.theta.is_finite() && self.theta > 1.0) {
            return Err(out_of_range(
                "theta",
                format!("theta = {} must be > 1", self.theta),
            ));
        }
        if !(1..=3).contains(&self.dim) {
            return Err(out_of_range(
                "dim",
                format!("dim = {} must be 1, 2 or 3", self.dim),
            ));
        }
        if self.lengths.len() != self.dim {
            return Err(out_of_range(
                "lengths",
                format!("{} lengths for dim = {}", self.lengths.len(), self.dim),
            ));
        }
        for &l in &self.lengths {
            pos("lengths", l)?;
        }
        Ok(())
    }

    /// Reads `model.*` keys. Lengths come from `model.lx`, `model.ly`, `model.lz`.
    pub fn from_config(cfg: &Config) -> Result<Self, ModelError> {
        let dim = cfg
            .usize("model.dim")?
            .ok_or_else(|| ConfigError::MissingKey("model.dim".into()))?;
        if !(1..=3).contains(&dim) {
            return Err(out_of_range("dim", format!("dim = {dim} must be 1, 2 or 3")));
        }
        let lengths = ["model.lx", "model.ly", "model.lz"][..dim]
            .iter()
            .map(|k| cfg.require_f64(k))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(
            cfg.require_f64("model.chi")?,
            cfg.require_f64("model.a")?,
            cfg.require_f64("model.b")?,
            cfg.require_f64("model.theta")?,
            cfg.require_f64("model.kappa")?,
            cfg.require_f64("model.beta")?,
            lengths,
        )
    }

    pub fn measure(&self) -> f64 {
        self.lengths.iter().product()
    }

    /// Constant equilibrium `(a/b)^(1/kappa)` of the generalized logistic law.
    pub fn logistic_equilibrium(&self) -> f64 {
        (self.a / self.b).powf(1.0 / self.kappa)
    }

    /// Default upper bound for the zero search, `4 (a/b)^(1/(theta-1))`.
    pub fn zero_search_bound(&self) -> f64 {
        let s = 4.0 * (self.a / self.b).powf(1.0 / (self.theta - 1.0));
        if s.is_finite() && s > 0.0 {
            s
        } else {
            4.0
        }
    }

    pub fn with_chi(&self, chi: f64) -> Self {
        Self {
            chi,
            ..self.clone()
        }
    }
}

/// Growth source `f`.
#[derive(Debug, Clone, PartialEq)]
pub enum Growth {
    /// `u (a - b u^exponent)`
    Logistic { a: f64, b: f64, exponent: f64 },
    /// `a - b u^theta`
    PowerEnvelope { a: f64, b: f64, theta: f64 },
    /// `u (1 - u)(u - c)`
    Allee { c: f64 },
    /// `sum_i coeffs[i] u^i`
    Polynomial(Vec<f64>),
}

impl Growth {
    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            Growth::Logistic { a, b, exponent } => u * (a - b * pow(u, exponent)),
            Growth::PowerEnvelope { a, b, theta } => a - b * pow(u, theta),
            Growth::Allee { c } => u * (1.0 - u) * (u - c),
            Growth::Polynomial(ref c) => c.iter().rev().fold(0.0, |acc, &ci| acc * u + ci),
        }
    }

    pub fn derivative(&self, u: f64) -> f64 {
        match *self {
            Growth::Logistic { a, b, exponent } => a - b * (exponent + 1.0) * pow(u, exponent),
            Growth::PowerEnvelope { b, theta, .. } => -b * theta * pow(u, theta - 1.0),
            Growth::Allee { c } => -3.0 * u * u + 2.0 * (1.0 + c) * u - c,
            Growth::Polynomial(ref c) => c
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (i, &ci)| acc * u + i as f64 * ci),
        }
    }

    /// The law as a sum of monomials `(coefficient, power)`.
    pub fn terms(&self) -> Vec<(f64, f64)> {
        match *self {
            Growth::Logistic { a, b, exponent } => vec![(a, 1.0), (-b, exponent + 1.0)],
            Growth::PowerEnvelope { a, b, theta } => vec![(a, 0.0), (-b, theta)],
            Growth::Allee { c } => vec![(-c, 1.0), (1.0 + c, 2.0), (-1.0, 3.0)],
            Growth::Polynomial(ref c) => c
                .iter()
                .enumerate()
                .filter(|(_, &ci)| ci != 0.0)
                .map(|(i, &ci)| (ci, i as f64))
                .collect(),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Growth::Logistic { a, b, exponent } => format!("u({a} - {b} u^{exponent})"),
            Growth::PowerEnvelope { a, b, theta } => format!("{a} - {b} u^{theta}"),
            Growth::Allee { c } => format!("u(1 - u)(u - {c})"),
            Growth::Polynomial(c) => format!("polynomial{c:?}"),
        }
    }
}

/// Secretion `g(u) = beta u^kappa`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Secretion {
    pub beta: f64,
    pub kappa: f64,
}

impl Secretion {
    pub fn eval(&self, u: f64) -> f64 {
        self.beta * pow(u, self.kappa)
    }

    pub fn derivative(&self, u: f64) -> f64 {
        self.beta * self.kappa * pow(u, self.kappa - 1.0)
    }
}

/// The pair `(f, g)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kinetics {
    pub growth: Growth,
    pub secretion: Secretion,
}

impl Kinetics {
    pub fn new(growth: Growth, secretion: Secretion) -> Result<Self, ModelError> {
        if !(secretion.beta > 0.0 && secretion.kappa > 0.0) {
            return Err(ModelError::InvalidKinetics(format!(
                "g = {} u^{} must be nontrivial and nonnegative",
                secretion.beta, secretion.kappa
            )));
        }
        let f0 = growth.eval(0.0);
        if !(f0 >= 0.0) {
            return Err(ModelError::InvalidKinetics(format!("f(0) = {f0} < 0")));
        }
        Ok(Self { growth, secretion })
    }

    /// `f = u(a - b u^kappa)`, `g = beta u^kappa` from the model parameters.
    pub fn logistic(p: &ModelParams) -> Self {
        Self {
            growth: Growth::Logistic {
                a: p.a,
                b: p.b,
                exponent: p.kappa,
            },
            secretion: Secretion {
                beta: p.beta,
                kappa: p.kappa,
            },
        }
    }

    /// Reads `kinetics.*` keys; `g = beta u^kappa` always uses the model values.
    pub fn from_config(cfg: &Config, p: &ModelParams) -> Result<Self, ModelError> {
        let kind = cfg.raw("kinetics.f_kind").unwrap_or("logistic");
        let growth = match kind {
            "logistic" => Growth::Logistic {
                a: p.a,
                b: p.b,
                exponent: cfg.f64_or("kinetics.exponent", p.kappa)?,
            },
            "power" => Growth::PowerEnvelope {
                a: p.a,
                b: p.b,
                theta: p.theta,
            },
            "allee" => Growth::Allee {
                c: cfg.f64_or("kinetics.allee_c", 0.5)?,
            },
            "polynomial" => Growth::Polynomial(
                cfg.f64_list("kinetics.coeffs")?
                    .ok_or_else(|| ConfigError::MissingKey("kinetics.coeffs".into()))?,
            ),
            other => {
                return Err(ConfigError::BadValue {
                    key: "kinetics.f_kind".into(),
                    value: other.into(),
                    expected: "one of logistic, power, allee, polynomial",
                }
                .into())
            }
        };
        Self::new(
            growth,
            Secretion {
                beta: p.beta,
                kappa: p.kappa,
            },
        )
    }

    #[inline]
    pub fn f(&self, u: f64) -> f64 {
        self.growth.eval(u)
    }

    #[inline]
    pub fn f_prime(&self, u: f64) -> f64 {
        self.growth.derivative(u)
    }

    #[inline]
    pub fn g(&self, u: f64) -> f64 {
        self.secretion.eval(u)
    }

    #[inline]
    pub fn g_prime(&self, u: f64) -> f64 {
        self.secretion.derivative(u)
    }

    /// True for `f = u(a - b u^kappa)` with the secretion exponent and `beta = 1`.
    pub fn is_logistic_matched(&self, kappa: f64) -> bool {
        matches!(self.growth, Growth::Logistic { exponent, .. } if approx_eq(exponent, kappa))
            && approx_eq(self.secretion.kappa, kappa)
    }
}

/// Sorted nonnegative zeros of `f` and the largest one.
#[derive(Debug, Clone, PartialEq)]
pub struct Zeros {
    pub zeros: Vec<f64>,
}

impl Zeros {
    /// The largest zero `K`.
    pub fn largest(&self) -> f64 {
        *self.zeros.last().expect("Zeros is never empty")
    }

    /// Positive zeros with `g'(z) > 0`.
    pub fn equilibrium_set(&self, k: &Kinetics) -> Vec<f64> {
        self.zeros
            .iter()
            .copied()
            .filter(|&z| z > 0.0 && k.g_prime(z) > 0.0)
            .collect()
    }
}

/// Zeros of `f` on `[0, bound]` by sign-change bracketing and bisection.
pub fn zeros_of_f(k: &Kinetics, bound: f64) -> Result<Zeros, ModelError> {
    if !(bound.is_finite() && bound > 0.0) {
        return Err(out_of_range("bound", format!("search bound {bound} must be > 0")));
    }
    let n = ZERO_SCAN_SAMPLES;
    let xs: Vec<f64> = (0..=n).map(|i| bound * i as f64 / n as f64).collect();
    let fs: Vec<f64> = xs.iter().map(|&x| k.f(x)).collect();
    let mut zeros: Vec<f64> = Vec::new();
    for i in 0..=n {
        if fs[i] == 0.0 {
            zeros.push(xs[i]);
        } else if i < n && fs[i + 1] != 0.0 && (fs[i] < 0.0) != (fs[i + 1] < 0.0) {
            zeros.push(bisect(|x| k.f(x), xs[i], xs[i + 1], fs[i]));
        }
    }
    zeros.dedup_by(|x, y| (*x - *y).abs() < 1e-9);
    if zeros.is_empty() {
        return Err(ModelError::NoZeroFound { bound });
    }
    Ok(Zeros { zeros })
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, mut f_lo: f64) -> f64 {
    while hi - lo > ZERO_ATOL {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Outcome of [`verify_growth_envelope`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeCheck {
    pub holds: bool,
    /// `max_s f(s) - (a - b s^theta)` over the samples.
    pub worst_violation: f64,
    pub worst_at: f64,
}

/// Samples `f(s) <= a - b s^theta` on `{0}` and a logarithmic grid of `(0, S_max]`.
///
/// The logarithmic grid has `2^m + 1` points with `2^m + 1 >= n_samples`, so the
/// sample set for a larger request always contains the smaller one.
pub fn verify_growth_envelope(
    k: &Kinetics,
    a: f64,
    b: f64,
    theta: f64,
    n_samples: usize,
) -> Result<EnvelopeCheck, ModelError> {
    if n_samples < 100 {
        return Err(out_of_range("n_samples", format!("{n_samples} < 100")));
    }
    // b S^theta must dominate every lower-order term of f.
    let terms = k.growth.terms();
    let weight = (terms.len() + 1) as f64;
    let mut s_max: f64 = 1.0;
    for &(c, p) in &terms {
        if p < theta && c != 0.0 {
            s_max = s_max.max((weight * c.abs() / b).powf(1.0 / (theta - p)));
        }
    }
    s_max = s_max.max((weight * a.abs() / b).powf(1.0 / theta));
    s_max *= 2.0;
    let s_min = s_max * 1e-8;
    let mut level = 0u32;
    while (1usize << level) + 1 < n_samples {
        level += 1;
    }
    let m = 1usize << level;
    let ratio = (s_max / s_min).ln();
    let samples = std::iter::once(0.0).chain((0..=m).map(|i| s_min * (ratio * i as f64 / m as f64).exp()));

    let mut worst = f64::NEG_INFINITY;
    let mut worst_at = 0.0;
    let mut holds = true;
    for s in samples {
        let env = a - b * pow(s, theta);
        let fs = k.f(s);
        let diff = fs - env;
        let slack = 1e-12 * (1.0 + fs.abs() + env.abs());
        if diff > slack {
            holds = false;
        }
        if diff > worst {
            worst = diff;
            worst_at = s;
        }
    }
    Ok(EnvelopeCheck {
        holds,
        worst_violation: worst,
        worst_at,
    })
}

/// Estimate of the dissipativity margin around a zero of `f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dissipativity {
    pub eta0: f64,
    /// Pair `(r, s)` attaining the supremum of the difference quotient.
    pub worst_pair: (f64, f64),
    pub closed_form: bool,
}

/// `eta0 = -2 chi - sup [f(s)/s - f(r)/r] / (s^kappa - r^kappa)` over `r <= z <= s`.
///
/// Uses the closed form `b - 2 chi` for `f = u(a - b u^kappa)` and sampling
/// otherwise.
pub fn check_strong_dissipativity(
    k: &Kinetics,
    chi: f64,
    kappa: f64,
    z: f64,
    n_samples: usize,
) -> Result<Dissipativity, ModelError> {
    if let Growth::Logistic { b, exponent, .. } = k.growth {
        if approx_eq(exponent, kappa) && z > 0.0 && k.f(z).abs() <= 1e-10 * z.max(1.0) {
            let eta0 = b - 2.0 * chi;
            return if eta0 > 0.0 {
                Ok(Dissipativity {
                    eta0,
                    worst_pair: (z, z),
                    closed_form: true,
                })
            } else {
                Err(ModelError::NotDissipative {
                    eta0,
                    r: z,
                    s: z,
                })
            };
        }
    }
    sample_strong_dissipativity(k, chi, kappa, z, n_samples)
}

/// Sampled version of [`check_strong_dissipativity`], `n_samples` per side of `z`.
pub fn sample_strong_dissipativity(
    k: &Kinetics,
    chi: f64,
    kappa: f64,
    z: f64,
    n_samples: usize,
) -> Result<Dissipativity, ModelError> {
    if !(z > 0.0) {
        return Err(out_of_range("z", format!("equilibrium {z} must be > 0")));
    }
    if n_samples < 2 {
        return Err(out_of_range("n_samples", format!("{n_samples} < 2")));
    }
    let zeros = zeros_of_f(k, (4.0 * z).max(1.0))?;
    if !zeros.zeros.iter().any(|&x| (x - z).abs() <= 1e-8 * z.max(1.0)) {
        return Err(out_of_range("z", format!("{z} is not a zero of f")));
    }
    let below = zeros
        .zeros
        .iter()
        .copied()
        .filter(|&x| x < z * (1.0 - 1e-8))
        .fold(0.0, f64::max);
    let above = zeros
        .zeros
        .iter()
        .copied()
        .find(|&x| x > z * (1.0 + 1e-8))
        .unwrap_or(3.0 * z);

    let side = |width: f64| -> Vec<f64> {
        let lo = 1e-4 * width;
        let hi = (1.0 - 1e-6) * width;
        let ratio = (hi / lo).ln();
        std::iter::once(0.0)
            .chain((0..n_samples).map(|i| lo * (ratio * i as f64 / (n_samples - 1) as f64).exp()))
            .collect()
    };
    let rs: Vec<f64> = side(z - below).into_iter().map(|d| z - d).collect();
    let ss: Vec<f64> = side(above - z).into_iter().map(|d| z + d).collect();

    let mut sup = f64::NEG_INFINITY;
    let mut pair = (z, z);
    for &r in &rs {
        let qr = k.f(r) / r;
        let rk = pow(r, kappa);
        for &s in &ss {
            if s == r {
                continue;
            }
            let q = (k.f(s) / s - qr) / (pow(s, kappa) - rk);
            if q > sup {
                sup = q;
                pair = (r, s);
            }
        }
    }
    let eta0 = -2.0 * chi - sup;
    if eta0 > 0.0 {
        Ok(Dissipativity {
            eta0,
            worst_pair: pair,
            closed_form: false,
        })
    } else {
        Err(ModelError::NotDissipative {
            eta0,
            r: pair.0,
            s: pair.1,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RegimeTag {
    SublinearSecretion,
    Subcritical,
    Borderline,
    StrictBorderlineInequality,
    GloballyConvergent,
    PatternCapableAt(Vec<f64>),
    Unclassified,
}

impl fmt::Display for RegimeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegimeTag::SublinearSecretion => write!(f, "SublinearSecretion"),
            RegimeTag::Subcritical => write!(f, "Subcritical"),
            RegimeTag::Borderline => write!(f, "Borderline"),
            RegimeTag::StrictBorderlineInequality => write!(f, "StrictBorderlineInequality"),
            RegimeTag::GloballyConvergent => write!(f, "GloballyConvergent"),
            RegimeTag::PatternCapableAt(list) => {
                write!(f, "PatternCapableAt(")?;
                for (i, c) in list.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, ")")
            }
            RegimeTag::Unclassified => write!(f, "Unclassified"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub tag: RegimeTag,
    /// The inequality tested, with values substituted.
    pub condition: String,
    pub satisfied: bool,
    /// Signed margin of the deciding inequality (positive when it holds).
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeReport {
    pub verdicts: Vec<Verdict>,
}

impl RegimeReport {
    pub fn has(&self, tag: &RegimeTag) -> bool {
        self.verdicts.iter().any(|v| {
            v.satisfied && std::mem::discriminant(&v.tag) == std::mem::discriminant(tag)
        })
    }

    pub fn satisfied(&self) -> impl Iterator<Item = &Verdict> {
        self.verdicts.iter().filter(|v| v.satisfied)
    }
}

/// Number of Neumann eigenvalues scanned for pattern thresholds.
const PATTERN_TABLE_ROWS: usize = 6;

/// Evaluates every parameter condition and lists each one with its verdict.
pub fn classify_regime(p: &ModelParams, k: &Kinetics) -> RegimeReport {
    let n = p.dim as f64;
    let (chi, b, theta, kappa, beta) = (p.chi, p.b, p.theta, p.kappa, p.beta);
    let mut verdicts = Vec::new();

    let limit = 2.0 / n;
    verdicts.push(Verdict {
        tag: RegimeTag::SublinearSecretion,
        condition: format!("kappa < 2/n: {kappa} < 2/{n} = {limit}"),
        satisfied: kappa < limit && !approx_eq(kappa, limit),
        margin: limit - kappa,
    });

    verdicts.push(Verdict {
        tag: RegimeTag::Subcritical,
        condition: format!("theta - kappa > 1: {theta} - {kappa} = {} > 1", theta - kappa),
        satisfied: theta - kappa > 1.0 && !approx_eq(theta, kappa + 1.0),
        margin: theta - kappa - 1.0,
    });

    let on_line = approx_eq(theta, kappa + 1.0);
    let threshold = (kappa * n - 2.0) / (kappa * n) * beta * chi;
    let at_threshold = approx_eq(b, threshold) || (b == 0.0 && threshold == 0.0);
    verdicts.push(Verdict {
        tag: RegimeTag::StrictBorderlineInequality,
        condition: format!(
            "theta = kappa + 1 ({theta} = {}) and b > (kappa n - 2)/(kappa n) beta chi: {b} > {threshold}",
            kappa + 1.0
        ),
        satisfied: on_line && b > threshold && !at_threshold,
        margin: b - threshold,
    });

    let g_exact = approx_eq(k.secretion.beta, beta) && approx_eq(k.secretion.kappa, kappa);
    verdicts.push(Verdict {
        tag: RegimeTag::Borderline,
        condition: format!(
            "theta = kappa + 1 ({theta} = {}) and b = (kappa n - 2)/(kappa n) beta chi ({b} = {threshold}) and g = beta u^kappa ({g_exact})",
            kappa + 1.0
        ),
        satisfied: on_line && at_threshold && g_exact,
        margin: b - threshold,
    });

    let logistic = k.is_logistic_matched(kappa) && approx_eq(k.secretion.beta, 1.0);
    let b_f = match k.growth {
        Growth::Logistic { b, .. } => b,
        _ => b,
    };
    verdicts.push(Verdict {
        tag: RegimeTag::GloballyConvergent,
        condition: format!(
            "f = u(a - b u^kappa) and g = u^kappa ({logistic}) and b > 2 chi: {b_f} > {}",
            2.0 * chi
        ),
        satisfied: logistic && b_f > 2.0 * chi && !approx_eq(b_f, 2.0 * chi),
        margin: b_f - 2.0 * chi,
    });

    if let Some(v) = pattern_verdict(p, k) {
        verdicts.push(v);
    }

    let any = verdicts.iter().any(|v| v.satisfied);
    verdicts.push(Verdict {
        tag: RegimeTag::Unclassified,
        condition: "no other condition holds".into(),
        satisfied: !any,
        margin: 0.0,
    });
    RegimeReport { verdicts }
}

fn pattern_verdict(p: &ModelParams, k: &Kinetics) -> Option<Verdict> {
    let zeros = zeros_of_f(k, p.zero_search_bound()).ok()?;
    let set = zeros.equilibrium_set(k);
    if set.is_empty() {
        return None;
    }
    let mut thresholds = Vec::new();
    let mut parts = Vec::new();
    let mut inside = false;
    let mut margin = f64::NEG_INFINITY;
    for u0 in set {
        let Ok(eq) = EquilibriumInfo::new(k, u0) else {
            continue;
        };
        let Ok(table) = stability::bifurcation_table(&eq, &p.lengths, PATTERN_TABLE_ROWS) else {
            continue;
        };
        let list: Vec<f64> = table.rows.iter().map(|r| r.chi_hat).collect();
        for &(lo, hi) in &table.pattern_intervals {
            let m = (p.chi - lo).min(hi - p.chi);
            margin = margin.max(m);
            if m > 0.0 {
                inside = true;
            }
        }
        parts.push(format!("u0 = {u0}: chi_hat = {list:?}"));
        thresholds.extend(list);
    }
    if parts.is_empty() {
        return None;
    }
    Some(Verdict {
        tag: RegimeTag::PatternCapableAt(thresholds),
        condition: format!(
            "chi = {} in a pattern interval (chi_hat_(2k-1), chi_hat_(2k)); {}",
            p.chi,
            parts.join("; ")
        ),
        satisfied: inside,
        margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn params(chi: f64) -> ModelParams {
        ModelParams::new(chi, 1.0, 1.0, 2.0, 1.0, 1.0, vec![PI]).unwrap()
    }

    #[test]
    fn build_params_from_config() {
        let cfg = Config::from_pairs([
            ("model.chi", "0.4"),
            ("model.a", "1"),
            ("model.b", "1"),
            ("model.theta", "2"),
            ("model.kappa", "1"),
            ("model.beta", "1"),
            ("model.dim", "1"),
            ("model.lx", "pi"),
        ]);
        let p = ModelParams::from_config(&cfg).unwrap();
        assert_eq!(p, params(0.4));
        cfg.ensure_all_used().unwrap();
    }

    #[test]
    fn build_params_rejects() {
        let mut cfg = Config::from_pairs([
            ("model.chi", "-1"),
            ("model.a", "1"),
            ("model.b", "1"),
            ("model.theta", "2"),
            ("model.kappa", "1"),
            ("model.beta", "1"),
            ("model.dim", "1"),
            ("model.lx", "pi"),
        ]);
        assert!(matches!(
            ModelParams::from_config(&cfg),
            Err(ModelError::OutOfRange { name: "chi", .. })
        ));
        cfg.set("model.chi", "1".into());
        cfg.set("model.theta", "1".into());
        assert!(matches!(
            ModelParams::from_config(&cfg),
            Err(ModelError::OutOfRange { name: "theta", .. })
        ));
        cfg.set("model.theta", "2".into());
        cfg.set("model.lx", "0".into());
        assert!(matches!(
            ModelParams::from_config(&cfg),
            Err(ModelError::OutOfRange { name: "lengths", .. })
        ));
        let missing = Config::from_pairs([("model.dim", "1")]);
        assert!(matches!(
            ModelParams::from_config(&missing),
            Err(ModelError::Config(ConfigError::MissingKey(_)))
        ));
    }

    #[test]
    fn kinetics_rejects_negative_f0() {
        let err = Kinetics::new(
            Growth::Polynomial(vec![-1.0, 1.0]),
            Secretion { beta: 1.0, kappa: 1.0 },
        );
        assert!(matches!(err, Err(ModelError::InvalidKinetics(_))));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let laws = [
            Growth::Logistic { a: 1.3, b: 0.7, exponent: 1.5 },
            Growth::PowerEnvelope { a: 2.0, b: 1.0, theta: 2.5 },
            Growth::Allee { c: 0.3 },
            Growth::Polynomial(vec![0.1, 1.0, -2.0, 0.5]),
        ];
        for law in laws {
            for &u in &[0.3, 0.9, 1.7] {
                let h = 1e-6;
                let fd = (law.eval(u + h) - law.eval(u - h)) / (2.0 * h);
                assert!((fd - law.derivative(u)).abs() < 1e-7, "{law:?} at {u}");
                let from_terms: f64 = law.terms().iter().map(|&(c, p)| c * u.powf(p)).sum();
                assert!((from_terms - law.eval(u)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zeros_of_logistic_and_allee() {
        let k = Kinetics::logistic(&params(0.4));
        let z = zeros_of_f(&k, 4.0).unwrap();
        assert_eq!(z.zeros.len(), 2);
        assert_eq!(z.zeros[0], 0.0);
        assert!((z.largest() - 1.0).abs() < 1e-12);

        let allee = Kinetics::new(Growth::Allee { c: 0.5 }, Secretion { beta: 1.0, kappa: 1.0 }).unwrap();
        let z = zeros_of_f(&allee, 4.0).unwrap();
        assert_eq!(z.zeros.len(), 3);
        for (got, want) in z.zeros.iter().zip([0.0, 0.5, 1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!((z.largest() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zeros_of_cubic_logistic() {
        // u(2 - 3u^2): oracle root sqrt(2/3) from plain bisection on [0.5, 4].
        let k = Kinetics::new(
            Growth::Logistic { a: 2.0, b: 3.0, exponent: 2.0 },
            Secretion { beta: 1.0, kappa: 2.0 },
        )
        .unwrap();
        let (mut lo, mut hi) = (0.5_f64, 4.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid * (2.0 - 3.0 * mid * mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let z = zeros_of_f(&k, 4.0).unwrap();
        assert_eq!(z.zeros.len(), 2);
        assert!((z.largest() - lo).abs() < 1e-12);
        assert!((z.largest() - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!(k.f(z.largest()).abs() < 1e-11);
    }

    #[test]
    fn no_zero_found() {
        let k = Kinetics::new(
            Growth::Polynomial(vec![1.0, 0.0, 1.0]),
            Secretion { beta: 1.0, kappa: 1.0 },
        )
        .unwrap();
        assert!(matches!(zeros_of_f(&k, 5.0), Err(ModelError::NoZeroFound { .. })));
    }

    #[test]
    fn envelope_examples() {
        let k = Kinetics::logistic(&params(0.4));
        // u - u^2 <= 0.25 - u^2 fails for u > 0.25.
        let bad = verify_growth_envelope(&k, 0.25, 1.0, 2.0, 200).unwrap();
        assert!(!bad.holds);
        assert!(bad.worst_violation > 0.0);
        // 0.5u^2 - u + 1 has negative discriminant.
        let good = verify_growth_envelope(&k, 1.0, 0.5, 2.0, 200).unwrap();
        assert!(good.holds, "{good:?}");
        let id = Kinetics::new(
            Growth::PowerEnvelope { a: 2.0, b: 1.5, theta: 3.0 },
            Secretion { beta: 1.0, kappa: 1.0 },
        )
        .unwrap();
        let same = verify_growth_envelope(&id, 2.0, 1.5, 3.0, 200).unwrap();
        assert!(same.holds);
        assert_eq!(same.worst_violation, 0.0);
        assert!(verify_growth_envelope(&id, 2.0, 1.5, 3.0, 99).is_err());
    }

    #[test]
    fn dissipativity_examples() {
        let k = Kinetics::logistic(&params(0.4));
        let d = check_strong_dissipativity(&k, 0.4, 1.0, 1.0, 256).unwrap();
        assert!(d.closed_form);
        assert!((d.eta0 - 0.2).abs() < 1e-14);
        let s = sample_strong_dissipativity(&k, 0.4, 1.0, 1.0, 256).unwrap();
        assert!((s.eta0 - 0.2).abs() < 1e-10, "{s:?}");
        assert!(matches!(
            check_strong_dissipativity(&k, 0.6, 1.0, 1.0, 256),
            Err(ModelError::NotDissipative { .. })
        ));
        match sample_strong_dissipativity(&k, 0.6, 1.0, 1.0, 256) {
            Err(ModelError::NotDissipative { eta0, r, s }) => {
                assert!((eta0 + 0.2).abs() < 1e-10);
                assert!(r <= 1.0 && s >= 1.0 && r < s);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dissipativity_general_kappa() {
        let k = Kinetics::new(
            Growth::Logistic { a: 2.0, b: 1.5, exponent: 2.5 },
            Secretion { beta: 1.0, kappa: 2.5 },
        )
        .unwrap();
        let z = (2.0f64 / 1.5).powf(1.0 / 2.5);
        let s = sample_strong_dissipativity(&k, 0.3, 2.5, z, 256).unwrap();
        assert!((s.eta0 - (1.5 - 0.6)).abs() < 1e-10, "{s:?}");
    }

    #[test]
    fn classify_examples() {
        // n = 3, kappa = 1, theta = 2: threshold (n-2)/n chi.
        let p = ModelParams::new(3.0, 1.0, 1.01, 2.0, 1.0, 1.0, vec![PI; 3]).unwrap();
        let r = classify_regime(&p, &Kinetics::logistic(&p));
        assert!(r.has(&RegimeTag::StrictBorderlineInequality));
        assert!(!r.has(&RegimeTag::Borderline));

        let p = ModelParams::new(1.0, 1.0, 1e-6, 2.0, 1.0, 1.0, vec![PI; 2]).unwrap();
        let r = classify_regime(&p, &Kinetics::logistic(&p));
        assert!(r.has(&RegimeTag::StrictBorderlineInequality));

        let p = params(0.4);
        let r = classify_regime(&p, &Kinetics::logistic(&p));
        assert!(r.has(&RegimeTag::GloballyConvergent));
        // n = 1, kappa = 1 < 2/n.
        assert!(r.has(&RegimeTag::SublinearSecretion));
        assert!(!r.has(&RegimeTag::Unclassified));
        let gc = r
            .verdicts
            .iter()
            .find(|v| v.tag == RegimeTag::GloballyConvergent)
            .unwrap();
        assert!(gc.condition.contains("1 > 0.8"), "{}", gc.condition);
    }

    #[test]
    fn classify_borderline_exact() {
        let p = ModelParams::new(1.0, 1.0, 0.5, 3.0, 2.0, 1.0, vec![PI; 2]).unwrap();
        let r = classify_regime(&p, &Kinetics::logistic(&p));
        assert!(r.has(&RegimeTag::Borderline));
        assert!(!r.has(&RegimeTag::StrictBorderlineInequality));
    }

    #[test]
    fn classify_pattern_capable() {
        let p = params(5.0);
        let r = classify_regime(&p, &Kinetics::logistic(&p));
        let v = r
            .verdicts
            .iter()
            .find(|v| matches!(v.tag, RegimeTag::PatternCapableAt(_)))
            .unwrap();
        let RegimeTag::PatternCapableAt(list) = &v.tag else { unreachable!() };
        assert!((list[0] - 4.0).abs() < 1e-12);
        assert!((list[1] - 6.25).abs() < 1e-12);
        assert!(v.satisfied);
        // chi = 7 lies between chi_hat_2 = 6.25 and chi_hat_3.
        let p = params(7.0);
        assert!(!classify_regime(&p, &Kinetics::logistic(&p)).has(&RegimeTag::PatternCapableAt(vec![])));
    }

    #[test]
    fn sublinear_and_subcritical() {
        let p = ModelParams::new(1.0, 1.0, 1.0, 3.0, 0.5, 1.0, vec![PI; 2]).unwrap();
        let r = classify_regime(&p, &Kinetics::logistic(&p));
        assert!(r.has(&RegimeTag::SublinearSecretion));
        assert!(r.has(&RegimeTag::Subcritical));
        let sub = &r.verdicts[1];
        assert!(sub.condition.contains("3 - 0.5 = 2.5 > 1"));
    }
}
