//! Linearized spectrum at a constant equilibrium and the bifurcation
//! thresholds `χ̂_k` where the stationary operator loses invertibility.
//!
//! At `(u₀, v₀ = g(u₀))` the linearized stationary problem reads
//! `(-Δ + I) U = A(χ) U` with
//!
//! ```text
//! A(χ) = [ g'(u₀)u₀χ + f'(u₀) + 1   -χu₀ ]
//!        [ g'(u₀)                     0  ]
//! ```
//!
//! so on a Neumann mode with eigenvalue `σ` of `-Δ + I` the operator
//! `(-Δ + I)⁻¹A` has eigenvalues `λ±(χ)/σ`.

use std::io::{self, Write};

use nalgebra::DMatrix;
use rayon::prelude::*;
use thiserror::Error;

use crate::banded::BandMatrix;
use crate::grid::{analytic_neumann_spectrum, Grid, GridError};
use crate::model::Kinetics;

/// `|f(u₀)|` allowed for an equilibrium.
pub const EQUILIBRIUM_ATOL: f64 = 1e-9;
/// Relative tolerance of the `λ⁺(χ̂) = σ` branch check.
pub const BRANCH_RTOL: f64 = 1e-10;
/// Bisection tolerance of [`singularity_scan`] roots.
pub const SCAN_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StabilityError {
    #[error("invalid equilibrium: {0}")]
    InvalidEquilibrium(String),
    #[error("lambda is complex at chi = {chi}: discriminant {discriminant:e} < 0")]
    UndefinedForThisChi { chi: f64, discriminant: f64 },
    #[error("sigma = {sigma} is not attained by lambda+ (branch point {branch_point})")]
    NotOnPlusBranch { sigma: f64, branch_point: f64 },
    #[error("{0}")]
    OutOfRange(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Data of the linearization at a positive constant equilibrium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumInfo {
    pub u0: f64,
    pub v0: f64,
    pub f_prime: f64,
    pub g_prime: f64,
    /// `χ̂₀ = (1 + 2√(-f') - f') / (g'u₀)`, only for `f'(u₀) < 0`.
    pub chi_floor: Option<f64>,
}

impl EquilibriumInfo {
    pub fn new(k: &Kinetics, u0: f64) -> Result<Self, StabilityError> {
        if !(u0 > 0.0 && u0.is_finite()) {
            return Err(StabilityError::InvalidEquilibrium(format!("u0 = {u0} must be > 0")));
        }
        let f0 = k.f(u0);
        if !(f0.abs() <= EQUILIBRIUM_ATOL * u0.max(1.0)) {
            return Err(StabilityError::InvalidEquilibrium(format!(
                "f(u0) = {f0:e} at u0 = {u0}"
            )));
        }
        let mut e = Self::from_linearization(u0, k.f_prime(u0), k.g_prime(u0))?;
        e.v0 = k.g(u0);
        Ok(e)
    }

    /// Builds the record from `u₀`, `f'(u₀)` and `g'(u₀)` directly; `v₀` is
    /// set to `g'(u₀) u₀`, the value for linear secretion.
    pub fn from_linearization(u0: f64, f_prime: f64, g_prime: f64) -> Result<Self, StabilityError> {
        if !(u0 > 0.0) {
            return Err(StabilityError::InvalidEquilibrium(format!("u0 = {u0} must be > 0")));
        }
        if !(g_prime > 0.0) {
            return Err(StabilityError::InvalidEquilibrium(format!(
                "g'(u0) = {g_prime} must be > 0"
            )));
        }
        let chi_floor =
            (f_prime < 0.0).then(|| (1.0 + 2.0 * (-f_prime).sqrt() - f_prime) / (g_prime * u0));
        Ok(Self {
            u0,
            v0: g_prime * u0,
            f_prime,
            g_prime,
            chi_floor,
        })
    }

    /// `g'(u₀) u₀`
    pub fn gu(&self) -> f64 {
        self.g_prime * self.u0
    }

    /// The matrix `A(χ)` row by row.
    pub fn a_matrix(&self, chi: f64) -> [[f64; 2]; 2] {
        [
            [self.gu() * chi + self.f_prime + 1.0, -chi * self.u0],
            [self.g_prime, 0.0],
        ]
    }

    /// Smallest value of `λ⁺` when `f'(u₀) < 0`: `1 + √(-f')`.
    pub fn branch_point(&self) -> Option<f64> {
        (self.f_prime < 0.0).then(|| 1.0 + (-self.f_prime).sqrt())
    }
}

/// `(λ⁻, λ⁺)` of `A(χ)`.
pub fn lambda_pm(e: &EquilibriumInfo, chi: f64) -> Result<(f64, f64), StabilityError> {
    if !(chi > 0.0) {
        return Err(StabilityError::OutOfRange(format!("chi = {chi} must be > 0")));
    }
    let c = e.gu() * chi;
    let trace = c + e.f_prime + 1.0;
    let shifted = c + e.f_prime - 1.0;
    let mut disc = shifted * shifted + 4.0 * e.f_prime;
    if disc < 0.0 {
        // Round-off at the branch point.
        if disc > -1e-13 * (shifted * shifted + 4.0 * e.f_prime.abs()) {
            disc = 0.0;
        } else {
            return Err(StabilityError::UndefinedForThisChi {
                chi,
                discriminant: disc,
            });
        }
    }
    let root = disc.sqrt();
    // Product of the roots is c; take the larger-magnitude root first.
    if trace >= 0.0 {
        let plus = 0.5 * (trace + root);
        let minus = if plus != 0.0 { c / plus } else { 0.0 };
        Ok((minus, plus))
    } else {
        let minus = 0.5 * (trace - root);
        Ok((minus, c / minus))
    }
}

/// `χ̂ = σ(σ - f' - 1) / (g'u₀(σ - 1))`, the `χ` at which `σ` solves the
/// characteristic quadratic, with no branch check.
pub fn chi_hat_closed_form(e: &EquilibriumInfo, sigma: f64) -> f64 {
    sigma * (sigma - e.f_prime - 1.0) / (e.gu() * (sigma - 1.0))
}

/// `χ̂ = (λ⁺)⁻¹(σ)`.
pub fn chi_hat(e: &EquilibriumInfo, sigma: f64) -> Result<f64, StabilityError> {
    if !(sigma > 1.0) {
        return Err(StabilityError::OutOfRange(format!("sigma = {sigma} must be > 1")));
    }
    let off_branch = || StabilityError::NotOnPlusBranch {
        sigma,
        branch_point: e.branch_point().unwrap_or(f64::NAN),
    };
    let chi = chi_hat_closed_form(e, sigma);
    if !(chi > 0.0 && chi.is_finite()) {
        return Err(off_branch());
    }
    match lambda_pm(e, chi) {
        Ok((_, plus)) if (plus - sigma).abs() <= BRANCH_RTOL * sigma => Ok(chi),
        _ => Err(off_branch()),
    }
}

/// One row of the bifurcation table.
#[derive(Debug, Clone, PartialEq)]
pub struct BifurcationRow {
    /// Index of the distinct eigenvalue, `σ₀ = 1` being index 0.
    pub k: usize,
    pub sigma: f64,
    pub multiplicity: usize,
    pub chi_hat: f64,
    /// Odd multiplicity: the degree argument guarantees a bifurcation.
    pub proven: bool,
}

/// `λ±` and the quotients `μ_j±` at one `χ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiRecord {
    pub chi: f64,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    pub mu: Vec<MuPair>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuPair {
    pub j: usize,
    pub sigma: f64,
    pub mu_minus: f64,
    pub mu_plus: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub equilibrium: EquilibriumInfo,
    pub rows: Vec<BifurcationRow>,
    /// `(χ̂_{2k-1}, χ̂_{2k})`
    pub pattern_intervals: Vec<(f64, f64)>,
    /// Reported for `χ̃₁` when `σ₁` is past the branch point; any value
    /// `>= χ̂₀` would qualify, so this is not a canonical choice.
    pub chi_tilde_1: Option<f64>,
    pub records: Vec<ChiRecord>,
}

/// Whether nonconstant steady states are guaranteed at `χ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternStatus {
    /// Inside `(χ̂_{2k-1}, χ̂_{2k})`.
    InPatternInterval { k: usize },
    /// Outside every interval: the theory is silent, not negative.
    Unknown,
}

impl StabilityReport {
    pub fn pattern_status(&self, chi: f64) -> PatternStatus {
        self.pattern_intervals
            .iter()
            .position(|&(lo, hi)| chi > lo && chi < hi)
            .map_or(PatternStatus::Unknown, |i| PatternStatus::InPatternInterval { k: i + 1 })
    }

    /// Appends `λ±` and `μ_j±` for the first `modes` eigenvalues at `chi`.
    pub fn record_chi(&mut self, lengths: &[f64], chi: f64, modes: usize) -> Result<(), StabilityError> {
        let (lambda_minus, lambda_plus) = lambda_pm(&self.equilibrium, chi)?;
        let mu = mu_spectrum(&self.equilibrium, lengths, chi, modes)?;
        self.records.push(ChiRecord {
            chi,
            lambda_minus,
            lambda_plus,
            mu,
        });
        Ok(())
    }

    /// CSV with header `k,sigma,multiplicity,chi_hat,proven`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "k,sigma,multiplicity,chi_hat,proven")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{:.16e},{},{:.16e},{}",
                r.k, r.sigma, r.multiplicity, r.chi_hat, r.proven
            )?;
        }
        Ok(())
    }
}

/// The first `count` thresholds on the `λ⁺` branch over the box `lengths`.
pub fn bifurcation_table(
    e: &EquilibriumInfo,
    lengths: &[f64],
    count: usize,
) -> Result<StabilityReport, StabilityError> {
    if count == 0 {
        return Err(StabilityError::OutOfRange("count must be >= 1".into()));
    }
    if lengths.is_empty() || lengths.iter().any(|&l| !(l > 0.0)) {
        return Err(StabilityError::OutOfRange(format!("bad lengths {lengths:?}")));
    }
    // Eigenvalues below the branch point yield no row, so widen the request
    // until enough rows are found.
    let mut want = count + 1;
    let rows = loop {
        let spectrum = analytic_neumann_spectrum(lengths, want);
        let rows: Vec<BifurcationRow> = spectrum
            .iter()
            .enumerate()
            .skip(1)
            .filter_map(|(k, ev)| {
                chi_hat(e, ev.sigma).ok().map(|chi_hat| BifurcationRow {
                    k,
                    sigma: ev.sigma,
                    multiplicity: ev.multiplicity,
                    chi_hat,
                    proven: ev.multiplicity % 2 == 1,
                })
            })
            .take(count)
            .collect();
        if rows.len() == count || want > count + 4096 {
            break rows;
        }
        want *= 2;
    };
    let pattern_intervals = rows
        .chunks_exact(2)
        .map(|pair| (pair[0].chi_hat, pair[1].chi_hat))
        .collect();
    let sigma_1 = analytic_neumann_spectrum(lengths, 2).get(1).map(|ev| ev.sigma);
    let chi_tilde_1 = match (e.chi_floor, e.branch_point(), sigma_1) {
        (Some(floor), Some(bp), Some(s1)) if s1 >= bp => Some(floor),
        _ => None,
    };
    Ok(StabilityReport {
        equilibrium: *e,
        rows,
        pattern_intervals,
        chi_tilde_1,
        records: Vec::new(),
    })
}

/// `μ_j± = λ±(χ)/σ_j` for the first `modes` distinct analytic eigenvalues,
/// starting with `σ₀ = 1`.
pub fn mu_spectrum(
    e: &EquilibriumInfo,
    lengths: &[f64],
    chi: f64,
    modes: usize,
) -> Result<Vec<MuPair>, StabilityError> {
    let sigmas: Vec<f64> = analytic_neumann_spectrum(lengths, modes)
        .into_iter()
        .map(|ev| ev.sigma)
        .collect();
    mu_for_sigmas(e, chi, &sigmas)
}

/// `μ_j± = λ±(χ)/σ_j` for explicitly given `σ_j`, such as discrete `σ^h`.
pub fn mu_for_sigmas(e: &EquilibriumInfo, chi: f64, sigmas: &[f64]) -> Result<Vec<MuPair>, StabilityError> {
    let (minus, plus) = lambda_pm(e, chi)?;
    Ok(sigmas
        .iter()
        .enumerate()
        .map(|(j, &sigma)| MuPair {
            j,
            sigma,
            mu_minus: minus / sigma,
            mu_plus: plus / sigma,
        })
        .collect())
}

/// Dense `(-Δ_h + I)⁻¹A(χ)` on a 1D grid, acting on `(u, v)` stacked as
/// `[u_0 .. u_{N-1}, v_0 .. v_{N-1}]`.
pub fn discrete_linearization(e: &EquilibriumInfo, grid: &Grid, chi: f64) -> Result<DMatrix<f64>, StabilityError> {
    let n = grid.cell_count();
    let k = shifted_laplacian_dense(grid);
    let k_inv = k
        .try_inverse()
        .ok_or_else(|| StabilityError::OutOfRange("(-Δ_h + I) not invertible".into()))?;
    let a = e.a_matrix(chi);
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for (bi, row) in a.iter().enumerate() {
        for (bj, &coef) in row.iter().enumerate() {
            if coef != 0.0 {
                out.view_mut((bi * n, bj * n), (n, n)).copy_from(&(&k_inv * coef));
            }
        }
    }
    Ok(out)
}

/// Dense `-Δ_h + I`.
pub fn shifted_laplacian_dense(grid: &Grid) -> DMatrix<f64> {
    let n = grid.cell_count();
    let mut k = DMatrix::identity(n, n);
    for (c, d, h) in grid.faces() {
        let w = 1.0 / (h * h);
        k[(c, c)] += w;
        k[(d, d)] += w;
        k[(c, d)] -= w;
        k[(d, c)] -= w;
    }
    k
}

/// A located zero of `det L(χ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularPoint {
    pub chi: f64,
    /// Smallest singular value of `L(χ) = I - (-Δ_h + I)⁻¹A(χ)` at `chi`.
    pub sigma_min: f64,
}

/// Sign of `det[(-Δ_h + I) - A(χ)] = det(-Δ_h + I) det L(χ)`; the first factor
/// is positive, so this is the sign of `det L(χ)`.
fn det_sign(e: &EquilibriumInfo, grid: &Grid, chi: f64) -> f64 {
    let n = grid.cell_count();
    let a = e.a_matrix(chi);
    // Interleave (u_c, v_c) so the matrix is banded.
    let mut m = BandMatrix::new(2 * n, 3, 3);
    for c in 0..n {
        m.add(2 * c, 2 * c, 1.0 - a[0][0]);
        m.add(2 * c, 2 * c + 1, -a[0][1]);
        m.add(2 * c + 1, 2 * c, -a[1][0]);
        m.add(2 * c + 1, 2 * c + 1, 1.0 - a[1][1]);
    }
    for (c, d, h) in grid.faces() {
        let w = 1.0 / (h * h);
        for s in 0..2 {
            m.add(2 * c + s, 2 * c + s, w);
            m.add(2 * d + s, 2 * d + s, w);
            m.add(2 * c + s, 2 * d + s, -w);
            m.add(2 * d + s, 2 * c + s, -w);
        }
    }
    match m.factor() {
        Ok(lu) => lu.log_det().0,
        Err(_) => 0.0,
    }
}

/// Locates the `χ` in `chi_range` where the discrete linearized stationary
/// operator is singular, by sign changes of its determinant on `n_points`
/// uniform samples refined by bisection.
pub fn singularity_scan(
    e: &EquilibriumInfo,
    grid: &Grid,
    chi_range: (f64, f64),
    n_points: usize,
) -> Result<Vec<SingularPoint>, StabilityError> {
    if grid.dim() != 1 {
        return Err(StabilityError::OutOfRange("singularity scan needs a 1D grid".into()));
    }
    let (lo, hi) = chi_range;
    if !(lo > 0.0 && hi > lo && n_points >= 2) {
        return Err(StabilityError::OutOfRange(format!(
            "bad scan range ({lo}, {hi}) with {n_points} points"
        )));
    }
    let chis: Vec<f64> = (0..n_points)
        .map(|i| lo + (hi - lo) * i as f64 / (n_points - 1) as f64)
        .collect();
    let signs: Vec<f64> = chis.par_iter().map(|&chi| det_sign(e, grid, chi)).collect();

    let brackets: Vec<(f64, f64, f64)> = (0..n_points - 1)
        .filter_map(|i| {
            if signs[i] == 0.0 {
                Some((chis[i], chis[i], 0.0))
            } else if signs[i] * signs[i + 1] < 0.0 {
                Some((chis[i], chis[i + 1], signs[i]))
            } else {
                None
            }
        })
        .collect();
    brackets
        .par_iter()
        .map(|&(mut a, mut b, sign_a)| {
            while b - a > SCAN_TOL {
                let mid = 0.5 * (a + b);
                let s = det_sign(e, grid, mid);
                if s == 0.0 {
                    a = mid;
                    b = mid;
                } else if s == sign_a {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            let chi = 0.5 * (a + b);
            Ok(SingularPoint {
                chi,
                sigma_min: smallest_singular_value(e, grid, chi)?,
            })
        })
        .collect()
}

fn smallest_singular_value(e: &EquilibriumInfo, grid: &Grid, chi: f64) -> Result<f64, StabilityError> {
    let b = discrete_linearization(e, grid, chi)?;
    let l = DMatrix::identity(b.nrows(), b.ncols()) - b;
    Ok(l.singular_values().iter().copied().fold(f64::INFINITY, f64::min))
}
