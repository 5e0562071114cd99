//! Cell-centered tensor grids with Neumann (mirror ghost) boundaries, the
//! Helmholtz solve `(-Δ_h + I) v = s`, and Neumann eigenpairs.
//!
//! Unknowns live at cell centers `(i + 1/2) h`. A ghost value mirrors the
//! adjacent interior cell, so boundary faces carry zero flux and every row of
//! the assembled `Δ_h` sums to zero.

use std::f64::consts::PI;
use std::io::{self, Write};

use thiserror::Error;

use crate::model::{pow, ModelParams};

/// Smallest admissible number of cells per axis.
pub const MIN_CELLS: usize = 8;

/// Relative residual at which the 2D conjugate-gradient solve stops.
pub const CG_RTOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid out of range: {0}")]
    OutOfRange(String),
    #[error("conjugate gradient did not converge in {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("v must be positive everywhere (v = {value} at cell {cell})")]
    NonpositiveV { cell: usize, value: f64 },
    #[error("field has a non-finite entry at cell {0}")]
    NonFinite(usize),
    #[error("field lives on a different grid")]
    GridMismatch,
}

/// Uniform cell-centered grid on `[0, L_x]` or `[0, L_x] x [0, L_y]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    n: [usize; 2],
    lengths: [f64; 2],
    h: [f64; 2],
}

impl Grid {
    pub fn new(lengths: &[f64], cells: &[usize]) -> Result<Self, GridError> {
        let dim = lengths.len();
        if !(dim == 1 || dim == 2) {
            return Err(GridError::OutOfRange(format!(
                "grids support dimension 1 or 2, got {dim}"
            )));
        }
        if cells.len() != dim {
            return Err(GridError::OutOfRange(format!(
                "{} resolutions given for dimension {dim}",
                cells.len()
            )));
        }
        let mut n = [1usize; 2];
        let mut l = [1.0; 2];
        let mut h = [1.0; 2];
        for axis in 0..dim {
            if cells[axis] < MIN_CELLS {
                return Err(GridError::OutOfRange(format!(
                    "{} cells on axis {axis}, need at least {MIN_CELLS}",
                    cells[axis]
                )));
            }
            if !(lengths[axis].is_finite() && lengths[axis] > 0.0) {
                return Err(GridError::OutOfRange(format!(
                    "length {} on axis {axis}",
                    lengths[axis]
                )));
            }
            n[axis] = cells[axis];
            l[axis] = lengths[axis];
            h[axis] = lengths[axis] / cells[axis] as f64;
        }
        Ok(Self {
            dim,
            n,
            lengths: l,
            h,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells_per_axis(&self) -> &[usize] {
        &self.n[..self.dim]
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths[..self.dim]
    }

    pub fn spacing(&self) -> &[f64] {
        &self.h[..self.dim]
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn cell_count(&self) -> usize {
        self.n[0] * self.n[1]
    }

    /// Midpoint quadrature weight `h_x (h_y)`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().iter().product()
    }

    pub fn measure(&self) -> f64 {
        self.lengths().iter().product()
    }

    /// Cell-center coordinates of cell `c` (second entry is 0 in 1D).
    pub fn center(&self, c: usize) -> [f64; 2] {
        let i = c % self.n[0];
        let j = c / self.n[0];
        [
            (i as f64 + 0.5) * self.h[0],
            if self.dim == 2 {
                (j as f64 + 0.5) * self.h[1]
            } else {
                0.0
            },
        ]
    }

    /// Interior faces as `(left cell, right cell, spacing across the face)`.
    pub fn faces(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let [nx, ny] = self.n;
        let x_faces = (0..ny).flat_map(move |j| (0..nx - 1).map(move |i| (i + nx * j, i + 1 + nx * j, self.h[0])));
        let y_faces = (0..ny.saturating_sub(1))
            .flat_map(move |j| (0..nx).map(move |i| (i + nx * j, i + nx * (j + 1), self.h[1])));
        x_faces.chain(y_faces)
    }

    pub fn face_count(&self) -> usize {
        let [nx, ny] = self.n;
        (nx - 1) * ny + if self.dim == 2 { nx * (ny - 1) } else { 0 }
    }

    /// `out = Δ_h x` with the mirror-ghost stencil.
    pub fn laplacian(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (c, d, h) in self.faces() {
            let flux = (x[d] - x[c]) / (h * h);
            out[c] += flux;
            out[d] -= flux;
        }
    }

    /// `out = x - coef Δ_h x`.
    pub fn apply_shifted(&self, coef: f64, x: &[f64], out: &mut [f64]) {
        self.laplacian(x, out);
        for (o, &xi) in out.iter_mut().zip(x) {
            *o = xi - coef * *o;
        }
    }

    pub fn field(&self, values: Vec<f64>) -> Result<Field, GridError> {
        Field::new(*self, values)
    }

    pub fn constant(&self, value: f64) -> Field {
        Field {
            grid: *self,
            values: vec![value; self.cell_count()],
        }
    }

    /// Field sampled from a function of the cell center.
    pub fn sample(&self, f: impl Fn([f64; 2]) -> f64) -> Field {
        Field {
            grid: *self,
            values: (0..self.cell_count()).map(|c| f(self.center(c))).collect(),
        }
    }
}

/// Builds the grid for the model domain with the given cells per axis.
pub fn make_grid(p: &ModelParams, cells: &[usize]) -> Result<Grid, GridError> {
    Grid::new(&p.lengths, cells)
}

/// Scalar values on the cells of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.cell_count() {
            return Err(GridError::OutOfRange(format!(
                "{} values for {} cells",
                values.len(),
                grid.cell_count()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Midpoint-rule integral.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn check_finite(&self) -> Result<(), GridError> {
        match self.values.iter().position(|x| !x.is_finite()) {
            Some(c) => Err(GridError::NonFinite(c)),
            None => Ok(()),
        }
    }

    /// Largest face-difference gradient magnitude `|v_d - v_c| / h`.
    pub fn max_face_gradient(&self) -> f64 {
        self.grid
            .faces()
            .map(|(c, d, h)| ((self.values[d] - self.values[c]) / h).abs())
            .fold(0.0, f64::max)
    }
}

/// One Neumann mode of the discrete operator.
#[derive(Debug, Clone, PartialEq)]
pub struct NeumannMode {
    pub index: [usize; 2],
    /// Eigenvalue of `-Δ_h + I` for this mode.
    pub sigma_h: f64,
}

impl NeumannMode {
    /// `prod_i cos(k_i π x_i / L_i)` sampled at cell centers.
    pub fn eigenfunction(&self, grid: &Grid) -> Field {
        let l = grid.lengths;
        let k = self.index;
        grid.sample(|x| {
            (k[0] as f64 * PI * x[0] / l[0]).cos() * (k[1] as f64 * PI * x[1] / l[1]).cos()
        })
    }
}

/// A continuum Neumann eigenvalue of `-Δ + I` with its modes.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    /// `1 + sum_i (k_i π / L_i)^2`
    pub sigma: f64,
    pub multiplicity: usize,
    pub modes: Vec<NeumannMode>,
}

fn tied(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

/// The first `count` distinct continuum eigenvalues of `-Δ + I` on the grid's
/// domain with the matching discrete eigenvalues `σ^h` of `-Δ_h + I`.
pub fn neumann_eigenvalues(grid: &Grid, count: usize) -> Result<Vec<EigenPair>, GridError> {
    if count > grid.cell_count() {
        return Err(GridError::OutOfRange(format!(
            "{count} eigenpairs requested on {} cells",
            grid.cell_count()
        )));
    }
    let [nx, ny] = grid.n;
    let mut modes: Vec<(f64, NeumannMode)> = Vec::with_capacity(grid.cell_count());
    for ky in 0..ny {
        for kx in 0..nx {
            let index = [kx, ky];
            let mut sigma = 1.0;
            let mut sigma_h = 1.0;
            for axis in 0..grid.dim {
                let (k, l, h) = (index[axis] as f64, grid.lengths[axis], grid.h[axis]);
                sigma += (k * PI / l).powi(2);
                sigma_h += 4.0 / (h * h) * (k * PI * h / (2.0 * l)).sin().powi(2);
            }
            modes.push((sigma, NeumannMode { index, sigma_h }));
        }
    }
    modes.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.index.cmp(&b.1.index)));
    let mut out: Vec<EigenPair> = Vec::new();
    for (sigma, mode) in modes {
        match out.last_mut() {
            Some(last) if tied(last.sigma, sigma) => {
                last.multiplicity += 1;
                last.modes.push(mode);
            }
            _ => {
                if out.len() == count {
                    break;
                }
                out.push(EigenPair {
                    sigma,
                    multiplicity: 1,
                    modes: vec![mode],
                });
            }
        }
    }
    Ok(out)
}

/// A distinct continuum eigenvalue on a box of any dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticEigenvalue {
    pub sigma: f64,
    pub multiplicity: usize,
    pub indices: Vec<Vec<usize>>,
}

/// First `count` distinct eigenvalues `1 + sum_i (k_i π / L_i)^2` on a box.
pub fn analytic_neumann_spectrum(lengths: &[f64], count: usize) -> Vec<AnalyticEigenvalue> {
    if count == 0 || lengths.is_empty() {
        return Vec::new();
    }
    // Along the longest axis alone there are `count` distinct values below this.
    let l_max = lengths.iter().copied().fold(0.0, f64::max);
    let bound = 1.0 + ((count - 1) as f64 * PI / l_max).powi(2);
    let kmax: Vec<usize> = lengths
        .iter()
        .map(|&l| ((bound - 1.0).sqrt() * l / PI).floor() as usize)
        .collect();
    let mut entries: Vec<(f64, Vec<usize>)> = Vec::new();
    let mut idx = vec![0usize; lengths.len()];
    loop {
        let sigma = 1.0
            + idx
                .iter()
                .zip(lengths)
                .map(|(&k, &l)| (k as f64 * PI / l).powi(2))
                .sum::<f64>();
        if sigma <= bound * (1.0 + 1e-12) {
            entries.push((sigma, idx.clone()));
        }
        let mut axis = 0;
        loop {
            if axis == idx.len() {
                entries.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let mut out: Vec<AnalyticEigenvalue> = Vec::new();
                for (sigma, index) in entries {
                    match out.last_mut() {
                        Some(last) if tied(last.sigma, sigma) => {
                            last.multiplicity += 1;
                            last.indices.push(index);
                        }
                        _ => out.push(AnalyticEigenvalue {
                            sigma,
                            multiplicity: 1,
                            indices: vec![index],
                        }),
                    }
                }
                out.truncate(count);
                return out;
            }
            if idx[axis] < kmax[axis] {
                idx[axis] += 1;
                break;
            }
            idx[axis] = 0;
            axis += 1;
        }
    }
}

/// Solves `x - coef Δ_h x = rhs`; tridiagonal elimination in 1D, conjugate
/// gradients in 2D. Returns the solution and the iteration count (0 in 1D).
///
/// The constant vector is an eigenvector with eigenvalue 1, so the mean of the
/// result is corrected to match `sum(rhs)` exactly.
pub fn solve_shifted(
    grid: &Grid,
    coef: f64,
    rhs: &[f64],
    guess: Option<&[f64]>,
) -> Result<(Vec<f64>, usize), GridError> {
    if let Some(c) = rhs.iter().position(|x| !x.is_finite()) {
        return Err(GridError::NonFinite(c));
    }
    let (mut x, iterations) = if grid.dim == 1 {
        (thomas_shifted(grid, coef, rhs), 0)
    } else {
        conjugate_gradient(grid, coef, rhs, guess)?
    };
    let n = x.len() as f64;
    let shift = (rhs.iter().sum::<f64>() - x.iter().sum::<f64>()) / n;
    x.iter_mut().for_each(|xi| *xi += shift);
    Ok((x, iterations))
}

fn thomas_shifted(grid: &Grid, coef: f64, rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    let off = -coef / (grid.h[0] * grid.h[0]);
    let diag = |i: usize| {
        let neighbours = if i == 0 || i == n - 1 { 1.0 } else { 2.0 };
        1.0 - off * neighbours
    };
    let mut c_prime = vec![0.0; n];
    let mut d_prime = vec![0.0; n];
    c_prime[0] = off / diag(0);
    d_prime[0] = rhs[0] / diag(0);
    for i in 1..n {
        let m = diag(i) - off * c_prime[i - 1];
        c_prime[i] = off / m;
        d_prime[i] = (rhs[i] - off * d_prime[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d_prime[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d_prime[i] - c_prime[i] * x[i + 1];
    }
    x
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn conjugate_gradient(
    grid: &Grid,
    coef: f64,
    rhs: &[f64],
    guess: Option<&[f64]>,
) -> Result<(Vec<f64>, usize), GridError> {
    let n = rhs.len();
    let b_norm = dot(rhs, rhs).sqrt();
    if b_norm == 0.0 {
        return Ok((vec![0.0; n], 0));
    }
    let mut x = match guess {
        Some(g) if g.len() == n => g.to_vec(),
        _ => rhs.to_vec(),
    };
    let mut ax = vec![0.0; n];
    grid.apply_shifted(coef, &x, &mut ax);
    let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let cap = 10 * n;
    let mut ap = vec![0.0; n];
    for it in 0..=cap {
        if rr.sqrt() <= CG_RTOL * b_norm {
            return Ok((x, it));
        }
        if it == cap {
            break;
        }
        grid.apply_shifted(coef, &p, &mut ap);
        let alpha = rr / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    Err(GridError::NoConvergence {
        iterations: cap,
        residual: rr.sqrt() / b_norm,
    })
}

/// `v` solving `(-Δ_h + I) v = source`.
pub fn solve_helmholtz(grid: &Grid, source: &Field) -> Result<Field, GridError> {
    solve_helmholtz_from(grid, source, None).map(|(v, _)| v)
}

/// [`solve_helmholtz`] with a warm start; also returns the CG iteration count.
pub fn solve_helmholtz_from(
    grid: &Grid,
    source: &Field,
    guess: Option<&Field>,
) -> Result<(Field, usize), GridError> {
    if source.grid != *grid {
        return Err(GridError::GridMismatch);
    }
    let (v, iterations) = solve_shifted(grid, 1.0, &source.values, guess.map(|g| g.values()))?;
    Ok((
        Field {
            grid: *grid,
            values: v,
        },
        iterations,
    ))
}

/// Residual of `∫|∇v|²/v² + β∫u^κ/v - |Ω|` with centered-difference gradients.
pub fn elliptic_identity_residual(
    u: &Field,
    v: &Field,
    beta: f64,
    kappa: f64,
) -> Result<f64, GridError> {
    check_positive(v)?;
    let grid = &v.grid;
    let [nx, ny] = grid.n;
    let vals = &v.values;
    let mut grad2 = vec![0.0; vals.len()];
    for j in 0..ny {
        for i in 0..nx {
            let c = i + nx * j;
            let left = if i == 0 { c } else { c - 1 };
            let right = if i + 1 == nx { c } else { c + 1 };
            let gx = (vals[right] - vals[left]) / (2.0 * grid.h[0]);
            grad2[c] += gx * gx;
            if grid.dim == 2 {
                let down = if j == 0 { c } else { c - nx };
                let up = if j + 1 == ny { c } else { c + nx };
                let gy = (vals[up] - vals[down]) / (2.0 * grid.h[1]);
                grad2[c] += gy * gy;
            }
        }
    }
    let vol = grid.cell_volume();
    let total: f64 = (0..vals.len())
        .map(|c| grad2[c] / (vals[c] * vals[c]) + beta * pow(u.values[c], kappa) / vals[c])
        .sum();
    Ok(total * vol - grid.measure())
}

/// Discrete form of the same identity obtained by summation by parts:
/// `Σ_faces (δv/h)² / (v_c v_d) + β Σ u^κ / v - |Ω|`, which vanishes to
/// solver precision whenever `(-Δ_h + I) v = β u^κ`.
pub fn elliptic_identity_residual_faces(
    u: &Field,
    v: &Field,
    beta: f64,
    kappa: f64,
) -> Result<f64, GridError> {
    check_positive(v)?;
    let grid = &v.grid;
    let vals = &v.values;
    let faces: f64 = grid
        .faces()
        .map(|(c, d, h)| {
            let g = (vals[d] - vals[c]) / h;
            g * g / (vals[c] * vals[d])
        })
        .sum();
    let source: f64 = vals
        .iter()
        .zip(&u.values)
        .map(|(&vc, &uc)| beta * pow(uc, kappa) / vc)
        .sum();
    Ok((faces + source) * grid.cell_volume() - grid.measure())
}

fn check_positive(v: &Field) -> Result<(), GridError> {
    match v.values.iter().position(|&x| !(x > 0.0)) {
        Some(cell) => Err(GridError::NonpositiveV {
            cell,
            value: v.values[cell],
        }),
        None => Ok(()),
    }
}

/// Writes a snapshot as CSV with header `x,u,v` (1D) or `x,y,u,v` (2D).
pub fn write_field_csv<W: Write>(mut out: W, u: &Field, v: &Field) -> io::Result<()> {
    let grid = u.grid;
    if grid.dim == 1 {
        writeln!(out, "x,u,v")?;
    } else {
        writeln!(out, "x,y,u,v")?;
    }
    for c in 0..grid.cell_count() {
        let x = grid.center(c);
        if grid.dim == 1 {
            writeln!(out, "{:.16e},{:.16e},{:.16e}", x[0], u.values[c], v.values[c])?;
        } else {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                x[0], x[1], u.values[c], v.values[c]
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn line(n: usize) -> Grid {
        Grid::new(&[PI], &[n]).unwrap()
    }

    fn assemble_shifted(grid: &Grid) -> DMatrix<f64> {
        let n = grid.cell_count();
        let mut m = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|x| *x = 0.0);
            e[j] = 1.0;
            grid.apply_shifted(1.0, &e, &mut col);
            for i in 0..n {
                m[(i, j)] = col[i];
            }
        }
        m
    }

    #[test]
    fn grid_geometry() {
        let g = line(8);
        assert_eq!(g.spacing(), &[PI / 8.0]);
        assert!((g.center(0)[0] - PI / 16.0).abs() < 1e-15);
        assert!((g.center(7)[0] - 15.0 * PI / 16.0).abs() < 1e-15);
        let sq = Grid::new(&[1.0, 1.0], &[16, 16]).unwrap();
        assert_eq!(sq.cell_count(), 256);
        assert_eq!(sq.faces().count(), sq.face_count());
        assert!(matches!(Grid::new(&[PI], &[4]), Err(GridError::OutOfRange(_))));
        assert!(Grid::new(&[1.0, 1.0, 1.0], &[8, 8, 8]).is_err());
    }

    #[test]
    fn eigenvalues_1d() {
        let g = line(256);
        let eig = neumann_eigenvalues(&g, 5).unwrap();
        let want = [1.0, 2.0, 5.0, 10.0, 17.0];
        for (e, w) in eig.iter().zip(want) {
            assert!((e.sigma - w).abs() < 1e-12);
            assert_eq!(e.multiplicity, 1);
        }
        let h = PI / 256.0;
        let s1 = 1.0 + 4.0 / (h * h) * (PI * h / (2.0 * PI)).sin().powi(2);
        assert!((eig[1].modes[0].sigma_h - s1).abs() < 1e-14);
        // sin² expansion: σ₁^h = 2 - h²/12 + O(h⁴).
        assert!((s1 - (2.0 - h * h / 12.0)).abs() < 1e-9);
        assert!((s1 - 1.999_987_45).abs() < 1e-8);
    }

    #[test]
    fn eigenvalues_match_dense_solver() {
        let g = line(256);
        let dense = assemble_shifted(&g).symmetric_eigen();
        let mut ev: Vec<f64> = dense.eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        let eig = neumann_eigenvalues(&g, 10).unwrap();
        for (k, e) in eig.iter().enumerate() {
            assert!((e.modes[0].sigma_h - ev[k]).abs() < 1e-10, "mode {k}");
        }
    }

    #[test]
    fn eigen_residuals_2d() {
        let g = Grid::new(&[PI, PI], &[16, 16]).unwrap();
        let eig = neumann_eigenvalues(&g, 6).unwrap();
        assert_eq!(eig[1].multiplicity, 2);
        assert!((eig[1].sigma - 2.0).abs() < 1e-12);
        let mut out = vec![0.0; g.cell_count()];
        for pair in &eig {
            for mode in &pair.modes {
                let e = mode.eigenfunction(&g);
                g.apply_shifted(1.0, e.values(), &mut out);
                let res = out
                    .iter()
                    .zip(e.values())
                    .map(|(a, b)| (a - mode.sigma_h * b).abs())
                    .fold(0.0, f64::max);
                assert!(res < 1e-10, "{:?}: {res}", mode.index);
            }
        }
        assert!(neumann_eigenvalues(&g, 257).is_err());
    }

    #[test]
    fn analytic_spectrum() {
        let s = analytic_neumann_spectrum(&[PI], 4);
        let sig: Vec<f64> = s.iter().map(|e| e.sigma).collect();
        assert_eq!(sig, vec![1.0, 2.0, 5.0, 10.0]);
        let sq = analytic_neumann_spectrum(&[PI, PI], 4);
        assert_eq!(sq[1].multiplicity, 2);
        assert!((sq[2].sigma - 3.0).abs() < 1e-12);
        assert_eq!(sq[3].multiplicity, 2);
        let cube = analytic_neumann_spectrum(&[PI, PI, PI], 2);
        assert_eq!(cube[1].multiplicity, 3);
    }

    #[test]
    fn helmholtz_constant_and_eigen_sources() {
        for g in [line(64), Grid::new(&[PI, 2.0], &[24, 16]).unwrap()] {
            let v = solve_helmholtz(&g, &g.constant(3.5)).unwrap();
            assert!(v.values().iter().all(|&x| (x - 3.5).abs() < 1e-12));
            let eig = neumann_eigenvalues(&g, 4).unwrap();
            let mode = &eig[3].modes[0];
            let e = mode.eigenfunction(&g);
            let v = solve_helmholtz(&g, &e).unwrap();
            let want = e.map(|x| x / mode.sigma_h);
            assert!(v.max_abs_diff(&want) < 1e-9);
        }
    }

    #[test]
    fn helmholtz_manufactured_order() {
        let err = |n: usize| {
            let g = line(n);
            let src = g.sample(|x| 2.0 * x[0].cos());
            let v = solve_helmholtz(&g, &src).unwrap();
            v.max_abs_diff(&g.sample(|x| x[0].cos()))
        };
        let (e128, e256) = (err(128), err(256));
        assert!(e256 < 4e-5, "{e256}");
        let ratio = e128 / e256;
        assert!((3.6..=4.4).contains(&ratio), "{ratio}");
    }

    #[test]
    fn helmholtz_compatibility_and_maximum_principle() {
        let g = Grid::new(&[PI, PI], &[32, 32]).unwrap();
        let src = g.sample(|x| 1.0 + (3.0 * x[0]).sin().powi(2) * (x[1] * 2.0).cos().abs());
        let v = solve_helmholtz(&g, &src).unwrap();
        let rel = (v.values().iter().sum::<f64>() - src.values().iter().sum::<f64>()).abs()
            / src.values().iter().sum::<f64>();
        assert!(rel < 1e-12, "{rel}");
        assert!(v.min() >= src.min() - 1e-12);
        assert!(v.max() <= src.max() + 1e-12);
    }

    #[test]
    fn helmholtz_rejects_nonfinite() {
        let g = line(8);
        let mut s = g.constant(1.0);
        s.values_mut()[3] = f64::NAN;
        assert_eq!(solve_helmholtz(&g, &s), Err(GridError::NonFinite(3)));
    }

    #[test]
    fn identity_residual_constant_state() {
        let g = line(32);
        let (beta, kappa, c) = (2.0, 1.5, 0.7_f64);
        let u = g.constant(c);
        let v = g.constant(beta * c.powf(kappa));
        assert!(elliptic_identity_residual(&u, &v, beta, kappa).unwrap().abs() < 1e-14);
        assert!(elliptic_identity_residual_faces(&u, &v, beta, kappa).unwrap().abs() < 1e-14);
        let mut bad = v.clone();
        bad.values_mut()[5] = 0.0;
        assert!(matches!(
            elliptic_identity_residual(&u, &bad, beta, kappa),
            Err(GridError::NonpositiveV { cell: 5, .. })
        ));
    }

    #[test]
    fn face_identity_is_exact_for_solved_v() {
        for g in [line(64), Grid::new(&[PI, PI], &[20, 20]).unwrap()] {
            let u = g.sample(|x| 1.0 + 0.5 * x[0].cos() + 0.2 * (2.0 * x[1]).cos());
            let v = solve_helmholtz(&g, &u.map(|x| 2.0 * x * x)).unwrap();
            let r = elliptic_identity_residual_faces(&u, &v, 2.0, 2.0).unwrap();
            assert!(r.abs() < 1e-8, "{r}");
        }
    }

    #[test]
    fn snapshot_csv_layout() {
        let g = Grid::new(&[1.0, 1.0], &[8, 8]).unwrap();
        let u = g.constant(1.0);
        let mut buf = Vec::new();
        write_field_csv(&mut buf, &u, &u).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x,y,u,v"));
        assert_eq!(lines.next(), Some("6.2500000000000000e-2,6.2500000000000000e-2,1.0000000000000000e0,1.0000000000000000e0"));
        assert_eq!(text.lines().count(), 65);
    }
}
