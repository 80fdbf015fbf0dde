//! Piecewise-polynomial representation of the distribution function.

use rayon::prelude::*;

use crate::basis::{self, n_basis, PHI0};
use crate::error::{Error, Result};
use crate::mesh::{Location, PhaseMesh};
use crate::quadrature::gauss;

/// Averages at or above this (negative) value are treated as round-off of a
/// vacuum cell by the positivity limiter instead of a violated precondition.
pub const NEGATIVE_AVERAGE_TOLERANCE: f64 = 1e-12;

/// Degree-`k` DG field on a [`PhaseMesh`]: `nb = (k+1)(k+2)/2` coefficients
/// per cell on the orthonormal Legendre basis, stored cell after cell.
#[derive(Debug, Clone, PartialEq)]
pub struct DGField {
    mesh: PhaseMesh,
    degree: usize,
    coeffs: Vec<f64>,
}

impl DGField {
    pub fn zeros(mesh: &PhaseMesh, degree: usize) -> Result<Self> {
        basis::check_degree(degree)?;
        Ok(Self {
            mesh: mesh.clone(),
            degree,
            coeffs: vec![0.0; mesh.n_cells() * n_basis(degree)],
        })
    }

    pub fn from_coeffs(mesh: &PhaseMesh, degree: usize, coeffs: Vec<f64>) -> Result<Self> {
        basis::check_degree(degree)?;
        let expected = mesh.n_cells() * n_basis(degree);
        if coeffs.len() != expected {
            return Err(Error::FieldMismatch(format!(
                "expected {expected} coefficients, got {}",
                coeffs.len()
            )));
        }
        Ok(Self {
            mesh: mesh.clone(),
            degree,
            coeffs,
        })
    }

    /// L2 projection of `f` onto piecewise polynomials of degree `degree`,
    /// using a tensor Gauss rule with `(degree + 2)^2` nodes per cell.
    pub fn project<F>(mesh: &PhaseMesh, degree: usize, f: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Sync,
    {
        let mut field = Self::zeros(mesh, degree)?;
        let nb = n_basis(degree);
        let rule = gauss(degree + 2);
        let nx = mesh.nx();
        field
            .coeffs
            .par_chunks_mut(nb)
            .enumerate()
            .for_each(|(flat, c)| {
                let (i, j) = ((flat % nx) as i64, (flat / nx) as i64);
                let mut phi = [0.0; 6];
                for (a, &xi) in rule.nodes.iter().enumerate() {
                    let x = mesh.x_center(i) + 0.5 * mesh.dx() * xi;
                    for (b, &eta) in rule.nodes.iter().enumerate() {
                        let v = mesh.v_center(j) + 0.5 * mesh.dv() * eta;
                        let w = rule.weights[a] * rule.weights[b] * f(x, v);
                        basis::eval_all(degree, xi, eta, &mut phi);
                        for m in 0..nb {
                            c[m] += w * phi[m];
                        }
                    }
                }
            });
        Ok(field)
    }

    pub fn mesh(&self) -> &PhaseMesh {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_basis(&self) -> usize {
        n_basis(self.degree)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    #[inline]
    pub fn cell(&self, i: usize, j: usize) -> &[f64] {
        let nb = self.n_basis();
        let s = self.mesh.flat(i, j) * nb;
        &self.coeffs[s..s + nb]
    }

    #[inline]
    pub fn cell_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let nb = self.n_basis();
        let s = self.mesh.flat(i, j) * nb;
        &mut self.coeffs[s..s + nb]
    }

    /// Value of the expansion of cell `(i, j)` at reference point `(xi, eta)`.
    #[inline]
    pub fn eval_reference(&self, i: usize, j: usize, xi: f64, eta: f64) -> f64 {
        let c = self.cell(i, j);
        let mut phi = [0.0; 6];
        basis::eval_all(self.degree, xi, eta, &mut phi);
        c.iter().zip(&phi).map(|(a, b)| a * b).sum()
    }

    /// Value of the expansion of cell `(i, j)` at `(x, v)`, which need not
    /// lie inside the cell (one-sided limits on faces).
    pub fn evaluate_in_cell(&self, i: usize, j: usize, x: f64, v: f64) -> f64 {
        let x = self.mesh.wrap_x(x);
        // pick the periodic image of x closest to the cell
        let xc = self.mesh.x_center(i as i64);
        let mut dxr = x - xc;
        let lx = self.mesh.lx();
        if dxr > 0.5 * lx {
            dxr -= lx;
        } else if dxr < -0.5 * lx {
            dxr += lx;
        }
        let xi = 2.0 * dxr / self.mesh.dx();
        let eta = 2.0 * (v - self.mesh.v_center(j as i64)) / self.mesh.dv();
        self.eval_reference(i, j, xi, eta)
    }

    /// Point value; zero outside the velocity domain.
    pub fn evaluate(&self, x: f64, v: f64) -> f64 {
        match self.mesh.locate_cell(x, v) {
            Location::OutsideV => 0.0,
            Location::Inside(i, j) => self.evaluate_in_cell(i, j, x, v),
        }
    }

    #[inline]
    pub fn cell_average(&self, i: usize, j: usize) -> f64 {
        self.cell(i, j)[0] * PHI0
    }

    /// `sum over cells of average * area`.
    pub fn mass(&self) -> f64 {
        let nb = self.n_basis();
        self.coeffs.iter().step_by(nb).sum::<f64>() * PHI0 * self.mesh.cell_area()
    }

    /// Quadrature of `g(x, v, f(x, v))` over the domain with `(k+2)^2` nodes per cell.
    pub fn integrate_with<G>(&self, g: G) -> f64
    where
        G: Fn(f64, f64, f64) -> f64 + Sync,
    {
        let rule = gauss(self.degree + 2);
        let jac = 0.25 * self.mesh.cell_area();
        let nx = self.mesh.nx();
        // fixed-order reduction: per-row partial sums, then summed serially
        let rows: Vec<f64> = (0..self.mesh.nv())
            .into_par_iter()
            .map(|j| {
                let mut s = 0.0;
                for i in 0..nx {
                    let xc = self.mesh.x_center(i as i64);
                    let vc = self.mesh.v_center(j as i64);
                    for (a, &xi) in rule.nodes.iter().enumerate() {
                        for (b, &eta) in rule.nodes.iter().enumerate() {
                            let f = self.eval_reference(i, j, xi, eta);
                            let x = xc + 0.5 * self.mesh.dx() * xi;
                            let v = vc + 0.5 * self.mesh.dv() * eta;
                            s += rule.weights[a] * rule.weights[b] * g(x, v, f);
                        }
                    }
                }
                s
            })
            .collect();
        rows.iter().sum::<f64>() * jac
    }

    /// `(int |f|^p)^(1/p)` for `p` in `{1, 2}`.
    pub fn lp_norm(&self, p: u32) -> f64 {
        match p {
            1 => self.integrate_with(|_, _, f| f.abs()),
            2 => self.integrate_with(|_, _, f| f * f).sqrt(),
            _ => self
                .integrate_with(|_, _, f| f.abs().powi(p as i32))
                .powf(1.0 / p as f64),
        }
    }

    fn check_compatible(&self, other: &DGField) -> Result<()> {
        if self.mesh != other.mesh {
            return Err(Error::FieldMismatch("fields live on different meshes".into()));
        }
        if self.degree != other.degree {
            return Err(Error::FieldMismatch(format!(
                "degree {} vs {}",
                self.degree, other.degree
            )));
        }
        Ok(())
    }

    /// `(int (a - b)^2)^(1/2)` evaluated at the quadrature nodes.
    pub fn l2_error(&self, other: &DGField) -> Result<f64> {
        self.check_compatible(other)?;
        let diff = self.difference(other);
        Ok(diff.integrate_with(|_, _, f| f * f).sqrt())
    }

    /// Maximum pointwise difference over the quadrature nodes.
    pub fn linf_error(&self, other: &DGField) -> Result<f64> {
        self.check_compatible(other)?;
        let diff = self.difference(other);
        Ok(diff.max_abs_at_nodes(|_, _| 0.0))
    }

    /// L2 distance to an exact function, at the quadrature nodes.
    pub fn l2_error_fn<F>(&self, exact: F) -> f64
    where
        F: Fn(f64, f64) -> f64 + Sync,
    {
        self.integrate_with(|x, v, f| (f - exact(x, v)).powi(2)).sqrt()
    }

    /// Max distance to an exact function over the quadrature nodes.
    pub fn linf_error_fn<F>(&self, exact: F) -> f64
    where
        F: Fn(f64, f64) -> f64 + Sync,
    {
        self.max_abs_at_nodes(exact)
    }

    fn max_abs_at_nodes<F>(&self, exact: F) -> f64
    where
        F: Fn(f64, f64) -> f64 + Sync,
    {
        let rule = gauss(self.degree + 2);
        let nx = self.mesh.nx();
        (0..self.mesh.n_cells())
            .into_par_iter()
            .map(|flat| {
                let (i, j) = (flat % nx, flat / nx);
                let mut m: f64 = 0.0;
                for &xi in &rule.nodes {
                    for &eta in &rule.nodes {
                        let x = self.mesh.x_center(i as i64) + 0.5 * self.mesh.dx() * xi;
                        let v = self.mesh.v_center(j as i64) + 0.5 * self.mesh.dv() * eta;
                        m = m.max((self.eval_reference(i, j, xi, eta) - exact(x, v)).abs());
                    }
                }
                m
            })
            .reduce(|| 0.0, f64::max)
    }

    fn difference(&self, other: &DGField) -> DGField {
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a - b)
            .collect();
        DGField {
            mesh: self.mesh.clone(),
            degree: self.degree,
            coeffs,
        }
    }

    /// `a * self + b * other`.
    pub fn linear_combination(&self, a: f64, other: &DGField, b: f64) -> Result<DGField> {
        self.check_compatible(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(DGField {
            mesh: self.mesh.clone(),
            degree: self.degree,
            coeffs,
        })
    }

    /// Same field expressed with degree `k`: truncation is the L2 projection
    /// onto the lower degree, raising pads with zeros.
    pub fn with_degree(&self, k: usize) -> Result<DGField> {
        basis::check_degree(k)?;
        if k == self.degree {
            return Ok(self.clone());
        }
        let (nb_old, nb_new) = (self.n_basis(), n_basis(k));
        let mut out = DGField::zeros(&self.mesh, k)?;
        let keep = nb_old.min(nb_new);
        for (dst, src) in out
            .coeffs
            .chunks_mut(nb_new)
            .zip(self.coeffs.chunks(nb_old))
        {
            dst[..keep].copy_from_slice(&src[..keep]);
        }
        Ok(out)
    }

    /// `f(x, v) -> f(x, -v)`: rows are mirrored and odd-in-`v` modes negated.
    pub fn flip_velocity(&self) -> DGField {
        let nb = self.n_basis();
        let (nx, nv) = (self.mesh.nx(), self.mesh.nv());
        let mut out = self.clone();
        for j in 0..nv {
            for i in 0..nx {
                let src = self.cell(i, nv - 1 - j);
                let dst = &mut out.coeffs[self.mesh.flat(i, j) * nb..][..nb];
                for m in 0..nb {
                    let (_, b) = basis::pair(m);
                    dst[m] = if b % 2 == 1 { -src[m] } else { src[m] };
                }
            }
        }
        out
    }

    /// Smallest value of the polynomial of cell `(i, j)` over its closure,
    /// checking the points the positivity limiter is defined on.
    pub fn cell_minimum(&self, i: usize, j: usize) -> f64 {
        cell_minimum(self.degree, self.cell(i, j))
    }

    /// Smallest value over all cells.
    pub fn minimum(&self) -> f64 {
        let nx = self.mesh.nx();
        (0..self.mesh.n_cells())
            .into_par_iter()
            .map(|flat| self.cell_minimum(flat % nx, flat / nx))
            .reduce(|| f64::INFINITY, f64::min)
    }

    /// Positivity-preserving scaling about the cell average,
    /// `f -> theta (f - avg) + avg`, `theta = min(|avg / (m - avg)|, 1)`.
    ///
    /// Returns the number of cells that were modified.
    pub fn apply_pp_limiter(&mut self) -> Result<usize> {
        let nb = self.n_basis();
        let degree = self.degree;
        let nx = self.mesh.nx();
        let results: Vec<Result<bool>> = self
            .coeffs
            .par_chunks_mut(nb)
            .enumerate()
            .map(|(flat, c)| limit_cell(degree, c).map_err(|avg| Error::NegativeAverage {
                i: flat % nx,
                j: flat / nx,
                average: avg,
            }))
            .collect();
        let mut changed = 0;
        for r in results {
            if r? {
                changed += 1;
            }
        }
        Ok(changed)
    }

    /// Non-mutating form of [`DGField::apply_pp_limiter`].
    pub fn pp_limited(&self) -> Result<DGField> {
        let mut out = self.clone();
        out.apply_pp_limiter()?;
        Ok(out)
    }

    /// `(x, v, f)` at every cell center, rows of increasing `v`.
    pub fn cell_center_samples(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::with_capacity(self.mesh.n_cells());
        for j in 0..self.mesh.nv() {
            for i in 0..self.mesh.nx() {
                out.push((
                    self.mesh.x_center(i as i64),
                    self.mesh.v_center(j as i64),
                    self.eval_reference(i, j, 0.0, 0.0),
                ));
            }
        }
        out
    }
}

/// Limits one cell in place. `Ok(true)` when the cell changed; `Err(avg)`
/// when the average is below the tolerated negative round-off.
fn limit_cell(degree: usize, c: &mut [f64]) -> std::result::Result<bool, f64> {
    if degree == 0 {
        return if c[0] * PHI0 < -NEGATIVE_AVERAGE_TOLERANCE {
            Err(c[0] * PHI0)
        } else {
            Ok(false)
        };
    }
    let avg = c[0] * PHI0;
    if avg < -NEGATIVE_AVERAGE_TOLERANCE {
        return Err(avg);
    }
    let m = cell_minimum(degree, c);
    if m >= 0.0 {
        return Ok(false);
    }
    let theta = if avg <= 0.0 {
        0.0
    } else {
        (avg / (m - avg)).abs().min(1.0)
    };
    for x in c[1..].iter_mut() {
        *x *= theta;
    }
    Ok(theta < 1.0)
}

/// Monomial coefficients `[1, X, V, X^2, XV, V^2]` of a cell expansion.
fn monomials(degree: usize, c: &[f64]) -> [f64; 6] {
    let mut out = [0.0; 6];
    for (m, &cm) in c.iter().enumerate().take(n_basis(degree)) {
        let p = basis::as_poly(m);
        out[0] += cm * p.coeff(0, 0);
        out[1] += cm * p.coeff(1, 0);
        out[2] += cm * p.coeff(0, 1);
        out[3] += cm * p.coeff(2, 0);
        out[4] += cm * p.coeff(1, 1);
        out[5] += cm * p.coeff(0, 2);
    }
    out
}

fn quad_eval(a: &[f64; 6], x: f64, v: f64) -> f64 {
    a[0] + a[1] * x + a[2] * v + a[3] * x * x + a[4] * x * v + a[5] * v * v
}

/// Minimum of a cell polynomial over the reference square. Degree 1 uses the
/// vertices; degree 2 adds edge extrema and the interior stationary point, or
/// a 5x5 sample grid when the Hessian is singular.
pub fn cell_minimum(degree: usize, c: &[f64]) -> f64 {
    if degree == 0 {
        return c[0] * PHI0;
    }
    let a = monomials(degree, c);
    let mut m = f64::INFINITY;
    for &x in &[-1.0, 1.0] {
        for &v in &[-1.0, 1.0] {
            m = m.min(quad_eval(&a, x, v));
        }
    }
    if degree == 1 {
        return m;
    }
    // edges X = +-1: stationary in V where a2 + a4 X + 2 a5 V = 0
    if a[5] != 0.0 {
        for &x in &[-1.0, 1.0] {
            let v = -(a[2] + a[4] * x) / (2.0 * a[5]);
            if v.abs() < 1.0 {
                m = m.min(quad_eval(&a, x, v));
            }
        }
    }
    if a[3] != 0.0 {
        for &v in &[-1.0, 1.0] {
            let x = -(a[1] + a[4] * v) / (2.0 * a[3]);
            if x.abs() < 1.0 {
                m = m.min(quad_eval(&a, x, v));
            }
        }
    }
    let det = 4.0 * a[3] * a[5] - a[4] * a[4];
    let scale = (a[3].abs() + a[4].abs() + a[5].abs()).powi(2);
    if det.abs() > 1e-12 * scale && scale > 0.0 {
        let x = (-2.0 * a[5] * a[1] + a[4] * a[2]) / det;
        let v = (-2.0 * a[3] * a[2] + a[4] * a[1]) / det;
        if x.abs() < 1.0 && v.abs() < 1.0 {
            m = m.min(quad_eval(&a, x, v));
        }
    } else {
        for p in 0..5 {
            for q in 0..5 {
                let x = -1.0 + 0.5 * p as f64;
                let v = -1.0 + 0.5 * q as f64;
                m = m.min(quad_eval(&a, x, v));
            }
        }
    }
    m
}
