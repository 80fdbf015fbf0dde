//! Velocity moments, the LDG solve of the periodic 1D Poisson problem, and
//! electric-field evaluation.

use nalgebra::{DMatrix, DVector, LU, Dyn};
use rayon::prelude::*;

use crate::basis::{self, legendre};
use crate::dg_field::DGField;
use crate::error::{Error, Result};
use crate::quadrature::gauss;

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Points this close to a face (relative to `dx`) are treated as on it.
const FACE_TOLERANCE: f64 = 1e-12;

/// Periodic piecewise polynomial on `[0, lx]` with `nx` cells, orthonormal
/// Legendre coefficients `k + 1` per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Field1D {
    lx: f64,
    nx: usize,
    degree: usize,
    coeffs: Vec<f64>,
}

impl Field1D {
    pub fn zeros(lx: f64, nx: usize, degree: usize) -> Self {
        Self {
            lx,
            nx,
            degree,
            coeffs: vec![0.0; nx * (degree + 1)],
        }
    }

    /// L2 projection of `g` with a `degree + 2` point Gauss rule per cell.
    pub fn project<G: Fn(f64) -> f64>(lx: f64, nx: usize, degree: usize, g: G) -> Self {
        let mut out = Self::zeros(lx, nx, degree);
        let rule = gauss(degree + 2);
        let dx = lx / nx as f64;
        for i in 0..nx {
            let xc = (i as f64 + 0.5) * dx;
            for (&s, &w) in rule.nodes.iter().zip(&rule.weights) {
                let gv = g(xc + 0.5 * dx * s);
                for a in 0..=degree {
                    out.coeffs[i * (degree + 1) + a] += w * gv * legendre(a, s);
                }
            }
        }
        out
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn dx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn cell(&self, i: usize) -> &[f64] {
        let n = self.degree + 1;
        &self.coeffs[i * n..(i + 1) * n]
    }

    pub fn cell_mut(&mut self, i: usize) -> &mut [f64] {
        let n = self.degree + 1;
        &mut self.coeffs[i * n..(i + 1) * n]
    }

    /// Cell `i`'s expansion at reference coordinate `s`.
    #[inline]
    pub fn eval_local(&self, i: usize, s: f64) -> f64 {
        self.cell(i)
            .iter()
            .enumerate()
            .map(|(a, c)| c * legendre(a, s))
            .sum()
    }

    /// Point value; on a face (within `1e-12 dx`) the mean of both one-sided limits.
    pub fn eval(&self, x: f64) -> f64 {
        let dx = self.dx();
        let mut y = x.rem_euclid(self.lx);
        if y >= self.lx {
            y = 0.0;
        }
        let t = y / dx;
        let nearest = t.round();
        if (t - nearest).abs() * dx <= FACE_TOLERANCE * dx {
            let right = (nearest as usize) % self.nx;
            let left = (right + self.nx - 1) % self.nx;
            return 0.5 * (self.eval_local(left, 1.0) + self.eval_local(right, -1.0));
        }
        let i = (t.floor() as usize).min(self.nx - 1);
        let s = 2.0 * (y - (i as f64 + 0.5) * dx) / dx;
        self.eval_local(i, s)
    }

    /// `int_0^lx g`.
    pub fn integral(&self) -> f64 {
        let n = self.degree + 1;
        self.coeffs.iter().step_by(n).sum::<f64>() * SQRT2 * 0.5 * self.dx()
    }

    /// Removes the mean so that the integral vanishes.
    pub fn neutralized(&self) -> Self {
        let mean = self.integral() / self.lx;
        let mut out = self.clone();
        let n = self.degree + 1;
        for c in out.coeffs.iter_mut().step_by(n) {
            *c -= mean * SQRT2;
        }
        out
    }

    /// Largest magnitude over cell end points and interior Gauss nodes.
    pub fn max_abs(&self) -> f64 {
        let rule = gauss(self.degree + 2);
        let mut m: f64 = 0.0;
        for i in 0..self.nx {
            for s in rule.nodes.iter().chain(&[-1.0, 1.0]) {
                m = m.max(self.eval_local(i, *s).abs());
            }
        }
        m
    }

    /// L2 distance to `g`, evaluated with a high-order rule.
    pub fn l2_error_fn<G: Fn(f64) -> f64>(&self, g: G) -> f64 {
        let rule = gauss(self.degree + 4);
        let dx = self.dx();
        let mut s2 = 0.0;
        for i in 0..self.nx {
            let xc = (i as f64 + 0.5) * dx;
            for (&s, &w) in rule.nodes.iter().zip(&rule.weights) {
                s2 += w * (self.eval_local(i, s) - g(xc + 0.5 * dx * s)).powi(2);
            }
        }
        (0.5 * dx * s2).sqrt()
    }

    fn scaled_add(&mut self, other: &Field1D, a: f64) {
        for (x, y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *x += a * y;
        }
    }
}

/// `int f dv - 1` per x-cell, before neutralization.
pub fn charge_density_raw(f: &DGField) -> Field1D {
    let mesh = f.mesh();
    let k = f.degree();
    let mut rho = Field1D::zeros(mesh.lx(), mesh.nx(), k);
    let w = 0.5 * mesh.dv() * SQRT2;
    for i in 0..mesh.nx() {
        let out = rho.cell_mut(i);
        for j in 0..mesh.nv() {
            let c = f.cell(i, j);
            for (m, &cm) in c.iter().enumerate() {
                let (a, b) = basis::pair(m);
                if b == 0 {
                    out[a] += w * cm;
                }
            }
        }
        out[0] -= SQRT2;
    }
    rho
}

/// Charge density with its mean removed.
pub fn charge_density(f: &DGField) -> Field1D {
    charge_density_raw(f).neutralized()
}

/// `J(x) = int f v dv` per x-cell.
pub fn current_density(f: &DGField) -> Field1D {
    let mesh = f.mesh();
    let k = f.degree();
    let mut jf = Field1D::zeros(mesh.lx(), mesh.nx(), k);
    let h = 0.5 * mesh.dv();
    let c1 = (2.0f64 / 3.0).sqrt();
    for i in 0..mesh.nx() {
        let out = jf.cell_mut(i);
        for j in 0..mesh.nv() {
            let vc = mesh.v_center(j as i64);
            for (m, &cm) in f.cell(i, j).iter().enumerate() {
                match basis::pair(m) {
                    (a, 0) => out[a] += h * vc * SQRT2 * cm,
                    (a, 1) => out[a] += h * h * c1 * cm,
                    _ => {}
                }
            }
        }
    }
    jf
}

/// Spatial mean of the current density.
pub fn jbar0(f: &DGField) -> f64 {
    let j = current_density(f);
    j.integral() / j.lx()
}

/// LDG discretization of `-phi'' = rho` with periodic boundaries, factored
/// once for a given mesh and degree.
///
/// Unknowns per cell are the coefficients of `phi` and `q = phi'`; fluxes are
/// `phi_hat = phi^-` and `q_hat = q^+`. The cell-0 mean equation of the
/// `q`-balance is redundant and is replaced by `int phi = 0`.
#[derive(Debug, Clone)]
pub struct PoissonSolver {
    lx: f64,
    nx: usize,
    degree: usize,
    lu: LU<f64, Dyn, Dyn>,
}

impl PoissonSolver {
    pub fn new(lx: f64, nx: usize, degree: usize) -> Result<Self> {
        basis::check_degree(degree)?;
        if nx == 0 || !(lx > 0.0) {
            return Err(Error::InvalidMesh("Poisson solver needs nx >= 1 and lx > 0".into()));
        }
        let n = degree + 1;
        let size = 2 * nx * n;
        let dx = lx / nx as f64;
        let phi = |i: usize, a: usize| i * n + a;
        let q = |i: usize, a: usize| nx * n + i * n + a;
        let ends = |a: usize, s: f64| legendre(a, s);
        // S[r][a] = int L_a L_r' ds
        let rule = gauss(n + 1);
        let mut stiff = [[0.0; 3]; 3];
        for r in 0..n {
            for a in 0..n {
                stiff[r][a] = rule
                    .nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(&s, &w)| w * legendre(a, s) * basis::legendre_derivative(r, s))
                    .sum();
            }
        }
        let mut m = DMatrix::<f64>::zeros(size, size);
        for i in 0..nx {
            let left = (i + nx - 1) % nx;
            let right = (i + 1) % nx;
            for r in 0..n {
                // (dx/2) q_r + int phi L_r' - phi_i(1) L_r(1) + phi_{i-1}(1) L_r(-1) = 0
                let row = phi(i, r);
                m[(row, q(i, r))] += 0.5 * dx;
                for a in 0..n {
                    m[(row, phi(i, a))] += stiff[r][a];
                    m[(row, phi(i, a))] -= ends(a, 1.0) * ends(r, 1.0);
                    m[(row, phi(left, a))] += ends(a, 1.0) * ends(r, -1.0);
                }
                // int q L_r' - q_{i+1}(-1) L_r(1) + q_i(-1) L_r(-1) = (dx/2) rho_r
                let row = q(i, r);
                if i == 0 && r == 0 {
                    for j in 0..nx {
                        m[(row, phi(j, 0))] = 1.0;
                    }
                    continue;
                }
                for a in 0..n {
                    m[(row, q(i, a))] += stiff[r][a];
                    m[(row, q(right, a))] -= ends(a, -1.0) * ends(r, 1.0);
                    m[(row, q(i, a))] += ends(a, -1.0) * ends(r, -1.0);
                }
            }
        }
        let lu = m.lu();
        if !lu.is_invertible() {
            return Err(Error::Singular("LDG Poisson matrix".into()));
        }
        Ok(Self { lx, nx, degree, lu })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    /// Returns `(phi, E)` for a mean-zero `rho` of the solver's degree.
    pub fn solve(&self, rho: &Field1D) -> Result<(Field1D, Field1D)> {
        if rho.nx != self.nx || rho.degree != self.degree {
            return Err(Error::FieldMismatch(format!(
                "rho has nx={} k={}, solver has nx={} k={}",
                rho.nx, rho.degree, self.nx, self.degree
            )));
        }
        let n = self.degree + 1;
        let dx = self.lx / self.nx as f64;
        let mut b = DVector::<f64>::zeros(2 * self.nx * n);
        for i in 0..self.nx {
            for r in 0..n {
                b[self.nx * n + i * n + r] = 0.5 * dx * rho.cell(i)[r];
            }
        }
        b[self.nx * n] = 0.0;
        let x = self
            .lu
            .solve(&b)
            .ok_or_else(|| Error::Singular("LDG Poisson solve".into()))?;
        let mut phi = Field1D::zeros(self.lx, self.nx, self.degree);
        let mut e = Field1D::zeros(self.lx, self.nx, self.degree);
        for idx in 0..self.nx * n {
            phi.coeffs[idx] = x[idx];
            e.coeffs[idx] = -x[self.nx * n + idx];
        }
        Ok((phi, e))
    }
}

/// Electric field and the moments it was computed from.
#[derive(Debug, Clone)]
pub struct ElectricField1D {
    pub e: Field1D,
    pub phi: Field1D,
    /// Neutralized charge density used by the solve.
    pub rho: Field1D,
    /// `int f dv - 1` without mean removal.
    pub rho_raw: Field1D,
    pub current: Field1D,
    pub jbar0: f64,
}

impl ElectricField1D {
    /// Moments of `f`, then the Poisson solve. `f` may have a lower degree
    /// than the solver; its moments are padded.
    pub fn from_distribution(f: &DGField, solver: &PoissonSolver, jbar0: f64) -> Result<Self> {
        let rho_raw = pad(&charge_density_raw(f), solver.degree());
        let current = pad(&current_density(f), solver.degree());
        let rho = rho_raw.neutralized();
        let (phi, e) = solver.solve(&rho)?;
        Ok(Self {
            e,
            phi,
            rho,
            rho_raw,
            current,
            jbar0,
        })
    }

    /// Identically zero field and moments, for free streaming.
    pub fn zero(lx: f64, nx: usize, degree: usize) -> Self {
        let z = Field1D::zeros(lx, nx, degree);
        Self {
            e: z.clone(),
            phi: z.clone(),
            rho: z.clone(),
            rho_raw: z.clone(),
            current: z,
            jbar0: 0.0,
        }
    }

    /// `E(x)`, face-averaged.
    #[inline]
    pub fn eval_e(&self, x: f64) -> f64 {
        self.e.eval(x)
    }

    /// `dE/dt` along a characteristic: `jbar0 - J(x) + v rho(x)` with the
    /// neutralized density the field was solved from.
    pub fn material_derivative(&self, x: f64, v: f64) -> f64 {
        self.jbar0 - self.current.eval(x) + v * self.rho.eval(x)
    }

    pub fn max_abs_e(&self) -> f64 {
        self.e.max_abs()
    }

    /// `int E^2 dx`.
    pub fn e_energy(&self) -> f64 {
        self.e.coeffs.iter().map(|c| c * c).sum::<f64>() * 0.5 * self.e.dx()
    }
}

fn pad(g: &Field1D, degree: usize) -> Field1D {
    if g.degree == degree {
        return g.clone();
    }
    let mut out = Field1D::zeros(g.lx, g.nx, degree);
    let keep = g.degree.min(degree) + 1;
    for i in 0..g.nx {
        out.cell_mut(i)[..keep].copy_from_slice(&g.cell(i)[..keep]);
    }
    out
}

/// Material derivative from explicit pieces, for callers holding separate fields.
pub fn material_derivative_e(rho: &Field1D, current: &Field1D, jbar0: f64, x: f64, v: f64) -> f64 {
    jbar0 - current.eval(x) + v * rho.eval(x)
}

/// Parallel evaluation of `E` at many points.
pub fn eval_e_many(field: &ElectricField1D, xs: &[f64]) -> Vec<f64> {
    xs.par_iter().map(|&x| field.eval_e(x)).collect()
}

/// `a * g + b * h` for fields on the same grid.
pub fn combine(g: &Field1D, a: f64, h: &Field1D, b: f64) -> Field1D {
    let mut out = g.clone();
    for c in out.coeffs.iter_mut() {
        *c *= a;
    }
    out.scaled_add(h, b);
    out
}
