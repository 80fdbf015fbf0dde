//! Semi-Lagrangian update: the new coefficients of each Eulerian cell are the
//! integrals of `f^n` against the upstream test functions, evaluated sub-area
//! by sub-area as line integrals.

use nalgebra::{DMatrix, SMatrix};
use rayon::prelude::*;

use crate::basis::{self, PHI0};
use crate::clipper::{decompose, Decomposition, SegmentGeom, SubArea};
use crate::dg_field::DGField;
use crate::error::{Error, Result};
use crate::mesh::PhaseMesh;
use crate::poly::Poly2;
use crate::quadrature::{gauss, nodes_for_degree};
use crate::tracer::{GeometryStats, UpstreamCell, CORNERS, LAYOUT};

/// Local coordinates around an upstream cell:
/// `X = (x - xc) / hx`, `V = (v - vc) / hv` with `hx, hv` the Eulerian half
/// widths, so integrals in `(X, V)` are already divided by the cell Jacobian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub xc: f64,
    pub vc: f64,
    pub hx: f64,
    pub hv: f64,
}

impl Frame {
    pub fn of(mesh: &PhaseMesh, up: &UpstreamCell) -> Self {
        let (xc, vc) = up.corner_centroid();
        Self {
            xc,
            vc,
            hx: 0.5 * mesh.dx(),
            hv: 0.5 * mesh.dv(),
        }
    }

    #[inline]
    pub fn local(&self, x: f64, v: f64) -> (f64, f64) {
        ((x - self.xc) / self.hx, (v - self.vc) / self.hv)
    }
}

/// Upstream images `psi*` of the basis functions of one Eulerian cell, as
/// polynomials in the cell's `Frame`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunctionStar {
    pub cell: (usize, usize),
    pub frame: Frame,
    pub polys: Vec<Poly2>,
}

const MONOMIALS: [(usize, usize); 6] = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)];

/// Least-squares fit of `psi*_m` of total degree `degree` to
/// `psi*(traced point) = Psi_m(source point)`: the four corners for degree 1,
/// all nine layout points for degree 2.
pub fn reconstruct_psi_star(up: &UpstreamCell, frame: Frame, degree: usize) -> Result<TestFunctionStar> {
    basis::check_degree(degree)?;
    let nb = basis::n_basis(degree);
    if degree == 0 {
        return Ok(TestFunctionStar {
            cell: up.cell,
            frame,
            polys: vec![Poly2::constant(PHI0)],
        });
    }
    let ids: &[usize] = if degree == 1 {
        &CORNERS
    } else {
        if up.n_points != 9 {
            return Err(Error::Config("quadratic test functions need nine traced points".into()));
        }
        &[0, 1, 2, 3, 4, 5, 6, 7, 8]
    };
    let (i, j) = up.cell;
    let a = DMatrix::from_fn(ids.len(), nb, |r, c| {
        let (x, v) = up.points[ids[r]];
        let (x, v) = frame.local(x, v);
        let (p, q) = MONOMIALS[c];
        x.powi(p as i32) * v.powi(q as i32)
    });
    let b = DMatrix::from_fn(ids.len(), nb, |r, m| {
        let (xi, eta) = LAYOUT[ids[r]];
        basis::eval(m, xi, eta)
    });
    let normal = a.transpose() * &a;
    let scale = normal.diagonal().max();
    let chol = normal.cholesky().ok_or_else(|| Error::DistortedCell {
        i,
        j,
        reason: "test-function fit is rank deficient".into(),
    })?;
    let lmin = chol.l_dirty().diagonal().min();
    if !(lmin * lmin > 1e-12 * scale) {
        return Err(Error::DistortedCell {
            i,
            j,
            reason: "test-function fit is nearly rank deficient".into(),
        });
    }
    let coef = chol.solve(&(a.transpose() * b));
    let polys = (0..nb)
        .map(|m| {
            let mut p = Poly2::zero();
            for (c, &(px, pv)) in MONOMIALS[..nb].iter().enumerate() {
                p.set(px, pv, coef[(c, m)]);
            }
            p
        })
        .collect();
    Ok(TestFunctionStar {
        cell: up.cell,
        frame,
        polys,
    })
}

/// Largest total degree of `f^n psi*`.
pub const MAX_MOMENT_DEGREE: usize = 2 * basis::MAX_DEGREE;
const MD: usize = MAX_MOMENT_DEGREE + 2;

/// `M[a][b] = int X^a V^b dX dV` over a sub-area for `a + b <= degree`,
/// computed as `oint X^(a+1) / (a+1) V^b dV` around its boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub degree: usize,
    pub m: SMatrix<f64, MD, MD>,
}

impl Moments {
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.m[(a, b)]
    }

    /// `int p dX dV` for a polynomial of total degree `<= self.degree`.
    pub fn integrate(&self, p: &Poly2) -> f64 {
        let mut s = 0.0;
        for a in 0..=self.degree {
            for b in 0..=self.degree - a {
                s += p.coeff(a, b) * self.m[(a, b)];
            }
        }
        s
    }
}

pub fn subarea_moments(sub: &SubArea, frame: &Frame, degree: usize) -> Moments {
    assert!(degree <= MAX_MOMENT_DEGREE);
    let mut m = SMatrix::<f64, MD, MD>::zeros();
    let mut add = |x: f64, v: f64, w: f64| {
        let mut xp = [0.0; MD + 1];
        xp[0] = 1.0;
        for a in 1..=degree + 1 {
            xp[a] = xp[a - 1] * x;
        }
        let mut vb = w;
        for b in 0..=degree {
            for a in 0..=degree - b {
                m[(a, b)] += xp[a + 1] / (a + 1) as f64 * vb;
            }
            vb *= v;
        }
    };
    for seg in &sub.segments {
        match seg.geom {
            SegmentGeom::Line { p0, p1 } => {
                if p0.1 == p1.1 {
                    continue;
                }
                let (x0, v0) = frame.local(p0.0, p0.1);
                let (x1, v1) = frame.local(p1.0, p1.1);
                let rule = gauss(nodes_for_degree(degree + 1));
                let half = 0.5 * (v1 - v0);
                for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
                    let u = 0.5 * (t + 1.0);
                    add(x0 + u * (x1 - x0), v0 + u * (v1 - v0), w * half);
                }
            }
            SegmentGeom::Arc { edge, xi0, xi1 } => {
                let rule = gauss(nodes_for_degree(2 * (degree + 1) + 1));
                let h = 0.5 * (xi1 - xi0);
                let c = 0.5 * (xi1 + xi0);
                for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
                    let xi = c + h * t;
                    let (x, v) = edge.point(xi);
                    let (x, v) = frame.local(x, v);
                    add(x, v, w * h * edge.tangent(xi).1 / frame.hv);
                }
            }
        }
    }
    Moments { degree, m }
}

/// Integrand `g` of one sub-area with `P = 0` and
/// `Q(X, V) = int_{anchor}^{X} g(s, V) ds`, so that `dQ/dX - dP/dV = g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineIntegralKernel {
    pub g: Poly2,
    pub q: Poly2,
}

impl LineIntegralKernel {
    pub fn new(g: Poly2, anchor: f64) -> Self {
        Self {
            g,
            q: g.x_antiderivative(anchor),
        }
    }

    /// Kernel for the owner cell of `sub`, anchored at its left face.
    pub fn for_subarea(g: Poly2, sub: &SubArea, mesh: &PhaseMesh, frame: &Frame) -> Self {
        let left = (mesh.x_face(sub.column) - frame.xc) / frame.hx;
        Self::new(g, left)
    }

    /// `oint Q dV` around the sub-area, i.e. `int g dX dV`.
    pub fn integrate(&self, sub: &SubArea, frame: &Frame) -> f64 {
        let d = self.g.degree();
        sub.segments
            .iter()
            .map(|seg| {
                let n = match seg.geom {
                    SegmentGeom::Line { .. } => nodes_for_degree(d + 1),
                    SegmentGeom::Arc { .. } => nodes_for_degree(2 * (d + 1) + 1),
                };
                seg.integrate_dv(
                    |x, v| {
                        let (x, v) = frame.local(x, v);
                        self.q.eval(x, v)
                    },
                    n,
                ) / frame.hv
            })
            .sum()
    }
}

/// `f^n` on cell `sub.cell` as a polynomial in `frame` coordinates.
fn local_density(f: &DGField, basis_polys: &[Poly2], sub: &SubArea, frame: &Frame) -> Poly2 {
    let mesh = f.mesh();
    let c = f.cell(sub.cell.0, sub.cell.1);
    let mut p = Poly2::zero();
    for (m, &cm) in c.iter().enumerate() {
        if cm != 0.0 {
            p = p + basis_polys[m].scale(cm);
        }
    }
    let sx = (frame.xc - mesh.x_center(sub.column)) / frame.hx;
    let sv = (frame.vc - mesh.v_center(sub.row as i64)) / frame.hv;
    p.shifted(sx, sv)
}

fn basis_polys(k: usize) -> Vec<Poly2> {
    (0..basis::n_basis(k)).map(basis::as_poly).collect()
}

/// `int f^n psi* dX dV` over the upstream cell described by `dec`.
pub fn integrate_subareas(f: &DGField, psi: &Poly2, frame: &Frame, dec: &Decomposition) -> f64 {
    let bp = basis_polys(f.degree());
    let d = f.degree() + psi.degree();
    dec.subareas
        .iter()
        .map(|sub| {
            let g = local_density(f, &bp, sub, frame) * *psi;
            subarea_moments(sub, frame, d).integrate(&g)
        })
        .sum()
}

/// New coefficients of one Eulerian cell.
pub fn remap_cell(
    f: &DGField,
    up: &UpstreamCell,
    degree: usize,
    stats: &GeometryStats,
    bp: &[Poly2],
) -> Result<[f64; 6]> {
    let mesh = f.mesh();
    let dec = decompose(mesh, up, stats)?;
    let frame = Frame::of(mesh, up);
    let psi = reconstruct_psi_star(up, frame, degree)?;
    let d = f.degree() + degree;
    let mut out = [0.0; 6];
    for sub in &dec.subareas {
        let mo = subarea_moments(sub, &frame, d);
        let fl = local_density(f, bp, sub, &frame);
        // g_rs = int f X^r V^s over the sub-area
        let mut g = [[0.0; 3]; 3];
        for (r, row) in g.iter_mut().enumerate().take(degree + 1) {
            for (s, gs) in row.iter_mut().enumerate().take(degree + 1 - r) {
                let mut acc = 0.0;
                for p in 0..=f.degree() {
                    for q in 0..=f.degree() - p {
                        acc += fl.coeff(p, q) * mo.get(p + r, q + s);
                    }
                }
                *gs = acc;
            }
        }
        for (m, psi_m) in psi.polys.iter().enumerate() {
            let mut acc = 0.0;
            for &(r, s) in &MONOMIALS[..psi.polys.len()] {
                acc += psi_m.coeff(r, s) * g[r][s];
            }
            out[m] += acc;
        }
    }
    Ok(out)
}

/// One semi-Lagrangian update onto degree `degree`. `cells` holds the
/// upstream cell of every Eulerian cell in flat order.
pub fn remap_step(f: &DGField, cells: &[UpstreamCell], degree: usize, stats: &GeometryStats) -> Result<DGField> {
    basis::check_degree(degree)?;
    let mesh = f.mesh();
    if cells.len() != mesh.n_cells() {
        return Err(Error::FieldMismatch(format!(
            "{} upstream cells for {} Eulerian cells",
            cells.len(),
            mesh.n_cells()
        )));
    }
    let bp = basis_polys(f.degree());
    let nb = basis::n_basis(degree);
    let blocks: Vec<[f64; 6]> = cells
        .par_iter()
        .map(|up| remap_cell(f, up, degree, stats, &bp))
        .collect::<Result<_>>()?;
    let mut coeffs = Vec::with_capacity(nb * blocks.len());
    for b in &blocks {
        coeffs.extend_from_slice(&b[..nb]);
    }
    DGField::from_coeffs(mesh, degree, coeffs)
}
