//! Backward characteristic tracing and upstream-cell geometry.
//!
//! Characteristics solve `dx/dt = v`, `dv/dt = E`. Nodes are traced once on a
//! global lattice (cell corners, plus edge midpoints and centers when the
//! lattice is refined) so neighbouring upstream cells share their boundary
//! points bitwise.

use rayon::prelude::*;
use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{Error, Result};
use crate::mesh::PhaseMesh;
use crate::poisson::ElectricField1D;

/// `x1 = x - v dt`, `v1 = v - E(x) dt`.
#[inline]
pub fn trace_order1_point<E: Fn(f64) -> f64>(x: f64, v: f64, e_n: E, dt: f64) -> (f64, f64) {
    (x - v * dt, v - e_n(x) * dt)
}

/// Second-order correction from a first-order prediction `(x1, v1)`.
/// `e_new_at_x` is the predicted new-level field at the Eulerian point.
#[inline]
pub fn trace_order2_point<E: Fn(f64) -> f64>(
    x: f64,
    v: f64,
    x1: f64,
    v1: f64,
    e_n: E,
    e_new_at_x: f64,
    dt: f64,
) -> (f64, f64) {
    (
        x - 0.5 * (v + v1) * dt,
        v - 0.5 * (e_n(x1) + e_new_at_x) * dt,
    )
}

/// Third-order correction from a second-order prediction `(x2, v2)`.
///
/// `e_new_at_x` and `de_new_at_x` are the predicted new-level field and its
/// material derivative at the Eulerian point; `e_n` and `de_n` are the old
/// level's, evaluated at the prediction.
#[allow(clippy::too_many_arguments)]
#[inline]
pub fn trace_order3_point<E, D>(
    x: f64,
    v: f64,
    x2: f64,
    v2: f64,
    e_n: E,
    de_n: D,
    e_new_at_x: f64,
    de_new_at_x: f64,
    dt: f64,
) -> (f64, f64)
where
    E: Fn(f64) -> f64,
    D: Fn(f64, f64) -> f64,
{
    let h = 0.5 * dt * dt;
    (
        x - v * dt + h * (2.0 / 3.0 * e_new_at_x + 1.0 / 3.0 * e_n(x2)),
        v - e_new_at_x * dt + h * (2.0 / 3.0 * de_new_at_x + 1.0 / 3.0 * de_n(x2, v2)),
    )
}

/// Node lattice with `refine` points per cell side (1: corners only,
/// 2: corners, edge midpoints and centers).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    pub refine: usize,
    pub np: usize,
    pub nq: usize,
}

impl Lattice {
    pub fn new(mesh: &PhaseMesh, refine: usize) -> Self {
        assert!(refine == 1 || refine == 2, "lattice refinement must be 1 or 2");
        Self {
            refine,
            np: refine * mesh.nx() + 1,
            nq: refine * mesh.nv() + 1,
        }
    }

    #[inline]
    pub fn index(&self, p: usize, q: usize) -> usize {
        q * self.np + p
    }

    /// Eulerian coordinates of node `(p, q)`; grid-aligned nodes use the
    /// mesh's own face and center values.
    pub fn source(&self, mesh: &PhaseMesh, p: usize, q: usize) -> (f64, f64) {
        let r = self.refine;
        let x = if p % r == 0 {
            mesh.x_face((p / r) as i64)
        } else {
            mesh.x_center((p / r) as i64)
        };
        let v = if q % r == 0 {
            mesh.v_face((q / r) as i64)
        } else {
            mesh.v_center((q / r) as i64)
        };
        (x, v)
    }
}

/// Traced coordinates for every lattice node. `x` is kept unwrapped; the
/// last column is the first column shifted by `lx`.
#[derive(Debug, Clone)]
pub struct TracedNodes {
    pub lattice: Lattice,
    pub order: usize,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

impl TracedNodes {
    #[inline]
    pub fn point(&self, p: usize, q: usize) -> (f64, f64) {
        let k = self.lattice.index(p, q);
        (self.x[k], self.v[k])
    }

    /// Nodes that do not move.
    pub fn identity(mesh: &PhaseMesh, lattice: Lattice) -> Self {
        trace_lattice(mesh, lattice, 0, |x, v, _| (x, v))
    }
}

/// Traces the periodic part of the lattice with `f(x, v, node)` and fills the
/// seam column by shifting.
fn trace_lattice<F>(mesh: &PhaseMesh, lattice: Lattice, order: usize, f: F) -> TracedNodes
where
    F: Fn(f64, f64, usize) -> (f64, f64) + Sync,
{
    let n = lattice.np * lattice.nq;
    let pts: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|k| {
            let (p, q) = (k % lattice.np, k / lattice.np);
            if p + 1 == lattice.np {
                return (f64::NAN, f64::NAN);
            }
            let (x, v) = lattice.source(mesh, p, q);
            f(x, v, k)
        })
        .collect();
    let mut x: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let mut v: Vec<f64> = pts.iter().map(|p| p.1).collect();
    for q in 0..lattice.nq {
        let (first, last) = (lattice.index(0, q), lattice.index(lattice.np - 1, q));
        x[last] = x[first] + mesh.lx();
        v[last] = v[first];
    }
    TracedNodes { lattice, order, x, v }
}

/// First-order tracing of every node through the field at `t^n`.
pub fn trace_order1(mesh: &PhaseMesh, lattice: Lattice, e_n: &ElectricField1D, dt: f64) -> TracedNodes {
    trace_lattice(mesh, lattice, 1, |x, v, _| {
        trace_order1_point(x, v, |y| e_n.eval_e(y), dt)
    })
}

/// Second-order tracing; `e_new` is solved from the first-order prediction.
pub fn trace_order2(
    mesh: &PhaseMesh,
    e_n: &ElectricField1D,
    e_new: &ElectricField1D,
    first: &TracedNodes,
    dt: f64,
) -> TracedNodes {
    trace_lattice(mesh, first.lattice, 2, |x, v, k| {
        trace_order2_point(x, v, first.x[k], first.v[k], |y| e_n.eval_e(y), e_new.eval_e(x), dt)
    })
}

/// Third-order tracing; `e_new` is solved from the second-order prediction.
pub fn trace_order3(
    mesh: &PhaseMesh,
    e_n: &ElectricField1D,
    e_new: &ElectricField1D,
    second: &TracedNodes,
    dt: f64,
) -> TracedNodes {
    trace_lattice(mesh, second.lattice, 3, |x, v, k| {
        trace_order3_point(
            x,
            v,
            second.x[k],
            second.v[k],
            |y| e_n.eval_e(y),
            |y, w| e_n.material_derivative(y, w),
            e_new.eval_e(x),
            e_new.material_derivative(x, v),
            dt,
        )
    })
}

/// Upstream-cell approximation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpstreamMode {
    /// Straight-sided quadrilateral through the traced corners.
    Quad,
    /// Quadratic-curved quadrilateral: each side a parabola through its traced
    /// end points and midpoint.
    QuadCurved,
}

/// One side of an upstream cell in its local frame,
/// `x = a xi + b eta + cx`, `v = b xi - a eta + cv`, `eta = kappa (xi^2 - 1)`,
/// `xi` in `[-1, 1]`. Straight sides have `kappa = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: f64,
    pub b: f64,
    pub cx: f64,
    pub cv: f64,
    pub kappa: f64,
    pub start: (f64, f64),
    pub end: (f64, f64),
}

impl Edge {
    pub fn straight(start: (f64, f64), end: (f64, f64)) -> Self {
        Self {
            a: 0.5 * (end.0 - start.0),
            b: 0.5 * (end.1 - start.1),
            cx: 0.5 * (start.0 + end.0),
            cv: 0.5 * (start.1 + end.1),
            kappa: 0.0,
            start,
            end,
        }
    }

    /// Parabola through `start`, `mid`, `end`. Returns the edge and whether
    /// it fell back to a straight side because the midpoint maps outside
    /// `|xi| < 1`.
    pub fn parabola(start: (f64, f64), mid: (f64, f64), end: (f64, f64)) -> (Self, bool) {
        let mut e = Self::straight(start, end);
        let (xi2, eta2) = e.to_local(mid.0, mid.1);
        if !(xi2.abs() < 1.0) {
            return (e, true);
        }
        e.kappa = eta2 / (xi2 * xi2 - 1.0);
        (e, false)
    }

    /// `(xi, eta)` of a physical point in this edge's frame.
    #[inline]
    pub fn to_local(&self, x: f64, v: f64) -> (f64, f64) {
        let d = self.a * self.a + self.b * self.b;
        let (dx, dv) = (x - self.cx, v - self.cv);
        ((self.a * dx + self.b * dv) / d, (self.b * dx - self.a * dv) / d)
    }

    #[inline]
    pub fn eta(&self, xi: f64) -> f64 {
        self.kappa * (xi * xi - 1.0)
    }

    /// Physical point at parameter `xi`; the end points are returned exactly.
    #[inline]
    pub fn point(&self, xi: f64) -> (f64, f64) {
        if xi == -1.0 {
            return self.start;
        }
        if xi == 1.0 {
            return self.end;
        }
        let eta = self.eta(xi);
        (
            self.a * xi + self.b * eta + self.cx,
            self.b * xi - self.a * eta + self.cv,
        )
    }

    /// `(dx/dxi, dv/dxi)`.
    #[inline]
    pub fn tangent(&self, xi: f64) -> (f64, f64) {
        let de = 2.0 * self.kappa * xi;
        (self.a + self.b * de, self.b - self.a * de)
    }

    pub fn is_straight(&self) -> bool {
        self.kappa == 0.0
    }

    /// Range of `x` (`coord = 0`) or `v` (`coord = 1`) over the edge.
    pub fn range(&self, coord: usize) -> (f64, f64) {
        let pick = |p: (f64, f64)| if coord == 0 { p.0 } else { p.1 };
        let (mut lo, mut hi) = (pick(self.start), pick(self.end));
        if lo > hi {
            std::mem::swap(&mut lo, &mut hi);
        }
        if self.kappa != 0.0 {
            // stationary point of a xi + b kappa xi^2 (x) or b xi - a kappa xi^2 (v)
            let (lin, quad) = if coord == 0 {
                (self.a, self.b * self.kappa)
            } else {
                (self.b, -self.a * self.kappa)
            };
            if quad != 0.0 {
                let xi = -lin / (2.0 * quad);
                if xi.abs() < 1.0 {
                    let c = pick(self.point(xi));
                    lo = lo.min(c);
                    hi = hi.max(c);
                }
            }
        }
        (lo, hi)
    }
}

/// Counters for geometric special cases met while building upstream cells.
#[derive(Debug, Default)]
pub struct GeometryStats {
    /// Parabolic sides replaced by straight ones (`|xi_2| >= 1`).
    pub straight_fallbacks: AtomicUsize,
    /// Root solves where both leading coefficients were negligible.
    pub grazing_contacts: AtomicUsize,
}

impl GeometryStats {
    pub fn straight_fallbacks(&self) -> usize {
        self.straight_fallbacks.load(Ordering::Relaxed)
    }

    pub fn grazing_contacts(&self) -> usize {
        self.grazing_contacts.load(Ordering::Relaxed)
    }
}

/// Upstream image of Eulerian cell `cell`.
///
/// `points` uses the 3x3 layout `points[3 * row + col]`, row 0 at the bottom:
/// corners `c1 = 0, c3 = 2, c7 = 6, c9 = 8`. With corner-only tracing
/// (`n_points == 4`) only the corners are meaningful.
///
/// Sides run counterclockwise: bottom `c1 -> c3`, right `c3 -> c9`, top
/// `c9 -> c7`, left `c7 -> c1`. Each side is stored in its canonical direction
/// (left to right or bottom to top), shared bitwise with the neighbouring
/// cell, together with a flag telling whether the loop runs it backwards.
#[derive(Debug, Clone, PartialEq)]
pub struct UpstreamCell {
    pub cell: (usize, usize),
    pub mode: UpstreamMode,
    pub n_points: usize,
    pub points: [(f64, f64); 9],
    pub edges: [(Edge, bool); 4],
}

/// Reference coordinates of the 3x3 layout.
pub const LAYOUT: [(f64, f64); 9] = [
    (-1.0, -1.0),
    (0.0, -1.0),
    (1.0, -1.0),
    (-1.0, 0.0),
    (0.0, 0.0),
    (1.0, 0.0),
    (-1.0, 1.0),
    (0.0, 1.0),
    (1.0, 1.0),
];

/// Corner indices into the 3x3 layout.
pub const CORNERS: [usize; 4] = [0, 2, 8, 6];

impl UpstreamCell {
    /// Counterclockwise corners `c1, c3, c9, c7`.
    pub fn corners(&self) -> [(f64, f64); 4] {
        CORNERS.map(|k| self.points[k])
    }

    /// Shoelace area of the corner quadrilateral.
    pub fn corner_area(&self) -> f64 {
        shoelace(&self.corners())
    }

    /// Signed area enclosed by the (possibly curved) sides, `int x dv` around
    /// the loop.
    pub fn area(&self) -> f64 {
        let rule = crate::quadrature::gauss(3);
        self.edges
            .iter()
            .map(|(e, reversed)| {
                let part: f64 = rule
                    .nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(&xi, &w)| w * e.point(xi).0 * e.tangent(xi).1)
                    .sum();
                if *reversed {
                    -part
                } else {
                    part
                }
            })
            .sum()
    }

    /// Centroid of the four corners.
    pub fn corner_centroid(&self) -> (f64, f64) {
        let c = self.corners();
        (
            0.25 * (c[0].0 + c[1].0 + c[2].0 + c[3].0),
            0.25 * (c[0].1 + c[1].1 + c[2].1 + c[3].1),
        )
    }
}

pub fn shoelace(poly: &[(f64, f64)]) -> f64 {
    let n = poly.len();
    let mut s = 0.0;
    for k in 0..n {
        let (p, q) = (poly[k], poly[(k + 1) % n]);
        s += p.0 * q.1 - q.0 * p.1;
    }
    0.5 * s
}

/// Assembles upstream cells for every Eulerian cell from traced nodes.
///
/// `QuadCurved` needs a refined lattice. Fails on a non-positive corner area
/// or a cell wider than the domain.
pub fn build_upstream_cells(
    mesh: &PhaseMesh,
    traced: &TracedNodes,
    mode: UpstreamMode,
    stats: &GeometryStats,
) -> Result<Vec<UpstreamCell>> {
    let r = traced.lattice.refine;
    if mode == UpstreamMode::QuadCurved && r != 2 {
        return Err(Error::Config("curved upstream cells need edge midpoints".into()));
    }
    let nx = mesh.nx();
    (0..mesh.n_cells())
        .into_par_iter()
        .map(|flat| build_one(mesh, traced, mode, stats, flat % nx, flat / nx))
        .collect()
}

fn build_one(
    mesh: &PhaseMesh,
    traced: &TracedNodes,
    mode: UpstreamMode,
    stats: &GeometryStats,
    i: usize,
    j: usize,
) -> Result<UpstreamCell> {
    let r = traced.lattice.refine;
    let mut points = [(f64::NAN, f64::NAN); 9];
    for row in 0..3 {
        for col in 0..3 {
            if r == 1 && (row == 1 || col == 1) {
                continue;
            }
            let p = r * i + col * r / 2;
            let q = r * j + row * r / 2;
            points[3 * row + col] = traced.point(p, q);
        }
    }
    let side = |s: usize, m: usize, e: usize| -> Edge {
        if mode == UpstreamMode::QuadCurved {
            let (edge, fell_back) = Edge::parabola(points[s], points[m], points[e]);
            if fell_back {
                stats.straight_fallbacks.fetch_add(1, Ordering::Relaxed);
            }
            edge
        } else {
            Edge::straight(points[s], points[e])
        }
    };
    let edges = [
        (side(0, 1, 2), false),
        (side(2, 5, 8), false),
        (side(6, 7, 8), true),
        (side(0, 3, 6), true),
    ];
    let cell = UpstreamCell {
        cell: (i, j),
        mode,
        n_points: if r == 2 { 9 } else { 4 },
        points,
        edges,
    };
    check_cell(mesh, &cell)?;
    Ok(cell)
}

/// Rejects upstream cells that have folded over or grown wider than the domain.
pub fn check_cell(mesh: &PhaseMesh, cell: &UpstreamCell) -> Result<()> {
    let (i, j) = cell.cell;
    let bad = |reason: String| Err(Error::DistortedCell { i, j, reason });
    let pts = cell.points.iter().filter(|p| p.0.is_finite());
    if cell
        .points
        .iter()
        .enumerate()
        .any(|(k, p)| (cell.n_points == 9 || CORNERS.contains(&k)) && !(p.0.is_finite() && p.1.is_finite()))
    {
        return bad("non-finite traced point".into());
    }
    let area = cell.corner_area();
    if !(area > 0.0) {
        return bad(format!("corner quadrilateral has signed area {area:e}"));
    }
    if cell.mode == UpstreamMode::QuadCurved {
        let boundary = [0, 1, 2, 5, 8, 7, 6, 3].map(|k| cell.points[k]);
        let a = shoelace(&boundary);
        if !(a > 0.0) {
            return bad(format!("boundary polygon has signed area {a:e}"));
        }
    }
    let (mut xlo, mut xhi, mut vlo, mut vhi) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in pts {
        xlo = xlo.min(p.0);
        xhi = xhi.max(p.0);
        vlo = vlo.min(p.1);
        vhi = vhi.max(p.1);
    }
    if xhi - xlo >= mesh.lx() || vhi - vlo >= 2.0 * mesh.v_max() {
        return bad("upstream cell spans the whole domain".into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dg_field::DGField;
    use crate::poisson::PoissonSolver;
    use std::f64::consts::PI;

    #[test]
    fn order1_examples() {
        assert_eq!(trace_order1_point(1.0, 2.0, |_| 0.0, 0.1), (0.8, 2.0));
        assert_eq!(trace_order1_point(0.7, 0.0, |_| 1.0, 0.5), (0.7, -0.5));
        let (x, v) = trace_order1_point(PI, 0.0, |y| 0.02 * (0.5 * y).sin(), 0.1);
        assert_eq!(x, PI);
        assert!((v + 0.002).abs() < 1e-15);
    }

    #[test]
    fn constant_field_is_exact_at_orders_two_and_three() {
        let (c, dt, x, v) = (0.7, 0.3, 1.2, -0.4);
        let (x1, v1) = trace_order1_point(x, v, |_| c, dt);
        let (x2, v2) = trace_order2_point(x, v, x1, v1, |_| c, c, dt);
        let exact = (x - v * dt + 0.5 * c * dt * dt, v - c * dt);
        assert!((x2 - exact.0).abs() < 1e-15 && (v2 - exact.1).abs() < 1e-15);
        let (x3, v3) = trace_order3_point(x, v, x2, v2, |_| c, |_, _| 0.0, c, 0.0, dt);
        assert!((x3 - exact.0).abs() < 1e-15 && (v3 - exact.1).abs() < 1e-15);
        let (x0, v0) = trace_order2_point(x, v, x - v * dt, v, |_| 0.0, 0.0, dt);
        assert_eq!((x0, v0), (x - v * dt, v));
    }

    /// Backward flow of `x'' = -x` over `dt` from `(x, v)`.
    fn oscillator(x: f64, v: f64, dt: f64) -> (f64, f64) {
        // reference by many RK4 substeps backwards in time
        let n = 2000;
        let h = -dt / n as f64;
        let f = |s: (f64, f64)| (s.1, -s.0);
        let mut s = (x, v);
        for _ in 0..n {
            let k1 = f(s);
            let k2 = f((s.0 + 0.5 * h * k1.0, s.1 + 0.5 * h * k1.1));
            let k3 = f((s.0 + 0.5 * h * k2.0, s.1 + 0.5 * h * k2.1));
            let k4 = f((s.0 + h * k3.0, s.1 + h * k3.1));
            s.0 += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            s.1 += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        }
        s
    }

    fn local_errors(order: usize, dt: f64) -> f64 {
        let e = |y: f64| -y;
        let de = |_: f64, w: f64| -w;
        let (x, v) = (0.8, 0.3);
        let (x1, v1) = trace_order1_point(x, v, e, dt);
        let (x2, v2) = trace_order2_point(x, v, x1, v1, e, e(x), dt);
        let (x3, v3) = trace_order3_point(x, v, x2, v2, e, de, e(x), de(x, v), dt);
        let got = [(x1, v1), (x2, v2), (x3, v3)][order - 1];
        let exact = oscillator(x, v, dt);
        (got.0 - exact.0).abs().max((got.1 - exact.1).abs())
    }

    #[test]
    fn local_truncation_orders_match_the_oracle() {
        for order in 1..=3 {
            let (a, b) = (local_errors(order, 0.1), local_errors(order, 0.05));
            let observed = (a / b).log2();
            assert!(
                observed > order as f64 + 0.8,
                "order {order}: observed local order {observed}"
            );
        }
    }

    fn zero_field(mesh: &PhaseMesh) -> ElectricField1D {
        let f = DGField::project(mesh, 1, |_, _| 1.0 / (2.0 * mesh.v_max())).unwrap();
        let solver = PoissonSolver::new(mesh.lx(), mesh.nx(), 1).unwrap();
        ElectricField1D::from_distribution(&f, &solver, 0.0).unwrap()
    }

    #[test]
    fn zero_field_gives_free_streaming_at_every_order() {
        let mesh = PhaseMesh::new(2.0, 1.0, 4, 4).unwrap();
        let e = zero_field(&mesh);
        let lat = Lattice::new(&mesh, 2);
        let dt = 0.37;
        let t1 = trace_order1(&mesh, lat, &e, dt);
        let t2 = trace_order2(&mesh, &e, &e, &t1, dt);
        let t3 = trace_order3(&mesh, &e, &e, &t2, dt);
        for q in 0..lat.nq {
            for p in 0..lat.np - 1 {
                let (x, v) = lat.source(&mesh, p, q);
                for t in [&t1, &t2, &t3] {
                    let (xt, vt) = t.point(p, q);
                    assert!((xt - (x - v * dt)).abs() < 1e-15);
                    assert!((vt - v).abs() < 1e-15);
                }
            }
            let (x0, _) = t3.point(0, q);
            assert_eq!(t3.point(lat.np - 1, q).0, x0 + 2.0);
        }
    }

    #[test]
    fn free_streaming_upstream_cells_are_sheared_copies() {
        let mesh = PhaseMesh::new(2.0, 1.0, 4, 4).unwrap();
        let lat = Lattice::new(&mesh, 1);
        let dt = 0.2;
        let t = trace_lattice(&mesh, lat, 1, |x, v, _| (x - v * dt, v));
        let stats = GeometryStats::default();
        let cells = build_upstream_cells(&mesh, &t, UpstreamMode::Quad, &stats).unwrap();
        let c = &cells[mesh.flat(1, 3)];
        let (x0, x1) = (mesh.x_face(1), mesh.x_face(2));
        let (v0, v1) = (mesh.v_face(3), mesh.v_face(4));
        let expect = [(x0 - v0 * dt, v0), (x1 - v0 * dt, v0), (x1 - v1 * dt, v1), (x0 - v1 * dt, v1)];
        for (got, want) in c.corners().iter().zip(expect) {
            assert!((got.0 - want.0).abs() < 1e-15 && got.1 == want.1);
        }
        assert!((c.corner_area() - mesh.cell_area()).abs() < 1e-15);
        // zero-velocity corners stay put
        let still = &cells[mesh.flat(2, 2)];
        assert_eq!(still.points[0], (mesh.x_face(2), 0.0));
    }

    #[test]
    fn crossed_corners_are_rejected() {
        let mesh = PhaseMesh::new(2.0, 1.0, 4, 4).unwrap();
        let lat = Lattice::new(&mesh, 1);
        // a velocity jump folds the rows between v = 0 and the next face
        let t = trace_lattice(&mesh, lat, 1, |x, v, _| (x, if v > 0.25 { -v } else { v }));
        let stats = GeometryStats::default();
        let err = build_upstream_cells(&mesh, &t, UpstreamMode::Quad, &stats).unwrap_err();
        assert!(err.is_breakdown(), "{err}");
        assert!(err.to_string().contains("smaller time step"));
    }

    #[test]
    fn straight_flow_gives_flat_parabolas() {
        let mesh = PhaseMesh::new(2.0, 1.0, 4, 4).unwrap();
        let lat = Lattice::new(&mesh, 2);
        let t = trace_lattice(&mesh, lat, 1, |x, v, _| (x - 0.3 * v, v));
        let stats = GeometryStats::default();
        let cells = build_upstream_cells(&mesh, &t, UpstreamMode::QuadCurved, &stats).unwrap();
        for c in &cells {
            for (e, _) in &c.edges {
                assert!(e.kappa.abs() < 1e-14, "{}", e.kappa);
            }
        }
        assert_eq!(stats.straight_fallbacks(), 0);
    }

    #[test]
    fn parabola_through_hand_computed_points() {
        let (e, fell_back) = Edge::parabola((0.0, 0.0), (1.0, 0.1), (2.0, 0.0));
        assert!(!fell_back);
        // a = 1, b = 0: v = -eta, so the midpoint sits at xi = 0, eta = -0.1
        let (xi2, eta2) = e.to_local(1.0, 0.1);
        assert_eq!((xi2, eta2), (0.0, -0.1));
        assert!((e.kappa - 0.1).abs() < 1e-16);
        let apex = e.point(0.0);
        assert!((apex.0 - 1.0).abs() < 1e-15 && (apex.1 - 0.1).abs() < 1e-15);
    }

    #[test]
    fn midpoint_outside_falls_back_to_straight() {
        let (e, fell_back) = Edge::parabola((0.0, 0.0), (3.0, 0.1), (2.0, 0.0));
        assert!(fell_back);
        assert!(e.is_straight());
    }

    #[test]
    fn canonical_sides_are_shared_bitwise() {
        let mesh = PhaseMesh::new(2.0 * PI, 2.0, 5, 4).unwrap();
        let lat = Lattice::new(&mesh, 2);
        let t = trace_lattice(&mesh, lat, 3, |x, v, _| (x - 0.3 * v + 0.05 * x.sin(), v + 0.1 * (x + v).cos()));
        let stats = GeometryStats::default();
        let cells = build_upstream_cells(&mesh, &t, UpstreamMode::QuadCurved, &stats).unwrap();
        for j in 0..3 {
            for i in 0..4 {
                let here = &cells[mesh.flat(i, j)];
                let right = &cells[mesh.flat(i + 1, j)];
                let above = &cells[mesh.flat(i, j + 1)];
                assert_eq!(here.edges[1].0, right.edges[3].0);
                assert_eq!(here.edges[2].0, above.edges[0].0);
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn parabola_interpolates_its_points(
                s in (-3.0f64..3.0, -3.0f64..3.0),
                e in (-3.0f64..3.0, -3.0f64..3.0),
                t in -0.6f64..0.6,
                bulge in -0.5f64..0.5,
            ) {
                let len = ((e.0 - s.0).powi(2) + (e.1 - s.1).powi(2)).sqrt();
                prop_assume!(len > 0.1);
                // a point near the chord, offset along the normal
                let (nx, nv) = (-(e.1 - s.1) / len, (e.0 - s.0) / len);
                let m = (
                    0.5 * (s.0 + e.0) + t * 0.5 * (e.0 - s.0) + bulge * len * nx,
                    0.5 * (s.1 + e.1) + t * 0.5 * (e.1 - s.1) + bulge * len * nv,
                );
                let (edge, fell_back) = Edge::parabola(s, m, e);
                prop_assert!(!fell_back);
                let (xi2, _) = edge.to_local(m.0, m.1);
                for (xi, p) in [(-1.0, s), (xi2, m), (1.0, e)] {
                    let q = edge.point(xi);
                    prop_assert!((q.0 - p.0).abs() < 1e-12 && (q.1 - p.1).abs() < 1e-12);
                }
                // the physical-to-local map inverts point()
                let (a, b) = edge.to_local(edge.point(0.3).0, edge.point(0.3).1);
                prop_assert!((a - 0.3).abs() < 1e-12 && (b - edge.eta(0.3)).abs() < 1e-12);
            }
        }
    }
}
