//! Splits an upstream cell along the background grid into sub-areas, each
//! bounded by outer pieces (parts of the upstream sides) and inner pieces
//! (parts of grid lines).
//!
//! Crossings are read off from the cells that contain consecutive piece
//! midpoints, so segment ownership and crossing topology always agree; the
//! roots of the side/grid-line equations only decide where pieces are cut.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::atomic::Ordering;

use crate::error::{Error, Result};
use crate::mesh::PhaseMesh;
use crate::quadrature::gauss;
use crate::tracer::{Edge, GeometryStats, UpstreamCell};

/// Threshold on the quadratic and linear coefficients of the root solver.
pub const ROOT_EPS: f64 = 1e-13;

/// Up to two real roots.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Roots {
    n: usize,
    r: [f64; 2],
}

impl Roots {
    fn push(&mut self, x: f64) {
        self.r[self.n] = x;
        self.n += 1;
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.r[..self.n]
    }
}

/// Real roots of `A s^2 + B s + C = 0` by the cancellation-free formulas;
/// the flag is set when both `A` and `B` are negligible and the equation is
/// treated as having no solution.
pub fn solve_quadratic(a: f64, b: f64, c: f64) -> (Roots, bool) {
    let mut out = Roots::default();
    if a.abs() >= ROOT_EPS {
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return (out, false);
        }
        if disc == 0.0 {
            out.push(-b / (2.0 * a));
            return (out, false);
        }
        let gamma = if b >= 0.0 { 1.0 } else { -1.0 };
        let t = -b - gamma * disc.sqrt();
        out.push(2.0 * c / t);
        out.push(t / (2.0 * a));
        (out, false)
    } else if b.abs() >= ROOT_EPS {
        out.push(-c / b);
        (out, false)
    } else {
        (out, true)
    }
}

/// Grid line `x = level` (`Vertical`) or `v = level` (`Horizontal`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridLine {
    Vertical(f64),
    Horizontal(f64),
}

/// Crossing of the segment `p0 -> p1` with a grid line: parameter `t` in
/// `[0, 1]` and the point, placed exactly on the line. A segment parallel to
/// the line, collinear or not, has no crossing.
pub fn intersect_straight_edge(
    p0: (f64, f64),
    p1: (f64, f64),
    line: GridLine,
) -> Option<(f64, (f64, f64))> {
    let (s0, s1, level) = match line {
        GridLine::Vertical(x) => (p0.0, p1.0, x),
        GridLine::Horizontal(v) => (p0.1, p1.1, v),
    };
    if s0 == s1 {
        return None;
    }
    let t = (level - s0) / (s1 - s0);
    if !(0.0..=1.0).contains(&t) {
        return None;
    }
    let p = match line {
        GridLine::Vertical(x) => (x, p0.1 + t * (p1.1 - p0.1)),
        GridLine::Horizontal(v) => (p0.0 + t * (p1.0 - p0.0), v),
    };
    Some((t, p))
}

/// Parameters `xi` in `[-1, 1]` where a side meets a grid line.
///
/// The line is written in the side's frame as `p xi + q eta + c = level` and
/// combined with `eta = kappa (xi^2 - 1)`. When `|p| <= |q|` the equation is
/// solved for `xi` directly; otherwise for `eta`, with `xi = d - r eta`.
pub fn intersect_qc_edge(edge: &Edge, line: GridLine) -> (Roots, bool) {
    let (p, q, c, level) = match line {
        GridLine::Vertical(x) => (edge.a, edge.b, edge.cx, x),
        GridLine::Horizontal(v) => (edge.b, -edge.a, edge.cv, v),
    };
    let k = edge.kappa;
    let mut out = Roots::default();
    let (candidates, grazing) = if p.abs() <= q.abs() {
        if q == 0.0 {
            return (out, false);
        }
        solve_quadratic(k, p / q, -(level - c) / q - k)
    } else {
        let d = (level - c) / p;
        let r = q / p;
        let (etas, g) = solve_quadratic(k * r * r, -1.0 - 2.0 * k * d * r, k * (d * d - 1.0));
        let mut xs = Roots::default();
        for &eta in etas.as_slice() {
            xs.push(d - r * eta);
        }
        (xs, g)
    };
    for &xi in candidates.as_slice() {
        if (-1.0..=1.0).contains(&xi) {
            out.push(xi);
        }
    }
    (out, grazing)
}

/// Intersections with the vertical line `x = level`.
pub fn intersect_qc_edge_x(edge: &Edge, level: f64) -> (Roots, bool) {
    intersect_qc_edge(edge, GridLine::Vertical(level))
}

/// Intersections with the horizontal line `v = level`.
pub fn intersect_qc_edge_v(edge: &Edge, level: f64) -> (Roots, bool) {
    intersect_qc_edge(edge, GridLine::Horizontal(level))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentKind {
    Outer,
    Inner,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SegmentGeom {
    Line { p0: (f64, f64), p1: (f64, f64) },
    /// Part of a curved side between two parameters, in traversal order.
    Arc { edge: Edge, xi0: f64, xi1: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub kind: SegmentKind,
    pub geom: SegmentGeom,
}

impl Segment {
    pub fn start(&self) -> (f64, f64) {
        match self.geom {
            SegmentGeom::Line { p0, .. } => p0,
            SegmentGeom::Arc { edge, xi0, .. } => edge.point(xi0),
        }
    }

    pub fn end(&self) -> (f64, f64) {
        match self.geom {
            SegmentGeom::Line { p1, .. } => p1,
            SegmentGeom::Arc { edge, xi1, .. } => edge.point(xi1),
        }
    }

    /// `int q(x, v) dv` along the segment with an `n`-point Gauss rule in its
    /// parameter; exact when `q` composed with the parameterization times
    /// `dv/ds` is a polynomial of degree `<= 2n - 1`.
    pub fn integrate_dv<F: Fn(f64, f64) -> f64>(&self, q: F, n: usize) -> f64 {
        let rule = gauss(n);
        match self.geom {
            SegmentGeom::Line { p0, p1 } => {
                let dv = p1.1 - p0.1;
                if dv == 0.0 {
                    return 0.0;
                }
                let s: f64 = rule
                    .nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(&t, &w)| {
                        let u = 0.5 * (t + 1.0);
                        w * q(p0.0 + u * (p1.0 - p0.0), p0.1 + u * dv)
                    })
                    .sum();
                0.5 * s * dv
            }
            SegmentGeom::Arc { edge, xi0, xi1 } => {
                let h = 0.5 * (xi1 - xi0);
                let m = 0.5 * (xi1 + xi0);
                let s: f64 = rule
                    .nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(&t, &w)| {
                        let xi = m + h * t;
                        let (x, v) = edge.point(xi);
                        w * q(x, v) * edge.tangent(xi).1
                    })
                    .sum();
                s * h
            }
        }
    }
}

/// Part of an upstream cell inside one background cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SubArea {
    /// Unwrapped column of the background cell.
    pub column: i64,
    pub row: usize,
    /// Background cell after periodic wrapping.
    pub cell: (usize, usize),
    pub segments: Vec<Segment>,
}

impl SubArea {
    /// `int x dv` around the boundary.
    pub fn area(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| s.integrate_dv(|x, _| x, 3))
            .sum()
    }

    pub fn count(&self, kind: SegmentKind) -> usize {
        self.segments.iter().filter(|s| s.kind == kind).count()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Decomposition {
    pub subareas: Vec<SubArea>,
}

impl Decomposition {
    pub fn area(&self) -> f64 {
        self.subareas.iter().map(SubArea::area).sum()
    }
}

/// Cut point on the loop. `xi` is the canonical parameter on `edge`.
#[derive(Debug, Clone, Copy)]
struct Node {
    edge: usize,
    xi: f64,
    p: (f64, f64),
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    edge: usize,
    xi0: f64,
    xi1: f64,
    col: i64,
    row: i64,
}

/// Interior cut parameters of one side, ascending and merged, with cuts
/// within tolerance of the end points dropped.
fn side_cuts(mesh: &PhaseMesh, edge: &Edge, stats: &GeometryStats, out: &mut Vec<f64>) {
    out.clear();
    let mut grazing = 0;
    let (xlo, xhi) = edge.range(0);
    for i in mesh.column_of(xlo)..=mesh.column_of(xhi) {
        let (r, g) = intersect_qc_edge_x(edge, mesh.x_face(i));
        out.extend_from_slice(r.as_slice());
        grazing += g as usize;
    }
    let (vlo, vhi) = edge.range(1);
    for j in mesh.row_of(vlo)..=mesh.row_of(vhi) {
        let (r, g) = intersect_qc_edge_v(edge, mesh.v_face(j));
        out.extend_from_slice(r.as_slice());
        grazing += g as usize;
    }
    if grazing > 0 {
        stats.grazing_contacts.fetch_add(grazing, Ordering::Relaxed);
    }
    let half = (edge.a * edge.a + edge.b * edge.b).sqrt();
    let tol = 1e-12 * (mesh.dx() + mesh.dv()) / half;
    out.retain(|&xi| xi > -1.0 + tol && xi < 1.0 - tol);
    out.sort_by(f64::total_cmp);
    out.dedup_by(|b, a| *b - *a <= tol);
}

fn topology(up: &UpstreamCell, reason: String) -> Error {
    Error::Topology {
        i: up.cell.0,
        j: up.cell.1,
        reason,
    }
}

/// Decomposes one upstream cell. Sub-areas outside the velocity domain are
/// dropped; the rest are returned in (column, row) order.
pub fn decompose(mesh: &PhaseMesh, up: &UpstreamCell, stats: &GeometryStats) -> Result<Decomposition> {
    let mut nodes: Vec<Node> = Vec::with_capacity(16);
    let mut pieces: Vec<Piece> = Vec::with_capacity(16);
    let mut cuts = Vec::with_capacity(8);
    for (e, (edge, reversed)) in up.edges.iter().enumerate() {
        if edge.a == 0.0 && edge.b == 0.0 {
            return Err(Error::DistortedCell {
                i: up.cell.0,
                j: up.cell.1,
                reason: "upstream side of zero length".into(),
            });
        }
        side_cuts(mesh, edge, stats, &mut cuts);
        let mut seq = Vec::with_capacity(cuts.len() + 2);
        seq.push(-1.0);
        seq.extend_from_slice(&cuts);
        seq.push(1.0);
        if *reversed {
            seq.reverse();
        }
        for w in seq.windows(2) {
            nodes.push(Node {
                edge: e,
                xi: w[0],
                p: edge.point(w[0]),
            });
            let (x, v) = edge.point(0.5 * (w[0] + w[1]));
            pieces.push(Piece {
                edge: e,
                xi0: w[0],
                xi1: w[1],
                col: mesh.column_of(x),
                row: mesh.row_of(v),
            });
        }
    }

    // crossings sit at the node where consecutive pieces change cell
    let n = pieces.len();
    let mut vcross: Vec<(i64, usize, i32)> = Vec::new();
    let mut hcross: Vec<(i64, usize, i32)> = Vec::new();
    let snap_tol = 1e-6 * (mesh.dx() + mesh.dv());
    for r in 0..n {
        let prev = &pieces[(r + n - 1) % n];
        let cur = &pieces[r];
        let dc = cur.col - prev.col;
        let dr = cur.row - prev.row;
        if dc.abs() > 1 || dr.abs() > 1 {
            return Err(topology(up, "boundary skips a grid cell".into()));
        }
        if dc != 0 {
            let line = cur.col.max(prev.col);
            let x = mesh.x_face(line);
            if (nodes[r].p.0 - x).abs() > snap_tol {
                return Err(topology(up, format!("crossing of x = {x} found away from the line")));
            }
            nodes[r].p.0 = x;
            vcross.push((line, r, dc as i32));
        }
        if dr != 0 {
            let line = cur.row.max(prev.row);
            let v = mesh.v_face(line);
            if (nodes[r].p.1 - v).abs() > snap_tol {
                return Err(topology(up, format!("crossing of v = {v} found away from the line")));
            }
            nodes[r].p.1 = v;
            hcross.push((line, r, -(dr as i32)));
        }
    }

    let nv = mesh.nv() as i64;
    let mut cells: BTreeMap<(i64, i64), Vec<Segment>> = BTreeMap::new();
    let mut add = |col: i64, row: i64, seg: Segment| {
        if (0..nv).contains(&row) {
            cells.entry((col, row)).or_default().push(seg);
        }
    };

    for (r, piece) in pieces.iter().enumerate() {
        let edge = &up.edges[piece.edge].0;
        let geom = if edge.is_straight() {
            SegmentGeom::Line {
                p0: nodes[r].p,
                p1: nodes[(r + 1) % n].p,
            }
        } else {
            SegmentGeom::Arc {
                edge: *edge,
                xi0: piece.xi0,
                xi1: piece.xi1,
            }
        };
        debug_assert_eq!(nodes[r].edge, piece.edge);
        debug_assert_eq!(nodes[r].xi, piece.xi0);
        add(
            piece.col,
            piece.row,
            Segment {
                kind: SegmentKind::Outer,
                geom,
            },
        );
    }

    let inner = |p0, p1| Segment {
        kind: SegmentKind::Inner,
        geom: SegmentGeom::Line { p0, p1 },
    };

    // vertical lines: moving up, a left-to-right crossing enters the region
    for (line, list) in group(&vcross) {
        let x = mesh.x_face(line);
        let pts: Vec<(f64, i32)> = list.iter().map(|&(k, dw)| (nodes[k].p.1, dw)).collect();
        for (lo, hi) in inside_intervals(&pts).map_err(|e| topology(up, format!("x = {x}: {e}")))? {
            for j in mesh.row_of(lo)..=mesh.row_of(hi) {
                let s = lo.max(mesh.v_face(j));
                let t = hi.min(mesh.v_face(j + 1));
                if t > s {
                    add(line - 1, j, inner((x, s), (x, t)));
                    add(line, j, inner((x, t), (x, s)));
                }
            }
        }
    }
    // horizontal lines: moving right, a downward crossing enters the region
    for (line, list) in group(&hcross) {
        let v = mesh.v_face(line);
        let pts: Vec<(f64, i32)> = list.iter().map(|&(k, dw)| (nodes[k].p.0, dw)).collect();
        for (lo, hi) in inside_intervals(&pts).map_err(|e| topology(up, format!("v = {v}: {e}")))? {
            for i in mesh.column_of(lo)..=mesh.column_of(hi) {
                let s = lo.max(mesh.x_face(i));
                let t = hi.min(mesh.x_face(i + 1));
                if t > s {
                    add(i, line - 1, inner((t, v), (s, v)));
                    add(i, line, inner((s, v), (t, v)));
                }
            }
        }
    }

    cancel_coincident(&mut cells);

    let subareas = cells
        .into_iter()
        .filter(|(_, segs)| !segs.is_empty())
        .map(|((col, row), segments)| SubArea {
            column: col,
            row: row as usize,
            cell: (mesh.wrap_index(col), row as usize),
            segments,
        })
        .collect();
    Ok(Decomposition { subareas })
}

fn group(cross: &[(i64, usize, i32)]) -> BTreeMap<i64, Vec<(usize, i32)>> {
    let mut m: BTreeMap<i64, Vec<(usize, i32)>> = BTreeMap::new();
    for &(line, node, dw) in cross {
        m.entry(line).or_default().push((node, dw));
    }
    m
}

/// Sweeps crossings `(position, winding change)` along a line and returns
/// the intervals of winding number one.
fn inside_intervals(pts: &[(f64, i32)]) -> std::result::Result<Vec<(f64, f64)>, String> {
    let mut sorted = pts.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = Vec::new();
    let mut w = 0;
    let mut k = 0;
    while k < sorted.len() {
        let pos = sorted[k].0;
        while k < sorted.len() && sorted[k].0 == pos {
            w += sorted[k].1;
            k += 1;
        }
        if !(0..=1).contains(&w) {
            return Err(format!("winding number {w} along the line"));
        }
        if w == 1 {
            if k == sorted.len() {
                return Err("region left open".into());
            }
            out.push((pos, sorted[k].0));
        }
    }
    if w != 0 {
        return Err(format!("final winding number {w}"));
    }
    Ok(out)
}

/// Removes an outer straight piece together with an inner piece of the same
/// cell that runs over it backwards; the inner piece's partner across the
/// grid line then becomes outer.
fn cancel_coincident(cells: &mut BTreeMap<(i64, i64), Vec<Segment>>) {
    let mut promote: Vec<((f64, f64), (f64, f64))> = Vec::new();
    for segs in cells.values_mut() {
        let mut k = 0;
        while k < segs.len() {
            let s = segs[k];
            if let (SegmentKind::Outer, SegmentGeom::Line { p0, p1 }) = (s.kind, s.geom) {
                let hit = segs.iter().position(|r| {
                    r.kind == SegmentKind::Inner
                        && matches!(r.geom, SegmentGeom::Line { p0: a, p1: b } if a == p1 && b == p0)
                });
                if let Some(m) = hit {
                    promote.push((p0, p1));
                    let (hi, lo) = if m > k { (m, k) } else { (k, m) };
                    segs.remove(hi);
                    segs.remove(lo);
                    k = 0;
                    continue;
                }
            }
            k += 1;
        }
    }
    for (p0, p1) in promote {
        for segs in cells.values_mut() {
            if let Some(s) = segs.iter_mut().find(|r| {
                r.kind == SegmentKind::Inner
                    && matches!(r.geom, SegmentGeom::Line { p0: a, p1: b } if a == p0 && b == p1)
            }) {
                s.kind = SegmentKind::Outer;
                break;
            }
        }
    }
}

/// Plain-text listing of a decomposition for plotting.
pub fn dump(d: &Decomposition) -> String {
    let mut s = String::new();
    for sub in &d.subareas {
        let _ = writeln!(
            s,
            "subarea column {} row {} cell {:?} area {:.17e}",
            sub.column,
            sub.row,
            sub.cell,
            sub.area()
        );
        for seg in &sub.segments {
            let kind = match seg.kind {
                SegmentKind::Outer => "outer",
                SegmentKind::Inner => "inner",
            };
            let (a, b) = (seg.start(), seg.end());
            match seg.geom {
                SegmentGeom::Line { .. } => {
                    let _ = writeln!(s, "  {kind} line {} {} -> {} {}", a.0, a.1, b.0, b.1);
                }
                SegmentGeom::Arc { edge, xi0, xi1 } => {
                    let _ = writeln!(
                        s,
                        "  {kind} arc {} {} -> {} {} kappa {} xi {} {}",
                        a.0, a.1, b.0, b.1, edge.kappa, xi0, xi1
                    );
                }
            }
        }
    }
    s
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::tracer::{UpstreamMode, CORNERS, LAYOUT};

    /// Upstream cell whose nine points are `map` applied to cell `(i, j)`'s
    /// 3x3 layout.
    pub fn mapped_cell<F: Fn(f64, f64) -> (f64, f64)>(
        mesh: &PhaseMesh,
        i: usize,
        j: usize,
        mode: UpstreamMode,
        map: F,
    ) -> UpstreamCell {
        let mut points = [(0.0, 0.0); 9];
        for (k, &(xi, eta)) in LAYOUT.iter().enumerate() {
            let x = if xi == -1.0 {
                mesh.x_face(i as i64)
            } else if xi == 1.0 {
                mesh.x_face(i as i64 + 1)
            } else {
                mesh.x_center(i as i64)
            };
            let v = if eta == -1.0 {
                mesh.v_face(j as i64)
            } else if eta == 1.0 {
                mesh.v_face(j as i64 + 1)
            } else {
                mesh.v_center(j as i64)
            };
            points[k] = map(x, v);
        }
        let side = |s: usize, m: usize, e: usize| match mode {
            UpstreamMode::Quad => Edge::straight(points[s], points[e]),
            UpstreamMode::QuadCurved => Edge::parabola(points[s], points[m], points[e]).0,
        };
        UpstreamCell {
            cell: (i, j),
            mode,
            n_points: 9,
            points,
            edges: [
                (side(0, 1, 2), false),
                (side(2, 5, 8), false),
                (side(6, 7, 8), true),
                (side(0, 3, 6), true),
            ],
        }
    }

    fn mesh() -> PhaseMesh {
        PhaseMesh::new(8.0, 4.0, 8, 8).unwrap()
    }

    #[test]
    fn quadratic_branches() {
        let (r, g) = solve_quadratic(1e-15, 2.0, -1.0);
        assert_eq!((r.as_slice(), g), (&[0.5][..], false));
        let (r, _) = solve_quadratic(1.0, 0.0, -0.25);
        let mut v = r.as_slice().to_vec();
        v.sort_by(f64::total_cmp);
        assert_eq!(v, vec![-0.5, 0.5]);
        assert!(solve_quadratic(1.0, 0.0, 1.0).0.is_empty());
        let (r, g) = solve_quadratic(0.0, 1e-14, 3.0);
        assert!(r.is_empty() && g);
        // negative leading coefficient takes the quadratic branch too
        let (r, _) = solve_quadratic(-1.0, 0.0, 0.25);
        assert_eq!(r.len(), 2);
    }

    #[test]
    fn straight_edge_examples() {
        let hit = intersect_straight_edge((0.0, 0.0), (2.0, 2.0), GridLine::Vertical(1.0));
        assert_eq!(hit, Some((0.5, (1.0, 1.0))));
        assert_eq!(
            intersect_straight_edge((0.0, 0.0), (2.0, 0.0), GridLine::Horizontal(1.0)),
            None
        );
        assert_eq!(
            intersect_straight_edge((1.0, 0.0), (1.0, 3.0), GridLine::Vertical(1.0)),
            None
        );
    }

    #[test]
    fn flat_side_matches_linear_solve() {
        let e = Edge::straight((0.0, -1.0), (2.0, 1.5));
        let (r, _) = intersect_qc_edge_v(&e, 0.5);
        let (t, _) = intersect_straight_edge(e.start, e.end, GridLine::Horizontal(0.5)).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r.as_slice()[0] - (2.0 * t - 1.0)).abs() < 1e-15);
        assert!(intersect_qc_edge_v(&e, 2.0).0.is_empty());
    }

    #[test]
    fn tangent_apex_gives_one_root() {
        let (e, _) = Edge::parabola((0.0, 0.0), (1.0, 0.1), (2.0, 0.0));
        let (r, _) = intersect_qc_edge_v(&e, 0.1);
        assert_eq!(r.as_slice(), &[0.0]);
    }

    #[test]
    fn identity_flow_is_one_subarea() {
        let m = mesh();
        for mode in [UpstreamMode::Quad, UpstreamMode::QuadCurved] {
            let up = mapped_cell(&m, 3, 5, mode, |x, v| (x, v));
            let d = decompose(&m, &up, &GeometryStats::default()).unwrap();
            assert_eq!(d.subareas.len(), 1, "{}", dump(&d));
            let s = &d.subareas[0];
            assert_eq!((s.cell, s.count(SegmentKind::Outer), s.count(SegmentKind::Inner)), ((3, 5), 4, 0));
            assert!((s.area() - m.cell_area()).abs() < 1e-15);
        }
    }

    #[test]
    fn half_shifted_square() {
        let m = mesh();
        let up = mapped_cell(&m, 2, 2, UpstreamMode::Quad, |x, v| (x + 0.5 * m.dx(), v));
        let d = decompose(&m, &up, &GeometryStats::default()).unwrap();
        assert_eq!(d.subareas.len(), 2, "{}", dump(&d));
        for s in &d.subareas {
            assert!((s.area() - 0.5 * m.cell_area()).abs() < 1e-14);
            assert_eq!(s.count(SegmentKind::Inner), 1);
        }
        assert_eq!(d.subareas[0].cell, (2, 2));
        assert_eq!(d.subareas[1].cell, (3, 2));
    }

    #[test]
    fn sheared_parallelogram_over_three_columns() {
        let m = mesh();
        // top edge moves one cell relative to the bottom
        let up = mapped_cell(&m, 4, 4, UpstreamMode::Quad, |x, v| {
            (x - m.dx() * (v - m.v_face(4)) / m.dv() + 0.5 * m.dx(), v)
        });
        let d = decompose(&m, &up, &GeometryStats::default()).unwrap();
        assert_eq!(d.subareas.len(), 3, "{}", dump(&d));
        assert!((d.area() - m.cell_area()).abs() < 1e-12);
    }

    #[test]
    fn wraps_columns_across_the_seam() {
        let m = mesh();
        let up = mapped_cell(&m, 0, 3, UpstreamMode::Quad, |x, v| (x - 0.3 * m.dx(), v));
        let d = decompose(&m, &up, &GeometryStats::default()).unwrap();
        let cols: Vec<_> = d.subareas.iter().map(|s| (s.column, s.cell.0)).collect();
        assert_eq!(cols, vec![(-1, 7), (0, 0)]);
    }

    #[test]
    fn cells_beyond_the_velocity_domain_are_dropped() {
        let m = mesh();
        let up = mapped_cell(&m, 2, 7, UpstreamMode::Quad, |x, v| (x, v + 0.5 * m.dv()));
        let d = decompose(&m, &up, &GeometryStats::default()).unwrap();
        assert_eq!(d.subareas.len(), 1);
        assert!((d.area() - 0.5 * m.cell_area()).abs() < 1e-14);
    }

    /// Clips a convex polygon to an axis-aligned box.
    pub fn clip_box(poly: &[(f64, f64)], x0: f64, x1: f64, v0: f64, v1: f64) -> Vec<(f64, f64)> {
        let mut out = poly.to_vec();
        let planes: [(usize, f64, bool); 4] = [(0, x0, true), (0, x1, false), (1, v0, true), (1, v1, false)];
        for (axis, level, keep_above) in planes {
            let inside = |p: &(f64, f64)| {
                let c = if axis == 0 { p.0 } else { p.1 };
                if keep_above { c >= level } else { c <= level }
            };
            let input = std::mem::take(&mut out);
            for k in 0..input.len() {
                let (a, b) = (input[k], input[(k + 1) % input.len()]);
                let (ia, ib) = (inside(&a), inside(&b));
                if ia {
                    out.push(a);
                }
                if ia != ib {
                    let (ca, cb) = if axis == 0 { (a.0, b.0) } else { (a.1, b.1) };
                    let t = (level - ca) / (cb - ca);
                    out.push((a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1)));
                }
            }
            if out.is_empty() {
                break;
            }
        }
        out
    }

    mod props {
        use super::*;
        use crate::tracer::shoelace;
        use proptest::prelude::*;

        fn smooth_map(m: &PhaseMesh, c: [f64; 6]) -> impl Fn(f64, f64) -> (f64, f64) + '_ {
            move |x, v| {
                let (dx, dv) = (m.dx(), m.dv());
                (
                    x + c[0] * dx + c[1] * (v / dv) * dx + c[2] * dx * ((x + v) / dx).sin(),
                    v + c[3] * dv + c[4] * (x / dx) * 0.1 * dv + c[5] * dv * ((x - v) / dv).cos(),
                )
            }
        }

        proptest! {
            #[test]
            fn subareas_sum_to_the_upstream_area(
                c in prop::array::uniform6(-0.4f64..0.4),
                curved in any::<bool>(),
            ) {
                let m = mesh();
                let mode = if curved { UpstreamMode::QuadCurved } else { UpstreamMode::Quad };
                let up = mapped_cell(&m, 3, 4, mode, smooth_map(&m, c));
                prop_assume!(up.corner_area() > 0.0);
                let d = decompose(&m, &up, &GeometryStats::default()).unwrap();
                prop_assert!((d.area() - up.area()).abs() < 1e-12, "{} vs {}", d.area(), up.area());
                for s in &d.subareas {
                    for seg in s.segments.iter().filter(|g| g.kind == SegmentKind::Outer) {
                        // outer piece midpoints sit in their owner cell
                        let mid = match seg.geom {
                            SegmentGeom::Line { p0, p1 } => (0.5 * (p0.0 + p1.0), 0.5 * (p0.1 + p1.1)),
                            SegmentGeom::Arc { edge, xi0, xi1 } => edge.point(0.5 * (xi0 + xi1)),
                        };
                        prop_assert_eq!(m.column_of(mid.0), s.column);
                    }
                }
            }

            #[test]
            fn quad_subareas_match_polygon_clipping(c in prop::array::uniform6(-0.4f64..0.4)) {
                let m = mesh();
                let up = mapped_cell(&m, 3, 4, UpstreamMode::Quad, smooth_map(&m, c));
                prop_assume!(up.corner_area() > 0.0);
                let corners = CORNERS.map(|k| up.points[k]);
                // convex quads only: the box clipper oracle needs convexity
                let convex = (0..4).all(|k| {
                    let (a, b, cc) = (corners[k], corners[(k + 1) % 4], corners[(k + 2) % 4]);
                    (b.0 - a.0) * (cc.1 - b.1) - (b.1 - a.1) * (cc.0 - b.0) > 0.0
                });
                prop_assume!(convex);
                let d = decompose(&m, &up, &GeometryStats::default()).unwrap();
                for s in &d.subareas {
                    let (x0, x1) = (m.x_face(s.column), m.x_face(s.column + 1));
                    let (v0, v1) = (m.v_face(s.row as i64), m.v_face(s.row as i64 + 1));
                    let oracle = shoelace(&clip_box(&corners, x0, x1, v0, v1));
                    prop_assert!((s.area() - oracle).abs() < 1e-12, "{} vs {}", s.area(), oracle);
                }
            }

            #[test]
            fn roots_agree_with_bisection(
                s in (-2.0f64..2.0, -2.0f64..2.0),
                e in (-2.0f64..2.0, -2.0f64..2.0),
                bulge in -0.6f64..0.6,
                level in -2.0f64..2.0,
                vertical in any::<bool>(),
            ) {
                let len = ((e.0 - s.0).powi(2) + (e.1 - s.1).powi(2)).sqrt();
                prop_assume!(len > 0.2);
                let mid = (0.5 * (s.0 + e.0) - bulge * (e.1 - s.1), 0.5 * (s.1 + e.1) + bulge * (e.0 - s.0));
                let (edge, _) = Edge::parabola(s, mid, e);
                let line = if vertical { GridLine::Vertical(level) } else { GridLine::Horizontal(level) };
                let (roots, _) = intersect_qc_edge(&edge, line);
                let oracle = bisection_roots(&edge, line);
                for r in &oracle {
                    prop_assert!(roots.as_slice().iter().any(|x| (x - r).abs() < 1e-10),
                        "oracle root {} missing from {:?}", r, roots.as_slice());
                }
            }
        }
    }

    /// Roots of the side/line equation in `(-1, 1)` found by scanning for sign
    /// changes and bisecting; tangential contacts are not reported.
    pub fn bisection_roots(edge: &Edge, line: GridLine) -> Vec<f64> {
        let g = |xi: f64| {
            let p = edge.point(xi);
            match line {
                GridLine::Vertical(x) => p.0 - x,
                GridLine::Horizontal(v) => p.1 - v,
            }
        };
        let n = 4000;
        let mut out = Vec::new();
        for k in 0..n {
            let (mut a, mut b) = (-1.0 + 2.0 * k as f64 / n as f64, -1.0 + 2.0 * (k + 1) as f64 / n as f64);
            let (ga, gb) = (g(a), g(b));
            if ga == 0.0 {
                out.push(a);
                continue;
            }
            if ga * gb >= 0.0 {
                continue;
            }
            for _ in 0..200 {
                let c = 0.5 * (a + b);
                if g(c) * g(a) <= 0.0 {
                    b = c;
                } else {
                    a = c;
                }
                if b - a < 1e-15 {
                    break;
                }
            }
            out.push(0.5 * (a + b));
        }
        out
    }
}
