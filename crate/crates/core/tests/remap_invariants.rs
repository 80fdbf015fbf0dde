use std::f64::consts::PI;

use proptest::prelude::*;
use sldg_core::driver::{SimConfig, Simulation};
use sldg_core::remap::remap_step;
use sldg_core::tracer::{build_upstream_cells, GeometryStats, Lattice, TracedNodes, UpstreamCell, UpstreamMode};
use sldg_core::{DGField, PhaseMesh};

fn mesh() -> PhaseMesh {
    PhaseMesh::new(4.0 * PI, 2.0 * PI, 12, 10).unwrap()
}

fn cells(mesh: &PhaseMesh, mode: UpstreamMode, map: impl Fn(f64, f64) -> (f64, f64)) -> Vec<UpstreamCell> {
    let mut nodes = TracedNodes::identity(mesh, Lattice::new(mesh, 2));
    for k in 0..nodes.x.len() {
        (nodes.x[k], nodes.v[k]) = map(nodes.x[k], nodes.v[k]);
    }
    build_upstream_cells(mesh, &nodes, mode, &GeometryStats::default()).unwrap()
}

fn random_field(mesh: &PhaseMesh, degree: usize, coeffs: &[f64]) -> DGField {
    let n = mesh.n_cells() * (degree + 1) * (degree + 2) / 2;
    let c = (0..n).map(|k| coeffs[k % coeffs.len()] + 0.1 * (k as f64).sin()).collect();
    DGField::from_coeffs(mesh, degree, c).unwrap()
}

fn mode_for(degree: usize) -> UpstreamMode {
    if degree == 2 {
        UpstreamMode::QuadCurved
    } else {
        UpstreamMode::Quad
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // the upstream cells of a map that fixes the velocity boundary tile the domain
    #[test]
    fn mass_is_conserved_by_boundary_fixing_maps(
        degree in 0usize..=2,
        shear in -1.0f64..1.0,
        a in 0.0f64..0.5,
        b in 0.0f64..0.3,
        phase in 0.0f64..6.0,
        coeffs in prop::collection::vec(-1.0f64..1.0, 6),
    ) {
        let m = mesh();
        let (lx, vm) = (m.lx(), m.v_max());
        let up = cells(&m, mode_for(degree), |x, v| {
            let k = 2.0 * PI * x / lx;
            (
                x - shear * v + a * (k + phase).sin(),
                v + b * (k - phase).cos() * (1.0 - (v / vm).powi(2)),
            )
        });
        let f = random_field(&m, degree, &coeffs);
        let g = remap_step(&f, &up, degree, &GeometryStats::default()).unwrap();
        prop_assert!((g.mass() - f.mass()).abs() <= 1e-12 * (1.0 + f.lp_norm(1)));
    }

    #[test]
    fn whole_cell_translation_moves_cells(
        degree in 0usize..=2,
        shift in -3i64..=3,
        coeffs in prop::collection::vec(-1.0f64..1.0, 6),
    ) {
        let m = mesh();
        let dx = m.dx();
        let up = cells(&m, mode_for(degree), |x, v| (x - shift as f64 * dx, v));
        let f = random_field(&m, degree, &coeffs);
        let g = remap_step(&f, &up, degree, &GeometryStats::default()).unwrap();
        for j in 0..m.nv() {
            for i in 0..m.nx() {
                let src = m.wrap_index(i as i64 - shift);
                for (a, b) in g.cell(i, j).iter().zip(f.cell(src, j)) {
                    prop_assert!((a - b).abs() <= 1e-12);
                }
            }
        }
    }
}

#[test]
fn maxwellian_equilibrium_is_stationary() {
    let m = PhaseMesh::new(4.0 * PI, 2.0 * PI, 16, 32).unwrap();
    for (degree, qc) in [(1, false), (2, true)] {
        let f0 = DGField::project(&m, degree, |_, v| (-0.5 * v * v).exp() / (2.0 * PI).sqrt()).unwrap();
        let cfg = SimConfig {
            nx: 16,
            nv: 32,
            degree,
            qc,
            cfl: 3.0,
            t_max: 2.0,
            ..SimConfig::default()
        };
        let mut sim = Simulation::new(m.clone(), f0, cfg).unwrap();
        let start = sim.field().clone();
        let s = sim.run(&mut ()).unwrap();
        assert!(s.final_field.linf_error(&start).unwrap() < 1e-11, "degree {degree}");
        assert!(s.records.iter().all(|r| r.e_l2 < 1e-12));
    }
}
