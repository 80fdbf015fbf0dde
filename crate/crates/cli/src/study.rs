//! Convergence studies: mesh refinement through velocity reversal, or CFL
//! refinement against a small-CFL reference on the same mesh.

use sldg_core::driver::{l2_error_normalized, RunSummary, SimConfig, Simulation};
use sldg_core::{DGField, Error, Result};

use crate::problems::problem_library;

/// Runs `cfg` from its problem's initial data.
pub fn run(cfg: &SimConfig) -> Result<RunSummary> {
    let spec = problem_library(&cfg.problem).map_err(|e| Error::Config(e.to_string()))?;
    let mesh = spec.mesh(cfg.nx, cfg.nv)?;
    let f0 = spec.project(&mesh, cfg.degree)?;
    let mut cfg = cfg.clone();
    cfg.field = spec.field;
    Simulation::new(mesh, f0, cfg)?.run(&mut ())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Study {
    /// Meshes `n x n`, errors from reversal at `reverse_at` (or `t_max`).
    Spatial(Vec<usize>),
    /// CFL numbers compared with a run at `reference_cfl` to `t_max`.
    Temporal { cfls: Vec<f64>, reference_cfl: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyRow {
    /// Mesh size or CFL number.
    pub parameter: f64,
    /// Normalized by the domain measure.
    pub l2: f64,
    pub linf: f64,
    pub order_l2: Option<f64>,
    pub order_linf: Option<f64>,
}

fn orders(rows: &mut [StudyRow], rate: impl Fn(f64, f64) -> f64) {
    for k in 1..rows.len() {
        let (a, b) = (rows[k - 1], rows[k]);
        let r = rate(a.parameter, b.parameter);
        rows[k].order_l2 = Some((a.l2 / b.l2).ln() / r);
        rows[k].order_linf = Some((a.linf / b.linf).ln() / r);
    }
}

pub fn convergence_study(base: &SimConfig, study: &Study) -> Result<Vec<StudyRow>> {
    match study {
        Study::Spatial(meshes) => {
            if meshes.len() < 2 {
                return Err(Error::Config("a spatial study needs at least two meshes".into()));
            }
            let t = base.reverse_at.unwrap_or(base.t_max);
            let mut rows = Vec::new();
            for &n in meshes {
                let cfg = SimConfig {
                    nx: n,
                    nv: n,
                    reverse_at: Some(t),
                    snapshot_times: vec![],
                    ..base.clone()
                };
                let r = run(&cfg)?.reversibility.expect("reversal requested");
                rows.push(StudyRow {
                    parameter: n as f64,
                    l2: r.l2,
                    linf: r.linf,
                    order_l2: None,
                    order_linf: None,
                });
            }
            // error ~ h^p with h ~ 1/n
            orders(&mut rows, |a, b| (b / a).ln());
            Ok(rows)
        }
        Study::Temporal { cfls, reference_cfl } => {
            if cfls.len() < 2 {
                return Err(Error::Config("a temporal study needs at least two CFL numbers".into()));
            }
            let forward = SimConfig {
                reverse_at: None,
                snapshot_times: vec![],
                ..base.clone()
            };
            let reference = run(&SimConfig {
                cfl: *reference_cfl,
                ..forward.clone()
            })?
            .final_field;
            let mut rows = Vec::new();
            for &c in cfls {
                let f: DGField = run(&SimConfig {
                    cfl: c,
                    ..forward.clone()
                })?
                .final_field;
                rows.push(StudyRow {
                    parameter: c,
                    l2: l2_error_normalized(&f, &reference)?,
                    linf: f.linf_error(&reference)?,
                    order_l2: None,
                    order_linf: None,
                });
            }
            // error ~ dt^p with dt ~ CFL
            orders(&mut rows, |a, b| (a / b).ln());
            Ok(rows)
        }
    }
}

pub fn format_table(rows: &[StudyRow]) -> String {
    let mut s = String::from("parameter,l2,order_l2,linf,order_linf\n");
    let o = |x: Option<f64>| x.map_or_else(String::new, |v| format!("{v:.3}"));
    for r in rows {
        s.push_str(&format!(
            "{},{:.3e},{},{:.3e},{}\n",
            r.parameter,
            r.l2,
            o(r.order_l2),
            r.linf,
            o(r.order_linf)
        ));
    }
    s
}
