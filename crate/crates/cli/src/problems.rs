//! Benchmark problems: domains and initial data.

use std::f64::consts::PI;

use sldg_core::driver::FieldModel;
use sldg_core::{DGField, PhaseMesh, Result};

/// Parameters shared by the benchmark formulas; unused ones are zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Params {
    pub alpha: f64,
    pub k: f64,
    pub u: f64,
    pub v_t: f64,
    pub n_p: f64,
    pub n_b: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ProblemSpec {
    pub id: &'static str,
    pub lx: f64,
    pub v_max: f64,
    pub params: Params,
    pub field: FieldModel,
    initial: fn(&Params, f64, f64) -> f64,
}

pub const PROBLEM_IDS: [&str; 6] = [
    "weak-landau",
    "strong-landau",
    "two-stream-1",
    "two-stream-2",
    "bump-on-tail",
    "free-streaming",
];

fn gaussian(v: f64, center: f64, width: f64) -> f64 {
    (-(v - center).powi(2) / (2.0 * width * width)).exp()
}

fn landau(p: &Params, x: f64, v: f64) -> f64 {
    (1.0 + p.alpha * (p.k * x).cos()) * gaussian(v, 0.0, 1.0) / (2.0 * PI).sqrt()
}

fn two_stream_1(p: &Params, x: f64, v: f64) -> f64 {
    let k = p.k;
    let pert = ((2.0 * k * x).cos() + (3.0 * k * x).cos()) / 1.2 + (k * x).cos();
    2.0 / (7.0 * (2.0 * PI).sqrt()) * (1.0 + 5.0 * v * v) * (1.0 + p.alpha * pert) * gaussian(v, 0.0, 1.0)
}

fn two_stream_2(p: &Params, x: f64, v: f64) -> f64 {
    (gaussian(v, p.u, p.v_t) + gaussian(v, -p.u, p.v_t)) / (2.0 * p.v_t * (2.0 * PI).sqrt())
        * (1.0 + p.alpha * (p.k * x).cos())
}

/// `f_BOT(v)`.
pub fn bump_on_tail_profile(p: &Params, v: f64) -> f64 {
    p.n_p * gaussian(v, 0.0, 1.0) + p.n_b * gaussian(v, p.u, p.v_t)
}

fn bump_on_tail(p: &Params, x: f64, v: f64) -> f64 {
    bump_on_tail_profile(p, v) * (1.0 + p.alpha * (p.k * x).cos())
}

fn free_streaming(p: &Params, x: f64, v: f64) -> f64 {
    (1.0 + p.alpha * (p.k * x).cos()) * gaussian(v, 0.0, 1.0) / (2.0 * PI).sqrt()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown problem '{0}'; valid problems: {}", PROBLEM_IDS.join(", "))]
pub struct UnknownProblem(pub String);

pub fn problem_library(id: &str) -> std::result::Result<ProblemSpec, UnknownProblem> {
    let landau_params = |alpha| Params {
        alpha,
        k: 0.5,
        ..Params::default()
    };
    let spec = match id {
        "weak-landau" => ProblemSpec {
            id: "weak-landau",
            lx: 4.0 * PI,
            v_max: 2.0 * PI,
            params: landau_params(0.01),
            field: FieldModel::Poisson,
            initial: landau,
        },
        "strong-landau" => ProblemSpec {
            id: "strong-landau",
            lx: 4.0 * PI,
            v_max: 2.0 * PI,
            params: landau_params(0.5),
            field: FieldModel::Poisson,
            initial: landau,
        },
        "two-stream-1" => ProblemSpec {
            id: "two-stream-1",
            lx: 4.0 * PI,
            v_max: 10.0,
            params: landau_params(0.01),
            field: FieldModel::Poisson,
            initial: two_stream_1,
        },
        "two-stream-2" => {
            let k = 2.0 / 13.0;
            ProblemSpec {
                id: "two-stream-2",
                lx: 2.0 * PI / k,
                v_max: 2.0 * PI,
                params: Params {
                    alpha: 0.05,
                    k,
                    u: 0.99,
                    v_t: 0.3,
                    ..Params::default()
                },
                field: FieldModel::Poisson,
                initial: two_stream_2,
            }
        }
        "bump-on-tail" => {
            let s = (2.0 * PI).sqrt();
            ProblemSpec {
                id: "bump-on-tail",
                lx: 20.0 * PI / 3.0,
                v_max: 13.0,
                params: Params {
                    alpha: 0.04,
                    k: 0.3,
                    u: 4.5,
                    v_t: 0.5,
                    n_p: 9.0 / (10.0 * s),
                    n_b: 2.0 / (10.0 * s),
                },
                field: FieldModel::Poisson,
                initial: bump_on_tail,
            }
        }
        "free-streaming" => ProblemSpec {
            id: "free-streaming",
            lx: 2.0 * PI,
            v_max: 6.0,
            params: Params {
                alpha: 0.5,
                k: 1.0,
                ..Params::default()
            },
            field: FieldModel::Zero,
            initial: free_streaming,
        },
        other => return Err(UnknownProblem(other.to_string())),
    };
    Ok(spec)
}

impl ProblemSpec {
    pub fn initial(&self, x: f64, v: f64) -> f64 {
        (self.initial)(&self.params, x, v)
    }

    pub fn mesh(&self, nx: usize, nv: usize) -> Result<PhaseMesh> {
        PhaseMesh::new(self.lx, self.v_max, nx, nv)
    }

    pub fn project(&self, mesh: &PhaseMesh, degree: usize) -> Result<DGField> {
        DGField::project(mesh, degree, |x, v| self.initial(x, v))
    }

    /// Exact solution for problems without a field: `f0(x - v t, v)`.
    pub fn exact(&self, t: f64, x: f64, v: f64) -> Option<f64> {
        (self.field == FieldModel::Zero).then(|| self.initial(x - v * t, v))
    }
}
