//! Time stepping: step size, prediction-correction stages, positivity
//! limiting, diagnostics and the velocity-reversal experiment.

use crate::dg_field::DGField;
use crate::error::{Error, Result};
use crate::mesh::PhaseMesh;
use crate::poisson::{jbar0, ElectricField1D, PoissonSolver};
use crate::remap::remap_step;
use crate::tracer::{
    build_upstream_cells, trace_order1, trace_order2, trace_order3, GeometryStats, Lattice, TracedNodes,
    UpstreamMode,
};

/// How the electric field is obtained from `f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldModel {
    Poisson,
    /// `E = 0`: free streaming.
    Zero,
}

/// When diagnostics are recorded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiagCadence {
    /// Every step up to `t = 1`, then every 0.1.
    Default,
    Every(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub problem: String,
    pub nx: usize,
    pub nv: usize,
    pub degree: usize,
    pub qc: bool,
    pub time_order: usize,
    pub efficient: bool,
    pub cfl: f64,
    pub t_max: f64,
    pub pp_limiter: bool,
    pub diag: DiagCadence,
    /// Flip `v` at this time and run as long again.
    pub reverse_at: Option<f64>,
    pub snapshot_times: Vec<f64>,
    pub field: FieldModel,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            problem: "weak-landau".into(),
            nx: 64,
            nv: 64,
            degree: 2,
            qc: false,
            time_order: 3,
            efficient: false,
            cfl: 1.0,
            t_max: 1.0,
            pp_limiter: true,
            diag: DiagCadence::Default,
            reverse_at: None,
            snapshot_times: Vec::new(),
            field: FieldModel::Poisson,
        }
    }
}

/// Degree and upstream shape of one stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stage {
    pub degree: usize,
    pub mode: UpstreamMode,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.nx == 0 || self.nv == 0 {
            return bad("nx and nv must be positive");
        }
        if self.degree > 2 {
            return Err(Error::UnsupportedDegree(self.degree));
        }
        if self.qc && self.degree != 2 {
            return bad("quadratic-curved upstream cells require degree 2");
        }
        if self.time_order != 2 && self.time_order != 3 {
            return bad("time order must be 2 or 3");
        }
        if self.time_order == 3 && self.degree == 0 {
            return bad("time order 3 needs degree 1 or 2");
        }
        if !(self.cfl > 0.0 && self.cfl.is_finite()) {
            return bad("cfl must be positive");
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return bad("tmax must be positive");
        }
        if let Some(t) = self.reverse_at {
            if !(t > 0.0 && t.is_finite()) {
                return bad("reverse-at must be positive");
            }
        }
        if let DiagCadence::Every(h) = self.diag {
            if !(h > 0.0 && h.is_finite()) {
                return bad("diag-every must be positive");
            }
        }
        if self.snapshot_times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return bad("snapshot times must be non-negative");
        }
        Ok(())
    }

    pub fn mode(&self) -> UpstreamMode {
        if self.qc {
            UpstreamMode::QuadCurved
        } else {
            UpstreamMode::Quad
        }
    }

    /// End of the run: `2 T` with reversal at `T`, otherwise `t_max`.
    pub fn final_time(&self) -> f64 {
        self.reverse_at.map_or(self.t_max, |t| 2.0 * t)
    }

    /// Stages of one step. Efficient staging runs the predictions at degrees
    /// 0 and 1 on straight-sided cells.
    pub fn stages(&self) -> Vec<Stage> {
        (1..=self.time_order)
            .map(|s| {
                if s == self.time_order || !self.efficient {
                    Stage {
                        degree: self.degree,
                        mode: self.mode(),
                    }
                } else {
                    Stage {
                        degree: (s - 1).min(self.degree),
                        mode: UpstreamMode::Quad,
                    }
                }
            })
            .collect()
    }

    /// Scheme name such as `P2 SLDG-QC-time3-E-CFL10`.
    pub fn label(&self) -> String {
        format!(
            "P{} SLDG{}-time{}{}-CFL{}",
            self.degree,
            if self.qc { "-QC" } else { "" },
            self.time_order,
            if self.efficient { "-E" } else { "" },
            self.cfl
        )
    }
}

/// `CFL / (v_max / dx + max|E| / dv)`.
pub fn compute_dt(mesh: &PhaseMesh, max_e: f64, cfl: f64) -> f64 {
    cfl / (mesh.v_max() / mesh.dx() + max_e / mesh.dv())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub e_l2: f64,
    pub mass: f64,
    pub l1: f64,
    pub l2: f64,
    pub energy: f64,
    pub entropy: f64,
    /// Relative deviations from the first record, in the order mass, l1,
    /// l2, energy, entropy.
    pub deviation: [f64; 5],
}

impl DiagnosticsRecord {
    fn values(&self) -> [f64; 5] {
        [self.mass, self.l1, self.l2, self.energy, self.entropy]
    }

    /// Fills `deviation` as `(q - q0) / |q0|`, or `q - q0` when `q0 = 0`.
    pub fn with_baseline(mut self, base: &DiagnosticsRecord) -> Self {
        let (now, then) = (self.values(), base.values());
        for k in 0..5 {
            let d = now[k] - then[k];
            self.deviation[k] = if then[k] != 0.0 { d / then[k].abs() } else { d };
        }
        self
    }
}

/// Mass, norms, `int int f v^2 + int E^2`, `int int f log f` (non-positive
/// samples count as zero) and `||E||_2`.
pub fn diagnostics(t: f64, f: &DGField, e: &ElectricField1D) -> DiagnosticsRecord {
    let e2 = e.e_energy();
    DiagnosticsRecord {
        t,
        e_l2: e2.sqrt(),
        mass: f.mass(),
        l1: f.lp_norm(1),
        l2: f.lp_norm(2),
        energy: f.integrate_with(|_, v, g| g * v * v) + e2,
        entropy: f.integrate_with(|_, _, g| if g > 0.0 { g * g.ln() } else { 0.0 }),
        deviation: [0.0; 5],
    }
}

/// Receives diagnostics and snapshots as the run advances.
pub trait Observer {
    fn on_diagnostics(&mut self, _rec: &DiagnosticsRecord, _f: &DGField) -> Result<()> {
        Ok(())
    }

    fn on_snapshot(&mut self, _t: f64, _f: &DGField) -> Result<()> {
        Ok(())
    }

    fn on_step(&mut self, _t: f64, _dt: f64, _f: &DGField) {}
}

impl Observer for () {}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReversibilityError {
    /// L2 error normalized by the domain measure, `(int e^2 / |domain|)^(1/2)`.
    pub l2: f64,
    /// `(int e^2)^(1/2)`.
    pub l2_absolute: f64,
    pub linf: f64,
}

/// `(int (a - b)^2 / |domain|)^(1/2)`.
pub fn l2_error_normalized(a: &DGField, b: &DGField) -> Result<f64> {
    let m = a.mesh();
    let area = m.lx() * 2.0 * m.v_max();
    Ok(a.l2_error(b)? / area.sqrt())
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub records: Vec<DiagnosticsRecord>,
    pub final_field: DGField,
    pub t: f64,
    pub steps: usize,
    pub reversibility: Option<ReversibilityError>,
    /// Largest `|mass_{n+1} - mass_n| / mass_0` over all steps, boundary
    /// outflow included.
    pub max_step_mass_change: f64,
    pub limited_cells: usize,
    pub straight_fallbacks: usize,
    pub grazing_contacts: usize,
}

pub struct Simulation {
    mesh: PhaseMesh,
    cfg: SimConfig,
    solver: PoissonSolver,
    lattice: Lattice,
    stats: GeometryStats,
    f: DGField,
    t: f64,
    steps: usize,
    limited_cells: usize,
}

impl Simulation {
    /// `f0` must already have the configured degree; it is limited when the
    /// positivity limiter is on.
    pub fn new(mesh: PhaseMesh, f0: DGField, cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        if mesh.nx() != cfg.nx || mesh.nv() != cfg.nv {
            return Err(Error::FieldMismatch(format!(
                "mesh is {}x{}, configuration asks for {}x{}",
                mesh.nx(),
                mesh.nv(),
                cfg.nx,
                cfg.nv
            )));
        }
        if *f0.mesh() != mesh || f0.degree() != cfg.degree {
            return Err(Error::FieldMismatch("initial data does not match the configuration".into()));
        }
        let solver = PoissonSolver::new(mesh.lx(), mesh.nx(), cfg.degree)?;
        let lattice = Lattice::new(&mesh, if cfg.degree == 2 { 2 } else { 1 });
        let mut f = f0;
        let limited_cells = if cfg.pp_limiter { f.apply_pp_limiter()? } else { 0 };
        Ok(Self {
            mesh,
            cfg,
            solver,
            lattice,
            stats: GeometryStats::default(),
            f,
            t: 0.0,
            steps: 0,
            limited_cells,
        })
    }

    pub fn mesh(&self) -> &PhaseMesh {
        &self.mesh
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn field(&self) -> &DGField {
        &self.f
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn stats(&self) -> &GeometryStats {
        &self.stats
    }

    pub fn electric_field(&self, f: &DGField) -> Result<ElectricField1D> {
        match self.cfg.field {
            FieldModel::Poisson => ElectricField1D::from_distribution(f, &self.solver, jbar0(f)),
            FieldModel::Zero => Ok(ElectricField1D::zero(self.mesh.lx(), self.mesh.nx(), self.cfg.degree)),
        }
    }

    fn remap_stage(&self, f: &DGField, traced: &TracedNodes, stage: Stage) -> Result<(DGField, usize)> {
        let cells = build_upstream_cells(&self.mesh, traced, stage.mode, &self.stats)?;
        let mut g = remap_step(f, &cells, stage.degree, &self.stats)?;
        let n = if self.cfg.pp_limiter { g.apply_pp_limiter()? } else { 0 };
        Ok((g, n))
    }

    /// `f^{n+1}` from `f^n` and its field; returns the new field and the
    /// number of limited cells over all stages.
    pub fn advance(&self, f: &DGField, e_n: &ElectricField1D, dt: f64) -> Result<(DGField, usize)> {
        let stages = self.cfg.stages();
        let last = *stages.last().expect("at least two stages");
        let first = trace_order1(&self.mesh, self.lattice, e_n, dt);
        if self.cfg.field == FieldModel::Zero {
            // characteristics are straight lines; the prediction is exact
            return self.remap_stage(f, &first, last);
        }
        let (f1, mut limited) = self.remap_stage(f, &first, stages[0])?;
        let e1 = self.electric_field(&f1)?;
        let second = trace_order2(&self.mesh, e_n, &e1, &first, dt);
        let (f2, n) = self.remap_stage(f, &second, stages[1])?;
        limited += n;
        if self.cfg.time_order == 2 {
            return Ok((f2, limited));
        }
        let e2 = self.electric_field(&f2)?;
        let third = trace_order3(&self.mesh, e_n, &e2, &second, dt);
        let (f3, n) = self.remap_stage(f, &third, stages[2])?;
        Ok((f3, limited + n))
    }

    /// Runs to the configured final time.
    pub fn run(&mut self, obs: &mut dyn Observer) -> Result<RunSummary> {
        let t_end = self.cfg.final_time();
        let tol = 1e-12 * t_end.max(1.0);
        let f0 = self.f.clone();
        let mut snaps: Vec<f64> = self
            .cfg
            .snapshot_times
            .iter()
            .copied()
            .filter(|&s| s <= t_end + tol)
            .collect();
        snaps.sort_by(f64::total_cmp);
        snaps.dedup();
        snaps.reverse();

        let mut e = self.electric_field(&self.f)?;
        let base = diagnostics(self.t, &self.f, &e);
        let mut records = vec![base];
        obs.on_diagnostics(&base, &self.f)?;
        let mut next_diag = self.next_diag_after(self.t, tol);
        self.flush_snapshots(&mut snaps, tol, obs)?;

        let mut flipped = false;
        let mut max_step_mass_change: f64 = 0.0;
        let mut mass = base.mass;
        while self.t < t_end - tol {
            let mut stop = t_end;
            if let (Some(tr), false) = (self.cfg.reverse_at, flipped) {
                stop = stop.min(tr);
            }
            if let Some(&s) = snaps.last() {
                stop = stop.min(s);
            }
            let mut dt = compute_dt(&self.mesh, e.max_abs_e(), self.cfg.cfl);
            if self.t + dt >= stop - tol {
                dt = stop - self.t;
            }
            let (f_new, limited) = self.advance(&self.f, &e, dt)?;
            self.limited_cells += limited;
            self.f = f_new;
            self.t += dt;
            if (self.t - stop).abs() <= tol {
                self.t = stop;
            }
            self.steps += 1;
            let m = self.f.mass();
            max_step_mass_change = max_step_mass_change.max((m - mass).abs() / base.mass.abs());
            mass = m;
            obs.on_step(self.t, dt, &self.f);

            if let (Some(tr), false) = (self.cfg.reverse_at, flipped) {
                if self.t >= tr {
                    self.f = self.f.flip_velocity();
                    flipped = true;
                }
            }
            e = self.electric_field(&self.f)?;

            let finished = self.t >= t_end - tol;
            let every_step = self.cfg.diag == DiagCadence::Default && self.t <= 1.0 + tol;
            if finished || every_step || self.t >= next_diag - tol {
                let rec = diagnostics(self.t, &self.f, &e).with_baseline(&base);
                records.push(rec);
                obs.on_diagnostics(&rec, &self.f)?;
                next_diag = self.next_diag_after(self.t, tol);
            }
            self.flush_snapshots(&mut snaps, tol, obs)?;
        }

        let reversibility = match self.cfg.reverse_at {
            Some(_) => {
                let reference = f0.flip_velocity();
                Some(ReversibilityError {
                    l2: l2_error_normalized(&self.f, &reference)?,
                    l2_absolute: self.f.l2_error(&reference)?,
                    linf: self.f.linf_error(&reference)?,
                })
            }
            None => None,
        };
        Ok(RunSummary {
            records,
            final_field: self.f.clone(),
            t: self.t,
            steps: self.steps,
            reversibility,
            max_step_mass_change,
            limited_cells: self.limited_cells,
            straight_fallbacks: self.stats.straight_fallbacks(),
            grazing_contacts: self.stats.grazing_contacts(),
        })
    }

    fn next_diag_after(&self, t: f64, tol: f64) -> f64 {
        let h = match self.cfg.diag {
            DiagCadence::Default => 0.1,
            DiagCadence::Every(h) => h,
        };
        (((t + tol) / h).floor() + 1.0) * h
    }

    fn flush_snapshots(&self, snaps: &mut Vec<f64>, tol: f64, obs: &mut dyn Observer) -> Result<()> {
        while let Some(&s) = snaps.last() {
            if s > self.t + tol {
                break;
            }
            obs.on_snapshot(self.t, &self.f)?;
            snaps.pop();
        }
        Ok(())
    }
}

/// Local maximum of `log ||E||_2`, refined by a parabola through the sample
/// and its neighbours.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub index: usize,
    pub t: f64,
    pub log_e: f64,
}

/// Local maxima in time order. A series that starts out decreasing has its
/// first peak at the first sample.
pub fn find_peaks(t: &[f64], e: &[f64]) -> Vec<Peak> {
    assert_eq!(t.len(), e.len());
    let y: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let mut out = Vec::new();
    if y.len() > 1 && y[0] > y[1] {
        out.push(Peak {
            index: 0,
            t: t[0],
            log_e: y[0],
        });
    }
    for i in 1..y.len().saturating_sub(1) {
        if !(y[i] > y[i - 1] && y[i] >= y[i + 1]) {
            continue;
        }
        let (h1, h2) = (t[i] - t[i - 1], t[i + 1] - t[i]);
        let d1 = (y[i] - y[i - 1]) / h1;
        let d2 = (y[i + 1] - y[i]) / h2;
        let c = (d2 - d1) / (h1 + h2);
        let (mut tp, mut yp) = (t[i], y[i]);
        if c < 0.0 {
            let s = (0.5 * (t[i - 1] + t[i]) - d1 / (2.0 * c)).clamp(t[i - 1], t[i + 1]);
            tp = s;
            yp = y[i - 1] + d1 * (s - t[i - 1]) + c * (s - t[i - 1]) * (s - t[i]);
        }
        out.push(Peak {
            index: i,
            t: tp,
            log_e: yp,
        });
    }
    out
}

/// Slope of `log ||E||_2` between peaks `a` and `b`, counted from 1.
pub fn slope_between(peaks: &[Peak], a: usize, b: usize) -> Result<f64> {
    let need = a.max(b);
    if a == 0 || b == 0 || a == b || peaks.len() < need {
        return Err(Error::InsufficientPeaks {
            found: peaks.len(),
            needed: need,
        });
    }
    let (p, q) = (peaks[a - 1], peaks[b - 1]);
    Ok((q.log_e - p.log_e) / (q.t - p.t))
}

/// Least-squares slope of `log_e` against `t`.
pub fn least_squares_slope(peaks: &[Peak]) -> Result<f64> {
    if peaks.len() < 2 {
        return Err(Error::InsufficientPeaks {
            found: peaks.len(),
            needed: 2,
        });
    }
    let n = peaks.len() as f64;
    let mt = peaks.iter().map(|p| p.t).sum::<f64>() / n;
    let my = peaks.iter().map(|p| p.log_e).sum::<f64>() / n;
    let sxy: f64 = peaks.iter().map(|p| (p.t - mt) * (p.log_e - my)).sum();
    let sxx: f64 = peaks.iter().map(|p| (p.t - mt).powi(2)).sum();
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rates {
    /// Peaks 2 to 3.
    pub gamma1: f64,
    /// Peaks 10 to 16.
    pub gamma2: f64,
    pub peaks: Vec<Peak>,
}

pub fn fit_rates(t: &[f64], e: &[f64]) -> Result<Rates> {
    let peaks = find_peaks(t, e);
    if peaks.len() < 16 {
        return Err(Error::InsufficientPeaks {
            found: peaks.len(),
            needed: 16,
        });
    }
    Ok(Rates {
        gamma1: slope_between(&peaks, 2, 3)?,
        gamma2: slope_between(&peaks, 10, 16)?,
        peaks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn landau_mesh(n: usize) -> PhaseMesh {
        PhaseMesh::new(4.0 * PI, 2.0 * PI, n, n).unwrap()
    }

    fn maxwellian(v: f64) -> f64 {
        (-0.5 * v * v).exp() / (2.0 * PI).sqrt()
    }

    fn config(n: usize, k: usize, qc: bool) -> SimConfig {
        SimConfig {
            nx: n,
            nv: n,
            degree: k,
            qc,
            ..SimConfig::default()
        }
    }

    #[test]
    fn dt_formula() {
        let m = PhaseMesh::new(4.0 * PI, 2.0 * PI, 64, 64).unwrap();
        assert!((compute_dt(&m, 0.0, 10.0) - 0.3125).abs() < 1e-15);
        assert!(compute_dt(&m, 0.2, 10.0) < compute_dt(&m, 0.1, 10.0));
        let m = landau_mesh(128);
        let want = 1.0 / (64.0 + 0.02 / (PI / 32.0));
        assert!((compute_dt(&m, 0.02, 1.0) - want).abs() < 1e-15);
    }

    #[test]
    fn validation() {
        let mut c = config(8, 1, true);
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        c.qc = false;
        c.validate().unwrap();
        c.degree = 0;
        assert!(c.validate().is_err());
        c.time_order = 2;
        c.validate().unwrap();
        c.cfl = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn staging() {
        let mut c = config(8, 2, true);
        c.efficient = true;
        let s = c.stages();
        assert_eq!(s.iter().map(|s| s.degree).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(s[2].mode, UpstreamMode::QuadCurved);
        assert_eq!(s[1].mode, UpstreamMode::Quad);
        c.efficient = false;
        assert!(c.stages().iter().all(|s| s.degree == 2 && s.mode == UpstreamMode::QuadCurved));
        c.time_order = 2;
        c.efficient = true;
        assert_eq!(c.stages().iter().map(|s| s.degree).collect::<Vec<_>>(), vec![0, 2]);
        assert_eq!(c.label(), "P2 SLDG-QC-time2-E-CFL1");
    }

    #[test]
    fn uniform_density_diagnostics() {
        let m = landau_mesh(8);
        let f = DGField::project(&m, 2, |_, _| 1.0).unwrap();
        let e = ElectricField1D::zero(m.lx(), m.nx(), 2);
        let d = diagnostics(0.0, &f, &e);
        assert!((d.mass - 16.0 * PI * PI).abs() < 1e-11);
        let energy = 4.0 * PI * 2.0 * (2.0 * PI).powi(3) / 3.0;
        assert!((d.energy - energy).abs() < 1e-10);
        assert!(d.entropy.abs() < 1e-12);
        assert_eq!(d.with_baseline(&d).deviation, [0.0; 5]);
    }

    #[test]
    fn weak_landau_initial_field_norm() {
        let m = landau_mesh(32);
        let f = DGField::project(&m, 2, |x, v| (1.0 + 0.01 * (0.5 * x).cos()) * maxwellian(v)).unwrap();
        let solver = PoissonSolver::new(m.lx(), m.nx(), 2).unwrap();
        let e = ElectricField1D::from_distribution(&f, &solver, jbar0(&f)).unwrap();
        let d = diagnostics(0.0, &f, &e);
        assert!((d.e_l2 - 0.02 * (2.0 * PI).sqrt()).abs() < 1e-5, "{}", d.e_l2);
    }

    #[test]
    fn equilibrium_is_stationary() {
        let m = landau_mesh(16);
        for (k, qc, order, eff) in [(1, false, 2, false), (2, true, 3, true), (2, false, 3, false)] {
            let f0 = DGField::project(&m, k, |_, v| maxwellian(v)).unwrap();
            let mut c = config(16, k, qc);
            c.time_order = order;
            c.efficient = eff;
            c.cfl = 5.0;
            c.t_max = 3.0;
            let mut sim = Simulation::new(m.clone(), f0, c).unwrap();
            let start = sim.field().clone();
            let out = sim.run(&mut ()).unwrap();
            let err = out.final_field.linf_error(&start).unwrap();
            assert!(err < 1e-11, "k={k} err={err:e}");
            for r in &out.records {
                assert!(r.deviation.iter().all(|d| d.abs() < 1e-11), "{r:?}");
            }
        }
    }

    #[test]
    fn free_streaming_reversal_converges() {
        let err = |n: usize| {
            let m = PhaseMesh::new(2.0 * PI, 6.0, n, n).unwrap();
            let f0 = DGField::project(&m, 1, |x, v| (1.0 + 0.5 * x.cos()) * maxwellian(v)).unwrap();
            let mut c = config(n, 1, false);
            c.field = FieldModel::Zero;
            c.reverse_at = Some(0.7);
            c.cfl = 3.0;
            c.pp_limiter = false;
            let mut sim = Simulation::new(m, f0, c).unwrap();
            let out = sim.run(&mut ()).unwrap();
            assert!((out.t - 1.4).abs() < 1e-15);
            out.reversibility.unwrap().l2
        };
        let (e1, e2) = (err(16), err(32));
        assert!((e1 / e2).log2() > 1.8, "{e1} {e2}");
    }

    #[test]
    fn cadence_and_snapshots() {
        struct Rec {
            diag: Vec<f64>,
            snaps: Vec<f64>,
        }
        impl Observer for Rec {
            fn on_diagnostics(&mut self, r: &DiagnosticsRecord, _: &DGField) -> Result<()> {
                self.diag.push(r.t);
                Ok(())
            }
            fn on_snapshot(&mut self, t: f64, _: &DGField) -> Result<()> {
                self.snaps.push(t);
                Ok(())
            }
        }
        let m = landau_mesh(8);
        let f0 = DGField::project(&m, 1, |x, v| (1.0 + 0.1 * (0.5 * x).cos()) * maxwellian(v)).unwrap();
        let mut c = config(8, 1, false);
        c.cfl = 2.0;
        c.t_max = 1.6;
        c.snapshot_times = vec![0.0, 0.5, 1.25];
        let mut rec = Rec {
            diag: vec![],
            snaps: vec![],
        };
        let mut sim = Simulation::new(m, f0, c).unwrap();
        let out = sim.run(&mut rec).unwrap();
        assert_eq!(rec.snaps, vec![0.0, 0.5, 1.25]);
        assert_eq!(rec.diag.len(), out.records.len());
        assert_eq!(*rec.diag.last().unwrap(), 1.6);
        assert!(rec.diag.windows(2).all(|w| w[1] > w[0]));
        // after t = 1 records are at least 0.1 apart, except the final one
        let late: Vec<f64> = rec.diag.iter().copied().filter(|&t| t > 1.0 + 1e-9).collect();
        for w in late[..late.len() - 1].windows(2) {
            assert!(w[1] - w[0] >= 0.1 - 1e-9);
        }
    }

    #[test]
    fn rates_of_a_damped_signal() {
        let t: Vec<f64> = (0..40000).map(|k| k as f64 * 0.001).collect();
        let e: Vec<f64> = t.iter().map(|&s| (-0.15 * s).exp() * (1.4 * s).cos().abs() + 1e-300).collect();
        let peaks = find_peaks(&t, &e);
        assert_eq!(peaks[0].t, 0.0);
        let g = slope_between(&peaks, 2, 3).unwrap();
        assert!((g + 0.15).abs() < 1e-3, "{g}");
    }

    #[test]
    fn rates_of_a_two_regime_signal() {
        let t: Vec<f64> = (0..50000).map(|k| k as f64 * 0.001).collect();
        let env = |s: f64| if s < 15.0 { -0.28 * s } else { -0.28 * 15.0 + 0.085 * (s - 15.0) };
        let e: Vec<f64> = t.iter().map(|&s| env(s).exp() * (1.3 * s).cos().abs() + 1e-300).collect();
        let r = fit_rates(&t, &e).unwrap();
        assert!((r.gamma1 + 0.28).abs() < 1e-3, "{}", r.gamma1);
        assert!((r.gamma2 - 0.085).abs() < 1e-3, "{}", r.gamma2);
    }

    #[test]
    fn monotone_series_has_no_peaks() {
        let t: Vec<f64> = (0..100).map(|k| k as f64).collect();
        let e: Vec<f64> = t.iter().map(|s| s.exp()).collect();
        assert!(matches!(
            fit_rates(&t, &e),
            Err(Error::InsufficientPeaks { found: 0, needed: 16 })
        ));
        let e: Vec<f64> = t.iter().map(|s| (-s).exp()).collect();
        assert!(matches!(
            fit_rates(&t, &e),
            Err(Error::InsufficientPeaks { found: 1, needed: 16 })
        ));
    }
}
