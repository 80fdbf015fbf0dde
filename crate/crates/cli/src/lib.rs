//! Command-line front end: benchmark problems, configuration, output files
//! and convergence studies.

pub mod config;
pub mod output;
pub mod problems;
pub mod study;

use std::fs;

use sldg_core::driver::{fit_rates, RunSummary, Simulation};
use sldg_core::{Error, Result};

use config::{echo, RunConfig};
use output::{write_rates, write_reversibility, OutputWriter};
use problems::problem_library;

/// Runs a resolved configuration and writes every output into `cfg.out`.
pub fn execute(cfg: &RunConfig) -> Result<RunSummary> {
    let spec = problem_library(&cfg.sim.problem).map_err(|e| Error::Config(e.to_string()))?;
    let mut writer = OutputWriter::create(&cfg.out)?;
    let echo_path = cfg.out.join("config.txt");
    fs::write(&echo_path, echo(cfg)).map_err(|e| Error::Output(format!("{}: {e}", echo_path.display())))?;

    let mesh = spec.mesh(cfg.sim.nx, cfg.sim.nv)?;
    let f0 = spec.project(&mesh, cfg.sim.degree)?;
    let mut sim_cfg = cfg.sim.clone();
    sim_cfg.field = spec.field;
    let mut sim = Simulation::new(mesh, f0, sim_cfg)?;
    let summary = sim.run(&mut writer)?;
    writer.finish()?;

    if let Some(r) = &summary.reversibility {
        write_reversibility(&cfg.out.join("reversibility.txt"), r)?;
    }
    if cfg.fit_rates {
        let (t, e): (Vec<f64>, Vec<f64>) = writer.e_series.iter().copied().unzip();
        write_rates(&cfg.out.join("rates.txt"), &fit_rates(&t, &e)?)?;
    }
    Ok(summary)
}
