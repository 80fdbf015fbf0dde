use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use sldg_cli::config::{echo, parse_settings, resolve, Settings};
use sldg_cli::study::{convergence_study, format_table, Study};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

/// Semi-Lagrangian discontinuous Galerkin solver for 1D-1V Vlasov-Poisson.
#[derive(Debug, Parser)]
#[command(name = "sldg", version)]
struct Cli {
    /// Configuration file with `key = value` lines; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// weak-landau, strong-landau, two-stream-1, two-stream-2, bump-on-tail, free-streaming
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    nv: Option<usize>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=2))]
    degree: Option<u8>,
    /// Quadratic-curved upstream cells (degree 2 only).
    #[arg(long)]
    qc: bool,
    #[arg(long, value_parser = clap::value_parser!(u8).range(2..=3))]
    time_order: Option<u8>,
    /// Low-degree prediction stages.
    #[arg(long)]
    efficient: bool,
    #[arg(long)]
    cfl: Option<f64>,
    #[arg(long)]
    tmax: Option<f64>,
    #[arg(long, value_enum)]
    pp_limiter: Option<OnOff>,
    /// Flip the velocity at this time and run as long again.
    #[arg(long)]
    reverse_at: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated snapshot times.
    #[arg(long)]
    snapshot_times: Option<String>,
    /// Diagnostic interval; by default every step up to t = 1, then every 0.1.
    #[arg(long)]
    diag_every: Option<f64>,
    /// Fit damping and growth rates of the field norm into rates.txt.
    #[arg(long)]
    fit_rates: bool,
    /// Convergence study instead of a single run: `spatial:32,64,96` or
    /// `temporal:5,10,20` (reference at CFL 0.1).
    #[arg(long)]
    study: Option<String>,
}

impl Cli {
    fn settings(&self) -> Result<Settings, String> {
        let mut s = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
                parse_settings(&text).map_err(|e| format!("{}: {e}", p.display()))?
            }
            None => Settings::new(),
        };
        let mut set = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                s.insert(k.to_string(), v);
            }
        };
        set("problem", self.problem.clone());
        set("nx", self.nx.map(|v| v.to_string()));
        set("nv", self.nv.map(|v| v.to_string()));
        set("degree", self.degree.map(|v| v.to_string()));
        set("qc", self.qc.then(|| "on".into()));
        set("time-order", self.time_order.map(|v| v.to_string()));
        set("efficient", self.efficient.then(|| "on".into()));
        set("cfl", self.cfl.map(|v| v.to_string()));
        set("tmax", self.tmax.map(|v| v.to_string()));
        set(
            "pp-limiter",
            self.pp_limiter.map(|v| match v {
                OnOff::On => "on".into(),
                OnOff::Off => "off".into(),
            }),
        );
        set("reverse-at", self.reverse_at.map(|v| v.to_string()));
        set("out", self.out.as_ref().map(|p| p.display().to_string()));
        set("snapshot-times", self.snapshot_times.clone());
        set("diag-every", self.diag_every.map(|v| v.to_string()));
        set("fit-rates", self.fit_rates.then(|| "on".into()));
        Ok(s)
    }
}

fn parse_study(spec: &str) -> Result<Study, String> {
    let (kind, list) = spec.split_once(':').ok_or("expected kind:values")?;
    let values: Vec<f64> = list
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}")))
        .collect::<Result<_, _>>()?;
    match kind {
        "spatial" => Ok(Study::Spatial(values.iter().map(|&v| v as usize).collect())),
        "temporal" => Ok(Study::Temporal {
            cfls: values,
            reference_cfl: 0.1,
        }),
        other => Err(format!("unknown study kind '{other}'")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let usage = |msg: String| {
        eprintln!("error: {msg}");
        ExitCode::from(2)
    };
    let cfg = match cli.settings().and_then(|s| resolve(&s).map_err(|e| e.to_string())) {
        Ok(c) => c,
        Err(e) => return usage(e),
    };
    print!("{}", echo(&cfg));

    let result = match &cli.study {
        Some(spec) => match parse_study(spec) {
            Ok(study) => convergence_study(&cfg.sim, &study).map(|rows| print!("{}", format_table(&rows))),
            Err(e) => return usage(e),
        },
        None => sldg_cli::execute(&cfg).map(|s| {
            println!("finished t = {} after {} steps", s.t, s.steps);
            if let Some(r) = s.reversibility {
                println!("reversibility: l2 = {:.6e}, linf = {:.6e}", r.l2, r.linf);
            }
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is_breakdown() => {
            eprintln!("numerical breakdown: {e}");
            ExitCode::from(3)
        }
        Err(sldg_core::Error::Config(msg)) => usage(msg),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
