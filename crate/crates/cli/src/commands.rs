use serde::Serialize;

use nhsense_core::analysis::{phase_diagram_scan, scaling_scan, PhaseCell, ScalingRow, ScalingScan};
use nhsense_core::closed_form::{analytic_full_report, analytic_linear_report};
use nhsense_core::lattice::check_stability;
use nhsense_core::response::{compute_linear_report, compute_report};
use nhsense_core::{Error, Parity, ResponseReport};

use crate::config::{Format, Order, RunConfig, ScalingSettings, Source};
use crate::format::{float, opt_float, to_json};
use crate::verify;

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Core(Error),
    Output(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Output(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Output(e.to_string())
    }
}

/// Formatted output of a completed run.
pub struct Artifact {
    pub bytes: Vec<u8>,
    /// Names of verification suites with failing checks.
    pub failed_suites: Vec<String>,
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Artifact, Failure> {
    let bytes = w.into_inner().map_err(|e| Failure::Output(e.to_string()))?;
    Ok(Artifact { bytes, failed_suites: Vec::new() })
}

fn json<T: Serialize>(value: &T) -> Result<Artifact, Failure> {
    Ok(Artifact { bytes: to_json(value)?, failed_suites: Vec::new() })
}

pub fn run(cfg: &RunConfig) -> Result<Artifact, Failure> {
    use crate::config::Command::*;
    match cfg.command {
        Response => response(cfg),
        Scaling => scaling(cfg),
        PhaseDiagram => phase_diagram(cfg),
        Stability => json(&check_stability(&cfg.chain)),
        Verify => {
            check_stability(&cfg.chain).require_stable()?;
            let summary = verify::run(&cfg.chain, &cfg.drive, &cfg.pert);
            let mut artifact = json(&summary)?;
            artifact.failed_suites = summary.suites.iter().filter(|s| s.failed > 0).map(|s| s.name.clone()).collect();
            Ok(artifact)
        }
    }
}

fn response(cfg: &RunConfig) -> Result<Artifact, Failure> {
    check_stability(&cfg.chain).require_stable()?;
    let (chain, drive, pert) = (&cfg.chain, &cfg.drive, &cfg.pert);
    let report = match cfg.response {
        (Order::AllOrders, Source::Numeric) => compute_report(chain, drive, pert)?,
        (Order::Linear, Source::Numeric) => compute_linear_report(chain, drive, pert)?,
        (Order::AllOrders, Source::Analytic) => analytic_full_report(chain, drive, pert.kind, pert.epsilon)?,
        (Order::Linear, Source::Analytic) => analytic_linear_report(chain, drive, pert.kind, pert.epsilon)?,
    };
    match cfg.format {
        Format::Json => json(&report),
        Format::Csv => {
            let mut w = csv_writer();
            w.write_record([
                "signal",
                "noise",
                "noise_eps",
                "n_tot",
                "n_tot_eps",
                "snr",
                "snr_per_photon",
                "log10_signal",
                "log10_snr",
                "rcond",
            ])?;
            let r: &ResponseReport = &report;
            w.write_record([
                float(r.signal),
                float(r.noise),
                float(r.noise_eps),
                float(r.n_tot),
                float(r.n_tot_eps),
                float(r.snr),
                float(r.snr_per_photon),
                opt_float(r.log10_signal),
                opt_float(r.log10_snr),
                opt_float(r.rcond),
            ])?;
            finish(w)
        }
    }
}

fn scaling(cfg: &RunConfig) -> Result<Artifact, Failure> {
    let s: &ScalingSettings = cfg.scaling.as_ref().expect("validated config carries scaling settings");
    for n in s.n_min..=s.n_max {
        let chain = cfg.chain.resized(n, s.placement.cell(n, cfg.chain.m));
        check_stability(&chain).require_stable().map_err(|e| match e {
            Error::Unstable { reason, max_real_eigenvalue } => {
                Error::Unstable { reason: format!("N = {n}, m = {}: {reason}", chain.m), max_real_eigenvalue }
            }
            other => other,
        })?;
    }
    let scan = ScalingScan {
        chain: cfg.chain.clone(),
        drive: cfg.drive,
        pert: cfg.pert,
        n_min: s.n_min,
        n_max: s.n_max,
        mode: s.mode,
        placement: s.placement,
    };
    let rows = scaling_scan(&scan)?;
    match cfg.format {
        Format::Json => {
            #[derive(Serialize)]
            struct Out<'a> {
                scan: &'a ScalingScan,
                rows: &'a [ScalingRow],
            }
            json(&Out { scan: &scan, rows: &rows })
        }
        Format::Csv => {
            let mut w = csv_writer();
            w.write_record([
                "N",
                "m",
                "signal_numeric",
                "signal_analytic",
                "noise_numeric",
                "noise_analytic",
                "n_tot_numeric",
                "n_tot_analytic",
                "snr",
                "snr_per_photon",
                "log10_signal",
                "log10_snr",
                "flags",
            ])?;
            for r in &rows {
                let (num, ana) = (r.numeric.as_ref(), r.analytic.as_ref());
                let log10_signal = num.or(ana).and_then(|x| x.log10_signal);
                w.write_record([
                    r.n.to_string(),
                    r.m.to_string(),
                    opt_float(num.map(|x| x.signal)),
                    opt_float(ana.map(|x| x.signal)),
                    opt_float(num.map(|x| x.noise)),
                    opt_float(ana.map(|x| x.noise)),
                    opt_float(num.map(|x| x.n_tot)),
                    opt_float(ana.map(|x| x.n_tot)),
                    opt_float(r.snr),
                    opt_float(r.snr_per_photon),
                    opt_float(log10_signal),
                    opt_float(r.log10_snr),
                    r.flags.join(";"),
                ])?;
            }
            finish(w)
        }
    }
}

fn phase_diagram(cfg: &RunConfig) -> Result<Artifact, Failure> {
    let grid = cfg.grid.as_ref().expect("validated config carries a grid");
    let cells = phase_diagram_scan(grid)?;
    match cfg.format {
        Format::Json => {
            #[derive(Serialize)]
            struct Out<'a> {
                cells: &'a [PhaseCell],
            }
            json(&Out { cells: &cells })
        }
        Format::Csv => {
            let mut w = csv_writer();
            w.write_record([
                "t1",
                "t2",
                "regime",
                "onsite_winner",
                "nhse_enhanced",
                "stable",
                "boundary",
                "slope_odd",
                "slope_even",
            ])?;
            for c in &cells {
                w.write_record([
                    float(c.t1),
                    float(c.t2),
                    c.regime.regime.to_string(),
                    match c.onsite_winner {
                        Some(Parity::Odd) => "odd".into(),
                        Some(Parity::Even) => "even".into(),
                        None => String::new(),
                    },
                    c.nhse_enhanced.map(|b| b.to_string()).unwrap_or_default(),
                    c.stable.to_string(),
                    c.regime.boundary.to_string(),
                    opt_float(c.slope_odd),
                    opt_float(c.slope_even),
                ])?;
            }
            finish(w)
        }
    }
}
