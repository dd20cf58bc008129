use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::regime::{classify_regime, optimal_alpha, RegimeLabel};
use crate::closed_form::{analytic_full_report, analytic_linear_report};
use crate::error::{Error, Result};
use crate::lattice::{ChainSpec, Parity};
use crate::numeric::fit_slope;
use crate::perturbation::{PerturbationKind, PerturbationSpec};
use crate::response::{compute_linear_report, compute_report, DriveSpec, ResponseReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScanMode {
    Linear,
    AllOrders,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DrivePlacement {
    /// Keep the baseline `m`, clamped to `[1, N]`.
    Fixed,
    /// `m = ⌊αN⌋` clamped to `[1, N]`.
    Alpha(f64),
}

impl DrivePlacement {
    pub fn cell(&self, n: usize, baseline: usize) -> usize {
        let m = match *self {
            DrivePlacement::Fixed => baseline,
            // tiny slack so that e.g. 0.2·10 is not floored to 1
            DrivePlacement::Alpha(a) => (a * n as f64 + 1e-9).floor().max(0.0) as usize,
        };
        m.clamp(1, n.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingScan {
    pub chain: ChainSpec,
    pub drive: DriveSpec,
    pub pert: PerturbationSpec,
    pub n_min: usize,
    pub n_max: usize,
    pub mode: ScanMode,
    pub placement: DrivePlacement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: usize,
    pub m: usize,
    pub numeric: Option<ResponseReport>,
    pub analytic: Option<ResponseReport>,
    /// Numeric value where available, analytic otherwise.
    pub snr: Option<f64>,
    pub snr_per_photon: Option<f64>,
    pub log10_snr: Option<f64>,
    pub flags: Vec<String>,
}

fn flag_of(err: &Error) -> &'static str {
    match err {
        Error::Singular { .. } => "singular",
        Error::Unstable { .. } => "unstable",
        Error::PoleEncountered { .. } => "pole",
        Error::ProtocolMismatch(_) | Error::NotTabulated { .. } => "no_closed_form",
        _ => "error",
    }
}

fn scan_row(scan: &ScalingScan, n: usize) -> ScalingRow {
    let m = scan.placement.cell(n, scan.chain.m);
    let chain = scan.chain.resized(n, m);
    let mut flags = Vec::new();
    let numeric = match scan.mode {
        ScanMode::Linear => compute_linear_report(&chain, &scan.drive, &scan.pert),
        ScanMode::AllOrders => compute_report(&chain, &scan.drive, &scan.pert),
    };
    let analytic = match scan.mode {
        ScanMode::Linear => analytic_linear_report(&chain, &scan.drive, scan.pert.kind, scan.pert.epsilon),
        ScanMode::AllOrders => analytic_full_report(&chain, &scan.drive, scan.pert.kind, scan.pert.epsilon),
    };
    let numeric = numeric.map_err(|e| flags.push(format!("numeric_{}", flag_of(&e)))).ok();
    let analytic = analytic.map_err(|e| flags.push(format!("analytic_{}", flag_of(&e)))).ok();
    let best = numeric.as_ref().or(analytic.as_ref());
    ScalingRow {
        n,
        m,
        snr: best.map(|r| r.snr),
        snr_per_photon: best.map(|r| r.snr_per_photon),
        log10_snr: best.and_then(|r| r.log10_snr),
        numeric,
        analytic,
        flags,
    }
}

/// Per-size reports, numeric and analytic side by side, in increasing `N`.
pub fn scaling_scan(scan: &ScalingScan) -> Result<Vec<ScalingRow>> {
    if scan.n_min == 0 || scan.n_max < scan.n_min {
        return Err(Error::InvalidSpec(format!("bad size range {}..={}", scan.n_min, scan.n_max)));
    }
    scan.drive.validate()?;
    Ok((scan.n_min..=scan.n_max).into_par_iter().map(|n| scan_row(scan, n)).collect())
}

/// Index-wise second difference of `y`, located at the centre points.
fn second_differences(y: &[f64]) -> Vec<f64> {
    y.windows(3).map(|w| w[0] - 2.0 * w[1] + w[2]).collect()
}

/// Vertex of the parabola through three equally spaced points, as an offset in `[-1, 1]`.
fn parabola_offset(a: f64, b: f64, c: f64) -> f64 {
    let den = a - 2.0 * b + c;
    if den == 0.0 {
        0.0
    } else {
        (0.5 * (a - c) / den).clamp(-1.0, 1.0)
    }
}

/// Location of maximal curvature of `log_y` against equally spaced `x`.
pub fn knee_location(x: &[f64], log_y: &[f64]) -> Option<f64> {
    if x.len() < 3 || x.len() != log_y.len() {
        return None;
    }
    let d2: Vec<f64> = second_differences(log_y).iter().map(|v| v.abs()).collect();
    let (i, _) = d2.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
    let step = x[1] - x[0];
    let offset = if i > 0 && i + 1 < d2.len() { parabola_offset(d2[i - 1], d2[i], d2[i + 1]) } else { 0.0 };
    Some(x[i + 1] + offset * step)
}

/// Refined position and value of the maximum of `y` against equally spaced `x`.
pub fn peak_location(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    if x.is_empty() || x.len() != y.len() {
        return None;
    }
    let (i, &v) = y.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
    if i == 0 || i + 1 == y.len() {
        return Some((x[i], v));
    }
    let step = x[1] - x[0];
    Some((x[i] + parabola_offset(y[i - 1], y[i], y[i + 1]) * step, v))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Param {
    T1,
    T2,
    Gamma1,
    Gamma2,
    Kappa,
}

impl Param {
    fn set(&self, chain: &mut ChainSpec, v: f64) {
        match self {
            Param::T1 => chain.t1 = v,
            Param::T2 => chain.t2 = v,
            Param::Gamma1 => chain.gamma1 = v,
            Param::Gamma2 => chain.gamma2 = v,
            Param::Kappa => chain.kappa = v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub param: Param,
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        let d = (self.max - self.min) / (self.steps - 1) as f64;
        (0..self.steps).map(|i| self.min + d * i as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub x: Axis,
    pub y: Axis,
    pub chain: ChainSpec,
    pub drive: DriveSpec,
    /// Strength used for the linear slopes; the signal is quadratic in it so
    /// slopes do not depend on the value.
    pub epsilon: f64,
    /// Skin-effect phase for the enhancement flag.
    pub nhse_phi: f64,
    /// Largest size used when looking for skin-effect enhancement.
    pub nhse_cap: usize,
}

/// Sizes used to compare parities in the phase diagram.
pub const WINNER_WINDOW: std::ops::RangeInclusive<usize> = 4..=8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub x: f64,
    pub y: f64,
    pub t1: f64,
    pub t2: f64,
    pub regime: RegimeLabel,
    pub stable: bool,
    /// `None` on masked cells.
    pub onsite_winner: Option<Parity>,
    pub nhse_enhanced: Option<bool>,
    pub slope_odd: Option<f64>,
    pub slope_even: Option<f64>,
}

/// Slope of `ln(snr_per_photon)` against `N` from numeric linear reports.
fn numeric_slope(
    chain: &ChainSpec,
    drive: &DriveSpec,
    pert: &PerturbationSpec,
    sizes: impl Iterator<Item = usize>,
    placement: DrivePlacement,
) -> Result<f64> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for n in sizes {
        let c = chain.resized(n, placement.cell(n, chain.m));
        let rep = compute_linear_report(&c, drive, pert)?;
        xs.push(n as f64);
        ys.push(rep.snr_per_photon.ln());
    }
    Ok(fit_slope(&xs, &ys))
}

fn phase_cell(grid: &ScanGrid, x: f64, y: f64) -> PhaseCell {
    let mut chain = grid.chain.clone();
    grid.x.param.set(&mut chain, x);
    grid.y.param.set(&mut chain, y);
    let regime = classify_regime(&chain);
    let masked = PhaseCell {
        x,
        y,
        t1: chain.t1,
        t2: chain.t2,
        regime,
        stable: false,
        onsite_winner: None,
        nhse_enhanced: None,
        slope_odd: None,
        slope_even: None,
    };
    if !chain.squeezable() {
        return masked;
    }
    let onsite = PerturbationSpec { kind: PerturbationKind::OnSite, epsilon: grid.epsilon };
    let slope = |parity| {
        let c = ChainSpec { parity, ..chain.clone() };
        numeric_slope(&c, &grid.drive, &onsite, WINNER_WINDOW, DrivePlacement::Fixed)
    };
    let (odd, even) = match (slope(Parity::Odd), slope(Parity::Even)) {
        (Ok(o), Ok(e)) => (o, e),
        _ => return masked,
    };
    let winner = if odd >= even { Parity::Odd } else { Parity::Even };
    let enhanced = match optimal_alpha(&chain) {
        Err(_) => false,
        Ok(opt) => {
            let start = opt.n_min.max(*WINNER_WINDOW.start());
            let end = (start + 4).min(grid.nhse_cap);
            if end <= start {
                false
            } else {
                let c = ChainSpec { parity: Parity::Odd, ..chain.clone() };
                let pert =
                    PerturbationSpec { kind: PerturbationKind::Nhse { phi: grid.nhse_phi }, epsilon: grid.epsilon };
                numeric_slope(&c, &grid.drive, &pert, start..=end, DrivePlacement::Alpha(opt.alpha_star))
                    .map(|s| s > 0.0)
                    .unwrap_or(false)
            }
        }
    };
    PhaseCell {
        stable: true,
        onsite_winner: Some(winner),
        nhse_enhanced: Some(enhanced),
        slope_odd: Some(odd),
        slope_even: Some(even),
        ..masked
    }
}

/// Labelled grid in row-major order (`y` outer, `x` inner).
pub fn phase_diagram_scan(grid: &ScanGrid) -> Result<Vec<PhaseCell>> {
    if grid.x.steps < 2 || grid.y.steps < 2 {
        return Err(Error::InvalidSpec("scan axes need at least 2 steps".into()));
    }
    if grid.x.param == grid.y.param {
        return Err(Error::InvalidSpec("scan axes must differ".into()));
    }
    grid.drive.validate()?;
    let points: Vec<(f64, f64)> =
        grid.y.values().into_iter().flat_map(|y| grid.x.values().into_iter().map(move |x| (x, y))).collect();
    Ok(points.into_par_iter().map(|(x, y)| phase_cell(grid, x, y)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn alpha_placement_floors() {
        let p = DrivePlacement::Alpha(0.2);
        assert_eq!(p.cell(10, 1), 2);
        assert_eq!(p.cell(4, 1), 1);
        assert_eq!(p.cell(14, 1), 2);
        assert_eq!(DrivePlacement::Alpha(1.5).cell(3, 1), 3);
        assert_eq!(DrivePlacement::Fixed.cell(3, 7), 3);
    }

    #[test]
    fn knee_of_broken_line() {
        let x: Vec<f64> = (0..20).map(|v| v as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| if *v < 10.0 { 2.0 * v } else { 20.0 }).collect();
        assert!((knee_location(&x, &y).unwrap() - 10.0).abs() < 0.5);
        let (px, pv) = peak_location(&x, &y.iter().map(|v| -(v - 7.0).powi(2)).collect::<Vec<_>>()).unwrap();
        assert!(pv <= 0.0 && px >= 0.0);
    }

    #[test]
    fn scan_rows_are_ordered() {
        let chain = ChainSpec {
            n_cells: 1,
            parity: Parity::Odd,
            t1: 1.0,
            t2: 1.0,
            gamma1: 1.5,
            gamma2: 2.5,
            kappa: 0.05,
            m: 1,
        };
        let scan = ScalingScan {
            chain,
            drive: DriveSpec { beta_abs: 1.0, theta: FRAC_PI_2, phi_meas: 0.0, tau: 100.0, n_th: 0.0 },
            pert: PerturbationSpec { kind: PerturbationKind::OnSite, epsilon: 1e-6 },
            n_min: 2,
            n_max: 9,
            mode: ScanMode::AllOrders,
            placement: DrivePlacement::Fixed,
        };
        let rows = scaling_scan(&scan).unwrap();
        assert_eq!(rows.iter().map(|r| r.n).collect::<Vec<_>>(), (2..=9).collect::<Vec<_>>());
        assert!(rows.iter().all(|r| r.flags.is_empty()));
    }

    #[test]
    fn masked_cells_carry_sentinel() {
        let grid = ScanGrid {
            x: Axis { param: Param::T1, min: 0.0, max: 2.0, steps: 3 },
            y: Axis { param: Param::T2, min: 0.0, max: 0.5, steps: 2 },
            chain: ChainSpec {
                n_cells: 4,
                parity: Parity::Odd,
                t1: 0.0,
                t2: 0.0,
                gamma1: 1.6,
                gamma2: 2.0,
                kappa: 0.05,
                m: 1,
            },
            drive: DriveSpec { beta_abs: 1.0, theta: FRAC_PI_2, phi_meas: 0.0, tau: 100.0, n_th: 0.0 },
            epsilon: 1e-6,
            nhse_phi: FRAC_PI_2,
            nhse_cap: 30,
        };
        let cells = phase_diagram_scan(&grid).unwrap();
        assert_eq!(cells.len(), 6);
        for c in &cells {
            if c.t1 >= 1.6 {
                assert!(!c.stable && c.onsite_winner.is_none());
            } else {
                assert!(c.stable && c.onsite_winner.is_some());
            }
        }
    }
}
