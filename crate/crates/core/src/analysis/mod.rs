//! Regime classification, optimal drive placement, breakdown sizes and the
//! scaling / phase-diagram scans.

mod regime;
mod scan;

pub use regime::{
    breakdown_size, classify_regime, even_edge_modes, optimal_alpha, EdgeModes, OptimalAlpha, Regime, RegimeLabel,
};
pub use scan::{
    knee_location, peak_location, phase_diagram_scan, scaling_scan, Axis, DrivePlacement, Param, PhaseCell, ScalingRow,
    ScalingScan, ScanGrid, ScanMode, WINNER_WINDOW,
};
