//! Size-scaling and phase-diagram behaviour at reference parameter sets.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use nhsense_core::analysis::{
    breakdown_size, classify_regime, knee_location, optimal_alpha, peak_location, phase_diagram_scan, scaling_scan,
    Axis, DrivePlacement, Param, Regime, ScalingScan, ScanGrid, ScanMode,
};
use nhsense_core::lattice::check_stability;
use nhsense_core::response::compute_linear_report;
use nhsense_core::{fit_slope, ChainSpec, DriveSpec, Parity, PerturbationKind, PerturbationSpec};

fn drive(theta: f64) -> DriveSpec {
    DriveSpec { beta_abs: 1.0, theta, phi_meas: 0.0, tau: 100.0, n_th: 0.0 }
}

fn linear_slope(chain: &ChainSpec, parity: Parity) -> f64 {
    let pert = PerturbationSpec { kind: PerturbationKind::OnSite, epsilon: 1e-6 };
    let (x, y): (Vec<f64>, Vec<f64>) = (4..=8)
        .map(|n| {
            let c = ChainSpec { parity, ..chain.resized(n, 1) };
            (n as f64, compute_linear_report(&c, &drive(FRAC_PI_4), &pert).unwrap().snr_per_photon.ln())
        })
        .unzip();
    fit_slope(&x, &y)
}

#[test]
fn regime_three_odd_amplifies_even_attenuates() {
    let mut rng = StdRng::seed_from_u64(3);
    let mut sampled = 0;
    while sampled < 12 {
        // positive hoppings, as in the phase diagrams, keep the (γ1+t1)/(γ2−t2) path dominant
        let gamma1 = rng.gen_range(1.0..2.5);
        let gamma2 = rng.gen_range(0.2..0.8);
        let chain = ChainSpec {
            n_cells: 4,
            parity: Parity::Odd,
            t1: rng.gen_range(0.0..0.9) * gamma1,
            t2: rng.gen_range(0.0..0.9) * gamma2,
            gamma1,
            gamma2,
            kappa: 0.05,
            m: 1,
        };
        let label = classify_regime(&chain);
        if label.regime != Regime::III || label.boundary || !check_stability(&chain.resized(8, 1)).stable {
            continue;
        }
        let odd = linear_slope(&chain, Parity::Odd);
        let even = linear_slope(&chain, Parity::Even);
        assert!(odd > 0.0 && even < 0.0, "{chain:?}: odd {odd} even {even}");
        sampled += 1;
    }
}

fn phase_grid(gamma1: f64, gamma2: f64) -> ScanGrid {
    ScanGrid {
        x: Axis { param: Param::T1, min: -1.5, max: 1.5, steps: 7 },
        y: Axis { param: Param::T2, min: -1.8, max: 1.8, steps: 7 },
        chain: ChainSpec { n_cells: 4, parity: Parity::Odd, t1: 0.0, t2: 0.0, gamma1, gamma2, kappa: 0.05, m: 1 },
        drive: drive(FRAC_PI_4),
        epsilon: 1e-6,
        nhse_phi: FRAC_PI_2,
        nhse_cap: 12,
    }
}

#[test]
fn regime_one_prefers_even_chain() {
    let cells = phase_diagram_scan(&phase_grid(1.6, 2.0)).unwrap();
    let regime_one: Vec<_> = cells.iter().filter(|c| c.stable && c.regime.regime == Regime::I).collect();
    assert!(!regime_one.is_empty());
    for c in regime_one {
        assert_eq!(c.onsite_winner, Some(Parity::Even), "{c:?}");
    }
    for c in cells.iter().filter(|c| c.t1.abs() >= 1.6) {
        assert!(!c.stable && c.onsite_winner.is_none());
    }
}

#[test]
fn odd_region_prefers_odd_chain() {
    let cells = phase_diagram_scan(&phase_grid(2.0, 1.6)).unwrap();
    let odd_region: Vec<_> = cells.iter().filter(|c| c.stable && c.regime.regime == Regime::IIo).collect();
    assert!(!odd_region.is_empty());
    for c in odd_region {
        assert_eq!(c.onsite_winner, Some(Parity::Odd), "{c:?}");
    }
}

#[test]
fn phase_grid_is_row_major_and_deterministic() {
    let grid = phase_grid(1.6, 2.0);
    let a = phase_diagram_scan(&grid).unwrap();
    let b = phase_diagram_scan(&grid).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 49);
    let close = |c: &nhsense_core::analysis::PhaseCell, t1: f64, t2: f64| {
        (c.t1 - t1).abs() < 1e-12 && (c.t2 - t2).abs() < 1e-12
    };
    assert!(close(&a[1], -1.0, -1.8), "{:?}", a[1]);
    assert!(close(&a[7], -1.5, -1.2), "{:?}", a[7]);
}

#[test]
fn skin_effect_enhancement_flag() {
    let mut grid = phase_grid(0.7, 0.4);
    grid.x = Axis { param: Param::T1, min: 0.4, max: 0.5, steps: 2 };
    grid.y = Axis { param: Param::T2, min: 0.2, max: 0.3, steps: 2 };
    let cells = phase_diagram_scan(&grid).unwrap();
    assert!(cells.iter().all(|c| c.nhse_enhanced == Some(true)), "{cells:?}");
}

fn knee_of_snr(
    chain: ChainSpec,
    theta: f64,
    kind: PerturbationKind,
    eps0: f64,
    placement: DrivePlacement,
    n: (usize, usize),
) -> f64 {
    let scan = ScalingScan {
        chain,
        drive: drive(theta),
        pert: PerturbationSpec { kind, epsilon: eps0 },
        n_min: n.0,
        n_max: n.1,
        mode: ScanMode::AllOrders,
        placement,
    };
    let rows = scaling_scan(&scan).unwrap();
    let x: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.snr.unwrap().ln()).collect();
    knee_location(&x, &y).unwrap()
}

#[test]
fn knees_track_breakdown_size() {
    let onsite_set =
        ChainSpec { n_cells: 1, parity: Parity::Odd, t1: 1.0, t2: 1.0, gamma1: 1.5, gamma2: 2.5, kappa: 0.05, m: 1 };
    for eps0 in [1e-6, 1e-4] {
        let knee =
            knee_of_snr(onsite_set.clone(), FRAC_PI_2, PerturbationKind::OnSite, eps0, DrivePlacement::Fixed, (1, 30));
        let predicted = breakdown_size(&onsite_set, PerturbationKind::OnSite, eps0, None).unwrap();
        assert!((knee - predicted).abs() <= 1.0, "on-site eps0 {eps0}: knee {knee} vs {predicted}");
    }
    let skin_set =
        ChainSpec { n_cells: 1, parity: Parity::Odd, t1: 0.6, t2: 0.4, gamma1: 1.1, gamma2: 1.6, kappa: 0.05, m: 1 };
    let alpha = optimal_alpha(&skin_set).unwrap().alpha_star;
    let kind = PerturbationKind::Nhse { phi: FRAC_PI_2 };
    // the skin-effect SNR saturates smoothly, so the breakdown shows as the per-photon peak
    let scan = ScalingScan {
        chain: skin_set.clone(),
        drive: drive(FRAC_PI_4),
        pert: PerturbationSpec { kind, epsilon: 1e-6 },
        n_min: 5,
        n_max: 40,
        mode: ScanMode::AllOrders,
        placement: DrivePlacement::Alpha(alpha),
    };
    let rows = scaling_scan(&scan).unwrap();
    let x: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.snr_per_photon.unwrap()).collect();
    let (peak, _) = peak_location(&x, &y).unwrap();
    let predicted = breakdown_size(&skin_set, kind, 1e-6, Some(alpha)).unwrap();
    assert!((peak - predicted).abs() <= 1.0, "skin effect: peak {peak} vs {predicted}");
}

#[test]
fn linear_scan_rows_carry_both_reports() {
    let scan = ScalingScan {
        chain: ChainSpec {
            n_cells: 1,
            parity: Parity::Odd,
            t1: 0.5,
            t2: 0.3,
            gamma1: 0.7,
            gamma2: 0.4,
            kappa: 0.05,
            m: 1,
        },
        drive: drive(FRAC_PI_4),
        pert: PerturbationSpec { kind: PerturbationKind::OnSite, epsilon: 1e-6 },
        n_min: 2,
        n_max: 12,
        mode: ScanMode::Linear,
        placement: DrivePlacement::Fixed,
    };
    let rows = scaling_scan(&scan).unwrap();
    assert_eq!(rows.iter().map(|r| r.n).collect::<Vec<_>>(), (2..=12).collect::<Vec<_>>());
    for r in &rows {
        let (num, ana) = (r.numeric.as_ref().unwrap(), r.analytic.as_ref().unwrap());
        assert!((num.snr - ana.snr).abs() <= 1e-10 * ana.snr, "N={}", r.n);
        assert!(r.flags.is_empty());
    }
}
