use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use nhsense_core::analysis::{classify_regime, optimal_alpha, Regime};
use nhsense_core::closed_form::analytic_linear_report;
use nhsense_core::lattice::check_stability;
use nhsense_core::perturbation::assemble_full;
use nhsense_core::response::{
    compute_linear_report, compute_report, compute_report_in_frame, port_inverse_lab, port_transfer,
};
use nhsense_core::{ChainSpec, DriveSpec, Frame, Parity, PerturbationKind, PerturbationSpec};

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn chain_strategy(max_cells: usize) -> impl Strategy<Value = ChainSpec> {
    (1..=max_cells, any::<bool>(), 0.5f64..2.0, 0.5f64..2.0, -0.7f64..0.7, -0.7f64..0.7, 0.05f64..1.0, 0usize..100)
        .prop_map(|(n, odd, gamma1, gamma2, f1, f2, kappa, pick)| ChainSpec {
            n_cells: n,
            parity: if odd { Parity::Odd } else { Parity::Even },
            t1: f1 * gamma1,
            t2: f2 * gamma2,
            gamma1,
            gamma2,
            kappa,
            m: 1 + pick % n,
        })
        .prop_filter("stable", |c| check_stability(c).stable)
}

fn drive_strategy() -> impl Strategy<Value = DriveSpec> {
    (0.5f64..2.0, 0.0f64..6.3, 0.0f64..3.2, 1.0f64..100.0, 0.0f64..2.0)
        .prop_map(|(beta_abs, theta, phi_meas, tau, n_th)| DriveSpec { beta_abs, theta, phi_meas, tau, n_th })
}

fn kind_strategy() -> impl Strategy<Value = PerturbationKind> {
    prop_oneof![Just(PerturbationKind::OnSite), (0.0f64..6.3).prop_map(|phi| PerturbationKind::Nhse { phi })]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn observables_do_not_depend_on_gauge(
        chain in chain_strategy(5),
        drive in drive_strategy(),
        kind in kind_strategy(),
        eps in 1e-3f64..0.1,
        n0 in -5.0f64..8.0,
        m0 in -5.0f64..8.0,
    ) {
        let pert = PerturbationSpec { kind, epsilon: eps };
        let lab = compute_report(&chain, &drive, &pert).unwrap();
        let sq = compute_report_in_frame(&chain, &drive, &pert, Frame::Squeezed { n0, m0 }).unwrap();
        // identically vanishing signals leave only roundoff in the moment shift
        let floor = chain.kappa * drive.tau * 2.0 * lab.n_tot * 1e-24;
        prop_assert!((lab.signal - sq.signal).abs() <= 1e-9 * lab.signal.max(sq.signal) + floor,
            "{} {}", lab.signal, sq.signal);
        prop_assert!(rel(lab.noise, sq.noise) < 1e-9);
        prop_assert!(rel(lab.n_tot, sq.n_tot) < 1e-9);
    }

    #[test]
    fn unperturbed_noise_sits_at_floor(chain in chain_strategy(8), drive in drive_strategy(), kind in kind_strategy()) {
        let rep = compute_report(&chain, &drive, &PerturbationSpec { kind, epsilon: 0.0 }).unwrap();
        prop_assert!((rep.noise - drive.noise_floor()).abs() < 1e-10);
        prop_assert!(rep.signal == 0.0);
    }

    #[test]
    fn port_transfer_is_symplectic(chain in chain_strategy(6), kind in kind_strategy(), eps in 0.0f64..0.2) {
        let sys = assemble_full(&chain, &PerturbationSpec { kind, epsilon: eps }, Frame::Lab).unwrap();
        if let Ok(port) = port_inverse_lab(&sys) {
            let t = port_transfer(&port, chain.kappa);
            let det = t[0][0] * t[1][1] - t[0][1] * t[1][0];
            let scale = t.iter().flatten().map(|v| v.abs()).fold(1.0f64, f64::max);
            prop_assert!((det - 1.0).abs() < 1e-10 * scale * scale, "det {det}");
        }
    }

    #[test]
    fn linear_closed_forms_match_numerics(chain in chain_strategy(7), drive in drive_strategy(), kind in kind_strategy()) {
        let pert = PerturbationSpec { kind, epsilon: 1e-6 };
        let num = compute_linear_report(&chain, &drive, &pert).unwrap();
        let ana = analytic_linear_report(&chain, &drive, kind, 1e-6).unwrap();
        let sig_scale = num.signal.max(ana.signal);
        // a signal that vanishes by symmetry is compared on the moment scale
        let floor = chain.kappa * drive.tau * (1e-12 * (2.0 * num.n_tot).sqrt() * 1e-6).powi(2);
        prop_assert!(sig_scale <= floor || rel(num.signal, ana.signal) < 1e-8, "{} {}", num.signal, ana.signal);
        prop_assert!(rel(num.n_tot, ana.n_tot) < 1e-10);
        prop_assert!(rel(num.noise, ana.noise) < 1e-12);
    }

    #[test]
    fn small_eps_full_report_approaches_linear(chain in chain_strategy(4), drive in drive_strategy(), kind in kind_strategy()) {
        let pert = PerturbationSpec { kind, epsilon: 1e-12 };
        let full = compute_report(&chain, &drive, &pert).unwrap();
        let lin = compute_linear_report(&chain, &drive, &pert).unwrap();
        let floor = 1e-26 * lin.n_tot * chain.kappa * drive.tau;
        prop_assert!(lin.signal.max(full.signal) <= floor || rel(full.signal, lin.signal) < 1e-4,
            "{} {}", full.signal, lin.signal);
        prop_assert!(rel(full.n_tot, lin.n_tot) < 1e-4);
    }

    #[test]
    fn optimal_alpha_balances_edge_gains(
        gamma1 in 0.5f64..2.0, gamma2 in 0.5f64..2.0, f1 in -0.9f64..0.9, f2 in -0.9f64..0.9,
    ) {
        let chain = ChainSpec { n_cells: 5, parity: Parity::Odd, t1: f1 * gamma1, t2: f2 * gamma2, gamma1, gamma2, kappa: 0.1, m: 1 };
        if let Ok(opt) = optimal_alpha(&chain) {
            let (ll, lr) = (chain.ratio_l().ln(), chain.ratio_r().ln());
            // large-N log form of the balance condition
            let lhs = opt.alpha_star * ll;
            let rhs = (1.0 - opt.alpha_star) * lr;
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
            prop_assert!(opt.alpha_star > 0.0 && opt.alpha_star < 1.0);
            prop_assert_eq!(opt.n_min, (1.0 / opt.alpha_star).ceil() as usize);
        }
    }
}

#[test]
fn regime_labels_partition_parameter_space() {
    let mut rng = StdRng::seed_from_u64(7);
    let mut counts = [0usize; 4];
    for _ in 0..10_000 {
        let gamma1 = rng.gen_range(0.05..3.0);
        let gamma2 = rng.gen_range(0.05..3.0);
        let chain = ChainSpec {
            n_cells: 3,
            parity: Parity::Odd,
            t1: rng.gen_range(-3.0..3.0),
            t2: rng.gen_range(-3.0..3.0),
            gamma1,
            gamma2,
            kappa: 0.1,
            m: 1,
        };
        let label = classify_regime(&chain);
        assert!(!label.boundary);
        let a = (chain.gamma2 + chain.t2).abs() > (chain.gamma1 - chain.t1).abs();
        let b = (chain.gamma2 - chain.t2).abs() > (chain.gamma1 + chain.t1).abs();
        let expected_family = match (a, b) {
            (true, true) => 0,
            (false, false) => 3,
            _ => 1,
        };
        let family = match label.regime {
            Regime::I => 0,
            Regime::IIe | Regime::IIo => 1,
            Regime::III => 3,
        };
        assert_eq!(family, expected_family, "{chain:?}");
        counts[match label.regime {
            Regime::I => 0,
            Regime::IIe => 1,
            Regime::IIo => 2,
            Regime::III => 3,
        }] += 1;
    }
    assert!(counts.iter().all(|&c| c > 100), "{counts:?}");
}
