use std::f64::consts::FRAC_PI_2;

use crate::closed_form::inverse::{theta_factor, POLE_TOL};
use crate::error::{Error, Result};
use crate::lattice::{ChainSpec, Parity, SqueezingParams};
use crate::numeric::{ln_geometric, log_sum_exp};
use crate::perturbation::PerturbationKind;
use crate::response::{DriveSpec, ResponseReport};

const ANGLE_TOL: f64 = 1e-12;

/// Sign and log-magnitude of `Σ c_i e^{l_i}`.
fn signed_ln_sum(terms: &[(f64, f64)]) -> (f64, f64) {
    let top = terms.iter().filter(|(c, _)| *c != 0.0).map(|(_, l)| *l).fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return (0.0, f64::NEG_INFINITY);
    }
    let s: f64 = terms.iter().filter(|(c, _)| *c != 0.0).map(|(c, l)| c * (l - top).exp()).sum();
    (s.signum(), top + s.abs().ln())
}

/// `ln(c²)`, `-inf` at zero.
fn ln_sq(c: f64) -> f64 {
    2.0 * c.abs().ln()
}

fn check_inputs(chain: &ChainSpec, drive: &DriveSpec, eps: f64) -> Result<()> {
    chain.validate()?;
    drive.validate()?;
    if eps < 0.0 || !eps.is_finite() {
        return Err(Error::InvalidSpec("epsilon must be finite and non-negative".into()));
    }
    // the closed forms are written in squeezing variables
    SqueezingParams::new(chain, 0.0, 0.0).map(|_| ())
}

/// Zeroth-order photon number of the odd chain, natural log.
fn ln_photons_zeroth_odd(chain: &ChainSpec, drive: &DriveSpec) -> f64 {
    let (ll, lr) = (chain.ratio_l().ln(), chain.ratio_r().ln());
    let (n, m) = (chain.n_cells, chain.m as f64);
    let (s, c) = drive.theta.sin_cos();
    let pre = (4.0 * drive.beta_abs * drive.beta_abs / chain.kappa).ln();
    pre + log_sum_exp(&[
        ln_sq(c) + 2.0 * (m - 1.0) * ll + ln_geometric(-2.0 * ll, n),
        ln_sq(s) - 2.0 * (m - 1.0) * lr + ln_geometric(2.0 * lr, n),
    ])
}

/// Linear-response report from the general-angle closed forms.
///
/// Signal is second order in `ε`; noise sits at the floor `n_th + 1/2` and
/// the photon number is the unperturbed one.
pub fn analytic_linear_report(
    chain: &ChainSpec,
    drive: &DriveSpec,
    kind: PerturbationKind,
    eps: f64,
) -> Result<ResponseReport> {
    check_inputs(chain, drive, eps)?;
    let (ll, lr) = (chain.ratio_l().ln(), chain.ratio_r().ln());
    let (n, m) = (chain.n_cells as f64, chain.m as f64);
    let (st, ct) = drive.theta.sin_cos();
    let (sm, cm) = drive.phi_meas.sin_cos();
    let b2 = drive.beta_abs * drive.beta_abs;
    let k = chain.kappa;
    let (ln_signal, ln_n0) = match chain.parity {
        Parity::Odd => {
            let bracket = match kind {
                PerturbationKind::OnSite => {
                    signed_ln_sum(&[(-cm * st, 2.0 * (n - m) * lr), (sm * ct, -2.0 * (n - m) * ll)])
                }
                PerturbationKind::Nhse { phi } => {
                    let (sp, cp) = phi.sin_cos();
                    // W = L^{m−1} R^{N−m} − L^{m−N} R^{1−m}
                    let w_plus = (m - 1.0) * ll + (n - m) * lr;
                    let w_minus = (m - n) * ll + (1.0 - m) * lr;
                    let span = n - 2.0 * m + 1.0;
                    signed_ln_sum(&[
                        (-cm * sp * ct, w_plus),
                        (cm * sp * ct, w_minus),
                        (-2.0 * cm * cp * st, span * lr),
                        (2.0 * sm * cp * ct, -span * ll),
                        (sm * sp * st, w_plus),
                        (-sm * sp * st, w_minus),
                    ])
                }
            };
            let pre = (32.0 * drive.tau * b2).ln() + 2.0 * (eps / k).ln();
            (pre + 2.0 * bracket.1, ln_photons_zeroth_odd(chain, drive))
        }
        Parity::Even => {
            let (g1, t1) = (chain.gamma1, chain.t1);
            let ln_signal = match kind {
                PerturbationKind::OnSite => {
                    let bracket = signed_ln_sum(&[
                        (cm * st, 2.0 * (n - m) * ll - 2.0 * (g1 - t1).ln()),
                        (-sm * ct, -2.0 * (n - m) * lr - 2.0 * (g1 + t1).ln()),
                    ]);
                    (2.0 * drive.tau * k * k * b2).ln() + 2.0 * eps.ln() + 2.0 * bracket.1
                }
                // the first-order coefficient vanishes identically
                PerturbationKind::Nhse { .. } => f64::NEG_INFINITY,
            };
            let cells = chain.n_cells - chain.m + 1;
            let ln_n0 = (k * b2).ln()
                + log_sum_exp(&[
                    ln_sq(ct) - 2.0 * (g1 + t1).ln() + ln_geometric(-2.0 * lr, cells),
                    ln_sq(st) - 2.0 * (g1 - t1).ln() + ln_geometric(2.0 * ll, cells),
                ]);
            (ln_signal, ln_n0)
        }
    };
    let ln_floor = drive.noise_floor().ln();
    Ok(ResponseReport::from_logs(ln_signal, ln_floor, ln_floor, ln_n0, ln_n0))
}

/// All-order report for the fixed protocols.
///
/// On-site: odd chain, `m = 1`, `θ = π/2`, `φ_meas = 0`. Skin effect: odd
/// chain, `φ = π/2`, any drive cell and angles.
pub fn analytic_full_report(
    chain: &ChainSpec,
    drive: &DriveSpec,
    kind: PerturbationKind,
    eps0: f64,
) -> Result<ResponseReport> {
    check_inputs(chain, drive, eps0)?;
    if chain.parity != Parity::Odd {
        return Err(Error::ProtocolMismatch("all-order closed forms exist for odd chains only".into()));
    }
    match kind {
        PerturbationKind::OnSite => full_onsite(chain, drive, eps0),
        PerturbationKind::Nhse { phi } => {
            if (phi - FRAC_PI_2).abs() >= ANGLE_TOL {
                return Err(Error::ProtocolMismatch(format!("skin-effect phase must be pi/2, got {phi}")));
            }
            full_nhse(chain, drive, eps0)
        }
    }
}

fn full_onsite(chain: &ChainSpec, drive: &DriveSpec, eps0: f64) -> Result<ResponseReport> {
    if chain.m != 1
        || (drive.theta - FRAC_PI_2).abs() >= ANGLE_TOL
        || drive.phi_meas.sin().abs() >= ANGLE_TOL
        || drive.phi_meas.cos() < 0.0
    {
        return Err(Error::ProtocolMismatch(
            "on-site all-order formulas need m = 1, theta = pi/2, phi_meas = 0".into(),
        ));
    }
    let (ll, lr) = (chain.ratio_l().ln(), chain.ratio_r().ln());
    let lrho = 0.5 * (ll - lr);
    let n = chain.n_cells;
    let nm1 = n as f64 - 1.0;
    let k = chain.kappa;
    let lk2 = (k / 2.0).ln();
    let le = eps0.ln();
    let b2 = drive.beta_abs * drive.beta_abs;
    // D = ε0² + (κ/2)² ρ^{4(N−1)}
    let lq = 2.0 * lk2 + 4.0 * nm1 * lrho;
    let ld = log_sum_exp(&[2.0 * le, lq]);
    let ln_signal = (2.0 * drive.tau * k * k * b2).ln() + 2.0 * le + 4.0 * nm1 * ll - 2.0 * ld;

    // 1 + κ H_xx = (ε0² − q)/D, κ H_xp = −κ ε0 L^{2(N−1)}/D in the lab frame
    let u = ((2.0 * le - lq) / 2.0).tanh();
    let ln_cross = 2.0 * k.ln() + 2.0 * le + 4.0 * nm1 * ll - 2.0 * ld;
    let ln_floor = drive.noise_floor().ln();
    let ln_noise_eps = ln_floor + log_sum_exp(&[ln_sq(u), ln_cross]);

    let ln_n0 = ln_photons_zeroth_odd(chain, drive);
    let (g1, t1) = (chain.gamma1, chain.t1);
    let ln_n_eps = (k * b2).ln() - 2.0 * ld
        + log_sum_exp(&[
            2.0 * le + 2.0 * nm1 * ll + ln_geometric(2.0 * ll, n),
            2.0 * lk2 + 2.0 * le + 4.0 * nm1 * ll - 2.0 * (g1 + t1).ln() + ln_geometric(-2.0 * lr, n - 1),
            2.0 * lk2 + 4.0 * nm1 * ll - 4.0 * nm1 * lr + ln_geometric(2.0 * lr, n),
            4.0 * le - 2.0 * (g1 - t1).ln() + ln_geometric(2.0 * ll, n - 1),
        ]);
    Ok(ResponseReport::from_logs(ln_signal, ln_floor, ln_noise_eps, ln_n0, ln_n_eps))
}

fn full_nhse(chain: &ChainSpec, drive: &DriveSpec, eps0: f64) -> Result<ResponseReport> {
    let sq = SqueezingParams::new(chain, 0.0, 0.0)?;
    let theta = theta_factor(chain, &sq, eps0).value;
    let k = chain.kappa;
    let k2 = k / 2.0;
    let scale = k2.max(theta.abs());
    let minus = theta - k2;
    let plus = theta + k2;
    for den in [minus, plus] {
        if den.abs() < POLE_TOL * scale {
            return Err(Error::PoleEncountered { denominator: den, scale });
        }
    }
    let amp = (2.0 * k).sqrt() * drive.beta_abs;
    let (st, ct) = drive.theta.sin_cos();
    let (sm, cm) = drive.phi_meas.sin_cos();
    let (bx, bp) = (amp * ct, amp * st);
    let dx = bx * theta / (k2 * minus);
    let dp = bp * theta / (k2 * plus);
    let h = cm * dx + sm * dp;
    let signal = k * drive.tau * h * h;

    let a = plus / minus;
    let ln_floor = drive.noise_floor().ln();
    let ln_noise_eps = ln_floor + log_sum_exp(&[ln_sq(cm * a), ln_sq(sm / a)]);

    let (ll, lr) = (chain.ratio_l().ln(), chain.ratio_r().ln());
    let (n, m) = (chain.n_cells, chain.m);
    let (nf, mf) = (n as f64, m as f64);
    let (g1, t1) = (chain.gamma1, chain.t1);
    let le = eps0.ln();
    let (lm, lp) = (minus.abs().ln(), plus.abs().ln());
    let ln_n_eps = -std::f64::consts::LN_2
        + log_sum_exp(&[
            ln_sq(bx) - 2.0 * lm + 2.0 * (mf - 1.0) * ll + ln_geometric(-2.0 * ll, n),
            2.0 * le + ln_sq(bx) - 2.0 * (g1 + t1).ln() - 2.0 * lm
                + 2.0 * (mf - nf) * ll
                + ln_geometric(-2.0 * lr, m - 1),
            2.0 * le + ln_sq(bx) - 2.0 * (g1 + t1).ln() - 2.0 * lm
                + 2.0 * (mf - 1.0) * ll
                + 2.0 * (nf - mf) * lr
                + ln_geometric(-2.0 * lr, n - m),
            ln_sq(bp) - 2.0 * lp - 2.0 * (mf - 1.0) * lr + ln_geometric(2.0 * lr, n),
            2.0 * le + ln_sq(bp) - 2.0 * (g1 - t1).ln() - 2.0 * lp
                + 2.0 * (nf - mf) * lr
                + ln_geometric(2.0 * ll, m - 1),
            2.0 * le + ln_sq(bp) - 2.0 * (g1 - t1).ln() - 2.0 * lp
                + 2.0 * (1.0 - mf) * lr
                + 2.0 * (mf - nf) * ll
                + ln_geometric(2.0 * ll, n - m),
        ]);
    let ln_n0 = ln_photons_zeroth_odd(chain, drive);
    Ok(ResponseReport::from_logs(ln_sq(signal.sqrt()), ln_floor, ln_noise_eps, ln_n0, ln_n_eps))
}

/// Linear SNR of a bosonic Kitaev chain of `n_bar` sites driven on its first
/// site with an on-site perturbation on its last site.
pub fn bkc_linear_snr(t1: f64, gamma1: f64, kappa: f64, n_bar: usize, drive: &DriveSpec, eps: f64) -> f64 {
    let two_r = ((gamma1 + t1) / (gamma1 - t1)).ln();
    let span = n_bar as f64 - 1.0;
    let (st, ct) = drive.theta.sin_cos();
    let (sm, cm) = drive.phi_meas.sin_cos();
    let bracket = -cm * st * (two_r * span).exp() + sm * ct * (-two_r * span).exp();
    let signal = 32.0 * drive.tau * (eps / kappa).powi(2) * drive.beta_abs.powi(2) * bracket * bracket;
    signal / drive.noise_floor()
}
