//! Cross-validation of closed forms and numerics around one configuration.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use nhsense_core::closed_form::{
    analytic_full_report, analytic_linear_report, catalogue_exact, hxp_inv_element, tilde_h_inv_element,
};
use nhsense_core::lattice::{build_quadrature_block, build_tilde_h, build_unperturbed_full, check_stability};
use nhsense_core::perturbation::assemble_full;
use nhsense_core::response::{
    compute_linear_report, compute_report, compute_report_in_frame, dense_inverse, steady_state_moments,
    time_domain_oracle, OracleOptions,
};
use nhsense_core::{
    ChainSpec, DriveSpec, Error, Frame, PerturbationKind, PerturbationSpec, Quadrature, ResponseReport, SqueezingParams,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
    pub max_error: f64,
    pub tolerance: f64,
    /// Errors raised by failing checks.
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifySummary {
    pub passed: usize,
    pub failed: usize,
    pub suites: Vec<SuiteResult>,
}

struct Tally {
    result: SuiteResult,
}

impl Tally {
    fn new(name: &str, tolerance: f64) -> Self {
        Tally {
            result: SuiteResult {
                name: name.into(),
                passed: 0,
                failed: 0,
                skipped: 0,
                max_error: 0.0,
                tolerance,
                errors: Vec::new(),
            },
        }
    }

    fn check(&mut self, err: f64) {
        self.result.max_error = self.result.max_error.max(err);
        if err <= self.result.tolerance {
            self.result.passed += 1;
        } else {
            self.result.failed += 1;
        }
    }

    fn fail(&mut self, err: impl std::fmt::Display) {
        self.result.failed += 1;
        self.result.errors.push(err.to_string());
    }

    fn skip(&mut self) {
        self.result.skipped += 1;
    }
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn rel_or_scaled(value: f64, reference: f64, scale: f64) -> f64 {
    if reference == 0.0 {
        value.abs() / scale
    } else {
        rel(value, reference)
    }
}

/// Largest relative deviation between two reports; a signal that is zero by
/// symmetry is compared against `floor`.
fn report_error(a: &ResponseReport, b: &ResponseReport, floor: f64) -> f64 {
    let signal = if a.signal.max(b.signal) <= floor { 0.0 } else { rel(a.signal, b.signal) };
    signal.max(rel(a.noise, b.noise)).max(rel(a.n_tot, b.n_tot))
}

fn sizes(chain: &ChainSpec) -> impl Iterator<Item = ChainSpec> + '_ {
    (1..=chain.n_cells).map(move |n| chain.resized(n, chain.m.min(n)))
}

fn max_real(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

fn exact_inverse(chain: &ChainSpec) -> SuiteResult {
    let mut t = Tally::new("closed_form_inverse", 1e-10);
    for c in sizes(chain) {
        let Ok(sq) = SqueezingParams::new(&c, 0.0, 0.0) else {
            t.skip();
            continue;
        };
        let (Ok(h), x, p) = (
            build_tilde_h(&c, &sq),
            build_quadrature_block(&c, Quadrature::X),
            build_quadrature_block(&c, Quadrature::P),
        ) else {
            t.skip();
            continue;
        };
        let (Ok(inv), Ok(inv_x), Ok(inv_p)) =
            (dense_inverse(&h.entries), dense_inverse(&x.entries), dense_inverse(&p.entries))
        else {
            t.skip();
            continue;
        };
        for (i, j) in catalogue_exact(&c) {
            let pairs = [
                (inv[(i - 1, j - 1)], tilde_h_inv_element(&c, &sq, i, j), inv.column(j - 1).amax()),
                (inv_x[(i - 1, j - 1)], hxp_inv_element(&c, &sq, Quadrature::X, i, j), inv_x.column(j - 1).amax()),
                (inv_p[(i - 1, j - 1)], hxp_inv_element(&c, &sq, Quadrature::P, i, j), inv_p.column(j - 1).amax()),
            ];
            for (numeric, closed, scale) in pairs {
                match closed {
                    Ok(v) => t.check(rel_or_scaled(numeric, v, scale)),
                    Err(e) => t.fail(e),
                }
            }
        }
    }
    t.result
}

fn linear_reports(chain: &ChainSpec, drive: &DriveSpec, kind: PerturbationKind, eps: f64) -> SuiteResult {
    let mut t = Tally::new("linear_reports", 1e-8);
    for c in sizes(chain) {
        for k in [PerturbationKind::OnSite, kind] {
            let pert = PerturbationSpec { kind: k, epsilon: eps };
            match (compute_linear_report(&c, drive, &pert), analytic_linear_report(&c, drive, k, eps)) {
                (Ok(num), Ok(ana)) => {
                    let floor = c.kappa * drive.tau * (1e-12 * (2.0 * num.n_tot).sqrt() * eps).powi(2);
                    t.check(report_error(&num, &ana, floor));
                }
                (Err(Error::Unstable { .. }), _) => t.skip(),
                (Err(e), _) | (_, Err(e)) => t.fail(e),
            }
        }
    }
    t.result
}

fn all_order_reports(chain: &ChainSpec, drive: &DriveSpec, pert: &PerturbationSpec) -> SuiteResult {
    let mut t = Tally::new("all_order_reports", 1e-8);
    for c in sizes(chain) {
        let ana = match analytic_full_report(&c, drive, pert.kind, pert.epsilon) {
            Ok(r) => r,
            Err(Error::ProtocolMismatch(_) | Error::PoleEncountered { .. } | Error::Unstable { .. }) => {
                t.skip();
                continue;
            }
            Err(e) => {
                t.fail(e);
                continue;
            }
        };
        match compute_report(&c, drive, pert) {
            Ok(num) => t.check(report_error(&num, &ana, 1e-24 * num.n_tot * c.kappa * drive.tau)),
            Err(Error::Singular { .. }) => t.skip(),
            Err(e) => t.fail(e),
        }
    }
    t.result
}

fn time_domain(chain: &ChainSpec, drive: &DriveSpec, pert: &PerturbationSpec) -> SuiteResult {
    let mut t = Tally::new("time_domain_oracle", 1e-6);
    // the default residual target sits at the roundoff floor for slowly relaxing chains
    let opts = OracleOptions { tol: 1e-11, ..OracleOptions::default() };
    for c in sizes(chain).take(2) {
        let sys = match assemble_full(&c, pert, Frame::Lab) {
            Ok(sys) => sys,
            Err(e) => {
                t.fail(e);
                continue;
            }
        };
        // only systems that relax well inside the integration window
        if max_real(&sys.matrix.entries) > -1e-4 {
            t.skip();
            continue;
        }
        match (steady_state_moments(&sys, drive), time_domain_oracle(&sys, drive, &opts)) {
            (Ok(exact), Ok(res)) => t.check((&res.moments - &exact).amax() / exact.amax().max(f64::MIN_POSITIVE)),
            (Err(e), _) | (_, Err(e)) => t.fail(e),
        }
    }
    t.result
}

fn noise_floor(chain: &ChainSpec, drive: &DriveSpec, kind: PerturbationKind) -> SuiteResult {
    let mut t = Tally::new("noise_floor", 1e-10);
    for c in sizes(chain) {
        match compute_report(&c, drive, &PerturbationSpec { kind, epsilon: 0.0 }) {
            Ok(r) => t.check((r.noise - drive.noise_floor()).abs() + r.signal.abs()),
            Err(e) => t.fail(e),
        }
    }
    t.result
}

fn gauge(chain: &ChainSpec, drive: &DriveSpec, pert: &PerturbationSpec) -> SuiteResult {
    let mut t = Tally::new("gauge_invariance", 1e-9);
    for c in sizes(chain) {
        let Ok(lab) = compute_report(&c, drive, pert) else {
            t.skip();
            continue;
        };
        for (n0, m0) in [(0.0, 0.0), (-3.0, 2.0), (5.0, -1.5)] {
            match compute_report_in_frame(&c, drive, pert, Frame::Squeezed { n0, m0 }) {
                Ok(sq) => t.check(report_error(&lab, &sq, 1e-24 * lab.n_tot * c.kappa * drive.tau)),
                Err(Error::Singular { .. } | Error::Unstable { .. }) => t.skip(),
                Err(e) => t.fail(e),
            }
        }
    }
    t.result
}

fn stability(chain: &ChainSpec) -> SuiteResult {
    let mut t = Tally::new("stability_classification", 0.0);
    for c in sizes(chain) {
        let report = check_stability(&c);
        let lab = max_real(&build_unperturbed_full(&c).entries);
        // lab spectra are only trusted away from the marginal band
        if lab.abs() < 1e-9 {
            t.skip();
            continue;
        }
        t.check(if report.stable == (lab < 0.0) { 0.0 } else { 1.0 });
    }
    t.result
}

pub fn run(chain: &ChainSpec, drive: &DriveSpec, pert: &PerturbationSpec) -> VerifySummary {
    let suites = vec![
        exact_inverse(chain),
        linear_reports(chain, drive, pert.kind, pert.epsilon),
        all_order_reports(chain, drive, pert),
        time_domain(chain, drive, pert),
        noise_floor(chain, drive, pert.kind),
        gauge(chain, drive, pert),
        stability(chain),
    ];
    VerifySummary {
        passed: suites.iter().map(|s| s.passed).sum(),
        failed: suites.iter().map(|s| s.failed).sum(),
        suites,
    }
}
