//! Numerical steady state: moments, signal, noise, photons and SNR, plus a
//! time-domain integrator used as an independent oracle.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{check_stability, ChainSpec, Quadrature, Sublattice};
use crate::numeric::{log_sum_exp, Solver};
use crate::perturbation::{assemble_full, similarity_diagonal, AssembledSystem, Frame, PerturbationSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveSpec {
    pub beta_abs: f64,
    pub theta: f64,
    /// Homodyne angle.
    pub phi_meas: f64,
    pub tau: f64,
    pub n_th: f64,
}

impl DriveSpec {
    pub fn validate(&self) -> Result<()> {
        if self.beta_abs.is_nan() || self.beta_abs <= 0.0 || !self.beta_abs.is_finite() {
            return Err(Error::InvalidSpec("beta_abs must be positive".into()));
        }
        if self.tau.is_nan() || self.tau <= 0.0 || self.n_th.is_nan() || self.n_th < 0.0 {
            return Err(Error::InvalidSpec("tau must be positive and n_th non-negative".into()));
        }
        if !self.theta.is_finite() || !self.phi_meas.is_finite() {
            return Err(Error::InvalidSpec("angles must be finite".into()));
        }
        Ok(())
    }

    /// Vacuum-plus-thermal noise floor `n_th + 1/2`.
    pub fn noise_floor(&self) -> f64 {
        self.n_th + 0.5
    }

    /// Upper bound `8τ|β|²/(2n_th+1)` of the SNR.
    pub fn snr_bound(&self) -> f64 {
        8.0 * self.tau * self.beta_abs * self.beta_abs / (2.0 * self.n_th + 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseReport {
    pub signal: f64,
    /// `(N(0) + N(ε))/2`.
    pub noise: f64,
    pub noise_eps: f64,
    /// `(n(0) + n(ε))/2`.
    pub n_tot: f64,
    pub n_tot_eps: f64,
    pub snr: f64,
    pub snr_per_photon: f64,
    pub log10_signal: Option<f64>,
    pub log10_snr: Option<f64>,
    /// Reciprocal condition of the equilibrated `H(ε)`; absent for closed forms.
    pub rcond: Option<f64>,
}

impl ResponseReport {
    pub(crate) fn assemble(signal: f64, noise0: f64, noise_eps: f64, n0: f64, n_eps: f64, rcond: Option<f64>) -> Self {
        let noise = 0.5 * (noise0 + noise_eps);
        let n_tot = 0.5 * (n0 + n_eps);
        let snr = signal / noise;
        let log10 = |v: f64| (v > 0.0).then(|| v.log10());
        ResponseReport {
            signal,
            noise,
            noise_eps,
            n_tot,
            n_tot_eps: n_eps,
            snr,
            snr_per_photon: snr / n_tot,
            log10_signal: log10(signal),
            log10_snr: log10(snr),
            rcond,
        }
    }

    /// Build from natural logs of the positive quantities; `-inf` means zero.
    pub(crate) fn from_logs(ln_signal: f64, ln_noise0: f64, ln_noise_eps: f64, ln_n0: f64, ln_n_eps: f64) -> Self {
        let ln2 = std::f64::consts::LN_2;
        let ln_noise = log_sum_exp(&[ln_noise0, ln_noise_eps]) - ln2;
        let ln_n_tot = log_sum_exp(&[ln_n0, ln_n_eps]) - ln2;
        let ln_snr = ln_signal - ln_noise;
        let log10 = |v: f64| (v > f64::NEG_INFINITY).then(|| v / std::f64::consts::LN_10);
        ResponseReport {
            signal: ln_signal.exp(),
            noise: ln_noise.exp(),
            noise_eps: ln_noise_eps.exp(),
            n_tot: ln_n_tot.exp(),
            n_tot_eps: ln_n_eps.exp(),
            snr: ln_snr.exp(),
            snr_per_photon: (ln_snr - ln_n_tot).exp(),
            log10_signal: log10(ln_signal),
            log10_snr: log10(ln_snr),
            rcond: None,
        }
    }
}

/// Lab-frame drive vector `b` with `dv/dt = H v − b`.
pub fn drive_vector(chain: &ChainSpec, drive: &DriveSpec) -> DVector<f64> {
    let map = chain.index_map();
    let amp = (2.0 * chain.kappa).sqrt() * drive.beta_abs;
    let mut b = DVector::zeros(2 * map.sites());
    b[map.row(Quadrature::X, chain.m, Sublattice::A).expect("drive site")] = amp * drive.theta.cos();
    b[map.row(Quadrature::P, chain.m, Sublattice::A).expect("drive site")] = amp * drive.theta.sin();
    b
}

/// Drive vector expressed in the frame of `sys`.
fn frame_drive(sys: &AssembledSystem, drive: &DriveSpec) -> Result<DVector<f64>> {
    let b = drive_vector(&sys.chain, drive);
    match sys.frame {
        Frame::Lab => Ok(b),
        Frame::Squeezed { n0, m0 } => {
            let s = similarity_diagonal(&sys.chain, n0, m0)?;
            Ok(DVector::from_iterator(b.len(), b.iter().zip(&s).map(|(v, si)| v / si)))
        }
    }
}

fn to_lab(sys: &AssembledSystem, v: DVector<f64>) -> Result<DVector<f64>> {
    match sys.frame {
        Frame::Lab => Ok(v),
        Frame::Squeezed { n0, m0 } => {
            let s = similarity_diagonal(&sys.chain, n0, m0)?;
            Ok(DVector::from_iterator(v.len(), v.iter().zip(&s).map(|(x, si)| x * si)))
        }
    }
}

/// Steady-state first moments `(⟨x⟩, ⟨p⟩)` in the lab frame, solving `H v = b`.
pub fn steady_state_moments(sys: &AssembledSystem, drive: &DriveSpec) -> Result<DVector<f64>> {
    let solver = Solver::new(&sys.matrix.entries)?;
    to_lab(sys, solver.solve(&frame_drive(sys, drive)?))
}

/// The four elements of `H⁻¹` on the drive port, `[[xx, xp], [px, pp]]`, in the lab frame.
fn port_inverse(sys: &AssembledSystem, solver: &Solver) -> Result<[[f64; 2]; 2]> {
    let map = sys.chain.index_map();
    let xm = map.row(Quadrature::X, sys.chain.m, Sublattice::A).expect("drive site");
    let pm = map.row(Quadrature::P, sys.chain.m, Sublattice::A).expect("drive site");
    let (sx, sp) = match sys.frame {
        Frame::Lab => (1.0, 1.0),
        Frame::Squeezed { n0, m0 } => {
            let s = similarity_diagonal(&sys.chain, n0, m0)?;
            (s[xm], s[pm])
        }
    };
    let cx = solver.column_of_inverse(xm);
    let cp = solver.column_of_inverse(pm);
    // H_lab⁻¹ = S H̃⁻¹ S⁻¹
    Ok([[cx[xm], cp[xm] * sx / sp], [cx[pm] * sp / sx, cp[pm]]])
}

/// Output quadrature noise from the port block of `H⁻¹`.
pub fn noise_from_port(port: &[[f64; 2]; 2], kappa: f64, drive: &DriveSpec) -> f64 {
    let (s, c) = drive.phi_meas.sin_cos();
    let [[xx, xp], [px, pp]] = *port;
    let gx = c * (1.0 + kappa * xx) + s * kappa * px;
    let gp = c * kappa * xp + s * (1.0 + kappa * pp);
    drive.noise_floor() * (gx * gx + gp * gp)
}

/// Output transfer matrix `I + κ·(port block of H⁻¹)`; its determinant is 1.
pub fn port_transfer(port: &[[f64; 2]; 2], kappa: f64) -> [[f64; 2]; 2] {
    [[1.0 + kappa * port[0][0], kappa * port[0][1]], [kappa * port[1][0], 1.0 + kappa * port[1][1]]]
}

fn homodyne(chain: &ChainSpec, drive: &DriveSpec, v: &DVector<f64>) -> f64 {
    let map = chain.index_map();
    let xm = map.row(Quadrature::X, chain.m, Sublattice::A).expect("drive site");
    let pm = map.row(Quadrature::P, chain.m, Sublattice::A).expect("drive site");
    let (s, c) = drive.phi_meas.sin_cos();
    c * v[xm] + s * v[pm]
}

fn signal_of(chain: &ChainSpec, drive: &DriveSpec, dv: &DVector<f64>) -> f64 {
    let h = homodyne(chain, drive, dv);
    chain.kappa * drive.tau * h * h
}

fn photons(v: &DVector<f64>) -> f64 {
    0.5 * v.norm_squared()
}

/// Everything the report needs from one frame.
struct Pieces {
    v0: DVector<f64>,
    dv: DVector<f64>,
    noise0: f64,
    noise_eps: f64,
    rcond: f64,
}

fn pieces(chain: &ChainSpec, drive: &DriveSpec, pert: &PerturbationSpec, frame: Frame) -> Result<Pieces> {
    chain.validate()?;
    drive.validate()?;
    if pert.epsilon.is_nan() || pert.epsilon < 0.0 {
        return Err(Error::InvalidSpec("epsilon must be non-negative".into()));
    }
    check_stability(chain).require_stable()?;
    let sys0 = assemble_full(chain, &pert.with_epsilon(0.0), frame)?;
    let sys = assemble_full(chain, pert, frame)?;
    let solver0 = Solver::new(&sys0.matrix.entries)?;
    let solver = Solver::new(&sys.matrix.entries)?;
    let b = frame_drive(&sys0, drive)?;
    let v0 = solver0.solve(&b);
    // resolvent identity: v(ε) − v(0) = −H(ε)⁻¹ (H(ε) − H(0)) v(0)
    let dh = &sys.matrix.entries - &sys0.matrix.entries;
    let dv = -solver.solve(&(dh * &v0));
    let noise0 = noise_from_port(&port_inverse(&sys0, &solver0)?, chain.kappa, drive);
    let noise_eps = noise_from_port(&port_inverse(&sys, &solver)?, chain.kappa, drive);
    Ok(Pieces { v0: to_lab(&sys0, v0)?, dv: to_lab(&sys0, dv)?, noise0, noise_eps, rcond: solver.rcond })
}

/// Full-order numerical report in the lab frame.
pub fn compute_report(chain: &ChainSpec, drive: &DriveSpec, pert: &PerturbationSpec) -> Result<ResponseReport> {
    compute_report_in_frame(chain, drive, pert, Frame::Lab)
}

pub fn compute_report_in_frame(
    chain: &ChainSpec,
    drive: &DriveSpec,
    pert: &PerturbationSpec,
    frame: Frame,
) -> Result<ResponseReport> {
    let p = pieces(chain, drive, pert, frame)?;
    let signal = signal_of(chain, drive, &p.dv);
    let n0 = photons(&p.v0);
    let n_eps = photons(&(&p.v0 + &p.dv));
    Ok(ResponseReport::assemble(signal, p.noise0, p.noise_eps, n0, n_eps, Some(p.rcond)))
}

/// Linear-response report: first-order moment shift, zeroth-order noise and photons.
pub fn compute_linear_report(chain: &ChainSpec, drive: &DriveSpec, pert: &PerturbationSpec) -> Result<ResponseReport> {
    chain.validate()?;
    drive.validate()?;
    check_stability(chain).require_stable()?;
    let sys0 = assemble_full(chain, &pert.with_epsilon(0.0), Frame::Lab)?;
    let solver0 = Solver::new(&sys0.matrix.entries)?;
    let v0 = solver0.solve(&drive_vector(chain, drive));
    let dh = crate::perturbation::perturbation_block(chain, pert, Frame::Lab)?.entries;
    let dv = -solver0.solve(&(dh * &v0));
    let noise0 = noise_from_port(&port_inverse(&sys0, &solver0)?, chain.kappa, drive);
    let n0 = photons(&v0);
    Ok(ResponseReport::assemble(signal_of(chain, drive, &dv), noise0, noise0, n0, n0, Some(solver0.rcond)))
}

/// Port block of `H(ε)⁻¹` for a lab-frame system.
pub fn port_inverse_lab(sys: &AssembledSystem) -> Result<[[f64; 2]; 2]> {
    port_inverse(sys, &Solver::new(&sys.matrix.entries)?)
}

/// Dense inverse of the dynamical matrix (diagnostics and closed-form checks).
pub fn dense_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let solver = Solver::new(m)?;
    let n = m.nrows();
    let mut inv = DMatrix::zeros(n, n);
    for j in 0..n {
        inv.set_column(j, &solver.column_of_inverse(j));
    }
    Ok(inv)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub t_end: f64,
    pub dt: f64,
    /// Stop once `‖dv/dt‖∞ ≤ tol · ‖b‖∞`.
    pub tol: f64,
    /// Trajectory samples kept (evenly spaced in step count).
    pub samples: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { t_end: 1e6, dt: 0.05, tol: 1e-13, samples: 200 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// Lab-frame moments at the final time.
    pub moments: DVector<f64>,
    pub time: f64,
    pub steps: usize,
    pub residual: f64,
    /// `(t, ‖v‖∞)` samples.
    pub trajectory: Vec<(f64, f64)>,
}

/// Integrate `dv/dt = H v − b` from `v(0) = 0` with classical RK4.
pub fn time_domain_oracle(sys: &AssembledSystem, drive: &DriveSpec, opts: &OracleOptions) -> Result<OracleResult> {
    let h = &sys.matrix.entries;
    let b = frame_drive(sys, drive)?;
    let bnorm = b.amax().max(f64::MIN_POSITIVE);
    let hnorm = h.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    // RK4 is stable on the imaginary axis up to |λ dt| ≈ 2.8
    let dt = opts.dt.min(1.0 / hnorm.max(1e-300));
    let f = |v: &DVector<f64>| h * v - &b;
    let mut v = DVector::zeros(b.len());
    let mut t = 0.0;
    let mut steps = 0usize;
    let mut trajectory = vec![(0.0, 0.0)];
    let sample_every = ((opts.t_end / dt) as usize / opts.samples.max(1)).max(1);
    let blowup = 1e12 * bnorm / sys.chain.kappa.min(1.0);
    loop {
        let k1 = f(&v);
        let residual = k1.amax() / bnorm;
        if residual <= opts.tol {
            trajectory.push((t, v.amax()));
            return Ok(OracleResult { moments: to_lab(sys, v)?, time: t, steps, residual, trajectory });
        }
        if t >= opts.t_end {
            return Err(Error::OracleNotConverged { t_end: opts.t_end, residual });
        }
        let k2 = f(&(&v + &k1 * (0.5 * dt)));
        let k3 = f(&(&v + &k2 * (0.5 * dt)));
        let k4 = f(&(&v + &k3 * dt));
        v += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        t += dt;
        steps += 1;
        let norm = v.amax();
        if !norm.is_finite() || norm > blowup {
            return Err(Error::OracleDiverged { time: t, norm });
        }
        if steps.is_multiple_of(sample_every) {
            trajectory.push((t, norm));
        }
    }
}
