use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{ChainSpec, Parity, Quadrature, SqueezingParams};
use crate::perturbation::PerturbationKind;

/// Relative size below which a Θ denominator is reported as a pole.
pub const POLE_TOL: f64 = 1e-10;

/// Tolerance on `φ = π/2` for the all-order skin-effect elements.
const PHASE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Order {
    /// `ε = 0`.
    Exact,
    /// Coefficient of `ε` in the Dyson expansion.
    FirstOrder,
    AllOrders,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseElementQuery {
    pub row: usize,
    pub col: usize,
    pub order: Order,
    /// Ignored for [`Order::Exact`].
    pub pert_kind: PerturbationKind,
}

impl InverseElementQuery {
    /// `Exact` indexes one block of `h̃`; the other orders index the full `H̃(ε)`.
    pub fn evaluate(&self, chain: &ChainSpec, sq: &SqueezingParams, eps0: f64) -> Result<f64> {
        match self.order {
            Order::Exact => tilde_h_inv_element(chain, sq, self.row, self.col),
            Order::FirstOrder => inv_element_first_order(chain, sq, self.pert_kind, self.row, self.col),
            Order::AllOrders => inv_element_all_orders(chain, sq, self.pert_kind, eps0, self.row, self.col),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaFactor {
    pub value: f64,
}

/// `Θ = 2ε0 (t̃1/t̃2)^{N−2m+1} sinh[(r+s)(N−1)]`.
pub fn theta_factor(chain: &ChainSpec, sq: &SqueezingParams, eps0: f64) -> ThetaFactor {
    let n = chain.n_cells as i32;
    let m = chain.m as i32;
    let value = 2.0 * eps0 * (1.0 / sq.rho()).powi(n - 2 * m + 1) * ((sq.r + sq.s) * (n - 1) as f64).sinh();
    ThetaFactor { value }
}

fn require_odd(chain: &ChainSpec, row: usize, col: usize) -> Result<()> {
    match chain.parity {
        Parity::Odd => Ok(()),
        Parity::Even => Err(Error::NotTabulated { row, col }),
    }
}

/// `[h̃⁻¹]_{row,col}` for the tabulated columns `1`, `2N−1`, `2m−1` of an odd chain.
pub fn tilde_h_inv_element(chain: &ChainSpec, sq: &SqueezingParams, row: usize, col: usize) -> Result<f64> {
    require_odd(chain, row, col)?;
    let big_n = chain.n_cells;
    let m = chain.m;
    let sites = 2 * big_n - 1;
    if row == 0 || row > sites {
        return Err(Error::NotTabulated { row, col });
    }
    let rho = sq.rho();
    let t1 = sq.t1_tilde;
    let t2 = sq.t2_tilde;
    let k2 = 2.0 / chain.kappa;
    let p = |e: i64| rho.powi(e as i32);
    let odd_row = row % 2 == 1;
    let n = (if odd_row { row + 1 } else { row } / 2) as i64;
    let (nn, mm) = (big_n as i64, m as i64);
    if col == 2 * m - 1 {
        return Ok(if odd_row { -k2 * p(mm - n) } else { 0.0 });
    }
    if col == 1 {
        return Ok(if odd_row {
            -k2 * p(2 * mm - n - 1)
        } else if n < mm {
            -p(n - 1) / t1
        } else {
            0.0
        });
    }
    if col == 2 * big_n - 1 {
        return Ok(if odd_row {
            -k2 * p(-(nn + n - 2 * mm))
        } else if n < mm {
            0.0
        } else {
            p(-(nn - n - 1)) / t2
        });
    }
    Err(Error::NotTabulated { row, col })
}

/// `[(h^X)⁻¹]` or `[(h^P)⁻¹]` from the `h̃` element and the parity-dependent factors.
pub fn hxp_inv_element(
    chain: &ChainSpec,
    sq: &SqueezingParams,
    block: Quadrature,
    row: usize,
    col: usize,
) -> Result<f64> {
    let base = tilde_h_inv_element(chain, sq, row, col)?;
    let (r, s) = (sq.r, sq.s);
    let shift = (r + s) / 2.0 * (col as f64 - row as f64);
    let parity = match (row % 2 == 1, col % 2 == 1) {
        (true, false) => (r - s) / 2.0,
        (false, true) => (s - r) / 2.0,
        _ => 0.0,
    };
    let exponent = match block {
        Quadrature::X => shift + parity,
        Quadrature::P => -shift - parity,
    };
    Ok(base * exponent.exp())
}

/// Full-space indices `(xm, pm)` of the drive port.
fn port(chain: &ChainSpec) -> (usize, usize) {
    let n = chain.n_cells;
    (2 * chain.m - 1, 2 * n + 2 * chain.m - 2)
}

pub fn catalogue_exact(chain: &ChainSpec) -> Vec<(usize, usize)> {
    let sites = chain.sites();
    let mut cols = vec![1, sites, 2 * chain.m - 1];
    cols.sort_unstable();
    cols.dedup();
    cols.into_iter().flat_map(|c| (1..=sites).map(move |r| (r, c))).collect()
}

pub fn catalogue_first_order(chain: &ChainSpec) -> Vec<(usize, usize)> {
    let (x, p) = port(chain);
    vec![(x, x), (x, p), (p, x), (p, p)]
}

/// Elements of `H̃(ε0)⁻¹` with an all-order closed form; empty outside the protocol.
pub fn catalogue_all_orders(chain: &ChainSpec, kind: PerturbationKind) -> Vec<(usize, usize)> {
    if chain.parity == Parity::Even {
        return Vec::new();
    }
    let sites = chain.sites();
    let n = chain.n_cells;
    match kind {
        PerturbationKind::OnSite if chain.m == 1 => {
            let mut v: Vec<_> = (1..=n).map(|k| (2 * k - 1, 1)).collect();
            v.extend((1..=2 * sites).map(|r| (r, 2 * n)));
            v
        }
        PerturbationKind::Nhse { phi } if (phi - std::f64::consts::FRAC_PI_2).abs() < PHASE_TOL => {
            let (x, p) = port(chain);
            [x, p].into_iter().flat_map(|c| (1..=2 * sites).map(move |r| (r, c))).collect()
        }
        _ => Vec::new(),
    }
}

/// Coefficient of `ε` in `[H̃(ε)⁻¹]_{row,col}` on the drive port.
pub fn inv_element_first_order(
    chain: &ChainSpec,
    sq: &SqueezingParams,
    kind: PerturbationKind,
    row: usize,
    col: usize,
) -> Result<f64> {
    require_odd(chain, row, col)?;
    let (x, p) = port(chain);
    if !catalogue_first_order(chain).contains(&(row, col)) {
        return Err(Error::NotTabulated { row, col });
    }
    let n = chain.n_cells as f64;
    let last = 2 * chain.n_cells - 1;
    let mc = 2 * chain.m - 1;
    let h = |i, j| tilde_h_inv_element(chain, sq, i, j);
    match kind {
        PerturbationKind::OnSite => {
            if row == col {
                return Ok(0.0);
            }
            let a = (2.0 * sq.r * (n - sq.n0) + 2.0 * sq.s * (n - sq.m0)).exp();
            let prod = h(mc, last)? * h(last, mc)?;
            Ok(if row == x { -a * prod } else { prod / a })
        }
        PerturbationKind::Nhse { phi } => {
            let (sn, cs) = phi.sin_cos();
            let e = ((sq.r + sq.s) * (n - 1.0)).exp();
            let c = (sq.r * (n + 1.0 - 2.0 * sq.n0) + sq.s * (n + 1.0 - 2.0 * sq.m0)).exp();
            let left = h(mc, 1)? * h(last, mc)?;
            let right = h(mc, last)? * h(1, mc)?;
            Ok(match (row == x, col == x) {
                (true, true) => sn * (left / e - right * e),
                (true, false) => -cs * c * (left + right),
                (false, true) => cs / c * (left + right),
                (false, false) => {
                    debug_assert_eq!(row, p);
                    sn * (left * e - right / e)
                }
            })
        }
    }
}

fn pole_check(den: f64, scale: f64) -> Result<f64> {
    if den.abs() < POLE_TOL * scale {
        Err(Error::PoleEncountered { denominator: den, scale })
    } else {
        Ok(den)
    }
}

/// `[H̃(ε0)⁻¹]_{row,col}` to all orders in `ε0`.
///
/// On-site: requires `m = 1`. Skin effect: requires `φ = π/2`.
pub fn inv_element_all_orders(
    chain: &ChainSpec,
    sq: &SqueezingParams,
    kind: PerturbationKind,
    eps0: f64,
    row: usize,
    col: usize,
) -> Result<f64> {
    require_odd(chain, row, col)?;
    let big_n = chain.n_cells;
    let sites = 2 * big_n - 1;
    if row == 0 || row > 2 * sites {
        return Err(Error::NotTabulated { row, col });
    }
    let rho = sq.rho();
    let p = |e: i64| rho.powi(e as i32);
    let (t1, t2) = (sq.t1_tilde, sq.t2_tilde);
    let k2 = chain.kappa / 2.0;
    let nn = big_n as i64;
    let mm = chain.m as i64;
    // split row into block, sublattice and cell
    let (p_block, local) = if row > sites { (true, row - sites) } else { (false, row) };
    let a_row = local % 2 == 1;
    let n = local.div_ceil(2) as i64;
    match kind {
        PerturbationKind::OnSite => {
            if chain.m != 1 {
                return Err(Error::ProtocolMismatch(format!(
                    "on-site all-order elements need m = 1, got m = {}",
                    chain.m
                )));
            }
            let d = eps0 * eps0 + k2 * k2 * p(4 * (nn - 1));
            let a = (2.0 * sq.r * (big_n as f64 - sq.n0) + 2.0 * sq.s * (big_n as f64 - sq.m0)).exp();
            if col == 1 {
                if p_block || !a_row {
                    return Err(Error::NotTabulated { row, col });
                }
                return Ok(-p(1 - n) * k2 * p(4 * (nn - 1)) / d);
            }
            if col != 2 * big_n {
                return Err(Error::NotTabulated { row, col });
            }
            Ok(match (p_block, a_row) {
                (false, true) => -p(nn - n) * eps0 * a / d * p(nn - 1),
                (false, false) => p(n - 1) * k2 / t1 * eps0 * a / d * p(2 * (nn - 1)),
                (true, true) => -p(nn - n) * k2 / d * p(3 * (nn - 1)),
                (true, false) => -p(n - 1) / t1 * eps0 * eps0 / d,
            })
        }
        PerturbationKind::Nhse { phi } => {
            if (phi - std::f64::consts::FRAC_PI_2).abs() >= PHASE_TOL {
                return Err(Error::ProtocolMismatch(format!(
                    "skin-effect all-order elements need phi = pi/2, got {phi}"
                )));
            }
            let (xc, pc) = port(chain);
            if col != xc && col != pc {
                return Err(Error::NotTabulated { row, col });
            }
            let theta = theta_factor(chain, sq, eps0).value;
            let scale = k2.max(theta.abs());
            let e = ((sq.r + sq.s) * (big_n as f64 - 1.0)).exp();
            let inv_rho = |k: i64| (1.0 / rho).powi(k as i32);
            let x_col = col == xc;
            if x_col == p_block {
                return Ok(0.0);
            }
            if x_col {
                let den = pole_check(-k2 + theta, scale)?;
                Ok(if a_row {
                    p(mm - n) / den
                } else if n < mm {
                    -eps0 / t1 * inv_rho(nn - mm - n + 1) / den / e
                } else {
                    -eps0 / t2 * inv_rho(nn - mm - n) / den * e
                })
            } else {
                let den = pole_check(k2 + theta, scale)?;
                Ok(if a_row {
                    -p(mm - n) / den
                } else if n < mm {
                    eps0 / t1 * inv_rho(nn - mm - n + 1) / den * e
                } else {
                    eps0 / t2 * inv_rho(nn - mm - n) / den / e
                })
            }
        }
    }
}
