use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::ChainSpec;
use crate::perturbation::PerturbationKind;

/// Relative tolerance for equality in the regime inequalities.
const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    I,
    #[serde(rename = "II_e")]
    IIe,
    #[serde(rename = "II_o")]
    IIo,
    III,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::I => "I",
            Regime::IIe => "II_e",
            Regime::IIo => "II_o",
            Regime::III => "III",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegimeLabel {
    pub regime: Regime,
    /// One of the defining inequalities holds with equality.
    pub boundary: bool,
}

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= BOUNDARY_TOL * a.abs().max(b.abs())
}

pub fn classify_regime(chain: &ChainSpec) -> RegimeLabel {
    let (g1, g2, t1, t2) = (chain.gamma1, chain.gamma2, chain.t1, chain.t2);
    let (lp, lm) = ((g2 + t2).abs(), (g1 - t1).abs());
    let (rp, rm) = ((g1 + t1).abs(), (g2 - t2).abs());
    let left = lp > lm;
    let right = rm > rp;
    let mut boundary = near(lp, lm) || near(rp, rm);
    let regime = match (left, right) {
        (true, true) => Regime::I,
        (false, false) if lp < lm && rm < rp => Regime::III,
        _ => {
            // edge-mode localisation: |L| vs |R| compared without dividing by zero
            let l_side = lp * rm;
            let r_side = rp * lm;
            boundary |= near(l_side, r_side);
            if l_side > r_side {
                Regime::IIe
            } else {
                Regime::IIo
            }
        }
    };
    RegimeLabel { regime, boundary }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeModes {
    pub zero_mode_t1_values: Vec<f64>,
    pub localized: bool,
}

/// Intra-cell couplings `t1` at which the even chain has zero modes.
pub fn even_edge_modes(chain: &ChainSpec) -> EdgeModes {
    let (g1, g2, t2) = (chain.gamma1, chain.gamma2, chain.t2);
    let mut values = Vec::new();
    for sq in [g1 * g1 + t2 * t2 - g2 * g2, g1 * g1 - t2 * t2 + g2 * g2] {
        if sq >= 0.0 {
            let root = sq.sqrt();
            values.push(root);
            if root != 0.0 {
                values.push(-root);
            }
        }
    }
    // |(γ2+t2)/(γ1−t1)| > |(γ1+t1)/(γ2−t2)| with denominators cleared
    let t1 = chain.t1;
    let localized = ((g2 + t2) * (g2 - t2)).abs() > ((g1 - t1) * (g1 + t1)).abs();
    EdgeModes { zero_mode_t1_values: values, localized }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalAlpha {
    pub alpha_star: f64,
    pub n_min: usize,
}

/// Drive placement `m = αN` balancing the gains of both edges at large `N`.
pub fn optimal_alpha(chain: &ChainSpec) -> Result<OptimalAlpha> {
    let ln_l = chain.ratio_l().abs().ln();
    let ln_r = chain.ratio_r().abs().ln();
    if !(ln_l > 0.0 && ln_r > 0.0) {
        return Err(Error::NoEnhancement { ln_l, ln_r });
    }
    let alpha_star = ln_r / (ln_l + ln_r);
    Ok(OptimalAlpha { alpha_star, n_min: (1.0 / alpha_star).ceil() as usize })
}

/// Real-valued size at which the linear response stops being valid.
///
/// For the skin-effect perturbation `alpha` overrides `α*`.
pub fn breakdown_size(chain: &ChainSpec, kind: PerturbationKind, eps0: f64, alpha: Option<f64>) -> Result<f64> {
    if eps0.is_nan() || eps0 <= 0.0 {
        return Err(Error::InvalidSpec("eps0 must be positive".into()));
    }
    let ln_r = chain.ratio_r().ln();
    match kind {
        PerturbationKind::OnSite => {
            if ln_r.is_nan() || ln_r <= 0.0 {
                return Err(Error::NoBreakdown { factor: chain.ratio_r() });
            }
            Ok(1.0 + (chain.kappa / (4.0 * eps0)).ln() / (2.0 * ln_r))
        }
        PerturbationKind::Nhse { .. } => {
            let alpha = match alpha {
                Some(a) => a,
                None => optimal_alpha(chain)?.alpha_star,
            };
            let ln_l = chain.ratio_l().ln();
            let rate = (1.0 - alpha) * ln_r + alpha * ln_l;
            if rate.is_nan() || rate <= 0.0 {
                return Err(Error::NoBreakdown { factor: rate.exp() });
            }
            Ok(((chain.kappa / (2.0 * eps0)).ln() + ln_l) / rate)
        }
    }
}
