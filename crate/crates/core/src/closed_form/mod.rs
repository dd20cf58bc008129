//! Analytic inverse elements and signal/noise/photon formulas.
//!
//! Inverse elements use the 1-based indices of [`crate::lattice`]. Elements
//! of `H̃(ε)⁻¹` in the full space use rows `1..=2·sites`, with the p block
//! offset by the number of sites (`2N−1` for odd chains).

mod inverse;
mod reports;

pub use inverse::{
    catalogue_all_orders, catalogue_exact, catalogue_first_order, hxp_inv_element, inv_element_all_orders,
    inv_element_first_order, theta_factor, tilde_h_inv_element, InverseElementQuery, Order, ThetaFactor,
};
pub use reports::{analytic_full_report, analytic_linear_report, bkc_linear_snr};
