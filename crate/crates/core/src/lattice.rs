//! Chain geometry, quadrature-basis dynamical matrices, the squeezing
//! transform and the stability check.
//!
//! Indices follow the 1-based convention used by every closed form in
//! [`crate::closed_form`]: within one quadrature block site `(n, A)` sits at
//! `2n-1` and `(n, B)` at `2n`; the `p` block of the full matrix is offset
//! by the number of sites.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Eigenvalues with real part above `-MARGINAL_TOL` count as unstable.
pub const MARGINAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parity {
    /// `2N-1` sites, the last unit cell is broken.
    Odd,
    /// `2N` sites.
    Even,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quadrature {
    X,
    P,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sublattice {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub n_cells: usize,
    pub parity: Parity,
    pub t1: f64,
    pub t2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub kappa: f64,
    /// Drive and measurement cell (sublattice A), 1-based.
    pub m: usize,
}

impl ChainSpec {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.t1, self.t2, self.gamma1, self.gamma2, self.kappa].iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidSpec("non-finite coupling".into()));
        }
        if self.n_cells == 0 {
            return Err(Error::InvalidSpec("n_cells must be positive".into()));
        }
        if self.gamma1 <= 0.0 || self.gamma2 <= 0.0 {
            return Err(Error::InvalidSpec("hoppings gamma1, gamma2 must be positive".into()));
        }
        if self.kappa <= 0.0 {
            return Err(Error::InvalidSpec("kappa must be positive".into()));
        }
        if self.m == 0 || self.m > self.n_cells {
            return Err(Error::InvalidSpec(format!("drive cell m = {} outside [1, {}]", self.m, self.n_cells)));
        }
        Ok(())
    }

    pub fn sites(&self) -> usize {
        self.index_map().sites()
    }

    pub fn index_map(&self) -> IndexMap {
        IndexMap { n_cells: self.n_cells, parity: self.parity }
    }

    /// Same couplings with a different size; `m` is clamped into range.
    pub fn resized(&self, n_cells: usize, m: usize) -> ChainSpec {
        ChainSpec { n_cells, m: m.clamp(1, n_cells.max(1)), ..self.clone() }
    }

    pub fn squeezable(&self) -> bool {
        self.gamma1 > self.t1.abs() && self.gamma2 > self.t2.abs()
    }

    /// `L = (γ2+t2)/(γ1−t1)`, the gain of the x chain towards the left edge.
    pub fn ratio_l(&self) -> f64 {
        (self.gamma2 + self.t2) / (self.gamma1 - self.t1)
    }

    /// `R = (γ1+t1)/(γ2−t2)`, the gain of the p chain towards the right edge.
    pub fn ratio_r(&self) -> f64 {
        (self.gamma1 + self.t1) / (self.gamma2 - self.t2)
    }
}

/// Bijection between `(quadrature, cell, sublattice)` and matrix rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexMap {
    pub n_cells: usize,
    pub parity: Parity,
}

impl IndexMap {
    pub fn sites(&self) -> usize {
        match self.parity {
            Parity::Odd => 2 * self.n_cells - 1,
            Parity::Even => 2 * self.n_cells,
        }
    }

    pub fn has_site(&self, cell: usize, sub: Sublattice) -> bool {
        cell >= 1
            && cell <= self.n_cells
            && !(sub == Sublattice::B && cell == self.n_cells && self.parity == Parity::Odd)
    }

    /// 1-based index within one quadrature block.
    pub fn site(&self, cell: usize, sub: Sublattice) -> Option<usize> {
        if !self.has_site(cell, sub) {
            return None;
        }
        Some(match sub {
            Sublattice::A => 2 * cell - 1,
            Sublattice::B => 2 * cell,
        })
    }

    /// 1-based index in the full `x ⊕ p` space.
    pub fn global(&self, q: Quadrature, cell: usize, sub: Sublattice) -> Option<usize> {
        let s = self.site(cell, sub)?;
        Some(match q {
            Quadrature::X => s,
            Quadrature::P => s + self.sites(),
        })
    }

    /// 0-based row in the full matrix.
    pub fn row(&self, q: Quadrature, cell: usize, sub: Sublattice) -> Option<usize> {
        self.global(q, cell, sub).map(|g| g - 1)
    }

    /// Inverse of [`IndexMap::global`].
    pub fn locate(&self, global: usize) -> Option<(Quadrature, usize, Sublattice)> {
        let sites = self.sites();
        if global == 0 || global > 2 * sites {
            return None;
        }
        let (q, local) = if global > sites { (Quadrature::P, global - sites) } else { (Quadrature::X, global) };
        let cell = local.div_ceil(2);
        let sub = if local % 2 == 1 { Sublattice::A } else { Sublattice::B };
        Some((q, cell, sub))
    }

    /// Last site of the chain: `(N, A)` for odd chains, `(N, B)` for even.
    pub fn last_site(&self) -> (usize, Sublattice) {
        match self.parity {
            Parity::Odd => (self.n_cells, Sublattice::A),
            Parity::Even => (self.n_cells, Sublattice::B),
        }
    }

    pub fn cells(&self) -> impl Iterator<Item = (usize, Sublattice)> + '_ {
        (1..=self.n_cells)
            .flat_map(|n| [(n, Sublattice::A), (n, Sublattice::B)])
            .filter(move |&(n, s)| self.has_site(n, s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Layout {
    /// One quadrature block (or the squeezed block h̃), dimension = sites.
    Block,
    /// Full `x ⊕ p` space, dimension = 2·sites.
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicalMatrix {
    pub entries: DMatrix<f64>,
    pub map: IndexMap,
    pub layout: Layout,
}

impl DynamicalMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Entry at 1-based `(row, col)`.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[(row - 1, col - 1)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezingParams {
    pub r: f64,
    pub s: f64,
    pub t1_tilde: f64,
    pub t2_tilde: f64,
    pub n0: f64,
    pub m0: f64,
}

impl SqueezingParams {
    pub fn new(chain: &ChainSpec, n0: f64, m0: f64) -> Result<Self> {
        if !chain.squeezable() {
            return Err(Error::Unstable {
                reason: format!(
                    "squeezing undefined: need γ1 > |t1| and γ2 > |t2| (γ1={}, t1={}, γ2={}, t2={})",
                    chain.gamma1, chain.t1, chain.gamma2, chain.t2
                ),
                max_real_eigenvalue: None,
            });
        }
        let (g1, g2, t1, t2) = (chain.gamma1, chain.gamma2, chain.t1, chain.t2);
        Ok(SqueezingParams {
            r: 0.5 * ((g1 + t1) / (g1 - t1)).ln(),
            s: 0.5 * ((g2 + t2) / (g2 - t2)).ln(),
            t1_tilde: ((g1 - t1) * (g1 + t1)).sqrt(),
            t2_tilde: ((g2 - t2) * (g2 + t2)).sqrt(),
            n0,
            m0,
        })
    }

    /// `ρ = t̃2 / t̃1`.
    pub fn rho(&self) -> f64 {
        self.t2_tilde / self.t1_tilde
    }

    /// `ln T` for the x quadrature of a site; p uses `-ln T`.
    pub fn log_t(&self, cell: usize, sub: Sublattice) -> f64 {
        let n = cell as f64;
        let shift = match sub {
            Sublattice::A => 0.0,
            Sublattice::B => 1.0,
        };
        -self.r * (n + shift - self.n0) - self.s * (n - self.m0)
    }
}

pub fn build_quadrature_block(chain: &ChainSpec, block: Quadrature) -> DynamicalMatrix {
    let map = chain.index_map();
    let sign = match block {
        Quadrature::X => 1.0,
        Quadrature::P => -1.0,
    };
    let (t1, t2) = (sign * chain.t1, sign * chain.t2);
    let mut h = DMatrix::zeros(map.sites(), map.sites());
    let idx = |n, s| map.site(n, s).map(|i| i - 1);
    for n in 1..=chain.n_cells {
        let a = idx(n, Sublattice::A).expect("A site exists");
        if let Some(b) = idx(n, Sublattice::B) {
            h[(a, b)] = -(chain.gamma1 + t1);
            h[(b, a)] = chain.gamma1 - t1;
        }
        if n >= 2 {
            let b_prev = idx(n - 1, Sublattice::B).expect("interior B site");
            h[(a, b_prev)] = chain.gamma2 - t2;
            h[(b_prev, a)] = -(chain.gamma2 + t2);
        }
    }
    let am = idx(chain.m, Sublattice::A).expect("drive site");
    h[(am, am)] -= 0.5 * chain.kappa;
    DynamicalMatrix { entries: h, map, layout: Layout::Block }
}

/// Block-diagonal `h^X ⊕ h^P` at ε = 0.
pub fn build_unperturbed_full(chain: &ChainSpec) -> DynamicalMatrix {
    let hx = build_quadrature_block(chain, Quadrature::X);
    let hp = build_quadrature_block(chain, Quadrature::P);
    let n = hx.dim();
    let mut full = DMatrix::zeros(2 * n, 2 * n);
    full.view_mut((0, 0), (n, n)).copy_from(&hx.entries);
    full.view_mut((n, n), (n, n)).copy_from(&hp.entries);
    DynamicalMatrix { entries: full, map: hx.map, layout: Layout::Full }
}

/// Squeezing parameters and the diagonal matrix `T` with `x = T x̃`.
pub fn squeezing_transform(chain: &ChainSpec, n0: f64, m0: f64) -> Result<(SqueezingParams, DynamicalMatrix)> {
    let sq = SqueezingParams::new(chain, n0, m0)?;
    let map = chain.index_map();
    let diag: Vec<f64> = map.cells().map(|(n, s)| sq.log_t(n, s).exp()).collect();
    let t = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag));
    Ok((sq, DynamicalMatrix { entries: t, map, layout: Layout::Block }))
}

/// Reciprocal squeezed-frame block `h̃ = T⁻¹ h^X T = T h^P T⁻¹`.
pub fn build_tilde_h(chain: &ChainSpec, squeeze: &SqueezingParams) -> Result<DynamicalMatrix> {
    if !chain.squeezable() {
        return Err(SqueezingParams::new(chain, squeeze.n0, squeeze.m0).unwrap_err());
    }
    let map = chain.index_map();
    let (a1, a2) = (squeeze.t1_tilde, squeeze.t2_tilde);
    let mut h = DMatrix::zeros(map.sites(), map.sites());
    let idx = |n, s| map.site(n, s).map(|i| i - 1);
    for n in 1..=chain.n_cells {
        let a = idx(n, Sublattice::A).expect("A site exists");
        if let Some(b) = idx(n, Sublattice::B) {
            h[(a, b)] = -a1;
            h[(b, a)] = a1;
        }
        if n >= 2 {
            let b_prev = idx(n - 1, Sublattice::B).expect("interior B site");
            h[(a, b_prev)] = a2;
            h[(b_prev, a)] = -a2;
        }
    }
    let am = idx(chain.m, Sublattice::A).expect("drive site");
    h[(am, am)] = -0.5 * chain.kappa;
    Ok(DynamicalMatrix { entries: h, map, layout: Layout::Block })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StabilityReason {
    AllNegative,
    PositiveRealPart,
    /// Largest real part lies within `MARGINAL_TOL` of zero.
    Marginal,
    MappedToPureParametric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub stable: bool,
    pub max_real_eigenvalue: f64,
    pub reason: StabilityReason,
}

impl StabilityReport {
    pub fn require_stable(&self) -> Result<()> {
        if self.stable {
            Ok(())
        } else {
            Err(Error::Unstable {
                reason: format!("{:?}: max Re λ = {:e}", self.reason, self.max_real_eigenvalue),
                max_real_eigenvalue: Some(self.max_real_eigenvalue),
            })
        }
    }
}

pub(crate) fn max_real_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Eigenvalue test of the ε = 0 dynamics.
///
/// In the squeezable regime the full matrix is similar to `h̃ ⊕ h̃`, whose
/// near-antisymmetric structure gives well-conditioned eigenvalues; the
/// spectrum is computed there. Otherwise the lab-frame blocks are used.
pub fn check_stability(chain: &ChainSpec) -> StabilityReport {
    let max_re = if chain.squeezable() {
        let sq = SqueezingParams::new(chain, 0.0, 0.0).expect("squeezable");
        let ht = build_tilde_h(chain, &sq).expect("squeezable");
        max_real_eigenvalue(&ht.entries)
    } else {
        let hx = build_quadrature_block(chain, Quadrature::X);
        let hp = build_quadrature_block(chain, Quadrature::P);
        max_real_eigenvalue(&hx.entries).max(max_real_eigenvalue(&hp.entries))
    };
    let stable = max_re < -MARGINAL_TOL;
    let reason = if stable {
        StabilityReason::AllNegative
    } else if chain.gamma1 < chain.t1.abs() && chain.gamma2 < chain.t2.abs() {
        StabilityReason::MappedToPureParametric
    } else if max_re <= MARGINAL_TOL {
        StabilityReason::Marginal
    } else {
        StabilityReason::PositiveRealPart
    };
    StabilityReport { stable, max_real_eigenvalue: max_re, reason }
}
