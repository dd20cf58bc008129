//! Perturbation blocks and the assembled dynamical matrix `H(ε)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lattice::{
    build_tilde_h, build_unperturbed_full, ChainSpec, DynamicalMatrix, IndexMap, Layout, Parity, Quadrature,
    SqueezingParams, Sublattice,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PerturbationKind {
    /// `ε a†a` on the last site of the chain.
    OnSite,
    /// `ε (e^{iφ} a_1 a_N† + h.c.)` between the first and last site.
    Nhse { phi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub kind: PerturbationKind,
    pub epsilon: f64,
}

impl PerturbationSpec {
    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        PerturbationSpec { epsilon, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Frame {
    Lab,
    /// Squeezed frame with gauge constants `n0`, `m0`.
    Squeezed {
        n0: f64,
        m0: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssembledSystem {
    pub matrix: DynamicalMatrix,
    pub frame: Frame,
    pub chain: ChainSpec,
    pub pert: PerturbationSpec,
}

/// Sparse list of lab-frame entries `(row, col, value)`, 1-based global indices.
fn lab_entries(chain: &ChainSpec, pert: &PerturbationSpec) -> Vec<(usize, usize, f64)> {
    let map = chain.index_map();
    let eps = pert.epsilon;
    let (last_cell, last_sub) = map.last_site();
    let g = |q, n, s| map.global(q, n, s).expect("site exists");
    let (xl, pl) = (g(Quadrature::X, last_cell, last_sub), g(Quadrature::P, last_cell, last_sub));
    match pert.kind {
        PerturbationKind::OnSite => vec![(xl, pl, eps), (pl, xl, -eps)],
        PerturbationKind::Nhse { phi } => {
            let (sn, cs) = phi.sin_cos();
            let (x1, p1) = (g(Quadrature::X, 1, Sublattice::A), g(Quadrature::P, 1, Sublattice::A));
            vec![
                (x1, xl, -eps * sn),
                (x1, pl, eps * cs),
                (xl, x1, eps * sn),
                (xl, p1, eps * cs),
                (p1, xl, -eps * cs),
                (p1, pl, -eps * sn),
                (pl, x1, -eps * cs),
                (pl, p1, eps * sn),
            ]
        }
    }
}

/// `ln S_i` for `S = diag(T, T⁻¹)`, indexed by 1-based global index.
fn log_similarity(map: &IndexMap, sq: &SqueezingParams, global: usize) -> f64 {
    let (q, n, s) = map.locate(global).expect("index in range");
    match q {
        Quadrature::X => sq.log_t(n, s),
        Quadrature::P => -sq.log_t(n, s),
    }
}

/// Squeezed-frame entries of the odd chain written out explicitly.
fn squeezed_entries_odd(chain: &ChainSpec, pert: &PerturbationSpec, sq: &SqueezingParams) -> Vec<(usize, usize, f64)> {
    let n = chain.n_cells as f64;
    let big = 2 * chain.n_cells;
    let eps = pert.epsilon;
    match pert.kind {
        PerturbationKind::OnSite => {
            let a = (2.0 * sq.r * (n - sq.n0) + 2.0 * sq.s * (n - sq.m0)).exp();
            vec![(big - 1, 2 * big - 2, eps * a), (2 * big - 2, big - 1, -eps / a)]
        }
        PerturbationKind::Nhse { phi } => {
            let (sn, cs) = phi.sin_cos();
            let e = ((sq.r + sq.s) * (n - 1.0)).exp();
            let c = (sq.r * (n + 1.0 - 2.0 * sq.n0) + sq.s * (n + 1.0 - 2.0 * sq.m0)).exp();
            vec![
                (1, big - 1, -eps * sn / e),
                (1, 2 * big - 2, eps * cs * c),
                (big - 1, 1, eps * sn * e),
                (big - 1, big, eps * cs * c),
                (big, big - 1, -eps * cs / c),
                (big, 2 * big - 2, -eps * sn * e),
                (2 * big - 2, 1, -eps * cs / c),
                (2 * big - 2, big, eps * sn / e),
            ]
        }
    }
}

pub fn perturbation_block(chain: &ChainSpec, pert: &PerturbationSpec, frame: Frame) -> Result<DynamicalMatrix> {
    let map = chain.index_map();
    let dim = 2 * map.sites();
    let entries = match frame {
        Frame::Lab => lab_entries(chain, pert),
        Frame::Squeezed { n0, m0 } => {
            let sq = SqueezingParams::new(chain, n0, m0)?;
            match chain.parity {
                Parity::Odd => squeezed_entries_odd(chain, pert, &sq),
                Parity::Even => lab_entries(chain, pert)
                    .into_iter()
                    .map(|(i, j, v)| {
                        let f = log_similarity(&map, &sq, j) - log_similarity(&map, &sq, i);
                        (i, j, v * f.exp())
                    })
                    .collect(),
            }
        }
    };
    let mut m = DMatrix::zeros(dim, dim);
    for (i, j, v) in entries {
        m[(i - 1, j - 1)] += v;
    }
    Ok(DynamicalMatrix { entries: m, map, layout: Layout::Full })
}

pub fn assemble_full(chain: &ChainSpec, pert: &PerturbationSpec, frame: Frame) -> Result<AssembledSystem> {
    let base = match frame {
        Frame::Lab => build_unperturbed_full(chain),
        Frame::Squeezed { n0, m0 } => {
            let sq = SqueezingParams::new(chain, n0, m0)?;
            let ht = build_tilde_h(chain, &sq)?;
            let n = ht.dim();
            let mut full = DMatrix::zeros(2 * n, 2 * n);
            full.view_mut((0, 0), (n, n)).copy_from(&ht.entries);
            full.view_mut((n, n), (n, n)).copy_from(&ht.entries);
            DynamicalMatrix { entries: full, map: ht.map, layout: Layout::Full }
        }
    };
    let block = perturbation_block(chain, pert, frame)?;
    let matrix = DynamicalMatrix { entries: base.entries + block.entries, ..base };
    Ok(AssembledSystem { matrix, frame, chain: chain.clone(), pert: *pert })
}

/// Diagonal of `S = diag(T, T⁻¹)` mapping squeezed to lab coordinates.
pub fn similarity_diagonal(chain: &ChainSpec, n0: f64, m0: f64) -> Result<Vec<f64>> {
    let sq = SqueezingParams::new(chain, n0, m0)?;
    let map = chain.index_map();
    Ok((1..=2 * map.sites()).map(|g| log_similarity(&map, &sq, g).exp()).collect())
}
