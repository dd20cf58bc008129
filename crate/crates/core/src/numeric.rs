//! Small numerical helpers shared by the response engine and closed forms.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `ln Σ_{k=0}^{n-1} e^{k·lq}` without overflow.
pub(crate) fn ln_geometric(lq: f64, n: usize) -> f64 {
    if n == 0 {
        return f64::NEG_INFINITY;
    }
    let nf = n as f64;
    if lq.abs() < 1e-12 {
        return nf.ln() + 0.5 * (nf - 1.0) * lq;
    }
    if lq > 0.0 {
        (nf - 1.0) * lq + (-(-nf * lq).exp_m1()).ln() - (-(-lq).exp_m1()).ln()
    } else {
        (-(nf * lq).exp_m1()).ln() - (-lq.exp_m1()).ln()
    }
}

/// `ln(Σ e^{x_i})` without overflow; empty or all `-inf` gives `-inf`.
pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Dense LU factorisation with a reciprocal condition estimate.
pub(crate) struct Solver {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    matrix: DMatrix<f64>,
    pub rcond: f64,
}

/// Below this reciprocal condition the matrix is treated as singular.
pub(crate) const RCOND_SINGULAR: f64 = 1e-20;

fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Reciprocal 1-norm condition of `R m C` with row and column scalings that
/// bring every row and column maximum to one.
fn equilibrated_rcond(m: &DMatrix<f64>, inv: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let r: Vec<f64> = (0..n).map(|i| 1.0 / m.row(i).amax()).collect();
    let c: Vec<f64> = (0..n).map(|j| 1.0 / (0..n).map(|i| (r[i] * m[(i, j)]).abs()).fold(0.0, f64::max)).collect();
    let scaled = DMatrix::from_fn(n, n, |i, j| r[i] * m[(i, j)] * c[j]);
    let scaled_inv = DMatrix::from_fn(n, n, |i, j| inv[(i, j)] / (c[i] * r[j]));
    1.0 / (norm1(&scaled) * norm1(&scaled_inv))
}

impl Solver {
    pub fn new(m: &DMatrix<f64>) -> Result<Self> {
        let lu = m.clone().lu();
        let inv = lu.try_inverse().ok_or(Error::Singular { rcond: 0.0 })?;
        let rcond = equilibrated_rcond(m, &inv);
        if !rcond.is_finite() || rcond < RCOND_SINGULAR || inv.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular { rcond: if rcond.is_finite() { rcond } else { 0.0 } });
        }
        Ok(Solver { lu, matrix: m.clone(), rcond })
    }

    /// Solve with two steps of iterative refinement.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = self.lu.solve(b).expect("factorisation checked");
        for _ in 0..2 {
            let r = b - &self.matrix * &x;
            if let Some(dx) = self.lu.solve(&r) {
                x += dx;
            }
        }
        x
    }

    pub fn column_of_inverse(&self, j: usize) -> DVector<f64> {
        let mut e = DVector::zeros(self.matrix.nrows());
        e[j] = 1.0;
        self.solve(&e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_geometric_matches_direct_sum() {
        for (q, n) in [(3.0f64, 5usize), (0.2, 7), (1.0, 4), (1.0 + 1e-14, 3)] {
            let direct: f64 = (0..n).map(|k| q.powi(k as i32)).sum();
            assert!((ln_geometric(q.ln(), n) - direct.ln()).abs() < 1e-12, "{q} {n}");
        }
        assert!((ln_geometric(800.0, 2) - 800.0).abs() < 1e-12);
        assert_eq!(ln_geometric(0.5, 0), f64::NEG_INFINITY);
    }

    #[test]
    fn log_sum_exp_large_values() {
        let v = log_sum_exp(&[1000.0, 1000.0]);
        assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn slope_of_line() {
        let x = [1.0, 2.0, 3.0];
        let y = [2.0, 4.5, 7.0];
        assert!((fit_slope(&x, &y) - 2.5).abs() < 1e-14);
    }

    #[test]
    fn solver_detects_singular() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(Solver::new(&m).is_err());
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let s = Solver::new(&m).unwrap();
        let x = s.solve(&DVector::from_vec(vec![3.0, 4.0]));
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rcond_ignores_diagonal_scaling() {
        let m = DMatrix::from_row_slice(2, 2, &[1e30, 0.0, 0.0, 1e-30]);
        let s = Solver::new(&m).unwrap();
        assert!((s.rcond - 1.0).abs() < 1e-12);
    }
}
