//! Ordinary least squares behind every regression in the crate.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub rss: f64,
    /// Set when the design lacked full column rank and the minimum-norm
    /// pseudo-inverse solution was used instead of QR.
    pub rank_deficient: bool,
}

/// Least-squares fit of `target` on the rows of `design`.
pub fn ols_fit(design: &[Vec<f64>], target: &[f64]) -> Result<OlsFit> {
    let n = design.len();
    if n != target.len() {
        return Err(Error::DimensionMismatch(format!(
            "{n} design rows vs {} targets",
            target.len()
        )));
    }
    let p = design.first().map_or(0, Vec::len);
    if n == 0 || p == 0 {
        return Err(Error::Empty("regression needs at least one row and column".into()));
    }
    if let Some(row) = design.iter().find(|r| r.len() != p) {
        return Err(Error::DimensionMismatch(format!(
            "design row of length {} in a {p}-column design",
            row.len()
        )));
    }
    let x = DMatrix::from_fn(n, p, |i, j| design[i][j]);
    let y = DVector::from_column_slice(target);

    let mut rank_deficient = true;
    let mut beta = None;
    if n >= p {
        let qr = x.clone().qr();
        let r = qr.r();
        let scale = (0..p).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
        let tol = scale * (n.max(p) as f64) * f64::EPSILON * 10.0;
        if scale > 0.0 && (0..p).all(|i| r[(i, i)].abs() > tol) {
            let qty = qr.q().transpose() * &y;
            beta = r.solve_upper_triangular(&qty);
            rank_deficient = beta.is_none();
        }
    }
    let beta = match beta {
        Some(b) => b,
        None => {
            let svd = x.clone().svd(true, true);
            let max_sv = svd.singular_values.max();
            let eps = max_sv * (n.max(p) as f64) * f64::EPSILON;
            svd.solve(&y, eps)
                .map_err(|e| Error::InvalidParameter(format!("least squares failed: {e}")))?
        }
    };
    let resid = &y - &x * &beta;
    Ok(OlsFit {
        coefficients: beta.iter().copied().collect(),
        rss: resid.norm_squared(),
        rank_deficient,
    })
}
