use nalgebra::{DMatrix, DVector};

use super::ScreenError;

/// Relative pivot threshold below which a design is treated as rank deficient.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// RSS / (n - k).
    pub residual_variance: f64,
    pub df: usize,
}

/// Least squares through a Householder QR of the design (which must already
/// contain any intercept column).
pub fn ols_fit(y: &[f64], x: &DMatrix<f64>) -> Result<OlsFit, ScreenError> {
    let (n, k) = x.shape();
    assert_eq!(y.len(), n, "response length must match design rows");
    if n <= k {
        return Err(ScreenError::TooFewObservations { n, k });
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let lead = r[(0, 0)].abs();
    if lead == 0.0 || (0..k).any(|i| r[(i, i)].abs() < RANK_TOL * lead) {
        return Err(ScreenError::RankDeficient);
    }

    let mut qty = DVector::from_column_slice(y);
    qr.q_tr_mul(&mut qty);
    let beta = r
        .solve_upper_triangular(&qty.rows(0, k).into_owned())
        .ok_or(ScreenError::RankDeficient)?;

    let fitted = x * &beta;
    let rss: f64 = y
        .iter()
        .zip(fitted.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let df = n - k;
    let residual_variance = rss / df as f64;

    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or(ScreenError::RankDeficient)?;
    let sigma = residual_variance.sqrt();
    let std_errors = (0..k).map(|i| sigma * r_inv.row(i).norm()).collect();

    Ok(OlsFit {
        coefficients: beta.iter().copied().collect(),
        std_errors,
        residual_variance,
        df,
    })
}
