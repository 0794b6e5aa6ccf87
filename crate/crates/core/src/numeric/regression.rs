//! Ordinary least squares for the handful of regressors used in rate fits.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    /// Intercept first, then one coefficient per regressor column.
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub r_squared: f64,
}

/// Fits `y ≈ b0 + Σ_c b_c x_c` where `columns[c]` holds regressor `c`.
pub fn least_squares(columns: &[&[f64]], y: &[f64]) -> Result<LinearFit> {
    let m = y.len();
    let p = columns.len() + 1;
    if columns.iter().any(|c| c.len() != m) {
        return Err(Error::input("regressor length differs from response length"));
    }
    if m < p + 1 {
        return Err(Error::input(format!("{m} points cannot fit {p} coefficients with a residual")));
    }
    if y.iter().chain(columns.iter().flat_map(|c| c.iter())).any(|v| !v.is_finite()) {
        return Err(Error::numeric("non-finite value in regression data"));
    }
    let row = |i: usize| -> Vec<f64> {
        std::iter::once(1.0).chain(columns.iter().map(|c| c[i])).collect()
    };
    let mut xtx = vec![vec![0.0; p]; p];
    let mut xty = vec![0.0; p];
    for i in 0..m {
        let r = row(i);
        for a in 0..p {
            xty[a] += r[a] * y[i];
            for b in 0..p {
                xtx[a][b] += r[a] * r[b];
            }
        }
    }
    let inv = invert(&xtx).ok_or_else(|| Error::numeric("singular regression design"))?;
    let coefficients: Vec<f64> = (0..p).map(|a| (0..p).map(|b| inv[a][b] * xty[b]).sum()).collect();
    let fitted: Vec<f64> = (0..m)
        .map(|i| row(i).iter().zip(&coefficients).map(|(x, b)| x * b).sum())
        .collect();
    let rss: f64 = y.iter().zip(&fitted).map(|(a, b)| (a - b).powi(2)).sum();
    let ybar = y.iter().sum::<f64>() / m as f64;
    let tss: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
    let sigma2 = rss / (m - p) as f64;
    let std_errors = (0..p).map(|a| (sigma2 * inv[a][a]).max(0.0).sqrt()).collect();
    let r_squared = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };
    Ok(LinearFit { coefficients, std_errors, r_squared })
}

/// Gauss–Jordan inverse with partial pivoting.
fn invert(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let p = a.len();
    let scale: Vec<f64> = (0..p).map(|i| a[i][i].abs().sqrt().max(f64::MIN_POSITIVE)).collect();
    // Work with D^{-1} A D^{-1} to equilibrate.
    let mut m: Vec<Vec<f64>> = (0..p)
        .map(|i| {
            let mut r: Vec<f64> = (0..p).map(|j| a[i][j] / (scale[i] * scale[j])).collect();
            r.extend((0..p).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..p {
        let piv = (col..p).max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))?;
        if m[piv][col].abs() < 1e-13 {
            return None;
        }
        m.swap(col, piv);
        let d = m[col][col];
        m[col].iter_mut().for_each(|v| *v /= d);
        for r in 0..p {
            if r != col {
                let f = m[r][col];
                if f != 0.0 {
                    let pivot_row = m[col].clone();
                    m[r].iter_mut().zip(pivot_row).for_each(|(v, pv)| *v -= f * pv);
                }
            }
        }
    }
    Some(
        (0..p)
            .map(|i| (0..p).map(|j| m[i][p + j] / (scale[i] * scale[j])).collect())
            .collect(),
    )
}
