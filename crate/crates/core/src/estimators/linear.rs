use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::propensity::{fit_propensity, PropensityFit};
use crate::data::{RegressionDataset, StageDataset};
use crate::error::{Error, Result};

const RCOND: f64 = 1e-12;

/// `C(h) = alpha + betaᵀ x(h)` fitted by the stacked A-learning equations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearContrastFit {
    pub covariates: Vec<String>,
    #[serde(skip)]
    pub columns: Vec<usize>,
    pub alpha: f64,
    pub beta: Vec<f64>,
    pub propensity: PropensityFit,
    pub treatment_free_covariates: Vec<String>,
    /// Intercept first.
    pub treatment_free_coef: Vec<f64>,
    pub singular_system: bool,
}

impl LinearContrastFit {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.alpha
            + self
                .columns
                .iter()
                .zip(&self.beta)
                .map(|(&c, b)| b * row[c])
                .sum::<f64>()
    }
}

/// Solves `m·x = b` through the SVD. Returns the minimum-norm solution and
/// whether the system was numerically singular.
pub(crate) fn solve_min_norm(m: DMatrix<f64>, b: DVector<f64>) -> Result<(DVector<f64>, bool)> {
    let svd = m.svd(true, true);
    let smax = svd.singular_values.max();
    if !smax.is_finite() {
        return Err(Error::InvalidParameter("non-finite normal equations".into()));
    }
    let eps = RCOND * smax.max(f64::MIN_POSITIVE);
    let singular = svd.singular_values.iter().any(|&s| s <= eps);
    let x = svd
        .solve(&b, eps)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok((x, singular))
}

pub fn fit_linear_contrast(
    ds: &StageDataset,
    contrast: &[String],
    treatment_free: &[String],
    propensity: &[String],
) -> Result<LinearContrastFit> {
    let xc = ds.columns(contrast)?;
    let sc = ds.columns(treatment_free)?;
    let pi = fit_propensity(ds, propensity)?;
    let (px, ps) = (xc.len() + 1, sc.len() + 1);
    let dim = px + ps;

    // rows: [x (A - pi); s], columns: [A x, s]
    let mut m = DMatrix::<f64>::zeros(dim, dim);
    let mut b = DVector::<f64>::zeros(dim);
    let mut left = vec![0.0; dim];
    let mut right = vec![0.0; dim];
    for i in 0..ds.len() {
        let row = ds.row(i);
        let a = ds.action(i) as f64;
        let resid_a = a - pi.predict(row);
        let y = ds.response()[i];
        left[0] = resid_a;
        right[0] = a;
        for (k, &c) in xc.iter().enumerate() {
            left[k + 1] = row[c] * resid_a;
            right[k + 1] = row[c] * a;
        }
        left[px] = 1.0;
        right[px] = 1.0;
        for (k, &c) in sc.iter().enumerate() {
            left[px + k + 1] = row[c];
            right[px + k + 1] = row[c];
        }
        for r in 0..dim {
            b[r] += left[r] * y;
            for c in 0..dim {
                m[(r, c)] += left[r] * right[c];
            }
        }
    }
    let (sol, singular) = solve_min_norm(m, b)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite contrast coefficients".into()));
    }
    Ok(LinearContrastFit {
        covariates: contrast.to_vec(),
        columns: xc,
        alpha: sol[0],
        beta: sol.rows(1, px - 1).iter().copied().collect(),
        propensity: pi,
        treatment_free_covariates: treatment_free.to_vec(),
        treatment_free_coef: sol.rows(px, ps).iter().copied().collect(),
        singular_system: singular,
    })
}

/// Ordinary least squares on an intercept plus the named covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub covariates: Vec<String>,
    #[serde(skip)]
    pub columns: Vec<usize>,
    /// Intercept first.
    pub coefficients: Vec<f64>,
    pub singular_system: bool,
}

impl OlsFit {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.coefficients[0]
            + self
                .columns
                .iter()
                .zip(&self.coefficients[1..])
                .map(|(&c, b)| b * row[c])
                .sum::<f64>()
    }
}

pub fn fit_ols(ds: &RegressionDataset, covariates: &[String]) -> Result<OlsFit> {
    let cols = ds.columns(covariates)?;
    let p = cols.len() + 1;
    let mut xtx = DMatrix::<f64>::zeros(p, p);
    let mut xty = DVector::<f64>::zeros(p);
    let mut x = vec![1.0; p];
    for i in 0..ds.len() {
        let row = ds.row(i);
        for (k, &c) in cols.iter().enumerate() {
            x[k + 1] = row[c];
        }
        let y = ds.response()[i];
        for r in 0..p {
            xty[r] += x[r] * y;
            for c in 0..p {
                xtx[(r, c)] += x[r] * x[c];
            }
        }
    }
    let (sol, singular) = solve_min_norm(xtx, xty)?;
    Ok(OlsFit {
        covariates: covariates.to_vec(),
        columns: cols,
        coefficients: sol.iter().copied().collect(),
        singular_system: singular,
    })
}
