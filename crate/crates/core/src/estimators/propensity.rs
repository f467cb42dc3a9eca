use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::StageDataset;
use crate::error::{Error, Result};

const MAX_ITER: usize = 25;
const TOL: f64 = 1e-8;
const PROB_FLOOR: f64 = 1e-6;
const EXTREME_SHARE: f64 = 0.10;

/// Logistic model for the probability of receiving action 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensityFit {
    pub covariates: Vec<String>,
    #[serde(skip)]
    pub columns: Vec<usize>,
    /// Intercept first, then one coefficient per covariate.
    pub coefficients: Vec<f64>,
    pub iterations: usize,
    /// Set when the full fit did not converge or separated the arms and the
    /// intercept-only fit was used instead.
    pub separation_fallback: bool,
}

impl PropensityFit {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut eta = self.coefficients[0];
        for (k, &c) in self.columns.iter().enumerate() {
            eta += self.coefficients[k + 1] * row[c];
        }
        expit(eta)
    }
}

pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Fits the propensity model by iteratively reweighted least squares.
pub fn fit_propensity(ds: &StageDataset, covariates: &[String]) -> Result<PropensityFit> {
    let columns = ds.columns(covariates)?;
    let n = ds.len();
    let n_treated = ds.treated().len();
    if n_treated == 0 || n_treated == n {
        return Err(Error::EmptyArm {
            treated: n_treated,
            control: n - n_treated,
        });
    }
    let share = n_treated as f64 / n as f64;
    let fallback = |iterations| PropensityFit {
        covariates: covariates.to_vec(),
        columns: columns.clone(),
        coefficients: std::iter::once(logit(share))
            .chain(std::iter::repeat_n(0.0, columns.len()))
            .collect(),
        iterations,
        separation_fallback: !columns.is_empty(),
    };
    if columns.is_empty() {
        return Ok(PropensityFit {
            separation_fallback: false,
            ..fallback(0)
        });
    }

    let p = columns.len() + 1;
    let design = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { ds.feature(i, columns[j - 1]) });
    let a = DVector::from_iterator(n, ds.actions().iter().map(|&v| v as f64));
    let mut beta = DVector::zeros(p);
    beta[0] = logit(share);

    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=MAX_ITER {
        iterations = it;
        let eta = &design * &beta;
        let mut xtwx = DMatrix::zeros(p, p);
        let mut xtwz = DVector::zeros(p);
        for i in 0..n {
            let pi = expit(eta[i]);
            let w = (pi * (1.0 - pi)).max(1e-12);
            let z = eta[i] + (a[i] - pi) / w;
            let row = design.row(i);
            for r in 0..p {
                xtwz[r] += w * row[r] * z;
                for c in r..p {
                    xtwx[(r, c)] += w * row[r] * row[c];
                }
            }
        }
        for r in 0..p {
            for c in 0..r {
                xtwx[(r, c)] = xtwx[(c, r)];
            }
        }
        let Some(next): Option<DVector<f64>> = xtwx.cholesky().map(|ch| ch.solve(&xtwz)) else {
            break;
        };
        if next.iter().any(|v| !v.is_finite()) {
            break;
        }
        let change = (&next - &beta).amax();
        beta = next;
        if change < TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Ok(fallback(iterations));
    }
    let eta = &design * &beta;
    let extreme = eta
        .iter()
        .filter(|&&e| {
            let pi = expit(e);
            !(PROB_FLOOR..=1.0 - PROB_FLOOR).contains(&pi)
        })
        .count();
    if extreme as f64 > EXTREME_SHARE * n as f64 {
        return Ok(fallback(iterations));
    }
    Ok(PropensityFit {
        covariates: covariates.to_vec(),
        columns,
        coefficients: beta.iter().copied().collect(),
        iterations,
        separation_fallback: false,
    })
}
