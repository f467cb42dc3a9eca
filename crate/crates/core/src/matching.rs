//! Matched-pair pseudo-labels for treatment contrasts on a validation set.
//!
//! Each validation individual is paired with its nearest neighbour in the
//! opposite arm (Euclidean distance on features standardized with the
//! validation set's own statistics). Pairing is with replacement and never
//! leaves the validation set. The surrogate is
//! `(2·A_i − 1)·(Y_i − Y_partner(i))`.

use crate::data::{StageDataset, StandardizationStats};
use crate::error::{Error, Result};

/// Opposite-arm partner of every validation individual.
#[derive(Debug, Clone, PartialEq)]
pub struct Pairing {
    /// Validation-local index of each individual's partner.
    pub partner: Vec<usize>,
    pub distance: Vec<f64>,
}

/// Pseudo-labels aligned with the validation rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateVector {
    pub values: Vec<f64>,
}

/// Builds observable stand-ins for the per-individual treatment contrast.
pub trait Surrogate: Sync {
    fn build(&self, val: &StageDataset) -> Result<SurrogateVector>;
}

/// Nearest-neighbour matching surrogate. An empty covariate list matches on
/// every feature.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MatchedPairSurrogate {
    pub covariates: Vec<usize>,
}

impl MatchedPairSurrogate {
    pub fn on(covariates: Vec<usize>) -> Self {
        Self { covariates }
    }
}

impl Surrogate for MatchedPairSurrogate {
    fn build(&self, val: &StageDataset) -> Result<SurrogateVector> {
        let cols: Vec<usize> = if self.covariates.is_empty() {
            (0..val.n_features()).collect()
        } else {
            self.covariates.clone()
        };
        let stats = StandardizationStats::compute(val.features(), val.n_features(), &cols);
        let pairing = match_opposite_arm(val, &stats)?;
        Ok(build_surrogates(val, &pairing))
    }
}

/// Pairs every individual with the closest opposite-arm individual on the
/// columns tracked by `stats`. Ties go to the lowest index.
pub fn match_opposite_arm(val: &StageDataset, stats: &StandardizationStats) -> Result<Pairing> {
    let (treated, control) = (val.treated(), val.control());
    if treated.is_empty() || control.is_empty() {
        return Err(Error::EmptyArm {
            treated: treated.len(),
            control: control.len(),
        });
    }
    let d = stats.columns.len();
    let mut z = Vec::with_capacity(val.len() * d);
    for i in 0..val.len() {
        z.extend(stats.transform_row(val.row(i)));
    }
    let point = |i: usize| &z[i * d..(i + 1) * d];

    let mut partner = vec![0usize; val.len()];
    let mut distance = vec![0.0; val.len()];
    for i in 0..val.len() {
        let pool = if val.action(i) == 1 { control } else { treated };
        let pi = point(i);
        let mut best = (f64::INFINITY, usize::MAX);
        // pools are in increasing index order, so strict < keeps the lowest index on ties
        for &c in pool {
            let d2: f64 = pi.iter().zip(point(c)).map(|(a, b)| (a - b) * (a - b)).sum();
            if d2 < best.0 {
                best = (d2, c);
            }
        }
        partner[i] = best.1;
        distance[i] = best.0.sqrt();
    }
    Ok(Pairing { partner, distance })
}

/// `values[i] = (2·a_i − 1)·(y_i − y_partner(i))`.
pub fn build_surrogates(val: &StageDataset, pairing: &Pairing) -> SurrogateVector {
    let y = val.response();
    let values = (0..val.len())
        .map(|i| {
            let sign = if val.action(i) == 1 { 1.0 } else { -1.0 };
            sign * (y[i] - y[pairing.partner[i]])
        })
        .collect();
    SurrogateVector { values }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(rows: &[Vec<f64>], a: &[f64], y: &[f64]) -> StageDataset {
        let names = (0..rows[0].len()).map(|j| format!("l{j}")).collect();
        StageDataset::from_rows(names, rows, a, y.to_vec()).unwrap()
    }

    fn raw_stats(val: &StageDataset) -> StandardizationStats {
        let d = val.n_features();
        StandardizationStats {
            columns: (0..d).collect(),
            means: vec![0.0; d],
            stddevs: vec![1.0; d],
        }
    }

    #[test]
    fn two_individuals_pair_with_each_other() {
        let v = ds(&[vec![0.0], vec![5.0]], &[1.0, 0.0], &[3.0, 1.0]);
        let p = match_opposite_arm(&v, &raw_stats(&v)).unwrap();
        assert_eq!(p.partner, vec![1, 0]);
    }

    #[test]
    fn nearer_control_wins() {
        let v = ds(
            &[vec![0.0, 0.0], vec![1.0, 0.0], vec![3.0, 0.0]],
            &[1.0, 0.0, 0.0],
            &[0.0; 3],
        );
        let p = match_opposite_arm(&v, &raw_stats(&v)).unwrap();
        assert_eq!(p.partner[0], 1);
        assert_eq!(p.distance[0], 1.0);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        // treated at 0; controls at indices 2 and 5 both at distance 1
        let v = ds(
            &[
                vec![0.0],
                vec![10.0],
                vec![1.0],
                vec![9.0],
                vec![12.0],
                vec![-1.0],
            ],
            &[1.0, 1.0, 0.0, 1.0, 1.0, 0.0],
            &[0.0; 6],
        );
        let p = match_opposite_arm(&v, &raw_stats(&v)).unwrap();
        assert_eq!(p.partner[0], 2);
    }

    #[test]
    fn surrogate_formula_and_sign() {
        let v = ds(&[vec![0.0], vec![0.1]], &[1.0, 0.0], &[3.0, 1.0]);
        let s = MatchedPairSurrogate::default().build(&v).unwrap();
        assert_eq!(s.values, vec![2.0, 2.0]);
        let v = ds(&[vec![0.0], vec![0.1]], &[1.0, 0.0], &[4.0, 4.0]);
        let s = MatchedPairSurrogate::default().build(&v).unwrap();
        assert_eq!(s.values, vec![0.0, 0.0]);
    }

    #[test]
    fn matching_ignores_untracked_columns() {
        // column 1 would pull the treated toward index 2, column 0 toward index 1
        let v = ds(
            &[vec![0.0, 0.0], vec![0.1, 50.0], vec![5.0, 0.0]],
            &[1.0, 0.0, 0.0],
            &[0.0; 3],
        );
        let s0 = StandardizationStats::compute(v.features(), 2, &[0]);
        assert_eq!(match_opposite_arm(&v, &s0).unwrap().partner[0], 1);
        let s1 = StandardizationStats::compute(v.features(), 2, &[1]);
        assert_eq!(match_opposite_arm(&v, &s1).unwrap().partner[0], 2);
    }
}
