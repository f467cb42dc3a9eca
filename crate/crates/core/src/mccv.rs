//! Monte Carlo cross-validation: repeated arm-stratified splits, surrogate
//! risk on each validation set, and aggregation into `R̂_cv`.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{RegressionDataset, StageDataset};
use crate::error::{Error, Result};
use crate::estimators::{fit_contrast, fit_regression, ModelSpec};
use crate::exec::{derive_seed, rng_from, Execution};
use crate::matching::{MatchedPairSurrogate, Surrogate};
use crate::stats::{mean, sample_var};

/// Loss evaluated per validation individual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum LossSpec {
    /// `U = (Ỹ − ĉ)²`
    Single { spec: ModelSpec },
    /// `U = (Ỹ − ĉ_a)² − (Ỹ − ĉ_b)²`
    Difference { spec_a: ModelSpec, spec_b: ModelSpec },
}

impl LossSpec {
    pub fn single(spec: ModelSpec) -> Self {
        LossSpec::Single { spec }
    }

    pub fn difference(spec_a: ModelSpec, spec_b: ModelSpec) -> Self {
        LossSpec::Difference { spec_a, spec_b }
    }

    pub fn label(&self) -> String {
        match self {
            LossSpec::Single { spec } => spec.label(),
            LossSpec::Difference { spec_a, spec_b } => format!("{} vs {}", spec_a.label(), spec_b.label()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LossSpec::Single { spec } => spec.validate(),
            LossSpec::Difference { spec_a, spec_b } => {
                spec_a.validate()?;
                spec_b.validate()
            }
        }
    }

    fn losses(&self, target: &[f64], predict: impl Fn(&ModelSpec) -> Result<Vec<f64>>) -> Result<Vec<f64>> {
        match self {
            LossSpec::Single { spec } => {
                let c = predict(spec)?;
                Ok(target.iter().zip(&c).map(|(y, c)| (y - c) * (y - c)).collect())
            }
            LossSpec::Difference { spec_a, spec_b } => {
                let ca = predict(spec_a)?;
                let cb = if spec_a == spec_b { ca.clone() } else { predict(spec_b)? };
                Ok(target
                    .iter()
                    .zip(ca.iter().zip(&cb))
                    .map(|(y, (a, b))| (y - a) * (y - a) - (y - b) * (y - b))
                    .collect())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitPlan {
    pub q: f64,
    pub j: usize,
    pub seed: u64,
}

impl Default for SplitPlan {
    fn default() -> Self {
        Self {
            q: 0.2,
            j: 100,
            seed: 0,
        }
    }
}

impl SplitPlan {
    pub fn new(q: f64, j: usize, seed: u64) -> Self {
        Self { q, j, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::InvalidParameter(format!("q = {} must lie in (0, 1)", self.q)));
        }
        if self.j < 2 {
            return Err(Error::InvalidParameter(format!("J = {} must be at least 2", self.j)));
        }
        Ok(())
    }

    pub fn split_seed(&self, j: usize) -> u64 {
        derive_seed(self.seed, &[j as u64])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub r_cv: f64,
    pub per_split_risks: Vec<f64>,
    pub s_r_sq: f64,
    pub s_u_sq: f64,
    pub n2: usize,
    pub j: usize,
    pub q: f64,
    pub n: usize,
}

impl CvReport {
    pub fn from_splits(risks: Vec<f64>, within_var: &[f64], n2: usize, q: f64, n: usize) -> Self {
        CvReport {
            r_cv: mean(&risks),
            s_r_sq: sample_var(&risks),
            s_u_sq: mean(within_var),
            j: risks.len(),
            per_split_risks: risks,
            n2,
            q,
            n,
        }
    }

    pub const CSV_HEADER: [&'static str; 6] = ["r_cv", "s_r_sq", "s_u_sq", "J", "q", "n"];

    pub fn csv_record(&self) -> [String; 6] {
        [
            self.r_cv.to_string(),
            self.s_r_sq.to_string(),
            self.s_u_sq.to_string(),
            self.j.to_string(),
            self.q.to_string(),
            self.n.to_string(),
        ]
    }
}

/// Something MCCV can split and score.
pub trait CvTask: Sync + Sized {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Disjoint index groups sampled separately (the treatment arms for
    /// contrast tasks).
    fn strata(&self) -> Vec<Vec<usize>>;

    /// Per-individual losses on `val` for models fitted on `train`. Both
    /// index lists are sorted.
    fn unit_losses(&self, train: &[usize], val: &[usize], loss: &LossSpec, seed: u64) -> Result<Vec<f64>>;

    fn subset(&self, idx: &[usize]) -> Result<Self>;
}

/// Treatment-contrast selection with the matched-pair surrogate.
#[derive(Debug, Clone)]
pub struct ContrastTask {
    pub data: StageDataset,
    pub surrogate: MatchedPairSurrogate,
}

impl ContrastTask {
    /// Matches on every feature.
    pub fn new(data: StageDataset) -> Self {
        Self {
            data,
            surrogate: MatchedPairSurrogate::default(),
        }
    }

    /// Matches on the named features only.
    pub fn matching_on(data: StageDataset, covariates: &[String]) -> Result<Self> {
        let cols = data.columns(covariates)?;
        Ok(Self {
            data,
            surrogate: MatchedPairSurrogate::on(cols),
        })
    }
}

impl CvTask for ContrastTask {
    fn len(&self) -> usize {
        self.data.len()
    }

    fn strata(&self) -> Vec<Vec<usize>> {
        vec![self.data.control().to_vec(), self.data.treated().to_vec()]
    }

    fn unit_losses(&self, train: &[usize], val: &[usize], loss: &LossSpec, seed: u64) -> Result<Vec<f64>> {
        let tr = self.data.subset(train)?;
        let va = self.data.subset(val)?;
        let target = self.surrogate.build(&va)?.values;
        loss.losses(&target, |spec| {
            let fit = fit_contrast(&tr, spec, seed)?;
            Ok((0..va.len()).map(|i| fit.predict(va.row(i))).collect())
        })
    }

    fn subset(&self, idx: &[usize]) -> Result<Self> {
        Ok(Self {
            data: self.data.subset(idx)?,
            surrogate: self.surrogate.clone(),
        })
    }
}

/// Plain regression with squared-error loss on the observed response.
#[derive(Debug, Clone)]
pub struct RegressionTask {
    pub data: RegressionDataset,
}

impl RegressionTask {
    pub fn new(data: RegressionDataset) -> Self {
        Self { data }
    }
}

impl CvTask for RegressionTask {
    fn len(&self) -> usize {
        self.data.len()
    }

    fn strata(&self) -> Vec<Vec<usize>> {
        vec![(0..self.data.len()).collect()]
    }

    fn unit_losses(&self, train: &[usize], val: &[usize], loss: &LossSpec, _seed: u64) -> Result<Vec<f64>> {
        let tr = self.data.subset(train);
        let target: Vec<f64> = val.iter().map(|&i| self.data.response()[i]).collect();
        loss.losses(&target, |spec| {
            let fit = fit_regression(&tr, spec)?;
            Ok(val.iter().map(|&i| fit.predict(self.data.row(i))).collect())
        })
    }

    fn subset(&self, idx: &[usize]) -> Result<Self> {
        Ok(Self {
            data: self.data.subset(idx),
        })
    }
}

/// Number of validation individuals drawn from a stratum of size `m`.
pub fn validation_count(q: f64, m: usize) -> Result<usize> {
    let count = (q * m as f64).round() as usize;
    if count == 0 || count >= m {
        return Err(Error::ArmExhausted { count, arm_size: m });
    }
    Ok(count)
}

/// Split `j` of `plan`: `round(q·|stratum|)` validation draws per stratum
/// without replacement. Returns sorted (train, val) indices.
pub fn stratified_split(strata: &[Vec<usize>], n: usize, plan: &SplitPlan, j: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut rng = rng_from(plan.seed, &[j as u64]);
    let mut in_val = vec![false; n];
    for stratum in strata {
        let count = validation_count(plan.q, stratum.len())?;
        let mut pool = stratum.clone();
        let (chosen, _) = pool.partial_shuffle(&mut rng, count);
        for &i in chosen.iter() {
            in_val[i] = true;
        }
    }
    let (val, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| in_val[i]);
    Ok((train, val))
}

/// One split's validation indices and unit losses.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitOutcome {
    pub val: Vec<usize>,
    pub losses: Vec<f64>,
}

impl SplitOutcome {
    pub fn risk(&self) -> f64 {
        mean(&self.losses)
    }
}

pub fn risk_on_split<T: CvTask>(task: &T, plan: &SplitPlan, loss: &LossSpec, j: usize) -> Result<SplitOutcome> {
    let run = || {
        let (train, val) = stratified_split(&task.strata(), task.len(), plan, j)?;
        let losses = task.unit_losses(&train, &val, loss, plan.split_seed(j))?;
        Ok(SplitOutcome { val, losses })
    };
    run().map_err(|e| Error::Split {
        split: j,
        source: Box::new(e),
    })
}

/// All `J` splits, in split order.
pub fn run_splits<T: CvTask>(task: &T, plan: &SplitPlan, loss: &LossSpec, exec: Execution) -> Result<Vec<SplitOutcome>> {
    plan.validate()?;
    loss.validate()?;
    for s in task.strata() {
        validation_count(plan.q, s.len())?;
    }
    exec.try_map(plan.j, |j| risk_on_split(task, plan, loss, j))
}

pub fn run_mccv_with<T: CvTask>(task: &T, plan: &SplitPlan, loss: &LossSpec, exec: Execution) -> Result<CvReport> {
    let splits = run_splits(task, plan, loss, exec)?;
    let n2 = splits[0].val.len();
    let within: Vec<f64> = splits.iter().map(|s| sample_var(&s.losses)).collect();
    let risks = splits.iter().map(SplitOutcome::risk).collect();
    Ok(CvReport::from_splits(risks, &within, n2, plan.q, task.len()))
}

/// MCCV on a stage dataset, matching on all features.
pub fn run_mccv(ds: &StageDataset, plan: &SplitPlan, loss: &LossSpec) -> Result<CvReport> {
    run_mccv_with(&ContrastTask::new(ds.clone()), plan, loss, Execution::default())
}
