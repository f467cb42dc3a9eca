//! Backward-induction A-learning with per-stage model selection.

use serde::{Deserialize, Serialize};

use crate::data::{StageDataset, TrialData, TrialRecord};
use crate::error::{Error, Result};
use crate::estimators::{fit_contrast, FittedContrast, ModelSpec};
use crate::exec::{derive_seed, Execution};
use crate::mccv::{run_mccv_with, ContrastTask, LossSpec, SplitPlan};
use crate::variance::{half_and_half, rho_report, selection_pvalue, variance_from_rho, HalfMode, RhoReport};

const FIT_STREAM: u64 = 0x0046_4954;

/// `V̂_k = V̂_{k+1} + (1{Ĉ_k > 0} − A_k)·Ĉ_k`, with `V̂_{k+1}` taken from the
/// dataset's response.
pub fn pseudo_value_update(ds: &StageDataset, fitted: &FittedContrast) -> Vec<f64> {
    (0..ds.len())
        .map(|i| pseudo_value(ds.response()[i], ds.action(i), fitted.predict(ds.row(i))))
        .collect()
}

pub fn pseudo_value(next: f64, action: u8, contrast: f64) -> f64 {
    let opt = f64::from(u8::from(contrast > 0.0));
    next + (opt - action as f64) * contrast
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum SelectionMode {
    #[default]
    /// Smallest `R̂_cv` wins.
    Point,
    /// Keep `preferred` unless the test against the other candidate gives `p < p0`.
    Test { preferred: usize, p0: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionPolicy {
    pub mode: SelectionMode,
    /// Candidates per stage, stage 1 first. A single list applies to every stage.
    pub candidates: Vec<Vec<ModelSpec>>,
}

impl SelectionPolicy {
    pub fn candidates_for(&self, stage: usize) -> &[ModelSpec] {
        if self.candidates.len() == 1 {
            &self.candidates[0]
        } else {
            &self.candidates[stage - 1]
        }
    }

    pub fn validate(&self, n_stages: usize) -> Result<()> {
        if self.candidates.len() != 1 && self.candidates.len() != n_stages {
            return Err(Error::InvalidParameter(format!(
                "{} candidate lists for {n_stages} stages",
                self.candidates.len()
            )));
        }
        for list in &self.candidates {
            if list.is_empty() {
                return Err(Error::InvalidParameter("empty candidate list".into()));
            }
            for s in list {
                s.validate()?;
            }
            if let SelectionMode::Test { preferred, p0 } = self.mode {
                if list.len() != 2 {
                    return Err(Error::InvalidParameter("test mode needs exactly two candidates".into()));
                }
                if preferred > 1 {
                    return Err(Error::InvalidParameter(format!("preferred candidate {preferred} out of range")));
                }
                if !(p0 > 0.0 && p0 < 0.5) {
                    return Err(Error::InvalidParameter(format!("p0 = {p0} must lie in (0, 0.5)")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSelectionReport {
    pub stage: usize,
    pub n: usize,
    /// Pairwise `R̂_cv` (first minus second candidate, or preferred minus
    /// challenger), or the winning single-model risk for longer menus.
    pub r_cv: Option<f64>,
    pub candidate_risks: Vec<f64>,
    pub variance: Option<f64>,
    pub p_value: Option<f64>,
    pub zero_variance: bool,
    pub rho: Option<RhoReport>,
    pub chosen_index: usize,
    pub chosen: ModelSpec,
    pub fitted: FittedContrast,
}

/// Stage layout: which history columns form the stage dataset and which of
/// them the surrogate matches on. `None` means all history columns.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageLayout {
    #[serde(default)]
    pub features: Option<Vec<String>>,
    #[serde(default)]
    pub matching: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackwardConfig {
    pub policy: SelectionPolicy,
    pub plan: SplitPlan,
    /// Half-and-half repetitions for the test-mode variance.
    pub b: usize,
    /// Per stage, stage 1 first; missing entries use the defaults.
    pub layout: Vec<StageLayout>,
}

/// Chooses and fits the stage model on `ds`.
#[allow(clippy::too_many_arguments)]
pub fn select_stage_model(
    ds: &StageDataset,
    stage: usize,
    candidates: &[ModelSpec],
    mode: SelectionMode,
    plan: &SplitPlan,
    b: usize,
    matching: &[String],
    exec: Execution,
) -> Result<StageSelectionReport> {
    let task = if matching.is_empty() {
        ContrastTask::new(ds.clone())
    } else {
        ContrastTask::matching_on(ds.clone(), matching)?
    };
    let mut r_cv = None;
    let mut candidate_risks = Vec::new();
    let mut test: Option<(f64, crate::variance::PValue, Option<RhoReport>)> = None;
    let chosen = match mode {
        SelectionMode::Point if candidates.len() == 1 => 0,
        SelectionMode::Point if candidates.len() == 2 => {
            let loss = LossSpec::difference(candidates[0].clone(), candidates[1].clone());
            let r = run_mccv_with(&task, plan, &loss, exec)?.r_cv;
            r_cv = Some(r);
            usize::from(r > 0.0)
        }
        SelectionMode::Point => {
            candidate_risks = candidates
                .iter()
                .map(|c| run_mccv_with(&task, plan, &LossSpec::single(c.clone()), exec).map(|r| r.r_cv))
                .collect::<Result<Vec<_>>>()?;
            let mut best = 0;
            for (k, &r) in candidate_risks.iter().enumerate() {
                if r < candidate_risks[best] {
                    best = k;
                }
            }
            r_cv = Some(candidate_risks[best]);
            best
        }
        SelectionMode::Test { preferred, p0 } => {
            let challenger = 1 - preferred;
            let loss = LossSpec::difference(candidates[preferred].clone(), candidates[challenger].clone());
            let full = run_mccv_with(&task, plan, &loss, exec)?;
            let (variance, rho) = if full.s_r_sq > 0.0 {
                let same = half_and_half(&task, plan, &loss, b, HalfMode::SameQ, exec)?;
                match rho_report(&full, &same, None) {
                    Ok(r) => (r.catalog.proposed_adj, Some(r)),
                    // halves without dispersion carry no correlation information
                    Err(Error::DegenerateDispersion(_)) => (variance_from_rho(full.s_r_sq, 0.0, full.j), None),
                    Err(e) => return Err(e),
                }
            } else {
                (0.0, None)
            };
            let pv = selection_pvalue(full.r_cv, variance);
            r_cv = Some(full.r_cv);
            test = Some((variance, pv, rho));
            if pv.p < p0 {
                challenger
            } else {
                preferred
            }
        }
    };
    let fitted = fit_contrast(ds, &candidates[chosen], derive_seed(plan.seed, &[FIT_STREAM, stage as u64]))?;
    let (variance, pv, rho) = match test {
        Some((v, pv, rho)) => (Some(v), Some(pv), rho),
        None => (None, None, None),
    };
    Ok(StageSelectionReport {
        stage,
        n: ds.len(),
        r_cv,
        candidate_risks,
        variance,
        p_value: pv.map(|p| p.p),
        zero_variance: pv.is_some_and(|p| p.zero_variance),
        rho,
        chosen_index: chosen,
        chosen: candidates[chosen].clone(),
        fitted,
    })
}

/// One stage's decision rule over the named history columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRule {
    pub stage: usize,
    pub features: Vec<String>,
    pub contrast: FittedContrast,
}

impl StageRule {
    /// `1{Ĉ(h) > 0}` for a row ordered like `features`.
    pub fn decide(&self, row: &[f64]) -> u8 {
        self.contrast.recommend(row)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    /// Stage 1 first.
    pub rules: Vec<StageRule>,
    pub reports: Vec<StageSelectionReport>,
}

impl Regime {
    pub fn rule(&self, stage: usize) -> &StageRule {
        &self.rules[stage - 1]
    }

    /// Recommended action at `stage` for a record of `trial`.
    pub fn recommend(&self, trial: &TrialData, record: &TrialRecord, stage: usize) -> Option<u8> {
        let rule = self.rule(stage);
        let row = rule
            .features
            .iter()
            .map(|c| trial.history_value(record, stage, c))
            .collect::<Option<Vec<f64>>>()?;
        Some(rule.decide(&row))
    }
}

/// Runs selection and fitting from the last stage back to the first,
/// propagating pseudo-values. Records that did not reach a stage keep their
/// current pseudo-value there.
pub fn run_backward(trial: &TrialData, cfg: &BackwardConfig, exec: Execution) -> Result<Regime> {
    run_backward_observed(trial, cfg, exec, |_| Ok(()))
}

/// What the observer of [`run_backward_observed`] sees at each stage, before
/// selection.
pub struct StageView<'a> {
    pub stage: usize,
    /// Stage dataset with the current pseudo-outcome as response.
    pub data: &'a StageDataset,
    pub matching: &'a [String],
    pub plan: &'a SplitPlan,
}

/// [`run_backward`] with a callback on every stage dataset.
pub fn run_backward_observed(
    trial: &TrialData,
    cfg: &BackwardConfig,
    exec: Execution,
    mut observe: impl FnMut(StageView<'_>) -> Result<()>,
) -> Result<Regime> {
    let k_max = trial.n_stages();
    cfg.policy.validate(k_max)?;
    cfg.plan.validate()?;
    let mut v = trial.outcomes();
    let mut rules = Vec::with_capacity(k_max);
    let mut reports = Vec::with_capacity(k_max);
    for k in (1..=k_max).rev() {
        let wrap = |e: Error| Error::Stage {
            stage: k,
            source: Box::new(e),
        };
        let layout = cfg.layout.get(k - 1).cloned().unwrap_or_default();
        let features = layout.features.unwrap_or_else(|| trial.history_columns(k));
        let matching = layout.matching.unwrap_or_default();
        let (ds, rows) = trial.stage_dataset(k, &features, &v).map_err(wrap)?;
        let plan = SplitPlan::new(cfg.plan.q, cfg.plan.j, derive_seed(cfg.plan.seed, &[k as u64]));
        observe(StageView {
            stage: k,
            data: &ds,
            matching: &matching,
            plan: &plan,
        })
        .map_err(wrap)?;
        let report = select_stage_model(
            &ds,
            k,
            cfg.policy.candidates_for(k),
            cfg.policy.mode,
            &plan,
            cfg.b,
            &matching,
            exec,
        )
        .map_err(wrap)?;
        for (i, val) in rows.iter().zip(pseudo_value_update(&ds, &report.fitted)) {
            v[*i] = val;
        }
        rules.push(StageRule {
            stage: k,
            features,
            contrast: report.fitted.clone(),
        });
        reports.push(report);
    }
    rules.reverse();
    reports.reverse();
    Ok(Regime { rules, reports })
}
