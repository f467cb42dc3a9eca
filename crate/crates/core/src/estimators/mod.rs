//! Candidate contrast learners behind one fit/predict interface.

pub mod linear;
pub mod propensity;
pub mod tree;

use serde::{Deserialize, Serialize};

use crate::data::{RegressionDataset, StageDataset};
use crate::error::{Error, Result};

pub use linear::{fit_linear_contrast, fit_ols, LinearContrastFit, OlsFit};
pub use propensity::{expit, fit_propensity, logit, PropensityFit};
pub use tree::{fit_causal_tree, fit_regression_tree, RegressionTreeFit, TreeContrastFit, TreeNode, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Constant,
    Linear,
    Tree,
}

/// A candidate model. Unset treatment-free and propensity lists mean "all
/// features"; an empty tree covariate list also means all features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub kind: ModelKind,
    #[serde(default)]
    pub contrast_covariates: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub treatment_free_covariates: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub propensity_covariates: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree_params: Option<TreeParams>,
}

impl ModelSpec {
    pub fn constant() -> Self {
        Self {
            name: None,
            kind: ModelKind::Constant,
            contrast_covariates: Vec::new(),
            treatment_free_covariates: None,
            propensity_covariates: None,
            tree_params: None,
        }
    }

    pub fn linear<S: AsRef<str>>(covariates: &[S]) -> Self {
        Self {
            kind: ModelKind::Linear,
            contrast_covariates: covariates.iter().map(|s| s.as_ref().to_string()).collect(),
            ..Self::constant()
        }
    }

    pub fn tree<S: AsRef<str>>(covariates: &[S], params: TreeParams) -> Self {
        Self {
            kind: ModelKind::Tree,
            tree_params: Some(params),
            ..Self::linear(covariates)
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn with_treatment_free<S: AsRef<str>>(mut self, covariates: &[S]) -> Self {
        self.treatment_free_covariates = Some(covariates.iter().map(|s| s.as_ref().to_string()).collect());
        self
    }

    pub fn with_propensity<S: AsRef<str>>(mut self, covariates: &[S]) -> Self {
        self.propensity_covariates = Some(covariates.iter().map(|s| s.as_ref().to_string()).collect());
        self
    }

    /// Display label, e.g. `1`, `1+x1+x2` or `tree(l1,l2)`.
    pub fn label(&self) -> String {
        if let Some(n) = &self.name {
            return n.clone();
        }
        match self.kind {
            ModelKind::Constant => "1".into(),
            ModelKind::Linear => std::iter::once("1")
                .chain(self.contrast_covariates.iter().map(String::as_str))
                .collect::<Vec<_>>()
                .join("+"),
            ModelKind::Tree => format!("tree({})", self.contrast_covariates.join(",")),
        }
    }

    pub fn params(&self) -> TreeParams {
        self.tree_params.unwrap_or_default()
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ModelKind::Constant if !self.contrast_covariates.is_empty() => Err(Error::InvalidParameter(
                "constant model takes no contrast covariates".into(),
            )),
            ModelKind::Tree => self.params().validate(),
            _ if self.tree_params.is_some() => Err(Error::InvalidParameter(format!(
                "tree_params given for non-tree model {}",
                self.label()
            ))),
            _ => Ok(()),
        }
    }

    fn or_all(list: &Option<Vec<String>>, all: &[String]) -> Vec<String> {
        list.clone().unwrap_or_else(|| all.to_vec())
    }

    fn split_covariates(&self, all: &[String]) -> Vec<String> {
        if self.contrast_covariates.is_empty() {
            all.to_vec()
        } else {
            self.contrast_covariates.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedContrast {
    Linear(LinearContrastFit),
    Tree(TreeContrastFit),
}

impl FittedContrast {
    pub fn predict(&self, row: &[f64]) -> f64 {
        match self {
            FittedContrast::Linear(f) => f.predict(row),
            FittedContrast::Tree(f) => f.predict(row),
        }
    }

    /// Recommended action: 1 when the contrast is positive.
    pub fn recommend(&self, row: &[f64]) -> u8 {
        u8::from(self.predict(row) > 0.0)
    }
}

/// Fits a contrast model. `seed` only matters for honest trees and pruning.
pub fn fit_contrast(ds: &StageDataset, spec: &ModelSpec, seed: u64) -> Result<FittedContrast> {
    spec.validate()?;
    let all = ds.feature_names();
    match spec.kind {
        ModelKind::Constant | ModelKind::Linear => fit_linear_contrast(
            ds,
            &spec.contrast_covariates,
            &ModelSpec::or_all(&spec.treatment_free_covariates, all),
            &ModelSpec::or_all(&spec.propensity_covariates, all),
        )
        .map(FittedContrast::Linear),
        ModelKind::Tree => {
            fit_causal_tree(ds, &spec.split_covariates(all), &spec.params(), seed).map(FittedContrast::Tree)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedRegression {
    Ols(OlsFit),
    Tree(RegressionTreeFit),
}

impl FittedRegression {
    pub fn predict(&self, row: &[f64]) -> f64 {
        match self {
            FittedRegression::Ols(f) => f.predict(row),
            FittedRegression::Tree(f) => f.predict(row),
        }
    }
}

/// Fits a mean model for plain regression tasks. Trees are grown adaptively
/// with `min_leaf_per_arm` as the minimum leaf size.
pub fn fit_regression(ds: &RegressionDataset, spec: &ModelSpec) -> Result<FittedRegression> {
    spec.validate()?;
    match spec.kind {
        ModelKind::Constant | ModelKind::Linear => {
            fit_ols(ds, &spec.contrast_covariates).map(FittedRegression::Ols)
        }
        ModelKind::Tree => {
            let p = spec.params();
            if p.honest || p.prune {
                return Err(Error::InvalidParameter(
                    "regression trees support only the adaptive, unpruned variant".into(),
                ));
            }
            fit_regression_tree(ds, &spec.split_covariates(ds.feature_names()), p.min_leaf_per_arm, p.max_depth)
                .map(FittedRegression::Tree)
        }
    }
}
