//! Observed-data containers for single-stage and multi-stage studies.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows of (history features, binary action, response) for one decision point.
///
/// Features are stored row-major. The treated and control index views are
/// computed once at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct StageDataset {
    feature_names: Vec<String>,
    features: Vec<f64>,
    action: Vec<u8>,
    response: Vec<f64>,
    treated: Vec<usize>,
    control: Vec<usize>,
}

fn check_finite(values: &[f64], field: &str, width: usize) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(pos) => Err(Error::NonFinite {
            field: field.to_string(),
            row: pos / width.max(1),
        }),
        None => Ok(()),
    }
}

impl StageDataset {
    /// Validates and builds a dataset. `features` is row-major with
    /// `feature_names.len()` columns; `action` must be 0/1 coded.
    pub fn new(
        feature_names: Vec<String>,
        features: Vec<f64>,
        action: &[f64],
        response: Vec<f64>,
    ) -> Result<Self> {
        let n = response.len();
        let d = feature_names.len();
        if action.len() != n {
            return Err(Error::LengthMismatch {
                what: "action".into(),
                got: action.len(),
                expected: n,
            });
        }
        if features.len() != n * d {
            return Err(Error::LengthMismatch {
                what: "features".into(),
                got: features.len(),
                expected: n * d,
            });
        }
        if n < 2 {
            return Err(Error::TooFewRows { min: 2, got: n });
        }
        check_finite(&features, "features", d)?;
        check_finite(&response, "response", 1)?;
        check_finite(action, "action", 1)?;
        let mut coded = Vec::with_capacity(n);
        for (row, &a) in action.iter().enumerate() {
            if a == 0.0 {
                coded.push(0u8);
            } else if a == 1.0 {
                coded.push(1u8);
            } else {
                return Err(Error::InvalidAction { row, value: a });
            }
        }
        Self::from_parts(feature_names, features, coded, response)
    }

    /// Builds from row vectors.
    pub fn from_rows(
        feature_names: Vec<String>,
        rows: &[Vec<f64>],
        action: &[f64],
        response: Vec<f64>,
    ) -> Result<Self> {
        let d = feature_names.len();
        let mut flat = Vec::with_capacity(rows.len() * d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::LengthMismatch {
                    what: format!("feature row {i}"),
                    got: row.len(),
                    expected: d,
                });
            }
            flat.extend_from_slice(row);
        }
        if rows.len() != response.len() {
            return Err(Error::LengthMismatch {
                what: "feature rows".into(),
                got: rows.len(),
                expected: response.len(),
            });
        }
        Self::new(feature_names, flat, action, response)
    }

    fn from_parts(
        feature_names: Vec<String>,
        features: Vec<f64>,
        action: Vec<u8>,
        response: Vec<f64>,
    ) -> Result<Self> {
        let mut treated = Vec::new();
        let mut control = Vec::new();
        for (i, &a) in action.iter().enumerate() {
            if a == 1 {
                treated.push(i);
            } else {
                control.push(i);
            }
        }
        if treated.is_empty() || control.is_empty() {
            return Err(Error::EmptyArm {
                treated: treated.len(),
                control: control.len(),
            });
        }
        Ok(Self {
            feature_names,
            features,
            action,
            response,
            treated,
            control,
        })
    }

    pub fn len(&self) -> usize {
        self.response.len()
    }

    pub fn is_empty(&self) -> bool {
        self.response.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.n_features();
        &self.features[i * d..(i + 1) * d]
    }

    pub fn feature(&self, i: usize, j: usize) -> f64 {
        self.features[i * self.n_features() + j]
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn action(&self, i: usize) -> u8 {
        self.action[i]
    }

    pub fn actions(&self) -> &[u8] {
        &self.action
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    /// Indices with action 1.
    pub fn treated(&self) -> &[usize] {
        &self.treated
    }

    /// Indices with action 0.
    pub fn control(&self) -> &[usize] {
        &self.control
    }

    /// Resolves feature names to column indices.
    pub fn columns(&self, names: &[String]) -> Result<Vec<usize>> {
        resolve_columns(&self.feature_names, names)
    }

    /// Rows `idx` (in that order) as a new dataset. Fails if an arm ends up empty.
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        let d = self.n_features();
        let mut features = Vec::with_capacity(idx.len() * d);
        let mut action = Vec::with_capacity(idx.len());
        let mut response = Vec::with_capacity(idx.len());
        for &i in idx {
            features.extend_from_slice(self.row(i));
            action.push(self.action[i]);
            response.push(self.response[i]);
        }
        Self::from_parts(self.feature_names.clone(), features, action, response)
    }

    /// Same rows with a replaced response vector.
    pub fn with_response(&self, response: Vec<f64>) -> Result<Self> {
        if response.len() != self.len() {
            return Err(Error::LengthMismatch {
                what: "response".into(),
                got: response.len(),
                expected: self.len(),
            });
        }
        check_finite(&response, "response", 1)?;
        Ok(Self {
            response,
            ..self.clone()
        })
    }

    /// Standardizes every feature column (population sd convention).
    pub fn standardize(&self) -> (Self, StandardizationStats) {
        let cols: Vec<usize> = (0..self.n_features()).collect();
        let stats = StandardizationStats::compute(&self.features, self.n_features(), &cols);
        let mut out = self.clone();
        stats.apply_in_place(&mut out.features, self.n_features());
        (out, stats)
    }

    /// Inverse of [`StageDataset::standardize`].
    pub fn destandardize(&self, stats: &StandardizationStats) -> Self {
        let mut out = self.clone();
        stats.invert_in_place(&mut out.features, self.n_features());
        out
    }

    /// Reads the single-stage CSV schema: `id`, feature columns, `action`, `response`.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let find = |name: &str| headers.iter().position(|h| h == name);
        let action_col =
            find("action").ok_or_else(|| Error::Schema("missing column `action`".into()))?;
        let response_col =
            find("response").ok_or_else(|| Error::Schema("missing column `response`".into()))?;
        let id_col = find("id");
        let feature_cols: Vec<usize> = (0..headers.len())
            .filter(|&c| c != action_col && c != response_col && Some(c) != id_col)
            .collect();
        let names = feature_cols.iter().map(|&c| headers[c].clone()).collect();
        let mut features = Vec::new();
        let mut action = Vec::new();
        let mut response = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            for &c in &feature_cols {
                features.push(parse_cell(&rec, c, &headers[c], row)?);
            }
            action.push(parse_cell(&rec, action_col, "action", row)?);
            response.push(parse_cell(&rec, response_col, "response", row)?);
        }
        Self::new(names, features, &action, response)
    }

    pub fn read_csv_path(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["id".to_string()];
        header.extend(self.feature_names.iter().cloned());
        header.push("action".into());
        header.push("response".into());
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = vec![i.to_string()];
            rec.extend(self.row(i).iter().map(|v| v.to_string()));
            rec.push(self.action[i].to_string());
            rec.push(self.response[i].to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn parse_cell(rec: &csv::StringRecord, col: usize, name: &str, row: usize) -> Result<f64> {
    let raw = rec.get(col).unwrap_or("");
    raw.parse::<f64>()
        .map_err(|_| Error::Schema(format!("column `{name}`, row {}: cannot parse `{raw}`", row + 1)))
}

pub(crate) fn resolve_columns(available: &[String], names: &[String]) -> Result<Vec<usize>> {
    names
        .iter()
        .map(|name| {
            available
                .iter()
                .position(|a| a == name)
                .ok_or_else(|| Error::UnknownCovariate(name.clone()))
        })
        .collect()
}

/// Column means and standard deviations used to put features on a common scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats {
    pub columns: Vec<usize>,
    pub means: Vec<f64>,
    pub stddevs: Vec<f64>,
}

/// Columns with a standard deviation below this are only centered.
pub const DEGENERATE_SD: f64 = 1e-12;

impl StandardizationStats {
    /// Statistics for `columns` of a row-major matrix with `width` columns.
    /// Standard deviations divide by n.
    pub fn compute(features: &[f64], width: usize, columns: &[usize]) -> Self {
        let n = features.len().checked_div(width).unwrap_or(0);
        let nf = n.max(1) as f64;
        let mut means = vec![0.0; columns.len()];
        let mut stddevs = vec![0.0; columns.len()];
        for (k, &c) in columns.iter().enumerate() {
            let mean = (0..n).map(|i| features[i * width + c]).sum::<f64>() / nf;
            let var = (0..n)
                .map(|i| (features[i * width + c] - mean).powi(2))
                .sum::<f64>()
                / nf;
            let sd = var.sqrt();
            means[k] = mean;
            stddevs[k] = if sd < DEGENERATE_SD { 1.0 } else { sd };
        }
        Self {
            columns: columns.to_vec(),
            means,
            stddevs,
        }
    }

    /// Standardized values of the tracked columns of one row.
    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        self.columns
            .iter()
            .enumerate()
            .map(|(k, &c)| (row[c] - self.means[k]) / self.stddevs[k])
            .collect()
    }

    fn apply_in_place(&self, features: &mut [f64], width: usize) {
        for row in features.chunks_mut(width) {
            for (k, &c) in self.columns.iter().enumerate() {
                row[c] = (row[c] - self.means[k]) / self.stddevs[k];
            }
        }
    }

    fn invert_in_place(&self, features: &mut [f64], width: usize) {
        for row in features.chunks_mut(width) {
            for (k, &c) in self.columns.iter().enumerate() {
                row[c] = row[c] * self.stddevs[k] + self.means[k];
            }
        }
    }
}

/// Plain regression data where the validation label is the observed response.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionDataset {
    feature_names: Vec<String>,
    features: Vec<f64>,
    response: Vec<f64>,
}

impl RegressionDataset {
    pub fn new(feature_names: Vec<String>, features: Vec<f64>, response: Vec<f64>) -> Result<Self> {
        let n = response.len();
        let d = feature_names.len();
        if features.len() != n * d {
            return Err(Error::LengthMismatch {
                what: "features".into(),
                got: features.len(),
                expected: n * d,
            });
        }
        if n < 2 {
            return Err(Error::TooFewRows { min: 2, got: n });
        }
        check_finite(&features, "features", d)?;
        check_finite(&response, "response", 1)?;
        Ok(Self {
            feature_names,
            features,
            response,
        })
    }

    pub fn len(&self) -> usize {
        self.response.len()
    }

    pub fn is_empty(&self) -> bool {
        self.response.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.n_features();
        &self.features[i * d..(i + 1) * d]
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn columns(&self, names: &[String]) -> Result<Vec<usize>> {
        resolve_columns(&self.feature_names, names)
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        let d = self.n_features();
        let mut features = Vec::with_capacity(idx.len() * d);
        let mut response = Vec::with_capacity(idx.len());
        for &i in idx {
            features.extend_from_slice(self.row(i));
            response.push(self.response[i]);
        }
        Self {
            feature_names: self.feature_names.clone(),
            features,
            response,
        }
    }
}

/// One individual's follow-up record across `K` decision points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub id: String,
    /// Covariate block per stage; blocks of unreached stages are ignored.
    pub stages: Vec<Vec<f64>>,
    /// Action per stage; entries of unreached stages are ignored.
    pub actions: Vec<u8>,
    pub final_outcome: f64,
    /// Which stages were reached; always a prefix.
    pub stage_mask: Vec<bool>,
}

impl TrialRecord {
    pub fn reached(&self, stage: usize) -> bool {
        stage >= 1 && self.stage_mask.get(stage - 1).copied().unwrap_or(false)
    }

    pub fn stages_reached(&self) -> usize {
        self.stage_mask.iter().take_while(|&&m| m).count()
    }
}

/// A set of multi-stage records sharing a per-stage covariate schema.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialData {
    stage_feature_names: Vec<Vec<String>>,
    records: Vec<TrialRecord>,
}

impl TrialData {
    pub fn new(stage_feature_names: Vec<Vec<String>>, records: Vec<TrialRecord>) -> Result<Self> {
        let k = stage_feature_names.len();
        if k == 0 {
            return Err(Error::InvalidParameter("at least one stage is required".into()));
        }
        for r in &records {
            if r.stage_mask.len() != k || r.stages.len() != k || r.actions.len() != k {
                return Err(Error::InvalidStageMask {
                    id: r.id.clone(),
                    reason: format!("expected {k} stages"),
                });
            }
            let reached = r.stages_reached();
            if reached == 0 {
                return Err(Error::InvalidStageMask {
                    id: r.id.clone(),
                    reason: "stage 1 not reached".into(),
                });
            }
            if r.stage_mask[reached..].iter().any(|&m| m) {
                return Err(Error::InvalidStageMask {
                    id: r.id.clone(),
                    reason: "stage mask has a gap".into(),
                });
            }
            if !r.final_outcome.is_finite() {
                return Err(Error::NonFinite {
                    field: format!("y ({})", r.id),
                    row: 0,
                });
            }
            for (s, names) in stage_feature_names.iter().enumerate().take(reached) {
                if r.stages[s].len() != names.len() {
                    return Err(Error::LengthMismatch {
                        what: format!("stage {} covariates of {}", s + 1, r.id),
                        got: r.stages[s].len(),
                        expected: names.len(),
                    });
                }
                if r.stages[s].iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite {
                        field: format!("s{}_* ({})", s + 1, r.id),
                        row: 0,
                    });
                }
                if r.actions[s] > 1 {
                    return Err(Error::InvalidAction {
                        row: 0,
                        value: r.actions[s] as f64,
                    });
                }
            }
        }
        Ok(Self {
            stage_feature_names,
            records,
        })
    }

    pub fn n_stages(&self) -> usize {
        self.stage_feature_names.len()
    }

    pub fn records(&self) -> &[TrialRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn stage_feature_names(&self, stage: usize) -> &[String] {
        &self.stage_feature_names[stage - 1]
    }

    pub fn outcomes(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.final_outcome).collect()
    }

    /// History columns available at `stage`: `s<j>_<name>` for j ≤ stage and
    /// `a<j>` for j < stage.
    pub fn history_columns(&self, stage: usize) -> Vec<String> {
        let mut cols = Vec::new();
        for j in 1..=stage {
            for name in &self.stage_feature_names[j - 1] {
                cols.push(format!("s{j}_{name}"));
            }
            if j < stage {
                cols.push(format!("a{j}"));
            }
        }
        cols
    }

    /// Value of a history column (see [`TrialData::history_columns`]) for one record.
    pub fn history_value(&self, r: &TrialRecord, stage: usize, column: &str) -> Option<f64> {
        for j in 1..=stage {
            if let Some(pos) = self.stage_feature_names[j - 1]
                .iter()
                .position(|nm| format!("s{j}_{nm}") == column)
            {
                return Some(r.stages[j - 1][pos]);
            }
            if j < stage && column == format!("a{j}") {
                return Some(r.actions[j - 1] as f64);
            }
        }
        None
    }

    /// Stage-`stage` dataset over the individuals who reached it, with the
    /// given history columns and per-record responses (indexed like
    /// [`TrialData::records`]). Returns the dataset and the record index of
    /// each row.
    pub fn stage_dataset(
        &self,
        stage: usize,
        columns: &[String],
        responses: &[f64],
    ) -> Result<(StageDataset, Vec<usize>)> {
        if stage == 0 || stage > self.n_stages() {
            return Err(Error::InvalidParameter(format!("stage {stage} out of range")));
        }
        if responses.len() != self.len() {
            return Err(Error::LengthMismatch {
                what: "responses".into(),
                got: responses.len(),
                expected: self.len(),
            });
        }
        let available = self.history_columns(stage);
        resolve_columns(&available, columns)?;
        let mut rows = Vec::new();
        let mut features = Vec::new();
        let mut action = Vec::new();
        let mut response = Vec::new();
        for (i, r) in self.records.iter().enumerate() {
            if !r.reached(stage) {
                continue;
            }
            for c in columns {
                features.push(self.history_value(r, stage, c).expect("column resolved"));
            }
            action.push(r.actions[stage - 1] as f64);
            response.push(responses[i]);
            rows.push(i);
        }
        let ds = StageDataset::new(columns.to_vec(), features, &action, response)?;
        Ok((ds, rows))
    }

    /// Reads the multi-stage CSV schema: `id`, `s<k>_<feature>`, `a<k>`, `y`,
    /// and optional `reached_s<k>` 0/1 columns. Cells of unreached stages may
    /// be empty or `NA`.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut stage_cols: HashMap<usize, Vec<(String, usize)>> = HashMap::new();
        let mut action_cols: HashMap<usize, usize> = HashMap::new();
        let mut reach_cols: HashMap<usize, usize> = HashMap::new();
        let mut y_col = None;
        let mut id_col = None;
        for (c, h) in headers.iter().enumerate() {
            if h == "id" {
                id_col = Some(c);
            } else if h == "y" {
                y_col = Some(c);
            } else if let Some(rest) = h.strip_prefix("reached_s") {
                let k = parse_stage(rest, h)?;
                reach_cols.insert(k, c);
            } else if let Some(rest) = h.strip_prefix('a').filter(|r| r.parse::<usize>().is_ok()) {
                action_cols.insert(parse_stage(rest, h)?, c);
            } else if let Some(rest) = h.strip_prefix('s') {
                let (num, name) = rest
                    .split_once('_')
                    .ok_or_else(|| Error::Schema(format!("unrecognized column `{h}`")))?;
                let k = parse_stage(num, h)?;
                stage_cols.entry(k).or_default().push((name.to_string(), c));
            } else {
                return Err(Error::Schema(format!("unrecognized column `{h}`")));
            }
        }
        let y_col = y_col.ok_or_else(|| Error::Schema("missing column `y`".into()))?;
        let k_max = action_cols.keys().copied().max().unwrap_or(0);
        if k_max == 0 {
            return Err(Error::Schema("no action columns `a<k>`".into()));
        }
        for k in 1..=k_max {
            if !action_cols.contains_key(&k) {
                return Err(Error::Schema(format!("missing column `a{k}`")));
            }
        }
        let names: Vec<Vec<String>> = (1..=k_max)
            .map(|k| {
                stage_cols
                    .get(&k)
                    .map(|v| v.iter().map(|(n, _)| n.clone()).collect())
                    .unwrap_or_default()
            })
            .collect();
        let mut records = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let id = id_col
                .and_then(|c| rec.get(c))
                .map(str::to_string)
                .unwrap_or_else(|| (row + 1).to_string());
            let mut mask = Vec::with_capacity(k_max);
            for k in 1..=k_max {
                let reached = match reach_cols.get(&k) {
                    Some(&c) => parse_cell(&rec, c, &headers[c], row)? != 0.0,
                    None => true,
                };
                mask.push(reached);
            }
            let mut stages = Vec::with_capacity(k_max);
            let mut actions = Vec::with_capacity(k_max);
            for k in 1..=k_max {
                let reached = mask[k - 1];
                let cols = stage_cols.get(&k).cloned().unwrap_or_default();
                let mut block = Vec::with_capacity(cols.len());
                for (_, c) in &cols {
                    block.push(if reached {
                        parse_cell(&rec, *c, &headers[*c], row)?
                    } else {
                        f64::NAN
                    });
                }
                stages.push(block);
                let ac = action_cols[&k];
                let a = if reached {
                    let v = parse_cell(&rec, ac, &headers[ac], row)?;
                    if v != 0.0 && v != 1.0 {
                        return Err(Error::InvalidAction { row, value: v });
                    }
                    v as u8
                } else {
                    0
                };
                actions.push(a);
            }
            let y = parse_cell(&rec, y_col, "y", row)?;
            records.push(TrialRecord {
                id,
                stages,
                actions,
                final_outcome: y,
                stage_mask: mask,
            });
        }
        Self::new(names, records)
    }

    pub fn read_csv_path(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["id".to_string()];
        for k in 1..=self.n_stages() {
            header.extend(self.stage_feature_names[k - 1].iter().map(|n| format!("s{k}_{n}")));
            header.push(format!("a{k}"));
        }
        header.push("y".into());
        header.extend((1..=self.n_stages()).map(|k| format!("reached_s{k}")));
        w.write_record(&header)?;
        for r in &self.records {
            let mut rec = vec![r.id.clone()];
            for k in 1..=self.n_stages() {
                let reached = r.reached(k);
                for v in &r.stages[k - 1] {
                    rec.push(if reached { v.to_string() } else { "NA".into() });
                }
                rec.push(if reached { r.actions[k - 1].to_string() } else { "NA".into() });
            }
            rec.push(r.final_outcome.to_string());
            rec.extend(r.stage_mask.iter().map(|&m| u8::from(m).to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn parse_stage(s: &str, header: &str) -> Result<usize> {
    match s.parse::<usize>() {
        Ok(k) if k >= 1 => Ok(k),
        _ => Err(Error::Schema(format!("bad stage number in column `{header}`"))),
    }
}
