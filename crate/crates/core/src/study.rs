//! Experiment drivers: configuration, replicate loops and report files for
//! the variance study, the two-stage regime study, the regression study and
//! the analysis of user data.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::TrialData;
use crate::dtr::{run_backward_observed, BackwardConfig, Regime, SelectionMode, SelectionPolicy, StageLayout};
use crate::error::{Error, Result};
use crate::estimators::{ModelKind, ModelSpec, TreeParams};
use crate::exec::{derive_seed, with_threads, Execution};
use crate::mccv::{run_mccv_with, ContrastTask, CvReport, CvTask, LossSpec, RegressionTask, SplitPlan};
use crate::sim::{
    evaluate_regime, gen_regression_appendix_b, gen_single_stage, gen_two_stage, regression_comparisons,
    regression_models, single_stage_loss, single_stage_matching, two_stage_layout, DtrMethod, RegimeEvaluation,
    ScenarioParams, TwoStageCase,
};
use crate::stats::{mean, sample_var};
use crate::variance::{half_and_half, rho_report, selection_pvalue, variance_from_rho, HalfMode, RhoReport};

const VAR_STREAM: u64 = 0x7661;
const DTR_STREAM: u64 = 0x6474;
const REG_STREAM: u64 = 0x7262;
const EVAL_STREAM: u64 = 0x6576;

/// Values given on the command line; each replaces the config file value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub reps: Option<usize>,
    pub out: Option<PathBuf>,
    pub j: Option<usize>,
    pub q: Option<f64>,
    pub b: Option<usize>,
    pub p0: Option<f64>,
    pub name: Option<String>,
}

fn not_applicable(flag: &str, cmd: &str) -> Error {
    Error::InvalidParameter(format!("--{flag} does not apply to {cmd}"))
}

fn check_plan(j: usize, q: f64) -> Result<()> {
    SplitPlan::new(q, j, 0).validate()
}

fn check_reps(reps: usize) -> Result<()> {
    if reps == 0 {
        return Err(Error::InvalidParameter("reps must be at least 1".into()));
    }
    Ok(())
}

fn check_b(b: usize) -> Result<()> {
    if b == 0 {
        return Err(Error::InvalidParameter("B must be at least 1".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VarStudyConfig {
    pub name: Option<String>,
    pub out: PathBuf,
    pub seed: u64,
    /// Worker threads; 0 uses the global pool.
    pub threads: usize,
    pub reps: usize,
    pub j: usize,
    pub q: f64,
    pub b: usize,
    /// Setting ids among `d`, `e`, `f`.
    pub settings: Vec<String>,
    pub sizes: Vec<usize>,
    /// Also run halving at `2q` for the matched-size column.
    pub double_q: bool,
    pub tree: TreeParams,
}

impl Default for VarStudyConfig {
    fn default() -> Self {
        Self {
            name: None,
            out: PathBuf::from("runs"),
            seed: 2024,
            threads: 0,
            reps: 200,
            j: 100,
            q: 0.2,
            b: 50,
            settings: vec!["d".into(), "e".into(), "f".into()],
            sizes: vec![200, 1000],
            double_q: true,
            tree: TreeParams::honest_pruned(),
        }
    }
}

impl VarStudyConfig {
    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if o.p0.is_some() {
            return Err(not_applicable("p0", "var-study"));
        }
        apply_common(o, &mut self.seed, &mut self.threads, &mut self.out, &mut self.name);
        self.reps = o.reps.unwrap_or(self.reps);
        self.j = o.j.unwrap_or(self.j);
        self.q = o.q.unwrap_or(self.q);
        self.b = o.b.unwrap_or(self.b);
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        check_reps(self.reps)?;
        check_plan(self.j, self.q)?;
        check_b(self.b)?;
        self.tree.validate()?;
        for s in &self.settings {
            ScenarioParams::setting(s).ok_or_else(|| Error::InvalidParameter(format!("unknown setting {s:?}")))?;
        }
        if let Some(&n) = self.sizes.iter().find(|&&n| n < 50) {
            return Err(Error::InvalidParameter(format!("sample size {n} is below 50")));
        }
        if self.settings.is_empty() || self.sizes.is_empty() {
            return Err(Error::InvalidParameter("var-study needs at least one setting and size".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DtrStudyConfig {
    pub name: Option<String>,
    pub out: PathBuf,
    pub seed: u64,
    pub threads: usize,
    pub reps: usize,
    pub n: usize,
    pub j: usize,
    pub q: f64,
    pub b: usize,
    pub p0: f64,
    /// Case ids among `i`, `ii`, `iii`, `iv`.
    pub cases: Vec<String>,
    pub methods: Vec<DtrMethod>,
    pub eval_draws: usize,
    pub tree: TreeParams,
}

impl Default for DtrStudyConfig {
    fn default() -> Self {
        Self {
            name: None,
            out: PathBuf::from("runs"),
            seed: 2024,
            threads: 0,
            reps: 50,
            n: 1000,
            j: 100,
            q: 0.2,
            b: 50,
            p0: 0.05,
            cases: vec!["i".into(), "ii".into(), "iii".into(), "iv".into()],
            methods: DtrMethod::ALL.to_vec(),
            eval_draws: 100_000,
            tree: TreeParams::honest_pruned(),
        }
    }
}

impl DtrStudyConfig {
    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        apply_common(o, &mut self.seed, &mut self.threads, &mut self.out, &mut self.name);
        self.reps = o.reps.unwrap_or(self.reps);
        self.j = o.j.unwrap_or(self.j);
        self.q = o.q.unwrap_or(self.q);
        self.b = o.b.unwrap_or(self.b);
        self.p0 = o.p0.unwrap_or(self.p0);
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        check_reps(self.reps)?;
        check_plan(self.j, self.q)?;
        check_b(self.b)?;
        self.tree.validate()?;
        if !(self.p0 > 0.0 && self.p0 < 0.5) {
            return Err(Error::InvalidParameter(format!("p0 = {} must lie in (0, 0.5)", self.p0)));
        }
        if self.n < 50 {
            return Err(Error::InvalidParameter(format!("sample size {} is below 50", self.n)));
        }
        if self.eval_draws < 10_000 {
            return Err(Error::InvalidParameter(format!(
                "eval_draws = {} is below 10000",
                self.eval_draws
            )));
        }
        for c in &self.cases {
            TwoStageCase::named(c).ok_or_else(|| Error::InvalidParameter(format!("unknown case {c:?}")))?;
        }
        if self.cases.is_empty() || self.methods.is_empty() {
            return Err(Error::InvalidParameter("dtr-study needs at least one case and method".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AppendixBConfig {
    pub name: Option<String>,
    pub out: PathBuf,
    pub seed: u64,
    pub threads: usize,
    pub reps: usize,
    pub n: usize,
    pub j: usize,
    pub q: f64,
    /// Fixed correlation for the `var_rho` column.
    pub rho: f64,
}

impl Default for AppendixBConfig {
    fn default() -> Self {
        Self {
            name: None,
            out: PathBuf::from("runs"),
            seed: 2024,
            threads: 0,
            reps: 200,
            n: 200,
            j: 50,
            q: 0.2,
            rho: 0.2,
        }
    }
}

impl AppendixBConfig {
    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if o.p0.is_some() {
            return Err(not_applicable("p0", "appendix-b"));
        }
        if o.b.is_some() {
            return Err(not_applicable("b", "appendix-b"));
        }
        apply_common(o, &mut self.seed, &mut self.threads, &mut self.out, &mut self.name);
        self.reps = o.reps.unwrap_or(self.reps);
        self.j = o.j.unwrap_or(self.j);
        self.q = o.q.unwrap_or(self.q);
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        check_reps(self.reps)?;
        check_plan(self.j, self.q)?;
        if self.n < 20 {
            return Err(Error::InvalidParameter(format!("sample size {} is below 20", self.n)));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::InvalidParameter(format!("rho = {} must lie in [0, 1)", self.rho)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalyzeConfig {
    pub name: Option<String>,
    pub out: PathBuf,
    pub seed: u64,
    pub threads: usize,
    /// Trial CSV; may also be given on the command line.
    pub input: Option<PathBuf>,
    pub j: usize,
    pub q: f64,
    pub b: usize,
    pub policy: SelectionPolicy,
    pub layout: Vec<StageLayout>,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        Self {
            name: None,
            out: PathBuf::from("runs"),
            seed: 2024,
            threads: 0,
            input: None,
            j: 100,
            q: 0.2,
            b: 50,
            policy: SelectionPolicy {
                mode: SelectionMode::Test { preferred: 0, p0: 0.05 },
                candidates: vec![vec![
                    ModelSpec::constant(),
                    ModelSpec::tree::<&str>(&[], TreeParams::honest_pruned()).named("tree"),
                ]],
            },
            layout: Vec::new(),
        }
    }
}

impl AnalyzeConfig {
    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if o.reps.is_some() {
            return Err(not_applicable("reps", "analyze"));
        }
        apply_common(o, &mut self.seed, &mut self.threads, &mut self.out, &mut self.name);
        self.j = o.j.unwrap_or(self.j);
        self.q = o.q.unwrap_or(self.q);
        self.b = o.b.unwrap_or(self.b);
        if let Some(p) = o.p0 {
            match &mut self.policy.mode {
                SelectionMode::Test { p0, .. } => *p0 = p,
                SelectionMode::Point => {
                    return Err(Error::InvalidParameter("--p0 needs a test-mode policy".into()));
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        check_plan(self.j, self.q)?;
        check_b(self.b)?;
        if self.input.is_none() {
            return Err(Error::InvalidParameter("analyze needs an input CSV".into()));
        }
        if self.policy.candidates.is_empty() {
            return Err(Error::InvalidParameter("analyze needs at least one candidate list".into()));
        }
        // stage count is checked once the data are read
        self.policy.validate(self.policy.candidates.len())
    }
}

fn apply_common(o: &Overrides, seed: &mut u64, threads: &mut usize, out: &mut PathBuf, name: &mut Option<String>) {
    if let Some(s) = o.seed {
        *seed = s;
    }
    if let Some(t) = o.threads {
        *threads = t;
    }
    if let Some(p) = &o.out {
        *out = p.clone();
    }
    if let Some(n) = &o.name {
        *name = Some(n.clone());
    }
}

/// Config file: one optional flat section per subcommand.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub var_study: Option<VarStudyConfig>,
    #[serde(default)]
    pub dtr_study: Option<DtrStudyConfig>,
    #[serde(default)]
    pub analyze: Option<AnalyzeConfig>,
    #[serde(default)]
    pub appendix_b: Option<AppendixBConfig>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// A run directory `<out>/<subcommand>/<name>`.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub dir: PathBuf,
}

impl RunOutput {
    pub fn create(out: &Path, subcommand: &str, name: &str) -> Result<Self> {
        let dir = out.join(subcommand).join(name);
        fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn write_csv(&self, file: &str, table: &Table) -> Result<()> {
        let mut w = csv::Writer::from_path(self.dir.join(file))?;
        w.write_record(&table.header)?;
        for r in &table.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json<T: Serialize>(&self, file: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(self.dir.join(file), text)?;
        Ok(())
    }
}

fn run_name(name: &Option<String>, seed: u64) -> String {
    name.clone().unwrap_or_else(|| format!("seed-{seed}"))
}

/// Header plus string cells.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Column-aligned plain text.
    pub fn render(&self) -> String {
        let width: Vec<usize> = (0..self.header.len())
            .map(|c| {
                self.rows
                    .iter()
                    .map(|r| short(&r[c]).len())
                    .chain([self.header[c].len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |cells: Vec<String>| {
            cells
                .iter()
                .zip(&width)
                .map(|(c, w)| format!("{c:>w$}"))
                .collect::<Vec<_>>()
                .join("  ")
        };
        let mut out = line(self.header.clone());
        for r in &self.rows {
            out.push('\n');
            out.push_str(&line(r.iter().map(|c| short(c)).collect()));
        }
        out.push('\n');
        out
    }
}

/// Four significant decimals for display.
fn short(cell: &str) -> String {
    match cell.parse::<f64>() {
        Ok(v) if cell.contains('.') || cell.contains('e') => format!("{v:.4}"),
        _ => cell.to_string(),
    }
}

fn num(x: f64) -> String {
    x.to_string()
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".into(), num)
}

/// Outcome of a subcommand: where it wrote and its summary table.
#[derive(Debug, Clone)]
pub struct StudyReport {
    pub dir: PathBuf,
    pub summary: Table,
}

// ---------------------------------------------------------------- var-study

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceReplicate {
    pub rep: usize,
    pub cv: CvReport,
    pub rho: RhoReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceCell {
    pub setting: String,
    pub n: usize,
    pub replicates: Vec<VarianceReplicate>,
}

/// Cell averages over replicates; `var_star` is the spread of `R̂_cv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceSummary {
    pub av_r_cv: f64,
    pub var_star: Option<f64>,
    pub rho_half: f64,
    pub var_rho_half: f64,
    pub rho_adj: f64,
    pub var_rho_adj: f64,
    pub var_rho0: f64,
    pub var_rhoq: f64,
    pub var_half: f64,
    pub var_matched_n2: Option<f64>,
}

impl VarianceCell {
    pub fn r_cv(&self) -> Vec<f64> {
        self.replicates.iter().map(|r| r.cv.r_cv).collect()
    }

    pub fn summary(&self) -> VarianceSummary {
        let avg = |f: &dyn Fn(&VarianceReplicate) -> f64| mean(&self.replicates.iter().map(f).collect::<Vec<_>>());
        let r = self.r_cv();
        VarianceSummary {
            av_r_cv: mean(&r),
            var_star: (r.len() > 1).then(|| sample_var(&r)),
            rho_half: avg(&|v| v.rho.rho_half),
            var_rho_half: avg(&|v| v.rho.catalog.proposed_half),
            rho_adj: avg(&|v| v.rho.rho_adj),
            var_rho_adj: avg(&|v| v.rho.catalog.proposed_adj),
            var_rho0: avg(&|v| v.rho.catalog.rho0),
            var_rhoq: avg(&|v| v.rho.catalog.rhoq),
            var_half: avg(&|v| v.rho.catalog.half_naive),
            var_matched_n2: self
                .replicates
                .iter()
                .map(|v| v.rho.catalog.matched_n2)
                .collect::<Option<Vec<_>>>()
                .map(|m| mean(&m)),
        }
    }
}

/// Seed of replicate `rep` in a single-stage cell.
pub fn var_replicate_seed(seed: u64, setting: &str, n: usize, rep: usize) -> u64 {
    let tag = setting.bytes().fold(0u64, |a, b| a * 256 + b as u64);
    derive_seed(seed, &[VAR_STREAM, tag, n as u64, rep as u64])
}

/// One single-stage replicate: data, full MCCV and the variance catalog.
pub fn var_replicate(cfg: &VarStudyConfig, setting: &str, n: usize, rep: usize) -> Result<VarianceReplicate> {
    let p = ScenarioParams::setting(setting)
        .ok_or_else(|| Error::InvalidParameter(format!("unknown setting {setting:?}")))?;
    let seed = var_replicate_seed(cfg.seed, setting, n, rep);
    let sim = gen_single_stage(n, &p, seed)?;
    let task = ContrastTask::matching_on(sim.data, &single_stage_matching())?;
    let plan = SplitPlan::new(cfg.q, cfg.j, derive_seed(seed, &[1]));
    let loss = single_stage_loss(cfg.tree);
    let exec = Execution::Sequential;
    let cv = run_mccv_with(&task, &plan, &loss, exec)?;
    let same = half_and_half(&task, &plan, &loss, cfg.b, HalfMode::SameQ, exec)?;
    let double = if cfg.double_q {
        Some(half_and_half(&task, &plan, &loss, cfg.b, HalfMode::DoubleQ, exec)?)
    } else {
        None
    };
    let rho = rho_report(&cv, &same, double.as_ref())?;
    Ok(VarianceReplicate { rep, cv, rho })
}

/// All replicates of one `(setting, n)` cell, run in parallel.
pub fn var_study_cell(cfg: &VarStudyConfig, setting: &str, n: usize) -> Result<VarianceCell> {
    let replicates = Execution::Parallel.try_map(cfg.reps, |rep| var_replicate(cfg, setting, n, rep))?;
    Ok(VarianceCell {
        setting: setting.to_string(),
        n,
        replicates,
    })
}

pub const VAR_SUMMARY_HEADER: [&str; 14] = [
    "scenario",
    "s",
    "n",
    "reps",
    "av_r_cv",
    "var_star",
    "rho_half",
    "var_rho_half",
    "rho_adj",
    "var_rho_adj",
    "var_rho0",
    "var_rhoq",
    "var_half",
    "var_matched_n2",
];

pub const VAR_REPLICATE_HEADER: [&str; 16] = [
    "scenario",
    "n",
    "rep",
    "r_cv",
    "s_r_sq",
    "s_u_sq",
    "rho_half",
    "inflation",
    "rho_adj",
    "var_rho_half",
    "var_rho_adj",
    "var_rho0",
    "var_rhoq",
    "var_half",
    "var_matched_n2",
    "J",
];

pub fn var_study(cfg: &VarStudyConfig, progress: &mut (dyn FnMut(&str) + Send)) -> Result<StudyReport> {
    cfg.validate()?;
    let mut summary = Table::new(&VAR_SUMMARY_HEADER);
    let mut reps = Table::new(&VAR_REPLICATE_HEADER);
    for setting in &cfg.settings {
        for &n in &cfg.sizes {
            progress(&format!("var-study: setting {setting}, n = {n}, {} replicates", cfg.reps));
            let cell = with_threads(cfg.threads, || var_study_cell(cfg, setting, n))?;
            let s = cell.summary();
            let p = ScenarioParams::setting(setting).unwrap_or(ScenarioParams::D);
            summary.rows.push(vec![
                setting.clone(),
                num(p.s),
                n.to_string(),
                cfg.reps.to_string(),
                num(s.av_r_cv),
                opt(s.var_star),
                num(s.rho_half),
                num(s.var_rho_half),
                num(s.rho_adj),
                num(s.var_rho_adj),
                num(s.var_rho0),
                num(s.var_rhoq),
                num(s.var_half),
                opt(s.var_matched_n2),
            ]);
            for r in &cell.replicates {
                let c = &r.rho.catalog;
                reps.rows.push(vec![
                    setting.clone(),
                    n.to_string(),
                    r.rep.to_string(),
                    num(r.cv.r_cv),
                    num(r.cv.s_r_sq),
                    num(r.cv.s_u_sq),
                    num(r.rho.rho_half),
                    num(r.rho.inflation),
                    num(r.rho.rho_adj),
                    num(c.proposed_half),
                    num(c.proposed_adj),
                    num(c.rho0),
                    num(c.rhoq),
                    num(c.half_naive),
                    opt(c.matched_n2),
                    r.cv.j.to_string(),
                ]);
            }
        }
    }
    let out = RunOutput::create(&cfg.out, "var-study", &run_name(&cfg.name, cfg.seed))?;
    out.write_csv("summary.csv", &summary)?;
    out.write_csv("replicates.csv", &reps)?;
    out.write_json("run-config.json", cfg)?;
    Ok(StudyReport { dir: out.dir, summary })
}

// ---------------------------------------------------------------- dtr-study

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DtrReplicate {
    pub case: String,
    pub method: DtrMethod,
    pub rep: usize,
    pub eval: RegimeEvaluation,
    /// Whether the tree was chosen, per stage; `None` without a choice.
    pub tree_selected: [Option<bool>; 2],
}

pub fn dtr_replicate_seed(seed: u64, case: &str, rep: usize) -> u64 {
    let tag = case.bytes().fold(0u64, |a, b| a * 256 + b as u64);
    derive_seed(seed, &[DTR_STREAM, tag, rep as u64])
}

fn tree_chosen(regime: &Regime, method: DtrMethod) -> [Option<bool>; 2] {
    let pick = |k: usize| {
        method
            .selects()
            .then(|| regime.reports[k].chosen.kind == ModelKind::Tree)
    };
    [pick(0), pick(1)]
}

/// Fits every configured method on one simulated trial and evaluates the
/// resulting regimes on common fresh draws.
pub fn dtr_replicate(cfg: &DtrStudyConfig, case_name: &str, rep: usize) -> Result<Vec<DtrReplicate>> {
    let case =
        TwoStageCase::named(case_name).ok_or_else(|| Error::InvalidParameter(format!("unknown case {case_name:?}")))?;
    let seed = dtr_replicate_seed(cfg.seed, case_name, rep);
    let sim = gen_two_stage(cfg.n, &case, seed)?;
    let eval_seed = derive_seed(seed, &[EVAL_STREAM]);
    cfg.methods
        .iter()
        .map(|&method| {
            let bc = BackwardConfig {
                policy: method.policy(cfg.p0, cfg.tree),
                plan: SplitPlan::new(cfg.q, cfg.j, derive_seed(seed, &[1])),
                b: cfg.b,
                layout: two_stage_layout(),
            };
            let regime = run_backward_observed(&sim.trial, &bc, Execution::Sequential, |_| Ok(()))?;
            Ok(DtrReplicate {
                case: case_name.to_string(),
                method,
                rep,
                eval: evaluate_regime(&regime, &case, cfg.eval_draws, eval_seed)?,
                tree_selected: tree_chosen(&regime, method),
            })
        })
        .collect()
}

/// All replicates of one case, grouped by method in configuration order.
pub fn dtr_study_case(cfg: &DtrStudyConfig, case_name: &str) -> Result<Vec<DtrReplicate>> {
    let per_rep = Execution::Parallel.try_map(cfg.reps, |rep| dtr_replicate(cfg, case_name, rep))?;
    let mut all: Vec<DtrReplicate> = per_rep.into_iter().flatten().collect();
    let order = |m: DtrMethod| cfg.methods.iter().position(|&x| x == m).unwrap_or(usize::MAX);
    all.sort_by_key(|r| (order(r.method), r.rep));
    Ok(all)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DtrSummary {
    pub case: String,
    pub method: DtrMethod,
    pub accuracy_mean: [f64; 3],
    pub accuracy_sd: [f64; 3],
    /// Percent of replicates choosing the tree, per stage.
    pub tree_pct: [Option<f64>; 2],
    pub value_mean: f64,
    pub value_sd: f64,
}

fn sd(x: &[f64]) -> f64 {
    sample_var(x).sqrt()
}

pub fn summarize_dtr(reps: &[DtrReplicate]) -> Vec<DtrSummary> {
    let mut keys: Vec<(String, DtrMethod)> = Vec::new();
    for r in reps {
        if !keys.iter().any(|(c, m)| c == &r.case && *m == r.method) {
            keys.push((r.case.clone(), r.method));
        }
    }
    keys.into_iter()
        .map(|(case, method)| {
            let rows: Vec<&DtrReplicate> = reps.iter().filter(|r| r.case == case && r.method == method).collect();
            let col = |f: &dyn Fn(&RegimeEvaluation) -> f64| rows.iter().map(|r| f(&r.eval)).collect::<Vec<_>>();
            let acc = [
                col(&|e| e.accuracy_stage1),
                col(&|e| e.accuracy_stage2),
                col(&|e| e.accuracy_both),
            ];
            let values = col(&|e| e.value);
            let pct = |k: usize| {
                rows.iter()
                    .map(|r| r.tree_selected[k])
                    .collect::<Option<Vec<bool>>>()
                    .map(|v| 100.0 * v.iter().filter(|&&t| t).count() as f64 / v.len() as f64)
            };
            DtrSummary {
                case,
                method,
                accuracy_mean: acc.clone().map(|a| mean(&a)),
                accuracy_sd: acc.map(|a| sd(&a)),
                tree_pct: [pct(0), pct(1)],
                value_mean: mean(&values),
                value_sd: sd(&values),
            }
        })
        .collect()
}

pub const DTR_SUMMARY_HEADER: [&str; 13] = [
    "case",
    "method",
    "acc_stage1_mean",
    "acc_stage1_sd",
    "acc_stage2_mean",
    "acc_stage2_sd",
    "acc_both_mean",
    "acc_both_sd",
    "tree_pct_stage1",
    "tree_pct_stage2",
    "value_mean",
    "value_sd",
    "reps",
];

pub const DTR_REPLICATE_HEADER: [&str; 10] = [
    "case",
    "method",
    "rep",
    "value",
    "value_se",
    "acc_stage1",
    "acc_stage2",
    "acc_both",
    "tree_stage1",
    "tree_stage2",
];

fn flag(x: Option<bool>) -> String {
    x.map_or_else(|| "-".into(), |t| u8::from(t).to_string())
}

pub fn dtr_study(cfg: &DtrStudyConfig, progress: &mut (dyn FnMut(&str) + Send)) -> Result<StudyReport> {
    cfg.validate()?;
    let mut summary = Table::new(&DTR_SUMMARY_HEADER);
    let mut reps = Table::new(&DTR_REPLICATE_HEADER);
    for case in &cfg.cases {
        progress(&format!("dtr-study: case {case}, {} replicates", cfg.reps));
        let rows = with_threads(cfg.threads, || dtr_study_case(cfg, case))?;
        for s in summarize_dtr(&rows) {
            summary.rows.push(vec![
                s.case.clone(),
                s.method.label().into(),
                num(s.accuracy_mean[0]),
                num(s.accuracy_sd[0]),
                num(s.accuracy_mean[1]),
                num(s.accuracy_sd[1]),
                num(s.accuracy_mean[2]),
                num(s.accuracy_sd[2]),
                s.tree_pct[0].map_or_else(|| "-".into(), num),
                s.tree_pct[1].map_or_else(|| "-".into(), num),
                num(s.value_mean),
                num(s.value_sd),
                cfg.reps.to_string(),
            ]);
        }
        for r in &rows {
            reps.rows.push(vec![
                r.case.clone(),
                r.method.label().into(),
                r.rep.to_string(),
                num(r.eval.value),
                num(r.eval.value_se),
                num(r.eval.accuracy_stage1),
                num(r.eval.accuracy_stage2),
                num(r.eval.accuracy_both),
                flag(r.tree_selected[0]),
                flag(r.tree_selected[1]),
            ]);
        }
    }
    let out = RunOutput::create(&cfg.out, "dtr-study", &run_name(&cfg.name, cfg.seed))?;
    out.write_csv("summary.csv", &summary)?;
    out.write_csv("replicates.csv", &reps)?;
    out.write_json("run-config.json", cfg)?;
    Ok(StudyReport { dir: out.dir, summary })
}

// --------------------------------------------------------------- appendix-b

/// Rows of the regression study: four single models, then two comparisons.
pub fn appendix_b_losses() -> Vec<LossSpec> {
    regression_models()
        .into_iter()
        .map(LossSpec::single)
        .chain(regression_comparisons())
        .collect()
}

/// Per replicate, one report per row of [`appendix_b_losses`].
pub fn appendix_b_replicates(cfg: &AppendixBConfig) -> Result<Vec<Vec<CvReport>>> {
    let losses = appendix_b_losses();
    Execution::Parallel.try_map(cfg.reps, |rep| {
        let seed = derive_seed(cfg.seed, &[REG_STREAM, cfg.n as u64, rep as u64]);
        let task = RegressionTask::new(gen_regression_appendix_b(cfg.n, seed)?);
        let plan = SplitPlan::new(cfg.q, cfg.j, derive_seed(seed, &[1]));
        losses
            .iter()
            .map(|l| run_mccv_with(&task, &plan, l, Execution::Sequential))
            .collect()
    })
}

pub const APPENDIX_B_HEADER: [&str; 5] = ["row", "label", "av_r_cv", "var_star", "var_rho"];

pub fn appendix_b(cfg: &AppendixBConfig, progress: &mut (dyn FnMut(&str) + Send)) -> Result<StudyReport> {
    cfg.validate()?;
    progress(&format!("appendix-b: n = {}, {} replicates", cfg.n, cfg.reps));
    let runs = with_threads(cfg.threads, || appendix_b_replicates(cfg))?;
    let losses = appendix_b_losses();
    let mut summary = Table::new(&APPENDIX_B_HEADER);
    let mut reps = Table::new(&["row", "rep", "r_cv", "s_r_sq", "var_rho"]);
    for (k, loss) in losses.iter().enumerate() {
        let r: Vec<f64> = runs.iter().map(|v| v[k].r_cv).collect();
        let vr: Vec<f64> = runs
            .iter()
            .map(|v| variance_from_rho(v[k].s_r_sq, cfg.rho, v[k].j))
            .collect();
        summary.rows.push(vec![
            (k + 1).to_string(),
            loss.label(),
            num(mean(&r)),
            opt((r.len() > 1).then(|| sample_var(&r))),
            num(mean(&vr)),
        ]);
        for (rep, v) in runs.iter().enumerate() {
            reps.rows.push(vec![
                (k + 1).to_string(),
                rep.to_string(),
                num(v[k].r_cv),
                num(v[k].s_r_sq),
                num(vr[rep]),
            ]);
        }
    }
    let out = RunOutput::create(&cfg.out, "appendix-b", &run_name(&cfg.name, cfg.seed))?;
    out.write_csv("summary.csv", &summary)?;
    out.write_csv("replicates.csv", &reps)?;
    out.write_json("run-config.json", cfg)?;
    Ok(StudyReport { dir: out.dir, summary })
}

// ------------------------------------------------------------------ analyze

/// `R̂_cv` with its standard deviation from the adjusted correlation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceRow {
    pub r_cv: f64,
    pub sd: f64,
    pub rho_adj: Option<f64>,
    pub p_value: f64,
    /// Splits or halves showed no dispersion.
    pub degenerate: bool,
}

pub fn variance_row<T: CvTask>(task: &T, plan: &SplitPlan, loss: &LossSpec, b: usize, exec: Execution) -> Result<VarianceRow> {
    let full = run_mccv_with(task, plan, loss, exec)?;
    let (variance, rho_adj, degenerate) = if full.s_r_sq > 0.0 {
        let same = half_and_half(task, plan, loss, b, HalfMode::SameQ, exec)?;
        match rho_report(&full, &same, None) {
            Ok(r) => (r.catalog.proposed_adj, Some(r.rho_adj), false),
            Err(Error::DegenerateDispersion(_)) => (variance_from_rho(full.s_r_sq, 0.0, full.j), None, true),
            Err(e) => return Err(e),
        }
    } else {
        (0.0, None, true)
    };
    Ok(VarianceRow {
        r_cv: full.r_cv,
        sd: variance.sqrt(),
        rho_adj,
        p_value: selection_pvalue(full.r_cv, variance).p,
        degenerate,
    })
}

pub const ANALYZE_HEADER: [&str; 10] = [
    "stage", "row", "label", "n", "r_cv", "sd", "rho_adj", "p_value", "flag", "chosen",
];

fn candidate_table(
    view: &crate::dtr::StageView<'_>,
    candidates: &[ModelSpec],
    mode: SelectionMode,
    b: usize,
    exec: Execution,
) -> Result<Vec<Vec<String>>> {
    let task = if view.matching.is_empty() {
        ContrastTask::new(view.data.clone())
    } else {
        ContrastTask::matching_on(view.data.clone(), view.matching)?
    };
    let row = |kind: &str, label: String, v: &VarianceRow| {
        vec![
            view.stage.to_string(),
            kind.to_string(),
            label,
            view.data.len().to_string(),
            num(v.r_cv),
            num(v.sd),
            opt(v.rho_adj),
            num(v.p_value),
            if v.degenerate { "degenerate".into() } else { String::new() },
            String::new(),
        ]
    };
    let mut rows = Vec::new();
    let mut single = Vec::new();
    for c in candidates {
        let v = variance_row(&task, view.plan, &LossSpec::single(c.clone()), b, exec)?;
        rows.push(row("candidate", c.label(), &v));
        single.push(v.r_cv);
    }
    if candidates.len() >= 2 {
        let preferred = match mode {
            SelectionMode::Test { preferred, .. } => preferred,
            SelectionMode::Point => 0,
        };
        let challenger = (0..candidates.len())
            .filter(|&k| k != preferred)
            .min_by(|&a, &b| single[a].total_cmp(&single[b]))
            .unwrap_or(preferred);
        let loss = LossSpec::difference(candidates[preferred].clone(), candidates[challenger].clone());
        let v = variance_row(&task, view.plan, &loss, b, exec)?;
        let mut r = row("pairwise", loss.label(), &v);
        if candidates[preferred] == candidates[challenger] {
            r[8] = "identical".into();
        }
        rows.push(r);
    }
    Ok(rows)
}

/// Selects and fits a regime on a trial CSV, tabulating every candidate.
pub fn analyze(cfg: &AnalyzeConfig, progress: &mut (dyn FnMut(&str) + Send)) -> Result<(StudyReport, Regime)> {
    cfg.validate()?;
    let input = cfg.input.as_ref().expect("validated");
    let trial = TrialData::read_csv_path(input)?;
    progress(&format!(
        "analyze: {} records, {} stage(s) from {}",
        trial.len(),
        trial.n_stages(),
        input.display()
    ));
    let bc = BackwardConfig {
        policy: cfg.policy.clone(),
        plan: SplitPlan::new(cfg.q, cfg.j, cfg.seed),
        b: cfg.b,
        layout: cfg.layout.clone(),
    };
    let mut stage_rows: Vec<(usize, Vec<Vec<String>>)> = Vec::new();
    let regime = with_threads(cfg.threads, || {
        run_backward_observed(&trial, &bc, Execution::Parallel, |view| {
            progress(&format!("analyze: stage {}, {} individuals", view.stage, view.data.len()));
            let rows = candidate_table(
                &view,
                bc.policy.candidates_for(view.stage),
                bc.policy.mode,
                bc.b,
                Execution::Parallel,
            )?;
            stage_rows.push((view.stage, rows));
            Ok(())
        })
    })?;
    stage_rows.sort_by_key(|(k, _)| *k);
    let mut summary = Table::new(&ANALYZE_HEADER);
    for (k, mut rows) in stage_rows {
        let chosen = regime.reports[k - 1].chosen_index;
        rows[chosen][9] = "*".into();
        summary.rows.extend(rows);
    }
    let out = RunOutput::create(&cfg.out, "analyze", &run_name(&cfg.name, cfg.seed))?;
    out.write_csv("summary.csv", &summary)?;
    out.write_json("regime.json", &regime)?;
    out.write_json("run-config.json", cfg)?;
    Ok((StudyReport { dir: out.dir, summary }, regime))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::from_json(r#"{"var_study": {"reps": 3, "bogus": 1}}"#).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
        assert!(ExperimentConfig::from_json(r#"{"other": {}}"#).is_err());
    }

    #[test]
    fn sections_fill_defaults() {
        let c = ExperimentConfig::from_json(r#"{"dtr_study": {"reps": 3, "cases": ["iii"]}}"#).unwrap();
        let d = c.dtr_study.unwrap();
        assert_eq!(d.reps, 3);
        assert_eq!(d.j, 100);
        assert_eq!(d.methods, DtrMethod::ALL.to_vec());
        d.validate().unwrap();
    }

    #[test]
    fn overrides_win_and_misplaced_flags_fail() {
        let mut c = VarStudyConfig::default();
        c.apply(&Overrides {
            reps: Some(7),
            seed: Some(9),
            ..Default::default()
        })
        .unwrap();
        assert_eq!((c.reps, c.seed), (7, 9));
        assert!(c
            .apply(&Overrides {
                p0: Some(0.1),
                ..Default::default()
            })
            .is_err());
    }

    #[test]
    fn validation_catches_bad_values() {
        let c = VarStudyConfig {
            settings: vec!["z".into()],
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let d = DtrStudyConfig {
            p0: 0.5,
            ..Default::default()
        };
        assert!(d.validate().is_err());
        let d = DtrStudyConfig {
            eval_draws: 100,
            ..Default::default()
        };
        assert!(d.validate().is_err());
    }

    #[test]
    fn single_replicate_has_no_spread() {
        let cfg = VarStudyConfig {
            reps: 1,
            j: 5,
            b: 3,
            ..Default::default()
        };
        let cell = var_study_cell(&cfg, "d", 200).unwrap();
        assert!(cell.summary().var_star.is_none());
    }

    #[test]
    fn table_render_aligns() {
        let mut t = Table::new(&["a", "bb"]);
        t.rows.push(vec!["1.234567".into(), "x".into()]);
        let s = t.render();
        assert_eq!(s, "     a  bb\n1.2346   x\n");
    }
}
