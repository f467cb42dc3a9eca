//! Acceptance checks, one line per criterion. `ACCEPTANCE_ONLY=1,4` runs a
//! subset.

mod common;

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use common::properties;
use cvdtr::mccv::run_splits;
use cvdtr::sim::{
    evaluate_oracle, gen_regression_appendix_b, gen_single_stage, regression_comparisons, single_stage_loss,
    single_stage_matching, DtrMethod, ScenarioParams, TwoStageCase,
};
use cvdtr::stats::{mean, sample_var};
use cvdtr::study::{
    appendix_b_replicates, dtr_study_case, summarize_dtr, var_replicate_seed, var_study, var_study_cell,
    AppendixBConfig, DtrStudyConfig, DtrSummary, VarStudyConfig, VarianceCell,
};
use cvdtr::variance::rho_decomposition_oracle;
use cvdtr::{derive_seed, run_mccv_with, ContrastTask, Execution, RegressionTask, SplitPlan, TreeParams};

const SEED: u64 = 20_240_601;

struct Check {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: String) -> Check {
    Check { pass, detail }
}

fn fail(detail: impl Into<String>) -> Check {
    Check {
        pass: false,
        detail: detail.into(),
    }
}

/// Split risks of the linear-versus-tree regression comparison on
/// independent datasets.
fn regression_split_risks(batch: u64, datasets: usize, j: usize) -> cvdtr::Result<Vec<Vec<f64>>> {
    let loss = regression_comparisons()[1].clone();
    Execution::Parallel.try_map(datasets, |r| {
        let seed = derive_seed(SEED, &[batch, r as u64]);
        let task = RegressionTask::new(gen_regression_appendix_b(200, seed)?);
        let plan = SplitPlan::new(0.2, j, derive_seed(seed, &[1]));
        Ok(run_splits(&task, &plan, &loss, Execution::Sequential)?
            .iter()
            .map(|o| o.risk())
            .collect())
    })
}

/// Pooled variance of one split risk and the correlation between two
/// splits of the same dataset.
fn single_split_moments(risks: &[Vec<f64>]) -> (f64, f64) {
    let all: Vec<f64> = risks.iter().flatten().copied().collect();
    let mu = mean(&all);
    let var = all.iter().map(|r| (r - mu) * (r - mu)).sum::<f64>() / all.len() as f64;
    let (mut cross, mut pairs) = (0.0, 0.0);
    for d in risks {
        let s: f64 = d.iter().map(|r| r - mu).sum();
        let sq: f64 = d.iter().map(|r| (r - mu) * (r - mu)).sum();
        cross += s * s - sq;
        pairs += (d.len() * (d.len() - 1)) as f64;
    }
    (var, cross / pairs / var)
}

struct IdentityBatches {
    var_r1: f64,
    rho: f64,
    mean_s_r_sq: f64,
    var_r_cv: f64,
    j: usize,
}

const IDENTITY_DATASETS: usize = 20_000;

fn identity_batches() -> cvdtr::Result<IdentityBatches> {
    let j = 50;
    let a = regression_split_risks(1, IDENTITY_DATASETS, j)?;
    let (var_r1, rho) = single_split_moments(&a);
    let b = regression_split_risks(2, IDENTITY_DATASETS, j)?;
    let s_r_sq: Vec<f64> = b.iter().map(|d| sample_var(d)).collect();
    let r_cv: Vec<f64> = b.iter().map(|d| mean(d)).collect();
    Ok(IdentityBatches {
        var_r1,
        rho,
        mean_s_r_sq: mean(&s_r_sq),
        var_r_cv: sample_var(&r_cv),
        j,
    })
}

fn criterion_1(ib: &IdentityBatches) -> Check {
    let ratio = ib.mean_s_r_sq / (ib.var_r1 * (1.0 - ib.rho));
    check(
        (0.95..=1.05).contains(&ratio),
        format!(
            "mean S_R^2 / (Var[R_1](1 - rho)) = {ratio:.4} (rho_mc {:.4}, {} + {} datasets)",
            ib.rho, IDENTITY_DATASETS, IDENTITY_DATASETS
        ),
    )
}

fn criterion_2(ib: &IdentityBatches) -> Check {
    let j = ib.j as f64;
    let ratio = ib.var_r_cv / (ib.var_r1 * (ib.rho + (1.0 - ib.rho) / j));
    check(
        (0.95..=1.05).contains(&ratio),
        format!("Var[R_cv] / (Var[R_1](rho + (1 - rho)/J)) = {ratio:.4}"),
    )
}

fn criterion_3() -> cvdtr::Result<Check> {
    let reps = 2000;
    let o = rho_decomposition_oracle(
        |r| Ok(RegressionTask::new(gen_regression_appendix_b(200, derive_seed(SEED, &[3, r as u64]))?)),
        &SplitPlan::new(0.2, 50, derive_seed(SEED, &[3])),
        &regression_comparisons()[1],
        reps,
        Execution::Parallel,
    )?;
    let gap = (o.rho_mc - o.rho_formula).abs();
    Ok(check(
        gap < 0.02,
        format!(
            "|rho_mc - rho_formula| = {gap:.4} (rho_mc {:.4}, formula {:.4}; rho1 {:.4}, rho2 {:.4}, rho3 {:.5}; {reps} datasets)",
            o.rho_mc, o.rho_formula, o.rho1, o.rho2, o.rho3
        ),
    ))
}

fn var_cell(setting: &str, n: usize, b: usize) -> cvdtr::Result<VarianceCell> {
    let cfg = VarStudyConfig {
        seed: SEED,
        reps: 200,
        j: 100,
        q: 0.2,
        b,
        settings: vec![setting.into()],
        sizes: vec![n],
        double_q: false,
        ..Default::default()
    };
    var_study_cell(&cfg, setting, n)
}

fn criterion_4() -> cvdtr::Result<Check> {
    let s = var_cell("d", 200, 50)?.summary();
    let star = s.var_star.unwrap_or(f64::NAN);
    let (r0, rq, radj) = (s.var_rho0 / star, s.var_rhoq / star, s.var_rho_adj / star);
    Ok(check(
        r0 < 0.5 && rq > 2.0 && (0.5..=2.0).contains(&radj),
        format!(
            "var* {star:.4}; var_rho0/var* {r0:.3} (< 0.5), var_rhoq/var* {rq:.3} (> 2), var_adj/var* {radj:.3} (in [0.5, 2])"
        ),
    ))
}

/// `R̂_cv` over 200 replicates at n = 1000, full MCCV only.
fn r_cv_only(setting: &str) -> cvdtr::Result<Vec<f64>> {
    let p = ScenarioParams::setting(setting).expect("known setting");
    let n = 1000;
    Execution::Parallel.try_map(200, |rep| {
        let seed = var_replicate_seed(SEED, setting, n, rep);
        let sim = gen_single_stage(n, &p, seed)?;
        let task = ContrastTask::matching_on(sim.data, &single_stage_matching())?;
        let plan = SplitPlan::new(0.2, 100, derive_seed(seed, &[1]));
        Ok(run_mccv_with(&task, &plan, &single_stage_loss(TreeParams::honest_pruned()), Execution::Sequential)?.r_cv)
    })
}

fn mean_se(x: &[f64]) -> (f64, f64) {
    (mean(x), (sample_var(x) / x.len() as f64).sqrt())
}

fn criterion_5(f_cell: &VarianceCell) -> cvdtr::Result<Check> {
    let (d, d_se) = mean_se(&r_cv_only("d")?);
    let (e, e_se) = mean_se(&r_cv_only("e")?);
    let (f, f_se) = mean_se(&f_cell.r_cv());
    let pass = d < -2.0 * d_se && f > 2.0 * f_se;
    Ok(check(
        pass,
        format!(
            "d: {d:.4} (se {d_se:.4}); e: {e:.4} (se {e_se:.4}, {:.1} se from 0); f: {f:.4} (se {f_se:.4})",
            (e / e_se).abs()
        ),
    ))
}

fn criterion_6(f_cell: &VarianceCell) -> Check {
    let s = f_cell.summary();
    let violations = f_cell
        .replicates
        .iter()
        .filter(|r| r.rho.rho_adj < r.rho.rho_half)
        .count();
    let negative = f_cell.replicates.iter().filter(|r| r.rho.rho_half < 0.0).count();
    check(
        (0.04..=0.20).contains(&s.rho_half) && violations == 0,
        format!(
            "mean rho_half {:.4} (in [0.04, 0.20]), mean rho_adj {:.4}; replicates with rho_adj < rho_half: {violations} (negative rho_half: {negative})",
            s.rho_half, s.rho_adj
        ),
    )
}

type DtrTable = BTreeMap<String, Vec<DtrSummary>>;

fn dtr_config() -> DtrStudyConfig {
    DtrStudyConfig {
        seed: SEED,
        reps: 50,
        n: 1000,
        j: 100,
        b: 10,
        p0: 0.05,
        eval_draws: 100_000,
        ..Default::default()
    }
}

fn dtr_runs() -> cvdtr::Result<(DtrTable, Vec<cvdtr::study::DtrReplicate>)> {
    let cfg = dtr_config();
    let mut table = DtrTable::new();
    let mut all = Vec::new();
    for case in ["i", "iii", "iv"] {
        let reps = dtr_study_case(&cfg, case)?;
        table.insert(case.to_string(), summarize_dtr(&reps));
        all.extend(reps);
    }
    Ok((table, all))
}

fn row<'a>(t: &'a DtrTable, case: &str, m: DtrMethod) -> &'a DtrSummary {
    t[case].iter().find(|s| s.method == m).expect("method present")
}

fn criterion_7(t: &DtrTable) -> Check {
    let pct = |case: &str, m: DtrMethod, k: usize| row(t, case, m).tree_pct[k].unwrap_or(f64::NAN);
    let iii_mccv = pct("iii", DtrMethod::Mccv, 1);
    let iii_p = pct("iii", DtrMethod::MccvP, 1);
    let i_p1 = pct("i", DtrMethod::MccvP, 0);
    let (i_p2, i_m2) = (pct("i", DtrMethod::MccvP, 1), pct("i", DtrMethod::Mccv, 1));
    check(
        iii_mccv >= 95.0 && iii_p >= 95.0 && i_p1 == 0.0 && i_p2 < i_m2,
        format!(
            "iii stage 2 tree%: MCCV {iii_mccv:.1}, MCCV_p {iii_p:.1} (>= 95); i stage 1 tree% MCCV_p {i_p1:.1} (= 0); i stage 2 tree% MCCV_p {i_p2:.1} < MCCV {i_m2:.1}"
        ),
    )
}

fn criterion_8(t: &DtrTable) -> Check {
    let both = |case: &str, m: DtrMethod| row(t, case, m).accuracy_mean[2];
    let (m, l, tr) = (
        both("iii", DtrMethod::Mccv),
        both("iii", DtrMethod::Linear),
        both("iii", DtrMethod::Tree),
    );
    let iv: Vec<(DtrMethod, f64)> = DtrMethod::ALL.iter().map(|&k| (k, both("iv", k))).collect();
    let iv_tree = both("iv", DtrMethod::Tree);
    let tree_worst = iv.iter().all(|&(k, v)| k == DtrMethod::Tree || v > iv_tree);
    check(
        m > l && m > tr && tree_worst,
        format!(
            "iii both: MCCV {m:.4} > Linear {l:.4}, Tree {tr:.4}; iv both: {}",
            iv.iter()
                .map(|(k, v)| format!("{} {v:.4}", k.label()))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    )
}

fn criterion_9(fitted: &[cvdtr::study::DtrReplicate]) -> cvdtr::Result<Check> {
    let draws = 100_000;
    let tol = 3.0 * 2.0 / (draws as f64).sqrt();
    let mut worst_oracle: f64 = 0.0;
    for case in ["i", "ii", "iii", "iv"] {
        let c = TwoStageCase::named(case).expect("known case");
        let e = evaluate_oracle(&c, draws, derive_seed(SEED, &[9]))?;
        worst_oracle = worst_oracle.max((e.value - 100.0).abs());
    }
    let above = fitted
        .iter()
        .filter(|r| r.eval.value > 100.0 + 3.0 * r.eval.value_se)
        .count();
    Ok(check(
        worst_oracle < tol && above == 0,
        format!(
            "oracle |value - 100| max {worst_oracle:.4} (< {tol:.4}); fitted regimes above 100 + 3 se: {above} of {}",
            fitted.len()
        ),
    ))
}

fn criterion_10() -> cvdtr::Result<Check> {
    let cfg = AppendixBConfig {
        seed: SEED,
        ..Default::default()
    };
    let runs = appendix_b_replicates(&cfg)?;
    let col = |k: usize| runs.iter().map(|v| v[k].r_cv).collect::<Vec<_>>();
    let (lin, tree, cmp) = (mean(&col(1)), mean(&col(3)), col(5));
    let var_star = sample_var(&cmp);
    let var_rho = mean(
        &runs
            .iter()
            .map(|v| cvdtr::variance_from_rho(v[5].s_r_sq, cfg.rho, v[5].j))
            .collect::<Vec<_>>(),
    );
    let ratio = var_rho / var_star;
    Ok(check(
        lin < tree && mean(&cmp) < 0.0 && ratio > 2.0,
        format!(
            "1+x1 {lin:.3} < tree {tree:.3}; comparison {:.3} (< 0); var_rho/var* {ratio:.3} ({var_rho:.4}/{var_star:.4}, > 2)",
            mean(&cmp)
        ),
    ))
}

fn criterion_11() -> cvdtr::Result<Check> {
    let dir = tempfile::tempdir()?;
    let mut outputs = Vec::new();
    for (run, threads) in [(0, 1), (1, 1), (2, 8), (3, 8)] {
        let cfg = VarStudyConfig {
            name: Some(format!("run{run}")),
            out: dir.path().to_path_buf(),
            seed: SEED,
            threads,
            reps: 6,
            j: 10,
            b: 4,
            settings: vec!["d".into(), "f".into()],
            sizes: vec![200],
            ..Default::default()
        };
        let report = var_study(&cfg, &mut |_| {})?;
        outputs.push(std::fs::read(report.dir.join("summary.csv"))?);
    }
    let same = outputs.windows(2).all(|w| w[0] == w[1]);
    Ok(check(
        same,
        format!("summary.csv identical across 2 runs at 1 thread and 2 at 8 threads ({} bytes)", outputs[0].len()),
    ))
}

fn criterion_12() -> Check {
    let failures: Vec<String> = properties::ALL
        .iter()
        .filter_map(|(name, f)| f(properties::CASES).err().map(|e| format!("{name}: {e}")))
        .collect();
    check(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{} property suites, {} cases each", properties::ALL.len(), properties::CASES)
        } else {
            failures.join("; ")
        },
    )
}

fn main() -> ExitCode {
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let want = |k: u32| only.as_ref().is_none_or(|o| o.contains(&k));
    let mut results: Vec<(u32, Check)> = Vec::new();
    let mut record = |k: u32, started: Instant, c: cvdtr::Result<Check>| {
        let c = c.unwrap_or_else(|e| fail(format!("error: {e}")));
        println!(
            "{} {k:>2}  {}  [{:.0}s]",
            if c.pass { "PASS" } else { "FAIL" },
            c.detail,
            started.elapsed().as_secs_f64()
        );
        results.push((k, c));
    };

    if want(1) || want(2) {
        let t = Instant::now();
        match identity_batches() {
            Ok(ib) => {
                if want(1) {
                    record(1, t, Ok(criterion_1(&ib)));
                }
                if want(2) {
                    record(2, t, Ok(criterion_2(&ib)));
                }
            }
            Err(e) => {
                for k in [1, 2].into_iter().filter(|&k| want(k)) {
                    record(k, t, Err(e.clone_message()));
                }
            }
        }
    }
    if want(3) {
        let t = Instant::now();
        record(3, t, criterion_3());
    }
    if want(4) {
        let t = Instant::now();
        record(4, t, criterion_4());
    }
    if want(5) || want(6) {
        let t = Instant::now();
        match var_cell("f", 1000, 25) {
            Ok(f_cell) => {
                if want(6) {
                    record(6, t, Ok(criterion_6(&f_cell)));
                }
                if want(5) {
                    let t = Instant::now();
                    record(5, t, criterion_5(&f_cell));
                }
            }
            Err(e) => {
                for k in [5, 6].into_iter().filter(|&k| want(k)) {
                    record(k, t, Err(e.clone_message()));
                }
            }
        }
    }
    if want(7) || want(8) || want(9) {
        let t = Instant::now();
        match dtr_runs() {
            Ok((table, fitted)) => {
                if want(7) {
                    record(7, t, Ok(criterion_7(&table)));
                }
                if want(8) {
                    record(8, t, Ok(criterion_8(&table)));
                }
                if want(9) {
                    record(9, t, criterion_9(&fitted));
                }
            }
            Err(e) => {
                for k in [7, 8, 9].into_iter().filter(|&k| want(k)) {
                    record(k, t, Err(e.clone_message()));
                }
            }
        }
    }
    if want(10) {
        let t = Instant::now();
        record(10, t, criterion_10());
    }
    if want(11) {
        let t = Instant::now();
        record(11, t, criterion_11());
    }
    if want(12) {
        let t = Instant::now();
        record(12, t, Ok(criterion_12()));
    }

    results.sort_by_key(|(k, _)| *k);
    let failed: Vec<u32> = results.iter().filter(|(_, c)| !c.pass).map(|(k, _)| *k).collect();
    println!(
        "acceptance: {} passed, {} failed{}",
        results.len() - failed.len(),
        failed.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!(" ({failed:?})")
        }
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

trait CloneMessage {
    fn clone_message(&self) -> cvdtr::Error;
}

impl CloneMessage for cvdtr::Error {
    fn clone_message(&self) -> cvdtr::Error {
        cvdtr::Error::InvalidParameter(self.to_string())
    }
}
