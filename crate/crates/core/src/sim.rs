//! Simulation generators for the single-stage, two-stage and regression
//! studies, plus regime evaluation against the known truth.

use rand::{Rng, RngExt};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{RegressionDataset, StageDataset, TrialData, TrialRecord};
use crate::dtr::{Regime, SelectionMode, SelectionPolicy, StageLayout};
use crate::error::{Error, Result};
use crate::estimators::{expit, FittedContrast, ModelSpec, TreeParams};
use crate::exec::rng_from;
use crate::mccv::LossSpec;
use crate::stats::{normal_cdf, normal_quantile};

/// Contrast `τ(l) = c·(1 − ζ₁(l₁)·ζ₂(l₂) − z)` with logistic steps of
/// steepness `s` at `l₁ = 20` and `l₂ = 12`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioParams {
    pub c: f64,
    pub s: f64,
    pub z: f64,
}

impl ScenarioParams {
    pub const D: Self = Self { c: 30.0, s: 0.1, z: 0.75 };
    pub const E: Self = Self { c: 10.0, s: 0.5, z: 0.5 };
    pub const F: Self = Self { c: 10.0, s: 1.0, z: 0.5 };
    /// Steep variant used in the two-stage cases.
    pub const STEEP: Self = Self { c: 30.0, s: 1.0, z: 0.5 };

    pub fn setting(name: &str) -> Option<Self> {
        match name {
            "d" => Some(Self::D),
            "e" => Some(Self::E),
            "f" => Some(Self::F),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.s > 0.0 && self.c.is_finite() && self.z.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("scenario {self:?} needs s > 0")))
        }
    }
}

/// Per-stage contrasts of the two-stage design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoStageCase {
    pub stage1: ScenarioParams,
    pub stage2: ScenarioParams,
}

impl TwoStageCase {
    pub fn named(case: &str) -> Option<Self> {
        use ScenarioParams as P;
        let (stage1, stage2) = match case {
            "i" => (P::D, P::E),
            "ii" => (P::E, P::D),
            "iii" => (P::D, P::STEEP),
            "iv" => (P::STEEP, P::D),
            _ => return None,
        };
        Some(Self { stage1, stage2 })
    }
}

pub fn true_tau(l1: f64, l2: f64, p: &ScenarioParams) -> f64 {
    let zeta1 = 1.0 / (1.0 + (p.s * (l1 - 20.0)).exp());
    let zeta2 = 1.0 / (1.0 + (p.s * (l2 - 12.0)).exp());
    p.c * (1.0 - zeta1 * zeta2 - p.z)
}

/// Inverse-CDF draw from `N(mu, sigma²)` restricted to `(lo, hi)`.
pub fn sample_truncated_normal<R: Rng + ?Sized>(mu: f64, sigma: f64, lo: f64, hi: f64, rng: &mut R) -> Result<f64> {
    if sigma.is_nan() || sigma <= 0.0 || lo.is_nan() || hi.is_nan() || lo >= hi {
        return Err(Error::InvalidParameter(format!(
            "truncated normal needs sigma > 0 and lo < hi (sigma {sigma}, [{lo}, {hi}])"
        )));
    }
    let (a, b) = ((lo - mu) / sigma, (hi - mu) / sigma);
    // work in the lower tail, where the CDF keeps its relative precision
    let flip = a > 0.0;
    let (a, b) = if flip { (-b, -a) } else { (a, b) };
    let (pa, pb) = (normal_cdf(a), normal_cdf(b));
    if pb - pa < 1e-12 {
        return Err(Error::DegenerateInterval { lo, hi });
    }
    loop {
        let u = pa + (pb - pa) * rng.random::<f64>();
        let z = normal_quantile(u);
        let x = mu + sigma * if flip { -z } else { z };
        if x > lo && x < hi {
            return Ok(x);
        }
    }
}

fn normal<R: Rng + ?Sized>(rng: &mut R, mu: f64, sigma: f64) -> f64 {
    mu + sigma * rng.sample::<f64, _>(StandardNormal)
}

/// Values the estimators never see.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    contrasts: Vec<Vec<f64>>,
}

impl Truth {
    /// True contrast of every individual at `stage` (1-based).
    pub fn contrast(&self, stage: usize) -> &[f64] {
        &self.contrasts[stage - 1]
    }
}

pub struct SingleStageSim {
    /// Features `l1`, `l2`, `w`.
    pub data: StageDataset,
    pub truth: Truth,
}

pub const SINGLE_STAGE_FEATURES: [&str; 3] = ["l1", "l2", "w"];

fn single_stage_covariates<R: Rng + ?Sized>(rng: &mut R) -> Result<(f64, f64, f64)> {
    let w = sample_truncated_normal(45.0, 10.0, 10.0, f64::INFINITY, rng)?;
    let l1 = sample_truncated_normal(20.0, 5.0, 0.0, f64::INFINITY, rng)?;
    let l2 = sample_truncated_normal(10.0, 3.0, 0.0, f64::INFINITY, rng)?;
    Ok((w, l1, l2))
}

pub fn gen_single_stage(n: usize, p: &ScenarioParams, seed: u64) -> Result<SingleStageSim> {
    p.validate()?;
    let mut rng = rng_from(seed, &[]);
    let mut features = Vec::with_capacity(3 * n);
    let mut action = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut tau = Vec::with_capacity(n);
    for _ in 0..n {
        let (w, l1, l2) = single_stage_covariates(&mut rng)?;
        let a = f64::from(u8::from(rng.random::<f64>() < expit(-2.0 + 0.05 * w)));
        let t = true_tau(l1, l2, p);
        let opt = f64::from(u8::from(t > 0.0));
        features.extend([l1, l2, w]);
        action.push(a);
        y.push(normal(&mut rng, 100.0, 2.0) - (opt - a) * t);
        tau.push(t);
    }
    let names = SINGLE_STAGE_FEATURES.iter().map(|s| s.to_string()).collect();
    Ok(SingleStageSim {
        data: StageDataset::new(names, features, &action, y)?,
        truth: Truth { contrasts: vec![tau] },
    })
}

pub struct TwoStageSim {
    /// Stage 1 covariates `w`, `l1`, `l2`; stage 2 covariates `l1`, `l2`.
    pub trial: TrialData,
    pub truth: Truth,
}

struct TwoStageDraw {
    w: f64,
    l1: [f64; 2],
    l2: [f64; 2],
}

fn two_stage_covariates<R: Rng + ?Sized>(rng: &mut R) -> Result<TwoStageDraw> {
    let w = sample_truncated_normal(45.0, 10.0, 10.0, 80.0, rng)?;
    let l11 = sample_truncated_normal(20.0, 5.0, 0.0, 40.0, rng)?;
    let l12 = sample_truncated_normal(10.0, 3.0, 0.0, 30.0, rng)?;
    Ok(TwoStageDraw {
        w,
        l1: [l11, l12],
        l2: [0.0, 0.0],
    })
}

fn stage_two_covariates<R: Rng + ?Sized>(d: &mut TwoStageDraw, rng: &mut R) {
    d.l2 = [normal(rng, d.l1[0], 3.0), normal(rng, d.l1[1], 2.0)];
}

pub fn gen_two_stage(n: usize, case: &TwoStageCase, seed: u64) -> Result<TwoStageSim> {
    case.stage1.validate()?;
    case.stage2.validate()?;
    let mut rng = rng_from(seed, &[]);
    let mut records = Vec::with_capacity(n);
    let (mut c1s, mut c2s) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for i in 0..n {
        let mut d = two_stage_covariates(&mut rng)?;
        let a1 = u8::from(rng.random::<f64>() < expit(-2.0 + 0.05 * d.w));
        stage_two_covariates(&mut d, &mut rng);
        let a2 = u8::from(rng.random::<f64>() < expit(-1.0 + 0.04 * (d.l2[0] + d.l2[1])));
        let c1 = true_tau(d.l1[0], d.l1[1], &case.stage1);
        let c2 = true_tau(d.l2[0], d.l2[1], &case.stage2);
        let regret = |c: f64, a: u8| (f64::from(u8::from(c > 0.0)) - a as f64) * c;
        let y = normal(&mut rng, 100.0, 2.0) - regret(c1, a1) - regret(c2, a2);
        records.push(TrialRecord {
            id: (i + 1).to_string(),
            stages: vec![vec![d.w, d.l1[0], d.l1[1]], d.l2.to_vec()],
            actions: vec![a1, a2],
            final_outcome: y,
            stage_mask: vec![true, true],
        });
        c1s.push(c1);
        c2s.push(c2);
    }
    let names = vec![
        vec!["w".to_string(), "l1".into(), "l2".into()],
        vec!["l1".to_string(), "l2".into()],
    ];
    Ok(TwoStageSim {
        trial: TrialData::new(names, records)?,
        truth: Truth {
            contrasts: vec![c1s, c2s],
        },
    })
}

/// `Y = 2 + 2·x1 + ε` with `x1 ~ Bernoulli(0.5)`, `ε ~ N(0, 5²)` and an
/// unrelated `x2 ~ N(5, 2²)`.
pub fn gen_regression_appendix_b(n: usize, seed: u64) -> Result<RegressionDataset> {
    if n < 20 {
        return Err(Error::TooFewRows { min: 20, got: n });
    }
    let mut rng = rng_from(seed, &[]);
    let mut x = Vec::with_capacity(2 * n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let x1 = f64::from(u8::from(rng.random_bool(0.5)));
        let x2 = normal(&mut rng, 5.0, 2.0);
        let e = normal(&mut rng, 0.0, 5.0);
        x.extend([x1, x2]);
        y.push(2.0 + 2.0 * x1 + e);
    }
    RegressionDataset::new(vec!["x1".into(), "x2".into()], x, y)
}

/// Mean of `(τ̂(L) − τ(L))²` over fresh single-stage covariate draws.
pub fn tau_risk(fit: &FittedContrast, p: &ScenarioParams, draws: usize, seed: u64) -> Result<f64> {
    let mut rng = rng_from(seed, &[]);
    let mut total = 0.0;
    for _ in 0..draws {
        let (w, l1, l2) = single_stage_covariates(&mut rng)?;
        let d = fit.predict(&[l1, l2, w]) - true_tau(l1, l2, p);
        total += d * d;
    }
    Ok(total / draws as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeEvaluation {
    pub value: f64,
    pub value_se: f64,
    pub accuracy_stage1: f64,
    pub accuracy_stage2: f64,
    pub accuracy_both: f64,
}

/// History columns of the two-stage design, in [`TrialData::history_columns`]
/// order for stage 2.
pub const TWO_STAGE_HISTORY: [&str; 6] = ["s1_w", "s1_l1", "s1_l2", "a1", "s2_l1", "s2_l2"];

/// Rolls out `decide(stage, history)` on fresh draws. `history` follows
/// [`TWO_STAGE_HISTORY`]; at stage 1 only the first three entries are set.
pub fn evaluate_policy(
    case: &TwoStageCase,
    draws: usize,
    seed: u64,
    decide: impl Fn(usize, &[f64; 6]) -> u8,
) -> Result<RegimeEvaluation> {
    let mut rng = rng_from(seed, &[]);
    let (mut sum, mut sumsq) = (0.0, 0.0);
    let (mut ok1, mut ok2, mut ok_both) = (0usize, 0usize, 0usize);
    for _ in 0..draws {
        let mut d = two_stage_covariates(&mut rng)?;
        let mut h = [d.w, d.l1[0], d.l1[1], 0.0, 0.0, 0.0];
        let g1 = decide(1, &h);
        // stage-2 covariates do not depend on the stage-1 action
        stage_two_covariates(&mut d, &mut rng);
        h[3] = g1 as f64;
        h[4] = d.l2[0];
        h[5] = d.l2[1];
        let g2 = decide(2, &h);
        let c1 = true_tau(d.l1[0], d.l1[1], &case.stage1);
        let c2 = true_tau(d.l2[0], d.l2[1], &case.stage2);
        let (o1, o2) = (u8::from(c1 > 0.0), u8::from(c2 > 0.0));
        let y = normal(&mut rng, 100.0, 2.0) - (o1 as f64 - g1 as f64) * c1 - (o2 as f64 - g2 as f64) * c2;
        sum += y;
        sumsq += y * y;
        ok1 += usize::from(g1 == o1);
        ok2 += usize::from(g2 == o2);
        ok_both += usize::from(g1 == o1 && g2 == o2);
    }
    let n = draws as f64;
    let value = sum / n;
    let var = ((sumsq - n * value * value) / (n - 1.0)).max(0.0);
    Ok(RegimeEvaluation {
        value,
        value_se: (var / n).sqrt(),
        accuracy_stage1: ok1 as f64 / n,
        accuracy_stage2: ok2 as f64 / n,
        accuracy_both: ok_both as f64 / n,
    })
}

/// Evaluates a fitted two-stage regime whose rules read columns of
/// [`TWO_STAGE_HISTORY`].
pub fn evaluate_regime(regime: &Regime, case: &TwoStageCase, draws: usize, seed: u64) -> Result<RegimeEvaluation> {
    if regime.rules.len() != 2 {
        return Err(Error::InvalidParameter(format!(
            "two-stage evaluation needs 2 rules, got {}",
            regime.rules.len()
        )));
    }
    let index: Vec<Vec<usize>> = regime
        .rules
        .iter()
        .map(|r| {
            r.features
                .iter()
                .map(|f| {
                    TWO_STAGE_HISTORY
                        .iter()
                        .position(|h| h == f)
                        .ok_or_else(|| Error::UnknownCovariate(f.clone()))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    evaluate_policy(case, draws, seed, |k, h| {
        let row: Vec<f64> = index[k - 1].iter().map(|&i| h[i]).collect();
        regime.rules[k - 1].decide(&row)
    })
}

/// The true optimal rules.
pub fn evaluate_oracle(case: &TwoStageCase, draws: usize, seed: u64) -> Result<RegimeEvaluation> {
    evaluate_policy(case, draws, seed, |k, h| match k {
        1 => u8::from(true_tau(h[1], h[2], &case.stage1) > 0.0),
        _ => u8::from(true_tau(h[4], h[5], &case.stage2) > 0.0),
    })
}

fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

/// Linear versus tree on `(l1, l2)`, the single-stage comparison.
pub fn single_stage_loss(tree: TreeParams) -> LossSpec {
    LossSpec::difference(
        ModelSpec::linear(&["l1", "l2"]),
        ModelSpec::tree(&["l1", "l2"], tree),
    )
}

/// Matching covariates of the single-stage design.
pub fn single_stage_matching() -> Vec<String> {
    names(&["l1", "l2"])
}

/// Linear and tree contrast candidates on `L_k` for stage `k`.
pub fn two_stage_candidates(stage: usize, tree: TreeParams) -> Vec<ModelSpec> {
    let l = [format!("s{stage}_l1"), format!("s{stage}_l2")];
    vec![
        ModelSpec::linear(&l).named("linear"),
        ModelSpec::tree(&l, tree).named("tree"),
    ]
}

/// Stage 1 uses `(w, L₁)`, stage 2 uses `L₂`; matching is on `L_k`.
pub fn two_stage_layout() -> Vec<StageLayout> {
    vec![
        StageLayout {
            features: Some(names(&["s1_w", "s1_l1", "s1_l2"])),
            matching: Some(names(&["s1_l1", "s1_l2"])),
        },
        StageLayout {
            features: Some(names(&["s2_l1", "s2_l2"])),
            matching: Some(names(&["s2_l1", "s2_l2"])),
        },
    ]
}

/// Methods compared in the two-stage study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DtrMethod {
    #[serde(rename = "MCCV_p")]
    MccvP,
    #[serde(rename = "MCCV")]
    Mccv,
    Linear,
    Tree,
}

impl DtrMethod {
    pub const ALL: [DtrMethod; 4] = [DtrMethod::MccvP, DtrMethod::Mccv, DtrMethod::Linear, DtrMethod::Tree];

    pub fn label(&self) -> &'static str {
        match self {
            DtrMethod::MccvP => "MCCV_p",
            DtrMethod::Mccv => "MCCV",
            DtrMethod::Linear => "Linear",
            DtrMethod::Tree => "Tree",
        }
    }

    pub fn selects(&self) -> bool {
        matches!(self, DtrMethod::MccvP | DtrMethod::Mccv)
    }

    /// Policy protecting the linear model in the test variant.
    pub fn policy(&self, p0: f64, tree: TreeParams) -> SelectionPolicy {
        let per_stage = |pick: Option<usize>| -> Vec<Vec<ModelSpec>> {
            (1..=2)
                .map(|k| {
                    let c = two_stage_candidates(k, tree);
                    match pick {
                        Some(i) => vec![c[i].clone()],
                        None => c,
                    }
                })
                .collect()
        };
        match self {
            DtrMethod::MccvP => SelectionPolicy {
                mode: SelectionMode::Test { preferred: 0, p0 },
                candidates: per_stage(None),
            },
            DtrMethod::Mccv => SelectionPolicy {
                mode: SelectionMode::Point,
                candidates: per_stage(None),
            },
            DtrMethod::Linear => SelectionPolicy {
                mode: SelectionMode::Point,
                candidates: per_stage(Some(0)),
            },
            DtrMethod::Tree => SelectionPolicy {
                mode: SelectionMode::Point,
                candidates: per_stage(Some(1)),
            },
        }
    }
}

/// Regression candidates for the `appendix-b` study: intercept only, `1+x1`, `1+x1+x2`,
/// and an adaptive unpruned tree.
pub fn regression_models() -> Vec<ModelSpec> {
    vec![
        ModelSpec::constant(),
        ModelSpec::linear(&["x1"]),
        ModelSpec::linear(&["x1", "x2"]),
        ModelSpec::tree(&["x1", "x2"], TreeParams::adaptive()).named("tree"),
    ]
}

/// Comparison rows: `1+x1` against `1+x1+x2`, and `1+x1` against the tree.
pub fn regression_comparisons() -> Vec<LossSpec> {
    let m = regression_models();
    vec![
        LossSpec::difference(m[1].clone(), m[2].clone()),
        LossSpec::difference(m[1].clone(), m[3].clone()),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{mean, sample_var};

    #[test]
    fn tau_reference_values() {
        assert!((true_tau(20.0, 12.0, &ScenarioParams::E) - 2.5).abs() < 1e-12);
        assert!(true_tau(20.0, 12.0, &ScenarioParams::D).abs() < 1e-12);
        let p = ScenarioParams::D;
        assert!((true_tau(-1e4, -1e4, &p) + p.c * p.z).abs() < 1e-9);
    }

    #[test]
    fn truncated_draws_stay_inside() {
        let mut rng = rng_from(1, &[]);
        for &(mu, s, lo, hi) in &[
            (0.0, 1.0, -0.5, 0.5),
            (45.0, 10.0, 10.0, f64::INFINITY),
            (0.0, 1.0, 5.0, 6.0),
            (0.0, 1.0, -6.0, -5.0),
        ] {
            for _ in 0..2000 {
                let x = sample_truncated_normal(mu, s, lo, hi, &mut rng).unwrap();
                assert!(x > lo && x < hi);
            }
        }
        assert!(matches!(
            sample_truncated_normal(0.0, 1.0, 40.0, 41.0, &mut rng),
            Err(Error::DegenerateInterval { .. })
        ));
    }

    #[test]
    fn symmetric_truncation_is_centred() {
        let mut rng = rng_from(2, &[]);
        let x: Vec<f64> = (0..10_000)
            .map(|_| sample_truncated_normal(3.0, 2.0, 1.0, 5.0, &mut rng).unwrap())
            .collect();
        let se = (sample_var(&x) / x.len() as f64).sqrt();
        assert!((mean(&x) - 3.0).abs() < 3.0 * se);
    }

    #[test]
    fn untruncated_matches_normal_distribution() {
        let mut rng = rng_from(3, &[]);
        let n = 10_000;
        let mut x: Vec<f64> = (0..n)
            .map(|_| sample_truncated_normal(1.0, 2.0, f64::NEG_INFINITY, f64::INFINITY, &mut rng).unwrap())
            .collect();
        x.sort_by(f64::total_cmp);
        let d = x
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let f = normal_cdf((v - 1.0) / 2.0);
                (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
            })
            .fold(0.0, f64::max);
        // Kolmogorov-Smirnov critical value at the 1% level
        assert!(d < 1.628 / (n as f64).sqrt(), "{d}");
    }

    #[test]
    fn generators_are_seed_deterministic() {
        let a = gen_single_stage(100, &ScenarioParams::D, 5).unwrap();
        let b = gen_single_stage(100, &ScenarioParams::D, 5).unwrap();
        assert_eq!(a.data, b.data);
        let c = gen_two_stage(50, &TwoStageCase::named("iii").unwrap(), 5).unwrap();
        let d = gen_two_stage(50, &TwoStageCase::named("iii").unwrap(), 5).unwrap();
        assert_eq!(c.trial, d.trial);
    }

    #[test]
    fn treatment_share_matches_propensity_average() {
        let sim = gen_single_stage(20_000, &ScenarioParams::D, 7).unwrap();
        let share = sim.data.treated().len() as f64 / 20_000.0;
        let mut rng = rng_from(8, &[]);
        let oracle = mean(
            &(0..200_000)
                .map(|_| expit(-2.0 + 0.05 * sample_truncated_normal(45.0, 10.0, 10.0, f64::INFINITY, &mut rng).unwrap()))
                .collect::<Vec<_>>(),
        );
        let se = (oracle * (1.0 - oracle) / 20_000.0).sqrt();
        assert!((share - oracle).abs() < 3.0 * se, "{share} {oracle}");
    }

    #[test]
    fn stage_two_covariates_track_stage_one() {
        let sim = gen_two_stage(10_000, &TwoStageCase::named("i").unwrap(), 9).unwrap();
        let a: Vec<f64> = sim.trial.records().iter().map(|r| r.stages[0][1]).collect();
        let b: Vec<f64> = sim.trial.records().iter().map(|r| r.stages[1][0]).collect();
        let (ma, mb) = (mean(&a), mean(&b));
        let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (a.len() - 1) as f64;
        let corr = cov / (sample_var(&a) * sample_var(&b)).sqrt();
        assert!(corr > 0.7, "{corr}");
    }

    #[test]
    fn oracle_and_flipped_regimes() {
        let case = TwoStageCase::named("iii").unwrap();
        let draws = 20_000;
        let oracle = evaluate_oracle(&case, draws, 1).unwrap();
        assert!((oracle.value - 100.0).abs() < 3.0 * 2.0 / (draws as f64).sqrt());
        assert_eq!(oracle.accuracy_both, 1.0);
        let flipped = evaluate_policy(&case, draws, 1, |k, h| match k {
            1 => u8::from(true_tau(h[1], h[2], &case.stage1) <= 0.0),
            _ => u8::from(true_tau(h[4], h[5], &case.stage2) <= 0.0),
        })
        .unwrap();
        assert_eq!(flipped.accuracy_both, 0.0);
        assert!(flipped.value < oracle.value - 5.0);
    }

    #[test]
    fn regression_generator_effect() {
        let ds = gen_regression_appendix_b(20_000, 4).unwrap();
        let (mut s1, mut n1, mut s0, mut n0) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..ds.len() {
            if ds.row(i)[0] == 1.0 {
                s1 += ds.response()[i];
                n1 += 1.0;
            } else {
                s0 += ds.response()[i];
                n0 += 1.0;
            }
        }
        assert!((s1 / n1 - s0 / n0 - 2.0).abs() < 3.0 * 5.0 * (1.0 / n1 + 1.0 / n0).sqrt());
    }
}
