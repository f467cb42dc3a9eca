//! Variance of `R̂_cv`: half-and-half splitting, the correlation estimates
//! `ρ̂^{n/2}` and `ρ̂^adj`, baseline estimators, and the selection p-value.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{derive_seed, rng_from, Execution};
use crate::mccv::{run_mccv_with, run_splits, CvReport, CvTask, LossSpec, SplitPlan};
use crate::stats::{mean, normal_cdf, sample_var};

/// Largest correlation fed to the variance formula.
pub const RHO_CLAMP: f64 = 1.0 - 1e-6;

const HALF_STREAM: u64 = 0x4841_4c46;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HalfMode {
    /// Each half uses `q`.
    #[default]
    SameQ,
    /// Each half uses `2q`, keeping the validation size of the full data.
    DoubleQ,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfSplitStats {
    /// Mean over `b` of the two-point variance of the halves' `R̂_cv`.
    pub s_cv_bar_sq: f64,
    /// Mean over `b` and halves of `S_R²`.
    pub s0_bar_sq: f64,
    /// Mean over `b` and halves of `S_U²`.
    pub s0u_bar_sq: f64,
    pub b: usize,
}

impl HalfSplitStats {
    /// Averages per-`b` pairs of half-sample reports.
    pub fn from_pairs(pairs: &[(CvReport, CvReport)]) -> Self {
        let two_point: Vec<f64> = pairs.iter().map(|(a, b)| sample_var(&[a.r_cv, b.r_cv])).collect();
        let s0: Vec<f64> = pairs.iter().map(|(a, b)| 0.5 * (a.s_r_sq + b.s_r_sq)).collect();
        let s0u: Vec<f64> = pairs.iter().map(|(a, b)| 0.5 * (a.s_u_sq + b.s_u_sq)).collect();
        HalfSplitStats {
            s_cv_bar_sq: mean(&two_point),
            s0_bar_sq: mean(&s0),
            s0u_bar_sq: mean(&s0u),
            b: pairs.len(),
        }
    }
}

/// Arm-stratified halving; odd strata give the extra individual to the first half.
pub fn halve(strata: &[Vec<usize>], seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut rng = rng_from(seed, &[]);
    let (mut d1, mut d2) = (Vec::new(), Vec::new());
    for s in strata {
        if s.len() < 2 {
            return Err(Error::ArmExhausted {
                count: s.len(),
                arm_size: s.len(),
            });
        }
        let mut pool = s.clone();
        pool.shuffle(&mut rng);
        let first = s.len().div_ceil(2);
        d1.extend_from_slice(&pool[..first]);
        d2.extend_from_slice(&pool[first..]);
    }
    d1.sort_unstable();
    d2.sort_unstable();
    Ok((d1, d2))
}

/// Runs MCCV on both halves of `b` independent arm-stratified halvings.
pub fn half_and_half<T: CvTask>(
    task: &T,
    plan: &SplitPlan,
    loss: &LossSpec,
    b: usize,
    mode: HalfMode,
    exec: Execution,
) -> Result<HalfSplitStats> {
    if b == 0 {
        return Err(Error::InvalidParameter("B must be at least 1".into()));
    }
    let q = match mode {
        HalfMode::SameQ => plan.q,
        HalfMode::DoubleQ => 2.0 * plan.q,
    };
    let tag = match mode {
        HalfMode::SameQ => 1,
        HalfMode::DoubleQ => 2,
    };
    let strata = task.strata();
    let pairs = exec.try_map(b, |k| -> Result<(CvReport, CvReport)> {
        let base = derive_seed(plan.seed, &[HALF_STREAM, tag, k as u64]);
        let (i1, i2) = halve(&strata, base)?;
        let p1 = SplitPlan::new(q, plan.j, derive_seed(base, &[1]));
        let p2 = SplitPlan::new(q, plan.j, derive_seed(base, &[2]));
        // inner loops stay sequential; the outer loop carries the parallelism
        let r1 = run_mccv_with(&task.subset(&i1)?, &p1, loss, Execution::Sequential)?;
        let r2 = run_mccv_with(&task.subset(&i2)?, &p2, loss, Execution::Sequential)?;
        Ok((r1, r2))
    })?;
    Ok(HalfSplitStats::from_pairs(&pairs))
}

/// `ρ̂^{n/2} = 1 − 1/(S̄²_cv/S̄²₀ + 1 − 1/J)`, unclamped.
pub fn rho_half(stats: &HalfSplitStats, j: usize) -> Result<f64> {
    if stats.s0_bar_sq <= 0.0 {
        return Err(Error::DegenerateDispersion("mean half-sample S_R^2 is zero"));
    }
    Ok(1.0 - 1.0 / (stats.s_cv_bar_sq / stats.s0_bar_sq + 1.0 - 1.0 / j as f64))
}

/// `max{1, S̄²₀·S_U² / (2·S_R²·S̄²_{0,U})}`
pub fn inflation_factor(s0_bar_sq: f64, s_u_sq: f64, s_r_sq: f64, s0u_bar_sq: f64) -> Result<f64> {
    if s_r_sq <= 0.0 {
        return Err(Error::DegenerateDispersion("S_R^2 is zero"));
    }
    if s0u_bar_sq <= 0.0 {
        return Err(Error::DegenerateDispersion("mean half-sample S_U^2 is zero"));
    }
    Ok((s0_bar_sq * s_u_sq / (2.0 * s_r_sq * s0u_bar_sq)).max(1.0))
}

/// `S_R²·(1/J + ρ/(1−ρ))` with `ρ` floored at 0 and clamped below 1.
pub fn variance_from_rho(s_r_sq: f64, rho: f64, j: usize) -> f64 {
    let rho = rho.clamp(0.0, RHO_CLAMP);
    s_r_sq * (1.0 / j as f64 + rho / (1.0 - rho))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceCatalog {
    pub proposed_half: f64,
    pub proposed_adj: f64,
    /// `S_R²/J`
    pub rho0: f64,
    /// `ρ = q`
    pub rhoq: f64,
    /// `S̄²_cv` of same-q halving.
    pub half_naive: f64,
    /// `S̄²_cv` of double-q halving, when run.
    pub matched_n2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoReport {
    pub r_cv: f64,
    pub rho_half: f64,
    pub inflation: f64,
    pub rho_adj: f64,
    pub catalog: VarianceCatalog,
}

/// Combines a full-data MCCV run with its half-and-half statistics.
pub fn rho_report(full: &CvReport, same_q: &HalfSplitStats, double_q: Option<&HalfSplitStats>) -> Result<RhoReport> {
    let rho_h = rho_half(same_q, full.j)?;
    let inflation = inflation_factor(same_q.s0_bar_sq, full.s_u_sq, full.s_r_sq, same_q.s0u_bar_sq)?;
    let rho_adj = inflation * rho_h;
    Ok(RhoReport {
        r_cv: full.r_cv,
        rho_half: rho_h,
        inflation,
        rho_adj,
        catalog: VarianceCatalog {
            proposed_half: variance_from_rho(full.s_r_sq, rho_h, full.j),
            proposed_adj: variance_from_rho(full.s_r_sq, rho_adj, full.j),
            rho0: variance_from_rho(full.s_r_sq, 0.0, full.j),
            rhoq: variance_from_rho(full.s_r_sq, full.q, full.j),
            half_naive: same_q.s_cv_bar_sq,
            matched_n2: double_q.map(|d| d.s_cv_bar_sq),
        },
    })
}

/// Full MCCV plus same-q (and optionally double-q) halving.
pub fn estimate_variance<T: CvTask>(
    task: &T,
    plan: &SplitPlan,
    loss: &LossSpec,
    b: usize,
    with_double_q: bool,
    exec: Execution,
) -> Result<(CvReport, RhoReport)> {
    let full = run_mccv_with(task, plan, loss, exec)?;
    let same = half_and_half(task, plan, loss, b, HalfMode::SameQ, exec)?;
    let double = if with_double_q {
        Some(half_and_half(task, plan, loss, b, HalfMode::DoubleQ, exec)?)
    } else {
        None
    };
    let report = rho_report(&full, &same, double.as_ref())?;
    Ok((full, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PValue {
    pub p: f64,
    /// Set when the variance was not positive and the p-value was decided by sign.
    pub zero_variance: bool,
}

/// `1 − Φ(R̂_cv/√var)`; small values favour the challenger.
pub fn selection_pvalue(r_cv: f64, variance: f64) -> PValue {
    if variance > 0.0 && variance.is_finite() {
        return PValue {
            p: normal_cdf(-r_cv / variance.sqrt()),
            zero_variance: false,
        };
    }
    let p = if r_cv == 0.0 {
        0.5
    } else if r_cv > 0.0 {
        0.0
    } else {
        1.0
    };
    PValue {
        p,
        zero_variance: true,
    }
}

/// `(ρ₁/n + (n−1)/n·ρ₃) / (1/n₂ + (n₂−1)/n₂·ρ₂)`
pub fn rho_formula(rho1: f64, rho2: f64, rho3: f64, n: usize, n2: usize) -> f64 {
    let (n, n2) = (n as f64, n2 as f64);
    (rho1 / n + (n - 1.0) / n * rho3) / (1.0 / n2 + (n2 - 1.0) / n2 * rho2)
}

/// Brute-force correlation structure of the split risks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoOracle {
    pub rho_mc: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub rho3: f64,
    pub rho_formula: f64,
    /// Pooled variance of a single split risk.
    pub var_r1: f64,
    pub var_u: f64,
    /// Per dataset.
    pub r_cv: Vec<f64>,
    pub s_r_sq: Vec<f64>,
    pub n: usize,
    pub n2: usize,
    pub j: usize,
}

impl RhoOracle {
    pub fn mean_s_r_sq(&self) -> f64 {
        mean(&self.s_r_sq)
    }

    pub fn var_r_cv(&self) -> f64 {
        sample_var(&self.r_cv)
    }
}

#[derive(Default)]
struct Moments {
    sum: f64,
    count: f64,
}

impl Moments {
    fn add(&mut self, s: f64, c: f64) {
        self.sum += s;
        self.count += c;
    }

    fn merge(&mut self, o: &Moments) {
        self.add(o.sum, o.count);
    }

    fn value(&self) -> f64 {
        self.sum / self.count
    }
}

/// Simulates `reps` datasets with `generate(rep)` and runs `plan.j` splits
/// on each, then estimates `ρ = corr(R̂_j, R̂_j')` directly and through its
/// decomposition into same-individual (`ρ₁`), same-split (`ρ₂`) and
/// cross-split (`ρ₃`) unit-loss correlations.
pub fn rho_decomposition_oracle<T, G>(
    generate: G,
    plan: &SplitPlan,
    loss: &LossSpec,
    reps: usize,
    exec: Execution,
) -> Result<RhoOracle>
where
    T: CvTask,
    G: Fn(usize) -> Result<T> + Sync + Send,
{
    let runs = exec.try_map(reps, |r| -> Result<(usize, Vec<crate::mccv::SplitOutcome>)> {
        let task = generate(r)?;
        let p = SplitPlan::new(plan.q, plan.j, derive_seed(plan.seed, &[r as u64]));
        Ok((task.len(), run_splits(&task, &p, loss, Execution::Sequential)?))
    })?;
    let n = runs.first().map(|r| r.0).unwrap_or(0);
    let n2 = runs.first().map(|r| r.1[0].val.len()).unwrap_or(0);

    let all_u: Vec<f64> = runs.iter().flat_map(|(_, s)| s.iter().flat_map(|o| o.losses.iter().copied())).collect();
    let all_r: Vec<f64> = runs.iter().flat_map(|(_, s)| s.iter().map(|o| o.risk())).collect();
    let (mu_u, mu_r) = (mean(&all_u), mean(&all_r));
    let var_u = all_u.iter().map(|u| (u - mu_u) * (u - mu_u)).sum::<f64>() / all_u.len() as f64;
    let var_r = all_r.iter().map(|r| (r - mu_r) * (r - mu_r)).sum::<f64>() / all_r.len() as f64;

    let per_rep: Vec<[Moments; 4]> = exec.map(runs.len(), |r| {
        let (n_rep, splits) = &runs[r];
        let mut m: [Moments; 4] = Default::default();
        let centred: Vec<(Vec<usize>, Vec<f64>)> = splits
            .iter()
            .map(|o| (o.val.clone(), o.losses.iter().map(|u| u - mu_u).collect()))
            .collect();
        let mut pos = vec![usize::MAX; *n_rep];
        for (a, (va, ua)) in centred.iter().enumerate() {
            let sa: f64 = ua.iter().sum();
            let sqa: f64 = ua.iter().map(|u| u * u).sum();
            let ma = ua.len() as f64;
            m[1].add(sa * sa - sqa, ma * (ma - 1.0));
            for (k, &i) in va.iter().enumerate() {
                pos[i] = k;
            }
            for (vb, ub) in centred.iter().skip(a + 1) {
                let sb: f64 = ub.iter().sum();
                let mb = ub.len() as f64;
                let (mut same, mut shared) = (0.0, 0.0);
                for (k, &i) in vb.iter().enumerate() {
                    if pos[i] != usize::MAX {
                        same += ua[pos[i]] * ub[k];
                        shared += 1.0;
                    }
                }
                m[0].add(same, shared);
                m[2].add(sa * sb - same, ma * mb - shared);
            }
            for &i in va {
                pos[i] = usize::MAX;
            }
            let ra = splits[a].risk() - mu_r;
            for o in splits.iter().skip(a + 1) {
                m[3].add(ra * (o.risk() - mu_r), 1.0);
            }
        }
        m
    });
    let mut tot: [Moments; 4] = Default::default();
    for m in &per_rep {
        for k in 0..4 {
            tot[k].merge(&m[k]);
        }
    }
    if let Some(k) = tot.iter().position(|m| m.count < 100.0) {
        return Err(Error::InsufficientReps(format!(
            "component {k} has only {} pairs",
            tot[k].count
        )));
    }
    let rho1 = tot[0].value() / var_u;
    let rho2 = tot[1].value() / var_u;
    let rho3 = tot[2].value() / var_u;
    Ok(RhoOracle {
        rho_mc: tot[3].value() / var_r,
        rho1,
        rho2,
        rho3,
        rho_formula: rho_formula(rho1, rho2, rho3, n, n2),
        var_r1: var_r,
        var_u,
        r_cv: runs.iter().map(|(_, s)| mean(&s.iter().map(|o| o.risk()).collect::<Vec<_>>())).collect(),
        s_r_sq: runs
            .iter()
            .map(|(_, s)| sample_var(&s.iter().map(|o| o.risk()).collect::<Vec<_>>()))
            .collect(),
        n,
        n2,
        j: plan.j,
    })
}
