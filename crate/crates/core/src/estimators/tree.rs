//! Causal trees for the treatment contrast and a CART regression tree.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{RegressionDataset, StageDataset};
use crate::error::{Error, Result};
use crate::exec::rng_from;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    pub honest: bool,
    pub prune: bool,
    pub min_leaf_per_arm: usize,
    pub max_depth: usize,
    pub honest_fraction: f64,
    pub cv_folds_for_pruning: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self::honest_pruned()
    }
}

impl TreeParams {
    pub fn adaptive() -> Self {
        Self {
            honest: false,
            prune: false,
            min_leaf_per_arm: 10,
            max_depth: 5,
            honest_fraction: 0.5,
            cv_folds_for_pruning: 5,
        }
    }

    pub fn honest_pruned() -> Self {
        Self {
            honest: true,
            prune: true,
            ..Self::adaptive()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(format!("tree: {m}")));
        if self.min_leaf_per_arm < 1 {
            return bad("min_leaf_per_arm must be at least 1");
        }
        if self.max_depth < 1 {
            return bad("max_depth must be at least 1");
        }
        if !(self.honest_fraction > 0.0 && self.honest_fraction < 1.0) {
            return bad("honest_fraction must lie in (0, 1)");
        }
        if self.cv_folds_for_pruning < 2 {
            return bad("cv_folds_for_pruning must be at least 2");
        }
        Ok(())
    }
}

/// Binary partition with axis-aligned splits. `feature` indexes the fit's
/// covariate list; points with `x <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        effect: f64,
        n_treated: usize,
        n_control: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn leaf_value(&self, x: impl Fn(usize) -> f64) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { effect, .. } => return *effect,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if x(*feature) <= *threshold { left } else { right },
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeContrastFit {
    pub covariates: Vec<String>,
    #[serde(skip)]
    pub columns: Vec<usize>,
    pub params: TreeParams,
    pub root: TreeNode,
}

impl TreeContrastFit {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.root.leaf_value(|f| row[self.columns[f]])
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct ArmStats {
    n: [usize; 2],
    sum: [f64; 2],
    sumsq: [f64; 2],
}

impl ArmStats {
    fn add(&mut self, a: u8, y: f64) {
        let k = a as usize;
        self.n[k] += 1;
        self.sum[k] += y;
        self.sumsq[k] += y * y;
    }

    fn minus(&self, o: &ArmStats) -> ArmStats {
        ArmStats {
            n: [self.n[0] - o.n[0], self.n[1] - o.n[1]],
            sum: [self.sum[0] - o.sum[0], self.sum[1] - o.sum[1]],
            sumsq: [self.sumsq[0] - o.sumsq[0], self.sumsq[1] - o.sumsq[1]],
        }
    }

    fn total(&self) -> usize {
        self.n[0] + self.n[1]
    }

    fn min_arm(&self) -> usize {
        self.n[0].min(self.n[1])
    }

    fn effect(&self) -> f64 {
        if self.min_arm() == 0 {
            return 0.0;
        }
        self.sum[1] / self.n[1] as f64 - self.sum[0] / self.n[0] as f64
    }

    fn var(&self, k: usize) -> f64 {
        let n = self.n[k] as f64;
        if self.n[k] < 2 {
            return 0.0;
        }
        ((self.sumsq[k] - self.sum[k] * self.sum[k] / n) / (n - 1.0)).max(0.0)
    }
}

#[derive(Debug, Clone, Copy)]
enum Criterion {
    /// `n·τ̂²`
    Adaptive,
    /// `(n/N_tr)·τ̂² − (1/N_tr + 1/N_est)·(S₁²/p + S₀²/(1−p))`
    Honest { n_tr: f64, n_est: f64, p: f64 },
}

impl Criterion {
    fn value(&self, s: &ArmStats) -> f64 {
        let tau = s.effect();
        match *self {
            Criterion::Adaptive => s.total() as f64 * tau * tau,
            Criterion::Honest { n_tr, n_est, p } => {
                s.total() as f64 / n_tr * tau * tau
                    - (1.0 / n_tr + 1.0 / n_est) * (s.var(1) / p + s.var(0) / (1.0 - p))
            }
        }
    }
}

#[derive(Debug, Clone)]
struct GNode {
    st: ArmStats,
    est: ArmStats,
    value: f64,
    split: Option<GSplit>,
}

#[derive(Debug, Clone)]
struct GSplit {
    feature: usize,
    threshold: f64,
    left: Box<GNode>,
    right: Box<GNode>,
}

impl GNode {
    fn route(&self, x: impl Fn(usize) -> f64) -> &GNode {
        let mut node = self;
        while let Some(s) = &node.split {
            node = if x(s.feature) <= s.threshold { &s.left } else { &s.right };
        }
        node
    }

    /// Sum of leaf risks (negated criterion) and leaf count.
    fn subtree(&self) -> (f64, usize) {
        match &self.split {
            None => (-self.value, 1),
            Some(s) => {
                let (rl, nl) = s.left.subtree();
                let (rr, nr) = s.right.subtree();
                (rl + rr, nl + nr)
            }
        }
    }

    fn link_strength(&self) -> f64 {
        let (r, l) = self.subtree();
        (-self.value - r) / (l as f64 - 1.0)
    }

    fn weakest_link(&self) -> f64 {
        match &self.split {
            None => f64::INFINITY,
            Some(s) => self
                .link_strength()
                .min(s.left.weakest_link())
                .min(s.right.weakest_link()),
        }
    }

    fn collapse_at(&mut self, thr: f64) {
        if self.split.is_none() {
            return;
        }
        if self.link_strength() <= thr {
            self.split = None;
        } else if let Some(s) = &mut self.split {
            s.left.collapse_at(thr);
            s.right.collapse_at(thr);
        }
    }

    fn prune(&mut self, beta: f64) {
        while self.split.is_some() {
            let m = self.weakest_link();
            if m > beta {
                break;
            }
            self.collapse_at(m + 1e-12 * m.abs());
        }
    }

    fn alpha_sequence(&self) -> Vec<f64> {
        let mut t = self.clone();
        let mut seq = Vec::new();
        while t.split.is_some() {
            let m = t.weakest_link();
            seq.push(m);
            t.collapse_at(m + 1e-12 * m.abs());
        }
        seq
    }

    fn into_public(self, honest: bool) -> TreeNode {
        match self.split {
            None => {
                let s = if honest { self.est } else { self.st };
                TreeNode::Leaf {
                    effect: s.effect(),
                    n_treated: s.n[1],
                    n_control: s.n[0],
                }
            }
            Some(s) => TreeNode::Split {
                feature: s.feature,
                threshold: s.threshold,
                left: Box::new(s.left.into_public(honest)),
                right: Box::new(s.right.into_public(honest)),
            },
        }
    }
}

#[derive(Clone, Copy)]
struct Grower<'a> {
    x: &'a [Vec<f64>],
    a: &'a [u8],
    y: &'a [f64],
    is_structure: &'a [bool],
    crit: Criterion,
    min_leaf: usize,
    max_depth: usize,
    check_est: bool,
}

impl Grower<'_> {
    fn stats(&self, idx: &[usize]) -> (ArmStats, ArmStats) {
        let (mut st, mut est) = (ArmStats::default(), ArmStats::default());
        for &i in idx {
            if self.is_structure[i] {
                st.add(self.a[i], self.y[i]);
            } else {
                est.add(self.a[i], self.y[i]);
            }
        }
        (st, est)
    }

    fn admissible(&self, st: &ArmStats, est: &ArmStats) -> bool {
        st.min_arm() >= self.min_leaf && (!self.check_est || est.min_arm() >= self.min_leaf)
    }

    /// Index lists sorted by each feature, ties by index.
    fn orders(&self, idx: &[usize]) -> Vec<Vec<usize>> {
        self.x
            .iter()
            .map(|col| {
                let mut o = idx.to_vec();
                o.sort_by(|&i, &j| col[i].total_cmp(&col[j]).then(i.cmp(&j)));
                o
            })
            .collect()
    }

    fn grow(&self, idx: &[usize], depth: usize) -> GNode {
        self.grow_sorted(self.orders(idx), depth)
    }

    fn grow_sorted(&self, orders: Vec<Vec<usize>>, depth: usize) -> GNode {
        let (st, est) = self.stats(&orders[0]);
        let value = self.crit.value(&st);
        let mut node = GNode {
            st,
            est,
            value,
            split: None,
        };
        if depth >= self.max_depth {
            return node;
        }
        let mut best: Option<(f64, usize, f64)> = None;
        for (f, (col, sorted)) in self.x.iter().zip(&orders).enumerate() {
            let (mut ls, mut le) = (ArmStats::default(), ArmStats::default());
            for k in 0..sorted.len() - 1 {
                let i = sorted[k];
                if self.is_structure[i] {
                    ls.add(self.a[i], self.y[i]);
                } else {
                    le.add(self.a[i], self.y[i]);
                }
                let (v, next) = (col[i], col[sorted[k + 1]]);
                if v == next {
                    continue;
                }
                let (rs, re) = (st.minus(&ls), est.minus(&le));
                if !self.admissible(&ls, &le) || !self.admissible(&rs, &re) {
                    continue;
                }
                let gain = self.crit.value(&ls) + self.crit.value(&rs) - value;
                if gain > 0.0 && best.is_none_or(|b| gain > b.0) {
                    best = Some((gain, f, 0.5 * (v + next)));
                }
            }
        }
        if let Some((_, f, thr)) = best {
            let col = &self.x[f];
            let (l, r): (Vec<Vec<usize>>, Vec<Vec<usize>>) = orders
                .into_iter()
                .map(|o| o.into_iter().partition(|&i| col[i] <= thr))
                .unzip();
            node.split = Some(GSplit {
                feature: f,
                threshold: thr,
                left: Box::new(self.grow_sorted(l, depth + 1)),
                right: Box::new(self.grow_sorted(r, depth + 1)),
            });
        }
        node
    }
}

/// Shuffles each arm and deals positions out by `assign(position, arm_size)`.
fn stratified_labels(
    a: &[u8],
    subset: &[usize],
    rng: &mut crate::exec::SimRng,
    mut assign: impl FnMut(usize, usize) -> usize,
) -> Vec<usize> {
    let mut labels = vec![usize::MAX; a.len()];
    for arm in [0u8, 1] {
        let mut members: Vec<usize> = subset.iter().copied().filter(|&i| a[i] == arm).collect();
        members.shuffle(rng);
        let m = members.len();
        for (pos, &i) in members.iter().enumerate() {
            labels[i] = assign(pos, m);
        }
    }
    labels
}

fn cv_risk(tree: &GNode, x: &[Vec<f64>], a: &[u8], y: &[f64], held_out: &[usize]) -> f64 {
    let mut by_leaf: Vec<(&GNode, ArmStats)> = Vec::new();
    for &i in held_out {
        let leaf = tree.route(|f| x[f][i]);
        match by_leaf.iter_mut().find(|(p, _)| std::ptr::eq(*p, leaf)) {
            Some((_, s)) => s.add(a[i], y[i]),
            None => {
                let mut s = ArmStats::default();
                s.add(a[i], y[i]);
                by_leaf.push((leaf, s));
            }
        }
    }
    let total = held_out.len() as f64;
    by_leaf
        .iter()
        .map(|(p, s)| {
            let tau_tr = p.st.effect();
            let tau_val = if s.min_arm() > 0 { s.effect() } else { tau_tr };
            s.total() as f64 / total * (tau_tr * tau_tr - 2.0 * tau_tr * tau_val)
        })
        .sum()
}

/// Fits a causal tree to the contrast on `covariates`.
pub fn fit_causal_tree(
    ds: &StageDataset,
    covariates: &[String],
    params: &TreeParams,
    seed: u64,
) -> Result<TreeContrastFit> {
    params.validate()?;
    let columns = ds.columns(covariates)?;
    let need = 2 * params.min_leaf_per_arm;
    let (n1, n0) = (ds.treated().len(), ds.control().len());
    if n1 < need || n0 < need {
        return Err(Error::RootTooSmall {
            treated: n1,
            control: n0,
            need,
        });
    }
    let n = ds.len();
    let x: Vec<Vec<f64>> = columns
        .iter()
        .map(|&c| (0..n).map(|i| ds.feature(i, c)).collect())
        .collect();
    let a = ds.actions();
    let ybar = ds.response().iter().sum::<f64>() / n as f64;
    let y: Vec<f64> = ds.response().iter().map(|v| v - ybar).collect();
    let mut rng = rng_from(seed, &[]);
    let all: Vec<usize> = (0..n).collect();

    let is_structure: Vec<bool> = if params.honest {
        let f = params.honest_fraction;
        stratified_labels(a, &all, &mut rng, |pos, m| {
            usize::from(pos < (f * m as f64).round() as usize)
        })
        .into_iter()
        .map(|l| l == 1)
        .collect()
    } else {
        vec![true; n]
    };
    let structure: Vec<usize> = all.iter().copied().filter(|&i| is_structure[i]).collect();
    let n_est = (n - structure.len()) as f64;
    if params.honest {
        let st1 = structure.iter().filter(|&&i| a[i] == 1).count();
        let (e1, e0) = (n1 - st1, n0 - (structure.len() - st1));
        let least = st1.min(structure.len() - st1).min(e1).min(e0);
        if least < params.min_leaf_per_arm {
            return Err(Error::RootTooSmall {
                treated: n1,
                control: n0,
                need,
            });
        }
    }
    let criterion_for = |rows: &[usize]| {
        if params.honest {
            let t = rows.len() as f64;
            let p = rows.iter().filter(|&&i| a[i] == 1).count() as f64 / t;
            Criterion::Honest {
                n_tr: t,
                n_est,
                p,
            }
        } else {
            Criterion::Adaptive
        }
    };
    let grower = Grower {
        x: &x,
        a,
        y: &y,
        is_structure: &is_structure,
        crit: criterion_for(&structure),
        min_leaf: params.min_leaf_per_arm,
        max_depth: params.max_depth,
        check_est: params.honest,
    };
    let mut tree = grower.grow(&all, 0);

    if params.prune && tree.split.is_some() {
        let alphas = tree.alpha_sequence();
        let mut betas = vec![0.0];
        betas.extend(alphas.windows(2).map(|w| (w[0] * w[1]).sqrt()));
        betas.push(f64::INFINITY);
        betas.sort_by(f64::total_cmp);

        let k = params.cv_folds_for_pruning;
        let fold = stratified_labels(a, &structure, &mut rng, |pos, _| pos % k);
        let mut risk = vec![0.0; betas.len()];
        for f in 0..k {
            let train: Vec<usize> = structure.iter().copied().filter(|&i| fold[i] != f).collect();
            let held: Vec<usize> = structure.iter().copied().filter(|&i| fold[i] == f).collect();
            if held.is_empty() {
                continue;
            }
            let fold_grower = Grower {
                crit: criterion_for(&train),
                check_est: false,
                ..grower
            };
            // betas ascend and weakest-link pruning is nested, so one copy is pruned in place
            let mut t = fold_grower.grow(&train, 0);
            for (r, &b) in risk.iter_mut().zip(&betas) {
                t.prune(b);
                *r += cv_risk(&t, &x, a, &y, &held);
            }
        }
        // ties favour the smaller tree
        let mut pick = 0;
        for m in 1..risk.len() {
            if risk[m] <= risk[pick] {
                pick = m;
            }
        }
        tree.prune(betas[pick]);
    }

    Ok(TreeContrastFit {
        covariates: covariates.to_vec(),
        columns,
        params: *params,
        root: tree.into_public(params.honest),
    })
}

/// Piecewise-constant regression by greedy squared-error reduction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTreeFit {
    pub covariates: Vec<String>,
    #[serde(skip)]
    pub columns: Vec<usize>,
    pub min_leaf: usize,
    pub max_depth: usize,
    pub root: TreeNode,
}

impl RegressionTreeFit {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.root.leaf_value(|f| row[self.columns[f]])
    }
}

pub fn fit_regression_tree(
    ds: &RegressionDataset,
    covariates: &[String],
    min_leaf: usize,
    max_depth: usize,
) -> Result<RegressionTreeFit> {
    if min_leaf < 1 || max_depth < 1 {
        return Err(Error::InvalidParameter(
            "regression tree needs min_leaf >= 1 and max_depth >= 1".into(),
        ));
    }
    let columns = ds.columns(covariates)?;
    let n = ds.len();
    if n < 2 * min_leaf {
        return Err(Error::TooFewRows {
            min: 2 * min_leaf,
            got: n,
        });
    }
    let x: Vec<Vec<f64>> = columns
        .iter()
        .map(|&c| (0..n).map(|i| ds.row(i)[c]).collect())
        .collect();
    let ybar = ds.response().iter().sum::<f64>() / n as f64;
    let y: Vec<f64> = ds.response().iter().map(|v| v - ybar).collect();
    let all: Vec<usize> = (0..n).collect();
    let mut root = grow_regression(&x, &y, &all, 0, min_leaf, max_depth);
    shift_leaves(&mut root, ybar);
    Ok(RegressionTreeFit {
        covariates: covariates.to_vec(),
        columns,
        min_leaf,
        max_depth,
        root,
    })
}

fn shift_leaves(node: &mut TreeNode, by: f64) {
    match node {
        TreeNode::Leaf { effect, .. } => *effect += by,
        TreeNode::Split { left, right, .. } => {
            shift_leaves(left, by);
            shift_leaves(right, by);
        }
    }
}

fn grow_regression(
    x: &[Vec<f64>],
    y: &[f64],
    idx: &[usize],
    depth: usize,
    min_leaf: usize,
    max_depth: usize,
) -> TreeNode {
    let m = idx.len();
    let total: f64 = idx.iter().map(|&i| y[i]).sum();
    let leaf = TreeNode::Leaf {
        effect: total / m as f64,
        n_treated: 0,
        n_control: m,
    };
    if depth >= max_depth || m < 2 * min_leaf {
        return leaf;
    }
    // SSE reduction equals the gain in Σ n·ȳ² over children
    let parent = total * total / m as f64;
    let mut best: Option<(f64, usize, f64)> = None;
    let mut sorted = idx.to_vec();
    for (f, col) in x.iter().enumerate() {
        sorted.sort_by(|&i, &j| col[i].total_cmp(&col[j]).then(i.cmp(&j)));
        let mut left = 0.0;
        for k in 0..m - 1 {
            left += y[sorted[k]];
            let (v, next) = (col[sorted[k]], col[sorted[k + 1]]);
            let nl = k + 1;
            if v == next || nl < min_leaf || m - nl < min_leaf {
                continue;
            }
            let right = total - left;
            let gain = left * left / nl as f64 + right * right / (m - nl) as f64 - parent;
            if gain > 1e-12 * (1.0 + parent.abs()) && best.is_none_or(|b| gain > b.0) {
                best = Some((gain, f, 0.5 * (v + next)));
            }
        }
    }
    match best {
        None => leaf,
        Some((_, f, thr)) => {
            let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[f][i] <= thr);
            TreeNode::Split {
                feature: f,
                threshold: thr,
                left: Box::new(grow_regression(x, y, &l, depth + 1, min_leaf, max_depth)),
                right: Box::new(grow_regression(x, y, &r, depth + 1, min_leaf, max_depth)),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngExt;
    use rand_distr::StandardNormal;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn step_data(n: usize, seed: u64, jump: f64) -> StageDataset {
        let mut rng = rng_from(seed, &[]);
        let mut x = Vec::new();
        let mut a = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let l1: f64 = rng.random::<f64>() * 4.0 - 2.0;
            let l2: f64 = rng.random::<f64>() * 4.0 - 2.0;
            let ai = f64::from(u8::from(rng.random_bool(0.5)));
            let e: f64 = rng.sample(StandardNormal);
            x.extend([l1, l2]);
            a.push(ai);
            y.push(jump * ai * f64::from(u8::from(l1 > 0.0)) + e);
        }
        StageDataset::new(names(&["l1", "l2"]), x, &a, y).unwrap()
    }

    #[test]
    fn adaptive_tree_finds_sharp_boundary() {
        let ds = step_data(2000, 3, 5.0);
        let fit = fit_causal_tree(&ds, &names(&["l1", "l2"]), &TreeParams::adaptive(), 0).unwrap();
        match &fit.root {
            TreeNode::Split {
                feature, threshold, ..
            } => {
                assert_eq!(*feature, 0);
                assert!(threshold.abs() < 0.25, "{threshold}");
            }
            _ => panic!("expected a split"),
        }
    }

    #[test]
    fn honest_leaves_have_enough_estimation_units() {
        let ds = step_data(1000, 4, 5.0);
        let p = TreeParams::honest_pruned();
        let fit = fit_causal_tree(&ds, &names(&["l1", "l2"]), &p, 9).unwrap();
        fn walk(n: &TreeNode, min: usize) {
            match n {
                TreeNode::Leaf {
                    n_treated,
                    n_control,
                    ..
                } => assert!(*n_treated >= min && *n_control >= min),
                TreeNode::Split { left, right, .. } => {
                    walk(left, min);
                    walk(right, min);
                }
            }
        }
        walk(&fit.root, p.min_leaf_per_arm);
        assert!(fit.root.n_leaves() >= 2);
        let lo = fit.predict(&[-1.0, 0.0]);
        let hi = fit.predict(&[1.0, 0.0]);
        assert!(hi - lo > 3.0, "{lo} {hi}");
    }

    #[test]
    fn root_too_small() {
        let ds = step_data(30, 1, 1.0);
        let err = fit_causal_tree(&ds, &names(&["l1"]), &TreeParams::adaptive(), 0).unwrap_err();
        assert!(matches!(err, Error::RootTooSmall { .. }));
    }

    #[test]
    fn outcome_shift_leaves_effects_unchanged() {
        let ds = step_data(600, 8, 2.0);
        let shifted = ds
            .with_response(ds.response().iter().map(|v| v + 1000.0).collect())
            .unwrap();
        for p in [TreeParams::adaptive(), TreeParams::honest_pruned()] {
            let f0 = fit_causal_tree(&ds, &names(&["l1", "l2"]), &p, 2).unwrap();
            let f1 = fit_causal_tree(&shifted, &names(&["l1", "l2"]), &p, 2).unwrap();
            for i in 0..ds.len() {
                assert!((f0.predict(ds.row(i)) - f1.predict(ds.row(i))).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn single_leaf_predicts_constant() {
        let t = TreeNode::Leaf {
            effect: 2.5,
            n_treated: 1,
            n_control: 1,
        };
        assert_eq!(t.leaf_value(|_| 123.0), 2.5);
    }

    #[test]
    fn regression_tree_splits_on_binary_feature() {
        let n = 200;
        let x: Vec<f64> = (0..n).flat_map(|i| [(i % 2) as f64, (i % 7) as f64]).collect();
        let y: Vec<f64> = (0..n).map(|i| 2.0 + 2.0 * (i % 2) as f64).collect();
        let ds = RegressionDataset::new(names(&["x1", "x2"]), x, y).unwrap();
        let fit = fit_regression_tree(&ds, &names(&["x1", "x2"]), 5, 5).unwrap();
        assert_eq!(fit.root.n_leaves(), 2);
        assert!((fit.predict(&[0.0, 3.0]) - 2.0).abs() < 1e-12);
        assert!((fit.predict(&[1.0, 3.0]) - 4.0).abs() < 1e-12);
    }
}
