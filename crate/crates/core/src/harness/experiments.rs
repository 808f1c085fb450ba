//! The eight experiments: default grids, validation and row layout.

use std::sync::Arc;

use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};

use super::table::{format_float as fl, Table};
use super::{ExperimentConfig, ExperimentKind, HarnessError, SeedRecord};
use crate::adaptive::{
    adaptive_forest_counts, approx_split_counts, approx_strong_probability, estimate_selection_probs, SelectionSource,
    SubsetSampling,
};
use crate::analytics::{
    composition_count, expected_overlap, fit_rate_exponent, fitted_lower_constant, halving_exact, halving_mc,
    interior_points, mc_bias_variance, mc_risk, multibound_upper, normal_approx_check, pointwise_mse,
    tree_pair_overlap_mc, DecompositionPlan, ForestSetup, HalvingMode, PAIR_LIMIT,
};
use crate::bounds::{
    bias_upper_bound, optimal_leaf_count, reference_rates, risk_upper_bound, round_to_power_of_two,
    variance_upper_bound, BoundInputs,
};
use crate::cell::EXACT_SPLIT_LIMIT;
use crate::data::{ModelSpec, RegressionFunction};
use crate::error::Result;
use crate::rng::{derive_seed, stream};
use crate::tree::{depth_for_leaves, SelectionProbs};

const M_NOTE: &str = "The infinite forest is approximated by averaging M trees; the M column records the tree count. \
                      Finite M adds a (1 - overlap)/M share of the single-tree variance to every variance and MSE value.";
const LOG_NOTE: &str = "Bounds use the continuous log2(k_n); trees use ceil(log2 k_n) levels, so realized leaf counts \
                        can exceed k_n by up to a factor of 2 when k_n is not a power of two.";

fn cfg<T>(msg: impl Into<String>) -> std::result::Result<T, HarnessError> {
    Err(HarnessError::Config(msg.into()))
}

fn positive(name: &str, v: usize) -> std::result::Result<usize, HarnessError> {
    if v == 0 {
        cfg(format!("{name} must be at least 1"))
    } else {
        Ok(v)
    }
}

fn at_least_two(name: &str, v: usize) -> std::result::Result<usize, HarnessError> {
    if v < 2 {
        cfg(format!("{name} must be at least 2 for a standard error"))
    } else {
        Ok(v)
    }
}

fn nonempty<T>(name: &str, v: Vec<T>) -> std::result::Result<Vec<T>, HarnessError> {
    if v.is_empty() {
        cfg(format!("{name} must not be empty"))
    } else {
        Ok(v)
    }
}

fn model_or(c: &ExperimentConfig, default: ModelSpec) -> std::result::Result<ModelSpec, HarnessError> {
    let m = c.model.clone().unwrap_or(default);
    m.validate().map_err(|e| HarnessError::Config(format!("model: {e}")))?;
    Ok(m)
}

fn probs_for(c: &ExperimentConfig, model: &ModelSpec) -> std::result::Result<Vec<f64>, HarnessError> {
    let p = match &c.probs {
        Some(p) => SelectionProbs::new(p.clone()),
        None => {
            let strong = model.strong_set();
            if strong.is_empty() {
                SelectionProbs::uniform(model.dim)
            } else {
                SelectionProbs::ideal(model.dim, &strong)
            }
        }
    }
    .map_err(|e| HarnessError::Config(format!("probs: {e}")))?;
    if p.dim() != model.dim {
        return cfg(format!(
            "probs has {} entries but the model has dimension {}",
            p.dim(),
            model.dim
        ));
    }
    Ok(p.as_slice().to_vec())
}

fn sparsity(model: &ModelSpec) -> u32 {
    model.strong_set().len().max(1) as u32
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| fl(*x)).collect::<Vec<_>>().join(";")
}

fn opt(v: Option<f64>) -> String {
    v.map(fl).unwrap_or_default()
}

fn fit_summary(points: &[(f64, f64)]) -> Value {
    match fit_rate_exponent(points) {
        Ok(f) => {
            json!({"exponent": f.exponent, "intercept": f.intercept, "stderr": f.stderr, "r_squared": f.r_squared})
        }
        Err(e) => json!({"unavailable": e.to_string()}),
    }
}

pub(super) struct Outcome {
    pub table: Table,
    pub summary: Option<Value>,
}

#[derive(Debug, Clone, Serialize)]
struct Bounds {
    xi: f64,
    square_sup_bound: bool,
}

impl Bounds {
    fn from(c: &ExperimentConfig) -> std::result::Result<Self, HarnessError> {
        let xi = c.xi.unwrap_or(0.0);
        if !xi.is_finite() || xi <= -1.0 {
            return cfg("xi must be finite and greater than -1");
        }
        Ok(Self {
            xi,
            square_sup_bound: c.square_sup_bound.unwrap_or(false),
        })
    }

    fn inputs(&self, model: &ModelSpec, n: usize, k: u64) -> Option<BoundInputs> {
        let l = model.lipschitz()?;
        let b = BoundInputs {
            square_sup_bound: self.square_sup_bound,
            ..BoundInputs::new(n as f64, k as f64, sparsity(model), model.dim as u32)
                .sigma(model.sigma)
                .lipschitz(l)
                .sup_bound(model.sup_norm())
                .xi(self.xi)
        };
        b.validate().ok().map(|_| b)
    }
}

#[derive(Debug, Clone, Serialize)]
pub(super) struct RiskSweep {
    model: ModelSpec,
    probs: Vec<f64>,
    grid: Vec<(usize, u64)>,
    leaf_rule: String,
    trees: usize,
    replicates: usize,
    queries: usize,
    bounds: Bounds,
}

#[derive(Debug, Clone, Serialize)]
pub(super) struct Decompose {
    model: ModelSpec,
    probs: Vec<f64>,
    n: Vec<usize>,
    leaves: Vec<u64>,
    trees: usize,
    plan: DecompositionPlan,
    bounds: Bounds,
}

#[derive(Debug, Clone, Serialize)]
pub(super) struct Overlap {
    p: Vec<Vec<f64>>,
    depths: Vec<u32>,
    samples: usize,
}

#[derive(Debug, Clone, Serialize)]
pub(super) struct Multinomial {
    m: Vec<u64>,
    p: Vec<Vec<f64>>,
    samples: usize,
}

#[derive(Debug, Clone, Serialize)]
pub(super) struct AdaptiveHist {
    beta: Vec<f64>,
    beta_seed: Option<u64>,
    depth: u32,
    trees: usize,
    m_n: usize,
    sampling: SubsetSampling,
}

#[derive(Debug, Clone, Serialize)]
pub(super) struct LearnProbs {
    model: ModelSpec,
    n: usize,
    m_n: usize,
    trials: usize,
    sampling: SubsetSampling,
    fresh_sample: bool,
    xi: f64,
}

#[derive(Debug, Clone, Serialize)]
pub(super) struct BoundsTable {
    s_max: u32,
    d: u32,
}

#[derive(Debug, Clone, Serialize)]
pub(super) struct Consistency {
    model: ModelSpec,
    probs: Vec<f64>,
    n: Vec<usize>,
    leaf_exponent: f64,
    points: Vec<Vec<f64>>,
    replicates: usize,
    trees: usize,
}

pub(super) enum Plan {
    RiskSweep(RiskSweep),
    Decompose(Decompose),
    Overlap(Overlap),
    Multinomial(Multinomial),
    AdaptiveHist(AdaptiveHist),
    LearnProbs(LearnProbs),
    BoundsTable(BoundsTable),
    Consistency(Consistency),
}

/// Points of `[0.05, 0.95)^d` at least `gap` away from ½ in every coordinate.
pub(super) fn probe_points(dim: usize, count: usize, gap: f64) -> Vec<Vec<f64>> {
    interior_points(dim, 64 * count.max(1), 0.05, 0)
        .expect("fixed margin is valid")
        .into_iter()
        .filter(|x| x.iter().all(|v| (v - 0.5).abs() >= gap))
        .take(count)
        .collect()
}

pub(super) fn resolve(kind: ExperimentKind, c: &ExperimentConfig) -> std::result::Result<Plan, HarnessError> {
    Ok(match kind {
        ExperimentKind::RiskSweep => {
            let model = model_or(c, ModelSpec::linear(vec![1.0], 0.1).unwrap())?;
            let probs = probs_for(c, &model)?;
            let ns = nonempty(
                "n",
                c.n.clone().unwrap_or_else(|| (9..=14).map(|e| 1usize << e).collect()),
            )?;
            let (ks, leaf_rule) = match &c.leaves {
                Some(k) if k.len() == ns.len() => (k.clone(), "configured".to_string()),
                Some(k) if k.len() == 1 => (vec![k[0]; ns.len()], "configured".to_string()),
                Some(k) => return cfg(format!("leaves has {} entries; expected 1 or {}", k.len(), ns.len())),
                None => {
                    let l = match model.lipschitz() {
                        Some(l) if l > 0.0 && model.sigma > 0.0 => l,
                        _ => {
                            return cfg(
                                "no default leaf rule without a positive Lipschitz constant and sigma; set leaves",
                            )
                        }
                    };
                    let s = sparsity(&model);
                    let ks = ns
                        .iter()
                        .map(|&n| optimal_leaf_count(n as f64, s, l, model.sigma).map(round_to_power_of_two))
                        .collect::<Result<Vec<_>>>()
                        .map_err(|e| HarnessError::Config(e.to_string()))?;
                    (ks, "optimal leaf count rounded to a power of two in log2".to_string())
                }
            };
            if let Some(&n) = ns.iter().find(|&&n| n == 0) {
                return cfg(format!("n = {n} is not a sample size"));
            }
            if ks.contains(&0) {
                return cfg("leaves must be positive");
            }
            Plan::RiskSweep(RiskSweep {
                model,
                probs,
                grid: ns.into_iter().zip(ks).collect(),
                leaf_rule,
                trees: positive("trees", c.trees.unwrap_or(100))?,
                replicates: at_least_two("replicates", c.replicates.unwrap_or(50))?,
                queries: positive("queries", c.queries.unwrap_or(50))?,
                bounds: Bounds::from(c)?,
            })
        }
        ExperimentKind::Decompose => {
            let model = model_or(c, ModelSpec::linear(vec![1.0, 1.0], 1.0).unwrap())?;
            let probs = probs_for(c, &model)?;
            let plan = DecompositionPlan {
                blocks: c.blocks.unwrap_or(8),
                queries: c.queries.unwrap_or(100),
                datasets: c.datasets.unwrap_or(2),
            };
            plan.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
            let n = nonempty("n", c.n.clone().unwrap_or_else(|| vec![4096]))?;
            let leaves = nonempty("leaves", c.leaves.clone().unwrap_or_else(|| vec![16, 64, 256]))?;
            if n.contains(&0) || leaves.contains(&0) {
                return cfg("n and leaves must be positive");
            }
            Plan::Decompose(Decompose {
                model,
                probs,
                n,
                leaves,
                trees: positive("trees", c.trees.unwrap_or(1000))?,
                plan,
                bounds: Bounds::from(c)?,
            })
        }
        ExperimentKind::Overlap => {
            let p = nonempty("p", c.p.clone().unwrap_or_else(|| vec![vec![0.5, 0.5]]))?;
            let depths = nonempty("depths", c.depths.clone().unwrap_or_else(|| (1..=12).collect()))?;
            for pv in &p {
                SelectionProbs::new(pv.clone()).map_err(|e| HarnessError::Config(format!("p: {e}")))?;
                let max = *depths.iter().max().unwrap();
                let count = composition_count(u64::from(max), pv.len());
                if count.saturating_mul(count) > PAIR_LIMIT {
                    return cfg(format!(
                        "depth {max} with {} categories exceeds the enumeration limit",
                        pv.len()
                    ));
                }
            }
            if let Some(&d) = depths.iter().find(|&&d| d > EXACT_SPLIT_LIMIT) {
                return cfg(format!(
                    "depth {d} exceeds {EXACT_SPLIT_LIMIT}, the limit for geometric cells"
                ));
            }
            Plan::Overlap(Overlap {
                p,
                depths,
                samples: c.samples.unwrap_or(100_000).max(2),
            })
        }
        ExperimentKind::Multinomial => {
            let m = nonempty("m", c.m.clone().unwrap_or_else(|| (1..=8).collect()))?;
            let p = nonempty(
                "p",
                c.p.clone().unwrap_or_else(|| vec![vec![0.5, 0.5], vec![1.0 / 3.0; 3]]),
            )?;
            for pv in &p {
                SelectionProbs::new(pv.clone()).map_err(|e| HarnessError::Config(format!("p: {e}")))?;
                for &mi in &m {
                    let count = composition_count(mi, pv.len());
                    if count.saturating_mul(count) > PAIR_LIMIT {
                        return cfg(format!(
                            "m = {mi} with {} categories exceeds the enumeration limit",
                            pv.len()
                        ));
                    }
                }
            }
            Plan::Multinomial(Multinomial {
                m,
                p,
                samples: c.samples.unwrap_or(1_000_000).max(2),
            })
        }
        ExperimentKind::AdaptiveHist => {
            let dim = c.dim.unwrap_or(8);
            let (beta, beta_seed) = match (&c.beta, c.beta_seed) {
                (Some(b), _) => (b.clone(), None),
                (None, seed) => {
                    let s = seed.unwrap_or(7);
                    let mut rng = stream(s);
                    (
                        (0..positive("dim", dim)?)
                            .map(|_| rng.random_range(-1.0..=1.0))
                            .collect(),
                        Some(s),
                    )
                }
            };
            let d = beta.len();
            if beta.is_empty() || beta.iter().all(|&b| b == 0.0) || beta.iter().any(|b| !b.is_finite()) {
                return cfg("beta must be finite with at least one non-zero entry");
            }
            let m_n = c.m_n.unwrap_or(d);
            if m_n == 0 || m_n > d {
                return cfg(format!("m_n = {m_n} is not in 1..={d}"));
            }
            Plan::AdaptiveHist(AdaptiveHist {
                beta,
                beta_seed,
                depth: c.depth.unwrap_or(1024),
                trees: positive("trees", c.trees.unwrap_or(100))?,
                m_n,
                sampling: c.sampling.unwrap_or_default(),
            })
        }
        ExperimentKind::LearnProbs => {
            let model = model_or(c, ModelSpec::linear(vec![1.0, 1.0, 0.0, 0.0, 0.0, 0.0], 0.1).unwrap())?;
            let n = match c.n.as_deref() {
                None => 5000,
                Some([n]) if *n >= 2 => *n,
                Some(_) => return cfg("learn-probs takes a single n of at least 2"),
            };
            let m_n = c.m_n.unwrap_or(model.dim);
            if m_n == 0 || m_n > model.dim {
                return cfg(format!("m_n = {m_n} is not in 1..={}", model.dim));
            }
            Plan::LearnProbs(LearnProbs {
                model,
                n,
                m_n,
                trials: positive("trials", c.trials.unwrap_or(2000))?,
                sampling: c.sampling.unwrap_or_default(),
                fresh_sample: c.fresh_sample.unwrap_or(true),
                xi: c.xi.unwrap_or(0.0),
            })
        }
        ExperimentKind::BoundsTable => {
            let s_max = c.s_max.unwrap_or(12);
            let d = c.d.unwrap_or(s_max);
            if s_max == 0 || s_max > d {
                return cfg(format!("need 1 <= s_max <= d, got s_max = {s_max}, d = {d}"));
            }
            Plan::BoundsTable(BoundsTable { s_max, d })
        }
        ExperimentKind::Consistency => {
            let model = model_or(
                c,
                ModelSpec::new(2, RegressionFunction::Indicator { strong: vec![0, 1] }, 0.5).unwrap(),
            )?;
            let probs = probs_for(c, &model)?;
            let n = nonempty("n", c.n.clone().unwrap_or_else(|| vec![1 << 8, 1 << 10, 1 << 12]))?;
            if n.contains(&0) {
                return cfg("n must be positive");
            }
            let leaf_exponent = c.leaf_exponent.unwrap_or(0.6);
            if !(leaf_exponent > 0.0 && leaf_exponent < 1.0) {
                return cfg("leaf_exponent must be in (0, 1)");
            }
            let points = match &c.points {
                Some(p) => p.clone(),
                None => probe_points(model.dim, 10, 0.1),
            };
            for x in &points {
                crate::cell::check_point(model.dim, x).map_err(|e| HarnessError::Config(format!("points: {e}")))?;
            }
            Plan::Consistency(Consistency {
                model,
                probs,
                n,
                leaf_exponent,
                points: nonempty("points", points)?,
                replicates: at_least_two("replicates", c.replicates.unwrap_or(200))?,
                trees: positive("trees", c.trees.unwrap_or(50))?,
            })
        }
    })
}

fn consistency_leaves(n: usize, a: f64) -> u64 {
    ((n as f64).powf(a).round() as u64).max(1)
}

impl Plan {
    pub(super) fn describe(&self) -> Value {
        let v = match self {
            Plan::RiskSweep(p) => serde_json::to_value(p),
            Plan::Decompose(p) => serde_json::to_value(p),
            Plan::Overlap(p) => serde_json::to_value(p),
            Plan::Multinomial(p) => serde_json::to_value(p),
            Plan::AdaptiveHist(p) => serde_json::to_value(p),
            Plan::LearnProbs(p) => serde_json::to_value(p),
            Plan::BoundsTable(p) => serde_json::to_value(p),
            Plan::Consistency(p) => serde_json::to_value(p),
        };
        v.unwrap_or(Value::Null)
    }

    fn labels(&self) -> Vec<String> {
        match self {
            Plan::RiskSweep(p) => p.grid.iter().map(|(n, k)| format!("n={n},k={k}")).collect(),
            Plan::Decompose(p) => {
                p.n.iter()
                    .flat_map(|n| p.leaves.iter().map(move |k| format!("n={n},k={k}")))
                    .collect()
            }
            Plan::Overlap(p) => (0..p.p.len())
                .flat_map(|i| p.depths.iter().map(move |d| format!("p#{i},depth={d}")))
                .collect(),
            Plan::Multinomial(p) => (0..p.p.len())
                .flat_map(|i| p.m.iter().map(move |m| format!("p#{i},m={m}")))
                .collect(),
            Plan::AdaptiveHist(_) => vec!["trees".into()],
            Plan::LearnProbs(_) => vec!["trials".into()],
            Plan::BoundsTable(_) => Vec::new(),
            Plan::Consistency(p) => p.n.iter().map(|n| format!("n={n}")).collect(),
        }
    }

    pub(super) fn seeds(&self, experiment_seed: u64) -> Vec<SeedRecord> {
        self.labels()
            .into_iter()
            .enumerate()
            .map(|(i, label)| SeedRecord {
                label,
                seed: derive_seed(experiment_seed, i as u64),
            })
            .collect()
    }

    pub(super) fn notes(&self) -> Vec<String> {
        match self {
            Plan::RiskSweep(_) | Plan::Decompose(_) | Plan::Consistency(_) => vec![M_NOTE.into(), LOG_NOTE.into()],
            _ => Vec::new(),
        }
    }

    pub(super) fn execute(&self, seed: u64) -> Result<Outcome> {
        let at = |i: usize| derive_seed(seed, i as u64);
        match self {
            Plan::RiskSweep(p) => {
                let probs = Arc::new(SelectionProbs::new(p.probs.clone())?);
                let mut t = Table::new(&[
                    "n",
                    "k_n",
                    "mse",
                    "stderr",
                    "M",
                    "replicates",
                    "queries",
                    "risk_bound",
                    "seed",
                ]);
                let mut pts = Vec::new();
                for (i, &(n, k)) in p.grid.iter().enumerate() {
                    let setup = ForestSetup::new(p.model.clone(), n, k, probs.clone(), p.trees)?;
                    let r = mc_risk(&setup, p.replicates, p.queries, at(i))?;
                    let bound = p
                        .bounds
                        .inputs(&p.model, n, k)
                        .map(|b| risk_upper_bound(&b))
                        .transpose()?;
                    if r.mse > 0.0 {
                        pts.push((n as f64, r.mse));
                    }
                    t.push(vec![
                        n.to_string(),
                        k.to_string(),
                        fl(r.mse),
                        fl(r.stderr),
                        p.trees.to_string(),
                        r.replicates.to_string(),
                        r.queries.to_string(),
                        opt(bound),
                        at(i).to_string(),
                    ]);
                }
                Ok(Outcome {
                    table: t,
                    summary: Some(json!({"mse_vs_n": fit_summary(&pts)})),
                })
            }
            Plan::Decompose(p) => {
                let probs = Arc::new(SelectionProbs::new(p.probs.clone())?);
                let mut t = Table::new(&[
                    "n",
                    "k_n",
                    "variance",
                    "variance_stderr",
                    "bias_sq",
                    "bias_sq_stderr",
                    "mse",
                    "mse_stderr",
                    "correction",
                    "variance_bound",
                    "bias_bound",
                    "M",
                    "blocks",
                    "queries",
                    "datasets",
                    "seed",
                ]);
                let mut i = 0;
                let (mut bias_pts, mut var_pts) = (Vec::new(), Vec::new());
                for &n in &p.n {
                    for &k in &p.leaves {
                        let setup = ForestSetup::new(p.model.clone(), n, k, probs.clone(), p.trees)?;
                        let e = mc_bias_variance(&setup, p.plan, at(i))?;
                        let b = p.bounds.inputs(&p.model, n, k);
                        let vb = b.map(|b| variance_upper_bound(&b)).transpose()?;
                        let bb = b.map(|b| bias_upper_bound(&b)).transpose()?;
                        if p.n.len() == 1 {
                            if e.bias_sq.mean > 0.0 {
                                bias_pts.push((k as f64, e.bias_sq.mean));
                            }
                            if e.variance.mean > 0.0 && k >= 2 {
                                var_pts.push(((k as f64).log2(), e.variance.mean * n as f64 / k as f64));
                            }
                        }
                        t.push(vec![
                            n.to_string(),
                            k.to_string(),
                            fl(e.variance.mean),
                            fl(e.variance.stderr),
                            fl(e.bias_sq.mean),
                            fl(e.bias_sq.stderr),
                            fl(e.mse.mean),
                            fl(e.mse.stderr),
                            fl(e.correction),
                            opt(vb),
                            opt(bb),
                            p.trees.to_string(),
                            p.plan.blocks.to_string(),
                            p.plan.queries.to_string(),
                            p.plan.datasets.to_string(),
                            at(i).to_string(),
                        ]);
                        i += 1;
                    }
                }
                let summary = (p.n.len() == 1).then(|| {
                    json!({
                        "bias_sq_vs_k": fit_summary(&bias_pts),
                        "scaled_variance_vs_log2_k": fit_summary(&var_pts),
                    })
                });
                Ok(Outcome { table: t, summary })
            }
            Plan::Overlap(p) => {
                let mut t = Table::new(&["d", "p", "depth", "exact", "mc", "mc_stderr", "samples", "seed"]);
                let mut i = 0;
                for pv in &p.p {
                    let probs = Arc::new(SelectionProbs::new(pv.clone())?);
                    for &depth in &p.depths {
                        let exact = expected_overlap(pv, depth, HalvingMode::Exact)?.mean;
                        let mc = tree_pair_overlap_mc(probs.clone(), depth, p.samples, at(i))?;
                        t.push(vec![
                            pv.len().to_string(),
                            join(pv),
                            depth.to_string(),
                            fl(exact),
                            fl(mc.mean),
                            fl(mc.stderr),
                            p.samples.to_string(),
                            at(i).to_string(),
                        ]);
                        i += 1;
                    }
                }
                Ok(Outcome {
                    table: t,
                    summary: None,
                })
            }
            Plan::Multinomial(p) => {
                let mut t = Table::new(&[
                    "m",
                    "k",
                    "p",
                    "exact",
                    "mc",
                    "mc_stderr",
                    "upper_bound",
                    "normal_approx",
                    "fitted_c",
                    "samples",
                    "seed",
                ]);
                let mut i = 0;
                for pv in &p.p {
                    for &m in &p.m {
                        let exact = halving_exact(m, pv)?;
                        let mc = halving_mc(m, pv, p.samples, at(i))?;
                        let upper = multibound_upper(m, pv).ok();
                        let normal = (pv.len() == 2 && pv[0] > 0.0 && pv[0] < 1.0)
                            .then(|| normal_approx_check(m, pv[0]).map(|c| c.approx))
                            .transpose()?;
                        let c = (pv.len() >= 2)
                            .then(|| fitted_lower_constant(exact, m, pv).ok())
                            .flatten();
                        t.push(vec![
                            m.to_string(),
                            pv.len().to_string(),
                            join(pv),
                            fl(exact),
                            fl(mc.mean),
                            fl(mc.stderr),
                            opt(upper),
                            opt(normal),
                            opt(c),
                            p.samples.to_string(),
                            at(i).to_string(),
                        ]);
                        i += 1;
                    }
                }
                Ok(Outcome {
                    table: t,
                    summary: None,
                })
            }
            Plan::AdaptiveHist(p) => {
                let counts = adaptive_forest_counts(&p.beta, p.m_n, p.depth, p.sampling, p.trees, at(0))?;
                let mut t = Table::new(&["tree_id", "coord", "K", "beta"]);
                for (id, c) in counts.iter().enumerate() {
                    for (j, k) in c.k.iter().enumerate() {
                        t.push(vec![id.to_string(), j.to_string(), k.to_string(), fl(p.beta[j])]);
                    }
                }
                Ok(Outcome {
                    table: t,
                    summary: Some(hist_summary(p, &counts.iter().map(|c| c.k.clone()).collect::<Vec<_>>())),
                })
            }
            Plan::LearnProbs(p) => {
                if !p.fresh_sample {
                    return learn_fixed(p, at(0));
                }
                let source = SelectionSource::Fresh {
                    model: &p.model,
                    n: p.n,
                };
                let est = estimate_selection_probs(source, p.m_n, p.sampling, p.trials, at(0))?;
                Ok(Outcome {
                    table: probs_table(p, est.as_slice(), at(0)),
                    summary: None,
                })
            }
            Plan::BoundsTable(p) => {
                let mut t = Table::new(&["S", "alpha_new", "alpha_biau", "minimax_d", "minimax_S", "approx_new"]);
                for s in 1..=p.s_max {
                    let r = reference_rates(s, p.d)?;
                    t.push(vec![
                        s.to_string(),
                        fl(r.new),
                        fl(r.biau),
                        fl(r.minimax_d),
                        fl(r.minimax_s),
                        fl(r.approx_new),
                    ]);
                }
                Ok(Outcome {
                    table: t,
                    summary: None,
                })
            }
            Plan::Consistency(p) => {
                let probs = Arc::new(SelectionProbs::new(p.probs.clone())?);
                let mut t = Table::new(&[
                    "point",
                    "x",
                    "n",
                    "k_n",
                    "depth",
                    "mse",
                    "stderr",
                    "replicates",
                    "M",
                    "seed",
                ]);
                let mut per_n = Vec::new();
                for (i, &n) in p.n.iter().enumerate() {
                    let k = consistency_leaves(n, p.leaf_exponent);
                    let setup = ForestSetup::new(p.model.clone(), n, k, probs.clone(), p.trees)?;
                    per_n.push((n, k, pointwise_mse(&setup, &p.points, p.replicates, at(i))?));
                }
                for (j, x) in p.points.iter().enumerate() {
                    for (i, (n, k, est)) in per_n.iter().enumerate() {
                        t.push(vec![
                            j.to_string(),
                            join(x),
                            n.to_string(),
                            k.to_string(),
                            depth_for_leaves(*k).to_string(),
                            fl(est[j].mean),
                            fl(est[j].stderr),
                            p.replicates.to_string(),
                            p.trees.to_string(),
                            at(i).to_string(),
                        ]);
                    }
                }
                let violations: Vec<Value> = (0..p.points.len())
                    .flat_map(|j| {
                        per_n.windows(2).filter_map(move |w| {
                            let (a, b) = (&w[0].2[j], &w[1].2[j]);
                            let slack = 3.0 * (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
                            (b.mean > a.mean + slack).then(|| json!({"point": j, "from_n": w[0].0, "to_n": w[1].0}))
                        })
                    })
                    .collect();
                Ok(Outcome {
                    table: t,
                    summary: Some(
                        json!({"non_increasing_within_3_stderr": violations.is_empty(), "violations": violations}),
                    ),
                })
            }
        }
    }
}

fn probs_table(p: &LearnProbs, est: &[f64], seed: u64) -> Table {
    let strong = p.model.strong_set();
    let approx = approx_strong_probability(strong.len(), p.model.dim, p.m_n, p.xi);
    let mut t = Table::new(&[
        "coord", "p_hat", "stderr", "strong", "approx", "trials", "n", "m_n", "seed",
    ]);
    for (j, &v) in est.iter().enumerate() {
        let is_strong = strong.contains(&j);
        t.push(vec![
            j.to_string(),
            fl(v),
            fl((v * (1.0 - v) / p.trials as f64).sqrt()),
            u8::from(is_strong).to_string(),
            if is_strong { fl(approx) } else { String::new() },
            p.trials.to_string(),
            p.n.to_string(),
            p.m_n.to_string(),
            seed.to_string(),
        ]);
    }
    t
}

/// One fixed second sample; only the subset draws and tie-breaks vary across trials.
fn learn_fixed(p: &LearnProbs, seed: u64) -> Result<Outcome> {
    let data = p
        .model
        .sample(p.n, &mut stream(derive_seed(seed, crate::rng::lane::DATASET)))?;
    let est = estimate_selection_probs(
        SelectionSource::Fixed(&data),
        p.m_n,
        p.sampling,
        p.trials,
        derive_seed(seed, crate::rng::lane::SELECTION),
    )?;
    Ok(Outcome {
        table: probs_table(p, est.as_slice(), seed),
        summary: None,
    })
}

fn hist_summary(p: &AdaptiveHist, counts: &[Vec<u32>]) -> Value {
    let d = p.beta.len();
    let m = counts.len() as f64;
    let mut mean = vec![0.0; d];
    let mut var = vec![0.0; d];
    for j in 0..d {
        mean[j] = counts.iter().map(|k| f64::from(k[j])).sum::<f64>() / m;
        if counts.len() > 1 {
            var[j] = counts.iter().map(|k| (f64::from(k[j]) - mean[j]).powi(2)).sum::<f64>() / (m - 1.0);
        }
    }
    // The approximation needs |β| sorted in decreasing order over the non-zero entries.
    let mut order: Vec<usize> = (0..d).filter(|&j| p.beta[j] != 0.0).collect();
    order.sort_by(|&a, &b| p.beta[b].abs().total_cmp(&p.beta[a].abs()));
    let sorted: Vec<f64> = order.iter().map(|&j| p.beta[j]).collect();
    let mut approx = vec![0.0; d];
    if let Ok(a) = approx_split_counts(&sorted, p.depth) {
        for (&j, v) in order.iter().zip(a) {
            approx[j] = v;
        }
    }
    json!({
        "mean_k": mean,
        "sample_variance_k": var,
        "approx_k": approx,
        "max_sample_variance": var.iter().copied().fold(0.0, f64::max),
    })
}
