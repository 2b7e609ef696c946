//! Optimal treatment regimes: Q-learning, the contrast-weighted
//! classification method, rule evaluation, and recommendation/compliance
//! summaries.

pub mod cart;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::glm::{self, Design};
use crate::rule::{DecisionRule, RuleModel};

pub use crate::rule::apply_rule;
pub use cart::TreeParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OtrMethod {
    Qlearning,
    Weighting,
}

impl OtrMethod {
    pub fn label(self) -> &'static str {
        match self {
            OtrMethod::Qlearning => "Q-learning",
            OtrMethod::Weighting => "Weighting",
        }
    }
}

/// Settings shared by both rule estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OtrConfig {
    pub method: OtrMethod,
    pub stratify: bool,
    pub max_depth: usize,
    /// Minimum leaf weight as a fraction of the stratum's total `|C|` weight.
    pub min_leaf_fraction: f64,
}

impl Default for OtrConfig {
    fn default() -> Self {
        OtrConfig {
            method: OtrMethod::Weighting,
            stratify: true,
            max_depth: 3,
            min_leaf_fraction: 0.01,
        }
    }
}

/// Per-unit contrast `C(Y, M, H)` with derived labels and weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastVector {
    pub values: Vec<f64>,
    pub z_labels: Vec<u8>,
    pub abs_weights: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueEstimate {
    pub value: f64,
    pub compliant_count: usize,
    /// Always `"ipw-hajek"`.
    pub method: &'static str,
}

/// Row subsets fitted separately: both groups when stratified, else all rows.
pub(crate) fn strata(ds: &Dataset, stratify: bool) -> Vec<(Option<u8>, Vec<usize>)> {
    if stratify {
        (0..=1u8)
            .map(|g| {
                let rows = (0..ds.n()).filter(|&i| ds.r()[i] == g).collect();
                (Some(g), rows)
            })
            .collect()
    } else {
        vec![(None, (0..ds.n()).collect())]
    }
}

fn pick(v: &[f64], rows: &[usize]) -> Vec<f64> {
    rows.iter().map(|&i| v[i]).collect()
}

/// Design `(1, [R], X, C)` restricted to `rows`.
pub(crate) fn history_design(ds: &Dataset, rows: &[usize], include_r: bool) -> Result<Design> {
    let mut b = Design::builder(rows.len()).intercept();
    if include_r {
        let r: Vec<f64> = rows.iter().map(|&i| ds.r()[i] as f64).collect();
        b = b.col(ds.r_name(), r);
    }
    for cov in ds.x().iter().chain(ds.c()) {
        b = b.col(cov.name.clone(), pick(&cov.values, rows));
    }
    b.build()
}

/// `P(M = 1 | R, X, C)` fitted per stratum (or pooled), for every unit.
pub fn fit_propensity(ds: &Dataset, stratify: bool) -> Result<Vec<f64>> {
    let mut p = vec![0.0; ds.n()];
    for (_, rows) in strata(ds, stratify) {
        let d = history_design(ds, &rows, !stratify)?;
        let m: Vec<u8> = rows.iter().map(|&i| ds.m()[i]).collect();
        let fit = glm::fit_logistic(&d, &m, &vec![1.0; rows.len()], None)?;
        for (&i, pi) in rows.iter().zip(glm::predict_prob(&fit, &d, None)?) {
            p[i] = pi;
        }
    }
    Ok(p)
}

/// Fit `Q(H, M) = b0 + b1 H + (b2 + b3 H1) M` and return `d(H) = I(b2 + b3 H1 > 0)`.
pub fn fit_qlearning(ds: &Dataset, stratify_by_group: bool) -> Result<DecisionRule> {
    const OP: &str = "otr::fit_qlearning";
    if ds.h1().is_empty() {
        return Err(Error::config(OP, "Q-learning needs at least one effect modifier (h1)"));
    }
    let mut models = Vec::new();
    for (g, rows) in strata(ds, stratify_by_group) {
        let treated = rows.iter().filter(|&&i| ds.m()[i] == 1).count();
        if treated == 0 || treated == rows.len() {
            return Err(Error::estimation(
                OP,
                format!(
                    "stratum {} has a single risk-factor arm",
                    g.map_or("pooled".to_string(), |g| format!("R={g}"))
                ),
            ));
        }
        let m: Vec<f64> = rows.iter().map(|&i| ds.m()[i] as f64).collect();
        let mut b = Design::builder(rows.len()).intercept();
        if !stratify_by_group {
            b = b.col(ds.r_name(), rows.iter().map(|&i| ds.r()[i] as f64).collect::<Vec<_>>());
        }
        for cov in ds.x().iter().chain(ds.c()) {
            b = b.col(cov.name.clone(), pick(&cov.values, &rows));
        }
        b = b.col("M", m.clone());
        for h in ds.h1() {
            let col = ds.column(h).expect("validated h1 column");
            let inter: Vec<f64> = rows.iter().zip(&m).map(|(&i, mi)| mi * col[i]).collect();
            b = b.col(format!("M:{h}"), inter);
        }
        let design = b.build()?;
        let y = pick(ds.y(), &rows);
        let fit = glm::fit_wls(&design, &y, &vec![1.0; rows.len()], None)?;
        let p = fit.coefficients.len();
        let k = ds.h1().len();
        models.push(RuleModel::Linear {
            intercept: fit.coefficients[p - k - 1],
            coefficients: fit.coefficients[p - k..].to_vec(),
            features: ds.h1().to_vec(),
        });
    }
    Ok(if stratify_by_group {
        let comparison = models.pop().unwrap();
        DecisionRule::stratified(models.pop().unwrap(), comparison)
    } else {
        DecisionRule::pooled(models.pop().unwrap())
    })
}

/// `C_i = m_i y_i / p_i - (1 - m_i) y_i / (1 - p_i)`.
pub fn compute_contrast(y: &[f64], m: &[u8], propensity: &[f64]) -> Result<ContrastVector> {
    if y.len() != m.len() || y.len() != propensity.len() {
        return Err(Error::dim("otr::compute_contrast", "Y, M and propensity lengths differ"));
    }
    let values: Vec<f64> = y
        .iter()
        .zip(m)
        .zip(propensity)
        .map(|((&y, &m), &p)| {
            if m == 1 {
                y / p
            } else {
                -y / (1.0 - p)
            }
        })
        .collect();
    Ok(ContrastVector {
        z_labels: values.iter().map(|&v| (v > 0.0) as u8).collect(),
        abs_weights: values.iter().map(|v| v.abs()).collect(),
        values,
    })
}

/// Contrast-weighted classification rule grown as a tree over `H`.
pub fn fit_weighting_rule(
    ds: &Dataset,
    max_depth: usize,
    min_leaf_fraction: f64,
    stratify_by_group: bool,
) -> Result<DecisionRule> {
    const OP: &str = "otr::fit_weighting_rule";
    if max_depth == 0 {
        return Err(Error::config(OP, "max_depth must be at least 1"));
    }
    if !(0.0..1.0).contains(&min_leaf_fraction) {
        return Err(Error::config(OP, "min_leaf_fraction must lie in [0, 1)"));
    }
    let propensity = fit_propensity(ds, stratify_by_group)?;
    let contrast = compute_contrast(ds.y(), ds.m(), &propensity)?;
    let names = ds.history_names();
    let full: Vec<Vec<f64>> = names
        .iter()
        .map(|n| ds.history_column(n).expect("history column"))
        .collect();

    let mut models = Vec::new();
    for (_, rows) in strata(ds, stratify_by_group) {
        let w = pick(&contrast.abs_weights, &rows);
        let total: f64 = w.iter().sum();
        if total <= 0.0 {
            return Err(Error::estimation(OP, "all contrast weights are zero"));
        }
        let z: Vec<u8> = rows.iter().map(|&i| contrast.z_labels[i]).collect();
        let feats: Vec<Vec<f64>> = full.iter().map(|c| pick(c, &rows)).collect();
        let params = TreeParams {
            max_depth,
            min_leaf_weight: min_leaf_fraction * total,
        };
        let root = cart::grow_tree(&feats, &z, &w, &params)?;
        models.push(RuleModel::Tree {
            root,
            features: names.clone(),
        });
    }
    Ok(if stratify_by_group {
        let comparison = models.pop().unwrap();
        DecisionRule::stratified(models.pop().unwrap(), comparison)
    } else {
        DecisionRule::pooled(models.pop().unwrap())
    })
}

/// Dispatch on [`OtrConfig::method`].
pub fn fit_rule(ds: &Dataset, cfg: &OtrConfig) -> Result<DecisionRule> {
    match cfg.method {
        OtrMethod::Qlearning => fit_qlearning(ds, cfg.stratify),
        OtrMethod::Weighting => {
            fit_weighting_rule(ds, cfg.max_depth, cfg.min_leaf_fraction, cfg.stratify)
        }
    }
}

/// Hajek IPW value of following `rule`; `propensity` is `P(M = 1 | H)`.
pub fn estimate_value(ds: &Dataset, rule: &DecisionRule, propensity: &[f64]) -> Result<ValueEstimate> {
    const OP: &str = "otr::estimate_value";
    if propensity.len() != ds.n() {
        return Err(Error::dim(OP, "propensity length differs from n"));
    }
    let d = apply_rule(rule, ds)?;
    let (mut num, mut den, mut count) = (0.0, 0.0, 0usize);
    for i in 0..ds.n() {
        if ds.m()[i] != d[i] {
            continue;
        }
        let p_obs = if ds.m()[i] == 1 {
            propensity[i]
        } else {
            1.0 - propensity[i]
        };
        let w = 1.0 / p_obs;
        num += w * ds.y()[i];
        den += w;
        count += 1;
    }
    if count == 0 {
        return Err(Error::estimation(OP, "no unit follows the rule"));
    }
    Ok(ValueEstimate {
        value: num / den,
        compliant_count: count,
        method: "ipw-hajek",
    })
}

/// Recommendation and compliance rates (in percent) by group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplianceStats {
    pub method: String,
    /// `[comparison (R=1), reference (R=0), total]`
    pub recommendation_pct: [f64; 3],
    pub compliance_pct: [f64; 3],
}

pub fn compliance_stats(ds: &Dataset, rule: &DecisionRule, method: &str) -> Result<ComplianceStats> {
    let d = apply_rule(rule, ds)?;
    Ok(compliance_from(ds.r(), ds.m(), &d, method))
}

pub(crate) fn compliance_from(r: &[u8], m: &[u8], d: &[u8], method: &str) -> ComplianceStats {
    let mut rec = [0.0; 3];
    let mut comp = [0.0; 3];
    let mut count = [0.0; 3];
    for i in 0..r.len() {
        let slot = if r[i] == 1 { 0 } else { 1 };
        for s in [slot, 2] {
            count[s] += 1.0;
            rec[s] += d[i] as f64;
            comp[s] += (m[i] == d[i]) as u8 as f64;
        }
    }
    let pct = |v: [f64; 3]| {
        let mut out = [f64::NAN; 3];
        for s in 0..3 {
            if count[s] > 0.0 {
                out[s] = 100.0 * v[s] / count[s];
            }
        }
        out
    };
    ComplianceStats {
        method: method.to_string(),
        recommendation_pct: pct(rec),
        compliance_pct: pct(comp),
    }
}
