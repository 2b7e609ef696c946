//! Initial disparity, individualized controlled direct effect (ICDE) and
//! individualized interventional effect (IIE) estimators, with stratified
//! bootstrap standard errors.
//!
//! All estimators expect the `C` columns to be centered already (see
//! [`crate::dataset::center_covariates`]); the estimands are evaluated at
//! `C = 0` on that shifted scale.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{center_covariates, Center, Dataset};
use crate::error::{Error, Result};
use crate::glm::{self, expit, Design};
use crate::otr::{self, apply_rule};
use crate::rule::DecisionRule;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IieEstimator {
    Regression,
    Weighting,
}

/// Population over which `E[A^m]` is averaged in the regression IIE estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmMean {
    FullSample,
    Comparison,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecomposeConfig {
    pub iie_estimator: IieEstimator,
    /// Include `R x I(M = d)` in the IIE outcome model.
    pub interaction: bool,
    /// Percentile truncation `[q_lo, q_hi]` of inverse-probability weights.
    pub truncation: Option<(f64, f64)>,
    pub am_mean: AmMean,
}

impl Default for DecomposeConfig {
    fn default() -> Self {
        DecomposeConfig {
            iie_estimator: IieEstimator::Regression,
            interaction: false,
            truncation: None,
            am_mean: AmMean::FullSample,
        }
    }
}

/// The four decomposition quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointEstimates {
    pub tau: f64,
    pub zeta_icde: f64,
    pub delta_iie: f64,
    pub zeta_iie: f64,
}

impl PointEstimates {
    pub fn to_vec(self) -> Vec<f64> {
        vec![self.tau, self.zeta_icde, self.delta_iie, self.zeta_iie]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        PointEstimates {
            tau: v[0],
            zeta_icde: v[1],
            delta_iie: v[2],
            zeta_iie: v[3],
        }
    }
}

pub const ESTIMAND_NAMES: [&str; 4] = ["tau", "zeta_icde", "delta_iie", "zeta_iie"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub tau: Estimate,
    pub zeta_icde: Estimate,
    pub delta_iie: Estimate,
    pub zeta_iie: Estimate,
    pub pct_reduction_icde: f64,
    pub pct_reduction_iie: f64,
    pub estimator: IieEstimator,
    pub interaction_included: bool,
    pub c_center: Vec<f64>,
    pub bootstrap_replicates: usize,
    pub bootstrap_failed: usize,
}

/// `100 (tau - zeta) / tau`; NaN when `tau == 0`.
pub fn pct_reduction(tau: f64, zeta: f64) -> f64 {
    if tau == 0.0 {
        f64::NAN
    } else {
        100.0 * (tau - zeta) / tau
    }
}

impl DecompositionReport {
    pub fn from_parts(
        point: PointEstimates,
        se: Option<&[f64]>,
        cfg: &DecomposeConfig,
        c_center: Vec<f64>,
        replicates: usize,
        failed: usize,
    ) -> Self {
        let est = |j: usize, v: f64| Estimate {
            value: v,
            se: se.map(|s| s[j]),
        };
        DecompositionReport {
            tau: est(0, point.tau),
            zeta_icde: est(1, point.zeta_icde),
            delta_iie: est(2, point.delta_iie),
            zeta_iie: est(3, point.zeta_iie),
            pct_reduction_icde: pct_reduction(point.tau, point.zeta_icde),
            pct_reduction_iie: pct_reduction(point.tau, point.zeta_iie),
            estimator: cfg.iie_estimator,
            interaction_included: cfg.interaction,
            c_center,
            bootstrap_replicates: replicates,
            bootstrap_failed: failed,
        }
    }

    pub fn point(&self) -> PointEstimates {
        PointEstimates {
            tau: self.tau.value,
            zeta_icde: self.zeta_icde.value,
            delta_iie: self.delta_iie.value,
            zeta_iie: self.zeta_iie.value,
        }
    }
}

fn c_cols(ds: &Dataset, rows: Option<&[usize]>) -> Vec<(String, Vec<f64>)> {
    ds.c()
        .iter()
        .map(|c| {
            let v = match rows {
                Some(r) => r.iter().map(|&i| c.values[i]).collect(),
                None => c.values.clone(),
            };
            (c.name.clone(), v)
        })
        .collect()
}

fn r_col(ds: &Dataset) -> Vec<f64> {
    ds.r().iter().map(|&v| v as f64).collect()
}

/// Probability of the observed arm, `P(M = m_i | ...)`.
pub fn observed_arm_prob(m: &[u8], p1: &[f64]) -> Vec<f64> {
    m.iter()
        .zip(p1)
        .map(|(&mi, &p)| if mi == 1 { p } else { 1.0 - p })
        .collect()
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Clamp positive weights to their `[q_lo, q_hi]` percentiles.
pub fn truncate_weights(w: &mut [f64], bounds: Option<(f64, f64)>) {
    let Some((lo, hi)) = bounds else { return };
    let mut pos: Vec<f64> = w.iter().copied().filter(|&v| v > 0.0).collect();
    if pos.is_empty() {
        return;
    }
    pos.sort_by(f64::total_cmp);
    let (a, b) = (quantile_sorted(&pos, lo), quantile_sorted(&pos, hi));
    for v in w.iter_mut().filter(|v| **v > 0.0) {
        *v = v.clamp(a, b);
    }
}

/// Coefficient of `R` in the regression of `Y` on `(1, R, C)`.
pub fn estimate_initial_disparity(ds: &Dataset) -> Result<f64> {
    let design = Design::builder(ds.n())
        .intercept()
        .col("R", r_col(ds))
        .cols(c_cols(ds, None).iter().map(|(n, v)| (n.as_str(), v.as_slice())))
        .build()?;
    let fit = glm::fit_wls(&design, ds.y(), &vec![1.0; ds.n()], None)?;
    Ok(fit.coefficients[1])
}

/// Pooled `P(M = 1 | R, X, C)` used by the decomposition estimators.
pub fn decomposition_propensity(ds: &Dataset) -> Result<Vec<f64>> {
    otr::fit_propensity(ds, false)
}

/// ICDE disparity remaining given recommendations `d` and `P(M = 1 | ...)`.
pub fn icde_with(ds: &Dataset, d: &[u8], p1: &[f64], truncation: Option<(f64, f64)>) -> Result<f64> {
    const OP: &str = "decompose::estimate_icde";
    if d.len() != ds.n() || p1.len() != ds.n() {
        return Err(Error::dim(OP, "recommendation or propensity length differs from n"));
    }
    let p_obs = observed_arm_prob(ds.m(), p1);
    let mut w: Vec<f64> = (0..ds.n())
        .map(|i| {
            if ds.m()[i] == d[i] {
                1.0 / p_obs[i]
            } else {
                0.0
            }
        })
        .collect();
    for g in 0..=1u8 {
        if !(0..ds.n()).any(|i| ds.r()[i] == g && w[i] > 0.0) {
            return Err(Error::estimation(OP, format!("no compliant unit in group R={g}")));
        }
    }
    truncate_weights(&mut w, truncation);
    let design = Design::builder(ds.n())
        .intercept()
        .col("R", r_col(ds))
        .cols(c_cols(ds, None).iter().map(|(n, v)| (n.as_str(), v.as_slice())))
        .build()?;
    let fit = glm::fit_wls(&design, ds.y(), &w, None).map_err(|e| relabel(e, OP))?;
    Ok(fit.coefficients[1])
}

fn relabel(e: Error, op: &'static str) -> Error {
    match e {
        Error::RankDeficient { column, .. } => Error::RankDeficient { op, column },
        Error::ZeroWeights { .. } => Error::ZeroWeights { op },
        Error::Separation { limit, .. } => Error::Separation { op, limit },
        other => other,
    }
}

/// ICDE disparity remaining: weighted MSM of `Y` on `(1, R, C)` with
/// `W = I(M = d) / P(M | R, X, C)`.
pub fn estimate_icde(ds: &Dataset, rule: &DecisionRule, truncation: Option<(f64, f64)>) -> Result<f64> {
    let d = apply_rule(rule, ds)?;
    let p1 = decomposition_propensity(ds)?;
    icde_with(ds, &d, &p1, truncation)
}

/// Regression IIE estimator; returns `(delta, zeta)` with `zeta = tau - delta`.
pub fn iie_regression_with(
    ds: &Dataset,
    d: &[u8],
    p1: &[f64],
    tau: f64,
    cfg: &DecomposeConfig,
) -> Result<(f64, f64)> {
    const OP: &str = "decompose::estimate_iie_regression";
    let n = ds.n();
    let comply: Vec<u8> = (0..n).map(|i| (ds.m()[i] == d[i]) as u8).collect();
    let k = comply.iter().filter(|&&c| c == 1).count();
    if k == 0 || k == n {
        return Err(Error::estimation(OP, "compliance indicator has a single arm"));
    }
    let r = r_col(ds);

    // Compliance model: logit P(I = 1 | R, A^m).
    let am: Vec<(String, Vec<f64>)> = ds
        .am()
        .iter()
        .map(|a| (a.clone(), ds.column(a).expect("validated am column").to_vec()))
        .collect();
    let cdesign = Design::builder(n)
        .intercept()
        .col("R", r.clone())
        .cols(am.iter().map(|(n, v)| (n.as_str(), v.as_slice())))
        .build()?;
    let phi = glm::fit_logistic(&cdesign, &comply, &vec![1.0; n], None)
        .map_err(|e| relabel(e, OP))?
        .coefficients;
    let am_bar: Vec<f64> = am
        .iter()
        .map(|(_, v)| match cfg.am_mean {
            AmMean::FullSample => v.iter().sum::<f64>() / n as f64,
            AmMean::Comparison => {
                let (s, c) = (0..n)
                    .filter(|&i| ds.r()[i] == 1)
                    .fold((0.0, 0.0), |(s, c), i| (s + v[i], c + 1.0));
                s / c
            }
        })
        .collect();
    let am_term: f64 = phi[2..].iter().zip(&am_bar).map(|(a, b)| a * b).sum();
    let rate_gap = expit(phi[0] + phi[1] + am_term) - expit(phi[0] + am_term);

    // Outcome MSM with W = 1 / P(M | R, X, C).
    let p_obs = observed_arm_prob(ds.m(), p1);
    let mut w: Vec<f64> = p_obs.iter().map(|p| 1.0 / p).collect();
    truncate_weights(&mut w, cfg.truncation);
    let comply_f: Vec<f64> = comply.iter().map(|&c| c as f64).collect();
    let mut b = Design::builder(n)
        .intercept()
        .col("R", r.clone())
        .col("I", comply_f.clone());
    if cfg.interaction {
        b = b.col("R:I", r.iter().zip(&comply_f).map(|(a, c)| a * c).collect::<Vec<_>>());
    }
    let design = b
        .cols(c_cols(ds, None).iter().map(|(n, v)| (n.as_str(), v.as_slice())))
        .build()?;
    let lambda = glm::fit_wls(&design, ds.y(), &w, None)
        .map_err(|e| relabel(e, OP))?
        .coefficients;
    let effect = if cfg.interaction {
        lambda[2] + lambda[3]
    } else {
        lambda[2]
    };
    let delta = rate_gap * effect;
    Ok((delta, tau - delta))
}

/// Intercept of a (weighted) regression of `Y` on `(1, C)` within `rows`.
fn conditional_mean(ds: &Dataset, rows: &[usize], w: &[f64], op: &'static str) -> Result<f64> {
    let y: Vec<f64> = rows.iter().map(|&i| ds.y()[i]).collect();
    let cc = c_cols(ds, Some(rows));
    let design = Design::builder(rows.len())
        .intercept()
        .cols(cc.iter().map(|(n, v)| (n.as_str(), v.as_slice())))
        .build()?;
    if w.iter().filter(|&&v| v > 0.0).count() < design.ncols() {
        return Err(Error::estimation(op, "too few positively weighted units"));
    }
    Ok(glm::fit_wls(&design, &y, w, None)
        .map_err(|e| relabel(e, op))?
        .coefficients[0])
}

/// Reference-group compliance rate `pi_(I=1 | R=0, A^m)`, averaged over the
/// comparison group when `A^m` is nonempty.
pub fn reference_compliance_rate(ds: &Dataset, d: &[u8]) -> Result<f64> {
    const OP: &str = "decompose::estimate_iie_weighting";
    let reference: Vec<usize> = (0..ds.n()).filter(|&i| ds.r()[i] == 0).collect();
    let comply: Vec<u8> = reference.iter().map(|&i| (ds.m()[i] == d[i]) as u8).collect();
    if ds.am().is_empty() {
        return Ok(comply.iter().map(|&c| c as f64).sum::<f64>() / comply.len() as f64);
    }
    let am: Vec<&[f64]> = ds.am().iter().map(|a| ds.column(a).unwrap()).collect();
    let build = |rows: &[usize]| {
        let mut b = Design::builder(rows.len()).intercept();
        for (name, col) in ds.am().iter().zip(&am) {
            b = b.col(name.clone(), rows.iter().map(|&i| col[i]).collect::<Vec<_>>());
        }
        b.build()
    };
    let fit = glm::fit_logistic(&build(&reference)?, &comply, &vec![1.0; reference.len()], None)
        .map_err(|e| relabel(e, OP))?;
    let comparison: Vec<usize> = (0..ds.n()).filter(|&i| ds.r()[i] == 1).collect();
    let pred = glm::predict_prob(&fit, &build(&comparison)?, None)?;
    Ok(pred.iter().sum::<f64>() / pred.len() as f64)
}

/// Weighting IIE estimator with an explicit reference compliance rate
/// `pi1`; returns `(delta, zeta)`.
pub fn iie_weighting_with(
    ds: &Dataset,
    d: &[u8],
    p1: &[f64],
    pi1: f64,
    truncation: Option<(f64, f64)>,
) -> Result<(f64, f64)> {
    const OP: &str = "decompose::estimate_iie_weighting";
    let comparison: Vec<usize> = (0..ds.n()).filter(|&i| ds.r()[i] == 1).collect();
    let reference: Vec<usize> = (0..ds.n()).filter(|&i| ds.r()[i] == 0).collect();
    let ones = |k: usize| vec![1.0; k];
    let e1 = conditional_mean(ds, &comparison, &ones(comparison.len()), OP)?;
    let e0 = conditional_mean(ds, &reference, &ones(reference.len()), OP)?;

    let mut mixed = 0.0;
    for (theta, pi) in [(1u8, pi1), (0u8, 1.0 - pi1)] {
        if pi == 0.0 {
            continue;
        }
        let mut w: Vec<f64> = comparison
            .iter()
            .map(|&i| {
                let target = if theta == 1 { d[i] } else { 1 - d[i] };
                if ds.m()[i] == target {
                    let p = if ds.m()[i] == 1 { p1[i] } else { 1.0 - p1[i] };
                    1.0 / p
                } else {
                    0.0
                }
            })
            .collect();
        if w.iter().all(|&v| v == 0.0) {
            return Err(Error::estimation(
                OP,
                format!("no comparison-group unit in weighted arm theta={theta}"),
            ));
        }
        truncate_weights(&mut w, truncation);
        mixed += pi * conditional_mean(ds, &comparison, &w, OP)?;
    }
    Ok((e1 - mixed, mixed - e0))
}

/// Point estimates for a fixed rule on a centered dataset.
pub fn point_estimates_with_rule(
    ds: &Dataset,
    rule: &DecisionRule,
    cfg: &DecomposeConfig,
) -> Result<PointEstimates> {
    let d = apply_rule(rule, ds)?;
    point_estimates(ds, &d, cfg)
}

/// Point estimates for fixed recommendations `d` on a centered dataset.
pub fn point_estimates(ds: &Dataset, d: &[u8], cfg: &DecomposeConfig) -> Result<PointEstimates> {
    let tau = estimate_initial_disparity(ds)?;
    let p1 = decomposition_propensity(ds)?;
    let zeta_icde = icde_with(ds, d, &p1, cfg.truncation)?;
    let (delta_iie, zeta_iie) = match cfg.iie_estimator {
        IieEstimator::Regression => iie_regression_with(ds, d, &p1, tau, cfg)?,
        IieEstimator::Weighting => {
            let pi1 = reference_compliance_rate(ds, d)?;
            iie_weighting_with(ds, d, &p1, pi1, cfg.truncation)?
        }
    };
    Ok(PointEstimates {
        tau,
        zeta_icde,
        delta_iie,
        zeta_iie,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub se: Vec<f64>,
    pub replicates: usize,
    pub failed: usize,
}

/// Share of failed replicates above which the bootstrap is an error.
pub const MAX_FAILED_FRACTION: f64 = 0.2;

/// Unit resampling with replacement within each group (sizes preserved).
pub fn stratified_resample(ds: &Dataset, rng: &mut impl rand::Rng) -> Vec<usize> {
    let groups: [Vec<usize>; 2] = [0u8, 1].map(|g| (0..ds.n()).filter(|&i| ds.r()[i] == g).collect());
    let mut idx = Vec::with_capacity(ds.n());
    for g in &groups {
        for _ in 0..g.len() {
            idx.push(g[rng.gen_range(0..g.len())]);
        }
    }
    idx
}

/// Nonparametric bootstrap standard errors of a vector-valued estimator.
///
/// Replicates whose estimator fails are dropped and counted; more than 20%
/// failures is an error. Replicate `b` draws from the substream
/// `(seed, b)`, so the result does not depend on thread scheduling.
pub fn bootstrap_se<F>(ds: &Dataset, estimator: F, b: usize, seed: u64) -> Result<BootstrapResult>
where
    F: Fn(&Dataset) -> Result<Vec<f64>> + Sync,
{
    const OP: &str = "decompose::bootstrap_se";
    if b < 2 {
        return Err(Error::config(OP, "B must be at least 2"));
    }
    let reps: Vec<Option<Vec<f64>>> = (0..b)
        .into_par_iter()
        .map(|k| {
            let mut rng = seed::rng(seed, &[k as u64]);
            let idx = stratified_resample(ds, &mut rng);
            ds.select(&idx).and_then(|s| estimator(&s)).ok()
        })
        .collect();
    let ok: Vec<&Vec<f64>> = reps.iter().flatten().collect();
    let failed = b - ok.len();
    if failed as f64 > MAX_FAILED_FRACTION * b as f64 || ok.len() < 2 {
        return Err(Error::TooManyFailures {
            op: OP,
            failed,
            total: b,
            limit_pct: 20,
        });
    }
    let k = ok[0].len();
    let nb = ok.len() as f64;
    let se = (0..k)
        .map(|j| {
            let mean = ok.iter().map(|v| v[j]).sum::<f64>() / nb;
            let ss: f64 = ok.iter().map(|v| (v[j] - mean).powi(2)).sum();
            (ss / (nb - 1.0)).sqrt()
        })
        .collect();
    Ok(BootstrapResult {
        se,
        replicates: b,
        failed,
    })
}

/// Full decomposition with optional bootstrap SEs.
///
/// `ds` is uncentered; `center` fixes the `C` level at which the estimands
/// are evaluated. When `refit_rule` is set, each bootstrap replicate
/// re-estimates the rule with `otr_cfg`; otherwise the rule is held fixed.
pub fn decompose(
    ds: &Dataset,
    rule: &DecisionRule,
    center: &Center,
    cfg: &DecomposeConfig,
    boot: Option<BootstrapSpec<'_>>,
) -> Result<DecompositionReport> {
    let (centered, c_center) = center_covariates(ds, center)?;
    let point = point_estimates_with_rule(&centered, rule, cfg)?;
    let Some(spec) = boot else {
        return Ok(DecompositionReport::from_parts(point, None, cfg, c_center, 0, 0));
    };
    let res = bootstrap_se(
        &centered,
        |s| {
            let r = match spec.refit_rule {
                Some(otr_cfg) => otr::fit_rule(s, otr_cfg)?,
                None => rule.clone(),
            };
            point_estimates_with_rule(s, &r, cfg).map(PointEstimates::to_vec)
        },
        spec.replicates,
        spec.seed,
    )?;
    Ok(DecompositionReport::from_parts(
        point,
        Some(&res.se),
        cfg,
        c_center,
        res.replicates,
        res.failed,
    ))
}

/// Bootstrap settings for [`decompose`].
#[derive(Debug, Clone, Copy)]
pub struct BootstrapSpec<'a> {
    pub replicates: usize,
    pub seed: u64,
    /// Refit the rule inside each replicate with these settings.
    pub refit_rule: Option<&'a otr::OtrConfig>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Covariate;

    #[test]
    fn percent_reduction_matches_table_layout() {
        let p = pct_reduction(-0.413, -0.477);
        assert!((p - (-15.5)).abs() < 0.05, "{p}");
    }

    fn two_group(y: Vec<f64>, m: Vec<u8>, r: Vec<u8>) -> Dataset {
        Dataset::new(y, m, r, vec![], vec![], vec![], vec![]).unwrap()
    }

    #[test]
    fn initial_disparity_is_difference_in_means() {
        let ds = two_group(vec![0.0, 0.0, 1.0, 1.0], vec![0, 1, 0, 1], vec![1, 1, 0, 0]);
        assert!((estimate_initial_disparity(&ds).unwrap() + 1.0).abs() < 1e-12);
        let ds = two_group(vec![2.0, 1.0, 2.0, 1.0], vec![0, 1, 0, 1], vec![1, 1, 0, 0]);
        assert!(estimate_initial_disparity(&ds).unwrap().abs() < 1e-12);
    }

    #[test]
    fn weighting_iie_display_example() {
        // Comparison units M=(1,0), Y=(2,0), p=0.5; reference unit complies.
        let ds = two_group(vec![2.0, 0.0, 5.0, 5.0], vec![1, 0, 1, 1], vec![1, 1, 0, 0]);
        let d = [1, 1, 1, 1];
        let (delta, zeta) = iie_weighting_with(&ds, &d, &[0.5; 4], 1.0, None).unwrap();
        assert!((delta + 1.0).abs() < 1e-12);
        assert!((zeta - (2.0 - 5.0)).abs() < 1e-12);
    }

    #[test]
    fn icde_degenerate_weights_match_tau() {
        let ds = Dataset::new(
            vec![1.0, 2.5, 0.3, 4.0, 2.0, 1.0],
            vec![1, 0, 1, 0, 1, 0],
            vec![1, 1, 1, 0, 0, 0],
            vec![],
            vec![Covariate::new("c", vec![0.5, -0.5, 0.5, -0.5, 0.5, -0.5])],
            vec![],
            vec![],
        )
        .unwrap();
        let d: Vec<u8> = ds.m().to_vec();
        let icde = icde_with(&ds, &d, &[0.5; 6], None).unwrap();
        let tau = estimate_initial_disparity(&ds).unwrap();
        assert!((icde - tau).abs() < 1e-12);
    }

    #[test]
    fn truncation_clamps_extremes() {
        let mut w = vec![0.0, 1.0, 2.0, 3.0, 4.0, 100.0];
        truncate_weights(&mut w, Some((0.0, 0.75)));
        assert_eq!(w[0], 0.0);
        assert_eq!(w[5], 4.0);
    }

    #[test]
    fn bootstrap_zero_variance_and_determinism() {
        let ds = two_group(vec![1.0, 1.0, 3.0, 3.0, 3.0], vec![0, 1, 0, 1, 1], vec![1, 1, 0, 0, 0]);
        let est = |s: &Dataset| estimate_initial_disparity(s).map(|t| vec![t]);
        let res = bootstrap_se(&ds, est, 50, 9).unwrap();
        assert!(res.se[0] < 1e-12);
        assert!(bootstrap_se(&ds, est, 1, 9).is_err());
    }
}
