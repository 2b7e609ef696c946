//! Simulation-based sensitivity analysis for an omitted confounder `U`.
//!
//! The complete-data model is
//! `Y | R,X,U,M,C ~ N(b'(1,R,X,M,M*H1,C) + b_u^y U [+ g M U], s2)` and
//! `M | R,X,U,C ~ Bernoulli(expit(a'(1,R,X,C) + b_u^m U))`, with `U`
//! independent of `(R, X, C)`. The sensitivity coefficients `b_u^y`, `b_u^m`
//! are fixed offsets; the remaining parameters are estimated by stochastic
//! EM, drawing one `U` vector per iteration and tail-averaging after burn-in.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{center_covariates, Center, Covariate, Dataset};
use crate::decompose::{self, BootstrapSpec, DecomposeConfig, DecompositionReport, PointEstimates};
use crate::error::{Error, Result};
use crate::glm::{self, softplus, Design};
use crate::otr::{self, ComplianceStats, OtrConfig};
use crate::rule::DecisionRule;
use crate::seed;

/// Column name under which simulated draws are appended to `X`.
pub const U_NAME: &str = "U";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UKind {
    Binary { pi: f64 },
    Continuous { sigma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivitySpec {
    pub u_kind: UKind,
    pub beta_u_y: f64,
    pub beta_u_m: f64,
    /// Add `M x U` to the outcome model and `U` to the effect modifiers.
    #[serde(default)]
    pub heterogeneous_u: bool,
}

impl SensitivitySpec {
    pub fn binary(beta_u_y: f64, beta_u_m: f64) -> Self {
        SensitivitySpec {
            u_kind: UKind::Binary { pi: 0.5 },
            beta_u_y,
            beta_u_m,
            heterogeneous_u: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        const OP: &str = "sensem::spec";
        match self.u_kind {
            UKind::Binary { pi } if !(pi > 0.0 && pi < 1.0) => {
                return Err(Error::config(OP, format!("pi must lie in (0, 1), got {pi}")))
            }
            UKind::Continuous { sigma } if !(sigma > 0.0 && sigma.is_finite()) => {
                return Err(Error::config(OP, format!("sigma_u must be positive, got {sigma}")))
            }
            _ => {}
        }
        if !(self.beta_u_y.is_finite() && self.beta_u_m.is_finite()) {
            return Err(Error::config(OP, "sensitivity coefficients must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub half_width_sigmas: f64,
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            half_width_sigmas: 5.0,
            points: 201,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmConfig {
    pub burn_in: usize,
    pub window: usize,
    pub max_iter: usize,
    pub tolerance: f64,
    pub grid: GridSpec,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            burn_in: 50,
            window: 50,
            max_iter: 200,
            tolerance: 1e-3,
            grid: GridSpec::default(),
        }
    }
}

/// Nuisance parameters of the complete-data model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theta {
    /// Coefficients on `(1, R, X, C)` in the risk-factor model.
    pub risk: Vec<f64>,
    /// Coefficients on `(1, R, X, M, M*H1, C)` in the outcome model.
    pub outcome: Vec<f64>,
    /// Coefficient of `M x U` (zero unless heterogeneous).
    pub mu: f64,
    pub sigma2: f64,
}

impl Theta {
    fn flatten(&self, heterogeneous: bool) -> Vec<f64> {
        let mut v = self.risk.clone();
        v.extend_from_slice(&self.outcome);
        if heterogeneous {
            v.push(self.mu);
        }
        v.push(self.sigma2);
        v
    }

    fn unflatten(v: &[f64], n_risk: usize, n_out: usize, heterogeneous: bool) -> Theta {
        let mut k = n_risk + n_out;
        let mu = if heterogeneous {
            k += 1;
            v[k - 1]
        } else {
            0.0
        };
        Theta {
            risk: v[..n_risk].to_vec(),
            outcome: v[n_risk..n_risk + n_out].to_vec(),
            mu,
            sigma2: v[k],
        }
    }
}

/// Designs of the complete-data model without the `U` terms.
#[derive(Debug, Clone)]
pub struct SensModel {
    spec: SensitivitySpec,
    risk: Design,
    outcome: Design,
    y: Vec<f64>,
    m: Vec<u8>,
}

impl SensModel {
    pub fn new(ds: &Dataset, spec: &SensitivitySpec) -> Result<Self> {
        spec.validate()?;
        let n = ds.n();
        let r: Vec<f64> = ds.r().iter().map(|&v| v as f64).collect();
        let mf: Vec<f64> = ds.m().iter().map(|&v| v as f64).collect();
        let mut risk = Design::builder(n).intercept().col(ds.r_name(), r.clone());
        let mut out = Design::builder(n).intercept().col(ds.r_name(), r);
        for cov in ds.x() {
            risk = risk.col(cov.name.clone(), cov.values.clone());
            out = out.col(cov.name.clone(), cov.values.clone());
        }
        out = out.col("M", mf.clone());
        for h in ds.h1() {
            let col = ds.column(h).ok_or_else(|| {
                Error::data("sensem::model", format!("effect modifier `{h}` is not a column"))
            })?;
            out = out.col(format!("M:{h}"), mf.iter().zip(col).map(|(a, b)| a * b).collect::<Vec<_>>());
        }
        for cov in ds.c() {
            risk = risk.col(cov.name.clone(), cov.values.clone());
            out = out.col(cov.name.clone(), cov.values.clone());
        }
        Ok(SensModel {
            spec: *spec,
            risk: risk.build()?,
            outcome: out.build()?,
            y: ds.y().to_vec(),
            m: ds.m().to_vec(),
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Names matching the flattened parameter vector.
    pub fn theta_names(&self) -> Vec<String> {
        let mut v: Vec<String> = self.risk.names().iter().map(|s| format!("m~{s}")).collect();
        v.extend(self.outcome.names().iter().map(|s| format!("y~{s}")));
        if self.spec.heterogeneous_u {
            v.push("y~M:U".into());
        }
        v.push("sigma2_y".into());
        v
    }

    /// Log of `f(Y | ., u) P(M | ., u)` up to a unit-specific constant.
    #[inline]
    fn log_lik(&self, i: usize, u: f64, eta_m: f64, mu_y: f64, theta: &Theta) -> f64 {
        let eta = eta_m + self.spec.beta_u_m * u;
        let mean = mu_y + (self.spec.beta_u_y + theta.mu * self.m[i] as f64) * u;
        let resid = self.y[i] - mean;
        let lm = if self.m[i] == 1 { eta - softplus(eta) } else { -softplus(eta) };
        lm - resid * resid / (2.0 * theta.sigma2)
    }

    fn predictors(&self, theta: &Theta) -> (Vec<f64>, Vec<f64>) {
        (
            self.risk.linear_predictor(&theta.risk, None),
            self.outcome.linear_predictor(&theta.outcome, None),
        )
    }

    /// `P(U = 1 | Y, M, R, X, C)` for every unit.
    pub fn posterior_binary(&self, theta: &Theta) -> Result<Vec<f64>> {
        const OP: &str = "sensem::posterior_u_binary";
        let UKind::Binary { pi } = self.spec.u_kind else {
            return Err(Error::config(OP, "U is not binary"));
        };
        let (eta, mu) = self.predictors(theta);
        (0..self.n())
            .map(|i| {
                let l1 = pi.ln() + self.log_lik(i, 1.0, eta[i], mu[i], theta);
                let l0 = (1.0 - pi).ln() + self.log_lik(i, 0.0, eta[i], mu[i], theta);
                let p = 1.0 / (1.0 + (l0 - l1).exp());
                if p.is_finite() {
                    Ok(p)
                } else {
                    Err(Error::estimation(OP, "non-finite posterior (degenerate outcome variance)"))
                }
            })
            .collect()
    }

    fn grid(&self, grid: &GridSpec) -> Result<(Vec<f64>, f64)> {
        const OP: &str = "sensem::posterior_u_continuous";
        let UKind::Continuous { sigma } = self.spec.u_kind else {
            return Err(Error::config(OP, "U is not continuous"));
        };
        if grid.points < 51 || !(grid.half_width_sigmas > 0.0) {
            return Err(Error::config(OP, "grid needs at least 51 points and a positive width"));
        }
        let lo = -grid.half_width_sigmas * sigma;
        let h = 2.0 * grid.half_width_sigmas * sigma / (grid.points - 1) as f64;
        Ok(((0..grid.points).map(|k| lo + h * k as f64).collect(), h))
    }

    fn unit_masses(&self, i: usize, nodes: &[f64], eta: f64, mu: f64, theta: &Theta) -> Result<Vec<f64>> {
        const OP: &str = "sensem::posterior_u_continuous";
        let UKind::Continuous { sigma } = self.spec.u_kind else { unreachable!() };
        let mut lw: Vec<f64> = nodes
            .iter()
            .map(|&u| self.log_lik(i, u, eta, mu, theta) - u * u / (2.0 * sigma * sigma))
            .collect();
        let top = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() {
            return Err(Error::estimation(OP, "non-finite posterior density"));
        }
        let mut total = 0.0;
        for v in lw.iter_mut() {
            *v = (*v - top).exp();
            total += *v;
        }
        lw.iter_mut().for_each(|v| *v /= total);
        if lw[0] >= ENDPOINT_MASS || lw[lw.len() - 1] >= ENDPOINT_MASS {
            return Err(Error::estimation(
                OP,
                format!("posterior mass at a grid endpoint for unit {i}; grid too narrow"),
            ));
        }
        Ok(lw)
    }

    /// Posterior of `U` on an equispaced grid, one mass vector per unit.
    pub fn posterior_continuous(&self, theta: &Theta, grid: &GridSpec) -> Result<GridPosterior> {
        let (nodes, step) = self.grid(grid)?;
        let (eta, mu) = self.predictors(theta);
        let masses = (0..self.n())
            .into_par_iter()
            .map(|i| self.unit_masses(i, &nodes, eta[i], mu[i], theta))
            .collect::<Result<Vec<_>>>()?;
        Ok(GridPosterior { nodes, step, masses })
    }

    /// One draw of the whole `U` vector; unit `i` uses the uniform at `tags ++ [i]`.
    fn draw(&self, theta: &Theta, grid: &GridSpec, master: u64, tags: &[u64]) -> Result<Vec<f64>> {
        let key = |i: usize| {
            let mut t = tags.to_vec();
            t.push(i as u64);
            seed::uniform(master, &t)
        };
        match self.spec.u_kind {
            UKind::Binary { .. } => {
                let p = self.posterior_binary(theta)?;
                Ok((0..self.n()).map(|i| (key(i) < p[i]) as u8 as f64).collect())
            }
            UKind::Continuous { .. } => {
                let (nodes, step) = self.grid(grid)?;
                let (eta, mu) = self.predictors(theta);
                (0..self.n())
                    .into_par_iter()
                    .map(|i| {
                        let w = self.unit_masses(i, &nodes, eta[i], mu[i], theta)?;
                        Ok(sample_grid(&nodes, step, &w, key(i)))
                    })
                    .collect()
            }
        }
    }

    /// Complete-data fits given a `U` vector (or none, for initialization).
    fn m_step(&self, u: Option<&[f64]>) -> Result<Theta> {
        const OP: &str = "sensem::stochastic_em";
        let n = self.n();
        let ones = vec![1.0; n];
        let (risk_off, y_adj, outcome) = match u {
            None => (None, self.y.clone(), None),
            Some(u) => {
                let off: Vec<f64> = u.iter().map(|v| self.spec.beta_u_m * v).collect();
                let y: Vec<f64> = self
                    .y
                    .iter()
                    .zip(u)
                    .map(|(y, v)| y - self.spec.beta_u_y * v)
                    .collect();
                let design = if self.spec.heterogeneous_u {
                    let mu: Vec<f64> = self.m.iter().zip(u).map(|(&m, v)| m as f64 * v).collect();
                    Some(self.outcome.with_column("M:U", &mu)?)
                } else {
                    None
                };
                (Some(off), y, design)
            }
        };
        let risk = glm::fit_logistic(&self.risk, &self.m, &ones, risk_off.as_deref()).map_err(|e| match e {
            Error::Separation { limit, .. } => Error::Separation { op: OP, limit },
            other => other,
        })?;
        let fit = glm::fit_wls(outcome.as_ref().unwrap_or(&self.outcome), &y_adj, &ones, None)?;
        let p = self.outcome.ncols();
        let mu = if fit.coefficients.len() > p { fit.coefficients[p] } else { 0.0 };
        if !(fit.residual_variance > 0.0) {
            return Err(Error::estimation(OP, "outcome residual variance is zero"));
        }
        Ok(Theta {
            risk: risk.coefficients,
            outcome: fit.coefficients[..p].to_vec(),
            mu,
            sigma2: fit.residual_variance,
        })
    }
}

/// Grid masses below this at either endpoint are accepted.
pub const ENDPOINT_MASS: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct GridPosterior {
    pub nodes: Vec<f64>,
    pub step: f64,
    pub masses: Vec<Vec<f64>>,
}

/// Inverse-CDF draw treating each node's mass as uniform over its cell.
pub fn sample_grid(nodes: &[f64], step: f64, masses: &[f64], v: f64) -> f64 {
    let mut acc = 0.0;
    for (k, &w) in masses.iter().enumerate() {
        if v < acc + w || k == masses.len() - 1 {
            let frac = if w > 0.0 { ((v - acc) / w).clamp(0.0, 1.0) } else { 0.5 };
            return nodes[k] + step * (frac - 0.5);
        }
        acc += w;
    }
    unreachable!("masses is nonempty")
}

pub fn posterior_u_binary(ds: &Dataset, theta: &Theta, spec: &SensitivitySpec) -> Result<Vec<f64>> {
    SensModel::new(ds, spec)?.posterior_binary(theta)
}

pub fn posterior_u_continuous(
    ds: &Dataset,
    theta: &Theta,
    spec: &SensitivitySpec,
    grid: &GridSpec,
) -> Result<GridPosterior> {
    SensModel::new(ds, spec)?.posterior_continuous(theta, grid)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmResult {
    pub theta: Theta,
    pub theta_names: Vec<String>,
    /// Flattened parameter vector after every M-step.
    pub trajectory: Vec<Vec<f64>>,
    #[serde(skip)]
    pub u_draws: Vec<Vec<f64>>,
    pub converged: bool,
    pub iterations: usize,
}

impl EmResult {
    pub fn theta_vector(&self) -> Vec<f64> {
        self.theta.flatten(self.theta_names.iter().any(|n| n == "y~M:U"))
    }
}

const TAG_ITER: u64 = 1;
const TAG_FINAL: u64 = 2;

/// Stochastic EM with tail averaging, followed by `s` draws of `U` at the
/// averaged parameters.
pub fn stochastic_em(ds: &Dataset, spec: &SensitivitySpec, s: usize, cfg: &EmConfig, seed: u64) -> Result<EmResult> {
    const OP: &str = "sensem::stochastic_em";
    if s < 2 {
        return Err(Error::config(OP, "at least two U draws are required"));
    }
    if cfg.max_iter < cfg.burn_in + cfg.window || cfg.window == 0 {
        return Err(Error::config(OP, "max_iter must be at least burn_in + window"));
    }
    let model = SensModel::new(ds, spec)?;
    let het = spec.heterogeneous_u;
    let (n_risk, n_out) = (model.risk.ncols(), model.outcome.ncols());
    let mut theta = model.m_step(None)?;
    let mut trajectory = Vec::with_capacity(cfg.max_iter);
    let mut sum = vec![0.0; theta.flatten(het).len()];
    let mut mean_prev: Option<Vec<f64>> = None;
    let mut converged = false;
    let mut iterations = 0;
    for t in 0..cfg.max_iter {
        let u = model.draw(&theta, &cfg.grid, seed, &[TAG_ITER, t as u64])?;
        theta = model.m_step(Some(&u))?;
        let flat = theta.flatten(het);
        iterations = t + 1;
        if t >= cfg.burn_in {
            sum.iter_mut().zip(&flat).for_each(|(a, b)| *a += b);
            let k = (t + 1 - cfg.burn_in) as f64;
            let mean: Vec<f64> = sum.iter().map(|v| v / k).collect();
            if let Some(prev) = &mean_prev {
                let delta = mean.iter().zip(prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                if k as usize >= cfg.window && delta < cfg.tolerance {
                    converged = true;
                }
            }
            mean_prev = Some(mean);
        }
        trajectory.push(flat);
        if converged {
            break;
        }
    }
    let theta_hat = Theta::unflatten(mean_prev.as_deref().expect("max_iter exceeds burn_in"), n_risk, n_out, het);
    let u_draws = (0..s)
        .map(|k| model.draw(&theta_hat, &cfg.grid, seed, &[TAG_FINAL, k as u64]))
        .collect::<Result<Vec<_>>>()?;
    Ok(EmResult {
        theta: theta_hat,
        theta_names: model.theta_names(),
        trajectory,
        u_draws,
        converged,
        iterations,
    })
}

/// Rubin's rule: mean of the draws and `sqrt(W + (1 + 1/S) B)`.
pub fn rubin_combine(estimates: &[f64], variances: &[f64]) -> Result<(f64, f64)> {
    const OP: &str = "sensem::rubin_combine";
    let s = estimates.len();
    if s < 2 || variances.len() != s {
        return Err(Error::config(OP, "need at least two draws with matching variances"));
    }
    let sf = s as f64;
    let point = estimates.iter().sum::<f64>() / sf;
    let within = variances.iter().sum::<f64>() / sf;
    let between = estimates.iter().map(|e| (e - point).powi(2)).sum::<f64>() / (sf - 1.0);
    Ok((point, (within + (1.0 + 1.0 / sf) * between).sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdjustConfig {
    /// Number of `U` draws `S`.
    pub draws: usize,
    /// Bootstrap replicates per draw; 0 skips standard errors.
    pub bootstrap: usize,
    pub em: EmConfig,
    pub otr: OtrConfig,
    pub decompose: DecomposeConfig,
    /// Re-estimate the rule inside each bootstrap replicate.
    pub refit_rule_in_bootstrap: bool,
}

impl Default for AdjustConfig {
    fn default() -> Self {
        AdjustConfig {
            draws: 10,
            bootstrap: 200,
            em: EmConfig::default(),
            otr: OtrConfig::default(),
            decompose: DecomposeConfig::default(),
            refit_rule_in_bootstrap: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityResult {
    pub estimates: DecompositionReport,
    pub per_draw: Vec<DecompositionReport>,
    pub rule_summary: Vec<ComplianceStats>,
    pub spec: SensitivitySpec,
    pub em_converged: bool,
    pub em_iterations: usize,
    pub theta: Vec<f64>,
    pub theta_names: Vec<String>,
    pub draws_failed: usize,
    /// Per-draw recommendations on the analysis sample.
    #[serde(skip)]
    pub recommendations: Vec<Vec<u8>>,
    /// Per-draw rules, fitted with the drawn `U` among the covariates.
    #[serde(skip)]
    pub rules: Vec<DecisionRule>,
}

/// Share of failed draws above which the adjusted analysis is an error.
pub const MAX_FAILED_DRAWS: f64 = 0.2;

/// Append each draw of `U`, refit the rule and the decomposition, and pool
/// across draws.
pub fn adjusted_analysis(
    ds: &Dataset,
    center: &Center,
    spec: &SensitivitySpec,
    cfg: &AdjustConfig,
    seed: u64,
) -> Result<SensitivityResult> {
    const OP: &str = "sensem::adjusted_analysis";
    if ds.column(U_NAME).is_some() {
        return Err(Error::data(OP, format!("dataset already has a `{U_NAME}` column")));
    }
    let em = stochastic_em(ds, spec, cfg.draws, &cfg.em, seed::derive(seed, &[1]))?;
    let (_, c_center) = center_covariates(ds, center)?;
    let explicit = Center::Values(c_center.clone());
    let refit = cfg.refit_rule_in_bootstrap.then_some(&cfg.otr);
    type Draw = (DecompositionReport, ComplianceStats, Vec<u8>, DecisionRule);
    let outcomes: Vec<Option<Draw>> = em
        .u_draws
        .par_iter()
        .enumerate()
        .map(|(k, u)| {
            let run = || -> Result<_> {
                let aug = ds.with_x_column(Covariate::new(U_NAME, u.clone()), spec.heterogeneous_u)?;
                let rule = otr::fit_rule(&aug, &cfg.otr)?;
                let d = otr::apply_rule(&rule, &aug)?;
                let stats = otr::compliance_from(aug.r(), aug.m(), &d, cfg.otr.method.label());
                let boot = (cfg.bootstrap > 0).then(|| BootstrapSpec {
                    replicates: cfg.bootstrap,
                    seed: seed::derive(seed, &[2, k as u64]),
                    refit_rule: refit,
                });
                let report = decompose::decompose(&aug, &rule, &explicit, &cfg.decompose, boot)?;
                Ok((report, stats, d, rule))
            };
            run().ok()
        })
        .collect();
    let ok: Vec<_> = outcomes.into_iter().flatten().collect();
    let failed = cfg.draws - ok.len();
    if failed as f64 > MAX_FAILED_DRAWS * cfg.draws as f64 || ok.len() < 2 {
        return Err(Error::TooManyFailures {
            op: OP,
            failed,
            total: cfg.draws,
            limit_pct: 20,
        });
    }
    let points: Vec<Vec<f64>> = ok.iter().map(|(r, _, _, _)| r.point().to_vec()).collect();
    let mut pooled = vec![0.0; 4];
    let mut se = vec![0.0; 4];
    for j in 0..4 {
        let est: Vec<f64> = points.iter().map(|p| p[j]).collect();
        let var: Vec<f64> = ok
            .iter()
            .map(|(r, _, _, _)| {
                let e = [r.tau, r.zeta_icde, r.delta_iie, r.zeta_iie][j];
                e.se.map_or(0.0, |s| s * s)
            })
            .collect();
        let (p, s) = rubin_combine(&est, &var)?;
        pooled[j] = p;
        se[j] = s;
    }
    let boot_failed = ok.iter().map(|(r, _, _, _)| r.bootstrap_failed).sum();
    let estimates = DecompositionReport::from_parts(
        PointEstimates::from_slice(&pooled),
        (cfg.bootstrap > 0).then_some(se.as_slice()),
        &cfg.decompose,
        c_center,
        cfg.bootstrap,
        boot_failed,
    );
    let theta = em.theta_vector();
    let mut per_draw = Vec::with_capacity(ok.len());
    let mut rule_summary = Vec::with_capacity(ok.len());
    let mut recommendations = Vec::with_capacity(ok.len());
    let mut rules = Vec::with_capacity(ok.len());
    for (r, s, d, rule) in ok {
        per_draw.push(r);
        rule_summary.push(s);
        recommendations.push(d);
        rules.push(rule);
    }
    Ok(SensitivityResult {
        estimates,
        per_draw,
        rule_summary,
        spec: *spec,
        em_converged: em.converged,
        em_iterations: em.iterations,
        theta,
        theta_names: em.theta_names,
        draws_failed: failed,
        recommendations,
        rules,
    })
}

/// One `(b_u^y, b_u^m)` cell of a sensitivity grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub beta_u_y: f64,
    pub beta_u_m: f64,
    pub result: Option<SensitivityResult>,
    pub error: Option<String>,
}

/// Adjusted analysis over a list of sensitivity-coefficient pairs; a
/// failing cell is recorded and the rest still run.
pub fn sensitivity_grid(
    ds: &Dataset,
    center: &Center,
    base: &SensitivitySpec,
    pairs: &[(f64, f64)],
    cfg: &AdjustConfig,
    seed: u64,
) -> Vec<GridCell> {
    pairs
        .par_iter()
        .enumerate()
        .map(|(k, &(by, bm))| {
            let spec = SensitivitySpec {
                beta_u_y: by,
                beta_u_m: bm,
                ..*base
            };
            let res = adjusted_analysis(ds, center, &spec, cfg, seed::derive(seed, &[k as u64]));
            GridCell {
                beta_u_y: by,
                beta_u_m: bm,
                error: res.as_ref().err().map(ToString::to_string),
                result: res.ok(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dataset {
        Dataset::new(
            vec![0.3, -1.2, 2.0, 0.5, 1.1, -0.4],
            vec![1, 0, 1, 1, 0, 0],
            vec![1, 1, 1, 0, 0, 0],
            vec![Covariate::new("x", vec![0.1, -0.3, 0.8, 0.0, 1.5, -1.0])],
            vec![],
            vec![],
            vec![],
        )
        .unwrap()
    }

    fn zero_theta() -> Theta {
        Theta {
            risk: vec![0.0; 3],
            outcome: vec![0.0; 4],
            mu: 0.0,
            sigma2: 1.0,
        }
    }

    #[test]
    fn binary_posterior_examples() {
        let ds = toy();
        let p = posterior_u_binary(&ds, &zero_theta(), &SensitivitySpec::binary(0.0, 0.0)).unwrap();
        assert!(p.iter().all(|&v| (v - 0.5).abs() < 1e-15));
        let p = posterior_u_binary(&ds, &zero_theta(), &SensitivitySpec::binary(0.0, 2f64.ln())).unwrap();
        assert!((p[0] - 4.0 / 7.0).abs() < 1e-12);
        assert!((p[1] - (1.0 / 3.0) / (1.0 / 3.0 + 0.5)).abs() < 1e-12);
    }

    #[test]
    fn continuous_posterior_prior_recovery() {
        let spec = SensitivitySpec {
            u_kind: UKind::Continuous { sigma: 1.3 },
            beta_u_y: 0.0,
            beta_u_m: 0.0,
            heterogeneous_u: false,
        };
        let post = posterior_u_continuous(&toy(), &zero_theta(), &spec, &GridSpec::default()).unwrap();
        let sd = 1.3f64;
        for w in &post.masses {
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            let tv: f64 = post
                .nodes
                .iter()
                .zip(w)
                .map(|(&u, &m)| {
                    let dens = (-u * u / (2.0 * sd * sd)).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt());
                    (m - dens * post.step).abs()
                })
                .sum::<f64>()
                / 2.0;
            assert!(tv < 0.01, "{tv}");
        }
    }

    #[test]
    fn continuous_endpoint_mass_is_error() {
        let spec = SensitivitySpec {
            u_kind: UKind::Continuous { sigma: 1.0 },
            beta_u_y: 0.1,
            beta_u_m: 0.0,
            heterogeneous_u: false,
        };
        // y = 2 with a nearly noiseless outcome puts the posterior mode near u = 20.
        let theta = Theta {
            sigma2: 1e-4,
            ..zero_theta()
        };
        assert!(posterior_u_continuous(&toy(), &theta, &spec, &GridSpec::default()).is_err());
    }

    #[test]
    fn rubin_examples() {
        assert_eq!(rubin_combine(&[0.0, 2.0], &[1.0, 1.0]).unwrap(), (1.0, 2.0));
        let (_, se) = rubin_combine(&[3.0; 4], &[0.25; 4]).unwrap();
        assert!((se - 0.5).abs() < 1e-15);
        assert!(rubin_combine(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn grid_sampler_stays_in_cell() {
        let nodes = [-1.0, 0.0, 1.0];
        let w = [0.25, 0.5, 0.25];
        assert_eq!(sample_grid(&nodes, 1.0, &w, 0.0), -1.5);
        assert_eq!(sample_grid(&nodes, 1.0, &w, 0.5), 0.0);
        assert!(sample_grid(&nodes, 1.0, &w, 0.999_999) < 1.5);
    }

    #[test]
    fn spec_validation() {
        let mut s = SensitivitySpec::binary(1.0, 1.0);
        s.u_kind = UKind::Binary { pi: 1.0 };
        assert!(s.validate().is_err());
        s.u_kind = UKind::Continuous { sigma: 0.0 };
        assert!(s.validate().is_err());
    }
}
