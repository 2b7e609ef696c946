//! Sensitivity coefficients expressed relative to an observed covariate.
//!
//! `k_m` compares the odds ratio of `U` on `M` to that of the benchmark
//! covariate `X_j`; `k_y` compares the coefficient of `U` on `Y` to that of
//! `X_j`, both conditional on `(R, X_-j, C)` and not on `M`. The conversion
//! to `b_u^m` is exact. The conversion to `b_u^y` (which conditions on `M`)
//! is found numerically on a synthetic population built from the fitted
//! models, with `U` independent of `(R, X, C)`.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Center, Dataset};
use crate::error::{Error, Result};
use crate::glm::{self, expit, Design};
use crate::seed;
use crate::sensem::{self, AdjustConfig, SensitivityResult, SensitivitySpec, UKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkUKind {
    Binary,
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationConfig {
    pub population_size: usize,
    pub seed: u64,
    pub tolerance: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            population_size: 100_000,
            seed: 0,
            tolerance: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub covariate: String,
    pub k_m: f64,
    pub k_y: f64,
    pub u_kind: BenchmarkUKind,
    pub calibration: CalibrationConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkFits {
    pub covariate: String,
    /// Logit coefficient of `X_j` on `M` given `(R, X_-j, C)`.
    pub beta_xj_m: f64,
    pub se_xj_m: f64,
    /// Coefficient of `X_j` on `Y` given `(R, X_-j, C)`; `M` is left out.
    pub beta_xj_y: f64,
    pub se_xj_y: f64,
    /// Coefficient of `M` on `Y` given `(R, X, C)`.
    pub beta_m_y: f64,
    /// Residual SD of `X_j` given `(R, X_-j, C)`.
    pub sigma_xj: f64,
    /// Residual SD of `M` given `(R, X)` (linear probability fit).
    pub sigma_m_rx: f64,
}

fn design_rcx(ds: &Dataset, skip: Option<&str>, with_xj_last: bool, extra: &[(&str, &[f64])]) -> Result<Design> {
    let r: Vec<f64> = ds.r().iter().map(|&v| v as f64).collect();
    let mut b = Design::builder(ds.n()).intercept().col(ds.r_name(), r);
    for cov in ds.x().iter().filter(|c| Some(c.name.as_str()) != skip) {
        b = b.col(cov.name.clone(), cov.values.clone());
    }
    if let (true, Some(j)) = (with_xj_last, skip) {
        b = b.col(j, ds.column(j).unwrap().to_vec());
    }
    for cov in ds.c() {
        b = b.col(cov.name.clone(), cov.values.clone());
    }
    for (name, v) in extra {
        b = b.col(*name, v.to_vec());
    }
    b.build()
}

/// Fits of the benchmark covariate on `M` and `Y`.
pub fn fit_benchmarks(ds: &Dataset, covariate: &str) -> Result<BenchmarkFits> {
    const OP: &str = "benchmark::fit_benchmarks";
    let xj = ds
        .x()
        .iter()
        .find(|c| c.name == covariate)
        .ok_or_else(|| Error::config(OP, format!("benchmark covariate `{covariate}` is not an X column")))?
        .values
        .clone();
    let n = ds.n();
    let ones = vec![1.0; n];
    let full = design_rcx(ds, Some(covariate), true, &[])?;
    let j = full.names().iter().position(|s| s == covariate).unwrap();
    let mfit = glm::fit_logistic(&full, ds.m(), &ones, None)?;
    let yfit = glm::fit_wls(&full, ds.y(), &ones, None)?;

    let mf: Vec<f64> = ds.m().iter().map(|&v| v as f64).collect();
    let with_m = design_rcx(ds, None, false, &[("M", &mf)])?;
    let beta_m_y = glm::fit_wls(&with_m, ds.y(), &ones, None)?.coef("M").unwrap();

    let rest = design_rcx(ds, Some(covariate), false, &[])?;
    let sigma_xj = glm::fit_wls(&rest, &xj, &ones, None)?.residual_variance.sqrt();
    if !(sigma_xj > 1e-12) {
        return Err(Error::estimation(OP, format!("`{covariate}` has zero residual variance")));
    }
    let r: Vec<f64> = ds.r().iter().map(|&v| v as f64).collect();
    let mut b = Design::builder(n).intercept().col(ds.r_name(), r);
    for cov in ds.x() {
        b = b.col(cov.name.clone(), cov.values.clone());
    }
    let sigma_m_rx = glm::fit_wls(&b.build()?, &mf, &ones, None)?.residual_variance.sqrt();
    Ok(BenchmarkFits {
        covariate: covariate.to_string(),
        beta_xj_m: mfit.coefficients[j],
        se_xj_m: mfit.std_errors[j],
        beta_xj_y: yfit.coefficients[j],
        se_xj_y: yfit.std_errors[j],
        beta_m_y,
        sigma_xj,
        sigma_m_rx,
    })
}

/// `b_u^m = ln(k_m) + b^m_{x_j}`.
pub fn convert_km(k_m: f64, fits: &BenchmarkFits) -> Result<f64> {
    if !(k_m > 0.0 && k_m.is_finite()) {
        return Err(Error::config("benchmark::convert_km", format!("k_m must be positive, got {k_m}")));
    }
    Ok(k_m.ln() + fits.beta_xj_m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub beta_u_y: f64,
    /// Target `k_y * b^y_{x_j}`.
    pub target: f64,
    /// Coefficient of `U` (without `M`) achieved at `beta_u_y`.
    pub achieved: f64,
    pub evaluations: usize,
    /// Mean change in `P(M = 1)` per unit increase of `U` in the synthetic population.
    pub pi_m_u: f64,
}

/// Synthetic population: resampled `(R, X, C)`, independent `U`, and an
/// outcome built from the fitted models with `M` replaced by its expectation.
struct Population {
    design: Design,
    base_y: Vec<f64>,
    u: Vec<f64>,
    pi_m_u: f64,
}

fn synthetic_population(
    ds: &Dataset,
    fits: &BenchmarkFits,
    u_kind: BenchmarkUKind,
    beta_u_m: f64,
    cfg: &CalibrationConfig,
) -> Result<Population> {
    const OP: &str = "benchmark::calibrate_ky";
    if cfg.population_size < 100_000 {
        return Err(Error::config(OP, "calibration population must have at least 1e5 units"));
    }
    let n = ds.n();
    let ones = vec![1.0; n];
    let base = design_rcx(ds, None, false, &[])?;
    let risk = glm::fit_logistic(&base, ds.m(), &ones, None)?;
    let mf: Vec<f64> = ds.m().iter().map(|&v| v as f64).collect();
    let outcome = glm::fit_wls(&base.with_column("M", &mf)?, ds.y(), &ones, None)?;
    let (gamma, beta_m) = (&outcome.coefficients[..base.ncols()], outcome.coefficients[base.ncols()]);

    let mut rng = seed::rng(cfg.seed, &[]);
    let normal = Normal::new(0.0, fits.sigma_xj).map_err(|e| Error::estimation(OP, e.to_string()))?;
    let big_n = cfg.population_size;
    let mut rows = Vec::with_capacity(big_n * (base.ncols() + 1));
    let mut base_y = Vec::with_capacity(big_n);
    let mut u = Vec::with_capacity(big_n);
    let mut dp = 0.0;
    for _ in 0..big_n {
        let i = rng.gen_range(0..n);
        let ui = match u_kind {
            BenchmarkUKind::Continuous => normal.sample(&mut rng),
            BenchmarkUKind::Binary => (rng.gen::<f64>() < 0.5) as u8 as f64,
        };
        let row = base.row(i);
        let eta: f64 = row.iter().zip(&risk.coefficients).map(|(a, b)| a * b).sum();
        let em = expit(eta + beta_u_m * ui);
        dp += expit(eta + beta_u_m * (ui + 1.0)) - em;
        let lin: f64 = row.iter().zip(gamma).map(|(a, b)| a * b).sum();
        base_y.push(lin + beta_m * em);
        rows.extend_from_slice(row);
        rows.push(ui);
        u.push(ui);
    }
    let mut names = base.names().to_vec();
    names.push("U".into());
    Ok(Population {
        design: Design::from_rows(names, big_n, rows)?,
        base_y,
        u,
        pi_m_u: dp / big_n as f64,
    })
}

/// `b_u^y` such that the coefficient of `U` on `Y` given `(R, X, C)` equals
/// `k_y * b^y_{x_j}` in the synthetic population; solved by bisection.
pub fn calibrate_ky(ds: &Dataset, spec: &BenchmarkSpec, fits: &BenchmarkFits, beta_u_m: f64) -> Result<Calibration> {
    const OP: &str = "benchmark::calibrate_ky";
    let pop = synthetic_population(ds, fits, spec.u_kind, beta_u_m, &spec.calibration)?;
    let ones = vec![1.0; pop.u.len()];
    let p = pop.design.ncols();
    let coef_u = |b: f64| -> Result<f64> {
        let y: Vec<f64> = pop.base_y.iter().zip(&pop.u).map(|(a, u)| a + b * u).collect();
        Ok(glm::fit_wls(&pop.design, &y, &ones, None)?.coefficients[p - 1])
    };
    let target = spec.k_y * fits.beta_xj_y;
    let scale = if target != 0.0 { target.abs() } else { fits.beta_xj_y.abs().max(1.0) };
    let tol = spec.calibration.tolerance;
    let width = 10.0 * fits.beta_xj_y.abs() + 10.0;
    let (mut lo, mut hi) = (-width, width);
    let (mut flo, fhi) = (coef_u(lo)? - target, coef_u(hi)? - target);
    if flo.signum() == fhi.signum() {
        return Err(Error::estimation(
            OP,
            format!("no sign change on [{lo}, {hi}]: residuals {flo:.4} and {fhi:.4}"),
        ));
    }
    let mut evaluations = 2;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = coef_u(mid)? - target;
        evaluations += 1;
        if (fm / scale).abs() < tol {
            return Ok(Calibration {
                beta_u_y: mid,
                target,
                achieved: fm + target,
                evaluations,
                pi_m_u: pop.pi_m_u,
            });
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Err(Error::estimation(OP, "tolerance not reached at this population size"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkCell {
    pub k_m: f64,
    pub k_y: f64,
    pub beta_u_m: Option<f64>,
    pub beta_u_y: Option<f64>,
    pub calibration: Option<Calibration>,
    pub result: Option<SensitivityResult>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTable {
    pub fits: BenchmarkFits,
    pub u_kind: BenchmarkUKind,
    pub cells: Vec<BenchmarkCell>,
}

/// Convert, calibrate and run the adjusted analysis for every `(k_m, k_y)`
/// cell. Failing cells are recorded; the others still run.
#[allow(clippy::too_many_arguments)]
pub fn benchmark_table(
    ds: &Dataset,
    center: &Center,
    covariate: &str,
    grid: &[(f64, f64)],
    u_kind: BenchmarkUKind,
    calibration: &CalibrationConfig,
    adjust: &AdjustConfig,
    seed: u64,
) -> Result<BenchmarkTable> {
    let fits = fit_benchmarks(ds, covariate)?;
    let cells = grid
        .par_iter()
        .enumerate()
        .map(|(k, &(k_m, k_y))| {
            let mut cell = BenchmarkCell {
                k_m,
                k_y,
                beta_u_m: None,
                beta_u_y: None,
                calibration: None,
                result: None,
                error: None,
            };
            let run = |cell: &mut BenchmarkCell| -> Result<()> {
                let bm = convert_km(k_m, &fits)?;
                cell.beta_u_m = Some(bm);
                let spec = BenchmarkSpec {
                    covariate: covariate.to_string(),
                    k_m,
                    k_y,
                    u_kind,
                    calibration: CalibrationConfig {
                        seed: seed::derive(calibration.seed, &[k as u64]),
                        ..*calibration
                    },
                };
                let cal = calibrate_ky(ds, &spec, &fits, bm)?;
                cell.beta_u_y = Some(cal.beta_u_y);
                cell.calibration = Some(cal.clone());
                let sens = SensitivitySpec {
                    u_kind: match u_kind {
                        BenchmarkUKind::Binary => UKind::Binary { pi: 0.5 },
                        BenchmarkUKind::Continuous => UKind::Continuous { sigma: fits.sigma_xj },
                    },
                    beta_u_y: cal.beta_u_y,
                    beta_u_m: bm,
                    heterogeneous_u: false,
                };
                cell.result = Some(sensem::adjusted_analysis(
                    ds,
                    center,
                    &sens,
                    adjust,
                    seed::derive(seed, &[k as u64]),
                )?);
                Ok(())
            };
            if let Err(e) = run(&mut cell) {
                cell.error = Some(e.to_string());
            }
            cell
        })
        .collect();
    Ok(BenchmarkTable { fits, u_kind, cells })
}
