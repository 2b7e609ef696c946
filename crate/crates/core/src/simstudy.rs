//! Simulation study: a synthetic population with a binary omitted
//! confounder, population-level truths, and repeated-subsample metrics for
//! the unadjusted and `U`-adjusted pipelines.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Center, Covariate, Dataset};
use crate::decompose::{self, BootstrapSpec, DecomposeConfig, PointEstimates};
use crate::error::{Error, Result};
use crate::glm::{self, expit, Design};
use crate::otr::{self, OtrConfig};
use crate::seed;
use crate::rule::DecisionRule;
use crate::sensem::{self, AdjustConfig, EmConfig, SensitivitySpec, U_NAME};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DgpMode {
    /// `U` shifts `Y` and `M` but not the optimal rule.
    Constant,
    /// The optimal rule depends on `U`.
    Heterogeneous,
}

impl DgpMode {
    pub fn label(self) -> &'static str {
        match self {
            DgpMode::Constant => "constant",
            DgpMode::Heterogeneous => "heterogeneous",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DgpConfig {
    pub mode: DgpMode,
    /// `(b_u^y, b_u^m)`.
    pub sp: (f64, f64),
    pub population_size: usize,
    pub seed: u64,
    /// Coefficient of the `(M - M_opt)^2` penalty in `Y`; `b_u^m` when unset.
    #[serde(default)]
    pub penalty: Option<f64>,
}

impl DgpConfig {
    pub fn new(mode: DgpMode, sp: (f64, f64), seed: u64) -> Self {
        DgpConfig {
            mode,
            sp,
            population_size: 1_000_000,
            seed,
            penalty: None,
        }
    }

    pub fn penalty(&self) -> f64 {
        self.penalty.unwrap_or(self.sp.1)
    }

    pub fn validate(&self) -> Result<()> {
        const OP: &str = "simstudy::dgp";
        if self.population_size < 10_000 {
            return Err(Error::config(OP, "population_size must be at least 1e4"));
        }
        if !(self.sp.0.is_finite() && self.sp.1.is_finite() && self.penalty().is_finite()) {
            return Err(Error::config(OP, "sensitivity parameters must be finite"));
        }
        Ok(())
    }
}

/// Generated population with the oracle columns kept apart from the data.
#[derive(Debug, Clone)]
pub struct Population {
    pub config: DgpConfig,
    /// Observed columns: `Y, M, R`, `X = (X1, X2, X3)`, `C`.
    pub data: Dataset,
    pub u: Vec<f64>,
    pub m_opt: Vec<u8>,
}

const CHUNK: usize = 1 << 14;

/// Draw the population. Units are generated in fixed-size chunks, each
/// from its own seed substream.
pub fn generate_population(cfg: &DgpConfig) -> Result<Population> {
    cfg.validate()?;
    let (by, bm) = cfg.sp;
    let pen = cfg.penalty();
    let n = cfg.population_size;
    let chunks: Vec<Vec<[f64; 9]>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|k| {
            let mut rng = seed::rng(cfg.seed, &[k as u64]);
            let len = CHUNK.min(n - k * CHUNK);
            (0..len)
                .map(|_| {
                    let c = (rng.gen::<f64>() < 0.4) as u8 as f64;
                    let r = (rng.gen::<f64>() < expit(1.0 - 0.5 * c)) as u8 as f64;
                    let u = (rng.gen::<f64>() < 0.5) as u8 as f64;
                    let e: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
                    let x1 = -0.8 + r + 1.5 * c + e[0];
                    let x2 = 0.5 + 0.5 * r + 0.5 * c + e[1];
                    let x3 = -0.8 - r + 0.5 * c + e[2];
                    let m_opt = match cfg.mode {
                        DgpMode::Constant => x1 > 0.1 && x2 > 0.1,
                        DgpMode::Heterogeneous => x1 > 0.1 && u > 0.5,
                    } as u8 as f64;
                    let p = expit(0.5 - 0.5 * r + 0.2 * x1 + 0.5 * c + bm * u);
                    let m = (rng.gen::<f64>() < p) as u8 as f64;
                    let y = 0.5 - 0.5 * r + 0.25 * x1 + 0.25 * x2 - 0.25 * x3 - pen * (m - m_opt).powi(2)
                        + 0.25 * c
                        + by * u
                        + e[3];
                    [y, m, r, x1, x2, x3, c, u, m_opt]
                })
                .collect()
        })
        .collect();
    let rows: Vec<[f64; 9]> = chunks.into_iter().flatten().collect();
    let col = |j: usize| rows.iter().map(|r| r[j]).collect::<Vec<f64>>();
    let bin = |j: usize| rows.iter().map(|r| r[j] as u8).collect::<Vec<u8>>();
    let h1 = match cfg.mode {
        DgpMode::Constant => vec!["X1".to_string(), "X2".to_string()],
        DgpMode::Heterogeneous => vec!["X1".to_string()],
    };
    let data = Dataset::new(
        col(0),
        bin(1),
        bin(2),
        vec![
            Covariate::new("X1", col(3)),
            Covariate::new("X2", col(4)),
            Covariate::new("X3", col(5)),
        ],
        vec![Covariate::new("C", col(6))],
        h1,
        vec![],
    )?
    .with_role_names("Y", "M", "R");
    Ok(Population {
        config: *cfg,
        data,
        u: col(7),
        m_opt: bin(8),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub tau: f64,
    pub zeta_icde: f64,
    pub delta_iie: f64,
    pub zeta_iie: f64,
    /// Mean outcome when everyone follows the optimal rule.
    pub value_opt: f64,
    /// Reference-group rate of following the optimal rule.
    pub reference_compliance: f64,
}

impl Truth {
    pub fn as_array(&self) -> [f64; 4] {
        [self.tau, self.zeta_icde, self.delta_iie, self.zeta_iie]
    }
}

/// Population truths. Counterfactual outcomes reuse each unit's own noise:
/// `Y(M_opt)` removes the penalty term, and `Y(1 - M_opt)` adds it back.
/// The interventional outcome for the comparison group is the expected
/// value under compliance drawn at the reference-group rate.
pub fn true_estimands(pop: &Population) -> Result<Truth> {
    let ds = &pop.data;
    let bm = pop.config.penalty();
    let n = ds.n();
    let y_opt: Vec<f64> = (0..n)
        .map(|i| {
            let miss = (ds.m()[i] != pop.m_opt[i]) as u8 as f64;
            ds.y()[i] + bm * miss
        })
        .collect();
    let (mut follow0, mut n0) = (0.0, 0.0);
    for i in (0..n).filter(|&i| ds.r()[i] == 0) {
        follow0 += (ds.m()[i] == pop.m_opt[i]) as u8 as f64;
        n0 += 1.0;
    }
    let pi0 = follow0 / n0;
    let c = &ds.c()[0].values;
    let c_bar = c.iter().sum::<f64>() / n as f64;
    let cc: Vec<f64> = c.iter().map(|v| v - c_bar).collect();
    let r: Vec<f64> = ds.r().iter().map(|&v| v as f64).collect();
    let ones = vec![1.0; n];
    let pooled = Design::builder(n).intercept().col("R", r).col("C", cc.clone()).build()?;
    let tau = glm::fit_wls(&pooled, ds.y(), &ones, None)?.coefficients[1];
    let zeta_icde = glm::fit_wls(&pooled, &y_opt, &ones, None)?.coefficients[1];

    let comparison: Vec<usize> = (0..n).filter(|&i| ds.r()[i] == 1).collect();
    let gap: Vec<f64> = comparison
        .iter()
        .map(|&i| ds.y()[i] - (y_opt[i] - (1.0 - pi0) * bm))
        .collect();
    let d1 = Design::builder(comparison.len())
        .intercept()
        .col("C", comparison.iter().map(|&i| cc[i]).collect::<Vec<_>>())
        .build()?;
    let delta_iie = glm::fit_wls(&d1, &gap, &vec![1.0; comparison.len()], None)?.coefficients[0];
    Ok(Truth {
        tau,
        zeta_icde,
        delta_iie,
        zeta_iie: tau - delta_iie,
        value_opt: y_opt.iter().sum::<f64>() / n as f64,
        reference_compliance: pi0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub n_grid: Vec<usize>,
    pub iterations: usize,
    /// Which pipelines to run: `false` = unadjusted, `true` = adjusted.
    pub adjust: Vec<bool>,
    pub otr: OtrConfig,
    pub decompose: DecomposeConfig,
    pub draws: usize,
    /// Bootstrap replicates for standard errors; 0 skips coverage.
    pub bootstrap: usize,
    pub em: EmConfig,
    /// Re-estimate the rule inside each bootstrap replicate, so standard
    /// errors carry rule-estimation variability.
    pub refit_rule: bool,
    /// Score accuracy on an independent population subsample of this size
    /// instead of the analysis sample. Adjusted rules see the true `U`.
    pub evaluation_size: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n_grid: vec![500, 1000, 2000],
            iterations: 100,
            adjust: vec![false, true],
            otr: OtrConfig::default(),
            decompose: DecomposeConfig::default(),
            draws: 10,
            bootstrap: 200,
            em: EmConfig::default(),
            refit_rule: false,
            evaluation_size: None,
        }
    }
}

/// One replication of one pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub iteration: usize,
    pub accuracy: f64,
    pub estimates: [f64; 4],
    pub se: Option<[f64; 4]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub mean: f64,
}

/// Type-7 (linear interpolation) quantile.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = q * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        Summary {
            median: quantile(values, 0.5),
            q25: quantile(values, 0.25),
            q75: quantile(values, 0.75),
            mean: values.iter().sum::<f64>() / values.len() as f64,
        }
    }
}

/// Two-sided 97.5% normal quantile.
pub const Z_975: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub mode: DgpMode,
    pub sp: (f64, f64),
    pub n: usize,
    pub adjusted: bool,
    pub completed: usize,
    pub failed: usize,
    pub accuracy: Summary,
    /// Bias summaries in the order `tau, zeta_icde, delta_iie, zeta_iie`.
    pub bias: [Summary; 4],
    /// Share of normal 95% intervals covering the truth, same order.
    pub coverage: Option<[f64; 4]>,
    pub replications: Vec<Replication>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub truth: Truth,
    pub cells: Vec<CellMetrics>,
}

impl MetricsTable {
    pub fn cell(&self, n: usize, adjusted: bool) -> Option<&CellMetrics> {
        self.cells.iter().find(|c| c.n == n && c.adjusted == adjusted)
    }
}

const EVAL_TAG: u64 = 0xE7A1;

/// Share of failed replications above which a cell is an error.
pub const MAX_FAILED_ITERATIONS: f64 = 0.1;

fn accuracy(d: &[u8], truth: &[u8]) -> f64 {
    d.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / d.len() as f64
}

/// Rows and true optimal treatments on which a rule is scored.
struct Evaluation {
    data: Dataset,
    u: Vec<f64>,
    m_opt: Vec<u8>,
}

fn score(rule: &DecisionRule, eval: &Evaluation, with_u: Option<bool>) -> Result<f64> {
    let d = match with_u {
        Some(modifier) => {
            let aug = eval.data.with_x_column(Covariate::new(U_NAME, eval.u.clone()), modifier)?;
            otr::apply_rule(rule, &aug)?
        }
        None => otr::apply_rule(rule, &eval.data)?,
    };
    Ok(accuracy(&d, &eval.m_opt))
}

#[allow(clippy::too_many_arguments)]
fn replicate(
    sample: &Dataset,
    m_opt: &[u8],
    eval: Option<&Evaluation>,
    mode: DgpMode,
    sp: (f64, f64),
    adjusted: bool,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<(f64, PointEstimates, Option<[f64; 4]>)> {
    if adjusted {
        let spec = SensitivitySpec {
            heterogeneous_u: mode == DgpMode::Heterogeneous,
            ..SensitivitySpec::binary(sp.0, sp.1)
        };
        let adjust = AdjustConfig {
            draws: cfg.draws,
            bootstrap: cfg.bootstrap,
            em: cfg.em,
            otr: cfg.otr.clone(),
            decompose: cfg.decompose.clone(),
            refit_rule_in_bootstrap: cfg.refit_rule,
        };
        let res = sensem::adjusted_analysis(sample, &Center::Mean, &spec, &adjust, seed)?;
        let acc = match eval {
            Some(ev) => {
                let scores = res
                    .rules
                    .iter()
                    .map(|r| score(r, ev, Some(spec.heterogeneous_u)))
                    .collect::<Result<Vec<f64>>>()?;
                scores.iter().sum::<f64>() / scores.len() as f64
            }
            None => {
                res.recommendations.iter().map(|d| accuracy(d, m_opt)).sum::<f64>() / res.recommendations.len() as f64
            }
        };
        let e = &res.estimates;
        let se = [e.tau.se, e.zeta_icde.se, e.delta_iie.se, e.zeta_iie.se];
        Ok((acc, e.point(), se.iter().all(Option::is_some).then(|| se.map(Option::unwrap))))
    } else {
        let rule = otr::fit_rule(sample, &cfg.otr)?;
        let acc = match eval {
            Some(ev) => score(&rule, ev, None)?,
            None => accuracy(&otr::apply_rule(&rule, sample)?, m_opt),
        };
        let boot = (cfg.bootstrap > 0).then_some(BootstrapSpec {
            replicates: cfg.bootstrap,
            seed,
            refit_rule: cfg.refit_rule.then_some(&cfg.otr),
        });
        let rep = decompose::decompose(sample, &rule, &Center::Mean, &cfg.decompose, boot)?;
        let se = [rep.tau.se, rep.zeta_icde.se, rep.delta_iie.se, rep.zeta_iie.se];
        Ok((acc, rep.point(), se.iter().all(Option::is_some).then(|| se.map(Option::unwrap))))
    }
}

/// Repeated subsampling over `n_grid x adjust`. Subsample `i` at size `n`
/// is shared by the unadjusted and adjusted pipelines.
pub fn run_experiment(pop: &Population, truth: &Truth, cfg: &ExperimentConfig, seed: u64) -> Result<MetricsTable> {
    const OP: &str = "simstudy::run_experiment";
    if cfg.iterations < 10 {
        return Err(Error::config(OP, "at least 10 iterations are required"));
    }
    let big_n = pop.data.n();
    let mut cells = Vec::new();
    for &n in &cfg.n_grid {
        if cfg.evaluation_size.is_some_and(|e| e > big_n || e == 0) {
            return Err(Error::config(OP, "evaluation_size must lie in [1, population size]"));
        }
        if n > big_n || n < 20 {
            return Err(Error::config(OP, format!("sample size {n} outside [20, population size]")));
        }
        for &adjusted in &cfg.adjust {
            let reps: Vec<Option<Replication>> = (0..cfg.iterations)
                .into_par_iter()
                .map(|it| {
                    let mut rng = seed::rng(seed, &[n as u64, it as u64]);
                    let mut idx = sample(&mut rng, big_n, n).into_vec();
                    idx.sort_unstable();
                    let ds = pop.data.select(&idx).ok()?;
                    let m_opt: Vec<u8> = idx.iter().map(|&i| pop.m_opt[i]).collect();
                    let eval = match cfg.evaluation_size {
                        Some(size) => {
                            let mut rng = seed::rng(seed, &[n as u64, it as u64, EVAL_TAG]);
                            let mut idx = sample(&mut rng, big_n, size).into_vec();
                            idx.sort_unstable();
                            Some(Evaluation {
                                data: pop.data.select(&idx).ok()?,
                                u: idx.iter().map(|&i| pop.u[i]).collect(),
                                m_opt: idx.iter().map(|&i| pop.m_opt[i]).collect(),
                            })
                        }
                        None => None,
                    };
                    let sub_seed = seed::derive(seed, &[n as u64, it as u64, adjusted as u64]);
                    let (acc, est, se) = replicate(
                        &ds,
                        &m_opt,
                        eval.as_ref(),
                        pop.config.mode,
                        pop.config.sp,
                        adjusted,
                        cfg,
                        sub_seed,
                    )
                    .ok()?;
                    Some(Replication {
                        iteration: it,
                        accuracy: acc,
                        estimates: est.to_vec().try_into().unwrap(),
                        se,
                    })
                })
                .collect();
            let ok: Vec<Replication> = reps.into_iter().flatten().collect();
            let failed = cfg.iterations - ok.len();
            if failed as f64 > MAX_FAILED_ITERATIONS * cfg.iterations as f64 {
                return Err(Error::TooManyFailures {
                    op: OP,
                    failed,
                    total: cfg.iterations,
                    limit_pct: 10,
                });
            }
            let t = truth.as_array();
            let acc: Vec<f64> = ok.iter().map(|r| r.accuracy).collect();
            let bias = std::array::from_fn(|j| {
                Summary::of(&ok.iter().map(|r| r.estimates[j] - t[j]).collect::<Vec<_>>())
            });
            let coverage = ok.iter().all(|r| r.se.is_some()).then(|| {
                std::array::from_fn(|j| {
                    ok.iter()
                        .filter(|r| (r.estimates[j] - t[j]).abs() <= Z_975 * r.se.unwrap()[j])
                        .count() as f64
                        / ok.len() as f64
                })
            });
            cells.push(CellMetrics {
                mode: pop.config.mode,
                sp: pop.config.sp,
                n,
                adjusted,
                completed: ok.len(),
                failed,
                accuracy: Summary::of(&acc),
                bias,
                coverage,
                replications: ok,
            });
        }
    }
    Ok(MetricsTable { truth: *truth, cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(mode: DgpMode, sp: (f64, f64)) -> Population {
        generate_population(&DgpConfig {
            mode,
            sp,
            population_size: 20_000,
            seed: 3,
            penalty: None,
        })
        .unwrap()
    }

    #[test]
    fn population_is_deterministic() {
        let a = small(DgpMode::Constant, (1.0, 1.0));
        let b = small(DgpMode::Constant, (1.0, 1.0));
        assert_eq!(a.data, b.data);
        assert_eq!(a.u, b.u);
    }

    #[test]
    fn null_penalty_gives_equal_icde_truth() {
        let t = true_estimands(&small(DgpMode::Constant, (0.0, 0.0))).unwrap();
        assert!((t.zeta_icde - t.tau).abs() < 1e-12);
        assert!(t.delta_iie.abs() < 1e-12);
    }

    #[test]
    fn true_rule_accuracy_is_one() {
        let p = small(DgpMode::Heterogeneous, (1.0, 1.0));
        assert_eq!(accuracy(&p.m_opt, &p.m_opt), 1.0);
    }

    #[test]
    fn quantiles() {
        let v = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert_eq!(quantile(&v, 0.25), 1.75);
    }

    #[test]
    fn tiny_config_rejected() {
        let cfg = DgpConfig {
            population_size: 10,
            ..DgpConfig::new(DgpMode::Constant, (1.0, 1.0), 0)
        };
        assert!(generate_population(&cfg).is_err());
    }
}
