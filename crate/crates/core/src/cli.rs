//! Command-line front end: config parsing, command dispatch and report files.
//!
//! Exit codes: 0 on success, 1 for invalid configuration, 2 for data or
//! estimation errors.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::benchmark::{self, BenchmarkUKind, CalibrationConfig};
use crate::dataset::{load_dataset, Center, Dataset, RoleMap};
use crate::decompose::{self, AmMean, BootstrapSpec, DecomposeConfig, IieEstimator};
use crate::error::{Error, Result};
use crate::otr::{self, OtrConfig, OtrMethod};
use crate::report;
use crate::seed;
use crate::sensem::{self, AdjustConfig, EmConfig, SensitivitySpec, UKind};
use crate::simstudy::{self, DgpConfig, DgpMode, ExperimentConfig};

#[derive(Debug, Parser)]
#[command(name = "otr-decomp", version, about = "Optimal treatment regimes and disparity decomposition")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Master seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Estimate decision rules and recommendation/compliance rates.
    Otr,
    /// Initial disparity, ICDE and IIE estimates.
    Decompose,
    /// Adjusted analysis over a grid of sensitivity coefficients.
    Sensitivity,
    /// Adjusted analysis over benchmark strength ratios.
    Benchmark,
    /// Simulation study.
    Simstudy,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Otr => "otr",
            Command::Decompose => "decompose",
            Command::Sensitivity => "sensitivity",
            Command::Benchmark => "benchmark",
            Command::Simstudy => "simstudy",
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub data: Option<DataSection>,
    pub roles: Option<RoleMap>,
    #[serde(default)]
    pub center: CenterSection,
    /// Absent means each command's default rule settings.
    pub otr: Option<OtrSection>,
    #[serde(default)]
    pub decompose: DecomposeSection,
    #[serde(default)]
    pub sensitivity: SensitivitySection,
    #[serde(default)]
    pub benchmark: BenchmarkSection,
    #[serde(default)]
    pub simstudy: SimstudySection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// CSV path, relative to the config file.
    pub path: PathBuf,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CenterSection {
    /// Explicit centers for the `C` columns; column means when absent.
    pub values: Option<Vec<f64>>,
}

impl CenterSection {
    fn center(&self) -> Center {
        self.values.clone().map_or(Center::Mean, Center::Values)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OtrSection {
    pub method: OtrMethod,
    pub stratify: bool,
    pub max_depth: usize,
    pub min_leaf_fraction: f64,
    /// Methods reported by the `otr` command; defaults to both when `H1` is set.
    pub compare: Option<Vec<OtrMethod>>,
}

impl Default for OtrSection {
    fn default() -> Self {
        let d = OtrConfig::default();
        OtrSection {
            method: d.method,
            stratify: d.stratify,
            max_depth: d.max_depth,
            min_leaf_fraction: d.min_leaf_fraction,
            compare: None,
        }
    }
}

impl OtrSection {
    fn config(&self, method: OtrMethod) -> OtrConfig {
        OtrConfig {
            method,
            stratify: self.stratify,
            max_depth: self.max_depth,
            min_leaf_fraction: self.min_leaf_fraction,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecomposeSection {
    pub iie_estimator: IieEstimator,
    pub interaction: bool,
    pub truncation: Option<(f64, f64)>,
    pub am_mean: AmMean,
    pub bootstrap: usize,
    pub refit_rule: bool,
}

impl Default for DecomposeSection {
    fn default() -> Self {
        let d = DecomposeConfig::default();
        DecomposeSection {
            iie_estimator: d.iie_estimator,
            interaction: d.interaction,
            truncation: d.truncation,
            am_mean: d.am_mean,
            bootstrap: 200,
            refit_rule: false,
        }
    }
}

impl DecomposeSection {
    fn config(&self) -> DecomposeConfig {
        DecomposeConfig {
            iie_estimator: self.iie_estimator,
            interaction: self.interaction,
            truncation: self.truncation,
            am_mean: self.am_mean,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensitivitySection {
    pub u_kind: UKind,
    pub heterogeneous_u: bool,
    /// `(beta_u_y, beta_u_m)` pairs.
    pub grid: Vec<(f64, f64)>,
    pub draws: usize,
    pub bootstrap: usize,
    pub em: EmConfig,
}

impl Default for SensitivitySection {
    fn default() -> Self {
        SensitivitySection {
            u_kind: UKind::Binary { pi: 0.5 },
            heterogeneous_u: false,
            grid: vec![],
            draws: 10,
            bootstrap: 200,
            em: EmConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchmarkSection {
    pub covariate: Option<String>,
    /// `(k_m, k_y)` pairs.
    pub grid: Vec<(f64, f64)>,
    pub u_kind: BenchmarkUKind,
    pub population_size: usize,
    pub tolerance: f64,
}

impl Default for BenchmarkSection {
    fn default() -> Self {
        let c = CalibrationConfig::default();
        BenchmarkSection {
            covariate: None,
            grid: vec![],
            u_kind: BenchmarkUKind::Continuous,
            population_size: c.population_size,
            tolerance: c.tolerance,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimstudySection {
    pub modes: Vec<DgpMode>,
    /// `(beta_u_y, beta_u_m)` pairs.
    pub sp: Vec<(f64, f64)>,
    pub population_size: usize,
    /// Penalty coefficient on `(M - M_opt)^2`; `b_u^m` when unset.
    pub penalty: Option<f64>,
    pub n_grid: Vec<usize>,
    pub iterations: usize,
    pub adjust: Vec<bool>,
    pub draws: usize,
    pub bootstrap: usize,
    /// Score accuracy on a fresh population subsample of this size.
    pub evaluation_size: Option<usize>,
}

impl Default for SimstudySection {
    fn default() -> Self {
        let e = ExperimentConfig::default();
        SimstudySection {
            modes: vec![DgpMode::Constant, DgpMode::Heterogeneous],
            sp: vec![(0.5, 0.5), (1.0, 1.0), (1.5, 1.5)],
            population_size: 1_000_000,
            penalty: None,
            n_grid: e.n_grid,
            iterations: e.iterations,
            adjust: e.adjust,
            draws: e.draws,
            bootstrap: e.bootstrap,
            evaluation_size: None,
        }
    }
}

/// Rule settings used by the simulation study when `[otr]` is not given:
/// pooled depth-2 trees.
pub fn simstudy_otr_default() -> OtrConfig {
    OtrConfig {
        method: OtrMethod::Weighting,
        stratify: false,
        max_depth: 2,
        min_leaf_fraction: 0.01,
    }
}

const OP: &str = "cli::run";

/// Parse a TOML config string.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    toml::from_str(text).map_err(|e| Error::config(OP, e.to_string()))
}

/// A file to be written into the output directory.
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

fn artifact(name: impl Into<String>, contents: String) -> Artifact {
    Artifact {
        name: name.into(),
        contents,
    }
}

fn json_string(v: &impl Serialize) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::io(OP, e))?;
    s.push('\n');
    Ok(s)
}

/// Write `contents` to `dir/name` through a temporary file and a rename.
pub fn write_atomic(dir: &Path, name: &str, contents: &[u8]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io("cli::write", e))?;
    let tmp = dir.join(format!(".{name}.tmp"));
    std::fs::write(&tmp, contents).map_err(|e| Error::io("cli::write", e))?;
    std::fs::rename(&tmp, dir.join(name)).map_err(|e| Error::io("cli::write", e))
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn load(cfg: &RunConfig, base: &Path) -> Result<Dataset> {
    let data = cfg
        .data
        .as_ref()
        .ok_or_else(|| Error::config(OP, "missing [data] section"))?;
    let roles = cfg
        .roles
        .as_ref()
        .ok_or_else(|| Error::config(OP, "missing [roles] section"))?;
    let path = if data.path.is_absolute() {
        data.path.clone()
    } else {
        base.join(&data.path)
    };
    if !path.exists() {
        return Err(Error::config(OP, format!("data file {} does not exist", path.display())));
    }
    load_dataset(&path, roles)
}

/// Run one command and return the artifacts (manifest excluded).
pub fn execute(command: Command, cfg: &RunConfig, base: &Path, seed: u64) -> Result<Vec<Artifact>> {
    match command {
        Command::Otr => run_otr(cfg, base),
        Command::Decompose => run_decompose(cfg, base, seed),
        Command::Sensitivity => run_sensitivity(cfg, base, seed),
        Command::Benchmark => run_benchmark(cfg, base, seed),
        Command::Simstudy => run_simstudy(cfg, seed),
    }
}

impl RunConfig {
    fn otr_section(&self) -> OtrSection {
        self.otr.clone().unwrap_or_default()
    }
}

fn run_otr(cfg: &RunConfig, base: &Path) -> Result<Vec<Artifact>> {
    let ds = load(cfg, base)?;
    let o = cfg.otr_section();
    let methods = o.compare.clone().unwrap_or_else(|| {
        if ds.h1().is_empty() {
            vec![o.method]
        } else {
            vec![OtrMethod::Qlearning, OtrMethod::Weighting]
        }
    });
    let propensity = otr::fit_propensity(&ds, o.stratify)?;
    let mut stats = Vec::new();
    let mut rules = Vec::new();
    let mut recs = Vec::new();
    for &m in &methods {
        let rule = otr::fit_rule(&ds, &o.config(m))?;
        let d = otr::apply_rule(&rule, &ds)?;
        let s = otr::compliance_stats(&ds, &rule, m.label())?;
        let value = otr::estimate_value(&ds, &rule, &propensity)?;
        rules.push(json!({
            "method": m.label(),
            "rule": rule,
            "description": rule.models.iter().map(|r| r.describe()).collect::<Vec<_>>(),
            "value": value,
            "compliance": s,
        }));
        stats.push(s);
        recs.push(d);
    }
    let mut tsv = String::from("row\tr\tm");
    for m in &methods {
        tsv.push_str(&format!("\td_{}", m.label()));
    }
    tsv.push('\n');
    for i in 0..ds.n() {
        tsv.push_str(&format!("{i}\t{}\t{}", ds.r()[i], ds.m()[i]));
        for d in &recs {
            tsv.push_str(&format!("\t{}", d[i]));
        }
        tsv.push('\n');
    }
    let summary = json!({
        "command": "otr",
        "n": ds.n(),
        "rules": rules,
        "assumptions": report::assumptions(false),
    });
    Ok(vec![
        artifact("summary.json", json_string(&summary)?),
        artifact("table_1_compliance.csv", report::table1_csv(&stats)?),
        artifact("plot_recommendations.tsv", tsv),
    ])
}

fn boot_spec<'a>(b: usize, seed: u64, refit: Option<&'a OtrConfig>) -> Option<BootstrapSpec<'a>> {
    (b > 0).then_some(BootstrapSpec {
        replicates: b,
        seed,
        refit_rule: refit,
    })
}

fn run_decompose(cfg: &RunConfig, base: &Path, seed: u64) -> Result<Vec<Artifact>> {
    let ds = load(cfg, base)?;
    let o = cfg.otr_section();
    let otr_cfg = o.config(o.method);
    let rule = otr::fit_rule(&ds, &otr_cfg)?;
    let stats = otr::compliance_stats(&ds, &rule, otr_cfg.method.label())?;
    let dc = &cfg.decompose;
    let refit = dc.refit_rule.then_some(&otr_cfg);
    let rep = decompose::decompose(
        &ds,
        &rule,
        &cfg.center.center(),
        &dc.config(),
        boot_spec(dc.bootstrap, seed::derive(seed, &[1]), refit),
    )?;
    let mut tsv = String::from("quantity\testimate\tlower\tupper\n");
    for (name, e) in [
        ("tau", rep.tau),
        ("zeta_icde", rep.zeta_icde),
        ("delta_iie", rep.delta_iie),
        ("zeta_iie", rep.zeta_iie),
    ] {
        let (lo, hi) = e.se.map_or((f64::NAN, f64::NAN), |s| {
            (e.value - simstudy::Z_975 * s, e.value + simstudy::Z_975 * s)
        });
        tsv.push_str(&format!("{name}\t{}\t{}\t{}\n", report::num(e.value), report::num(lo), report::num(hi)));
    }
    let summary = json!({
        "command": "decompose",
        "n": ds.n(),
        "rule": rule,
        "compliance": stats,
        "decomposition": rep,
        "bootstrap_rule": if dc.refit_rule { "refit per replicate" } else { "held fixed" },
        "assumptions": report::assumptions(false),
    });
    Ok(vec![
        artifact("summary.json", json_string(&summary)?),
        artifact("table_1_compliance.csv", report::table1_csv(&[stats])?),
        artifact("table_2_decomposition.csv", report::table2_csv(&rep)?),
        artifact("plot_estimates.tsv", tsv),
    ])
}

fn adjust_config(cfg: &RunConfig) -> AdjustConfig {
    AdjustConfig {
        draws: cfg.sensitivity.draws,
        bootstrap: cfg.sensitivity.bootstrap,
        em: cfg.sensitivity.em,
        otr: {
            let o = cfg.otr_section();
            o.config(o.method)
        },
        decompose: cfg.decompose.config(),
        refit_rule_in_bootstrap: cfg.decompose.refit_rule,
    }
}

fn iie_note(refit_rule: bool) -> &'static str {
    if refit_rule {
        "Bootstrap replicates re-estimate the rule; in simulations IIE intervals from this bootstrap are conservative."
    } else {
        "Bootstrap replicates hold the rule fixed, so standard errors omit rule-estimation variability; set decompose.refit_rule to include it."
    }
}

fn run_sensitivity(cfg: &RunConfig, base: &Path, seed: u64) -> Result<Vec<Artifact>> {
    let ds = load(cfg, base)?;
    let s = &cfg.sensitivity;
    if s.grid.is_empty() {
        return Err(Error::config(OP, "[sensitivity] grid is empty"));
    }
    let spec = SensitivitySpec {
        u_kind: s.u_kind,
        beta_u_y: 0.0,
        beta_u_m: 0.0,
        heterogeneous_u: s.heterogeneous_u,
    };
    spec.validate()?;
    let adjust = adjust_config(cfg);
    let center = cfg.center.center();
    let cells = sensem::sensitivity_grid(&ds, &center, &spec, &s.grid, &adjust, seed::derive(seed, &[2]));
    if cells.iter().all(|c| c.result.is_none()) {
        return Err(Error::estimation(
            "sensem::sensitivity_grid",
            cells[0].error.clone().unwrap_or_default(),
        ));
    }
    let mut out = vec![artifact("table_sensitivity.csv", report::sensitivity_csv(&cells)?)];
    for est in ["disparity_remaining_icde", "disparity_reduction_iie", "disparity_remaining_iie"] {
        out.push(artifact(format!("plot_contour_{est}.tsv"), report::contour_tsv(&cells, est)?));
    }
    let summary = json!({
        "command": "sensitivity",
        "n": ds.n(),
        "cells": cells,
        "notes": [iie_note(cfg.decompose.refit_rule)],
        "assumptions": report::assumptions(false),
    });
    out.insert(0, artifact("summary.json", json_string(&summary)?));
    Ok(out)
}

fn run_benchmark(cfg: &RunConfig, base: &Path, seed: u64) -> Result<Vec<Artifact>> {
    let ds = load(cfg, base)?;
    let b = &cfg.benchmark;
    let covariate = b
        .covariate
        .as_deref()
        .ok_or_else(|| Error::config(OP, "[benchmark] covariate is required"))?;
    if b.grid.is_empty() {
        return Err(Error::config(OP, "[benchmark] grid is empty"));
    }
    if let Some((k, _)) = b.grid.iter().find(|(k, _)| !(*k > 0.0)) {
        return Err(Error::config(OP, format!("k_m must be positive, got {k}")));
    }
    let calibration = CalibrationConfig {
        population_size: b.population_size,
        seed: seed::derive(seed, &[3]),
        tolerance: b.tolerance,
    };
    let table = benchmark::benchmark_table(
        &ds,
        &cfg.center.center(),
        covariate,
        &b.grid,
        b.u_kind,
        &calibration,
        &adjust_config(cfg),
        seed::derive(seed, &[4]),
    )?;
    let mut tsv = String::from("k_m\tk_y\tbeta_u_m\tbeta_u_y\tzeta_icde\tdelta_iie\tzeta_iie\n");
    for c in &table.cells {
        let e = c.result.as_ref().map(|r| r.estimates.point());
        let f = |v: Option<f64>| v.map_or_else(|| "NA".into(), report::num);
        tsv.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            report::num(c.k_m),
            report::num(c.k_y),
            f(c.beta_u_m),
            f(c.beta_u_y),
            f(e.map(|p| p.zeta_icde)),
            f(e.map(|p| p.delta_iie)),
            f(e.map(|p| p.zeta_iie)),
        ));
    }
    let summary = json!({
        "command": "benchmark",
        "n": ds.n(),
        "benchmark": table,
        "notes": [
            "beta_u_y is the equality solution of a bound on the outcome coefficient; treat it as an upper-bound benchmark.",
            iie_note(cfg.decompose.refit_rule),
        ],
        "assumptions": report::assumptions(true),
    });
    Ok(vec![
        artifact("summary.json", json_string(&summary)?),
        artifact("table_3_benchmark.csv", report::table3_csv(&table)?),
        artifact("plot_benchmark.tsv", tsv),
    ])
}

fn run_simstudy(cfg: &RunConfig, seed: u64) -> Result<Vec<Artifact>> {
    let s = &cfg.simstudy;
    if s.modes.is_empty() || s.sp.is_empty() {
        return Err(Error::config(OP, "[simstudy] needs at least one mode and one sp pair"));
    }
    let otr_cfg = cfg
        .otr
        .as_ref()
        .map_or_else(simstudy_otr_default, |o| o.config(o.method));
    let exp = ExperimentConfig {
        n_grid: s.n_grid.clone(),
        iterations: s.iterations,
        adjust: s.adjust.clone(),
        otr: otr_cfg,
        decompose: cfg.decompose.config(),
        draws: s.draws,
        bootstrap: s.bootstrap,
        em: cfg.sensitivity.em,
        refit_rule: cfg.decompose.refit_rule,
        evaluation_size: s.evaluation_size,
    };
    let mut tables = Vec::new();
    let mut k = 0u64;
    for &mode in &s.modes {
        for &sp in &s.sp {
            let dgp = DgpConfig {
                mode,
                sp,
                population_size: s.population_size,
                seed: seed::derive(seed, &[5, k]),
                penalty: s.penalty,
            };
            let pop = simstudy::generate_population(&dgp)?;
            let truth = simstudy::true_estimands(&pop)?;
            tables.push(simstudy::run_experiment(&pop, &truth, &exp, seed::derive(seed, &[6, k]))?);
            k += 1;
        }
    }
    let cells: Vec<_> = tables
        .iter()
        .flat_map(|t| {
            t.cells.iter().map(move |c| {
                json!({
                    "mode": c.mode, "sp": c.sp, "n": c.n, "adjusted": c.adjusted,
                    "completed": c.completed, "failed": c.failed,
                    "accuracy": c.accuracy, "bias": c.bias, "coverage": c.coverage,
                    "truth": t.truth,
                })
            })
        })
        .collect();
    let summary = json!({
        "command": "simstudy",
        "experiment": exp,
        "cells": cells,
        "notes": [
            "Counterfactual truths reuse each unit's outcome noise.",
            iie_note(cfg.decompose.refit_rule),
        ],
        "assumptions": report::assumptions(false),
    });
    Ok(vec![
        artifact("summary.json", json_string(&summary)?),
        artifact("table_metrics.csv", report::metrics_csv(&tables)?),
        artifact("plot_metrics.tsv", report::metrics_plot_tsv(&tables)?),
    ])
}

/// Load the config, run the command and write the artifacts and manifest.
pub fn run(cli: &Cli) -> Result<()> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::config(OP, "--config is required"))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(OP, format!("cannot read {}: {e}", path.display())))?;
    let cfg = parse_config(&text)?;
    let seed = cli
        .seed
        .or(cfg.seed)
        .ok_or_else(|| Error::config(OP, "no seed: set `seed` in the config or pass --seed"))?;
    if cli.workers == Some(0) {
        return Err(Error::config(OP, "--workers must be at least 1"));
    }
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cli.workers {
        pool = pool.num_threads(w);
    }
    let pool = pool.build().map_err(|e| Error::config(OP, e.to_string()))?;
    let artifacts = pool.install(|| execute(cli.command, &cfg, &base, seed))?;
    let mut files = Vec::new();
    for a in &artifacts {
        write_atomic(&cli.out, &a.name, a.contents.as_bytes())?;
        files.push(json!({ "name": a.name, "sha256": sha256_hex(a.contents.as_bytes()) }));
    }
    let manifest = json!({
        "command": cli.command.name(),
        "config_sha256": sha256_hex(text.as_bytes()),
        "seed": seed,
        "version": env!("CARGO_PKG_VERSION"),
        "files": files,
    });
    write_atomic(&cli.out, "manifest.json", json_string(&manifest)?.as_bytes())
}

/// Parse arguments, run, report errors on stderr, and return the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}
