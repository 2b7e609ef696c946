//! Express sensitivity parameters as multiples of an observed covariate's
//! association with treatment and outcome.

use otr_decomp::benchmark::{self, BenchmarkUKind, CalibrationConfig};
use otr_decomp::sensem::AdjustConfig;
use otr_decomp::simstudy::{generate_population, DgpConfig, DgpMode};
use otr_decomp::{seed, Center};

fn main() -> otr_decomp::Result<()> {
    let pop = generate_population(&DgpConfig {
        population_size: 100_000,
        ..DgpConfig::new(DgpMode::Constant, (1.0, 1.0), 13)
    })?;
    let idx = rand::seq::index::sample(&mut seed::rng(13, &[1]), pop.data.n(), 1000).into_vec();
    let ds = pop.data.select(&idx)?;

    let fits = benchmark::fit_benchmarks(&ds, "X3")?;
    println!("X3 on M (logit): {:.3} (se {:.3})", fits.beta_xj_m, fits.se_xj_m);

    let adjust = AdjustConfig {
        draws: 3,
        bootstrap: 0,
        ..AdjustConfig::default()
    };
    let calibration = CalibrationConfig {
        population_size: 100_000,
        seed: 17,
        ..CalibrationConfig::default()
    };
    let grid = [(0.5, 0.5), (1.0, 1.0), (2.0, 1.0)];
    let table = benchmark::benchmark_table(&ds, &Center::Mean, "X3", &grid, BenchmarkUKind::Binary, &calibration, &adjust, 19)?;

    println!("{:>5} {:>5} {:>8} {:>8} {:>9} {:>9}", "k_m", "k_y", "b_u^m", "b_u^y", "icde", "z_iie");
    for c in &table.cells {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3}"));
        let est = c.result.as_ref().map(|r| &r.estimates);
        println!(
            "{:>5.1} {:>5.1} {:>8} {:>8} {:>9} {:>9}",
            c.k_m,
            c.k_y,
            fmt(c.beta_u_m),
            fmt(c.beta_u_y),
            fmt(est.map(|e| e.zeta_icde.value)),
            fmt(est.map(|e| e.zeta_iie.value)),
        );
        if let Some(e) = &c.error {
            println!("      {e}");
        }
    }
    Ok(())
}
