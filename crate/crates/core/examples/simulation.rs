//! A small repeated-sampling experiment: rule accuracy and estimator bias
//! with and without adjustment for the confounder.

use otr_decomp::cli::simstudy_otr_default;
use otr_decomp::simstudy::{self, DgpConfig, DgpMode, ExperimentConfig};

fn main() -> otr_decomp::Result<()> {
    let pop = simstudy::generate_population(&DgpConfig {
        population_size: 100_000,
        ..DgpConfig::new(DgpMode::Constant, (1.0, 1.0), 23)
    })?;
    let truth = simstudy::true_estimands(&pop)?;
    let cfg = ExperimentConfig {
        n_grid: vec![500, 1000],
        iterations: 20,
        otr: simstudy_otr_default(),
        draws: 3,
        bootstrap: 0,
        ..ExperimentConfig::default()
    };
    let table = simstudy::run_experiment(&pop, &truth, &cfg, 29)?;

    println!("truth: {:?}", truth.as_array());
    println!("{:>5} {:>9} {:>9} {:>9} {:>9}", "n", "adjusted", "accuracy", "bias_icde", "bias_iie");
    for c in &table.cells {
        println!(
            "{:>5} {:>9} {:>9.3} {:>9.3} {:>9.3}",
            c.n, c.adjusted, c.accuracy.median, c.bias[1].median, c.bias[3].median
        );
    }
    Ok(())
}
