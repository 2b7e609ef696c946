//! Draw a sample from the simulation design and write it as CSV.
//!
//! cargo run --example simulate_data -- [n] [path]

use otr_decomp::seed;
use otr_decomp::simstudy::{generate_population, DgpConfig, DgpMode};

fn main() -> otr_decomp::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).map_or(1000, |v| v.parse().expect("n must be an integer"));
    let path = args.get(2).map_or("demo.csv", String::as_str);

    let pop = generate_population(&DgpConfig {
        population_size: 100_000,
        ..DgpConfig::new(DgpMode::Constant, (1.0, 1.0), 7)
    })?;
    let idx = rand::seq::index::sample(&mut seed::rng(7, &[1]), pop.data.n(), n).into_vec();
    let sample = pop.data.select(&idx)?;
    sample.save(path)?;

    let share = |g| sample.group_size(g) as f64 / n as f64;
    println!("wrote {n} rows to {path} (R=1 share {:.2}, R=0 share {:.2})", share(1), share(0));
    println!("columns: {}", sample.column_names().join(", "));
    Ok(())
}
