//! Re-run the decomposition under an assumed unmeasured confounder over a
//! small grid of sensitivity parameters.

use otr_decomp::sensem::{self, AdjustConfig, SensitivitySpec};
use otr_decomp::simstudy::{generate_population, DgpConfig, DgpMode};
use otr_decomp::{seed, Center};

fn main() -> otr_decomp::Result<()> {
    let pop = generate_population(&DgpConfig {
        population_size: 100_000,
        ..DgpConfig::new(DgpMode::Constant, (1.0, 1.0), 9)
    })?;
    let idx = rand::seq::index::sample(&mut seed::rng(9, &[1]), pop.data.n(), 1000).into_vec();
    let ds = pop.data.select(&idx)?;

    let cfg = AdjustConfig {
        draws: 5,
        bootstrap: 20,
        ..AdjustConfig::default()
    };
    let grid = [(0.0, 0.0), (0.5, 0.5), (1.0, 1.0), (1.5, 1.0)];
    let cells = sensem::sensitivity_grid(&ds, &Center::Mean, &SensitivitySpec::binary(0.0, 0.0), &grid, &cfg, 21);

    println!("{:>6} {:>6} {:>9} {:>9} {:>9}   em", "b_u^y", "b_u^m", "icde", "d_iie", "z_iie");
    for c in &cells {
        match (&c.result, &c.error) {
            (Some(r), _) => println!(
                "{:>6.2} {:>6.2} {:>9.3} {:>9.3} {:>9.3}   {} iter{}",
                c.beta_u_y,
                c.beta_u_m,
                r.estimates.zeta_icde.value,
                r.estimates.delta_iie.value,
                r.estimates.zeta_iie.value,
                r.em_iterations,
                if r.em_converged { "" } else { " (not converged)" },
            ),
            (None, Some(e)) => println!("{:>6.2} {:>6.2} failed: {e}", c.beta_u_y, c.beta_u_m),
            (None, None) => unreachable!(),
        }
    }
    Ok(())
}
