//! Decompose a group disparity into the part left if everyone followed the
//! estimated rule and the part removed by equalizing compliance.

use otr_decomp::decompose::{self, BootstrapSpec, DecomposeConfig, IieEstimator};
use otr_decomp::otr::{self, OtrConfig};
use otr_decomp::simstudy::{generate_population, true_estimands, DgpConfig, DgpMode};
use otr_decomp::{seed, Center};

fn main() -> otr_decomp::Result<()> {
    let pop = generate_population(&DgpConfig {
        population_size: 200_000,
        penalty: Some(1.0),
        ..DgpConfig::new(DgpMode::Constant, (0.0, 0.0), 5)
    })?;
    let truth = true_estimands(&pop)?;
    let idx = rand::seq::index::sample(&mut seed::rng(5, &[4]), pop.data.n(), 2000).into_vec();
    let ds = pop.data.select(&idx)?;

    let rule = otr::fit_rule(&ds, &OtrConfig::default())?;
    let boot = BootstrapSpec {
        replicates: 100,
        seed: 11,
        refit_rule: None,
    };
    println!("{:<12} {:>9} {:>9} {:>9} {:>9}", "estimator", "tau", "icde", "d_iie", "z_iie");
    println!(
        "{:<12} {:>9.3} {:>9.3} {:>9.3} {:>9.3}",
        "truth", truth.tau, truth.zeta_icde, truth.delta_iie, truth.zeta_iie
    );
    for est in [IieEstimator::Regression, IieEstimator::Weighting] {
        let cfg = DecomposeConfig {
            iie_estimator: est,
            ..DecomposeConfig::default()
        };
        let r = decompose::decompose(&ds, &rule, &Center::Mean, &cfg, Some(boot))?;
        let cells = [r.tau, r.zeta_icde, r.delta_iie, r.zeta_iie];
        print!("{:<12}", format!("{est:?}"));
        for e in cells {
            print!(" {:>9.3}", e.value);
        }
        println!();
        print!("{:<12}", "  (se)");
        for e in cells {
            print!(" {:>9.3}", e.se.unwrap_or(f64::NAN));
        }
        println!("\n  reduction: icde {:.1}%, iie {:.1}%", r.pct_reduction_icde, r.pct_reduction_iie);
    }
    Ok(())
}
