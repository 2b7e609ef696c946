//! Estimate the optimal rule for taking up a treatment with both
//! estimators, then compare compliance and estimated value.

use otr_decomp::otr::{self, OtrConfig, OtrMethod};
use otr_decomp::seed;
use otr_decomp::simstudy::{generate_population, DgpConfig, DgpMode};

fn main() -> otr_decomp::Result<()> {
    let pop = generate_population(&DgpConfig {
        population_size: 100_000,
        ..DgpConfig::new(DgpMode::Constant, (0.5, 0.5), 3)
    })?;
    let idx = rand::seq::index::sample(&mut seed::rng(3, &[1]), pop.data.n(), 2000).into_vec();
    let ds = pop.data.select(&idx)?;
    let truth: Vec<u8> = idx.iter().map(|&i| pop.m_opt[i]).collect();

    let propensity = otr::fit_propensity(&ds, true)?;
    for method in [OtrMethod::Weighting, OtrMethod::Qlearning] {
        let cfg = OtrConfig {
            method,
            max_depth: 2,
            ..OtrConfig::default()
        };
        let rule = otr::fit_rule(&ds, &cfg)?;
        let d = otr::apply_rule(&rule, &ds)?;
        let acc = d.iter().zip(&truth).filter(|(a, b)| a == b).count() as f64 / d.len() as f64;
        let value = otr::estimate_value(&ds, &rule, &propensity)?;
        let stats = otr::compliance_stats(&ds, &rule, &format!("{method:?}"))?;

        println!("{method:?}");
        println!("  agreement with true rule  {acc:.3}");
        println!("  estimated value           {:.3}", value.value);
        println!("  recommended %  R=1 {:.1}  R=0 {:.1}  all {:.1}", stats.recommendation_pct[0], stats.recommendation_pct[1], stats.recommendation_pct[2]);
        println!("  compliance %   R=1 {:.1}  R=0 {:.1}  all {:.1}", stats.compliance_pct[0], stats.compliance_pct[1], stats.compliance_pct[2]);
    }
    Ok(())
}
