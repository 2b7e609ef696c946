mod common;

use common::*;
use otr_decomp::benchmark::{self, BenchmarkSpec, BenchmarkUKind, CalibrationConfig};
use otr_decomp::glm::{self, Design};
use otr_decomp::sensem::AdjustConfig;
use otr_decomp::simstudy::{quantile, true_estimands, DgpMode};
use otr_decomp::{seed, Center, Covariate, Dataset};
use rand::Rng;

/// Linear data with a benchmark covariate `Xj` of coefficient `gamma` on Y.
fn linear_data(n: usize, seed_value: u64, gamma: f64, xj_on_m: f64) -> Dataset {
    let mut rng = seed::rng(seed_value, &[]);
    let (mut y, mut m, mut r, mut x1, mut xj, mut c) = (vec![], vec![], vec![], vec![], vec![], vec![]);
    for _ in 0..n {
        let ci = (rng.gen::<f64>() < 0.4) as u8 as f64;
        let ri = (rng.gen::<f64>() < 0.5) as u8;
        let a = 0.5 * ri as f64 + normal(&mut rng);
        let b = normal(&mut rng);
        let mi = (rng.gen::<f64>() < expit(0.2 + 0.4 * a + xj_on_m * b)) as u8;
        y.push(0.3 - 0.4 * ri as f64 + 0.3 * a + gamma * b + 0.2 * ci + normal(&mut rng));
        m.push(mi);
        r.push(ri);
        x1.push(a);
        xj.push(b);
        c.push(ci);
    }
    Dataset::new(
        y,
        m,
        r,
        vec![Covariate::new("X1", x1), Covariate::new("Xj", xj)],
        vec![Covariate::new("C", c)],
        vec!["X1".into()],
        vec![],
    )
    .unwrap()
}

fn spec(k_m: f64, k_y: f64) -> BenchmarkSpec {
    BenchmarkSpec {
        covariate: "Xj".into(),
        k_m,
        k_y,
        u_kind: BenchmarkUKind::Continuous,
        calibration: CalibrationConfig {
            seed: 5,
            ..CalibrationConfig::default()
        },
    }
}

/// Share of 40 replicates whose estimate lies within 2 SEs of `truth`
/// (nominally 0.95).
fn coverage_share(gamma: f64, pick: fn(&benchmark::BenchmarkFits) -> (f64, f64), truth: f64) -> f64 {
    let hits = (0..40)
        .filter(|&s| {
            let f = benchmark::fit_benchmarks(&linear_data(2000, 100 + s, gamma, 0.0), "Xj").unwrap();
            let (est, se) = pick(&f);
            (est - truth).abs() < 2.0 * se
        })
        .count();
    hits as f64 / 40.0
}

#[test]
fn null_covariate_has_null_benchmarks() {
    let m = coverage_share(0.0, |f| (f.beta_xj_m, f.se_xj_m), 0.0);
    let y = coverage_share(0.0, |f| (f.beta_xj_y, f.se_xj_y), 0.0);
    assert!(m >= 0.9 && y >= 0.9, "within-2SE shares {m} / {y}");
}

#[test]
fn known_outcome_coefficient_is_recovered() {
    let y = coverage_share(0.7, |f| (f.beta_xj_y, f.se_xj_y), 0.7);
    assert!(y >= 0.9, "within-2SE share {y}");
}

#[test]
fn constant_covariate_is_rejected() {
    let base = linear_data(200, 3, 0.5, 0.5);
    let mut x = base.x().to_vec();
    x[1] = Covariate::new("Xj", vec![2.0; 200]);
    let ds = Dataset::new(base.y().to_vec(), base.m().to_vec(), base.r().to_vec(), x, base.c().to_vec(), vec![], vec![])
        .unwrap();
    assert!(benchmark::fit_benchmarks(&ds, "Xj").is_err());
}

#[test]
fn km_conversion_is_exact() {
    let ds = linear_data(1000, 4, 0.5, 0.6);
    let f = benchmark::fit_benchmarks(&ds, "Xj").unwrap();
    assert_eq!(benchmark::convert_km(1.0, &f).unwrap(), f.beta_xj_m);
    for k in [0.25, 0.5, 2.0, 3.7] {
        assert_eq!(benchmark::convert_km(k, &f).unwrap() - (k.ln() + f.beta_xj_m), 0.0);
    }
    assert!(benchmark::convert_km(0.0, &f).is_err());
}

#[test]
fn calibration_without_risk_link_returns_scaled_coefficient() {
    let ds = linear_data(1500, 5, 0.6, 0.4);
    let f = benchmark::fit_benchmarks(&ds, "Xj").unwrap();
    let mut last = f64::NEG_INFINITY;
    for k_y in [-2.0, -1.0, 0.0, 1.0, 2.0] {
        let cal = benchmark::calibrate_ky(&ds, &spec(1.0, k_y), &f, 0.0).unwrap();
        let target = k_y * f.beta_xj_y;
        assert!((cal.beta_u_y - target).abs() < 0.01 * target.abs().max(1.0), "k_y {k_y}: {} vs {target}", cal.beta_u_y);
        if target != 0.0 {
            assert_eq!(cal.beta_u_y.signum(), target.signum());
        }
        assert!(cal.beta_u_y >= last, "not monotone at k_y {k_y}");
        last = cal.beta_u_y;
    }
}

#[test]
fn calibration_is_monotone_with_a_risk_link() {
    let ds = linear_data(1500, 6, 0.6, 0.4);
    let f = benchmark::fit_benchmarks(&ds, "Xj").unwrap();
    let bm = benchmark::convert_km(2.0, &f).unwrap();
    let values: Vec<f64> = [-2.0, -1.0, 1.0, 2.0]
        .iter()
        .map(|&k| benchmark::calibrate_ky(&ds, &spec(2.0, k), &f, bm).unwrap().beta_u_y)
        .collect();
    assert!(values.windows(2).all(|w| w[1] >= w[0]), "{values:?}");
}

/// U and Xj are independent causes of both M and Y, so conditioning on the
/// collider M induces an association that shifts Xj's outcome coefficient.
#[test]
fn benchmark_fit_avoids_collider_bias() {
    let mut rng = seed::rng(7, &[]);
    let n = 5000;
    let (mut y, mut m, mut r, mut xj, mut c) = (vec![], vec![], vec![], vec![], vec![]);
    for _ in 0..n {
        let ri = (rng.gen::<f64>() < 0.5) as u8;
        let ci = (rng.gen::<f64>() < 0.4) as u8 as f64;
        let u = normal(&mut rng);
        let x = normal(&mut rng);
        let mi = (rng.gen::<f64>() < expit(1.5 * x + 1.5 * u)) as u8;
        y.push(0.2 * ri as f64 + 0.5 * x + 1.0 * u + 1.0 * mi as f64 + 0.2 * ci + normal(&mut rng));
        m.push(mi);
        r.push(ri);
        xj.push(x);
        c.push(ci);
    }
    let ds = Dataset::new(
        y.clone(),
        m.clone(),
        r.clone(),
        vec![Covariate::new("Xj", xj.clone())],
        vec![Covariate::new("C", c.clone())],
        vec![],
        vec![],
    )
    .unwrap();
    let rf: Vec<f64> = r.iter().map(|&v| v as f64).collect();
    let mf: Vec<f64> = m.iter().map(|&v| v as f64).collect();
    let ones = vec![1.0; n];
    let without_m = Design::builder(n)
        .intercept()
        .col("R", rf.clone())
        .col("Xj", xj.clone())
        .col("C", c.clone())
        .build()
        .unwrap();
    let with_m = without_m.with_column("M", &mf).unwrap();
    let a = glm::fit_wls(&without_m, &y, &ones, None).unwrap();
    let b = glm::fit_wls(&with_m, &y, &ones, None).unwrap();
    let (ca, cb) = (a.coef("Xj").unwrap(), b.coef("Xj").unwrap());
    let se = a.se("Xj").unwrap().max(b.se("Xj").unwrap());
    assert!((ca - cb).abs() > 2.0 * se, "{ca} vs {cb} (se {se})");
    let f = benchmark::fit_benchmarks(&ds, "Xj").unwrap();
    assert!((f.beta_xj_y - ca).abs() < 1e-12);
}

#[test]
fn null_cell_matches_unadjusted_analysis() {
    let ds = linear_data(600, 8, 0.3, 0.0);
    let adjust = AdjustConfig {
        draws: 4,
        bootstrap: 60,
        ..AdjustConfig::default()
    };
    let table = benchmark::benchmark_table(
        &ds,
        &Center::Mean,
        "Xj",
        &[(1.0, 0.0)],
        BenchmarkUKind::Continuous,
        &CalibrationConfig { seed: 3, ..CalibrationConfig::default() },
        &adjust,
        4,
    )
    .unwrap();
    let cell = &table.cells[0];
    let res = cell.result.as_ref().unwrap_or_else(|| panic!("{:?}", cell.error));
    let rule = otr_decomp::otr::fit_rule(&ds, &adjust.otr).unwrap();
    let base = otr_decomp::decompose::decompose(&ds, &rule, &Center::Mean, &adjust.decompose, None).unwrap();
    let adj = &res.estimates;
    for (k, e) in [adj.tau, adj.zeta_icde, adj.delta_iie, adj.zeta_iie].iter().enumerate() {
        let b = base.point().to_vec()[k];
        assert!((e.value - b).abs() <= 2.0 * e.se.unwrap(), "estimand {k}: {} vs {b}", e.value);
    }
}

/// U in the simulation DGP plays the role of a benchmark multiple of X1;
/// the multiples are read off the recorded U, and the adjusted ICDE should
/// then land closer to the truth than the unadjusted one.
#[test]
fn true_multiples_reduce_icde_error() {
    let pop = population(DgpMode::Constant, 1.0, 400_000, 61);
    let truth = true_estimands(&pop).unwrap();
    let adjust = AdjustConfig {
        draws: 5,
        bootstrap: 0,
        otr: otr_decomp::otr::OtrConfig {
            stratify: false,
            max_depth: 2,
            ..Default::default()
        },
        ..AdjustConfig::default()
    };
    let (mut adj_err, mut raw_err) = (vec![], vec![]);
    for s in 0..8 {
        let idx = sample_rows(&pop, 2000, 70 + s);
        let ds = pop.data.select(&idx).unwrap();
        let f = benchmark::fit_benchmarks(&ds, "X1").unwrap();
        let u: Vec<f64> = idx.iter().map(|&i| pop.u[i]).collect();
        let with_u = ds.with_x_column(Covariate::new("Utrue", u), false).unwrap();
        let rf: Vec<f64> = ds.r().iter().map(|&v| v as f64).collect();
        let mut b = Design::builder(ds.n()).intercept().col("R", rf);
        for cov in with_u.x().iter().chain(with_u.c()) {
            b = b.col(cov.name.clone(), cov.values.clone());
        }
        let coef_u = glm::fit_wls(&b.build().unwrap(), ds.y(), &vec![1.0; ds.n()], None)
            .unwrap()
            .coef("Utrue")
            .unwrap();
        let k_m = (1.0 - f.beta_xj_m).exp();
        let k_y = coef_u / f.beta_xj_y;
        let table = benchmark::benchmark_table(
            &ds,
            &Center::Mean,
            "X1",
            &[(k_m, k_y)],
            BenchmarkUKind::Binary,
            &CalibrationConfig { seed: 9 + s, ..CalibrationConfig::default() },
            &adjust,
            10 + s,
        )
        .unwrap();
        let cell = &table.cells[0];
        let res = cell.result.as_ref().unwrap_or_else(|| panic!("{:?}", cell.error));
        adj_err.push((res.estimates.zeta_icde.value - truth.zeta_icde).abs());
        let rule = otr_decomp::otr::fit_rule(&ds, &adjust.otr).unwrap();
        let base = otr_decomp::decompose::decompose(&ds, &rule, &Center::Mean, &adjust.decompose, None).unwrap();
        raw_err.push((base.zeta_icde.value - truth.zeta_icde).abs());
    }
    let (a, r) = (quantile(&adj_err, 0.5), quantile(&raw_err, 0.5));
    assert!(a < r, "adjusted median error {a} vs unadjusted {r}");
}
