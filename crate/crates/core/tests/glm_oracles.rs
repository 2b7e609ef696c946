mod common;

use common::{normal, ols_oracle};
use otr_decomp::glm::{self, Design};
use otr_decomp::seed;
use proptest::prelude::*;
use rand::Rng;

#[test]
fn wls_matches_normal_equations_on_random_50x4() {
    let mut rng = seed::rng(3, &[]);
    let n = 50;
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| vec![1.0, normal(&mut rng), normal(&mut rng), rng.gen::<f64>()])
        .collect();
    let y: Vec<f64> = rows
        .iter()
        .map(|r| 1.0 + 2.0 * r[1] - r[2] + 0.5 * r[3] + normal(&mut rng))
        .collect();
    let data: Vec<f64> = rows.iter().flatten().copied().collect();
    let names = ["a", "b", "c", "d"].map(String::from).to_vec();
    let design = Design::from_rows(names, n, data).unwrap();
    let fit = glm::fit_wls(&design, &y, &vec![1.0; n], None).unwrap();
    let oracle = ols_oracle(&rows, &y);
    for (a, b) in fit.coefficients.iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }
}

#[test]
fn logistic_beats_grid_search() {
    let mut rng = seed::rng(4, &[]);
    let n = 300;
    let x: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
    let m: Vec<u8> = x
        .iter()
        .map(|&v| (rng.gen::<f64>() < common::expit(-0.4 + 1.2 * v)) as u8)
        .collect();
    let design = Design::builder(n).intercept().col("x", x).build().unwrap();
    let w = vec![1.0; n];
    let fit = glm::fit_logistic(&design, &m, &w, None).unwrap();
    let ll = glm::log_likelihood(&fit.coefficients, &design, &m, &w, None);
    let mut best = f64::NEG_INFINITY;
    let steps = 400;
    for i in 0..=steps {
        for j in 0..=steps {
            let b = [-5.0 + 10.0 * i as f64 / steps as f64, -5.0 + 10.0 * j as f64 / steps as f64];
            best = best.max(glm::log_likelihood(&b, &design, &m, &w, None));
        }
    }
    assert!(ll >= best - 1e-6, "{ll} < grid max {best}");
}

fn random_design(n: usize, p: usize, seed_value: u64) -> (Vec<Vec<f64>>, Design) {
    let mut rng = seed::rng(seed_value, &[]);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let mut r = vec![1.0];
            r.extend((1..p).map(|_| normal(&mut rng)));
            r
        })
        .collect();
    let names = (0..p).map(|j| format!("x{j}")).collect();
    let d = Design::from_rows(names, n, rows.iter().flatten().copied().collect()).unwrap();
    (rows, d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn unit_weight_wls_is_ols(seed_value in any::<u64>(), n in 12usize..60, p in 1usize..5) {
        let (rows, design) = random_design(n, p, seed_value);
        let mut rng = seed::rng(seed_value, &[1]);
        let y: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let fit = glm::fit_wls(&design, &y, &vec![1.0; n], None).unwrap();
        let oracle = ols_oracle(&rows, &y);
        for (a, b) in fit.coefficients.iter().zip(&oracle) {
            prop_assert!((a - b).abs() < 1e-8 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn wls_offset_equals_shifted_response(seed_value in any::<u64>(), n in 12usize..60) {
        let (_, design) = random_design(n, 3, seed_value);
        let mut rng = seed::rng(seed_value, &[2]);
        let y: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let o: Vec<f64> = (0..n).map(|_| 3.0 * normal(&mut rng)).collect();
        let w: Vec<f64> = (0..n).map(|_| 0.2 + rng.gen::<f64>()).collect();
        let a = glm::fit_wls(&design, &y, &w, Some(&o)).unwrap();
        let shifted: Vec<f64> = y.iter().zip(&o).map(|(a, b)| a - b).collect();
        let b = glm::fit_wls(&design, &shifted, &w, None).unwrap();
        for (u, v) in a.coefficients.iter().zip(&b.coefficients) {
            prop_assert!((u - v).abs() < 1e-10 * (1.0 + v.abs()));
        }
    }

    #[test]
    fn logistic_row_duplication_equals_double_weight(seed_value in any::<u64>(), dup in 0usize..40) {
        let n = 40;
        let (rows, design) = random_design(n, 2, seed_value);
        let mut rng = seed::rng(seed_value, &[3]);
        let m: Vec<u8> = rows
            .iter()
            .map(|r| (rng.gen::<f64>() < common::expit(0.3 + 0.5 * r[1])) as u8)
            .collect();
        prop_assume!(m.contains(&1) && m.contains(&0));
        let mut w = vec![1.0; n];
        w[dup] = 2.0;
        let weighted = glm::fit_logistic(&design, &m, &w, None);
        let mut rows2 = rows.clone();
        rows2.push(rows[dup].clone());
        let mut m2 = m.clone();
        m2.push(m[dup]);
        let d2 = Design::from_rows(
            design.names().to_vec(),
            n + 1,
            rows2.iter().flatten().copied().collect(),
        )
        .unwrap();
        let duplicated = glm::fit_logistic(&d2, &m2, &vec![1.0; n + 1], None);
        match (weighted, duplicated) {
            (Ok(a), Ok(b)) => {
                for (u, v) in a.coefficients.iter().zip(&b.coefficients) {
                    prop_assert!((u - v).abs() < 1e-8 * (1.0 + v.abs()), "{} vs {}", u, v);
                }
            }
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "one fit failed: {:?} / {:?}", a.is_ok(), b.is_ok()),
        }
    }
}
