#![allow(dead_code)]

use otr_decomp::seed;
use otr_decomp::simstudy::{generate_population, DgpConfig, DgpMode, Population};
use otr_decomp::{Covariate, Dataset};
use rand::Rng;
use rand_distr::StandardNormal;

/// Gaussian elimination with partial pivoting on a dense copy of `a`.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let p = b.len();
    for k in 0..p {
        let piv = (k..p)
            .max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))
            .unwrap();
        a.swap(k, piv);
        b.swap(k, piv);
        for i in k + 1..p {
            let f = a[i][k] / a[k][k];
            for j in k..p {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; p];
    for k in (0..p).rev() {
        let s: f64 = (k + 1..p).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    x
}

/// Ordinary least squares via the normal equations.
pub fn ols_oracle(rows: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let p = rows[0].len();
    let mut xtx = vec![vec![0.0; p]; p];
    let mut xty = vec![0.0; p];
    for (r, &yi) in rows.iter().zip(y) {
        for j in 0..p {
            xty[j] += r[j] * yi;
            for k in 0..p {
                xtx[j][k] += r[j] * r[k];
            }
        }
    }
    solve_dense(xtx, xty)
}

pub fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn expit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Small synthetic dataset: one X used as H1, one binary C.
pub fn synthetic(n: usize, seed_value: u64) -> Dataset {
    let mut rng = seed::rng(seed_value, &[]);
    let (mut y, mut m, mut r, mut x, mut c) = (vec![], vec![], vec![], vec![], vec![]);
    for i in 0..n {
        let ri = (i % 2) as u8;
        let ci = (rng.gen::<f64>() < 0.4) as u8 as f64;
        let xi = 0.5 * ri as f64 + normal(&mut rng);
        let mi = (rng.gen::<f64>() < expit(0.2 + 0.4 * xi - 0.3 * ri as f64)) as u8;
        let gain = if xi > 0.0 { 1.0 } else { -1.0 };
        let yi = 0.3 - 0.5 * ri as f64 + 0.4 * xi + 0.2 * ci + mi as f64 * gain + normal(&mut rng);
        y.push(yi);
        m.push(mi);
        r.push(ri);
        x.push(xi);
        c.push(ci);
    }
    Dataset::new(
        y,
        m,
        r,
        vec![Covariate::new("X", x)],
        vec![Covariate::new("C", c)],
        vec!["X".into()],
        vec![],
    )
    .unwrap()
}

pub fn population(mode: DgpMode, sp: f64, size: usize, seed_value: u64) -> Population {
    generate_population(&DgpConfig {
        population_size: size,
        ..DgpConfig::new(mode, (sp, sp), seed_value)
    })
    .unwrap()
}

/// Simple random sample of `n` population rows.
pub fn sample_rows(pop: &Population, n: usize, seed_value: u64) -> Vec<usize> {
    let mut rng = seed::rng(seed_value, &[]);
    rand::seq::index::sample(&mut rng, pop.data.n(), n).into_vec()
}

pub fn accuracy(d: &[u8], truth: &[u8]) -> f64 {
    d.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / d.len() as f64
}

/// Population without confounding by `U` but with a unit penalty for
/// departing from the optimal rule.
pub fn unconfounded_population(mode: DgpMode, size: usize, seed_value: u64) -> Population {
    generate_population(&DgpConfig {
        population_size: size,
        penalty: Some(1.0),
        ..DgpConfig::new(mode, (0.0, 0.0), seed_value)
    })
    .unwrap()
}

/// `I(X1 > 0.1 & X2 > 0.1)` written as a tree over `[X1, X2]`.
pub fn true_constant_rule() -> otr_decomp::DecisionRule {
    use otr_decomp::{RuleModel, TreeNode};
    let leaf = |label| Box::new(TreeNode::Leaf { label });
    otr_decomp::DecisionRule::pooled(RuleModel::Tree {
        root: TreeNode::Split {
            feature: 0,
            threshold: 0.1,
            left: leaf(0),
            right: Box::new(TreeNode::Split {
                feature: 1,
                threshold: 0.1,
                left: leaf(0),
                right: leaf(1),
            }),
        },
        features: vec!["X1".into(), "X2".into()],
    })
}

fn leaf_error(z: &[u8], w: &[f64], rows: &[usize]) -> f64 {
    let (mut w0, mut w1) = (0.0, 0.0);
    for &i in rows {
        if z[i] == 1 {
            w1 += w[i];
        } else {
            w0 += w[i];
        }
    }
    w0.min(w1)
}

fn midpoints(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.windows(2).map(|p| 0.5 * (p[0] + p[1])).collect()
}

fn best_depth(features: &[Vec<f64>], z: &[u8], w: &[f64], rows: &[usize], depth: usize) -> f64 {
    let mut best = leaf_error(z, w, rows);
    if depth == 0 {
        return best;
    }
    for f in features {
        let vals: Vec<f64> = rows.iter().map(|&i| f[i]).collect();
        for t in midpoints(&vals) {
            let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| f[i] <= t);
            let e = best_depth(features, z, w, &l, depth - 1) + best_depth(features, z, w, &r, depth - 1);
            best = best.min(e);
        }
    }
    best
}

/// Minimum weighted misclassification over every axis-aligned tree of
/// depth at most 2 with thresholds at observed midpoints.
pub fn exhaustive_depth2_error(features: &[Vec<f64>], z: &[u8], w: &[f64]) -> f64 {
    let rows: Vec<usize> = (0..z.len()).collect();
    best_depth(features, z, w, &rows, 2)
}

/// Random CART instance with `nf` features and integer-free weights.
pub fn cart_instance(n: usize, nf: usize, seed_value: u64) -> (Vec<Vec<f64>>, Vec<u8>, Vec<f64>) {
    let mut rng = seed::rng(seed_value, &[]);
    let features: Vec<Vec<f64>> = (0..nf).map(|_| (0..n).map(|_| normal(&mut rng)).collect()).collect();
    let z: Vec<u8> = (0..n)
        .map(|i| {
            let s = features[0][i] - 0.5 * features[1 % nf][i] + 0.8 * normal(&mut rng);
            (s > 0.0) as u8
        })
        .collect();
    let w: Vec<f64> = (0..n).map(|_| 0.05 + rng.gen::<f64>() * 2.0).collect();
    (features, z, w)
}

/// Data with a recorded binary confounder `U*`; `H1 = X`.
pub fn confounded_data(n: usize, seed_value: u64, by: f64, bm: f64) -> (Dataset, Vec<f64>) {
    let mut rng = seed::rng(seed_value, &[]);
    let (mut y, mut m, mut r, mut x, mut c, mut u) = (vec![], vec![], vec![], vec![], vec![], vec![]);
    for _ in 0..n {
        let ci = (rng.gen::<f64>() < 0.4) as u8 as f64;
        let ri = (rng.gen::<f64>() < expit(1.0 - 0.5 * ci)) as u8;
        let ui = (rng.gen::<f64>() < 0.5) as u8 as f64;
        let xi = -0.3 + 0.8 * ri as f64 + 0.5 * ci + normal(&mut rng);
        let mi = (rng.gen::<f64>() < expit(0.3 - 0.5 * ri as f64 + 0.4 * xi + 0.3 * ci + bm * ui)) as u8;
        let yi = 0.5 - 0.5 * ri as f64 + 0.3 * xi + mi as f64 * (0.2 + 0.5 * xi) + 0.25 * ci + by * ui + normal(&mut rng);
        y.push(yi);
        m.push(mi);
        r.push(ri);
        x.push(xi);
        c.push(ci);
        u.push(ui);
    }
    let ds = Dataset::new(
        y,
        m,
        r,
        vec![Covariate::new("X", x)],
        vec![Covariate::new("C", c)],
        vec!["X".into()],
        vec![],
    )
    .unwrap();
    (ds, u)
}

/// Complete-data fits given the recorded `U*`, flattened as
/// `risk (1, R, X, C)`, `outcome (1, R, X, M, M:X, C)`, `sigma2`, with SEs.
pub fn conditioned_fit(ds: &Dataset, u: &[f64], by: f64, bm: f64) -> (Vec<f64>, Vec<f64>) {
    use otr_decomp::glm::{self, Design};
    let n = ds.n();
    let r: Vec<f64> = ds.r().iter().map(|&v| v as f64).collect();
    let mf: Vec<f64> = ds.m().iter().map(|&v| v as f64).collect();
    let x = ds.x()[0].values.clone();
    let c = ds.c()[0].values.clone();
    let mx: Vec<f64> = mf.iter().zip(&x).map(|(a, b)| a * b).collect();
    let risk = Design::builder(n)
        .intercept()
        .col("R", r.clone())
        .col("X", x.clone())
        .col("C", c.clone())
        .build()
        .unwrap();
    let out = Design::builder(n)
        .intercept()
        .col("R", r)
        .col("X", x)
        .col("M", mf)
        .col("M:X", mx)
        .col("C", c)
        .build()
        .unwrap();
    let ones = vec![1.0; n];
    let off: Vec<f64> = u.iter().map(|v| bm * v).collect();
    let lf = glm::fit_logistic(&risk, ds.m(), &ones, Some(&off)).unwrap();
    let y: Vec<f64> = ds.y().iter().zip(u).map(|(y, v)| y - by * v).collect();
    let of = glm::fit_wls(&out, &y, &ones, None).unwrap();
    let s2 = of.residual_variance;
    let mut coef = lf.coefficients.clone();
    coef.extend(&of.coefficients);
    coef.push(s2);
    let mut se = lf.std_errors.clone();
    se.extend(&of.std_errors);
    se.push(s2 * (2.0 / (n - out.ncols()) as f64).sqrt());
    (coef, se)
}
