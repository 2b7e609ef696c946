//! Weighted least squares and weighted logistic regression with offsets.
//!
//! These two fitters back every regression in the crate: Q-functions,
//! marginal structural models, propensity and compliance models, and the
//! M-step of the stochastic EM.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probability clamp used wherever probabilities are turned into weights.
pub const PROB_EPS: f64 = 1e-6;

/// Logit-scale coefficient magnitude treated as divergence.
pub const SEPARATION_LIMIT: f64 = 30.0;

const MAX_IRLS_ITER: usize = 100;
const IRLS_TOL: f64 = 1e-8;
const PIVOT_TOL: f64 = 1e-10;

#[inline]
pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// Dense row-major design matrix with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    n: usize,
    p: usize,
    data: Vec<f64>,
    names: Vec<String>,
}

impl Design {
    /// Build from column vectors (all of equal length).
    pub fn from_columns(names: Vec<String>, cols: &[&[f64]]) -> Result<Design> {
        const OP: &str = "glm::design";
        if names.len() != cols.len() {
            return Err(Error::dim(OP, "names and columns differ in count"));
        }
        let n = cols.first().map_or(0, |c| c.len());
        if cols.iter().any(|c| c.len() != n) {
            return Err(Error::dim(OP, "columns have different lengths"));
        }
        let p = cols.len();
        let mut data = vec![0.0; n * p];
        for (j, col) in cols.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                data[i * p + j] = v;
            }
        }
        Ok(Design { n, p, data, names })
    }

    /// Build from a row-major buffer.
    pub fn from_rows(names: Vec<String>, n: usize, data: Vec<f64>) -> Result<Design> {
        let p = names.len();
        if data.len() != n * p {
            return Err(Error::dim("glm::design", "buffer size is not n * p"));
        }
        Ok(Design { n, p, data, names })
    }

    /// Copy with one more column on the right.
    pub fn with_column(&self, name: impl Into<String>, values: &[f64]) -> Result<Design> {
        if values.len() != self.n {
            return Err(Error::dim("glm::design", "column length differs from n"));
        }
        let p = self.p + 1;
        let mut data = Vec::with_capacity(self.n * p);
        for (i, &v) in values.iter().enumerate() {
            data.extend_from_slice(self.row(i));
            data.push(v);
        }
        let mut names = self.names.clone();
        names.push(name.into());
        Ok(Design { n: self.n, p, data, names })
    }

    pub fn builder(n: usize) -> DesignBuilder {
        DesignBuilder {
            n,
            names: vec![],
            cols: vec![],
        }
    }

    pub fn nrows(&self) -> usize {
        self.n
    }
    pub fn ncols(&self) -> usize {
        self.p
    }
    pub fn names(&self) -> &[String] {
        &self.names
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    /// `X b` (+ offset).
    pub fn linear_predictor(&self, beta: &[f64], offset: Option<&[f64]>) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let row = self.row(i);
                let mut s = offset.map_or(0.0, |o| o[i]);
                for (x, b) in row.iter().zip(beta) {
                    s += x * b;
                }
                s
            })
            .collect()
    }
}

/// Column-by-column [`Design`] construction.
#[derive(Debug, Clone)]
pub struct DesignBuilder {
    n: usize,
    names: Vec<String>,
    cols: Vec<Vec<f64>>,
}

impl DesignBuilder {
    pub fn intercept(mut self) -> Self {
        self.names.push("(intercept)".into());
        self.cols.push(vec![1.0; self.n]);
        self
    }

    pub fn col(mut self, name: impl Into<String>, values: impl Into<Vec<f64>>) -> Self {
        self.names.push(name.into());
        self.cols.push(values.into());
        self
    }

    pub fn cols<'a, I>(mut self, it: I) -> Self
    where
        I: IntoIterator<Item = (&'a str, &'a [f64])>,
    {
        for (name, v) in it {
            self.names.push(name.to_string());
            self.cols.push(v.to_vec());
        }
        self
    }

    pub fn build(self) -> Result<Design> {
        let refs: Vec<&[f64]> = self.cols.iter().map(Vec::as_slice).collect();
        if refs.iter().any(|c| c.len() != self.n) {
            return Err(Error::dim("glm::design", "column length differs from n"));
        }
        let mut d = Design::from_columns(self.names, &refs)?;
        d.n = self.n;
        Ok(d)
    }
}

/// Result of [`fit_wls`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub residual_variance: f64,
    pub design_names: Vec<String>,
    pub weights_used: bool,
}

impl LinearFit {
    pub fn coef(&self, name: &str) -> Option<f64> {
        self.design_names
            .iter()
            .position(|n| n == name)
            .map(|j| self.coefficients[j])
    }

    pub fn se(&self, name: &str) -> Option<f64> {
        self.design_names
            .iter()
            .position(|n| n == name)
            .map(|j| self.std_errors[j])
    }
}

/// Result of [`fit_logistic`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub design_names: Vec<String>,
    pub converged: bool,
    pub iterations: usize,
    pub offset_used: bool,
}

impl LogisticFit {
    pub fn coef(&self, name: &str) -> Option<f64> {
        self.design_names
            .iter()
            .position(|n| n == name)
            .map(|j| self.coefficients[j])
    }

    pub fn se(&self, name: &str) -> Option<f64> {
        self.design_names
            .iter()
            .position(|n| n == name)
            .map(|j| self.std_errors[j])
    }
}

/// In-place Cholesky of a symmetric p x p matrix (lower triangle used).
/// Returns the first column whose pivot collapses relative to its diagonal.
fn cholesky(a: &mut [f64], p: usize) -> std::result::Result<(), usize> {
    for j in 0..p {
        let orig = a[j * p + j];
        let mut d = orig;
        for k in 0..j {
            d -= a[j * p + k] * a[j * p + k];
        }
        if !(d > PIVOT_TOL * orig.abs()) || !d.is_finite() || orig <= 0.0 {
            return Err(j);
        }
        let d = d.sqrt();
        a[j * p + j] = d;
        for i in j + 1..p {
            let mut s = a[i * p + j];
            for k in 0..j {
                s -= a[i * p + k] * a[j * p + k];
            }
            a[i * p + j] = s / d;
        }
    }
    Ok(())
}

fn chol_solve(l: &[f64], p: usize, b: &mut [f64]) {
    for i in 0..p {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * p + k] * b[k];
        }
        b[i] = s / l[i * p + i];
    }
    for i in (0..p).rev() {
        let mut s = b[i];
        for k in i + 1..p {
            s -= l[k * p + i] * b[k];
        }
        b[i] = s / l[i * p + i];
    }
}

fn chol_inverse_diag(l: &[f64], p: usize) -> Vec<f64> {
    (0..p)
        .map(|j| {
            let mut e = vec![0.0; p];
            e[j] = 1.0;
            chol_solve(l, p, &mut e);
            e[j]
        })
        .collect()
}

/// Accumulate `X' diag(w) X` (full symmetric) and `X' diag(w) z`.
fn cross_products(design: &Design, w: &[f64], z: &[f64], xtwx: &mut [f64], xtwz: &mut [f64]) {
    let p = design.p;
    xtwx.iter_mut().for_each(|v| *v = 0.0);
    xtwz.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..design.n {
        let wi = w[i];
        if wi == 0.0 {
            continue;
        }
        let row = design.row(i);
        let wz = wi * z[i];
        for a in 0..p {
            let wa = wi * row[a];
            xtwz[a] += row[a] * wz;
            let base = a * p;
            for b in 0..=a {
                xtwx[base + b] += wa * row[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            xtwx[b * p + a] = xtwx[a * p + b];
        }
    }
}

fn check_inputs(
    op: &'static str,
    design: &Design,
    len: usize,
    w: &[f64],
    offset: Option<&[f64]>,
) -> Result<()> {
    if design.n != len || w.len() != len || offset.is_some_and(|o| o.len() != len) {
        return Err(Error::dim(
            op,
            format!(
                "design has {} rows, response {len}, weights {}",
                design.n,
                w.len()
            ),
        ));
    }
    if design.p == 0 {
        return Err(Error::dim(op, "design has no columns"));
    }
    if w.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::data(op, "weights must be finite and nonnegative"));
    }
    if w.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroWeights { op });
    }
    Ok(())
}

/// Weighted least squares: minimizes `sum w_i (y_i - offset_i - x_i' b)^2`.
pub fn fit_wls(design: &Design, y: &[f64], w: &[f64], offset: Option<&[f64]>) -> Result<LinearFit> {
    const OP: &str = "glm::fit_wls";
    check_inputs(OP, design, y.len(), w, offset)?;
    let p = design.p;
    let z: Vec<f64> = match offset {
        Some(o) => y.iter().zip(o).map(|(a, b)| a - b).collect(),
        None => y.to_vec(),
    };
    let mut xtwx = vec![0.0; p * p];
    let mut beta = vec![0.0; p];
    cross_products(design, w, &z, &mut xtwx, &mut beta);
    cholesky(&mut xtwx, p).map_err(|j| Error::RankDeficient {
        op: OP,
        column: design.names[j].clone(),
    })?;
    chol_solve(&xtwx, p, &mut beta);

    let mut rss = 0.0;
    let mut wsum = 0.0;
    for i in 0..design.n {
        let fitted: f64 = design.row(i).iter().zip(&beta).map(|(x, b)| x * b).sum();
        let e = z[i] - fitted;
        rss += w[i] * e * e;
        wsum += w[i];
    }
    let df = wsum - p as f64;
    if df <= 0.0 {
        return Err(Error::estimation(
            OP,
            format!("no residual degrees of freedom (sum of weights {wsum}, {p} columns)"),
        ));
    }
    let residual_variance = rss / df;
    let std_errors = chol_inverse_diag(&xtwx, p)
        .into_iter()
        .map(|v| (v * residual_variance).max(0.0).sqrt())
        .collect();
    Ok(LinearFit {
        coefficients: beta,
        std_errors,
        residual_variance,
        design_names: design.names.clone(),
        weights_used: w.iter().any(|&v| v != 1.0),
    })
}

/// Weighted Bernoulli log-likelihood at `beta`.
pub fn log_likelihood(
    beta: &[f64],
    design: &Design,
    m: &[u8],
    w: &[f64],
    offset: Option<&[f64]>,
) -> f64 {
    design
        .linear_predictor(beta, offset)
        .iter()
        .zip(m)
        .zip(w)
        .map(|((&eta, &mi), &wi)| wi * (mi as f64 * eta - softplus(eta)))
        .sum()
}

/// Weighted logistic regression by iteratively reweighted least squares.
pub fn fit_logistic(
    design: &Design,
    m: &[u8],
    w: &[f64],
    offset: Option<&[f64]>,
) -> Result<LogisticFit> {
    const OP: &str = "glm::fit_logistic";
    check_inputs(OP, design, m.len(), w, offset)?;
    if m.iter().any(|&v| v > 1) {
        return Err(Error::data(OP, "response must be in {0,1}"));
    }
    let n = design.n;
    let p = design.p;
    let mut beta = vec![0.0; p];
    let mut eta = vec![0.0; n];
    let mut hess = vec![0.0; p * p];
    let mut grad = vec![0.0; p];
    let mut work_w = vec![0.0; n];
    let mut work_z = vec![0.0; n];
    let mut ll = log_likelihood(&beta, design, m, w, offset);
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=MAX_IRLS_ITER {
        iterations = iter;
        for i in 0..n {
            let row = design.row(i);
            let mut s = offset.map_or(0.0, |o| o[i]);
            for (x, b) in row.iter().zip(&beta) {
                s += x * b;
            }
            eta[i] = s;
            let mu = expit(s);
            let v = mu * expit(-s);
            work_w[i] = w[i] * v;
            // Newton step as a weighted LS problem: z = (m - mu) / v.
            work_z[i] = if v > 0.0 { (m[i] as f64 - mu) / v } else { 0.0 };
        }
        cross_products(design, &work_w, &work_z, &mut hess, &mut grad);
        if let Err(j) = cholesky(&mut hess, p) {
            if iter == 1 {
                return Err(Error::RankDeficient {
                    op: OP,
                    column: design.names[j].clone(),
                });
            }
            return Err(Error::Separation {
                op: OP,
                limit: SEPARATION_LIMIT,
            });
        }
        let mut step = grad.clone();
        chol_solve(&hess, p, &mut step);

        // Step halving guards against overshooting on flat likelihoods.
        let mut scale = 1.0;
        let mut candidate = vec![0.0; p];
        let mut new_ll;
        loop {
            for j in 0..p {
                candidate[j] = beta[j] + scale * step[j];
            }
            new_ll = log_likelihood(&candidate, design, m, w, offset);
            if new_ll >= ll - 1e-12 * ll.abs().max(1.0) || scale < 1e-6 {
                break;
            }
            scale *= 0.5;
        }
        let max_delta = (0..p)
            .map(|j| (candidate[j] - beta[j]).abs())
            .fold(0.0, f64::max);
        beta.copy_from_slice(&candidate);
        ll = new_ll;
        if beta.iter().any(|b| b.abs() > SEPARATION_LIMIT) {
            return Err(Error::Separation {
                op: OP,
                limit: SEPARATION_LIMIT,
            });
        }
        if max_delta < IRLS_TOL {
            converged = true;
            break;
        }
    }

    // Fisher information at the final coefficients.
    for i in 0..n {
        let row = design.row(i);
        let mut s = offset.map_or(0.0, |o| o[i]);
        for (x, b) in row.iter().zip(&beta) {
            s += x * b;
        }
        work_w[i] = w[i] * expit(s) * expit(-s);
    }
    cross_products(design, &work_w, &work_z, &mut hess, &mut grad);
    let std_errors = match cholesky(&mut hess, p) {
        Ok(()) => chol_inverse_diag(&hess, p)
            .into_iter()
            .map(|v| v.max(0.0).sqrt())
            .collect(),
        Err(_) => vec![f64::NAN; p],
    };

    Ok(LogisticFit {
        coefficients: beta,
        std_errors,
        design_names: design.names.clone(),
        converged,
        iterations,
        offset_used: offset.is_some(),
    })
}

/// Fitted probabilities, clamped to `[PROB_EPS, 1 - PROB_EPS]`.
pub fn predict_prob(fit: &LogisticFit, design: &Design, offset: Option<&[f64]>) -> Result<Vec<f64>> {
    const OP: &str = "glm::predict_prob";
    if design.p != fit.coefficients.len() {
        return Err(Error::dim(
            OP,
            format!(
                "design has {} columns, fit has {} coefficients",
                design.p,
                fit.coefficients.len()
            ),
        ));
    }
    if offset.is_some_and(|o| o.len() != design.n) {
        return Err(Error::dim(OP, "offset length differs from design rows"));
    }
    Ok(design
        .linear_predictor(&fit.coefficients, offset)
        .into_iter()
        .map(|eta| clamp_prob(expit(eta)))
        .collect())
}
