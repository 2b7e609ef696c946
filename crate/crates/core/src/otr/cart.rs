//! Weighted classification trees minimizing weighted 0-1 loss.
//!
//! Splits are axis-aligned at midpoints between consecutive distinct values
//! (`x <= t` goes left). At every node with at least two levels of depth
//! left, the split is chosen by a one-level lookahead: each candidate is
//! scored by the error of the best depth-two subtree rooted at it. With
//! plain greedy growth a 0-1 loss often admits no improving first split even
//! when a depth-two tree does (XOR-like label patterns), so the lookahead is
//! what makes depth-two trees optimal. Lookahead ties go to the split that is
//! better on its own; remaining ties go to the lowest feature index, then the
//! smallest threshold.
//!
//! The lookahead keeps, for every second-level feature, a segment tree of
//! signed label weights over that feature's value order, so scoring all
//! root candidates costs `O(f^2 n log n)`.

use crate::error::{Error, Result};
use crate::rule::TreeNode;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_depth: usize,
    /// Minimum total weight in any leaf created by a split.
    pub min_leaf_weight: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 3,
            min_leaf_weight: 0.0,
        }
    }
}

/// Weighted misclassification of `tree` on `(features, z, w)`, summed in
/// unit order.
pub fn weighted_error(tree: &TreeNode, features: &[Vec<f64>], z: &[u8], w: &[f64]) -> f64 {
    let mut row = vec![0.0; features.len()];
    let mut err = 0.0;
    for i in 0..z.len() {
        for (r, f) in row.iter_mut().zip(features) {
            *r = f[i];
        }
        if tree.predict(&row) != z[i] {
            err += w[i];
        }
    }
    err
}

/// Segment tree storing (sum, max prefix, min prefix) of signed weights.
struct PrefixTree {
    size: usize,
    sum: Vec<f64>,
    maxp: Vec<f64>,
    minp: Vec<f64>,
}

impl PrefixTree {
    fn new(len: usize) -> Self {
        let size = len.max(1).next_power_of_two();
        PrefixTree {
            size,
            sum: vec![0.0; 2 * size],
            maxp: vec![0.0; 2 * size],
            minp: vec![0.0; 2 * size],
        }
    }

    fn reset(&mut self, leaves: &[f64]) {
        let s = self.size;
        self.sum[s..].iter_mut().for_each(|v| *v = 0.0);
        self.sum[s..s + leaves.len()].copy_from_slice(leaves);
        self.maxp[s..].copy_from_slice(&self.sum[s..]);
        self.minp[s..].copy_from_slice(&self.sum[s..]);
        for k in (1..s).rev() {
            self.pull(k);
        }
    }

    #[inline]
    fn pull(&mut self, k: usize) {
        let (l, r) = (2 * k, 2 * k + 1);
        self.sum[k] = self.sum[l] + self.sum[r];
        self.maxp[k] = self.maxp[l].max(self.sum[l] + self.maxp[r]);
        self.minp[k] = self.minp[l].min(self.sum[l] + self.minp[r]);
    }

    #[inline]
    fn add(&mut self, pos: usize, delta: f64) {
        let mut k = self.size + pos;
        self.sum[k] += delta;
        self.maxp[k] = self.sum[k];
        self.minp[k] = self.sum[k];
        k /= 2;
        while k >= 1 {
            self.pull(k);
            k /= 2;
        }
    }
}

/// Error of the best stump given class totals and prefix extrema of
/// `D_k = A_k - B_k` over one feature's value order.
#[inline]
fn stump_error(a: f64, b: f64, max_d: f64, min_d: f64) -> f64 {
    let best = a.max(b).max(b + max_d).max(a - min_d);
    (a + b - best).max(0.0)
}

struct Builder<'a> {
    features: &'a [Vec<f64>],
    z: &'a [u8],
    w: &'a [f64],
    params: TreeParams,
    /// Unit indices sorted by each feature (global order).
    order: Vec<Vec<usize>>,
}

#[derive(Clone, Copy)]
struct Split {
    feature: usize,
    threshold: f64,
    err: f64,
}

impl<'a> Builder<'a> {
    fn totals(&self, units: &[usize]) -> (f64, f64) {
        let mut a = 0.0;
        let mut b = 0.0;
        for &i in units {
            if self.z[i] == 1 {
                a += self.w[i];
            } else {
                b += self.w[i];
            }
        }
        (a, b)
    }

    fn sorted_subset(&self, feature: usize, member: &[bool]) -> Vec<usize> {
        self.order[feature]
            .iter()
            .copied()
            .filter(|&i| member[i])
            .collect()
    }

    /// Best single split of `units`, honoring the minimum leaf weight.
    fn best_stump(&self, units: &[usize], member: &[bool]) -> Option<Split> {
        let (ta, tb) = self.totals(units);
        let total = ta + tb;
        let mut best: Option<Split> = None;
        let tol = 1e-12 * total.max(f64::MIN_POSITIVE);
        for f in 0..self.features.len() {
            let col = &self.features[f];
            let sorted = self.sorted_subset(f, member);
            let (mut a, mut b) = (0.0, 0.0);
            for k in 0..sorted.len().saturating_sub(1) {
                let i = sorted[k];
                if self.z[i] == 1 {
                    a += self.w[i];
                } else {
                    b += self.w[i];
                }
                let (v, next) = (col[i], col[sorted[k + 1]]);
                if v == next {
                    continue;
                }
                let lw = a + b;
                if lw < self.params.min_leaf_weight || total - lw < self.params.min_leaf_weight {
                    continue;
                }
                let err = a.min(b) + (ta - a).min(tb - b);
                if best.is_none_or(|s| err < s.err - tol) {
                    best = Some(Split {
                        feature: f,
                        threshold: 0.5 * (v + next),
                        err,
                    });
                }
            }
        }
        best
    }

    /// Best split of `units` scored by the optimal depth-two subtree below it.
    fn best_lookahead(&self, units: &[usize], member: &[bool]) -> Option<Split> {
        let nf = self.features.len();
        let n = self.z.len();
        let (ta, tb) = self.totals(units);
        let total = ta + tb;
        let tol = 1e-12 * total.max(f64::MIN_POSITIVE);

        // Value-group index of every unit along every feature.
        let mut group = vec![vec![0usize; n]; nf];
        let mut init = Vec::with_capacity(nf);
        let mut sorted_by = Vec::with_capacity(nf);
        for f in 0..nf {
            let col = &self.features[f];
            let sorted = self.sorted_subset(f, member);
            let mut leaves: Vec<f64> = Vec::new();
            let mut last = f64::NAN;
            for &i in &sorted {
                if leaves.is_empty() || col[i] != last {
                    leaves.push(0.0);
                    last = col[i];
                }
                let g = leaves.len() - 1;
                group[f][i] = g;
                leaves[g] += if self.z[i] == 1 { self.w[i] } else { -self.w[i] };
            }
            init.push(leaves);
            sorted_by.push(sorted);
        }
        let mut left: Vec<PrefixTree> = init.iter().map(|l| PrefixTree::new(l.len())).collect();
        let mut right: Vec<PrefixTree> = init.iter().map(|l| PrefixTree::new(l.len())).collect();

        let mut best: Option<Split> = None;
        let mut best_direct = f64::INFINITY;
        for a_feat in 0..nf {
            let col = &self.features[a_feat];
            let sorted = &sorted_by[a_feat];
            for f in 0..nf {
                let zeros = vec![0.0; init[f].len()];
                left[f].reset(&zeros);
                right[f].reset(&init[f]);
            }
            let (mut la, mut lb) = (0.0, 0.0);
            for k in 0..sorted.len().saturating_sub(1) {
                let i = sorted[k];
                let s = if self.z[i] == 1 {
                    la += self.w[i];
                    self.w[i]
                } else {
                    lb += self.w[i];
                    -self.w[i]
                };
                for f in 0..nf {
                    left[f].add(group[f][i], s);
                    right[f].add(group[f][i], -s);
                }
                let (v, next) = (col[i], col[sorted[k + 1]]);
                if v == next {
                    continue;
                }
                let lw = la + lb;
                if lw < self.params.min_leaf_weight || total - lw < self.params.min_leaf_weight {
                    continue;
                }
                let (ra, rb) = (ta - la, tb - lb);
                let mut el = la.min(lb);
                let mut er = ra.min(rb);
                for f in 0..nf {
                    el = el.min(stump_error(la, lb, left[f].maxp[1], left[f].minp[1]));
                    er = er.min(stump_error(ra, rb, right[f].maxp[1], right[f].minp[1]));
                }
                let err = el + er;
                let direct = la.min(lb) + ra.min(rb);
                let better = match best {
                    None => true,
                    Some(s) => {
                        err < s.err - tol || (err <= s.err + tol && direct < best_direct - tol)
                    }
                };
                if better {
                    best_direct = direct;
                    best = Some(Split {
                        feature: a_feat,
                        threshold: 0.5 * (v + next),
                        err,
                    });
                }
            }
        }
        best
    }

    fn grow(&self, units: Vec<usize>, depth_left: usize) -> TreeNode {
        let (a, b) = self.totals(&units);
        let label = (a > b) as u8;
        let leaf_err = a.min(b);
        let tol = 1e-12 * (a + b).max(f64::MIN_POSITIVE);
        if depth_left == 0 || leaf_err <= 0.0 || units.len() < 2 {
            return TreeNode::Leaf { label };
        }
        let mut member = vec![false; self.z.len()];
        units.iter().for_each(|&i| member[i] = true);
        let split = if depth_left >= 2 {
            self.best_lookahead(&units, &member)
        } else {
            self.best_stump(&units, &member)
        };
        let Some(split) = split.filter(|s| s.err < leaf_err - tol) else {
            return TreeNode::Leaf { label };
        };
        let col = &self.features[split.feature];
        let (l, r): (Vec<usize>, Vec<usize>) =
            units.into_iter().partition(|&i| col[i] <= split.threshold);
        let left = self.grow(l, depth_left - 1);
        let right = self.grow(r, depth_left - 1);
        match (&left, &right) {
            (TreeNode::Leaf { label: x }, TreeNode::Leaf { label: y }) if x == y => {
                TreeNode::Leaf { label: *x }
            }
            _ => TreeNode::Split {
                feature: split.feature,
                threshold: split.threshold,
                left: Box::new(left),
                right: Box::new(right),
            },
        }
    }
}

/// Grow a weighted classification tree for labels `z` with weights `w`.
///
/// `features` is column-major: `features[j][i]` is feature `j` of unit `i`.
pub fn grow_tree(features: &[Vec<f64>], z: &[u8], w: &[f64], params: &TreeParams) -> Result<TreeNode> {
    const OP: &str = "otr::fit_weighting_rule";
    let n = z.len();
    if w.len() != n || features.iter().any(|f| f.len() != n) {
        return Err(Error::dim(OP, "features, labels and weights differ in length"));
    }
    if params.max_depth == 0 {
        return Err(Error::config(OP, "max_depth must be at least 1"));
    }
    if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::data(OP, "tree weights must be finite and nonnegative"));
    }
    if features.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::data(OP, "non-finite feature value"));
    }
    let order = features
        .iter()
        .map(|col| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
            idx
        })
        .collect();
    let builder = Builder {
        features,
        z,
        w,
        params: *params,
        order,
    };
    Ok(builder.grow((0..n).collect(), params.max_depth))
}
