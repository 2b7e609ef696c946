//! Decision rules mapping history variables `H = (R, X, C)` to `{0, 1}`.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Binary decision tree; units with `x <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        label: u8,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn predict(&self, row: &[f64]) -> u8 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { label } => return *label,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if row[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.leaves() + right.leaves(),
        }
    }
}

/// One (per-group or pooled) rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RuleModel {
    Constant {
        value: u8,
    },
    /// Recommends 1 when `intercept + coefficients . features > 0`.
    Linear {
        intercept: f64,
        coefficients: Vec<f64>,
        features: Vec<String>,
    },
    Tree {
        root: TreeNode,
        features: Vec<String>,
    },
}

impl RuleModel {
    fn features(&self) -> &[String] {
        match self {
            RuleModel::Constant { .. } => &[],
            RuleModel::Linear { features, .. } | RuleModel::Tree { features, .. } => features,
        }
    }

    #[inline]
    fn eval(&self, row: &[f64]) -> u8 {
        match self {
            RuleModel::Constant { value } => *value,
            RuleModel::Linear {
                intercept,
                coefficients,
                ..
            } => {
                let score: f64 = intercept
                    + coefficients
                        .iter()
                        .zip(row)
                        .map(|(b, x)| b * x)
                        .sum::<f64>();
                (score > 0.0) as u8
            }
            RuleModel::Tree { root, .. } => root.predict(row),
        }
    }

    /// Human-readable rendering.
    pub fn describe(&self) -> String {
        match self {
            RuleModel::Constant { value } => format!("d = {value}"),
            RuleModel::Linear {
                intercept,
                coefficients,
                features,
            } => {
                let mut s = format!("I({intercept:.4}");
                for (b, f) in coefficients.iter().zip(features) {
                    s.push_str(&format!(" {} {:.4}*{f}", if *b < 0.0 { '-' } else { '+' }, b.abs()));
                }
                s.push_str(" > 0)");
                s
            }
            RuleModel::Tree { root, features } => describe_tree(root, features),
        }
    }
}

fn describe_tree(node: &TreeNode, features: &[String]) -> String {
    match node {
        TreeNode::Leaf { label } => label.to_string(),
        TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        } => format!(
            "({} <= {:.4} ? {} : {})",
            features[*feature],
            threshold,
            describe_tree(left, features),
            describe_tree(right, features)
        ),
    }
}

/// Group-stratified or pooled decision rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRule {
    pub stratified: bool,
    /// One model when pooled; `[reference (R=0), comparison (R=1)]` when stratified.
    pub models: Vec<RuleModel>,
}

impl DecisionRule {
    pub fn constant(value: u8) -> Self {
        DecisionRule {
            stratified: false,
            models: vec![RuleModel::Constant { value }],
        }
    }

    pub fn pooled(model: RuleModel) -> Self {
        DecisionRule {
            stratified: false,
            models: vec![model],
        }
    }

    pub fn stratified(reference: RuleModel, comparison: RuleModel) -> Self {
        DecisionRule {
            stratified: true,
            models: vec![reference, comparison],
        }
    }

    pub fn model_for_group(&self, r: u8) -> &RuleModel {
        if self.stratified {
            &self.models[r as usize]
        } else {
            &self.models[0]
        }
    }
}

fn feature_matrix(model: &RuleModel, ds: &Dataset) -> Result<Vec<Vec<f64>>> {
    model
        .features()
        .iter()
        .map(|f| {
            ds.history_column(f).ok_or_else(|| {
                Error::data(
                    "otr::apply_rule",
                    format!("schema mismatch: rule uses `{f}`, which the dataset lacks"),
                )
            })
        })
        .collect()
}

/// Recommendations `d(H_i)` for every unit.
pub fn apply_rule(rule: &DecisionRule, ds: &Dataset) -> Result<Vec<u8>> {
    if rule.models.is_empty() || (rule.stratified && rule.models.len() != 2) {
        return Err(Error::data("otr::apply_rule", "malformed rule"));
    }
    let cols: Vec<Vec<Vec<f64>>> = rule
        .models
        .iter()
        .map(|m| feature_matrix(m, ds))
        .collect::<Result<_>>()?;
    let mut row = Vec::new();
    Ok((0..ds.n())
        .map(|i| {
            let g = if rule.stratified { ds.r()[i] as usize } else { 0 };
            row.clear();
            row.extend(cols[g].iter().map(|c| c[i]));
            rule.models[g].eval(&row)
        })
        .collect())
}
