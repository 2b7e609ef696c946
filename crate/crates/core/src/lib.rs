pub mod benchmark;
pub mod cli;
pub mod dataset;
pub mod decompose;
pub mod error;
pub mod glm;
pub mod otr;
pub mod report;
pub mod rule;
pub mod seed;
pub mod sensem;
pub mod simstudy;

pub use dataset::{Center, Covariate, Dataset, RoleMap};
pub use error::{Error, Result};
pub use rule::{DecisionRule, RuleModel, TreeNode};
