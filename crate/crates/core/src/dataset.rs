//! Unit-level records with role-tagged columns.
//!
//! A [`Dataset`] holds the outcome `Y`, the binary risk factor `M`, the binary
//! group indicator `R` (1 = comparison, 0 = reference), baseline covariates
//! `C` and intermediate confounders `X`. Effect modifiers (`H1`) and
//! target-factor-allowable covariates (`A^m`) are named subsets of the
//! `X`/`C` columns.

use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A named real-valued column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Covariate {
    pub name: String,
    pub values: Vec<f64>,
}

impl Covariate {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        Covariate {
            name: name.into(),
            values,
        }
    }
}

/// Assignment of CSV header names to analysis roles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleMap {
    pub y: String,
    pub m: String,
    pub r: String,
    #[serde(default)]
    pub c: Vec<String>,
    #[serde(default)]
    pub x: Vec<String>,
    #[serde(default)]
    pub h1: Vec<String>,
    #[serde(default)]
    pub am: Vec<String>,
    /// Swap the group coding (`R := 1 - R`) after loading.
    #[serde(default)]
    pub relabel_groups: bool,
}

impl RoleMap {
    pub fn new(y: &str, m: &str, r: &str) -> Self {
        RoleMap {
            y: y.into(),
            m: m.into(),
            r: r.into(),
            c: vec![],
            x: vec![],
            h1: vec![],
            am: vec![],
            relabel_groups: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RoleNames {
    y: String,
    m: String,
    r: String,
}

/// Immutable, validated analysis dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    names: RoleNames,
    y: Vec<f64>,
    m: Vec<u8>,
    r: Vec<u8>,
    x: Vec<Covariate>,
    c: Vec<Covariate>,
    h1: Vec<String>,
    am: Vec<String>,
}

/// Centers applied to the `C` columns by [`center_covariates`].
#[derive(Debug, Clone, PartialEq)]
pub enum Center {
    Mean,
    Values(Vec<f64>),
}

const OP_NEW: &str = "model_core::dataset";
const OP_LOAD: &str = "model_core::load_dataset";

fn check_binary(op: &'static str, name: &str, v: &[u8]) -> Result<()> {
    if let Some(i) = v.iter().position(|&b| b > 1) {
        return Err(Error::data(
            op,
            format!("column `{name}` row {i} is not in {{0,1}}"),
        ));
    }
    Ok(())
}

impl Dataset {
    /// Build a dataset from role-tagged columns, validating every invariant.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        y: Vec<f64>,
        m: Vec<u8>,
        r: Vec<u8>,
        x: Vec<Covariate>,
        c: Vec<Covariate>,
        h1: Vec<String>,
        am: Vec<String>,
    ) -> Result<Self> {
        let ds = Dataset {
            names: RoleNames {
                y: "y".into(),
                m: "m".into(),
                r: "r".into(),
            },
            y,
            m,
            r,
            x,
            c,
            h1,
            am,
        };
        ds.validate(OP_NEW)?;
        Ok(ds)
    }

    /// Rename the Y/M/R roles (used for CSV output).
    pub fn with_role_names(mut self, y: &str, m: &str, r: &str) -> Self {
        self.names = RoleNames {
            y: y.into(),
            m: m.into(),
            r: r.into(),
        };
        self
    }

    fn validate(&self, op: &'static str) -> Result<()> {
        let n = self.y.len();
        if self.m.len() != n || self.r.len() != n {
            return Err(Error::dim(op, "Y, M and R lengths differ"));
        }
        for cov in self.x.iter().chain(&self.c) {
            if cov.values.len() != n {
                return Err(Error::dim(
                    op,
                    format!("column `{}` has {} rows, expected {n}", cov.name, cov.values.len()),
                ));
            }
            if let Some(row) = cov.values.iter().position(|v| !v.is_finite()) {
                return Err(Error::MissingValue {
                    op,
                    column: cov.name.clone(),
                    row,
                });
            }
        }
        if let Some(row) = self.y.iter().position(|v| !v.is_finite()) {
            return Err(Error::MissingValue {
                op,
                column: self.names.y.clone(),
                row,
            });
        }
        check_binary(op, &self.names.m, &self.m)?;
        check_binary(op, &self.names.r, &self.r)?;
        let n1: usize = self.r.iter().map(|&v| v as usize).sum();
        if n1 == 0 {
            return Err(Error::EmptyGroup {
                op,
                group: "comparison (R=1)",
            });
        }
        if n1 == n {
            return Err(Error::EmptyGroup {
                op,
                group: "reference (R=0)",
            });
        }
        let mut seen = BTreeSet::new();
        for name in self.x.iter().chain(&self.c).map(|c| &c.name) {
            if !seen.insert(name.as_str()) {
                return Err(Error::data(op, format!("duplicate column `{name}`")));
            }
        }
        for name in self.h1.iter().chain(&self.am) {
            if !seen.contains(name.as_str()) {
                return Err(Error::data(
                    op,
                    format!("`{name}` is not an X or C column"),
                ));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }
    pub fn y(&self) -> &[f64] {
        &self.y
    }
    pub fn m(&self) -> &[u8] {
        &self.m
    }
    pub fn r(&self) -> &[u8] {
        &self.r
    }
    pub fn x(&self) -> &[Covariate] {
        &self.x
    }
    pub fn c(&self) -> &[Covariate] {
        &self.c
    }
    pub fn h1(&self) -> &[String] {
        &self.h1
    }
    pub fn am(&self) -> &[String] {
        &self.am
    }

    /// Number of units in group `g`.
    pub fn group_size(&self, g: u8) -> usize {
        self.r.iter().filter(|&&r| r == g).count()
    }

    /// Look up an `X` or `C` column by name.
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.x
            .iter()
            .chain(&self.c)
            .find(|c| c.name == name)
            .map(|c| c.values.as_slice())
    }

    /// Look up any column by name, including the Y/M/R roles.
    pub fn any_column(&self, name: &str) -> Option<Vec<f64>> {
        if name == self.names.y {
            Some(self.y.clone())
        } else if name == self.names.m {
            Some(self.m.iter().map(|&v| v as f64).collect())
        } else if name == self.names.r {
            Some(self.r.iter().map(|&v| v as f64).collect())
        } else {
            self.column(name).map(<[f64]>::to_vec)
        }
    }

    /// History variables `H = (R, X, C)` in that column order.
    pub fn history_names(&self) -> Vec<String> {
        std::iter::once(self.names.r.clone())
            .chain(self.x.iter().map(|c| c.name.clone()))
            .chain(self.c.iter().map(|c| c.name.clone()))
            .collect()
    }

    /// Values of a history variable (R, an X column or a C column).
    pub fn history_column(&self, name: &str) -> Option<Vec<f64>> {
        if name == self.names.r {
            return Some(self.r.iter().map(|&v| v as f64).collect());
        }
        self.column(name).map(<[f64]>::to_vec)
    }

    pub fn r_name(&self) -> &str {
        &self.names.r
    }

    /// Copy of the dataset with an extra `X` column appended.
    pub fn with_x_column(&self, cov: Covariate, effect_modifier: bool) -> Result<Dataset> {
        let mut out = self.clone();
        if effect_modifier {
            out.h1.push(cov.name.clone());
        }
        out.x.push(cov);
        out.validate(OP_NEW)?;
        Ok(out)
    }

    /// Copy with a replaced outcome vector.
    pub fn with_y(&self, y: Vec<f64>) -> Result<Dataset> {
        let mut out = self.clone();
        out.y = y;
        out.validate(OP_NEW)?;
        Ok(out)
    }

    /// Copy with a replaced group vector.
    pub fn with_r(&self, r: Vec<u8>) -> Result<Dataset> {
        let mut out = self.clone();
        out.r = r;
        out.validate(OP_NEW)?;
        Ok(out)
    }

    /// Copy with a replaced effect-modifier set.
    pub fn with_h1(&self, h1: Vec<String>) -> Result<Dataset> {
        let mut out = self.clone();
        out.h1 = h1;
        out.validate(OP_NEW)?;
        Ok(out)
    }

    /// Rows `idx` (repeats allowed) as a new dataset.
    pub fn select(&self, idx: &[usize]) -> Result<Dataset> {
        let pick = |v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let out = Dataset {
            names: self.names.clone(),
            y: pick(&self.y),
            m: idx.iter().map(|&i| self.m[i]).collect(),
            r: idx.iter().map(|&i| self.r[i]).collect(),
            x: self
                .x
                .iter()
                .map(|c| Covariate::new(c.name.clone(), pick(&c.values)))
                .collect(),
            c: self
                .c
                .iter()
                .map(|c| Covariate::new(c.name.clone(), pick(&c.values)))
                .collect(),
            h1: self.h1.clone(),
            am: self.am.clone(),
        };
        if out.group_size(1) == 0 || out.group_size(0) == 0 {
            return Err(Error::EmptyGroup {
                op: "model_core::select",
                group: if out.group_size(1) == 0 {
                    "comparison (R=1)"
                } else {
                    "reference (R=0)"
                },
            });
        }
        Ok(out)
    }

    /// Header names in file order: Y, M, R, X..., C...
    pub fn column_names(&self) -> Vec<String> {
        [&self.names.y, &self.names.m, &self.names.r]
            .into_iter()
            .cloned()
            .chain(self.x.iter().map(|c| c.name.clone()))
            .chain(self.c.iter().map(|c| c.name.clone()))
            .collect()
    }

    /// Role map that reloads what [`Dataset::write_csv`] writes.
    pub fn role_map(&self) -> RoleMap {
        RoleMap {
            y: self.names.y.clone(),
            m: self.names.m.clone(),
            r: self.names.r.clone(),
            c: self.c.iter().map(|c| c.name.clone()).collect(),
            x: self.x.iter().map(|c| c.name.clone()).collect(),
            h1: self.h1.clone(),
            am: self.am.clone(),
            relabel_groups: false,
        }
    }

    /// Write as comma-delimited text with a header row.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        const OP: &str = "model_core::save_dataset";
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(self.column_names())
            .map_err(|e| Error::io(OP, e))?;
        for i in 0..self.n() {
            let mut rec = vec![
                self.y[i].to_string(),
                self.m[i].to_string(),
                self.r[i].to_string(),
            ];
            rec.extend(self.x.iter().chain(&self.c).map(|c| c.values[i].to_string()));
            wr.write_record(&rec).map_err(|e| Error::io(OP, e))?;
        }
        wr.flush().map_err(|e| Error::io(OP, e))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io("model_core::save_dataset", e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

fn parse_cell(col: &str, row: usize, raw: &str) -> Result<f64> {
    let s = raw.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("na") || s.eq_ignore_ascii_case("nan") {
        return Err(Error::MissingValue {
            op: OP_LOAD,
            column: col.into(),
            row,
        });
    }
    s.parse::<f64>().map_err(|_| {
        Error::data(
            OP_LOAD,
            format!("non-numeric value `{s}` in column `{col}` at row {row}"),
        )
    })
}

fn parse_binary(col: &str, row: usize, v: f64) -> Result<u8> {
    if v == 0.0 {
        Ok(0)
    } else if v == 1.0 {
        Ok(1)
    } else {
        Err(Error::data(
            OP_LOAD,
            format!("column `{col}` row {row} value {v} is not in {{0,1}}"),
        ))
    }
}

/// Parse CSV text into a [`Dataset`] according to `roles`.
pub fn read_dataset<R: Read>(reader: R, roles: &RoleMap) -> Result<Dataset> {
    let mut rd = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rd
        .headers()
        .map_err(|e| Error::io(OP_LOAD, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let index: HashMap<&str, usize> = header
        .iter()
        .enumerate()
        .map(|(i, h)| (h.as_str(), i))
        .collect();
    if index.len() != header.len() {
        return Err(Error::data(OP_LOAD, "duplicate header names"));
    }

    let mut assigned: Vec<&String> = vec![&roles.y, &roles.m, &roles.r];
    assigned.extend(&roles.x);
    assigned.extend(&roles.c);
    let mut uniq = BTreeSet::new();
    for name in &assigned {
        if !index.contains_key(name.as_str()) {
            return Err(Error::data(
                OP_LOAD,
                format!("role map names `{name}`, which is not in the header"),
            ));
        }
        if !uniq.insert(name.as_str()) {
            return Err(Error::data(
                OP_LOAD,
                format!("column `{name}` is assigned more than one role"),
            ));
        }
    }
    if let Some(extra) = header.iter().find(|h| !uniq.contains(h.as_str())) {
        return Err(Error::data(
            OP_LOAD,
            format!("header column `{extra}` has no role"),
        ));
    }

    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); header.len()];
    for (row, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| Error::io(OP_LOAD, e))?;
        if rec.len() != header.len() {
            return Err(Error::data(
                OP_LOAD,
                format!("row {row} has {} fields, expected {}", rec.len(), header.len()),
            ));
        }
        for (j, raw) in rec.iter().enumerate() {
            cols[j].push(parse_cell(&header[j], row, raw)?);
        }
    }

    let take = |name: &str| cols[index[name]].clone();
    let binary = |name: &str| -> Result<Vec<u8>> {
        cols[index[name]]
            .iter()
            .enumerate()
            .map(|(row, &v)| parse_binary(name, row, v))
            .collect()
    };
    let mut r = binary(&roles.r)?;
    if roles.relabel_groups {
        r.iter_mut().for_each(|v| *v = 1 - *v);
    }
    let ds = Dataset {
        names: RoleNames {
            y: roles.y.clone(),
            m: roles.m.clone(),
            r: roles.r.clone(),
        },
        y: take(&roles.y),
        m: binary(&roles.m)?,
        r,
        x: roles
            .x
            .iter()
            .map(|n| Covariate::new(n.clone(), take(n)))
            .collect(),
        c: roles
            .c
            .iter()
            .map(|n| Covariate::new(n.clone(), take(n)))
            .collect(),
        h1: roles.h1.clone(),
        am: roles.am.clone(),
    };
    ds.validate(OP_LOAD)?;
    Ok(ds)
}

/// Load a CSV file from disk.
pub fn load_dataset(path: impl AsRef<Path>, roles: &RoleMap) -> Result<Dataset> {
    let f = std::fs::File::open(path.as_ref()).map_err(|e| Error::io(OP_LOAD, e))?;
    read_dataset(std::io::BufReader::new(f), roles)
}

/// Shift the `C` columns so that `center` maps to zero.
///
/// Returns the shifted dataset together with the centers used.
pub fn center_covariates(ds: &Dataset, center: &Center) -> Result<(Dataset, Vec<f64>)> {
    let centers: Vec<f64> = match center {
        Center::Mean => ds
            .c
            .iter()
            .map(|c| c.values.iter().sum::<f64>() / c.values.len() as f64)
            .collect(),
        Center::Values(v) => {
            if v.len() != ds.c.len() {
                return Err(Error::dim(
                    "model_core::center_covariates",
                    format!("{} centers for {} C columns", v.len(), ds.c.len()),
                ));
            }
            v.clone()
        }
    };
    let mut out = ds.clone();
    for (col, &c0) in out.c.iter_mut().zip(&centers) {
        col.values.iter_mut().for_each(|v| *v -= c0);
    }
    Ok((out, centers))
}
