//! Table emitters (CSV/TSV) and report metadata.

use serde::Serialize;

use crate::benchmark::BenchmarkTable;
use crate::decompose::{DecompositionReport, Estimate};
use crate::error::{Error, Result};
use crate::otr::ComplianceStats;
use crate::sensem::GridCell;
use crate::simstudy::MetricsTable;

/// Two-sided normal critical values for 0.05, 0.01 and 0.001.
const Z_CRIT: [(f64, &str); 3] = [(3.290_527, "***"), (2.575_829, "**"), (1.959_964, "*")];

/// Significance stars from a normal approximation.
pub fn stars(estimate: f64, se: Option<f64>) -> &'static str {
    let Some(se) = se.filter(|s| *s > 0.0 && s.is_finite()) else {
        return "";
    };
    let z = (estimate / se).abs();
    Z_CRIT.iter().find(|(c, _)| z >= *c).map_or("", |(_, s)| s)
}

pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        "NA".into()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), num)
}

#[derive(Debug, Clone, Serialize)]
pub struct Assumption {
    pub id: &'static str,
    pub statement: &'static str,
}

/// Identification assumptions the estimates rely on.
pub fn assumptions(benchmarking: bool) -> Vec<Assumption> {
    let mut v = vec![
        Assumption {
            id: "A1",
            statement: "Given group, intermediate confounders and baseline covariates, the risk factor is \
                        unrelated to the potential outcomes (no omitted confounder).",
        },
        Assumption {
            id: "A2",
            statement: "Every unit has a probability strictly between 0 and 1 of each risk-factor level \
                        given group, intermediate confounders and baseline covariates.",
        },
        Assumption {
            id: "A3",
            statement: "A unit's observed outcome equals its potential outcome at the risk-factor level it \
                        actually has.",
        },
    ];
    if benchmarking {
        v.push(Assumption {
            id: "B1",
            statement: "The omitted confounder is independent of group, intermediate confounders and \
                        baseline covariates.",
        });
        v.push(Assumption {
            id: "B2",
            statement: "The effects of the omitted confounder on the outcome and on the logit of the risk \
                        factor do not vary across levels of the other covariates.",
        });
    }
    v
}

fn csv_string<F>(delim: u8, f: F) -> Result<String>
where
    F: FnOnce(&mut csv::Writer<&mut Vec<u8>>) -> csv::Result<()>,
{
    let mut buf = Vec::new();
    {
        let mut w = csv::WriterBuilder::new().delimiter(delim).from_writer(&mut buf);
        f(&mut w).map_err(|e| Error::io("report::write", e))?;
        w.flush().map_err(|e| Error::io("report::write", e))?;
    }
    String::from_utf8(buf).map_err(|e| Error::io("report::write", e))
}

/// Recommendation and compliance percentages by group.
pub fn table1_csv(stats: &[ComplianceStats]) -> Result<String> {
    csv_string(b',', |w| {
        w.write_record(["measure", "method", "comparison", "reference", "total"])?;
        for s in stats {
            for (label, v) in [("recommended_pct", &s.recommendation_pct), ("compliance_pct", &s.compliance_pct)] {
                w.write_record([label.to_string(), s.method.clone(), num(v[0]), num(v[1]), num(v[2])])?;
            }
        }
        Ok(())
    })
}

fn decomposition_rows(r: &DecompositionReport) -> Vec<(&'static str, Estimate)> {
    let pct = |v| Estimate { value: v, se: None };
    vec![
        ("initial_disparity", r.tau),
        ("disparity_remaining_icde", r.zeta_icde),
        ("pct_reduction_icde", pct(r.pct_reduction_icde)),
        ("disparity_reduction_iie", r.delta_iie),
        ("disparity_remaining_iie", r.zeta_iie),
        ("pct_reduction_iie", pct(r.pct_reduction_iie)),
    ]
}

/// Decomposition estimates with standard errors and stars.
pub fn table2_csv(r: &DecompositionReport) -> Result<String> {
    csv_string(b',', |w| {
        w.write_record(["quantity", "estimate", "se", "significance"])?;
        for (label, e) in decomposition_rows(r) {
            w.write_record([label.to_string(), num(e.value), opt(e.se), stars(e.value, e.se).to_string()])?;
        }
        Ok(())
    })
}

fn starred(e: Estimate) -> String {
    if e.value.is_finite() {
        format!("{:.3}{}", e.value, stars(e.value, e.se))
    } else {
        "NA".into()
    }
}

fn se_cell(e: Estimate) -> String {
    e.se.map_or_else(|| "NA".into(), |s| format!("({s:.3})"))
}

/// One column per `(k_m, k_y)` cell after a label column.
pub fn table3_csv(t: &BenchmarkTable) -> Result<String> {
    let labels = [
        "k_m",
        "k_y",
        "beta_u_m",
        "beta_u_y",
        "recommended_pct",
        "disparity_remaining_icde",
        "se_icde",
        "pct_reduction_icde",
        "disparity_reduction_iie",
        "se_delta_iie",
        "disparity_remaining_iie",
        "se_zeta_iie",
        "pct_reduction_iie",
        "status",
    ];
    let columns: Vec<Vec<String>> = t
        .cells
        .iter()
        .map(|c| {
            let fixed = |v: Option<f64>| v.map_or_else(|| "NA".into(), |v| format!("{v:.3}"));
            let mut col = vec![format!("{}", c.k_m), format!("{}", c.k_y), fixed(c.beta_u_m), fixed(c.beta_u_y)];
            match &c.result {
                Some(res) => {
                    let e = &res.estimates;
                    let rec = res.rule_summary.iter().map(|s| s.recommendation_pct[2]).sum::<f64>()
                        / res.rule_summary.len() as f64;
                    col.extend([
                        format!("{rec:.1}"),
                        starred(e.zeta_icde),
                        se_cell(e.zeta_icde),
                        format!("{:.1}", e.pct_reduction_icde),
                        starred(e.delta_iie),
                        se_cell(e.delta_iie),
                        starred(e.zeta_iie),
                        se_cell(e.zeta_iie),
                        format!("{:.1}", e.pct_reduction_iie),
                        "ok".into(),
                    ]);
                }
                None => {
                    col.extend(std::iter::repeat_n("NA".to_string(), 9));
                    col.push(format!("failed: {}", c.error.as_deref().unwrap_or("unknown")));
                }
            }
            col
        })
        .collect();
    csv_string(b',', |w| {
        let mut header = vec!["quantity".to_string()];
        header.extend((1..=columns.len()).map(|k| format!("cell_{k}")));
        w.write_record(&header)?;
        for (i, label) in labels.iter().enumerate() {
            let mut row = vec![label.to_string()];
            row.extend(columns.iter().map(|c| c[i].clone()));
            w.write_record(&row)?;
        }
        Ok(())
    })
}

/// One row per sensitivity-coefficient pair.
pub fn sensitivity_csv(cells: &[GridCell]) -> Result<String> {
    csv_string(b',', |w| {
        w.write_record([
            "beta_u_y",
            "beta_u_m",
            "estimand",
            "estimate",
            "se",
            "significance",
            "status",
        ])?;
        for c in cells {
            let (by, bm) = (num(c.beta_u_y), num(c.beta_u_m));
            match &c.result {
                Some(res) => {
                    for (label, e) in decomposition_rows(&res.estimates) {
                        w.write_record([
                            by.clone(),
                            bm.clone(),
                            label.to_string(),
                            num(e.value),
                            opt(e.se),
                            stars(e.value, e.se).to_string(),
                            "ok".into(),
                        ])?;
                    }
                }
                None => w.write_record([
                    by,
                    bm,
                    "NA".into(),
                    "NA".into(),
                    "NA".into(),
                    String::new(),
                    format!("failed: {}", c.error.as_deref().unwrap_or("unknown")),
                ])?,
            }
        }
        Ok(())
    })
}

/// `b_u^y` rows by `b_u^m` columns for one estimand.
pub fn contour_tsv(cells: &[GridCell], estimand: &str) -> Result<String> {
    let mut ys: Vec<f64> = cells.iter().map(|c| c.beta_u_y).collect();
    let mut ms: Vec<f64> = cells.iter().map(|c| c.beta_u_m).collect();
    for v in [&mut ys, &mut ms] {
        v.sort_by(f64::total_cmp);
        v.dedup();
    }
    csv_string(b'\t', |w| {
        let mut header = vec!["beta_u_y\\beta_u_m".to_string()];
        header.extend(ms.iter().map(|m| num(*m)));
        w.write_record(&header)?;
        for &y in &ys {
            let mut row = vec![num(y)];
            for &m in &ms {
                let v = cells
                    .iter()
                    .find(|c| c.beta_u_y == y && c.beta_u_m == m)
                    .and_then(|c| c.result.as_ref())
                    .and_then(|r| {
                        decomposition_rows(&r.estimates)
                            .into_iter()
                            .find(|(l, _)| *l == estimand)
                            .map(|(_, e)| e.value)
                    });
                row.push(opt(v));
            }
            w.write_record(&row)?;
        }
        Ok(())
    })
}

const ESTIMANDS: [&str; 4] = ["tau", "zeta_icde", "delta_iie", "zeta_iie"];

/// Median and quartiles per cell and metric.
pub fn metrics_csv(tables: &[MetricsTable]) -> Result<String> {
    csv_string(b',', |w| {
        w.write_record([
            "mode", "beta_u_y", "beta_u_m", "n", "adjusted", "metric", "median", "q25", "q75", "mean",
            "completed", "failed",
        ])?;
        for t in tables {
            for c in &t.cells {
                let key = [
                    c.mode.label().to_string(),
                    num(c.sp.0),
                    num(c.sp.1),
                    c.n.to_string(),
                    c.adjusted.to_string(),
                ];
                let mut put = |metric: String, s: [f64; 4]| {
                    let mut row = key.to_vec();
                    row.push(metric);
                    row.extend(s.iter().map(|v| num(*v)));
                    row.push(c.completed.to_string());
                    row.push(c.failed.to_string());
                    w.write_record(&row)
                };
                let a = c.accuracy;
                put("accuracy".into(), [a.median, a.q25, a.q75, a.mean])?;
                for (j, b) in c.bias.iter().enumerate() {
                    put(format!("bias_{}", ESTIMANDS[j]), [b.median, b.q25, b.q75, b.mean])?;
                }
                if let Some(cov) = c.coverage {
                    for (j, v) in cov.iter().enumerate() {
                        put(format!("coverage_{}", ESTIMANDS[j]), [f64::NAN, f64::NAN, f64::NAN, *v])?;
                    }
                }
            }
        }
        Ok(())
    })
}

/// Long-format per-replication values for box plots.
pub fn metrics_plot_tsv(tables: &[MetricsTable]) -> Result<String> {
    csv_string(b'\t', |w| {
        w.write_record(["mode", "beta_u_y", "beta_u_m", "n", "adjusted", "iteration", "metric", "value"])?;
        for t in tables {
            let truth = t.truth.as_array();
            for c in &t.cells {
                for r in &c.replications {
                    let key = [
                        c.mode.label().to_string(),
                        num(c.sp.0),
                        num(c.sp.1),
                        c.n.to_string(),
                        c.adjusted.to_string(),
                        r.iteration.to_string(),
                    ];
                    let mut put = |metric: &str, v: f64| {
                        let mut row = key.to_vec();
                        row.push(metric.to_string());
                        row.push(num(v));
                        w.write_record(&row)
                    };
                    put("accuracy", r.accuracy)?;
                    for j in 0..4 {
                        put(&format!("estimate_{}", ESTIMANDS[j]), r.estimates[j])?;
                        put(&format!("truth_{}", ESTIMANDS[j]), truth[j])?;
                    }
                }
            }
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn star_thresholds() {
        assert_eq!(stars(1.0, Some(1.0)), "");
        assert_eq!(stars(2.0, Some(1.0)), "*");
        assert_eq!(stars(-2.6, Some(1.0)), "**");
        assert_eq!(stars(3.3, Some(1.0)), "***");
        assert_eq!(stars(3.3, None), "");
    }

    #[test]
    fn assumption_ledger() {
        assert_eq!(assumptions(false).len(), 3);
        let ids: Vec<_> = assumptions(true).iter().map(|a| a.id).collect();
        assert_eq!(ids, ["A1", "A2", "A3", "B1", "B2"]);
    }
}
