//! Table emission: CSV (lossless, one struct per row) and booktabs LaTeX.

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{ArmSummary, ResultsDocument};
use crate::cost::display_savings_pct;
use crate::{Arm, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Latex,
}

impl std::str::FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(TableFormat::Csv),
            "latex" => Ok(TableFormat::Latex),
            _ => Err(Error::InvalidParameter(format!(
                "unknown table format `{s}` (expected csv or latex)"
            ))),
        }
    }
}

/// A rendered table: file name and contents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedTable {
    pub file_name: String,
    pub contents: String,
}

pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Serialization(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Serialization(e.to_string()))
}

pub fn from_csv<T: DeserializeOwned>(text: &str) -> Result<Vec<T>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

fn arm_label(arm: Arm) -> String {
    match arm {
        Arm::Control | Arm::Light | Arm::Moderate | Arm::Aggressive => {
            let mut name = arm.name().to_string();
            name[..1].make_ascii_uppercase();
            format!("{name} ($r = {}$)", arm.target_r())
        }
        _ => {
            let mut name = arm.name().to_string();
            name[..1].make_ascii_uppercase();
            name
        }
    }
}

fn opt(v: Option<f64>, f: impl Fn(f64) -> String) -> String {
    v.map(f).unwrap_or_else(|| "---".into())
}

fn stars(p: Option<f64>) -> &'static str {
    match p {
        Some(p) if p < 0.001 => "$^{***}$",
        Some(p) if p < 0.01 => "$^{**}$",
        Some(p) if p < 0.05 => "$^{*}$",
        _ => "",
    }
}

fn latex(caption: &str, label: &str, columns: &str, header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    out.push_str("\\begin{table}[h]\n\\centering\n");
    out.push_str(&format!("\\caption{{{caption}}}\n\\label{{{label}}}\n"));
    out.push_str(&format!("\\begin{{tabular}}{{{columns}}}\n\\toprule\n"));
    out.push_str(&header.join(" & "));
    out.push_str(" \\\\\n\\midrule\n");
    for r in rows {
        out.push_str(&r.join(" & "));
        out.push_str(" \\\\\n");
    }
    out.push_str("\\bottomrule\n\\end{tabular}\n\\end{table}\n");
    out
}

fn savings_cell(s: &ArmSummary) -> String {
    match s.savings {
        Some(v) => format!("${}${}", display_savings_pct(v), stars(s.net_savings_p)),
        None => "---".into(),
    }
}

/// Arm summary, similarity by arm, Pareto, assignment sensitivity and
/// missingness tables. Tables without data are omitted.
pub fn render_tables(doc: &ResultsDocument, format: TableFormat) -> Result<Vec<RenderedTable>> {
    let mut out = Vec::new();
    let mut push = |stem: &str, contents: String| {
        let ext = match format {
            TableFormat::Csv => "csv",
            TableFormat::Latex => "tex",
        };
        out.push(RenderedTable {
            file_name: format!("{stem}.{ext}"),
            contents,
        });
    };
    let csv = format == TableFormat::Csv;

    push(
        "arm_summary",
        if csv {
            to_csv(&doc.arm_summaries)?
        } else {
            let rows = doc
                .arm_summaries
                .iter()
                .map(|s| {
                    vec![
                        arm_label(s.arm),
                        s.n.to_string(),
                        opt(s.mean_in_tokens, |v| format!("{v:.0}")),
                        opt(s.mean_out_tokens, |v| format!("{v:.0}")),
                        format!("{:.4}", s.mean_cost),
                        savings_cell(s),
                    ]
                })
                .collect::<Vec<_>>();
            latex(
                &format!("Arm-level summary ({} population).", doc.population.label()),
                "tab:arm_summary",
                "lrrrrr",
                &["Arm", "$n$", "Mean In", "Mean Out", "Mean Cost (\\$)", "Savings"],
                &rows,
            )
        },
    );

    if !doc.similarity_by_arm.is_empty() {
        push(
            "similarity_by_arm",
            if csv {
                to_csv(&doc.similarity_by_arm)?
            } else {
                let rows = doc
                    .similarity_by_arm
                    .iter()
                    .map(|r| {
                        vec![
                            arm_label(r.arm),
                            r.n.to_string(),
                            format!("${:.3}${} ({:.3})", r.mean, stars(r.p_adj_vs_aggressive), r.sd),
                            format!("{:.1}\\%", r.pct_preserved),
                            opt(r.cohens_d_vs_aggressive, |d| format!("{d:.2}")),
                        ]
                    })
                    .collect::<Vec<_>>();
                latex(
                    "Response similarity by arm.",
                    "tab:similarity",
                    "lrrrr",
                    &["Arm", "n", "Mean Similarity (SD)", "\\% Preserved", "$d$"],
                    &rows,
                )
            },
        );
    }

    if !doc.pareto.is_empty() {
        push(
            "pareto",
            if csv {
                to_csv(&doc.pareto)?
            } else {
                let rows = doc
                    .arm_summaries
                    .iter()
                    .filter_map(|s| {
                        let status = match doc.pareto.iter().find(|p| p.arm == s.arm) {
                            Some(p) if p.dominated => "No",
                            Some(_) => "\\textbf{Yes}",
                            None if s.arm == Arm::Control => "Baseline",
                            None => return None,
                        };
                        Some(vec![
                            arm_label(s.arm),
                            format!("\\${:.4}", s.mean_cost),
                            savings_cell(s),
                            opt(s.mean_similarity, |v| format!("{v:.3}")),
                            opt(s.pct_preserved, |v| format!("{v:.1}\\%")),
                            status.to_string(),
                        ])
                    })
                    .collect::<Vec<_>>();
                latex(
                    "Cost--similarity Pareto analysis.",
                    "tab:pareto",
                    "lrrrrl",
                    &["Arm", "Mean Cost", "Savings", "Similarity", "Preserved", "Pareto?"],
                    &rows,
                )
            },
        );
    }

    if let Some(sens) = &doc.assignment_sensitivity {
        push(
            "assignment_sensitivity",
            if csv {
                to_csv(sens)?
            } else {
                let rows = sens
                    .iter()
                    .map(|r| {
                        vec![
                            arm_label(r.arm),
                            r.assigned.to_string(),
                            r.successful.to_string(),
                            format!("{:.6}", r.mean_cost),
                            opt(r.successes_per_dollar, |v| format!("{v:.1}")),
                            opt(r.cost_reduction, |v| format!("{:.1}\\%", v * 100.0)),
                        ]
                    })
                    .collect::<Vec<_>>();
                latex(
                    "Assignment-level sensitivity over all randomized submissions.",
                    "tab:assignment",
                    "lrrrrr",
                    &[
                        "Arm",
                        "Assigned",
                        "Successful",
                        "Mean Cost (\\$)",
                        "Successes/\\$",
                        "Cost Reduction",
                    ],
                    &rows,
                )
            },
        );
    }

    if let Some(m) = &doc.missingness {
        push(
            "missingness",
            if csv {
                to_csv(&m.composition)?
            } else {
                let cell = |n: Option<usize>, v: f64| match n {
                    Some(n) => format!("{n} ({v:.1}\\%)"),
                    None => format!("{v:.1}"),
                };
                let rows = m
                    .composition
                    .iter()
                    .map(|r| {
                        vec![
                            r.metric.clone(),
                            cell(r.full_n, r.full_value),
                            cell(r.complete_n, r.complete_value),
                        ]
                    })
                    .collect::<Vec<_>>();
                latex(
                    "Full randomized set vs complete-case set.",
                    "tab:missingness",
                    "lrr",
                    &[
                        "Metric",
                        &format!("Full ($N={}$)", m.full_n),
                        &format!("Complete-Case ($N={}$)", m.complete_n),
                    ],
                    &rows,
                )
            },
        );
    }
    Ok(out)
}
