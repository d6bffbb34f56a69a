//! Text, JSON and CSV rendering of evaluation and comparison reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use pointmatch_core::evaluation::{EvalReport, ProtocolComparison};
use serde_json::{json, Value};

use crate::error::CliError;
use crate::manifest::RunManifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Table,
    Json,
    Csv,
}

impl FromStr for OutputFormat {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "table" => Ok(OutputFormat::Table),
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(CliError::Config(format!("unknown format {other:?}"))),
        }
    }
}

/// Optional display names for class ids.
#[derive(Debug, Clone, Default)]
pub struct ClassNames(pub BTreeMap<u32, String>);

impl ClassNames {
    /// Binds `pos,neg,...` to ids 1, 2, ...
    pub fn from_list(list: &str) -> Self {
        Self(
            list.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .enumerate()
                .map(|(k, name)| (k as u32 + 1, name.to_string()))
                .collect(),
        )
    }

    pub fn get(&self, id: u32) -> Option<&str> {
        self.0.get(&id).map(String::as_str)
    }

    fn label(&self, id: u32) -> String {
        match self.get(id) {
            Some(name) => format!("{id} {name}"),
            None => id.to_string(),
        }
    }
}

fn fmt_delta(d: Option<f64>) -> String {
    match d {
        Some(v) => format!("{v:+.2}%"),
        None => "n/a".into(),
    }
}

fn json_delta(d: Option<f64>) -> Value {
    d.map_or(Value::Null, |v| json!(v))
}

fn eval_payload(report: &EvalReport, names: &ClassNames) -> Value {
    let per_class: Vec<Value> = report
        .per_class
        .iter()
        .map(|c| {
            let mut obj = json!({
                "class_id": c.counts.class_id,
                "tp": c.counts.tp,
                "fp": c.counts.fp,
                "fn": c.counts.fn_,
                "f1": c.f1,
            });
            if let Some(name) = names.get(c.counts.class_id) {
                obj["name"] = json!(name);
            }
            obj
        })
        .collect();
    json!({
        "protocol": report.protocol,
        "aggregate": report.aggregate,
        "radius": report.radius,
        "images": report.images,
        "per_class": per_class,
        "macro_f1": report.macro_f1,
    })
}

pub fn render_eval(report: &EvalReport, names: &ClassNames, manifest: &RunManifest, format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => {
            let mut v = eval_payload(report, names);
            v["manifest"] = serde_json::to_value(manifest).expect("manifest serializes");
            pretty(&v)
        }
        OutputFormat::Csv => {
            let mut out = manifest.comment_lines();
            out.push_str("class_id,name,tp,fp,fn,f1\n");
            for c in &report.per_class {
                let k = c.counts;
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    k.class_id,
                    names.get(k.class_id).unwrap_or(""),
                    k.tp,
                    k.fp,
                    k.fn_,
                    c.f1
                );
            }
            let _ = writeln!(out, "macro,,,,,{}", report.macro_f1);
            out
        }
        OutputFormat::Table => {
            let mut out = String::new();
            let _ = writeln!(
                out,
                "protocol: {}  aggregate: {}  radius: {}  images: {}\n",
                report.protocol, report.aggregate, report.radius, report.images
            );
            let _ = writeln!(out, "{:<16}{:>8}{:>8}{:>8}{:>10}", "class", "tp", "fp", "fn", "f1");
            for c in &report.per_class {
                let k = c.counts;
                let _ = writeln!(
                    out,
                    "{:<16}{:>8}{:>8}{:>8}{:>10.4}",
                    names.label(k.class_id),
                    k.tp,
                    k.fp,
                    k.fn_,
                    c.f1
                );
            }
            let _ = writeln!(out, "{:<40}{:>10.4}\n", "macro F1", report.macro_f1);
            out.push_str(&manifest.comment_lines());
            out
        }
    }
}

pub fn render_comparison(
    cmp: &ProtocolComparison,
    names: &ClassNames,
    manifest: &RunManifest,
    format: OutputFormat,
) -> String {
    let images = cmp.reports.first().map_or(0, |r| r.images);
    match format {
        OutputFormat::Json => {
            let rows: Vec<Value> = cmp
                .rows
                .iter()
                .map(|row| {
                    json!({
                        "protocol": row.protocol,
                        "macro_f1": row.macro_f1,
                        "macro_delta_pct": json_delta(row.macro_delta_pct),
                        "per_class": row.per_class.iter().map(|c| {
                            let mut obj = json!({
                                "class_id": c.class_id,
                                "f1": c.f1,
                                "delta_pct": json_delta(c.delta_pct),
                            });
                            if let Some(name) = names.get(c.class_id) {
                                obj["name"] = json!(name);
                            }
                            obj
                        }).collect::<Vec<_>>(),
                    })
                })
                .collect();
            let v = json!({
                "radius": cmp.radius,
                "aggregate": cmp.aggregate,
                "images": images,
                "rows": rows,
                "reports": cmp.reports.iter().map(|r| eval_payload(r, names)).collect::<Vec<_>>(),
                "manifest": manifest,
            });
            pretty(&v)
        }
        OutputFormat::Csv => {
            let mut out = manifest.comment_lines();
            out.push_str("protocol,class_id,f1,delta_pct\n");
            for row in &cmp.rows {
                for c in &row.per_class {
                    let _ = writeln!(out, "{},{},{},{}", row.protocol, c.class_id, c.f1, csv_delta(c.delta_pct));
                }
                let _ = writeln!(out, "{},macro,{},{}", row.protocol, row.macro_f1, csv_delta(row.macro_delta_pct));
            }
            out
        }
        OutputFormat::Table => {
            let mut out = String::new();
            let _ = writeln!(
                out,
                "aggregate: {}  radius: {}  images: {}\n",
                cmp.aggregate, cmp.radius, images
            );
            let _ = write!(out, "{:<16}{:>10}{:>10}", "protocol", "macro F1", "Δ%");
            if let Some(first) = cmp.rows.first() {
                for c in &first.per_class {
                    let label = names.label(c.class_id);
                    let _ = write!(out, "{:>14}{:>10}", format!("F1[{label}]"), "Δ%");
                }
            }
            out.push('\n');
            for row in &cmp.rows {
                let _ = write!(
                    out,
                    "{:<16}{:>10.4}{:>10}",
                    row.protocol.as_str(),
                    row.macro_f1,
                    fmt_delta(row.macro_delta_pct)
                );
                for c in &row.per_class {
                    let _ = write!(out, "{:>14.4}{:>10}", c.f1, fmt_delta(c.delta_pct));
                }
                out.push('\n');
            }
            out.push('\n');
            out.push_str(&manifest.comment_lines());
            out
        }
    }
}

fn csv_delta(d: Option<f64>) -> String {
    d.map_or_else(|| "n/a".into(), |v| v.to_string())
}

pub fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
    s.push('\n');
    s
}
