use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::experiment::{summarize, ExperimentRecord};
use crate::error::{Error, Result};

/// One report row as written to CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub data: String,
    pub train_test: String,
    pub model: String,
    /// Per-seed accuracies joined by `;`.
    pub accuracies: String,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub params: usize,
}

impl From<&ExperimentRecord> for ReportRow {
    fn from(r: &ExperimentRecord) -> Self {
        ReportRow {
            data: r.data.clone(),
            train_test: r.train_test.clone(),
            model: r.model.clone(),
            accuracies: r
                .accuracies
                .iter()
                .map(|a| a.to_string())
                .collect::<Vec<_>>()
                .join(";"),
            mean: r.summary.map(|s| s.mean),
            std: r.summary.map(|s| s.std),
            params: r.params,
        }
    }
}

impl ReportRow {
    pub fn accuracy_values(&self) -> Result<Vec<f64>> {
        if self.accuracies.is_empty() {
            return Ok(Vec::new());
        }
        self.accuracies
            .split(';')
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| Error::param(format!("bad accuracy {s:?}: {e}")))
            })
            .collect()
    }

    /// `"0.75 ± 0.01"`, or `"—"` without enough seeds.
    pub fn accuracy_cell(&self) -> String {
        match (self.mean, self.std) {
            (Some(m), Some(s)) => format!("{m:.2} ± {s:.2}"),
            _ => match self.accuracy_values() {
                Ok(v) if v.len() >= 3 => {
                    let s = summarize(&v).expect("len checked");
                    format!("{:.2} ± {:.2}", s.mean, s.std)
                }
                _ => "—".to_string(),
            },
        }
    }
}

pub fn thousands(n: usize) -> String {
    let s = n.to_string();
    let mut out = String::with_capacity(s.len() + s.len() / 3);
    for (i, c) in s.chars().enumerate() {
        if i > 0 && (s.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

/// First CNN row's parameters over the first GNN row's.
pub fn compression_factor(rows: &[ReportRow]) -> Option<f64> {
    let cnn = rows.iter().find(|r| r.model == "CNN")?;
    let gnn = rows.iter().find(|r| r.model == "GNN")?;
    if gnn.params == 0 {
        return None;
    }
    Some(cnn.params as f64 / gnn.params as f64)
}

pub fn write_csv<W: Write>(w: W, rows: &[ReportRow]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<ReportRow>> {
    let mut rd = csv::Reader::from_reader(r);
    rd.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Aligned text table plus the compression line when both model kinds appear.
pub fn render_table(rows: &[ReportRow]) -> String {
    let header = ["Data", "Train-Test", "Model", "Accuracy", "Parameters"];
    let body: Vec<[String; 5]> = rows
        .iter()
        .map(|r| {
            [
                r.data.clone(),
                r.train_test.clone(),
                r.model.clone(),
                r.accuracy_cell(),
                thousands(r.params),
            ]
        })
        .collect();
    let mut width = header.map(|h| h.chars().count());
    for row in &body {
        for (w, c) in width.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&width)
            .enumerate()
            .map(|(i, (c, w))| {
                let pad = w - c.chars().count();
                if i == 4 {
                    format!("{}{}", " ".repeat(pad), c)
                } else {
                    format!("{}{}", c, " ".repeat(pad))
                }
            })
            .collect();
        format!("| {} |\n", parts.join(" | "))
    };
    let mut out = line(&header.map(String::from));
    let rule: Vec<String> = width.iter().map(|w| "-".repeat(*w)).collect();
    out.push_str(&format!("|-{}-|\n", rule.join("-|-")));
    for row in &body {
        out.push_str(&line(row));
    }
    if let Some(f) = compression_factor(rows) {
        out.push_str(&format!(
            "\nCompression factor (CNN/GNN parameters): {f:.1}\n"
        ));
    }
    out
}

pub fn rows(records: &[ExperimentRecord]) -> Vec<ReportRow> {
    records.iter().map(ReportRow::from).collect()
}
