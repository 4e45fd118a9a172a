//! CSV and plain-text renderings of evaluation results, and the bundled
//! table of published reference accuracies.

use std::fmt::Write as _;

use histnorm_core::eval::{EvalReport, EvalRow, LearningCurve, Method, Setup};

use crate::Result;

pub const CSV_HEADER: [&str; 7] = ["text_id", "method", "setup", "train_size", "eval_size", "accuracy", "seed"];

/// Rows in the order given, one CSV record each.
pub fn rows_to_csv(rows: &[EvalRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.text_id.clone(),
            r.method.name().to_string(),
            r.setup.name().to_string(),
            r.train_size.to_string(),
            r.eval_size.to_string(),
            r.accuracy.to_string(),
            r.seed.to_string(),
        ])?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| crate::Error::io("<csv buffer>", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("CSV of UTF-8 fields"))
}

pub fn report_to_csv(report: &EvalReport) -> Result<String> {
    rows_to_csv(&report.rows)
}

pub fn curve_to_csv(curve: &LearningCurve) -> Result<String> {
    let rows: Vec<EvalRow> = curve
        .points
        .iter()
        .map(|p| EvalRow {
            text_id: curve.text_id.clone(),
            token_count: 0,
            method: p.method,
            setup: p.setup,
            train_size: p.train_size,
            eval_size: p.eval_size,
            accuracy: p.accuracy,
            seed: p.seed,
        })
        .collect();
    rows_to_csv(&rows)
}

/// Parses CSV in the report schema back into rows (token counts are 0).
pub fn rows_from_csv(text: &str) -> Result<Vec<EvalRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or_default();
        let bad = |what: &str| crate::Error::Parse {
            path: "csv".into(),
            line: rec.position().map_or(0, |p| p.line() as usize),
            message: format!("bad {what}"),
        };
        out.push(EvalRow {
            text_id: field(0).to_string(),
            token_count: 0,
            method: Method::parse(field(1)).ok_or_else(|| bad("method"))?,
            setup: Setup::parse(field(2)).ok_or_else(|| bad("setup"))?,
            train_size: field(3).parse().map_err(|_| bad("train_size"))?,
            eval_size: field(4).parse().map_err(|_| bad("eval_size"))?,
            accuracy: field(5).parse().map_err(|_| bad("accuracy"))?,
            seed: field(6).parse().map_err(|_| bad("seed"))?,
        });
    }
    Ok(out)
}

fn pct(x: f64) -> String {
    format!("{:.2}%", 100.0 * x)
}

/// Aligned table of rows followed by means and S+A minus S differences.
/// Published reference numbers are appended per text when `reference`
/// has an entry for the text id.
pub fn render_report(report: &EvalReport, reference: Option<&ReferenceTable>) -> String {
    let mut lines: Vec<[String; 7]> = vec![[
        "text".into(),
        "tokens".into(),
        "method".into(),
        "setup".into(),
        "train".into(),
        "accuracy".into(),
        "published".into(),
    ]];
    for r in &report.rows {
        let published = reference
            .and_then(|t| t.lookup(&r.text_id, r.method, r.setup))
            .map(|v| format!("{v:.2}%"))
            .unwrap_or_default();
        lines.push([
            r.text_id.clone(),
            r.token_count.to_string(),
            r.method.name().into(),
            r.setup.name().into(),
            r.train_size.to_string(),
            pct(r.accuracy),
            published,
        ]);
    }
    let mut widths = [0usize; 7];
    for l in &lines {
        for (w, cell) in widths.iter_mut().zip(l) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    for l in &lines {
        let mut line = String::new();
        for (i, (cell, w)) in l.iter().zip(widths).enumerate() {
            if i > 0 {
                line.push_str("  ");
            }
            if i == 0 || i == 2 || i == 3 {
                let _ = write!(line, "{cell:<w$}");
            } else {
                let _ = write!(line, "{cell:>w$}");
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out.push('\n');
    for s in &report.summaries {
        let _ = writeln!(
            out,
            "mean {} {}: {} over {} text(s)",
            s.method.name(),
            s.setup.name(),
            pct(s.mean_accuracy),
            s.texts
        );
    }
    for d in &report.differences {
        let _ = writeln!(
            out,
            "{} S+A - S: {:+.2} pp (sd {:.2} pp, {} text(s))",
            d.method.name(),
            100.0 * d.mean,
            100.0 * d.std_dev,
            d.texts
        );
    }
    out
}

/// One text's published accuracies in percent.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceRow {
    pub text_id: String,
    pub region: String,
    pub tokens: usize,
    pub norma_s: f64,
    pub norma_sa: f64,
    pub crf_s: f64,
    pub crf_sa: f64,
    pub bilstm_s: f64,
    pub bilstm_sa: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTable {
    pub rows: Vec<ReferenceRow>,
}

const BUNDLED_REFERENCE: &str = include_str!("../data/reference_accuracies.csv");

impl ReferenceTable {
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_REFERENCE).expect("bundled reference table parses")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let num = |i: usize| -> Result<f64> {
                rec.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| crate::Error::Parse {
                    path: "reference table".into(),
                    line: rec.position().map_or(0, |p| p.line() as usize),
                    message: format!("bad number in column {}", i + 1),
                })
            };
            rows.push(ReferenceRow {
                text_id: rec.get(0).unwrap_or_default().to_string(),
                region: rec.get(1).unwrap_or_default().to_string(),
                tokens: num(2)? as usize,
                norma_s: num(3)?,
                norma_sa: num(4)?,
                crf_s: num(5)?,
                crf_sa: num(6)?,
                bilstm_s: num(7)?,
                bilstm_sa: num(8)?,
            });
        }
        Ok(ReferenceTable { rows })
    }

    /// Published value for a benchmark cell; the perceptron maps to the
    /// published CRF columns.
    pub fn lookup(&self, text_id: &str, method: Method, setup: Setup) -> Option<f64> {
        let row = self.rows.iter().find(|r| r.text_id == text_id)?;
        match (method, setup) {
            (Method::BiLstm, Setup::S) => Some(row.bilstm_s),
            (Method::BiLstm, Setup::SA) => Some(row.bilstm_sa),
            (Method::Perceptron, Setup::S) => Some(row.crf_s),
            (Method::Perceptron, Setup::SA) => Some(row.crf_sa),
            (Method::Identity, _) => None,
        }
    }

    pub fn mean(&self, column: impl Fn(&ReferenceRow) -> f64) -> f64 {
        self.rows.iter().map(column).sum::<f64>() / self.rows.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(text: &str, setup: Setup, acc: f64) -> EvalRow {
        EvalRow {
            text_id: text.into(),
            token_count: 1200,
            method: Method::BiLstm,
            setup,
            train_size: 200,
            eval_size: 1000,
            accuracy: acc,
            seed: 7,
        }
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![row("B", Setup::S, 0.792), row("B", Setup::SA, 0.817)];
        let text = rows_to_csv(&rows).unwrap();
        assert!(text.starts_with("text_id,method,setup,train_size,eval_size,accuracy,seed\n"));
        assert!(text.contains("B,bilstm,S+A,200,1000,0.817,7\n"));
        let back = rows_from_csv(&text).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].accuracy, 0.817);
        assert_eq!(back[1].setup, Setup::SA);
    }

    #[test]
    fn text_report() {
        let report = EvalReport::from_rows(vec![row("B", Setup::S, 0.5), row("B", Setup::SA, 0.75)]);
        let text = render_report(&report, Some(&ReferenceTable::bundled()));
        assert!(text.contains("79.20%"));
        assert!(text.contains("50.00%"));
        assert!(text.contains("bilstm S+A - S: +25.00 pp"));
    }

    #[test]
    fn bundled_reference() {
        let t = ReferenceTable::bundled();
        assert_eq!(t.rows.len(), 44);
        assert_eq!(t.lookup("KÄ1492", Method::Perceptron, Setup::S), Some(74.8));
        assert_eq!(t.lookup("Le", Method::BiLstm, Setup::SA), Some(67.5));
        assert_eq!(t.lookup("nope", Method::BiLstm, Setup::S), None);
    }
}
