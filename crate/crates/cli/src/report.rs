//! The metrics JSON report and its SVG rendering: per-class bars, a
//! confusion heatmap, truth-vs-prediction label strips, and optional
//! peak-series overlays. Rendering is a pure function of the inputs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use vwt_core::metrics::{ClassScores, ConfusionMatrix, RocCurve};

use crate::error::{io_ctx, CliError, Result};
use crate::predictions::SeriesTable;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ClassReport {
    pub condition: String,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub truth_absent: bool,
    pub pred_absent: bool,
    /// One-vs-rest AUC; absent when the class never appears in truth (or
    /// fills it completely).
    pub auc: Option<f64>,
    pub roc: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConditionPcc {
    pub condition: String,
    pub pcc: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MetricsReport {
    pub frames: usize,
    pub conditions: Vec<String>,
    pub accuracy: f64,
    pub macro_recall: f64,
    pub macro_precision: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassReport>,
    /// Row-major truth × prediction counts.
    pub confusion: Vec<Vec<u64>>,
    pub hrf_similarity: Vec<ConditionPcc>,
    pub segment_accuracy: Vec<f64>,
    pub true_labels: Vec<usize>,
    pub pred_labels: Vec<usize>,
}

impl MetricsReport {
    pub fn build(
        conditions: &[String],
        cm: &ConfusionMatrix,
        scores: &ClassScores,
        rocs: &[Option<RocCurve>],
        sims: &[Option<f64>],
        segments: &[f64],
        true_labels: &[usize],
        pred_labels: &[usize],
    ) -> MetricsReport {
        let k = cm.k();
        let per_class = (0..k)
            .map(|c| ClassReport {
                condition: conditions[c].clone(),
                recall: scores.recall[c],
                precision: scores.precision[c],
                f1: scores.f1[c],
                truth_absent: scores.truth_absent[c],
                pred_absent: scores.pred_absent[c],
                auc: rocs[c].as_ref().map(|r| r.auc),
                roc: rocs[c].as_ref().map(|r| r.points.clone()).unwrap_or_default(),
            })
            .collect();
        MetricsReport {
            frames: true_labels.len(),
            conditions: conditions.to_vec(),
            accuracy: scores.accuracy,
            macro_recall: scores.macro_recall,
            macro_precision: scores.macro_precision,
            macro_f1: scores.macro_f1,
            per_class,
            confusion: (0..k)
                .map(|t| (0..k).map(|p| cm.count(t, p)).collect())
                .collect(),
            hrf_similarity: sims
                .iter()
                .enumerate()
                .map(|(i, s)| ConditionPcc {
                    condition: conditions[i + 1].clone(),
                    pcc: *s,
                })
                .collect(),
            segment_accuracy: segments.to_vec(),
            true_labels: true_labels.to_vec(),
            pred_labels: pred_labels.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.conditions.len();
        if self.per_class.len() != k || self.confusion.len() != k {
            return Err(CliError::data(
                "metrics report: per-class arrays do not match the condition list",
            ));
        }
        if self.confusion.iter().any(|row| row.len() != k) {
            return Err(CliError::data("metrics report: confusion matrix not square"));
        }
        if self.true_labels.len() != self.frames || self.pred_labels.len() != self.frames {
            return Err(CliError::data("metrics report: label strips wrong length"));
        }
        Ok(())
    }
}

pub fn write_report(path: &Path, report: &MetricsReport) -> Result<()> {
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    fs::write(path, json + "\n").map_err(|e| io_ctx(path, e))
}

pub fn read_report(path: &Path) -> Result<MetricsReport> {
    let text = fs::read_to_string(path).map_err(|e| io_ctx(path, e))?;
    let report: MetricsReport = serde_json::from_str(&text)
        .map_err(|e| CliError::data(format!("{}: schema violation: {e}", path.display())))?;
    report.validate()?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// SVG rendering
// ---------------------------------------------------------------------------

const WIDTH: f64 = 960.0;
const MARGIN: f64 = 48.0;
const PLOT_W: f64 = WIDTH - 2.0 * MARGIN;

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Fixed palette: evenly spaced hues, rest in gray.
fn class_color(idx: usize, k: usize) -> String {
    if idx == 0 {
        return "#b0b0b0".to_string();
    }
    let hue = (idx - 1) * 360 / k.max(2);
    format!("hsl({hue},70%,45%)")
}

struct Svg {
    body: String,
    cursor: f64,
}

impl Svg {
    fn new() -> Svg {
        Svg {
            body: String::new(),
            cursor: 24.0,
        }
    }

    fn heading(&mut self, text: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{MARGIN}" y="{:.1}" font-size="16" font-weight="bold" font-family="sans-serif">{}</text>"#,
            self.cursor,
            esc(text)
        );
        self.cursor += 16.0;
    }

    fn space(&mut self, px: f64) {
        self.cursor += px;
    }
}

fn bar_panel(svg: &mut Svg, report: &MetricsReport) {
    svg.heading(&format!(
        "Per-state recall (overall accuracy {:.3}, macro F1 {:.3})",
        report.accuracy, report.macro_f1
    ));
    let k = report.conditions.len();
    let h = 140.0;
    let top = svg.cursor;
    let slot = PLOT_W / k as f64;
    for (c, class) in report.per_class.iter().enumerate() {
        let bar_w = slot * 0.6;
        let x = MARGIN + c as f64 * slot + slot * 0.2;
        let bh = class.recall.max(0.0).min(1.0) * h;
        let _ = writeln!(
            svg.body,
            r#"<rect class="bar" x="{x:.1}" y="{:.1}" width="{bar_w:.1}" height="{bh:.1}" fill="{}"><title>{}: recall {:.4}, precision {:.4}, F1 {:.4}</title></rect>"#,
            top + h - bh,
            class_color(c, k),
            esc(&class.condition),
            class.recall,
            class.precision,
            class.f1
        );
        let _ = writeln!(
            svg.body,
            r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="middle" font-family="sans-serif">{}</text>"#,
            x + bar_w / 2.0,
            top + h + 12.0,
            esc(&class.condition)
        );
        let label = match class.auc {
            Some(a) => format!("{:.2}|{:.2}", class.recall, a),
            None => format!("{:.2}", class.recall),
        };
        let _ = writeln!(
            svg.body,
            r#"<text x="{:.1}" y="{:.1}" font-size="9" text-anchor="middle" font-family="sans-serif">{label}</text>"#,
            x + bar_w / 2.0,
            top + h - bh - 3.0,
        );
    }
    let _ = writeln!(
        svg.body,
        r#"<line x1="{MARGIN}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#333" stroke-width="1"/>"#,
        top + h,
        MARGIN + PLOT_W,
        top + h
    );
    svg.cursor = top + h + 32.0;
}

fn heatmap_panel(svg: &mut Svg, report: &MetricsReport) {
    svg.heading("Confusion matrix (rows: truth, columns: prediction)");
    let k = report.conditions.len();
    let cell = (320.0 / k as f64).min(36.0);
    let top = svg.cursor;
    for t in 0..k {
        let row_total: u64 = report.confusion[t].iter().sum();
        for p in 0..k {
            let v = report.confusion[t][p];
            let frac = if row_total == 0 {
                0.0
            } else {
                v as f64 / row_total as f64
            };
            let shade = (255.0 - frac * 200.0) as u8;
            let _ = writeln!(
                svg.body,
                r#"<rect class="cell" x="{:.1}" y="{:.1}" width="{cell:.1}" height="{cell:.1}" fill="rgb({shade},{shade},255)" stroke="#888" stroke-width="0.5"><title>truth {} / pred {}: {v}</title></rect>"#,
                MARGIN + 80.0 + p as f64 * cell,
                top + t as f64 * cell,
                esc(&report.conditions[t]),
                esc(&report.conditions[p]),
            );
            let _ = writeln!(
                svg.body,
                r#"<text x="{:.1}" y="{:.1}" font-size="8" text-anchor="middle" font-family="sans-serif">{v}</text>"#,
                MARGIN + 80.0 + p as f64 * cell + cell / 2.0,
                top + t as f64 * cell + cell / 2.0 + 3.0,
            );
        }
        let _ = writeln!(
            svg.body,
            r#"<text x="{:.1}" y="{:.1}" font-size="9" text-anchor="end" font-family="sans-serif">{}</text>"#,
            MARGIN + 74.0,
            top + t as f64 * cell + cell / 2.0 + 3.0,
            esc(&report.conditions[t])
        );
    }
    svg.cursor = top + k as f64 * cell + 28.0;
}

fn strip(svg: &mut Svg, labels: &[usize], k: usize, caption: &str) {
    let top = svg.cursor;
    let h = 18.0;
    let _ = writeln!(
        svg.body,
        r#"<text x="{MARGIN}" y="{:.1}" font-size="10" font-family="sans-serif">{}</text>"#,
        top - 3.0,
        esc(caption)
    );
    let px = PLOT_W / labels.len() as f64;
    // Merge consecutive frames with the same label into one rect.
    let mut start = 0usize;
    for i in 1..=labels.len() {
        if i == labels.len() || labels[i] != labels[start] {
            let x = MARGIN + start as f64 * px;
            let w = (i - start) as f64 * px;
            let _ = writeln!(
                svg.body,
                r#"<rect class="strip" x="{x:.2}" y="{top:.1}" width="{w:.2}" height="{h:.1}" fill="{}"/>"#,
                class_color(labels[start], k)
            );
            start = i;
        }
    }
    svg.cursor = top + h + 18.0;
}

fn polyline(points: &[(f64, f64)], color: &str, width: f64) -> String {
    let coords: Vec<String> = points
        .iter()
        .map(|(x, y)| format!("{x:.2},{y:.2}"))
        .collect();
    format!(
        r#"<polyline fill="none" stroke="{color}" stroke-width="{width}" points="{}"/>"#,
        coords.join(" ")
    )
}

fn series_panel(svg: &mut Svg, name: &str, table: &SeriesTable) {
    svg.heading(&format!("Series overlay: {name}"));
    let h = 110.0;
    let top = svg.cursor;
    let n = table.frames.len();
    let xs = |i: usize| MARGIN + i as f64 / (n.max(2) - 1) as f64 * PLOT_W;
    let norm = |vals: &[f64]| -> Vec<(f64, f64)> {
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let span = if hi > lo { hi - lo } else { 1.0 };
        vals.iter()
            .enumerate()
            .map(|(i, &v)| (xs(i), top + h - (v - lo) / span * h))
            .collect()
    };
    let _ = writeln!(svg.body, "{}", polyline(&norm(&table.stimulus), "#e0b000", 1.0));
    let _ = writeln!(svg.body, "{}", polyline(&norm(&table.ideal), "#cc3333", 1.2));
    let _ = writeln!(svg.body, "{}", polyline(&norm(&table.value), "#3355cc", 1.2));
    let _ = writeln!(
        svg.body,
        r#"<text x="{:.1}" y="{:.1}" font-size="9" font-family="sans-serif">blue: decoded, red: ideal response, yellow: stimulus</text>"#,
        MARGIN,
        top + h + 12.0
    );
    svg.cursor = top + h + 28.0;
}

/// Render the full report as a standalone SVG document.
pub fn render_report(report: &MetricsReport, series: &[(String, SeriesTable)]) -> Result<String> {
    report.validate()?;
    let k = report.conditions.len();
    let mut svg = Svg::new();
    svg.heading("Volume-wise decoding report");
    svg.space(8.0);
    bar_panel(&mut svg, report);
    heatmap_panel(&mut svg, report);

    svg.heading("Decoded timeline");
    svg.space(12.0);
    strip(&mut svg, &report.true_labels, k, "truth");
    strip(&mut svg, &report.pred_labels, k, "prediction");
    let seg_text = report
        .segment_accuracy
        .iter()
        .enumerate()
        .map(|(i, a)| format!("s{}: {:.3}", i + 1, a))
        .collect::<Vec<_>>()
        .join("  ");
    let _ = writeln!(
        svg.body,
        r#"<text x="{MARGIN}" y="{:.1}" font-size="10" font-family="sans-serif">segment accuracy: {}</text>"#,
        svg.cursor,
        esc(&seg_text)
    );
    svg.cursor += 16.0;
    let sim_text = report
        .hrf_similarity
        .iter()
        .map(|c| match c.pcc {
            Some(v) => format!("{}: {:.3}", c.condition, v),
            None => format!("{}: n/a", c.condition),
        })
        .collect::<Vec<_>>()
        .join("  ");
    let _ = writeln!(
        svg.body,
        r#"<text x="{MARGIN}" y="{:.1}" font-size="10" font-family="sans-serif">convolved sequence similarity: {}</text>"#,
        svg.cursor,
        esc(&sim_text)
    );
    svg.cursor += 24.0;

    for (name, table) in series {
        series_panel(&mut svg, name, table);
    }

    let height = svg.cursor + 16.0;
    Ok(format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{height:.0}\" viewBox=\"0 0 {WIDTH} {height:.0}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
        svg.body
    ))
}
