//! Report JSON, level CSV and the SVG boxplot.

use std::fmt::Write as _;

use auralab::pipeline::{Analysis, AnalysisSettings};
use auralab::Classification;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub stage: String,
    pub room: String,
    pub median_db: f64,
    pub q1_db: f64,
    pub q3_db: f64,
    pub whisker_low_db: f64,
    pub whisker_high_db: f64,
    pub n_outliers: usize,
    pub max_abs_outlier_db: Option<f64>,
    pub verdict: Classification,
    pub snr_median_db: f64,
    pub n_frames: usize,
    /// Outlier values, kept for the plot.
    pub outliers_db: Vec<f64>,
}

impl ReportEntry {
    pub fn new(stage: &str, room: &str, a: &Analysis) -> Self {
        let s = &a.stats;
        ReportEntry {
            stage: stage.to_string(),
            room: room.to_string(),
            median_db: s.median,
            q1_db: s.q1,
            q3_db: s.q3,
            whisker_low_db: s.whisker_low,
            whisker_high_db: s.whisker_high,
            n_outliers: s.outliers.len(),
            max_abs_outlier_db: s.max_abs_outlier(),
            verdict: a.verdict.classification,
            snr_median_db: a.snr_median,
            n_frames: s.n,
            outliers_db: s.outliers.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSettings {
    pub window_ms: f64,
    pub hop_ms: f64,
    pub gate_db: f64,
    pub jnd_db: f64,
}

impl From<&AnalysisSettings> for ReportSettings {
    fn from(s: &AnalysisSettings) -> Self {
        ReportSettings {
            window_ms: s.window * 1000.0,
            hop_ms: s.hop * 1000.0,
            gate_db: s.gate_db,
            jnd_db: s.jnd_db,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub settings: ReportSettings,
    pub entries: Vec<ReportEntry>,
}

pub const LEVELS_HEADER: &str = "t_s,lv_db,lu_db,lt_db,snr_db,delta_l_db,gated";

/// One row per frame; values printed in shortest round-trip form.
pub fn levels_csv(a: &Analysis) -> String {
    let mut out = String::with_capacity(a.lv.len() * 64);
    out.push_str(LEVELS_HEADER);
    out.push('\n');
    for i in 0..a.lv.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            a.lv.time(i),
            a.lv.values[i],
            a.lu.values[i],
            a.lt.values[i],
            a.snr.values[i],
            a.delta_l.values[i],
            u8::from(a.gate[i])
        );
    }
    out
}

const PLOT_H: f64 = 360.0;
const MARGIN_L: f64 = 60.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 70.0;
const SLOT_W: f64 = 90.0;
const BOX_W: f64 = 40.0;

fn verdict_color(c: Classification) -> &'static str {
    match c {
        Classification::Transparent => "#8fbf8f",
        Classification::Marginal => "#e0c060",
        Classification::Audible => "#d98080",
    }
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag)
}

/// Boxplot of ΔL per (stage, room), boxes colored by verdict, with the JND
/// drawn as a dashed line.
pub fn boxplot_svg(report: &Report) -> String {
    let entries = &report.entries;
    let jnd = report.settings.jnd_db;
    let mut lo = -jnd.abs().max(0.5);
    let mut hi = jnd.abs().max(0.5);
    for e in entries {
        lo = lo.min(e.whisker_low_db);
        hi = hi.max(e.whisker_high_db);
        for o in &e.outliers_db {
            lo = lo.min(*o);
            hi = hi.max(*o);
        }
    }
    let pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
    let width = MARGIN_L + SLOT_W * entries.len().max(1) as f64 + 20.0;
    let height = MARGIN_T + PLOT_H + MARGIN_B;
    let y = |v: f64| MARGIN_T + PLOT_H * (hi - v) / (hi - lo);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>"#);
    let step = nice_step(hi - lo);
    let mut tick = (lo / step).ceil() * step;
    while tick <= hi {
        let ty = y(tick);
        let _ = writeln!(
            s,
            r##"<line x1="{MARGIN_L}" y1="{ty:.2}" x2="{:.2}" y2="{ty:.2}" stroke="#e6e6e6"/>"##,
            width - 20.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            MARGIN_L - 6.0,
            ty + 4.0,
            format_tick(tick, step)
        );
        tick += step;
    }
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.2}" transform="rotate(-90 14 {:.2})" text-anchor="middle">ΔL (dB)</text>"#,
        MARGIN_T + PLOT_H / 2.0,
        MARGIN_T + PLOT_H / 2.0
    );
    for v in [jnd, -jnd] {
        if v > lo && v < hi {
            let _ = writeln!(
                s,
                r##"<line x1="{MARGIN_L}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#404040" stroke-dasharray="4 3"/>"##,
                y(v),
                width - 20.0,
                y(v)
            );
        }
    }

    for (i, e) in entries.iter().enumerate() {
        let cx = MARGIN_L + SLOT_W * (i as f64 + 0.5);
        let x0 = cx - BOX_W / 2.0;
        let _ = writeln!(
            s,
            r#"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="black"/>"#,
            y(e.whisker_high_db),
            y(e.q3_db)
        );
        let _ = writeln!(
            s,
            r#"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="black"/>"#,
            y(e.q1_db),
            y(e.whisker_low_db)
        );
        for w in [e.whisker_low_db, e.whisker_high_db] {
            let _ = writeln!(
                s,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black"/>"#,
                cx - BOX_W / 4.0,
                y(w),
                cx + BOX_W / 4.0,
                y(w)
            );
        }
        let top = y(e.q3_db);
        let _ = writeln!(
            s,
            r#"<rect x="{x0:.2}" y="{top:.2}" width="{BOX_W}" height="{:.2}" fill="{}" stroke="black"/>"#,
            (y(e.q1_db) - top).max(0.5),
            verdict_color(e.verdict)
        );
        let _ = writeln!(
            s,
            r#"<line x1="{x0:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-width="2"/>"#,
            y(e.median_db),
            x0 + BOX_W,
            y(e.median_db)
        );
        for o in &e.outliers_db {
            let _ = writeln!(
                s,
                r#"<circle cx="{cx:.2}" cy="{:.2}" r="2" fill="none" stroke="black"/>"#,
                y(*o)
            );
        }
        let label_y = MARGIN_T + PLOT_H + 16.0;
        let _ = writeln!(
            s,
            r#"<text x="{cx:.2}" y="{label_y:.2}" text-anchor="middle">{}</text>"#,
            e.room
        );
        let _ = writeln!(
            s,
            r##"<text x="{cx:.2}" y="{:.2}" text-anchor="middle" fill="#606060">{}</text>"##,
            label_y + 14.0,
            e.stage
        );
        let _ = writeln!(
            s,
            r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle" font-style="italic">{}</text>"#,
            label_y + 28.0,
            e.verdict
        );
    }
    s.push_str("</svg>\n");
    s
}

fn format_tick(v: f64, step: f64) -> String {
    let decimals = if step >= 1.0 { 0 } else { (-step.log10().floor()) as usize };
    let v = if v.abs() < step * 1e-9 { 0.0 } else { v };
    format!("{v:.decimals$}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(room: &str, median: f64, outliers: Vec<f64>) -> ReportEntry {
        ReportEntry {
            stage: "stage_small".into(),
            room: room.into(),
            median_db: median,
            q1_db: median - 0.2,
            q3_db: median + 0.3,
            whisker_low_db: median - 0.5,
            whisker_high_db: median + 0.8,
            n_outliers: outliers.len(),
            max_abs_outlier_db: outliers.iter().map(|v: &f64| v.abs()).reduce(f64::max),
            verdict: Classification::Transparent,
            snr_median_db: 20.0,
            n_frames: 100,
            outliers_db: outliers,
        }
    }

    #[test]
    fn svg_has_one_box_per_entry() {
        let r = Report {
            settings: ReportSettings {
                window_ms: 2.0,
                hop_ms: 2.0,
                gate_db: 40.0,
                jnd_db: 1.0,
            },
            entries: vec![entry("booth1", 1.4, vec![5.0, -3.0]), entry("anechoic", 0.0, vec![])],
        };
        let svg = boxplot_svg(&r);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<circle").count(), 2);
        assert_eq!(svg.matches(r#"width="40""#).count(), 2);
        assert!(svg.contains("booth1") && svg.contains("anechoic"));
    }

    #[test]
    fn ticks() {
        assert_eq!(nice_step(6.0), 1.0);
        assert_eq!(nice_step(1.1), 0.2);
        assert_eq!(format_tick(0.4000000001, 0.2), "0.4");
        assert_eq!(format_tick(-1e-17, 0.5), "0.0");
    }
}
