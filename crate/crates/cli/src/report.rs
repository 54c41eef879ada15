//! Markdown summary and grouped bar charts of the evaluation results.

use std::fmt::Write as _;

use riskflow_core::features::FeatureGroup;
use riskflow_core::geo::TimeInterval;
use riskflow_core::model::{AblationReport, EvalRow, ModelKind, Setting};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Mae,
    Rmse,
}

impl Metric {
    pub fn label(self) -> &'static str {
        match self {
            Metric::Mae => "MAE",
            Metric::Rmse => "RMSE",
        }
    }

    fn of(self, r: &EvalRow) -> f64 {
        match self {
            Metric::Mae => r.mae,
            Metric::Rmse => r.rmse,
        }
    }
}

fn find(rows: &[EvalRow], t: TimeInterval, m: ModelKind, s: Setting) -> Option<&EvalRow> {
    rows.iter().find(|r| r.interval == t && r.model == m && r.setting == s)
}

fn intervals(rows: &[EvalRow]) -> Vec<TimeInterval> {
    TimeInterval::ALL.into_iter().filter(|t| rows.iter().any(|r| r.interval == *t)).collect()
}

fn models(rows: &[EvalRow]) -> Vec<ModelKind> {
    ModelKind::ALL.into_iter().filter(|m| rows.iter().any(|r| r.model == *m)).collect()
}

fn fmt_p(p: f64) -> String {
    if p == 0.0 || p >= 1e-3 {
        format!("{p:.4}")
    } else {
        format!("{p:.2e}")
    }
}

pub fn markdown(rows: &[EvalRow], ablation: Option<&AblationReport>) -> String {
    let mut out = String::from("# Crime prediction results\n\n");
    out.push_str("Test-month errors per time interval, with and without the DIFFER features.\n");
    for t in intervals(rows) {
        let _ = write!(
            out,
            "\n## {t}\n\n| Model | MAE with DIFFER | MAE without | RMSE with DIFFER | RMSE without | MAE change |\n|---|---:|---:|---:|---:|---:|\n"
        );
        for m in models(rows) {
            let w = find(rows, t, m, Setting::WithDiffer);
            let wo = find(rows, t, m, Setting::WithoutDiffer);
            let cell = |r: Option<&EvalRow>, metric: Metric| r.map_or("".into(), |r| format!("{:.4}", metric.of(r)));
            let change = match (w, wo) {
                (Some(a), Some(b)) if b.mae > 0.0 => format!("{:+.1}%", 100.0 * (a.mae - b.mae) / b.mae),
                _ => String::new(),
            };
            let _ = writeln!(
                out,
                "| {m} | {} | {} | {} | {} | {change} |",
                cell(w, Metric::Mae),
                cell(wo, Metric::Mae),
                cell(w, Metric::Rmse),
                cell(wo, Metric::Rmse)
            );
        }
    }
    out.push_str("\n## Feature-group ablation\n\n");
    match ablation {
        Some(a) => {
            let _ = writeln!(
                out,
                "One-sided paired t-test p-values over cross-validation folds (direction `{}`).\n",
                a.direction
            );
            out.push_str("| Interval |");
            for g in FeatureGroup::ALL {
                let _ = write!(out, " {g} |");
            }
            out.push_str("\n|---|");
            out.push_str(&"---:|".repeat(FeatureGroup::ALL.len()));
            out.push('\n');
            for (t, ps) in a.grid() {
                let _ = write!(out, "| {t} |");
                for p in ps {
                    let _ = write!(out, " {} |", p.map(fmt_p).unwrap_or_default());
                }
                out.push('\n');
            }
        }
        None => out.push_str("No ablation artifact was found, so the p-value grid is omitted.\n"),
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Rounds `v` up to 1, 2 or 5 times a power of ten.
fn nice_ceiling(v: f64) -> f64 {
    if v <= 0.0 || !v.is_finite() {
        return 1.0;
    }
    let mag = 10f64.powf(v.log10().floor());
    [1.0, 2.0, 5.0, 10.0].into_iter().map(|k| k * mag).find(|c| *c >= v).unwrap_or(10.0 * mag)
}

const COLORS: [(&str, &str); 3] = [("#1f5f8b", "#9cc3e0"), ("#2e7d32", "#a5d6a7"), ("#b35900", "#ffc48c")];

/// Grouped bar chart: one group per interval, one bar per model and setting.
pub fn bar_chart(rows: &[EvalRow], metric: Metric) -> String {
    let ts = intervals(rows);
    let ms = models(rows);
    let (w, h) = (820.0, 440.0);
    let (left, right, top, bottom) = (64.0, 16.0, 44.0, 110.0);
    let plot_w = w - left - right;
    let plot_h = h - top - bottom;
    let ymax = nice_ceiling(rows.iter().map(|r| metric.of(r)).fold(0.0, f64::max));
    let y = |v: f64| top + plot_h * (1.0 - v / ymax);
    let group_w = plot_w / ts.len().max(1) as f64;
    let bars = (ms.len() * Setting::ALL.len()).max(1) as f64;
    let bar_w = group_w * 0.8 / bars;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{} per interval, with and without DIFFER</text>"#,
        w / 2.0,
        metric.label()
    );
    for i in 0..=5 {
        let v = ymax * i as f64 / 5.0;
        let yy = y(v);
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{yy:.2}" x2="{:.2}" y2="{yy:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            w - right,
            left - 6.0,
            yy + 4.0,
            escape(&format!("{v:.3}"))
        );
    }
    let _ = writeln!(
        s,
        r#"<text transform="translate(16 {:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
        top + plot_h / 2.0,
        metric.label()
    );
    for (gi, t) in ts.iter().enumerate() {
        let gx = left + gi as f64 * group_w + group_w * 0.1;
        let mut k = 0;
        for (mi, m) in ms.iter().enumerate() {
            for setting in Setting::ALL {
                if let Some(r) = find(rows, *t, *m, setting) {
                    let v = metric.of(r);
                    let (dark, light) = COLORS[mi % COLORS.len()];
                    let fill = if setting == Setting::WithDiffer { dark } else { light };
                    let x = gx + k as f64 * bar_w;
                    let _ = writeln!(
                        s,
                        r#"<rect x="{x:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}"><title>{}</title></rect>"#,
                        y(v),
                        bar_w * 0.92,
                        (top + plot_h - y(v)).max(0.0),
                        escape(&format!("{t} {m} {setting}: {v:.4}"))
                    );
                }
                k += 1;
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            left + (gi as f64 + 0.5) * group_w,
            top + plot_h + 18.0,
            escape(t.name())
        );
    }
    let _ = writeln!(
        s,
        r#"<line x1="{left}" y1="{0:.2}" x2="{1:.2}" y2="{0:.2}" stroke="black"/>"#,
        top + plot_h,
        w - right
    );
    let legend_y = h - bottom + 48.0;
    for (mi, m) in ms.iter().enumerate() {
        for (si, setting) in Setting::ALL.iter().enumerate() {
            let (dark, light) = COLORS[mi % COLORS.len()];
            let fill = if *setting == Setting::WithDiffer { dark } else { light };
            let x = left + mi as f64 * 240.0;
            let yy = legend_y + si as f64 * 20.0;
            let label = match setting {
                Setting::WithDiffer => format!("{m} with DIFFER"),
                Setting::WithoutDiffer => format!("{m} without DIFFER"),
            };
            let _ = writeln!(
                s,
                r#"<rect x="{x:.2}" y="{:.2}" width="12" height="12" fill="{fill}"/><text x="{:.2}" y="{:.2}">{}</text>"#,
                yy - 10.0,
                x + 18.0,
                yy,
                escape(&label)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}
