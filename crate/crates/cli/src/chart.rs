//! Minimal SVG 1.1 rendering: multi-series line charts and timeline strips.

use std::fmt::Write;

use trendcause_core::timeline::TimelineEntry;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ChartError {
    #[error("no series to draw")]
    NoSeries,
    #[error("series '{0}' has no values")]
    ZeroLength(String),
    #[error("series '{0}' has a non-finite value")]
    NonFinite(String),
    #[error("timeline has no entries")]
    EmptyTimeline,
}

/// One stroke, drawn over bins `start..start + values.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub name: String,
    pub start: usize,
    pub values: Vec<f64>,
}

impl Line {
    pub fn new(name: impl Into<String>, start: usize, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            start,
            values,
        }
    }
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];
const DASHES: [&str; 3] = ["", "6 3", "2 2"];

const WIDTH: f64 = 820.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 70.0;

pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn header(out: &mut String, w: f64, h: f64) {
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"no\"?>\n");
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"11\">"
    );
    let _ = writeln!(out, "<rect x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"white\"/>");
}

/// Renders `lines` against a shared bin axis. `x_labels[t]` names bin `t`
/// (typically its start date); missing labels fall back to the bin index.
pub fn line_chart(title: &str, lines: &[Line], x_labels: &[String], y_label: &str) -> Result<String, ChartError> {
    if lines.is_empty() {
        return Err(ChartError::NoSeries);
    }
    for l in lines {
        if l.values.is_empty() {
            return Err(ChartError::ZeroLength(l.name.clone()));
        }
        if l.values.iter().any(|v| !v.is_finite()) {
            return Err(ChartError::NonFinite(l.name.clone()));
        }
    }
    let bins = lines.iter().map(|l| l.start + l.values.len()).max().unwrap_or(1);
    let (mut lo, mut hi) = lines
        .iter()
        .flat_map(|l| &l.values)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if hi - lo < 1e-12 {
        let pad = if lo.abs() > 1e-12 { lo.abs() * 0.1 } else { 0.5 };
        lo -= pad;
        hi += pad;
    }
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x = |t: usize| {
        if bins <= 1 {
            LEFT + plot_w / 2.0
        } else {
            LEFT + plot_w * t as f64 / (bins - 1) as f64
        }
    };
    let y = |v: f64| TOP + plot_h * (hi - v) / (hi - lo);
    let label = |t: usize| x_labels.get(t).cloned().unwrap_or_else(|| t.to_string());

    let mut out = String::new();
    header(&mut out, WIDTH, HEIGHT);
    let _ = writeln!(out, "<title>{}</title>", escape(title));
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>",
        LEFT + plot_w / 2.0,
        escape(title)
    );

    out.push_str("<g class=\"axes\" stroke=\"black\" stroke-width=\"1\">\n");
    let (x0, x1, y0, y1) = (LEFT, LEFT + plot_w, TOP + plot_h, TOP);
    let _ = writeln!(out, "<line x1=\"{x0:.1}\" y1=\"{y0:.1}\" x2=\"{x1:.1}\" y2=\"{y0:.1}\"/>");
    let _ = writeln!(out, "<line x1=\"{x0:.1}\" y1=\"{y0:.1}\" x2=\"{x0:.1}\" y2=\"{y1:.1}\"/>");
    out.push_str("</g>\n");

    out.push_str("<g class=\"x-ticks\">\n");
    let n_ticks = bins.min(8);
    let mut ticks: Vec<usize> = (0..n_ticks)
        .map(|i| if n_ticks <= 1 { 0 } else { i * (bins - 1) / (n_ticks - 1) })
        .collect();
    ticks.dedup();
    for t in ticks {
        let xt = x(t);
        let _ = writeln!(
            out,
            "<line x1=\"{xt:.1}\" y1=\"{y0:.1}\" x2=\"{xt:.1}\" y2=\"{:.1}\" stroke=\"black\"/>",
            y0 + 4.0
        );
        let _ = writeln!(
            out,
            "<text x=\"{xt:.1}\" y=\"{:.1}\" text-anchor=\"end\" transform=\"rotate(-35 {xt:.1} {:.1})\">{}</text>",
            y0 + 16.0,
            y0 + 16.0,
            escape(&label(t))
        );
    }
    out.push_str("</g>\n");

    out.push_str("<g class=\"y-ticks\">\n");
    for i in 0..=4 {
        let v = lo + (hi - lo) * i as f64 / 4.0;
        let yt = y(v);
        let _ = writeln!(
            out,
            "<line x1=\"{:.1}\" y1=\"{yt:.1}\" x2=\"{x0:.1}\" y2=\"{yt:.1}\" stroke=\"black\"/>",
            x0 - 4.0
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
            x0 - 7.0,
            yt + 4.0,
            format_tick(v)
        );
    }
    out.push_str("</g>\n");
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">bin start</text>",
        LEFT + plot_w / 2.0,
        HEIGHT - 8.0
    );
    let _ = writeln!(
        out,
        "<text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">{}</text>",
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0,
        escape(y_label)
    );

    out.push_str("<g class=\"series\" fill=\"none\" stroke-width=\"1.8\">\n");
    for (i, l) in lines.iter().enumerate() {
        let mut d = String::new();
        if l.values.len() == 1 {
            let (px, py) = (x(l.start), y(l.values[0]));
            let _ = write!(d, "M{:.2},{py:.2} H{:.2}", px - 3.0, px + 3.0);
        } else {
            for (j, &v) in l.values.iter().enumerate() {
                let _ = write!(d, "{}{:.2},{:.2} ", if j == 0 { "M" } else { "L" }, x(l.start + j), y(v));
            }
            d.pop();
        }
        let _ = writeln!(
            out,
            "<path d=\"{d}\" stroke=\"{}\"{}><title>{}</title></path>",
            PALETTE[i % PALETTE.len()],
            dash_attr(i),
            escape(&l.name)
        );
    }
    out.push_str("</g>\n");

    out.push_str("<g class=\"legend\">\n");
    let lx = LEFT + plot_w + 16.0;
    for (i, l) in lines.iter().enumerate() {
        let ly = TOP + 18.0 * i as f64;
        let _ = writeln!(
            out,
            "<rect x=\"{lx:.1}\" y=\"{ly:.1}\" width=\"14\" height=\"4\" fill=\"{}\"/>",
            PALETTE[i % PALETTE.len()]
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\">{}</text>",
            lx + 20.0,
            ly + 6.0,
            escape(&l.name)
        );
    }
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}

fn dash_attr(i: usize) -> String {
    match DASHES[(i / PALETTE.len()) % DASHES.len()] {
        "" => String::new(),
        d => format!(" stroke-dasharray=\"{d}\""),
    }
}

fn format_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

/// One band per era listing its iconic styles and their causal topics.
pub fn timeline_strip(title: &str, entries: &[TimelineEntry]) -> Result<String, ChartError> {
    if entries.is_empty() {
        return Err(ChartError::EmptyTimeline);
    }
    const ROW: f64 = 15.0;
    let rows: Vec<Vec<String>> = entries
        .iter()
        .map(|e| {
            let mut lines = Vec::new();
            for ic in &e.iconic {
                lines.push(format!("{}  (lift {:.3})", ic.style_id, ic.lift));
                for t in &ic.topics {
                    lines.push(format!("    {}: {}", t.topic_id, t.top_words.join(", ")));
                }
            }
            if lines.is_empty() {
                lines.push("(no iconic styles)".into());
            }
            lines
        })
        .collect();
    let width = 760.0;
    let height = 50.0 + rows.iter().map(|r| ROW * r.len() as f64 + 14.0).sum::<f64>();
    let mut out = String::new();
    header(&mut out, width, height);
    let _ = writeln!(out, "<title>{}</title>", escape(title));
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">{}</text>",
        width / 2.0,
        escape(title)
    );
    let mut top = 40.0;
    for (i, (e, lines)) in entries.iter().zip(&rows).enumerate() {
        let h = ROW * lines.len() as f64 + 10.0;
        let fill = if i % 2 == 0 { "#eef3fa" } else { "#f9f9f9" };
        let _ = writeln!(
            out,
            "<g class=\"era\"><rect x=\"10\" y=\"{top:.1}\" width=\"{:.1}\" height=\"{h:.1}\" fill=\"{fill}\" stroke=\"#c8d0dc\"/>",
            width - 20.0
        );
        let _ = writeln!(
            out,
            "<text x=\"20\" y=\"{:.1}\" font-weight=\"bold\">{}</text>",
            top + ROW,
            e.start
        );
        for (j, l) in lines.iter().enumerate() {
            let _ = writeln!(
                out,
                "<text x=\"130\" y=\"{:.1}\" xml:space=\"preserve\">{}</text>",
                top + ROW * (j + 1) as f64,
                escape(l)
            );
        }
        out.push_str("</g>\n");
        top += h + 4.0;
    }
    out.push_str("</svg>\n");
    Ok(out)
}
