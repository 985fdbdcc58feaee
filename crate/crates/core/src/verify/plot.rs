//! Standalone SVG charts with the plotted data repeated in a comment.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self { name: name.into(), points }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn data_comment(out: &mut String, rows: &[String]) {
    out.push_str("<!-- data\n");
    for r in rows {
        // "--" may not appear inside an XML comment
        out.push_str(&r.replace("--", "- -"));
        out.push('\n');
    }
    out.push_str("-->\n");
}

fn bounds(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) =
        values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return None;
    }
    if hi - lo < 1e-300 {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        return Some((lo - pad, hi + pad));
    }
    Some((lo, hi))
}

fn fmt_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

/// Line chart with markers; `log_y` plots `log10 y` (non-positive values
/// are dropped).
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series], log_y: bool) -> String {
    let ty = |y: f64| if log_y { y.log10() } else { y };
    let shown: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            s.points
                .iter()
                .filter(|p| p.0.is_finite() && (!log_y || p.1 > 0.0))
                .map(|&(x, y)| (x, ty(y)))
                .filter(|p| p.1.is_finite())
                .collect()
        })
        .collect();
    let mut out = String::new();
    header(&mut out, title);
    let mut rows = vec!["series,x,y".to_string()];
    for s in series {
        for (x, y) in &s.points {
            rows.push(format!("{},{x:e},{y:e}", s.name));
        }
    }
    data_comment(&mut out, &rows);
    let (Some((x0, x1)), Some((y0, y1))) =
        (bounds(shown.iter().flatten().map(|p| p.0)), bounds(shown.iter().flatten().map(|p| p.1)))
    else {
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">no data</text>"#, WIDTH / 2.0, HEIGHT / 2.0);
        out.push_str("</svg>\n");
        return out;
    };
    let (pw, ph) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * ph;
    let _ = writeln!(out, r#"<rect x="{MARGIN}" y="{MARGIN}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let ylab = if log_y { fmt_tick(10f64.powf(yv)) } else { fmt_tick(yv) };
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            sx(xv),
            HEIGHT - MARGIN + 16.0,
            fmt_tick(xv)
        );
        let _ =
            writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, MARGIN - 4.0, sy(yv) + 4.0, ylab);
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 16.0,
        escape(x_label)
    );
    let ylab = if log_y { format!("{y_label} (log scale)") } else { y_label.to_string() };
    let _ = writeln!(
        out,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
        HEIGHT / 2.0,
        escape(&ylab)
    );
    for (i, (s, pts)) in series.iter().zip(&shown).enumerate() {
        let c = COLORS[i % COLORS.len()];
        if pts.len() > 1 {
            let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            let _ =
                writeln!(out, r#"<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
        }
        for &(x, y) in pts {
            let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{c}"/>"#, sx(x), sy(y));
        }
        let ly = MARGIN + 14.0 + 16.0 * i as f64;
        let _ = writeln!(out, r#"<text x="{:.1}" y="{ly:.1}" fill="{c}">{}</text>"#, MARGIN + 8.0, escape(&s.name));
    }
    out.push_str("</svg>\n");
    out
}

/// Grid of cells colored by `log ratio` (blue below 1, red above, grey when
/// excluded). Rows are drawn top to bottom.
pub fn heatmap(title: &str, row_label: &str, col_label: &str, cells: &[Vec<Option<f64>>]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let mut rows = vec!["row,col,ratio".to_string()];
    for (i, row) in cells.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            rows.push(format!("{i},{j},{}", v.map_or(String::new(), |v| format!("{v:e}"))));
        }
    }
    data_comment(&mut out, &rows);
    let n_rows = cells.len().max(1);
    let n_cols = cells.iter().map(|r| r.len()).max().unwrap_or(1).max(1);
    let span = cells.iter().flatten().flatten().map(|v| v.ln().abs()).fold(0.0, f64::max).max(1e-12);
    let (pw, ph) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
    let (cw, ch) = (pw / n_cols as f64, ph / n_rows as f64);
    for (i, row) in cells.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let fill = match v {
                None => "#bbbbbb".to_string(),
                Some(v) => {
                    let t = (v.ln() / span).clamp(-1.0, 1.0);
                    let fade = (255.0 * (1.0 - t.abs())).round() as u8;
                    if t >= 0.0 {
                        format!("#ff{fade:02x}{fade:02x}")
                    } else {
                        format!("#{fade:02x}{fade:02x}ff")
                    }
                }
            };
            let (x, y) = (MARGIN + j as f64 * cw, MARGIN + i as f64 * ch);
            let _ = writeln!(
                out,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{cw:.2}" height="{ch:.2}" fill="{fill}" stroke="white"/>"#
            );
            if let Some(v) = v {
                let _ = writeln!(
                    out,
                    r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="10">{v:.3}</text>"#,
                    x + cw / 2.0,
                    y + ch / 2.0 + 3.0
                );
            }
        }
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 16.0,
        escape(col_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
        HEIGHT / 2.0,
        escape(row_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="end" font-size="10">color scale: |log ratio| up to {span:.3e}</text>"#,
        WIDTH - MARGIN,
        MARGIN - 8.0
    );
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_embeds_data_and_is_closed() {
        let s = Series::new("sup", vec![(1.0, 2.0), (2.0, 4.0), (3.0, -1.0)]);
        let svg = line_chart("t", "n", "K", &[s], true);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("sup,3e0,-1e0"));
        assert_eq!(svg.matches("<circle").count(), 2);
    }

    #[test]
    fn empty_chart_and_heatmap() {
        assert!(line_chart("t", "x", "y", &[], false).contains("no data"));
        let svg = heatmap("h", "u", "s", &[vec![Some(1.0), None], vec![Some(0.5), Some(2.0)]]);
        assert_eq!(svg.matches("<rect").count(), 5);
        assert!(svg.contains("#bbbbbb"));
        assert!(svg.contains("0,1,\n"));
    }
}
