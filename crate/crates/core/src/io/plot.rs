//! Standalone SVG rendering of learning curves: one line per series with a
//! shaded mean ± std band.

use std::fmt::Write;

use crate::error::{Error, Result};
use crate::harness::CurvePoint;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 24.0;
const BOTTOM: f64 = 52.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<CurvePoint>,
}

struct Scale {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Scale {
    fn x(&self, v: f64) -> f64 {
        LEFT + (v - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    fn y(&self, v: f64) -> f64 {
        HEIGHT - BOTTOM - (v - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }
}

/// Roughly five round tick values covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .min_by(|a, b| (a / raw).ln().abs().total_cmp(&(b / raw).ln().abs()))
        .unwrap_or(mag);
    let mut out = Vec::new();
    let mut t = (lo / step).ceil() * step;
    while t <= hi + step * 1e-9 {
        out.push(t);
        t += step;
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn fmt_tick(v: f64) -> String {
    if v.fract().abs() < 1e-9 {
        format!("{v:.0}")
    } else {
        format!("{v:.1}")
    }
}

pub fn render_svg(series: &[Series]) -> Result<String> {
    if series.is_empty() {
        return Err(Error::Precondition("nothing to plot".into()));
    }
    if let Some(empty) = series.iter().find(|s| s.points.is_empty()) {
        return Err(Error::parse(&empty.label, None, "curve has no rows"));
    }
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in all {
        x0 = x0.min(p.step as f64);
        x1 = x1.max(p.step as f64);
        y0 = y0.min(p.mean_reward - p.std_reward);
        y1 = y1.max(p.mean_reward + p.std_reward);
    }
    if x1 - x0 < 1.0 {
        x0 -= 1.0;
        x1 += 1.0;
    }
    if y1 - y0 < 1e-6 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad = (y1 - y0) * 0.05;
    let scale = Scale {
        x0,
        x1,
        y0: y0 - pad,
        y1: y1 + pad,
    };

    let mut svg = String::new();
    let w = &mut svg;
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        w,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );

    let (px0, px1) = (LEFT, WIDTH - RIGHT);
    let (py0, py1) = (HEIGHT - BOTTOM, TOP);
    for t in ticks(scale.y0, scale.y1) {
        let y = scale.y(t);
        let _ = writeln!(
            w,
            r##"<line x1="{px0:.2}" y1="{y:.2}" x2="{px1:.2}" y2="{y:.2}" stroke="#e0e0e0"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            px0 - 6.0,
            y + 4.0,
            fmt_tick(t)
        );
    }
    for t in ticks(scale.x0, scale.x1) {
        let x = scale.x(t);
        let _ = writeln!(
            w,
            r##"<line x1="{x:.2}" y1="{py0:.2}" x2="{x:.2}" y2="{:.2}" stroke="#333"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            py0 + 5.0,
            py0 + 18.0,
            fmt_tick(t)
        );
    }
    let _ = writeln!(
        w,
        r##"<polyline points="{px0:.2},{py1:.2} {px0:.2},{py0:.2} {px1:.2},{py0:.2}" fill="none" stroke="#333"/>"##
    );
    let _ = writeln!(
        w,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">step</text>"#,
        (px0 + px1) / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        w,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">reward</text>"#,
        (py0 + py1) / 2.0,
        (py0 + py1) / 2.0
    );

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let upper: Vec<String> = s
            .points
            .iter()
            .map(|p| {
                format!(
                    "{:.2},{:.2}",
                    scale.x(p.step as f64),
                    scale.y(p.mean_reward + p.std_reward)
                )
            })
            .collect();
        let lower: Vec<String> = s
            .points
            .iter()
            .rev()
            .map(|p| {
                format!(
                    "{:.2},{:.2}",
                    scale.x(p.step as f64),
                    scale.y(p.mean_reward - p.std_reward)
                )
            })
            .collect();
        let mean: Vec<String> = s
            .points
            .iter()
            .map(|p| {
                format!(
                    "{:.2},{:.2}",
                    scale.x(p.step as f64),
                    scale.y(p.mean_reward)
                )
            })
            .collect();
        let _ = writeln!(
            w,
            r#"<polygon class="band" points="{} {}" fill="{color}" fill-opacity="0.2" stroke="{color}" stroke-opacity="0.3" stroke-width="0.5"/>"#,
            upper.join(" "),
            lower.join(" ")
        );
        if s.points.len() == 1 {
            let _ = writeln!(
                w,
                r#"<circle class="mean" cx="{}" cy="{}" r="3" fill="{color}"/>"#,
                mean[0].split(',').next().unwrap_or("0"),
                mean[0].split(',').nth(1).unwrap_or("0")
            );
        } else {
            let _ = writeln!(
                w,
                r#"<polyline class="mean" points="{}" fill="none" stroke="{color}" stroke-width="1.8"/>"#,
                mean.join(" ")
            );
        }
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = WIDTH - RIGHT + 16.0;
        let _ = writeln!(
            w,
            r#"<rect x="{lx:.2}" y="{:.2}" width="14" height="10" fill="{color}" fill-opacity="0.6"/><text x="{:.2}" y="{ly:.2}">{}</text>"#,
            ly - 9.0,
            lx + 20.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(n: u64, level: f64) -> Vec<CurvePoint> {
        (1..=n)
            .map(|i| CurvePoint {
                step: i * 10,
                mean_reward: level + i as f64 * 0.01,
                std_reward: 0.3,
                buffer_size: 0,
                mean_priority: 0.0,
                distinct_near_optimal: 0,
            })
            .collect()
    }

    #[test]
    fn three_series_three_bands() {
        let series: Vec<Series> = ["baseline", "cosmocore", "evo <a&b>"]
            .iter()
            .enumerate()
            .map(|(i, l)| Series {
                label: l.to_string(),
                points: curve(30, 6.0 + i as f64),
            })
            .collect();
        let svg = render_svg(&series).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("class=\"band\"").count(), 3);
        assert_eq!(svg.matches("class=\"mean\"").count(), 3);
        assert!(svg.contains(">step<") && svg.contains(">reward<"));
        assert!(svg.contains("evo &lt;a&amp;b&gt;"));
    }

    #[test]
    fn single_row_is_valid() {
        let svg = render_svg(&[Series {
            label: "one".into(),
            points: curve(1, 5.0),
        }])
        .unwrap();
        assert_eq!(svg.matches("class=\"band\"").count(), 1);
        assert!(svg.contains("<circle"));
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }

    #[test]
    fn empty_inputs_rejected() {
        assert!(render_svg(&[]).is_err());
        let err = render_svg(&[Series {
            label: "empty.csv".into(),
            points: vec![],
        }])
        .unwrap_err();
        assert!(err.to_string().contains("empty.csv"));
    }

    #[test]
    fn tick_values_are_round() {
        assert_eq!(
            ticks(0.0, 1300.0),
            vec![0.0, 200.0, 400.0, 600.0, 800.0, 1000.0, 1200.0]
        );
        assert_eq!(ticks(5.0, 10.0), vec![5.0, 6.0, 7.0, 8.0, 9.0, 10.0]);
    }
}
