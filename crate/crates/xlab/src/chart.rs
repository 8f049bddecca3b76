//! Deterministic SVG line charts with a log-scale y axis.

use std::fmt::Write as _;

use crate::config::{ChartKind, ChartSpec, Metric};
use crate::summary::SummaryTable;
use crate::{Result, XlabError};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    /// Half-length of the error bar.
    pub err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<Point>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChartStyle {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick_label(x: f64) -> String {
    if x == x.round() && x.abs() < 1e9 {
        format!("{}", x as i64)
    } else {
        format!("{x:.3}")
    }
}

pub fn render_svg(series: &[Series], style: &ChartStyle) -> Result<String> {
    let all: Vec<&Point> = series.iter().flat_map(|s| &s.points).collect();
    if all.is_empty() {
        return Err(XlabError::Config("nothing to plot".into()));
    }
    if all.iter().any(|p| !p.x.is_finite() || !p.y.is_finite() || !p.err.is_finite()) {
        return Err(XlabError::Config("chart data must be finite".into()));
    }
    let positive = all
        .iter()
        .flat_map(|p| [p.y, p.y - p.err])
        .filter(|v| *v > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !positive.is_finite() {
        return Err(XlabError::Config("a log-scale chart needs positive values".into()));
    }
    let top_value = all.iter().map(|p| p.y + p.err).fold(positive, f64::max);
    let lo_dec = positive.log10().floor();
    let hi_dec = top_value.log10().ceil().max(lo_dec + 1.0);
    let (mut x0, mut x1) = all
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.x), b.max(p.x)));
    if x1 <= x0 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * plot_w;
    let py = |y: f64| {
        let v = y.max(positive).log10();
        TOP + (hi_dec - v) / (hi_dec - lo_dec) * plot_h
    };

    let mut svg = String::new();
    let w = &mut svg;
    writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="monospace" font-size="12">"#
    )
    .ok();
    writeln!(w, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).ok();
    writeln!(
        w,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + plot_w / 2.0,
        escape(&style.title)
    )
    .ok();
    writeln!(
        w,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w:.2}" height="{plot_h:.2}" fill="none" stroke="black"/>"#
    )
    .ok();
    let mut dec = lo_dec;
    while dec <= hi_dec {
        let y = TOP + (hi_dec - dec) / (hi_dec - lo_dec) * plot_h;
        writeln!(
            w,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##,
            LEFT + plot_w
        )
        .ok();
        writeln!(
            w,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1e{}</text>"#,
            LEFT - 6.0,
            y + 4.0,
            dec as i64
        )
        .ok();
        dec += 1.0;
    }
    for k in 0..=4 {
        let x = x0 + (x1 - x0) * k as f64 / 4.0;
        writeln!(
            w,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            px(x),
            TOP + plot_h + 18.0,
            tick_label(x)
        )
        .ok();
    }
    writeln!(
        w,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 10.0,
        escape(&style.x_label)
    )
    .ok();
    writeln!(
        w,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0,
        escape(&style.y_label)
    )
    .ok();
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = s
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", px(p.x), py(p.y)))
            .collect();
        writeln!(
            w,
            r#"<polyline class="series" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            coords.join(" ")
        )
        .ok();
        for p in &s.points {
            let cx = px(p.x);
            writeln!(
                w,
                r#"<line class="errbar" x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="{color}"/>"#,
                py(p.y + p.err),
                py(p.y - p.err)
            )
            .ok();
            writeln!(
                w,
                r#"<circle class="marker" cx="{cx:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#,
                py(p.y)
            )
            .ok();
        }
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = WIDTH - RIGHT + 12.0;
        writeln!(
            w,
            r#"<rect x="{lx:.2}" y="{:.2}" width="12" height="3" fill="{color}"/>"#,
            ly - 4.0
        )
        .ok();
        writeln!(w, r#"<text x="{:.2}" y="{ly:.2}">{}</text>"#, lx + 18.0, escape(&s.name)).ok();
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Series for a summary table under a chart spec.
pub fn summary_series(table: &SummaryTable, spec: &ChartSpec) -> Vec<Series> {
    match spec.kind {
        ChartKind::Curves => {
            let mut out = Vec::new();
            for c in &table.curves {
                let kept: Vec<_> = c.points.iter().filter(|p| p.t >= spec.skip_initial).collect();
                let test = || Series {
                    name: format!("{} test", c.label),
                    points: kept
                        .iter()
                        .map(|p| Point {
                            x: p.t as f64,
                            y: p.test.mean,
                            err: p.test.std,
                        })
                        .collect(),
                };
                let train = || Series {
                    name: format!("{} train", c.label),
                    points: kept
                        .iter()
                        .filter_map(|p| {
                            p.train.map(|s| Point {
                                x: p.t as f64,
                                y: s.mean,
                                err: s.std,
                            })
                        })
                        .collect(),
                };
                match spec.metric {
                    Metric::Test => out.push(test()),
                    Metric::Train => out.push(train()),
                    Metric::Both => {
                        out.push(train());
                        out.push(test());
                    }
                }
            }
            out.retain(|s| !s.points.is_empty());
            out
        }
        ChartKind::Final => {
            let mut out: Vec<Series> = Vec::new();
            for row in &table.rows {
                let (Some(x), Some(stat)) = (
                    row.x,
                    match spec.metric {
                        Metric::Train => row.final_train,
                        _ => row.final_test,
                    },
                ) else {
                    continue;
                };
                let name = row.series.clone().unwrap_or_else(|| row.label.clone());
                let point = Point {
                    x,
                    y: stat.mean,
                    err: stat.std,
                };
                match out.iter_mut().find(|s| s.name == name) {
                    Some(s) => s.points.push(point),
                    None => out.push(Series {
                        name,
                        points: vec![point],
                    }),
                }
            }
            for s in &mut out {
                s.points.sort_by(|a, b| a.x.total_cmp(&b.x));
            }
            out
        }
    }
}

pub fn render_summary(table: &SummaryTable, spec: &ChartSpec) -> Result<String> {
    let series = summary_series(table, spec);
    let style = ChartStyle {
        title: spec.title.clone().unwrap_or_default(),
        x_label: match spec.kind {
            ChartKind::Curves => "iteration".into(),
            ChartKind::Final => "m / d".into(),
        },
        y_label: match spec.metric {
            Metric::Test => "test error".into(),
            Metric::Train => "train error".into(),
            Metric::Both => "error".into(),
        },
    };
    render_svg(&series, &style)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn style() -> ChartStyle {
        ChartStyle {
            title: "t & <x>".into(),
            x_label: "x".into(),
            y_label: "y".into(),
        }
    }

    #[test]
    fn single_point_series_has_one_marker() {
        let s = Series {
            name: "a".into(),
            points: vec![Point { x: 1.0, y: 0.5, err: 0.1 }],
        };
        let svg = render_svg(&[s], &style()).unwrap();
        assert_eq!(svg.matches("class=\"marker\"").count(), 1);
        assert!(svg.contains("t &amp; &lt;x&gt;"));
    }

    #[test]
    fn zero_spread_gives_zero_length_bars() {
        let s = Series {
            name: "a".into(),
            points: vec![Point { x: 0.0, y: 0.5, err: 0.0 }, Point { x: 1.0, y: 0.05, err: 0.0 }],
        };
        let svg = render_svg(&[s], &style()).unwrap();
        for line in svg.lines().filter(|l| l.contains("errbar")) {
            let attr = |name: &str| {
                let start = line.find(&format!(" {name}=\"")).unwrap() + name.len() + 3;
                line[start..].split('"').next().unwrap().to_string()
            };
            assert_eq!(attr("y1"), attr("y2"));
        }
    }

    #[test]
    fn output_is_deterministic_and_rejects_bad_data() {
        let s = vec![Series {
            name: "a".into(),
            points: vec![Point { x: 0.0, y: 1.0, err: 0.2 }, Point { x: 5.0, y: 1e-3, err: 1e-4 }],
        }];
        assert_eq!(render_svg(&s, &style()).unwrap(), render_svg(&s, &style()).unwrap());
        assert!(render_svg(&[], &style()).is_err());
        let zero = vec![Series {
            name: "z".into(),
            points: vec![Point { x: 0.0, y: 0.0, err: 0.0 }],
        }];
        assert!(render_svg(&zero, &style()).is_err());
        let nan = vec![Series {
            name: "n".into(),
            points: vec![Point { x: 0.0, y: f64::NAN, err: 0.0 }],
        }];
        assert!(render_svg(&nan, &style()).is_err());
    }

    #[test]
    fn lower_series_sits_lower_on_the_canvas() {
        let hi = Series {
            name: "hi".into(),
            points: vec![Point { x: 0.0, y: 0.5, err: 0.0 }],
        };
        let lo = Series {
            name: "lo".into(),
            points: vec![Point { x: 0.0, y: 0.005, err: 0.0 }],
        };
        let svg = render_svg(&[hi, lo], &style()).unwrap();
        let cys: Vec<f64> = svg
            .lines()
            .filter(|l| l.contains("class=\"marker\""))
            .map(|l| {
                let start = l.find("cy=\"").unwrap() + 4;
                l[start..].split('"').next().unwrap().parse().unwrap()
            })
            .collect();
        assert!(cys[1] > cys[0]);
    }
}
