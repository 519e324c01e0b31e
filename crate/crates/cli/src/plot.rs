//! Static SVG figures of the result tables.
//!
//! Output depends only on the table: fixed canvas, fixed palette, coordinates
//! printed with two decimals and no timestamps, so equal tables give equal
//! bytes.

use std::fmt::Write;

use crate::error::{CliError, Result};
use crate::experiments::{BOUNDARY_COLUMNS, DISTANCE_COLUMNS, MIN_BITS_COLUMNS};
use crate::table::ResultTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// CRB against rate, one curve per ADC resolution.
    Boundary,
    /// Pareto endpoint per target distance, CRB against rate.
    DistanceSweep,
    /// Required resolution against the signal dynamic range.
    MinBits,
}

impl PlotKind {
    fn schema(self) -> &'static [&'static str] {
        match self {
            PlotKind::Boundary => &BOUNDARY_COLUMNS,
            PlotKind::DistanceSweep => &DISTANCE_COLUMNS,
            PlotKind::MinBits => &MIN_BITS_COLUMNS,
        }
    }
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 570.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 410.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

/// 1, 2 or 5 times a power of ten, at least `x`.
fn nice_step(x: f64) -> f64 {
    let p = 10f64.powf(x.log10().floor());
    let m = x / p;
    let n = if m <= 1.0 {
        1.0
    } else if m <= 2.0 {
        2.0
    } else if m <= 5.0 {
        5.0
    } else {
        10.0
    };
    n * p
}

impl Axis {
    fn unit() -> Self {
        Axis { lo: 0.0, hi: 1.0, log: false }
    }

    fn fit(values: &[f64], log: bool) -> Self {
        let vals: Vec<f64> = values
            .iter()
            .copied()
            .filter(|v| v.is_finite() && (!log || *v > 0.0))
            .collect();
        if vals.is_empty() {
            return Axis::unit();
        }
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if log {
            let (mut a, mut b) = (lo.log10(), hi.log10());
            let pad = ((b - a) * 0.05).max(0.05);
            a -= pad;
            b += pad;
            Axis { lo: 10f64.powf(a), hi: 10f64.powf(b), log: true }
        } else {
            let span = hi - lo;
            let pad = if span > 1e-12 * lo.abs().max(hi.abs()) {
                span * 0.05
            } else {
                (lo.abs() * 0.01).max(0.5)
            };
            Axis { lo: lo - pad, hi: hi + pad, log: false }
        }
    }

    fn frac(&self, v: f64) -> f64 {
        if self.log {
            (v.log10() - self.lo.log10()) / (self.hi.log10() - self.lo.log10())
        } else {
            (v - self.lo) / (self.hi - self.lo)
        }
    }

    /// Tick positions with their labels.
    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let (a, b) = (self.lo.log10().floor() as i32, self.hi.log10().ceil() as i32);
            let pick = |ms: &[u32]| -> Vec<(f64, String)> {
                let mut out = Vec::new();
                for k in a..=b {
                    for &m in ms {
                        let v = m as f64 * 10f64.powi(k);
                        if v >= self.lo && v <= self.hi {
                            out.push((v, format!("{m}e{k}")));
                        }
                    }
                }
                out
            };
            let t = pick(&[1, 2, 5]);
            if t.len() > 8 {
                pick(&[1])
            } else if t.len() < 3 {
                pick(&[1, 2, 3, 4, 5, 6, 7, 8, 9])
            } else {
                t
            }
        } else {
            let step = nice_step((self.hi - self.lo) / 6.0);
            let decimals = (-step.log10().floor()).max(0.0) as usize;
            let first = (self.lo / step).ceil() as i64;
            let last = (self.hi / step).floor() as i64;
            (first..=last)
                .map(|i| {
                    let v = i as f64 * step;
                    let label = format!("{:.*}", decimals, v);
                    // Avoid "-0".
                    let label = if label.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
                        label.trim_start_matches('-').to_string()
                    } else {
                        label
                    };
                    (v, label)
                })
                .collect()
        }
    }
}

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
    /// Per-point annotations.
    notes: Vec<String>,
    line: bool,
    radius: f64,
}

struct Figure {
    title: &'static str,
    x_label: &'static str,
    y_label: &'static str,
    y_log: bool,
    series: Vec<Series>,
}

fn check_schema(table: &ResultTable, kind: PlotKind) -> Result<()> {
    if table.columns != kind.schema() {
        return Err(CliError::Schema(format!(
            "{kind:?} plot expects columns {:?}, table {} has {:?}",
            kind.schema(),
            table.name,
            table.columns
        )));
    }
    Ok(())
}

fn pairs(table: &ResultTable, x: &str, y: &str) -> Result<Vec<Option<(f64, f64)>>> {
    let xs = table.numbers(x)?;
    let ys = table.numbers(y)?;
    Ok(xs.into_iter().zip(ys).map(|(a, b)| a.zip(b)).collect())
}

fn figure(table: &ResultTable, kind: PlotKind) -> Result<Figure> {
    check_schema(table, kind)?;
    Ok(match kind {
        PlotKind::Boundary => {
            let bits = table.numbers("b")?;
            let mut series: Vec<Series> = Vec::new();
            for (b, p) in bits.into_iter().zip(pairs(table, "rate_kbps", "crb_rad2")?) {
                let (Some(b), Some(p)) = (b, p) else { continue };
                let label = format!("b = {b}");
                match series.iter_mut().find(|s| s.label == label) {
                    Some(s) => s.points.push(p),
                    None => series.push(Series {
                        label,
                        points: vec![p],
                        notes: vec![],
                        line: true,
                        radius: 2.5,
                    }),
                }
            }
            Figure {
                title: "CRB-rate boundary per ADC resolution",
                x_label: "UL rate [kbps]",
                y_label: "CRB [rad²]",
                y_log: true,
                series,
            }
        }
        PlotKind::DistanceSweep => {
            let d = table.numbers("distance_m")?;
            let mut s = Series {
                label: "Pareto endpoint".into(),
                points: vec![],
                notes: vec![],
                line: true,
                radius: 3.0,
            };
            for (d, p) in d.into_iter().zip(pairs(table, "rate_kbps", "crb_rad2")?) {
                if let (Some(d), Some(p)) = (d, p) {
                    s.points.push(p);
                    s.notes.push(format!("{d} m"));
                }
            }
            Figure {
                title: "Pareto endpoint versus target distance",
                x_label: "UL rate [kbps]",
                y_label: "CRB [rad²]",
                y_log: true,
                series: if s.points.is_empty() { vec![] } else { vec![s] },
            }
        }
        PlotKind::MinBits => {
            let points: Vec<(f64, f64)> = pairs(table, "dr_sig_db", "b_min")?.into_iter().flatten().collect();
            let series = if points.is_empty() {
                vec![]
            } else {
                vec![Series {
                    label: "sampled targets".into(),
                    points,
                    notes: vec![],
                    line: false,
                    radius: 1.5,
                }]
            };
            Figure {
                title: "Minimum ADC resolution versus signal dynamic range",
                x_label: "DR_sig [dB]",
                y_label: "minimum resolution [bits]",
                y_log: false,
                series,
            }
        }
    })
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders `table` as an SVG document.
pub fn emit_plot(table: &ResultTable, kind: PlotKind) -> Result<String> {
    let fig = figure(table, kind)?;
    let all: Vec<(f64, f64)> = fig.series.iter().flat_map(|s| s.points.iter().copied()).collect();
    let (xa, ya) = if all.is_empty() {
        (Axis::unit(), Axis::unit())
    } else {
        let xs: Vec<f64> = all.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = all.iter().map(|p| p.1).collect();
        (Axis::fit(&xs, false), Axis::fit(&ys, fig.y_log))
    };
    let px = |x: f64| LEFT + xa.frac(x) * (RIGHT - LEFT);
    let py = |y: f64| BOTTOM - ya.frac(y) * (BOTTOM - TOP);

    let mut s = String::new();
    let w = &mut s;
    // Writing into a String cannot fail.
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(w, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        w,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        (LEFT + RIGHT) / 2.0,
        escape(fig.title)
    );

    for (v, label) in xa.ticks() {
        let x = px(v);
        let _ = writeln!(w, r##"<line x1="{x:.2}" y1="{TOP:.2}" x2="{x:.2}" y2="{BOTTOM:.2}" stroke="#e0e0e0"/>"##);
        let _ = writeln!(
            w,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            BOTTOM + 18.0,
            escape(&label)
        );
    }
    for (v, label) in ya.ticks() {
        let y = py(v);
        let _ = writeln!(w, r##"<line x1="{LEFT:.2}" y1="{y:.2}" x2="{RIGHT:.2}" y2="{y:.2}" stroke="#e0e0e0"/>"##);
        let _ = writeln!(
            w,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            y + 4.0,
            escape(&label)
        );
    }
    let _ = writeln!(
        w,
        r#"<rect x="{LEFT:.2}" y="{TOP:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        RIGHT - LEFT,
        BOTTOM - TOP
    );
    let _ = writeln!(
        w,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (LEFT + RIGHT) / 2.0,
        BOTTOM + 44.0,
        escape(fig.x_label)
    );
    let (yx, yy) = (24.0, (TOP + BOTTOM) / 2.0);
    let _ = writeln!(
        w,
        r#"<text x="{yx:.2}" y="{yy:.2}" text-anchor="middle" transform="rotate(-90 {yx:.2} {yy:.2})">{}</text>"#,
        escape(fig.y_label)
    );

    if fig.series.is_empty() {
        let _ = writeln!(
            w,
            r##"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="16" fill="#808080">no data</text>"##,
            (LEFT + RIGHT) / 2.0,
            (TOP + BOTTOM) / 2.0
        );
    }

    for (i, series) in fig.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if series.line && series.points.len() > 1 {
            let pts: Vec<String> = series
                .points
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
                .collect();
            let _ = writeln!(
                w,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                pts.join(" ")
            );
        }
        for (j, &(x, y)) in series.points.iter().enumerate() {
            let _ = writeln!(
                w,
                r#"<circle cx="{:.2}" cy="{:.2}" r="{}" fill="{color}"/>"#,
                px(x),
                py(y),
                series.radius
            );
            if let Some(note) = series.notes.get(j) {
                let _ = writeln!(
                    w,
                    r#"<text x="{:.2}" y="{:.2}" font-size="10">{}</text>"#,
                    px(x) + 5.0,
                    py(y) - 5.0,
                    escape(note)
                );
            }
        }
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let _ = writeln!(
            w,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            RIGHT + 15.0,
            RIGHT + 35.0
        );
        let _ = writeln!(
            w,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            RIGHT + 40.0,
            ly + 4.0,
            escape(&series.label)
        );
    }
    let _ = writeln!(w, "</svg>");
    Ok(s)
}
