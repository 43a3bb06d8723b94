//! Minimal static SVG line charts. Data files are the real artifact; these
//! are for looking at.

use std::fmt::Write as _;
use std::str::FromStr;

use thermsearch::{FitModel, FitReport};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// Ground-state population against t v.
    P1,
    /// gamma_k / v against level index.
    Gamma,
    /// tau v against ln N, with an optional fitted curve.
    Tau,
}

impl PlotKind {
    pub const SUPPORTED: [&'static str; 3] = ["p1", "gamma", "tau"];
}

impl FromStr for PlotKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "p1" => Ok(PlotKind::P1),
            "gamma" => Ok(PlotKind::Gamma),
            "tau" => Ok(PlotKind::Tau),
            other => Err(CliError::Usage(format!(
                "unsupported plot kind '{other}'; supported kinds: {}",
                Self::SUPPORTED.join(", ")
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Line,
    Markers,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub style: Style,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Round-ish tick positions covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 * lo.abs().max(1.0) {
        let pad = 0.5 * lo.abs().max(1.0);
        return (lo - pad, hi + pad);
    }
    let pad = 0.04 * (hi - lo);
    (lo - pad, hi + pad)
}

fn fmt_tick(x: f64) -> String {
    let s = format!("{x:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

impl Chart {
    pub fn to_svg(&self) -> String {
        let all = || self.series.iter().flat_map(|s| s.points.iter().copied());
        let (x0, x1) = bounds(all().map(|p| p.0));
        let (y0, y1) = bounds(all().map(|p| p.1));
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            LEFT + pw / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            out,
            r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        for t in ticks(x0, x1) {
            let x = sx(t);
            let _ = writeln!(
                out,
                r#"<line x1="{x:.2}" y1="{b:.2}" x2="{x:.2}" y2="{b2:.2}" stroke="black"/><text x="{x:.2}" y="{ty:.2}" text-anchor="middle">{}</text>"#,
                fmt_tick(t),
                b = TOP + ph,
                b2 = TOP + ph + 5.0,
                ty = TOP + ph + 18.0
            );
        }
        for t in ticks(y0, y1) {
            let y = sy(t);
            let _ = writeln!(
                out,
                r#"<line x1="{l2:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><text x="{tx:.2}" y="{yt:.2}" text-anchor="end">{}</text>"#,
                fmt_tick(t),
                l2 = LEFT - 5.0,
                tx = LEFT - 8.0,
                yt = y + 4.0
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 15.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="18" y="{y}" text-anchor="middle" transform="rotate(-90 18 {y})">{}</text>"#,
            escape(&self.y_label),
            y = TOP + ph / 2.0
        );

        for (i, s) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let pts: Vec<(f64, f64)> = s
                .points
                .iter()
                .copied()
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .collect();
            match s.style {
                // a line needs two points; one point still shows up as a marker
                Style::Line if pts.len() >= 2 => {
                    let path: Vec<String> = pts
                        .iter()
                        .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                        .collect();
                    let _ = writeln!(
                        out,
                        r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                        path.join(" ")
                    );
                }
                _ => {
                    for &(x, y) in &pts {
                        let _ = writeln!(
                            out,
                            r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{color}"/>"#,
                            sx(x),
                            sy(y)
                        );
                    }
                }
            }
            let ly = TOP + 12.0 + 18.0 * i as f64;
            let lx = WIDTH - RIGHT + 12.0;
            let _ = writeln!(
                out,
                r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
                lx + 20.0,
                lx + 26.0,
                ly + 4.0,
                escape(&s.label)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

/// `p1(t)` curves, one per system size.
pub fn p1_chart(curves: &[(usize, Vec<(f64, f64)>)], threshold: Option<f64>) -> Chart {
    let mut series: Vec<Series> = curves
        .iter()
        .map(|(n, pts)| Series {
            label: format!("N = {n}"),
            points: pts.clone(),
            style: Style::Line,
        })
        .collect();
    if let Some(th) = threshold {
        let (lo, hi) = bounds(curves.iter().flat_map(|(_, p)| p.iter().map(|q| q.0)));
        series.push(Series {
            label: format!("p1 = {th}"),
            points: vec![(lo, th), (hi, th)],
            style: Style::Line,
        });
    }
    Chart {
        title: "Ground-state population".into(),
        x_label: "t v".into(),
        y_label: "p1".into(),
        series,
    }
}

/// `gamma_k / v` profiles, one per system size.
/// `gamma_k / v` against level index for one system size.
pub type Profile = (usize, Vec<(usize, f64)>);

/// Labelled `(N, tau v)` points with an optional fit to overlay.
pub type TauSeries = (String, Vec<(usize, f64)>, Option<FitReport>);

pub fn gamma_chart(profiles: &[Profile]) -> Chart {
    let series = profiles
        .iter()
        .map(|(n, prof)| Series {
            label: format!("N = {n}"),
            points: prof.iter().map(|&(k, g)| (k as f64, g)).collect(),
            style: Style::Line,
        })
        .collect();
    Chart {
        title: "Total escape rates".into(),
        x_label: "k".into(),
        y_label: "gamma_k / v".into(),
        series,
    }
}

/// `tau v` against `ln N` for each labelled scan; fitted curves drawn when
/// there are at least two points to span.
pub fn tau_chart(scans: &[TauSeries]) -> Chart {
    let mut series = Vec::new();
    for (label, pts, fit) in scans {
        let xy: Vec<(f64, f64)> = pts.iter().map(|&(n, t)| ((n as f64).ln(), t)).collect();
        if let (Some(fit), true) = (fit, xy.len() >= 2) {
            let (lo, hi) = xy
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| {
                    (l.min(p.0), h.max(p.0))
                });
            let curve = (0..=40)
                .map(|i| {
                    let x = lo + (hi - lo) * i as f64 / 40.0;
                    let y = match fit.model {
                        FitModel::Log => fit.slope * x + fit.intercept,
                        FitModel::Power => (fit.slope * (x - 100f64.ln()) + fit.intercept).exp(),
                    };
                    (x, y)
                })
                .collect();
            let name = match fit.model {
                FitModel::Log => format!("{:.3} ln N {:+.3}", fit.slope, fit.intercept),
                FitModel::Power => format!("kappa = {:.3}", fit.slope),
            };
            series.push(Series {
                label: name,
                points: curve,
                style: Style::Line,
            });
        }
        series.push(Series {
            label: label.clone(),
            points: xy,
            style: Style::Markers,
        });
    }
    Chart {
        title: "Relaxation time".into(),
        x_label: "ln N".into(),
        y_label: "tau v".into(),
        series,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_kind_lists_supported() {
        let err = "heatmap".parse::<PlotKind>().unwrap_err();
        let msg = err.to_string();
        for k in PlotKind::SUPPORTED {
            assert!(msg.contains(k), "{msg}");
        }
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn single_point_gives_one_marker_and_no_fit() {
        let fit = FitReport {
            model: FitModel::Log,
            slope: 1.0,
            intercept: 0.0,
            r_squared: 1.0,
            max_abs_residual: 0.0,
            max_rel_residual: 0.0,
            n_points: 1,
        };
        let svg = tau_chart(&[("scan".into(), vec![(500, 9.0)], Some(fit))]).to_svg();
        assert_eq!(svg.matches("<circle").count(), 1);
        assert_eq!(svg.matches("<polyline").count(), 0);
    }

    #[test]
    fn one_polyline_per_curve() {
        let curves: Vec<_> = (1..=7)
            .map(|i| (500 * i, vec![(0.0, 0.1), (1.0, 0.5), (2.0, 0.9)]))
            .collect();
        let svg = p1_chart(&curves, None).to_svg();
        assert_eq!(svg.matches("<polyline").count(), 7);
        assert!(svg.contains("N = 3500"));
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn ticks_are_inside_range() {
        for (lo, hi) in [(0.0, 1.0), (6.1, 8.2), (-3.0, 47.0), (0.99, 1.01)] {
            let t = ticks(lo, hi);
            assert!(!t.is_empty());
            assert!(t.iter().all(|&x| x >= lo - 1e-12 && x <= hi + 1e-12));
        }
    }
}
