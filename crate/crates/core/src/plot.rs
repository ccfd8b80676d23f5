//! Static SVG figures: three orthogonal projections of the path (with the
//! shelf slabs when a scene is given) plus position and rotation against
//! time.

use std::fmt::Write as _;

use crate::data::{Trajectory, POSE_DIM};
use crate::error::{Error, Result};
use crate::scene::Scene;

const PANEL_W: f64 = 320.0;
const PANEL_H: f64 = 240.0;
const MARGIN: f64 = 36.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];
const CHANNELS: [&str; POSE_DIM] = ["px", "py", "pz", "rx", "ry", "rz"];

/// Data-space rectangle mapped onto a panel.
#[derive(Debug, Clone, Copy)]
struct Frame {
    x0: f64,
    y0: f64,
    min: (f64, f64),
    max: (f64, f64),
}

impl Frame {
    fn new(x0: f64, y0: f64, points: impl Iterator<Item = (f64, f64)>) -> Self {
        let mut min = (f64::INFINITY, f64::INFINITY);
        let mut max = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (x, y) in points {
            min = (min.0.min(x), min.1.min(y));
            max = (max.0.max(x), max.1.max(y));
        }
        // pad flat ranges so the mapping stays finite
        let pad = |lo: f64, hi: f64| {
            let span = hi - lo;
            let p = if span > 1e-12 { 0.05 * span } else { 0.5 };
            (lo - p, hi + p)
        };
        let (xl, xh) = pad(min.0, max.0);
        let (yl, yh) = pad(min.1, max.1);
        Frame {
            x0,
            y0,
            min: (xl, yl),
            max: (xh, yh),
        }
    }

    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let w = PANEL_W - 2.0 * MARGIN;
        let h = PANEL_H - 2.0 * MARGIN;
        (
            self.x0 + MARGIN + (x - self.min.0) / (self.max.0 - self.min.0) * w,
            self.y0 + PANEL_H - MARGIN - (y - self.min.1) / (self.max.1 - self.min.1) * h,
        )
    }

    fn clip(&self, lo: (f64, f64), hi: (f64, f64)) -> Option<((f64, f64), (f64, f64))> {
        let lo = (lo.0.max(self.min.0), lo.1.max(self.min.1));
        let hi = (hi.0.min(self.max.0), hi.1.min(self.max.1));
        (lo.0 < hi.0 && lo.1 < hi.1).then_some((lo, hi))
    }
}

fn axes(svg: &mut String, f: &Frame, title: &str, xlabel: &str, ylabel: &str) {
    let (l, b) = f.map(f.min.0, f.min.1);
    let (r, t) = f.map(f.max.0, f.max.1);
    let _ = writeln!(
        svg,
        r##"<rect class="axes" x="{l:.2}" y="{t:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#444"/>"##,
        r - l,
        b - t
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{title}</text>"#,
        (l + r) / 2.0,
        t - 8.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="middle">{xlabel} [{:.3}, {:.3}]</text>"#,
        (l + r) / 2.0,
        b + 16.0,
        f.min.0,
        f.max.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="middle" transform="rotate(-90 {:.2} {:.2})">{ylabel} [{:.3}, {:.3}]</text>"#,
        l - 12.0,
        (t + b) / 2.0,
        l - 12.0,
        (t + b) / 2.0,
        f.min.1,
        f.max.1
    );
}

fn polyline(
    svg: &mut String,
    f: &Frame,
    points: impl Iterator<Item = (f64, f64)>,
    color: &str,
    label: &str,
) {
    let pts: Vec<String> = points
        .map(|(x, y)| {
            let (u, v) = f.map(x, y);
            format!("{u:.2},{v:.2}")
        })
        .collect();
    let _ = writeln!(
        svg,
        r#"<polyline data-label="{label}" fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#,
        pts.join(" ")
    );
}

fn check(trajs: &[(String, &Trajectory)]) -> Result<()> {
    if trajs.is_empty() {
        return Err(Error::invalid("nothing to plot"));
    }
    match trajs.iter().find(|(_, t)| t.dim() != POSE_DIM) {
        Some((name, t)) => Err(Error::invalid(format!(
            "{name}: expected a {POSE_DIM}-D pose trajectory, got dimension {}",
            t.dim()
        ))),
        None => Ok(()),
    }
}

/// SVG document with projections and time series of `trajs`.
pub fn render_svg(trajs: &[(String, &Trajectory)], scene: Option<&Scene>) -> Result<String> {
    check(trajs)?;
    let width = 3.0 * PANEL_W;
    let height = 2.0 * PANEL_H;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);

    let projections = [
        (0, 1, "top view", "x", "y"),
        (0, 2, "front view", "x", "z"),
        (1, 2, "side view", "y", "z"),
    ];
    for (p, (a, b, title, xl, yl)) in projections.into_iter().enumerate() {
        let frame = Frame::new(
            p as f64 * PANEL_W,
            0.0,
            trajs
                .iter()
                .flat_map(|(_, t)| t.rows().map(move |r| (r[a], r[b]))),
        );
        axes(&mut svg, &frame, title, xl, yl);
        if let Some(scene) = scene {
            for slab in &scene.slabs {
                let Some((lo, hi)) =
                    frame.clip((slab.min[a], slab.min[b]), (slab.max[a], slab.max[b]))
                else {
                    continue;
                };
                let (x, y1) = frame.map(lo.0, lo.1);
                let (x1, y) = frame.map(hi.0, hi.1);
                let _ = writeln!(
                    svg,
                    r##"<rect class="slab" x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="#bbbbbb" fill-opacity="0.5"/>"##,
                    x1 - x,
                    y1 - y
                );
            }
        }
        for (i, (name, t)) in trajs.iter().enumerate() {
            polyline(
                &mut svg,
                &frame,
                t.rows().map(|r| (r[a], r[b])),
                COLORS[i % COLORS.len()],
                name,
            );
        }
    }

    for (p, (range, title, unit)) in [(0..3, "position", "m"), (3..6, "rotation vector", "rad")]
        .into_iter()
        .enumerate()
    {
        let frame = Frame::new(
            p as f64 * PANEL_W,
            PANEL_H,
            trajs.iter().flat_map(|(_, t)| {
                let range = range.clone();
                t.times()
                    .iter()
                    .zip(t.rows())
                    .flat_map(move |(&s, r)| range.clone().map(move |d| (s, r[d])))
            }),
        );
        axes(&mut svg, &frame, title, "t (s)", unit);
        for (i, (name, t)) in trajs.iter().enumerate() {
            for d in range.clone() {
                let points = t.times().iter().zip(t.rows()).map(|(&s, r)| (s, r[d]));
                let label = format!("{name}:{}", CHANNELS[d]);
                polyline(
                    &mut svg,
                    &frame,
                    points,
                    COLORS[(i * 3 + d % 3) % COLORS.len()],
                    &label,
                );
            }
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
