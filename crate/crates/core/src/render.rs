//! SVG figures: trajectories, final partition, convergence history.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::sim::{FinalState, SimRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureKind {
    Trajectories,
    Partition,
    Convergence,
}

impl FromStr for FigureKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trajectories" => Ok(FigureKind::Trajectories),
            "partition" => Ok(FigureKind::Partition),
            "convergence" => Ok(FigureKind::Convergence),
            other => Err(Error::validation(format!(
                "unknown figure kind {other:?} (expected trajectories, partition or convergence)"
            ))),
        }
    }
}

impl FigureKind {
    pub fn file_name(self) -> &'static str {
        match self {
            FigureKind::Trajectories => "trajectories.svg",
            FigureKind::Partition => "partition.svg",
            FigureKind::Convergence => "convergence.svg",
        }
    }
}

const SIZE: f64 = 520.0;
const MARGIN: f64 = 30.0;

/// Distinct pastel per agent (golden-angle hue walk).
fn agent_color(i: usize, lightness: u32) -> String {
    let hue = (i as f64 * 137.507_764) % 360.0;
    format!("hsl({hue:.1},65%,{lightness}%)")
}

struct View {
    lo: Vec2,
    scale: f64,
    height: f64,
}

impl View {
    fn fit(lo: Vec2, hi: Vec2) -> Self {
        let span = (hi.x - lo.x).max(hi.y - lo.y);
        let scale = (SIZE - 2.0 * MARGIN) / span;
        View {
            lo,
            scale,
            height: (hi.y - lo.y) * scale + 2.0 * MARGIN,
        }
    }

    fn width(&self, hi: Vec2) -> f64 {
        (hi.x - self.lo.x) * self.scale + 2.0 * MARGIN
    }

    fn px(&self, p: Vec2) -> (f64, f64) {
        (
            MARGIN + (p.x - self.lo.x) * self.scale,
            self.height - MARGIN - (p.y - self.lo.y) * self.scale,
        )
    }
}

fn header(out: &mut String, w: f64, h: f64) {
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.2} {h:.2}\">"
    );
    let _ = writeln!(out, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
}

/// Owner regions as horizontal runs of cells, one group per agent.
fn partition_layer(out: &mut String, view: &View, fs: &FinalState, lightness: u32) {
    let g = &fs.grid;
    let agents = fs.labels.agent_count();
    let mut runs: Vec<String> = vec![String::new(); agents];
    for iy in 0..g.ny {
        let mut ix = 0;
        while ix < g.nx {
            let owner = fs.labels.owner(iy * g.nx + ix);
            let start = ix;
            while ix < g.nx && fs.labels.owner(iy * g.nx + ix) == owner {
                ix += 1;
            }
            if let Some(i) = owner {
                let lo = Vec2::new(
                    g.origin.x + start as f64 * g.cell_size,
                    g.origin.y + (iy + 1) as f64 * g.cell_size,
                );
                let (x, y) = view.px(lo);
                let w = (ix - start) as f64 * g.cell_size * view.scale;
                let h = g.cell_size * view.scale;
                let _ = writeln!(
                    runs[i],
                    "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{w:.2}\" height=\"{h:.2}\"/>"
                );
            }
        }
    }
    for (i, body) in runs.iter().enumerate() {
        if body.is_empty() {
            continue;
        }
        let _ = writeln!(
            out,
            "<g data-owner=\"{i}\" fill=\"{}\" stroke=\"none\" shape-rendering=\"crispEdges\">",
            agent_color(i, lightness)
        );
        out.push_str(body);
        out.push_str("</g>\n");
    }
}

fn polygon_outline(out: &mut String, view: &View, vertices: &[Vec2]) {
    let pts: Vec<String> = vertices
        .iter()
        .map(|v| {
            let (x, y) = view.px(*v);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    let _ = writeln!(
        out,
        "<polygon points=\"{}\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>",
        pts.join(" ")
    );
}

fn plus_marker(out: &mut String, (x, y): (f64, f64), color: &str) {
    let r = 5.0;
    let _ = writeln!(
        out,
        "<path class=\"initial\" d=\"M{:.2} {y:.2}H{:.2}M{x:.2} {:.2}V{:.2}\" stroke=\"{color}\" stroke-width=\"2\"/>",
        x - r,
        x + r,
        y - r,
        y + r
    );
}

fn circle_marker(out: &mut String, (x, y): (f64, f64), color: &str) {
    let _ = writeln!(
        out,
        "<circle class=\"centroid\" cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"5\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\"/>"
    );
}

fn domain_figure(record: &SimRecord, with_paths: bool) -> String {
    let (lo, hi) = record.config.polygon.bounding_box();
    let view = View::fit(lo, hi);
    let mut out = String::new();
    header(&mut out, view.width(hi), view.height);
    if let Some(fs) = &record.final_state {
        partition_layer(&mut out, &view, fs, if with_paths { 88 } else { 75 });
    }
    polygon_outline(&mut out, &view, record.config.polygon.vertices());
    let first = &record.steps[0];
    let last = record.steps.last().expect("non-empty");
    let agents = first.positions.len();
    for i in 0..agents {
        let color = agent_color(i, 35);
        if with_paths {
            let pts: Vec<String> = record
                .steps
                .iter()
                .filter_map(|s| s.positions.get(i))
                .map(|p| {
                    let (x, y) = view.px(*p);
                    format!("{x:.2},{y:.2}")
                })
                .collect();
            let _ = writeln!(
                out,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.2\"/>",
                pts.join(" ")
            );
            plus_marker(&mut out, view.px(first.positions[i]), &color);
        }
        let (x, y) = view.px(last.positions[i]);
        let _ = writeln!(out, "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"2\" fill=\"black\"/>");
        if let Some(c) = last.centroids.get(i) {
            circle_marker(&mut out, view.px(*c), "black");
        }
    }
    out.push_str("</svg>\n");
    out
}

fn convergence_figure(record: &SimRecord) -> String {
    let panel_w = 420.0;
    let panel_h = 260.0;
    let (w, h) = (panel_w + 2.0 * MARGIN + 20.0, 2.0 * (panel_h + 2.0 * MARGIN));
    let mut out = String::new();
    header(&mut out, w, h);
    let last_step = record.steps.last().map_or(1, |s| s.step.max(1)) as f64;
    let e0 = record.steps[0].error_measure;
    let series: [(&str, Vec<f64>); 2] = [
        (
            "normalized objective",
            record.steps.iter().map(|s| s.objective_normalized).collect(),
        ),
        (
            "normalized error measure",
            record
                .steps
                .iter()
                .map(|s| if e0 > 0.0 { s.error_measure / e0 } else { 0.0 })
                .collect(),
        ),
    ];
    for (k, (title, ys)) in series.iter().enumerate() {
        let x0 = MARGIN + 20.0;
        let y0 = k as f64 * (panel_h + 2.0 * MARGIN) + MARGIN;
        let _ = writeln!(
            out,
            "<g class=\"panel\" data-series=\"{title}\" data-ymin=\"0\" data-ymax=\"1\">"
        );
        let _ = writeln!(
            out,
            "<rect x=\"{x0:.2}\" y=\"{y0:.2}\" width=\"{panel_w:.2}\" height=\"{panel_h:.2}\" fill=\"none\" stroke=\"black\"/>"
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" font-family=\"sans-serif\">{title}</text>",
            x0,
            y0 - 8.0
        );
        for (tick, label) in [(0.0, "0"), (1.0, "1")] {
            let ty = y0 + panel_h * (1.0 - tick);
            let _ = writeln!(
                out,
                "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"10\" font-family=\"sans-serif\" text-anchor=\"end\">{label}</text>",
                x0 - 4.0,
                ty + 3.0
            );
        }
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"10\" font-family=\"sans-serif\" text-anchor=\"end\">step {}</text>",
            x0 + panel_w,
            y0 + panel_h + 14.0,
            last_step as usize
        );
        let pts: Vec<String> = record
            .steps
            .iter()
            .zip(ys)
            .map(|(s, v)| {
                let x = x0 + panel_w * s.step as f64 / last_step;
                let y = y0 + panel_h * (1.0 - v.clamp(0.0, 1.0));
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            out,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\"/>",
            pts.join(" ")
        );
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    out
}

/// Renders `kind` as an SVG document.
pub fn render_figure(record: &SimRecord, kind: FigureKind) -> Result<String> {
    if record.steps.is_empty() {
        return Err(Error::validation("cannot render an empty record"));
    }
    Ok(match kind {
        FigureKind::Trajectories => domain_figure(record, true),
        FigureKind::Partition => domain_figure(record, false),
        FigureKind::Convergence => convergence_figure(record),
    })
}
