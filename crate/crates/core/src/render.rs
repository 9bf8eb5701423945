//! SVG overlay of the ROI, representative paths and per-movement counts.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::counting::PipelineResult;
use crate::error::{Error, Result};
use crate::geom::Point2;
use crate::roi::GridField;
use crate::scalar::Scalar;
use crate::tracker::Track;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Layer {
    GridHeatmap,
    Roi,
    Tracks,
    Paths,
    Counts,
}

impl Layer {
    pub const ALL: [Layer; 5] = [Layer::GridHeatmap, Layer::Roi, Layer::Tracks, Layer::Paths, Layer::Counts];

    pub fn parse(s: &str) -> Option<Layer> {
        Some(match s {
            "grid-heatmap" | "grid" => Layer::GridHeatmap,
            "roi" => Layer::Roi,
            "tracks" => Layer::Tracks,
            "paths" => Layer::Paths,
            "counts" => Layer::Counts,
            _ => return None,
        })
    }
}

pub const PALETTE: [&str; 10] =
    ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];

pub fn cluster_color(idx: usize) -> &'static str {
    PALETTE[idx % PALETTE.len()]
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderSpec {
    pub layers: BTreeSet<Layer>,
    pub roi_stroke: f64,
    pub path_stroke: f64,
    pub track_stroke: f64,
    pub font_size: f64,
}

impl Default for RenderSpec {
    fn default() -> Self {
        RenderSpec {
            layers: [Layer::Roi, Layer::Paths, Layer::Counts].into_iter().collect(),
            roi_stroke: 3.0,
            path_stroke: 4.0,
            track_stroke: 1.0,
            font_size: 28.0,
        }
    }
}

impl RenderSpec {
    pub fn with_layers(layers: impl IntoIterator<Item = Layer>) -> Result<Self> {
        let layers: BTreeSet<Layer> = layers.into_iter().collect();
        if layers.is_empty() {
            return Err(Error::InvalidParams("render needs at least one layer".into()));
        }
        Ok(RenderSpec { layers, ..RenderSpec::default() })
    }
}

/// Optional inputs for the layers not covered by a pipeline result.
#[derive(Debug, Clone, Copy)]
pub struct Overlays<'a, T> {
    pub tracks: &'a [Track<T>],
    pub grid: Option<&'a GridField<T>>,
}

impl<T> Default for Overlays<'_, T> {
    fn default() -> Self {
        Overlays { tracks: &[], grid: None }
    }
}

fn num<T: Scalar>(v: T) -> String {
    let s = format!("{:.2}", v.as_f64());
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn points_attr<T: Scalar>(pts: impl IntoIterator<Item = Point2<T>>) -> String {
    pts.into_iter().map(|p| format!("{},{}", num(p.x), num(p.y))).collect::<Vec<_>>().join(" ")
}

/// Point halfway along the polyline by arclength.
fn midpoint<T: Scalar>(pts: &[Point2<T>]) -> Option<Point2<T>> {
    let total: T = pts.windows(2).map(|w| w[0].dist(w[1])).sum();
    let mut left = total / T::of(2.0);
    for w in pts.windows(2) {
        let l = w[0].dist(w[1]);
        if left <= l && l > T::zero() {
            return Some(w[0] + (w[1] - w[0]) * (left / l));
        }
        left = left - l;
    }
    pts.first().copied()
}

pub fn render_svg<T: Scalar>(r: &PipelineResult<T>, spec: &RenderSpec, extra: Overlays<'_, T>) -> String {
    let (w, h) = (r.frame_geometry.width, r.frame_geometry.height);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    s.push_str("<defs>\n");
    let palette_used = if r.clusters.is_empty() { 0 } else { PALETTE.len() };
    for (c, fill) in PALETTE.iter().enumerate().take(palette_used) {
        let _ = writeln!(
            s,
            r#"<marker id="arrow{c}" viewBox="0 0 10 10" refX="8" refY="5" markerWidth="5" markerHeight="5" orient="auto-start-reverse"><path d="M0,0 L10,5 L0,10 z" fill="{fill}"/></marker>"#
        );
    }
    s.push_str("</defs>\n");
    let _ = writeln!(s, r##"<rect width="{w}" height="{h}" fill="#ffffff"/>"##);

    if spec.layers.contains(&Layer::GridHeatmap) {
        if let Some(g) = extra.grid {
            s.push_str("<g class=\"grid\">\n");
            for c in g.cells() {
                if let Some(avg) = g.cell_avg_conf(c) {
                    let _ = writeln!(
                        s,
                        r##"<rect x="{}" y="{}" width="{g2}" height="{g2}" fill="#d62728" fill-opacity="{}"/>"##,
                        num(g.grid_size * T::of(c.col as f64)),
                        num(g.grid_size * T::of(c.row as f64)),
                        num(avg),
                        g2 = num(g.grid_size),
                    );
                }
            }
            s.push_str("</g>\n");
        }
    }
    if spec.layers.contains(&Layer::Tracks) && !extra.tracks.is_empty() {
        s.push_str("<g class=\"tracks\">\n");
        for t in extra.tracks {
            let _ = writeln!(
                s,
                r##"<polyline points="{}" fill="none" stroke="#999999" stroke-width="{}"/>"##,
                points_attr(t.centers()),
                spec.track_stroke
            );
        }
        s.push_str("</g>\n");
    }
    if spec.layers.contains(&Layer::Roi) {
        let _ = writeln!(
            s,
            r##"<polygon class="roi" points="{}" fill="none" stroke="#000000" stroke-width="{}"/>"##,
            points_attr(r.roi.vertices.iter().copied()),
            spec.roi_stroke
        );
    }
    if spec.layers.contains(&Layer::Paths) {
        for c in &r.clusters {
            let color = cluster_color(c.cluster_idx);
            let marker = c.cluster_idx % PALETTE.len();
            for (dir, pts) in [("F", &c.path.forward), ("B", &c.path.backward)] {
                let _ = writeln!(
                    s,
                    r#"<polyline class="path" data-cluster="{}" data-dir="{dir}" points="{}" fill="none" stroke="{color}" stroke-width="{}" marker-end="url(#arrow{marker})"/>"#,
                    c.cluster_idx,
                    points_attr(pts.iter().copied()),
                    spec.path_stroke
                );
            }
        }
    }
    if spec.layers.contains(&Layer::Counts) {
        for c in &r.clusters {
            let anchor = if c.path.forward.len() >= c.path.backward.len() { &c.path.forward } else { &c.path.backward };
            if let Some(m) = midpoint(anchor) {
                let _ = writeln!(
                    s,
                    r##"<text x="{}" y="{}" font-family="sans-serif" font-size="{}" fill="{}" stroke="#ffffff" stroke-width="0.5">{}</text>"##,
                    num(m.x),
                    num(m.y),
                    spec.font_size,
                    cluster_color(c.cluster_idx),
                    c.count
                );
            }
        }
    }
    s.push_str("</svg>\n");
    s
}

pub fn render<T: Scalar>(r: &PipelineResult<T>, spec: &RenderSpec, out: &Path) -> Result<()> {
    render_with(r, spec, Overlays::default(), out)
}

pub fn render_with<T: Scalar>(
    r: &PipelineResult<T>,
    spec: &RenderSpec,
    extra: Overlays<'_, T>,
    out: &Path,
) -> Result<()> {
    std::fs::write(out, render_svg(r, spec, extra)).map_err(|e| Error::io(out, e))
}
