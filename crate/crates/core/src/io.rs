//! Line-oriented text formats for stage outputs.
//!
//! Every record is one line: an upper-case tag followed by whitespace
//! separated fields. Blank lines and lines starting with `#` are ignored.
//!
//! | file     | records                                                       |
//! |----------|---------------------------------------------------------------|
//! | ROI      | `GEOMETRY w h`, `ROI n x1 y1 ...`, `GRIDSIZE g`               |
//! | tracks   | `TRACK id frame cx cy`, sorted by id then frame               |
//! | clusters | `K k SILHOUETTE s`, `ASSIGN track_id cluster_idx`             |
//! | result   | ROI records, `PARAM key value`, `TRACKS n`, cluster records,  |
//! |          | `VBAR idx x y`, `PATH idx F\|B n x1 y1 ...`, `COUNT idx n`,   |
//! |          | `PURGED track_id`                                            |
//! | truth    | `GEOMETRY w h`, `ROI n ...`, `MOVEMENT count n x1 y1 ...`     |
//! | report   | `ROI_IOU v`, `MAE_PCT v`, `MOVEMENT gt pred idx\|-`, `UNMATCHED idx n` |
//! | scenario | `key = value` header lines, `CLUTTER x y`, `LANE n x1 y1 ... count speed [start]` |

use std::collections::BTreeMap;
use std::fmt::{Display, Write as _};
use std::path::Path;
use std::str::FromStr;

use crate::counting::{MovementCluster, PipelineResult};
use crate::error::{Error, Result};
use crate::eval::{EvalReport, MovementMatch};
use crate::geom::Point2;
use crate::model::{FrameGeometry, HyperParams};
use crate::path::RepresentativePath;
use crate::roi::RoiPolygon;
use crate::scalar::Scalar;
use crate::synth::{GroundTruth, Lane, Scenario};
use crate::tracker::{Track, TrackPoint};

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

struct Fields<'a> {
    line: usize,
    it: std::str::SplitWhitespace<'a>,
}

impl<'a> Fields<'a> {
    fn next<V: FromStr>(&mut self, what: &str) -> Result<V> {
        let tok = self.it.next().ok_or_else(|| Error::parse(self.line, format!("missing {what}")))?;
        tok.parse().map_err(|_| Error::parse(self.line, format!("bad {what} `{tok}`")))
    }

    fn real<T: Scalar>(&mut self, what: &str) -> Result<T> {
        let v: T = self.next(what)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::parse(self.line, format!("non-finite {what}")))
        }
    }

    fn points<T: Scalar>(&mut self, n: usize) -> Result<Vec<Point2<T>>> {
        (0..n).map(|_| Ok(Point2::new(self.real("x")?, self.real("y")?))).collect()
    }

    fn counted_points<T: Scalar>(&mut self) -> Result<Vec<Point2<T>>> {
        let n: usize = self.next("vertex count")?;
        self.points(n)
    }

    fn token(&mut self, what: &str) -> Result<&'a str> {
        self.it.next().ok_or_else(|| Error::parse(self.line, format!("missing {what}")))
    }

    fn end(mut self) -> Result<()> {
        match self.it.next() {
            None => Ok(()),
            Some(t) => Err(Error::parse(self.line, format!("unexpected trailing `{t}`"))),
        }
    }
}

/// `(tag, fields)` for every record line.
fn records(text: &str) -> impl Iterator<Item = (&str, Fields<'_>)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.trim();
        if l.is_empty() || l.starts_with('#') {
            return None;
        }
        let mut it = l.split_whitespace();
        let tag = it.next()?;
        Some((tag, Fields { line: i + 1, it }))
    })
}

fn unknown(tag: &str, f: &Fields) -> Error {
    Error::parse(f.line, format!("unknown record `{tag}`"))
}

fn push_points<T: Display>(out: &mut String, pts: &[Point2<T>]) {
    let _ = write!(out, " {}", pts.len());
    for p in pts {
        let _ = write!(out, " {} {}", p.x, p.y);
    }
}

// ROI

pub fn write_roi<T: Scalar>(geom: FrameGeometry, roi: &RoiPolygon<T>) -> String {
    let mut out = format!("GEOMETRY {} {}\nROI", geom.width, geom.height);
    push_points(&mut out, &roi.vertices);
    let _ = writeln!(out, "\nGRIDSIZE {}", roi.grid_size);
    out
}

/// Parses the ROI records of an ROI or result file, ignoring other records.
pub fn parse_roi<T: Scalar>(text: &str) -> Result<(FrameGeometry, RoiPolygon<T>)> {
    let (mut geom, mut vertices, mut grid) = (None, None, None);
    for (tag, mut f) in records(text) {
        match tag {
            "GEOMETRY" => {
                geom = Some(FrameGeometry::new(f.next("width")?, f.next("height")?));
                f.end()?;
            }
            "ROI" => {
                vertices = Some(f.counted_points()?);
                f.end()?;
            }
            "GRIDSIZE" => {
                grid = Some(f.real("grid size")?);
                f.end()?;
            }
            _ => {}
        }
    }
    let missing = |what: &str| Error::parse(0, format!("no {what} record"));
    let vertices: Vec<Point2<T>> = vertices.ok_or_else(|| missing("ROI"))?;
    if vertices.len() < 3 {
        return Err(Error::EmptyRoi);
    }
    let grid_size = grid.ok_or_else(|| missing("GRIDSIZE"))?;
    Ok((geom.ok_or_else(|| missing("GEOMETRY"))?, RoiPolygon { vertices, grid_size }))
}

// Tracks

pub fn write_tracks<T: Scalar>(tracks: &[Track<T>]) -> String {
    let mut sorted: Vec<&Track<T>> = tracks.iter().collect();
    sorted.sort_by_key(|t| t.id);
    let mut out = String::new();
    for t in sorted {
        for p in &t.points {
            let _ = writeln!(out, "TRACK {} {} {} {}", t.id, p.frame, p.center.x, p.center.y);
        }
    }
    out
}

pub fn parse_tracks<T: Scalar>(text: &str) -> Result<Vec<Track<T>>> {
    let mut by_id: BTreeMap<u64, Vec<TrackPoint<T>>> = BTreeMap::new();
    for (tag, mut f) in records(text) {
        if tag != "TRACK" {
            return Err(unknown(tag, &f));
        }
        let id: u64 = f.next("track id")?;
        let frame: u64 = f.next("frame")?;
        let center = Point2::new(f.real("cx")?, f.real("cy")?);
        let line = f.line;
        f.end()?;
        let pts = by_id.entry(id).or_default();
        if pts.last().is_some_and(|p| p.frame >= frame) {
            return Err(Error::parse(line, format!("track {id}: frames not strictly increasing")));
        }
        pts.push(TrackPoint { frame, center });
    }
    Ok(by_id.into_iter().map(|(id, points)| Track { id, points, bbox_history: Vec::new() }).collect())
}

// Clusters

/// `K`/`ASSIGN` records for `(track_id, cluster_idx)` pairs.
pub fn write_assignments<T: Scalar>(k: usize, silhouette: T, assign: &[(u64, usize)]) -> String {
    let mut out = format!("K {k} SILHOUETTE {silhouette}\n");
    let mut sorted = assign.to_vec();
    sorted.sort_unstable();
    for (id, c) in sorted {
        let _ = writeln!(out, "ASSIGN {id} {c}");
    }
    out
}

/// `(k, silhouette, (track id, cluster index) pairs)`.
pub type Assignments<T> = (usize, T, Vec<(u64, usize)>);

/// Parses `K`/`ASSIGN` records, ignoring other records.
pub fn parse_assignments<T: Scalar>(text: &str) -> Result<Assignments<T>> {
    let (mut k, mut s, mut assign) = (None, T::zero(), Vec::new());
    for (tag, mut f) in records(text) {
        match tag {
            "K" => {
                k = Some(f.next("k")?);
                if f.token("SILHOUETTE")? != "SILHOUETTE" {
                    return Err(Error::parse(f.line, "expected SILHOUETTE"));
                }
                s = f.real("silhouette")?;
                f.end()?;
            }
            "ASSIGN" => {
                assign.push((f.next("track id")?, f.next("cluster index")?));
                f.end()?;
            }
            _ => {}
        }
    }
    Ok((k.ok_or_else(|| Error::parse(0, "no K record"))?, s, assign))
}

// Result

/// Everything a result file holds below its ROI records.
pub fn write_movements<T: Scalar>(
    clusters: &[MovementCluster<T>],
    purged: &[u64],
    params: &HyperParams,
    silhouette: T,
    tracks_emitted: usize,
) -> String {
    let mut out = String::new();
    for (k, v) in params.entries() {
        let _ = writeln!(out, "PARAM {k} {v}");
    }
    let _ = writeln!(out, "TRACKS {tracks_emitted}");
    let assign: Vec<(u64, usize)> =
        clusters.iter().flat_map(|c| c.track_ids.iter().map(move |&id| (id, c.cluster_idx))).collect();
    out.push_str(&write_assignments(clusters.len(), silhouette, &assign));
    for c in clusters {
        let idx = c.cluster_idx;
        let _ = writeln!(out, "VBAR {idx} {} {}", c.path.v_bar.x, c.path.v_bar.y);
        for (dir, pts) in [("F", &c.path.forward), ("B", &c.path.backward)] {
            let _ = write!(out, "PATH {idx} {dir}");
            push_points(&mut out, pts);
            out.push('\n');
        }
        let _ = writeln!(out, "COUNT {idx} {}", c.count);
    }
    for id in purged {
        let _ = writeln!(out, "PURGED {id}");
    }
    out
}

pub fn write_result<T: Scalar>(r: &PipelineResult<T>) -> String {
    let mut out = write_roi(r.frame_geometry, &r.roi);
    out.push_str(&write_movements(&r.clusters, &r.purged_track_ids, &r.params_used, r.silhouette, r.tracks_emitted));
    out
}

#[derive(Default)]
struct Partial<T> {
    v_bar: Option<Point2<T>>,
    forward: Vec<Point2<T>>,
    backward: Vec<Point2<T>>,
    count: Option<usize>,
    ids: Vec<u64>,
}

pub fn parse_result<T: Scalar>(text: &str) -> Result<PipelineResult<T>> {
    let (frame_geometry, roi) = parse_roi(text)?;
    let (_, silhouette, assign) = parse_assignments::<T>(text)?;
    let mut params = HyperParams::default();
    let mut tracks_emitted = None;
    let mut parts: BTreeMap<usize, Partial<T>> = BTreeMap::new();
    let mut purged = Vec::new();
    for (tag, mut f) in records(text) {
        match tag {
            "GEOMETRY" | "ROI" | "GRIDSIZE" | "K" | "ASSIGN" => {}
            "PARAM" => {
                let key = f.token("key")?;
                let value = f.token("value")?;
                params.set(key, value).map_err(|m| Error::parse(f.line, m))?;
                f.end()?;
            }
            "TRACKS" => {
                tracks_emitted = Some(f.next("track count")?);
                f.end()?;
            }
            "VBAR" => {
                let idx: usize = f.next("cluster index")?;
                parts.entry(idx).or_default().v_bar = Some(Point2::new(f.real("x")?, f.real("y")?));
                f.end()?;
            }
            "PATH" => {
                let idx: usize = f.next("cluster index")?;
                let dir = f.token("direction")?;
                let pts = f.counted_points()?;
                let part = parts.entry(idx).or_default();
                match dir {
                    "F" => part.forward = pts,
                    "B" => part.backward = pts,
                    d => return Err(Error::parse(f.line, format!("direction `{d}` is not F or B"))),
                }
                f.end()?;
            }
            "COUNT" => {
                let idx: usize = f.next("cluster index")?;
                parts.entry(idx).or_default().count = Some(f.next("count")?);
                f.end()?;
            }
            "PURGED" => {
                purged.push(f.next("track id")?);
                f.end()?;
            }
            _ => return Err(unknown(tag, &f)),
        }
    }
    for (id, c) in assign {
        parts.entry(c).or_default().ids.push(id);
    }
    let clusters = parts
        .into_iter()
        .map(|(cluster_idx, mut p)| {
            p.ids.sort_unstable();
            let count = p.count.ok_or_else(|| Error::parse(0, format!("cluster {cluster_idx} has no COUNT")))?;
            Ok(MovementCluster {
                cluster_idx,
                track_ids: p.ids,
                path: RepresentativePath {
                    forward: p.forward,
                    backward: p.backward,
                    v_bar: p.v_bar.unwrap_or_default(),
                },
                count,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let tracks_emitted =
        tracks_emitted.unwrap_or_else(|| clusters.iter().map(|c| c.count).sum::<usize>() + purged.len());
    Ok(PipelineResult {
        frame_geometry,
        roi,
        clusters,
        purged_track_ids: purged,
        params_used: params,
        silhouette,
        tracks_emitted,
    })
}

// Ground truth

pub fn write_truth<T: Scalar>(t: &GroundTruth<T>) -> String {
    let mut out = format!("GEOMETRY {} {}\nROI", t.frame_geometry.width, t.frame_geometry.height);
    push_points(&mut out, &t.roi);
    out.push('\n');
    for (count, path) in t.counts.iter().zip(&t.paths) {
        let _ = write!(out, "MOVEMENT {count}");
        push_points(&mut out, path);
        out.push('\n');
    }
    out
}

pub fn parse_truth<T: Scalar>(text: &str) -> Result<GroundTruth<T>> {
    let (mut geom, mut roi) = (None, None);
    let (mut counts, mut paths) = (Vec::new(), Vec::new());
    for (tag, mut f) in records(text) {
        match tag {
            "GEOMETRY" => geom = Some(FrameGeometry::new(f.next("width")?, f.next("height")?)),
            "ROI" => roi = Some(f.counted_points()?),
            "MOVEMENT" => {
                counts.push(f.next("count")?);
                paths.push(f.counted_points()?);
            }
            _ => return Err(unknown(tag, &f)),
        }
        f.end()?;
    }
    Ok(GroundTruth {
        frame_geometry: geom.ok_or_else(|| Error::parse(0, "no GEOMETRY record"))?,
        roi: roi.ok_or_else(|| Error::parse(0, "no ROI record"))?,
        counts,
        paths,
    })
}

// Report

pub fn write_report(r: &EvalReport) -> String {
    let mut out = format!("ROI_IOU {}\nMAE_PCT {}\n", r.roi_iou, r.mae_pct);
    for m in &r.per_movement {
        let idx = m.cluster_idx.map_or_else(|| "-".to_owned(), |i| i.to_string());
        let _ = writeln!(out, "MOVEMENT {} {} {idx}", m.gt_count, m.predicted);
    }
    for (idx, n) in &r.unmatched {
        let _ = writeln!(out, "UNMATCHED {idx} {n}");
    }
    out
}

pub fn parse_report(text: &str) -> Result<EvalReport> {
    let mut r = EvalReport { roi_iou: f64::NAN, mae_pct: f64::NAN, per_movement: Vec::new(), unmatched: Vec::new() };
    for (tag, mut f) in records(text) {
        match tag {
            "ROI_IOU" => r.roi_iou = f.next("iou")?,
            "MAE_PCT" => r.mae_pct = f.next("mae")?,
            "MOVEMENT" => {
                let gt_count = f.next("gt count")?;
                let predicted = f.next("predicted count")?;
                let idx = f.token("cluster index")?;
                let cluster_idx = if idx == "-" {
                    None
                } else {
                    Some(idx.parse().map_err(|_| Error::parse(f.line, "bad cluster index"))?)
                };
                r.per_movement.push(MovementMatch { gt_count, predicted, cluster_idx });
            }
            "UNMATCHED" => r.unmatched.push((f.next("cluster index")?, f.next("count")?)),
            _ => return Err(unknown(tag, &f)),
        }
        f.end()?;
    }
    Ok(r)
}

// Scenario

pub fn write_scenario<T: Scalar>(s: &Scenario<T>) -> String {
    let n = &s.noise;
    let mut out = String::new();
    let header: [(&str, String); 12] = [
        ("width", s.frame_geometry.width.to_string()),
        ("height", s.frame_geometry.height.to_string()),
        ("seed", s.seed.to_string()),
        ("box_w", s.box_w.to_string()),
        ("box_h", s.box_h.to_string()),
        ("spawn_gap", s.spawn_gap.to_string()),
        ("jitter_sigma", n.jitter_sigma.to_string()),
        ("conf_mean", n.conf_mean.to_string()),
        ("conf_sigma", n.conf_sigma.to_string()),
        ("clutter_rate", n.clutter_rate.to_string()),
        ("clutter_conf", n.clutter_conf.to_string()),
        ("lanes", s.lanes.len().to_string()),
    ];
    for (k, v) in header {
        let _ = writeln!(out, "{k} = {v}");
    }
    for c in &s.clutter_sites {
        let _ = writeln!(out, "CLUTTER {} {}", c.x, c.y);
    }
    for l in &s.lanes {
        out.push_str("LANE");
        push_points(&mut out, &l.polyline);
        let _ = writeln!(out, " {} {} {}", l.count, l.speed, l.start);
    }
    out
}

pub fn parse_scenario<T: Scalar>(text: &str) -> Result<Scenario<T>> {
    let mut s = Scenario::new(FrameGeometry::new(1280, 720), Vec::new());
    let mut declared_lanes = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let ln = i + 1;
        if let Some((k, v)) = line.split_once('=') {
            let (k, v) = (k.trim(), v.trim());
            let bad = || Error::parse(ln, format!("bad value `{v}` for `{k}`"));
            match k {
                "width" => s.frame_geometry.width = v.parse().map_err(|_| bad())?,
                "height" => s.frame_geometry.height = v.parse().map_err(|_| bad())?,
                "seed" => s.seed = v.parse().map_err(|_| bad())?,
                "box_w" => s.box_w = v.parse().map_err(|_| bad())?,
                "box_h" => s.box_h = v.parse().map_err(|_| bad())?,
                "spawn_gap" => s.spawn_gap = v.parse().map_err(|_| bad())?,
                "jitter_sigma" => s.noise.jitter_sigma = v.parse().map_err(|_| bad())?,
                "conf_mean" => s.noise.conf_mean = v.parse().map_err(|_| bad())?,
                "conf_sigma" => s.noise.conf_sigma = v.parse().map_err(|_| bad())?,
                "clutter_rate" => s.noise.clutter_rate = v.parse().map_err(|_| bad())?,
                "clutter_conf" => s.noise.clutter_conf = v.parse().map_err(|_| bad())?,
                "lanes" => declared_lanes = Some(v.parse::<usize>().map_err(|_| bad())?),
                _ => return Err(Error::parse(ln, format!("unknown key `{k}`"))),
            }
            continue;
        }
        let mut it = line.split_whitespace();
        let tag = it.next().unwrap_or_default();
        let mut f = Fields { line: ln, it };
        match tag {
            "CLUTTER" => s.clutter_sites.push(Point2::new(f.real("x")?, f.real("y")?)),
            "LANE" => {
                let polyline = f.counted_points()?;
                if polyline.len() < 2 {
                    return Err(Error::parse(ln, "lane needs at least two vertices"));
                }
                let count = f.next("count")?;
                let speed: T = f.real("speed")?;
                if speed <= T::zero() {
                    return Err(Error::parse(ln, "speed must be positive"));
                }
                let start = if f.it.clone().next().is_some() { f.next("start frame")? } else { 0 };
                if !polyline.iter().all(|&p| s.frame_geometry.contains(p)) {
                    return Err(Error::parse(ln, "lane leaves the frame"));
                }
                s.lanes.push(Lane { polyline, count, speed, start });
            }
            _ => return Err(unknown(tag, &f)),
        }
        f.end()?;
    }
    if let Some(n) = declared_lanes {
        if n != s.lanes.len() {
            return Err(Error::parse(0, format!("header declares {n} lanes, found {}", s.lanes.len())));
        }
    }
    if s.spawn_gap == 0 {
        return Err(Error::parse(0, "spawn_gap must be positive"));
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counting::run_pipeline_with;
    use crate::counting::TrackSource;
    use crate::synth::{generate, scenes};

    #[test]
    fn roi_round_trip() {
        let roi = RoiPolygon {
            vertices: vec![Point2::new(0.0, 0.0), Point2::new(10.5, 0.0), Point2::new(3.25, 7.0)],
            grid_size: 1.0 / 3.0,
        };
        let text = write_roi(FrameGeometry::new(20, 10), &roi);
        assert!(text.contains("ROI 3 0 0 10.5 0 3.25 7\n"));
        let (g, back) = parse_roi::<f64>(&text).unwrap();
        assert_eq!(g, FrameGeometry::new(20, 10));
        assert_eq!(back, roi);
    }

    #[test]
    fn tracks_round_trip_sorted() {
        let mk = |id, pts: &[(u64, f64)]| Track {
            id,
            points: pts.iter().map(|&(f, x)| TrackPoint { frame: f, center: Point2::new(x, 2.0 * x) }).collect(),
            bbox_history: vec![],
        };
        let tracks = vec![mk(7, &[(1, 0.1), (3, 0.7)]), mk(2, &[(0, 5.0), (2, 6.0)])];
        let text = write_tracks(&tracks);
        assert!(text.starts_with("TRACK 2 0 5 10\n"));
        let back = parse_tracks::<f64>(&text).unwrap();
        assert_eq!(back.iter().map(|t| t.id).collect::<Vec<_>>(), vec![2, 7]);
        assert_eq!(back[1].points, tracks[0].points);
        assert!(parse_tracks::<f64>("TRACK 1 5 0 0\nTRACK 1 5 1 1\n").is_err());
    }

    #[test]
    fn result_round_trip() {
        let scene = generate(&scenes::two_lane::<f64>(5, 1));
        let r = run_pipeline_with(&scene.detections, &HyperParams::default(), 42, TrackSource::External).unwrap();
        let text = write_result(&r);
        let back = parse_result::<f64>(&text).unwrap();
        assert_eq!(back, r);
        assert_eq!(write_result(&back), text);
    }

    #[test]
    fn truth_report_scenario_round_trip() {
        let mut s = scenes::intersection::<f64>(3, 5);
        s.clutter_sites.push(Point2::new(30.0, 690.0));
        s.noise.clutter_rate = 0.05;
        let back = parse_scenario::<f64>(&write_scenario(&s)).unwrap();
        assert_eq!(back, s);

        let truth = generate(&s).truth;
        assert_eq!(parse_truth::<f64>(&write_truth(&truth)).unwrap(), truth);

        let rep = EvalReport {
            roi_iou: 0.8125,
            mae_pct: 12.5,
            per_movement: vec![
                MovementMatch { gt_count: 8, predicted: 7, cluster_idx: Some(2) },
                MovementMatch { gt_count: 8, predicted: 0, cluster_idx: None },
            ],
            unmatched: vec![(3, 1)],
        };
        assert_eq!(parse_report(&write_report(&rep)).unwrap(), rep);
    }

    #[test]
    fn scenario_rejects_bad_input() {
        assert!(parse_scenario::<f64>("width = 100\nheight = 100\nLANE 2 0 0 200 0 3 1\n").is_err());
        assert!(parse_scenario::<f64>("bogus = 1\n").is_err());
        assert!(parse_scenario::<f64>("LANE 1 0 0 3 1\n").is_err());
        assert!(parse_scenario::<f64>("lanes = 2\nLANE 2 0 0 10 0 3 1\n").is_err());
    }
}
