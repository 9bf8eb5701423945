//! Detection-to-track association.
//!
//! A motion-free IoU tracker: each open track is compared against the
//! detections of the next frame by `1 - IoU` with its last box, and pairs are
//! matched greedily by ascending cost. Records that already carry track ids
//! can bypass association through [`adopt_external_tracks`].

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::geom::Point2;
use crate::ingest::{group_by_frame, DetectionSet};
use crate::model::{BBox, DetectionRecord, HyperParams};
use crate::roi::RoiPolygon;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackPoint<T> {
    pub frame: u64,
    pub center: Point2<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track<T> {
    pub id: u64,
    /// Strictly increasing in `frame`.
    pub points: Vec<TrackPoint<T>>,
    /// Parallel to `points`; empty for tracks loaded from a track file.
    pub bbox_history: Vec<BBox<T>>,
}

impl<T: Scalar> Track<T> {
    pub fn first(&self) -> Point2<T> {
        self.points[0].center
    }

    pub fn last(&self) -> Point2<T> {
        self.points[self.points.len() - 1].center
    }

    pub fn centers(&self) -> impl Iterator<Item = Point2<T>> + '_ {
        self.points.iter().map(|p| p.center)
    }
}

/// Greedy minimum-cost matching of detections to track boxes.
///
/// Returns `(detection index, track index)` pairs. Pairs whose IoU distance
/// exceeds `gate` are never matched; cost ties go to the lower detection
/// index, then the lower track index.
pub fn associate<T: Scalar>(track_boxes: &[BBox<T>], dets: &[BBox<T>], gate: T) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(T, usize, usize)> = Vec::new();
    for (d, db) in dets.iter().enumerate() {
        for (t, tb) in track_boxes.iter().enumerate() {
            let cost = T::one() - db.iou(tb);
            if cost <= gate {
                pairs.push((cost, d, t));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut det_used = vec![false; dets.len()];
    let mut trk_used = vec![false; track_boxes.len()];
    let mut out = Vec::new();
    for (_, d, t) in pairs {
        if !det_used[d] && !trk_used[t] {
            det_used[d] = true;
            trk_used[t] = true;
            out.push((d, t));
        }
    }
    out
}

struct OpenTrack<T> {
    track: Track<T>,
    last_frame: u64,
}

/// IoU-association tracking of the in-ROI detections.
///
/// Tracks unmatched for more than `p.max_age` frames are closed. Tracks with
/// fewer than two points are discarded. Output is sorted by id.
pub fn track<T: Scalar>(d: &DetectionSet<T>, roi: &RoiPolygon<T>, p: &HyperParams) -> Vec<Track<T>> {
    let gate = T::of(p.lambda4);
    let mut open: Vec<OpenTrack<T>> = Vec::new();
    let mut closed: Vec<Track<T>> = Vec::new();
    let mut next_id = 0u64;

    for (frame, recs) in group_by_frame(d) {
        let (stale, live): (Vec<_>, Vec<_>) = open.into_iter().partition(|t| frame - t.last_frame > p.max_age);
        closed.extend(stale.into_iter().map(|t| t.track));
        open = live;

        let dets: Vec<&DetectionRecord<T>> = recs.iter().filter(|r| roi.contains(r.center())).collect();
        if dets.is_empty() {
            continue;
        }
        let det_boxes: Vec<BBox<T>> = dets.iter().map(|r| r.bbox).collect();
        let trk_boxes: Vec<BBox<T>> = open.iter().map(|t| *t.track.bbox_history.last().unwrap()).collect();
        let matches = associate(&trk_boxes, &det_boxes, gate);

        let mut matched = vec![false; dets.len()];
        for (di, ti) in matches {
            matched[di] = true;
            let t = &mut open[ti];
            t.track.points.push(TrackPoint { frame, center: dets[di].center() });
            t.track.bbox_history.push(dets[di].bbox);
            t.last_frame = frame;
        }
        for (di, r) in dets.iter().enumerate() {
            if matched[di] {
                continue;
            }
            open.push(OpenTrack {
                track: Track {
                    id: next_id,
                    points: vec![TrackPoint { frame, center: r.center() }],
                    bbox_history: vec![r.bbox],
                },
                last_frame: frame,
            });
            next_id += 1;
        }
    }
    closed.extend(open.into_iter().map(|t| t.track));
    let mut out: Vec<_> = closed.into_iter().filter(|t| t.points.len() >= 2).collect();
    out.sort_by_key(|t| t.id);
    out
}

/// Groups records by their own track ids, keeping in-ROI detections only.
///
/// When one id has several detections in the same frame, the first in input
/// order is kept.
pub fn adopt_external_tracks<T: Scalar>(d: &DetectionSet<T>, roi: &RoiPolygon<T>) -> Result<Vec<Track<T>>> {
    let (with, without) = d.track_id_presence();
    if with > 0 && without > 0 {
        return Err(Error::MixedIdPresence { with, without });
    }
    if with == 0 && without > 0 {
        return Err(Error::NoTrackIds);
    }
    let mut by_id: BTreeMap<u64, Track<T>> = BTreeMap::new();
    for r in &d.records {
        if !roi.contains(r.center()) {
            continue;
        }
        let id = r.track_id.expect("presence checked");
        let t = by_id.entry(id).or_insert_with(|| Track { id, points: Vec::new(), bbox_history: Vec::new() });
        if t.points.last().is_some_and(|p| p.frame == r.frame) {
            log::debug!("track {id}: duplicate detection in frame {}", r.frame);
            continue;
        }
        t.points.push(TrackPoint { frame: r.frame, center: r.center() });
        t.bbox_history.push(r.bbox);
    }
    Ok(by_id.into_values().filter(|t| t.points.len() >= 2).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ClassLabel, FrameGeometry};
    use proptest::prelude::*;

    fn full_roi() -> RoiPolygon<f64> {
        let p = Point2::new;
        RoiPolygon { vertices: vec![p(0., 0.), p(500., 0.), p(500., 500.), p(0., 500.)], grid_size: 10.0 }
    }

    fn rec(frame: u64, x: f64, y: f64, id: Option<u64>) -> DetectionRecord<f64> {
        DetectionRecord {
            frame,
            bbox: BBox::new(x, y, 20.0, 20.0),
            confidence: 0.9,
            class_label: ClassLabel::Vehicle,
            track_id: id,
        }
    }

    fn set(recs: Vec<DetectionRecord<f64>>) -> DetectionSet<f64> {
        DetectionSet::from_records(FrameGeometry::new(500, 500), recs, "t", &HyperParams::default())
    }

    #[test]
    fn single_vehicle_is_one_track() {
        let d = set((0..10).map(|f| rec(f, 10.0 + 5.0 * f as f64, 100.0, None)).collect());
        let t = track(&d, &full_roi(), &HyperParams::default());
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].points.len(), 10);
        assert!(t[0].points.windows(2).all(|w| w[0].frame < w[1].frame));
    }

    #[test]
    fn separated_vehicles_do_not_switch() {
        let mut recs = Vec::new();
        for f in 0..20 {
            recs.push(rec(f, 10.0 + 5.0 * f as f64, 50.0, None));
            recs.push(rec(f, 400.0 - 5.0 * f as f64, 300.0, None));
        }
        let t = track(&set(recs), &full_roi(), &HyperParams::default());
        assert_eq!(t.len(), 2);
        for tr in &t {
            let y0 = tr.first().y;
            assert!(tr.centers().all(|c| c.y == y0));
            assert_eq!(tr.points.len(), 20);
        }
    }

    #[test]
    fn roi_gates_detections() {
        let p = Point2::new;
        let roi = RoiPolygon { vertices: vec![p(0., 0.), p(50., 0.), p(50., 50.), p(0., 50.)], grid_size: 10.0 };
        let d = set((0..10).map(|f| rec(f, 200.0 + f as f64, 200.0, None)).collect());
        assert!(track(&d, &roi, &HyperParams::default()).is_empty());
    }

    #[test]
    fn tracks_age_out() {
        let mut recs: Vec<_> = (0..3).map(|f| rec(f, 100.0, 100.0, None)).collect();
        recs.extend((40..43).map(|f| rec(f, 100.0, 100.0, None)));
        let t = track(&set(recs), &full_roi(), &HyperParams::default());
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn external_ids() {
        let d = set(vec![rec(0, 10., 10., Some(7)), rec(1, 12., 10., Some(7)), rec(0, 90., 90., Some(9))]);
        let t = adopt_external_tracks(&d, &full_roi()).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!((t[0].id, t[0].points.len()), (7, 2));
        assert!(adopt_external_tracks(&set(vec![]), &full_roi()).unwrap().is_empty());

        let mixed = set(vec![rec(0, 10., 10., Some(1)), rec(1, 10., 10., None)]);
        assert!(matches!(
            adopt_external_tracks(&mixed, &full_roi()),
            Err(Error::MixedIdPresence { with: 1, without: 1 })
        ));
    }

    #[test]
    fn cost_ties_prefer_lower_detection_index() {
        let tb = [BBox::new(0.0, 0.0, 10.0, 10.0)];
        let dets = [BBox::new(5.0, 0.0, 10.0, 10.0), BBox::new(-5.0, 0.0, 10.0, 10.0)];
        assert_eq!(associate(&tb, &dets, 0.9), vec![(0, 0)]);
    }

    fn boxes(n: usize) -> impl Strategy<Value = Vec<BBox<f64>>> {
        proptest::collection::vec((0.0f64..100.0, 0.0f64..100.0, 5.0f64..40.0, 5.0f64..40.0), 0..n)
            .prop_map(|v| v.into_iter().map(|(x, y, w, h)| BBox::new(x, y, w, h)).collect())
    }

    proptest! {
        #[test]
        fn gate_is_monotone(tb in boxes(8), db in boxes(8), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(associate(&tb, &db, hi).len() >= associate(&tb, &db, lo).len());
        }

        #[test]
        fn associations_are_one_to_one(tb in boxes(8), db in boxes(8)) {
            let m = associate(&tb, &db, 0.9);
            let mut ds: Vec<_> = m.iter().map(|x| x.0).collect();
            let mut ts: Vec<_> = m.iter().map(|x| x.1).collect();
            ds.sort(); ds.dedup(); ts.sort(); ts.dedup();
            prop_assert_eq!(ds.len(), m.len());
            prop_assert_eq!(ts.len(), m.len());
        }
    }
}
