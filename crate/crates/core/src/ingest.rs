//! Detection-record files.
//!
//! ```text
//! #geometry <width> <height>
//! <frame> <x> <y> <w> <h> <confidence> <class> [track_id]
//! ```
//!
//! Fields are whitespace separated. Lines starting with `#` after the header
//! are comments. Classes `car`, `truck` and `vehicle` merge into one vehicle
//! class; other classes are dropped and counted.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{BBox, ClassLabel, DetectionRecord, FrameGeometry, HyperParams};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionSet<T> {
    pub frame_geometry: FrameGeometry,
    /// Sorted by frame; ties keep input order.
    pub records: Vec<DetectionRecord<T>>,
    pub source_id: String,
    pub dropped_non_vehicle: usize,
    pub dropped_low_confidence: usize,
}

impl<T: Scalar> DetectionSet<T> {
    /// Builds a set from in-memory records, applying the same confidence
    /// floor and ordering as file ingestion.
    pub fn from_records(
        frame_geometry: FrameGeometry,
        records: Vec<DetectionRecord<T>>,
        source_id: impl Into<String>,
        p: &HyperParams,
    ) -> Self {
        let before = records.len();
        let floor = T::of(p.lambda1);
        let mut records: Vec<_> = records.into_iter().filter(|r| r.confidence >= floor).collect();
        let dropped_low_confidence = before - records.len();
        records.sort_by_key(|r| r.frame);
        DetectionSet {
            frame_geometry,
            records,
            source_id: source_id.into(),
            dropped_non_vehicle: 0,
            dropped_low_confidence,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// `(records with a track id, records without)`.
    pub fn track_id_presence(&self) -> (usize, usize) {
        let with = self.records.iter().filter(|r| r.track_id.is_some()).count();
        (with, self.records.len() - with)
    }

    /// Serializes in the detection-file format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let g = self.frame_geometry;
        let _ = writeln!(out, "#geometry {} {}", g.width, g.height);
        for r in &self.records {
            let b = r.bbox;
            let _ =
                write!(out, "{} {} {} {} {} {} {}", r.frame, b.x, b.y, b.w, b.h, r.confidence, r.class_label.as_str());
            if let Some(id) = r.track_id {
                let _ = write!(out, " {id}");
            }
            out.push('\n');
        }
        out
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

fn parse_header(line: &str) -> Option<FrameGeometry> {
    let mut it = line.split_whitespace();
    if it.next()? != "#geometry" {
        return None;
    }
    let w: u32 = it.next()?.parse().ok()?;
    let h: u32 = it.next()?.parse().ok()?;
    if it.next().is_some() || w == 0 || h == 0 {
        return None;
    }
    Some(FrameGeometry::new(w, h))
}

enum Parsed<T> {
    Record(DetectionRecord<T>),
    NotVehicle,
}

fn parse_record<T: Scalar>(line: &str, line_no: usize, geom: FrameGeometry) -> Result<Parsed<T>> {
    let f: Vec<&str> = line.split_whitespace().collect();
    if f.len() != 7 && f.len() != 8 {
        return Err(Error::MalformedLine(line_no));
    }
    let bad = || Error::MalformedLine(line_no);
    let real = |s: &str| -> Result<T> {
        let v: T = s.parse().map_err(|_| bad())?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(bad())
        }
    };
    let frame: u64 = f[0].parse().map_err(|_| bad())?;
    let bbox = BBox::new(real(f[1])?, real(f[2])?, real(f[3])?, real(f[4])?);
    if !bbox.is_valid() {
        return Err(bad());
    }
    let confidence: T = f[5].parse().map_err(|_| bad())?;
    if !(confidence >= T::zero() && confidence <= T::one()) {
        return Err(Error::ConfidenceOutOfRange(line_no));
    }
    let track_id = match f.get(7) {
        Some(s) => Some(s.parse::<u64>().map_err(|_| bad())?),
        None => None,
    };
    let Some(class_label) = ClassLabel::from_raw(f[6]) else {
        return Ok(Parsed::NotVehicle);
    };
    if !geom.contains(bbox.center()) {
        return Err(Error::CenterOutsideFrame(line_no));
    }
    Ok(Parsed::Record(DetectionRecord { frame, bbox, confidence, class_label, track_id }))
}

/// Parses detection-file text. The confidence floor `p.lambda1` is inclusive.
pub fn parse_detections<T: Scalar>(text: &str, source_id: &str, p: &HyperParams) -> Result<DetectionSet<T>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let geom = lines.next().and_then(|(_, l)| parse_header(l.trim())).ok_or(Error::GeometryMissing)?;

    let floor = T::of(p.lambda1);
    let mut records = Vec::new();
    let (mut dropped_non_vehicle, mut dropped_low_confidence) = (0, 0);
    for (i, line) in lines {
        let line = line.trim();
        if line.starts_with('#') {
            continue;
        }
        match parse_record::<T>(line, i + 1, geom)? {
            Parsed::Record(r) if r.confidence >= floor => records.push(r),
            Parsed::Record(_) => dropped_low_confidence += 1,
            Parsed::NotVehicle => dropped_non_vehicle += 1,
        }
    }
    if dropped_non_vehicle > 0 {
        log::warn!("{source_id}: dropped {dropped_non_vehicle} non-vehicle detections");
    }
    records.sort_by_key(|r| r.frame);
    Ok(DetectionSet {
        frame_geometry: geom,
        records,
        source_id: source_id.to_owned(),
        dropped_non_vehicle,
        dropped_low_confidence,
    })
}

pub fn parse_detection_file<T: Scalar>(path: &Path, p: &HyperParams) -> Result<DetectionSet<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_detections(&text, &path.display().to_string(), p)
}

/// Records grouped by frame in ascending order; empty frames are skipped.
pub fn group_by_frame<T>(d: &DetectionSet<T>) -> Vec<(u64, &[DetectionRecord<T>])> {
    d.records.chunk_by(|a, b| a.frame == b.frame).map(|c| (c[0].frame, c)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const HDR: &str = "#geometry 100 100\n";

    fn parse(body: &str) -> Result<DetectionSet<f64>> {
        parse_detections(&format!("{HDR}{body}"), "test", &HyperParams::default())
    }

    #[test]
    fn confidence_floor_is_inclusive() {
        let d = parse("0 10 10 5 5 0.2 car\n0 20 20 5 5 0.25 truck\n1 30 30 5 5 0.9 vehicle\n").unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.dropped_low_confidence, 1);
        assert!(d.records.iter().all(|r| r.class_label == ClassLabel::Vehicle));
    }

    #[test]
    fn empty_body() {
        assert_eq!(parse("").unwrap().len(), 0);
    }

    #[test]
    fn errors() {
        assert!(matches!(parse("0 1 1 5 5 1.7 car\n"), Err(Error::ConfidenceOutOfRange(2))));
        assert!(matches!(parse("0 1 1 5 car\n"), Err(Error::MalformedLine(2))));
        assert!(matches!(parse("0 1 1 0 5 0.5 car\n"), Err(Error::MalformedLine(2))));
        assert!(matches!(parse("0 99 99 5 5 0.5 car\n"), Err(Error::CenterOutsideFrame(2))));
        assert!(matches!(
            parse_detections::<f64>("0 1 1 5 5 0.5 car\n", "x", &HyperParams::default()),
            Err(Error::GeometryMissing)
        ));
    }

    #[test]
    fn non_vehicles_are_dropped_and_counted() {
        let d = parse("0 1 1 5 5 0.9 person\n0 1 1 5 5 0.9 car 3\n# note\n").unwrap();
        assert_eq!((d.len(), d.dropped_non_vehicle), (1, 1));
        assert_eq!(d.records[0].track_id, Some(3));
    }

    #[test]
    fn sorted_by_frame_stable() {
        let d = parse("2 1 1 5 5 0.9 car 1\n0 1 1 5 5 0.9 car 2\n2 1 1 5 5 0.9 car 3\n0 1 1 5 5 0.9 car 4\n").unwrap();
        let ids: Vec<_> = d.records.iter().map(|r| r.track_id.unwrap()).collect();
        assert_eq!(ids, vec![2, 4, 1, 3]);
    }

    #[test]
    fn grouping() {
        let d = parse("0 1 1 5 5 0.9 car\n0 2 2 5 5 0.9 car\n2 3 3 5 5 0.9 car\n").unwrap();
        let g = group_by_frame(&d);
        assert_eq!(g.iter().map(|(f, r)| (*f, r.len())).collect::<Vec<_>>(), vec![(0, 2), (2, 1)]);
        assert!(group_by_frame(&parse("").unwrap()).is_empty());
        let d = parse("5 1 1 5 5 0.9 car\n").unwrap();
        assert_eq!(group_by_frame(&d)[0].0, 5);
    }

    fn record() -> impl Strategy<Value = (u64, f64, f64, f64, f64, f64, Option<u64>)> {
        (
            0u64..50,
            0.0f64..60.0,
            0.0f64..60.0,
            0.01f64..40.0,
            0.01f64..40.0,
            0.0f64..=1.0,
            proptest::option::of(0u64..9),
        )
    }

    proptest! {
        #[test]
        fn parse_serialize_parse_is_identity(recs in proptest::collection::vec(record(), 0..40)) {
            let mut body = String::new();
            for (f, x, y, w, h, c, id) in recs {
                body.push_str(&format!("{f} {x} {y} {w} {h} {c} car"));
                if let Some(id) = id { body.push_str(&format!(" {id}")); }
                body.push('\n');
            }
            let first = parse(&body).unwrap();
            let again: DetectionSet<f64> = parse_detections(&first.to_text(), "test", &HyperParams::default()).unwrap();
            prop_assert_eq!(&again.records, &first.records);
        }

        #[test]
        fn raising_floor_never_adds_records(confs in proptest::collection::vec(0.0f64..=1.0, 0..60), a in 0.01f64..1.0, b in 0.01f64..1.0) {
            let body: String = confs.iter().map(|c| format!("0 10 10 5 5 {c} car\n")).collect();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let n = |l: f64| parse_detections::<f64>(&format!("{HDR}{body}"), "t", &HyperParams { lambda1: l, ..Default::default() }).unwrap().len();
            prop_assert!(n(hi) <= n(lo));
        }
    }
}
