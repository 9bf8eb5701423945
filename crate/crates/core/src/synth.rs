//! Synthetic traffic scenes with known ROI and per-movement counts.
//!
//! Vehicles enter each lane at a fixed spacing in frames, advance along the
//! lane polyline at constant speed and emit one jittered detection per frame.
//! Optional clutter sites emit static high-confidence boxes, mimicking parked
//! vehicles near the frame border.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::geom::{convex_hull_exact, Point2};
use crate::ingest::DetectionSet;
use crate::model::{BBox, ClassLabel, DetectionRecord, FrameGeometry};
use crate::scalar::Scalar;

/// Track ids of clutter sites start here.
pub const CLUTTER_ID_BASE: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Lane<T> {
    /// Travel runs from the first vertex to the last.
    pub polyline: Vec<Point2<T>>,
    pub count: usize,
    /// Pixels per frame.
    pub speed: T,
    /// Frame at which the first vehicle enters; lets crossing flows run in
    /// separate signal phases.
    pub start: u64,
}

impl<T: Scalar> Lane<T> {
    pub fn length(&self) -> T {
        self.polyline.windows(2).map(|w| w[0].dist(w[1])).sum()
    }

    /// Point at arclength `s` from the start, clamped to the ends.
    pub fn point_at(&self, mut s: T) -> Point2<T> {
        for w in self.polyline.windows(2) {
            let l = w[0].dist(w[1]);
            if s <= l && l > T::zero() {
                return w[0] + (w[1] - w[0]) * (s / l);
            }
            s = s - l;
        }
        *self.polyline.last().expect("lane has vertices")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Noise {
    /// Standard deviation of the per-axis center jitter, pixels.
    pub jitter_sigma: f64,
    pub conf_mean: f64,
    pub conf_sigma: f64,
    /// Clutter detections per vehicle detection.
    pub clutter_rate: f64,
    pub clutter_conf: f64,
}

impl Default for Noise {
    fn default() -> Self {
        Noise { jitter_sigma: 0.0, conf_mean: 0.9, conf_sigma: 0.05, clutter_rate: 0.0, clutter_conf: 0.95 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T> {
    pub frame_geometry: FrameGeometry,
    pub lanes: Vec<Lane<T>>,
    pub noise: Noise,
    pub box_w: T,
    pub box_h: T,
    /// Frames between consecutive vehicles of one lane.
    pub spawn_gap: u64,
    /// Static clutter positions; a top-left site is used when empty and
    /// `noise.clutter_rate > 0`.
    pub clutter_sites: Vec<Point2<T>>,
    pub seed: u64,
}

impl<T: Scalar> Scenario<T> {
    pub fn new(frame_geometry: FrameGeometry, lanes: Vec<Lane<T>>) -> Self {
        Scenario {
            frame_geometry,
            lanes,
            noise: Noise::default(),
            box_w: T::of(40.0),
            box_h: T::of(30.0),
            spawn_gap: 12,
            clutter_sites: Vec::new(),
            seed: 0,
        }
    }

    fn effective_clutter_sites(&self) -> Vec<Point2<T>> {
        if !self.clutter_sites.is_empty() || self.noise.clutter_rate <= 0.0 {
            return self.clutter_sites.clone();
        }
        vec![Point2::new(self.box_w, self.box_h)]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth<T> {
    pub frame_geometry: FrameGeometry,
    pub roi: Vec<Point2<T>>,
    pub counts: Vec<usize>,
    pub paths: Vec<Vec<Point2<T>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene<T> {
    pub detections: DetectionSet<T>,
    pub truth: GroundTruth<T>,
}

fn clipped_normal(rng: &mut ChaCha8Rng, mean: f64, sigma: f64) -> f64 {
    let v = if sigma > 0.0 { Normal::new(mean, sigma).unwrap().sample(rng) } else { mean };
    v.clamp(0.0, 1.0)
}

fn gauss(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma > 0.0 {
        Normal::new(0.0, sigma).unwrap().sample(rng)
    } else {
        0.0
    }
}

/// Lane hull dilated by one nominal box, clamped to the frame.
pub fn ground_truth_roi<T: Scalar>(s: &Scenario<T>) -> Vec<Point2<T>> {
    let two = T::of(2.0);
    let (hw, hh) = (s.box_w / two, s.box_h / two);
    let (w, h) = (T::of(s.frame_geometry.width as f64), T::of(s.frame_geometry.height as f64));
    let pts: Vec<Point2<T>> = s
        .lanes
        .iter()
        .flat_map(|l| l.polyline.iter().copied())
        .flat_map(|p| [(-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh)].map(|(dx, dy)| Point2::new(p.x + dx, p.y + dy)))
        .map(|p| Point2::new(p.x.max(T::zero()).min(w), p.y.max(T::zero()).min(h)))
        .collect();
    convex_hull_exact(&pts)
}

pub fn generate<T: Scalar>(s: &Scenario<T>) -> SyntheticScene<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let geom = s.frame_geometry;
    let n_lanes = s.lanes.len().max(1) as u64;
    let mut records = Vec::new();
    let mut next_id = 0u64;

    for (li, lane) in s.lanes.iter().enumerate() {
        let len = lane.length();
        let offset = lane.start + li as u64 * s.spawn_gap / n_lanes;
        let steps = (len / lane.speed).floor().as_f64() as u64;
        for vi in 0..lane.count {
            let id = next_id;
            next_id += 1;
            let spawn = offset + vi as u64 * s.spawn_gap;
            for step in 0..=steps {
                let c = lane.point_at(lane.speed * T::of(step as f64));
                let c = Point2::new(
                    c.x + T::of(gauss(&mut rng, s.noise.jitter_sigma)),
                    c.y + T::of(gauss(&mut rng, s.noise.jitter_sigma)),
                );
                let bw = s.box_w * T::of(1.0 + rng.random_range(-0.05..0.05));
                let bh = s.box_h * T::of(1.0 + rng.random_range(-0.05..0.05));
                let conf = clipped_normal(&mut rng, s.noise.conf_mean, s.noise.conf_sigma);
                if !geom.contains(c) {
                    continue;
                }
                let two = T::of(2.0);
                records.push(DetectionRecord {
                    frame: spawn + step,
                    bbox: BBox::new(c.x - bw / two, c.y - bh / two, bw, bh),
                    confidence: T::of(conf),
                    class_label: ClassLabel::Vehicle,
                    track_id: Some(id),
                });
            }
        }
    }

    let last_frame = records.iter().map(|r| r.frame).max().unwrap_or(0);
    let sites = s.effective_clutter_sites();
    let n_clutter = (s.noise.clutter_rate * records.len() as f64).round() as usize;
    for k in 0..n_clutter {
        if sites.is_empty() {
            break;
        }
        let si = k % sites.len();
        let site = sites[si];
        let c = Point2::new(site.x + T::of(gauss(&mut rng, 1.0)), site.y + T::of(gauss(&mut rng, 1.0)));
        let conf = clipped_normal(&mut rng, s.noise.clutter_conf, 0.02);
        let frame = rng.random_range(0..=last_frame);
        if !geom.contains(c) {
            continue;
        }
        let two = T::of(2.0);
        records.push(DetectionRecord {
            frame,
            bbox: BBox::new(c.x - s.box_w / two, c.y - s.box_h / two, s.box_w, s.box_h),
            confidence: T::of(conf),
            class_label: ClassLabel::Vehicle,
            track_id: Some(CLUTTER_ID_BASE + si as u64),
        });
    }
    records.sort_by_key(|r| r.frame);

    let truth = GroundTruth {
        frame_geometry: geom,
        roi: ground_truth_roi(s),
        counts: s.lanes.iter().map(|l| l.count).collect(),
        paths: s.lanes.iter().map(|l| l.polyline.clone()).collect(),
    };
    let detections = DetectionSet {
        frame_geometry: geom,
        records,
        source_id: format!("synthetic-{}", s.seed),
        dropped_non_vehicle: 0,
        dropped_low_confidence: 0,
    };
    SyntheticScene { detections, truth }
}

/// Ready-made scenes used by tests and examples.
pub mod scenes {
    use super::*;

    fn pl<T: Scalar>(pts: &[(f64, f64)]) -> Vec<Point2<T>> {
        pts.iter().map(|&(x, y)| Point2::new(T::of(x), T::of(y))).collect()
    }

    /// Two opposing straight lanes across a 1280x720 frame.
    pub fn two_lane<T: Scalar>(per_lane: usize, seed: u64) -> Scenario<T> {
        let lanes = vec![
            Lane { polyline: pl(&[(40.0, 300.0), (1240.0, 300.0)]), count: per_lane, speed: T::of(10.0), start: 0 },
            Lane { polyline: pl(&[(1240.0, 440.0), (40.0, 440.0)]), count: per_lane, speed: T::of(10.0), start: 0 },
        ];
        Scenario { seed, ..Scenario::new(FrameGeometry::new(1280, 720), lanes) }
    }

    /// Four movements through a junction: eastbound, southbound,
    /// northbound and an eastbound-to-southbound right turn. The
    /// north-south phase starts once the east-west traffic has cleared.
    pub fn intersection<T: Scalar>(per_movement: usize, seed: u64) -> Scenario<T> {
        let gap = 14;
        let phase = per_movement as u64 * gap + 130;
        let lanes = vec![
            Lane { polyline: pl(&[(60.0, 330.0), (1220.0, 330.0)]), count: per_movement, speed: T::of(10.0), start: 0 },
            Lane {
                polyline: pl(&[(560.0, 60.0), (560.0, 660.0)]),
                count: per_movement,
                speed: T::of(8.0),
                start: phase,
            },
            Lane {
                polyline: pl(&[(740.0, 660.0), (740.0, 60.0)]),
                count: per_movement,
                speed: T::of(8.0),
                start: phase,
            },
            Lane {
                polyline: pl(&[(60.0, 450.0), (380.0, 450.0), (440.0, 520.0), (440.0, 660.0)]),
                count: per_movement,
                speed: T::of(8.0),
                start: 0,
            },
        ];
        Scenario { seed, spawn_gap: gap, ..Scenario::new(FrameGeometry::new(1280, 720), lanes) }
    }

    /// `m` movements radiating from the frame center. Headings are spaced
    /// evenly and kept at least 15 degrees away from due west, where the
    /// heading angle wraps.
    pub fn star<T: Scalar>(m: usize, per_lane: usize, jitter: f64, seed: u64) -> Scenario<T> {
        let (cx, cy) = (640.0, 360.0);
        let lanes = (0..m)
            .map(|i| {
                let ang = (-75.0 + 360.0 * i as f64 / m as f64).to_radians();
                let (c, s) = (ang.cos(), ang.sin());
                Lane {
                    polyline: pl(&[(cx + 60.0 * c, cy + 60.0 * s), (cx + 300.0 * c, cy + 300.0 * s)]),
                    count: per_lane,
                    speed: T::of(8.0),
                    start: 0,
                }
            })
            .collect();
        let mut s = Scenario { seed, ..Scenario::new(FrameGeometry::new(1280, 720), lanes) };
        s.noise.jitter_sigma = jitter;
        s
    }
}
