//! Representative trajectories.
//!
//! All segments of a cluster are rotated so that their mean direction `v_bar`
//! becomes the +x axis. A vertical line is swept along x; wherever enough
//! segments cross it, the crossing heights are averaged separately for
//! segments heading with `v_bar` and against it, giving a forward and a
//! backward polyline. Candidate segments come from a quad-tree over segment
//! endpoints restricted to a window of `lambda7 * grid_size` around the line.

pub mod quadtree;

use crate::error::{Error, Result};
use crate::geom::Point2;
use crate::model::HyperParams;
use crate::scalar::Scalar;
use crate::tracker::Track;

use quadtree::{QuadTree, Rect};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment<T> {
    pub a: Point2<T>,
    pub b: Point2<T>,
    pub track_id: u64,
    /// `(b - a)` normalised.
    pub direction: Point2<T>,
}

impl<T: Scalar> Segment<T> {
    /// `None` for zero-length segments.
    pub fn new(a: Point2<T>, b: Point2<T>, track_id: u64) -> Option<Self> {
        let d = b - a;
        let n = d.norm();
        if n.is_zero() || !n.is_finite() {
            return None;
        }
        Some(Segment { a, b, track_id, direction: d * (T::one() / n) })
    }

    #[inline]
    fn straddles(&self, x: T) -> bool {
        (self.a.x <= x && x <= self.b.x) || (self.b.x <= x && x <= self.a.x)
    }

    /// Height of the segment at sweep position `x`.
    #[inline]
    fn y_at(&self, x: T) -> T {
        let dx = self.b.x - self.a.x;
        if dx.is_zero() {
            (self.a.y + self.b.y) / T::of(2.0)
        } else {
            self.a.y + (x - self.a.x) / dx * (self.b.y - self.a.y)
        }
    }
}

/// Consecutive-point segments of every track; repeated points are skipped.
pub fn track_segments<T: Scalar>(tracks: &[&Track<T>]) -> Vec<Segment<T>> {
    tracks
        .iter()
        .flat_map(|t| t.points.windows(2).filter_map(|w| Segment::new(w[0].center, w[1].center, t.id)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepresentativePath<T> {
    /// Ordered along `v_bar`.
    pub forward: Vec<Point2<T>>,
    /// Ordered against `v_bar`, i.e. in the travel direction of its segments.
    pub backward: Vec<Point2<T>>,
    pub v_bar: Point2<T>,
}

impl<T: Scalar> RepresentativePath<T> {
    pub fn vertices(&self) -> impl Iterator<Item = Point2<T>> + '_ {
        self.forward.iter().chain(self.backward.iter()).copied()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty() && self.backward.is_empty()
    }
}

/// Normalised sum of all segment vectors.
pub fn average_vector<T: Scalar>(segments: &[Segment<T>]) -> Result<Point2<T>> {
    let sum = segments.iter().fold(Point2::new(T::zero(), T::zero()), |s, g| s + (g.b - g.a));
    let n = sum.norm();
    if n.is_zero() || !n.is_finite() {
        return Err(Error::ZeroAverageVector);
    }
    Ok(sum * (T::one() / n))
}

/// `p -> (p . v_bar, p . perp(v_bar))`.
#[inline]
pub fn to_sweep_frame<T: Scalar>(p: Point2<T>, v_bar: Point2<T>) -> Point2<T> {
    Point2::new(p.dot(v_bar), p.dot(v_bar.perp()))
}

#[inline]
pub fn from_sweep_frame<T: Scalar>(q: Point2<T>, v_bar: Point2<T>) -> Point2<T> {
    v_bar * q.x + v_bar.perp() * q.y
}

pub fn rotate_to_sweep_frame<T: Scalar>(segments: &[Segment<T>], v_bar: Point2<T>) -> Vec<Segment<T>> {
    segments
        .iter()
        .filter_map(|s| Segment::new(to_sweep_frame(s.a, v_bar), to_sweep_frame(s.b, v_bar), s.track_id))
        .collect()
}

/// Quad-tree over segment endpoints for sweep-line candidate lookup.
///
/// Segments wider than the query half-width along x are also indexed at
/// every multiple of the half-width they cross, so each segment crossing a
/// sweep line has an indexed point strictly inside the window.
#[derive(Debug, Clone)]
pub struct SegmentIndex<T> {
    tree: QuadTree<T, usize>,
    half_width: T,
}

impl<T: Scalar> SegmentIndex<T> {
    pub fn new(segments: &[Segment<T>], half_width: T) -> Self {
        let mut items = Vec::with_capacity(segments.len() * 2);
        for (i, s) in segments.iter().enumerate() {
            items.push((s.a, i));
            items.push((s.b, i));
            let (lo, hi) = if s.a.x <= s.b.x { (s.a.x, s.b.x) } else { (s.b.x, s.a.x) };
            if hi - lo > half_width {
                let mut j = (lo / half_width).floor() + T::one();
                loop {
                    let x = j * half_width;
                    if x >= hi {
                        break;
                    }
                    if x > lo {
                        items.push((Point2::new(x, s.y_at(x)), i));
                    }
                    j = j + T::one();
                }
            }
        }
        SegmentIndex { tree: QuadTree::from_items(items), half_width }
    }

    pub fn tree(&self) -> &QuadTree<T, usize> {
        &self.tree
    }

    /// Sorted, de-duplicated indices of segments with an indexed point at
    /// `|x' - x| < half_width`.
    pub fn candidates(&self, x: T) -> Vec<usize> {
        let b = self.tree.bounds();
        let r = Rect::new(Point2::new(x - self.half_width, b.min.y), Point2::new(x + self.half_width, b.max.y));
        let mut out: Vec<usize> = self
            .tree
            .query(&r)
            .into_iter()
            .filter(|(p, _)| (p.x - x).abs() < self.half_width)
            .map(|(_, &i)| i)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

fn sweep_positions<T: Scalar>(segments: &[Segment<T>], gamma: T) -> Vec<T> {
    let mut xs: Vec<T> = segments.iter().flat_map(|s| [s.a.x, s.b.x]).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out: Vec<T> = Vec::new();
    for x in xs {
        match out.last() {
            Some(&last) if x - last < gamma || x == last => {}
            _ => out.push(x),
        }
    }
    out
}

struct Crossing<T> {
    forward: Option<T>,
    backward: Option<T>,
}

/// Averages the heights of the given segments that straddle `x`, or `None`
/// when fewer than `support` straddle it.
fn crossing_at<T: Scalar>(
    segments: &[Segment<T>],
    candidates: impl Iterator<Item = usize>,
    x: T,
    support: f64,
) -> Option<Crossing<T>> {
    let (mut fs, mut fn_, mut bs, mut bn) = (T::zero(), 0usize, T::zero(), 0usize);
    let mut prev: Option<(usize, bool)> = None;
    for i in candidates {
        let s = &segments[i];
        if !s.straddles(x) {
            continue;
        }
        let agrees = s.direction.x >= T::zero();
        // A track passing through `x` at a shared vertex crosses it once.
        if let Some((j, prev_agrees)) = prev {
            let p = &segments[j];
            if j + 1 == i && p.track_id == s.track_id && p.b == s.a && s.a.x == x && prev_agrees == agrees {
                prev = Some((i, agrees));
                continue;
            }
        }
        prev = Some((i, agrees));
        if agrees {
            fs = fs + s.y_at(x);
            fn_ += 1;
        } else {
            bs = bs + s.y_at(x);
            bn += 1;
        }
    }
    if ((fn_ + bn) as f64) < support {
        return None;
    }
    let avg = |s: T, n: usize| (n > 0).then(|| s / T::of(n as f64));
    Some(Crossing { forward: avg(fs, fn_), backward: avg(bs, bn) })
}

fn finish<T: Scalar>(
    forward: Vec<Point2<T>>,
    mut backward: Vec<Point2<T>>,
    v_bar: Point2<T>,
    min_points: usize,
) -> Result<RepresentativePath<T>> {
    let keep = |v: Vec<Point2<T>>| -> Vec<Point2<T>> {
        if v.len() < min_points {
            Vec::new()
        } else {
            v.into_iter().map(|q| from_sweep_frame(q, v_bar)).collect()
        }
    };
    backward.reverse();
    let path = RepresentativePath { forward: keep(forward), backward: keep(backward), v_bar };
    if path.is_empty() {
        return Err(Error::NoPath);
    }
    Ok(path)
}

fn gamma<T: Scalar>(p: &HyperParams, grid_size: T) -> T {
    if p.gamma_is_grid_size {
        grid_size
    } else {
        T::zero()
    }
}

fn run_sweep<T: Scalar, I: Iterator<Item = usize>>(
    segments: &[Segment<T>],
    v_bar: Point2<T>,
    p: &HyperParams,
    grid_size: T,
    num_tracks: usize,
    mut candidates: impl FnMut(T) -> I,
) -> Result<RepresentativePath<T>> {
    let support = p.lambda8(num_tracks);
    let (mut fwd, mut bwd) = (Vec::new(), Vec::new());
    for x in sweep_positions(segments, gamma(p, grid_size)) {
        if let Some(c) = crossing_at(segments, candidates(x), x, support) {
            if let Some(y) = c.forward {
                fwd.push(Point2::new(x, y));
            }
            if let Some(y) = c.backward {
                bwd.push(Point2::new(x, y));
            }
        }
    }
    finish(fwd, bwd, v_bar, p.lambda9)
}

/// Double sweep over segments already in the sweep frame of `v_bar`, with
/// candidates drawn from a [`SegmentIndex`].
pub fn sweep<T: Scalar>(
    segments: &[Segment<T>],
    v_bar: Point2<T>,
    p: &HyperParams,
    grid_size: T,
    num_tracks: usize,
) -> Result<RepresentativePath<T>> {
    if segments.is_empty() {
        return Err(Error::NoPath);
    }
    let index = SegmentIndex::new(segments, T::of(p.lambda7) * grid_size);
    run_sweep(segments, v_bar, p, grid_size, num_tracks, |x| index.candidates(x).into_iter())
}

/// [`sweep`] with every segment tested at every position.
pub fn naive_sweep<T: Scalar>(
    segments: &[Segment<T>],
    v_bar: Point2<T>,
    p: &HyperParams,
    grid_size: T,
    num_tracks: usize,
) -> Result<RepresentativePath<T>> {
    if segments.is_empty() {
        return Err(Error::NoPath);
    }
    run_sweep(segments, v_bar, p, grid_size, num_tracks, |_| 0..segments.len())
}

/// Representative path of a cluster of tracks, in image coordinates.
pub fn representative_path<T: Scalar>(
    tracks: &[&Track<T>],
    grid_size: T,
    p: &HyperParams,
) -> Result<RepresentativePath<T>> {
    let segs = track_segments(tracks);
    if segs.is_empty() {
        return Err(Error::NoPath);
    }
    let v_bar = average_vector(&segs)?;
    let rotated = rotate_to_sweep_frame(&segs, v_bar);
    sweep(&rotated, v_bar, p, grid_size, tracks.len())
}

/// Distance from `pt` to the nearest vertex of either direction.
pub fn distance_to_path<T: Scalar>(path: &RepresentativePath<T>, pt: Point2<T>) -> T {
    path.vertices().map(|v| v.dist(pt)).fold(T::infinity(), T::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracker::TrackPoint;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p(x: f64, y: f64) -> Point2<f64> {
        Point2::new(x, y)
    }

    fn seg(a: (f64, f64), b: (f64, f64)) -> Segment<f64> {
        Segment::new(p(a.0, a.1), p(b.0, b.1), 0).unwrap()
    }

    fn straight(id: u64, y: f64, x0: f64, x1: f64, step: f64) -> Track<f64> {
        let n = ((x1 - x0).abs() / step).round() as usize;
        let s = (x1 - x0).signum() * step;
        Track {
            id,
            points: (0..=n).map(|i| TrackPoint { frame: i as u64, center: p(x0 + s * i as f64, y) }).collect(),
            bbox_history: vec![],
        }
    }

    #[test]
    fn average_vector_examples() {
        assert_eq!(average_vector(&[seg((0., 0.), (1., 0.)), seg((0., 1.), (1., 1.))]).unwrap(), p(1., 0.));
        let v = average_vector(&[seg((0., 0.), (1., 0.)), seg((0., 0.), (0., 1.))]).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((v.x - r).abs() < 1e-15 && (v.y - r).abs() < 1e-15);
        assert!(matches!(
            average_vector(&[seg((0., 0.), (1., 0.)), seg((1., 0.), (0., 0.))]),
            Err(Error::ZeroAverageVector)
        ));
    }

    #[test]
    fn rotation_examples() {
        let s = [seg((3., 4.), (7., -2.))];
        assert_eq!(rotate_to_sweep_frame(&s, p(1., 0.))[0].a, p(3., 4.));
        assert_eq!(to_sweep_frame(p(0., 5.), p(0., 1.)), p(5., 0.));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ang: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let v = p(ang.cos(), ang.sin());
        for _ in 0..100 {
            let q = p(rng.random_range(-1e3..1e3), rng.random_range(-1e3..1e3));
            let back = from_sweep_frame(to_sweep_frame(q, v), v);
            assert!(back.dist(q) < 1e-9);
        }
    }

    #[test]
    fn identical_tracks_give_their_line() {
        let tracks: Vec<Track<f64>> = (0..10).map(|i| straight(i, 50.0, 0.0, 100.0, 1.0)).collect();
        let refs: Vec<&Track<f64>> = tracks.iter().collect();
        let path = representative_path(&refs, 10.0, &HyperParams::default()).unwrap();
        assert!(path.backward.is_empty());
        assert_eq!(path.forward.len(), 11);
        for w in path.forward.windows(2) {
            assert!(w[1].x - w[0].x >= 10.0 - 1e-9);
        }
        assert!(path.forward.iter().all(|q| (q.y - 50.0).abs() < 1e-9));
    }

    #[test]
    fn opposing_flows_split_by_direction() {
        let mut tracks: Vec<Track<f64>> = (0..5).map(|i| straight(i, 40.0, 0.0, 100.0, 2.0)).collect();
        tracks.extend((5..10).map(|i| straight(i, 60.0, 98.0, 0.0, 2.0)));
        let refs: Vec<&Track<f64>> = tracks.iter().collect();
        let path = representative_path(&refs, 10.0, &HyperParams::default()).unwrap();
        assert!(path.v_bar.x > 0.99);
        assert!(path.forward.iter().all(|q| (q.y - 40.0).abs() < 1e-9));
        assert!(path.backward.iter().all(|q| (q.y - 60.0).abs() < 1e-9));
        assert!(path.backward.len() >= 3);
        assert!(path.backward.first().unwrap().x > path.backward.last().unwrap().x);

        let segs = rotate_to_sweep_frame(&track_segments(&refs), path.v_bar);
        assert_eq!(naive_sweep(&segs, path.v_bar, &HyperParams::default(), 10.0, 10).unwrap(), path);
    }

    #[test]
    fn too_little_support() {
        let tracks: Vec<Track<f64>> = (0..3).map(|i| straight(i, 50.0, 0.0, 100.0, 1.0)).collect();
        let refs: Vec<&Track<f64>> = tracks.iter().collect();
        assert!(matches!(representative_path(&refs, 10.0, &HyperParams::default()), Err(Error::NoPath)));
        assert!(matches!(naive_sweep::<f64>(&[], p(1., 0.), &HyperParams::default(), 10.0, 0), Err(Error::NoPath)));
    }

    #[test]
    fn long_segments_are_still_found() {
        // Segments far longer than the window: only the split points can
        // put them in range of a sweep position in the middle.
        let segs: Vec<Segment<f64>> =
            (0..6).map(|i| seg((0.0, i as f64), (1000.0, i as f64))).chain([seg((500.0, 0.0), (501.0, 0.0))]).collect();
        let params = HyperParams::default();
        let a = sweep(&segs, p(1., 0.), &params, 10.0, 6).unwrap();
        let b = naive_sweep(&segs, p(1., 0.), &params, 10.0, 6).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.forward.len(), 3);
    }

    #[test]
    fn distance_examples() {
        let path = RepresentativePath { forward: vec![p(0., 0.), p(10., 0.)], backward: vec![], v_bar: p(1., 0.) };
        assert_eq!(distance_to_path(&path, p(10., 0.)), 0.0);
        assert_eq!(distance_to_path(&path, p(5., 12.)), 13.0);
        let path = RepresentativePath { forward: vec![], backward: vec![p(0., 0.)], v_bar: p(1., 0.) };
        assert_eq!(distance_to_path(&path, p(3., 4.)), 5.0);
    }
}
