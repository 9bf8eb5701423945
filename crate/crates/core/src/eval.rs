//! Scoring of pipeline output against synthetic ground truth.

use crate::counting::MovementCluster;
use crate::error::{Error, Result};
use crate::geom::{point_polyline_distance, signed_area, Point2};
use crate::scalar::Scalar;
use crate::synth::GroundTruth;

fn check_polygon<T: Scalar>(poly: &[Point2<T>]) -> Result<()> {
    if poly.len() < 3 || !poly.iter().all(|p| p.is_finite()) || signed_area(poly).is_zero() {
        return Err(Error::DegeneratePolygon);
    }
    Ok(())
}

/// Sorted x positions where the horizontal line at `y` crosses the polygon
/// boundary, using the same half-open rule as
/// [`point_in_polygon`](crate::geom::point_in_polygon).
fn row_crossings(poly: &[Point2<f64>], y: f64, out: &mut Vec<f64>) {
    out.clear();
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a.y > y) != (b.y > y) {
            out.push(a.x + (y - a.y) / (b.y - a.y) * (b.x - a.x));
        }
        j = i;
    }
    out.sort_by(f64::total_cmp);
}

/// A pixel center at `x` is inside when an odd number of crossings lie
/// strictly to its right.
fn inside(crossings: &[f64], x: f64) -> bool {
    let right = crossings.len() - crossings.partition_point(|&c| c <= x);
    right % 2 == 1
}

/// IoU of two simple polygons, rasterized on pixels of side `pixel` over
/// their joint bounding box. A pixel belongs to a polygon when its center
/// does.
pub fn polygon_iou_at<T: Scalar>(a: &[Point2<T>], b: &[Point2<T>], pixel: f64) -> Result<f64> {
    check_polygon(a)?;
    check_polygon(b)?;
    if !(pixel > 0.0 && pixel.is_finite()) {
        return Err(Error::InvalidParams(format!("pixel size {pixel} must be positive")));
    }
    let a: Vec<Point2<f64>> = a.iter().map(|p| p.cast()).collect();
    let b: Vec<Point2<f64>> = b.iter().map(|p| p.cast()).collect();
    let all = a.iter().chain(&b);
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in all {
        x0 = x0.min(p.x);
        y0 = y0.min(p.y);
        x1 = x1.max(p.x);
        y1 = y1.max(p.y);
    }
    let (c0, r0) = ((x0 / pixel).floor() as i64, (y0 / pixel).floor() as i64);
    let (c1, r1) = ((x1 / pixel).ceil() as i64, (y1 / pixel).ceil() as i64);

    let (mut inter, mut union) = (0u64, 0u64);
    let (mut ca, mut cb) = (Vec::new(), Vec::new());
    for r in r0..r1 {
        let y = (r as f64 + 0.5) * pixel;
        row_crossings(&a, y, &mut ca);
        row_crossings(&b, y, &mut cb);
        if ca.is_empty() && cb.is_empty() {
            continue;
        }
        for c in c0..c1 {
            let x = (c as f64 + 0.5) * pixel;
            match (inside(&ca, x), inside(&cb, x)) {
                (true, true) => {
                    inter += 1;
                    union += 1;
                }
                (false, false) => {}
                _ => union += 1,
            }
        }
    }
    Ok(if union == 0 { 0.0 } else { inter as f64 / union as f64 })
}

/// [`polygon_iou_at`] with 1-pixel resolution.
pub fn polygon_iou<T: Scalar>(a: &[Point2<T>], b: &[Point2<T>]) -> Result<f64> {
    polygon_iou_at(a, b, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MovementMatch {
    pub gt_count: usize,
    pub predicted: usize,
    pub cluster_idx: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountMatching {
    pub mae_pct: f64,
    /// One entry per ground-truth movement, in input order.
    pub per_movement: Vec<MovementMatch>,
    /// `(cluster_idx, count)` of predictions left without a movement.
    pub unmatched: Vec<(usize, usize)>,
}

fn mean_vertex_distance<T: Scalar>(c: &MovementCluster<T>, line: &[Point2<T>]) -> f64 {
    let (sum, n) =
        c.path.vertices().fold((0.0, 0usize), |(s, n), v| (s + point_polyline_distance(v, line).as_f64(), n + 1));
    if n == 0 {
        f64::INFINITY
    } else {
        sum / n as f64
    }
}

/// Matches clusters to movements greedily by ascending mean distance from
/// path vertices to the movement's lane, then reports
/// `100 * sum |pred - gt| / sum gt` with unmatched entries counted against 0.
pub fn count_mae<T: Scalar>(
    gt: &[usize],
    pred: &[MovementCluster<T>],
    gt_paths: &[Vec<Point2<T>>],
) -> Result<CountMatching> {
    if gt.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    if gt_paths.len() != gt.len() {
        return Err(Error::InvalidParams(format!("{} ground-truth paths for {} counts", gt_paths.len(), gt.len())));
    }
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(gt.len() * pred.len());
    for (g, line) in gt_paths.iter().enumerate() {
        for (c, cl) in pred.iter().enumerate() {
            let d = mean_vertex_distance(cl, line);
            if d.is_finite() {
                pairs.push((d, g, c));
            }
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));

    let mut gt_to: Vec<Option<usize>> = vec![None; gt.len()];
    let mut taken = vec![false; pred.len()];
    for (_, g, c) in pairs {
        if gt_to[g].is_none() && !taken[c] {
            gt_to[g] = Some(c);
            taken[c] = true;
        }
    }

    let per_movement: Vec<MovementMatch> = gt
        .iter()
        .zip(&gt_to)
        .map(|(&gt_count, m)| MovementMatch {
            gt_count,
            predicted: m.map_or(0, |c| pred[c].count),
            cluster_idx: m.map(|c| pred[c].cluster_idx),
        })
        .collect();
    let unmatched: Vec<(usize, usize)> =
        pred.iter().zip(&taken).filter(|(_, &t)| !t).map(|(c, _)| (c.cluster_idx, c.count)).collect();

    let err: usize = per_movement.iter().map(|m| m.predicted.abs_diff(m.gt_count)).sum::<usize>()
        + unmatched.iter().map(|&(_, n)| n).sum::<usize>();
    let total: usize = gt.iter().sum();
    let mae_pct = if total == 0 {
        if err == 0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        100.0 * err as f64 / total as f64
    };
    Ok(CountMatching { mae_pct, per_movement, unmatched })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub roi_iou: f64,
    pub mae_pct: f64,
    pub per_movement: Vec<MovementMatch>,
    pub unmatched: Vec<(usize, usize)>,
}

pub fn evaluate<T: Scalar>(
    roi: &[Point2<T>],
    clusters: &[MovementCluster<T>],
    truth: &GroundTruth<T>,
) -> Result<EvalReport> {
    let roi_iou = polygon_iou(roi, &truth.roi)?;
    let m = count_mae(&truth.counts, clusters, &truth.paths)?;
    Ok(EvalReport { roi_iou, mae_pct: m.mae_pct, per_movement: m.per_movement, unmatched: m.unmatched })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::RepresentativePath;
    use proptest::prelude::*;

    fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Vec<Point2<f64>> {
        vec![Point2::new(x0, y0), Point2::new(x1, y0), Point2::new(x1, y1), Point2::new(x0, y1)]
    }

    fn cluster(idx: usize, count: usize, y: f64) -> MovementCluster<f64> {
        MovementCluster {
            cluster_idx: idx,
            track_ids: (0..count as u64).collect(),
            path: RepresentativePath {
                forward: vec![Point2::new(0.0, y), Point2::new(100.0, y)],
                backward: vec![],
                v_bar: Point2::new(1.0, 0.0),
            },
            count,
        }
    }

    fn lanes() -> Vec<Vec<Point2<f64>>> {
        vec![
            vec![Point2::new(0.0, 0.0), Point2::new(100.0, 0.0)],
            vec![Point2::new(0.0, 50.0), Point2::new(100.0, 50.0)],
        ]
    }

    #[test]
    fn iou_examples() {
        let a = rect(0.0, 0.0, 100.0, 100.0);
        assert_eq!(polygon_iou(&a, &a).unwrap(), 1.0);
        let b = rect(50.0, 0.0, 150.0, 100.0);
        assert!((polygon_iou(&a, &b).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        let c = rect(200.0, 200.0, 300.0, 300.0);
        assert_eq!(polygon_iou(&a, &c).unwrap(), 0.0);
        let u = rect(0.0, 0.0, 1.0, 1.0);
        let v = rect(0.5, 0.0, 1.5, 1.0);
        assert!((polygon_iou_at(&u, &v, 0.01).unwrap() - 1.0 / 3.0).abs() < 0.01);
    }

    #[test]
    fn iou_rejects_degenerate() {
        let line = vec![Point2::new(0.0, 0.0), Point2::new(1.0, 1.0), Point2::new(2.0, 2.0)];
        let a = rect(0.0, 0.0, 10.0, 10.0);
        assert!(matches!(polygon_iou(&a, &line), Err(Error::DegeneratePolygon)));
        assert!(matches!(polygon_iou(&a[..2], &a), Err(Error::DegeneratePolygon)));
    }

    #[test]
    fn mae_examples() {
        let exact = count_mae(&[5, 5], &[cluster(0, 5, 0.0), cluster(1, 5, 50.0)], &lanes()).unwrap();
        assert_eq!(exact.mae_pct, 0.0);
        let off = count_mae(&[5, 5], &[cluster(0, 4, 1.0), cluster(1, 6, 49.0)], &lanes()).unwrap();
        assert!((off.mae_pct - 20.0).abs() < 1e-12);
        assert_eq!(off.per_movement[0].cluster_idx, Some(0));
        let miss = count_mae::<f64>(&[10], &[], &lanes()[..1]).unwrap();
        assert_eq!(miss.mae_pct, 100.0);
        assert!(matches!(count_mae::<f64>(&[], &[], &[]), Err(Error::EmptyGroundTruth)));
    }

    #[test]
    fn matching_follows_geometry_not_counts() {
        // The cluster near lane 1 carries lane 0's count.
        let m = count_mae(&[5, 9], &[cluster(0, 9, 2.0), cluster(1, 5, 48.0)], &lanes()).unwrap();
        assert_eq!(m.per_movement[0].cluster_idx, Some(0));
        assert_eq!(m.per_movement[1].cluster_idx, Some(1));
        assert!((m.mae_pct - 100.0 * 8.0 / 14.0).abs() < 1e-12);
    }

    #[test]
    fn unmatched_predictions_count_against_zero() {
        let m = count_mae(&[5], &[cluster(0, 5, 0.0), cluster(1, 3, 50.0)], &lanes()[..1]).unwrap();
        assert_eq!(m.unmatched, vec![(1, 3)]);
        assert!((m.mae_pct - 60.0).abs() < 1e-12);
    }

    fn shoelace(p: &[Point2<f64>]) -> f64 {
        (0..p.len()).map(|i| p[i].cross(p[(i + 1) % p.len()])).sum::<f64>().abs() / 2.0
    }

    fn perimeter(p: &[Point2<f64>]) -> f64 {
        (0..p.len()).map(|i| p[i].dist(p[(i + 1) % p.len()])).sum()
    }

    /// Sutherland-Hodgman clip of `subject` by a counter-clockwise convex `clip`.
    fn clip_convex(subject: &[Point2<f64>], clip: &[Point2<f64>]) -> Vec<Point2<f64>> {
        let mut out = subject.to_vec();
        for i in 0..clip.len() {
            let (c0, c1) = (clip[i], clip[(i + 1) % clip.len()]);
            let side = |q: Point2<f64>| (c1 - c0).cross(q - c0);
            let input = std::mem::take(&mut out);
            for j in 0..input.len() {
                let (p0, p1) = (input[j], input[(j + 1) % input.len()]);
                let (s0, s1) = (side(p0), side(p1));
                if s0 >= 0.0 {
                    out.push(p0);
                }
                if (s0 >= 0.0) != (s1 >= 0.0) {
                    out.push(p0 + (p1 - p0) * (s0 / (s0 - s1)));
                }
            }
            if out.is_empty() {
                break;
            }
        }
        out
    }

    fn arb_poly() -> impl Strategy<Value = Vec<Point2<f64>>> {
        (20.0..80.0f64, 20.0..80.0f64, 3usize..9, 0.0..200.0f64, 0.0..200.0f64).prop_map(|(rx, ry, n, cx, cy)| {
            (0..n)
                .map(|i| {
                    let t = std::f64::consts::TAU * i as f64 / n as f64;
                    Point2::new(cx + rx * t.cos(), cy + ry * t.sin())
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_reflexive(a in arb_poly(), b in arb_poly()) {
            let ab = polygon_iou(&a, &b).unwrap();
            prop_assert_eq!(ab, polygon_iou(&b, &a).unwrap());
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(polygon_iou(&a, &a).unwrap(), 1.0);
        }

        #[test]
        fn iou_within_raster_bound_of_exact(a in arb_poly(), b in arb_poly()) {
            let (ia, ib) = (shoelace(&a), shoelace(&b));
            let inter = shoelace(&clip_convex(&a, &b));
            let union = ia + ib - inter;
            let exact = inter / union;
            for px in [1.0, 0.25] {
                // Each area is off by at most one pixel along its boundary.
                let e = (perimeter(&a) + perimeter(&b)) * px;
                if union <= e {
                    continue;
                }
                let bound = 2.0 * e / (union - e);
                let got = polygon_iou_at(&a, &b, px).unwrap();
                prop_assert!((got - exact).abs() <= bound, "px {px}: {got} vs {exact}, bound {bound}");
            }
        }

        #[test]
        fn mae_zero_iff_exact_bijection(c0 in 0usize..20, c1 in 0usize..20, p0 in 0usize..20, p1 in 0usize..20) {
            let gt = [c0 + 1, c1 + 1];
            let m = count_mae(&gt, &[cluster(0, p0, 0.0), cluster(1, p1, 50.0)], &lanes()).unwrap();
            prop_assert_eq!(m.mae_pct == 0.0, p0 == gt[0] && p1 == gt[1]);
        }
    }
}
