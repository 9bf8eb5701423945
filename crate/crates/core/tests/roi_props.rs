use std::collections::BTreeSet;

use proptest::prelude::*;
use trajcount::roi::{cell_corners, cluster_cells, estimate_roi, point_in_roi, Cell};
use trajcount::{BBox, ClassLabel, DetectionRecord, DetectionSet, FrameGeometry, HyperParams};

fn rec(frame: u64, x: f64, y: f64, w: f64, h: f64, confidence: f64) -> DetectionRecord<f64> {
    DetectionRecord { frame, bbox: BBox::new(x, y, w, h), confidence, class_label: ClassLabel::Vehicle, track_id: None }
}

/// Detections on an integer lattice so scaled copies stay exact.
fn scene() -> impl Strategy<Value = (FrameGeometry, Vec<DetectionRecord<f64>>)> {
    let geom = (200u32..800, 150u32..600);
    geom.prop_flat_map(|(w, h)| {
        let det = (0u64..50, 0u32..w - 40, 0u32..h - 30, 20u32..40, 15u32..30, 0u32..=100)
            .prop_map(|(f, x, y, bw, bh, c)| rec(f, x as f64, y as f64, bw as f64, bh as f64, c as f64 / 100.0));
        (Just(FrameGeometry::new(w, h)), proptest::collection::vec(det, 20..300))
    })
}

fn set(geom: FrameGeometry, recs: Vec<DetectionRecord<f64>>) -> DetectionSet<f64> {
    DetectionSet::from_records(geom, recs, "prop", &HyperParams { lambda1: 0.0, ..HyperParams::default() })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn retained_corners_are_inside((geom, recs) in scene()) {
        let d = set(geom, recs);
        if let Ok(est) = estimate_roi(&d, &HyperParams::default()) {
            for c in est.retained.iter().flat_map(|c| c.cells.iter()) {
                for q in cell_corners(*c, est.roi.grid_size, geom) {
                    prop_assert!(point_in_roi(&est.roi, q), "{q:?} outside");
                }
            }
        }
    }

    #[test]
    fn cluster_cells_partitions_input(cells in proptest::collection::btree_set((0usize..30, 0usize..30), 0..200)) {
        let cells: BTreeSet<Cell> = cells.into_iter().map(|(c, r)| Cell::new(c, r)).collect();
        let parts = cluster_cells(&cells);
        let total: usize = parts.iter().map(|p| p.area()).sum();
        let union: BTreeSet<Cell> = parts.iter().flat_map(|p| p.cells.iter().copied()).collect();
        prop_assert_eq!(total, cells.len());
        prop_assert_eq!(union, cells);
    }

    #[test]
    fn confident_detection_never_shrinks_selection((geom, recs) in scene(), pick in any::<prop::sample::Index>()) {
        let p = HyperParams::default();
        let d = set(geom, recs.clone());
        let Ok(before) = estimate_roi(&d, &p) else { return Ok(()) };
        let Some(&cell) = before.selected.iter().nth(pick.index(before.selected.len().max(1))) else { return Ok(()) };
        // Same w/h as an existing record keeps the grid size unchanged.
        let proto = recs[0].bbox;
        let g = before.grid.grid_size;
        let cx = (cell.col as f64 + 0.5) * g;
        let cy = (cell.row as f64 + 0.5) * g;
        let mut more = recs.clone();
        more.push(rec(0, cx - proto.w / 2.0, cy - proto.h / 2.0, proto.w, proto.h, 1.0));
        more.push(rec(0, cx - proto.w / 2.0, cy - proto.h / 2.0, proto.w, proto.h, 1.0));
        let d2 = set(geom, more);
        if trajcount::roi::compute_grid_size(&d2).unwrap() != g || !geom.contains(trajcount::Point2::new(cx, cy)) {
            return Ok(());
        }
        let after = estimate_roi(&d2, &p).map(|e| e.selected).unwrap_or_default();
        prop_assert!(before.selected.is_subset(&after));
    }

    #[test]
    fn roi_is_deterministic((geom, recs) in scene()) {
        let d = set(geom, recs);
        let a = estimate_roi(&d, &HyperParams::default()).map(|e| e.roi);
        let b = estimate_roi(&d, &HyperParams::default()).map(|e| e.roi);
        prop_assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }

    #[test]
    fn scaling_scales_roi_exactly((geom, recs) in scene(), s in prop::sample::select(vec![2u32, 4])) {
        let p = HyperParams::default();
        let sf = s as f64;
        let scaled: Vec<_> = recs
            .iter()
            .map(|r| rec(r.frame, r.bbox.x * sf, r.bbox.y * sf, r.bbox.w * sf, r.bbox.h * sf, r.confidence))
            .collect();
        let a = estimate_roi(&set(geom, recs), &p);
        let b = estimate_roi(&set(FrameGeometry::new(geom.width * s, geom.height * s), scaled), &p);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(a.roi.grid_size * sf, b.roi.grid_size);
                let want: Vec<_> = a.roi.vertices.iter().map(|v| trajcount::Point2::new(v.x * sf, v.y * sf)).collect();
                prop_assert_eq!(want, b.roi.vertices);
            }
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "one side failed: {:?} / {:?}", a.err(), b.err()),
        }
    }
}
