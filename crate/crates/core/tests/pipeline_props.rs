use proptest::prelude::*;
use trajcount::counting::{count_tracks, run_pipeline_with, scene_tracks, TrackSource};
use trajcount::io;
use trajcount::path::{distance_to_path, representative_path, to_sweep_frame};
use trajcount::roi::{estimate_roi, point_in_roi};
use trajcount::synth::{generate, scenes};
use trajcount::tracker::track;
use trajcount::{HyperParams, Point2, Track, TrackPoint};

fn noisy_intersection(seed: u64) -> trajcount::synth::Scenario<f64> {
    let mut s = scenes::intersection::<f64>(6, seed);
    s.noise.jitter_sigma = 2.0;
    s.noise.clutter_rate = 0.05;
    s
}

#[test]
fn tracks_stay_inside_roi_and_reuse_detections() {
    let p = HyperParams::default();
    for seed in 0..4 {
        let scene = generate(&noisy_intersection(seed));
        let roi = estimate_roi(&scene.detections, &p).unwrap().roi;
        let tracks = track(&scene.detections, &roi, &p);
        let mut dets: Vec<(u64, u64, u64)> = scene
            .detections
            .records
            .iter()
            .filter(|r| roi.contains(r.center()))
            .map(|r| (r.frame, r.center().x.to_bits(), r.center().y.to_bits()))
            .collect();
        dets.sort_unstable();
        for t in &tracks {
            for q in &t.points {
                assert!(point_in_roi(&roi, q.center));
                let key = (q.frame, q.center.x.to_bits(), q.center.y.to_bits());
                let i = dets.binary_search(&key).expect("track point without a detection");
                dets.remove(i);
            }
        }
        assert_eq!(tracks, track(&scene.detections, &roi, &p));
    }
}

#[test]
fn counted_tracks_hug_their_paths_and_are_conserved() {
    let p = HyperParams::default();
    for seed in 0..6 {
        let scene = generate(&noisy_intersection(seed));
        for source in [TrackSource::Iou, TrackSource::External] {
            let r = run_pipeline_with(&scene.detections, &p, seed, source).unwrap();
            assert_eq!(r.total_count() + r.purged_track_ids.len(), r.tracks_emitted);
            let tracks = scene_tracks(&scene.detections, &r.roi, &p, source).unwrap();
            let limit = p.lambda7 * r.grid_size();
            for c in &r.clusters {
                assert_eq!(c.count, c.track_ids.len());
                for id in &c.track_ids {
                    let t = tracks.iter().find(|t| t.id == *id).unwrap();
                    assert!(t.centers().all(|q| distance_to_path(&c.path, q) <= limit));
                }
            }
        }
    }
}

#[test]
fn stages_compose_through_files() {
    let p = HyperParams::default();
    let scene = generate(&noisy_intersection(3));
    let d = trajcount::parse_detections::<f64>(&scene.detections.to_text(), "d", &p).unwrap();
    let whole = io::write_result(&run_pipeline_with(&d, &p, 7, TrackSource::Iou).unwrap());

    let roi_text = io::write_roi(d.frame_geometry, &estimate_roi(&d, &p).unwrap().roi);
    let (_, roi) = io::parse_roi::<f64>(&roi_text).unwrap();
    let track_text = io::write_tracks(&track(&d, &roi, &p));
    let tracks = io::parse_tracks::<f64>(&track_text).unwrap();
    let st = count_tracks(&tracks, roi.grid_size, &p, 7).unwrap();
    let cluster_text = io::write_movements(&st.clusters, &st.purged_track_ids, &p, st.silhouette, tracks.len());
    assert_eq!(format!("{roi_text}{cluster_text}"), whole);
}

#[test]
fn single_precision_pipeline() {
    let scene = generate(&scenes::two_lane::<f32>(5, 2));
    let r = run_pipeline_with(&scene.detections, &HyperParams::default(), 42, TrackSource::Iou).unwrap();
    let mut counts: Vec<usize> = r.clusters.iter().map(|c| c.count).collect();
    counts.sort_unstable();
    assert_eq!(counts, vec![5, 5]);
}

/// Parallel tracks; `stagger` shifts each track's start along x.
fn bundle(n: usize, step: f64, len: usize, stagger: f64) -> Vec<Track<f64>> {
    (0..n as u64)
        .map(|id| Track {
            id,
            points: (0..len)
                .map(|i| {
                    let x = 3.0 + stagger * id as f64 + step * i as f64;
                    TrackPoint { frame: i as u64, center: Point2::new(x, 50.0 + 0.5 * id as f64) }
                })
                .collect(),
            bbox_history: vec![],
        })
        .collect()
}

fn rotate(q: Point2<f64>, phi: f64) -> Point2<f64> {
    let (s, c) = phi.sin_cos();
    Point2::new(c * q.x - s * q.y, s * q.x + c * q.y)
}

proptest! {
    #[test]
    fn sweep_positions_respect_gamma(n in 5usize..15, step in 1.0f64..30.0, grid in 5.0f64..40.0) {
        let tracks = bundle(n, step, 40, 0.0);
        let refs: Vec<&Track<f64>> = tracks.iter().collect();
        let p = HyperParams::default();
        if let Ok(path) = representative_path(&refs, grid, &p) {
            for w in path.forward.windows(2) {
                let (a, b) = (to_sweep_frame(w[0], path.v_bar), to_sweep_frame(w[1], path.v_bar));
                prop_assert!(b.x - a.x >= grid - 1e-9);
            }
        }
    }

    #[test]
    fn identical_tracks_are_a_fixpoint(n in 5usize..12, step in 3.0f64..20.0) {
        let one = bundle(1, step, 30, 0.0).remove(0);
        let tracks: Vec<Track<f64>> = (0..n as u64).map(|id| Track { id, ..one.clone() }).collect();
        let refs: Vec<&Track<f64>> = tracks.iter().collect();
        let path = representative_path(&refs, 10.0, &HyperParams::default()).unwrap();
        prop_assert!(path.backward.is_empty());
        for q in &path.forward {
            prop_assert!(trajcount::geom::point_polyline_distance(*q, &one.centers().collect::<Vec<_>>()) < 1e-6);
        }
    }

    #[test]
    fn path_rotates_with_scene(phi in -3.1f64..3.1) {
        // Staggered starts and step 7 against gamma 10 keep every sweep
        // position clear of rounding ties.
        let tracks = bundle(8, 7.0, 40, 0.3);
        let rotated: Vec<Track<f64>> = tracks
            .iter()
            .map(|t| Track {
                points: t.points.iter().map(|q| TrackPoint { frame: q.frame, center: rotate(q.center, phi) }).collect(),
                ..t.clone()
            })
            .collect();
        let p = HyperParams::default();
        let a = representative_path(&tracks.iter().collect::<Vec<_>>(), 10.0, &p).unwrap();
        let b = representative_path(&rotated.iter().collect::<Vec<_>>(), 10.0, &p).unwrap();
        prop_assert_eq!(a.forward.len(), b.forward.len());
        prop_assert_eq!(a.backward.len(), b.backward.len());
        for (x, y) in a.vertices().zip(b.vertices()) {
            let x = rotate(x, phi);
            prop_assert!((x.x - y.x).abs() < 1e-6 && (x.y - y.y).abs() < 1e-6, "{x:?} vs {y:?}");
        }
    }
}
