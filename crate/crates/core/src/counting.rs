//! Deviation-based track cleanup, per-movement counting and the end-to-end
//! pipeline.

use crate::cluster::{featurize, purge_and_recluster, select_k, TrackFeature, FEATURE_DIM};
use crate::error::{Error, Result};
use crate::ingest::DetectionSet;
use crate::model::{FrameGeometry, HyperParams};
use crate::path::{distance_to_path, representative_path, RepresentativePath};
use crate::roi::{estimate_roi, RoiPolygon};
use crate::scalar::Scalar;
use crate::tracker::{adopt_external_tracks, track, Track};

#[derive(Debug, Clone, PartialEq)]
pub struct MovementCluster<T> {
    pub cluster_idx: usize,
    /// Ascending.
    pub track_ids: Vec<u64>,
    pub path: RepresentativePath<T>,
    pub count: usize,
}

/// Everything downstream of tracking.
#[derive(Debug, Clone, PartialEq)]
pub struct MovementStage<T> {
    pub clusters: Vec<MovementCluster<T>>,
    /// Ascending.
    pub purged_track_ids: Vec<u64>,
    /// Silhouette of the final clustering.
    pub silhouette: T,
    pub tracks_in: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineResult<T> {
    pub frame_geometry: FrameGeometry,
    pub roi: RoiPolygon<T>,
    pub clusters: Vec<MovementCluster<T>>,
    pub purged_track_ids: Vec<u64>,
    pub params_used: HyperParams,
    pub silhouette: T,
    /// Tracks produced by the tracking stage.
    pub tracks_emitted: usize,
}

impl<T: Scalar> PipelineResult<T> {
    pub fn total_count(&self) -> usize {
        self.clusters.iter().map(|c| c.count).sum()
    }

    pub fn grid_size(&self) -> T {
        self.roi.grid_size
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrackSource {
    /// Built-in IoU association.
    #[default]
    Iou,
    /// Track ids carried by the detection records.
    External,
}

fn max_deviation<T: Scalar>(t: &Track<T>, path: &RepresentativePath<T>) -> T {
    t.centers().map(|c| distance_to_path(path, c)).fold(T::zero(), T::max)
}

/// Splits each cluster into tracks within `lambda7 * grid_size` of their
/// cluster's path everywhere, and the ids of those that stray further.
pub fn remove_deviant_tracks<'a, T: Scalar>(
    clusters: &[Vec<&'a Track<T>>],
    paths: &[RepresentativePath<T>],
    grid_size: T,
    p: &HyperParams,
) -> (Vec<Vec<&'a Track<T>>>, Vec<u64>) {
    let limit = T::of(p.lambda7) * grid_size;
    let mut purged = Vec::new();
    let kept = clusters
        .iter()
        .zip(paths)
        .map(|(members, path)| {
            members
                .iter()
                .copied()
                .filter(|t| {
                    let ok = max_deviation(t, path) <= limit;
                    if !ok {
                        purged.push(t.id);
                    }
                    ok
                })
                .collect()
        })
        .collect();
    (kept, purged)
}

struct Grouping<'a, T> {
    clusters: Vec<Vec<&'a Track<T>>>,
    paths: Vec<RepresentativePath<T>>,
    purged: Vec<u64>,
    silhouette: T,
}

/// Featurise, pick k, purge small clusters and compute a path per cluster.
fn group<'a, T: Scalar>(tracks: &[&'a Track<T>], grid_size: T, p: &HyperParams, seed: u64) -> Result<Grouping<'a, T>> {
    let mut purged = Vec::new();
    let mut usable: Vec<&Track<T>> = Vec::with_capacity(tracks.len());
    let mut feats: Vec<[T; FEATURE_DIM]> = Vec::with_capacity(tracks.len());
    for &t in tracks {
        match featurize(t, p) {
            Ok(TrackFeature(f)) => {
                usable.push(t);
                feats.push(f);
            }
            Err(Error::DegenerateTrack(id)) => purged.push(id),
            Err(e) => return Err(e),
        }
    }
    let first = match select_k(&feats, p, seed) {
        Ok(r) => r,
        Err(Error::TooFewTracks { .. }) => return Err(Error::AllPurged),
        Err(e) => return Err(e),
    };
    let out = purge_and_recluster(&first, &feats, p, seed)?;
    purged.extend(out.purged.iter().map(|&i| usable[i].id));

    let mut clusters = Vec::new();
    let mut paths = Vec::new();
    for c in 0..out.result.k {
        let members: Vec<&Track<T>> = out.result.members(c).map(|local| usable[out.survivors[local]]).collect();
        match representative_path(&members, grid_size, p) {
            Ok(path) => {
                clusters.push(members);
                paths.push(path);
            }
            Err(Error::NoPath | Error::ZeroAverageVector) => {
                log::info!("cluster {c}: no representative path, {} tracks dropped", members.len());
                purged.extend(members.iter().map(|t| t.id));
            }
            Err(e) => return Err(e),
        }
    }
    if clusters.is_empty() {
        return Err(Error::AllPurged);
    }
    Ok(Grouping { clusters, paths, purged, silhouette: out.result.silhouette })
}

/// Clustering, paths, deviant removal, one re-cluster/re-path pass and
/// counting for an already tracked scene.
///
/// Tracks that still deviate from the recomputed paths are purged without
/// another re-clustering, so every counted track stays within
/// `lambda7 * grid_size` of its path.
pub fn count_tracks<T: Scalar>(
    tracks: &[Track<T>],
    grid_size: T,
    p: &HyperParams,
    seed: u64,
) -> Result<MovementStage<T>> {
    p.ensure_valid()?;
    let all: Vec<&Track<T>> = tracks.iter().collect();
    let pass1 = group(&all, grid_size, p, seed)?;
    let mut purged = pass1.purged;
    let (kept, deviant) = remove_deviant_tracks(&pass1.clusters, &pass1.paths, grid_size, p);
    purged.extend(deviant);

    let survivors: Vec<&Track<T>> = kept.into_iter().flatten().collect();
    let pass2 = group(&survivors, grid_size, p, seed)?;
    purged.extend(pass2.purged);
    let (kept, deviant) = remove_deviant_tracks(&pass2.clusters, &pass2.paths, grid_size, p);
    purged.extend(deviant);

    let clusters = kept
        .into_iter()
        .zip(pass2.paths)
        .enumerate()
        .map(|(cluster_idx, (members, path))| {
            let mut track_ids: Vec<u64> = members.iter().map(|t| t.id).collect();
            track_ids.sort_unstable();
            MovementCluster { cluster_idx, count: track_ids.len(), track_ids, path }
        })
        .collect();
    purged.sort_unstable();
    Ok(MovementStage { clusters, purged_track_ids: purged, silhouette: pass2.silhouette, tracks_in: tracks.len() })
}

/// Scene tracks for the given source.
pub fn scene_tracks<T: Scalar>(
    d: &DetectionSet<T>,
    roi: &RoiPolygon<T>,
    p: &HyperParams,
    source: TrackSource,
) -> Result<Vec<Track<T>>> {
    match source {
        TrackSource::Iou => Ok(track(d, roi, p)),
        TrackSource::External => adopt_external_tracks(d, roi),
    }
}

pub fn run_pipeline_with<T: Scalar>(
    d: &DetectionSet<T>,
    p: &HyperParams,
    seed: u64,
    source: TrackSource,
) -> Result<PipelineResult<T>> {
    p.ensure_valid()?;
    if d.is_empty() {
        return Err(Error::EmptyDetections);
    }
    let roi = estimate_roi(d, p)?.roi;
    let tracks = scene_tracks(d, &roi, p, source)?;
    let stage = count_tracks(&tracks, roi.grid_size, p, seed)?;
    Ok(PipelineResult {
        frame_geometry: d.frame_geometry,
        roi,
        clusters: stage.clusters,
        purged_track_ids: stage.purged_track_ids,
        params_used: p.clone(),
        silhouette: stage.silhouette,
        tracks_emitted: tracks.len(),
    })
}

/// ROI, IoU tracking and counting in one call.
pub fn run_pipeline<T: Scalar>(d: &DetectionSet<T>, p: &HyperParams, seed: u64) -> Result<PipelineResult<T>> {
    run_pipeline_with(d, p, seed, TrackSource::Iou)
}
