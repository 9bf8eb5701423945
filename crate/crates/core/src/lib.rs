//! Vehicle counting from detector output: confidence-driven ROI estimation,
//! IoU tracking, trajectory clustering, swept representative paths and
//! per-movement counts.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix it to `f64`.

pub mod cluster;
pub mod counting;
pub mod error;
pub mod eval;
pub mod geom;
pub mod ingest;
pub mod io;
pub mod model;
pub mod path;
pub mod render;
pub mod roi;
pub mod scalar;
pub mod synth;
pub mod tracker;

pub use cluster::{featurize, kmeans, purge_and_recluster, select_k, silhouette_index, ClusteringResult, TrackFeature};
pub use counting::{count_tracks, run_pipeline, run_pipeline_with, MovementCluster, PipelineResult, TrackSource};
pub use error::{Error, Result};
pub use geom::Point2;
pub use ingest::{parse_detection_file, parse_detections, DetectionSet};
pub use model::{BBox, ClassLabel, DetectionRecord, FrameGeometry, HyperParams};
pub use path::{representative_path, RepresentativePath, Segment};
pub use roi::{estimate_roi, RoiPolygon};
pub use scalar::Scalar;
pub use tracker::{Track, TrackPoint};

pub type Point = Point2<f64>;
pub type Detections = DetectionSet<f64>;
pub type Detection = DetectionRecord<f64>;
pub type Roi = RoiPolygon<f64>;
pub type VehicleTrack = Track<f64>;
pub type MovementPath = RepresentativePath<f64>;
pub type Movement = MovementCluster<f64>;
pub type Pipeline = PipelineResult<f64>;
