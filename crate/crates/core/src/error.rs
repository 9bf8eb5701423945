use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {0}: malformed record")]
    MalformedLine(usize),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("missing `#geometry <width> <height>` header")]
    GeometryMissing,
    #[error("line {0}: confidence outside [0, 1]")]
    ConfidenceOutOfRange(usize),
    #[error("line {0}: bounding-box center lies outside the frame")]
    CenterOutsideFrame(usize),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("no detections")]
    EmptyDetections,
    #[error("no grid cluster survived; region of interest is empty")]
    EmptyRoi,
    #[error("only some records carry a track id ({with} with, {without} without)")]
    MixedIdPresence { with: usize, without: usize },
    #[error("no record carries a track id")]
    NoTrackIds,
    #[error("track {0} has identical first and last points")]
    DegenerateTrack(u64),
    #[error("k = {k} exceeds the {distinct} distinct feature vectors")]
    TooFewTracks { k: usize, distinct: usize },
    #[error("silhouette needs at least two clusters")]
    SingleCluster,
    #[error("every track was purged")]
    AllPurged,
    #[error("segment directions cancel out")]
    ZeroAverageVector,
    #[error("no representative path: every sweep position lacked support")]
    NoPath,
    #[error("polygon has fewer than three vertices or zero area")]
    DegeneratePolygon,
    #[error("ground truth has no vehicles")]
    EmptyGroundTruth,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }
}
