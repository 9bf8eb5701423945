//! Shared domain types and the hyperparameter set.

use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::Point2;
use crate::scalar::Scalar;

/// Axis-aligned detector box: left/top edge plus positive width/height.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox<T> {
    pub x: T,
    pub y: T,
    pub w: T,
    pub h: T,
}

impl<T: Scalar> BBox<T> {
    pub fn new(x: T, y: T, w: T, h: T) -> Self {
        BBox { x, y, w, h }
    }

    pub fn is_valid(&self) -> bool {
        self.w > T::zero() && self.h > T::zero() && self.x.is_finite() && self.y.is_finite()
    }

    #[inline]
    pub fn center(&self) -> Point2<T> {
        let two = T::of(2.0);
        Point2::new(self.x + self.w / two, self.y + self.h / two)
    }

    pub fn area(&self) -> T {
        self.w * self.h
    }

    pub fn iou(&self, o: &Self) -> T {
        let ix = (self.x + self.w).min(o.x + o.w) - self.x.max(o.x);
        let iy = (self.y + self.h).min(o.y + o.h) - self.y.max(o.y);
        if ix <= T::zero() || iy <= T::zero() {
            return T::zero();
        }
        let inter = ix * iy;
        inter / (self.area() + o.area() - inter)
    }
}

/// `bbox_center` as a free function.
pub fn bbox_center<T: Scalar>(b: &BBox<T>) -> Point2<T> {
    b.center()
}

/// Detector classes after merging; only vehicles survive ingestion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ClassLabel {
    #[default]
    Vehicle,
}

impl ClassLabel {
    /// Maps a raw detector label. `car`, `truck` and `vehicle` merge into
    /// [`ClassLabel::Vehicle`]; anything else is not a vehicle.
    pub fn from_raw(label: &str) -> Option<Self> {
        match label.to_ascii_lowercase().as_str() {
            "car" | "truck" | "vehicle" => Some(ClassLabel::Vehicle),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ClassLabel::Vehicle => "vehicle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionRecord<T> {
    pub frame: u64,
    pub bbox: BBox<T>,
    pub confidence: T,
    pub class_label: ClassLabel,
    pub track_id: Option<u64>,
}

impl<T: Scalar> DetectionRecord<T> {
    pub fn center(&self) -> Point2<T> {
        self.bbox.center()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FrameGeometry {
    pub width: u32,
    pub height: u32,
}

impl FrameGeometry {
    pub fn new(width: u32, height: u32) -> Self {
        FrameGeometry { width, height }
    }

    /// Closed-rectangle containment `[0, width] x [0, height]`.
    pub fn contains<T: Scalar>(&self, p: Point2<T>) -> bool {
        p.x >= T::zero() && p.y >= T::zero() && p.x <= T::of(self.width as f64) && p.y <= T::of(self.height as f64)
    }
}

/// Algorithm hyperparameters. Defaults are the published values.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    /// Detector confidence floor applied at ingestion (inclusive).
    pub lambda1: f64,
    /// Average grid confidence a cell must exceed to be selected.
    pub lambda2: f64,
    /// Grid clusters under this fraction of the mean cluster area are dropped.
    pub lambda3: f64,
    /// Maximum IoU distance (1 - IoU) for a track/detection association.
    pub lambda4: f64,
    /// Scale applied to the displacement angle feature.
    pub lambda5: f64,
    /// Minimum number of tracks a trajectory cluster must keep.
    pub lambda6: usize,
    /// Distance window multiplier (in grid cells) for sweeps and deviation.
    pub lambda7: f64,
    pub lambda8_floor: f64,
    pub lambda8_frac: f64,
    /// Minimum number of points in a directional path.
    pub lambda9: usize,
    /// When set, sweep positions are thinned to at least one grid size apart.
    pub gamma_is_grid_size: bool,
    pub k_min: usize,
    pub k_max: usize,
    /// Frames a track may go unmatched before it is closed.
    pub max_age: u64,
    /// Measure the displacement angle in degrees instead of radians.
    pub angle_degrees: bool,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            lambda1: 0.25,
            lambda2: 0.75,
            lambda3: 0.25,
            lambda4: 0.9,
            lambda5: 100.0,
            lambda6: 3,
            lambda7: 5.0,
            lambda8_floor: 5.0,
            lambda8_frac: 0.05,
            lambda9: 3,
            gamma_is_grid_size: true,
            k_min: 2,
            k_max: 15,
            max_age: 30,
            angle_degrees: false,
        }
    }
}

/// One failed constraint from [`HyperParams::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamViolation {
    pub field: &'static str,
    pub constraint: &'static str,
}

impl fmt::Display for ParamViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.constraint)
    }
}

const KEYS: &[&str] = &[
    "lambda1",
    "lambda2",
    "lambda3",
    "lambda4",
    "lambda5",
    "lambda6",
    "lambda7",
    "lambda8_floor",
    "lambda8_frac",
    "lambda9",
    "gamma_is_grid_size",
    "k_min",
    "k_max",
    "max_age",
    "angle_degrees",
];

impl HyperParams {
    /// Support threshold for a sweep position in a cluster of `num_tracks`.
    pub fn lambda8(&self, num_tracks: usize) -> f64 {
        self.lambda8_floor.max(self.lambda8_frac * num_tracks as f64)
    }

    pub fn validate(&self) -> std::result::Result<(), Vec<ParamViolation>> {
        let mut v = Vec::new();
        let mut check = |ok: bool, field: &'static str, constraint: &'static str| {
            if !ok {
                v.push(ParamViolation { field, constraint });
            }
        };
        let unit = |x: f64| x > 0.0 && x <= 1.0;
        let pos = |x: f64| x > 0.0 && x.is_finite();
        check(unit(self.lambda1), "lambda1", "lambda1 ∉ (0,1]");
        check(unit(self.lambda2), "lambda2", "lambda2 ∉ (0,1]");
        check(pos(self.lambda3), "lambda3", "lambda3 > 0");
        check(pos(self.lambda4), "lambda4", "lambda4 > 0");
        check(pos(self.lambda5), "lambda5", "lambda5 > 0");
        check(self.lambda6 > 0, "lambda6", "lambda6 > 0");
        check(pos(self.lambda7), "lambda7", "lambda7 > 0");
        check(pos(self.lambda8_floor), "lambda8_floor", "lambda8_floor > 0");
        check(pos(self.lambda8_frac), "lambda8_frac", "lambda8_frac > 0");
        check(self.lambda9 > 0, "lambda9", "lambda9 > 0");
        check(self.k_min >= 2, "k_min", "k_min ≥ 2");
        check(self.k_min <= self.k_max, "k_max", "k_min ≤ k_max");
        if v.is_empty() {
            Ok(())
        } else {
            Err(v)
        }
    }

    /// Like [`validate`](Self::validate) but folded into the crate error.
    pub fn ensure_valid(&self) -> Result<()> {
        self.validate()
            .map_err(|v| Error::InvalidParams(v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")))
    }

    /// Sets one field from its textual config value.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn real(v: &str) -> std::result::Result<f64, String> {
            v.parse::<f64>().map_err(|e| format!("`{v}`: {e}"))
        }
        fn int<N: std::str::FromStr>(v: &str) -> std::result::Result<N, String>
        where
            N::Err: fmt::Display,
        {
            v.parse::<N>().map_err(|e| format!("`{v}`: {e}"))
        }
        fn flag(v: &str) -> std::result::Result<bool, String> {
            v.parse::<bool>().map_err(|e| format!("`{v}`: {e}"))
        }
        match key {
            "lambda1" => self.lambda1 = real(value)?,
            "lambda2" => self.lambda2 = real(value)?,
            "lambda3" => self.lambda3 = real(value)?,
            "lambda4" => self.lambda4 = real(value)?,
            "lambda5" => self.lambda5 = real(value)?,
            "lambda6" => self.lambda6 = int(value)?,
            "lambda7" => self.lambda7 = real(value)?,
            "lambda8_floor" => self.lambda8_floor = real(value)?,
            "lambda8_frac" => self.lambda8_frac = real(value)?,
            "lambda9" => self.lambda9 = int(value)?,
            "gamma_is_grid_size" => self.gamma_is_grid_size = flag(value)?,
            "k_min" => self.k_min = int(value)?,
            "k_max" => self.k_max = int(value)?,
            "max_age" => self.max_age = int(value)?,
            "angle_degrees" => self.angle_degrees = flag(value)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    fn get(&self, key: &str) -> String {
        match key {
            "lambda1" => self.lambda1.to_string(),
            "lambda2" => self.lambda2.to_string(),
            "lambda3" => self.lambda3.to_string(),
            "lambda4" => self.lambda4.to_string(),
            "lambda5" => self.lambda5.to_string(),
            "lambda6" => self.lambda6.to_string(),
            "lambda7" => self.lambda7.to_string(),
            "lambda8_floor" => self.lambda8_floor.to_string(),
            "lambda8_frac" => self.lambda8_frac.to_string(),
            "lambda9" => self.lambda9.to_string(),
            "gamma_is_grid_size" => self.gamma_is_grid_size.to_string(),
            "k_min" => self.k_min.to_string(),
            "k_max" => self.k_max.to_string(),
            "max_age" => self.max_age.to_string(),
            "angle_degrees" => self.angle_degrees.to_string(),
            _ => unreachable!("not a parameter key: {key}"),
        }
    }

    /// `(key, value)` pairs in canonical order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        KEYS.iter().map(|&k| (k, self.get(k))).collect()
    }

    /// Parses the flat `key = value` config format on top of the defaults.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let mut p = HyperParams::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::parse(i + 1, "expected `key = value`"))?;
            p.set(k.trim(), v.trim()).map_err(|m| Error::parse(i + 1, m))?;
        }
        Ok(p)
    }

    pub fn from_config_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_config_str(&text)
    }

    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        }
        out
    }
}
