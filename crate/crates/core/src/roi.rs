//! Region-of-interest estimation from detection-confidence statistics.
//!
//! The frame is tiled with square cells one "typical vehicle" wide. Cells
//! whose mean detection confidence clears `lambda2` are grouped into
//! 8-connected components, components much smaller than the average are
//! discarded, and the ROI is the convex hull of the surviving cells.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::geom::{convex_hull_exact, point_in_convex, Point2};
use crate::ingest::DetectionSet;
use crate::model::{FrameGeometry, HyperParams};
use crate::scalar::Scalar;

/// Grid cell index. Orders by row, then column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub const fn new(col: usize, row: usize) -> Self {
        Cell { row, col }
    }

    fn neighbors(self) -> impl Iterator<Item = Cell> {
        let (c, r) = (self.col as isize, self.row as isize);
        (-1isize..=1)
            .flat_map(move |dr| (-1isize..=1).map(move |dc| (c + dc, r + dr)))
            .filter(move |&(x, y)| x >= 0 && y >= 0 && (x, y) != (c, r))
            .map(|(x, y)| Cell::new(x as usize, y as usize))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridField<T> {
    pub grid_size: T,
    pub cols: usize,
    pub rows: usize,
    conf_sum: Vec<T>,
    count: Vec<u32>,
}

impl<T: Scalar> GridField<T> {
    pub fn empty(geom: FrameGeometry, grid_size: T) -> Self {
        let cols = (T::of(geom.width as f64) / grid_size).ceil().as_f64().max(1.0) as usize;
        let rows = (T::of(geom.height as f64) / grid_size).ceil().as_f64().max(1.0) as usize;
        GridField { grid_size, cols, rows, conf_sum: vec![T::zero(); cols * rows], count: vec![0; cols * rows] }
    }

    /// Cell of a pixel position; positions on the far frame edge fall in
    /// the last column/row.
    pub fn cell_of(&self, p: Point2<T>) -> Cell {
        let idx = |v: T, n: usize| -> usize {
            let i = (v / self.grid_size).floor().as_f64();
            if i <= 0.0 {
                0
            } else {
                (i as usize).min(n - 1)
            }
        };
        Cell::new(idx(p.x, self.cols), idx(p.y, self.rows))
    }

    pub fn add(&mut self, p: Point2<T>, confidence: T) {
        let c = self.cell_of(p);
        let i = c.row * self.cols + c.col;
        self.conf_sum[i] = self.conf_sum[i] + confidence;
        self.count[i] += 1;
    }

    /// Folds another field over the same grid into this one.
    pub fn merge(&mut self, other: &GridField<T>) {
        debug_assert_eq!((self.cols, self.rows), (other.cols, other.rows));
        for i in 0..self.count.len() {
            self.conf_sum[i] = self.conf_sum[i] + other.conf_sum[i];
            self.count[i] += other.count[i];
        }
    }

    pub fn cell_count(&self, c: Cell) -> u32 {
        self.count[c.row * self.cols + c.col]
    }

    /// Mean confidence of the cell, `None` when no center fell in it.
    pub fn cell_avg_conf(&self, c: Cell) -> Option<T> {
        let i = c.row * self.cols + c.col;
        match self.count[i] {
            0 => None,
            n => Some(self.conf_sum[i] / T::of(n as f64)),
        }
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.rows).flat_map(move |r| (0..self.cols).map(move |c| Cell::new(c, r)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridCluster {
    pub cells: BTreeSet<Cell>,
}

impl GridCluster {
    pub fn area(&self) -> usize {
        self.cells.len()
    }
}

/// Convex ROI polygon, counter-clockwise, plus the grid size it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct RoiPolygon<T> {
    pub vertices: Vec<Point2<T>>,
    pub grid_size: T,
}

impl<T: Scalar> RoiPolygon<T> {
    pub fn contains(&self, pt: Point2<T>) -> bool {
        point_in_convex(&self.vertices, pt)
    }
}

fn median<T: Scalar>(mut v: Vec<T>) -> T {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / T::of(2.0)
    }
}

/// `max(median(widths), median(heights))` over every detection.
pub fn compute_grid_size<T: Scalar>(d: &DetectionSet<T>) -> Result<T> {
    if d.records.is_empty() {
        return Err(Error::EmptyDetections);
    }
    let w = median(d.records.iter().map(|r| r.bbox.w).collect());
    let h = median(d.records.iter().map(|r| r.bbox.h).collect());
    Ok(w.max(h))
}

pub fn accumulate_grid<T: Scalar>(d: &DetectionSet<T>, grid_size: T) -> GridField<T> {
    let mut g = GridField::empty(d.frame_geometry, grid_size);
    for r in &d.records {
        g.add(r.center(), r.confidence);
    }
    g
}

/// Cells whose average confidence is strictly above `lambda2`.
pub fn select_cells<T: Scalar>(g: &GridField<T>, p: &HyperParams) -> BTreeSet<Cell> {
    let thr = T::of(p.lambda2);
    g.cells().filter(|&c| g.cell_avg_conf(c).is_some_and(|v| v > thr)).collect()
}

/// 8-connected components, ordered by their smallest (row, col) cell.
pub fn cluster_cells(cells: &BTreeSet<Cell>) -> Vec<GridCluster> {
    let mut seen: BTreeSet<Cell> = BTreeSet::new();
    let mut out = Vec::new();
    // BTreeSet iteration is (row, col) ascending, so each new component's
    // seed is its minimum.
    for &start in cells {
        if seen.contains(&start) {
            continue;
        }
        let mut comp = BTreeSet::new();
        let mut stack = vec![start];
        seen.insert(start);
        while let Some(c) = stack.pop() {
            comp.insert(c);
            for n in c.neighbors() {
                if cells.contains(&n) && seen.insert(n) {
                    stack.push(n);
                }
            }
        }
        out.push(GridCluster { cells: comp });
    }
    out
}

/// Drops clusters whose area is strictly under `lambda3` times the mean area.
pub fn remove_outlier_clusters(clusters: Vec<GridCluster>, p: &HyperParams) -> Vec<GridCluster> {
    if clusters.is_empty() {
        return clusters;
    }
    let mean = clusters.iter().map(|c| c.area() as f64).sum::<f64>() / clusters.len() as f64;
    let min_area = p.lambda3 * mean;
    clusters.into_iter().filter(|c| c.area() as f64 >= min_area).collect()
}

/// Cells of a cluster with at least one 8-neighbor outside it.
pub fn boundary_cells(cluster: &GridCluster) -> impl Iterator<Item = Cell> + '_ {
    cluster.cells.iter().copied().filter(|&c| {
        let (col, row) = (c.col as isize, c.row as isize);
        (-1isize..=1).any(|dr| {
            (-1isize..=1).any(|dc| {
                let (x, y) = (col + dc, row + dr);
                (dc, dr) != (0, 0) && (x < 0 || y < 0 || !cluster.cells.contains(&Cell::new(x as usize, y as usize)))
            })
        })
    })
}

/// Pixel corners of a cell, clamped to the frame.
pub fn cell_corners<T: Scalar>(c: Cell, grid_size: T, geom: FrameGeometry) -> [Point2<T>; 4] {
    let (w, h) = (T::of(geom.width as f64), T::of(geom.height as f64));
    let xs = |i: usize| (T::of(i as f64) * grid_size).min(w);
    let ys = |i: usize| (T::of(i as f64) * grid_size).min(h);
    let (x0, x1, y0, y1) = (xs(c.col), xs(c.col + 1), ys(c.row), ys(c.row + 1));
    [Point2::new(x0, y0), Point2::new(x1, y0), Point2::new(x1, y1), Point2::new(x0, y1)]
}

fn hull_of_cells<T: Scalar>(
    cells: impl Iterator<Item = Cell>,
    grid_size: T,
    geom: FrameGeometry,
) -> Result<RoiPolygon<T>> {
    let pts: Vec<Point2<T>> = cells.flat_map(|c| cell_corners(c, grid_size, geom)).collect();
    let vertices = convex_hull_exact(&pts);
    if vertices.len() < 3 {
        return Err(Error::EmptyRoi);
    }
    Ok(RoiPolygon { vertices, grid_size })
}

/// One convex hull over the boundary cells of every cluster.
pub fn aggregate_to_roi<T: Scalar>(
    clusters: &[GridCluster],
    grid_size: T,
    geom: FrameGeometry,
) -> Result<RoiPolygon<T>> {
    hull_of_cells(clusters.iter().flat_map(boundary_cells), grid_size, geom)
}

/// Same hull computed from every cell instead of boundary cells only.
pub fn aggregate_all_cells<T: Scalar>(
    clusters: &[GridCluster],
    grid_size: T,
    geom: FrameGeometry,
) -> Result<RoiPolygon<T>> {
    hull_of_cells(clusters.iter().flat_map(|c| c.cells.iter().copied()), grid_size, geom)
}

pub fn point_in_roi<T: Scalar>(roi: &RoiPolygon<T>, pt: Point2<T>) -> bool {
    roi.contains(pt)
}

/// Intermediate products of [`estimate_roi`], kept for rendering and tests.
#[derive(Debug, Clone)]
pub struct RoiEstimate<T> {
    pub grid: GridField<T>,
    pub selected: BTreeSet<Cell>,
    pub clusters: Vec<GridCluster>,
    pub retained: Vec<GridCluster>,
    pub roi: RoiPolygon<T>,
}

pub fn estimate_roi<T: Scalar>(d: &DetectionSet<T>, p: &HyperParams) -> Result<RoiEstimate<T>> {
    let grid_size = compute_grid_size(d)?;
    let grid = accumulate_grid(d, grid_size);
    let selected = select_cells(&grid, p);
    let clusters = cluster_cells(&selected);
    let retained = remove_outlier_clusters(clusters.clone(), p);
    if retained.is_empty() {
        return Err(Error::EmptyRoi);
    }
    let roi = aggregate_to_roi(&retained, grid_size, d.frame_geometry)?;
    Ok(RoiEstimate { grid, selected, clusters, retained, roi })
}
