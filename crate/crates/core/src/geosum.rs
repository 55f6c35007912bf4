//! Strip and quadrant aggregates answering region queries in constant time.
//!
//! For a border column `c` the strips are the photos strictly left/right of
//! it; for a border row `l`, strictly below/above it. Quadrants at `(c, l)`
//! use strict inequalities on both axes. The time of a rectangle is then
//!
//! ```text
//! T(r) = T(P) - left(c<) - right(c>) - below(l_lo) - above(l_hi)
//!        + Q1(c>, l_hi) + Q2(c<, l_hi) + Q3(c<, l_lo) + Q4(c>, l_lo)
//! ```
//!
//! and the same identity holds for counts and per-holder data. All strips and
//! quadrants are read off one 2D prefix table per quantity.

use std::ops::{Add, Sub};

use thiserror::Error;

use crate::model::{DroneId, Instance, Rect};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GeoError {
    #[error("unknown drone {0}")]
    UnknownDrone(DroneId),
}

/// `sum[i * (rows + 1) + j]` is the total over columns `< i` and rows `< j`.
#[derive(Debug, Clone)]
struct Prefix<T> {
    rows: usize,
    sum: Vec<T>,
}

impl<T> Prefix<T>
where
    T: Copy + Default + Add<Output = T> + Sub<Output = T>,
{
    fn from_cells(cols: usize, rows: usize, cells: &[T]) -> Self {
        let stride = rows + 1;
        let mut sum = vec![T::default(); (cols + 1) * stride];
        for i in 0..cols {
            for j in 0..rows {
                sum[(i + 1) * stride + j + 1] = cells[i * rows + j] + sum[i * stride + j + 1]
                    + sum[(i + 1) * stride + j]
                    - sum[i * stride + j];
            }
        }
        Self { rows, sum }
    }

    #[inline]
    fn at(&self, col_end: usize, row_end: usize) -> T {
        self.sum[col_end * (self.rows + 1) + row_end]
    }

    /// Total over columns `c0..c1` and rows `l0..l1` (half-open).
    #[inline]
    fn block(&self, c0: usize, c1: usize, l0: usize, l1: usize) -> T {
        self.at(c1, l1) - self.at(c0, l1) - self.at(c1, l0) + self.at(c0, l0)
    }
}

/// Strip and quadrant views of one quantity.
#[derive(Debug, Clone)]
pub struct Layer<T> {
    cols: usize,
    rows: usize,
    prefix: Prefix<T>,
}

impl<T> Layer<T>
where
    T: Copy + Default + Add<Output = T> + Sub<Output = T>,
{
    fn new(cols: usize, rows: usize, cells: &[T]) -> Self {
        Self {
            cols,
            rows,
            prefix: Prefix::from_cells(cols, rows, cells),
        }
    }

    pub fn total(&self) -> T {
        self.prefix.at(self.cols, self.rows)
    }

    /// Photos with longitude strictly left of column `c`.
    pub fn left(&self, c: usize) -> T {
        self.prefix.block(0, c, 0, self.rows)
    }

    /// Photos with longitude strictly right of column `c`.
    pub fn right(&self, c: usize) -> T {
        self.prefix.block(c + 1, self.cols, 0, self.rows)
    }

    /// Photos with latitude strictly below row `l`.
    pub fn below(&self, l: usize) -> T {
        self.prefix.block(0, self.cols, 0, l)
    }

    /// Photos with latitude strictly above row `l`.
    pub fn above(&self, l: usize) -> T {
        self.prefix.block(0, self.cols, l + 1, self.rows)
    }

    /// Quadrant `q` (1..=4, counter-clockwise from upper right) around `(c, l)`.
    pub fn quadrant(&self, q: u8, c: usize, l: usize) -> T {
        let p = &self.prefix;
        match q {
            1 => p.block(c + 1, self.cols, l + 1, self.rows),
            2 => p.block(0, c, l + 1, self.rows),
            3 => p.block(0, c, 0, l),
            4 => p.block(c + 1, self.cols, 0, l),
            _ => panic!("quadrant index must be 1..=4, got {q}"),
        }
    }

    #[inline]
    pub fn region(&self, r: &Rect) -> T {
        self.total() - self.left(r.c_lt) - self.right(r.c_gt) - self.below(r.l_lo)
            - self.above(r.l_hi)
            + self.quadrant(1, r.c_gt, r.l_hi)
            + self.quadrant(2, r.c_lt, r.l_hi)
            + self.quadrant(3, r.c_lt, r.l_lo)
            + self.quadrant(4, r.c_gt, r.l_lo)
    }
}

#[derive(Debug, Clone)]
pub struct GeoSums {
    cols: usize,
    rows: usize,
    time: Layer<f64>,
    count: Layer<i64>,
    /// Indexed by dense drone index.
    data: Vec<Layer<f64>>,
    drone_ids: Vec<DroneId>,
    occupied_cells: usize,
}

impl GeoSums {
    pub fn build(inst: &Instance) -> Self {
        let cols = inst.lngs().len();
        let rows = inst.lats().len();
        let n = cols * rows;
        let mut time = vec![0.0; n];
        let mut count = vec![0i64; n];
        let mut data = vec![vec![0.0; n]; inst.drones().len()];
        for ((photo, &(c, l)), holders) in inst
            .photos()
            .iter()
            .zip(inst.cells())
            .zip(inst.holder_indices())
        {
            let cell = c * rows + l;
            time[cell] += photo.lambda;
            count[cell] += 1;
            for &h in holders {
                data[h][cell] += photo.mu;
            }
        }
        let occupied_cells = count.iter().filter(|&&k| k > 0).count();
        Self {
            cols,
            rows,
            time: Layer::new(cols, rows, &time),
            count: Layer::new(cols, rows, &count),
            data: data.iter().map(|d| Layer::new(cols, rows, d)).collect(),
            drone_ids: inst.drones().iter().map(|d| d.id).collect(),
            occupied_cells,
        }
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of distinct photo coordinates.
    pub fn occupied_cells(&self) -> usize {
        self.occupied_cells
    }

    pub fn time(&self) -> &Layer<f64> {
        &self.time
    }

    pub fn count(&self) -> &Layer<i64> {
        &self.count
    }

    pub fn total_time(&self) -> f64 {
        self.time.total()
    }

    pub fn total_count(&self) -> usize {
        self.count.total() as usize
    }

    pub fn data(&self, holder: DroneId) -> Result<&Layer<f64>, GeoError> {
        let idx = self
            .drone_ids
            .binary_search(&holder)
            .map_err(|_| GeoError::UnknownDrone(holder))?;
        Ok(&self.data[idx])
    }

    #[inline]
    pub fn region_time(&self, r: &Rect) -> f64 {
        self.time.region(r)
    }

    #[inline]
    pub fn region_count(&self, r: &Rect) -> usize {
        self.count.region(r) as usize
    }

    pub fn region_data(&self, holder: DroneId, r: &Rect) -> Result<f64, GeoError> {
        Ok(self.data(holder)?.region(r))
    }

    /// Same as [`GeoSums::region_data`] with the holder given by dense index.
    #[inline]
    pub fn region_data_by_index(&self, holder: usize, r: &Rect) -> f64 {
        self.data[holder].region(r)
    }
}
