//! Uniform periodic spatial grid and its momentum-space companion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct SpatialGrid {
    n_points: usize,
    x_min: f64,
    x_max: f64,
    dx: f64,
}

#[derive(Serialize, Deserialize)]
struct GridSpec {
    n_points: usize,
    x_min: f64,
    x_max: f64,
}

impl TryFrom<GridSpec> for SpatialGrid {
    type Error = Error;
    fn try_from(s: GridSpec) -> Result<Self> {
        SpatialGrid::new(s.n_points, s.x_min, s.x_max)
    }
}

impl From<SpatialGrid> for GridSpec {
    fn from(g: SpatialGrid) -> Self {
        GridSpec {
            n_points: g.n_points,
            x_min: g.x_min,
            x_max: g.x_max,
        }
    }
}

impl SpatialGrid {
    /// `n_points` samples starting at `x_min` with spacing `(x_max - x_min) / n_points`.
    /// The point `x_max` itself is the periodic image of `x_min` and is not sampled.
    pub fn new(n_points: usize, x_min: f64, x_max: f64) -> Result<Self> {
        if n_points < 2 || !n_points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n_points = {n_points} is not a power of two >= 2"
            )));
        }
        if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
            return Err(Error::InvalidGrid(format!(
                "need x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        Ok(SpatialGrid {
            n_points,
            x_min,
            x_max,
            dx: (x_max - x_min) / n_points as f64,
        })
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dx
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.x(j)).collect()
    }

    /// Angular wavenumbers in standard DFT ordering: 0, 1, ..., n/2-1, -n/2, ..., -1
    /// in units of 2π/L.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.n_points;
        let dk = 2.0 * std::f64::consts::PI / self.length();
        (0..n)
            .map(|j| {
                let m = if j < n / 2 { j as isize } else { j as isize - n as isize };
                m as f64 * dk
            })
            .collect()
    }

    /// Index of the grid point closest to `x`, clamped to the grid.
    pub fn nearest_index(&self, x: f64) -> usize {
        let j = ((x - self.x_min) / self.dx).round();
        j.clamp(0.0, (self.n_points - 1) as f64) as usize
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min && x <= self.x_max
    }

    pub fn same_as(&self, other: &SpatialGrid) -> bool {
        self.n_points == other.n_points
            && (self.x_min - other.x_min).abs() <= 1e-12 * self.x_min.abs().max(1.0)
            && (self.x_max - other.x_max).abs() <= 1e-12 * self.x_max.abs().max(1.0)
    }

    pub fn check_same(&self, other: &SpatialGrid) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{} points on [{}, {}] vs {} points on [{}, {}]",
                self.n_points, self.x_min, self.x_max, other.n_points, other.x_min, other.x_max
            )))
        }
    }
}
