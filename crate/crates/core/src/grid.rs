//! Uniform product grids used to discretize states and per-agent actions.

use crate::{Error, Result};

/// Uniformly spaced grid over `[lo, hi]^dims`.
///
/// The same point set is used along every dimension; a flat index
/// enumerates the cartesian product in row-major order (first dimension
/// varies slowest). With `dims == 1` this is just a sorted point list.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Vec<f64>,
    dims: usize,
}

impl Grid {
    /// Builds a grid of `points_per_dim` values spanning `[lo, hi]` in each
    /// of `dims` dimensions. Spacing is uniform and points are strictly
    /// increasing; fewer than two points or an empty span is a config error.
    pub fn new(lo: f64, hi: f64, points_per_dim: usize, dims: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::Config(format!(
                "grid bounds must be finite (got [{lo}, {hi}])"
            )));
        }
        if hi <= lo {
            return Err(Error::Config(format!(
                "grid upper bound must exceed lower bound (got [{lo}, {hi}])"
            )));
        }
        if points_per_dim < 2 {
            return Err(Error::Config(format!(
                "grid needs at least 2 points per dimension (got {points_per_dim})"
            )));
        }
        if dims == 0 {
            return Err(Error::Config("grid dims must be >= 1".into()));
        }
        let step = (hi - lo) / (points_per_dim - 1) as f64;
        let mut points: Vec<f64> = (0..points_per_dim).map(|i| lo + step * i as f64).collect();
        // Land exactly on the bound so nearest-point lookups at `hi` are exact.
        *points.last_mut().unwrap() = hi;
        Ok(Grid { points, dims })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    /// Point values along one dimension.
    pub fn axis(&self) -> &[f64] {
        &self.points
    }

    pub fn spacing(&self) -> f64 {
        self.points[1] - self.points[0]
    }

    /// Number of flat indices (`points_per_dim ^ dims`).
    pub fn len(&self) -> usize {
        self.points.len().pow(self.dims as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Smallest nonzero coordinate magnitude on the axis, if any.
    pub fn min_positive_magnitude(&self) -> Option<f64> {
        self.points
            .iter()
            .map(|p| p.abs())
            .filter(|m| *m > 0.0)
            .fold(None, |acc, m| Some(acc.map_or(m, |a: f64| a.min(m))))
    }

    /// Coordinates of a flat index.
    pub fn point(&self, idx: usize) -> Vec<f64> {
        debug_assert!(idx < self.len());
        let n = self.points.len();
        let mut rem = idx;
        let mut out = vec![0.0; self.dims];
        for d in (0..self.dims).rev() {
            out[d] = self.points[rem % n];
            rem /= n;
        }
        out
    }

    /// Flat index of the grid point nearest to `coords` (ties round down).
    pub fn nearest(&self, coords: &[f64]) -> usize {
        debug_assert_eq!(coords.len(), self.dims);
        let n = self.points.len();
        let lo = self.points[0];
        let step = self.spacing();
        let mut idx = 0usize;
        for &c in coords {
            let raw = ((c - lo) / step).round();
            let i = (raw.max(0.0) as usize).min(n - 1);
            idx = idx * n + i;
        }
        idx
    }

    /// Whether `coords` coincides with a grid point to within `tol` per axis.
    pub fn contains_point(&self, coords: &[f64], tol: f64) -> bool {
        if coords.len() != self.dims {
            return false;
        }
        let snapped = self.point(self.nearest(coords));
        coords
            .iter()
            .zip(&snapped)
            .all(|(c, s)| (c - s).abs() <= tol)
    }
}
