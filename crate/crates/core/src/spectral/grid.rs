use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 4;

/// Uniform periodic grid on the box `[-L, L)^d`.
///
/// Samples are stored row-major with axis 0 slowest. The frequency lattice is
/// `(π/L)·{-M/2, …, M/2-1}^d`, laid out in FFT order along each axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    pub points: usize,
    pub half_width: f64,
}

impl GridSpec {
    pub fn new(dim: usize, points: usize, half_width: f64) -> Result<Self> {
        let grid = Self {
            dim,
            points,
            half_width,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_DIM).contains(&self.dim) {
            return Err(Error::InvalidGrid(format!(
                "dimension {} outside 1..={MAX_DIM}",
                self.dim
            )));
        }
        if self.points < 8 || !self.points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be a power of two >= 8, got {}",
                self.points
            )));
        }
        if !(self.half_width.is_finite() && self.half_width > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "box half-width must be positive, got {}",
                self.half_width
            )));
        }
        Ok(())
    }

    /// Total number of lattice points, `M^d`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    /// Frequency lattice spacing `π/L`.
    pub fn dk(&self) -> f64 {
        PI / self.half_width
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(self.dim as i32)
    }

    pub fn box_volume(&self) -> f64 {
        (2.0 * self.half_width).powi(self.dim as i32)
    }

    /// `πM/(2L)`, the largest representable frequency per axis.
    pub fn nyquist(&self) -> f64 {
        PI * self.points as f64 / (2.0 * self.half_width)
    }

    /// Signed integer wavenumber of FFT-ordered index `i` along one axis.
    #[inline]
    pub fn wavenumber(&self, i: usize) -> i64 {
        let m = self.points as i64;
        let i = i as i64;
        if i < m / 2 {
            i
        } else {
            i - m
        }
    }

    /// FFT-ordered index of signed wavenumber `k` (must lie in `-M/2..M/2`).
    #[inline]
    pub fn index_of_wavenumber(&self, k: i64) -> usize {
        let m = self.points as i64;
        k.rem_euclid(m) as usize
    }

    #[inline]
    pub fn unravel(&self, mut flat: usize) -> [usize; MAX_DIM] {
        let mut out = [0usize; MAX_DIM];
        for axis in (0..self.dim).rev() {
            out[axis] = flat % self.points;
            flat /= self.points;
        }
        out
    }

    #[inline]
    pub fn ravel(&self, multi: &[usize]) -> usize {
        multi[..self.dim]
            .iter()
            .fold(0usize, |acc, &i| acc * self.points + i)
    }

    /// Physical coordinates of lattice point `flat`.
    #[inline]
    pub fn position(&self, flat: usize) -> [f64; MAX_DIM] {
        let idx = self.unravel(flat);
        let mut x = [0.0; MAX_DIM];
        for a in 0..self.dim {
            x[a] = -self.half_width + idx[a] as f64 * self.dx();
        }
        x
    }

    /// Frequency vector of FFT-ordered lattice point `flat`.
    #[inline]
    pub fn frequency(&self, flat: usize) -> [f64; MAX_DIM] {
        let idx = self.unravel(flat);
        let dk = self.dk();
        let mut xi = [0.0; MAX_DIM];
        for a in 0..self.dim {
            xi[a] = self.wavenumber(idx[a]) as f64 * dk;
        }
        xi
    }

    /// `|ξ|²` for every frequency lattice point, FFT order.
    pub fn frequency_squared(&self) -> Vec<f64> {
        let dk2 = self.dk() * self.dk();
        let per_axis: Vec<f64> = (0..self.points)
            .map(|i| {
                let k = self.wavenumber(i) as f64;
                k * k * dk2
            })
            .collect();
        let mut out = vec![0.0; self.len()];
        for (flat, slot) in out.iter_mut().enumerate() {
            let idx = self.unravel(flat);
            *slot = idx[..self.dim].iter().map(|&i| per_axis[i]).sum();
        }
        out
    }

    /// Minimum-image displacement of lattice offset `flat` (as a vector of
    /// index differences mapped into `[-L, L)`).
    #[inline]
    pub fn periodic_offset(&self, flat: usize) -> [f64; MAX_DIM] {
        let idx = self.unravel(flat);
        let dx = self.dx();
        let mut z = [0.0; MAX_DIM];
        for a in 0..self.dim {
            z[a] = self.wavenumber(idx[a]) as f64 * dx;
        }
        z
    }
}
