use num_complex::Complex64;
use rustfft::FftDirection;
use serde::{Deserialize, Serialize};

use super::fft;
use super::grid::{GridSpec, MAX_DIM};
use crate::error::{Error, Result};
use crate::summation;

/// Which side of the transform the samples live on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Representation {
    Physical,
    Frequency,
}

impl Representation {
    pub fn tag(self) -> u8 {
        match self {
            Representation::Physical => 0,
            Representation::Frequency => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Representation::Physical),
            1 => Some(Representation::Frequency),
            _ => None,
        }
    }
}

/// Complex grid function in either physical or frequency representation.
///
/// Frequency samples are raw DFT coefficients `F(k) = Σ_x f(x) e^{-2πi k·n/M}`.
/// The continuum transform `f̂(ξ) = ∫ e^{-ix·ξ} f(x) dx` is approximated by
/// `Δx^d (-1)^{k_1+…+k_d} F(k)` (the sign accounts for the box origin at `-L`),
/// and Parseval reads `Σ|f|² Δx^d = Σ|F|² Δx^d / M^d = Σ|f̂|² Δξ^d / (2π)^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: GridSpec,
    data: Vec<Complex64>,
    repr: Representation,
}

impl SpectralField {
    pub fn zeros(grid: GridSpec, repr: Representation) -> Self {
        Self {
            grid,
            data: vec![Complex64::default(); grid.len()],
            repr,
        }
    }

    pub fn from_vec(grid: GridSpec, data: Vec<Complex64>, repr: Representation) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} samples, got {}",
                grid.len(),
                data.len()
            )));
        }
        Ok(Self { grid, data, repr })
    }

    /// Samples `f(x)` at every lattice point.
    pub fn from_physical_fn<F>(grid: GridSpec, f: F) -> Self
    where
        F: Fn(&[f64]) -> Complex64,
    {
        let data = (0..grid.len())
            .map(|i| f(&grid.position(i)[..grid.dim]))
            .collect();
        Self {
            grid,
            data,
            repr: Representation::Physical,
        }
    }

    /// Raw DFT coefficients given as a function of the frequency vector.
    pub fn from_frequency_fn<F>(grid: GridSpec, f: F) -> Self
    where
        F: Fn(&[f64]) -> Complex64,
    {
        let data = (0..grid.len())
            .map(|i| f(&grid.frequency(i)[..grid.dim]))
            .collect();
        Self {
            grid,
            data,
            repr: Representation::Frequency,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn representation(&self) -> Representation {
        self.repr
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    /// Physical → frequency. Fails if the field is already in frequency form.
    pub fn to_frequency(self) -> Result<Self> {
        self.expect(Representation::Physical)?;
        Ok(self.into_frequency())
    }

    /// Frequency → physical. Fails if the field is already physical.
    pub fn to_physical(self) -> Result<Self> {
        self.expect(Representation::Frequency)?;
        Ok(self.into_physical())
    }

    /// Frequency representation, transforming only if needed.
    pub fn into_frequency(mut self) -> Self {
        if self.repr == Representation::Physical {
            fft::transform(
                &mut self.data,
                self.grid.points,
                self.grid.dim,
                FftDirection::Forward,
            );
            self.repr = Representation::Frequency;
        }
        self
    }

    /// Physical representation, transforming only if needed.
    pub fn into_physical(mut self) -> Self {
        if self.repr == Representation::Frequency {
            fft::transform(
                &mut self.data,
                self.grid.points,
                self.grid.dim,
                FftDirection::Inverse,
            );
            self.repr = Representation::Physical;
        }
        self
    }

    pub fn into_representation(self, repr: Representation) -> Self {
        match repr {
            Representation::Physical => self.into_physical(),
            Representation::Frequency => self.into_frequency(),
        }
    }

    pub fn expect(&self, repr: Representation) -> Result<()> {
        if self.repr != repr {
            return Err(Error::Representation {
                expected: repr,
                found: self.repr,
            });
        }
        Ok(())
    }

    pub fn check_same_grid(&self, other: &SpectralField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// `Σ|f|²Δx^d`, evaluated on whichever side the samples live.
    pub fn l2_norm_squared(&self) -> f64 {
        let raw = summation::sum(self.data.iter().map(|z| z.norm_sqr()));
        match self.repr {
            Representation::Physical => raw * self.grid.cell_volume(),
            Representation::Frequency => raw * self.grid.cell_volume() / self.grid.len() as f64,
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_squared().sqrt()
    }

    /// Lattice maximum of `|f|`; transforms a copy if needed.
    pub fn max_abs(&self) -> f64 {
        match self.repr {
            Representation::Physical => self.data.iter().map(|z| z.norm()).fold(0.0, f64::max),
            Representation::Frequency => self.clone().into_physical().max_abs(),
        }
    }

    /// Continuum Fourier transform approximation `f̂(ξ)` at each lattice
    /// frequency (FFT order).
    pub fn continuum_transform(&self) -> Vec<Complex64> {
        let freq = self.clone().into_frequency();
        let vol = self.grid.cell_volume();
        (0..self.grid.len())
            .map(|i| {
                let idx = self.grid.unravel(i);
                let parity: i64 = idx[..self.grid.dim]
                    .iter()
                    .map(|&k| self.grid.wavenumber(k))
                    .sum();
                let sign = if parity.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                freq.data[i] * (sign * vol)
            })
            .collect()
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|z| *z *= factor);
        out
    }

    /// `α·self + β·other`, in `self`'s representation.
    pub fn linear_combination(
        &self,
        alpha: Complex64,
        other: &SpectralField,
        beta: Complex64,
    ) -> Result<Self> {
        self.check_same_grid(other)?;
        let other = other.clone().into_representation(self.repr);
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        Ok(Self {
            grid: self.grid,
            data,
            repr: self.repr,
        })
    }

    pub fn add(&self, other: &SpectralField) -> Result<Self> {
        self.linear_combination(Complex64::new(1.0, 0.0), other, Complex64::new(1.0, 0.0))
    }

    pub fn sub(&self, other: &SpectralField) -> Result<Self> {
        self.linear_combination(Complex64::new(1.0, 0.0), other, Complex64::new(-1.0, 0.0))
    }

    /// Multiply frequency samples by `symbol(ξ)`; returns the result in the
    /// input's representation.
    pub fn apply_symbol<F>(&self, symbol: F) -> Self
    where
        F: Fn(&[f64; MAX_DIM]) -> Complex64,
    {
        let repr = self.repr;
        let mut freq = self.clone().into_frequency();
        let grid = freq.grid;
        for (i, z) in freq.data.iter_mut().enumerate() {
            *z *= symbol(&grid.frequency(i));
        }
        freq.into_representation(repr)
    }

    /// Multiply frequency samples by a real function of `|ξ|²`.
    pub fn apply_radial_symbol<F>(&self, symbol: F) -> Self
    where
        F: Fn(f64) -> Complex64,
    {
        let repr = self.repr;
        let mut freq = self.clone().into_frequency();
        let xi2 = freq.grid.frequency_squared();
        for (z, &k2) in freq.data.iter_mut().zip(&xi2) {
            *z *= symbol(k2);
        }
        freq.into_representation(repr)
    }
}
