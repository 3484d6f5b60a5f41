#![allow(dead_code)]

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rnls_core::spectral::{GridSpec, Representation, SpectralField};

/// Physical-space field with i.i.d. uniform entries in the unit square.
pub fn random_field(grid: GridSpec, seed: u64) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..grid.len())
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    SpectralField::from_vec(grid, data, Representation::Physical).unwrap()
}

/// Random field with spectrum confined to `|ξ|∞ ≤ kmax`.
pub fn random_band_limited(grid: GridSpec, kmax: f64, seed: u64) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..grid.len())
        .map(|i| {
            let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let xi = grid.frequency(i);
            if xi[..grid.dim].iter().all(|k| k.abs() <= kmax) {
                z
            } else {
                Complex64::default()
            }
        })
        .collect();
    SpectralField::from_vec(grid, data, Representation::Frequency).unwrap()
}

pub fn max_diff(a: &SpectralField, b: &SpectralField) -> f64 {
    a.sub(b).unwrap().max_abs()
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
