//! Deterministic initial data and the high-low split of randomized samples.

use num_complex::Complex64;
use rnls_core::partition::FrequencyPartition;
use rnls_core::randomization::{coefficient, draw};
use rnls_core::spectral::{littlewood_paley, GridSpec, LpProjector, SpectralField};

use crate::config::{DataConfig, Profile};
use crate::HarnessError;

fn component(v: &[f64], i: usize) -> f64 {
    v.get(i).copied().unwrap_or(0.0)
}

/// The deterministic datum `f` described by `cfg`.
pub fn initial_datum(grid: GridSpec, cfg: &DataConfig) -> SpectralField {
    let d = grid.dim;
    let envelope = move |x: &[f64]| {
        let r2: f64 = (0..d).map(|i| (x[i] - component(&cfg.center, i)).powi(2)).sum();
        (-r2 / (2.0 * cfg.width * cfg.width)).exp()
    };
    match cfg.profile {
        Profile::Gaussian => {
            SpectralField::from_physical_fn(grid, |x| Complex64::new(cfg.amplitude * envelope(x), 0.0))
        }
        Profile::Packet => SpectralField::from_physical_fn(grid, |x| {
            let phase: f64 = (0..d).map(|i| component(&cfg.wavevector, i) * x[i]).sum();
            Complex64::from_polar(cfg.amplitude * envelope(x), phase)
        }),
        Profile::Rough => {
            // Unit-modulus random phases on every mode, weighted by ⟨ξ⟩^{−(d/2+s)}.
            let decay = -(d as f64 / 2.0 + cfg.sobolev) / 2.0;
            let hat: Vec<Complex64> = (0..grid.len())
                .map(|i| {
                    let k2: f64 = grid.frequency(i)[..d].iter().map(|k| k * k).sum();
                    let g = coefficient(cfg.phase_seed, i as u64);
                    let unit = if g.norm() > 0.0 { g / g.norm() } else { Complex64::new(1.0, 0.0) };
                    unit * (1.0 + k2).powf(decay)
                })
                .collect();
            let rough = SpectralField::from_vec(grid, hat, rnls_core::spectral::Representation::Frequency)
                .expect("length matches grid")
                .into_physical();
            let mut out = rough;
            for (i, z) in out.data_mut().iter_mut().enumerate() {
                *z *= envelope(&grid.position(i)[..d]);
            }
            let peak = out.max_abs();
            if peak > 0.0 {
                out = out.scaled(Complex64::new(cfg.amplitude / peak, 0.0));
            }
            out
        }
    }
}

/// A randomized sample split as `f^ω = w0 + v0` with `v0 = P_{≥N₀} f^ω`.
pub struct Split {
    pub sample: SpectralField,
    pub v0: SpectralField,
    pub w0: SpectralField,
}

pub fn randomized_split(
    f: &SpectralField,
    partition: &FrequencyPartition,
    seed: u64,
    randomize: bool,
    n0: f64,
) -> Result<Split, HarnessError> {
    let sample = if randomize {
        draw(f, partition, seed)?.field.into_physical()
    } else {
        f.clone().into_physical()
    };
    let v0 = littlewood_paley(&sample, LpProjector::High(n0))?.into_physical();
    let w0 = sample.sub(&v0)?;
    Ok(Split { sample, v0, w0 })
}
