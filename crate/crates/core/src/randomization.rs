//! Seeded Gaussian randomization `f^ω = Σⱼ gⱼ □ⱼ f` and Monte-Carlo tail and
//! moment statistics.
//!
//! `gⱼ = (X + iY)/√2` with `X, Y` independent standard normals, so
//! `E|gⱼ|² = 1`. Each coefficient comes from a ChaCha8 stream keyed by the
//! master seed with stream id `j`, so `gⱼ` does not depend on how many cubes
//! exist or in which order they are visited. Coefficients are not truncated.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::partition::{linear_fit, FrequencyPartition};
use crate::spectral::{Representation, SpectralField};
use crate::summation;

/// Standard complex Gaussian for cube `j` under master seed `seed`.
pub fn coefficient(seed: u64, j: u64) -> Complex64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(j);
    let re: f64 = StandardNormal.sample(&mut rng);
    let im: f64 = StandardNormal.sample(&mut rng);
    Complex64::new(re, im) * FRAC_1_SQRT_2
}

/// SplitMix64 finalizer; derives per-sample seeds from a master seed.
pub fn derive_seed(master: u64, k: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(k.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct RandomizationDraw {
    pub seed: u64,
    pub coefficients: Vec<Complex64>,
    pub field: SpectralField,
}

/// `f^ω = Σⱼ gⱼ □ⱼ f`, returned in `f`'s representation.
pub fn draw(f: &SpectralField, partition: &FrequencyPartition, seed: u64) -> Result<RandomizationDraw> {
    if f.grid() != partition.grid() {
        return Err(Error::GridMismatch);
    }
    let coefficients: Vec<Complex64> = (0..partition.len() as u64)
        .map(|j| coefficient(seed, j))
        .collect();
    let field = apply_coefficients(f, partition, &coefficients)?;
    Ok(RandomizationDraw {
        seed,
        coefficients,
        field,
    })
}

/// `Σⱼ cⱼ □ⱼ f` for an arbitrary coefficient vector.
pub fn apply_coefficients(
    f: &SpectralField,
    partition: &FrequencyPartition,
    coefficients: &[Complex64],
) -> Result<SpectralField> {
    if coefficients.len() != partition.len() {
        return Err(Error::InvalidArgument(format!(
            "{} coefficients for {} cubes",
            coefficients.len(),
            partition.len()
        )));
    }
    let grid = *partition.grid();
    let freq = f.clone().into_frequency();
    // Per-point multiplier Σⱼ cⱼψⱼ(ξ), accumulated in cube order.
    let mut re = vec![summation::NeumaierSum::new(); grid.len()];
    let mut im = vec![summation::NeumaierSum::new(); grid.len()];
    for (cube, c) in partition.cubes().iter().zip(coefficients) {
        for &(i, v) in &cube.support {
            re[i].add(c.re * v);
            im[i].add(c.im * v);
        }
    }
    let data = freq
        .data()
        .iter()
        .enumerate()
        .map(|(i, z)| z * Complex64::new(re[i].value(), im[i].value()))
        .collect();
    Ok(SpectralField::from_vec(grid, data, Representation::Frequency)?
        .into_representation(f.representation()))
}

/// `(□ⱼ f)(x)` at lattice point `x` for every cube `j`: the chaos coefficients
/// of `f^ω(x)`.
pub fn pointwise_coefficients(
    f: &SpectralField,
    partition: &FrequencyPartition,
    x: usize,
) -> Result<Vec<Complex64>> {
    let grid = *partition.grid();
    if *f.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let freq = f.clone().into_frequency();
    let xi = grid.unravel(x);
    let m = grid.points as f64;
    let norm = 1.0 / grid.len() as f64;
    Ok(partition
        .cubes()
        .iter()
        .map(|cube| {
            summation::sum_complex(cube.support.iter().map(|&(i, v)| {
                let k = grid.unravel(i);
                let phase: f64 = (0..grid.dim)
                    .map(|a| 2.0 * std::f64::consts::PI * (k[a] * xi[a]) as f64 / m)
                    .sum();
                freq.data()[i] * Complex64::from_polar(v * norm, phase)
            }))
        })
        .collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub p: f64,
    pub n_samples: usize,
    /// `(E|Σ cₙ gₙ|^p)^{1/p}`.
    pub moment: f64,
    /// `moment / (√p ‖c‖_{ℓ²})`.
    pub ratio: f64,
}

/// Monte-Carlo `p`-th moment of the scalar chaos `Σ cₙ gₙ`.
pub fn moment_estimate(
    coefficients: &[Complex64],
    p: f64,
    n_samples: usize,
    seed: u64,
) -> Result<MomentEstimate> {
    if !(p >= 2.0) {
        return Err(Error::InvalidArgument(format!("moment order p = {p} must be >= 2")));
    }
    if n_samples < 100 {
        return Err(Error::InsufficientData(format!(
            "moment estimate needs at least 100 samples, got {n_samples}"
        )));
    }
    let powers: Vec<f64> = chaos_samples(coefficients, n_samples, seed)
        .into_iter()
        .map(|x| x.norm().powf(p))
        .collect();
    let moment = (summation::sum(powers) / n_samples as f64).powf(1.0 / p);
    let l2 = summation::sum(coefficients.iter().map(|c| c.norm_sqr())).sqrt();
    Ok(MomentEstimate {
        p,
        n_samples,
        moment,
        ratio: moment / (p.sqrt() * l2),
    })
}

/// Samples of `Σ cₙ gₙ(ω_k)` with `ω_k` seeded by `derive_seed(seed, k)`.
pub fn chaos_samples(coefficients: &[Complex64], n_samples: usize, seed: u64) -> Vec<Complex64> {
    (0..n_samples as u64)
        .into_par_iter()
        .map(|k| {
            let s = derive_seed(seed, k);
            summation::sum_complex(
                coefficients
                    .iter()
                    .enumerate()
                    .map(|(n, c)| c * coefficient(s, n as u64)),
            )
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailReport {
    pub n_samples: usize,
    pub lambdas: Vec<f64>,
    pub exceedance: Vec<f64>,
    /// 95% Wilson score interval per level.
    pub wilson_low: Vec<f64>,
    pub wilson_high: Vec<f64>,
    /// Fitted `c` in `P(|F| > λ) ≈ C exp(−cλ²)`.
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

fn wilson(successes: usize, n: usize) -> (f64, f64) {
    let z = 1.959_963_984_540_054;
    let n = n as f64;
    let phat = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (phat + z * z / (2.0 * n)) / denom;
    let half = z * (phat * (1.0 - phat) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Default λ grid: empirical quantiles at 20 survival levels spaced
/// geometrically from 1/4 down to `10/n`.
pub fn default_lambdas(sorted_abs: &[f64]) -> Vec<f64> {
    let n = sorted_abs.len();
    let hi = 0.25f64;
    let lo = (10.0 / n as f64).min(hi);
    let count = 20;
    (0..count)
        .map(|k| {
            let level = hi * (lo / hi).powf(k as f64 / (count - 1) as f64);
            let rank = ((1.0 - level) * n as f64).floor() as usize;
            sorted_abs[rank.min(n - 1)]
        })
        .collect()
}

/// Least-squares fit of `log P(|F| > λ)` against `λ²`.
pub fn tail_fit(samples: &[f64], lambdas: Option<&[f64]>) -> Result<TailReport> {
    let n = samples.len();
    if n < 200 {
        return Err(Error::InsufficientData(format!(
            "tail fit needs at least 200 samples, got {n}"
        )));
    }
    let mut sorted: Vec<f64> = samples.iter().map(|x| x.abs()).collect();
    sorted.sort_by(f64::total_cmp);
    let spread = sorted[n - 1] - sorted[0];
    if !(spread > 1e-12 * sorted[n - 1].abs().max(f64::MIN_POSITIVE)) {
        return Err(Error::Degenerate("samples are constant".into()));
    }
    let grid = match lambdas {
        Some(l) => l.to_vec(),
        None => default_lambdas(&sorted),
    };
    let mut lam = Vec::new();
    let mut exc = Vec::new();
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    for &l in &grid {
        let above = n - sorted.partition_point(|&x| x <= l);
        if above == 0 || above == n {
            continue;
        }
        if lam.last() == Some(&l) {
            continue;
        }
        let (wl, wh) = wilson(above, n);
        lam.push(l);
        exc.push(above as f64 / n as f64);
        lo.push(wl);
        hi.push(wh);
    }
    if lam.len() < 3 {
        return Err(Error::Degenerate(
            "fewer than three distinct usable tail levels".into(),
        ));
    }
    let x: Vec<f64> = lam.iter().map(|l| l * l).collect();
    let y: Vec<f64> = exc.iter().map(|p| p.ln()).collect();
    let (slope, intercept, r_squared) = linear_fit(&x, &y)?;
    Ok(TailReport {
        n_samples: n,
        lambdas: lam,
        exceedance: exc,
        wilson_low: lo,
        wilson_high: hi,
        rate: -slope,
        intercept,
        r_squared,
    })
}
