//! The narrowed cube family: the core `O₁ = [-1,1]^d`, then each dyadic shell
//! `Q_N = O_{2N} \ O_N` cut into dyadic sub-cubes of side `N^{-a}`, with a
//! smooth partition of unity `ψⱼ` and projectors `□ⱼ`.
//!
//! Each cube carries a separable cutoff `ψ̃ⱼ(ξ) = Π_i ramp(ξ_i)` equal to 1 on
//! the closed cube and falling to 0 over a collar of width `fraction · side`
//! (quintic smoothstep), so `ψ̃ⱼ` vanishes outside the doubled cube whenever
//! `fraction ≤ 1/2`. Frequencies beyond `|ξ|_∞ > 2 N_max` go to one residual
//! cutoff `1 − Π_i ρ(ξ_i)`. Dividing by `Σⱼ ψ̃ⱼ` gives `Σⱼ ψⱼ = 1` on the
//! whole lattice.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::spectral::{smoothstep, GridSpec, Representation, SpectralField, MAX_DIM};
use crate::summation;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionConfig {
    pub dim: usize,
    /// Regularity index; only enters the regime flag.
    pub s: f64,
    pub a: u32,
    pub n_max: u32,
    #[serde(default = "default_fraction")]
    pub mollify_fraction: f64,
    /// Floor the sub-cube side at the lattice spacing instead of failing.
    #[serde(default)]
    pub resolution_floor: bool,
}

fn default_fraction() -> f64 {
    0.25
}

impl PartitionConfig {
    pub fn new(dim: usize, s: f64, a: u32, n_max: u32) -> Self {
        Self {
            dim,
            s,
            a,
            n_max,
            mollify_fraction: default_fraction(),
            resolution_floor: false,
        }
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        if self.dim != grid.dim {
            return Err(Error::Config(format!(
                "partition dimension {} does not match grid dimension {}",
                self.dim, grid.dim
            )));
        }
        if self.a < 1 {
            return Err(Error::Config("cube exponent a must be >= 1".into()));
        }
        if self.n_max < 1 || !self.n_max.is_power_of_two() {
            return Err(Error::Config(format!(
                "n_max must be a power of two >= 1, got {}",
                self.n_max
            )));
        }
        if !(self.mollify_fraction > 0.0 && self.mollify_fraction <= 0.5) {
            return Err(Error::Config(format!(
                "mollify_fraction must lie in (0, 1/2], got {}",
                self.mollify_fraction
            )));
        }
        let top = 2.0 * self.n_max as f64;
        if top > grid.nyquist() {
            return Err(Error::Config(format!(
                "2*n_max = {top} exceeds grid Nyquist frequency {}",
                grid.nyquist()
            )));
        }
        Ok(())
    }

    /// Whether `a` satisfies the parameter range of the construction
    /// (`a > max{3−4s, 1−2s, 10}`; in 4D `a > max{1−2s, 10}`).
    pub fn asymptotic_regime(&self) -> bool {
        let a = self.a as f64;
        let s = self.s;
        if self.dim == 4 {
            a > (1.0 - 2.0 * s).max(10.0)
        } else {
            a > (3.0 - 4.0 * s).max(1.0 - 2.0 * s).max(10.0)
        }
    }
}

/// `(2^d − 1) N^{d(a+1)}`: sub-cubes of one shell per closed orthant.
pub fn formula_count(dim: usize, a: u32, n: u32) -> u64 {
    ((1u64 << dim) - 1) * (n as u64).pow(dim as u32 * (a + 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Shell {
    Core,
    Dyadic(u32),
    Residual,
}

#[derive(Debug, Clone)]
pub struct CubeCutoff {
    pub index: usize,
    pub shell: Shell,
    pub center: [f64; MAX_DIM],
    /// Half the side length; infinite for the residual cutoff.
    pub half_side: f64,
    /// `(flat lattice index, ψⱼ)` for every lattice point with `ψⱼ > 0`.
    pub support: Vec<(usize, f64)>,
}

impl CubeCutoff {
    /// Lattice points where `ψⱼ = 1` exactly.
    pub fn plateau(&self) -> impl Iterator<Item = usize> + '_ {
        self.support
            .iter()
            .filter(|(_, v)| *v == 1.0)
            .map(|(i, _)| *i)
    }
}

#[derive(Debug, Clone)]
pub struct FrequencyPartition {
    config: PartitionConfig,
    grid: GridSpec,
    cubes: Vec<CubeCutoff>,
    shells: BTreeMap<u32, Range<usize>>,
    sides: BTreeMap<u32, f64>,
    floored: bool,
}

/// 1D cutoff: 1 on `[lo, hi]`, smoothstep collars of width `w` outside.
#[inline]
fn ramp(x: f64, lo: f64, hi: f64, w: f64) -> f64 {
    if x < lo {
        smoothstep((x - (lo - w)) / w)
    } else if x > hi {
        smoothstep(((hi + w) - x) / w)
    } else {
        1.0
    }
}

/// Lattice wavenumbers `k` (signed) with `k·dk` in `[lo, hi]`, clipped to the grid.
fn lattice_range(grid: &GridSpec, lo: f64, hi: f64) -> Range<i64> {
    let dk = grid.dk();
    let half = grid.points as i64 / 2;
    let kmin = ((lo / dk).ceil() as i64).max(-half);
    let kmax = ((hi / dk).floor() as i64).min(half - 1);
    kmin..(kmax + 1).max(kmin)
}

/// Unnormalized separable cutoff for the box `[lo_i, hi_i]` with collar `w`.
fn box_cutoff(grid: &GridSpec, lo: &[f64], hi: &[f64], w: f64) -> Vec<(usize, f64)> {
    let dim = grid.dim;
    let dk = grid.dk();
    let axes: Vec<Vec<(usize, f64)>> = (0..dim)
        .map(|i| {
            lattice_range(grid, lo[i] - w, hi[i] + w)
                .filter_map(|k| {
                    let v = ramp(k as f64 * dk, lo[i], hi[i], w);
                    (v > 0.0).then(|| (grid.index_of_wavenumber(k), v))
                })
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    if axes.iter().any(Vec::is_empty) {
        return out;
    }
    let mut cursor = [0usize; MAX_DIM];
    loop {
        let mut idx = [0usize; MAX_DIM];
        let mut value = 1.0;
        for a in 0..dim {
            let (i, v) = axes[a][cursor[a]];
            idx[a] = i;
            value *= v;
        }
        out.push((grid.ravel(&idx), value));
        let mut a = dim;
        loop {
            if a == 0 {
                return out;
            }
            a -= 1;
            cursor[a] += 1;
            if cursor[a] < axes[a].len() {
                break;
            }
            cursor[a] = 0;
        }
    }
}

impl FrequencyPartition {
    pub fn build(config: PartitionConfig, grid: GridSpec) -> Result<Self> {
        grid.validate()?;
        config.validate(&grid)?;
        let dim = grid.dim;
        let dk = grid.dk();
        let fraction = config.mollify_fraction;

        let mut raw: Vec<(Shell, [f64; MAX_DIM], f64, Vec<(usize, f64)>)> = Vec::new();
        let mut shells = BTreeMap::new();
        let mut sides = BTreeMap::new();
        let mut floored = false;

        // Core O₁.
        let core_lo = vec![-1.0; dim];
        let core_hi = vec![1.0; dim];
        raw.push((
            Shell::Core,
            [0.0; MAX_DIM],
            1.0,
            box_cutoff(&grid, &core_lo, &core_hi, fraction * 2.0),
        ));

        let mut n = 1u32;
        let mut last_side = 1.0;
        while n <= config.n_max {
            let nf = n as f64;
            let mut side = nf.powi(-(config.a as i32));
            if side < dk {
                if !config.resolution_floor {
                    return Err(Error::Resolution(format!(
                        "sub-cube side {side} of shell {n} is below the lattice spacing {dk}"
                    )));
                }
                side = (2f64).powi(dk.log2().ceil() as i32).min(nf);
                floored = true;
            }
            sides.insert(n, side);
            last_side = side;
            let per_axis = (4.0 * nf / side).round() as i64;
            let inner = (nf / side).round() as i64;
            let start = raw.len();
            let mut c = [0i64; MAX_DIM];
            for a in 0..dim {
                c[a] = -per_axis / 2;
            }
            loop {
                let inside_core = c[..dim].iter().all(|&ci| ci >= -inner && ci < inner);
                if !inside_core {
                    let lo: Vec<f64> = c[..dim].iter().map(|&ci| ci as f64 * side).collect();
                    let hi: Vec<f64> = lo.iter().map(|l| l + side).collect();
                    let mut center = [0.0; MAX_DIM];
                    for a in 0..dim {
                        center[a] = lo[a] + side / 2.0;
                    }
                    let support = box_cutoff(&grid, &lo, &hi, fraction * side);
                    raw.push((Shell::Dyadic(n), center, side / 2.0, support));
                }
                // Lexicographic advance, last axis fastest.
                let mut a = dim;
                let done = loop {
                    if a == 0 {
                        break true;
                    }
                    a -= 1;
                    c[a] += 1;
                    if c[a] < per_axis / 2 {
                        break false;
                    }
                    c[a] = -per_axis / 2;
                };
                if done {
                    break;
                }
            }
            shells.insert(n, start..raw.len());
            n *= 2;
        }

        // Residual cutoff above 2·n_max.
        let top = 2.0 * config.n_max as f64;
        let w_out = fraction * last_side;
        let rho_axes: Vec<f64> = (0..grid.points)
            .map(|i| ramp(grid.wavenumber(i) as f64 * dk, -top, top, w_out))
            .collect();
        let residual: Vec<(usize, f64)> = (0..grid.len())
            .filter_map(|flat| {
                let idx = grid.unravel(flat);
                let prod: f64 = idx[..dim].iter().map(|&i| rho_axes[i]).product();
                let v = 1.0 - prod;
                (v > 0.0).then_some((flat, v))
            })
            .collect();
        raw.push((Shell::Residual, [0.0; MAX_DIM], f64::INFINITY, residual));

        let mut denom = vec![summation::NeumaierSum::new(); grid.len()];
        for (_, _, _, support) in &raw {
            for &(i, v) in support {
                denom[i].add(v);
            }
        }
        let denom: Vec<f64> = denom.iter().map(|s| s.value()).collect();
        if let Some(i) = denom.iter().position(|&d| d <= 0.0) {
            return Err(Error::Internal(format!(
                "lattice point {i} is not covered by any cutoff"
            )));
        }

        let cubes = raw
            .into_iter()
            .enumerate()
            .map(|(index, (shell, center, half_side, support))| CubeCutoff {
                index,
                shell,
                center,
                half_side,
                support: support
                    .into_iter()
                    .map(|(i, v)| (i, if v == denom[i] { 1.0 } else { v / denom[i] }))
                    .collect(),
            })
            .collect();

        Ok(Self {
            config,
            grid,
            cubes,
            shells,
            sides,
            floored,
        })
    }

    pub fn config(&self) -> &PartitionConfig {
        &self.config
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    pub fn cubes(&self) -> &[CubeCutoff] {
        &self.cubes
    }

    pub fn cube(&self, j: usize) -> Result<&CubeCutoff> {
        self.cubes.get(j).ok_or(Error::IndexOutOfRange {
            index: j,
            len: self.cubes.len(),
        })
    }

    /// Whether any shell side was raised to the lattice spacing.
    pub fn floored(&self) -> bool {
        self.floored
    }

    pub fn shells(&self) -> impl Iterator<Item = u32> + '_ {
        self.shells.keys().copied()
    }

    pub fn shell_cubes(&self, n: u32) -> Option<Range<usize>> {
        self.shells.get(&n).cloned()
    }

    /// Effective sub-cube side used for shell `n`.
    pub fn shell_side(&self, n: u32) -> Option<f64> {
        self.sides.get(&n).copied()
    }

    /// Total number of sub-cubes in shell `n` (all orthants).
    pub fn shell_count(&self, n: u32) -> usize {
        self.shells.get(&n).map_or(0, |r| r.len())
    }

    /// Sub-cubes of shell `n` inside one closed orthant; this is the count the
    /// `(2^d − 1) N^{d(a+1)}` formula describes.
    pub fn shell_count_per_orthant(&self, n: u32) -> usize {
        self.shell_count(n) >> self.grid.dim
    }

    /// `Σⱼ ψⱼ` at every lattice point.
    pub fn unity_sum(&self) -> Vec<f64> {
        let mut acc = vec![summation::NeumaierSum::new(); self.grid.len()];
        for cube in &self.cubes {
            for &(i, v) in &cube.support {
                acc[i].add(v);
            }
        }
        acc.iter().map(|s| s.value()).collect()
    }

    /// `Σⱼ ψⱼ²` at every lattice point.
    pub fn square_sum(&self) -> Vec<f64> {
        let mut acc = vec![summation::NeumaierSum::new(); self.grid.len()];
        for cube in &self.cubes {
            for &(i, v) in &cube.support {
                acc[i].add(v * v);
            }
        }
        acc.iter().map(|s| s.value()).collect()
    }

    /// Number of cutoffs with `ψⱼ > 0` at every lattice point.
    pub fn overlap_counts(&self) -> Vec<u32> {
        let mut counts = vec![0u32; self.grid.len()];
        for cube in &self.cubes {
            for &(i, _) in &cube.support {
                counts[i] += 1;
            }
        }
        counts
    }

    /// Measured overlap bound `κ_d`.
    pub fn max_overlap(&self) -> u32 {
        self.overlap_counts().into_iter().max().unwrap_or(0)
    }

    /// Lattice points with `|ξ|_∞ ≤ 2 N_max`.
    pub fn is_covered(&self, flat: usize) -> bool {
        let top = 2.0 * self.config.n_max as f64;
        self.grid.frequency(flat)[..self.grid.dim]
            .iter()
            .all(|x| x.abs() <= top)
    }

    /// `max |Σⱼ ψⱼ − 1|` over the covered lattice.
    pub fn unity_deviation(&self) -> f64 {
        self.unity_sum()
            .iter()
            .enumerate()
            .filter(|(i, _)| self.is_covered(*i))
            .map(|(_, s)| (s - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `□ⱼ f`, returned in `f`'s representation.
    pub fn project_cube(&self, f: &SpectralField, j: usize) -> Result<SpectralField> {
        if *f.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        let cube = self.cube(j)?;
        let freq = f.clone().into_frequency();
        let mut out = SpectralField::zeros(self.grid, Representation::Frequency);
        let data = out.data_mut();
        for &(i, v) in &cube.support {
            data[i] = freq.data()[i] * v;
        }
        Ok(out.into_representation(f.representation()))
    }

    /// `‖□ⱼ f‖²_{L²}` for every `j`, computed on the frequency side.
    pub fn projected_energies(&self, f: &SpectralField) -> Result<Vec<f64>> {
        if *f.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        let freq = f.clone().into_frequency();
        let scale = self.grid.cell_volume() / self.grid.len() as f64;
        Ok(self
            .cubes
            .iter()
            .map(|cube| {
                scale
                    * summation::sum(
                        cube.support
                            .iter()
                            .map(|&(i, v)| v * v * freq.data()[i].norm_sqr()),
                    )
            })
            .collect())
    }
}

/// Result of a Bernstein scaling fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BernsteinFit {
    pub shells: Vec<u32>,
    /// Mean of `log₂(‖□ⱼf‖_{L^q} / ‖□ⱼf‖_{L^p})` per shell.
    pub log2_ratios: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    /// `−a d (1/p − 1/q)`.
    pub predicted: f64,
}

/// Least-squares line through `(x, y)`; returns `(slope, intercept, r²)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InsufficientData("need at least two points to fit".into()));
    }
    let n = x.len() as f64;
    let mx = summation::sum(x.iter().copied()) / n;
    let my = summation::sum(y.iter().copied()) / n;
    let sxx = summation::sum(x.iter().map(|a| (a - mx) * (a - mx)));
    let sxy = summation::sum(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)));
    let syy = summation::sum(y.iter().map(|b| (b - my) * (b - my)));
    if sxx == 0.0 {
        return Err(Error::Degenerate("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok((slope, intercept, r2))
}

/// Fit the exponent in `‖□ⱼf‖_{L^q} ≲ N^{−ad(1/p−1/q)} ‖□ⱼf‖_{L^p}`.
///
/// Probes are coherent: `f̂ = ψⱼ · A(ξ) · e^{−iξ·x₀}` with random positive
/// amplitudes `A` and a random lattice centre `x₀`, for `probes_per_shell`
/// cubes drawn at random from each listed shell. Coherent phases make the
/// `L^∞` norm attain its volume scaling; random phases would only add a
/// logarithmic factor.
pub fn bernstein_exponent(
    partition: &FrequencyPartition,
    shells: &[u32],
    probes_per_shell: usize,
    p: f64,
    q: f64,
    seed: u64,
) -> Result<BernsteinFit> {
    if !(2.0 <= p && p <= q) {
        return Err(Error::InvalidArgument(format!("need 2 <= p <= q, got p={p}, q={q}")));
    }
    let usable: Vec<u32> = shells
        .iter()
        .copied()
        .filter(|&n| partition.shell_count(n) > 0)
        .collect();
    if usable.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "need at least 3 populated shells, got {}",
            usable.len()
        )));
    }
    let grid = *partition.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut log2_ratios = Vec::with_capacity(usable.len());
    for &n in &usable {
        let range = partition.shell_cubes(n).expect("populated shell");
        let mut acc = summation::NeumaierSum::new();
        for _ in 0..probes_per_shell.max(1) {
            let j = rng.gen_range(range.clone());
            let x0 = rng.gen_range(0..grid.len());
            let x0_idx = grid.unravel(x0);
            let cube = partition.cube(j)?;
            let mut field = SpectralField::zeros(grid, Representation::Frequency);
            let data = field.data_mut();
            for &(i, v) in &cube.support {
                let k = grid.unravel(i);
                let phase: f64 = (0..grid.dim)
                    .map(|a| {
                        -2.0 * std::f64::consts::PI * (k[a] * x0_idx[a]) as f64
                            / grid.points as f64
                    })
                    .sum();
                let amp = rng.gen_range(0.5..1.5);
                data[i] = Complex64::from_polar(v * amp, phase);
            }
            let phys = field.into_physical();
            let lq = crate::spectral::spatial_norm(&phys, q);
            let lp = crate::spectral::spatial_norm(&phys, p);
            acc.add((lq / lp).log2());
        }
        log2_ratios.push(acc.value() / probes_per_shell.max(1) as f64);
    }
    let x: Vec<f64> = usable.iter().map(|&n| (n as f64).log2()).collect();
    let (slope, intercept, _) = linear_fit(&x, &log2_ratios)?;
    let inv = |e: f64| if e.is_infinite() { 0.0 } else { 1.0 / e };
    let predicted = -(partition.config().a as f64) * grid.dim as f64 * (inv(p) - inv(q));
    Ok(BernsteinFit {
        shells: usable,
        log2_ratios,
        slope,
        intercept,
        predicted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn formula_matches_hand_counts() {
        assert_eq!(formula_count(1, 1, 2), 4);
        assert_eq!(formula_count(3, 1, 1), 7);
        assert_eq!(formula_count(2, 1, 2), 48);
        assert_eq!(formula_count(1, 2, 2), 8);
    }

    #[test]
    fn one_dimensional_shell_counts() {
        let grid = GridSpec::new(1, 64, 4.0 * PI).unwrap();
        let p = FrequencyPartition::build(PartitionConfig::new(1, 0.0, 1, 2), grid).unwrap();
        // Q_1 = [-2,-1) ∪ (1,2], unit cubes; Q_2 = [-4,-2) ∪ (2,4], half-unit cubes.
        assert_eq!(p.shell_count(1), 2);
        assert_eq!(p.shell_count(2), 8);
        assert_eq!(p.shell_count_per_orthant(2), 4);
        assert_eq!(p.cubes()[0].shell, Shell::Core);
        assert_eq!(p.cubes().last().unwrap().shell, Shell::Residual);
    }

    #[test]
    fn cutoffs_vanish_outside_doubled_cube() {
        let grid = GridSpec::new(2, 64, 2.0 * PI).unwrap();
        let p = FrequencyPartition::build(PartitionConfig::new(2, 0.0, 1, 2), grid).unwrap();
        for cube in p.cubes().iter().filter(|c| c.shell != Shell::Residual) {
            for &(i, v) in &cube.support {
                assert!(v > 0.0 && v <= 1.0);
                let xi = grid.frequency(i);
                for a in 0..2 {
                    assert!((xi[a] - cube.center[a]).abs() <= 2.0 * cube.half_side + 1e-12);
                }
            }
        }
        assert!(p.unity_deviation() < 1e-12);
    }

    #[test]
    fn resolution_error_and_floor() {
        let grid = GridSpec::new(1, 16, PI).unwrap();
        let cfg = PartitionConfig::new(1, 0.0, 2, 2);
        assert!(matches!(
            FrequencyPartition::build(cfg, grid),
            Err(Error::Resolution(_))
        ));
        let floored = PartitionConfig {
            resolution_floor: true,
            ..cfg
        };
        let p = FrequencyPartition::build(floored, grid).unwrap();
        assert!(p.floored());
        assert_eq!(p.shell_side(2), Some(1.0));
        assert!(p.unity_deviation() < 1e-12);
    }

    #[test]
    fn regime_flag() {
        let mut cfg = PartitionConfig::new(3, -0.5, 11, 1);
        assert!(cfg.asymptotic_regime());
        cfg.s = -3.0;
        assert!(!cfg.asymptotic_regime());
        cfg.a = 1;
        assert!(!cfg.asymptotic_regime());
    }

    #[test]
    fn linear_fit_exact_line() {
        let (m, c, r2) = linear_fit(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap();
        assert!((m - 2.0).abs() < 1e-14 && (c - 1.0).abs() < 1e-14 && (r2 - 1.0).abs() < 1e-14);
    }
}
