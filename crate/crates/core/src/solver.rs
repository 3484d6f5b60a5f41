//! Strang split-step integrator for `i∂ₜu + Δu = μ|u|^p u` and for the forced
//! remainder equation `i∂ₜw + Δw = μ|v + w|^p (v + w)` with `v = e^{itΔ}v₀`.
//!
//! One step of size `dt` from time `t`:
//!
//! 1. `ŵ ← e^{−i(dt/2)|ξ|²} ŵ`
//! 2. with `v_mid = e^{i(t+dt/2)Δ} v₀` evaluated exactly, set `u = w + v_mid`,
//!    rotate `u ← u e^{−i dt μ|u|^p}` (exact, since `|u|` is invariant under
//!    `i∂ₜu = μ|u|^p u`), and recover `w = u − v_mid`
//! 3. optional 2/3-rule truncation of `ŵ`
//! 4. `ŵ ← e^{−i(dt/2)|ξ|²} ŵ`
//!
//! With `v₀ = 0` the forced stepper performs exactly the arithmetic of the
//! full-equation stepper.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::linear_fit;
use crate::spectral::{
    dealias, fractional_derivative, free_propagate, DerivativeKind, GridSpec, Representation,
    SpectralField, Trajectory,
};
use crate::summation;

fn default_mu() -> f64 {
    1.0
}

fn default_blowup() -> f64 {
    1e6
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub dim: usize,
    /// Nonlinearity power; defaults to the energy-critical `4/(d−2)`.
    #[serde(default)]
    pub power: Option<f64>,
    #[serde(default = "default_mu")]
    pub mu: f64,
    pub dt: f64,
    pub t_final: f64,
    /// Steps between stored snapshots.
    pub snapshot_stride: usize,
    /// High-low split frequency.
    #[serde(default = "one")]
    pub n0: f64,
    /// Abort once `max|u|` exceeds this multiple of its initial value.
    #[serde(default = "default_blowup")]
    pub blowup_factor: f64,
    #[serde(default = "default_true")]
    pub dealias: bool,
}

fn one() -> f64 {
    1.0
}

impl SolverConfig {
    pub fn new(dim: usize, dt: f64, t_final: f64, snapshot_stride: usize) -> Self {
        Self {
            dim,
            power: None,
            mu: 1.0,
            dt,
            t_final,
            snapshot_stride,
            n0: 1.0,
            blowup_factor: default_blowup(),
            dealias: true,
        }
    }

    pub fn power(&self) -> Result<f64> {
        match self.power {
            Some(p) if p > 0.0 && p.is_finite() => Ok(p),
            Some(p) => Err(Error::Config(format!("nonlinearity power must be positive, got {p}"))),
            None if self.dim > 2 => Ok(4.0 / (self.dim as f64 - 2.0)),
            None => Err(Error::Config(format!(
                "no energy-critical power in dimension {}; set `power`",
                self.dim
            ))),
        }
    }

    pub fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::Config(format!("t_final must be >= 0, got {}", self.t_final)));
        }
        let n = (self.t_final / self.dt).round();
        if (n * self.dt - self.t_final).abs() > 1e-9 * self.t_final.max(self.dt) {
            return Err(Error::Config(format!(
                "t_final = {} is not a multiple of dt = {}",
                self.t_final, self.dt
            )));
        }
        Ok(n as usize)
    }

    pub fn validate(&self) -> Result<()> {
        self.power()?;
        let n = self.steps()?;
        if self.snapshot_stride == 0 || n % self.snapshot_stride != 0 {
            return Err(Error::Config(format!(
                "snapshot_stride = {} must be positive and divide the step count {n}",
                self.snapshot_stride
            )));
        }
        if !(self.blowup_factor > 1.0) {
            return Err(Error::Config("blowup_factor must exceed 1".into()));
        }
        Ok(())
    }
}

#[inline]
fn abs_pow(z: Complex64, p: f64) -> f64 {
    let r2 = z.norm_sqr();
    if p == 4.0 {
        r2 * r2
    } else if p == 2.0 {
        r2
    } else {
        r2.powf(p / 2.0)
    }
}

/// `|z|^p z`.
#[inline]
pub fn nonlinearity(z: Complex64, p: f64) -> Complex64 {
    z * abs_pow(z, p)
}

/// Reusable Strang stepper on a fixed grid.
pub struct Stepper {
    grid: GridSpec,
    dt: f64,
    power: f64,
    mu: f64,
    dealias: bool,
    half_kinetic: Vec<Complex64>,
    xi2: Vec<f64>,
    v0: Option<SpectralField>,
}

impl Stepper {
    pub fn new(grid: GridSpec, dt: f64, power: f64, mu: f64, dealias: bool) -> Self {
        let xi2 = grid.frequency_squared();
        let half_kinetic = xi2
            .iter()
            .map(|k2| Complex64::from_polar(1.0, -0.5 * dt * k2))
            .collect();
        Self {
            grid,
            dt,
            power,
            mu,
            dealias,
            half_kinetic,
            xi2,
            v0: None,
        }
    }

    /// Forcing by the free evolution of `v0`.
    pub fn with_forcing(mut self, v0: &SpectralField) -> Result<Self> {
        if *v0.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        self.v0 = Some(v0.clone().into_frequency());
        Ok(self)
    }

    fn free_at(&self, t: f64) -> Option<SpectralField> {
        self.v0.as_ref().map(|v0| {
            let mut out = v0.clone();
            for (z, k2) in out.data_mut().iter_mut().zip(&self.xi2) {
                *z *= Complex64::from_polar(1.0, -t * k2);
            }
            out.into_physical()
        })
    }

    /// Advance `w` (frequency representation) from `t` to `t + dt`; returns
    /// `max|u|` after the nonlinear substep.
    pub fn step(&self, w: &mut SpectralField, t: f64) -> Result<f64> {
        w.expect(Representation::Frequency)?;
        for (z, h) in w.data_mut().iter_mut().zip(&self.half_kinetic) {
            *z *= h;
        }
        let mut phys = std::mem::replace(w, SpectralField::zeros(self.grid, Representation::Physical))
            .into_physical();
        let v_mid = self.free_at(t + 0.5 * self.dt);
        let (p, mu, dt) = (self.power, self.mu, self.dt);
        let max_abs = match &v_mid {
            None => phys
                .data_mut()
                .par_iter_mut()
                .map(|u| {
                    *u *= Complex64::from_polar(1.0, -dt * mu * abs_pow(*u, p));
                    u.norm()
                })
                .reduce(|| 0.0, f64::max),
            Some(v) => phys
                .data_mut()
                .par_iter_mut()
                .zip(v.data().par_iter())
                .map(|(w, v)| {
                    let u = *w + v;
                    let rotated = u * Complex64::from_polar(1.0, -dt * mu * abs_pow(u, p));
                    *w = rotated - v;
                    rotated.norm()
                })
                .reduce(|| 0.0, f64::max),
        };
        let mut freq = phys.into_frequency();
        if self.dealias {
            dealias(&mut freq)?;
        }
        for (z, h) in freq.data_mut().iter_mut().zip(&self.half_kinetic) {
            *z *= h;
        }
        *w = freq;
        Ok(max_abs)
    }
}

/// One Strang step of the full equation; the result keeps `u`'s representation.
pub fn strang_step_full(u: &SpectralField, dt: f64, power: f64, mu: f64, dealias: bool) -> Result<SpectralField> {
    let stepper = Stepper::new(*u.grid(), dt, power, mu, dealias);
    let mut w = u.clone().into_frequency();
    stepper.step(&mut w, 0.0)?;
    Ok(w.into_representation(u.representation()))
}

/// `∫|w|²`.
pub fn mass(w: &SpectralField) -> f64 {
    w.l2_norm_squared()
}

/// `½∫|∇w|² + μ/(p+2) ∫|u|^{p+2}`.
pub fn energy(w: &SpectralField, u: &SpectralField, power: f64, mu: f64) -> f64 {
    let grid = w.grid();
    let w_hat = w.clone().into_frequency();
    let xi2 = grid.frequency_squared();
    let kinetic = summation::sum(w_hat.data().iter().zip(&xi2).map(|(z, k2)| k2 * z.norm_sqr()))
        * grid.cell_volume()
        / grid.len() as f64;
    let u_phys = u.clone().into_physical();
    let potential = summation::sum(u_phys.data().iter().map(|z| abs_pow(*z, power + 2.0)))
        * grid.cell_volume();
    0.5 * kinetic + mu / (power + 2.0) * potential
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConservationSeries {
    pub times: Vec<f64>,
    pub mass: Vec<f64>,
    pub energy: Vec<f64>,
}

impl ConservationSeries {
    pub fn from_trajectory(traj: &Trajectory, power: f64, mu: f64) -> Result<Self> {
        let w = traj.channel(crate::spectral::Channel::W)?;
        let u = traj.channel(crate::spectral::Channel::U)?;
        let pairs: Vec<(f64, f64)> = w
            .par_iter()
            .zip(u.par_iter())
            .map(|(w, u)| (mass(w), energy(w, u, power, mu)))
            .collect();
        Ok(Self {
            times: traj.times().to_vec(),
            mass: pairs.iter().map(|p| p.0).collect(),
            energy: pairs.iter().map(|p| p.1).collect(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct ForcedRun {
    pub trajectory: Trajectory,
    pub series: ConservationSeries,
    pub steps: usize,
}

/// Evolve `w` from `w0` under forcing `v = e^{itΔ}v0`; snapshots hold `u`, `v`, `w`.
pub fn solve_w(w0: &SpectralField, v0: &SpectralField, cfg: &SolverConfig) -> Result<ForcedRun> {
    cfg.validate()?;
    if w0.grid() != v0.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = *w0.grid();
    if grid.dim != cfg.dim {
        return Err(Error::Config(format!(
            "solver dimension {} does not match grid dimension {}",
            cfg.dim, grid.dim
        )));
    }
    let power = cfg.power()?;
    let steps = cfg.steps()?;
    let forced = v0.clone().into_frequency().data().iter().any(|z| *z != Complex64::default());
    let mut stepper = Stepper::new(grid, cfg.dt, power, cfg.mu, cfg.dealias);
    if forced {
        stepper = stepper.with_forcing(v0)?;
    }

    let v0_phys = v0.clone().into_physical();
    let w0_phys = w0.clone().into_physical();
    let initial_max = w0_phys
        .data()
        .iter()
        .zip(v0_phys.data())
        .map(|(a, b)| (a + b).norm())
        .fold(0.0, f64::max);
    let threshold = if initial_max > 0.0 {
        cfg.blowup_factor * initial_max
    } else {
        f64::INFINITY
    };

    let n_snap = steps / cfg.snapshot_stride + 1;
    let times: Vec<f64> = (0..n_snap)
        .map(|k| (k * cfg.snapshot_stride) as f64 * cfg.dt)
        .collect();
    let mut w_snaps = Vec::with_capacity(n_snap);
    w_snaps.push(w0_phys);
    let mut w = w0.clone().into_frequency();
    for n in 0..steps {
        let t = n as f64 * cfg.dt;
        let max_abs = stepper.step(&mut w, t)?;
        if !(max_abs <= threshold) {
            return Err(Error::Blowup {
                t: t + cfg.dt,
                max_abs,
                threshold,
            });
        }
        if (n + 1) % cfg.snapshot_stride == 0 {
            w_snaps.push(w.clone().into_physical());
        }
    }

    let v_snaps: Vec<SpectralField> = times
        .par_iter()
        .map(|&t| {
            if forced {
                free_propagate(v0, t).into_physical()
            } else {
                SpectralField::zeros(grid, Representation::Physical)
            }
        })
        .collect();
    let u_snaps = w_snaps
        .iter()
        .zip(&v_snaps)
        .map(|(w, v)| w.add(v))
        .collect::<Result<Vec<_>>>()?;
    for ((u, v), w) in u_snaps.iter().zip(&v_snaps).zip(&w_snaps) {
        let gap = u.sub(&v.add(w)?)?.max_abs();
        if gap > 1e-9 * u.max_abs().max(1.0) {
            return Err(Error::Internal(format!("u differs from v + w by {gap:e}")));
        }
    }

    let mut traj = Trajectory::new(grid, times)?;
    traj.insert_channel(crate::spectral::Channel::U, u_snaps)?;
    traj.insert_channel(crate::spectral::Channel::V, v_snaps)?;
    traj.insert_channel(crate::spectral::Channel::W, w_snaps)?;
    traj.provenance.dt = Some(cfg.dt);
    traj.provenance.snapshot_stride = Some(cfg.snapshot_stride as f64 * cfg.dt);
    let series = ConservationSeries::from_trajectory(&traj, power, cfg.mu)?;
    Ok(ForcedRun {
        trajectory: traj,
        series,
        steps,
    })
}

/// Unforced evolution of `u0` (the `v₀ = 0` case of [`solve_w`]).
pub fn solve_full(u0: &SpectralField, cfg: &SolverConfig) -> Result<ForcedRun> {
    let zero = SpectralField::zeros(*u0.grid(), Representation::Physical);
    solve_w(u0, &zero, cfg)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IncrementResiduals {
    /// Interior snapshot times.
    pub times: Vec<f64>,
    pub dmdt_fd: Vec<f64>,
    pub dmdt_id: Vec<f64>,
    pub r_mass: Vec<f64>,
    pub dedt_fd: Vec<f64>,
    pub dedt_id: Vec<f64>,
    pub r_energy: Vec<f64>,
    pub max_rel_mass: f64,
    pub max_rel_energy: f64,
}

/// Identity-predicted rates at one snapshot:
/// `dM/dt = 2 Im∫w̄(N(u) − N(w))`, `dE/dt = Im∫N(u)Δv̄`, with `N(z) = μ|z|^p z`.
pub fn identity_rates(u: &SpectralField, v: &SpectralField, w: &SpectralField, power: f64, mu: f64) -> (f64, f64) {
    let grid = *u.grid();
    let vol = grid.cell_volume();
    let u = u.clone().into_physical();
    let w = w.clone().into_physical();
    let lap_v = v
        .apply_radial_symbol(|k2| Complex64::new(-k2, 0.0))
        .into_physical();
    let dm = 2.0
        * vol
        * summation::sum(u.data().iter().zip(w.data()).map(|(u, w)| {
            (w.conj() * (nonlinearity(*u, power) - nonlinearity(*w, power)) * mu).im
        }));
    let de = vol
        * summation::sum(
            u.data()
                .iter()
                .zip(lap_v.data())
                .map(|(u, lv)| (nonlinearity(*u, power) * lv.conj() * mu).im),
        );
    (dm, de)
}

fn max_relative(residuals: &[f64], predicted: &[f64], observed: &[f64]) -> f64 {
    let max_abs = |xs: &[f64]| xs.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let scale = match max_abs(predicted) {
        s if s > 0.0 => s,
        _ => max_abs(observed),
    };
    let r = max_abs(residuals);
    if scale > 0.0 {
        r / scale
    } else {
        r
    }
}

/// Centered-difference check of the mass and energy increment identities.
///
/// Uses the five-point stencil when at least five snapshots exist, the
/// three-point one otherwise.
pub fn increment_residuals(
    traj: &Trajectory,
    series: &ConservationSeries,
    power: f64,
    mu: f64,
) -> Result<IncrementResiduals> {
    let k = traj.len();
    if k < 3 {
        return Err(Error::InsufficientData(format!(
            "increment residuals need at least 3 snapshots, got {k}"
        )));
    }
    let u = traj.channel(crate::spectral::Channel::U)?;
    let v = traj.channel(crate::spectral::Channel::V)?;
    let w = traj.channel(crate::spectral::Channel::W)?;
    let h = traj.stride();
    // Fourth-order stencil once there are two neighbours on each side.
    let reach = if k >= 5 { 2 } else { 1 };
    let interior: Vec<usize> = (reach..k - reach).collect();
    let rates: Vec<(f64, f64)> = interior
        .par_iter()
        .map(|&i| identity_rates(&u[i], &v[i], &w[i], power, mu))
        .collect();
    let derivative = |x: &[f64], i: usize| {
        if reach == 2 {
            (x[i - 2] - 8.0 * x[i - 1] + 8.0 * x[i + 1] - x[i + 2]) / (12.0 * h)
        } else {
            (x[i + 1] - x[i - 1]) / (2.0 * h)
        }
    };
    let dmdt_fd: Vec<f64> = interior.iter().map(|&i| derivative(&series.mass, i)).collect();
    let dedt_fd: Vec<f64> = interior.iter().map(|&i| derivative(&series.energy, i)).collect();
    let dmdt_id: Vec<f64> = rates.iter().map(|r| r.0).collect();
    let dedt_id: Vec<f64> = rates.iter().map(|r| r.1).collect();
    let r_mass: Vec<f64> = dmdt_fd.iter().zip(&dmdt_id).map(|(a, b)| a - b).collect();
    let r_energy: Vec<f64> = dedt_fd.iter().zip(&dedt_id).map(|(a, b)| a - b).collect();
    Ok(IncrementResiduals {
        times: interior.iter().map(|&i| traj.times()[i]).collect(),
        max_rel_mass: max_relative(&r_mass, &dmdt_id, &dmdt_fd),
        max_rel_energy: max_relative(&r_energy, &dedt_id, &dedt_fd),
        dmdt_fd,
        dmdt_id,
        r_mass,
        dedt_fd,
        dedt_id,
        r_energy,
    })
}

/// `‖f‖_{H¹} = ‖⟨∇⟩f‖_{L²}`.
pub fn h1_norm(f: &SpectralField) -> f64 {
    fractional_derivative(f, 1.0, DerivativeKind::Inhomogeneous).l2_norm()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TwinReport {
    pub alphas: Vec<f64>,
    /// `sup_t ‖w_α − w̃‖_{H¹}`; `None` where the run tripped the blowup guard.
    pub divergence: Vec<Option<f64>>,
    /// Log-log slope of `D` against `α` on the two smallest positive rungs.
    pub slope: Option<f64>,
    pub monotone: bool,
}

/// Compare forced runs with `v0` scaled by each `α` against the unforced run.
pub fn twin_run(w0: &SpectralField, v0: &SpectralField, cfg: &SolverConfig, alphas: &[f64]) -> Result<TwinReport> {
    let reference = solve_full(w0, cfg)?;
    let w_ref = reference.trajectory.channel(crate::spectral::Channel::W)?;
    let divergence: Vec<Option<f64>> = alphas
        .par_iter()
        .map(|&alpha| -> Result<Option<f64>> {
            let scaled = v0.scaled(Complex64::new(alpha, 0.0));
            match solve_w(w0, &scaled, cfg) {
                Ok(run) => {
                    let w = run.trajectory.channel(crate::spectral::Channel::W)?;
                    let d = w
                        .iter()
                        .zip(w_ref)
                        .map(|(a, b)| a.sub(b).map(|diff| h1_norm(&diff)))
                        .collect::<Result<Vec<_>>>()?;
                    Ok(Some(d.into_iter().fold(0.0, f64::max)))
                }
                Err(Error::Blowup { t, max_abs, .. }) => {
                    log::warn!("twin run alpha = {alpha} tripped the blowup guard at t = {t} (max|u| = {max_abs:e})");
                    Ok(None)
                }
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rungs: Vec<(f64, f64)> = alphas
        .iter()
        .zip(&divergence)
        .filter_map(|(&a, d)| d.filter(|&d| a > 0.0 && d > 0.0).map(|d| (a, d)))
        .collect();
    rungs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let slope = if rungs.len() >= 2 {
        let (a0, d0) = rungs[0];
        let (a1, d1) = rungs[1];
        Some((d1 / d0).ln() / (a1 / a0).ln())
    } else {
        None
    };
    let mut ordered: Vec<(f64, f64)> = alphas
        .iter()
        .zip(&divergence)
        .filter_map(|(&a, d)| d.map(|d| (a, d)))
        .collect();
    ordered.sort_by(|x, y| x.0.total_cmp(&y.0));
    let monotone = ordered.windows(2).all(|p| p[1].1 >= p[0].1);
    if !monotone {
        log::warn!("twin-run divergence is not monotone in the forcing amplitude");
    }
    Ok(TwinReport {
        alphas: alphas.to_vec(),
        divergence,
        slope,
        monotone,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlmostConservationReport {
    pub mass_bound: f64,
    pub energy_bound: f64,
    pub sup_mass: f64,
    pub sup_energy: f64,
    pub mass_ratio: f64,
    pub energy_ratio: f64,
    pub mass_ok: bool,
    pub energy_ok: bool,
}

/// Check `sup M ≤ 2A N₀^{−2s}` and `sup E ≤ 2A N₀^{2(1−s)}` given that the
/// initial values sit below `A N₀^{−2s}` and `A N₀^{2(1−s)}`.
pub fn almost_conservation_monitor(
    series: &ConservationSeries,
    a_const: f64,
    n0: f64,
    s: f64,
) -> Result<AlmostConservationReport> {
    if series.mass.is_empty() {
        return Err(Error::InsufficientData("empty conservation series".into()));
    }
    let m_cap = a_const * n0.powf(-2.0 * s);
    let e_cap = a_const * n0.powf(2.0 * (1.0 - s));
    let (m0, e0) = (series.mass[0], series.energy[0]);
    if m0 > m_cap {
        return Err(Error::Config(format!(
            "initial mass {m0:e} exceeds A*N0^(-2s) = {m_cap:e}"
        )));
    }
    if e0 > e_cap {
        return Err(Error::Config(format!(
            "initial energy {e0:e} exceeds A*N0^(2(1-s)) = {e_cap:e}"
        )));
    }
    let sup_mass = series.mass.iter().copied().fold(f64::MIN, f64::max);
    let sup_energy = series.energy.iter().copied().fold(f64::MIN, f64::max);
    let ratio = |sup: f64, init: f64| if init > 0.0 { sup / init } else if sup > 0.0 { f64::INFINITY } else { 1.0 };
    Ok(AlmostConservationReport {
        mass_bound: 2.0 * m_cap,
        energy_bound: 2.0 * e_cap,
        sup_mass,
        sup_energy,
        mass_ratio: ratio(sup_mass, m0),
        energy_ratio: ratio(sup_energy, e0),
        mass_ok: sup_mass <= 2.0 * m_cap,
        energy_ok: sup_energy <= 2.0 * e_cap,
    })
}

/// Precondition of the monitor: the forcing must live at `|ξ| ≥ N₀/2`.
/// Spectral mass below that radius beyond `1e−12` of the total is a
/// configuration error.
pub fn check_forcing_support(v0: &SpectralField, n0: f64) -> Result<()> {
    let grid = *v0.grid();
    let hat = v0.clone().into_frequency();
    let xi2 = grid.frequency_squared();
    let cut = 0.25 * n0 * n0;
    let total = summation::sum(hat.data().iter().map(|z| z.norm_sqr()));
    let low = summation::sum(
        hat.data()
            .iter()
            .zip(&xi2)
            .filter(|(_, k2)| **k2 < cut)
            .map(|(z, _)| z.norm_sqr()),
    );
    if low > 1e-12 * total {
        return Err(Error::Config(format!(
            "forcing carries {:.3e} of its spectral mass below |xi| = N0/2 = {}",
            low / total,
            0.5 * n0
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScatteringReport {
    pub times: Vec<f64>,
    /// `‖w₊(t_{k+1}) − w₊(t_k)‖_{H¹}` with `w₊(t) = e^{−itΔ}w(t)`.
    pub deltas: Vec<f64>,
    pub decreasing: bool,
}

/// Cauchy proxy on the ladder `T/4, T/2, 3T/4, T` (nearest snapshots).
pub fn scattering_proxy(traj: &Trajectory) -> Result<ScatteringReport> {
    let w = traj.channel(crate::spectral::Channel::W)?;
    let times = traj.times();
    if times.len() < 2 {
        return Err(Error::InsufficientData("scattering proxy needs at least 2 snapshots".into()));
    }
    let t0 = times[0];
    let span = times[times.len() - 1] - t0;
    let picks: Vec<usize> = [0.25, 0.5, 0.75, 1.0]
        .iter()
        .map(|f| {
            let target = t0 + f * span;
            (0..times.len())
                .min_by(|&a, &b| (times[a] - target).abs().total_cmp(&(times[b] - target).abs()))
                .expect("nonempty")
        })
        .collect();
    let pulled: Vec<SpectralField> = picks
        .par_iter()
        .map(|&i| free_propagate(&w[i], -times[i]))
        .collect();
    let deltas = pulled
        .windows(2)
        .map(|p| p[1].sub(&p[0]).map(|d| h1_norm(&d)))
        .collect::<Result<Vec<_>>>()?;
    let decreasing = deltas.windows(2).all(|d| d[1] < d[0]);
    Ok(ScatteringReport {
        times: picks.iter().map(|&i| times[i]).collect(),
        deltas,
        decreasing,
    })
}

/// Log-log slope of `y` against `x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    Ok(linear_fit(&lx, &ly)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Channel;
    use std::f64::consts::PI;

    fn gaussian(grid: GridSpec, amp: f64, width: f64) -> SpectralField {
        SpectralField::from_physical_fn(grid, |x| {
            let r2: f64 = x.iter().map(|a| a * a).sum();
            Complex64::new(amp * (-r2 / (2.0 * width * width)).exp(), 0.0)
        })
    }

    #[test]
    fn config_validation() {
        assert_eq!(SolverConfig::new(3, 0.01, 1.0, 10).power().unwrap(), 4.0);
        assert_eq!(SolverConfig::new(4, 0.01, 1.0, 10).power().unwrap(), 2.0);
        assert!(SolverConfig::new(2, 0.01, 1.0, 10).validate().is_err());
        assert!(SolverConfig::new(3, 0.01, 1.0, 7).validate().is_err());
        assert!(SolverConfig::new(3, 0.03, 1.0, 1).validate().is_err());
    }

    #[test]
    fn zero_coupling_step_is_free_flow() {
        let g = GridSpec::new(2, 32, 2.0 * PI).unwrap();
        let u = gaussian(g, 1.0, 1.0);
        let stepped = strang_step_full(&u, 0.05, 2.0, 0.0, false).unwrap();
        let free = free_propagate(&u, 0.05);
        assert!(stepped.sub(&free).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn unforced_mass_is_invariant_without_dealiasing() {
        let g = GridSpec::new(2, 32, 2.0 * PI).unwrap();
        let mut cfg = SolverConfig::new(2, 0.01, 1.0, 100);
        cfg.power = Some(2.0);
        cfg.dealias = false;
        let run = solve_full(&gaussian(g, 1.0, 1.0), &cfg).unwrap();
        let m = &run.series.mass;
        assert!(((m[1] - m[0]) / m[0]).abs() < 1e-12);
    }

    #[test]
    fn channel_identity_holds() {
        let g = GridSpec::new(2, 16, 2.0 * PI).unwrap();
        let mut cfg = SolverConfig::new(2, 0.01, 0.1, 5);
        cfg.power = Some(2.0);
        let v0 = SpectralField::from_physical_fn(g, |x| Complex64::from_polar(0.1, 3.0 * x[0]));
        let run = solve_w(&gaussian(g, 0.5, 1.0), &v0, &cfg).unwrap();
        let t = &run.trajectory;
        for k in 0..t.len() {
            let u = &t.channel(Channel::U).unwrap()[k];
            let v = &t.channel(Channel::V).unwrap()[k];
            let w = &t.channel(Channel::W).unwrap()[k];
            assert!(u.sub(&v.add(w).unwrap()).unwrap().max_abs() < 1e-12);
        }
    }

    #[test]
    fn blowup_guard_trips() {
        // Back-propagated Gaussian refocuses at t = 1 with peak gain 5^{1/4}.
        let g = GridSpec::new(1, 256, 8.0 * PI).unwrap();
        let w0 = free_propagate(&gaussian(g, 1.0, 1.0), -1.0);
        let v0 = SpectralField::zeros(g, Representation::Physical);
        let mut cfg = SolverConfig::new(1, 0.01, 1.0, 100);
        cfg.power = Some(2.0);
        cfg.mu = 0.0;
        cfg.blowup_factor = 1.2;
        assert!(matches!(solve_w(&w0, &v0, &cfg), Err(Error::Blowup { .. })));
        cfg.blowup_factor = 2.0;
        assert!(solve_w(&w0, &v0, &cfg).is_ok());
    }

    #[test]
    fn monitor_precondition() {
        let series = ConservationSeries {
            times: vec![0.0, 1.0],
            mass: vec![1.0, 1.5],
            energy: vec![1.0, 1.2],
        };
        let r = almost_conservation_monitor(&series, 1.0, 1.0, 0.0).unwrap();
        assert!(r.mass_ok && r.energy_ok);
        assert!((r.mass_ratio - 1.5).abs() < 1e-15);
        assert!(matches!(
            almost_conservation_monitor(&series, 0.5, 1.0, 0.0),
            Err(Error::Config(_))
        ));
    }
}
