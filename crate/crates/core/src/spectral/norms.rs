use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::SpectralField;
use super::multiplier::{fractional_derivative, DerivativeKind};
use super::trajectory::Trajectory;
use super::Channel;
use crate::error::{Error, Result};
use crate::summation;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Derivative {
    None,
    Homogeneous(f64),
    Inhomogeneous(f64),
}

impl Derivative {
    pub fn apply(self, field: &SpectralField) -> SpectralField {
        match self {
            Derivative::None => field.clone(),
            Derivative::Homogeneous(s) => fractional_derivative(field, s, DerivativeKind::Homogeneous),
            Derivative::Inhomogeneous(s) => {
                fractional_derivative(field, s, DerivativeKind::Inhomogeneous)
            }
        }
    }
}

/// `‖D u‖_{L^q_t L^r_x}`; `f64::INFINITY` stands for `∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    pub time: f64,
    pub space: f64,
    pub derivative: Derivative,
}

impl NormSpec {
    pub fn new(time: f64, space: f64, derivative: Derivative) -> Result<Self> {
        let spec = Self {
            time,
            space,
            derivative,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn plain(time: f64, space: f64) -> Result<Self> {
        Self::new(time, space, Derivative::None)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, e) in [("time", self.time), ("space", self.space)] {
            if !(e >= 1.0) || e.is_nan() {
                return Err(Error::InvalidArgument(format!(
                    "{name} exponent must lie in [1, inf], got {e}"
                )));
            }
        }
        let s = match self.derivative {
            Derivative::None => 0.0,
            Derivative::Homogeneous(s) | Derivative::Inhomogeneous(s) => s,
        };
        if !s.is_finite() {
            return Err(Error::InvalidArgument(format!("derivative order {s} not finite")));
        }
        Ok(())
    }

    /// `2/q + d/r = d/2` with `q, r ≥ 2`, excluding the endpoint `(2, ∞)` in `d = 2`.
    pub fn is_admissible(&self, dim: usize) -> bool {
        let (q, r) = (self.time, self.space);
        if q < 2.0 || r < 2.0 {
            return false;
        }
        if dim == 2 && q == 2.0 && r.is_infinite() {
            return false;
        }
        let d = dim as f64;
        ((2.0 / q + d / r) - d / 2.0).abs() < 1e-12
    }
}

/// `(Σ|f|^r Δx^d)^{1/r}`, or the lattice maximum for `r = ∞`.
pub fn spatial_norm(field: &SpectralField, r: f64) -> f64 {
    let phys = field.clone().into_physical();
    if r.is_infinite() {
        return phys.max_abs();
    }
    let vol = phys.grid().cell_volume();
    let total = if r == 2.0 {
        summation::sum(phys.data().iter().map(|z| z.norm_sqr()))
    } else if r.fract() == 0.0 && r <= 64.0 {
        let n = r as i32;
        summation::sum(phys.data().iter().map(|z| z.norm().powi(n)))
    } else {
        summation::sum(phys.data().iter().map(|z| z.norm().powf(r)))
    };
    (total * vol).powf(1.0 / r)
}

/// Composite trapezoid for `(∫ g(t)^q dt)^{1/q}`, max for `q = ∞`.
///
/// A single sample with finite `q` spans no time and yields 0.
pub fn time_norm(times: &[f64], values: &[f64], q: f64) -> Result<f64> {
    if times.is_empty() || times.len() != values.len() {
        return Err(Error::InsufficientData(
            "time norm needs one value per snapshot and at least one snapshot".into(),
        ));
    }
    if q.is_infinite() {
        return Ok(values.iter().copied().fold(0.0, f64::max));
    }
    let powered: Vec<f64> = values.iter().map(|g| g.powf(q)).collect();
    let integral = summation::sum(
        times
            .windows(2)
            .zip(powered.windows(2))
            .map(|(t, g)| 0.5 * (t[1] - t[0]) * (g[0] + g[1])),
    );
    Ok(integral.powf(1.0 / q))
}

/// Mixed space-time norm of one channel of a trajectory.
pub fn spacetime_norm(traj: &Trajectory, channel: Channel, spec: &NormSpec) -> Result<f64> {
    spec.validate()?;
    if traj.is_empty() {
        return Err(Error::InsufficientData("empty trajectory".into()));
    }
    let fields = traj.channel(channel)?;
    let per_snapshot: Vec<f64> = fields
        .par_iter()
        .map(|f| spatial_norm(&spec.derivative.apply(f), spec.space))
        .collect();
    time_norm(traj.times(), &per_snapshot, spec.time)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{GridSpec, Representation};
    use num_complex::Complex64;

    fn constant_trajectory(dim: usize, l: f64, c: f64, t_end: f64, count: usize) -> Trajectory {
        let g = GridSpec::new(dim, 8, l).unwrap();
        let times = Trajectory::uniform_times(0.0, t_end / (count - 1) as f64, count);
        let mut traj = Trajectory::new(g, times).unwrap();
        let f = SpectralField::from_physical_fn(g, |_| Complex64::new(c, 0.0));
        traj.insert_channel(Channel::U, vec![f; count]).unwrap();
        traj
    }

    #[test]
    fn constant_field_separable_formula() {
        let (l, c, t_end) = (1.5, 0.7, 2.0);
        let traj = constant_trajectory(3, l, c, t_end, 5);
        for (q, r) in [(2.0, 2.0), (8.0, 12.0), (4.0, f64::INFINITY), (f64::INFINITY, 6.0)] {
            let spec = NormSpec::plain(q, r).unwrap();
            let got = spacetime_norm(&traj, Channel::U, &spec).unwrap();
            let expected = c * (2.0 * l).powf(3.0 / r) * t_end.powf(1.0 / q);
            assert!(((got - expected) / expected).abs() < 1e-12, "({q},{r}): {got} vs {expected}");
        }
    }

    #[test]
    fn single_snapshot_sup_in_time_is_spatial_norm() {
        let traj = constant_trajectory(2, 1.0, 2.0, 1.0, 2).truncated(1);
        let spec = NormSpec::plain(f64::INFINITY, 2.0).unwrap();
        let got = spacetime_norm(&traj, Channel::U, &spec).unwrap();
        assert!((got - 2.0 * 2.0).abs() < 1e-12);
    }

    #[test]
    fn empty_trajectory_is_an_error() {
        let g = GridSpec::new(1, 8, 1.0).unwrap();
        let traj = Trajectory::new(g, vec![]).unwrap();
        let spec = NormSpec::plain(2.0, 2.0).unwrap();
        assert!(spacetime_norm(&traj, Channel::U, &spec).is_err());
        let _ = Representation::Physical;
    }

    #[test]
    fn admissibility() {
        let p = |q, r| NormSpec::plain(q, r).unwrap();
        assert!(p(2.0, 6.0).is_admissible(3));
        assert!(p(4.0, 3.0).is_admissible(3));
        assert!(!p(8.0, 12.0).is_admissible(3));
        assert!(!p(8.0, 8.0).is_admissible(3));
        assert!(p(2.0, 4.0).is_admissible(4));
        assert!(p(f64::INFINITY, 2.0).is_admissible(2));
        assert!(!p(2.0, f64::INFINITY).is_admissible(2));
        assert!(NormSpec::plain(0.5, 2.0).is_err());
    }
}
