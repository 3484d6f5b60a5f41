//! Randomized free evolution `v = e^{itΔ} P_{≥N₀} f^ω` and the composite
//! X/Y/Z norms in three and four dimensions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::FrequencyPartition;
use crate::randomization::{derive_seed, draw, tail_fit, TailReport};
use crate::spectral::{
    free_propagate, littlewood_paley, spacetime_norm, Channel, Derivative, LpProjector, NormSpec,
    SpectralField, Trajectory,
};
use crate::summation;

/// Default `ε` in exponents written `σ−`.
pub const DEFAULT_EPSILON: f64 = 0.01;

/// Channel `v` with `v(t) = e^{itΔ} P_{≥N₀} f` at every time in `times`.
pub fn linear_trajectory(f: &SpectralField, n0: f64, times: &[f64]) -> Result<Trajectory> {
    let grid = *f.grid();
    if n0 > grid.nyquist() / 2.0 {
        log::warn!(
            "N0 = {n0} exceeds half the Nyquist frequency {}; v will be (nearly) zero",
            grid.nyquist()
        );
    }
    let v0 = littlewood_paley(f, LpProjector::High(n0))?.into_frequency();
    if v0.l2_norm() == 0.0 {
        log::warn!("high-frequency part above N0 = {n0} is identically zero");
    }
    let snapshots: Vec<SpectralField> = times
        .par_iter()
        .map(|&t| free_propagate(&v0, t).into_physical())
        .collect();
    let mut traj = Trajectory::new(grid, times.to_vec())?;
    traj.insert_channel(Channel::V, snapshots)?;
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CompositeKind {
    Y3,
    Z3,
    X3,
    Y4,
    Z4,
    X4,
}

impl CompositeKind {
    pub fn dim(self) -> usize {
        match self {
            CompositeKind::Y3 | CompositeKind::Z3 | CompositeKind::X3 => 3,
            _ => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CompositeKind::Y3 => "Y3",
            CompositeKind::Z3 => "Z3",
            CompositeKind::X3 => "X3",
            CompositeKind::Y4 => "Y4",
            CompositeKind::Z4 => "Z4",
            CompositeKind::X4 => "X4",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormComponent {
    pub label: String,
    pub spec: NormSpec,
    pub channel: Channel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeNormSpec {
    pub kind: CompositeKind,
    pub components: Vec<NormComponent>,
    pub epsilon: f64,
}

impl CompositeNormSpec {
    /// Components for regularity `s`, cube exponent `a` and slack `ε`.
    pub fn new(kind: CompositeKind, s: f64, a: f64, epsilon: f64) -> Self {
        use Derivative::{Inhomogeneous as D, None as Plain};
        let inf = f64::INFINITY;
        let (channel, parts): (Channel, Vec<(String, f64, f64, Derivative)>) = match kind {
            CompositeKind::Y3 => (
                Channel::V,
                vec![
                    ("<D>^(s+a/2-) L2 Linf".into(), 2.0, inf, D(s + a / 2.0 - epsilon)),
                    ("L8 L8".into(), 8.0, 8.0, Plain),
                    ("L4 L4".into(), 4.0, 4.0, Plain),
                    ("L8 L12".into(), 8.0, 12.0, Plain),
                ],
            ),
            CompositeKind::Z3 => (
                Channel::V,
                vec![
                    ("Linf H^s".into(), inf, 2.0, D(s)),
                    ("<D>^(s+3a/2-) Linf Linf".into(), inf, inf, D(s + 1.5 * a - epsilon)),
                ],
            ),
            CompositeKind::X3 => (
                Channel::W,
                vec![
                    ("<D> L2 L6".into(), 2.0, 6.0, D(1.0)),
                    ("L8 L8".into(), 8.0, 8.0, Plain),
                    ("L8 L12".into(), 8.0, 12.0, Plain),
                ],
            ),
            CompositeKind::Y4 => (
                Channel::V,
                vec![
                    ("<D>^(s+a-) L2 Linf".into(), 2.0, inf, D(s + a - epsilon)),
                    ("L4 L8".into(), 4.0, 8.0, Plain),
                    ("L6 L3".into(), 6.0, 3.0, Plain),
                    ("<D>^(-1/4) L4 L4".into(), 4.0, 4.0, D(-0.25)),
                ],
            ),
            CompositeKind::Z4 => (
                Channel::V,
                vec![
                    ("Linf H^s".into(), inf, 2.0, D(s)),
                    ("<D>^(s+2a-) Linf Linf".into(), inf, inf, D(s + 2.0 * a - epsilon)),
                ],
            ),
            CompositeKind::X4 => (
                Channel::W,
                vec![
                    ("<D> L2 L4".into(), 2.0, 4.0, D(1.0)),
                    ("L4 L8".into(), 4.0, 8.0, Plain),
                    ("L4 L4".into(), 4.0, 4.0, Plain),
                ],
            ),
        };
        let components = parts
            .into_iter()
            .map(|(label, q, r, derivative)| NormComponent {
                label,
                spec: NormSpec {
                    time: q,
                    space: r,
                    derivative,
                },
                channel,
            })
            .collect();
        Self {
            kind,
            components,
            epsilon,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeNorm {
    pub kind: CompositeKind,
    pub total: f64,
    pub components: Vec<(String, f64)>,
}

pub fn composite_norm(traj: &Trajectory, spec: &CompositeNormSpec) -> Result<CompositeNorm> {
    if traj.grid().dim != spec.kind.dim() {
        return Err(Error::InvalidArgument(format!(
            "{} norm needs a {}-dimensional trajectory, got {}",
            spec.kind.name(),
            spec.kind.dim(),
            traj.grid().dim
        )));
    }
    let mut components = Vec::with_capacity(spec.components.len());
    for c in &spec.components {
        components.push((c.label.clone(), spacetime_norm(traj, c.channel, &c.spec)?));
    }
    let total = summation::sum(components.iter().map(|(_, v)| *v));
    Ok(CompositeNorm {
        kind: spec.kind,
        total,
        components,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleSample {
    pub seed: u64,
    pub norms: Vec<CompositeNorm>,
    /// Sum of all requested composite totals.
    pub combined: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub samples: Vec<EnsembleSample>,
    /// Present once at least 200 samples are available.
    pub tail: Option<TailReport>,
    /// `(p, (E F^p)^{1/p} / (√p ‖f‖_{L²}))` for `F` the combined norm.
    pub moment_ratios: Vec<(f64, f64)>,
}

/// Composite norms of `e^{itΔ} P_{≥N₀} f^ω` for `n_samples` seeds derived
/// from `master_seed`.
pub fn ensemble_linear_stats(
    f: &SpectralField,
    partition: &FrequencyPartition,
    n0: f64,
    times: &[f64],
    n_samples: usize,
    specs: &[CompositeNormSpec],
    master_seed: u64,
) -> Result<EnsembleStats> {
    if specs.is_empty() {
        return Err(Error::InvalidArgument("no composite norms requested".into()));
    }
    let samples: Vec<EnsembleSample> = (0..n_samples as u64)
        .into_par_iter()
        .map(|k| {
            let seed = derive_seed(master_seed, k);
            let d = draw(f, partition, seed)?;
            let traj = linear_trajectory(&d.field, n0, times)?;
            let norms = specs
                .iter()
                .map(|s| composite_norm(&traj, s))
                .collect::<Result<Vec<_>>>()?;
            let combined = summation::sum(norms.iter().map(|n| n.total));
            Ok(EnsembleSample {
                seed,
                norms,
                combined,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = samples.iter().map(|s| s.combined).collect();
    let tail = if values.len() >= 200 {
        Some(tail_fit(&values, None)?)
    } else {
        None
    };
    let f_l2 = f.l2_norm();
    let moment_ratios = if values.is_empty() || f_l2 == 0.0 {
        Vec::new()
    } else {
        [2.0, 4.0, 8.0]
            .iter()
            .map(|&p: &f64| {
                let m = (summation::sum(values.iter().map(|v| v.powf(p))) / values.len() as f64)
                    .powf(1.0 / p);
                (p, m / (p.sqrt() * f_l2))
            })
            .collect()
    };
    Ok(EnsembleStats {
        samples,
        tail,
        moment_ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::GridSpec;
    use num_complex::Complex64;
    use std::f64::consts::PI;

    #[test]
    fn component_layouts() {
        let y3 = CompositeNormSpec::new(CompositeKind::Y3, -0.1, 1.0, 0.01);
        assert_eq!(y3.components.len(), 4);
        assert_eq!(y3.components[0].spec.derivative, Derivative::Inhomogeneous(-0.1 + 0.5 - 0.01));
        assert_eq!(y3.components[3].spec.space, 12.0);
        let x4 = CompositeNormSpec::new(CompositeKind::X4, 0.0, 1.0, 0.01);
        assert!(x4.components.iter().all(|c| c.channel == Channel::W));
        let y4 = CompositeNormSpec::new(CompositeKind::Y4, 0.0, 1.0, 0.01);
        assert_eq!(y4.components[3].spec.derivative, Derivative::Inhomogeneous(-0.25));
    }

    #[test]
    fn high_cutoff_above_content_gives_zero() {
        let g = GridSpec::new(3, 16, PI).unwrap();
        let f = SpectralField::from_physical_fn(g, |x| Complex64::new(x[0].cos(), 0.0));
        let traj = linear_trajectory(&f, 4.0, &[0.0, 0.1]).unwrap();
        for v in traj.channel(Channel::V).unwrap() {
            assert!(v.max_abs() < 1e-13);
        }
        let z = composite_norm(&traj, &CompositeNormSpec::new(CompositeKind::Z3, 0.0, 1.0, 0.01))
            .unwrap();
        assert!(z.total < 1e-12);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let g = GridSpec::new(3, 8, PI).unwrap();
        let traj = linear_trajectory(&SpectralField::zeros(g, crate::spectral::Representation::Physical), 1.0, &[0.0])
            .unwrap();
        assert!(composite_norm(&traj, &CompositeNormSpec::new(CompositeKind::Y4, 0.0, 1.0, 0.01)).is_err());
    }
}
