use num_complex::Complex64;

use super::field::SpectralField;
use super::grid::MAX_DIM;
use crate::error::{Error, Result};

/// Quintic smoothstep `6t⁵ − 15t⁴ + 10t³` clamped to `[0, 1]`; C² at both ends.
#[inline]
pub fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        t * t * t * (t * (6.0 * t - 15.0) + 10.0)
    }
}

/// Littlewood–Paley profile: `φ(r) = 1 − smoothstep(r − 1)`, so `φ = 1` on
/// `r ≤ 1` and `φ = 0` on `r ≥ 2`.
#[inline]
pub fn lp_cutoff(r: f64) -> f64 {
    1.0 - smoothstep(r - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeKind {
    /// `|∇|ˢ`, symbol `|ξ|ˢ`; for `s < 0` the `ξ = 0` mode is zeroed.
    Homogeneous,
    /// `⟨∇⟩ˢ`, symbol `(1 + |ξ|²)^{s/2}`.
    Inhomogeneous,
}

pub fn fractional_derivative(field: &SpectralField, s: f64, kind: DerivativeKind) -> SpectralField {
    if s == 0.0 {
        return field.clone();
    }
    match kind {
        DerivativeKind::Homogeneous => field.apply_radial_symbol(|k2| {
            if k2 == 0.0 {
                // |0|ˢ = 0 for s > 0; the mean-zero convention covers s < 0.
                Complex64::default()
            } else {
                Complex64::new(k2.powf(s / 2.0), 0.0)
            }
        }),
        DerivativeKind::Inhomogeneous => {
            field.apply_radial_symbol(|k2| Complex64::new((1.0 + k2).powf(s / 2.0), 0.0))
        }
    }
}

/// Dyadic projector variants. `P_N = P_{≤N} − P_{≤N/2}` for `N ≥ 2` and
/// `P_1 = P_{≤1}`; `P_{≥N} = Id − P_{≤N}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LpProjector {
    Low(f64),
    Band(f64),
    High(f64),
}

fn check_dyadic(n: f64) -> Result<()> {
    if !(n.is_finite() && n > 0.0) || n.log2().fract() != 0.0 {
        return Err(Error::InvalidArgument(format!(
            "Littlewood-Paley scale must be a power of two, got {n}"
        )));
    }
    Ok(())
}

fn lp_symbol(projector: LpProjector, r: f64) -> f64 {
    match projector {
        LpProjector::Low(n) => lp_cutoff(r / n),
        LpProjector::Band(n) if n <= 1.0 => lp_cutoff(r / n),
        LpProjector::Band(n) => lp_cutoff(r / n) - lp_cutoff(2.0 * r / n),
        LpProjector::High(n) => 1.0 - lp_cutoff(r / n),
    }
}

pub fn littlewood_paley(field: &SpectralField, projector: LpProjector) -> Result<SpectralField> {
    let n = match projector {
        LpProjector::Low(n) | LpProjector::Band(n) | LpProjector::High(n) => n,
    };
    check_dyadic(n)?;
    let nyquist = field.grid().nyquist();
    if n > nyquist {
        log::warn!(
            "Littlewood-Paley scale {n} exceeds the grid Nyquist frequency {nyquist}; projector acts trivially on the grid"
        );
    }
    Ok(field.apply_radial_symbol(|k2| Complex64::new(lp_symbol(projector, k2.sqrt()), 0.0)))
}

/// `e^{itΔ}`, symbol `e^{−it|ξ|²}`.
pub fn free_propagate(field: &SpectralField, t: f64) -> SpectralField {
    if t == 0.0 {
        return field.clone();
    }
    field.apply_radial_symbol(|k2| Complex64::from_polar(1.0, -t * k2))
}

/// Spectral gradient; one component per axis, each in the input's representation.
pub fn gradient(field: &SpectralField) -> Vec<SpectralField> {
    let dim = field.grid().dim;
    (0..dim)
        .map(|axis| field.apply_symbol(|xi: &[f64; MAX_DIM]| Complex64::new(0.0, xi[axis])))
        .collect()
}

/// Pointwise `|∇f|` as a physical field with real samples.
pub fn gradient_magnitude(field: &SpectralField) -> SpectralField {
    let grads: Vec<SpectralField> = gradient(field).into_iter().map(|g| g.into_physical()).collect();
    let grid = *field.grid();
    let data = (0..grid.len())
        .map(|i| {
            let s: f64 = grads.iter().map(|g| g.data()[i].norm_sqr()).sum();
            Complex64::new(s.sqrt(), 0.0)
        })
        .collect();
    SpectralField::from_vec(grid, data, super::Representation::Physical)
        .expect("length matches grid")
}

/// 2/3-rule truncation: zero every mode with `|k_i| > M/3` on some axis.
pub fn dealias(field: &mut SpectralField) -> Result<()> {
    field.expect(super::Representation::Frequency)?;
    let grid = *field.grid();
    let limit = grid.points as i64 / 3;
    for (i, z) in field.data_mut().iter_mut().enumerate() {
        let idx = grid.unravel(i);
        if idx[..grid.dim]
            .iter()
            .any(|&k| grid.wavenumber(k).abs() > limit)
        {
            *z = Complex64::default();
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{GridSpec, Representation};
    use std::f64::consts::PI;

    fn plane_wave(grid: GridSpec, k: &[f64]) -> SpectralField {
        let k = k.to_vec();
        SpectralField::from_physical_fn(grid, move |x| {
            let phase: f64 = x.iter().zip(&k).map(|(a, b)| a * b).sum();
            Complex64::from_polar(1.0, phase)
        })
    }

    #[test]
    fn cutoff_profile_endpoints() {
        assert_eq!(lp_cutoff(0.3), 1.0);
        assert_eq!(lp_cutoff(1.0), 1.0);
        assert_eq!(lp_cutoff(2.0), 0.0);
        assert_eq!(lp_cutoff(7.0), 0.0);
        assert!((lp_cutoff(1.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_order_derivative_is_identity() {
        let g = GridSpec::new(2, 16, PI).unwrap();
        let f = plane_wave(g, &[2.0, -3.0]);
        for kind in [DerivativeKind::Homogeneous, DerivativeKind::Inhomogeneous] {
            assert_eq!(fractional_derivative(&f, 0.0, kind), f);
        }
    }

    #[test]
    fn plane_wave_is_an_eigenfunction() {
        let g = GridSpec::new(2, 16, PI).unwrap();
        let f = plane_wave(g, &[3.0, 4.0]);
        let d = fractional_derivative(&f, 0.7, DerivativeKind::Homogeneous);
        let expected = f.scaled(Complex64::new(5f64.powf(0.7), 0.0));
        assert!(d.sub(&expected).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn bessel_potential_fixes_constants() {
        let g = GridSpec::new(3, 8, 1.0).unwrap();
        let c = Complex64::new(0.3, -1.2);
        let f = SpectralField::from_physical_fn(g, |_| c);
        let d = fractional_derivative(&f, -1.3, DerivativeKind::Inhomogeneous);
        assert!(d.sub(&f).unwrap().max_abs() < 1e-13);
        let h = fractional_derivative(&f, -0.25, DerivativeKind::Homogeneous);
        assert!(h.max_abs() < 1e-13);
    }

    #[test]
    fn band_projector_weights_plane_wave_by_profile() {
        let g = GridSpec::new(1, 64, PI).unwrap();
        for (n, k) in [(4.0, 3.0), (8.0, 6.0), (8.0, 5.0)] {
            let f = plane_wave(g, &[k]);
            let p = littlewood_paley(&f, LpProjector::Band(n)).unwrap();
            let weight = lp_cutoff(k / n) - lp_cutoff(2.0 * k / n);
            let err = p.sub(&f.scaled(Complex64::new(weight, 0.0))).unwrap().max_abs();
            assert!(err < 1e-12);
        }
    }

    #[test]
    fn non_dyadic_scale_rejected() {
        let g = GridSpec::new(1, 16, PI).unwrap();
        let f = SpectralField::zeros(g, Representation::Physical);
        assert!(littlewood_paley(&f, LpProjector::Low(3.0)).is_err());
    }

    #[test]
    fn free_flow_at_zero_time_is_identity() {
        let g = GridSpec::new(2, 16, PI).unwrap();
        let f = plane_wave(g, &[1.0, 2.0]);
        assert_eq!(free_propagate(&f, 0.0), f);
    }

    #[test]
    fn gradient_of_plane_wave() {
        let g = GridSpec::new(2, 16, PI).unwrap();
        let f = plane_wave(g, &[2.0, -1.0]);
        let grad = gradient(&f);
        let ex = f.scaled(Complex64::new(0.0, 2.0));
        assert!(grad[0].sub(&ex).unwrap().max_abs() < 1e-12);
        let mag = gradient_magnitude(&f);
        for z in mag.data() {
            assert!((z.re - 5f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn dealias_removes_high_modes_only() {
        let g = GridSpec::new(1, 16, PI).unwrap();
        let low = plane_wave(g, &[5.0]).into_frequency();
        let mut kept = low.clone();
        dealias(&mut kept).unwrap();
        assert!((kept.data()[5] - low.data()[5]).norm() < 1e-12);
        assert!(kept.sub(&low).unwrap().l2_norm() < 1e-12);
        let mut high = plane_wave(g, &[6.0]).into_frequency();
        dealias(&mut high).unwrap();
        assert!(high.l2_norm() < 1e-12);
    }
}
