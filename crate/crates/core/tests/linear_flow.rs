mod common;

use common::{random_field, rel_diff};
use num_complex::Complex64;
use proptest::prelude::*;
use rnls_core::linear_flow::{
    composite_norm, ensemble_linear_stats, linear_trajectory, CompositeKind, CompositeNormSpec,
    DEFAULT_EPSILON,
};
use rnls_core::partition::{FrequencyPartition, PartitionConfig, Shell};
use rnls_core::randomization::{coefficient, draw};
use rnls_core::spectral::{
    fractional_derivative, spatial_norm, Channel, DerivativeKind, GridSpec, Representation,
    SpectralField, Trajectory,
};
use std::f64::consts::PI;

const ALL_3D: [CompositeKind; 3] = [CompositeKind::Y3, CompositeKind::Z3, CompositeKind::X3];

fn times(t_final: f64, count: usize) -> Vec<f64> {
    Trajectory::uniform_times(0.0, t_final / (count - 1) as f64, count)
}

#[test]
fn plane_wave_rotates_in_phase_only() {
    let g = GridSpec::new(3, 16, PI).unwrap();
    let k = [5.0, 2.0, 0.0];
    let k2 = 29.0;
    let f = SpectralField::from_physical_fn(g, |x| Complex64::from_polar(0.7, k[0] * x[0] + k[1] * x[1]));
    let ts = times(0.4, 5);
    let traj = linear_trajectory(&f, 2.0, &ts).unwrap();
    for (t, v) in ts.iter().zip(traj.channel(Channel::V).unwrap()) {
        let expected = f.scaled(Complex64::from_polar(1.0, -t * k2));
        assert!(v.sub(&expected).unwrap().max_abs() < 1e-12);
    }
}

#[test]
fn mass_is_constant_and_support_never_grows() {
    let g = GridSpec::new(3, 16, PI).unwrap();
    let f = random_field(g, 4);
    let traj = linear_trajectory(&f, 2.0, &times(1.0, 9)).unwrap();
    let snaps = traj.channel(Channel::V).unwrap();
    let m0 = snaps[0].l2_norm();
    let support0: Vec<bool> = snaps[0]
        .clone()
        .into_frequency()
        .data()
        .iter()
        .map(|z| z.norm() > 1e-13)
        .collect();
    for v in snaps {
        assert!(rel_diff(v.l2_norm(), m0) < 1e-12);
        let spec = v.clone().into_frequency();
        for (z, inside) in spec.data().iter().zip(&support0) {
            if !inside {
                assert!(z.norm() < 1e-11);
            }
        }
    }
}

#[test]
fn zero_data_has_zero_norms() {
    let g = GridSpec::new(3, 8, PI).unwrap();
    let f = SpectralField::zeros(g, Representation::Physical);
    let traj = linear_trajectory(&f, 1.0, &times(0.5, 3)).unwrap();
    let mut w_traj = traj.clone();
    w_traj
        .insert_channel(Channel::W, traj.channel(Channel::V).unwrap().to_vec())
        .unwrap();
    for kind in ALL_3D {
        let n = composite_norm(&w_traj, &CompositeNormSpec::new(kind, -0.2, 1.0, DEFAULT_EPSILON)).unwrap();
        assert_eq!(n.total, 0.0);
    }
}

#[test]
fn y3_of_plane_wave_is_separable() {
    let (half, amp, t_final) = (PI, 0.9, 0.5);
    let (s, a, eps) = (-0.25, 1.0, 0.01);
    let g = GridSpec::new(3, 16, half).unwrap();
    let f = SpectralField::from_physical_fn(g, |x| Complex64::from_polar(amp, 4.0 * x[0] - 3.0 * x[2]));
    let traj = linear_trajectory(&f, 2.0, &times(t_final, 11)).unwrap();
    let y = composite_norm(&traj, &CompositeNormSpec::new(CompositeKind::Y3, s, a, eps)).unwrap();
    let bracket = (1.0f64 + 25.0).powf((s + a / 2.0 - eps) / 2.0);
    let side = 2.0 * half;
    let expected = [
        bracket * amp * t_final.sqrt(),
        amp * side.powf(3.0 / 8.0) * t_final.powf(1.0 / 8.0),
        amp * side.powf(3.0 / 4.0) * t_final.powf(1.0 / 4.0),
        amp * side.powf(1.0 / 4.0) * t_final.powf(1.0 / 8.0),
    ];
    for ((label, got), want) in y.components.iter().zip(expected) {
        assert!(rel_diff(*got, want) < 1e-10, "{label}: {got} vs {want}");
    }
    assert!(rel_diff(y.total, expected.iter().sum()) < 1e-12);
}

#[test]
fn z3_of_static_field() {
    let g = GridSpec::new(3, 16, PI).unwrap();
    let f = random_field(g, 12);
    let (s, a, eps) = (-0.3, 1.0, 0.01);
    let mut traj = Trajectory::new(g, times(1.0, 4)).unwrap();
    traj.insert_channel(Channel::V, vec![f.clone(); 4]).unwrap();
    let z = composite_norm(&traj, &CompositeNormSpec::new(CompositeKind::Z3, s, a, eps)).unwrap();
    let hs = fractional_derivative(&f, s, DerivativeKind::Inhomogeneous).l2_norm();
    let sup = spatial_norm(
        &fractional_derivative(&f, s + 1.5 * a - eps, DerivativeKind::Inhomogeneous),
        f64::INFINITY,
    );
    assert!(rel_diff(z.total, hs + sup) < 1e-12);
}

fn bump_setup() -> (FrequencyPartition, SpectralField, usize) {
    let g = GridSpec::new(3, 16, 2.0 * PI).unwrap();
    let p = FrequencyPartition::build(PartitionConfig::new(3, 0.0, 1, 2), g).unwrap();
    let j = p.cubes().iter().position(|c| c.shell == Shell::Dyadic(2)).unwrap();
    let mut f = SpectralField::zeros(g, Representation::Frequency);
    for i in p.cubes()[j].plateau() {
        f.data_mut()[i] = Complex64::new(1.0, 0.0);
    }
    (p, f, j)
}

#[test]
fn single_sample_matches_direct_evaluation() {
    let (p, f, _) = bump_setup();
    let spec = CompositeNormSpec::new(CompositeKind::Y3, 0.0, 1.0, DEFAULT_EPSILON);
    let ts = times(0.2, 5);
    let stats = ensemble_linear_stats(&f, &p, 1.0, &ts, 1, std::slice::from_ref(&spec), 5).unwrap();
    let sample = &stats.samples[0];
    let d = draw(&f, &p, sample.seed).unwrap();
    let direct = composite_norm(&linear_trajectory(&d.field, 1.0, &ts).unwrap(), &spec).unwrap();
    assert_eq!(sample.combined, direct.total);
    assert!(stats.tail.is_none());
}

#[test]
fn single_cube_ensemble_is_one_gaussian_factor() {
    let (p, f, j) = bump_setup();
    let spec = CompositeNormSpec::new(CompositeKind::Y3, 0.0, 1.0, DEFAULT_EPSILON);
    let ts = times(0.2, 5);
    let deterministic =
        composite_norm(&linear_trajectory(&f, 1.0, &ts).unwrap(), &spec).unwrap().total;
    let stats = ensemble_linear_stats(&f, &p, 1.0, &ts, 400, &[spec], 11).unwrap();
    for s in &stats.samples {
        let g = coefficient(s.seed, j as u64).norm();
        assert!(rel_diff(s.combined, g * deterministic) < 1e-10);
    }
    // |g|² is a unit exponential, so P(K|g| > λ) = exp(−λ²/K²).
    let tail = stats.tail.unwrap();
    let oracle = 1.0 / (deterministic * deterministic);
    assert!(rel_diff(tail.rate, oracle) < 0.3, "{} vs {oracle}", tail.rate);
}

#[test]
fn median_y_norm_stable_under_refinement() {
    let median = |points: usize| {
        let g = GridSpec::new(3, points, 2.0 * PI).unwrap();
        let p = FrequencyPartition::build(PartitionConfig::new(3, -0.2, 1, 1), g).unwrap();
        let f = SpectralField::from_physical_fn(g, |x| {
            let r2: f64 = x.iter().map(|c| c * c).sum();
            Complex64::new((-r2 / 2.0).exp(), 0.0)
        });
        let spec = CompositeNormSpec::new(CompositeKind::Y3, -0.2, 1.0, DEFAULT_EPSILON);
        let stats = ensemble_linear_stats(&f, &p, 1.0, &times(0.5, 6), 15, &[spec], 3).unwrap();
        let mut v: Vec<f64> = stats.samples.iter().map(|s| s.combined).collect();
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    let (coarse, fine) = (median(16), median(32));
    assert!(rel_diff(coarse, fine) < 0.1, "{coarse} vs {fine}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn composite_norms_are_homogeneous(seed in any::<u64>(), alpha in -4.0f64..4.0, k in 0usize..3) {
        let g = GridSpec::new(3, 8, PI).unwrap();
        let f = random_field(g, seed);
        let mut traj = linear_trajectory(&f, 1.0, &times(0.3, 4)).unwrap();
        traj.insert_channel(Channel::W, traj.channel(Channel::V).unwrap().to_vec()).unwrap();
        let spec = CompositeNormSpec::new(ALL_3D[k], -0.1, 1.0, DEFAULT_EPSILON);
        let base = composite_norm(&traj, &spec).unwrap().total;
        let scaled = composite_norm(&traj.scaled(alpha), &spec).unwrap().total;
        prop_assert!((scaled - alpha.abs() * base).abs() <= 1e-12 * base.max(1.0) * alpha.abs().max(1.0));
    }

    #[test]
    fn composite_norms_grow_with_interval(seed in any::<u64>(), keep in 2usize..8, k in 0usize..3) {
        let g = GridSpec::new(3, 8, PI).unwrap();
        let f = random_field(g, seed);
        let mut traj = linear_trajectory(&f, 1.0, &times(0.7, 8)).unwrap();
        traj.insert_channel(Channel::W, traj.channel(Channel::V).unwrap().to_vec()).unwrap();
        let spec = CompositeNormSpec::new(ALL_3D[k], 0.0, 1.0, DEFAULT_EPSILON);
        let long = composite_norm(&traj, &spec).unwrap().total;
        let short = composite_norm(&traj.truncated(keep), &spec).unwrap().total;
        prop_assert!(short <= long * (1.0 + 1e-12));
    }
}
