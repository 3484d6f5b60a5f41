//! Local densities, the pairwise interaction Morawetz functional, and the
//! numerical audits of the modified interaction Morawetz inequalities.
//!
//! Kernels `z/|z|` and `1/|z|` are tabulated on the fundamental cell with
//! minimum-image offsets and `K(0) := 0`, then applied by circular FFT
//! convolution. This equals the whole-space integral only when the densities
//! are localized away from the box boundary, so every functional value is
//! paired with a localization ratio.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftDirection;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::nonlinearity;
use crate::spectral::{
    fft, gradient, gradient_magnitude, spacetime_norm, spatial_norm, time_norm, Channel,
    Derivative, GridSpec, NormSpec, SpectralField, Trajectory, MAX_DIM,
};
use crate::summation;

#[derive(Debug, Clone)]
pub struct LocalDensities {
    pub grid: GridSpec,
    /// `½|w|²`.
    pub mass: Vec<f64>,
    /// `½ Im(w̄ ∂ₖw)`, one vector per axis.
    pub momentum: Vec<Vec<f64>>,
    /// `|u|^p u − |w|^p w`.
    pub defect: Vec<Complex64>,
}

pub fn local_densities(w: &SpectralField, u: &SpectralField, power: f64) -> Result<LocalDensities> {
    w.check_same_grid(u)?;
    let grid = *w.grid();
    let w_phys = w.clone().into_physical();
    let u_phys = u.clone().into_physical();
    let grads: Vec<SpectralField> = gradient(w).into_iter().map(|g| g.into_physical()).collect();
    let mass = w_phys.data().iter().map(|z| 0.5 * z.norm_sqr()).collect();
    let momentum = grads
        .iter()
        .map(|g| {
            w_phys
                .data()
                .iter()
                .zip(g.data())
                .map(|(w, dw)| 0.5 * (w.conj() * dw).im)
                .collect()
        })
        .collect();
    let defect = u_phys
        .data()
        .iter()
        .zip(w_phys.data())
        .map(|(u, w)| nonlinearity(*u, power) - nonlinearity(*w, power))
        .collect();
    Ok(LocalDensities {
        grid,
        mass,
        momentum,
        defect,
    })
}

/// A row-major lattice of `points^dim` sites with spacing `dx`; unlike
/// [`GridSpec`] the point count is unrestricted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    pub dim: usize,
    pub points: usize,
    pub dx: f64,
}

impl Lattice {
    pub fn of(grid: &GridSpec) -> Self {
        Self {
            dim: grid.dim,
            points: grid.points,
            dx: grid.dx(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn signed(&self, i: usize) -> i64 {
        let m = self.points as i64;
        let i = i as i64;
        if i < (m + 1) / 2 {
            i
        } else {
            i - m
        }
    }

    fn unravel(&self, mut flat: usize) -> [usize; MAX_DIM] {
        let mut out = [0usize; MAX_DIM];
        for a in (0..self.dim).rev() {
            out[a] = flat % self.points;
            flat /= self.points;
        }
        out
    }

    /// Minimum-image displacement for a flat index offset.
    pub fn offset(&self, flat: usize) -> [f64; MAX_DIM] {
        let idx = self.unravel(flat);
        let mut z = [0.0; MAX_DIM];
        for a in 0..self.dim {
            z[a] = self.signed(idx[a]) as f64 * self.dx;
        }
        z
    }

    /// Flat index of `x − y` (componentwise modulo `points`).
    pub fn difference(&self, x: usize, y: usize) -> usize {
        let xi = self.unravel(x);
        let yi = self.unravel(y);
        (0..self.dim).fold(0, |acc, a| {
            acc * self.points + (xi[a] + self.points - yi[a]) % self.points
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelKind {
    /// `z/|z|`, paired with a vector density.
    Direction,
    /// `1/|z|`, paired with a scalar density.
    InverseDistance,
}

fn kernel_table(lattice: &Lattice, kind: KernelKind) -> Vec<Vec<f64>> {
    let n = lattice.len();
    let comps = match kind {
        KernelKind::Direction => lattice.dim,
        KernelKind::InverseDistance => 1,
    };
    let mut out = vec![vec![0.0; n]; comps];
    for flat in 1..n {
        let z = lattice.offset(flat);
        let r = z[..lattice.dim].iter().map(|c| c * c).sum::<f64>().sqrt();
        match kind {
            KernelKind::Direction => {
                for a in 0..lattice.dim {
                    out[a][flat] = z[a] / r;
                }
            }
            KernelKind::InverseDistance => out[0][flat] = 1.0 / r,
        }
    }
    out
}

fn circular_convolve(lattice: &Lattice, kernel: &[f64], density: &[f64]) -> Vec<f64> {
    let to_complex = |xs: &[f64]| xs.iter().map(|&x| Complex64::new(x, 0.0)).collect::<Vec<_>>();
    let mut k = to_complex(kernel);
    let mut d = to_complex(density);
    fft::transform(&mut k, lattice.points, lattice.dim, FftDirection::Forward);
    fft::transform(&mut d, lattice.points, lattice.dim, FftDirection::Forward);
    for (a, b) in k.iter_mut().zip(&d) {
        *a *= b;
    }
    fft::transform(&mut k, lattice.points, lattice.dim, FftDirection::Inverse);
    k.into_iter().map(|z| z.re).collect()
}

/// `Σ_{x,y} K(x−y)·a(x) b(y) Δx^{2d}` by FFT convolution. For
/// [`KernelKind::Direction`] `a` has one component per axis; for
/// [`KernelKind::InverseDistance`] it has one component.
pub fn pair_sum(lattice: &Lattice, kind: KernelKind, a: &[Vec<f64>], b: &[f64]) -> Result<f64> {
    let table = kernel_table(lattice, kind);
    if a.len() != table.len() || a.iter().any(|c| c.len() != lattice.len()) || b.len() != lattice.len() {
        return Err(Error::GridMismatch);
    }
    let cell = lattice.dx.powi(lattice.dim as i32);
    let mut acc = summation::NeumaierSum::new();
    for (kc, ac) in table.iter().zip(a) {
        let conv = circular_convolve(lattice, kc, b);
        for (x, y) in ac.iter().zip(&conv) {
            acc.add(x * y);
        }
    }
    Ok(acc.value() * cell * cell)
}

/// Direct `O(n²)` evaluation of [`pair_sum`].
pub fn pair_sum_direct(lattice: &Lattice, kind: KernelKind, a: &[Vec<f64>], b: &[f64]) -> Result<f64> {
    let table = kernel_table(lattice, kind);
    if a.len() != table.len() || b.len() != lattice.len() {
        return Err(Error::GridMismatch);
    }
    let n = lattice.len();
    let cell = lattice.dx.powi(lattice.dim as i32);
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut acc = summation::NeumaierSum::new();
            for y in 0..n {
                let off = lattice.difference(x, y);
                let k: f64 = table.iter().zip(a).map(|(kc, ac)| kc[off] * ac[x]).sum();
                acc.add(k * b[y]);
            }
            acc.value()
        })
        .collect();
    Ok(summation::sum(rows) * cell * cell)
}

/// `M(t) = ΣΣ (x−y)/|x−y| · p(x) m(y) Δx^{2d}`.
pub fn interaction_functional(densities: &LocalDensities) -> Result<f64> {
    pair_sum(
        &Lattice::of(&densities.grid),
        KernelKind::Direction,
        &densities.momentum,
        &densities.mass,
    )
}

/// Fraction of `Σ m` carried by the inner half-box `|x_i| ≤ L/2`.
pub fn localization_ratio(densities: &LocalDensities) -> f64 {
    let grid = densities.grid;
    let half = grid.half_width / 2.0;
    let total = summation::sum(densities.mass.iter().copied());
    if total == 0.0 {
        return 1.0;
    }
    let inner = summation::sum(densities.mass.iter().enumerate().filter_map(|(i, m)| {
        let x = grid.position(i);
        x[..grid.dim].iter().all(|c| c.abs() <= half).then_some(*m)
    }));
    inner / total
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MorawetzReport {
    pub dim: usize,
    /// `‖w‖⁴_{L⁴}` (3D) or `‖|∇|^{−1/4}w‖⁴_{L⁴}` (4D).
    pub lhs: f64,
    /// Named right-hand terms in display order.
    pub terms: Vec<(String, f64)>,
    pub rhs: f64,
    /// `lhs / rhs`.
    pub c_star: f64,
    /// Homogeneity degree of the left side and of each term under
    /// `(v, w) ↦ (αv, αw)`.
    pub lhs_degree: u32,
    pub term_degrees: Vec<u32>,
    pub times: Vec<f64>,
    pub functional: Vec<f64>,
    pub localization: Vec<f64>,
}

fn st(traj: &Trajectory, ch: Channel, q: f64, r: f64, d: Derivative) -> Result<f64> {
    spacetime_norm(traj, ch, &NormSpec::new(q, r, d)?)
}

/// `‖∇f‖_{L²_t L^∞_x}` with the pointwise Euclidean gradient length.
fn grad_l2_linf(traj: &Trajectory, ch: Channel) -> Result<f64> {
    let vals: Vec<f64> = traj
        .channel(ch)?
        .par_iter()
        .map(|f| spatial_norm(&gradient_magnitude(f), f64::INFINITY))
        .collect();
    time_norm(traj.times(), &vals, 2.0)
}

pub fn morawetz_audit(traj: &Trajectory, dim: usize, power: f64) -> Result<MorawetzReport> {
    if traj.grid().dim != dim {
        return Err(Error::InvalidArgument(format!(
            "audit dimension {dim} does not match trajectory dimension {}",
            traj.grid().dim
        )));
    }
    if dim != 3 && dim != 4 {
        return Err(Error::InvalidArgument(format!("audit defined for d = 3, 4, got {dim}")));
    }
    let (u, v, w) = (Channel::U, Channel::V, Channel::W);
    for ch in [u, v, w] {
        traj.channel(ch)?;
    }
    let inf = f64::INFINITY;
    use Derivative::{Homogeneous as Hom, Inhomogeneous as Inh, None as Plain};
    let w_l2 = st(traj, w, inf, 2.0, Plain)?;
    let w_h_half = st(traj, w, inf, 2.0, Hom(0.5))?;
    let v_l2_linf = st(traj, v, 2.0, inf, Plain)?;
    let grad_v = grad_l2_linf(traj, v)?;
    let v_l4 = st(traj, v, 4.0, 4.0, Plain)?;

    let (lhs, terms, lhs_degree, term_degrees) = if dim == 3 {
        let w_l4 = st(traj, w, 4.0, 4.0, Plain)?;
        let w_l6 = st(traj, w, inf, 6.0, Plain)?;
        let v_l6 = st(traj, v, inf, 6.0, Plain)?;
        let middle = (w_l4.powi(2) + v_l4.powi(2)) * (w_l6.powi(3) + v_l6.powi(3));
        (
            w_l4.powi(4),
            vec![
                ("T1".to_string(), w_l2.powi(2) * w_h_half.powi(2)),
                ("T2".to_string(), v_l2_linf * middle * w_h_half.powi(2)),
                ("T3".to_string(), grad_v * middle * w_l2.powi(2)),
            ],
            4,
            vec![4, 8, 8],
        )
    } else {
        let w_neg = st(traj, w, 4.0, 4.0, Hom(-0.25))?;
        let w_inh_half = st(traj, w, inf, 2.0, Inh(0.5))?;
        let v_l6_l3 = st(traj, v, 6.0, 3.0, Plain)?;
        (
            w_neg.powi(4),
            vec![
                ("T1".to_string(), w_l2.powi(2) * w_h_half.powi(2)),
                (
                    "T2".to_string(),
                    w_inh_half
                        * w_neg.powi(2)
                        * (v_l2_linf * w_h_half.powi(2) + grad_v * w_l2.powi(2)),
                ),
                (
                    "T3".to_string(),
                    v_l2_linf * w_h_half.powi(2) * (w_l2 * v_l4.powi(2) + v_l6_l3.powi(3)),
                ),
            ],
            4,
            vec![4, 6, 6],
        )
    };
    let rhs = summation::sum(terms.iter().map(|t| t.1));
    let c_star = if lhs == 0.0 {
        0.0
    } else if rhs == 0.0 {
        f64::INFINITY
    } else {
        lhs / rhs
    };

    let snapshots: Vec<(f64, f64)> = traj
        .channel(w)?
        .par_iter()
        .zip(traj.channel(u)?.par_iter())
        .map(|(wf, uf)| {
            let dens = local_densities(wf, uf, power)?;
            Ok((interaction_functional(&dens)?, localization_ratio(&dens)))
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(MorawetzReport {
        dim,
        lhs,
        terms,
        rhs,
        c_star,
        lhs_degree,
        term_degrees,
        times: traj.times().to_vec(),
        functional: snapshots.iter().map(|s| s.0).collect(),
        localization: snapshots.iter().map(|s| s.1).collect(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleConstant {
    pub c_max: f64,
    pub c_median: f64,
    pub spread: f64,
    /// Runs with `lhs > c_max · rhs`.
    pub violations: usize,
}

/// Stability of fitted constants across an ensemble (`spread = max/median`).
pub fn ensemble_constant(lhs: &[f64], rhs: &[f64]) -> Result<EnsembleConstant> {
    if lhs.is_empty() || lhs.len() != rhs.len() {
        return Err(Error::InsufficientData("need matching, nonempty lhs/rhs lists".into()));
    }
    let mut cs: Vec<f64> = lhs
        .iter()
        .zip(rhs)
        .map(|(l, r)| if *l == 0.0 { 0.0 } else { l / r })
        .collect();
    if cs.iter().any(|c| !c.is_finite()) {
        return Err(Error::Degenerate("a right-hand side vanished with nonzero lhs".into()));
    }
    cs.sort_by(f64::total_cmp);
    let n = cs.len();
    let c_median = if n % 2 == 1 {
        cs[n / 2]
    } else {
        0.5 * (cs[n / 2 - 1] + cs[n / 2])
    };
    let c_max = cs[n - 1];
    let violations = lhs
        .iter()
        .zip(rhs)
        .filter(|(l, r)| **l > c_max * **r * (1.0 + 1e-12))
        .count();
    Ok(EnsembleConstant {
        c_max,
        c_median,
        spread: if c_median > 0.0 { c_max / c_median } else { f64::INFINITY },
        violations,
    })
}

/// Per-snapshot ratio `‖w‖³_{L³} / (‖w‖_{H^{1/2}} ‖|∇|^{−1/4}w‖²_{L⁴})`.
pub fn gn_ratios(traj: &Trajectory) -> Result<Vec<f64>> {
    traj.channel(Channel::W)?
        .par_iter()
        .map(|w| {
            let l3 = spatial_norm(w, 3.0);
            let h = Derivative::Inhomogeneous(0.5).apply(w).l2_norm();
            let neg = spatial_norm(&Derivative::Homogeneous(-0.25).apply(w), 4.0);
            let denom = h * neg * neg;
            if l3 == 0.0 {
                Ok(0.0)
            } else if denom == 0.0 {
                Err(Error::Degenerate("GN denominator vanished".into()))
            } else {
                Ok(l3.powi(3) / denom)
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MainTermResidual {
    pub points: Vec<usize>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub max_relative: f64,
}

/// Both sides of
/// `∫K(x−y)·Re[(N(u)−N(w))∇w̄] = −(d−1)/(p+2) ∫(|u|^{p+2}−|w|^{p+2})/|x−y| − ∫K(x−y)·Re[N(u)∇v̄]`
/// by lattice quadrature at each sample point `y`.
pub fn identity_mor_mainterm(
    u: &SpectralField,
    v: &SpectralField,
    w: &SpectralField,
    power: f64,
    points: &[usize],
) -> Result<MainTermResidual> {
    u.check_same_grid(v)?;
    u.check_same_grid(w)?;
    let grid = *u.grid();
    let lattice = Lattice::of(&grid);
    let dim = grid.dim;
    let cell = grid.cell_volume();
    let u_p = u.clone().into_physical();
    let w_p = w.clone().into_physical();
    let grad_w: Vec<SpectralField> = gradient(w).into_iter().map(|g| g.into_physical()).collect();
    let grad_v: Vec<SpectralField> = gradient(v).into_iter().map(|g| g.into_physical()).collect();
    let n = grid.len();
    // Vector integrands and the scalar one, pointwise.
    let mut lhs_vec = vec![vec![0.0; n]; dim];
    let mut rhs_vec = vec![vec![0.0; n]; dim];
    let mut scalar = vec![0.0; n];
    for x in 0..n {
        let nu = nonlinearity(u_p.data()[x], power);
        let nw = nonlinearity(w_p.data()[x], power);
        for a in 0..dim {
            lhs_vec[a][x] = ((nu - nw) * grad_w[a].data()[x].conj()).re;
            rhs_vec[a][x] = (nu * grad_v[a].data()[x].conj()).re;
        }
        scalar[x] = u_p.data()[x].norm().powf(power + 2.0) - w_p.data()[x].norm().powf(power + 2.0);
    }
    let coeff = (dim as f64 - 1.0) / (power + 2.0);
    let table_dir = kernel_table(&lattice, KernelKind::Direction);
    let table_inv = kernel_table(&lattice, KernelKind::InverseDistance);
    let sides: Vec<(f64, f64)> = points
        .par_iter()
        .map(|&y| {
            let mut l = summation::NeumaierSum::new();
            let mut r_dir = summation::NeumaierSum::new();
            let mut r_inv = summation::NeumaierSum::new();
            for x in 0..n {
                let off = lattice.difference(x, y);
                for a in 0..dim {
                    l.add(table_dir[a][off] * lhs_vec[a][x]);
                    r_dir.add(table_dir[a][off] * rhs_vec[a][x]);
                }
                r_inv.add(table_inv[0][off] * scalar[x]);
            }
            (
                l.value() * cell,
                (-coeff * r_inv.value() - r_dir.value()) * cell,
            )
        })
        .collect();
    let max_relative = sides
        .iter()
        .map(|(l, r)| {
            let scale = l.abs().max(r.abs());
            if scale == 0.0 {
                0.0
            } else {
                (l - r).abs() / scale
            }
        })
        .fold(0.0, f64::max);
    Ok(MainTermResidual {
        points: points.to_vec(),
        lhs: sides.iter().map(|s| s.0).collect(),
        rhs: sides.iter().map(|s| s.1).collect(),
        max_relative,
    })
}
