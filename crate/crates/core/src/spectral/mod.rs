//! Grids, transforms, Fourier multipliers and space-time norms.

pub mod fft;
mod field;
mod grid;
mod multiplier;
mod norms;
pub mod snapshot;
mod trajectory;

use serde::{Deserialize, Serialize};

pub use field::{Representation, SpectralField};
pub use grid::{GridSpec, MAX_DIM};
pub use multiplier::{
    dealias, fractional_derivative, free_propagate, gradient, gradient_magnitude,
    littlewood_paley, lp_cutoff, smoothstep, DerivativeKind, LpProjector,
};
pub use norms::{spacetime_norm, spatial_norm, time_norm, Derivative, NormSpec};
pub use trajectory::{Provenance, Trajectory};

/// Labels for the solution `u`, the free part `v` and the remainder `w`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Channel {
    U,
    V,
    W,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::U, Channel::V, Channel::W];

    pub fn name(self) -> &'static str {
        match self {
            Channel::U => "u",
            Channel::V => "v",
            Channel::W => "w",
        }
    }
}
