use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::field::SpectralField;
use super::grid::GridSpec;
use super::Channel;
use crate::error::{Error, Result};

/// Where a trajectory came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: Option<u64>,
    pub config_hash: Option<String>,
    pub dt: Option<f64>,
    pub snapshot_stride: Option<f64>,
}

/// Time-indexed snapshots of one or more labelled channels on a shared grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    grid: GridSpec,
    times: Vec<f64>,
    channels: BTreeMap<Channel, Vec<SpectralField>>,
    pub provenance: Provenance,
}

impl Trajectory {
    /// Times must be increasing with a uniform stride (to 1e-12 relative).
    pub fn new(grid: GridSpec, times: Vec<f64>) -> Result<Self> {
        if times.len() >= 2 {
            let h = times[1] - times[0];
            if !(h > 0.0) {
                return Err(Error::InvalidArgument("time grid must be increasing".into()));
            }
            let span = times[times.len() - 1] - times[0];
            for (k, pair) in times.windows(2).enumerate() {
                let step = pair[1] - pair[0];
                if (step - h).abs() > 1e-12 * span.max(1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "time stride not uniform at snapshot {k}: {step} vs {h}"
                    )));
                }
            }
        }
        Ok(Self {
            grid,
            times,
            channels: BTreeMap::new(),
            provenance: Provenance::default(),
        })
    }

    /// Uniform grid `t0, t0 + h, …` with `count` points.
    pub fn uniform_times(t0: f64, h: f64, count: usize) -> Vec<f64> {
        (0..count).map(|k| t0 + k as f64 * h).collect()
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Time stride, or 0 for fewer than two snapshots.
    pub fn stride(&self) -> f64 {
        if self.times.len() < 2 {
            0.0
        } else {
            self.times[1] - self.times[0]
        }
    }

    pub fn insert_channel(&mut self, channel: Channel, fields: Vec<SpectralField>) -> Result<()> {
        if fields.len() != self.times.len() {
            return Err(Error::InvalidArgument(format!(
                "channel {} has {} snapshots, trajectory has {}",
                channel.name(),
                fields.len(),
                self.times.len()
            )));
        }
        if fields.iter().any(|f| *f.grid() != self.grid) {
            return Err(Error::GridMismatch);
        }
        self.channels.insert(channel, fields);
        Ok(())
    }

    pub fn channel(&self, channel: Channel) -> Result<&[SpectralField]> {
        self.channels
            .get(&channel)
            .map(Vec::as_slice)
            .ok_or(Error::MissingChannel(channel))
    }

    pub fn has_channel(&self, channel: Channel) -> bool {
        self.channels.contains_key(&channel)
    }

    pub fn channels(&self) -> impl Iterator<Item = Channel> + '_ {
        self.channels.keys().copied()
    }

    /// Every channel multiplied by the real factor `alpha`.
    pub fn scaled(&self, alpha: f64) -> Self {
        let factor = num_complex::Complex64::new(alpha, 0.0);
        let channels = self
            .channels
            .iter()
            .map(|(c, fs)| (*c, fs.iter().map(|f| f.scaled(factor)).collect()))
            .collect();
        Self {
            grid: self.grid,
            times: self.times.clone(),
            channels,
            provenance: self.provenance.clone(),
        }
    }

    /// Snapshots `0..count` only.
    pub fn truncated(&self, count: usize) -> Self {
        let count = count.min(self.times.len());
        Self {
            grid: self.grid,
            times: self.times[..count].to_vec(),
            channels: self
                .channels
                .iter()
                .map(|(c, fs)| (*c, fs[..count].to_vec()))
                .collect(),
            provenance: self.provenance.clone(),
        }
    }

    /// Every `step`-th snapshot, starting from the first.
    pub fn thinned(&self, step: usize) -> Self {
        let step = step.max(1);
        let keep: Vec<usize> = (0..self.times.len()).step_by(step).collect();
        Self {
            grid: self.grid,
            times: keep.iter().map(|&k| self.times[k]).collect(),
            channels: self
                .channels
                .iter()
                .map(|(c, fs)| (*c, keep.iter().map(|&k| fs[k].clone()).collect()))
                .collect(),
            provenance: self.provenance.clone(),
        }
    }
}
