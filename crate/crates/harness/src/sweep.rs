//! One-axis parameter sweeps.

use crate::config::{ExperimentConfig, SweepConfig};
use crate::HarnessError;

/// Per-value configs of a sweep, each resolved to the base kind and validated.
pub fn expand(cfg: &ExperimentConfig) -> Result<Vec<(f64, ExperimentConfig)>, HarnessError> {
    let sw = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| HarnessError::Config("[sweep] is required for sweep".into()))?;
    let mut seen = Vec::new();
    sw.values
        .iter()
        .map(|&value| {
            if seen.iter().any(|v: &f64| v.to_bits() == value.to_bits()) {
                return Err(HarnessError::Config(format!("sweep value {value} repeated")));
            }
            seen.push(value);
            let mut sub = cfg.with_axis(&sw.axis, value)?;
            sub.kind = Some(sw.base);
            sub.validate()
                .map_err(|e| HarnessError::Config(format!("{} = {value}: {e}", sw.axis)))?;
            Ok((value, sub))
        })
        .collect()
}

/// Warn about metrics that rise along the axis where they should not.
pub fn report_trends(sw: &SweepConfig, increasing: &[String]) {
    if sw.axis == "solver.n0" {
        for name in ["energy_ratio", "mass_ratio"] {
            if increasing.iter().any(|m| m == name) {
                log::warn!("{name} is not nonincreasing in N0 across {:?}", sw.values);
            }
        }
    }
}
