//! Per-sample dispatch into the toolkit, resume, and summary assembly.
//!
//! Sample `k` of a run uses seed `derive_seed(master, k)`. Pending samples go
//! through a bounded rayon pool; each finished record is appended through a
//! single writer, so a killed run loses at most the samples in flight.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use rnls_core::linear_flow::{composite_norm, linear_trajectory, CompositeNormSpec};
use rnls_core::morawetz::{ensemble_constant, gn_ratios, morawetz_audit};
use rnls_core::partition::{formula_count, FrequencyPartition};
use rnls_core::randomization::{coefficient, derive_seed, draw, tail_fit};
use rnls_core::solver::{
    almost_conservation_monitor, check_forcing_support, increment_residuals, scattering_proxy,
    solve_w, twin_run, ForcedRun,
};
use rnls_core::spectral::{Representation, SpectralField, Trajectory};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::data::{initial_datum, randomized_split, Split};
use crate::records::{
    canonical, groups, increasing_metrics, load_records, summarize_group, write_summary,
    GroupSummary, RecordWriter, ResultRecord, Summary,
};
use crate::HarnessError;

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub output: PathBuf,
    /// Every record for this config, sorted by `(axis_value, seed)`.
    pub records: Vec<ResultRecord>,
    pub summary: Summary,
    pub executed: usize,
    pub skipped: usize,
}

/// Output directory: the configured one, else `runs/<kind>-<hash>`.
pub fn output_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs").join(format!("{}-{}", cfg.kind().name(), cfg.hash())))
}

/// Run `cfg` (already resolved to its kind) with `workers` threads.
pub fn run(cfg: &ExperimentConfig, workers: usize) -> Result<RunOutcome, HarnessError> {
    cfg.validate()?;
    let plan: Vec<(Option<f64>, ExperimentConfig)> = match cfg.kind() {
        ExperimentKind::Sweep => crate::sweep::expand(cfg)?
            .into_iter()
            .map(|(v, c)| (Some(v), c))
            .collect(),
        _ => vec![(None, cfg.clone())],
    };
    let workers = workers.max(1);
    for (_, c) in &plan {
        let need = c.estimated_memory_mb(workers);
        if need > cfg.memory_limit_mb {
            return Err(HarnessError::Resource(format!(
                "estimated peak memory {need:.0} MiB exceeds the limit of {:.0} MiB",
                cfg.memory_limit_mb
            )));
        }
    }

    let dir = output_dir(cfg);
    let hash = cfg.hash();
    let previous = load_records(&dir)?;
    if let Some(other) = previous.iter().find(|r| r.config_hash != hash) {
        return Err(HarnessError::Config(format!(
            "{} already holds records of config {}; this config is {hash}",
            dir.display(),
            other.config_hash
        )));
    }
    let done: BTreeSet<(Option<u64>, u64)> = previous.iter().map(ResultRecord::key).collect();
    let writer = RecordWriter::open(&dir)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::Resource(e.to_string()))?;
    let (mut executed, mut skipped) = (0, 0);
    pool.install(|| -> Result<(), HarnessError> {
        for (axis_value, sub) in &plan {
            let pending: Vec<(u64, u64)> = (0..sub.samples as u64)
                .map(|k| (k, derive_seed(sub.seed, k)))
                .filter(|(_, seed)| !done.contains(&(axis_value.map(f64::to_bits), *seed)))
                .collect();
            skipped += sub.samples - pending.len();
            if pending.is_empty() {
                continue;
            }
            let prepared = Prepared::new(sub)?;
            pending.par_iter().try_for_each(|&(k, seed)| {
                let started = Instant::now();
                let out = prepared.sample(seed, &dir, *axis_value, &hash)?;
                writer.append(&ResultRecord {
                    config_hash: hash.clone(),
                    kind: prepared.kind.name().to_string(),
                    axis_value: *axis_value,
                    sample: k,
                    seed,
                    metrics: out.metrics,
                    series: out.series,
                    wall_clock_s: started.elapsed().as_secs_f64(),
                    artifacts: out.artifacts,
                })
            })?;
            executed += pending.len();
        }
        Ok(())
    })?;
    drop(writer);

    let records = canonical(load_records(&dir)?);
    let summary = summarize(cfg, &records);
    write_summary(&dir, &summary, &records)?;
    log::info!("{}: {executed} samples run, {skipped} skipped", dir.display());
    Ok(RunOutcome {
        output: dir,
        records,
        summary,
        executed,
        skipped,
    })
}

/// Summary of canonical records; recomputable from the record log alone.
pub fn summarize(cfg: &ExperimentConfig, records: &[ResultRecord]) -> Summary {
    let base = match (cfg.kind(), &cfg.sweep) {
        (ExperimentKind::Sweep, Some(sw)) => sw.base,
        (k, _) => k,
    };
    let gs: Vec<GroupSummary> = groups(records)
        .into_iter()
        .map(|(ax, rs)| {
            let mut g = summarize_group(ax, &rs);
            g.ensemble = ensemble_metrics(base, &rs);
            g
        })
        .collect();
    let (axis, increasing) = match &cfg.sweep {
        Some(sw) if cfg.kind() == ExperimentKind::Sweep => {
            let inc = increasing_metrics(&gs);
            crate::sweep::report_trends(sw, &inc);
            (Some(sw.axis.clone()), inc)
        }
        _ => (None, Vec::new()),
    };
    Summary {
        kind: cfg.kind().name().to_string(),
        config_hash: cfg.hash(),
        axis,
        groups: gs,
        increasing_along_axis: increasing,
    }
}

fn ensemble_metrics(kind: ExperimentKind, records: &[&ResultRecord]) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    let column = |name: &str| -> Vec<f64> { records.iter().filter_map(|r| r.metrics.get(name).copied()).collect() };
    match kind {
        ExperimentKind::MorawetzAudit if !records.is_empty() => {
            match ensemble_constant(&column("lhs"), &column("rhs")) {
                Ok(c) => {
                    out.insert("c_max".into(), c.c_max);
                    out.insert("c_median".into(), c.c_median);
                    out.insert("c_spread".into(), c.spread);
                    out.insert("c_violations".into(), c.violations as f64);
                }
                Err(e) => log::warn!("ensemble constant unavailable: {e}"),
            }
            let gn: Vec<f64> = records
                .iter()
                .filter_map(|r| r.series.get("gn_ratio"))
                .flatten()
                .copied()
                .collect();
            if !gn.is_empty() {
                match ensemble_constant(&gn, &vec![1.0; gn.len()]) {
                    Ok(c) => {
                        out.insert("gn_c_max".into(), c.c_max);
                        out.insert("gn_spread".into(), c.spread);
                        out.insert("gn_violations".into(), c.violations as f64);
                    }
                    Err(e) => log::warn!("GN constant unavailable: {e}"),
                }
            }
        }
        ExperimentKind::LinearStats => {
            let values = column("combined");
            if values.len() >= 200 {
                match tail_fit(&values, None) {
                    Ok(t) => {
                        out.insert("tail_rate".into(), t.rate);
                        out.insert("tail_intercept".into(), t.intercept);
                        out.insert("tail_r_squared".into(), t.r_squared);
                    }
                    Err(e) => log::warn!("tail fit unavailable: {e}"),
                }
            }
        }
        ExperimentKind::Evolve if !records.is_empty() => {
            let failures = records
                .iter()
                .filter(|r| r.metrics.get("mass_ok") == Some(&0.0) || r.metrics.get("energy_ok") == Some(&0.0))
                .count();
            out.insert("monitor_failures".into(), failures as f64);
        }
        _ => {}
    }
    out
}

struct SampleOutput {
    metrics: BTreeMap<String, f64>,
    series: BTreeMap<String, Vec<f64>>,
    artifacts: Vec<PathBuf>,
}

impl SampleOutput {
    fn new() -> Self {
        Self {
            metrics: BTreeMap::new(),
            series: BTreeMap::new(),
            artifacts: Vec::new(),
        }
    }

    fn put(&mut self, name: impl Into<String>, value: f64) {
        self.metrics.insert(name.into(), value);
    }

    fn flag(&mut self, name: &str, value: bool) {
        self.put(name, if value { 1.0 } else { 0.0 });
    }
}

/// State shared by every sample of one config.
struct Prepared {
    cfg: ExperimentConfig,
    kind: ExperimentKind,
    partition: FrequencyPartition,
    datum: Option<SpectralField>,
}

impl Prepared {
    fn new(cfg: &ExperimentConfig) -> Result<Self, HarnessError> {
        let partition = FrequencyPartition::build(cfg.partition.expect("validated"), cfg.grid)?;
        let datum = cfg.data.as_ref().map(|d| initial_datum(cfg.grid, d));
        Ok(Self {
            cfg: cfg.clone(),
            kind: cfg.kind(),
            partition,
            datum,
        })
    }

    fn sample(&self, seed: u64, dir: &Path, axis: Option<f64>, hash: &str) -> Result<SampleOutput, HarnessError> {
        match self.kind {
            ExperimentKind::PartitionReport => Ok(self.partition_report(seed)),
            ExperimentKind::LinearStats => self.linear_stats(seed),
            ExperimentKind::Evolve => self.evolve(seed, dir, axis, hash),
            ExperimentKind::MorawetzAudit => self.morawetz(seed, dir, axis, hash),
            ExperimentKind::TwinLadder => self.twin(seed),
            ExperimentKind::Sweep => unreachable!("sweeps are expanded before dispatch"),
        }
    }

    fn split(&self, seed: u64) -> Result<Split, HarnessError> {
        let data = self.cfg.data.as_ref().expect("validated");
        let n0 = self.cfg.solver.expect("validated").n0;
        randomized_split(self.datum.as_ref().expect("validated"), &self.partition, seed, data.randomize, n0)
    }

    fn forced(&self, split: &Split) -> Result<ForcedRun, HarnessError> {
        let solver = self.cfg.solver.expect("validated");
        if split.v0.max_abs() > 0.0 {
            check_forcing_support(&split.v0, solver.n0)?;
        }
        Ok(solve_w(&split.w0, &split.v0, &solver)?)
    }

    fn save(&self, run: &ForcedRun, seed: u64, dir: &Path, axis: Option<f64>, hash: &str) -> Result<Vec<PathBuf>, HarnessError> {
        if !self.cfg.save_trajectories {
            return Ok(Vec::new());
        }
        let mut traj: Trajectory = run.trajectory.clone();
        traj.provenance.seed = Some(seed);
        traj.provenance.config_hash = Some(hash.to_string());
        let leaf = match axis {
            Some(a) => format!("{a}-{seed:016x}"),
            None => format!("{seed:016x}"),
        };
        Ok(vec![crate::io::save_trajectory(&traj, &dir.join("trajectories").join(leaf))?])
    }

    fn partition_report(&self, seed: u64) -> SampleOutput {
        let p = &self.partition;
        let cfg = p.config();
        let mut out = SampleOutput::new();
        out.put("cubes", p.len() as f64);
        for n in p.shells().collect::<Vec<_>>() {
            out.put(format!("shell_count[{n}]"), p.shell_count(n) as f64);
            out.put(format!("shell_count_per_orthant[{n}]"), p.shell_count_per_orthant(n) as f64);
            out.put(format!("formula_count[{n}]"), formula_count(cfg.dim, cfg.a, n) as f64);
        }
        out.put("unity_deviation", p.unity_deviation());
        out.put("max_overlap", p.max_overlap() as f64);
        out.flag("asymptotic_regime", cfg.asymptotic_regime());
        out.flag("floored", p.floored());
        // Complex Gaussian field on the covered lattice.
        let grid = *p.grid();
        let data: Vec<Complex64> = (0..grid.len())
            .map(|i| if p.is_covered(i) { coefficient(seed, i as u64) } else { Complex64::default() })
            .collect();
        let f = SpectralField::from_vec(grid, data, Representation::Frequency).expect("grid length");
        let total = f.l2_norm_squared();
        if total > 0.0 {
            let parts = p.projected_energies(&f).expect("same grid");
            out.put("orthogonality_ratio", rnls_core::summation::sum(parts) / total);
        }
        out
    }

    fn linear_stats(&self, seed: u64) -> Result<SampleOutput, HarnessError> {
        let lin = self.cfg.linear.as_ref().expect("validated");
        let data = self.cfg.data.as_ref().expect("validated");
        let part = self.cfg.partition.expect("validated");
        let n0 = lin.n0.unwrap_or_else(|| self.cfg.solver.expect("validated").n0);
        let f = self.datum.as_ref().expect("validated");
        let sample = if data.randomize {
            draw(f, &self.partition, seed)?.field
        } else {
            f.clone()
        };
        let times = if lin.snapshots == 1 {
            vec![0.0]
        } else {
            Trajectory::uniform_times(0.0, lin.t_final / (lin.snapshots - 1) as f64, lin.snapshots)
        };
        let traj = linear_trajectory(&sample, n0, &times)?;
        let mut out = SampleOutput::new();
        let mut totals = Vec::new();
        for &kind in &lin.norms {
            let spec = CompositeNormSpec::new(kind, part.s, part.a as f64, lin.epsilon);
            let norm = composite_norm(&traj, &spec)?;
            for (label, value) in &norm.components {
                out.put(format!("{}.{label}", kind.name()), *value);
            }
            out.put(kind.name(), norm.total);
            totals.push(norm.total);
        }
        out.put("combined", rnls_core::summation::sum(totals));
        Ok(out)
    }

    fn evolve(&self, seed: u64, dir: &Path, axis: Option<f64>, hash: &str) -> Result<SampleOutput, HarnessError> {
        let solver = self.cfg.solver.expect("validated");
        let s = self.cfg.partition.expect("validated").s;
        let split = self.split(seed)?;
        let run = self.forced(&split)?;
        let series = &run.series;
        let (m0, e0) = (series.mass[0], series.energy[0]);
        let n0 = solver.n0;
        let a_const = match self.cfg.monitor.as_ref().and_then(|m| m.a_const) {
            Some(a) => a,
            // Smallest A meeting both preconditions, padded against the
            // roundoff of the power round trip.
            None => (m0 * n0.powf(2.0 * s)).max(e0 * n0.powf(-2.0 * (1.0 - s))) * (1.0 + 1e-12),
        };
        let mut out = SampleOutput::new();
        out.put("mass0", m0);
        out.put("energy0", e0);
        out.put("steps", run.steps as f64);
        out.put("max_abs_u", run.trajectory.channel(rnls_core::spectral::Channel::U)?
            .iter()
            .map(|f| f.max_abs())
            .fold(0.0, f64::max));
        out.put("v0_l2", split.v0.l2_norm());
        out.put("w0_l2", split.w0.l2_norm());
        if a_const > 0.0 {
            let mon = almost_conservation_monitor(series, a_const, n0, s)?;
            out.put("a_const", a_const);
            out.put("mass_ratio", mon.mass_ratio);
            out.put("energy_ratio", mon.energy_ratio);
            out.put("sup_mass", mon.sup_mass);
            out.put("sup_energy", mon.sup_energy);
            out.flag("mass_ok", mon.mass_ok);
            out.flag("energy_ok", mon.energy_ok);
        }
        if run.trajectory.len() >= 3 {
            let power = solver.power()?;
            let r = increment_residuals(&run.trajectory, series, power, solver.mu)?;
            out.put("r_mass", r.max_rel_mass);
            out.put("r_energy", r.max_rel_energy);
        }
        if run.trajectory.len() >= 2 {
            let sc = scattering_proxy(&run.trajectory)?;
            for (i, d) in sc.deltas.iter().enumerate() {
                out.put(format!("scatter_delta[{}]", i + 1), *d);
            }
            out.flag("scatter_decreasing", sc.decreasing);
        }
        out.series.insert("time".into(), series.times.clone());
        out.series.insert("mass".into(), series.mass.clone());
        out.series.insert("energy".into(), series.energy.clone());
        out.artifacts = self.save(&run, seed, dir, axis, hash)?;
        Ok(out)
    }

    fn morawetz(&self, seed: u64, dir: &Path, axis: Option<f64>, hash: &str) -> Result<SampleOutput, HarnessError> {
        let solver = self.cfg.solver.expect("validated");
        let split = self.split(seed)?;
        let run = self.forced(&split)?;
        let rep = morawetz_audit(&run.trajectory, self.cfg.grid.dim, solver.power()?)?;
        let mut out = SampleOutput::new();
        out.put("lhs", rep.lhs);
        out.put("rhs", rep.rhs);
        out.put("c_star", rep.c_star);
        for (name, value) in &rep.terms {
            out.put(name.clone(), *value);
        }
        out.put("localization_min", rep.localization.iter().copied().fold(f64::INFINITY, f64::min));
        out.series.insert("time".into(), rep.times.clone());
        out.series.insert("functional".into(), rep.functional.clone());
        if self.cfg.grid.dim == 4 {
            let gn = gn_ratios(&run.trajectory)?;
            out.put("gn_max", gn.iter().copied().fold(0.0, f64::max));
            out.series.insert("gn_ratio".into(), gn);
        }
        out.artifacts = self.save(&run, seed, dir, axis, hash)?;
        Ok(out)
    }

    fn twin(&self, seed: u64) -> Result<SampleOutput, HarnessError> {
        let solver = self.cfg.solver.expect("validated");
        let alphas = &self.cfg.twin.as_ref().expect("validated").alphas;
        let split = self.split(seed)?;
        let rep = twin_run(&split.w0, &split.v0, &solver, alphas)?;
        let mut out = SampleOutput::new();
        for (a, d) in rep.alphas.iter().zip(&rep.divergence) {
            out.put(format!("divergence[{a}]"), d.unwrap_or(f64::NAN));
        }
        out.put("slope", rep.slope.unwrap_or(f64::NAN));
        out.flag("monotone", rep.monotone);
        Ok(out)
    }
}
