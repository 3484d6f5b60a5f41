//! Result records, the append-only JSONL log, and summary tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::HarnessError;

pub const RECORDS_FILE: &str = "records.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const TABLE_FILE: &str = "records.csv";
pub const SUMMARY_TABLE_FILE: &str = "summary.csv";

/// JSON has no infinities or NaN; those travel as the strings `"inf"`,
/// `"-inf"` and `"nan"`.
mod lossless {
    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    fn encode(x: f64) -> Repr {
        if x.is_finite() {
            Repr::Num(x)
        } else if x.is_nan() {
            Repr::Text("nan".into())
        } else if x > 0.0 {
            Repr::Text("inf".into())
        } else {
            Repr::Text("-inf".into())
        }
    }

    fn decode<E: Error>(r: Repr) -> Result<f64, E> {
        match r {
            Repr::Num(x) => Ok(x),
            Repr::Text(s) => match s.as_str() {
                "nan" => Ok(f64::NAN),
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(E::custom(format!("not a number: {other}"))),
            },
        }
    }

    pub mod scalars {
        use super::*;

        pub fn serialize<S: Serializer>(m: &BTreeMap<String, f64>, s: S) -> Result<S::Ok, S::Error> {
            let enc: BTreeMap<&String, Repr> = m.iter().map(|(k, v)| (k, encode(*v))).collect();
            enc.serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, f64>, D::Error> {
            BTreeMap::<String, Repr>::deserialize(d)?
                .into_iter()
                .map(|(k, v)| decode(v).map(|x| (k, x)))
                .collect()
        }
    }

    pub mod series {
        use super::*;

        pub fn serialize<S: Serializer>(m: &BTreeMap<String, Vec<f64>>, s: S) -> Result<S::Ok, S::Error> {
            let enc: BTreeMap<&String, Vec<Repr>> =
                m.iter().map(|(k, v)| (k, v.iter().map(|x| encode(*x)).collect())).collect();
            enc.serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, Vec<f64>>, D::Error> {
            BTreeMap::<String, Vec<Repr>>::deserialize(d)?
                .into_iter()
                .map(|(k, v)| v.into_iter().map(decode).collect::<Result<Vec<_>, _>>().map(|x| (k, x)))
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub config_hash: String,
    pub kind: String,
    /// Sweep coordinate; absent for single runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis_value: Option<f64>,
    pub sample: u64,
    pub seed: u64,
    #[serde(with = "lossless::scalars")]
    pub metrics: BTreeMap<String, f64>,
    #[serde(default, with = "lossless::series")]
    pub series: BTreeMap<String, Vec<f64>>,
    pub wall_clock_s: f64,
    #[serde(default)]
    pub artifacts: Vec<PathBuf>,
}

impl ResultRecord {
    /// Identity used for resume.
    pub fn key(&self) -> (Option<u64>, u64) {
        (self.axis_value.map(f64::to_bits), self.seed)
    }
}

/// Serialized appender for `records.jsonl`. Each record is one line,
/// flushed before `append` returns.
pub struct RecordWriter {
    file: Mutex<File>,
}

impl RecordWriter {
    pub fn open(dir: &Path) -> Result<Self, HarnessError> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(RECORDS_FILE);
        let mut file = OpenOptions::new().create(true).append(true).read(true).open(&path)?;
        // A crash mid-write leaves a partial last line; terminate it so the
        // next record starts cleanly. The fragment is skipped on load.
        let len = file.metadata()?.len();
        if len > 0 {
            use std::io::{Read, Seek, SeekFrom};
            let mut last = [0u8; 1];
            let mut reader = File::open(&path)?;
            reader.seek(SeekFrom::Start(len - 1))?;
            reader.read_exact(&mut last)?;
            if last[0] != b'\n' {
                file.write_all(b"\n")?;
            }
        }
        Ok(Self { file: Mutex::new(file) })
    }

    pub fn append(&self, record: &ResultRecord) -> Result<(), HarnessError> {
        let mut line = serde_json::to_vec(record)?;
        line.push(b'\n');
        let mut f = self.file.lock().expect("record writer poisoned");
        f.write_all(&line)?;
        f.flush()?;
        Ok(())
    }
}

/// Every complete record in `dir`, in file order. Unparseable lines are
/// dropped with a warning.
pub fn load_records(dir: &Path) -> Result<Vec<ResultRecord>, HarnessError> {
    let path = dir.join(RECORDS_FILE);
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for (n, line) in BufReader::new(File::open(&path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line) {
            Ok(r) => out.push(r),
            Err(e) => log::warn!("{}:{}: skipping unreadable record ({e})", path.display(), n + 1),
        }
    }
    Ok(out)
}

/// Keep the first record per key and sort by `(axis_value, seed)`.
pub fn canonical(records: Vec<ResultRecord>) -> Vec<ResultRecord> {
    let mut seen = BTreeSet::new();
    let mut out: Vec<ResultRecord> = records.into_iter().filter(|r| seen.insert(r.key())).collect();
    out.sort_by(|a, b| {
        let ax = a.axis_value.unwrap_or(f64::NEG_INFINITY);
        let bx = b.axis_value.unwrap_or(f64::NEG_INFINITY);
        ax.total_cmp(&bx).then(a.sample.cmp(&b.sample)).then(a.seed.cmp(&b.seed))
    });
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub count: usize,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub max: f64,
    pub mean: f64,
}

/// Linear-interpolated quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

impl MetricSummary {
    pub fn of(values: &[f64]) -> Self {
        let mut v: Vec<f64> = values.to_vec();
        v.sort_by(f64::total_cmp);
        Self {
            count: v.len(),
            median: quantile(&v, 0.5),
            q25: quantile(&v, 0.25),
            q75: quantile(&v, 0.75),
            max: v.last().copied().unwrap_or(f64::NAN),
            mean: rnls_core::summation::sum(values.iter().copied()) / values.len() as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis_value: Option<f64>,
    pub records: usize,
    pub metrics: BTreeMap<String, MetricSummary>,
    /// Ensemble-level quantities (fitted constants, tail fits).
    #[serde(with = "lossless::scalars")]
    pub ensemble: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub kind: String,
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<String>,
    pub groups: Vec<GroupSummary>,
    /// Metrics whose median is not nonincreasing along the sweep axis.
    #[serde(default)]
    pub increasing_along_axis: Vec<String>,
}

/// Split canonical records by axis value, preserving order.
pub fn groups(records: &[ResultRecord]) -> Vec<(Option<f64>, Vec<&ResultRecord>)> {
    let mut out: Vec<(Option<f64>, Vec<&ResultRecord>)> = Vec::new();
    for r in records {
        match out.last_mut() {
            Some((ax, rs)) if ax.map(f64::to_bits) == r.axis_value.map(f64::to_bits) => rs.push(r),
            _ => out.push((r.axis_value, vec![r])),
        }
    }
    out
}

pub fn summarize_group(axis_value: Option<f64>, records: &[&ResultRecord]) -> GroupSummary {
    let mut columns: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in records {
        for (k, v) in &r.metrics {
            columns.entry(k.clone()).or_default().push(*v);
        }
    }
    GroupSummary {
        axis_value,
        records: records.len(),
        metrics: columns.iter().map(|(k, v)| (k.clone(), MetricSummary::of(v))).collect(),
        ensemble: BTreeMap::new(),
    }
}

/// Metrics whose median rises somewhere along the (sorted) axis.
pub fn increasing_metrics(groups: &[GroupSummary]) -> Vec<String> {
    let names: BTreeSet<&String> = groups.iter().flat_map(|g| g.metrics.keys()).collect();
    names
        .into_iter()
        .filter(|name| {
            let medians: Vec<f64> = groups
                .iter()
                .filter_map(|g| g.metrics.get(*name).map(|m| m.median))
                .collect();
            medians.windows(2).any(|w| w[1] > w[0])
        })
        .cloned()
        .collect()
}

pub fn write_summary(dir: &Path, summary: &Summary, records: &[ResultRecord]) -> Result<(), HarnessError> {
    std::fs::write(dir.join(SUMMARY_FILE), serde_json::to_vec_pretty(summary)?)?;

    let mut long = csv::Writer::from_path(dir.join(TABLE_FILE))?;
    long.write_record(["axis_value", "seed", "metric", "value"])?;
    for r in records {
        let axis = r.axis_value.map(|a| a.to_string()).unwrap_or_default();
        for (k, v) in &r.metrics {
            long.write_record([axis.as_str(), &r.seed.to_string(), k, &v.to_string()])?;
        }
    }
    long.flush()?;

    let mut table = csv::Writer::from_path(dir.join(SUMMARY_TABLE_FILE))?;
    table.write_record(["axis_value", "metric", "count", "median", "q25", "q75", "max", "mean"])?;
    for g in &summary.groups {
        let axis = g.axis_value.map(|a| a.to_string()).unwrap_or_default();
        for (k, m) in &g.metrics {
            table.write_record([
                axis.clone(),
                k.clone(),
                m.count.to_string(),
                m.median.to_string(),
                m.q25.to_string(),
                m.q75.to_string(),
                m.max.to_string(),
                m.mean.to_string(),
            ])?;
        }
    }
    table.flush()?;
    Ok(())
}
