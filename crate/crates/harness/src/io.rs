//! Trajectory persistence: a directory with `manifest.json` and one binary
//! snapshot file per (channel, time index).

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use rnls_core::spectral::snapshot::{read_snapshot, write_snapshot};
use rnls_core::spectral::{Channel, GridSpec, Provenance, Trajectory};
use serde::{Deserialize, Serialize};

use crate::HarnessError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub grid: GridSpec,
    pub times: Vec<f64>,
    pub channels: Vec<Channel>,
    pub provenance: Provenance,
}

fn snapshot_name(ch: Channel, k: usize) -> String {
    format!("{}_{k:05}.bin", ch.name())
}

pub fn save_trajectory(traj: &Trajectory, dir: &Path) -> Result<PathBuf, HarnessError> {
    std::fs::create_dir_all(dir)?;
    let channels: Vec<Channel> = traj.channels().collect();
    for &ch in &channels {
        for (k, (field, t)) in traj.channel(ch)?.iter().zip(traj.times()).enumerate() {
            let out = BufWriter::new(File::create(dir.join(snapshot_name(ch, k)))?);
            write_snapshot(out, field, *t)?;
        }
    }
    let manifest = Manifest {
        grid: *traj.grid(),
        times: traj.times().to_vec(),
        channels,
        provenance: traj.provenance.clone(),
    };
    let path = dir.join(MANIFEST);
    std::fs::write(&path, serde_json::to_vec_pretty(&manifest)?)?;
    Ok(path)
}

pub fn load_trajectory(dir: &Path) -> Result<Trajectory, HarnessError> {
    let manifest: Manifest = serde_json::from_reader(BufReader::new(File::open(dir.join(MANIFEST))?))?;
    let mut traj = Trajectory::new(manifest.grid, manifest.times.clone())?;
    for &ch in &manifest.channels {
        let fields = (0..manifest.times.len())
            .map(|k| -> Result<_, HarnessError> {
                let input = BufReader::new(File::open(dir.join(snapshot_name(ch, k)))?);
                let (field, t) = read_snapshot(input)?;
                if t.to_bits() != manifest.times[k].to_bits() || *field.grid() != manifest.grid {
                    return Err(HarnessError::Core(rnls_core::Error::Format(format!(
                        "snapshot {} disagrees with the manifest",
                        snapshot_name(ch, k)
                    ))));
                }
                Ok(field)
            })
            .collect::<Result<Vec<_>, _>>()?;
        traj.insert_channel(ch, fields)?;
    }
    traj.provenance = manifest.provenance;
    Ok(traj)
}
