//! Binary snapshot format.
//!
//! Header: magic `RNLS`, version `u32`, `d u32`, `M u32`, `L f64`, `t f64`,
//! representation tag `u8`; then `M^d` complex samples as little-endian `f64`
//! pairs, row-major with axis 0 slowest. All integers are little-endian.

use num_complex::Complex64;
use std::io::{Read, Write};

use super::field::{Representation, SpectralField};
use super::grid::GridSpec;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"RNLS";
pub const VERSION: u32 = 1;

pub fn write_snapshot<W: Write>(mut out: W, field: &SpectralField, t: f64) -> Result<()> {
    let g = field.grid();
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(g.dim as u32).to_le_bytes())?;
    out.write_all(&(g.points as u32).to_le_bytes())?;
    out.write_all(&g.half_width.to_le_bytes())?;
    out.write_all(&t.to_le_bytes())?;
    out.write_all(&[field.representation().tag()])?;
    let mut buf = Vec::with_capacity(16 * field.data().len());
    for z in field.data() {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

fn read_array<const N: usize, R: Read>(input: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    input.read_exact(&mut b)?;
    Ok(b)
}

/// Returns the field and its time stamp.
pub fn read_snapshot<R: Read>(mut input: R) -> Result<(SpectralField, f64)> {
    let magic: [u8; 4] = read_array(&mut input)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = u32::from_le_bytes(read_array(&mut input)?);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let dim = u32::from_le_bytes(read_array(&mut input)?) as usize;
    let points = u32::from_le_bytes(read_array(&mut input)?) as usize;
    let half_width = f64::from_le_bytes(read_array(&mut input)?);
    let t = f64::from_le_bytes(read_array(&mut input)?);
    let [tag] = read_array::<1, _>(&mut input)?;
    let repr = Representation::from_tag(tag)
        .ok_or_else(|| Error::Format(format!("unknown representation tag {tag}")))?;
    let grid = GridSpec::new(dim, points, half_width).map_err(|e| Error::Format(e.to_string()))?;
    let mut raw = vec![0u8; 16 * grid.len()];
    input.read_exact(&mut raw)?;
    let data = raw
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    Ok((SpectralField::from_vec(grid, data, repr)?, t))
}
