//! Multidimensional FFT on row-major grids.
//!
//! Forward transforms are the unnormalized sum `Σ_x f(x) e^{-2πi k·n/M}`;
//! inverse transforms carry the `1/M^d` factor. Plans are cached process-wide
//! behind a mutex and shared as `Arc`, so concurrent callers never contend on
//! the transform itself.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

type Plan = Arc<dyn Fft<f64>>;

fn plan(len: usize, direction: FftDirection) -> Plan {
    static CACHE: OnceLock<Mutex<(FftPlanner<f64>, HashMap<(usize, bool), Plan>)>> =
        OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new((FftPlanner::new(), HashMap::new())));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    let (planner, plans) = &mut *guard;
    let key = (len, direction == FftDirection::Forward);
    plans
        .entry(key)
        .or_insert_with(|| planner.plan_fft(len, direction))
        .clone()
}

/// In-place `dim`-dimensional transform of `data` with `points` per axis.
pub fn transform(data: &mut [Complex64], points: usize, dim: usize, direction: FftDirection) {
    debug_assert_eq!(data.len(), points.pow(dim as u32));
    let fft = plan(points, direction);
    for axis in 0..dim {
        transform_axis(data, points, dim, axis, &fft);
    }
    if direction == FftDirection::Inverse {
        let scale = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|z| *z *= scale);
    }
}

fn transform_axis(data: &mut [Complex64], points: usize, dim: usize, axis: usize, fft: &Plan) {
    let stride = points.pow((dim - 1 - axis) as u32);
    if stride == 1 {
        // Lines are contiguous; hand rustfft a batch of them at once.
        let batch = points * (4096 / points).max(1);
        data.par_chunks_mut(batch.min(data.len())).for_each(|chunk| {
            let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
            fft.process_with_scratch(chunk, &mut scratch);
        });
        return;
    }
    let block = points * stride;
    data.par_chunks_mut(block).for_each(|blk| {
        let mut buf = vec![Complex64::default(); block];
        for k in 0..points {
            let row = &blk[k * stride..(k + 1) * stride];
            for (line, &z) in row.iter().enumerate() {
                buf[line * points + k] = z;
            }
        }
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        fft.process_with_scratch(&mut buf, &mut scratch);
        for k in 0..points {
            let row = &mut blk[k * stride..(k + 1) * stride];
            for (line, z) in row.iter_mut().enumerate() {
                *z = buf[line * points + k];
            }
        }
    });
}
