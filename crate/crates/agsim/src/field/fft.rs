//! Multi-dimensional complex FFT on the row-major grid layout, backed by
//! rustfft. Plans are cached per thread, so concurrent transforms never
//! contend on shared state.

use super::{Grid, ScalarField, SpectralField};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

thread_local! {
    static PLANS: RefCell<PlanCache> = RefCell::new(PlanCache::default());
}

#[derive(Default)]
struct PlanCache {
    planner: Option<FftPlanner<f64>>,
    forward: HashMap<usize, Arc<dyn Fft<f64>>>,
    inverse: HashMap<usize, Arc<dyn Fft<f64>>>,
}

fn with_plan<R>(n: usize, inverse: bool, f: impl FnOnce(&Arc<dyn Fft<f64>>) -> R) -> R {
    PLANS.with(|cell| {
        let mut cache = cell.borrow_mut();
        let planner = cache.planner.get_or_insert_with(FftPlanner::new);
        let plan = if inverse {
            planner.plan_fft_inverse(n)
        } else {
            planner.plan_fft_forward(n)
        };
        let map = if inverse {
            &mut cache.inverse
        } else {
            &mut cache.forward
        };
        let entry = map.entry(n).or_insert(plan).clone();
        drop(cache);
        f(&entry)
    })
}

/// Transform every line along `axis` of the `d`-dimensional cube in place.
fn transform_axis(data: &mut [Complex64], n: usize, d: usize, axis: usize, inverse: bool) {
    with_plan(n, inverse, |plan| {
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        // Axis `a` has stride n^(d-1-a); lines are indexed by a prefix block
        // of size n^a and a suffix offset below the stride.
        let stride = n.pow((d - 1 - axis) as u32);
        let prefixes = n.pow(axis as u32);
        for p in 0..prefixes {
            for q in 0..stride {
                let base = p * n * stride + q;
                if stride == 1 {
                    plan.process_with_scratch(&mut data[base..base + n], &mut scratch);
                } else {
                    for (i, v) in line.iter_mut().enumerate() {
                        *v = data[base + i * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (i, v) in line.iter().enumerate() {
                        data[base + i * stride] = *v;
                    }
                }
            }
        }
    });
}

pub fn forward(f: &ScalarField) -> SpectralField {
    let g = f.grid;
    let mut coeffs: Vec<Complex64> = f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform_all(&mut coeffs, &g, false);
    SpectralField {
        grid: g,
        coeffs,
        t: f.t,
    }
}

pub fn inverse(s: &SpectralField) -> ScalarField {
    let g = s.grid;
    let mut buf = s.coeffs.clone();
    transform_all(&mut buf, &g, true);
    let scale = 1.0 / g.len() as f64;
    let values = buf.iter().map(|c| c.re * scale).collect();
    ScalarField {
        grid: g,
        values,
        t: s.t,
    }
}

fn transform_all(data: &mut [Complex64], g: &Grid, inverse: bool) {
    let n = g.points_per_axis();
    let d = g.dim();
    for axis in (0..d).rev() {
        transform_axis(data, n, d, axis, inverse);
    }
}
