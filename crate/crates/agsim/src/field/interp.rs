//! Periodic tensor-product cubic interpolation.
//!
//! Each axis uses the four-point cubic through the nodes at offsets
//! -1, 0, 1, 2, which reproduces polynomials up to degree 3 exactly within
//! a cell. The wrap uses the power-of-two grid mask.

use super::ScalarField;

/// Cubic Lagrange weights at fractional offset `t` in [0, 1) for the stencil
/// nodes -1, 0, 1, 2.
#[inline]
pub fn cubic_weights(t: f64) -> [f64; 4] {
    let tm = t - 1.0;
    let tp = t + 1.0;
    let t2 = t - 2.0;
    [
        -t * tm * t2 / 6.0,
        tp * tm * t2 / 2.0,
        -tp * t * t2 / 2.0,
        tp * t * tm / 6.0,
    ]
}

/// Reusable sampler over one scalar field.
pub struct CubicSampler<'a> {
    values: &'a [f64],
    n: usize,
    mask: usize,
    inv_h: f64,
    d: usize,
}

impl<'a> CubicSampler<'a> {
    pub fn new(f: &'a ScalarField) -> CubicSampler<'a> {
        let n = f.grid.points_per_axis();
        CubicSampler {
            values: &f.values,
            n,
            mask: n - 1,
            inv_h: 1.0 / f.grid.spacing(),
            d: f.grid.dim(),
        }
    }

    /// Stencil base index and in-cell offset for one coordinate.
    #[inline]
    fn locate(&self, x: f64) -> (usize, f64) {
        let u = x * self.inv_h;
        let i = u.floor();
        let t = u - i;
        // rem_euclid keeps the base valid for far-out query points.
        let base = (i as i64).rem_euclid(self.n as i64) as usize;
        (base, t)
    }

    pub fn sample2(&self, x0: f64, x1: f64) -> f64 {
        debug_assert_eq!(self.d, 2);
        let (i0, t0) = self.locate(x0);
        let (i1, t1) = self.locate(x1);
        let w0 = cubic_weights(t0);
        let w1 = cubic_weights(t1);
        let n = self.n;
        let mask = self.mask;
        let mut acc = 0.0;
        for (a, wa) in w0.iter().enumerate() {
            let row = ((i0 + n + a - 1) & mask) * n;
            let mut line = 0.0;
            for (b, wb) in w1.iter().enumerate() {
                let col = (i1 + n + b - 1) & mask;
                line += wb * self.values[row + col];
            }
            acc += wa * line;
        }
        acc
    }

    pub fn sample3(&self, x0: f64, x1: f64, x2: f64) -> f64 {
        debug_assert_eq!(self.d, 3);
        let (i0, t0) = self.locate(x0);
        let (i1, t1) = self.locate(x1);
        let (i2, t2) = self.locate(x2);
        let w0 = cubic_weights(t0);
        let w1 = cubic_weights(t1);
        let w2 = cubic_weights(t2);
        let n = self.n;
        let mask = self.mask;
        let mut acc = 0.0;
        for (a, wa) in w0.iter().enumerate() {
            let pa = ((i0 + n + a - 1) & mask) * n;
            let mut plane = 0.0;
            for (b, wb) in w1.iter().enumerate() {
                let pb = (pa + ((i1 + n + b - 1) & mask)) * n;
                let mut line = 0.0;
                for (c, wc) in w2.iter().enumerate() {
                    let pc = (i2 + n + c - 1) & mask;
                    line += wc * self.values[pb + pc];
                }
                plane += wb * line;
            }
            acc += wa * plane;
        }
        acc
    }

    pub fn sample(&self, p: &[f64]) -> f64 {
        match self.d {
            2 => self.sample2(p[0], p[1]),
            _ => self.sample3(p[0], p[1], p[2]),
        }
    }
}

/// Interpolate `f` at a list of points (periodically wrapped).
pub fn interpolate(f: &ScalarField, points: &[[f64; 3]]) -> Vec<f64> {
    let s = CubicSampler::new(f);
    points.iter().map(|p| s.sample(&p[..f.grid.dim()])).collect()
}

/// Wrap a coordinate into `[0, L)`.
#[inline]
pub fn wrap_coord(x: f64, box_length: f64) -> f64 {
    let y = x % box_length;
    if y < 0.0 {
        y + box_length
    } else {
        y
    }
}
