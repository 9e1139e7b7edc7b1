//! Periodic grids, real/spectral field representations, and exact spectral
//! differential operators.
//!
//! Conventions fixed here and relied on everywhere else:
//!
//! * storage is row-major with the **last axis fastest**;
//! * the forward transform is unnormalized, the inverse carries `1/n^d`;
//! * wavenumbers are integer vectors `k` in `[-n/2, n/2)^d` with physical
//!   frequency `xi = 2 pi k / L`;
//! * odd-order symbols (gradient, inverse gradient) treat the Nyquist index
//!   `k = -n/2` as zero frequency, which keeps real fields real. Solvers keep
//!   their state dealiased, so those modes never carry energy.

mod fft;
mod interp;
mod io;

pub use interp::{cubic_weights, interpolate, wrap_coord, CubicSampler};
pub use io::{read_agf, write_agf, AgfError};

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid dimension must be 2 or 3, got {0}")]
    BadDimension(usize),
    #[error("points per axis must be a power of two >= 8, got {0}")]
    BadResolution(usize),
    #[error("box length must be positive, got {0}")]
    BadLength(f64),
}

/// Uniform periodic grid on `[0, L)^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    d: usize,
    n: usize,
    box_length: f64,
}

impl Grid {
    pub fn new(d: usize, n: usize, box_length: f64) -> Result<Grid, GridError> {
        if d != 2 && d != 3 {
            return Err(GridError::BadDimension(d));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(GridError::BadResolution(n));
        }
        if !(box_length > 0.0) {
            return Err(GridError::BadLength(box_length));
        }
        Ok(Grid { d, n, box_length })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    /// Grid spacing `h = L/n`.
    pub fn spacing(&self) -> f64 {
        self.box_length / self.n as f64
    }

    /// Total number of nodes `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Volume element `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.d as i32)
    }

    pub fn center(&self) -> [f64; 3] {
        let c = 0.5 * self.box_length;
        [c, c, if self.d == 3 { c } else { 0.0 }]
    }

    /// Integer wavenumber for FFT bin `i`: `i` for `i < n/2`, else `i - n`.
    pub fn wavenumber(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    /// Physical frequency `2 pi k / L` of bin `i`.
    pub fn xi(&self, i: usize) -> f64 {
        2.0 * std::f64::consts::PI * self.wavenumber(i) as f64 / self.box_length
    }

    /// Derivative frequency: as [`Grid::xi`] but zero on the Nyquist index.
    pub fn xi_deriv(&self, i: usize) -> f64 {
        if i == self.n / 2 {
            0.0
        } else {
            self.xi(i)
        }
    }

    /// Node coordinate along one axis.
    pub fn coord(&self, i: usize) -> f64 {
        i as f64 * self.spacing()
    }

    /// Decompose a flat index into per-axis indices (first `d` entries).
    pub fn unravel(&self, mut idx: usize) -> [usize; 3] {
        let mut out = [0usize; 3];
        for a in (0..self.d).rev() {
            out[a] = idx % self.n;
            idx /= self.n;
        }
        out
    }

    /// Flat index of per-axis indices.
    pub fn ravel(&self, ix: &[usize]) -> usize {
        let mut idx = 0;
        for a in 0..self.d {
            idx = idx * self.n + ix[a];
        }
        idx
    }

    /// Position of a node relative to the box center, wrapped to the
    /// principal branch `[-L/2, L/2)` per axis.
    pub fn centered_coord(&self, ix: &[usize; 3]) -> [f64; 3] {
        let c = self.center();
        let mut out = [0.0; 3];
        for a in 0..self.d {
            let mut dx = self.coord(ix[a]) - c[a];
            let l = self.box_length;
            if dx < -0.5 * l {
                dx += l;
            } else if dx >= 0.5 * l {
                dx -= l;
            }
            out[a] = dx;
        }
        out
    }
}

/// Real scalar field sampled on a [`Grid`], tagged with its time.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub t: f64,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> ScalarField {
        ScalarField {
            grid,
            values: vec![0.0; grid.len()],
            t: 0.0,
        }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>, t: f64) -> ScalarField {
        assert_eq!(values.len(), grid.len(), "value count must equal n^d");
        ScalarField { grid, values, t }
    }

    /// Fill from a function of the node position.
    pub fn from_fn(grid: Grid, t: f64, mut f: impl FnMut(&[f64]) -> f64) -> ScalarField {
        let mut values = vec![0.0; grid.len()];
        let mut pos = [0.0f64; 3];
        for (idx, v) in values.iter_mut().enumerate() {
            let ix = grid.unravel(idx);
            for a in 0..grid.dim() {
                pos[a] = grid.coord(ix[a]);
            }
            *v = f(&pos[..grid.dim()]);
        }
        ScalarField { grid, values, t }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    /// Discrete mean over the box.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Total mass `h^d sum(rho)`.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// Squared L2 norm with measure weight `h^d`.
    pub fn l2_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_volume()
    }

    /// `integral of rho^3`, used by the energy production ledger.
    pub fn cube_integral(&self) -> f64 {
        self.values.iter().map(|v| v * v * v).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Real vector field with `d` components, each sampled like a scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub grid: Grid,
    pub components: Vec<Vec<f64>>,
    pub t: f64,
}

impl VectorField {
    pub fn zeros(grid: Grid) -> VectorField {
        VectorField {
            grid,
            components: vec![vec![0.0; grid.len()]; grid.dim()],
            t: 0.0,
        }
    }

    pub fn comp(&self, j: usize) -> &[f64] {
        &self.components[j]
    }

    /// Pointwise sup of the Euclidean magnitude.
    pub fn max_norm(&self) -> f64 {
        let mut m = 0.0f64;
        for idx in 0..self.grid.len() {
            let mut s = 0.0;
            for c in &self.components {
                s += c[idx] * c[idx];
            }
            m = m.max(s);
        }
        m.sqrt()
    }

    /// Squared L2 norm summed over components.
    pub fn l2_sq(&self) -> f64 {
        let h = self.grid.cell_volume();
        self.components
            .iter()
            .map(|c| c.iter().map(|v| v * v).sum::<f64>() * h)
            .sum()
    }

    pub fn scaled(&self, s: f64) -> VectorField {
        VectorField {
            grid: self.grid,
            components: self
                .components
                .iter()
                .map(|c| c.iter().map(|v| s * v).collect())
                .collect(),
            t: self.t,
        }
    }

    pub fn sub(&self, other: &VectorField) -> VectorField {
        assert_eq!(self.grid, other.grid);
        VectorField {
            grid: self.grid,
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
                .collect(),
            t: self.t,
        }
    }

    /// Sup over nodes and components of the difference.
    pub fn max_abs_diff(&self, other: &VectorField) -> f64 {
        let mut m = 0.0f64;
        for (a, b) in self.components.iter().zip(&other.components) {
            for (x, y) in a.iter().zip(b) {
                m = m.max((x - y).abs());
            }
        }
        m
    }
}

/// Complex Fourier coefficients of a field, in FFT bin order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    pub grid: Grid,
    pub coeffs: Vec<Complex64>,
    pub t: f64,
}

impl SpectralField {
    pub fn zeros(grid: Grid) -> SpectralField {
        SpectralField {
            grid,
            coeffs: vec![Complex64::new(0.0, 0.0); grid.len()],
            t: 0.0,
        }
    }

    /// Maximum relative Hermitian-symmetry violation `|c(-k) - conj(c(k))|`,
    /// scaled by the largest coefficient magnitude.
    pub fn hermitian_defect(&self) -> f64 {
        let g = self.grid;
        let n = g.points_per_axis();
        let scale = self
            .coeffs
            .iter()
            .fold(0.0f64, |m, c| m.max(c.norm()))
            .max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for idx in 0..g.len() {
            let ix = g.unravel(idx);
            let mut neg = [0usize; 3];
            for a in 0..g.dim() {
                neg[a] = (n - ix[a]) % n;
            }
            let jdx = g.ravel(&neg[..g.dim()]);
            let defect = (self.coeffs[jdx] - self.coeffs[idx].conj()).norm();
            worst = worst.max(defect / scale);
        }
        worst
    }
}

/// Unnormalized forward transform.
pub fn forward_transform(f: &ScalarField) -> SpectralField {
    fft::forward(f)
}

/// Inverse transform with the `1/n^d` normalization.
pub fn inverse_transform(s: &SpectralField) -> ScalarField {
    fft::inverse(s)
}

/// Gradient via the spectral symbol `i xi_j`.
pub fn spectral_gradient(f: &ScalarField) -> VectorField {
    let s = forward_transform(f);
    gradient_of_spectrum(&s)
}

pub fn gradient_of_spectrum(s: &SpectralField) -> VectorField {
    let g = s.grid;
    let mut out = VectorField::zeros(g);
    out.t = s.t;
    let mut comp = SpectralField::zeros(g);
    for j in 0..g.dim() {
        for (idx, c) in comp.coeffs.iter_mut().enumerate() {
            let ix = g.unravel(idx);
            let xi = g.xi_deriv(ix[j]);
            *c = Complex64::new(0.0, xi) * s.coeffs[idx];
        }
        comp.t = s.t;
        out.components[j] = inverse_transform(&comp).values;
    }
    out
}

/// Laplacian via the symbol `-|xi|^2`.
pub fn spectral_laplacian(f: &ScalarField) -> ScalarField {
    let mut s = forward_transform(f);
    let g = s.grid;
    for (idx, c) in s.coeffs.iter_mut().enumerate() {
        let ix = g.unravel(idx);
        let mut k2 = 0.0;
        for a in 0..g.dim() {
            let xi = g.xi_deriv(ix[a]);
            k2 += xi * xi;
        }
        *c *= -k2;
    }
    inverse_transform(&s)
}

/// Divergence of a vector field, spectrally.
pub fn spectral_divergence(v: &VectorField) -> ScalarField {
    let g = v.grid;
    let mut acc = SpectralField::zeros(g);
    acc.t = v.t;
    for j in 0..g.dim() {
        let comp = ScalarField {
            grid: g,
            values: v.components[j].clone(),
            t: v.t,
        };
        let s = forward_transform(&comp);
        for (idx, c) in acc.coeffs.iter_mut().enumerate() {
            let ix = g.unravel(idx);
            let xi = g.xi_deriv(ix[j]);
            *c += Complex64::new(0.0, xi) * s.coeffs[idx];
        }
    }
    inverse_transform(&acc)
}

/// True if the mode survives the 2/3 rule: every `|k_j| <= n/3`.
pub fn mode_kept(grid: &Grid, ix: &[usize; 3]) -> bool {
    let cut = grid.points_per_axis() as i64 / 3;
    (0..grid.dim()).all(|a| grid.wavenumber(ix[a]).abs() <= cut)
}

/// 2/3-rule dealiasing: zero every coefficient with some `|k_j| > n/3`.
pub fn dealias(s: &SpectralField) -> SpectralField {
    let mut out = s.clone();
    dealias_in_place(&mut out);
    out
}

pub fn dealias_in_place(s: &mut SpectralField) {
    let g = s.grid;
    for (idx, c) in s.coeffs.iter_mut().enumerate() {
        let ix = g.unravel(idx);
        if !mode_kept(&g, &ix) {
            *c = Complex64::new(0.0, 0.0);
        }
    }
}

/// L2 norm computed in spectral space (Parseval with the `h^d` weight):
/// `sum_x |f|^2 = (1/n^d) sum_k |fhat|^2` for the unnormalized forward.
pub fn spectral_l2(s: &SpectralField) -> f64 {
    let g = s.grid;
    let nd = g.len() as f64;
    let sum: f64 = s.coeffs.iter().map(|c| c.norm_sqr()).sum();
    (sum * g.cell_volume() / nd).sqrt()
}

#[cfg(test)]
pub(crate) mod tests;
