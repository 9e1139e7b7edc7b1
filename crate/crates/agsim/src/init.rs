//! Built-in initial conditions.
//!
//! All built-ins are compactly supported inside the box, which the periodic
//! proxy for whole space requires (the tail gate in `diagnostics` checks it).

use crate::field::{Grid, ScalarField};
use crate::velocity::{smooth_step, RadialGenerator, RadialProfile};

#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    /// Gaussian `amplitude exp(-r^2 / (2 width^2))`, smoothly cut to zero
    /// between `4.5 width` and `6 width` so the support is compact.
    Gaussian { amplitude: f64, width: f64 },
    /// Uniform disc of density `c`, radius `r0`, edge mollified over `w`
    /// (defaults to `2h` at build time when zero).
    Patch { c: f64, r0: f64, w: f64 },
    /// Two offset Gaussians of unequal amplitude; breaks radial symmetry.
    TwoBumps { amplitude: f64, width: f64, separation: f64 },
    /// Load from an AGF1 file.
    File { path: std::path::PathBuf },
}

impl InitSpec {
    /// Radius beyond which the built-in data vanishes (box-center distance).
    pub fn support_radius(&self, grid: &Grid) -> f64 {
        match *self {
            InitSpec::Gaussian { width, .. } => 6.0 * width,
            InitSpec::Patch { r0, w, .. } => {
                let w = if w > 0.0 { w } else { 2.0 * grid.spacing() };
                r0 + w
            }
            InitSpec::TwoBumps {
                width, separation, ..
            } => 6.0 * width + separation / 2.0,
            InitSpec::File { .. } => f64::INFINITY,
        }
    }

    pub fn build(&self, grid: Grid) -> Result<ScalarField, crate::field::AgfError> {
        let c = grid.center();
        match *self {
            InitSpec::Gaussian { amplitude, width } => {
                Ok(ScalarField::from_fn(grid, 0.0, |x| {
                    let r = dist(x, &c);
                    radial_gaussian(amplitude, width, r)
                }))
            }
            InitSpec::Patch { c: dens, r0, w } => {
                let w = if w > 0.0 { w } else { 2.0 * grid.spacing() };
                Ok(ScalarField::from_fn(grid, 0.0, |x| {
                    let r = dist(x, &c);
                    dens * smooth_step((r0 - r) / w + 0.5)
                }))
            }
            InitSpec::TwoBumps {
                amplitude,
                width,
                separation,
            } => Ok(ScalarField::from_fn(grid, 0.0, |x| {
                let mut c1 = c;
                let mut c2 = c;
                c1[0] -= separation / 2.0;
                c2[0] += separation / 2.0;
                c2[1] += 0.3 * separation;
                radial_gaussian(amplitude, width, dist(x, &c1))
                    + radial_gaussian(0.6 * amplitude, width * 0.8, dist(x, &c2))
            })),
            InitSpec::File { ref path } => crate::field::read_agf(path),
        }
    }

    /// The matching radial profile for the oracles (radial kinds only).
    pub fn radial_profile(&self, grid: &Grid) -> Option<RadialProfile> {
        match *self {
            InitSpec::Gaussian { amplitude, width } => {
                let gen = RadialGenerator::TruncatedGaussian {
                    amplitude,
                    sigma: width,
                    cut_start: 4.5 * width,
                    cut_end: 6.0 * width,
                };
                Some(RadialProfile::from_generator(gen, 6.0 * width, 512))
            }
            InitSpec::Patch { c, r0, w } => {
                let w = if w > 0.0 { w } else { 2.0 * grid.spacing() };
                let gen = RadialGenerator::Patch { c, r0, w };
                Some(RadialProfile::from_generator(gen, r0 + w, 512))
            }
            _ => None,
        }
    }
}

fn dist(x: &[f64], c: &[f64; 3]) -> f64 {
    let mut acc = 0.0;
    for a in 0..x.len() {
        let d = x[a] - c[a];
        acc += d * d;
    }
    acc.sqrt()
}

fn radial_gaussian(amplitude: f64, width: f64, r: f64) -> f64 {
    if r >= 6.0 * width {
        0.0
    } else {
        amplitude
            * (-r * r / (2.0 * width * width)).exp()
            * smooth_step((6.0 * width - r) / (1.5 * width))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_is_compact_and_positive() {
        let g = Grid::new(2, 64, 8.0).unwrap();
        let spec = InitSpec::Gaussian {
            amplitude: 1.0,
            width: 0.4,
        };
        let f = spec.build(g).unwrap();
        assert!(f.is_finite());
        assert!((f.max_abs() - 1.0).abs() < 1e-6);
        // zero at the corners
        assert_eq!(f.values[0], 0.0);
    }

    #[test]
    fn patch_plateau_and_mass() {
        let g = Grid::new(2, 128, 4.0).unwrap();
        let spec = InitSpec::Patch {
            c: 1.0,
            r0: 0.5,
            w: 0.0,
        };
        let f = spec.build(g).unwrap();
        let center = g.ravel(&[64, 64]);
        assert!((f.values[center] - 1.0).abs() < 1e-12);
        let expect_mass = std::f64::consts::PI * 0.25;
        assert!((f.mass() - expect_mass).abs() < 0.01 * expect_mass);
    }

    #[test]
    fn two_bumps_not_radial() {
        let g = Grid::new(2, 64, 8.0).unwrap();
        let spec = InitSpec::TwoBumps {
            amplitude: 1.0,
            width: 0.4,
            separation: 1.5,
        };
        let f = spec.build(g).unwrap();
        let left = g.ravel(&[32, 26]);
        let right = g.ravel(&[32, 38]);
        assert!((f.values[left] - f.values[right]).abs() > 1e-3);
    }
}
