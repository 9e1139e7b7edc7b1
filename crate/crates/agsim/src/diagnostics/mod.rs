//! Norms, dyadic (Littlewood-Paley) analysis, tail and mass ledgers, and the
//! inequality checkers used to verify solver output.

use crate::field::{
    forward_transform, inverse_transform, Grid, ScalarField, SpectralField, VectorField,
};
use crate::velocity::smooth_step;
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("ledger times must be strictly increasing: {prev} then {next}")]
    NonMonotoneTime { prev: f64, next: f64 },
    #[error("ledgers have misaligned time grids")]
    MisalignedLedgers,
    #[error("cutoff radius {r} out of range (0, {max})")]
    RadiusOutOfRange { r: f64, max: f64 },
    #[error("Lp exponent must be >= 1, got {0}")]
    BadExponent(f64),
}

/// `L^p` norm with measure weight `h^d`; pass `f64::INFINITY` for the sup.
pub fn lp_norm(f: &ScalarField, p: f64) -> Result<f64, DiagnosticsError> {
    if p.is_infinite() {
        return Ok(f.max_abs());
    }
    if p < 1.0 {
        return Err(DiagnosticsError::BadExponent(p));
    }
    let hd = f.grid.cell_volume();
    let sum: f64 = f.values.iter().map(|v| v.abs().powf(p)).sum();
    Ok((hd * sum).powf(1.0 / p))
}

/// `H^1` norm of a velocity difference together with the spectral
/// Calderon-Zygmund consistency residual `| |grad w| - |sigma1| |mu - mean| |`.
#[derive(Debug, Clone, Copy)]
pub struct H1Diff {
    pub h1: f64,
    pub l2: f64,
    pub grad_l2: f64,
    pub cz_residual: f64,
}

pub fn h1_norm_diff(w: &VectorField, mu: &ScalarField, sigma1: f64) -> H1Diff {
    assert_eq!(w.grid, mu.grid, "fields must share a grid");
    let g = w.grid;
    let l2_sq = w.l2_sq();
    // |grad w|^2 = sum_{j,k} |d_j w_k|^2 via Parseval
    let mut grad_sq = 0.0;
    let nd = g.len() as f64;
    for comp in &w.components {
        let s = forward_transform(&ScalarField {
            grid: g,
            values: comp.clone(),
            t: w.t,
        });
        for (idx, c) in s.coeffs.iter().enumerate() {
            let ix = g.unravel(idx);
            let mut k2 = 0.0;
            for a in 0..g.dim() {
                let xi = g.xi_deriv(ix[a]);
                k2 += xi * xi;
            }
            grad_sq += k2 * c.norm_sqr();
        }
    }
    grad_sq *= g.cell_volume() / nd;
    let grad_l2 = grad_sq.sqrt();

    let mean = mu.mean();
    let mu_fluct_sq: f64 = mu.values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
        * g.cell_volume();
    let cz_residual = (grad_l2 - sigma1.abs() * mu_fluct_sq.sqrt()).abs();

    H1Diff {
        h1: (l2_sq + grad_sq).sqrt(),
        l2: l2_sq.sqrt(),
        grad_l2,
        cz_residual,
    }
}

/// Littlewood-Paley band profile: low-pass `chi_hat` equals 1 up to 3/5 and
/// vanishes beyond 5/6.
fn chi_hat(r: f64) -> f64 {
    const LO: f64 = 3.0 / 5.0;
    const HI: f64 = 5.0 / 6.0;
    if r <= LO {
        1.0
    } else if r >= HI {
        0.0
    } else {
        1.0 - smooth_step((r - LO) / (HI - LO))
    }
}

/// Dyadic decomposition of a field: block `-1` holds `|xi| <~ 5/6`, block
/// `j >= 0` the annulus `3/5 * 2^j <= |xi| <= 5/3 * 2^j`. The discrete
/// partition is renormalized on the grid wavenumber set so the blocks sum
/// back to the field to machine precision.
#[derive(Debug, Clone)]
pub struct DyadicDecomposition {
    pub blocks: Vec<(i32, ScalarField)>,
    pub grid: Grid,
}

impl DyadicDecomposition {
    pub fn block(&self, j: i32) -> Option<&ScalarField> {
        self.blocks.iter().find(|(jj, _)| *jj == j).map(|(_, f)| f)
    }

    pub fn j_max(&self) -> i32 {
        self.blocks.last().map(|(j, _)| *j).unwrap_or(-1)
    }

    /// Max abs difference between the block sum and a reference field.
    pub fn reconstruction_defect(&self, f: &ScalarField) -> f64 {
        let mut sum = vec![0.0f64; f.values.len()];
        for (_, b) in &self.blocks {
            for (s, v) in sum.iter_mut().zip(&b.values) {
                *s += v;
            }
        }
        sum.iter()
            .zip(&f.values)
            .fold(0.0f64, |m, (s, v)| m.max((s - v).abs()))
    }
}

/// Largest dyadic scale whose band intersects the grid's wavenumber ball.
fn grid_j_max(grid: &Grid) -> i32 {
    let xi_axis = std::f64::consts::PI * grid.points_per_axis() as f64 / grid.box_length();
    let xi_corner = xi_axis * (grid.dim() as f64).sqrt();
    (xi_corner * 5.0 / 3.0).log2().floor() as i32
}

/// Per-mode band multipliers (index 0 is block -1), normalized to sum to 1.
fn band_multipliers(grid: &Grid, j_max: i32) -> Vec<Vec<f64>> {
    let n_blocks = (j_max + 2) as usize;
    let mut mult = vec![vec![0.0f64; grid.len()]; n_blocks];
    for idx in 0..grid.len() {
        let ix = grid.unravel(idx);
        let mut k2 = 0.0;
        for a in 0..grid.dim() {
            let xi = grid.xi(ix[a]);
            k2 += xi * xi;
        }
        let r = k2.sqrt();
        let mut weights = Vec::with_capacity(n_blocks);
        weights.push(chi_hat(r));
        for j in 0..=j_max {
            let lo = chi_hat(r / 2f64.powi(j + 1));
            let hi = chi_hat(r / 2f64.powi(j));
            weights.push(lo - hi);
        }
        let total: f64 = weights.iter().sum();
        for (b, w) in weights.iter().enumerate() {
            mult[b][idx] = w / total;
        }
    }
    mult
}

pub fn dyadic_blocks(f: &ScalarField) -> DyadicDecomposition {
    let g = f.grid;
    let j_max = grid_j_max(&g);
    let mult = band_multipliers(&g, j_max);
    let spectrum = forward_transform(f);
    let mut blocks = Vec::with_capacity(mult.len());
    for (b, m) in mult.iter().enumerate() {
        let j = b as i32 - 1;
        let mut s = SpectralField::zeros(g);
        s.t = f.t;
        for (idx, c) in s.coeffs.iter_mut().enumerate() {
            *c = spectrum.coeffs[idx] * m[idx];
        }
        blocks.push((j, inverse_transform(&s)));
    }
    DyadicDecomposition { blocks, grid: g }
}

/// Dyadic Holder norm `|f|_{C^beta_*} = sup_j 2^{j beta} |Delta_j f|_inf`.
pub fn holder_star_norm(f: &ScalarField, beta: f64) -> f64 {
    assert!(beta > 0.0, "beta must be positive");
    holder_star_of_blocks(&dyadic_blocks(f), beta)
}

pub fn holder_star_of_blocks(dec: &DyadicDecomposition, beta: f64) -> f64 {
    dec.blocks
        .iter()
        .map(|(j, b)| 2f64.powi(*j).powf(beta) * b.max_abs())
        .fold(0.0, f64::max)
}

/// One row of the Bernstein ratio table.
#[derive(Debug, Clone, Copy)]
pub struct BernsteinRow {
    pub j: i32,
    pub block_linf: f64,
    /// `sup_{|alpha|=k} |d^alpha block|_inf / (2^{jk} |block|_inf)`.
    pub ratio: f64,
    /// None when the block is too small to measure or `j = -1` (only the
    /// upper bound applies there).
    pub in_window: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct BernsteinReport {
    pub k: usize,
    pub rows: Vec<BernsteinRow>,
    pub window: (f64, f64),
}

impl BernsteinReport {
    pub fn all_in_window(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.in_window.unwrap_or(true))
    }
}

/// Frozen calibration window for band-block derivative ratios. Pure modes
/// give ratios in `[(3/5 / sqrt(d))^k, (5/3)^k]`; the margins absorb the
/// smooth band edges (calibrated once on band-limited noise, margin 50%).
fn bernstein_window(k: usize, d: usize) -> (f64, f64) {
    let lo = 0.5 * (0.6 / (d as f64).sqrt()).powi(k as i32);
    let hi = 1.5 * (5.0f64 / 3.0).powi(k as i32);
    (lo, hi)
}

/// Verify the Bernstein equivalence per block for `k` in {1, 2}.
pub fn bernstein_check(dec: &DyadicDecomposition, k: usize) -> BernsteinReport {
    assert!(k == 1 || k == 2, "k must be 1 or 2");
    let g = dec.grid;
    let d = g.dim();
    let window = bernstein_window(k, d);
    let global = dec
        .blocks
        .iter()
        .map(|(_, b)| b.max_abs())
        .fold(0.0, f64::max);
    let mut rows = Vec::new();
    for (j, block) in &dec.blocks {
        let linf = block.max_abs();
        if linf <= 1e-10 * global || global == 0.0 {
            rows.push(BernsteinRow {
                j: *j,
                block_linf: linf,
                ratio: 0.0,
                in_window: None,
            });
            continue;
        }
        let s = forward_transform(block);
        let mut sup_deriv = 0.0f64;
        for alpha in multi_indices(d, k) {
            let df = apply_derivative(&s, &alpha);
            sup_deriv = sup_deriv.max(df.max_abs());
        }
        let scale = 2f64.powi(*j * k as i32);
        let ratio = sup_deriv / (scale * linf);
        let in_window = if *j < 0 {
            // low-pass block: only the upper bound is meaningful
            Some(ratio <= window.1)
        } else {
            Some(ratio >= window.0 && ratio <= window.1)
        };
        rows.push(BernsteinRow {
            j: *j,
            block_linf: linf,
            ratio,
            in_window,
        });
    }
    BernsteinReport { k, rows, window }
}

fn multi_indices(d: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k == 1 {
        for a in 0..d {
            let mut alpha = vec![0; d];
            alpha[a] = 1;
            out.push(alpha);
        }
    } else {
        for a in 0..d {
            for b in a..d {
                let mut alpha = vec![0; d];
                alpha[a] += 1;
                alpha[b] += 1;
                out.push(alpha);
            }
        }
    }
    out
}

fn apply_derivative(s: &SpectralField, alpha: &[usize]) -> ScalarField {
    let g = s.grid;
    let mut out = SpectralField::zeros(g);
    out.t = s.t;
    for (idx, c) in out.coeffs.iter_mut().enumerate() {
        let ix = g.unravel(idx);
        let mut factor = Complex64::new(1.0, 0.0);
        for (a, &pow) in alpha.iter().enumerate() {
            for _ in 0..pow {
                factor *= Complex64::new(0.0, g.xi_deriv(ix[a]));
            }
        }
        *c = factor * s.coeffs[idx];
    }
    inverse_transform(&out)
}

/// Second-derivative matrix of the Newtonian potential applied to `rho`
/// (components of `grad grad Phi * rho`), used by the velocity-regularity
/// regression check.
pub fn hessian_potential_components(rho: &ScalarField) -> Vec<ScalarField> {
    let g = rho.grid;
    let s = forward_transform(rho);
    let mut out = Vec::new();
    for a in 0..g.dim() {
        for b in a..g.dim() {
            let mut comp = SpectralField::zeros(g);
            comp.t = rho.t;
            for (idx, c) in comp.coeffs.iter_mut().enumerate() {
                let ix = g.unravel(idx);
                let mut k2 = 0.0;
                for ax in 0..g.dim() {
                    let xi = g.xi_deriv(ix[ax]);
                    k2 += xi * xi;
                }
                if k2 == 0.0 {
                    *c = Complex64::new(0.0, 0.0);
                } else {
                    let sym = -g.xi_deriv(ix[a]) * g.xi_deriv(ix[b]) / k2;
                    *c = s.coeffs[idx] * sym;
                }
            }
            out.push(inverse_transform(&comp));
        }
    }
    out
}

/// `|b_R f|_{L^2}` where `b_R = 1 - a(x/R)`, `a` the radial plateau cutoff
/// (1 on the unit ball, 0 outside radius 2), centered at the box center.
pub fn tail_norm(f: &ScalarField, r_cut: f64) -> Result<f64, DiagnosticsError> {
    let g = f.grid;
    let max_r = g.box_length() / 4.0;
    if !(r_cut > 0.0 && r_cut < max_r) {
        return Err(DiagnosticsError::RadiusOutOfRange {
            r: r_cut,
            max: max_r,
        });
    }
    let mut acc = 0.0;
    for (idx, v) in f.values.iter().enumerate() {
        let ix = g.unravel(idx);
        let x = g.centered_coord(&ix);
        let mut r2 = 0.0;
        for a in 0..g.dim() {
            r2 += x[a] * x[a];
        }
        let b = 1.0 - plateau(r2.sqrt() / r_cut);
        acc += (b * v) * (b * v);
    }
    Ok((acc * g.cell_volume()).sqrt())
}

/// Radial plateau: 1 on [0, 1], smooth descent, 0 beyond 2, nonincreasing.
fn plateau(r: f64) -> f64 {
    smooth_step(2.0 - r)
}

/// Time series of mass, squared L2 norm, and the running time integral of
/// the squared L2 norm (trapezoid).
#[derive(Debug, Clone, Default)]
pub struct MassLedger {
    pub times: Vec<f64>,
    pub mass: Vec<f64>,
    pub l2sq: Vec<f64>,
    pub cumulative_l2sq: Vec<f64>,
}

impl MassLedger {
    pub fn new() -> MassLedger {
        MassLedger::default()
    }

    pub fn update(&mut self, f: &ScalarField) -> Result<(), DiagnosticsError> {
        if let Some(&prev) = self.times.last() {
            if f.t <= prev {
                return Err(DiagnosticsError::NonMonotoneTime { prev, next: f.t });
            }
        }
        let l2sq = f.l2_sq();
        let cumulative = match self.times.last() {
            None => 0.0,
            Some(&prev) => {
                let last = *self.cumulative_l2sq.last().unwrap();
                last + 0.5 * (l2sq + self.l2sq.last().unwrap()) * (f.t - prev)
            }
        };
        self.times.push(f.t);
        self.mass.push(f.mass());
        self.l2sq.push(l2sq);
        self.cumulative_l2sq.push(cumulative);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Residual of the total-mass identity
    /// `m(t) - m(0) - (sigma1 + sigma2) int_0^t |rho|^2` at every record.
    pub fn identity_residuals(&self, sigma1: f64, sigma2: f64) -> Vec<f64> {
        let m0 = self.mass.first().copied().unwrap_or(0.0);
        self.mass
            .iter()
            .zip(&self.cumulative_l2sq)
            .map(|(m, integral)| m - m0 - (sigma1 + sigma2) * integral)
            .collect()
    }
}

/// Residual time series of the mass-difference identity
/// `m(mu)(t) = (sigma1+sigma2) int <mu, rho0 + rhonu>`, evaluated from the
/// two ledgers through the cross-inner-product identity
/// `<mu, rho0 + rhonu> = |rhonu|^2 - |rho0|^2`.
pub fn mass_diff_check(
    ledger_nu: &MassLedger,
    ledger_0: &MassLedger,
    sigma1: f64,
    sigma2: f64,
) -> Result<Vec<f64>, DiagnosticsError> {
    if ledger_nu.len() != ledger_0.len() {
        return Err(DiagnosticsError::MisalignedLedgers);
    }
    let horizon = ledger_nu.times.last().copied().unwrap_or(0.0).abs();
    for (a, b) in ledger_nu.times.iter().zip(&ledger_0.times) {
        if (a - b).abs() > 1e-9 * horizon.max(1.0) {
            return Err(DiagnosticsError::MisalignedLedgers);
        }
    }
    let m_mu0 = ledger_nu.mass[0] - ledger_0.mass[0];
    Ok((0..ledger_nu.len())
        .map(|i| {
            let m_mu = ledger_nu.mass[i] - ledger_0.mass[i] - m_mu0;
            let integral = ledger_nu.cumulative_l2sq[i] - ledger_0.cumulative_l2sq[i];
            m_mu - (sigma1 + sigma2) * integral
        })
        .collect())
}

/// C-style `%.12e` float formatting (two-digit exponent with sign).
pub fn fmt_e12(x: f64) -> String {
    let s = format!("{:.12e}", x);
    match s.split_once('e') {
        Some((mantissa, exp)) => {
            let e: i32 = exp.parse().unwrap_or(0);
            format!("{}e{}{:02}", mantissa, if e < 0 { '-' } else { '+' }, e.abs())
        }
        None => s,
    }
}

/// Diagnostics CSV writer with the mandatory header row.
pub struct DiagnosticsCsv<W: std::io::Write> {
    out: W,
}

pub const DIAGNOSTICS_HEADER: &str =
    "t,mass,l2,linf,h1_w,holder_beta,tail_R1,tail_R2,ledger_residual";

impl<W: std::io::Write> DiagnosticsCsv<W> {
    pub fn new(mut out: W) -> std::io::Result<DiagnosticsCsv<W>> {
        writeln!(out, "{}", DIAGNOSTICS_HEADER)?;
        Ok(DiagnosticsCsv { out })
    }

    #[allow(clippy::too_many_arguments)]
    pub fn row(
        &mut self,
        t: f64,
        mass: f64,
        l2: f64,
        linf: f64,
        h1_w: f64,
        holder_beta: f64,
        tail_r1: f64,
        tail_r2: f64,
        ledger_residual: f64,
    ) -> std::io::Result<()> {
        let cols = [mass, l2, linf, h1_w, holder_beta, tail_r1, tail_r2, ledger_residual];
        write!(self.out, "{}", fmt_e12(t))?;
        for c in cols {
            write!(self.out, ",{}", fmt_e12(c))?;
        }
        writeln!(self.out)
    }

    pub fn flush(&mut self) -> std::io::Result<()> {
        self.out.flush()
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

#[cfg(test)]
mod tests;
