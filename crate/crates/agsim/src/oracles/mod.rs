//! Independent reference solutions. Nothing here touches the grid solvers:
//! the velocity oracle evaluates the spectral symbol by direct DFT sums, and
//! the radial oracle integrates its own shell ODE system.

use crate::field::{ScalarField, VectorField};
use crate::params::SimParams;
use crate::velocity::{RadialGenerator, RadialProfile};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("direct convolution limited to n <= 32, got {0}")]
    GridTooLarge(usize),
    #[error("radial reference is an inviscid oracle; got nu = {0}")]
    RequiresInviscid(f64),
    #[error("blow-up denominator 1 - sigma2 t rho = {0:.6} is nonpositive")]
    BlowupDomain(f64),
    #[error("radial oracle supports d in {{2, 3}}, got {0}")]
    UnsupportedDimension(usize),
}

/// Velocity by direct kernel convolution: `v(x) = sum_y G(x-y) rho(y) h^d`
/// with the periodic Green's-gradient kernel evaluated by direct DFT sums.
/// O(n^{2d}); refuses grids beyond n = 32.
pub fn direct_convolution_velocity(
    rho: &ScalarField,
    sigma1: f64,
) -> Result<VectorField, OracleError> {
    let g = rho.grid;
    let n = g.points_per_axis();
    if n > 32 {
        return Err(OracleError::GridTooLarge(n));
    }
    let d = g.dim();
    let nd = g.len();
    let two_pi = 2.0 * std::f64::consts::PI;

    // integer wavenumber of bin i, with the Nyquist bin treated as zero
    // frequency for the odd symbol
    let wave = |i: usize| -> i64 {
        if i < n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    };
    let deriv_wave = |i: usize| -> f64 {
        if i == n / 2 {
            0.0
        } else {
            two_pi * wave(i) as f64 / g.box_length()
        }
    };

    // 1D phase table e^{2 pi i k m / n} indexed by (bin, offset)
    let mut phase_re = vec![0.0f64; n * n];
    let mut phase_im = vec![0.0f64; n * n];
    for k in 0..n {
        for m in 0..n {
            let ang = two_pi * (wave(k) * m as i64) as f64 / n as f64;
            phase_re[k * n + m] = ang.cos();
            phase_im[k * n + m] = ang.sin();
        }
    }

    // kernel K_j(m) = (1/n^d) sum_k S_j(k) prod_a phase(k_a, m_a)
    let mut kernels = vec![vec![0.0f64; nd]; d];
    for midx in 0..nd {
        let mx = g.unravel(midx);
        for kidx in 0..nd {
            let kx = g.unravel(kidx);
            let mut k2 = 0.0;
            let mut xi = [0.0f64; 3];
            for a in 0..d {
                xi[a] = deriv_wave(kx[a]);
                k2 += xi[a] * xi[a];
            }
            if k2 == 0.0 {
                continue;
            }
            // separable complex phase product
            let (mut pre, mut pim) = (1.0f64, 0.0f64);
            for a in 0..d {
                let re = phase_re[kx[a] * n + mx[a]];
                let im = phase_im[kx[a] * n + mx[a]];
                let nre = pre * re - pim * im;
                pim = pre * im + pim * re;
                pre = nre;
            }
            let _ = pre;
            // S_j = i s with s = -sigma1 xi_j / |xi|^2, so
            // Re[S_j (pre + i pim)] = -s pim = sigma1 xi_j pim / |xi|^2
            for (a, kernel) in kernels.iter_mut().enumerate() {
                kernel[midx] += sigma1 * xi[a] * pim / k2;
            }
        }
        for kernel in kernels.iter_mut() {
            kernel[midx] /= nd as f64;
        }
    }

    // direct periodic convolution
    let mut out = VectorField::zeros(g);
    out.t = rho.t;
    for xidx in 0..nd {
        let xv = g.unravel(xidx);
        for yidx in 0..nd {
            let yv = g.unravel(yidx);
            let mut off = [0usize; 3];
            for a in 0..d {
                off[a] = (xv[a] + n - yv[a]) % n;
            }
            let midx = g.ravel(&off[..d]);
            for a in 0..d {
                out.components[a][xidx] += kernels[a][midx] * rho.values[yidx];
            }
        }
    }
    Ok(out)
}

/// Exact uniform-patch state: density and radius of an initially uniform
/// disc/ball of density `c` and radius `r0` at time `t`.
pub fn patch_reference(
    c: f64,
    r0: f64,
    sigma1: f64,
    sigma2: f64,
    d: usize,
    t: f64,
) -> Result<(f64, f64), OracleError> {
    let jac = if sigma2 == 0.0 {
        (sigma1 * c * t).exp()
    } else {
        let denom = 1.0 - sigma2 * t * c;
        if denom <= 0.0 {
            return Err(OracleError::BlowupDomain(denom));
        }
        denom.powf(-sigma1 / sigma2)
    };
    let denom = 1.0 - sigma2 * t * c;
    if denom <= 0.0 {
        return Err(OracleError::BlowupDomain(denom));
    }
    Ok((c / denom, r0 * jac.powf(1.0 / d as f64)))
}

/// Reference solution for radial data: material shells `r_i(t)` moved by
/// the enclosed-integral velocity `sigma1 Q_i / r_i^{d-1}`, with `Q_i`
/// advanced by the material law `dQ/dt = (sigma1+sigma2) int eta^{d-1} rho^2`
/// and the carried density given in closed form along each shell.
pub fn radial_reference(
    profile0: &RadialProfile,
    p: &SimParams,
    t: f64,
    n_shells: usize,
    d: usize,
) -> Result<RadialProfile, OracleError> {
    if p.nu != 0.0 {
        return Err(OracleError::RequiresInviscid(p.nu));
    }
    if d != 2 && d != 3 {
        return Err(OracleError::UnsupportedDimension(d));
    }
    let support = profile0.support_radius();
    let radii0 = shell_radii(support, n_shells);
    let rho0: Vec<f64> = radii0.iter().map(|&r| profile0.eval(r)).collect();
    let center_rho0 = profile0.eval(0.0);
    let edge_index = radii0.iter().position(|&r| r >= support);

    // carried density at time tau for initial value a
    let carried = |a: f64, tau: f64| -> Result<f64, OracleError> {
        let denom = 1.0 - p.sigma2 * tau * a;
        if denom <= 0.0 {
            return Err(OracleError::BlowupDomain(denom));
        }
        Ok(a / denom)
    };

    let weight = |r: f64| -> f64 {
        if d == 2 {
            r
        } else {
            r * r
        }
    };

    // prefix integrals of w(eta) f(eta) over the shell polyline, including
    // the center segment [0, r_0]; split at the designated material edge
    let prefix = |rs: &[f64], fs: &[f64]| -> Vec<f64> {
        let mut xs = Vec::with_capacity(rs.len() + 1);
        let mut ys = Vec::with_capacity(rs.len() + 1);
        xs.push(0.0);
        ys.push(0.0); // w(0) f = 0
        for (r, f) in rs.iter().zip(fs) {
            xs.push(*r);
            ys.push(weight(*r) * f);
        }
        let mut acc = cumulative_integral(&xs, &ys, edge_index.map(|e| e + 1));
        acc.remove(0);
        acc
    };

    // initial enclosed integrals Q_i
    let q0 = prefix(&radii0, &rho0);

    let n_sub = ((t / (p.dt / 10.0)).ceil() as usize).max(1);
    let h = t / n_sub as f64;

    let mut state: Vec<f64> = radii0.iter().chain(q0.iter()).copied().collect();
    let m = radii0.len();

    let deriv = |tau: f64, s: &[f64], out: &mut Vec<f64>| -> Result<(), OracleError> {
        let rs = &s[..m];
        let qs = &s[m..];
        let mut sq = Vec::with_capacity(m);
        for a in &rho0 {
            let dens = carried(*a, tau)?;
            sq.push(dens * dens);
        }
        let ps = prefix(rs, &sq);
        out.clear();
        for i in 0..m {
            let r = rs[i].max(1e-12);
            out.push(p.sigma1 * qs[i] / weight(r));
        }
        for i in 0..m {
            out.push((p.sigma1 + p.sigma2) * ps[i]);
        }
        Ok(())
    };

    let mut k1 = Vec::new();
    let mut k2 = Vec::new();
    let mut k3 = Vec::new();
    let mut k4 = Vec::new();
    let mut tmp = vec![0.0f64; state.len()];
    for step in 0..n_sub {
        let tau = step as f64 * h;
        deriv(tau, &state, &mut k1)?;
        for i in 0..state.len() {
            tmp[i] = state[i] + 0.5 * h * k1[i];
        }
        deriv(tau + 0.5 * h, &tmp, &mut k2)?;
        for i in 0..state.len() {
            tmp[i] = state[i] + 0.5 * h * k2[i];
        }
        deriv(tau + 0.5 * h, &tmp, &mut k3)?;
        for i in 0..state.len() {
            tmp[i] = state[i] + h * k3[i];
        }
        deriv(tau + h, &tmp, &mut k4)?;
        for i in 0..state.len() {
            state[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }

    let mut radii = Vec::with_capacity(m + 1);
    let mut values = Vec::with_capacity(m + 1);
    radii.push(0.0);
    values.push(carried(center_rho0, t)?);
    for i in 0..m {
        radii.push(state[i]);
        values.push(carried(rho0[i], t)?);
    }
    Ok(RadialProfile {
        radii,
        values,
        generator: RadialGenerator::Table,
    })
}

/// Shell layout: most shells inside the support with clustering toward the
/// material edge (always placing one shell exactly at the edge), the rest
/// outside up to 1.3x the support.
fn shell_radii(support: f64, n_shells: usize) -> Vec<f64> {
    let n_in = (n_shells * 7 / 10).max(2);
    let n_out = n_shells.saturating_sub(n_in).max(1);
    let mut out = Vec::with_capacity(n_in + n_out);
    for i in 1..=n_in {
        let s = i as f64 / n_in as f64;
        out.push(support * (1.0 - (1.0 - s).powf(1.5)));
    }
    let outer = 0.3 * support;
    for j in 1..=n_out {
        let s = j as f64 / n_out as f64;
        out.push(support + outer * s.powf(1.5));
    }
    out
}

/// Prefix integrals over a polyline by quadratic (Simpson-like) pieces on
/// nonuniform nodes. `split` optionally marks the compact-support edge: no
/// quadratic straddles it, and pieces on the outside use the outside limit
/// 0 at the edge node rather than the (inside) sample value.
fn cumulative_integral(xs: &[f64], ys: &[f64], split: Option<usize>) -> Vec<f64> {
    let n = xs.len();
    let straddles = |lo: usize, hi: usize| -> bool {
        match split {
            Some(s) => lo < s && s < hi,
            None => false,
        }
    };
    // node value as seen from an outside piece
    let y_out = |i: usize, piece_lo: usize| -> f64 {
        match split {
            Some(s) if i == s && piece_lo >= s => 0.0,
            _ => ys[i],
        }
    };
    let mut acc = vec![0.0f64; n];
    for j in 1..n {
        let piece = {
            let fwd = if j + 1 < n && !straddles(j - 1, j + 1) {
                Some(quad_piece(
                    xs[j - 1],
                    xs[j],
                    xs[j + 1],
                    y_out(j - 1, j - 1),
                    y_out(j, j - 1),
                    y_out(j + 1, j - 1),
                    false,
                ))
            } else {
                None
            };
            let bwd = if j >= 2 && !straddles(j - 2, j) {
                Some(quad_piece(
                    xs[j - 2],
                    xs[j - 1],
                    xs[j],
                    y_out(j - 2, j - 2),
                    y_out(j - 1, j - 2),
                    y_out(j, j - 2),
                    true,
                ))
            } else {
                None
            };
            match (fwd, bwd) {
                (Some(a), Some(b)) => 0.5 * (a + b),
                (Some(a), None) => a,
                (None, Some(b)) => b,
                (None, None) => {
                    0.5 * (y_out(j - 1, j - 1) + y_out(j, j - 1)) * (xs[j] - xs[j - 1])
                }
            }
        };
        acc[j] = acc[j - 1] + piece;
    }
    acc
}

/// Integral over the last (forward = false) or middle-to-last (forward =
/// true... direction encoded by which segment of the quadratic is used):
/// integrate the quadratic through (x0,y0),(x1,y1),(x2,y2) over
/// [x1, x2] when `last` is true, else over [x0, x1].
fn quad_piece(x0: f64, x1: f64, x2: f64, y0: f64, y1: f64, y2: f64, last: bool) -> f64 {
    // Lagrange quadratic integration
    let (a, b) = if last { (x1, x2) } else { (x0, x1) };
    let int_basis = |xi: f64, xj: f64, xk: f64| -> f64 {
        // integral over [a,b] of (x-xj)(x-xk)/((xi-xj)(xi-xk))
        let denom = (xi - xj) * (xi - xk);
        let prim = |x: f64| -> f64 {
            x * x * x / 3.0 - (xj + xk) * x * x / 2.0 + xj * xk * x
        };
        (prim(b) - prim(a)) / denom
    };
    y0 * int_basis(x0, x1, x2) + y1 * int_basis(x1, x0, x2) + y2 * int_basis(x2, x0, x1)
}
