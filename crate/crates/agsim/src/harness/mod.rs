//! Vanishing-viscosity and uniform-Holder studies: runs the inviscid solver
//! once and the viscous solver per viscosity from identical data, computes
//! the comparison quantities (mu, w, and in the 2D nonconservative case the
//! corrector decomposition), and fits log-log convergence rates.

use crate::diagnostics::{fmt_e12, h1_norm_diff, holder_star_norm, lp_norm};
use crate::field::{Grid, ScalarField, VectorField};
use crate::init::InitSpec;
use crate::inviscid::run_inviscid;
use crate::params::{SimParams, SolverError};
use crate::run::{RecorderConfig, RunOptions, Trajectory};
use crate::velocity::{corrector_tau0, corrector_theta, solve_velocity, unit_mass_bump, RadialProfile};
use crate::viscous::run_viscous;
use rayon::prelude::*;
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("nu_list must be strictly decreasing and positive")]
    BadNuList,
    #[error("rate fit needs at least two distinct abscissae")]
    DegenerateX,
    #[error("an error norm underflowed 1e-14; the resolution floor is reached")]
    FitDegenerate,
    #[error("corrector study requires sigma1 + sigma2 != 0")]
    RequiresNonconservativeCase,
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Corrector(#[from] crate::velocity::CorrectorError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Configuration of a viscosity sweep.
#[derive(Debug, Clone)]
pub struct VvConfig {
    pub grid: Grid,
    pub params: SimParams,
    /// Strictly decreasing positive viscosities.
    pub nu_list: Vec<f64>,
    pub t_eval: f64,
    pub beta: f64,
    pub init: InitSpec,
    /// Radius of the unit-mass corrector profile g0 (2D, nonconservative).
    pub g0_radius: f64,
    /// Record cadence (steps) shared by every run.
    pub record_every: usize,
    /// When set, exclude sweep points whose L2 error falls under 10x the
    /// grid-refinement error measured by a 2x-resolution inviscid pilot.
    pub pilot_floor: bool,
}

impl VvConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        self.params.validate().map_err(SolverError::from)?;
        if self.nu_list.is_empty()
            || self.nu_list.iter().any(|nu| *nu <= 0.0)
            || self.nu_list.windows(2).any(|w| w[0] <= w[1])
        {
            return Err(HarnessError::BadNuList);
        }
        Ok(())
    }
}

/// Per-viscosity comparison row.
#[derive(Debug, Clone, Copy)]
pub struct VvRow {
    pub nu: f64,
    pub l2_err: f64,
    pub linf_err: f64,
    /// `|w|_{H^1}`, or `|w~|_{H^1}` in the corrector case.
    pub h1_w: f64,
    pub mass_mu: f64,
    pub theta_inf: f64,
    /// Holder norm of the viscous density at `t_eval`.
    pub holder: f64,
    /// Sup over recorded times of the Holder norm.
    pub holder_sup: f64,
    pub excluded: bool,
}

#[derive(Debug, Clone)]
pub struct RateReport {
    pub rows: Vec<VvRow>,
    pub slope_l2: f64,
    pub slope_linf: f64,
    pub slope_h1: f64,
    pub r2_l2: f64,
    pub r2_linf: f64,
    /// True when fewer than two usable points were available for fitting.
    pub flagged: bool,
}

impl RateReport {
    /// Render the report as `vv_report.csv` content.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("nu,l2_err,linf_err,h1_w,mass_mu,theta_inf,holder\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                fmt_e12(r.nu),
                fmt_e12(r.l2_err),
                fmt_e12(r.linf_err),
                fmt_e12(r.h1_w),
                fmt_e12(r.mass_mu),
                fmt_e12(r.theta_inf),
                fmt_e12(r.holder),
            ));
        }
        out.push_str(&format!(
            "# slope_l2={:.6}, slope_linf={:.6}, r2={:.6}\n",
            self.slope_l2, self.slope_linf, self.r2_l2
        ));
        out
    }
}

/// Ordinary least squares fit of `y = slope x + intercept` with `r^2`.
pub fn fit_rate(pairs: &[(f64, f64)]) -> Result<(f64, f64, f64), HarnessError> {
    if pairs.len() < 2 {
        return Err(HarnessError::DegenerateX);
    }
    let n = pairs.len() as f64;
    let sx: f64 = pairs.iter().map(|p| p.0).sum();
    let sy: f64 = pairs.iter().map(|p| p.1).sum();
    let sxx: f64 = pairs.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pairs.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() <= 1e-300 || pairs.windows(2).all(|w| w[0].0 == w[1].0) {
        return Err(HarnessError::DegenerateX);
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let mean_y = sy / n;
    let ss_tot: f64 = pairs.iter().map(|p| (p.1 - mean_y) * (p.1 - mean_y)).sum();
    let ss_res: f64 = pairs
        .iter()
        .map(|p| {
            let e = p.1 - slope * p.0 - intercept;
            e * e
        })
        .sum();
    let r2 = if ss_tot <= 1e-300 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok((slope, intercept, r2))
}

/// Everything the comparison of one viscous run against the inviscid run
/// produces; fields are kept so g0-sensitivity can be inspected directly.
pub struct VvComparison {
    pub mu: ScalarField,
    pub w: VectorField,
    pub theta: Option<VectorField>,
    pub w_tilde: Option<VectorField>,
    pub mu_tilde: Option<ScalarField>,
    pub mass_mu: f64,
}

/// Compare final states; when `tau0`/`g0` are given (2D nonconservative
/// case) also build the corrector decomposition
/// `w~ = w - sigma1 m(mu) tau0`, `mu~ = mu - m(mu) g0`.
pub fn vv_compare(
    rho_nu: &ScalarField,
    rho_0: &ScalarField,
    sigma1: f64,
    corrector: Option<(&VectorField, &RadialProfile)>,
) -> VvComparison {
    let g = rho_nu.grid;
    let mu = ScalarField::from_values(
        g,
        rho_nu
            .values
            .iter()
            .zip(&rho_0.values)
            .map(|(a, b)| a - b)
            .collect(),
        rho_nu.t,
    );
    // velocity difference equals the velocity of the difference (linearity)
    let w = solve_velocity(&mu, sigma1);
    let mass_mu = mu.mass();
    let (theta, w_tilde, mu_tilde) = match corrector {
        None => (None, None, None),
        Some((tau0, g0)) => {
            let theta = corrector_theta(mass_mu, sigma1, tau0);
            let w_tilde = w.sub(&theta);
            let c = g.center();
            let mu_tilde = ScalarField::from_values(
                g,
                mu.values
                    .iter()
                    .enumerate()
                    .map(|(idx, v)| {
                        let ix = g.unravel(idx);
                        let x = [g.coord(ix[0]) - c[0], g.coord(ix[1]) - c[1]];
                        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
                        v - mass_mu * g0.eval(r)
                    })
                    .collect(),
                mu.t,
            );
            (Some(theta), Some(w_tilde), Some(mu_tilde))
        }
    };
    VvComparison {
        mu,
        w,
        theta,
        w_tilde,
        mu_tilde,
        mass_mu,
    }
}

struct SweepRuns {
    inviscid: Trajectory,
    viscous: Vec<(f64, Trajectory)>,
}

fn shared_options(cfg: &VvConfig) -> RunOptions {
    RunOptions {
        recorder: RecorderConfig {
            every: cfg.record_every,
            snapshot_every: 0,
            holder_beta: cfg.beta,
            tail_r1: 0.0,
            tail_r2: 0.0,
        },
        adaptive: false,
    }
}

/// Run the inviscid solver once and the viscous solver per viscosity, all
/// with the shared time step `cfg.params.dt` (dt error is common-mode and
/// cancels in the rate fits).
fn run_sweep(cfg: &VvConfig) -> Result<SweepRuns, HarnessError> {
    cfg.validate()?;
    let rho0 = cfg
        .init
        .build(cfg.grid)
        .map_err(|e| SolverError::Invalid(format!("initial condition: {e}")))?;
    let params = SimParams {
        t_end: cfg.t_eval,
        ..cfg.params
    };
    let opts = shared_options(cfg);

    let inviscid = run_inviscid(&rho0, &SimParams { nu: 0.0, ..params }, &opts)?;
    let viscous: Result<Vec<_>, SolverError> = cfg
        .nu_list
        .par_iter()
        .map(|&nu| {
            let p = SimParams { nu, ..params };
            run_viscous(&rho0, &p, &opts).map(|t| (nu, t))
        })
        .collect();
    Ok(SweepRuns {
        inviscid,
        viscous: viscous?,
    })
}

fn corrector_applicable(cfg: &VvConfig) -> bool {
    cfg.grid.dim() == 2 && cfg.params.sigma1 + cfg.params.sigma2 != 0.0
}

/// The vanishing-viscosity study.
pub fn vv_study(cfg: &VvConfig) -> Result<RateReport, HarnessError> {
    let runs = run_sweep(cfg)?;
    let corrector = if corrector_applicable(cfg) {
        let g0 = unit_mass_bump(cfg.g0_radius);
        let tau0 = corrector_tau0(&g0, cfg.grid)?;
        Some((tau0, g0))
    } else {
        None
    };

    let floor = if cfg.pilot_floor {
        Some(10.0 * pilot_refinement_error(cfg)?)
    } else {
        None
    };

    let mut rows = Vec::with_capacity(runs.viscous.len());
    for (nu, traj) in &runs.viscous {
        let cmp = vv_compare(
            &traj.final_rho,
            &runs.inviscid.final_rho,
            cfg.params.sigma1,
            corrector.as_ref().map(|(t, g)| (t, g)),
        );
        let l2_err = lp_norm(&cmp.mu, 2.0).unwrap();
        let linf_err = cmp.mu.max_abs();
        if l2_err < 1e-14 || linf_err < 1e-14 {
            return Err(HarnessError::FitDegenerate);
        }
        let h1 = match (&cmp.w_tilde, &cmp.mu_tilde) {
            (Some(wt), Some(mt)) => h1_norm_diff(wt, mt, cfg.params.sigma1).h1,
            _ => h1_norm_diff(&cmp.w, &cmp.mu, cfg.params.sigma1).h1,
        };
        let theta_inf = cmp.theta.as_ref().map(|t| t.max_norm()).unwrap_or(0.0);
        let holder = holder_star_norm(&traj.final_rho, cfg.beta);
        let holder_sup = traj.holder.iter().fold(0.0f64, |m, h| m.max(*h));
        let excluded = floor.map(|f| l2_err < f).unwrap_or(false);
        rows.push(VvRow {
            nu: *nu,
            l2_err,
            linf_err,
            h1_w: h1,
            mass_mu: cmp.mass_mu,
            theta_inf,
            holder,
            holder_sup,
            excluded,
        });
    }

    let usable: Vec<&VvRow> = rows.iter().filter(|r| !r.excluded).collect();
    let flagged = usable.len() < 2;
    let fit = |f: &dyn Fn(&VvRow) -> f64| -> (f64, f64) {
        if flagged {
            return (f64::NAN, f64::NAN);
        }
        let pairs: Vec<(f64, f64)> = usable.iter().map(|r| (r.nu.ln(), f(r).ln())).collect();
        match fit_rate(&pairs) {
            Ok((slope, _, r2)) => (slope, r2),
            Err(_) => (f64::NAN, f64::NAN),
        }
    };
    let (slope_l2, r2_l2) = fit(&|r| r.l2_err);
    let (slope_linf, r2_linf) = fit(&|r| r.linf_err);
    let (slope_h1, _) = fit(&|r| r.h1_w);

    Ok(RateReport {
        rows,
        slope_l2,
        slope_linf,
        slope_h1,
        r2_l2,
        r2_linf,
        flagged,
    })
}

/// Grid-refinement error estimate: inviscid solve at 2x resolution,
/// restricted to the base grid.
fn pilot_refinement_error(cfg: &VvConfig) -> Result<f64, HarnessError> {
    let g = cfg.grid;
    let fine = Grid::new(g.dim(), g.points_per_axis() * 2, g.box_length())
        .map_err(|e| SolverError::Invalid(e.to_string()))?;
    let params = SimParams {
        t_end: cfg.t_eval,
        nu: 0.0,
        ..cfg.params
    };
    let opts = shared_options(cfg);
    let rho0_fine = cfg
        .init
        .build(fine)
        .map_err(|e| SolverError::Invalid(format!("initial condition: {e}")))?;
    let fine_run = run_inviscid(&rho0_fine, &params, &opts)?;
    let rho0 = cfg
        .init
        .build(g)
        .map_err(|e| SolverError::Invalid(format!("initial condition: {e}")))?;
    let base_run = run_inviscid(&rho0, &params, &opts)?;

    let sampler = crate::field::CubicSampler::new(&fine_run.final_rho);
    let mut acc = 0.0;
    for idx in 0..g.len() {
        let ix = g.unravel(idx);
        let mut x = [0.0f64; 3];
        for a in 0..g.dim() {
            x[a] = g.coord(ix[a]);
        }
        let d = base_run.final_rho.values[idx] - sampler.sample(&x[..g.dim()]);
        acc += d * d;
    }
    Ok((acc * g.cell_volume()).sqrt())
}

/// Corrector-study report (2D, nonconservative case only).
#[derive(Debug, Clone)]
pub struct CorrectorReport {
    pub rows: Vec<(f64, f64, f64)>,
    /// `(nu, |theta|_inf, |w~|_H1)` rows; slope of log|theta|_inf vs log nu.
    pub slope_theta: f64,
    /// Max over the sweep of `|w~ + theta - w|_inf` (exact by construction).
    pub identity_defect: f64,
}

pub fn corrector_study(cfg: &VvConfig) -> Result<CorrectorReport, HarnessError> {
    if !corrector_applicable(cfg) {
        return Err(HarnessError::RequiresNonconservativeCase);
    }
    let runs = run_sweep(cfg)?;
    let g0 = unit_mass_bump(cfg.g0_radius);
    let tau0 = corrector_tau0(&g0, cfg.grid)?;

    let mut rows = Vec::new();
    let mut identity_defect = 0.0f64;
    for (nu, traj) in &runs.viscous {
        let cmp = vv_compare(
            &traj.final_rho,
            &runs.inviscid.final_rho,
            cfg.params.sigma1,
            Some((&tau0, &g0)),
        );
        let theta = cmp.theta.as_ref().unwrap();
        let w_tilde = cmp.w_tilde.as_ref().unwrap();
        let mu_tilde = cmp.mu_tilde.as_ref().unwrap();
        // w~ + theta must reassemble w
        let mut recon = w_tilde.clone();
        for (rc, tc) in recon.components.iter_mut().zip(&theta.components) {
            for (x, y) in rc.iter_mut().zip(tc) {
                *x += y;
            }
        }
        identity_defect = identity_defect.max(recon.max_abs_diff(&cmp.w));
        let h1 = h1_norm_diff(w_tilde, mu_tilde, cfg.params.sigma1).h1;
        rows.push((*nu, theta.max_norm(), h1));
    }
    let pairs: Vec<(f64, f64)> = rows
        .iter()
        .filter(|(_, t, _)| *t > 1e-300)
        .map(|(nu, t, _)| (nu.ln(), t.ln()))
        .collect();
    let slope_theta = fit_rate(&pairs).map(|(s, _, _)| s).unwrap_or(f64::NAN);
    Ok(CorrectorReport {
        rows,
        slope_theta,
        identity_defect,
    })
}

#[derive(Debug, Clone)]
pub struct HolderReport {
    /// `(nu, sup_t |rho^nu(t)|_{C^beta_*})` per sweep entry.
    pub rows: Vec<(f64, f64)>,
    pub ratio: f64,
}

/// Uniformity in viscosity of the Holder norm over the whole run.
pub fn holder_uniformity_study(cfg: &VvConfig) -> Result<HolderReport, HarnessError> {
    let runs = run_sweep(cfg)?;
    let mut rows = Vec::new();
    for (nu, traj) in &runs.viscous {
        let sup = traj.holder.iter().fold(0.0f64, |m, h| m.max(*h));
        rows.push((*nu, sup));
    }
    let max = rows.iter().map(|r| r.1).fold(0.0f64, f64::max);
    let min = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    Ok(HolderReport {
        rows,
        ratio: max / min,
    })
}

/// Write `vv_report.csv` into the directory.
pub fn write_report(dir: &std::path::Path, report: &RateReport) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)?;
    let mut f = std::fs::File::create(dir.join("vv_report.csv"))?;
    f.write_all(report.to_csv().as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests;
