//! Viscous solver: integrating-factor RK4 in Fourier space.
//!
//! Diffusion is integrated exactly through the factor `exp(-nu |xi|^2 dt)`;
//! the remaining terms advance by classical RK4 with the factor applied
//! between stages, and every quadratic product is dealiased by the 2/3 rule.
//!
//! The advective part is arranged as
//! `-div(rho v_per) - v_lin . grad rho - sigma1 mean(rho) rho + sigma1 rho^2`,
//! algebraically equal to `-v . grad rho` with the mean-flow augmented
//! velocity `v = v_per + sigma1 mean(rho) (x - c)/d`. The flux arrangement
//! makes the discrete total-mass identity
//! `m' = (sigma1 + sigma2) |rho|^2` hold to roundoff for compactly
//! supported data, and the augmentation restores `div v = sigma1 rho` on
//! the data support, matching the whole-space velocity law.

use crate::field::{
    dealias_in_place, forward_transform, inverse_transform, Grid, ScalarField, SpectralField,
    VectorField,
};
use crate::params::{SimParams, SolverError};
use crate::run::{drive, RunOptions, Stepper, Trajectory};
use crate::velocity::velocity_of_spectrum;
use num_complex::Complex64;

/// Term toggles for verification runs (heat-kernel and reaction-only modes).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Terms {
    pub advection: bool,
    pub reaction: bool,
}

impl Default for Terms {
    fn default() -> Self {
        Terms {
            advection: true,
            reaction: true,
        }
    }
}

/// Time-frozen background for the Picard (approximation-sequence) mode:
/// the previous iterate's stored trajectory, interpolated linearly in time.
#[derive(Clone)]
enum Background {
    /// Self-consistent nonlinear solve.
    SelfCoupled,
    /// Linear problem against a stored density history.
    Frozen { times: Vec<f64>, fields: Vec<ScalarField> },
}

impl Background {
    fn eval(&self, t: f64, grid: Grid) -> Option<ScalarField> {
        match self {
            Background::SelfCoupled => None,
            Background::Frozen { times, fields } => {
                let mut f = sample_linear(times, fields, t);
                f.grid = grid;
                Some(f)
            }
        }
    }
}

fn sample_linear(times: &[f64], fields: &[ScalarField], t: f64) -> ScalarField {
    if t <= times[0] {
        return fields[0].clone();
    }
    if t >= *times.last().unwrap() {
        return fields.last().unwrap().clone();
    }
    let i = times.partition_point(|&x| x <= t).min(times.len() - 1);
    let (t0, t1) = (times[i - 1], times[i]);
    let w = (t - t0) / (t1 - t0);
    let mut out = fields[i - 1].clone();
    for (o, b) in out.values.iter_mut().zip(&fields[i].values) {
        *o = *o * (1.0 - w) + *b * w;
    }
    out.t = t;
    out
}

pub struct ViscousSolver {
    grid: Grid,
    params: SimParams,
    terms: Terms,
    background: Background,
    /// Fourier coefficients of the state (kept dealiased).
    hat: SpectralField,
    /// Physical-space mirror of `hat`, refreshed after every step.
    rho: ScalarField,
    linf0: f64,
    /// Centered principal-branch coordinates per axis, for the mean-flow term.
    centered: Vec<Vec<f64>>,
    /// Velocity at the last completed state (diagnostic access).
    v_cache: Option<VectorField>,
}

impl ViscousSolver {
    pub fn new(rho0: &ScalarField, params: SimParams) -> Result<ViscousSolver, SolverError> {
        params.validate()?;
        if !rho0.is_finite() {
            return Err(SolverError::Invalid("initial density has non-finite values".into()));
        }
        let grid = rho0.grid;
        let mut hat = forward_transform(rho0);
        dealias_in_place(&mut hat);
        let rho = inverse_transform(&hat);
        let centered = centered_coords(&grid);
        Ok(ViscousSolver {
            grid,
            params,
            terms: Terms::default(),
            background: Background::SelfCoupled,
            linf0: rho.max_abs(),
            hat,
            rho,
            centered,
            v_cache: None,
        })
    }

    pub fn with_terms(mut self, terms: Terms) -> ViscousSolver {
        self.terms = terms;
        self
    }

    fn with_background(mut self, times: Vec<f64>, fields: Vec<ScalarField>) -> ViscousSolver {
        self.background = Background::Frozen { times, fields };
        self
    }

    pub fn velocity(&mut self) -> VectorField {
        if self.v_cache.is_none() {
            self.v_cache = Some(velocity_of_spectrum(&self.hat, self.params.sigma1));
        }
        self.v_cache.clone().unwrap()
    }

    /// Max of the full (periodic + mean-flow) velocity magnitude.
    fn vmax_total(&self, v_per: &VectorField, mean: f64) -> f64 {
        let rate = self.params.sigma1 * mean / self.grid.dim() as f64;
        let mut worst = 0.0f64;
        for idx in 0..self.grid.len() {
            let mut s = 0.0;
            for (a, comp) in v_per.components.iter().enumerate() {
                let v = comp[idx] + rate * self.centered[a][idx];
                s += v * v;
            }
            worst = worst.max(s);
        }
        worst.sqrt()
    }

    /// Nonlinear right side in Fourier space, dealiased.
    fn rhs_hat(&self, hat: &SpectralField, t_stage: f64) -> SpectralField {
        let g = self.grid;
        let d = g.dim() as f64;
        let rho = inverse_transform(hat);
        let background = self.background.eval(t_stage, g);
        let (coupling, coupling_mean) = match &background {
            None => (None, rho.mean()),
            Some(b) => (Some(b), b.mean()),
        };

        let mut phys = vec![0.0f64; g.len()];
        let s1 = self.params.sigma1;
        let s2 = self.params.sigma2;

        if self.terms.reaction {
            match coupling {
                None => {
                    for (p, r) in phys.iter_mut().zip(&rho.values) {
                        *p += s2 * r * r;
                    }
                }
                Some(b) => {
                    for ((p, r), bb) in phys.iter_mut().zip(&rho.values).zip(&b.values) {
                        *p += s2 * bb * r;
                    }
                }
            }
        }

        let mut out = SpectralField::zeros(g);
        out.t = hat.t;

        if self.terms.advection {
            // velocity is induced by the background density in Picard mode
            let v_src_frozen;
            let v_src = match coupling {
                None => hat,
                Some(b) => {
                    v_src_frozen = forward_transform(b);
                    &v_src_frozen
                }
            };
            let v_per = velocity_of_spectrum(v_src, s1);
            let mean = coupling_mean;
            let rate = s1 * mean / d;

            // -v_lin . grad rho - sigma1 rho_b rho + sigma1 rho_b rho
            // arranged so the self-coupled case is
            // -v_lin.grad rho + sigma1 (rho - mean) rho
            let grad = crate::field::gradient_of_spectrum(hat);
            for idx in 0..g.len() {
                let mut lin = 0.0;
                for a in 0..g.dim() {
                    lin += rate * self.centered[a][idx] * grad.components[a][idx];
                }
                let rho_b = match coupling {
                    None => rho.values[idx],
                    Some(b) => b.values[idx],
                };
                phys[idx] += -lin + s1 * (rho_b - mean) * rho.values[idx];
            }

            // -div(rho v_per), accumulated spectrally
            for a in 0..g.dim() {
                let flux = ScalarField::from_values(
                    g,
                    rho.values
                        .iter()
                        .zip(&v_per.components[a])
                        .map(|(r, v)| r * v)
                        .collect(),
                    rho.t,
                );
                let fhat = forward_transform(&flux);
                for (idx, c) in out.coeffs.iter_mut().enumerate() {
                    let ix = g.unravel(idx);
                    let xi = g.xi_deriv(ix[a]);
                    *c -= Complex64::new(0.0, xi) * fhat.coeffs[idx];
                }
            }
        }

        let phat = forward_transform(&ScalarField::from_values(g, phys, rho.t));
        for (c, p) in out.coeffs.iter_mut().zip(&phat.coeffs) {
            *c += p;
        }
        dealias_in_place(&mut out);
        out
    }

    /// Integrating factors `exp(-nu |xi|^2 dt/2)` and its square.
    fn diffusion_factors(&self, dt: f64) -> (Vec<f64>, Vec<f64>) {
        let g = self.grid;
        let mut half = vec![1.0f64; g.len()];
        let mut full = vec![1.0f64; g.len()];
        if self.params.nu > 0.0 {
            for idx in 0..g.len() {
                let ix = g.unravel(idx);
                let mut k2 = 0.0;
                for a in 0..g.dim() {
                    let xi = g.xi_deriv(ix[a]);
                    k2 += xi * xi;
                }
                half[idx] = (-self.params.nu * k2 * dt / 2.0).exp();
                full[idx] = half[idx] * half[idx];
            }
        }
        (half, full)
    }

    fn admissible_dt(&self, v_per: &VectorField, mean: f64, linf: f64) -> f64 {
        let vmax = self.vmax_total(v_per, mean).max(1e-12);
        let mut dt = self.params.cfl * self.grid.spacing() / vmax;
        if self.params.sigma2 != 0.0 && linf > 0.0 {
            dt = dt.min(0.5 / (self.params.sigma2.abs() * linf));
        }
        dt
    }
}

fn centered_coords(grid: &Grid) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0f64; grid.len()]; grid.dim()];
    for idx in 0..grid.len() {
        let ix = grid.unravel(idx);
        let x = grid.centered_coord(&ix);
        for a in 0..grid.dim() {
            out[a][idx] = x[a];
        }
    }
    out
}

impl Stepper for ViscousSolver {
    fn rho(&self) -> &ScalarField {
        &self.rho
    }

    fn time(&self) -> f64 {
        self.rho.t
    }

    fn try_step(&mut self, dt: f64) -> Result<(), SolverError> {
        let p = self.params;
        let linf = self.rho.max_abs();
        let t = self.rho.t;

        // CFL and reaction-accuracy guards first (dt-sized problems are
        // recoverable by shrinking the step)
        let v_src = match &self.background {
            Background::SelfCoupled => self.hat.clone(),
            Background::Frozen { .. } => {
                forward_transform(&self.background.eval(t, self.grid).unwrap())
            }
        };
        let v_per = velocity_of_spectrum(&v_src, p.sigma1);
        let mean = v_src.coeffs[0].re / self.grid.len() as f64;
        let admissible = self.admissible_dt(&v_per, mean, linf);
        if dt > admissible {
            return Err(SolverError::StepTooLarge {
                requested: dt,
                admissible,
            });
        }

        // existence-horizon guard on the initial amplitude
        if p.sigma2 != 0.0 {
            let product = p.sigma2.abs() * (t + dt) * self.linf0;
            if product > 1.0 - p.blowup_guard + 1e-12 {
                return Err(SolverError::BlowupImminent {
                    t: t + dt,
                    product,
                    limit: 1.0 - p.blowup_guard,
                });
            }
        }
        self.v_cache = Some(v_per);

        // IFRK4: U2 = E(u + dt/2 k1), U3 = E u + dt/2 k2,
        // U4 = E^2 u + dt E k3, u' = E^2 u + dt/6 (E^2 k1 + 2E k2 + 2E k3 + k4)
        let (e_half, e_full) = self.diffusion_factors(dt);
        let u = self.hat.clone();
        let k1 = self.rhs_hat(&u, t);

        let mut u2 = SpectralField::zeros(self.grid);
        for idx in 0..u.coeffs.len() {
            u2.coeffs[idx] = (u.coeffs[idx] + k1.coeffs[idx] * (dt / 2.0)) * e_half[idx];
        }
        u2.t = t + dt / 2.0;
        let k2 = self.rhs_hat(&u2, t + dt / 2.0);

        let mut u3 = SpectralField::zeros(self.grid);
        for idx in 0..u.coeffs.len() {
            u3.coeffs[idx] = u.coeffs[idx] * e_half[idx] + k2.coeffs[idx] * (dt / 2.0);
        }
        u3.t = t + dt / 2.0;
        let k3 = self.rhs_hat(&u3, t + dt / 2.0);

        let mut u4 = SpectralField::zeros(self.grid);
        for idx in 0..u.coeffs.len() {
            u4.coeffs[idx] = u.coeffs[idx] * e_full[idx] + k3.coeffs[idx] * (dt * e_half[idx]);
        }
        u4.t = t + dt;
        let k4 = self.rhs_hat(&u4, t + dt);

        for idx in 0..self.hat.coeffs.len() {
            let acc = k1.coeffs[idx] * e_full[idx]
                + (k2.coeffs[idx] + k3.coeffs[idx]) * (2.0 * e_half[idx])
                + k4.coeffs[idx];
            self.hat.coeffs[idx] = u.coeffs[idx] * e_full[idx] + acc * (dt / 6.0);
        }
        self.hat.t = t + dt;
        self.rho = inverse_transform(&self.hat);
        if !self.rho.is_finite() {
            return Err(SolverError::Invalid(format!(
                "state became non-finite at t = {:.6}",
                self.rho.t
            )));
        }
        self.v_cache = None;
        Ok(())
    }
}

/// One IMEX step from an arbitrary field (test and scripting entry).
pub fn step_viscous(
    rho: &ScalarField,
    p: &SimParams,
    dt: f64,
) -> Result<ScalarField, SolverError> {
    step_viscous_with_terms(rho, p, dt, Terms::default())
}

pub fn step_viscous_with_terms(
    rho: &ScalarField,
    p: &SimParams,
    dt: f64,
    terms: Terms,
) -> Result<ScalarField, SolverError> {
    let mut solver = ViscousSolver::new(rho, *p)?.with_terms(terms);
    solver.try_step(dt)?;
    Ok(solver.rho.clone())
}

/// Integrate the viscous equation from `rho0` over `p.t_end`.
pub fn run_viscous(
    rho0: &ScalarField,
    p: &SimParams,
    opts: &RunOptions,
) -> Result<Trajectory, SolverError> {
    let mut solver = ViscousSolver::new(rho0, *p)?;
    drive(&mut solver, p, opts)
}

pub fn run_viscous_with_terms(
    rho0: &ScalarField,
    p: &SimParams,
    opts: &RunOptions,
    terms: Terms,
) -> Result<Trajectory, SolverError> {
    let mut solver = ViscousSolver::new(rho0, *p)?.with_terms(terms);
    drive(&mut solver, p, opts)
}

/// The approximation sequence: iterate 0 is the constant-in-time initial
/// density; iterate n solves the linear advection-reaction-diffusion
/// problem driven by iterate n-1. Returns `n_iter + 1` trajectories.
pub fn picard_iterate(
    rho0: &ScalarField,
    p: &SimParams,
    t_end: f64,
    n_iter: usize,
) -> Result<Vec<Trajectory>, SolverError> {
    assert!(n_iter >= 1, "need at least one iterate");
    let params = SimParams { t_end, ..*p };
    params.validate()?;
    let horizon = params.guarded_horizon(rho0.max_abs());
    if t_end > horizon {
        return Err(SolverError::BlowupImminent {
            t: t_end,
            product: p.sigma2.abs() * rho0.max_abs() * t_end,
            limit: 1.0 - p.blowup_guard,
        });
    }

    let opts = RunOptions {
        recorder: crate::run::RecorderConfig {
            every: 1,
            snapshot_every: 1,
            holder_beta: 0.0,
            tail_r1: 0.0,
            tail_r2: 0.0,
        },
        adaptive: false,
    };

    // iterate 0: rho stays rho0; synthesize the matching trajectory
    let n_steps = (t_end / params.dt).ceil() as usize;
    let mut zero_traj = {
        let mut times = Vec::new();
        let mut fields = Vec::new();
        for i in 0..=n_steps {
            let t = (i as f64 * params.dt).min(t_end);
            let mut f = rho0.clone();
            f.t = t;
            times.push(t);
            fields.push(f);
            if t >= t_end {
                break;
            }
        }
        (times, fields)
    };
    dedup_times(&mut zero_traj);

    let mut trajectories: Vec<Trajectory> = Vec::with_capacity(n_iter + 1);
    trajectories.push(synthesize_constant_trajectory(&zero_traj));

    let mut background = zero_traj;
    for _ in 1..=n_iter {
        let mut solver = ViscousSolver::new(rho0, params)?
            .with_background(background.0.clone(), background.1.clone());
        let traj = drive(&mut solver, &params, &opts)?;
        background = (traj.times.clone(), traj.snapshots.clone());
        trajectories.push(traj);
    }
    Ok(trajectories)
}

fn dedup_times(t: &mut (Vec<f64>, Vec<ScalarField>)) {
    let mut i = 1;
    while i < t.0.len() {
        if t.0[i] <= t.0[i - 1] {
            t.0.remove(i);
            t.1.remove(i);
        } else {
            i += 1;
        }
    }
}

fn synthesize_constant_trajectory(zero: &(Vec<f64>, Vec<ScalarField>)) -> Trajectory {
    let mut ledger = crate::diagnostics::MassLedger::new();
    for f in &zero.1 {
        ledger.update(f).unwrap();
    }
    let rho0 = zero.1[0].clone();
    let linf = rho0.max_abs();
    let l1 = rho0.values.iter().map(|v| v.abs()).sum::<f64>() * rho0.grid.cell_volume();
    let n = zero.0.len();
    Trajectory {
        final_rho: zero.1.last().unwrap().clone(),
        times: zero.0.clone(),
        ledger,
        linf: vec![linf; n],
        l1: vec![l1; n],
        holder: vec![0.0; n],
        tail1: vec![0.0; n],
        tail2: vec![0.0; n],
        grad_sq: vec![0.0; n],
        cube: vec![rho0.cube_integral(); n],
        snapshots: zero.1.clone(),
        steps: 0,
    }
}

/// Sup over aligned snapshot times of the L2 distance between two
/// trajectories (the `L^inf(0,T;L^2)` metric of the contraction check).
pub fn sup_l2_distance(a: &Trajectory, b: &Trajectory) -> f64 {
    let n = a.snapshots.len().min(b.snapshots.len());
    let mut worst = 0.0f64;
    for i in 0..n {
        let fa = &a.snapshots[i];
        let fb = &b.snapshots[i];
        let mut acc = 0.0;
        for (x, y) in fa.values.iter().zip(&fb.values) {
            acc += (x - y) * (x - y);
        }
        worst = worst.max((acc * fa.grid.cell_volume()).sqrt());
    }
    worst
}
