//! Shared time-loop plumbing: recorder, trajectory, and the adaptive
//! stepping driver used by both solvers.

use crate::diagnostics::{holder_star_norm, tail_norm, MassLedger};
use crate::field::{forward_transform, ScalarField};
use crate::params::{SimParams, SolverError};

/// What the recorder computes at each tick.
#[derive(Debug, Clone)]
pub struct RecorderConfig {
    /// Record every k-th accepted step (the initial and final states are
    /// always recorded).
    pub every: usize,
    /// Keep a full field snapshot every k-th record; 0 disables snapshots.
    pub snapshot_every: usize,
    /// Holder exponent for the `holder_beta` column; 0 skips the (costly)
    /// dyadic decomposition.
    pub holder_beta: f64,
    /// Tail cutoff radii; 0 skips a column.
    pub tail_r1: f64,
    pub tail_r2: f64,
}

impl Default for RecorderConfig {
    fn default() -> Self {
        RecorderConfig {
            every: 10,
            snapshot_every: 0,
            holder_beta: 0.5,
            tail_r1: 0.0,
            tail_r2: 0.0,
        }
    }
}

/// Everything observed over one run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub final_rho: ScalarField,
    pub times: Vec<f64>,
    pub ledger: MassLedger,
    pub linf: Vec<f64>,
    pub l1: Vec<f64>,
    pub holder: Vec<f64>,
    pub tail1: Vec<f64>,
    pub tail2: Vec<f64>,
    /// `|grad rho|^2` per record (spectral Parseval).
    pub grad_sq: Vec<f64>,
    /// `int rho^3` per record.
    pub cube: Vec<f64>,
    pub snapshots: Vec<ScalarField>,
    pub steps: usize,
}

impl Trajectory {
    /// Sup over records of `|rho(t)|_inf / envelope(t)` where the envelope
    /// is the amplitude bound `|rho0|_inf / (1 - |sigma2| |rho0|_inf t)`.
    pub fn amplitude_envelope_excess(&self, sigma2: f64) -> f64 {
        let linf0 = self.linf.first().copied().unwrap_or(0.0);
        if linf0 == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for (t, linf) in self.times.iter().zip(&self.linf) {
            let denom = 1.0 - sigma2.abs() * linf0 * (t - self.times[0]);
            if denom <= 0.0 {
                return f64::INFINITY;
            }
            let envelope = linf0 / denom;
            worst = worst.max((linf - envelope) / linf0);
        }
        worst
    }

    /// Residual of the q = 2 energy ledger
    /// `|rho(t)|^2 + 2 nu int |grad rho|^2 - |rho0|^2 - (s1+2 s2) int int rho^3`,
    /// relative to `|rho0|^2`, via trapezoid sums over the records.
    pub fn energy_residual(&self, sigma1: f64, sigma2: f64, nu: f64) -> f64 {
        let l2sq0 = self.ledger.l2sq[0];
        let mut worst = 0.0f64;
        let mut int_grad = 0.0;
        let mut int_cube = 0.0;
        for i in 1..self.times.len() {
            let dt = self.times[i] - self.times[i - 1];
            int_grad += 0.5 * (self.grad_sq[i] + self.grad_sq[i - 1]) * dt;
            int_cube += 0.5 * (self.cube[i] + self.cube[i - 1]) * dt;
            let lhs = self.ledger.l2sq[i] + 2.0 * nu * int_grad;
            let rhs = l2sq0 + (sigma1 + 2.0 * sigma2) * int_cube;
            worst = worst.max((lhs - rhs).abs() / l2sq0.max(f64::MIN_POSITIVE));
        }
        worst
    }
}

/// A time stepper the driver can advance and observe.
pub trait Stepper {
    fn rho(&self) -> &ScalarField;
    fn time(&self) -> f64;
    /// Attempt one step; on `StepTooLarge` the state must be unchanged.
    fn try_step(&mut self, dt: f64) -> Result<(), SolverError>;
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub recorder: RecorderConfig,
    /// Halve the step and retry on `StepTooLarge` instead of failing.
    pub adaptive: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            recorder: RecorderConfig::default(),
            adaptive: true,
        }
    }
}

pub(crate) struct Recorder {
    cfg: RecorderConfig,
    traj: Trajectory,
    records: usize,
}

impl Recorder {
    fn new(cfg: RecorderConfig, grid_rho: &ScalarField) -> Recorder {
        Recorder {
            cfg,
            traj: Trajectory {
                final_rho: grid_rho.clone(),
                times: Vec::new(),
                ledger: MassLedger::new(),
                linf: Vec::new(),
                l1: Vec::new(),
                holder: Vec::new(),
                tail1: Vec::new(),
                tail2: Vec::new(),
                grad_sq: Vec::new(),
                cube: Vec::new(),
                snapshots: Vec::new(),
                steps: 0,
            },
            records: 0,
        }
    }

    fn record(&mut self, rho: &ScalarField) {
        self.traj
            .ledger
            .update(rho)
            .expect("record times increase monotonically");
        self.traj.times.push(rho.t);
        self.traj.linf.push(rho.max_abs());
        self.traj
            .l1
            .push(rho.values.iter().map(|v| v.abs()).sum::<f64>() * rho.grid.cell_volume());
        self.traj.cube.push(rho.cube_integral());
        self.traj.grad_sq.push(grad_sq_spectral(rho));
        if self.cfg.holder_beta > 0.0 {
            self.traj.holder.push(holder_star_norm(rho, self.cfg.holder_beta));
        } else {
            self.traj.holder.push(0.0);
        }
        self.traj.tail1.push(tail_or_zero(rho, self.cfg.tail_r1));
        self.traj.tail2.push(tail_or_zero(rho, self.cfg.tail_r2));
        if self.cfg.snapshot_every > 0 && self.records % self.cfg.snapshot_every == 0 {
            self.traj.snapshots.push(rho.clone());
        }
        self.records += 1;
    }
}

fn tail_or_zero(rho: &ScalarField, r: f64) -> f64 {
    if r > 0.0 {
        tail_norm(rho, r).unwrap_or(0.0)
    } else {
        0.0
    }
}

fn grad_sq_spectral(rho: &ScalarField) -> f64 {
    let g = rho.grid;
    let s = forward_transform(rho);
    let nd = g.len() as f64;
    let mut acc = 0.0;
    for (idx, c) in s.coeffs.iter().enumerate() {
        let ix = g.unravel(idx);
        let mut k2 = 0.0;
        for a in 0..g.dim() {
            let xi = g.xi_deriv(ix[a]);
            k2 += xi * xi;
        }
        acc += k2 * c.norm_sqr();
    }
    acc * g.cell_volume() / nd
}

/// Drive a stepper from its current time to `params.t_end`.
///
/// The base step is `params.dt`, clamped to land exactly on the horizon.
/// In adaptive mode a rejected step is retried at 90% of the admissible
/// value the stepper reports.
pub fn drive(
    stepper: &mut dyn Stepper,
    params: &SimParams,
    opts: &RunOptions,
) -> Result<Trajectory, SolverError> {
    params.validate()?;
    let linf0 = stepper.rho().max_abs();
    let horizon = params.guarded_horizon(linf0);
    if params.t_end > horizon {
        return Err(SolverError::BlowupImminent {
            t: params.t_end,
            product: params.sigma2.abs() * linf0 * params.t_end,
            limit: 1.0 - params.blowup_guard,
        });
    }

    let mut rec = Recorder::new(opts.recorder.clone(), stepper.rho());
    rec.record(stepper.rho());

    let t_final = stepper.time() + params.t_end;
    let mut dt_base = params.dt;
    let mut steps = 0usize;
    while stepper.time() < t_final - 1e-12 * params.t_end.max(1.0) {
        let dt = dt_base.min(t_final - stepper.time());
        match stepper.try_step(dt) {
            Ok(()) => {
                steps += 1;
                if steps % opts.recorder.every == 0 {
                    rec.record(stepper.rho());
                }
            }
            Err(SolverError::StepTooLarge { admissible, .. }) if opts.adaptive => {
                let next = (admissible * 0.9).min(dt_base * 0.5);
                if next < 1e-12 * params.dt {
                    return Err(SolverError::StepTooLarge {
                        requested: dt,
                        admissible,
                    });
                }
                dt_base = next;
            }
            Err(e) => return Err(e),
        }
    }
    if rec.traj.times.last().copied() != Some(stepper.time()) {
        rec.record(stepper.rho());
    }
    let mut traj = rec.traj;
    traj.final_rho = stepper.rho().clone();
    traj.steps = steps;
    Ok(traj)
}
