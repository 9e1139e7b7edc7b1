//! Inviscid solver: semi-Lagrangian characteristics with the exact
//! along-flow amplitude law `rho -> rho / (1 - sigma2 dt rho)` applied per
//! traced step. Only trajectory tracing and interpolation introduce error.

use crate::field::{wrap_coord, CubicSampler, Grid, ScalarField, VectorField};
use crate::params::{SimParams, SolverError};
use crate::run::{drive, RunOptions, Stepper, Trajectory};
use crate::velocity::solve_velocity;

/// Departure points of the one-step backward flow map, one per grid node.
#[derive(Debug, Clone)]
pub struct FlowMapSample {
    pub departures: Vec<[f64; 3]>,
    pub dt: f64,
    /// Integration order marker (classical RK4).
    pub order: u8,
}

/// A velocity snapshot: the periodic grid part plus the analytic linear
/// mean-flow slope `sigma1 mean(rho) / d` that restores `div v = sigma1 rho`
/// on the data support (zero slope gives the pure periodic field).
pub struct VelocitySnapshot<'a> {
    pub periodic: &'a VectorField,
    pub mean_slope: f64,
}

impl<'a> VelocitySnapshot<'a> {
    pub fn periodic_only(v: &'a VectorField) -> VelocitySnapshot<'a> {
        VelocitySnapshot {
            periodic: v,
            mean_slope: 0.0,
        }
    }
}

struct SnapshotSampler<'a> {
    comps: Vec<CubicSampler<'a>>,
    slope: f64,
    center: [f64; 3],
    box_length: f64,
    d: usize,
}

impl<'a> SnapshotSampler<'a> {
    fn new(snap: &VelocitySnapshot<'a>, fields: &'a [ScalarField]) -> SnapshotSampler<'a> {
        let grid = snap.periodic.grid;
        SnapshotSampler {
            comps: fields.iter().map(CubicSampler::new).collect(),
            slope: snap.mean_slope,
            center: grid.center(),
            box_length: grid.box_length(),
            d: grid.dim(),
        }
    }

    #[inline]
    fn eval(&self, y: &[f64; 3], out: &mut [f64; 3]) {
        for a in 0..self.d {
            out[a] = self.comps[a].sample(&y[..self.d]);
        }
        if self.slope != 0.0 {
            for a in 0..self.d {
                let mut dx = y[a] - self.center[a];
                dx -= (dx / self.box_length).round() * self.box_length;
                out[a] += self.slope * dx;
            }
        }
    }
}

fn component_fields(v: &VectorField) -> Vec<ScalarField> {
    v.components
        .iter()
        .map(|c| ScalarField {
            grid: v.grid,
            values: c.clone(),
            t: v.t,
        })
        .collect()
}

/// Trace every grid node backward one step through the time-interpolated
/// velocity: RK4 on `dy/ds = -v(t - s, y)` with `v_now` at the arrival time
/// (s = 0) and `v_prev` one step earlier (s = dt).
pub fn trace_back(
    v_now: VelocitySnapshot,
    v_prev: VelocitySnapshot,
    cfl: f64,
    dt: f64,
) -> Result<FlowMapSample, SolverError> {
    let grid = v_now.periodic.grid;
    assert_eq!(grid, v_prev.periodic.grid);
    let vmax = vmax_total(&v_now, grid).max(vmax_total(&v_prev, grid));
    let admissible = cfl * grid.spacing() / vmax.max(1e-12);
    if dt > admissible {
        return Err(SolverError::StepTooLarge {
            requested: dt,
            admissible,
        });
    }

    let now_fields = component_fields(v_now.periodic);
    let prev_fields = component_fields(v_prev.periodic);
    let now = SnapshotSampler::new(&v_now, &now_fields);
    let prev = SnapshotSampler::new(&v_prev, &prev_fields);
    let l = grid.box_length();
    let d = grid.dim();

    // velocity at intermediate s: linear blend of the two snapshots
    let eval_at = |s_frac: f64, y: &[f64; 3], out: &mut [f64; 3]| {
        let mut a = [0.0f64; 3];
        let mut b = [0.0f64; 3];
        now.eval(y, &mut a);
        prev.eval(y, &mut b);
        for i in 0..d {
            out[i] = -(a[i] * (1.0 - s_frac) + b[i] * s_frac);
        }
    };

    let mut departures = vec![[0.0f64; 3]; grid.len()];
    let mut k1 = [0.0f64; 3];
    let mut k2 = [0.0f64; 3];
    let mut k3 = [0.0f64; 3];
    let mut k4 = [0.0f64; 3];
    let mut y = [0.0f64; 3];
    for (idx, dep) in departures.iter_mut().enumerate() {
        let ix = grid.unravel(idx);
        let mut x = [0.0f64; 3];
        for a in 0..d {
            x[a] = grid.coord(ix[a]);
        }
        eval_at(0.0, &x, &mut k1);
        for a in 0..d {
            y[a] = x[a] + 0.5 * dt * k1[a];
        }
        eval_at(0.5, &y, &mut k2);
        for a in 0..d {
            y[a] = x[a] + 0.5 * dt * k2[a];
        }
        eval_at(0.5, &y, &mut k3);
        for a in 0..d {
            y[a] = x[a] + dt * k3[a];
        }
        eval_at(1.0, &y, &mut k4);
        for a in 0..d {
            let step = dt / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
            dep[a] = wrap_coord(x[a] + step, l);
        }
    }
    Ok(FlowMapSample {
        departures,
        dt,
        order: 4,
    })
}

fn vmax_total(snap: &VelocitySnapshot, grid: Grid) -> f64 {
    let mut worst = 0.0f64;
    let d = grid.dim();
    for idx in 0..grid.len() {
        let ix = grid.unravel(idx);
        let x = grid.centered_coord(&ix);
        let mut s = 0.0;
        for a in 0..d {
            let v = snap.periodic.components[a][idx] + snap.mean_slope * x[a];
            s += v * v;
        }
        worst = worst.max(s);
    }
    worst.sqrt()
}

/// Material volume stretch carried by a particle of initial density
/// `rho0_val`: `(1 - sigma2 t rho0)^(-sigma1/sigma2)`, or
/// `exp(sigma1 rho0 t)` when `sigma2 = 0`.
pub fn jacobian_along_flow(
    rho0_val: f64,
    sigma1: f64,
    sigma2: f64,
    t: f64,
) -> Result<f64, SolverError> {
    if sigma2 == 0.0 {
        return Ok((sigma1 * rho0_val * t).exp());
    }
    let denom = 1.0 - sigma2 * t * rho0_val;
    if denom <= 0.0 {
        return Err(SolverError::Invalid(format!(
            "blow-up denominator 1 - sigma2 t rho0 = {denom:.6} is nonpositive"
        )));
    }
    Ok(denom.powf(-sigma1 / sigma2))
}

/// Passive tracer particle: carries its departure value and the exact
/// amplitude law along its own trajectory.
#[derive(Debug, Clone)]
pub struct Tracer {
    pub id: usize,
    pub position: [f64; 3],
    pub rho0: f64,
    pub seeded_at: f64,
}

impl Tracer {
    /// Carried density at time `t` per the along-flow law.
    pub fn carried(&self, sigma2: f64, t: f64) -> Option<f64> {
        let denom = 1.0 - sigma2 * (t - self.seeded_at) * self.rho0;
        if denom <= 0.0 {
            None
        } else {
            Some(self.rho0 / denom)
        }
    }
}

pub struct InviscidSolver {
    grid: Grid,
    params: SimParams,
    rho: ScalarField,
    v_now: VectorField,
    mean_now: f64,
    v_prev: VectorField,
    mean_prev: f64,
    linf0: f64,
    min0: f64,
    pub tracers: Vec<Tracer>,
}

impl InviscidSolver {
    pub fn new(rho0: &ScalarField, params: SimParams) -> Result<InviscidSolver, SolverError> {
        params.validate()?;
        if !rho0.is_finite() {
            return Err(SolverError::Invalid("initial density has non-finite values".into()));
        }
        let v = solve_velocity(rho0, params.sigma1);
        let mean = rho0.mean();
        Ok(InviscidSolver {
            grid: rho0.grid,
            params,
            rho: rho0.clone(),
            v_now: v.clone(),
            mean_now: mean,
            v_prev: v,
            mean_prev: mean,
            linf0: rho0.max_abs(),
            min0: rho0.min(),
            tracers: Vec::new(),
        })
    }

    /// Seed tracers at the current time from grid positions.
    pub fn seed_tracers(&mut self, positions: &[[f64; 3]]) {
        let sampler = CubicSampler::new(&self.rho);
        let t = self.rho.t;
        let d = self.grid.dim();
        for (i, p) in positions.iter().enumerate() {
            self.tracers.push(Tracer {
                id: i,
                position: *p,
                rho0: sampler.sample(&p[..d]),
                seeded_at: t,
            });
        }
    }

    pub fn velocity(&self) -> &VectorField {
        &self.v_now
    }

    fn mean_slope(&self, mean: f64) -> f64 {
        self.params.sigma1 * mean / self.grid.dim() as f64
    }

    /// Arrival-time velocity estimate by linear extrapolation of the last
    /// two levels (second order without an inner fixed point).
    fn extrapolated(&self) -> (VectorField, f64) {
        let mut v = self.v_now.clone();
        for (c_now, c_prev) in v.components.iter_mut().zip(&self.v_prev.components) {
            for (x, p) in c_now.iter_mut().zip(c_prev) {
                *x = 2.0 * *x - *p;
            }
        }
        (v, 2.0 * self.mean_now - self.mean_prev)
    }
}

impl Stepper for InviscidSolver {
    fn rho(&self) -> &ScalarField {
        &self.rho
    }

    fn time(&self) -> f64 {
        self.rho.t
    }

    fn try_step(&mut self, dt: f64) -> Result<(), SolverError> {
        let p = self.params;
        let t = self.rho.t;
        let linf = self.rho.max_abs();

        if p.sigma2 != 0.0 {
            let local = 1.0 - p.sigma2.abs() * dt * linf;
            if local < p.blowup_guard {
                return Err(SolverError::BlowupImminent {
                    t: t + dt,
                    product: p.sigma2.abs() * dt * linf,
                    limit: 1.0 - p.blowup_guard,
                });
            }
            let product = p.sigma2.abs() * (t + dt) * self.linf0;
            if product > 1.0 - p.blowup_guard + 1e-12 {
                return Err(SolverError::BlowupImminent {
                    t: t + dt,
                    product,
                    limit: 1.0 - p.blowup_guard,
                });
            }
        }

        let (v_arrival, mean_arrival) = self.extrapolated();
        let flow = trace_back(
            VelocitySnapshot {
                periodic: &v_arrival,
                mean_slope: self.mean_slope(mean_arrival),
            },
            VelocitySnapshot {
                periodic: &self.v_now,
                mean_slope: self.mean_slope(self.mean_now),
            },
            p.cfl,
            dt,
        )?;

        // departure values, then the exact reaction update
        let sampler = CubicSampler::new(&self.rho);
        let d = self.grid.dim();
        let mut new_values = vec![0.0f64; self.grid.len()];
        for (idx, dep) in flow.departures.iter().enumerate() {
            let rd = sampler.sample(&dep[..d]);
            let denom = 1.0 - p.sigma2 * dt * rd;
            if denom <= 0.0 {
                return Err(SolverError::BlowupImminent {
                    t: t + dt,
                    product: (p.sigma2 * dt * rd).abs(),
                    limit: 1.0,
                });
            }
            new_values[idx] = rd / denom;
        }

        // advance tracers through the same velocity interval (forward RK4)
        if !self.tracers.is_empty() {
            let now_fields = component_fields(&self.v_now);
            let arr_fields = component_fields(&v_arrival);
            let now = SnapshotSampler::new(
                &VelocitySnapshot {
                    periodic: &self.v_now,
                    mean_slope: self.mean_slope(self.mean_now),
                },
                &now_fields,
            );
            let arrival = SnapshotSampler::new(
                &VelocitySnapshot {
                    periodic: &v_arrival,
                    mean_slope: self.mean_slope(mean_arrival),
                },
                &arr_fields,
            );
            let l = self.grid.box_length();
            let eval_at = |s_frac: f64, y: &[f64; 3], out: &mut [f64; 3]| {
                let mut a = [0.0f64; 3];
                let mut b = [0.0f64; 3];
                now.eval(y, &mut a);
                arrival.eval(y, &mut b);
                for i in 0..d {
                    out[i] = a[i] * (1.0 - s_frac) + b[i] * s_frac;
                }
            };
            for tr in &mut self.tracers {
                let x = tr.position;
                let (mut k1, mut k2, mut k3, mut k4) =
                    ([0.0f64; 3], [0.0f64; 3], [0.0f64; 3], [0.0f64; 3]);
                let mut y = [0.0f64; 3];
                eval_at(0.0, &x, &mut k1);
                for a in 0..d {
                    y[a] = x[a] + 0.5 * dt * k1[a];
                }
                eval_at(0.5, &y, &mut k2);
                for a in 0..d {
                    y[a] = x[a] + 0.5 * dt * k2[a];
                }
                eval_at(0.5, &y, &mut k3);
                for a in 0..d {
                    y[a] = x[a] + dt * k3[a];
                }
                eval_at(1.0, &y, &mut k4);
                for a in 0..d {
                    tr.position[a] = wrap_coord(
                        x[a] + dt / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]),
                        l,
                    );
                }
            }
        }

        self.rho = ScalarField::from_values(self.grid, new_values, t + dt);

        // positivity is a transport property; large undershoot flags error
        if self.min0 >= 0.0 && self.rho.min() < -1e-3 * self.linf0 {
            return Err(SolverError::Invalid(format!(
                "positivity violated at t = {:.6}: min rho = {:.3e}",
                self.rho.t,
                self.rho.min()
            )));
        }

        self.v_prev = std::mem::replace(&mut self.v_now, solve_velocity(&self.rho, p.sigma1));
        self.mean_prev = self.mean_now;
        self.mean_now = self.rho.mean();
        Ok(())
    }
}

/// One semi-Lagrangian step from an arbitrary field (uses the steady
/// velocity of `rho` for both time levels).
pub fn step_inviscid(
    rho: &ScalarField,
    p: &SimParams,
    dt: f64,
) -> Result<ScalarField, SolverError> {
    let mut solver = InviscidSolver::new(rho, *p)?;
    // steady first step: no history yet
    solver.v_prev = solver.v_now.clone();
    solver.mean_prev = solver.mean_now;
    solver.try_step(dt)?;
    Ok(solver.rho.clone())
}

/// Integrate the inviscid equation from `rho0` over `p.t_end`.
pub fn run_inviscid(
    rho0: &ScalarField,
    p: &SimParams,
    opts: &RunOptions,
) -> Result<Trajectory, SolverError> {
    let p = SimParams { nu: 0.0, ..*p };
    let mut solver = InviscidSolver::new(rho0, p)?;
    drive(&mut solver, &p, opts)
}

/// Variant that keeps the solver (with tracers) accessible after the run.
pub fn run_inviscid_with_tracers(
    rho0: &ScalarField,
    p: &SimParams,
    opts: &RunOptions,
    seeds: &[[f64; 3]],
) -> Result<(Trajectory, Vec<Tracer>), SolverError> {
    let p = SimParams { nu: 0.0, ..*p };
    let mut solver = InviscidSolver::new(rho0, p)?;
    solver.seed_tracers(seeds);
    let traj = drive(&mut solver, &p, opts)?;
    let tracers = solver.tracers.clone();
    Ok((traj, tracers))
}
