//! Solver parameters and the error types shared by the time steppers.

use thiserror::Error;

/// Physical and numerical parameters of a run.
///
/// `sigma1` is the velocity coupling (must be nonzero), `sigma2` the
/// quadratic reaction coefficient, `nu >= 0` the viscosity. When
/// `sigma2 != 0` the amplitude blows up at `1/(|sigma2| |rho0|_inf)`;
/// runs are admitted only up to `(1 - blowup_guard)` of that horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimParams {
    pub sigma1: f64,
    pub sigma2: f64,
    pub nu: f64,
    /// Base time step; the run loop may shrink it further.
    pub dt: f64,
    pub t_end: f64,
    /// Advective CFL number in (0, 1].
    pub cfl: f64,
    /// Fraction of the existence horizon kept off-limits, in (0, 1).
    pub blowup_guard: f64,
}

impl SimParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        if self.sigma1 == 0.0 {
            return Err(ParamError::ZeroSigma1);
        }
        if self.nu < 0.0 {
            return Err(ParamError::NegativeViscosity(self.nu));
        }
        if !(self.dt > 0.0) {
            return Err(ParamError::BadValue("dt must be positive"));
        }
        if !(self.t_end >= 0.0) {
            return Err(ParamError::BadValue("t_end must be nonnegative"));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(ParamError::BadValue("cfl must lie in (0, 1]"));
        }
        if !(self.blowup_guard > 0.0 && self.blowup_guard < 1.0) {
            return Err(ParamError::BadValue("blowup_guard must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Latest admissible simulation time for data of the given sup norm:
    /// `(1 - guard) / (|sigma2| linf)`, or infinity when `sigma2 == 0`.
    pub fn guarded_horizon(&self, linf_rho0: f64) -> f64 {
        if self.sigma2 == 0.0 || linf_rho0 == 0.0 {
            f64::INFINITY
        } else {
            (1.0 - self.blowup_guard) / (self.sigma2.abs() * linf_rho0)
        }
    }
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            sigma1: -1.0,
            sigma2: 1.0,
            nu: 1e-3,
            dt: 5e-3,
            t_end: 0.5,
            cfl: 0.4,
            blowup_guard: 0.1,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("sigma1 must be nonzero")]
    ZeroSigma1,
    #[error("viscosity must be nonnegative, got {0}")]
    NegativeViscosity(f64),
    #[error("{0}")]
    BadValue(&'static str),
}

/// Errors raised by a single time step or a whole run.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    /// The requested step violates a stability precondition; `admissible`
    /// is the largest step the current state allows.
    #[error("time step {requested:.3e} too large, admissible {admissible:.3e}")]
    StepTooLarge { requested: f64, admissible: f64 },
    /// The run is about to leave the guarded existence horizon.
    #[error("blow-up imminent at t = {t:.6}: |sigma2| t |rho|_inf = {product:.6} exceeds {limit:.6}")]
    BlowupImminent { t: f64, product: f64, limit: f64 },
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error("{0}")]
    Invalid(String),
}
