//! Flat `key = value` run configuration: `#` comments, UTF-8, strict keys.
//! Unknown keys are errors; missing keys take the documented defaults.

use crate::field::{Grid, GridError};
use crate::init::InitSpec;
use crate::params::SimParams;
use std::collections::BTreeMap;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
#[error("config line {line}: {reason}")]
pub struct ParseError {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: SimParams,
    pub n: usize,
    pub box_length: f64,
    pub dim: usize,
    pub init: InitSpec,
    pub solver: SolverKind,
    pub observe_every: usize,
    pub snapshot_every: usize,
    pub holder_beta: f64,
    pub tail_r1: f64,
    pub tail_r2: f64,
    pub outdir: PathBuf,
    pub seed: u64,
    // viscosity-sweep keys
    pub nu_list: Vec<f64>,
    pub t_eval: f64,
    pub g0_radius: f64,
    pub pilot_floor: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Viscous,
    Inviscid,
    /// Pick from `nu`: viscous when positive.
    Auto,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            params: SimParams::default(),
            n: 128,
            box_length: 8.0,
            dim: 2,
            init: InitSpec::Gaussian {
                amplitude: 1.0,
                width: 0.4,
            },
            solver: SolverKind::Auto,
            observe_every: 10,
            snapshot_every: 0,
            holder_beta: 0.5,
            tail_r1: 0.0,
            tail_r2: 0.0,
            outdir: PathBuf::from("out"),
            seed: 0,
            nu_list: vec![1e-2, 5e-3, 2.5e-3, 1.25e-3],
            t_eval: 0.5,
            g0_radius: 0.5,
            pilot_floor: false,
        }
    }
}

impl RunConfig {
    pub fn grid(&self) -> Result<Grid, GridError> {
        Grid::new(self.dim, self.n, self.box_length)
    }

    /// Render the resolved configuration (manifest content).
    pub fn manifest(&self) -> String {
        let mut out = String::new();
        let mut kv: BTreeMap<&str, String> = BTreeMap::new();
        kv.insert("sigma1", format!("{}", self.params.sigma1));
        kv.insert("sigma2", format!("{}", self.params.sigma2));
        kv.insert("nu", format!("{}", self.params.nu));
        kv.insert("dt", format!("{}", self.params.dt));
        kv.insert("t_end", format!("{}", self.params.t_end));
        kv.insert("cfl", format!("{}", self.params.cfl));
        kv.insert("blowup_guard", format!("{}", self.params.blowup_guard));
        kv.insert("n", format!("{}", self.n));
        kv.insert("L", format!("{}", self.box_length));
        kv.insert("d", format!("{}", self.dim));
        kv.insert(
            "solver",
            match self.solver {
                SolverKind::Viscous => "viscous".into(),
                SolverKind::Inviscid => "inviscid".into(),
                SolverKind::Auto => "auto".into(),
            },
        );
        match &self.init {
            InitSpec::Gaussian { amplitude, width } => {
                kv.insert("init", "gaussian".into());
                kv.insert("amplitude", format!("{amplitude}"));
                kv.insert("width", format!("{width}"));
            }
            InitSpec::Patch { c, r0, w } => {
                kv.insert("init", "patch".into());
                kv.insert("patch_c", format!("{c}"));
                kv.insert("patch_r0", format!("{r0}"));
                kv.insert("patch_smoothing", format!("{w}"));
            }
            InitSpec::TwoBumps {
                amplitude,
                width,
                separation,
            } => {
                kv.insert("init", "two_bumps".into());
                kv.insert("amplitude", format!("{amplitude}"));
                kv.insert("width", format!("{width}"));
                kv.insert("separation", format!("{separation}"));
            }
            InitSpec::File { path } => {
                kv.insert("init", "file".into());
                kv.insert("init_file", path.display().to_string());
            }
        }
        kv.insert("observe_every", format!("{}", self.observe_every));
        kv.insert("snapshot_every", format!("{}", self.snapshot_every));
        kv.insert("holder_beta", format!("{}", self.holder_beta));
        kv.insert("tail_r1", format!("{}", self.tail_r1));
        kv.insert("tail_r2", format!("{}", self.tail_r2));
        kv.insert("outdir", self.outdir.display().to_string());
        kv.insert("seed", format!("{}", self.seed));
        kv.insert(
            "nu_list",
            self.nu_list
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        kv.insert("t_eval", format!("{}", self.t_eval));
        kv.insert("g0_radius", format!("{}", self.g0_radius));
        kv.insert("pilot_floor", format!("{}", self.pilot_floor));
        for (k, v) in kv {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}

/// Parse the flat config format. Defaults fill missing keys; every
/// constraint of the parameter and grid types is enforced here with a
/// line-carrying error.
pub fn parse_config(text: &str) -> Result<RunConfig, ParseError> {
    let mut cfg = RunConfig::default();
    let mut init_kind: Option<String> = None;
    let mut init_args: BTreeMap<String, (usize, String)> = BTreeMap::new();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ParseError {
            line: lineno,
            reason: "expected `key = value`".into(),
        })?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if value.is_empty() {
            return Err(ParseError {
                line: lineno,
                reason: format!("key `{key}` has no value"),
            });
        }
        if let Some(first) = seen.insert(key.clone(), lineno) {
            return Err(ParseError {
                line: lineno,
                reason: format!("duplicate key `{key}` (first on line {first})"),
            });
        }

        let fpos = |v: &str| parse_f64(v, lineno, &key);
        match key.as_str() {
            "sigma1" => cfg.params.sigma1 = fpos(&value)?,
            "sigma2" => cfg.params.sigma2 = fpos(&value)?,
            "nu" => cfg.params.nu = fpos(&value)?,
            "dt" => cfg.params.dt = fpos(&value)?,
            "t_end" => cfg.params.t_end = fpos(&value)?,
            "cfl" => cfg.params.cfl = fpos(&value)?,
            "blowup_guard" => cfg.params.blowup_guard = fpos(&value)?,
            "n" => cfg.n = parse_usize(&value, lineno, &key)?,
            "L" => cfg.box_length = fpos(&value)?,
            "d" => cfg.dim = parse_usize(&value, lineno, &key)?,
            "solver" => {
                cfg.solver = match value.as_str() {
                    "viscous" => SolverKind::Viscous,
                    "inviscid" => SolverKind::Inviscid,
                    "auto" => SolverKind::Auto,
                    other => {
                        return Err(ParseError {
                            line: lineno,
                            reason: format!("unknown solver `{other}`"),
                        })
                    }
                }
            }
            "init" => init_kind = Some(value),
            "amplitude" | "width" | "separation" | "patch_c" | "patch_r0"
            | "patch_smoothing" | "init_file" => {
                init_args.insert(key, (lineno, value));
            }
            "observe_every" => cfg.observe_every = parse_usize(&value, lineno, &key)?,
            "snapshot_every" => cfg.snapshot_every = parse_usize(&value, lineno, &key)?,
            "holder_beta" => cfg.holder_beta = fpos(&value)?,
            "tail_r1" => cfg.tail_r1 = fpos(&value)?,
            "tail_r2" => cfg.tail_r2 = fpos(&value)?,
            "outdir" => cfg.outdir = PathBuf::from(value),
            "seed" => {
                cfg.seed = value.parse().map_err(|_| ParseError {
                    line: lineno,
                    reason: format!("key `{key}`: not an unsigned integer: `{value}`"),
                })?
            }
            "nu_list" => {
                let mut list = Vec::new();
                for part in value.split(',') {
                    list.push(parse_f64(part.trim(), lineno, &key)?);
                }
                cfg.nu_list = list;
            }
            "t_eval" => cfg.t_eval = fpos(&value)?,
            "g0_radius" => cfg.g0_radius = fpos(&value)?,
            "pilot_floor" => {
                cfg.pilot_floor = match value.as_str() {
                    "true" | "1" | "yes" => true,
                    "false" | "0" | "no" => false,
                    other => {
                        return Err(ParseError {
                            line: lineno,
                            reason: format!("key `{key}`: expected a boolean, got `{other}`"),
                        })
                    }
                }
            }
            other => {
                return Err(ParseError {
                    line: lineno,
                    reason: format!("unknown key `{other}`"),
                })
            }
        }
    }

    // assemble the initial condition
    if let Some(kind) = init_kind {
        let take_f = |args: &BTreeMap<String, (usize, String)>,
                      name: &str,
                      default: f64|
         -> Result<f64, ParseError> {
            match args.get(name) {
                None => Ok(default),
                Some((ln, v)) => parse_f64(v, *ln, name),
            }
        };
        cfg.init = match kind.as_str() {
            "gaussian" => InitSpec::Gaussian {
                amplitude: take_f(&init_args, "amplitude", 1.0)?,
                width: take_f(&init_args, "width", 0.4)?,
            },
            "patch" => InitSpec::Patch {
                c: take_f(&init_args, "patch_c", 1.0)?,
                r0: take_f(&init_args, "patch_r0", 0.5)?,
                w: take_f(&init_args, "patch_smoothing", 0.0)?,
            },
            "two_bumps" => InitSpec::TwoBumps {
                amplitude: take_f(&init_args, "amplitude", 1.0)?,
                width: take_f(&init_args, "width", 0.4)?,
                separation: take_f(&init_args, "separation", 1.5)?,
            },
            "file" => {
                let (ln, path) = init_args.get("init_file").ok_or(ParseError {
                    line: 0,
                    reason: "init = file requires init_file".into(),
                })?;
                let _ = ln;
                InitSpec::File {
                    path: PathBuf::from(path),
                }
            }
            other => {
                return Err(ParseError {
                    line: seen.get("init").copied().unwrap_or(0),
                    reason: format!("unknown init kind `{other}`"),
                })
            }
        };
    }

    validate(&cfg, &seen)?;
    Ok(cfg)
}

fn parse_f64(v: &str, line: usize, key: &str) -> Result<f64, ParseError> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| ParseError {
            line,
            reason: format!("key `{key}`: not a finite number: `{v}`"),
        })
}

fn parse_usize(v: &str, line: usize, key: &str) -> Result<usize, ParseError> {
    v.parse::<usize>().map_err(|_| ParseError {
        line,
        reason: format!("key `{key}`: not an unsigned integer: `{v}`"),
    })
}

fn validate(cfg: &RunConfig, seen: &BTreeMap<String, usize>) -> Result<(), ParseError> {
    let at = |key: &str| seen.get(key).copied().unwrap_or(0);
    if cfg.params.sigma1 == 0.0 {
        return Err(ParseError {
            line: at("sigma1"),
            reason: "sigma1 must be nonzero".into(),
        });
    }
    if cfg.params.nu < 0.0 {
        return Err(ParseError {
            line: at("nu"),
            reason: "nu must be nonnegative".into(),
        });
    }
    if !(cfg.params.dt > 0.0) {
        return Err(ParseError {
            line: at("dt"),
            reason: "dt must be positive".into(),
        });
    }
    if !(cfg.params.cfl > 0.0 && cfg.params.cfl <= 1.0) {
        return Err(ParseError {
            line: at("cfl"),
            reason: "cfl must lie in (0, 1]".into(),
        });
    }
    if !(cfg.params.blowup_guard > 0.0 && cfg.params.blowup_guard < 1.0) {
        return Err(ParseError {
            line: at("blowup_guard"),
            reason: "blowup_guard must lie in (0, 1)".into(),
        });
    }
    if let Err(e) = Grid::new(cfg.dim, cfg.n, cfg.box_length) {
        let key = match e {
            GridError::BadDimension(_) => "d",
            GridError::BadResolution(_) => "n",
            GridError::BadLength(_) => "L",
        };
        return Err(ParseError {
            line: at(key),
            reason: e.to_string(),
        });
    }
    if cfg.observe_every == 0 {
        return Err(ParseError {
            line: at("observe_every"),
            reason: "observe_every must be at least 1".into(),
        });
    }
    Ok(())
}
