//! Flat `key = value` run configuration.
//!
//! Lines are `key = value`; `#` starts a comment; blank lines are ignored.
//! A `scenario` key, wherever it appears, selects the preset that all other
//! keys then modify. Keys given more than once take the last value.

use super::scenarios;
use crate::chemo::{InitSpec, ParamError, Preset, SimParams};
use crate::fluid::{FluidConfig, FluidError};
use crate::grid::{Grid, GridError};
use crate::oracles::DecayModel;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("line {line}: expected `key = value`, got '{text}'")]
    Syntax { line: usize, text: String },
    #[error("unknown config key '{0}'")]
    UnknownKey(String),
    #[error("invalid value '{value}' for '{key}': {reason}")]
    Value { key: String, value: String, reason: String },
    #[error("unknown scenario '{0}'")]
    UnknownScenario(String),
    #[error("override '{0}' must look like key=value")]
    Override(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Fluid(#[from] FluidError),
    #[error("output_every must be positive, got {0}")]
    OutputEvery(f64),
    #[error("window ({0}, {1}) must satisfy 0 <= start < end")]
    Window(f64, f64),
    #[error("output path {path} is not writable: {reason}")]
    OutPath { path: PathBuf, reason: String },
}

/// Post-run inequality checks that can be requested by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CheckKind {
    /// `mass(t) <= 1.05 |Omega| / (mu (t + gamma))` at every output time.
    L1Bound,
    /// `||n||_inf (t+1)` stays within a ratio of 25 over the check window.
    NSandwich,
    /// `||grad w||_inf (t+1)` grows by at most a factor 50 over the window.
    GradWUpper,
    /// `int |grad w|^2` at the end is at most 1% of its peak.
    GradWVanish,
    /// `n >= 0`, `w >= 0`, `c_min > 0`, clamped mass at most `1e-8` of `mass0`.
    Positivity,
    /// `c_max` nonincreasing step to step (slack `1e-12`).
    MaxPrinciple,
    /// Per-step increments of the energy at most `1e-6` in the window.
    EnergyMonotone,
}

impl CheckKind {
    pub const ALL: [CheckKind; 7] = [
        Self::L1Bound,
        Self::NSandwich,
        Self::GradWUpper,
        Self::GradWVanish,
        Self::Positivity,
        Self::MaxPrinciple,
        Self::EnergyMonotone,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::L1Bound => "l1-bound",
            Self::NSandwich => "n-sandwich",
            Self::GradWUpper => "gradw-upper",
            Self::GradWVanish => "gradw-vanish",
            Self::Positivity => "positivity",
            Self::MaxPrinciple => "max-principle",
            Self::EnergyMonotone => "energy-monotone",
        }
    }
}

impl FromStr for CheckKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown check (expected one of {})", Self::ALL.map(|k| k.name()).join(", ")))
    }
}

impl fmt::Display for CheckKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `column:model`, for example `dev_inf:exp`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FitSpec {
    pub column: String,
    pub model: DecayModel,
}

impl FromStr for FitSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (column, model) = s.split_once(':').ok_or("expected column:model")?;
        let column = column.trim();
        if !super::csv::HEADER.contains(&column) || column == "t" {
            return Err(format!("unknown column '{column}'"));
        }
        let model = model.trim().parse::<DecayModel>().map_err(|e| e.to_string())?;
        Ok(Self { column: column.to_string(), model })
    }
}

impl fmt::Display for FitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.column, self.model)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: SimParams,
    pub fluid: FluidConfig,
    /// Simulation-time spacing of diagnostic rows.
    pub output_every: f64,
    pub out_path: Option<PathBuf>,
    /// Reserved for randomized presets; no current preset draws from it.
    pub seed: u64,
    /// Shift `a` of the entropy functional when `r <= 0`.
    pub energy_a: f64,
    pub checks: Vec<CheckKind>,
    /// Defaults to `[t_end / 3, t_end]`.
    pub check_window: Option<(f64, f64)>,
    pub fits: Vec<FitSpec>,
    /// Defaults to `[t_end / 3, t_end]`.
    pub fit_window: Option<(f64, f64)>,
}

impl RunConfig {
    pub fn new(params: SimParams) -> Self {
        Self {
            params,
            fluid: FluidConfig::default(),
            output_every: 0.5,
            out_path: None,
            seed: 0,
            energy_a: crate::functionals::DEFAULT_ENERGY_SHIFT,
            checks: Vec::new(),
            check_window: None,
            fits: Vec::new(),
            fit_window: None,
        }
    }

    pub fn default_window(&self) -> (f64, f64) {
        (self.params.t_end / 3.0, self.params.t_end)
    }

    pub fn check_window(&self) -> (f64, f64) {
        self.check_window.unwrap_or_else(|| self.default_window())
    }

    pub fn fit_window(&self) -> (f64, f64) {
        self.fit_window.unwrap_or_else(|| self.default_window())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.params.validate()?;
        self.fluid.validate()?;
        if !(self.output_every > 0.0 && self.output_every.is_finite()) {
            return Err(ConfigError::OutputEvery(self.output_every));
        }
        for (a, b) in [self.check_window, self.fit_window].into_iter().flatten() {
            if !(a >= 0.0 && a < b) {
                return Err(ConfigError::Window(a, b));
            }
        }
        Ok(())
    }

    /// Parses config text, then applies `overrides` (each `key=value`).
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut pairs = Vec::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: no + 1,
                text: raw.trim().to_string(),
            })?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        for o in overrides {
            let (k, v) = o.split_once('=').ok_or_else(|| ConfigError::Override(o.clone()))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        let base = match pairs.iter().rev().find(|(k, _)| k == "scenario") {
            Some((_, name)) => scenarios::by_name(name).ok_or_else(|| ConfigError::UnknownScenario(name.clone()))?,
            None => scenarios::by_name("default").expect("default scenario exists"),
        };
        let mut draft = Draft::from(base);
        for (k, v) in &pairs {
            draft.set(k, v)?;
        }
        let cfg = draft.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, overrides)
    }

    /// Serializes every key, so that `parse(&cfg.to_config_string(), &[])`
    /// reproduces `cfg`.
    pub fn to_config_string(&self) -> String {
        let p = &self.params;
        let g = p.grid;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("chi", fmt_f(p.chi));
        kv("r", fmt_f(p.r));
        kv("mu", fmt_f(p.mu));
        kv("gravity", format!("{}, {}", fmt_f(p.gravity[0]), fmt_f(p.gravity[1])));
        kv("nx", g.nx().to_string());
        kv("ny", g.ny().to_string());
        kv("lx", fmt_f(g.lx()));
        kv("ly", fmt_f(g.ly()));
        kv("dt_safety", fmt_f(p.dt_safety));
        kv("dt_max", fmt_f(p.dt_max));
        kv("t_end", fmt_f(p.t_end));
        kv("init", p.init.preset.to_string());
        kv("n_base", fmt_f(p.init.n_base));
        kv("n_amp", fmt_f(p.init.n_amp));
        kv("sigma_frac", fmt_f(p.init.sigma_frac));
        kv("c_amp", fmt_f(p.init.c_amp));
        kv("c_tilt", fmt_f(p.init.c_tilt));
        kv("u_amp", fmt_f(p.init.u_amp));
        kv("include_convection", self.fluid.include_convection.to_string());
        kv("poisson_tol", fmt_f(self.fluid.poisson_tol));
        if let Some(m) = self.fluid.poisson_max_iter {
            kv("poisson_max_iter", m.to_string());
        }
        kv("output_every", fmt_f(self.output_every));
        if let Some(path) = &self.out_path {
            kv("out_path", path.display().to_string());
        }
        kv("seed", self.seed.to_string());
        kv("energy_a", fmt_f(self.energy_a));
        kv("checks", self.checks.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(", "));
        if let Some((a, b)) = self.check_window {
            kv("check_window", format!("{}, {}", fmt_f(a), fmt_f(b)));
        }
        kv("fits", self.fits.iter().map(|f| f.to_string()).collect::<Vec<_>>().join(", "));
        if let Some((a, b)) = self.fit_window {
            kv("fit_window", format!("{}, {}", fmt_f(a), fmt_f(b)));
        }
        s
    }
}

fn fmt_f(x: f64) -> String {
    // shortest representation that round-trips
    format!("{x:?}")
}

/// Mutable flat view used while applying keys; the grid is rebuilt at the end.
struct Draft {
    cfg: RunConfig,
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
}

impl From<RunConfig> for Draft {
    fn from(cfg: RunConfig) -> Self {
        let g = cfg.params.grid;
        Self { nx: g.nx(), ny: g.ny(), lx: g.lx(), ly: g.ly(), cfg }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.parse::<T>().map_err(|e| ConfigError::Value {
        key: key.to_string(),
        value: value.to_string(),
        reason: e.to_string(),
    })
}

fn parse_pair(key: &str, value: &str) -> Result<(f64, f64), ConfigError> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(ConfigError::Value {
            key: key.to_string(),
            value: value.to_string(),
            reason: "expected two comma-separated numbers".into(),
        });
    }
    Ok((parse_value(key, parts[0])?, parse_value(key, parts[1])?))
}

fn parse_list<T: FromStr<Err = String>>(key: &str, value: &str) -> Result<Vec<T>, ConfigError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>().map_err(|reason| ConfigError::Value {
                key: key.to_string(),
                value: s.to_string(),
                reason,
            })
        })
        .collect()
}

impl Draft {
    fn set(&mut self, key: &str, v: &str) -> Result<(), ConfigError> {
        let c = &mut self.cfg;
        let p = &mut c.params;
        let init: &mut InitSpec = &mut p.init;
        match key {
            "scenario" => {}
            "chi" => p.chi = parse_value(key, v)?,
            "r" => p.r = parse_value(key, v)?,
            "mu" => p.mu = parse_value(key, v)?,
            "gravity" => {
                let (gx, gy) = parse_pair(key, v)?;
                p.gravity = [gx, gy];
            }
            "nx" => self.nx = parse_value(key, v)?,
            "ny" => self.ny = parse_value(key, v)?,
            "lx" => self.lx = parse_value(key, v)?,
            "ly" => self.ly = parse_value(key, v)?,
            "dt_safety" => p.dt_safety = parse_value(key, v)?,
            "dt_max" => p.dt_max = parse_value(key, v)?,
            "t_end" => p.t_end = parse_value(key, v)?,
            "init" => {
                init.preset = v.parse::<Preset>().map_err(|e| ConfigError::Value {
                    key: key.into(),
                    value: v.into(),
                    reason: e.to_string(),
                })?
            }
            "n_base" => init.n_base = parse_value(key, v)?,
            "n_amp" => init.n_amp = parse_value(key, v)?,
            "sigma_frac" => init.sigma_frac = parse_value(key, v)?,
            "c_amp" => init.c_amp = parse_value(key, v)?,
            "c_tilt" => init.c_tilt = parse_value(key, v)?,
            "u_amp" => init.u_amp = parse_value(key, v)?,
            "include_convection" => c.fluid.include_convection = parse_value(key, v)?,
            "poisson_tol" => c.fluid.poisson_tol = parse_value(key, v)?,
            "poisson_max_iter" => c.fluid.poisson_max_iter = Some(parse_value(key, v)?),
            "output_every" => c.output_every = parse_value(key, v)?,
            "out_path" => c.out_path = if v.is_empty() { None } else { Some(PathBuf::from(v)) },
            "seed" => c.seed = parse_value(key, v)?,
            "energy_a" => c.energy_a = parse_value(key, v)?,
            "checks" => c.checks = parse_list(key, v)?,
            "check_window" => c.check_window = Some(parse_pair(key, v)?),
            "fits" => c.fits = parse_list(key, v)?,
            "fit_window" => c.fit_window = Some(parse_pair(key, v)?),
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    fn finish(mut self) -> Result<RunConfig, ConfigError> {
        self.cfg.params.grid = Grid::new(self.nx, self.ny, self.lx, self.ly)?;
        Ok(self.cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_and_comments() {
        let text = "# demo\nchi = 0.25\nr = 0  # no growth\nnx = 16\nny=24\nlx = 2\ngravity = 0, -2\nchecks = l1-bound, positivity\nfits = linf_n:alg\n";
        let cfg = RunConfig::parse(text, &[]).unwrap();
        assert_eq!(cfg.params.chi, 0.25);
        assert_eq!(cfg.params.r, 0.0);
        assert_eq!(cfg.params.grid.nx(), 16);
        assert_eq!(cfg.params.grid.ny(), 24);
        assert_eq!(cfg.params.grid.lx(), 2.0);
        assert_eq!(cfg.params.gravity, [0.0, -2.0]);
        assert_eq!(cfg.checks, vec![CheckKind::L1Bound, CheckKind::Positivity]);
        assert_eq!(cfg.fits[0].model, DecayModel::Algebraic);
    }

    #[test]
    fn overrides_win() {
        let cfg = RunConfig::parse("mu = 2\n", &["mu=5".into()]).unwrap();
        assert_eq!(cfg.params.mu, 5.0);
    }

    #[test]
    fn scenario_is_applied_first() {
        let cfg = RunConfig::parse("mu = 3\nscenario = stabilization\n", &[]).unwrap();
        assert_eq!(cfg.params.mu, 3.0);
        assert_eq!(cfg.params.t_end, 30.0);
    }

    #[test]
    fn round_trip() {
        for name in scenarios::NAMES {
            let cfg = scenarios::by_name(name).unwrap();
            let back = RunConfig::parse(&cfg.to_config_string(), &[]).unwrap();
            assert_eq!(cfg, back, "{name}");
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(RunConfig::parse("chi\n", &[]), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(RunConfig::parse("bogus = 1\n", &[]), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(RunConfig::parse("chi = x\n", &[]), Err(ConfigError::Value { .. })));
        assert!(matches!(RunConfig::parse("chi = -1\n", &[]), Err(ConfigError::Params(_))));
        assert!(matches!(RunConfig::parse("nx = 4\n", &[]), Err(ConfigError::Grid(_))));
        assert!(matches!(RunConfig::parse("scenario = nope\n", &[]), Err(ConfigError::UnknownScenario(_))));
        assert!(matches!(RunConfig::parse("fits = t:exp\n", &[]), Err(ConfigError::Value { .. })));
        assert!(matches!(RunConfig::parse("checks = sandwich\n", &[]), Err(ConfigError::Value { .. })));
        assert!(matches!(RunConfig::parse("output_every = 0\n", &[]), Err(ConfigError::OutputEvery(_))));
        assert!(matches!(RunConfig::parse("fit_window = 5, 1\n", &[]), Err(ConfigError::Window(..))));
        assert!(matches!(RunConfig::parse("poisson_tol = 1e-3\n", &[]), Err(ConfigError::Fluid(_))));
        assert!(matches!(RunConfig::parse("", &["mu".into()]), Err(ConfigError::Override(_))));
    }
}
