//! Closed-form references, inequality checks and decay-rate fits used to judge
//! simulation output.

use crate::functionals::DerivedConstants;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Default cap on `max m / min m` for the two-sided `1/(t+1)` sandwich.
pub const SANDWICH_RATIO_CAP: f64 = 25.0;
/// Minimum number of samples a fit window must contain.
pub const MIN_FIT_SAMPLES: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("fit window [{0}, {1}] holds {2} samples, need at least {MIN_FIT_SAMPLES}")]
    TooFewSamples(f64, f64, usize),
    #[error("nonpositive value {value:e} at t = {t} inside the fit window")]
    NonPositive { t: f64, value: f64 },
    #[error("window [{0}, {1}] contains no samples")]
    EmptyWindow(f64, f64),
    #[error("unknown decay model '{0}' (expected exp or alg)")]
    UnknownModel(String),
}

/// Closed-form solution of `y' = r y - mu y^2`, `y(0) = n0`.
pub fn logistic_solution(n0: f64, r: f64, mu: f64, t: f64) -> f64 {
    if n0 == 0.0 {
        return 0.0;
    }
    if r == 0.0 {
        return n0 / (1.0 + mu * n0 * t);
    }
    if r > 0.0 {
        let decay = (-r * t).exp();
        r * n0 / (r * decay + mu * n0 * (1.0 - decay))
    } else {
        let growth = (r * t).exp();
        r * n0 * growth / (r + mu * n0 * (growth - 1.0))
    }
}

/// `|Omega| / (mu (t + gamma))`, the `L^1` envelope for `r <= 0`.
pub fn l1_decay_bound(consts: &DerivedConstants, mu: f64, t: f64) -> f64 {
    consts.area / (mu * (t + consts.gamma))
}

/// `e^{-a (t - t0)} y0 + b / (1 - e^{-a})`: the bound for `y' + a y <= h`
/// when every unit window of `h` integrates to at most `b`.
pub fn ode_comparison_bound(y0: f64, a: f64, b: f64, t: f64, t0: f64) -> f64 {
    (-a * (t - t0)).exp() * y0 + b / (1.0 - (-a).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayModel {
    /// `A e^{-rate t}`.
    Exponential,
    /// `A (t + 1)^{-rate}`.
    Algebraic,
}

impl FromStr for DecayModel {
    type Err = OracleError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exp" | "exponential" => Ok(Self::Exponential),
            "alg" | "algebraic" => Ok(Self::Algebraic),
            other => Err(OracleError::UnknownModel(other.to_string())),
        }
    }
}

impl fmt::Display for DecayModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Exponential => "exp",
            Self::Algebraic => "alg",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub model: DecayModel,
    /// Decay rate (exponential) or exponent (algebraic); positive means decay.
    pub rate: f64,
    pub amplitude: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub samples: usize,
}

fn in_window(t: f64, window: (f64, f64)) -> bool {
    t >= window.0 && t <= window.1
}

/// Least squares on `(t, ln v)` or `(ln(t + 1), ln v)`.
pub fn fit_decay(series: &[(f64, f64)], model: DecayModel, window: (f64, f64)) -> Result<DecayFit, OracleError> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &(t, v) in series.iter().filter(|(t, _)| in_window(*t, window)) {
        if !(v > 0.0) {
            return Err(OracleError::NonPositive { t, value: v });
        }
        xs.push(match model {
            DecayModel::Exponential => t,
            DecayModel::Algebraic => (t + 1.0).ln(),
        });
        ys.push(v.ln());
    }
    if xs.len() < MIN_FIT_SAMPLES {
        return Err(OracleError::TooFewSamples(window.0, window.1, xs.len()));
    }
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    // a flat series is fitted perfectly by a zero rate
    let r_squared = if ss_tot <= f64::EPSILON * f64::EPSILON * m * my.abs().max(1.0).powi(2) {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(DecayFit {
        model,
        rate: -slope,
        amplitude: intercept.exp(),
        r_squared,
        window,
        samples: xs.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck {
    pub name: String,
    /// Fraction of sampled times at which the inequality holds.
    pub satisfied_fraction: f64,
    /// Largest relative violation (0 when never violated).
    pub worst_violation: f64,
    pub slack: f64,
    /// Check-specific summary statistic (for example the sandwich ratio).
    pub statistic: f64,
}

impl BoundCheck {
    pub fn passed(&self) -> bool {
        self.worst_violation <= self.slack
    }

    /// Pointwise check of `value(t) <= bound(t)` up to relative `slack`.
    pub fn upper(name: &str, samples: impl IntoIterator<Item = (f64, f64)>, slack: f64) -> Self {
        let mut total = 0usize;
        let mut ok = 0usize;
        let mut worst: f64 = 0.0;
        let mut max_ratio: f64 = 0.0;
        for (value, bound) in samples {
            total += 1;
            let ratio = value / bound;
            max_ratio = max_ratio.max(ratio);
            if value <= bound {
                ok += 1;
            }
            worst = worst.max(ratio - 1.0);
        }
        Self {
            name: name.to_string(),
            satisfied_fraction: if total == 0 { 0.0 } else { ok as f64 / total as f64 },
            worst_violation: if total == 0 { f64::INFINITY } else { worst.max(0.0) },
            slack,
            statistic: max_ratio,
        }
    }
}

fn scaled_profile(series: &[(f64, f64)], window: (f64, f64)) -> Result<Vec<f64>, OracleError> {
    let m: Vec<f64> = series
        .iter()
        .filter(|(t, _)| in_window(*t, window))
        .map(|(t, v)| v * (t + 1.0))
        .collect();
    if m.is_empty() {
        return Err(OracleError::EmptyWindow(window.0, window.1));
    }
    Ok(m)
}

/// Two-sided `C1/(t+1) <= v(t) <= C/(t+1)` surrogate: with `m = v (t+1)`,
/// passes iff `min m > 0` and `max m / min m <= ratio_cap`.
pub fn two_sided_algebraic_check(
    series: &[(f64, f64)],
    window: (f64, f64),
    ratio_cap: f64,
) -> Result<BoundCheck, OracleError> {
    let m = scaled_profile(series, window)?;
    let lo = m.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = m.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo > 0.0) {
        return Ok(BoundCheck {
            name: "algebraic-sandwich".into(),
            satisfied_fraction: 0.0,
            worst_violation: f64::INFINITY,
            slack: 0.0,
            statistic: f64::INFINITY,
        });
    }
    let ceiling = ratio_cap * lo;
    let within = m.iter().filter(|v| **v <= ceiling).count();
    Ok(BoundCheck {
        name: "algebraic-sandwich".into(),
        satisfied_fraction: within as f64 / m.len() as f64,
        worst_violation: (hi / ceiling - 1.0).max(0.0),
        slack: 0.0,
        statistic: hi / lo,
    })
}

/// One-sided `v(t) <= C/(t+1)` surrogate: `C` is calibrated at the start of
/// the window and `m = v (t+1)` may not exceed `ratio_cap` times that value.
pub fn upper_algebraic_check(
    series: &[(f64, f64)],
    window: (f64, f64),
    ratio_cap: f64,
) -> Result<BoundCheck, OracleError> {
    let m = scaled_profile(series, window)?;
    let first = m[0];
    let hi = m.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (ratio, within) = if first > 0.0 {
        let ceiling = ratio_cap * first;
        (hi / first, m.iter().filter(|v| **v <= ceiling).count())
    } else if hi <= 0.0 {
        (1.0, m.len())
    } else {
        (f64::INFINITY, 0)
    };
    Ok(BoundCheck {
        name: "algebraic-upper".into(),
        satisfied_fraction: within as f64 / m.len() as f64,
        worst_violation: (ratio / ratio_cap - 1.0).max(0.0),
        slack: 0.0,
        statistic: ratio,
    })
}
