//! JSON problem specifications.
//!
//! ```json
//! {"case": "linear", "kappa": 0.01, "r": 0.02, "a_norm": 0.1,
//!  "payoff": {"kind": "digital_asymmetric", "k1": 1.0, "k2": 0.5, "k3": 0.35}}
//! ```
//!
//! Radial problems give `"dim"` instead of `"a_norm"`. Optional blocks:
//! `y_ref`, `y0`, `tolerances`, `mc` and `pde`.

use std::path::Path;

use ambistop_core::{AmbiguityParams, Payoff};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum SpecError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed spec: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid field `{field}`: {msg}")]
    Field { field: &'static str, msg: String },
}

fn field(field: &'static str, msg: impl Into<String>) -> SpecError {
    SpecError::Field { field, msg: msg.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Case {
    Linear,
    Radial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PayoffSpec {
    DigitalAsymmetric { k1: f64, k2: f64, k3: f64 },
    EvenKink { k1: f64 },
    PeriodicCosine,
    Straddle {
        #[serde(rename = "K", alias = "strike")]
        strike: f64,
    },
    IdentityRadial,
    /// `[[y, F(y)], ...]` with increasing `y`.
    UserTable { samples: Vec<[f64; 2]> },
}

impl PayoffSpec {
    pub fn to_payoff(&self) -> Payoff {
        match self {
            PayoffSpec::DigitalAsymmetric { k1, k2, k3 } => Payoff::DigitalAsymmetric { k1: *k1, k2: *k2, k3: *k3 },
            PayoffSpec::EvenKink { k1 } => Payoff::EvenKink { k1: *k1 },
            PayoffSpec::PeriodicCosine => Payoff::PeriodicCosine,
            PayoffSpec::Straddle { strike } => Payoff::Straddle { strike: *strike },
            PayoffSpec::IdentityRadial => Payoff::IdentityRadial,
            PayoffSpec::UserTable { samples } => Payoff::UserTable(samples.iter().map(|s| (s[0], s[1])).collect()),
        }
    }
}

/// Acceptance tolerances used by `verify`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Largest allowed PDE threshold offset, in grid spacings.
    pub pde_threshold_spacings: f64,
    /// Largest allowed |MC − analytic| in standard errors.
    pub mc_std_errors: f64,
    /// Below this many paths an MC comparison is reported as inconclusive.
    pub mc_min_paths: u64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { pde_threshold_spacings: 2.0, mc_std_errors: 3.0, mc_min_paths: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSpec {
    pub dt: f64,
    pub paths: u64,
    pub horizon: f64,
    pub seed: u64,
    pub antithetic: bool,
}

impl Default for McSpec {
    fn default() -> Self {
        McSpec { dt: 1e-3, paths: 100_000, horizon: 200.0, seed: 0, antithetic: true }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdeSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub case: Case,
    pub kappa: f64,
    pub r: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_norm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<u32>,
    pub payoff: PayoffSpec,
    /// Point at which reports and sweeps evaluate the value function.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_ref: Option<f64>,
    /// Start of simulated paths.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y0: Option<f64>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pde: Option<PdeSpec>,
}

/// Validated problem ready for the solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub case: Case,
    pub params: AmbiguityParams,
    pub payoff: Payoff,
}

impl ProblemSpec {
    pub fn from_json(text: &str) -> Result<Self, SpecError> {
        let s: ProblemSpec = serde_json::from_str(text)?;
        s.problem()?;
        Ok(s)
    }

    pub fn from_path(path: &Path) -> Result<Self, SpecError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| SpecError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    /// Checks field ranges and builds the solver inputs.
    pub fn problem(&self) -> Result<Problem, SpecError> {
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(field("kappa", format!("must be finite and nonnegative, got {}", self.kappa)));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(field("r", format!("must be finite and positive, got {}", self.r)));
        }
        let params = match self.case {
            Case::Linear => {
                if self.dim.is_some() {
                    return Err(field("dim", "only allowed for radial problems"));
                }
                let a = self.a_norm.ok_or_else(|| field("a_norm", "required for linear problems"))?;
                if !(a > 0.0 && a.is_finite()) {
                    return Err(field("a_norm", format!("must be finite and positive, got {a}")));
                }
                AmbiguityParams::linear(self.kappa, self.r, a)
            }
            Case::Radial => {
                if self.a_norm.is_some() {
                    return Err(field("a_norm", "only allowed for linear problems"));
                }
                let d = self.dim.ok_or_else(|| field("dim", "required for radial problems"))?;
                if d < 2 {
                    return Err(field("dim", format!("must be at least 2, got {d}")));
                }
                AmbiguityParams::radial(self.kappa, self.r, d)
            }
        }
        .map_err(|e| field("case", e.to_string()))?;

        let payoff = self.payoff.to_payoff();
        payoff.validate().map_err(|e| field("payoff", e.to_string()))?;
        let radial_kind = payoff.is_radial_kind();
        match (self.case, radial_kind, &self.payoff) {
            (Case::Linear, true, _) => return Err(field("payoff.kind", "radial payoff in a linear problem")),
            (Case::Radial, false, PayoffSpec::UserTable { .. }) => {}
            (Case::Radial, false, _) => return Err(field("payoff.kind", "linear payoff in a radial problem")),
            _ => {}
        }
        if let Some(y) = self.y_ref {
            if !y.is_finite() || (self.case == Case::Radial && y <= 0.0) {
                return Err(field("y_ref", format!("out of domain: {y}")));
            }
        }
        if let Some(y) = self.y0 {
            if !y.is_finite() || (self.case == Case::Radial && y <= 0.0) {
                return Err(field("y0", format!("out of domain: {y}")));
            }
        }
        let t = &self.tolerances;
        if !(t.pde_threshold_spacings > 0.0) {
            return Err(field("tolerances.pde_threshold_spacings", "must be positive"));
        }
        if !(t.mc_std_errors > 0.0) {
            return Err(field("tolerances.mc_std_errors", "must be positive"));
        }
        if let Some(pde) = &self.pde {
            if let Some(n) = pde.grid {
                if n < 5 {
                    return Err(field("pde.grid", format!("needs at least 5 nodes, got {n}")));
                }
            }
            if let (Some(lo), Some(hi)) = (pde.lo, pde.hi) {
                if !(lo < hi) {
                    return Err(field("pde.lo", "must be below pde.hi"));
                }
            }
            if self.case == Case::Radial && pde.lo.is_some_and(|lo| lo <= 0.0) {
                return Err(field("pde.lo", "must be positive for radial problems"));
            }
        }
        Ok(Problem { case: self.case, params, payoff })
    }

    /// Sets a sweepable parameter.
    pub fn with_param(&self, name: &str, v: f64) -> Result<Self, SpecError> {
        let mut s = self.clone();
        match name {
            "kappa" => s.kappa = v,
            "r" => s.r = v,
            "a_norm" => {
                if s.case != Case::Linear {
                    return Err(field("param", "a_norm only applies to linear problems"));
                }
                s.a_norm = Some(v);
            }
            "K" => match &mut s.payoff {
                PayoffSpec::Straddle { strike } => *strike = v,
                _ => return Err(field("param", "K only applies to straddle payoffs")),
            },
            _ => return Err(field("param", format!("unknown parameter `{name}`; use kappa, r, K or a_norm"))),
        }
        s.problem()?;
        Ok(s)
    }
}
