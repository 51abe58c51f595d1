//! Machine-readable run reports (JSON schema "1") and CSV tables.

use std::fmt::Write as _;

use ambistop_core::{GeneratorDescriptor, GeneratorKind, Solution};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::spec::ProblemSpec;

pub const SCHEMA: &str = "1";

/// Extended real: infinite values are written as `"inf"` / `"-inf"` so that
/// every JSON number stays finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtF64(pub f64);

impl Serialize for ExtF64 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            v if v.is_finite() => s.serialize_f64(v),
            v if v == f64::INFINITY => s.serialize_str("inf"),
            v if v == f64::NEG_INFINITY => s.serialize_str("-inf"),
            _ => Err(serde::ser::Error::custom("NaN in report")),
        }
    }
}

impl<'de> Deserialize<'de> for ExtF64 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(ExtF64(v)),
            Raw::Str(s) if s == "inf" => Ok(ExtF64(f64::INFINITY)),
            Raw::Str(s) if s == "-inf" => Ok(ExtF64(f64::NEG_INFINITY)),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("expected a number, \"inf\" or \"-inf\", got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum GeneratorSummary {
    SignSwitchLinear { kappa: f64, c: ExtF64 },
    SignSwitchRadial { kappa: f64, c: ExtF64 },
    PeriodicSwitch { kappa: f64, period: f64, down_at: f64, up_at: f64 },
}

impl From<&GeneratorDescriptor> for GeneratorSummary {
    fn from(g: &GeneratorDescriptor) -> Self {
        let kappa = g.kappa;
        match g.kind {
            GeneratorKind::SignSwitchLinear { c } => GeneratorSummary::SignSwitchLinear { kappa, c: ExtF64(c) },
            GeneratorKind::SignSwitchRadial { c } => GeneratorSummary::SignSwitchRadial { kappa, c: ExtF64(c) },
            GeneratorKind::PeriodicSwitch { period, down_at, up_at } => {
                GeneratorSummary::PeriodicSwitch { kappa, period, down_at, up_at }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSummary {
    pub regime: String,
    pub c_star: ExtF64,
    pub thresholds: Vec<f64>,
    pub lambda_star: f64,
    pub y_ref: f64,
    pub value_at_y_ref: f64,
    /// Single-boundary straddle candidate, reported for straddle payoffs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_k_star: Option<f64>,
    pub generator: GeneratorSummary,
}

impl SolutionSummary {
    pub fn new(sol: &Solution, y_ref: f64, y_k_star: Option<f64>) -> Self {
        SolutionSummary {
            regime: sol.regime.as_str().to_string(),
            c_star: ExtF64(sol.c_star),
            thresholds: sol.thresholds.clone(),
            lambda_star: sol.lambda_star,
            y_ref,
            value_at_y_ref: sol.value(y_ref),
            y_k_star,
            generator: (&sol.generator).into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McBlock {
    pub y0: f64,
    pub paths: u64,
    pub dt: f64,
    pub horizon: f64,
    pub antithetic: bool,
    pub estimate: f64,
    pub std_error: f64,
    pub n_effective: u64,
    pub fraction_stopped: f64,
    pub cap_bias_bound: f64,
    pub analytic: f64,
    pub abs_error: f64,
    pub tolerance_std_errors: f64,
    /// `false` when too few paths were run for the comparison to mean anything.
    pub conclusive: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeBlock {
    pub grid: usize,
    pub lo: f64,
    pub hi: f64,
    pub spacing: f64,
    pub analytic_thresholds: Vec<f64>,
    pub detected_thresholds: Vec<f64>,
    /// Largest distance, in grid spacings, between an analytic threshold and
    /// the nearest detected one or vice versa.
    pub max_delta_spacings: ExtF64,
    pub tolerance_spacings: f64,
    /// `max |v_grid − V|` over the nodes.
    pub value_gap_sup: f64,
    pub touches_boundary: bool,
    pub outer_iterations: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pde: Option<PdeBlock>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Wall-clock timings; excluded from determinism comparisons.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub solve_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pde_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: String,
    pub tool_version: String,
    pub problem: ProblemSpec,
    pub solution: SolutionSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verification: Option<Verification>,
    pub seed: Option<u64>,
    pub timing: Timing,
}

impl RunReport {
    pub fn new(problem: ProblemSpec, solution: SolutionSummary) -> Self {
        RunReport {
            schema: SCHEMA.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            problem,
            solution,
            verification: None,
            seed: None,
            timing: Timing::default(),
        }
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self).map(|mut s| {
            s.push('\n');
            s
        })
    }
}

/// `y,payoff,value,in_stopping_set` on `n` equally spaced points of `[lo, hi]`.
pub fn value_table(sol: &Solution, lo: f64, hi: f64, n: usize) -> String {
    let mut out = String::from("y,payoff,value,in_stopping_set\n");
    for i in 0..n {
        let y = if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 };
        let _ = writeln!(out, "{},{},{},{}", y, sol.payoff().eval(y), sol.value(y), sol.in_stopping_set(y));
    }
    out
}
