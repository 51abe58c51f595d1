use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A problem parameter violates its stated range.
    InvalidParams(&'static str),
    /// A function argument lies outside the function's domain.
    Domain { what: &'static str, value: f64 },
    /// Special-function parameters for which the function is undefined.
    Parameter(&'static str),
    /// An iterative method ran out of iterations.
    NoConvergence(&'static str),
    /// No sign change was found while expanding a root bracket.
    BracketFailure { what: &'static str, lo: f64, hi: f64 },
    /// `F/U_c` is unbounded for every reference point.
    UnboundedRatio { direction: &'static str },
    /// The payoff-to-excessive-function ratio has several local maxima.
    NotUnimodal,
    /// The payoff fails an evenness check.
    NotEven { at: f64 },
    /// The payoff fails the reflection symmetry around the period minimum.
    SymmetryViolation { at: f64 },
    /// A first-order condition has several roots in its bracket.
    InnerMaxNotUnique { side: &'static str, roots: usize },
    /// The controlled process has no stationary law (κ = 0).
    NoStationaryLaw,
    /// The payoff kind does not fit the requested solver.
    Unsupported(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParams(m) => write!(f, "invalid parameters: {m}"),
            Error::Domain { what, value } => write!(f, "{what}: argument {value} out of domain"),
            Error::Parameter(m) => write!(f, "parameter error: {m}"),
            Error::NoConvergence(m) => write!(f, "no convergence: {m}"),
            Error::BracketFailure { what, lo, hi } => {
                write!(f, "no sign change for {what} in [{lo}, {hi}]")
            }
            Error::UnboundedRatio { direction } => {
                write!(f, "payoff ratio unbounded for every reference point ({direction})")
            }
            Error::NotUnimodal => write!(f, "payoff ratio has several local maxima"),
            Error::NotEven { at } => write!(f, "payoff is not even (fails at {at})"),
            Error::SymmetryViolation { at } => {
                write!(f, "payoff is not symmetric about the period minimum (fails at {at})")
            }
            Error::InnerMaxNotUnique { side, roots } => {
                write!(f, "{side} first-order condition has {roots} roots")
            }
            Error::NoStationaryLaw => write!(f, "no stationary law without ambiguity (kappa = 0)"),
            Error::Unsupported(m) => write!(f, "unsupported: {m}"),
        }
    }
}

impl core::error::Error for Error {}
