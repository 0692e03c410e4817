use alloc::boxed::Box;
use core::fmt;

use crate::optimizer::SolveReport;
use crate::simulator::Trajectory;

#[derive(Debug, Clone)]
pub enum Error {
    /// A physical or configuration parameter is out of range.
    InvalidParams(&'static str),
    /// An output pair was built from the same quantity twice.
    SamePair,
    /// The linear coefficients of an output pair are (numerically) parallel.
    SingularPair { det: f64 },
    /// An argument violates an operation's precondition.
    Domain(&'static str),
    /// An iterative solver hit its iteration cap; carries the best iterate.
    NotConverged(Box<SolveReport>),
    /// A simulation state left the finite range at time `t`.
    NonFinite {
        t: f64,
        partial: Option<Box<Trajectory>>,
    },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParams(what) => write!(f, "invalid parameter: {what}"),
            Error::SamePair => write!(f, "an output pair needs two distinct quantities"),
            Error::SingularPair { det } => {
                write!(f, "linear coefficients of the output pair are parallel (det = {det:e})")
            }
            Error::Domain(what) => write!(f, "domain error: {what}"),
            Error::NotConverged(report) => write!(
                f,
                "solver did not converge after {} iterations (objective {:e})",
                report.iterations, report.objective
            ),
            Error::NonFinite { t, .. } => write!(f, "state became non-finite at t = {t} s"),
        }
    }
}

impl core::error::Error for Error {}
