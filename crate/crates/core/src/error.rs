//! Error type shared by all planner modules.

use alloc::boxed::Box;
use alloc::string::String;
use thiserror::Error;

use crate::model::Trajectory;
use crate::scp::OptimizationTrace;

/// Everything that can go wrong while planning.
#[derive(Debug, Error)]
pub enum Error {
    /// A scenario parameter is missing, non-finite, or outside its domain.
    #[error("invalid scenario parameter `{field}`: {message}")]
    InvalidConfig {
        /// Name of the offending parameter.
        field: &'static str,
        /// Human-readable description of the violation.
        message: String,
    },

    /// A textual input (key-value config or trajectory CSV) does not follow
    /// its schema.
    #[error("{what}, line {line}: {message}")]
    Parse {
        /// Which format was being read.
        what: &'static str,
        /// 1-based line of the first violation.
        line: usize,
        /// What is wrong with it.
        message: String,
    },

    /// Two per-slot arrays that must agree in length do not.
    #[error("array length mismatch: expected {expected} slots, got {got}")]
    LengthMismatch {
        /// Expected number of slots.
        expected: usize,
        /// Actual number of slots.
        got: usize,
    },

    /// A transmit power entry is negative.
    #[error("slot {slot}: negative transmit power {power}")]
    NegativePower {
        /// Offending slot (1-based).
        slot: usize,
        /// The negative value.
        power: f64,
    },

    /// A slot's airspeed is below the stall floor, so the propulsion model
    /// is not defined there.
    #[error("slot {slot}: airspeed {speed:.6} m/s is below the minimum airspeed")]
    SpeedBelowMinimum {
        /// Offending slot (1-based).
        slot: usize,
        /// The offending airspeed in m/s.
        speed: f64,
    },

    /// Position/velocity/acceleration arrays are not consistent with the
    /// discrete-time kinematics.
    #[error("slot {slot}: kinematic inconsistency: {message}")]
    Kinematics {
        /// Offending slot (1-based).
        slot: usize,
        /// Which recurrence failed and by how much.
        message: String,
    },

    /// A sampled trajectory violates a speed or acceleration cap.
    #[error("slot {slot}: {message}")]
    CapViolation {
        /// Offending slot (1-based).
        slot: usize,
        /// Which cap was violated and by how much.
        message: String,
    },

    /// The two circles cannot be joined by the internal tangent.
    #[error("circle geometry: {message}")]
    Geometry {
        /// Why the transition cannot be constructed.
        message: String,
    },

    /// No lap split fits into the horizon.
    #[error("horizon too short: no lap split satisfies the time budget")]
    HorizonTooShort,

    /// The scenario cannot support any transmission (or a requested energy
    /// budget is negative).
    #[error("infeasible scenario: {message}")]
    Infeasible {
        /// What makes the scenario infeasible.
        message: String,
    },

    /// The subproblem has no strictly feasible starting point, so the
    /// interior-point solver cannot start.
    #[error("no strictly feasible starting point: {message}")]
    InfeasibleStart {
        /// Which constraint pinches the starting point.
        message: String,
    },

    /// The interior-point solver ran out of iterations or stalled before
    /// reaching its target accuracy.
    #[error(
        "subproblem solver failed after {iterations} Newton iterations \
         (KKT residual {kkt_residual:.3e}): {message}"
    )]
    SubproblemSolve {
        /// Scaled KKT residual at the point where the solver gave up.
        kkt_residual: f64,
        /// Newton iterations spent.
        iterations: usize,
        /// What stalled.
        message: String,
        /// Best iterate reached before giving up, if one exists.
        last: Option<Box<Trajectory>>,
    },

    /// A multi-step optimization aborted; the trace collected so far is
    /// attached for post-mortems.
    #[error("optimization aborted: {cause}")]
    Aborted {
        /// The underlying failure.
        cause: Box<Error>,
        /// Iteration records collected before the failure.
        trace: Box<OptimizationTrace>,
    },
}

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;
