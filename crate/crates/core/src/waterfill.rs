//! Optimal transmit-power allocation along a fixed trajectory.
//!
//! With the flight path frozen, spreading a fixed energy budget over the
//! slots to maximize total throughput is the classic water-filling problem:
//! each slot has an effective noise level `w[n] = (‖q[n] − gs‖² + H²)/γ`,
//! and the optimum pours power up to a common water level `λ`,
//! `p[n] = max(λ − w[n], 0)`, with `λ` chosen to spend the budget exactly.
//!
//! The level is found by bisection on the monotone spent-energy curve
//! `S(λ) = Σ max(λ − w[n], 0)·δt`.

use alloc::format;
use alloc::vec;

use crate::error::{Error, Result};
use crate::model::{PowerProfile, ScenarioConfig, Trajectory};
use crate::vec2;

/// Relative tolerance on the budget identity at the returned water level.
const BUDGET_TOL: f64 = 1e-9;
/// Bisection iteration cap; the interval halves each step, so this is far
/// more than needed for any representable budget.
const MAX_BISECTIONS: usize = 200;

/// Water-filling result: the profile, the water level, and how exactly the
/// budget identity closed.
#[derive(Debug, Clone, PartialEq)]
pub struct WaterfillSolution {
    /// Per-slot transmit power (W).
    pub power: PowerProfile,
    /// Water level λ (W).
    pub lambda: f64,
    /// Transmit-side energy actually allocated, `Σ p[n]·δt` (J).
    pub budget_used: f64,
    /// `|budget_used − budget| / max(1, budget)`: the closing accuracy of
    /// the budget identity.
    pub kkt_residual: f64,
}

/// Allocate a transmit-side energy budget (J) over the trajectory's slots
/// to maximize total throughput.
///
/// Only the positions of `traj` are read; kinematic consistency is not
/// required here. A zero budget returns the all-zero profile; a negative
/// or non-finite budget is infeasible.
pub fn optimal_power(
    traj: &Trajectory,
    budget: f64,
    cfg: &ScenarioConfig,
) -> Result<WaterfillSolution> {
    cfg.validate()?;
    if traj.len() != cfg.slots {
        return Err(Error::LengthMismatch {
            expected: cfg.slots,
            got: traj.len(),
        });
    }
    if !budget.is_finite() || budget < 0.0 {
        return Err(Error::Infeasible {
            message: format!("transmit energy budget must be non-negative, got {budget}"),
        });
    }

    let gs = cfg.gs_position();
    let h2 = cfg.altitude * cfg.altitude;
    let levels: vec::Vec<f64> = traj
        .q
        .iter()
        .map(|&q| (vec2::norm_sq(vec2::sub(q, gs)) + h2) / cfg.gamma)
        .collect();
    let dt = cfg.delta_t();

    if budget == 0.0 {
        let lambda = levels.iter().cloned().fold(f64::INFINITY, f64::min);
        return Ok(WaterfillSolution {
            power: PowerProfile {
                p: vec![0.0; cfg.slots],
            },
            lambda,
            budget_used: 0.0,
            kkt_residual: 0.0,
        });
    }

    let spent = |lambda: f64| -> f64 {
        levels
            .iter()
            .map(|&w| (lambda - w).max(0.0) * dt)
            .sum::<f64>()
    };

    let w_max = levels.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut hi = w_max + budget / (cfg.slots as f64 * dt);
    while spent(hi) < budget {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    let tol = BUDGET_TOL * budget.max(1.0);
    let mut lambda = hi;
    for _ in 0..MAX_BISECTIONS {
        lambda = 0.5 * (lo + hi);
        let s = spent(lambda);
        if (s - budget).abs() <= tol {
            break;
        }
        if s < budget {
            lo = lambda;
        } else {
            hi = lambda;
        }
    }

    let p: vec::Vec<f64> = levels.iter().map(|&w| (lambda - w).max(0.0)).collect();
    let budget_used: f64 = p.iter().map(|&pi| pi * dt).sum();
    Ok(WaterfillSolution {
        power: PowerProfile { p },
        lambda,
        budget_used,
        kkt_residual: (budget_used - budget).abs() / budget.max(1.0),
    })
}
