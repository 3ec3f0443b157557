//! Safeguarded sequential convex programming and the full alternating
//! optimizer.
//!
//! The trajectory stage repeatedly linearizes the problem at the incumbent
//! ([`crate::convexsolver`]), solves the convex subproblem, and accepts the
//! step only if the *true* objective improves and the *true* conservative
//! energy bound still holds — a trust-region safeguard around the plain
//! successive-approximation loop. The full optimizer alternates this stage
//! with closed-form water-filling over the harvested-energy budget
//! ([`crate::waterfill`]), starting from the double-circle tour
//! ([`crate::doublecircle`]) and keeping the best pair seen.
//!
//! Every candidate evaluation is appended to an [`OptimizationTrace`] so
//! that monotonicity and feasibility of the accepted subsequence can be
//! audited after the fact.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use crate::convexsolver::{self, ScpIterate};
use crate::doublecircle::{self, DoubleCirclePlan};
use crate::error::{Error, Result};
use crate::model::{self, PowerProfile, ScenarioConfig, Trajectory};
use crate::waterfill;

use core::f64::consts::PI;

/// Which half of the alternating scheme produced a trace record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Water-filling over the energy budget with the trajectory frozen.
    Power,
    /// One convex trajectory subproblem with the power frozen.
    Trajectory,
}

/// One candidate evaluation in the optimization history.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    /// Global 1-based iteration counter across both phases.
    pub iteration: usize,
    /// Producing phase.
    pub phase: Phase,
    /// True total throughput of the candidate (bits/Hz).
    pub objective: f64,
    /// Exact energy-audit residual of the candidate pair (J); feasible
    /// candidates are non-positive.
    pub energy_residual: f64,
    /// Trust radius in force (m); zero for power-phase records.
    pub rho: f64,
    /// Solver certificate: subproblem KKT residual, or the water-filling
    /// budget-identity residual.
    pub kkt_residual: f64,
    /// Whether the candidate replaced the incumbent.
    pub accepted: bool,
}

/// Append-only record of every candidate the optimizer evaluated.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OptimizationTrace {
    /// Records in evaluation order.
    pub records: Vec<TraceRecord>,
}

impl OptimizationTrace {
    /// Append a record.
    pub fn push(&mut self, record: TraceRecord) {
        self.records.push(record);
    }

    /// Number of records.
    pub fn len(&self) -> usize {
        self.records.len()
    }

    /// Whether the trace is empty.
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// True when the accepted subsequence has non-decreasing objectives
    /// (within `tol` absolute) and non-positive energy residuals.
    pub fn accepted_monotone(&self, tol: f64) -> bool {
        let mut last = f64::NEG_INFINITY;
        for rec in self.records.iter().filter(|r| r.accepted) {
            if rec.objective < last - tol || rec.energy_residual > tol {
                return false;
            }
            last = rec.objective;
        }
        true
    }
}

/// Tuning knobs of the safeguarded loop; the defaults are the documented
/// contract and tests only shrink the caps.
#[derive(Debug, Clone, PartialEq)]
pub struct ScpOptions {
    /// Initial trust radius (m).
    pub rho_init: f64,
    /// Trust radius ceiling (m).
    pub rho_max: f64,
    /// Loop stops when the radius shrinks below this (m).
    pub rho_min: f64,
    /// Cap on trajectory subproblems per SCP stage.
    pub max_iterations: usize,
    /// Relative improvement below which a step counts as a stall.
    pub improvement_tol: f64,
    /// Consecutive stalling accepted steps that end the stage.
    pub stall_limit: usize,
    /// Cap on outer alternating rounds.
    pub max_outer: usize,
    /// Fraction of the energy budget held back in the power phase so the
    /// audit stays strictly feasible.
    pub budget_margin: f64,
}

impl Default for ScpOptions {
    fn default() -> Self {
        ScpOptions {
            rho_init: 50.0,
            rho_max: 200.0,
            rho_min: 0.1,
            max_iterations: 50,
            improvement_tol: 1e-4,
            stall_limit: 3,
            max_outer: 20,
            budget_margin: 1e-4,
        }
    }
}

impl ScpOptions {
    fn validate(&self) -> Result<()> {
        let ok = self.rho_init > 0.0
            && self.rho_max >= self.rho_init
            && self.rho_min > 0.0
            && self.rho_min <= self.rho_init
            && self.improvement_tol > 0.0
            && self.budget_margin > 0.0
            && self.budget_margin < 1.0
            && self.max_iterations > 0
            && self.stall_limit > 0
            && self.max_outer > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig {
                field: "scp_options",
                message: format!("inconsistent loop options: {self:?}"),
            })
        }
    }
}

/// Result of the full alternating optimization.
#[derive(Debug, Clone)]
pub struct AlternateOutcome {
    /// Best trajectory found.
    pub trajectory: Trajectory,
    /// Best matching power profile.
    pub power: PowerProfile,
    /// Its true total throughput (bits/Hz).
    pub throughput: f64,
    /// Full evaluation history.
    pub trace: OptimizationTrace,
    /// Outer rounds executed.
    pub outer_iterations: usize,
}

/// Conservative energy residual: communication energy plus the propulsion
/// *upper bound*, minus harvested energy. Non-positive values certify
/// feasibility of the exact audit as well.
pub fn upper_bound_residual(
    traj: &Trajectory,
    pw: &PowerProfile,
    cfg: &ScenarioConfig,
) -> Result<f64> {
    let ub = convexsolver::propulsion_upper_bound(traj, cfg)?;
    Ok(model::comm_energy(pw, cfg) + ub - total_harvest(traj, cfg))
}

fn total_harvest(traj: &Trajectory, cfg: &ScenarioConfig) -> f64 {
    traj.q
        .iter()
        .map(|&q| model::harvest_per_slot(q, cfg))
        .sum()
}

/// Inner safeguarded SCP loop, appending to a shared trace. Returns the
/// incumbent trajectory at termination.
fn scp_into(
    trace: &mut OptimizationTrace,
    counter: &mut usize,
    init: &Trajectory,
    pw: &PowerProfile,
    cfg: &ScenarioConfig,
    opts: &ScpOptions,
) -> Result<Trajectory> {
    let mut cur = init.clone();
    let mut r_cur = model::sum_throughput(&cur, pw, cfg)?;
    let resid0 = upper_bound_residual(&cur, pw, cfg)?;
    if resid0 > 0.0 {
        return Err(Error::InfeasibleStart {
            message: format!(
                "initial trajectory violates the conservative energy bound by {resid0:.6} J"
            ),
        });
    }

    let mut rho = opts.rho_init;
    let mut stall = 0usize;
    for _ in 0..opts.max_iterations {
        let iterate = ScpIterate::from_trajectory(&cur, cfg)?;
        let sub = convexsolver::build_subproblem(&iterate, pw, cfg, rho)?;
        let sol = sub.solve()?;
        *counter += 1;

        let cand = sol.trajectory;
        let r_cand = model::sum_throughput(&cand, pw, cfg)?;
        let resid_ub = upper_bound_residual(&cand, pw, cfg)?;
        let exact = model::energy_feasibility(&cand, pw, cfg)?;
        let accepted = r_cand > r_cur && resid_ub <= 0.0;
        trace.push(TraceRecord {
            iteration: *counter,
            phase: Phase::Trajectory,
            objective: r_cand,
            energy_residual: exact.residual,
            rho,
            kkt_residual: sol.kkt_residual,
            accepted,
        });

        if accepted {
            let rel = (r_cand - r_cur) / r_cur.abs().max(1e-9);
            cur = cand;
            r_cur = r_cand;
            rho = (2.0 * rho).min(opts.rho_max);
            if rel < opts.improvement_tol {
                stall += 1;
                if stall >= opts.stall_limit {
                    break;
                }
            } else {
                stall = 0;
            }
        } else {
            rho *= 0.5;
            if rho < opts.rho_min {
                break;
            }
        }
    }
    Ok(cur)
}

/// Optimize the trajectory under a frozen power profile with safeguarded
/// SCP. On solver failure the partial trace is attached to the error.
pub fn scp_trajectory(
    pw: &PowerProfile,
    init: &Trajectory,
    cfg: &ScenarioConfig,
    opts: &ScpOptions,
) -> Result<(Trajectory, OptimizationTrace)> {
    cfg.validate()?;
    opts.validate()?;
    init.validate(cfg)?;
    let mut trace = OptimizationTrace::default();
    let mut counter = 0usize;
    match scp_into(&mut trace, &mut counter, init, pw, cfg, opts) {
        Ok(traj) => Ok((traj, trace)),
        Err(e) => Err(Error::Aborted {
            cause: Box::new(e),
            trace: Box::new(trace),
        }),
    }
}

/// Full alternating optimization from an explicit starting pair.
///
/// If the starting pair violates the conservative energy bound (common for
/// equal-power initializations that spend the budget exactly), the power is
/// zeroed first; the power phase immediately re-funds it with the margin in
/// place.
pub fn alternate_from(
    init: Trajectory,
    init_power: PowerProfile,
    cfg: &ScenarioConfig,
    opts: &ScpOptions,
) -> Result<AlternateOutcome> {
    cfg.validate()?;
    opts.validate()?;
    init.validate(cfg)?;

    let mut trace = OptimizationTrace::default();
    let mut counter = 0usize;

    let mut best_traj = init;
    let mut best_power = if upper_bound_residual(&best_traj, &init_power, cfg)? > 0.0 {
        PowerProfile::constant(0.0, cfg.slots)
    } else {
        init_power
    };
    let mut best_r = model::sum_throughput(&best_traj, &best_power, cfg)?;

    let mut outer_iterations = 0usize;
    for outer in 1..=opts.max_outer {
        outer_iterations = outer;
        let r_round_start = best_r;

        // Power phase: fund transmission from the incumbent tour's net
        // harvested energy, held back by the margin.
        let ub = convexsolver::propulsion_upper_bound(&best_traj, cfg)?;
        let budget =
            cfg.eta * (total_harvest(&best_traj, cfg) - ub) * (1.0 - opts.budget_margin);
        if budget <= 0.0 {
            if outer == 1 {
                return Err(Error::Infeasible {
                    message: format!(
                        "net harvested energy {budget:.3} J cannot fund any transmission"
                    ),
                });
            }
            break;
        }
        let wf = waterfill::optimal_power(&best_traj, budget, cfg)?;
        let r_wf = model::sum_throughput(&best_traj, &wf.power, cfg)?;
        let exact = model::energy_feasibility(&best_traj, &wf.power, cfg)?;
        counter += 1;
        let accepted = r_wf > best_r;
        trace.push(TraceRecord {
            iteration: counter,
            phase: Phase::Power,
            objective: r_wf,
            energy_residual: exact.residual,
            rho: 0.0,
            kkt_residual: wf.kkt_residual,
            accepted,
        });
        if accepted {
            best_power = wf.power;
            best_r = r_wf;
        }

        // Trajectory phase under the incumbent power.
        match scp_into(&mut trace, &mut counter, &best_traj, &best_power, cfg, opts) {
            Ok(traj) => {
                let r_new = model::sum_throughput(&traj, &best_power, cfg)?;
                if r_new > best_r {
                    best_traj = traj;
                    best_r = r_new;
                }
            }
            Err(e) => {
                return Err(Error::Aborted {
                    cause: Box::new(e),
                    trace: Box::new(trace),
                })
            }
        }

        let rel = (best_r - r_round_start) / r_round_start.abs().max(1e-9);
        if rel < opts.improvement_tol {
            break;
        }
    }

    Ok(AlternateOutcome {
        trajectory: best_traj,
        power: best_power,
        throughput: best_r,
        trace,
        outer_iterations,
    })
}

/// Full pipeline: double-circle tour, then alternating optimization.
pub fn alternate(cfg: &ScenarioConfig, opts: &ScpOptions) -> Result<AlternateOutcome> {
    let plan = doublecircle::lap_search(cfg)?;
    let (traj, pw) = doublecircle::discretize(&plan, cfg)?;
    alternate_from(traj, pw, cfg, opts)
}

/// Benchmark tour: the whole horizon on the net-energy-optimal circle
/// around the laser, with the net energy spent as equal transmit power.
/// Scenarios that cannot net energy on that circle are infeasible.
pub fn single_circle_baseline(cfg: &ScenarioConfig) -> Result<(Trajectory, PowerProfile)> {
    cfg.validate()?;
    let hc = doublecircle::solve_harvest_circle(cfg)?;
    let n1 = cfg.horizon * hc.speed / (2.0 * PI * hc.radius);
    let plan = DoubleCirclePlan {
        r1: hc.radius,
        v1: hc.speed,
        n1,
        r2: hc.radius,
        v2: hc.speed,
        n2: 0.0,
        l12: 0.0,
        a12_mag: 0.0,
        p_const: 0.0,
        t1: cfg.horizon,
        t12: 0.0,
        t2: 0.0,
    };
    let (traj, _) = doublecircle::discretize(&plan, cfg)?;
    let prop = model::propulsion_energy(&traj, cfg)?;
    let net = total_harvest(&traj, cfg) - prop.total;
    if net <= 0.0 {
        return Err(Error::Infeasible {
            message: format!("single-circle tour nets {net:.3} J; nothing to transmit"),
        });
    }
    let p = cfg.eta * net * (1.0 - 1e-9) / cfg.horizon;
    Ok((traj, PowerProfile::constant(p, cfg.slots)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vec2;

    /// Reduced-size scenario for loop tests.
    fn small_cfg() -> ScenarioConfig {
        let mut c = ScenarioConfig::default();
        c.slots = 40;
        c.horizon = 40.0;
        c
    }

    fn quick_opts() -> ScpOptions {
        ScpOptions {
            max_iterations: 12,
            max_outer: 4,
            ..ScpOptions::default()
        }
    }

    fn straight_pass(cfg: &ScenarioConfig, q0: [f64; 2], v: [f64; 2]) -> Trajectory {
        let accels = alloc::vec![[0.0, 0.0]; cfg.slots];
        Trajectory::rollout(q0, v, &accels, cfg.delta_t())
    }

    #[test]
    fn zero_power_loop_terminates_without_regressing() {
        let mut c = ScenarioConfig::default();
        c.slots = 6;
        c.horizon = 3.0;
        let init = straight_pass(&c, [450.0, 0.0], [20.0, 0.0]);
        let pw = PowerProfile::constant(0.0, c.slots);
        let (traj, trace) = scp_trajectory(&pw, &init, &c, &quick_opts()).unwrap();
        traj.validate(&c).unwrap();
        assert_eq!(model::sum_throughput(&traj, &pw, &c).unwrap(), 0.0);
        assert!(!trace.is_empty());
        assert!(trace.accepted_monotone(1e-8));
    }

    #[test]
    fn powered_loop_improves_and_stays_feasible() {
        let mut c = ScenarioConfig::default();
        c.slots = 6;
        c.horizon = 3.0;
        let init = straight_pass(&c, [430.0, 0.0], [20.0, 0.0]);
        let pw = PowerProfile::constant(1.0, c.slots);
        let r_init = model::sum_throughput(&init, &pw, &c).unwrap();
        let (traj, trace) = scp_trajectory(&pw, &init, &c, &quick_opts()).unwrap();
        let r_final = model::sum_throughput(&traj, &pw, &c).unwrap();
        assert!(r_final > r_init, "{r_final} vs {r_init}");
        assert!(trace.accepted_monotone(1e-8));
        // Every accepted step also passes the exact audit and carries a
        // converged subproblem certificate.
        for rec in trace.records.iter().filter(|r| r.accepted) {
            assert!(rec.energy_residual <= 0.0);
            assert!(rec.kkt_residual <= convexsolver::KKT_TOLERANCE);
        }
    }

    #[test]
    fn infeasible_start_is_rejected_with_trace() {
        let mut c = ScenarioConfig::default();
        c.slots = 6;
        c.horizon = 3.0;
        c.phi = 1e-3; // effectively no harvest
        let init = straight_pass(&c, [430.0, 0.0], [20.0, 0.0]);
        let pw = PowerProfile::constant(1.0, c.slots);
        match scp_trajectory(&pw, &init, &c, &quick_opts()) {
            Err(Error::Aborted { cause, trace }) => {
                assert!(matches!(*cause, Error::InfeasibleStart { .. }));
                assert!(trace.is_empty());
            }
            other => panic!("expected an aborted run, got {other:?}"),
        }
    }

    #[test]
    fn alternate_improves_over_double_circle_start() {
        let c = small_cfg();
        let plan = doublecircle::lap_search(&c).unwrap();
        let (init, init_pw) = doublecircle::discretize(&plan, &c).unwrap();
        let r_init = model::sum_throughput(&init, &init_pw, &c).unwrap();

        let out = alternate(&c, &quick_opts()).unwrap();
        assert!(out.throughput >= r_init - 1e-9, "{} < {r_init}", out.throughput);
        assert!(out.trace.accepted_monotone(1e-8));
        assert!(out.outer_iterations >= 1 && out.outer_iterations <= 4);
        let audit = model::energy_feasibility(&out.trajectory, &out.power, &c).unwrap();
        assert!(audit.residual <= 0.0, "residual = {}", audit.residual);
    }

    #[test]
    fn single_circle_baseline_hugs_the_harvest_circle() {
        let c = ScenarioConfig::default();
        let hc = doublecircle::solve_harvest_circle(&c).unwrap();
        let (traj, pw) = single_circle_baseline(&c).unwrap();
        for &q in &traj.q {
            let r = vec2::norm(q);
            assert!((r - hc.radius).abs() <= 0.01 * hc.radius, "‖q‖ = {r}");
        }
        assert!(pw.p[0] > 0.0);
        let audit = model::energy_feasibility(&traj, &pw, &c).unwrap();
        assert!(audit.residual <= 0.0);

        // It transmits from far away, so the double-circle tour beats it.
        let plan = doublecircle::lap_search(&c).unwrap();
        let (dtraj, dpw) = doublecircle::discretize(&plan, &c).unwrap();
        let r_single = model::sum_throughput(&traj, &pw, &c).unwrap();
        let r_double = model::sum_throughput(&dtraj, &dpw, &c).unwrap();
        assert!(r_double >= r_single, "{r_double} < {r_single}");
    }

    #[test]
    fn weak_laser_is_reported_infeasible() {
        let mut c = small_cfg();
        c.phi = 40.0;
        assert!(matches!(
            single_circle_baseline(&c),
            Err(Error::Infeasible { .. })
        ));
        assert!(matches!(
            alternate(&c, &quick_opts()),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn strong_laser_solution_stays_near_the_station() {
        let mut c = small_cfg();
        c.phi = 1200.0;
        let out = alternate(&c, &quick_opts()).unwrap();
        let gs = c.gs_position();
        for &q in &out.trajectory.q {
            let d = vec2::norm(vec2::sub(q, gs));
            assert!(d <= 250.0, "excursion to {d} m from the station");
        }
        assert!(out.trace.accepted_monotone(1e-8));
    }

    #[test]
    fn nearby_starts_reach_nearby_objectives() {
        let mut c = small_cfg();
        c.phi = 1200.0;
        let plan = doublecircle::lap_search(&c).unwrap();
        let (init, _) = doublecircle::discretize(&plan, &c).unwrap();
        let pw = PowerProfile::constant(1.0, c.slots);

        // Locally displace the path ~1 m around slot 13 with a symmetric
        // out-and-back acceleration pattern (+d,+d,−d,−d,−d,−d,+d,+d) that
        // restores both velocity and position afterwards; the peak
        // displacement is 4·d·δt² at the middle of the window.
        let mut accels = init.a.clone();
        let d = 0.25;
        for k in 9..11 {
            accels[k] = vec2::add(accels[k], [d, 0.0]);
        }
        for k in 11..15 {
            accels[k] = vec2::sub(accels[k], [d, 0.0]);
        }
        for k in 15..17 {
            accels[k] = vec2::add(accels[k], [d, 0.0]);
        }
        let perturbed = Trajectory::rollout(init.q[0], init.v[0], &accels, c.delta_t());
        perturbed.validate(&c).unwrap();
        let shift = vec2::norm(vec2::sub(perturbed.q[13], init.q[13]));
        assert!((shift - 1.0).abs() < 0.2, "impulse moved the slot by {shift} m");
        let tail = vec2::norm(vec2::sub(perturbed.q[18], init.q[18]));
        assert!(tail < 1e-9, "perturbation failed to return to baseline: {tail} m");

        let (_, trace_a) = scp_trajectory(&pw, &init, &c, &quick_opts()).unwrap();
        let r_a = trace_a
            .records
            .iter()
            .filter(|r| r.accepted)
            .map(|r| r.objective)
            .fold(model::sum_throughput(&init, &pw, &c).unwrap(), f64::max);
        let (_, trace_b) = scp_trajectory(&pw, &perturbed, &c, &quick_opts()).unwrap();
        let r_b = trace_b
            .records
            .iter()
            .filter(|r| r.accepted)
            .map(|r| r.objective)
            .fold(model::sum_throughput(&perturbed, &pw, &c).unwrap(), f64::max);
        assert!(
            (r_a - r_b).abs() <= 0.01 * r_a.abs().max(r_b.abs()),
            "diverging objectives: {r_a} vs {r_b}"
        );
    }
}
