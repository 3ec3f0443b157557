//! Scenario parameters, discrete-time kinematics, and the physical
//! bookkeeping: downlink rate, laser energy harvest, and propulsion energy.
//!
//! Conventions used across the crate:
//!
//! * The laser sits at the origin; the ground station sits at
//!   `(gs_distance, 0)`. The aircraft flies at constant altitude, so states
//!   are planar.
//! * The horizon `[0, T]` is split into `slots` equal slots of length `δt`.
//!   Arrays are indexed `0..N` internally; errors and file formats report
//!   slots 1-based. Slot `n` holds the state sampled at `t = n·δt`; the
//!   acceleration of the last slot does not enter the kinematic recurrence
//!   but does enter the propulsion energy like every other slot.
//! * Per-slot "energy" quantities are joules (already multiplied by `δt`);
//!   "power" quantities are watts.

use alloc::string::ToString;
use alloc::vec::Vec;

use crate::error::{Error, Result};
#[cfg(not(feature = "std"))]
use crate::math::FloatExt;
use crate::vec2;

/// ln(2), used to express natural logs in bits.
pub(crate) const LN_2: f64 = core::f64::consts::LN_2;

/// Absolute tolerance for the kinematic-consistency check, in meters /
/// meters-per-second. Trajectories built by [`Trajectory::rollout`] satisfy
/// it exactly; file-loaded trajectories must satisfy it to be accepted.
pub const KINEMATIC_TOL: f64 = 1e-9;

/// Relative slack allowed when checking speed/acceleration caps, so that a
/// value sitting exactly on a cap survives float round-trips.
const CAP_SLACK: f64 = 1e-9;

/// Full description of one planning scenario.
///
/// Distances are meters, times seconds, masses kilograms, powers watts.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// Horizontal laser → ground-station distance (the laser is at the
    /// origin, the station at `(gs_distance, 0)`).
    pub gs_distance: f64,
    /// Flight altitude above both ground nodes.
    pub altitude: f64,
    /// Mission horizon in seconds.
    pub horizon: f64,
    /// Number of time slots the horizon is split into.
    pub slots: usize,
    /// Linear reference SNR factor: the received SNR at distance `d` from
    /// the station is `gamma · p / d²` for transmit power `p`.
    pub gamma: f64,
    /// Laser-to-electricity conversion efficiency in `(0, 1]`.
    pub eta: f64,
    /// Parasitic-drag propulsion coefficient (multiplies `‖v‖³`).
    pub c1: f64,
    /// Induced-drag propulsion coefficient (multiplies `1/‖v‖`).
    pub c2: f64,
    /// Gravitational acceleration.
    pub gravity: f64,
    /// Aircraft mass.
    pub mass: f64,
    /// Laser transmit power in watts.
    pub phi: f64,
    /// Combined receiver-aperture / optics gain of the harvest link.
    pub laser_c: f64,
    /// Atmospheric extinction coefficient (1/m) of the laser link.
    pub alpha: f64,
    /// Initial beam diameter (m).
    pub beam_d: f64,
    /// Full beam divergence angle (rad).
    pub delta_theta: f64,
    /// Maximum airspeed.
    pub v_max: f64,
    /// Maximum acceleration magnitude.
    pub a_max: f64,
    /// Minimum (stall) airspeed.
    pub v_min: f64,
    /// Require the first and last slot velocities to coincide, which zeroes
    /// the kinetic-energy credit the optimizer can otherwise take by ending
    /// slower than it started.
    pub periodic_velocity: bool,
    /// Pin the first slot position to this point (optional).
    pub pin_start: Option<[f64; 2]>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            gs_distance: 500.0,
            altitude: 100.0,
            horizon: 100.0,
            slots: 200,             // δt = 0.5 s at the default horizon
            gamma: 100.0,           // 20 dB
            eta: 1.0,
            c1: 9.26e-4,
            c2: 2250.0,
            gravity: 9.8,
            mass: 10.0,
            phi: 600.0,
            laser_c: 0.004,
            alpha: 1e-6,
            beam_d: 0.1,
            delta_theta: 3.4e-5,
            v_max: 60.0,
            a_max: 6.0,
            v_min: 3.0,
            periodic_velocity: false,
            pin_start: None,
        }
    }
}

impl ScenarioConfig {
    /// Slot length `T / N` in seconds.
    #[inline]
    pub fn delta_t(&self) -> f64 {
        self.horizon / self.slots as f64
    }

    /// Ground-station position.
    #[inline]
    pub fn gs_position(&self) -> [f64; 2] {
        [self.gs_distance, 0.0]
    }

    /// Check every parameter for finiteness and domain. Returns the first
    /// violation, naming the parameter.
    pub fn validate(&self) -> Result<()> {
        fn positive(field: &'static str, value: f64) -> Result<()> {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::InvalidConfig {
                    field,
                    message: alloc::format!("must be finite and > 0, got {value}"),
                });
            }
            Ok(())
        }
        fn non_negative(field: &'static str, value: f64) -> Result<()> {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidConfig {
                    field,
                    message: alloc::format!("must be finite and >= 0, got {value}"),
                });
            }
            Ok(())
        }

        positive("L", self.gs_distance)?;
        positive("H", self.altitude)?;
        positive("T", self.horizon)?;
        if self.slots < 2 {
            return Err(Error::InvalidConfig {
                field: "N",
                message: "at least two slots are required".to_string(),
            });
        }
        positive("gamma", self.gamma)?;
        positive("eta", self.eta)?;
        if self.eta > 1.0 {
            return Err(Error::InvalidConfig {
                field: "eta",
                message: alloc::format!("conversion efficiency cannot exceed 1, got {}", self.eta),
            });
        }
        positive("c1", self.c1)?;
        positive("c2", self.c2)?;
        positive("g", self.gravity)?;
        positive("m", self.mass)?;
        non_negative("phi", self.phi)?;
        positive("C", self.laser_c)?;
        non_negative("alpha", self.alpha)?;
        positive("D", self.beam_d)?;
        non_negative("delta_theta", self.delta_theta)?;
        positive("V_max", self.v_max)?;
        positive("a_max", self.a_max)?;
        positive("V_min", self.v_min)?;
        if self.v_min >= self.v_max {
            return Err(Error::InvalidConfig {
                field: "V_min",
                message: alloc::format!(
                    "minimum airspeed {} must be below the maximum {}",
                    self.v_min,
                    self.v_max
                ),
            });
        }
        if let Some(pin) = self.pin_start {
            if !pin[0].is_finite() || !pin[1].is_finite() {
                return Err(Error::InvalidConfig {
                    field: "pin_start",
                    message: "pinned start position must be finite".to_string(),
                });
            }
        }
        Ok(())
    }
}

/// Convert an SNR factor given in dB to the linear scale used by
/// [`ScenarioConfig::gamma`].
#[inline]
pub fn snr_db_to_linear(db: f64) -> f64 {
    let exponent = db / 10.0;
    // 10^x without pulling powf into no_std builds.
    (exponent * core::f64::consts::LN_10).exp()
}

/// Keys of the flat `key = value` scenario schema that must be present
/// (everything physical; the remaining keys have documented defaults).
const REQUIRED_KEYS: [&str; 14] = [
    "L",
    "H",
    "T",
    "gamma_db",
    "eta",
    "c1",
    "c2",
    "phi",
    "C_laser",
    "alpha_atten",
    "D_beam",
    "delta_theta",
    "V_max",
    "a_max",
];

impl ScenarioConfig {
    /// Parse the flat `key = value` scenario schema.
    ///
    /// One assignment per line; `#` starts a comment; keys match the
    /// documented parameter names (`L`, `H`, `T`, `N`, `gamma_db`, `eta`,
    /// `c1`, `c2`, `g`, `m`, `phi`, `C_laser`, `alpha_atten`, `D_beam`,
    /// `delta_theta`, `V_max`, `a_max`, `V_min`, `periodic_velocity`,
    /// `pin_start_x`, `pin_start_y`). The SNR is given in dB and converted
    /// to the linear factor. Keys with defaults (`N` = 200, `g` = 9.8,
    /// `m` = 10, `V_min` = 3, boundary flags off) may be omitted; all
    /// others are required. Errors carry the offending line and key.
    pub fn from_key_values(text: &str) -> Result<Self> {
        let parse_err = |line: usize, message: alloc::string::String| Error::Parse {
            what: "scenario config",
            line,
            message,
        };
        let mut cfg = ScenarioConfig::default();
        let mut seen: Vec<&str> = Vec::new();
        let mut pin_x: Option<f64> = None;
        let mut pin_y: Option<f64> = None;

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = match raw.split_once('#') {
                Some((before, _)) => before.trim(),
                None => raw.trim(),
            };
            if content.is_empty() {
                continue;
            }
            let Some((key_raw, value_raw)) = content.split_once('=') else {
                return Err(parse_err(
                    line,
                    alloc::format!("expected `key = value`, got `{content}`"),
                ));
            };
            let key = key_raw.trim();
            let value = value_raw.trim();

            let float = |line: usize| -> Result<f64> {
                value.parse::<f64>().map_err(|_| {
                    parse_err(line, alloc::format!("key `{key}`: `{value}` is not a number"))
                })
            };

            let canonical = match key {
                "L" => {
                    cfg.gs_distance = float(line)?;
                    "L"
                }
                "H" => {
                    cfg.altitude = float(line)?;
                    "H"
                }
                "T" => {
                    cfg.horizon = float(line)?;
                    "T"
                }
                "N" => {
                    cfg.slots = value.parse::<usize>().map_err(|_| {
                        parse_err(
                            line,
                            alloc::format!("key `N`: `{value}` is not a positive integer"),
                        )
                    })?;
                    "N"
                }
                "gamma_db" => {
                    cfg.gamma = snr_db_to_linear(float(line)?);
                    "gamma_db"
                }
                "eta" => {
                    cfg.eta = float(line)?;
                    "eta"
                }
                "c1" => {
                    cfg.c1 = float(line)?;
                    "c1"
                }
                "c2" => {
                    cfg.c2 = float(line)?;
                    "c2"
                }
                "g" => {
                    cfg.gravity = float(line)?;
                    "g"
                }
                "m" => {
                    cfg.mass = float(line)?;
                    "m"
                }
                "phi" => {
                    cfg.phi = float(line)?;
                    "phi"
                }
                "C_laser" => {
                    cfg.laser_c = float(line)?;
                    "C_laser"
                }
                "alpha_atten" => {
                    cfg.alpha = float(line)?;
                    "alpha_atten"
                }
                "D_beam" => {
                    cfg.beam_d = float(line)?;
                    "D_beam"
                }
                "delta_theta" => {
                    cfg.delta_theta = float(line)?;
                    "delta_theta"
                }
                "V_max" => {
                    cfg.v_max = float(line)?;
                    "V_max"
                }
                "a_max" => {
                    cfg.a_max = float(line)?;
                    "a_max"
                }
                "V_min" => {
                    cfg.v_min = float(line)?;
                    "V_min"
                }
                "periodic_velocity" => {
                    cfg.periodic_velocity = match value {
                        "true" | "1" => true,
                        "false" | "0" => false,
                        _ => {
                            return Err(parse_err(
                                line,
                                alloc::format!(
                                    "key `periodic_velocity`: `{value}` is not a boolean"
                                ),
                            ))
                        }
                    };
                    "periodic_velocity"
                }
                "pin_start_x" => {
                    pin_x = Some(float(line)?);
                    "pin_start_x"
                }
                "pin_start_y" => {
                    pin_y = Some(float(line)?);
                    "pin_start_y"
                }
                _ => {
                    return Err(parse_err(line, alloc::format!("unknown key `{key}`")));
                }
            };
            if seen.contains(&canonical) {
                return Err(parse_err(
                    line,
                    alloc::format!("key `{canonical}` given more than once"),
                ));
            }
            seen.push(canonical);
        }

        for key in REQUIRED_KEYS {
            if !seen.contains(&key) {
                return Err(Error::InvalidConfig {
                    field: key,
                    message: "missing required key".to_string(),
                });
            }
        }
        cfg.pin_start = match (pin_x, pin_y) {
            (Some(x), Some(y)) => Some([x, y]),
            (None, None) => None,
            (Some(_), None) => {
                return Err(Error::InvalidConfig {
                    field: "pin_start_y",
                    message: "pin_start_x was given without pin_start_y".to_string(),
                })
            }
            (None, Some(_)) => {
                return Err(Error::InvalidConfig {
                    field: "pin_start_x",
                    message: "pin_start_y was given without pin_start_x".to_string(),
                })
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// CSV header shared by every trajectory file the toolkit reads or writes.
pub const TRAJECTORY_CSV_HEADER: [&str; 9] = ["n", "t", "x", "y", "vx", "vy", "ax", "ay", "p"];

/// Serialize a (trajectory, power) pair as the interchange CSV
/// (`n,t,x,y,vx,vy,ax,ay,p`; slot indices 1-based, `t = (n−1)·δt`,
/// values at full precision so a read-back reproduces them exactly).
pub fn trajectory_to_csv(
    traj: &Trajectory,
    pw: &PowerProfile,
    cfg: &ScenarioConfig,
) -> Result<alloc::string::String> {
    use core::fmt::Write;

    if traj.len() != pw.p.len() {
        return Err(Error::LengthMismatch {
            expected: traj.len(),
            got: pw.p.len(),
        });
    }
    let dt = cfg.delta_t();
    let mut out = alloc::string::String::new();
    out.push_str("n,t,x,y,vx,vy,ax,ay,p\n");
    for n in 0..traj.len() {
        let q = traj.q[n];
        let v = traj.v[n];
        let a = traj.a[n];
        // 17 significant digits round-trip any f64 exactly.
        let _ = writeln!(
            out,
            "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            n + 1,
            n as f64 * dt,
            q[0],
            q[1],
            v[0],
            v[1],
            a[0],
            a[1],
            pw.p[n]
        );
    }
    Ok(out)
}

/// Parse the interchange CSV back into a (trajectory, power) pair.
///
/// The header must start with the nine documented columns; any further
/// columns (audit annotations) are ignored. The slot index column must
/// count 1, 2, … in order. No kinematic or cap validation happens here —
/// callers decide how strict to be.
pub fn trajectory_from_csv(text: &str) -> Result<(Trajectory, PowerProfile)> {
    let parse_err = |line: usize, message: alloc::string::String| Error::Parse {
        what: "trajectory CSV",
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Err(parse_err(1, "empty file".to_string()));
    };
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() < TRAJECTORY_CSV_HEADER.len()
        || cols[..TRAJECTORY_CSV_HEADER.len()] != TRAJECTORY_CSV_HEADER
    {
        return Err(parse_err(
            1,
            alloc::format!("header must start with `n,t,x,y,vx,vy,ax,ay,p`, got `{header}`"),
        ));
    }

    let mut q = Vec::new();
    let mut v = Vec::new();
    let mut a = Vec::new();
    let mut p = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
        if fields.len() < TRAJECTORY_CSV_HEADER.len() {
            return Err(parse_err(
                line,
                alloc::format!("expected at least 9 columns, got {}", fields.len()),
            ));
        }
        let n: usize = fields[0]
            .parse()
            .map_err(|_| parse_err(line, alloc::format!("slot index `{}`", fields[0])))?;
        if n != q.len() + 1 {
            return Err(parse_err(
                line,
                alloc::format!("slot index {n} out of order (expected {})", q.len() + 1),
            ));
        }
        let mut vals = [0.0_f64; 8];
        for (k, slot) in vals.iter_mut().enumerate() {
            *slot = fields[k + 1].parse().map_err(|_| {
                parse_err(
                    line,
                    alloc::format!(
                        "column `{}`: `{}` is not a number",
                        TRAJECTORY_CSV_HEADER[k + 1],
                        fields[k + 1]
                    ),
                )
            })?;
        }
        q.push([vals[1], vals[2]]);
        v.push([vals[3], vals[4]]);
        a.push([vals[5], vals[6]]);
        p.push(vals[7]);
    }
    if q.is_empty() {
        return Err(parse_err(2, "no data rows".to_string()));
    }
    Ok((Trajectory { q, v, a }, PowerProfile { p }))
}

/// A sampled flight path: per-slot position, velocity and acceleration.
///
/// The arrays always have equal length `N`, and slots `0..N-1` satisfy
/// `v[n+1] = v[n] + a[n]·δt` and `q[n+1] = q[n] + v[n]·δt + ½·a[n]·δt²`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Positions (m).
    pub q: Vec<[f64; 2]>,
    /// Velocities (m/s).
    pub v: Vec<[f64; 2]>,
    /// Accelerations (m/s²).
    pub a: Vec<[f64; 2]>,
}

impl Trajectory {
    /// Number of slots.
    #[inline]
    pub fn len(&self) -> usize {
        self.q.len()
    }

    /// Whether the trajectory has no slots.
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    /// Integrate the kinematic recurrence from an initial state and a full
    /// acceleration schedule (one entry per slot; the last entry is carried
    /// into the energy bookkeeping but moves nothing).
    pub fn rollout(q0: [f64; 2], v0: [f64; 2], accels: &[[f64; 2]], delta_t: f64) -> Self {
        let n = accels.len();
        let mut q = Vec::with_capacity(n);
        let mut v = Vec::with_capacity(n);
        q.push(q0);
        v.push(v0);
        for i in 0..n.saturating_sub(1) {
            let ai = accels[i];
            let vi = v[i];
            let qi = q[i];
            v.push([vi[0] + ai[0] * delta_t, vi[1] + ai[1] * delta_t]);
            q.push([
                qi[0] + vi[0] * delta_t + 0.5 * ai[0] * delta_t * delta_t,
                qi[1] + vi[1] * delta_t + 0.5 * ai[1] * delta_t * delta_t,
            ]);
        }
        Trajectory {
            q,
            v,
            a: accels.to_vec(),
        }
    }

    /// Verify slot count, kinematic consistency (absolute tolerance
    /// [`KINEMATIC_TOL`]) and the speed/acceleration caps, reporting the
    /// first violating slot.
    pub fn validate(&self, cfg: &ScenarioConfig) -> Result<()> {
        if self.len() != cfg.slots {
            return Err(Error::LengthMismatch {
                expected: cfg.slots,
                got: self.len(),
            });
        }
        if self.v.len() != self.len() || self.a.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: self.v.len().min(self.a.len()),
            });
        }
        let dt = cfg.delta_t();
        for n in 0..self.len() - 1 {
            for c in 0..2 {
                let v_next = self.v[n][c] + self.a[n][c] * dt;
                let dv = (self.v[n + 1][c] - v_next).abs();
                if dv > KINEMATIC_TOL {
                    return Err(Error::Kinematics {
                        slot: n + 1,
                        message: alloc::format!(
                            "velocity recurrence off by {dv:.3e} in coordinate {c}"
                        ),
                    });
                }
                let q_next = self.q[n][c] + self.v[n][c] * dt + 0.5 * self.a[n][c] * dt * dt;
                let dq = (self.q[n + 1][c] - q_next).abs();
                if dq > KINEMATIC_TOL {
                    return Err(Error::Kinematics {
                        slot: n + 1,
                        message: alloc::format!(
                            "position recurrence off by {dq:.3e} in coordinate {c}"
                        ),
                    });
                }
            }
        }
        for n in 0..self.len() {
            let speed = vec2::norm(self.v[n]);
            if speed > cfg.v_max * (1.0 + CAP_SLACK) {
                return Err(Error::CapViolation {
                    slot: n + 1,
                    message: alloc::format!("speed {speed:.6} exceeds V_max {}", cfg.v_max),
                });
            }
            if speed < cfg.v_min * (1.0 - CAP_SLACK) {
                return Err(Error::CapViolation {
                    slot: n + 1,
                    message: alloc::format!("speed {speed:.6} is below V_min {}", cfg.v_min),
                });
            }
            let acc = vec2::norm(self.a[n]);
            if acc > cfg.a_max * (1.0 + CAP_SLACK) {
                return Err(Error::CapViolation {
                    slot: n + 1,
                    message: alloc::format!("acceleration {acc:.6} exceeds a_max {}", cfg.a_max),
                });
            }
        }
        Ok(())
    }
}

/// Per-slot transmit powers in watts.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerProfile {
    /// Transmit power per slot (W).
    pub p: Vec<f64>,
}

impl PowerProfile {
    /// A constant-power profile.
    pub fn constant(p: f64, slots: usize) -> Self {
        PowerProfile {
            p: alloc::vec![p; slots],
        }
    }

    /// Check slot count and non-negativity.
    pub fn validate(&self, cfg: &ScenarioConfig) -> Result<()> {
        if self.p.len() != cfg.slots {
            return Err(Error::LengthMismatch {
                expected: cfg.slots,
                got: self.p.len(),
            });
        }
        for (n, &p) in self.p.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::NegativePower { slot: n + 1, power: p });
            }
        }
        Ok(())
    }
}

/// Energy audit of a (trajectory, power) pair. All entries are joules.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    /// Laser energy harvested per slot.
    pub harvest: Vec<f64>,
    /// Propulsion energy spent per slot (integral term only).
    pub propulsion: Vec<f64>,
    /// Total harvested energy.
    pub total_harvest: f64,
    /// Total propulsion energy: per-slot sum plus the kinetic-energy change.
    pub total_propulsion: f64,
    /// Kinetic-energy change `½·m·(‖v[N]‖² − ‖v[1]‖²)`.
    pub kinetic_delta: f64,
    /// Transmit-chain energy `(1/η)·Σ p[n]·δt`.
    pub total_comm: f64,
    /// `total_comm + total_propulsion − total_harvest`; feasible iff ≤ 0.
    pub residual: f64,
}

/// Downlink spectral efficiency (bits/s/Hz) of one slot at position `q`
/// with transmit power `p ≥ 0`.
#[inline]
pub fn rate_per_slot(q: [f64; 2], p: f64, cfg: &ScenarioConfig) -> f64 {
    debug_assert!(p >= 0.0, "rate_per_slot requires non-negative power");
    let d2 = vec2::norm_sq(vec2::sub(q, cfg.gs_position())) + cfg.altitude * cfg.altitude;
    (p * cfg.gamma / d2).ln_1p() / LN_2
}

/// Gradient of [`rate_per_slot`] with respect to the position.
#[inline]
pub fn rate_grad_q(q: [f64; 2], p: f64, cfg: &ScenarioConfig) -> [f64; 2] {
    let rel = vec2::sub(q, cfg.gs_position());
    let u = vec2::norm_sq(rel) + cfg.altitude * cfg.altitude;
    let pg = p * cfg.gamma;
    // d/du log2(1 + pg/u) = −pg / (ln2 · u · (u + pg))
    let dr_du = -pg / (LN_2 * u * (u + pg));
    vec2::scale(rel, 2.0 * dr_du)
}

/// Total downlink throughput `δt · Σ rate[n]` in bits/Hz.
pub fn sum_throughput(traj: &Trajectory, pw: &PowerProfile, cfg: &ScenarioConfig) -> Result<f64> {
    if traj.len() != pw.p.len() {
        return Err(Error::LengthMismatch {
            expected: traj.len(),
            got: pw.p.len(),
        });
    }
    pw.validate(cfg)?;
    let dt = cfg.delta_t();
    Ok(traj
        .q
        .iter()
        .zip(&pw.p)
        .map(|(&q, &p)| rate_per_slot(q, p, cfg))
        .sum::<f64>()
        * dt)
}

/// Transmit-chain energy `(1/η)·Σ p[n]·δt` in joules.
pub fn comm_energy(pw: &PowerProfile, cfg: &ScenarioConfig) -> f64 {
    pw.p.iter().sum::<f64>() * cfg.delta_t() / cfg.eta
}

/// Laser energy (J) harvested during one slot at position `q`.
///
/// The beam travels the slant distance `d_b = √(‖q‖² + H²)` from the laser
/// at the origin, is attenuated by `exp(−α·d_b)`, and is spread over a disc
/// of diameter `D + d_b·Δθ`.
#[inline]
pub fn harvest_per_slot(q: [f64; 2], cfg: &ScenarioConfig) -> f64 {
    let d_b = (vec2::norm_sq(q) + cfg.altitude * cfg.altitude).sqrt();
    let spread = cfg.beam_d + d_b * cfg.delta_theta;
    cfg.delta_t() * cfg.laser_c * cfg.phi * (-cfg.alpha * d_b).exp() / (spread * spread)
}

/// Gradient of [`harvest_per_slot`] with respect to the position.
#[inline]
pub fn harvest_grad_q(q: [f64; 2], cfg: &ScenarioConfig) -> [f64; 2] {
    let zeta = vec2::norm_sq(q) + cfg.altitude * cfg.altitude;
    let dh_dzeta = harvest_zeta_slope(zeta, cfg);
    vec2::scale(q, 2.0 * dh_dzeta)
}

/// Per-slot harvested energy (J) as a function of the squared slant
/// distance `ζ = ‖q‖² + H²`.
#[inline]
pub(crate) fn harvest_zeta_value(zeta: f64, cfg: &ScenarioConfig) -> f64 {
    let d_b = zeta.sqrt();
    let spread = cfg.beam_d + d_b * cfg.delta_theta;
    cfg.delta_t() * cfg.laser_c * cfg.phi * (-cfg.alpha * d_b).exp() / (spread * spread)
}

/// Derivative of the per-slot harvested energy with respect to the squared
/// slant distance `ζ = ‖q‖² + H²`. Negative: moving away from the laser
/// always loses energy.
#[inline]
pub(crate) fn harvest_zeta_slope(zeta: f64, cfg: &ScenarioConfig) -> f64 {
    let d_b = zeta.sqrt();
    let spread = cfg.beam_d + d_b * cfg.delta_theta;
    let value = cfg.delta_t() * cfg.laser_c * cfg.phi * (-cfg.alpha * d_b).exp()
        / (spread * spread);
    // d/dζ = value · d/dζ [ −α·√ζ − 2·ln(D + √ζ·Δθ) ]
    value * (-(cfg.alpha + 2.0 * cfg.delta_theta / spread) / (2.0 * d_b))
}

/// Propulsion power (W) needed to fly velocity `v` with acceleration `a`.
///
/// `c1‖v‖³` is parasitic drag, and the `c2/‖v‖` term models induced drag
/// including the load-factor increase from the acceleration component
/// orthogonal to the velocity. Requires `‖v‖ > 0`.
#[inline]
pub fn propulsion_power_slot(v: [f64; 2], a: [f64; 2], cfg: &ScenarioConfig) -> f64 {
    let u = vec2::norm_sq(v);
    let s = u.sqrt();
    let w = vec2::dot(a, v);
    let ortho = vec2::norm_sq(a) - w * w / u;
    cfg.c1 * s * s * s + (cfg.c2 / s) * (1.0 + ortho / (cfg.gravity * cfg.gravity))
}

/// Gradient of [`propulsion_power_slot`] with respect to `(v, a)`.
pub fn propulsion_power_grad(
    v: [f64; 2],
    a: [f64; 2],
    cfg: &ScenarioConfig,
) -> ([f64; 2], [f64; 2]) {
    let u = vec2::norm_sq(v);
    let s = u.sqrt();
    let w = vec2::dot(a, v);
    let aa = vec2::norm_sq(a);
    let g2 = cfg.gravity * cfg.gravity;
    let bracket = 1.0 + (aa - w * w / u) / g2;

    // ∂/∂v: 3·c1·s·v − c2·v/s³·bracket − (c2/(s·g²))·(2w·a/u − 2w²·v/u²)
    let mut grad_v = vec2::scale(v, 3.0 * cfg.c1 * s);
    grad_v = vec2::add(grad_v, vec2::scale(v, -cfg.c2 * bracket / (s * s * s)));
    let inner = vec2::sub(
        vec2::scale(a, 2.0 * w / u),
        vec2::scale(v, 2.0 * w * w / (u * u)),
    );
    grad_v = vec2::add(grad_v, vec2::scale(inner, -cfg.c2 / (s * g2)));

    // ∂/∂a: (c2/(s·g²))·(2a − 2w·v/u)
    let grad_a = vec2::scale(
        vec2::sub(vec2::scale(a, 2.0), vec2::scale(v, 2.0 * w / u)),
        cfg.c2 / (s * g2),
    );
    (grad_v, grad_a)
}

/// Propulsion energy of a whole trajectory, split into its pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct PropulsionEnergy {
    /// Per-slot propulsion energy (J), `δt · power[n]`.
    pub per_slot: Vec<f64>,
    /// Kinetic-energy change `½·m·(‖v[N]‖² − ‖v[1]‖²)` (J).
    pub kinetic_delta: f64,
    /// `Σ per_slot + kinetic_delta` (J).
    pub total: f64,
}

/// Total propulsion energy over the horizon. Fails with
/// [`Error::SpeedBelowMinimum`] on the first slot whose airspeed is below
/// `V_min`, where the drag model stops being meaningful.
pub fn propulsion_energy(traj: &Trajectory, cfg: &ScenarioConfig) -> Result<PropulsionEnergy> {
    let dt = cfg.delta_t();
    let mut per_slot = Vec::with_capacity(traj.len());
    for n in 0..traj.len() {
        let speed = vec2::norm(traj.v[n]);
        if speed < cfg.v_min * (1.0 - CAP_SLACK) {
            return Err(Error::SpeedBelowMinimum {
                slot: n + 1,
                speed,
            });
        }
        per_slot.push(dt * propulsion_power_slot(traj.v[n], traj.a[n], cfg));
    }
    let first = vec2::norm_sq(traj.v[0]);
    let last = vec2::norm_sq(traj.v[traj.len() - 1]);
    let kinetic_delta = 0.5 * cfg.mass * (last - first);
    let total = per_slot.iter().sum::<f64>() + kinetic_delta;
    Ok(PropulsionEnergy {
        per_slot,
        kinetic_delta,
        total,
    })
}

/// Audit the full energy balance of a (trajectory, power) pair.
///
/// The pair is feasible iff `residual ≤ 0`: every joule spent on propulsion
/// and transmission must be covered by harvested laser energy.
pub fn energy_feasibility(
    traj: &Trajectory,
    pw: &PowerProfile,
    cfg: &ScenarioConfig,
) -> Result<EnergyReport> {
    if traj.len() != pw.p.len() {
        return Err(Error::LengthMismatch {
            expected: traj.len(),
            got: pw.p.len(),
        });
    }
    pw.validate(cfg)?;
    let prop = propulsion_energy(traj, cfg)?;
    let harvest: Vec<f64> = traj.q.iter().map(|&q| harvest_per_slot(q, cfg)).collect();
    let total_harvest = harvest.iter().sum::<f64>();
    let total_comm = comm_energy(pw, cfg);
    let total_propulsion = prop.total;
    Ok(EnergyReport {
        harvest,
        propulsion: prop.per_slot,
        total_harvest,
        total_propulsion,
        kinetic_delta: prop.kinetic_delta,
        total_comm,
        residual: total_comm + total_propulsion - total_harvest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> ScenarioConfig {
        ScenarioConfig::default()
    }

    #[test]
    fn snr_conversion_matches_definition() {
        assert!((snr_db_to_linear(20.0) - 100.0).abs() < 1e-9);
        assert!((snr_db_to_linear(0.0) - 1.0).abs() < 1e-12);
        assert!((snr_db_to_linear(-10.0) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn rate_above_station_matches_hand_value() {
        // Directly above the station: d² = H² = 10⁴, p·γ = 10³,
        // log2(1 + 0.1) = 0.13750352...
        let c = cfg();
        let r = rate_per_slot([500.0, 0.0], 10.0, &c);
        assert!((r - 0.137_503_52).abs() < 1e-6, "r = {r}");
    }

    #[test]
    fn rate_above_laser_matches_hand_value() {
        // Above the laser: d² = 500² + 100² = 2.6e5 → log2(1 + 1000/2.6e5).
        let c = cfg();
        let r = rate_per_slot([0.0, 0.0], 10.0, &c);
        let expected = (1000.0f64 / 260_000.0).ln_1p() / LN_2;
        assert!((r - expected).abs() < 1e-15);
        assert!((r - 0.005_538_0).abs() < 1e-5, "r = {r}");
    }

    #[test]
    fn harvest_above_laser_matches_hand_value() {
        // Slant distance 100 m, δt = 1: 2.4·e^(−1e−4)/(0.1034)² = 224.4546 J.
        let mut c = cfg();
        c.horizon = 200.0; // δt = 1 with 200 slots
        let h = harvest_per_slot([0.0, 0.0], &c);
        assert!((h - 224.4546).abs() < 1e-3, "h = {h}");
    }

    #[test]
    fn straight_flight_power_matches_hand_value() {
        // Level flight at 30 m/s: c1·27000 + 2250/30 = 25.002 + 75 = 100.002 W.
        let c = cfg();
        let p = propulsion_power_slot([30.0, 0.0], [0.0, 0.0], &c);
        assert!((p - 100.002).abs() < 1e-3, "p = {p}");
    }

    #[test]
    fn circular_flight_power_matches_closed_form() {
        // Coordinated turn: centripetal acceleration V²/r orthogonal to v
        // reduces to (c1 + c2/(g²r²))·V³ + c2/V.
        let c = cfg();
        let (vmag, r) = (21.89, 100.0);
        let p = propulsion_power_slot([vmag, 0.0], [0.0, vmag * vmag / r], &c);
        let g2r2 = c.gravity * c.gravity * r * r;
        let closed = (c.c1 + c.c2 / g2r2) * vmag * vmag * vmag + c.c2 / vmag;
        assert!((p - closed).abs() < 1e-9, "p = {p}, closed = {closed}");
        assert!((p - 137.07).abs() < 0.05, "p = {p}");
    }

    #[test]
    fn rollout_constant_velocity_matches_hand_values() {
        let t = Trajectory::rollout([0.0, 0.0], [30.0, 0.0], &[[0.0, 0.0]; 4], 0.5);
        let expected = [[0.0, 0.0], [15.0, 0.0], [30.0, 0.0], [45.0, 0.0]];
        for (q, e) in t.q.iter().zip(expected.iter()) {
            assert_eq!(q, e);
        }
    }

    #[test]
    fn validate_rejects_inconsistent_positions() {
        let c = ScenarioConfig {
            slots: 4,
            horizon: 2.0,
            ..cfg()
        };
        let mut t = Trajectory::rollout([0.0, 0.0], [30.0, 0.0], &[[0.0, 0.0]; 4], 0.5);
        t.q[2][0] += 1e-6;
        let err = t.validate(&c).unwrap_err();
        match err {
            Error::Kinematics { slot, .. } => assert!(slot == 2 || slot == 3),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn sum_throughput_two_identical_slots() {
        let c = ScenarioConfig {
            slots: 2,
            horizon: 1.0,
            ..cfg()
        };
        let t = Trajectory {
            q: vec![[500.0, 0.0]; 2],
            v: vec![[30.0, 0.0]; 2],
            a: vec![[0.0, 0.0]; 2],
        };
        let pw = PowerProfile::constant(10.0, 2);
        let r = sum_throughput(&t, &pw, &c).unwrap();
        assert!((r - 0.137_503_52).abs() < 1e-6);
    }

    #[test]
    fn comm_energy_scales_with_eta() {
        let c = ScenarioConfig {
            slots: 4,
            horizon: 2.0,
            eta: 0.5,
            ..cfg()
        };
        let pw = PowerProfile::constant(10.0, 4);
        // Σ p·δt = 20 J transmitted → 40 J drawn at η = 0.5.
        assert!((comm_energy(&pw, &c) - 40.0).abs() < 1e-12);
    }

    #[test]
    fn energy_report_components_add_up() {
        let c = ScenarioConfig {
            slots: 8,
            horizon: 4.0,
            ..cfg()
        };
        let t = Trajectory::rollout([-60.0, 0.0], [30.0, 0.0], &[[0.0, 0.0]; 8], 0.5);
        let pw = PowerProfile::constant(5.0, 8);
        let rep = energy_feasibility(&t, &pw, &c).unwrap();
        let prop_sum: f64 = rep.propulsion.iter().sum();
        assert_eq!(
            rep.residual,
            rep.total_comm + rep.total_propulsion - rep.total_harvest
        );
        assert!((rep.total_propulsion - (prop_sum + rep.kinetic_delta)).abs() < 1e-12);
        // Straight pass near the laser at the minimum-power speed harvests
        // more than the ~100 W propulsion draw → feasible even with 5 W Tx.
        assert!(rep.residual < 0.0, "residual = {}", rep.residual);
    }

    #[test]
    fn propulsion_rejects_slow_slots() {
        let c = ScenarioConfig {
            slots: 3,
            horizon: 1.5,
            ..cfg()
        };
        let t = Trajectory::rollout([0.0, 0.0], [1.0, 0.0], &[[0.0, 0.0]; 3], 0.5);
        match propulsion_energy(&t, &c) {
            Err(Error::SpeedBelowMinimum { slot: 1, .. }) => {}
            other => panic!("unexpected result {other:?}"),
        }
    }

    #[test]
    fn residual_is_continuous_in_power() {
        // Nudging one slot's power by ε moves the residual by ε·δt/η.
        let c = ScenarioConfig {
            slots: 8,
            horizon: 4.0,
            ..cfg()
        };
        let t = Trajectory::rollout([-60.0, 0.0], [30.0, 0.0], &[[0.0, 0.0]; 8], 0.5);
        let mut pw = PowerProfile::constant(5.0, 8);
        let r0 = energy_feasibility(&t, &pw, &c).unwrap().residual;
        let eps = 1e-4;
        pw.p[3] += eps;
        let r1 = energy_feasibility(&t, &pw, &c).unwrap().residual;
        let expected = eps * c.delta_t() / c.eta;
        assert!(((r1 - r0) - expected).abs() < 1e-9);
    }

    fn central_diff<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn gradients_match_finite_differences() {
        let c = cfg();
        let q = [120.0, -80.0];
        let v = [18.0, 7.0];
        let a = [1.5, -2.0];
        let p = 12.0;
        let h = 1e-5;

        let g = rate_grad_q(q, p, &c);
        for i in 0..2 {
            let fd = central_diff(
                |x| {
                    let mut qq = q;
                    qq[i] = x;
                    rate_per_slot(qq, p, &c)
                },
                q[i],
                h * q[i].abs().max(1.0),
            );
            assert!((g[i] - fd).abs() <= 1e-6 * fd.abs().max(1e-9), "{} vs {fd}", g[i]);
        }

        let g = harvest_grad_q(q, &c);
        for i in 0..2 {
            let fd = central_diff(
                |x| {
                    let mut qq = q;
                    qq[i] = x;
                    harvest_per_slot(qq, &c)
                },
                q[i],
                h * q[i].abs().max(1.0),
            );
            assert!((g[i] - fd).abs() <= 1e-6 * fd.abs().max(1e-9));
        }

        let (gv, ga) = propulsion_power_grad(v, a, &c);
        for i in 0..2 {
            let fd = central_diff(
                |x| {
                    let mut vv = v;
                    vv[i] = x;
                    propulsion_power_slot(vv, a, &c)
                },
                v[i],
                h * v[i].abs().max(1.0),
            );
            assert!((gv[i] - fd).abs() <= 1e-5 * fd.abs().max(1.0), "{} vs {fd}", gv[i]);
            let fd = central_diff(
                |x| {
                    let mut aa = a;
                    aa[i] = x;
                    propulsion_power_slot(v, aa, &c)
                },
                a[i],
                h * a[i].abs().max(1.0),
            );
            assert!((ga[i] - fd).abs() <= 1e-5 * fd.abs().max(1.0));
        }
    }

    const FULL_CONFIG: &str = "\
# nominal benchmark scenario
L = 500
H = 100          # altitude, meters
T = 100
N = 200
gamma_db = 20
eta = 1.0
c1 = 9.26e-4
c2 = 2250
g = 9.8
m = 10
phi = 600
C_laser = 0.004
alpha_atten = 1e-6
D_beam = 0.1
delta_theta = 3.4e-5
V_max = 60
a_max = 6
V_min = 3
";

    #[test]
    fn config_parse_fills_every_field() {
        let parsed = ScenarioConfig::from_key_values(FULL_CONFIG).unwrap();
        let mut expected = ScenarioConfig::default();
        expected.gamma = snr_db_to_linear(20.0);
        assert_eq!(parsed, expected);
    }

    #[test]
    fn config_defaults_cover_optional_keys() {
        let minimal = "\
L=500\nH=100\nT=100\ngamma_db=20\neta=1\nc1=9.26e-4\nc2=2250\nphi=600\n\
C_laser=0.004\nalpha_atten=1e-6\nD_beam=0.1\ndelta_theta=3.4e-5\nV_max=60\na_max=6\n";
        let parsed = ScenarioConfig::from_key_values(minimal).unwrap();
        assert_eq!(parsed.slots, 200);
        assert_eq!(parsed.gravity, 9.8);
        assert_eq!(parsed.mass, 10.0);
        assert_eq!(parsed.v_min, 3.0);
        assert!(!parsed.periodic_velocity);
        assert!(parsed.pin_start.is_none());
    }

    #[test]
    fn config_converts_snr_from_decibels() {
        let parsed = ScenarioConfig::from_key_values(FULL_CONFIG).unwrap();
        assert!((parsed.gamma - 100.0).abs() < 1e-9);
    }

    #[test]
    fn config_missing_required_key_names_it() {
        let text = FULL_CONFIG
            .lines()
            .filter(|l| !l.starts_with("H "))
            .collect::<Vec<_>>()
            .join("\n");
        match ScenarioConfig::from_key_values(&text) {
            Err(Error::InvalidConfig { field: "H", .. }) => {}
            other => panic!("expected a missing-H error, got {other:?}"),
        }
    }

    #[test]
    fn config_unknown_key_reports_the_line() {
        let text = "L = 500\nH = 100\nwingspan = 3\n";
        match ScenarioConfig::from_key_values(text) {
            Err(Error::Parse { line: 3, message, .. }) => {
                assert!(message.contains("wingspan"), "{message}");
            }
            other => panic!("expected a line-3 parse error, got {other:?}"),
        }
    }

    #[test]
    fn config_duplicate_key_rejected() {
        let text = alloc::format!("{FULL_CONFIG}T = 50\n");
        match ScenarioConfig::from_key_values(&text) {
            Err(Error::Parse { message, .. }) => {
                assert!(message.contains('T'), "{message}");
            }
            other => panic!("expected a duplicate-key error, got {other:?}"),
        }
    }

    #[test]
    fn config_pin_requires_both_coordinates() {
        let text = alloc::format!("{FULL_CONFIG}pin_start_x = 10\n");
        match ScenarioConfig::from_key_values(&text) {
            Err(Error::InvalidConfig { field: "pin_start_y", .. }) => {}
            other => panic!("expected a pin-pairing error, got {other:?}"),
        }
        let text = alloc::format!("{FULL_CONFIG}pin_start_x = 10\npin_start_y = -4\n");
        let parsed = ScenarioConfig::from_key_values(&text).unwrap();
        assert_eq!(parsed.pin_start, Some([10.0, -4.0]));
    }

    #[test]
    fn config_bad_number_reports_key_and_line() {
        let text = "L = 500\nH = tall\n";
        match ScenarioConfig::from_key_values(text) {
            Err(Error::Parse { line: 2, message, .. }) => {
                assert!(message.contains('H') && message.contains("tall"), "{message}");
            }
            other => panic!("expected a line-2 parse error, got {other:?}"),
        }
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let c = cfg();
        let traj = Trajectory {
            q: alloc::vec![[1.0 / 3.0, -2.7e-13], [5432.1, core::f64::consts::PI]],
            v: alloc::vec![[-0.1, 17.0 / 7.0], [1e-300, 2.5e4]],
            a: alloc::vec![[0.0, -6.0], [f64::MIN_POSITIVE, 1.0]],
        };
        let pw = PowerProfile {
            p: alloc::vec![123.456_789_012_345_67, 0.0],
        };
        let text = trajectory_to_csv(&traj, &pw, &c).unwrap();
        let (traj2, pw2) = trajectory_from_csv(&text).unwrap();
        for n in 0..2 {
            for i in 0..2 {
                assert_eq!(traj.q[n][i].to_bits(), traj2.q[n][i].to_bits());
                assert_eq!(traj.v[n][i].to_bits(), traj2.v[n][i].to_bits());
                assert_eq!(traj.a[n][i].to_bits(), traj2.a[n][i].to_bits());
            }
            assert_eq!(pw.p[n].to_bits(), pw2.p[n].to_bits());
        }
    }

    #[test]
    fn csv_extra_columns_are_ignored_on_read() {
        let text = "n,t,x,y,vx,vy,ax,ay,p,rate\n1,0,1,2,3,4,5,6,7,0.5\n";
        let (traj, pw) = trajectory_from_csv(text).unwrap();
        assert_eq!(traj.q[0], [1.0, 2.0]);
        assert_eq!(pw.p[0], 7.0);
    }

    #[test]
    fn csv_header_mismatch_rejected() {
        let text = "slot,x,y\n1,0,0\n";
        match trajectory_from_csv(text) {
            Err(Error::Parse { line: 1, .. }) => {}
            other => panic!("expected a header error, got {other:?}"),
        }
    }

    #[test]
    fn csv_empty_input_rejected() {
        assert!(trajectory_from_csv("").is_err());
        assert!(trajectory_from_csv("n,t,x,y,vx,vy,ax,ay,p\n").is_err());
    }

    #[test]
    fn csv_out_of_order_slot_rejected() {
        let text = "n,t,x,y,vx,vy,ax,ay,p\n2,0,0,0,0,0,0,0,0\n";
        match trajectory_from_csv(text) {
            Err(Error::Parse { line: 2, message, .. }) => {
                assert!(message.contains("out of order"), "{message}");
            }
            other => panic!("expected an ordering error, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn rollout_always_validates_exactly(
            q0x in -500.0f64..500.0, q0y in -500.0f64..500.0,
            vx in 10.0f64..40.0, vy in -3.0f64..3.0,
            ax in -0.5f64..0.5, ay in -0.5f64..0.5,
        ) {
            // Mild accelerations keep speeds inside [V_min, V_max] over the
            // short horizon, so validate() must pass with zero slack.
            let c = ScenarioConfig { slots: 16, horizon: 8.0, ..cfg() };
            let t = Trajectory::rollout([q0x, q0y], [vx, vy], &[[ax, ay]; 16], c.delta_t());
            prop_assert!(t.validate(&c).is_ok());
        }

        #[test]
        fn harvest_decreases_with_distance(x in 0.0f64..2000.0, dx in 1.0f64..100.0) {
            let c = cfg();
            prop_assert!(
                harvest_per_slot([x, 0.0], &c) > harvest_per_slot([x + dx, 0.0], &c)
            );
        }

        #[test]
        fn rate_decreases_with_distance_from_station(
            x in 0.0f64..2000.0, dx in 1.0f64..100.0, p in 0.1f64..500.0,
        ) {
            let c = cfg();
            let near = rate_per_slot([500.0 + x, 0.0], p, &c);
            let far = rate_per_slot([500.0 + x + dx, 0.0], p, &c);
            prop_assert!(near > far);
        }

        #[test]
        fn acceleration_never_cheapens_flight(
            vx in 4.0f64..50.0, vy in -20.0f64..20.0,
            ax in -6.0f64..6.0, ay in -6.0f64..6.0,
        ) {
            // The load-factor term is a nonnegative quadratic form, so any
            // acceleration costs at least as much as level flight.
            let c = cfg();
            let v = [vx, vy];
            prop_assert!(
                propulsion_power_slot(v, [ax, ay], &c)
                    >= propulsion_power_slot(v, [0.0, 0.0], &c) - 1e-9
            );
        }
    }
}
