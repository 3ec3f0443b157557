//! Subcommand implementations: scenario loading, artifact writers, the
//! exit-code mapping, and the sweep scheduler.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, OnceLock};
use std::time::Instant;

use beamplan_core::doublecircle;
use beamplan_core::model::{self, EnergyReport, PowerProfile, ScenarioConfig, Trajectory};
use beamplan_core::scp::{self, OptimizationTrace, Phase, ScpOptions};
use beamplan_core::Error as CoreError;

use crate::{InitKind, SweepVar};

/// Progress lines on stderr, enabled by the `BEAMPLAN_LOG` environment
/// variable (any value other than empty, `0`, or `off`).
macro_rules! vlog {
    ($($arg:tt)*) => {
        if verbose() {
            eprintln!($($arg)*);
        }
    };
}

fn verbose() -> bool {
    static FLAG: OnceLock<bool> = OnceLock::new();
    *FLAG.get_or_init(|| {
        std::env::var("BEAMPLAN_LOG")
            .map(|v| !(v.is_empty() || v == "0" || v.eq_ignore_ascii_case("off")))
            .unwrap_or(false)
    })
}

/// A command failure carrying its exit-code class.
pub enum Failure {
    /// Planner error propagated from the core library.
    Core(CoreError),
    /// Filesystem problem reading or writing an artifact.
    Io {
        /// File involved.
        path: PathBuf,
        /// Underlying error.
        source: std::io::Error,
    },
    /// Command-line input rejected before any planning ran.
    Input(String),
    /// The scenario cannot fund the requested mission.
    Infeasible(String),
}

impl Failure {
    /// Stable contract: 1 = input error, 2 = infeasible scenario,
    /// 3 = solver failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Core(err) => classify(err),
            Failure::Io { .. } | Failure::Input(_) => 1,
            Failure::Infeasible(_) => 2,
        }
    }
}

fn classify(err: &CoreError) -> u8 {
    match err {
        CoreError::InvalidConfig { .. }
        | CoreError::Parse { .. }
        | CoreError::LengthMismatch { .. }
        | CoreError::NegativePower { .. }
        | CoreError::SpeedBelowMinimum { .. }
        | CoreError::Kinematics { .. }
        | CoreError::CapViolation { .. } => 1,
        CoreError::Geometry { .. } | CoreError::HorizonTooShort | CoreError::Infeasible { .. } => 2,
        CoreError::InfeasibleStart { .. } | CoreError::SubproblemSolve { .. } => 3,
        CoreError::Aborted { cause, .. } => classify(cause),
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Core(err) => write!(f, "{err}"),
            Failure::Io { path, source } => write!(f, "{}: {source}", path.display()),
            Failure::Input(msg) | Failure::Infeasible(msg) => f.write_str(msg),
        }
    }
}

impl From<CoreError> for Failure {
    fn from(err: CoreError) -> Self {
        Failure::Core(err)
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|source| Failure::Io {
        path: path.into(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|source| Failure::Io {
        path: path.into(),
        source,
    })
}

fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|source| Failure::Io {
        path: dir.into(),
        source,
    })
}

fn load_config(path: &Path) -> Result<ScenarioConfig, Failure> {
    let text = read_text(path)?;
    Ok(ScenarioConfig::from_key_values(&text)?)
}

fn scenario_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into())
}

/// One-record account of a finished planning run, written as `summary.txt`.
pub struct RunSummary {
    /// Scenario identifier (config file stem).
    pub scenario: String,
    /// Planning method: `single`, `double`, or `joint`.
    pub method: &'static str,
    /// Total downlink throughput (bits/Hz).
    pub r_sum: f64,
    /// Total harvested energy (J).
    pub harvest_j: f64,
    /// Total propulsion energy (J).
    pub propulsion_j: f64,
    /// Total transmit-chain energy (J).
    pub comm_j: f64,
    /// Energy audit residual (J); feasible runs are non-positive.
    pub residual_j: f64,
    /// Wall-clock time of the run (s).
    pub wall_time_s: f64,
}

impl RunSummary {
    fn to_text(&self) -> String {
        format!(
            "scenario = {}\nmethod = {}\nR_sum_bits_per_Hz = {:.17e}\n\
             harvest_J = {:.17e}\npropulsion_J = {:.17e}\ncomm_J = {:.17e}\n\
             residual_J = {:.17e}\nwall_time_s = {:.6}\n",
            self.scenario,
            self.method,
            self.r_sum,
            self.harvest_j,
            self.propulsion_j,
            self.comm_j,
            self.residual_j,
            self.wall_time_s,
        )
    }
}

/// `plan-double-circle`: lap-structured tour with constant transmit power.
pub fn plan_double_circle(config: &Path, out_dir: &Path) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    vlog!(
        "scenario `{}`: N = {}, horizon = {} s",
        scenario_id(config),
        cfg.slots,
        cfg.horizon
    );
    let plan = doublecircle::lap_search(&cfg)?;
    if plan.p_const <= 0.0 {
        return Err(Failure::Infeasible(
            "infeasible: net harvested energy ≤ 0".into(),
        ));
    }
    let (traj, pw) = doublecircle::discretize(&plan, &cfg)?;
    let r_sum = model::sum_throughput(&traj, &pw, &cfg)?;

    ensure_dir(out_dir)?;
    let plan_path = out_dir.join("plan.txt");
    let csv_path = out_dir.join("double_circle.csv");
    let plan_text = format!(
        "# two-circle tour; lengths m, speeds m/s, laps dimensionless, times s, power W\n\
         r1 = {:.17e}\nV1 = {:.17e}\nn1 = {:.17e}\n\
         r2 = {:.17e}\nV2 = {:.17e}\nn2 = {:.17e}\n\
         l12 = {:.17e}\na12 = {:.17e}\np_const = {:.17e}\n\
         t1 = {:.17e}\nt12 = {:.17e}\nt2 = {:.17e}\n\
         R_sum = {:.17e}\n",
        plan.r1,
        plan.v1,
        plan.n1,
        plan.r2,
        plan.v2,
        plan.n2,
        plan.l12,
        plan.a12_mag,
        plan.p_const,
        plan.t1,
        plan.t12,
        plan.t2,
        r_sum,
    );
    write_text(&plan_path, &plan_text)?;
    write_text(&csv_path, &model::trajectory_to_csv(&traj, &pw, &cfg)?)?;

    println!(
        "harvest circle: r1 = {:.3} m, V1 = {:.4} m/s, n1 = {:.4} laps",
        plan.r1, plan.v1, plan.n1
    );
    println!(
        "comm circle:    r2 = {:.3} m, V2 = {:.4} m/s, n2 = {:.4} laps",
        plan.r2, plan.v2, plan.n2
    );
    println!("p_const = {:.6} W", plan.p_const);
    println!("R_sum = {:.12} bits/Hz", r_sum);
    println!("wrote {} and {}", plan_path.display(), csv_path.display());
    Ok(())
}

/// `optimize`: alternating trajectory/power optimization from the chosen
/// starting point.
pub fn optimize(
    config: &Path,
    init: InitKind,
    init_file: Option<&Path>,
    out_dir: &Path,
) -> Result<(), Failure> {
    let start = Instant::now();
    let cfg = load_config(config)?;
    let opts = ScpOptions::default();
    vlog!(
        "optimizing `{}` (N = {}) from the {} start",
        scenario_id(config),
        cfg.slots,
        match init {
            InitKind::Double => "double-circle",
            InitKind::Single => "single-circle",
            InitKind::File => "file",
        }
    );
    let result = match init {
        InitKind::Double => scp::alternate(&cfg, &opts),
        InitKind::Single => scp::single_circle_baseline(&cfg)
            .and_then(|(traj, pw)| scp::alternate_from(traj, pw, &cfg, &opts)),
        InitKind::File => {
            let path = init_file
                .ok_or_else(|| Failure::Input("--init=file requires --init-file".into()))?;
            let (traj, pw) = model::trajectory_from_csv(&read_text(path)?)?;
            traj.validate(&cfg)?;
            pw.validate(&cfg)?;
            scp::alternate_from(traj, pw, &cfg, &opts)
        }
    };

    ensure_dir(out_dir)?;
    let trace_path = out_dir.join("trace.csv");
    let outcome = match result {
        Ok(outcome) => outcome,
        Err(CoreError::Aborted { cause, trace }) => {
            write_text(&trace_path, &trace_csv(&trace))?;
            eprintln!(
                "solver failed; partial trace written to {}",
                trace_path.display()
            );
            return Err(Failure::Core(*cause));
        }
        Err(err) => return Err(err.into()),
    };

    let report = model::energy_feasibility(&outcome.trajectory, &outcome.power, &cfg)?;
    let summary = RunSummary {
        scenario: scenario_id(config),
        method: "joint",
        r_sum: outcome.throughput,
        harvest_j: report.total_harvest,
        propulsion_j: report.total_propulsion,
        comm_j: report.total_comm,
        residual_j: report.residual,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    write_text(
        &out_dir.join("trajectory.csv"),
        &model::trajectory_to_csv(&outcome.trajectory, &outcome.power, &cfg)?,
    )?;
    write_text(&trace_path, &trace_csv(&outcome.trace))?;
    write_text(&out_dir.join("summary.txt"), &summary.to_text())?;

    println!(
        "R_sum = {:.12} bits/Hz after {} outer rounds ({} candidates evaluated)",
        outcome.throughput,
        outcome.outer_iterations,
        outcome.trace.len()
    );
    println!(
        "wrote trajectory.csv, trace.csv, summary.txt in {}",
        out_dir.display()
    );
    Ok(())
}

fn trace_csv(trace: &OptimizationTrace) -> String {
    use std::fmt::Write;
    let mut out =
        String::from("iteration,phase,objective,energy_residual,rho,kkt_residual,accepted\n");
    for rec in &trace.records {
        let phase = match rec.phase {
            Phase::Power => "power",
            Phase::Trajectory => "trajectory",
        };
        let _ = writeln!(
            out,
            "{},{},{:.17e},{:.17e},{:.17e},{:.17e},{}",
            rec.iteration, phase, rec.objective, rec.energy_residual, rec.rho, rec.kkt_residual,
            rec.accepted
        );
    }
    out
}

/// `audit`: independent energy-balance check of a trajectory file.
pub fn audit(trajectory: &Path, config: &Path, annotate: Option<&Path>) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let (traj, pw) = model::trajectory_from_csv(&read_text(trajectory)?)?;
    traj.validate(&cfg)?;
    let report = model::energy_feasibility(&traj, &pw, &cfg)?;

    println!("slots = {}", traj.len());
    println!("harvest_J = {:.12e}", report.total_harvest);
    println!(
        "propulsion_J = {:.12e} (kinetic_delta_J = {:.12e})",
        report.total_propulsion, report.kinetic_delta
    );
    println!("comm_J = {:.12e}", report.total_comm);
    println!("residual_J = {:.12e}", report.residual);

    if let Some(path) = annotate {
        write_text(path, &annotated_csv(&traj, &pw, &cfg, &report))?;
        println!("annotated copy written to {}", path.display());
    }

    if report.residual <= 0.0 {
        println!("verdict: feasible");
        Ok(())
    } else {
        println!("verdict: INFEASIBLE (deficit {:.6e} J)", report.residual);
        print_worst_offenders(&pw, &cfg, &report);
        Err(Failure::Infeasible(format!(
            "infeasible: energy deficit {:.6e} J",
            report.residual
        )))
    }
}

/// Slots ranked by net energy drain (propulsion + transmit chain − harvest).
fn print_worst_offenders(pw: &PowerProfile, cfg: &ScenarioConfig, report: &EnergyReport) {
    let dt = cfg.delta_t();
    let mut drains: Vec<(usize, f64, f64)> = (0..pw.p.len())
        .map(|n| {
            let comm = pw.p[n] * dt / cfg.eta;
            (n, report.propulsion[n] + comm - report.harvest[n], comm)
        })
        .collect();
    drains.sort_by(|a, b| b.1.total_cmp(&a.1));
    println!("worst slots by net energy drain:");
    for &(n, drain, comm) in drains.iter().take(5) {
        println!(
            "  slot {}: net {:+.3e} J (harvest {:.3e} J, propulsion {:.3e} J, comm {:.3e} J)",
            n + 1,
            drain,
            report.harvest[n],
            report.propulsion[n],
            comm
        );
    }
}

fn annotated_csv(
    traj: &Trajectory,
    pw: &PowerProfile,
    cfg: &ScenarioConfig,
    report: &EnergyReport,
) -> String {
    use std::fmt::Write;
    let dt = cfg.delta_t();
    let mut out = String::from("n,t,x,y,vx,vy,ax,ay,p,rate,harvest_J,propulsion_J\n");
    for n in 0..traj.len() {
        let rate = model::rate_per_slot(traj.q[n], pw.p[n], cfg);
        let _ = writeln!(
            out,
            "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            n + 1,
            n as f64 * dt,
            traj.q[n][0],
            traj.q[n][1],
            traj.v[n][0],
            traj.v[n][1],
            traj.a[n][0],
            traj.a[n][1],
            pw.p[n],
            rate,
            report.harvest[n],
            report.propulsion[n],
        );
    }
    out
}

/// `sweep`: R_sum of all three methods per swept value, assembled into a
/// plotting-friendly table. Failed cells are recorded as `NA`.
pub fn sweep(
    config: &Path,
    var: SweepVar,
    values: &[f64],
    jobs: usize,
    seed: u64,
    out: Option<&Path>,
) -> Result<(), Failure> {
    if values.is_empty() {
        return Err(Failure::Input("sweep needs at least one value".into()));
    }
    if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v <= 0.0) {
        return Err(Failure::Input(format!(
            "sweep values must be positive, got {bad}"
        )));
    }
    if jobs == 0 {
        return Err(Failure::Input("--jobs must be at least 1".into()));
    }
    let base = load_config(config)?;

    let n_tasks = values.len() * 3;
    let mut results = vec![None::<f64>; n_tasks];
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, Option<f64>)>();
    std::thread::scope(|s| {
        let next = &next;
        let base = &base;
        for _ in 0..jobs.min(n_tasks) {
            let tx = tx.clone();
            s.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n_tasks {
                    break;
                }
                let (vi, mi) = (i / 3, i % 3);
                let mut cfg = base.clone();
                match var {
                    SweepVar::T => cfg.horizon = values[vi],
                    SweepVar::Phi => cfg.phi = values[vi],
                }
                let cell = run_cell(&cfg, mi);
                vlog!(
                    "cell {} = {}, method {}: {}",
                    var_name(var),
                    values[vi],
                    METHOD_NAMES[mi],
                    cell.map(|r| format!("{r:.6}")).unwrap_or_else(|| "NA".into())
                );
                if tx.send((i, cell)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        // Single writer: the owning thread alone assembles the table.
        for (i, cell) in rx {
            results[i] = cell;
        }
    });

    let mut table = format!("# seed = {seed}\n{},single,double,joint\n", var_name(var));
    for (vi, &value) in values.iter().enumerate() {
        table.push_str(&format!("{value}"));
        for cell in &results[vi * 3..vi * 3 + 3] {
            match cell {
                Some(r) => table.push_str(&format!(",{r:.12e}")),
                None => table.push_str(",NA"),
            }
        }
        table.push('\n');
    }
    match out {
        Some(path) => {
            write_text(path, &table)?;
            println!("wrote sweep table to {}", path.display());
        }
        None => print!("{table}"),
    }
    Ok(())
}

const METHOD_NAMES: [&str; 3] = ["single", "double", "joint"];

fn var_name(var: SweepVar) -> &'static str {
    match var {
        SweepVar::T => "T",
        SweepVar::Phi => "phi",
    }
}

/// One sweep cell; `None` marks a failure (recorded as `NA`).
fn run_cell(cfg: &ScenarioConfig, method: usize) -> Option<f64> {
    if cfg.validate().is_err() {
        return None;
    }
    match method {
        0 => scp::single_circle_baseline(cfg)
            .and_then(|(traj, pw)| model::sum_throughput(&traj, &pw, cfg))
            .ok(),
        1 => match doublecircle::lap_search(cfg) {
            Ok(plan) if plan.p_const > 0.0 => doublecircle::discretize(&plan, cfg)
                .and_then(|(traj, pw)| model::sum_throughput(&traj, &pw, cfg))
                .ok(),
            _ => None,
        },
        _ => scp::alternate(cfg, &ScpOptions::default())
            .map(|outcome| outcome.throughput)
            .ok(),
    }
}
