//! End-to-end tests of the binary: exit codes, file artifacts, and the
//! documented failure messages, all driven through `std::process::Command`.

use std::path::Path;
use std::process::Command;

use tempfile::TempDir;

fn beamplan() -> Command {
    Command::new(env!("CARGO_BIN_EXE_beamplan"))
}

/// Run a prepared command, returning (exit code, stdout, stderr).
fn run(cmd: &mut Command) -> (i32, String, String) {
    let out = cmd.output().expect("binary should spawn");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn nominal_config(horizon: f64, slots: usize) -> String {
    format!(
        "L = 500\nH = 100\nT = {horizon}\nN = {slots}\ngamma_db = 20\neta = 1\n\
         c1 = 9.26e-4\nc2 = 2250\ng = 9.8\nm = 10\nphi = 600\nC_laser = 0.004\n\
         alpha_atten = 1e-6\nD_beam = 0.1\ndelta_theta = 3.4e-5\nV_max = 60\n\
         a_max = 6\nV_min = 3\n"
    )
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("scenario.cfg");
    std::fs::write(&path, text).unwrap();
    path
}

/// Pull `key = value` out of a plan/summary file.
fn lookup(text: &str, key: &str) -> f64 {
    for line in text.lines() {
        if let Some((k, v)) = line.split_once('=') {
            if k.trim() == key {
                // Values may carry a unit suffix ("26.39 m/s"); parse the
                // leading token.
                return v.split_whitespace().next().unwrap().parse().unwrap();
            }
        }
    }
    panic!("key `{key}` not found in:\n{text}");
}

#[test]
fn plan_reproduces_reference_tour() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &nominal_config(100.0, 200));
    let (code, _, stderr) = run(beamplan()
        .arg("plan-double-circle")
        .arg("--config")
        .arg(&cfg)
        .arg("--out-dir")
        .arg(dir.path()));
    assert_eq!(code, 0, "{stderr}");

    let plan = std::fs::read_to_string(dir.path().join("plan.txt")).unwrap();
    let v1 = lookup(&plan, "V1");
    let n1 = lookup(&plan, "n1");
    assert!((v1 - 26.43).abs() <= 1.0, "V1 = {v1}");
    assert!((0.4..=1.0).contains(&n1), "n1 = {n1}");
    assert!(dir.path().join("double_circle.csv").exists());
}

#[test]
fn zero_laser_power_is_infeasible() {
    let dir = TempDir::new().unwrap();
    let text = nominal_config(100.0, 200).replace("phi = 600", "phi = 0");
    let cfg = write_config(dir.path(), &text);
    let (code, _, stderr) = run(beamplan()
        .arg("plan-double-circle")
        .arg("--config")
        .arg(&cfg)
        .arg("--out-dir")
        .arg(dir.path()));
    assert_eq!(code, 2, "{stderr}");
    assert!(
        stderr.contains("infeasible: net harvested energy ≤ 0"),
        "{stderr}"
    );
}

#[test]
fn missing_required_key_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let text: String = nominal_config(100.0, 200)
        .lines()
        .filter(|l| !l.starts_with("H "))
        .map(|l| format!("{l}\n"))
        .collect();
    let cfg = write_config(dir.path(), &text);
    let (code, _, stderr) = run(beamplan()
        .arg("plan-double-circle")
        .arg("--config")
        .arg(&cfg));
    assert_eq!(code, 1, "{stderr}");
    assert!(stderr.contains("`H`"), "{stderr}");
}

#[test]
fn audit_accepts_plan_output_and_annotates() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &nominal_config(40.0, 64));
    let (code, _, stderr) = run(beamplan()
        .arg("plan-double-circle")
        .arg("--config")
        .arg(&cfg)
        .arg("--out-dir")
        .arg(dir.path()));
    assert_eq!(code, 0, "{stderr}");

    let csv = dir.path().join("double_circle.csv");
    let annotated = dir.path().join("annotated.csv");
    let (code, stdout, stderr) = run(beamplan()
        .arg("audit")
        .arg(&csv)
        .arg("--config")
        .arg(&cfg)
        .arg("--annotate")
        .arg(&annotated));
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("verdict: feasible"), "{stdout}");

    let text = std::fs::read_to_string(&annotated).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(header, "n,t,x,y,vx,vy,ax,ay,p,rate,harvest_J,propulsion_J");
    assert_eq!(text.lines().count(), 65);
}

#[test]
fn audit_detects_a_transmit_power_spike() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &nominal_config(40.0, 64));
    run(beamplan()
        .arg("plan-double-circle")
        .arg("--config")
        .arg(&cfg)
        .arg("--out-dir")
        .arg(dir.path()));
    let csv = dir.path().join("double_circle.csv");

    let (code, stdout, _) = run(beamplan().arg("audit").arg(&csv).arg("--config").arg(&cfg));
    assert_eq!(code, 0);
    let base_residual = lookup(&stdout, "residual_J");

    // Spike the first slot's transmit power by 1e6 W; the audit residual
    // must grow by exactly 1e6·δt/η = 1e6·(40/64) J.
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut fields: Vec<String> = lines[1].split(',').map(String::from).collect();
    let p: f64 = fields[8].parse().unwrap();
    fields[8] = format!("{:.17e}", p + 1e6);
    lines[1] = fields.join(",");
    let edited = dir.path().join("edited.csv");
    std::fs::write(&edited, lines.join("\n")).unwrap();

    let (code, stdout, stderr) = run(beamplan()
        .arg("audit")
        .arg(&edited)
        .arg("--config")
        .arg(&cfg));
    assert_eq!(code, 2, "{stderr}");
    let residual = lookup(&stdout, "residual_J");
    let expected = base_residual + 1e6 * (40.0 / 64.0);
    assert!(
        (residual - expected).abs() <= 1e-4 * expected.abs(),
        "residual {residual} vs expected {expected}"
    );
    assert!(stdout.contains("worst slots"), "{stdout}");
}

#[test]
fn audit_rejects_an_empty_file() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &nominal_config(40.0, 64));
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    let (code, _, stderr) = run(beamplan()
        .arg("audit")
        .arg(&empty)
        .arg("--config")
        .arg(&cfg));
    assert_eq!(code, 1, "{stderr}");
}

#[test]
fn optimize_improves_on_the_tour_and_closes_the_pipeline() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &nominal_config(30.0, 32));
    let plan_dir = dir.path().join("plan");
    let (code, stdout, stderr) = run(beamplan()
        .arg("plan-double-circle")
        .arg("--config")
        .arg(&cfg)
        .arg("--out-dir")
        .arg(&plan_dir));
    assert_eq!(code, 0, "{stderr}");
    let tour_r_sum = lookup(&stdout, "R_sum");

    let opt_dir = dir.path().join("opt");
    let (code, _, stderr) = run(beamplan()
        .arg("optimize")
        .arg("--config")
        .arg(&cfg)
        .arg("--out-dir")
        .arg(&opt_dir));
    assert_eq!(code, 0, "{stderr}");

    let summary = std::fs::read_to_string(opt_dir.join("summary.txt")).unwrap();
    let r_sum = lookup(&summary, "R_sum_bits_per_Hz");
    assert!(r_sum > tour_r_sum, "joint {r_sum} vs tour {tour_r_sum}");
    assert!(lookup(&summary, "residual_J") <= 0.0);

    // The optimizer's own trajectory must re-audit as feasible.
    let (code, stdout, stderr) = run(beamplan()
        .arg("audit")
        .arg(opt_dir.join("trajectory.csv"))
        .arg("--config")
        .arg(&cfg));
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("verdict: feasible"), "{stdout}");

    let trace = std::fs::read_to_string(opt_dir.join("trace.csv")).unwrap();
    assert!(trace
        .lines()
        .next()
        .unwrap()
        .starts_with("iteration,phase,objective"));
    assert!(trace.lines().count() > 1);
}

#[test]
fn file_init_runs_and_rejects_inconsistent_kinematics() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &nominal_config(30.0, 32));
    run(beamplan()
        .arg("plan-double-circle")
        .arg("--config")
        .arg(&cfg)
        .arg("--out-dir")
        .arg(dir.path()));
    let csv = dir.path().join("double_circle.csv");

    let (code, _, stderr) = run(beamplan()
        .arg("optimize")
        .arg("--config")
        .arg(&cfg)
        .arg("--init")
        .arg("file")
        .arg("--init-file")
        .arg(&csv)
        .arg("--out-dir")
        .arg(dir.path().join("from_file")));
    assert_eq!(code, 0, "{stderr}");

    // Shift slot 5's position by 10 m: the recurrence from slot 4 breaks.
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut fields: Vec<String> = lines[5].split(',').map(String::from).collect();
    let x: f64 = fields[2].parse().unwrap();
    fields[2] = format!("{:.17e}", x + 10.0);
    lines[5] = fields.join(",");
    let edited = dir.path().join("broken.csv");
    std::fs::write(&edited, lines.join("\n")).unwrap();

    let (code, _, stderr) = run(beamplan()
        .arg("optimize")
        .arg("--config")
        .arg(&cfg)
        .arg("--init")
        .arg("file")
        .arg("--init-file")
        .arg(&edited)
        .arg("--out-dir")
        .arg(dir.path().join("broken")));
    assert_eq!(code, 1, "{stderr}");
    assert!(stderr.contains("slot 4"), "{stderr}");
}

#[test]
fn csv_round_trips_through_audit_annotation() {
    // Writing and re-reading must preserve every value; the annotated copy
    // keeps the base columns bit-identical, so a text comparison suffices.
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &nominal_config(40.0, 64));
    run(beamplan()
        .arg("plan-double-circle")
        .arg("--config")
        .arg(&cfg)
        .arg("--out-dir")
        .arg(dir.path()));
    let csv = dir.path().join("double_circle.csv");
    let annotated = dir.path().join("annotated.csv");
    run(beamplan()
        .arg("audit")
        .arg(&csv)
        .arg("--config")
        .arg(&cfg)
        .arg("--annotate")
        .arg(&annotated));

    let original = std::fs::read_to_string(&csv).unwrap();
    let annotated = std::fs::read_to_string(&annotated).unwrap();
    for (orig, ann) in original.lines().skip(1).zip(annotated.lines().skip(1)) {
        let orig_fields: Vec<&str> = orig.split(',').collect();
        let ann_fields: Vec<&str> = ann.split(',').collect();
        assert_eq!(ann_fields.len(), orig_fields.len() + 3);
        assert_eq!(&ann_fields[..orig_fields.len()], &orig_fields[..]);
    }
}

#[test]
fn sweep_rejects_nonpositive_values() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &nominal_config(100.0, 200));
    let (code, _, stderr) = run(beamplan()
        .arg("sweep")
        .arg("--config")
        .arg(&cfg)
        .arg("--var=T")
        .arg("--values=-5"));
    assert_eq!(code, 1, "{stderr}");
    assert!(stderr.contains("positive"), "{stderr}");
}

#[test]
fn sweep_table_is_deterministic_across_job_counts() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &nominal_config(30.0, 32));
    let mut outputs = Vec::new();
    for jobs in ["1", "3"] {
        let (code, stdout, stderr) = run(beamplan()
            .arg("sweep")
            .arg("--config")
            .arg(&cfg)
            .arg("--var=T")
            .arg("--values=20,30")
            .arg("--jobs")
            .arg(jobs));
        assert_eq!(code, 0, "{stderr}");
        outputs.push(stdout);
    }
    assert_eq!(outputs[0], outputs[1]);

    let lines: Vec<&str> = outputs[0].lines().collect();
    assert_eq!(lines[0], "# seed = 0");
    assert_eq!(lines[1], "T,single,double,joint");
    assert_eq!(lines.len(), 4);
    for row in &lines[2..] {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells.len(), 4);
        // Joint must dominate the tour whenever both cells resolved.
        let double: Option<f64> = cells[2].parse().ok();
        let joint: Option<f64> = cells[3].parse().ok();
        if let (Some(d), Some(j)) = (double, joint) {
            assert!(j >= d - 1e-9, "row {row}");
        }
    }
}
