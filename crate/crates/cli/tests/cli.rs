use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ioc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ioc"))
        .args(args)
        .current_dir(dir)
        .env("IOC_LOG", "off")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn rows(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let body = lines
        .map(|l| l.split(',').map(|c| c.parse::<f64>().unwrap()).collect())
        .collect();
    (header, body)
}

#[test]
fn pitch_generate_then_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let gen = ioc(
        &["generate", "--preset", "aircraft_pitch", "--out", "pitch.csv"],
        dir.path(),
    );
    assert_eq!(gen.status.code(), Some(0), "{}", stderr(&gen));
    assert!(stdout(&gen).contains("28 in [6, 33]"), "{}", stdout(&gen));

    let est = ioc(
        &[
            "estimate",
            "--preset",
            "aircraft_pitch",
            "--trajectory",
            "pitch.csv",
            "--out",
            "trace.csv",
        ],
        dir.path(),
    );
    assert_eq!(est.status.code(), Some(0), "{}", stderr(&est));
    let (header, trace) = rows(&dir.path().join("trace.csv"));
    assert_eq!(header[..6], ["k", "rank", "unique", "residual", "theta_1", "theta_2"]);
    assert_eq!(header.len(), 4 + 5 + 3);
    assert_eq!(trace.len(), 251);
    let first = trace.iter().find(|r| r[2] == 1.0).unwrap()[0] as i64;
    assert!((first - 35).abs() <= 3, "first unique {first}");
    assert!(stdout(&est).contains(&format!("first unique estimate at k = {first}")));
    for r in &trace {
        if r[2] == 0.0 {
            assert!(r[4..].iter().all(|v| *v == 0.0), "non-unique rows are zero");
        }
    }
    let last = trace.last().unwrap();
    for (got, want) in last[4..9].iter().zip([1.0, 4.0, 2.0, 3.0, 6.0]) {
        assert!((got - want).abs() <= 1e-4, "theta {got} vs {want}");
    }
}

#[test]
fn single_integrator_rows_and_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let gen = ioc(
        &["generate", "--preset", "single_integrator", "--out", "si.csv"],
        dir.path(),
    );
    assert_eq!(gen.status.code(), Some(0));
    assert!(stdout(&gen).contains("none"));
    let (header, traj) = rows(&dir.path().join("si.csv"));
    assert_eq!(header, ["k", "x1", "u1"]);
    assert_eq!(traj.len(), 11);
    assert!((traj[0][1] - 10.0).abs() < 5e-3 && (traj[0][2] + 3.58).abs() < 5e-3);
    assert!((traj[1][1] - 6.42).abs() < 5e-3 && (traj[1][2] + 2.30).abs() < 5e-3);

    let est = ioc(
        &["estimate", "--preset", "single_integrator", "--trajectory", "si.csv"],
        dir.path(),
    );
    assert_eq!(est.status.code(), Some(0));
    assert!(stderr(&est).contains("first unique estimate at k = 1"));
    let trace = stdout(&est);
    let second: Vec<f64> = trace
        .lines()
        .nth(2)
        .unwrap()
        .split(',')
        .map(|c| c.parse().unwrap())
        .collect();
    assert_eq!(second[..3], [1.0, 2.0, 1.0]);
    assert!((second[4] - 1.0).abs() < 1e-8 && (second[5] - 5.0).abs() < 1e-6);
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for run in 0..2 {
        let traj = format!("t{run}.csv");
        let trace = format!("e{run}.csv");
        assert!(
            ioc(&["generate", "--preset", "aircraft_pitch", "--out", &traj], dir.path())
                .status
                .success()
        );
        let est = ioc(
            &[
                "estimate",
                "--preset",
                "aircraft_pitch",
                "--trajectory",
                &traj,
                "--out",
                &trace,
            ],
            dir.path(),
        );
        assert!(est.status.success());
        outputs.push((
            fs::read(dir.path().join(&traj)).unwrap(),
            fs::read(dir.path().join(&trace)).unwrap(),
            est.stdout,
        ));
    }
    assert!(outputs[0] == outputs[1]);
}

#[test]
fn never_unique_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert!(ioc(
        &["generate", "--preset", "aircraft_pitch", "--out", "pitch.csv"],
        dir.path()
    )
    .status
    .success());
    let text = fs::read_to_string(dir.path().join("pitch.csv")).unwrap();
    let short: Vec<&str> = text.lines().take(11).collect();
    fs::write(dir.path().join("short.csv"), short.join("\n")).unwrap();
    let est = ioc(
        &["estimate", "--preset", "aircraft_pitch", "--trajectory", "short.csv"],
        dir.path(),
    );
    assert_eq!(est.status.code(), Some(2), "{}", stderr(&est));
    assert!(stderr(&est).contains("no unique estimate"));
    assert!(stderr(&est).contains("final theta: [0, 0, 0, 0, 0]"));

    let fallback = ioc(
        &[
            "estimate",
            "--preset",
            "aircraft_pitch",
            "--trajectory",
            "short.csv",
            "--fallback",
        ],
        dir.path(),
    );
    assert_eq!(fallback.status.code(), Some(2));
    assert!(stderr(&fallback).contains("minimum norm"));
}

#[test]
fn errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("empty.csv"), "").unwrap();
    fs::write(d.join("bad.csv"), "k,x1,u1\n0,10,-3.5\n1,6.4,oops\n").unwrap();
    fs::write(d.join("gap.csv"), "k,x1,u1\n0,10,-3.5\n2,6.4,-2.3\n").unwrap();
    fs::write(d.join("wide.csv"), "k,x1,x2,u1\n0,1,2,3\n").unwrap();
    fs::write(
        d.join("bad.cfg"),
        "preset = single_integrator\nhorizon = 10\nrank_tol = nope\n",
    )
    .unwrap();

    let cases: [(&[&str], &str); 8] = [
        (
            &["estimate", "--preset", "single_integrator", "--trajectory", "empty.csv"],
            "empty",
        ),
        (
            &["estimate", "--preset", "single_integrator", "--trajectory", "bad.csv"],
            "line 3",
        ),
        (
            &["estimate", "--preset", "single_integrator", "--trajectory", "gap.csv"],
            "line 3",
        ),
        (
            &["estimate", "--preset", "single_integrator", "--trajectory", "wide.csv"],
            "2 states",
        ),
        (
            &[
                "estimate",
                "--preset",
                "single_integrator",
                "--trajectory",
                "missing.csv",
            ],
            "missing.csv",
        ),
        (&["generate", "--config", "bad.cfg"], "line 3"),
        (&["generate", "--preset", "nope"], "unknown preset"),
        (&["generate"], "--config or --preset"),
    ];
    for (args, needle) in cases {
        let o = ioc(args, d);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
        assert!(stderr(&o).contains(needle), "{args:?}: {}", stderr(&o));
    }
    assert_eq!(ioc(&["frobnicate"], d).status.code(), Some(1));
    assert_eq!(
        ioc(&["estimate", "--preset", "single_integrator"], d).status.code(),
        Some(1)
    );
    assert_eq!(ioc(&["--help"], d).status.code(), Some(0));
}

#[test]
fn config_file_drives_generation() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("run.cfg"),
        "# pitch without limits\npreset = aircraft_pitch\nunconstrained = true\nhorizon = 60\n",
    )
    .unwrap();
    let gen = ioc(&["generate", "--config", "run.cfg", "--out", "free.csv"], dir.path());
    assert_eq!(gen.status.code(), Some(0), "{}", stderr(&gen));
    assert!(stdout(&gen).contains("active constraint steps: none"));
    let (_, traj) = rows(&dir.path().join("free.csv"));
    assert_eq!(traj.len(), 61);
    let est = ioc(
        &[
            "estimate",
            "--config",
            "run.cfg",
            "--trajectory",
            "free.csv",
            "--out",
            "e.csv",
        ],
        dir.path(),
    );
    assert_eq!(est.status.code(), Some(0));
}

#[test]
fn sweep_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = ioc(
        &["sweep", "--preset", "aircraft_pitch", "--out", "sweep.csv"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, table) = rows(&dir.path().join("sweep.csv"));
    assert_eq!(
        header,
        ["delta", "active_steps", "first_unique_standard", "first_unique_adhoc"]
    );
    assert_eq!(table.len(), 5);
    for pair in table.windows(2) {
        assert!(pair[1][1] < pair[0][1], "active steps shrink as the box widens");
    }
    for r in &table {
        assert!(r[2] <= r[3]);
    }
}

#[test]
fn compare_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = ioc(
        &[
            "compare",
            "--preset",
            "single_integrator",
            "--horizons",
            "10,50",
            "--out",
            "c.csv",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, table) = rows(&dir.path().join("c.csv"));
    assert_eq!(
        header,
        [
            "K",
            "online_total_s",
            "online_per_step_s",
            "batch_s",
            "online_state_elems",
            "batch_var_count"
        ]
    );
    assert_eq!(table[0][0], 10.0);
    assert_eq!(table[1][5], 2.0 + 52.0);
    assert_eq!(table[0][4], table[1][4]);
}

#[test]
fn batch_matches_truth() {
    let dir = tempfile::tempdir().unwrap();
    assert!(ioc(
        &["generate", "--preset", "single_integrator", "--out", "si.csv"],
        dir.path()
    )
    .status
    .success());
    let o = ioc(
        &[
            "batch",
            "--preset",
            "single_integrator",
            "--trajectory",
            "si.csv",
            "--out",
            "b.csv",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (_, table) = rows(&dir.path().join("b.csv"));
    assert_eq!(table.len(), 1);
    assert!((table[0][5] - 5.0).abs() < 1e-6);
}
