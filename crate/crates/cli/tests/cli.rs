use std::fs;
use std::process::{Command, Output};

fn fploc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fploc")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn simulate_prints_one_row_per_sweep_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "run.trials = 300\nsweep.param = knn.k\nsweep.values = 1, 3, 5\n").unwrap();
    let o = fploc(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4, "{text}");
    assert!(lines[1].starts_with("1,") && lines[3].starts_with("5,"));
}

#[test]
fn raw_flag_appends_per_trial_errors() {
    let plain = stdout(&fploc(&["simulate", "--seed", "4"]));
    let raw = stdout(&fploc(&["simulate", "--seed", "4", "--raw"]));
    assert!(raw.starts_with(&plain));
    assert!(raw.lines().count() > 10_000);
}

#[test]
fn out_flag_writes_file_instead_of_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("kl.csv");
    let o = fploc(&["analyze-kl", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    assert!(fs::read_to_string(&out).unwrap().lines().count() > 100);
}

#[test]
fn seed_changes_simulation_output() {
    let a = stdout(&fploc(&["simulate", "--seed", "1"]));
    let b = stdout(&fploc(&["simulate", "--seed", "2"]));
    assert_ne!(a, b);
    assert_eq!(a, stdout(&fploc(&["simulate", "--seed", "1"])));
}

#[test]
fn place_anchors_count_flag() {
    let o = fploc(&["place-anchors", "--count", "3"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 4);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for (name, text) in [
        ("unknown.cfg", "knn.kk = 3\n"),
        ("bad_value.cfg", "knn.k = three\n"),
        ("bad_sweep.cfg", "sweep.param = knn.k\nsweep.values = 1, -2\n"),
    ] {
        let p = dir.path().join(name);
        fs::write(&p, text).unwrap();
        let o = fploc(&["simulate", "--config", p.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{name}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let missing = fploc(&["simulate", "--config", "/nonexistent/run.cfg"]);
    assert_eq!(missing.status.code(), Some(2));
    assert_eq!(fploc(&["place-anchors"]).status.code(), Some(2));
}

#[test]
fn malformed_traces_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let header = fploc_core::harness::TRACE_HEADER;
    for (name, body) in [
        ("bad_number.csv", "a,1,1,ap1,-50,zero\n"),
        ("duplicate.csv", "a,1,1,ap1,-50,0\na,1,1,ap1,-51,0\n"),
        ("moved.csv", "a,1,1,ap1,-50,0\na,2,1,ap1,-51,1\n"),
    ] {
        let p = dir.path().join(name);
        fs::write(&p, format!("{header}\n{body}")).unwrap();
        let o = fploc(&["ingest-trace", p.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(3), "{name}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn trace_round_trip_through_cli() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = format!("{}\n", fploc_core::harness::TRACE_HEADER);
    for loc in 0..6 {
        let x = loc as f64 * 2.0;
        for (ap, base) in [("ap1", -40.0), ("ap2", -70.0)] {
            let rss = base - 3.0 * x * if ap == "ap1" { 1.0 } else { -1.0 };
            text.push_str(&format!("L{loc},{x},0,{ap},{rss},0\n"));
        }
    }
    let p = dir.path().join("t.csv");
    fs::write(&p, text).unwrap();
    let path = p.to_str().unwrap();
    let ingest = fploc(&["ingest-trace", path]);
    assert!(ingest.status.success());
    // Long format: one row per location and AP.
    assert_eq!(stdout(&ingest).lines().count(), 1 + 6 * 2);

    let cfg = dir.path().join("k1.cfg");
    fs::write(&cfg, "knn.k = 1\n").unwrap();
    let eval = fploc(&["evaluate-trace", "--config", cfg.to_str().unwrap(), path, path]);
    assert!(eval.status.success());
    let out = stdout(&eval);
    let last = out.lines().last().unwrap();
    assert!(last.starts_with("trace,"), "{out}");
    // Evaluating a trace against itself with k = 1 is exact.
    assert!(last.split(',').skip(1).take(5).all(|v| v.parse::<f64>().unwrap() == 0.0), "{last}");
}
