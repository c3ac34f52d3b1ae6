use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn cycleflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cycleflow"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn info_prints_table_columns() {
    let out = cycleflow(&["info", "--case", &fixture("case5.m")]);
    assert!(out.status.success());
    assert_eq!(
        stdout(&out),
        "name,nodes,lines,cycles,cycles_per_node,slack\ncase5,5,6,2,0.4000,4\n"
    );
}

#[test]
fn all_ptdf_methods_print_the_same_matrix() {
    let case = fixture("case14.m");
    let outputs: Vec<serde_json::Value> = ["conventional", "dual", "qr"]
        .iter()
        .map(|m| {
            let out = cycleflow(&[
                "ptdf", "--case", &case, "--method", m, "--format", "json", "--mode", "sparse",
            ]);
            assert!(
                out.status.success(),
                "{}",
                String::from_utf8_lossy(&out.stderr)
            );
            serde_json::from_str(&stdout(&out)).unwrap()
        })
        .collect();
    let values = |v: &serde_json::Value| -> Vec<f64> {
        v["values"]
            .as_array()
            .unwrap()
            .iter()
            .flat_map(|row| row.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()))
            .collect()
    };
    let reference = values(&outputs[0]);
    assert_eq!(reference.len(), 20 * 14);
    for o in &outputs[1..] {
        for (a, b) in values(o).iter().zip(&reference) {
            assert!((a - b).abs() < 1e-8);
        }
    }
}

#[test]
fn slack_option_zeroes_that_column() {
    let out = cycleflow(&["ptdf", "--case", &fixture("case5.m"), "--slack", "2"]);
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "line,1,2,3,4,5");
    for row in lines {
        assert_eq!(row.split(',').nth(2).unwrap(), "0");
    }
}

#[test]
fn lodf_leaves_bridge_columns_empty() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pendant.json");
    std::fs::write(
        &path,
        r#"{"name": "pendant", "slack": 1, "buses": [1, 2, 3, 4],
            "branches": [{"from": 1, "to": 2, "x": 0.1}, {"from": 2, "to": 3, "x": 0.1},
                         {"from": 3, "to": 1, "x": 0.1}, {"from": 3, "to": 4, "x": 0.2}]}"#,
    )
    .unwrap();
    let out = cycleflow(&["lodf", "--case", path.to_str().unwrap()]);
    assert!(out.status.success());
    for row in stdout(&out).lines().skip(1) {
        assert!(row.ends_with(','), "{row}");
    }
}

#[test]
fn decompose_and_unscheduled() {
    let out = cycleflow(&[
        "decompose",
        "--case",
        &fixture("five_bus_reversed_line6.json"),
        "--from",
        "4",
        "--to",
        "1",
        "--format",
        "json",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["cycle_flows"].as_array().unwrap().len(), 2);

    let out = cycleflow(&[
        "unscheduled",
        "--case",
        &fixture("case5.m"),
        "--schedule",
        &fixture("schedule_4_1.json"),
        "--power",
        "2",
        "--format",
        "json",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["source"], 4);
    assert_eq!(v["sink"], 1);
}

#[test]
fn verify_passes_on_case5() {
    let out = cycleflow(&["verify", "--case", &fixture("case5.m")]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("oracle-dual"));
}

#[test]
fn tie_switch_on_a_generated_tree() {
    let dir = tempfile::tempdir().unwrap();
    let tree = dir.path().join("tree.json");
    let out = cycleflow(&[
        "synth",
        "--nodes",
        "12",
        "--chords",
        "0",
        "--seed",
        "5",
        "--out",
        tree.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let grid: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&tree).unwrap()).unwrap();
    let branches = grid["branches"].as_array().unwrap();
    assert_eq!(branches.len(), 11);
    // Any pair of buses not already joined will do.
    let joined = |a: i64, b: i64| {
        branches.iter().any(|l| {
            let (f, t) = (l["from"].as_i64().unwrap(), l["to"].as_i64().unwrap());
            (f, t) == (a, b) || (f, t) == (b, a)
        })
    };
    let (a, b) = (1..=12)
        .flat_map(|a| (a + 1..=12).map(move |b| (a, b)))
        .find(|&(a, b)| !joined(a, b))
        .unwrap();
    let add = format!("{a}:{b}:0.05");
    let out = cycleflow(&[
        "tie-switch",
        "--case",
        tree.to_str().unwrap(),
        "--add",
        &add,
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(stdout(&out).lines().count(), 1 + 12);
}

#[test]
fn bench_and_fit_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bench.csv");
    let mut args = vec![
        "bench",
        "--mode",
        "sparse",
        "--repetitions",
        "3",
        "--out",
        csv.to_str().unwrap(),
    ];
    for s in ["60:2", "60:8", "60:20", "60:40"] {
        args.extend(["--synth", s]);
    }
    let out = cycleflow(&args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("grid,nodes,lines,cycles,cycles_per_node,mode,"));
    assert_eq!(text.lines().count(), 5);

    let out = cycleflow(&["fit", "--input", csv.to_str().unwrap(), "--format", "json"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["points"], 4);
}

#[test]
fn exit_codes() {
    // Validation: unknown bus, bad input file, too few repetitions.
    assert_eq!(
        cycleflow(&["ptdf", "--case", &fixture("case5.m"), "--slack", "99"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        cycleflow(&["info", "--case", "/nonexistent.m"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        cycleflow(&["info", "--case", &fixture("case300.m")])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        cycleflow(&["bench", "--synth", "10:2", "--repetitions", "1"])
            .status
            .code(),
        Some(2)
    );
    // Numerical: a fit over less than a decade of ratios.
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("narrow.csv");
    let mut args = vec![
        "bench",
        "--mode",
        "sparse",
        "--repetitions",
        "3",
        "--out",
        csv.to_str().unwrap(),
    ];
    for s in ["40:10", "40:12", "40:14", "40:16"] {
        args.extend(["--synth", s]);
    }
    assert!(cycleflow(&args).status.success());
    assert_eq!(
        cycleflow(&["fit", "--input", csv.to_str().unwrap()])
            .status
            .code(),
        Some(3)
    );
}
