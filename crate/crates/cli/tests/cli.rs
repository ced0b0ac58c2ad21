use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use qfs_core::io::{read_dataset, read_distance_table, read_qfs_points, write_qfs_points};
use qfs_core::qfs::QfsPoint;

fn qfs(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qfs"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("qfs runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = qfs(dir, args);
    assert!(
        out.status.success(),
        "qfs {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

const SMALL_SIM: &str = "[sim]\nomega = 12.0\nrealisations = 16\ngrid = { total_time = 1.0, num_steps = 512 }\n";

fn config(dir: &Path, name: &str, extra: &str) {
    write(dir, name, &format!("schema_version = 1\nseed = 11\n{SMALL_SIM}{extra}"));
}

const BUMP_200: &str = r#"
[[noise]]
label = "1/f+bump"
model = { family = { kind = "one_over_f_bump", exponent = 1.0, peak_bin = 200.0 } }
"#;

#[test]
fn zero_noise_run_gives_the_identity_point() {
    let tmp = tempfile::tempdir().unwrap();
    config(tmp.path(), "z.toml", "");
    ok(tmp.path(), &["--config", "z.toml", "--out", "o", "simulate"]);
    let pts = read_qfs_points(fs::File::open(tmp.path().join("o/qfs_points.csv")).unwrap()).unwrap();
    assert_eq!(pts.len(), 1);
    assert!(pts[0].max_abs_diff(&QfsPoint::noiseless()) < 1e-9, "{:?}", pts[0].coords);
    let manifest = fs::read_to_string(tmp.path().join("o/simulate.manifest.json")).unwrap();
    assert!(manifest.contains("config_hash"));
    let doc = fs::read_to_string(tmp.path().join("o/evolution/run_0000.json")).unwrap();
    assert!(doc.contains("\"seed\"") && doc.contains("u_tilde_i"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    config(tmp.path(), "b.toml", BUMP_200);
    ok(tmp.path(), &["--config", "b.toml", "--out", "a", "simulate"]);
    ok(tmp.path(), &["--config", "b.toml", "--out", "b", "--workers", "1", "simulate"]);
    for f in ["qfs_points.csv", "noise/run_0000_realisation_0.csv", "fields/field_000.csv"] {
        let a = fs::read(tmp.path().join("a").join(f)).unwrap();
        let b = fs::read(tmp.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
    ok(tmp.path(), &["--config", "b.toml", "--out", "c", "--seed", "12", "simulate"]);
    assert_ne!(
        fs::read(tmp.path().join("a/qfs_points.csv")).unwrap(),
        fs::read(tmp.path().join("c/qfs_points.csv")).unwrap()
    );
}

#[test]
fn simulated_reference_feeds_classify() {
    let tmp = tempfile::tempdir().unwrap();
    config(tmp.path(), "b.toml", BUMP_200);
    ok(tmp.path(), &["--config", "b.toml", "--out", "ref", "simulate"]);
    let stdout = ok(
        tmp.path(),
        &["--config", "b.toml", "--out", "cls", "classify", "--references", "ref/qfs_points.csv"],
    );
    assert!(stdout.contains("nearest reference: 1/f+bump"), "{stdout}");
    let table = read_distance_table(fs::File::open(tmp.path().join("cls/distances.csv")).unwrap()).unwrap();
    assert_eq!(table.len(), 1);
    // the generated unknown cluster is written for reuse
    let cluster = read_qfs_points(fs::File::open(tmp.path().join("cls/unknown_points.csv")).unwrap()).unwrap();
    assert_eq!(cluster.len(), 10);
}

/// A single unknown point at the origin and references placed so that the
/// per-observable distances equal a worked table column.
fn table_inputs(dir: &Path, labels: &[&str], rows: [&[f64]; 3]) {
    let unknown = QfsPoint::new([0.0; 9]).with_labels("unknown", "cpmg-realistic", 0);
    let refs: Vec<QfsPoint> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let mut c = [0.0; 9];
            for o in 0..3 {
                c[3 * o] = rows[o][i];
            }
            QfsPoint::new(c).with_labels(*l, "cpmg-ideal", 0)
        })
        .collect();
    write_qfs_points(fs::File::create(dir.join("unknown.csv")).unwrap(), &[unknown]).unwrap();
    write_qfs_points(fs::File::create(dir.join("refs.csv")).unwrap(), &refs).unwrap();
}

fn classify_table(labels: &[&str], rows: [&[f64]; 3]) -> String {
    let tmp = tempfile::tempdir().unwrap();
    table_inputs(tmp.path(), labels, rows);
    ok(
        tmp.path(),
        &["--out", "o", "classify", "--unknown", "unknown.csv", "--references", "refs.csv"],
    )
}

#[test]
fn classify_reproduces_worked_distance_tables() {
    let out = classify_table(
        &["1/f", "1/f (NS)", "1/f+bump", "1/f+bump (NS)", "coloured", "coloured (NS)"],
        [
            &[0.40, 0.37, 0.38, 0.38, 0.83, 0.92],
            &[0.30, 0.31, 0.25, 0.27, 0.81, 0.86],
            &[0.29, 0.30, 0.30, 0.29, 0.69, 0.62],
        ],
    );
    assert!(out.contains("nearest reference: 1/f+bump\n"), "{out}");
    let out = classify_table(
        &["peak 15", "peak 30", "peak 60", "peak 120", "peak 240", "peak 480"],
        [
            &[0.38, 0.37, 0.37, 0.32, 0.28, 0.56],
            &[0.24, 0.24, 0.23, 0.15, 0.11, 0.58],
            &[0.30, 0.28, 0.30, 0.29, 0.28, 0.29],
        ],
    );
    assert!(out.contains("nearest reference: peak 240\n"), "{out}");
    let out = classify_table(
        &["peak 130", "peak 150", "peak 170", "peak 190", "peak 210", "peak 230"],
        [
            &[0.318, 0.301, 0.305, 0.289, 0.273, 0.267],
            &[0.155, 0.127, 0.101, 0.081, 0.074, 0.111],
            &[0.297, 0.282, 0.303, 0.290, 0.278, 0.282],
        ],
    );
    assert!(out.contains("nearest reference: peak 210\n"), "{out}");
}

#[test]
fn malformed_csv_names_row_and_column() {
    let tmp = tempfile::tempdir().unwrap();
    table_inputs(tmp.path(), &["a"], [&[0.1], &[0.2], &[0.3]]);
    let text = fs::read_to_string(tmp.path().join("refs.csv")).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut fields: Vec<&str> = lines[1].split(',').collect();
    fields[8] = "not-a-number"; // gamma_y
    lines[1] = fields.join(",");
    write(tmp.path(), "refs.csv", &(lines.join("\n") + "\n"));
    let out = qfs(
        tmp.path(),
        &["--out", "o", "classify", "--unknown", "unknown.csv", "--references", "refs.csv"],
    );
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 2") && err.contains("gamma_y"), "{err}");
}

#[test]
fn invalid_configs_are_rejected_with_diagnostics() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "u.toml", "schema_version = 1\n[sim]\nomega = 1.0\nrealisations = 4\nsteps = 3\n");
    let out = qfs(tmp.path(), &["--config", "u.toml", "simulate"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown field `steps`"));

    config(tmp.path(), "p.toml", "[[noise]]\nlabel = \"x\"\nmodel = { family = { kind = \"colored_gaussian\", division_factor = -1.0 } }\n");
    let out = qfs(tmp.path(), &["--config", "p.toml", "simulate"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("noise[0]"));

    let out = qfs(tmp.path(), &["--precision", "single", "simulate"]);
    assert!(!out.status.success());
}

#[test]
fn smoke_dataset_and_training() {
    let tmp = tempfile::tempdir().unwrap();
    config(tmp.path(), "d.toml", "[train]\nknn_k = 1\n");
    ok(tmp.path(), &["--config", "d.toml", "--out", "o", "dataset", "--count", "6"]);
    let recs = read_dataset(fs::File::open(tmp.path().join("o/dataset.csv")).unwrap()).unwrap();
    assert_eq!(recs.len(), 6);
    assert_eq!(recs.iter().filter(|r| r.stationary).count(), 3);
    for t in qfs_core::noisegen::NoiseType::ALL {
        assert_eq!(recs.iter().filter(|r| r.noise_type == t).count(), 2);
    }
    ok(
        tmp.path(),
        &["--config", "d.toml", "--out", "o", "train", "--dataset", "o/dataset.csv", "--folds", "2"],
    );
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("o/train_report.json")).unwrap()).unwrap();
    let reports = report["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 6);
    for r in reports {
        let acc = r["mean_accuracy"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&acc));
        assert_eq!(r["fold_results"].as_array().unwrap().len(), 2);
    }
}

#[test]
fn sweeps_emit_one_row_per_value() {
    let tmp = tempfile::tempdir().unwrap();
    let models = r#"
[sweep]
models = [{ label = "coloured", model = { family = { kind = "colored_gaussian", division_factor = 4.0 } } }]
scales = [0.0, 0.5, 1.0]
"#;
    config(tmp.path(), "s.toml", models);
    ok(tmp.path(), &["--config", "s.toml", "--out", "o", "sweep", "pulse-width"]);
    let pts = read_qfs_points(fs::File::open(tmp.path().join("o/sweep_pulse_width.csv")).unwrap()).unwrap();
    assert_eq!(pts.len(), 6);
    ok(tmp.path(), &["--config", "s.toml", "--out", "o", "sweep", "energy"]);
    let pts = read_qfs_points(fs::File::open(tmp.path().join("o/sweep_energy.csv")).unwrap()).unwrap();
    assert_eq!(pts.len(), 3);
    assert!(pts[0].max_abs_diff(&QfsPoint::noiseless()) < 1e-9);
    ok(tmp.path(), &["--config", "s.toml", "--out", "o", "sweep", "interpolation"]);
    let pts = read_qfs_points(fs::File::open(tmp.path().join("o/sweep_interpolation.csv")).unwrap()).unwrap();
    assert_eq!(pts.len(), 6);

    config(tmp.path(), "e.toml", "[sweep]\nscales = []\n");
    assert!(!qfs(tmp.path(), &["--config", "e.toml", "--out", "o", "sweep", "energy"]).status.success());
}

#[test]
fn bench_reports_both_paths() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ok(
        tmp.path(),
        &["--out", "o", "bench", "--steps", "512", "--realisations", "8"],
    );
    assert!(out.contains("speedup"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("o/bench.json")).unwrap()).unwrap();
    assert!(report["max_otilde_diff"].as_f64().unwrap() < 1e-10);
}
