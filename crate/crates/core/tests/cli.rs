use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use membrane_id::mesh::io::{field_from_csv, field_to_csv};
use membrane_id::mesh::io::{read_field_csv, write_field_csv};
use membrane_id::mesh::Grid;
use membrane_id::scenarios::make_testcase2;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_membrane-id"))
}

fn run(sub: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg(sub)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, json).unwrap();
    p
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn data_lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().map(str::to_string).collect()
}

#[test]
fn forward_barrier_converges_and_writes_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "fwd.json",
        r#"{"grid": {"n": 20}, "problem": {"scenario": "TESTCASE1"}, "solver": {"method": "BARRIER"}}"#,
    );
    let out = tmp.path().join("out");
    let o = run("forward", &cfg, &out, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for name in ["config.echo.json", "trace.csv", "u.csv", "u.pgm", "lambda.csv", "contact.csv", "contact.pgm"] {
        assert!(out.join(name).exists(), "{name}");
    }
    let trace = data_lines(&out.join("trace.csv"));
    assert_eq!(trace[0], "iter,kkt_residual,energy,wall_time_s");
    let last: f64 = trace.last().unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!(last < 1e-8);
    let u = field_from_csv(&fs::read_to_string(out.join("u.csv")).unwrap(), Some(20)).unwrap();
    assert!((u.max() - 1.0).abs() < 1e-3);
}

#[test]
fn exhausted_budget_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "pg.json",
        r#"{"problem": {"scenario": "TESTCASE1"}, "solver": {"method": "PG", "max_iter": 1}}"#,
    );
    assert_eq!(code(&run("forward", &cfg, &tmp.path().join("out"), &[])), 2);
}

#[test]
fn malformed_configs_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let unknown = write_config(
        tmp.path(),
        "unknown.json",
        "{\n  \"problem\": {\"scenario\": \"TESTCASE1\"},\n  \"solver\": {\"metod\": \"PG\"}\n}",
    );
    let o = run("forward", &unknown, &tmp.path().join("a"), &[]);
    assert_eq!(code(&o), 1);
    let msg = stderr(&o);
    assert!(msg.contains("metod") && msg.contains("line 3"), "{msg}");

    let broken = write_config(tmp.path(), "broken.json", "{\"problem\": ");
    assert_eq!(code(&run("forward", &broken, &tmp.path().join("b"), &[])), 1);

    let missing = tmp.path().join("nope.json");
    assert_eq!(code(&run("forward", &missing, &tmp.path().join("c"), &[])), 1);

    let wrong_cmd = write_config(tmp.path(), "tc.json", r#"{"problem": {"scenario": "TESTCASE1"}}"#);
    assert_eq!(code(&run("invert", &wrong_cmd, &tmp.path().join("d"), &[])), 1);
}

#[test]
fn heavy_noise_inversion_stops_early() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "inv.json",
        r#"{"grid": {"n": 12}, "problem": {"scenario": "EXP1", "radius": 0.5, "delta": 0.1}, "output": {"snapshot_every": 1}}"#,
    );
    let out = tmp.path().join("out");
    let o = run("invert", &cfg, &out, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let trace = data_lines(&out.join("trace.csv"));
    let k_stop = trace.len() - 2;
    assert!(k_stop <= 10, "{k_stop}");
    assert!(out.join(format!("a_{k_stop:05}.csv")).exists());
    assert!(out.join("a_disc.csv").exists());
    let rows = data_lines(&out.join("results.csv"));
    assert_eq!(rows.len(), 2);
    assert!(rows[1].contains("discrepancy"));
}

/// Synthetic ingest files for TestCase 2's load and obstacle on an n-grid.
fn ingest_files(dir: &Path, n: usize, data_n: usize) -> (PathBuf, PathBuf, PathBuf) {
    let p = make_testcase2(n).unwrap();
    let load = dir.join("f.csv");
    let obstacle = dir.join("h.csv");
    let data = dir.join("y.csv");
    fs::write(&load, field_to_csv(p.load_density())).unwrap();
    fs::write(&obstacle, field_to_csv(p.obstacle())).unwrap();
    let g = Grid::new(data_n).unwrap();
    fs::write(&data, field_to_csv(&g.sample(|x, y| x * y))).unwrap();
    (load, obstacle, data)
}

fn ingest_config(load: &Path, obstacle: &Path, data: &Path, noise: Option<f64>) -> String {
    let noise = noise.map_or(String::new(), |s| format!(r#", "noise_norm": {s}"#));
    format!(
        r#"{{"grid": {{"n": 9}}, "problem": {{"scenario": "INGEST", "measurements": [
            {{"load": {load:?}, "obstacle": {obstacle:?}, "data": {data:?}{noise}}}]}},
          "inversion": {{"max_iter": 5}}}}"#
    )
}

#[test]
fn ingest_checks_grid_headers_and_noise() {
    let tmp = tempfile::tempdir().unwrap();
    let (f, h, y) = ingest_files(tmp.path(), 9, 9);
    let ok = write_config(tmp.path(), "ok.json", &ingest_config(&f, &h, &y, Some(0.01)));
    let o = run("invert", &ok, &tmp.path().join("ok"), &[]);
    assert!(matches!(code(&o), 0 | 2), "{}", stderr(&o));
    let a = field_from_csv(&fs::read_to_string(tmp.path().join("ok/a_final.csv")).unwrap(), Some(9)).unwrap();
    assert!(a.min() >= 0.1 && a.max() <= 10.0);

    let no_noise = write_config(tmp.path(), "nn.json", &ingest_config(&f, &h, &y, None));
    assert_eq!(code(&run("invert", &no_noise, &tmp.path().join("nn"), &[])), 1);

    let other = tmp.path().join("coarse");
    fs::create_dir(&other).unwrap();
    let (f, h, y) = ingest_files(&other, 9, 11);
    let bad = write_config(tmp.path(), "bad.json", &ingest_config(&f, &h, &y, Some(0.01)));
    let o = run("invert", &bad, &tmp.path().join("bad"), &[]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("grid_n"), "{}", stderr(&o));
}

#[test]
fn fields_round_trip_through_files() {
    let g = Grid::new(13).unwrap();
    let f = g.sample(|x, y| (7.0 * x).sin() * 1e-3 + y.exp() / 3.0);
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("f.csv");
    write_field_csv(&path, &f).unwrap();
    let back = read_field_csv(&path, Some(13)).unwrap();
    assert!(f.values().iter().zip(back.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
    assert!(read_field_csv(&path, Some(12)).is_err());
}

fn without_time(rows: Vec<String>) -> Vec<String> {
    rows.into_iter()
        .map(|l| l.rsplit_once(',').map_or(l.clone(), |(head, _)| head.to_string()))
        .collect()
}

#[test]
fn echoed_config_reproduces_results() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "exp.json",
        r#"{"grid": {"n": 9}, "problem": {"scenario": "EXP1", "radius": 0.25, "delta": 0.01},
            "inversion": {"max_iter": 15}}"#,
    );
    let first = tmp.path().join("first");
    assert_eq!(code(&run("experiment", &cfg, &first, &["--seed", "42"])), 0);
    let echo = first.join("config.echo.json");
    assert!(fs::read_to_string(&echo).unwrap().contains("\"seed\": 42"));
    let second = tmp.path().join("second");
    assert_eq!(code(&run("experiment", &echo, &second, &[])), 0);
    let a = without_time(data_lines(&first.join("results.csv")));
    let b = without_time(data_lines(&second.join("results.csv")));
    assert_eq!(a, b);
    assert_eq!(fs::read(first.join("a_final.csv")).unwrap(), fs::read(second.join("a_final.csv")).unwrap());

    let third = tmp.path().join("third");
    assert_eq!(code(&run("experiment", &echo, &third, &["--seed", "43"])), 0);
    assert_ne!(a, without_time(data_lines(&third.join("results.csv"))));
}

#[test]
fn experiment3_writes_a_method_pair_and_five_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "exp3.json",
        r#"{"grid": {"n": 9, "reference_n": 9}, "problem": {"scenario": "EXP3", "delta": 0.1}, "inversion": {"max_iter": 40}}"#,
    );
    let out = tmp.path().join("out");
    let o = run("experiment", &cfg, &out, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = data_lines(&out.join("results.csv"));
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("EXP3,") && rows[1].contains("NESTEROV"));
    assert!(rows[2].starts_with("EXP3,") && rows[2].contains("LANDWEBER"));
    let mut fields: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".pgm"))
        .collect();
    fields.sort();
    assert_eq!(fields, ["a_dagger.pgm", "a_disc.pgm", "a_final.pgm", "a_opt.pgm", "indenters.pgm"]);
}

#[test]
fn table1_has_one_row_per_grid_method_and_testcase() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "t1.json",
        r#"{"problem": {"scenario": "TABLE1", "n_list": [6, 11]}, "solver": {"max_iter": 20000}}"#,
    );
    let out = tmp.path().join("out");
    let o = run("experiment", &cfg, &out, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = data_lines(&out.join("results.csv"));
    assert_eq!(rows[0], membrane_id::scenarios::FORWARD_HEADER);
    assert_eq!(rows.len(), 13);
}
