use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_ris-kinematics");

const SMALL: &str = r#"
seeds = [0, 1]

[numerology]
subcarriers = 8

[sweep]
n_u = [1, 4, 8]
l_r_m = [0.03, 0.08]
"#;

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn scenario_csv_is_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let mut outputs = Vec::new();
    for (name, threads) in [("a", "1"), ("b", "4"), ("c", "2")] {
        let out = dir.path().join(name);
        let o = run(&["scenario2", "--config", &config, "--out", out.to_str().unwrap(), "--parallel", threads]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(std::fs::read(out.join("scenario2.csv")).unwrap());
        assert!(out.join("scenario2.manifest.toml").exists());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
    let text = String::from_utf8(outputs[0].clone()).unwrap();
    // header + 2 sizes x 3 antenna counts x 2 seeds
    assert_eq!(text.lines().count(), 1 + 12);
}

#[test]
fn stdout_matches_written_csv_and_manifest_records_hash() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let piped = run(&["scenario1", "--config", &config]);
    assert!(piped.status.success());
    let out = dir.path().join("out");
    let o = run(&["scenario1", "--config", &config, "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let csv = std::fs::read(out.join("scenario1.csv")).unwrap();
    assert_eq!(piped.stdout, csv);

    let manifest: toml::Table = std::fs::read_to_string(out.join("scenario1.manifest.toml"))
        .unwrap()
        .parse()
        .unwrap();
    let hash = manifest["config_sha256"].as_str().unwrap();
    let mut rows = csv::Reader::from_reader(csv.as_slice());
    for record in rows.records() {
        assert_eq!(&record.unwrap()[2], hash);
    }
    assert_eq!(manifest["seeds"].as_array().unwrap().len(), 2);
    assert!(manifest["wall_time_s"].as_float().unwrap() >= 0.0);
}

#[test]
fn seed_and_regime_flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let o = run(&["scenario1", "--config", &config, "--seed", "7", "--regime", "far"]);
    assert!(o.status.success());
    let mut reader = csv::Reader::from_reader(o.stdout.as_slice());
    let headers = reader.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let records: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(records.len(), 6);
    for r in &records {
        assert_eq!(&r[col("seed")], "7");
        assert_eq!(&r[col("regime")], "far");
        assert_eq!(&r[col("identifiable")], "false");
        assert_eq!(&r[col("oeb_rad")], "");
    }
}

#[test]
fn fraunhofer_runs_without_config() {
    let o = run(&["fraunhofer"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("f_c_hz,l_r_m,aperture_m,d_f_m"));
    assert_eq!(text.lines().count(), 1 + 4 * 11);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();

    let missing = run(&["scenario1", "--config", dir.path().join("nope.toml").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(2));

    let bad = write_config(dir.path(), "[sweep]\nn_u = [0]\n");
    assert_eq!(run(&["scenario2", "--config", &bad]).status.code(), Some(2));

    assert_eq!(run(&["scenario1", "--regime", "sideways"]).status.code(), Some(2));
    assert_eq!(run(&["scenario1", "--parallel", "0"]).status.code(), Some(2));

    let square = write_config(dir.path(), "[numerology]\nsymbols = 2\n");
    assert_eq!(run(&["scenario1", "--config", &square]).status.code(), Some(2));
    let v = run(&["validate", "--config", &square]);
    assert_eq!(v.status.code(), Some(1));
    let report = String::from_utf8(v.stdout).unwrap();
    assert!(report.contains("FAIL [ris-codes] code construction"), "{report}");

    let ok = write_config(dir.path(), SMALL);
    let out = dir.path().join("v");
    let v = run(&["validate", "--config", &ok, "--out", out.to_str().unwrap()]);
    assert_eq!(v.status.code(), Some(0), "{}", String::from_utf8_lossy(&v.stdout));
    assert!(std::fs::read_to_string(out.join("validate.txt")).unwrap().contains("0 failed"));
}
