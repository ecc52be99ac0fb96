use std::path::Path;
use std::process::{Command, Output};

use nvqrng::io::{read_bit_meta, read_bits, read_histogram, read_key_values, read_timestamps, write_timestamps};
use nvqrng::stream::Origin;
use nvqrng::TimestampStream;

fn nvqrng(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nvqrng"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn value<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .unwrap_or_else(|| panic!("{key} missing from:\n{text}"))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn theory_region_one() {
    let out = nvqrng(&["theory", "--region", "1"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let h: f64 = value(&text, "min_entropy").parse().unwrap();
    assert!((h - 0.999975).abs() < 2e-5, "{h}");
    assert!(value(&text, "min_entropy").starts_with("0.99997"));
}

#[test]
fn theory_explicit_parameters_match_region() {
    let a = stdout(&nvqrng(&["theory", "--region", "3"]));
    let b = stdout(&nvqrng(&[
        "theory", "--n-emitters", "4", "--gamma1", "0.04", "--beta", "1.6", "--rho", "0.97", "--lambda", "131700",
    ]));
    assert_eq!(value(&a, "n_emitters"), value(&b, "n_emitters"));
    let ha: f64 = value(&a, "min_entropy").parse().unwrap();
    let hb: f64 = value(&b, "min_entropy").parse().unwrap();
    assert!(ha.is_finite() && hb.is_finite());
}

#[test]
fn extract_empty_input_gives_empty_output_and_warning() {
    let dir = tempfile::tempdir().unwrap();
    let ts = dir.path().join("empty.ts");
    let bin = dir.path().join("empty.bin");
    write_timestamps(&ts, &TimestampStream::empty(1_000_000, Origin::Merged)).unwrap();
    let out = nvqrng(&["extract", "--input", p(&ts), "--output", p(&bin)]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("warning"), "{}", stderr(&out));
    assert_eq!(std::fs::metadata(&bin).unwrap().len(), 0);
}

#[test]
fn reproduce_region_five_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = nvqrng(&["reproduce", "5", "--duration", "2s", "--seed", "7", "--out-dir", p(dir.path())]);
    assert_eq!(out.status.code(), Some(0), "{}\n{}", stdout(&out), stderr(&out));
    let report = read_key_values(&dir.path().join("region5.report")).unwrap();
    assert_eq!(report.get("result"), Some("pass"));
    let bin = dir.path().join("region5.bin");
    let (bytes, meta) = (read_bits(&bin).unwrap(), read_bit_meta(&bin).unwrap());
    assert_eq!(bytes.len() as u64, meta.photons_used);
}

#[test]
fn malformed_config_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# comment\nregion = 2\nlambda_per_s 5\n").unwrap();
    let out = nvqrng(&["theory", "--config", p(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("run.cfg:3"), "{err}");

    std::fs::write(&cfg, "region = 9\n").unwrap();
    let out = nvqrng(&["theory", "--config", p(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("run.cfg:1"), "{}", stderr(&out));
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "region = 1\n").unwrap();
    let out = nvqrng(&["theory", "--config", p(&cfg), "--n-bins", "16"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(value(&stdout(&out), "n_bins"), "16");
}

#[test]
fn pipeline_round_trips_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let ts = dir.path().join("r4.ts");
    let bin = dir.path().join("r4.bin");
    let hist = dir.path().join("r4.csv");

    let out = nvqrng(&["simulate", "--region", "4", "--duration", "20ms", "--seed", "3", "--output", p(&ts)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let stream = read_timestamps(&ts).unwrap();
    assert_eq!(value(&stdout(&out), "events"), stream.len().to_string());
    assert_eq!(stream.duration_ps(), 20_000_000_000);

    let out = nvqrng(&["extract", "--input", p(&ts), "--output", p(&bin)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let (bytes, meta) = (read_bits(&bin).unwrap(), read_bit_meta(&bin).unwrap());
    assert_eq!(bytes.len() as u64, meta.photons_used);
    assert_eq!(meta.duration_ps, 20_000_000_000);

    let out = nvqrng(&["quality", "--input", p(&bin), "--tsv"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(value(&stdout(&out), "bytes"), bytes.len().to_string());

    let out = nvqrng(&["g2", "--input", p(&ts), "--output", p(&hist), "--max-tau", "300ns"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let h = read_histogram(&hist).unwrap();
    assert_eq!(h.len(), 601);

    let out = nvqrng(&["fit", "--input", p(&hist), "--region", "4", "--n-max", "8"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let n: u32 = value(&stdout(&out), "n_emitters").parse().unwrap();
    assert!((1..=8).contains(&n));
}

#[test]
fn same_seed_same_file() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.ts");
    let b = dir.path().join("b.ts");
    for (path, threads) in [(&a, "1"), (&b, "4")] {
        let out = nvqrng(&[
            "--threads", threads, "simulate", "--region", "2", "--duration", "50ms", "--seed", "11", "--output",
            p(path),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn bad_arguments_exit_nonzero() {
    assert_ne!(nvqrng(&["reproduce", "6"]).status.code(), Some(0));
    assert_ne!(nvqrng(&["extract", "--input", "/nonexistent/x.ts"]).status.code(), Some(0));
    assert_ne!(nvqrng(&["theory", "--region", "1", "--n-bins", "100"]).status.code(), Some(0));
}
