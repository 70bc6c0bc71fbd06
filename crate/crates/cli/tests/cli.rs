use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn unmix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_unmix"))
        .args(args)
        .env_remove("UNMIX_THREADS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn ok(args: &[&str]) -> Output {
    let out = unmix(args);
    assert_eq!(
        code(&out),
        0,
        "unmix {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

/// Rows of a numeric CSV after the header, first column dropped.
fn numeric_rows(p: &Path) -> Vec<Vec<f64>> {
    std::fs::read_to_string(p)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').skip(1).map(|f| f.parse().unwrap()).collect())
        .collect()
}

fn header(p: &Path) -> String {
    std::fs::read_to_string(p)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string()
}

fn simulate(dir: &TempDir, name: &str, n: usize, seed: u64) -> PathBuf {
    let out = dir.path().join(name);
    ok(&[
        "simulate",
        "--n",
        &n.to_string(),
        "--seed",
        &seed.to_string(),
        "--out",
        &s(&out),
    ]);
    out
}

const NAMES: &str = "PpIX634,PpIX620,Lipofuscin,Flavins,NADH,FAD,Collagen,Elastin,Melanin";

#[test]
fn library_export_follows_format() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("lib");
    ok(&["library", "--out", &s(&out)]);
    let csv = out.join("library.csv");
    assert_eq!(header(&csv), format!("wavelength_nm,{NAMES}"));
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 311);
    let meta = read_json(&out.join("meta.json"));
    assert_eq!(meta["library"]["source"], "builtin");
    assert_eq!(meta["library"]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn library_import_reports_clamping() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("custom.csv");
    let mut text = String::from("wavelength_nm,a,b\n");
    for i in 0..20 {
        let x = i as f64;
        text += &format!(
            "{},{},{}\n",
            500.0 + x,
            (x - 3.0) / 10.0,
            1.0 + x * x / 50.0
        );
    }
    std::fs::write(&csv, text).unwrap();
    let out = dir.path().join("lib");
    ok(&["library", "--library", &s(&csv), "--out", &s(&out)]);
    let meta = read_json(&out.join("meta.json"));
    assert_eq!(meta["library"]["clamped_entries"], 3);
    let rows = numeric_rows(&out.join("library.csv"));
    for j in 0..2 {
        let peak = rows.iter().map(|r| r[j]).fold(f64::MIN, f64::max);
        assert!((peak - 1.0).abs() < 1e-12);
    }
}

#[test]
fn simulate_writes_spectra_truth_and_meta() {
    let dir = TempDir::new().unwrap();
    let out = simulate(&dir, "sim", 15, 4);
    let spectra = std::fs::read_to_string(out.join("spectra.csv")).unwrap();
    let head = spectra.lines().next().unwrap();
    assert!(head.starts_with("wavelength_nm,spec_0001,spec_0002"));
    assert_eq!(head.split(',').count(), 16);
    assert_eq!(spectra.lines().count(), 311);
    assert_eq!(
        header(&out.join("truth.csv")),
        format!("spectrum_id,{NAMES}")
    );
    let truth = numeric_rows(&out.join("truth.csv"));
    assert_eq!(truth.len(), 15);
    assert!(truth.iter().flatten().all(|&v| v == 0.0 || v >= 0.15));
    let meta = read_json(&out.join("meta.json"));
    assert_eq!(meta["parameters"]["seed"], 4);
    assert_eq!(meta["parameters"]["n"], 15);
}

#[test]
fn simulate_is_reproducible_and_seed_sensitive() {
    let dir = TempDir::new().unwrap();
    let a = simulate(&dir, "a", 10, 1);
    let b = simulate(&dir, "b", 10, 1);
    let c = simulate(&dir, "c", 10, 2);
    let read = |p: &Path| std::fs::read(p.join("spectra.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
}

#[test]
fn simulate_rejects_invalid_settings() {
    let dir = TempDir::new().unwrap();
    let out = s(&dir.path().join("x"));
    assert_eq!(code(&unmix(&["simulate", "--n", "0", "--out", &out])), 3);
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"n": 5, "no_such_field": 1}"#).unwrap();
    assert_eq!(
        code(&unmix(&["simulate", "--config", &s(&cfg), "--out", &out])),
        3
    );
    std::fs::write(&cfg, r#"{"smoothing_window": 4}"#).unwrap();
    assert_eq!(
        code(&unmix(&["simulate", "--config", &s(&cfg), "--out", &out])),
        3
    );
    assert_eq!(code(&unmix(&["simulate", "--bogus", "--out", &out])), 3);
}

#[test]
fn literal_noise_flag_is_recorded() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sim");
    ok(&["simulate", "--n", "5", "--literal-noise", "--out", &s(&out)]);
    assert_eq!(
        read_json(&out.join("meta.json"))["parameters"]["noise_mode"],
        "literal"
    );
}

#[test]
fn nnls_recovers_noiseless_truth() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("clean.json");
    std::fs::write(
        &cfg,
        r#"{"n": 30, "intensity_scale": 0, "smoothing_window": 1, "smoothing_order": 0}"#,
    )
    .unwrap();
    let sim = dir.path().join("sim");
    ok(&[
        "simulate",
        "--config",
        &s(&cfg),
        "--seed",
        "8",
        "--out",
        &s(&sim),
    ]);
    let out = dir.path().join("un");
    ok(&[
        "unmix",
        "--spectra",
        &s(&sim.join("spectra.csv")),
        "--algo",
        "nnls",
        "--out",
        &s(&out),
    ]);
    assert_eq!(
        header(&out.join("abundances.csv")),
        format!("spectrum_id,{NAMES}")
    );
    let est = numeric_rows(&out.join("abundances.csv"));
    let truth = numeric_rows(&sim.join("truth.csv"));
    let err = est
        .iter()
        .flatten()
        .zip(truth.iter().flatten())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-8, "max error {err}");
    let diag = read_json(&out.join("diagnostics.json"));
    assert_eq!(diag["n_spectra"], 30);
    assert_eq!(diag["spectra"].as_array().unwrap().len(), 30);
    assert!(diag["metrics"].is_null());
}

#[test]
fn unmix_metrics_match_bench_row() {
    let dir = TempDir::new().unwrap();
    let sim = simulate(&dir, "sim", 40, 5);
    let un = dir.path().join("un");
    ok(&[
        "unmix",
        "--spectra",
        &s(&sim.join("spectra.csv")),
        "--truth",
        &s(&sim.join("truth.csv")),
        "--algo",
        "ista",
        "--lambda",
        "1.4",
        "--out",
        &s(&un),
    ]);
    let metrics = &read_json(&un.join("diagnostics.json"))["metrics"];

    let cfg = dir.path().join("bench.json");
    std::fs::write(
        &cfg,
        r#"{"grid": [{"algorithm": "ista", "lambda": 1.4}], "repetitions": 1}"#,
    )
    .unwrap();
    let bench = dir.path().join("bench");
    ok(&[
        "bench",
        "--config",
        &s(&cfg),
        "--n",
        "40",
        "--seed",
        "5",
        "--out",
        &s(&bench),
    ]);
    let text = std::fs::read_to_string(bench.join("bench.csv")).unwrap();
    let mut lines = text.lines();
    let cols: Vec<&str> = lines.next().unwrap().split(',').collect();
    let vals: Vec<&str> = lines.next().unwrap().split(',').collect();
    for key in [
        "reconstruction_mse_mean",
        "abundance_mse_mean",
        "sam_mean",
        "l0_mean",
        "false_positives",
    ] {
        let i = cols.iter().position(|c| *c == key).unwrap();
        let from_bench: f64 = vals[i].parse().unwrap();
        let from_unmix = metrics[key].as_f64().unwrap();
        assert!(
            (from_bench - from_unmix).abs() <= 1e-12 * from_bench.abs().max(1.0),
            "{key}"
        );
    }
}

#[test]
fn unmix_error_codes() {
    let dir = TempDir::new().unwrap();
    let sim = simulate(&dir, "sim", 5, 1);
    let spectra = s(&sim.join("spectra.csv"));
    let out = s(&dir.path().join("un"));
    let missing = s(&dir.path().join("nope.csv"));
    assert_eq!(
        code(&unmix(&["unmix", "--spectra", &missing, "--out", &out])),
        2
    );
    assert_eq!(
        code(&unmix(&[
            "unmix",
            "--library",
            &missing,
            "--spectra",
            &spectra,
            "--out",
            &out
        ])),
        2
    );
    assert_eq!(
        code(&unmix(&[
            "unmix",
            "--spectra",
            &spectra,
            "--algo",
            "fista",
            "--out",
            &out
        ])),
        3
    );
    assert_eq!(
        code(&unmix(&[
            "unmix",
            "--spectra",
            &spectra,
            "--lambda",
            "-1",
            "--out",
            &out
        ])),
        3
    );
    assert_eq!(
        code(&unmix(&[
            "unmix",
            "--spectra",
            &spectra,
            "--mu",
            "1.0",
            "--out",
            &out
        ])),
        3
    );
}

#[test]
fn grid_mismatch_needs_resample() {
    let dir = TempDir::new().unwrap();
    let lib = dir.path().join("lib");
    ok(&["library", "--out", &s(&lib)]);
    // every third sample: a coarser uniform grid with the same endpoints
    let text = std::fs::read_to_string(lib.join("library.csv")).unwrap();
    let coarse: String = text
        .lines()
        .enumerate()
        .filter(|(i, _)| *i == 0 || (i - 1) % 3 == 0)
        .map(|(_, l)| format!("{l}\n"))
        .collect();
    let coarse_path = dir.path().join("coarse.csv");
    std::fs::write(&coarse_path, coarse).unwrap();

    let sim = simulate(&dir, "sim", 5, 1);
    let spectra = s(&sim.join("spectra.csv"));
    let out = dir.path().join("un");
    let args = [
        "unmix",
        "--library",
        &s(&coarse_path),
        "--spectra",
        &spectra,
        "--out",
        &s(&out),
    ];
    assert_eq!(code(&unmix(&args)), 4);
    let mut with_resample = args.to_vec();
    with_resample.push("--resample");
    ok(&with_resample);
    let meta = read_json(&out.join("meta.json"));
    assert_eq!(meta["library"]["resampled"], true);
    assert_eq!(meta["library"]["wavelengths"], 310);
}

#[test]
fn noise_report_and_validation() {
    let dir = TempDir::new().unwrap();
    let small = simulate(&dir, "small", 50, 1);
    let out = dir.path().join("noise");
    let code_small = code(&unmix(&[
        "noise",
        "--spectra",
        &s(&small.join("spectra.csv")),
        "--out",
        &s(&out),
    ]));
    assert_eq!(code_small, 3);

    let constant = dir.path().join("constant.csv");
    let mut text = String::from("wavelength_nm");
    for j in 0..120 {
        text += &format!(",spec_{j:04}");
    }
    text += "\n";
    for i in 0..64 {
        text += &format!("{}", 500 + i);
        for _ in 0..120 {
            text += ",5";
        }
        text += "\n";
    }
    std::fs::write(&constant, text).unwrap();
    assert_eq!(
        code(&unmix(&[
            "noise",
            "--spectra",
            &s(&constant),
            "--out",
            &s(&out)
        ])),
        3
    );

    let sim = simulate(&dir, "sim", 150, 2);
    let spectra = s(&sim.join("spectra.csv"));
    ok(&[
        "noise",
        "--spectra",
        &spectra,
        "--scale",
        "1e4",
        "--cutoff",
        "0.2",
        "--out",
        &s(&out),
    ]);
    let report = read_json(&out.join("noise_report.json"));
    assert_eq!(report["config"]["cutoff"], 0.2);
    assert_eq!(report["n_spectra"], 150);
    assert_eq!(
        read_json(&out.join("meta.json"))["parameters"]["config"]["cutoff"],
        0.2
    );
    assert_eq!(
        header(&out.join("noise.csv")),
        "wavelength_nm,signal_mean,noise_mean,noise_variance,kl_poisson,kl_constant"
    );
    assert_eq!(numeric_rows(&out.join("noise.csv")).len(), 310);

    for bad in [
        ["--cutoff", "0.7"],
        ["--cutoff", "0"],
        ["--scale", "-1"],
        ["--bins", "3"],
    ] {
        let args = [
            "noise",
            "--spectra",
            &spectra,
            bad[0],
            bad[1],
            "--out",
            &s(&out),
        ];
        assert_eq!(code(&unmix(&args)), 3, "{bad:?}");
    }
}

#[test]
fn bench_rows_and_checks() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("bench");
    ok(&[
        "bench",
        "--n",
        "30",
        "--repetitions",
        "1",
        "--out",
        &s(&out),
    ]);
    let text = std::fs::read_to_string(out.join("bench.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 10);
    assert!(lines[0].starts_with("algorithm,lambda,reconstruction_mse_mean"));
    let checks = read_json(&out.join("checks.json"));
    assert_eq!(checks.as_array().unwrap().len(), 4);

    // a grid without the sparse rows cannot satisfy the orderings
    let cfg = dir.path().join("nnls_only.json");
    std::fs::write(
        &cfg,
        r#"{"grid": [{"algorithm": "nnls"}], "repetitions": 1}"#,
    )
    .unwrap();
    let failed = unmix(&[
        "bench",
        "--config",
        &s(&cfg),
        "--n",
        "20",
        "--check",
        "--out",
        &s(&out),
    ]);
    assert_eq!(code(&failed), 1);
    assert!(String::from_utf8_lossy(&failed.stderr).contains("false_positive_ordering"));

    std::fs::write(&cfg, r#"{"grid": [], "repetitions": 1}"#).unwrap();
    assert_eq!(
        code(&unmix(&["bench", "--config", &s(&cfg), "--out", &s(&out)])),
        3
    );
}

#[test]
fn bench_check_passes_on_default_corpus() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("bench");
    let run = unmix(&["bench", "--repetitions", "1", "--check", "--out", &s(&out)]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stdout));
}

#[test]
fn plots_library_spectra_and_noise() {
    let dir = TempDir::new().unwrap();
    let lib = dir.path().join("lib");
    ok(&["library", "--out", &s(&lib)]);
    let plots = dir.path().join("plots");
    ok(&[
        "plot",
        "--input",
        &s(&lib.join("library.csv")),
        "--out",
        &s(&plots),
    ]);
    let svg = std::fs::read_to_string(plots.join("spectra.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("<polyline").count(), 9);
    assert!(svg.contains("data-label=\"Melanin\""));

    let sim = simulate(&dir, "sim", 120, 3);
    ok(&[
        "plot",
        "--input",
        &s(&sim.join("spectra.csv")),
        "--max-curves",
        "5",
        "--out",
        &s(&plots),
    ]);
    let svg = std::fs::read_to_string(plots.join("spectra.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 5);

    let noise = dir.path().join("noise");
    ok(&[
        "noise",
        "--spectra",
        &s(&sim.join("spectra.csv")),
        "--scale",
        "1e4",
        "--out",
        &s(&noise),
    ]);
    ok(&[
        "plot",
        "--input",
        &s(&noise.join("noise.csv")),
        "--out",
        &s(&plots),
    ]);
    let mv = std::fs::read_to_string(plots.join("mean_variance.svg")).unwrap();
    assert_eq!(mv.matches("<circle").count(), 310);
    let slope: f64 = mv
        .split("data-slope=\"")
        .nth(1)
        .unwrap()
        .split('"')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    let reported = read_json(&noise.join("noise_report.json"))["slope"]
        .as_f64()
        .unwrap();
    assert!((slope - reported).abs() < 1e-6 * reported.abs().max(1.0));
    assert!(plots.join("kl.svg").exists());
}

#[test]
fn plot_rejects_bad_input() {
    let dir = TempDir::new().unwrap();
    let out = s(&dir.path().join("plots"));
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    assert_eq!(
        code(&unmix(&["plot", "--input", &s(&empty), "--out", &out])),
        3
    );
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "wavelength_nm,a\n400,1\n401,oops\n").unwrap();
    assert_eq!(
        code(&unmix(&["plot", "--input", &s(&bad), "--out", &out])),
        3
    );
    let missing = s(&dir.path().join("missing.csv"));
    assert_eq!(
        code(&unmix(&["plot", "--input", &missing, "--out", &out])),
        2
    );
}

#[test]
fn thread_variable_is_validated() {
    let dir = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_unmix"))
        .args(["library", "--out", &s(&dir.path().join("lib"))])
        .env("UNMIX_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(code(&out), 3);
    let out = Command::new(env!("CARGO_BIN_EXE_unmix"))
        .args(["library", "--out", &s(&dir.path().join("lib"))])
        .env("UNMIX_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
}

#[test]
fn help_and_version_exit_cleanly() {
    assert_eq!(code(&unmix(&["--help"])), 0);
    assert_eq!(code(&unmix(&["--version"])), 0);
    assert_eq!(code(&unmix(&[])), 3);
}
