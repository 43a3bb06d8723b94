use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thermsearch"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Data rows of a CSV table: preamble and header dropped.
fn data_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn error_json(out: &Output) -> serde_json::Value {
    let line = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(line.trim()).unwrap_or_else(|e| panic!("{e}: {line}"))
}

#[test]
fn spectrum_lists_four_levels_with_marker_first() {
    let out = stdout(&run(&[
        "spectrum", "--n", "4", "--a", "1", "--b", "2", "--beta", "1", "--ell", "4",
    ]));
    let rows = data_rows(&out);
    assert_eq!(rows.len(), 4);
    let first: f64 = rows[0][2].parse().unwrap();
    assert!((first - (1.0f64 - 2.0) * 4f64.ln()).abs() < 1e-15);
    assert_eq!(rows[0][1], "4");
    assert!(out.contains("# dominant: true"));
}

#[test]
fn flat_model_equilibrium() {
    let beta_eps = format!("{}", -(10f64.ln()));
    let out = stdout(&run(&["equilibrium", "--n", "3", "--beta-eps", &beta_eps]));
    let rows = data_rows(&out);
    let p1: f64 = rows[0][1].parse().unwrap();
    assert!((p1 - 1.0 / 1.2).abs() < 1e-14, "{p1}");
}

#[test]
fn outputs_embed_the_run_config() {
    let out = stdout(&run(&[
        "equilibrium",
        "--n",
        "7",
        "--a",
        "0.5",
        "--format",
        "json",
    ]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let cfg: serde_json::Value = v["metadata"]["config"].clone();
    assert_eq!(cfg["command"], "equilibrium");
    assert_eq!(cfg["model"]["n"], 7);
    assert_eq!(cfg["model"]["a"], 0.5);
}

#[test]
fn bad_flags_exit_with_usage_code() {
    let out = run(&["relax", "--n", "10", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["relax", "--n", "10", "--b", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"], "usage");
    let out = run(&["relax", "--n", "10", "--threshold", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_input_is_an_io_error_naming_the_path() {
    let out = run(&["fit", "--input", "/nonexistent/scan.csv"]);
    assert_eq!(out.status.code(), Some(1));
    let e = error_json(&out);
    assert_eq!(e["error"], "io");
    assert!(e["message"]
        .as_str()
        .unwrap()
        .contains("/nonexistent/scan.csv"));
}

#[test]
fn unwritable_output_names_the_path() {
    let out = run(&["spectrum", "--n", "5", "-o", "/nonexistent/dir/out.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(error_json(&out)["message"]
        .as_str()
        .unwrap()
        .contains("/nonexistent/dir/out.csv"));
}

#[test]
fn scan_file_refits_to_the_same_line() {
    let dir = TempDir::new().unwrap();
    let scan = dir.path().join("scan.csv");
    let scan_s = scan.to_str().unwrap();
    stdout(&run(&[
        "tau-scan",
        "--n-grid",
        "50,100,150,200,300",
        "-o",
        scan_s,
    ]));
    let text = std::fs::read_to_string(&scan).unwrap();
    let embedded = text
        .lines()
        .find_map(|l| l.strip_prefix("# fit: "))
        .expect("fit in preamble");
    let embedded: serde_json::Value = serde_json::from_str(embedded).unwrap();

    let out = stdout(&run(&["fit", "--input", scan_s, "--format", "json"]));
    let refit: serde_json::Value = serde_json::from_str(&out).unwrap();
    let row = &refit["rows"][0]; // series, model, slope, intercept, ...
                                 // 17 significant digits survive the trip through the file
    assert_eq!(row[2].as_f64(), embedded["slope"].as_f64());
    assert_eq!(row[3].as_f64(), embedded["intercept"].as_f64());
}

#[test]
fn relax_reaches_equilibrium_and_conserves_probability() {
    let out = stdout(&run(&[
        "relax", "--n", "60", "--t-max", "200", "--steps", "20", "--full",
    ]));
    let eq: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("# p1_eq: "))
        .unwrap()
        .parse()
        .unwrap();
    for row in data_rows(&out) {
        let ps: Vec<f64> = row[2..].iter().map(|x| x.parse().unwrap()).collect();
        assert!((ps.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(ps.iter().all(|&p| p >= -1e-15));
    }
    let last: f64 = data_rows(&out).last().unwrap()[1].parse().unwrap();
    assert!((last - eq).abs() < 1e-9);
}

#[test]
fn gillespie_is_reproducible_from_its_seed() {
    let args = [
        "gillespie",
        "--n",
        "20",
        "--traj",
        "2000",
        "--seed",
        "3",
        "--times",
        "1,4",
    ];
    let a = stdout(&run(&args));
    assert_eq!(a, stdout(&run(&args)));
    assert_eq!(data_rows(&a).len(), 2);
    let mut other = args;
    other[6] = "4";
    assert_ne!(a, stdout(&run(&other)));
}

fn svg_of(path: &Path) -> String {
    let s = std::fs::read_to_string(path).unwrap();
    assert!(
        s.starts_with("<svg") || s.starts_with("<?xml"),
        "{}",
        &s[..s.len().min(80)]
    );
    s
}

#[test]
fn plot_redraws_saved_tables() {
    let dir = TempDir::new().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    stdout(&run(&[
        "relax",
        "--n",
        "40",
        "--steps",
        "20",
        "-o",
        &p("relax.csv"),
    ]));
    stdout(&run(&[
        "plot",
        "--kind",
        "p1",
        "--input",
        &p("relax.csv"),
        "-o",
        &p("relax.svg"),
    ]));
    assert!(svg_of(Path::new(&p("relax.svg"))).contains("N = 40"));

    stdout(&run(&["gamma", "--n-grid", "20,40", "-o", &p("gamma.csv")]));
    stdout(&run(&[
        "plot",
        "--kind",
        "gamma",
        "--input",
        &p("gamma.csv"),
        "-o",
        &p("gamma.svg"),
    ]));
    let g = svg_of(Path::new(&p("gamma.svg")));
    assert!(g.contains("N = 20") && g.contains("N = 40"));

    stdout(&run(&[
        "tau-scan",
        "--n-grid",
        "30,60,90,120",
        "-o",
        &p("scan.csv"),
    ]));
    stdout(&run(&[
        "plot",
        "--kind",
        "tau",
        "--input",
        &p("scan.csv"),
        "-o",
        &p("tau.svg"),
        "--fit",
        "log",
    ]));
    assert!(svg_of(Path::new(&p("tau.svg"))).contains("ln N"));
}

#[test]
fn unknown_plot_kind_lists_the_supported_ones() {
    let out = run(&[
        "plot", "--kind", "heatmap", "--input", "x.csv", "-o", "x.svg",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let msg = error_json(&out)["message"].as_str().unwrap().to_string();
    for k in ["p1", "gamma", "tau"] {
        assert!(msg.contains(k), "{msg}");
    }
}

#[test]
fn rate_dump_has_one_line_per_ordered_pair() {
    let dir = TempDir::new().unwrap();
    let dump = dir.path().join("rates.txt");
    stdout(&run(&[
        "spectrum",
        "--n",
        "6",
        "--dump-rates",
        dump.to_str().unwrap(),
    ]));
    let text = std::fs::read_to_string(&dump).unwrap();
    let lines: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(lines.len(), 30);
    for l in lines {
        let f: Vec<&str> = l.split_whitespace().collect();
        assert_eq!(f.len(), 3);
        let v: f64 = f[2].parse().unwrap();
        assert!(v > 0.0 && v < 1.0);
    }
}
