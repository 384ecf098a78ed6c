use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ridgeless_cli::config::ExperimentConfig;
use ridgeless_cli::plot::emit_plot_data;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn ridgeless(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ridgeless"))
        .args(args)
        .env_remove("RIDGELESS_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn run_config(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "run",
        config.to_str().unwrap(),
        "--output-dir",
        out.to_str().unwrap(),
        "--quiet",
    ];
    args.extend(extra);
    ridgeless(&args)
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

const MINIMAL: &str = r#"
[model]
name = "neoclassical-growth"

[kernel]

[grid]
mode = "equispaced"
T = 40.0
N = 41

[solver]

[experiment]
kind = "solve"
"#;

#[test]
fn missing_block_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    fs::write(&path, MINIMAL.replace("[kernel]\n", "")).unwrap();
    let out = run_config(&path, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(2));
    let record: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(record["kind"], "config");
    assert_eq!(record["field"], "kernel");
    assert!(record["message"].as_str().unwrap().contains("[kernel]"));
}

#[test]
fn validation_errors_carry_field_paths() {
    let cases = [
        ("[kernel]\n", "[kernel]\nell = -1.0\n", "kernel.ell"),
        ("[solver]\n", "[solver]\nlambda = 0.0\n", "solver.lambda"),
        (
            "mode = \"equispaced\"\nT = 40.0\nN = 41\n",
            "mode = \"explicit\"\npoints = [0.0, 2.0, 1.0]\n",
            "grid.points",
        ),
        ("[experiment]\n", "[experiment]\ncolour = 1\n", "experiment.colour"),
        (
            "name = \"neoclassical-growth\"\n",
            "name = \"neoclassical-growth\"\n[model.params]\nbeta = 1.0\n",
            "model.params.beta",
        ),
        (
            "name = \"neoclassical-growth\"\n",
            "name = \"neoclassical-growth\"\n[model.params]\nx0 = -1.0\n",
            "model.params",
        ),
    ];
    for (from, to, field) in cases {
        let text = MINIMAL.replacen(from, to, 1);
        let Err(ridgeless_cli::CliError::Config { field: got, .. }) = ExperimentConfig::parse(&text) else {
            panic!("{field}: expected a config error");
        };
        assert_eq!(got, field, "{text}");
    }
    assert!(ExperimentConfig::parse(MINIMAL).is_ok());
}

#[test]
fn defaults_are_resolved_into_the_manifest() {
    let c = ExperimentConfig::parse(MINIMAL).unwrap();
    assert_eq!(c.model.params.delta, Some(0.1));
    assert_eq!(c.kernel.ell, 10.0);
    let again = ExperimentConfig::parse(&c.to_toml()).unwrap();
    assert_eq!(c, again);
}

#[test]
fn every_shipped_config_parses() {
    let mut n = 0;
    for entry in fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        ExperimentConfig::from_path(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        n += 1;
    }
    assert!(n >= 5);
}

#[test]
fn baseline_outputs_and_manifest_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let out = run_config(&configs().join("growth.toml"), &first, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let (header, rows) = read_csv(&first.join("solution.csv"));
    assert_eq!(
        header,
        [
            "t",
            "variable",
            "value",
            "rel_error",
            "norm_sq",
            "nu",
            "ell",
            "N",
            "seed",
            "status"
        ]
    );
    // x, mu, y and their derivatives at 401 times
    assert_eq!(rows.len(), 401 * 6);
    assert_eq!(rows.last().unwrap()[0].parse::<f64>().unwrap(), 60.0);
    let full_precision = |s: &str| {
        let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
        mantissa.len() == 18 && mantissa.as_bytes()[1] == b'.'
    };
    assert!(rows.iter().all(|r| full_precision(&r[0]) && full_precision(&r[2])));

    let (_, errors) = read_csv(&first.join("errors.csv"));
    let max_x = errors
        .iter()
        .filter(|r| r[1] == "x" && r[0].parse::<f64>().unwrap() <= 40.0)
        .map(|r| r[3].parse::<f64>().unwrap())
        .fold(0.0, f64::max);
    assert!(max_x <= 5e-3, "{max_x}");

    let mut plots: Vec<String> = fs::read_dir(first.join("plot"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    plots.sort();
    assert_eq!(plots, ["err_x.dat", "err_y.dat", "x.dat", "y.dat"]);
    let x_plot = fs::read_to_string(first.join("plot/x.dat")).unwrap();
    assert!(x_plot.starts_with("# training horizon marker at t = 4.0000000000000000e1\n"));
    assert_eq!(x_plot.lines().filter(|l| !l.starts_with('#')).count(), 401);

    let second = dir.path().join("second");
    let out = run_config(&first.join("manifest.toml"), &second, &[]);
    assert!(out.status.success());
    for file in ["solution.csv", "errors.csv", "plot/x.dat", "plot/err_y.dat"] {
        assert_eq!(
            fs::read(first.join(file)).unwrap(),
            fs::read(second.join(file)).unwrap(),
            "{file}"
        );
    }
}

#[test]
fn output_directory_falls_back_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    fs::write(
        &path,
        MINIMAL.replace("kind = \"solve\"", "kind = \"solve\"\n[output]\nemit_plot_data = false"),
    )
    .unwrap();
    let target = dir.path().join("from-env");
    let out = Command::new(env!("CARGO_BIN_EXE_ridgeless"))
        .args(["run", path.to_str().unwrap(), "--quiet"])
        .env("RIDGELESS_OUTPUT_DIR", &target)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(target.join("solution.csv").exists());
    assert!(!target.join("plot").exists());
}

#[test]
fn non_convergence_has_its_own_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    fs::write(&path, MINIMAL.replace("[solver]\n", "[solver]\nmax_iterations = 1\n")).unwrap();
    let out = run_config(&path, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(3));
    let record: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(record["kind"], "non-convergence");
    // outputs are still written, flagged as non-converged
    let (_, rows) = read_csv(&dir.path().join("out/solution.csv"));
    assert!(rows.iter().all(|r| r[9] == "non-converged"));
}

#[test]
fn skiba_sweep_labels_every_initial_condition() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config(&configs().join("skiba.toml"), dir.path(), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&dir.path().join("report.csv"));
    assert_eq!(&header[10..], ["x0", "steady_state"]);
    assert_eq!(rows.len(), 70);
    assert!(rows.iter().all(|r| r[11] == "0" || r[11] == "1"));
}

#[test]
fn iid_consistency_sweep_follows_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    let text = fs::read_to_string(configs().join("growth-consistency.toml"))
        .unwrap()
        .replace("mode = \"equispaced\"", "mode = \"uniform-iid\"")
        .replace("N_list = [8, 12, 20, 41]", "N_list = [20, 30]");
    fs::write(&path, text).unwrap();
    let run = |name: &str, seed: &str| {
        let out = run_config(&path, &dir.path().join(name), &["--seed", seed]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        fs::read(dir.path().join(name).join("report.csv")).unwrap()
    };
    let (a, b, c) = (run("a", "5"), run("b", "5"), run("c", "6"));
    assert_eq!(a, b);
    assert_ne!(a, c);
    let manifest = ExperimentConfig::from_path(&dir.path().join("a/manifest.toml")).unwrap();
    assert_eq!(manifest.grid.seed, 5);
}

#[test]
fn asset_plot_overlays_the_fundamental_price() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config(&configs().join("asset-pricing.toml"), dir.path(), &[]);
    assert!(out.status.success());
    for f in ["mu_x.dat", "mu_x_oracle.dat", "err_mu_x.dat"] {
        assert!(dir.path().join("plot").join(f).exists(), "{f}");
    }
}

#[test]
fn plot_data_rejects_bad_input_without_partial_files() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "t,variable,value,rel_error,norm_sq,nu,ell,N,seed,status\n").unwrap();
    let target = dir.path().join("plot");
    assert!(emit_plot_data(&empty, None, &target, 40.0).is_err());
    assert!(!target.exists());

    let no_value = dir.path().join("no_value.csv");
    fs::write(&no_value, "t,variable\n0.0,x\n").unwrap();
    let err = emit_plot_data(&no_value, None, &target, 40.0).unwrap_err();
    assert!(err.to_string().contains("value"));
    assert!(!target.exists());
}
