//! gnuplot-ready two-column data files derived from the CSV outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::CliError;
use crate::run::format_float;

type Series = Vec<(f64, f64)>;

/// Series per variable from a long-format CSV, in order of first appearance.
fn read_series(path: &Path, value_column: &str) -> Result<Vec<(String, Series)>, CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::io(path, e))?;
    let headers = reader.headers().map_err(|e| CliError::io(path, e))?.clone();
    let column = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| CliError::Config {
            field: format!("{}:{name}", path.display()),
            message: format!("missing column `{name}`"),
        })
    };
    let (ti, vi, ci) = (column("t")?, column("variable")?, column(value_column)?);
    let mut order: Vec<String> = Vec::new();
    let mut series: BTreeMap<String, Series> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::io(path, e))?;
        let parse = |i: usize| -> Result<f64, CliError> {
            record[i].parse().map_err(|_| CliError::Config {
                field: format!("{}:{}", path.display(), &headers[i]),
                message: format!("`{}` is not a number", &record[i]),
            })
        };
        let name = record[vi].to_string();
        if !series.contains_key(&name) {
            order.push(name.clone());
        }
        series.entry(name).or_default().push((parse(ti)?, parse(ci)?));
    }
    Ok(order
        .into_iter()
        .map(|n| {
            let s = series.remove(&n).expect("recorded");
            (n, s)
        })
        .collect())
}

fn render(series: &Series, horizon: f64, column: &str) -> String {
    let mut s = format!(
        "# training horizon marker at t = {}\n# t {column}\n",
        format_float(horizon)
    );
    for (t, v) in series {
        s.push_str(&format!("{} {}\n", format_float(*t), format_float(*v)));
    }
    s
}

/// Writes one file per plotted level (`<v>.dat`) and one per error series
/// (`err_<v>.dat`). Co-states are plotted only when the oracle covers
/// nothing else, together with the oracle overlay (`<v>_oracle.dat`).
/// Nothing is written unless every input parses.
pub fn emit_plot_data(
    solution_csv: &Path,
    errors_csv: Option<&Path>,
    directory: &Path,
    horizon: f64,
) -> Result<Vec<PathBuf>, CliError> {
    let levels = read_series(solution_csv, "value")?;
    if levels.is_empty() {
        return Err(CliError::Numerical(format!(
            "{} holds no trajectory",
            solution_csv.display()
        )));
    }
    let names: Vec<&str> = levels.iter().map(|(n, _)| n.as_str()).collect();
    let is_derivative = |n: &str| n.strip_prefix('d').is_some_and(|rest| names.contains(&rest));
    let (errors, oracle) = match errors_csv {
        Some(p) => (read_series(p, "rel_error")?, read_series(p, "value")?),
        None => (Vec::new(), Vec::new()),
    };
    let has_oracle = |n: &str| errors.iter().any(|(e, _)| e == n);
    // co-states are plotted only when they are all the oracle covers
    let costate_oracle = !errors.is_empty() && errors.iter().all(|(n, _)| n.starts_with("mu"));

    let mut files: Vec<(String, String)> = Vec::new();
    for (name, series) in &levels {
        if is_derivative(name) || (name.starts_with("mu") && !(costate_oracle && has_oracle(name))) {
            continue;
        }
        files.push((format!("{name}.dat"), render(series, horizon, name)));
    }
    for ((name, err), (_, reference)) in errors.iter().zip(&oracle) {
        if !files.iter().any(|(f, _)| f == &format!("{name}.dat")) {
            continue;
        }
        files.push((
            format!("err_{name}.dat"),
            render(err, horizon, &format!("rel_error_{name}")),
        ));
        if name.starts_with("mu") {
            files.push((
                format!("{name}_oracle.dat"),
                render(reference, horizon, &format!("{name}_oracle")),
            ));
        }
    }

    fs::create_dir_all(directory).map_err(|e| CliError::io(directory, e))?;
    files
        .into_iter()
        .map(|(file, body)| {
            let path = directory.join(file);
            fs::write(&path, body).map_err(|e| CliError::io(&path, e))?;
            Ok(path)
        })
        .collect()
}
