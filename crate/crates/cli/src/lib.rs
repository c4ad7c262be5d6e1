//! `hazardlab` command-line front end.
//!
//! Exit codes: 0 on success, 1 for invalid input or arguments, 2 for
//! numerical failures (separation, singular information, non-convergence).

pub mod plot;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use hazardlab_core::io::{load_csv_inferred, save_csv};
use hazardlab_core::numfmt::sig;
use hazardlab_core::sim::{
    REFERENCE_EVENT_TOTAL, STANDARD_HORIZON_S, STANDARD_MINUTES_PER_COMBINATION,
};
use hazardlab_core::{
    calibrate_baseline_rate, encode_campaign_covariates, fit, kaplan_meier, load_csv,
    predict_survival, simulate, standard_campaign_config, two_group_hazard_ratio, CoxFit64,
    Dataset64, Error, FitOptions, ModelType, Schema, SurvivalCurve64, TieMethod,
};

pub use plot::{emit_hazard_ratio_plot, emit_plot, PlotStyle};

/// Seed used when neither `--seed` nor `HAZARDLAB_SEED` is given.
pub const DEFAULT_SEED: u64 = 7;
const SIGNIFICANT: usize = 6;

#[derive(Debug, Parser)]
#[command(
    name = "hazardlab",
    version,
    about = "Survival analysis for right-censored drive campaigns"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Kaplan-Meier survival estimate with confidence bands.
    FitKm(FitKm),
    /// Cox proportional-hazards regression.
    FitCox(FitCox),
    /// Observed/expected hazard ratio between two datasets.
    LogrankHr(LogrankHr),
    /// Simulate a right-censored driving campaign.
    Simulate(Simulate),
    /// Full analysis of a campaign file: curves, Cox table and plots.
    Report(Report),
}

#[derive(Debug, Args)]
struct FitKm {
    input: PathBuf,
    #[arg(long, default_value_t = 0.95)]
    confidence: f64,
    /// Split by a 0/1 covariate column.
    #[arg(long)]
    group_by: Option<String>,
    /// Also write an SVG plot (and a sibling CSV of plotted points).
    #[arg(long)]
    plot: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = StyleArg::Survival)]
    style: StyleArg,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StyleArg {
    Survival,
    CumulativeHazard,
}

impl From<StyleArg> for PlotStyle {
    fn from(s: StyleArg) -> Self {
        match s {
            StyleArg::Survival => PlotStyle::Survival,
            StyleArg::CumulativeHazard => PlotStyle::CumulativeHazard,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TiesArg {
    Breslow,
    Efron,
}

#[derive(Debug, Args)]
struct FitCox {
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = TiesArg::Breslow)]
    ties: TiesArg,
    #[arg(long, default_value_t = 1e-7)]
    tolerance: f64,
    #[arg(long, default_value_t = 50)]
    max_iter: usize,
    #[arg(long, default_value_t = 0.95)]
    confidence: f64,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct LogrankHr {
    input_a: PathBuf,
    input_b: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct Simulate {
    #[arg(long, env = "HAZARDLAB_SEED", default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Driving minutes per model/weather combination.
    #[arg(long, default_value_t = STANDARD_MINUTES_PER_COMBINATION)]
    minutes: f64,
    #[arg(long, default_value_t = STANDARD_HORIZON_S)]
    horizon: f64,
    /// Log hazard ratios for rain,fog,night,experts,universal.
    #[arg(long, value_delimiter = ',', num_args = 1..=5, allow_negative_numbers = true)]
    beta: Option<Vec<f64>>,
    /// Baseline hazard per second.
    #[arg(long, conflicts_with = "calibrate_events")]
    rate: Option<f64>,
    /// Calibrate the baseline rate to this expected event total.
    #[arg(long)]
    calibrate_events: Option<usize>,
    /// Weibull shape of the baseline hazard (1 = exponential).
    #[arg(long, default_value_t = 1.0)]
    weibull_shape: f64,
    #[arg(long)]
    out: PathBuf,
    /// Write the JSON campaign summary here.
    #[arg(long)]
    summary: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct Report {
    input: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 0.95)]
    confidence: f64,
}

enum Failure {
    Input(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type CmdResult = std::result::Result<(), Failure>;

/// Runs with the process streams and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

/// Runs with explicit output streams and returns the exit code.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::FitKm(a) => fit_km(a, out),
        Command::FitCox(a) => fit_cox(a, out),
        Command::LogrankHr(a) => logrank_hr(a, out),
        Command::Simulate(a) => simulate_cmd(a, out),
        Command::Report(a) => report(a, out),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Input(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            1
        }
        Err(Failure::Numerical(msg)) => {
            let _ = writeln!(err, "numerical failure: {msg}");
            2
        }
    }
}

/// Rounds every non-integer number to the printed precision.
fn rounded(v: serde_json::Value) -> serde_json::Value {
    use serde_json::Value;
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64");
            sig(x, SIGNIFICANT)
                .parse::<f64>()
                .ok()
                .and_then(serde_json::Number::from_f64)
                .map_or(Value::Null, Value::Number)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(rounded).collect()),
        Value::Object(map) => {
            Value::Object(map.into_iter().map(|(k, v)| (k, rounded(v))).collect())
        }
        other => other,
    }
}

fn json_text(v: serde_json::Value) -> String {
    serde_json::to_string_pretty(&rounded(v)).expect("json") + "\n"
}

fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let mut line = |cells: Vec<&str>| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, &w)| format!("{c:>w$}"))
            .collect();
        out.push_str(parts.join("  ").trim_end());
        out.push('\n');
    };
    line(header.to_vec());
    for row in rows {
        line(row.iter().map(String::as_str).collect());
    }
    out
}

fn curve_table(curve: &SurvivalCurve64) -> String {
    let mut rows = Vec::with_capacity(curve.len() + 1);
    if curve.times.first().is_none_or(|&t| t > 0.0) {
        rows.push(vec![
            "0".into(),
            "1".into(),
            "1".into(),
            "1".into(),
            curve.total.to_string(),
        ]);
    }
    for i in 0..curve.len() {
        rows.push(vec![
            sig(curve.times[i], SIGNIFICANT),
            sig(curve.survival[i], SIGNIFICANT),
            sig(curve.ci_lower[i], SIGNIFICANT),
            sig(curve.ci_upper[i], SIGNIFICANT),
            curve.at_risk[i].to_string(),
        ]);
    }
    table(&["t", "survival", "ci_lower", "ci_upper", "at_risk"], &rows)
}

fn group_by_boolean(
    data: &Dataset64,
    schema: &Schema,
    column: &str,
) -> std::result::Result<Vec<(String, Dataset64)>, Failure> {
    let k = data
        .covariate_index(column)
        .ok_or_else(|| Failure::Input(format!("no covariate column `{column}`")))?;
    let values = data.column(k);
    let boolean = schema.kind_of(column) == Some(hazardlab_core::ColumnKind::Boolean)
        || values.iter().all(|&v| v == 0.0 || v == 1.0);
    if !boolean {
        return Err(Failure::Input(format!(
            "cannot group by continuous column `{column}`; grouping needs a 0/1 column"
        )));
    }
    Ok([0.0, 1.0]
        .iter()
        .filter_map(|&level| {
            data.filter(|o| o.covariates[k] == level)
                .map(|d| (format!("{column}={level}"), d))
        })
        .collect())
}

fn fit_km(a: FitKm, out: &mut dyn Write) -> CmdResult {
    let (data, schema) = load_csv_inferred(&a.input)?;
    let groups = match &a.group_by {
        Some(col) => group_by_boolean(&data, &schema, col)?,
        None => vec![("all".to_string(), data)],
    };
    let mut curves = Vec::with_capacity(groups.len());
    for (label, d) in &groups {
        curves.push(kaplan_meier(d, a.confidence)?.with_label(label.clone()));
    }
    if a.json {
        let items: Vec<_> = curves
            .iter()
            .map(|c| {
                let mut v = c.to_json();
                v["label"] = c.label.clone().into();
                v["all_censored"] = c.all_censored.into();
                v
            })
            .collect();
        out.write_all(json_text(serde_json::json!({ "curves": items })).as_bytes())?;
    } else {
        for c in &curves {
            writeln!(out, "# {}", c.label.as_deref().unwrap_or("all"))?;
            if c.all_censored {
                writeln!(
                    out,
                    "# warning: no events observed; survival is 1 throughout"
                )?;
            }
            out.write_all(curve_table(c).as_bytes())?;
        }
    }
    if let Some(path) = &a.plot {
        emit_plot(&curves, a.style.into(), path)?;
    }
    Ok(())
}

fn fit_options(a: &FitCox) -> FitOptions<f64> {
    FitOptions {
        tolerance: a.tolerance,
        max_iterations: a.max_iter,
        tie_method: match a.ties {
            TiesArg::Breslow => TieMethod::Breslow,
            TiesArg::Efron => TieMethod::Efron,
        },
        confidence_level: a.confidence,
    }
}

fn write_fit(f: &CoxFit64, json: bool, out: &mut dyn Write) -> std::io::Result<()> {
    if json {
        out.write_all(json_text(f.report_json()).as_bytes())
    } else {
        out.write_all(f.table().as_bytes())?;
        writeln!(
            out,
            "log-likelihood: {}  iterations: {}  converged: {}  ties: {}",
            sig(f.log_likelihood, SIGNIFICANT),
            f.iterations,
            f.converged,
            f.tie_method
        )
    }
}

fn not_converged(f: &CoxFit64) -> Failure {
    Failure::Numerical(
        Error::NotConverged {
            iterations: f.iterations,
            gradient_norm: f.gradient_norm,
        }
        .to_string(),
    )
}

fn fit_cox(a: FitCox, out: &mut dyn Write) -> CmdResult {
    let (data, _) = load_csv_inferred(&a.input)?;
    let f = fit(&data, &fit_options(&a))?;
    write_fit(&f, a.json, out)?;
    if f.converged {
        Ok(())
    } else {
        Err(not_converged(&f))
    }
}

fn logrank_hr(a: LogrankHr, out: &mut dyn Write) -> CmdResult {
    let (ga, _) = load_csv_inferred(&a.input_a)?;
    let (gb, _) = load_csv_inferred(&a.input_b)?;
    let hr = two_group_hazard_ratio(&ga, &gb)?;
    if a.json {
        out.write_all(json_text(serde_json::to_value(&hr).expect("json")).as_bytes())?;
    } else {
        let rows = vec![
            vec![
                "A".into(),
                hr.observed_a.to_string(),
                sig(hr.expected_a, SIGNIFICANT),
            ],
            vec![
                "B".into(),
                hr.observed_b.to_string(),
                sig(hr.expected_b, SIGNIFICANT),
            ],
        ];
        out.write_all(table(&["group", "observed", "expected"], &rows).as_bytes())?;
        match hr.hazard_ratio {
            Some(v) => writeln!(out, "hazard ratio (A vs B): {}", sig(v, SIGNIFICANT))?,
            None => writeln!(
                out,
                "hazard ratio (A vs B): undefined (zero expected or observed count in B)"
            )?,
        }
    }
    Ok(())
}

fn simulate_cmd(a: Simulate, out: &mut dyn Write) -> CmdResult {
    let mut config = standard_campaign_config(a.seed);
    config.minutes_per_combination = a.minutes;
    config.horizon_s = a.horizon;
    config.weibull_shape = a.weibull_shape;
    if let Some(beta) = &a.beta {
        if beta.len() != config.true_beta.len() {
            return Err(Failure::Input(format!(
                "--beta needs {} values (rain,fog,night,experts,universal), got {}",
                config.true_beta.len(),
                beta.len()
            )));
        }
        config.true_beta.copy_from_slice(beta);
    }
    config.baseline_rate_per_s = match (a.rate, a.calibrate_events) {
        (Some(rate), _) => rate,
        (None, target) => {
            calibrate_baseline_rate(target.unwrap_or(REFERENCE_EVENT_TOTAL), &config)?
        }
    };
    let campaign = simulate(&config)?;
    save_csv(&campaign.dataset, &a.out)?;
    let summary = campaign.summary_json();
    if let Some(path) = &a.summary {
        fs::write(path, json_text(summary.clone()))?;
    }
    if a.json {
        out.write_all(json_text(summary).as_bytes())?;
    } else {
        let rows: Vec<Vec<String>> = campaign
            .per_combination
            .iter()
            .map(|c| {
                vec![
                    c.model.to_string(),
                    c.weather.to_string(),
                    c.drives.to_string(),
                    c.events.to_string(),
                ]
            })
            .collect();
        out.write_all(table(&["model", "weather", "drives", "events"], &rows).as_bytes())?;
        writeln!(
            out,
            "total drives: {}  total events: {}  baseline rate: {} /s  seed: {}",
            campaign.total_drives,
            campaign.total_events,
            sig(config.baseline_rate_per_s, SIGNIFICANT),
            campaign.seed
        )?;
    }
    Ok(())
}

fn model_type(z: &[f64]) -> ModelType {
    if z[3] == 1.0 {
        ModelType::Expert
    } else if z[4] == 1.0 {
        ModelType::Universal
    } else {
        ModelType::Baseline
    }
}

fn model_label(m: ModelType) -> &'static str {
    match m {
        ModelType::Baseline => "baseline",
        ModelType::Universal => "universal",
        ModelType::Expert => "experts",
    }
}

fn mean_positive(values: &[f64], fallback: f64) -> f64 {
    let present: Vec<f64> = values.iter().copied().filter(|&v| v > 0.0).collect();
    if present.is_empty() {
        fallback
    } else {
        present.iter().sum::<f64>() / present.len() as f64
    }
}

fn write_to(path: &Path, text: &str) -> std::io::Result<()> {
    fs::write(path, text)
}

fn report(a: Report, out: &mut dyn Write) -> CmdResult {
    let data = load_csv(&a.input, &Schema::campaign())?;
    fs::create_dir_all(&a.out_dir)?;
    let dir = &a.out_dir;

    let order = [ModelType::Baseline, ModelType::Universal, ModelType::Expert];
    let mut curves = Vec::new();
    for m in order {
        if let Some(d) = data.filter(|o| model_type(&o.covariates) == m) {
            curves.push(kaplan_meier(&d, a.confidence)?.with_label(model_label(m)));
        }
    }
    emit_plot(
        &curves,
        PlotStyle::Survival,
        &dir.join("km_model_types.svg"),
    )?;
    emit_plot(
        &curves,
        PlotStyle::CumulativeHazard,
        &dir.join("cumulative_hazard.svg"),
    )?;
    for c in &curves {
        writeln!(out, "# Kaplan-Meier: {}", c.label.as_deref().unwrap_or(""))?;
        out.write_all(curve_table(c).as_bytes())?;
    }

    let f = fit(
        &data,
        &FitOptions {
            confidence_level: a.confidence,
            ..FitOptions::default()
        },
    )?;
    write_to(&dir.join("cox.json"), &json_text(f.report_json()))?;
    write_to(&dir.join("cox.txt"), &f.table())?;
    writeln!(out, "# Cox proportional hazards")?;
    write_fit(&f, false, out)?;
    if !f.converged {
        return Err(not_converged(&f));
    }
    emit_hazard_ratio_plot(&f, &dir.join("hazard_ratios.svg"))?;

    let rain = mean_positive(&data.column(0), 85.0);
    let fog = mean_positive(&data.column(1), 75.0);
    let horizon = data.max_duration();
    let times: Vec<f64> = (0..=200).map(|k| horizon * k as f64 / 200.0).collect();
    for m in order {
        let mut predicted = Vec::new();
        for (name, r, fg, sun) in [
            ("clear", 0.0, 0.0, 45.0),
            ("rain", rain, 0.0, 45.0),
            ("fog", 0.0, fog, 45.0),
            ("night", 0.0, 0.0, -45.0),
        ] {
            let z = encode_campaign_covariates(r, fg, sun, m)?;
            predicted.push(predict_survival(&f, &z, &times)?.with_label(name));
        }
        let path = dir.join(format!("predicted_survival_{}.svg", model_label(m)));
        emit_plot(&predicted, PlotStyle::Survival, &path)?;
    }
    writeln!(out, "# wrote report to {}", dir.display())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run_with(
            std::iter::once("hazardlab").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn unknown_flag_is_rejected() {
        let (code, _, err) = run_capture(&["fit-km", "x.csv", "--bogus"]);
        assert_eq!(code, 1);
        assert!(err.contains("--bogus"));
    }

    #[test]
    fn missing_subcommand_is_rejected() {
        assert_eq!(run_capture(&[]).0, 1);
        assert_eq!(run_capture(&["--help"]).0, 0);
    }

    #[test]
    fn missing_file_exits_one() {
        let (code, _, err) = run_capture(&["fit-cox", "/nonexistent/file.csv"]);
        assert_eq!(code, 1);
        assert!(err.starts_with("error:"));
    }

    #[test]
    fn rate_and_calibration_conflict() {
        let (code, _, _) = run_capture(&[
            "simulate",
            "--rate",
            "0.001",
            "--calibrate-events",
            "48",
            "--out",
            "x.csv",
        ]);
        assert_eq!(code, 1);
    }

    #[test]
    fn table_aligns_columns() {
        let t = table(&["a", "bb"], &[vec!["100".into(), "1".into()]]);
        assert_eq!(t, "  a  bb\n100   1\n");
    }
}
