//! One function per subcommand. Each reads its inputs through [`Run`] so
//! they are fingerprinted in the manifest, and writes every output through
//! it as well.

use std::fmt;
use std::path::Path;

use anyhow::{Context, Result};
use raildelay::cox::{detect_drop_points, fit_stratified_cox, survival_curve, CoxDataset, CoxOptions, StepCovariates};
use raildelay::ctmc::{fit_ctmc, CtmcDataset, CtmcOptions, SegmentScheme};
use raildelay::inference::HazardRatioRow;
use raildelay::ingest::{
    assemble_dataset, read_dataset_csv, read_runs_csv, read_weather_csv, write_dataset_csv, write_runs_csv,
    write_weather_csv, AnalysisDataset, WeatherGrid,
};
use raildelay::plot::{grid_svg, Chart, Series};
use raildelay::simulate::{simulate as simulate_line, SimConfig, Truth};
use raildelay::validation::{default_eval_points, run_validation, FoldConfig, FoldStatus, ValidationMode};
use raildelay::{Covariate, CovariateSpec};
use serde::{Deserialize, Serialize};

use crate::manifest::Run;
use crate::{BoundaryArgs, DeriveArgs, FitCoxArgs, FitMarkovArgs, SimulateArgs, ValidateArgs};

/// A flag value that parsed but makes no sense; exits with the usage code.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Contents of `truth.json`: the config and the parameters it plants.
#[derive(Debug, Serialize, Deserialize)]
pub struct TruthFile {
    pub config: SimConfig,
    pub truth: Truth,
}

pub fn simulate(run: &mut Run, args: &SimulateArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = run.read_input(path)?;
            let text = String::from_utf8(text).with_context(|| format!("{} is not UTF-8", path.display()))?;
            SimConfig::parse(&text, &path.display().to_string())?
        }
        None => SimConfig::two_winters(args.seed.unwrap_or(1)),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(n) = args.train_count {
        cfg.train_count = n;
    }
    run.seed(cfg.seed);
    run.settings(&cfg)?;

    let sim = simulate_line(&cfg)?;
    let mut buf = Vec::new();
    write_runs_csv(&mut buf, &sim.runs)?;
    run.write("runs.csv", &buf)?;
    buf.clear();
    write_weather_csv(&mut buf, &sim.weather)?;
    run.write("weather.csv", &buf)?;
    run.write_json(
        "truth.json",
        &TruthFile {
            config: cfg,
            truth: sim.truth,
        },
    )?;
    println!(
        "simulated {} runs over {} spots, {} weather samples",
        sim.runs.len(),
        sim.spots.len(),
        sim.weather.len()
    );
    Ok(())
}

pub fn derive(run: &mut Run, args: &DeriveArgs) -> Result<()> {
    let runs = {
        let data = run.read_input(&args.runs)?;
        read_runs_csv(&data[..], &args.runs.display().to_string())?
    };
    let weather = {
        let data = run.read_input(&args.weather)?;
        read_weather_csv(&data[..], &args.weather.display().to_string())?
    };
    let (dataset, report) = assemble_dataset(&runs, &WeatherGrid::new(weather))?;
    let mut buf = Vec::new();
    write_dataset_csv(&mut buf, &dataset.sections)?;
    run.write("dataset.csv", &buf)?;
    run.write_json("ingest_report.json", &report)?;
    println!(
        "{} of {} runs used, {} of {} sections kept",
        report.runs_used, report.runs_read, report.sections_kept, report.sections_total
    );
    Ok(())
}

#[derive(Serialize)]
struct CoxSettings<'a> {
    covariates: &'a CovariateSpec,
    max_rank: usize,
    scenario: Vec<(String, f64)>,
    drop_points: usize,
    min_separation: f64,
}

pub fn fit_cox(run: &mut Run, args: &FitCoxArgs) -> Result<()> {
    let spec = &args.model.covariates;
    let scenario = parse_scenario(&args.scenario, spec)?;
    if args.max_rank == 0 {
        return Err(usage("--max-rank must be at least 1"));
    }
    run.settings(CoxSettings {
        covariates: spec,
        max_rank: args.max_rank,
        scenario: spec
            .iter()
            .map(|c| c.key().to_string())
            .zip(scenario.iter().copied())
            .collect(),
        drop_points: args.drop_points,
        min_separation: args.min_separation,
    })?;

    let ds = load_dataset(run, &args.model.dataset)?;
    let cox = CoxDataset::from_sections(&ds, spec)?;
    let opts = CoxOptions {
        max_rank: args.max_rank,
        ..CoxOptions::default()
    };
    let fit = fit_stratified_cox(&cox, &opts)?;
    run.write_json("cox_fit.json", &fit)?;
    run.write("cox_hazard_ratios.csv", &hazard_ratio_csv(None, &fit.hazard_ratios)?)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["stratum", "distance", "jump", "cumulative"])?;
    for base in &fit.baseline {
        for p in &base.points {
            w.write_record([
                base.stratum.to_string(),
                p.distance.to_string(),
                p.jump.to_string(),
                p.cumulative.to_string(),
            ])?;
        }
    }
    run.write("baseline_hazard.csv", &w.into_inner()?)?;

    let line_end = line_end(&ds);
    let path = StepCovariates::constant(scenario, line_end);
    let curves: Vec<_> = (1..=fit.max_rank).map(|s| survival_curve(&fit, s, &path)).collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["stratum", "distance", "survival"])?;
    for c in &curves {
        for (d, s) in &c.points {
            w.write_record([c.stratum.to_string(), d.to_string(), s.to_string()])?;
        }
    }
    run.write("survival.csv", &w.into_inner()?)?;

    // Boundaries are suggested from the first-event curve, where the data
    // are densest.
    let drops = detect_drop_points(&curves[0], args.drop_points, args.min_separation);
    let listed: Vec<String> = drops.iter().map(|d| d.to_string()).collect();
    let suggestion = format!(
        "# largest drops of the stratum 1 survival curve; pass with --boundaries-file\n{}\n",
        listed.join(",")
    );
    run.write("boundaries.txt", suggestion.as_bytes())?;

    let mut chart = Chart::new(
        "Survival without primary delay",
        "Running distance (km)",
        "Survival probability",
    )
    .with_y_range(0.0, 1.0)
    .with_guides(&drops);
    for c in &curves {
        chart = chart.with_series(Series::steps(format!("Delay {}", c.stratum), c.points.clone()));
    }
    run.write("survival.svg", chart.to_svg().as_bytes())?;

    println!(
        "cox fit: {} events over {} strata, suggested boundaries {}",
        fit.events_per_stratum.iter().sum::<usize>(),
        fit.max_rank,
        if listed.is_empty() {
            "none".to_string()
        } else {
            listed.join(",")
        }
    );
    Ok(())
}

#[derive(Serialize)]
struct MarkovSettings<'a> {
    covariates: &'a CovariateSpec,
    boundaries: &'a [f64],
    origin: raildelay::ctmc::OriginConvention,
}

pub fn fit_markov(run: &mut Run, args: &FitMarkovArgs) -> Result<()> {
    let spec = &args.model.covariates;
    let scheme = resolve_scheme(run, &args.segments)?;
    let origin = args.segments.origin.into();
    run.settings(MarkovSettings {
        covariates: spec,
        boundaries: scheme.boundaries(),
        origin,
    })?;
    let ds = load_dataset(run, &args.model.dataset)?;
    scheme.check_within(line_end(&ds))?;
    let ctmc = CtmcDataset::from_sections(&ds, spec, origin)?;
    let fit = fit_ctmc(&ctmc, &scheme, &CtmcOptions::default())?;
    run.write_json("markov_fit.json", &fit)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(
        TABLE_HEADER
            .iter()
            .copied()
            .chain(["baseline_intensity"])
            .collect::<Vec<_>>(),
    )?;
    for table in &fit.tables {
        for row in &table.rows {
            let mut rec = table_record(Some(table.transition.label()), row);
            rec.push(table.baseline_intensity.to_string());
            w.write_record(&rec)?;
        }
    }
    run.write("markov_hazard_ratios.csv", &w.into_inner()?)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "segment",
        "reference",
        "transition",
        "hazard_ratio",
        "ci_lower",
        "ci_upper",
        "p_value",
        "se",
    ])?;
    for c in &fit.segment_contrasts {
        w.write_record([
            c.segment.clone(),
            c.reference.clone(),
            c.transition.label().to_string(),
            c.hazard_ratio.to_string(),
            c.ci_lower.to_string(),
            c.ci_upper.to_string(),
            c.p_value.to_string(),
            c.se.to_string(),
        ])?;
    }
    run.write("segment_contrasts.csv", &w.into_inner()?)?;

    println!(
        "markov fit: {} trains, {} / {} transitions, log-likelihood {:.3}",
        fit.trains, fit.transition_counts[0], fit.transition_counts[1], fit.log_likelihood
    );
    Ok(())
}

#[derive(Serialize)]
struct ValidateSettings<'a> {
    covariates: &'a CovariateSpec,
    boundaries: &'a [f64],
    folds: &'a FoldConfig,
    oracle: bool,
}

pub fn validate(run: &mut Run, args: &ValidateArgs) -> Result<()> {
    let ds = load_dataset(run, &args.model.dataset)?;
    let end = line_end(&ds);
    // Default points stop at the end of the line.
    let eval_points = match &args.eval_points {
        Some(list) => parse_points(list)?,
        None => default_eval_points().into_iter().filter(|d| *d <= end).collect(),
    };
    let config = FoldConfig {
        first_training_end: args.first_training_end,
        window_days: args.window_days,
        folds: args.folds,
        eval_points,
        origin: args.segments.origin.into(),
    };
    let (scheme, spec, mode) = match &args.truth {
        Some(path) => {
            let data = run.read_input(path)?;
            let file: TruthFile = serde_json::from_slice(&data)
                .map_err(raildelay::Error::from)
                .with_context(|| format!("cannot parse {}", path.display()))?;
            let spec = file
                .truth
                .covariates
                .iter()
                .map(|k| k.parse::<Covariate>())
                .collect::<raildelay::Result<Vec<_>>>()?;
            run.seed(file.truth.seed);
            (
                file.config.ctmc.scheme()?,
                CovariateSpec(spec),
                ValidationMode::Fixed(file.truth.ctmc_params),
            )
        }
        None => (
            resolve_scheme(run, &args.segments)?,
            args.model.covariates.clone(),
            ValidationMode::Fit(CtmcOptions::default()),
        ),
    };
    run.settings(ValidateSettings {
        covariates: &spec,
        boundaries: scheme.boundaries(),
        folds: &config,
        oracle: args.truth.is_some(),
    })?;
    scheme.check_within(end)?;
    let report = run_validation(&ds, &scheme, &spec, &config, &mode)?;
    run.write_json("validation_report.json", &report)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["fold", "distance", "expected", "observed", "trains"])?;
    for f in &report.folds {
        for p in &f.points {
            w.write_record([
                f.fold.index.to_string(),
                p.distance.to_string(),
                opt(p.expected),
                opt(p.observed),
                p.trains.to_string(),
            ])?;
        }
    }
    run.write("validation_points.csv", &w.into_inner()?)?;

    let charts: Vec<Chart> = report
        .folds
        .iter()
        .map(|f| {
            let pick = |g: fn(&raildelay::validation::PointComparison) -> Option<f64>| {
                f.points
                    .iter()
                    .filter_map(|p| g(p).map(|v| (p.distance, v)))
                    .collect::<Vec<_>>()
            };
            let title = match (&f.status, f.mae) {
                (FoldStatus::Completed, Some(m)) => format!(
                    "Validation {} to {} (MAE {:.3})",
                    f.fold.validation_start, f.fold.validation_end, m
                ),
                _ => format!(
                    "Validation {} to {} (failed)",
                    f.fold.validation_start, f.fold.validation_end
                ),
            };
            Chart::new(title, "Running distance (km)", "Rate of arrival delays")
                .with_series(Series::line("Observed", pick(|p| p.observed)))
                .with_series(Series::line("Expected", pick(|p| p.expected)))
                .with_guides(scheme.boundaries())
        })
        .collect();
    let columns = if charts.len() > 1 { 2 } else { 1 };
    run.write("validation.svg", grid_svg(&charts, columns).as_bytes())?;

    match report.averaged_mae {
        Some(m) => println!(
            "{} of {} folds completed, averaged MAE {m:.4}",
            report.completed_folds,
            report.folds.len()
        ),
        None => println!("no fold completed"),
    }
    Ok(())
}

fn load_dataset(run: &mut Run, path: &Path) -> Result<AnalysisDataset> {
    let data = run.read_input(path)?;
    let sections = read_dataset_csv(&data[..], &path.display().to_string())?;
    Ok(AnalysisDataset::new(sections))
}

fn line_end(ds: &AnalysisDataset) -> f64 {
    ds.sections.iter().map(|s| s.to_km).fold(0.0, f64::max)
}

fn resolve_scheme(run: &mut Run, args: &BoundaryArgs) -> Result<SegmentScheme> {
    if let Some(s) = &args.boundaries {
        return Ok(s.clone());
    }
    let Some(path) = &args.boundaries_file else {
        return Ok(SegmentScheme::homogeneous());
    };
    let data = run.read_input(path)?;
    let text = String::from_utf8(data).with_context(|| format!("{} is not UTF-8", path.display()))?;
    let list: Vec<&str> = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .collect();
    list.join(",")
        .parse::<SegmentScheme>()
        .with_context(|| format!("bad boundaries in {}", path.display()))
}

/// `key=value` pairs; covariates not mentioned keep their defaults.
fn parse_scenario(text: &str, spec: &CovariateSpec) -> Result<Vec<f64>> {
    let mut values: Vec<(Covariate, f64)> = vec![
        (Covariate::Direction, 1.0),
        (Covariate::Temperature, -1.2),
        (Covariate::Humidity, 85.0),
        (Covariate::SnowDepth, 3.0),
        (Covariate::PrecipFlag, 1.0),
    ];
    for pair in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| usage(format!("scenario entry `{pair}` is not key=value")))?;
        let cov: Covariate = k
            .trim()
            .parse()
            .map_err(|_| usage(format!("unknown scenario covariate `{k}`")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| usage(format!("scenario value `{v}` for {k} is not a number")))?;
        values.iter_mut().filter(|(c, _)| *c == cov).for_each(|e| e.1 = v);
    }
    Ok(spec
        .iter()
        .map(|c| values.iter().find(|(k, _)| *k == c).map(|e| e.1).unwrap_or(0.0))
        .collect())
}

fn parse_points(list: &str) -> Result<Vec<f64>> {
    list.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v >= 0.0)
                .ok_or_else(|| usage(format!("bad evaluation point `{s}`")))
        })
        .collect()
}

const TABLE_HEADER: [&str; 9] = [
    "transition",
    "predictor",
    "hazard_ratio",
    "ci_lower",
    "ci_upper",
    "p_value",
    "term",
    "coef",
    "se",
];

fn table_record(transition: Option<&str>, row: &HazardRatioRow) -> Vec<String> {
    let predictor = row
        .term
        .parse::<Covariate>()
        .map(|c| c.label().to_string())
        .unwrap_or_else(|_| row.term.clone());
    vec![
        transition.unwrap_or("").to_string(),
        predictor,
        row.hazard_ratio.to_string(),
        row.ci_lower.to_string(),
        row.ci_upper.to_string(),
        row.p_value.to_string(),
        row.term.clone(),
        row.coef.to_string(),
        row.se.to_string(),
    ]
}

fn hazard_ratio_csv(transition: Option<&str>, rows: &[HazardRatioRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&TABLE_HEADER[1..])?;
    for row in rows {
        w.write_record(&table_record(transition, row)[1..])?;
    }
    Ok(w.into_inner()?)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_defaults_and_overrides() {
        let spec: CovariateSpec = "snow_depth,temperature".parse().unwrap();
        assert_eq!(parse_scenario("", &spec).unwrap(), vec![3.0, -1.2]);
        assert_eq!(parse_scenario("temperature=2", &spec).unwrap(), vec![3.0, 2.0]);
        assert!(parse_scenario("wind=1", &spec).is_err());
        assert!(parse_scenario("temperature", &spec).is_err());
    }

    #[test]
    fn points_must_be_nonnegative_numbers() {
        assert_eq!(parse_points("50, 100").unwrap(), vec![50.0, 100.0]);
        assert!(parse_points("50,x").is_err());
        assert!(parse_points("-1").is_err());
    }
}
