//! Synthetic data with known truth: a straight line of measuring spots,
//! AR(1) weather at every spot, and train runs whose arrival states follow
//! the planted chain and whose primary delays follow the planted
//! recurrent-event model.
//!
//! All randomness comes from ChaCha8 streams of one 64-bit seed: stream 0
//! draws the line geometry, stream `2⁴⁰ + s` the weather at spot `s` and
//! stream `2⁴¹ + i` everything about train `i`. Output is therefore
//! identical for a fixed seed regardless of thread count.

mod config;
mod processes;
mod weather;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariates::Covariate;
use crate::cox::{CoxDataset, CoxSubject, StepCovariates};
use crate::ctmc::{CtmcDataset, CtmcParams, ObservedPath, SegmentScheme, State};
use crate::error::{Error, Result};
use crate::ingest::{section_weather, InitialStation, RunRecord, SpotRecord, WeatherGrid, WeatherSample};

pub use config::{CoxTruth, CtmcTruth, Period, SeverityShift, SimConfig, TransitionTruth, WeatherProcess};
pub use processes::{simulate_recurrent_events, simulate_states};

const GEOMETRY_STREAM: u64 = 0;
const WEATHER_STREAM: u64 = 1 << 40;
const TRAIN_STREAM: u64 = 1 << 41;

/// South and north terminus coordinates of the simulated line.
const SOUTH: (f64, f64) = (59.33, 18.06);
const NORTH: (f64, f64) = (63.83, 20.26);

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A measuring spot; `position_km` counts from the south terminus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spot {
    pub name: String,
    pub position_km: f64,
    pub lat: f64,
    pub lon: f64,
}

fn round_km(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

/// Spot positions from section lengths drawn uniformly in the configured
/// range and rescaled to the line length.
pub fn build_line(cfg: &SimConfig) -> Result<Vec<Spot>> {
    let mut rng = stream_rng(cfg.seed, GEOMETRY_STREAM);
    let lengths: Vec<f64> = (1..cfg.spot_count)
        .map(|_| rng.random_range(cfg.section_km_min..=cfg.section_km_max))
        .collect();
    let total: f64 = lengths.iter().sum();
    let mut positions = vec![0.0];
    let mut acc = 0.0;
    for l in &lengths {
        acc += l;
        positions.push(round_km(acc / total * cfg.line_length_km));
    }
    *positions.last_mut().unwrap() = cfg.line_length_km;
    if positions.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("spots too dense for metre resolution".into()));
    }
    let coord = |a: f64, b: f64, f: f64| ((a + (b - a) * f) * 1e5).round() / 1e5;
    Ok(positions
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            let f = p / cfg.line_length_km;
            Spot {
                name: format!("S{i:03}"),
                position_km: p,
                lat: coord(SOUTH.0, NORTH.0, f),
                lon: coord(SOUTH.1, NORTH.1, f),
            }
        })
        .collect())
}

/// Hourly weather at every spot over all periods.
pub fn simulate_weather(cfg: &SimConfig) -> Result<Vec<WeatherSample>> {
    cfg.validate()?;
    let line = build_line(cfg)?;
    Ok(weather::simulate_grid(cfg, &line))
}

/// Planted parameters, as recorded next to simulated data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub seed: u64,
    pub covariates: Vec<String>,
    pub ctmc: CtmcTruth,
    pub ctmc_params: CtmcParams,
    pub cox: CoxTruth,
    pub cox_beta: Vec<f64>,
}

impl Truth {
    pub fn new(cfg: &SimConfig) -> Result<Self> {
        Ok(Self {
            seed: cfg.seed,
            covariates: Covariate::ALL.iter().map(|c| c.key().to_string()).collect(),
            ctmc: cfg.ctmc.clone(),
            ctmc_params: cfg.ctmc.params()?,
            cox: cfg.cox.clone(),
            cox_beta: cfg.cox.beta(),
        })
    }
}

/// Everything one simulation produces. `ctmc` and `cox` hold the exact
/// simulated histories (continuous event distances, every spot observed);
/// `runs` and `weather` are what the ingest pipeline would see.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub config: SimConfig,
    pub truth: Truth,
    pub spots: Vec<Spot>,
    pub weather: Vec<WeatherSample>,
    pub runs: Vec<RunRecord>,
    pub ctmc: CtmcDataset,
    pub cox: CoxDataset,
}

struct TrainOutput {
    run: RunRecord,
    path: ObservedPath,
    subject: CoxSubject,
}

pub fn simulate(cfg: &SimConfig) -> Result<Simulation> {
    cfg.validate()?;
    let truth = Truth::new(cfg)?;
    let scheme = cfg.ctmc.scheme()?;
    let spots = build_line(cfg)?;
    let weather = weather::simulate_grid(cfg, &spots);
    let grid = WeatherGrid::new(weather.iter().cloned());

    let days: Vec<NaiveDate> = cfg
        .periods
        .iter()
        .flat_map(|p| (0..p.days() as i64).map(move |d| p.start + Duration::days(d)))
        .collect();
    let n = cfg.train_count;
    let trains: Vec<TrainOutput> = (0..n)
        .into_par_iter()
        .map(|i| {
            let day = days[(i as u128 * days.len() as u128 / n as u128) as usize];
            simulate_train(cfg, &truth.ctmc_params, &scheme, &spots, &grid, i, day)
        })
        .collect::<Result<_>>()?;

    let mut runs = Vec::with_capacity(n);
    let mut paths = Vec::with_capacity(n);
    let mut subjects = Vec::with_capacity(n);
    for t in trains {
        runs.push(t.run);
        paths.push(t.path);
        subjects.push(t.subject);
    }
    Ok(Simulation {
        config: cfg.clone(),
        ctmc: CtmcDataset::new(truth.covariates.clone(), paths)?,
        cox: CoxDataset::new(truth.covariates.clone(), subjects)?,
        truth,
        spots,
        weather,
        runs,
    })
}

/// Arrival-state histories from the planted chain.
pub fn simulate_ctmc_runs(cfg: &SimConfig) -> Result<CtmcDataset> {
    Ok(simulate(cfg)?.ctmc)
}

/// Recurrent primary-delay histories from the planted hazard model,
/// censored at the end of the line.
pub fn simulate_cox_runs(cfg: &SimConfig) -> Result<CoxDataset> {
    Ok(simulate(cfg)?.cox)
}

fn simulate_train(
    cfg: &SimConfig,
    params: &CtmcParams,
    scheme: &SegmentScheme,
    line: &[Spot],
    grid: &WeatherGrid,
    index: usize,
    day: NaiveDate,
) -> Result<TrainOutput> {
    let mut rng = stream_rng(cfg.seed, TRAIN_STREAM + index as u64);
    let north_start = rng.random::<f64>() < cfg.direction_mix;
    let hour = cfg.departure_hours[rng.random_range(0..cfg.departure_hours.len())];
    let minute = rng.random_range(0..60);
    let t0 = day.and_hms_opt(hour, minute, 0).unwrap();

    let (station, ordered): (InitialStation, Vec<&Spot>) = if north_start {
        (InitialStation::NorthTerminus, line.iter().rev().collect())
    } else {
        (InitialStation::SouthTerminus, line.iter().collect())
    };
    let km: Vec<f64> = ordered
        .iter()
        .map(|s| {
            if north_start {
                round_km(cfg.line_length_km - s.position_km)
            } else {
                s.position_km
            }
        })
        .collect();
    let planned: Vec<NaiveDateTime> = km
        .iter()
        .map(|k| t0 + Duration::seconds((k / cfg.speed_kmh * 3600.0).round() as i64))
        .collect();
    let mut run = RunRecord {
        train_id: format!("T{index:06}"),
        initial_station: station,
        spots: ordered
            .iter()
            .zip(&km)
            .zip(&planned)
            .map(|((s, &k), &t)| SpotRecord {
                name: s.name.clone(),
                lat: s.lat,
                lon: s.lon,
                cumulative_km: k,
                planned_arrival: t,
                planned_departure: t,
                actual_arrival: None,
                actual_departure: None,
            })
            .collect(),
    };

    let direction = f64::from(station.direction());
    let values = (0..km.len() - 1)
        .map(|k| {
            let w = section_weather(&run, k, grid)?;
            Ok(vec![
                direction,
                w.temperature,
                w.humidity,
                w.snow_depth,
                f64::from(w.precip_flag),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    let covariates = StepCovariates::new(km[0], km[1..].to_vec(), values)?;

    let states = simulate_states(&mut rng, params, scheme, &covariates, &km)?;
    let events = simulate_recurrent_events(&mut rng, &cfg.cox, &covariates);

    // Lateness in seconds chosen so that the derived indicators reproduce
    // the simulated states and primary delays exactly.
    let lateness: Vec<i64> = states
        .iter()
        .enumerate()
        .map(|(k, s)| match (k, s) {
            (0, _) => 0,
            (_, State::Punctual) => rng.random_range(0..=120),
            (_, State::Delayed) => rng.random_range(300..=900),
        })
        .collect();
    let n = km.len();
    for k in 0..n {
        let dep_lateness = if k + 1 < n {
            let primary = events.iter().any(|&e| e > km[k] && e <= km[k + 1]);
            let slack = rng.random_range(0..=119);
            lateness[k + 1] - slack - if primary { 180 } else { 0 }
        } else {
            lateness[k]
        };
        let missing = rng.random::<f64>() < cfg.missing_rate && k > 0;
        let spot = &mut run.spots[k];
        spot.actual_arrival = (!missing).then(|| spot.planned_arrival + Duration::seconds(lateness[k]));
        spot.actual_departure = Some(spot.planned_departure + Duration::seconds(dep_lateness));
    }

    let path = ObservedPath::new(run.train_id.clone(), km.clone(), states, covariates.clone())?;
    let subject = CoxSubject {
        id: run.train_id.clone(),
        events,
        censor: covariates.end(),
        covariates,
    };
    Ok(TrainOutput { run, path, subject })
}
