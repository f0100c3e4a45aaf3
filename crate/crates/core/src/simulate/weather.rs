use std::collections::BTreeMap;

use chrono::{Duration, NaiveDateTime};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::ingest::WeatherSample;

use super::config::{SimConfig, WeatherProcess};
use super::{stream_rng, Spot, WEATHER_STREAM};

/// Stationary AR(1) around a moving mean: `x_t = mean_t + d_t` with
/// `d_t = ar·d_{t−1} + noise·ε_t`, started from the stationary law.
pub(crate) fn ar1_series<R: Rng>(rng: &mut R, process: &WeatherProcess, means: &[f64]) -> Vec<f64> {
    let sd0 = if process.noise == 0.0 {
        0.0
    } else {
        process.noise / (1.0 - process.ar * process.ar).sqrt()
    };
    let mut out = Vec::with_capacity(means.len());
    let mut d = 0.0;
    for (t, m) in means.iter().enumerate() {
        let eps: f64 = rng.sample(StandardNormal);
        d = if t == 0 {
            sd0 * eps
        } else {
            process.ar * d + process.noise * eps
        };
        out.push(m + d);
    }
    out
}

/// Simulated hours with the severity in force: every period plus one
/// trailing day for runs that cross midnight.
pub(crate) fn weather_hours(cfg: &SimConfig) -> Vec<(NaiveDateTime, f64)> {
    let mut hours: BTreeMap<NaiveDateTime, f64> = BTreeMap::new();
    for p in &cfg.periods {
        let start = p.start.and_hms_opt(0, 0, 0).unwrap();
        for h in 0..(p.days() as i64 + 1) * 24 {
            hours.entry(start + Duration::hours(h)).or_insert(p.severity);
        }
    }
    hours.into_iter().collect()
}

/// One grid point per measuring spot, hour-major order.
pub(crate) fn simulate_grid(cfg: &SimConfig, spots: &[Spot]) -> Vec<WeatherSample> {
    let hours = weather_hours(cfg);
    let shifted = |base: f64, shift: f64| -> Vec<f64> { hours.iter().map(|(_, sev)| base + sev * shift).collect() };
    let means = [
        shifted(cfg.temperature.mean, cfg.severity.temperature),
        shifted(cfg.humidity.mean, cfg.severity.humidity),
        shifted(cfg.snow_depth.mean, cfg.severity.snow_depth),
        shifted(cfg.precip.mean, cfg.severity.precip),
    ];
    let per_spot: Vec<[Vec<f64>; 4]> = (0..spots.len())
        .into_par_iter()
        .map(|s| {
            let mut rng = stream_rng(cfg.seed, WEATHER_STREAM + s as u64);
            [
                ar1_series(&mut rng, &cfg.temperature, &means[0]),
                ar1_series(&mut rng, &cfg.humidity, &means[1]),
                ar1_series(&mut rng, &cfg.snow_depth, &means[2]),
                ar1_series(&mut rng, &cfg.precip, &means[3]),
            ]
        })
        .collect();
    let mut out = Vec::with_capacity(hours.len() * spots.len());
    for (h, (hour, _)) in hours.iter().enumerate() {
        for (spot, series) in spots.iter().zip(&per_spot) {
            out.push(WeatherSample {
                grid_lat: spot.lat,
                grid_lon: spot.lon,
                hour: *hour,
                temperature: round_to(series[0][h], 2),
                humidity: round_to(series[1][h].clamp(0.0, 100.0), 2),
                snow_depth: round_to(series[2][h].max(0.0), 2),
                ice_snow_precip: round_to(series[3][h].max(0.0), 3),
            });
        }
    }
    out
}

/// Rounds to `digits` decimals, like a weather product's reporting
/// precision; keeps the CSV compact.
pub(crate) fn round_to(x: f64, digits: i32) -> f64 {
    let f = 10f64.powi(digits);
    let r = (x * f).round() / f;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}
