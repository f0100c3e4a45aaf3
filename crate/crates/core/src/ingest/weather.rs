use std::collections::BTreeMap;

use chrono::{Duration, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gridded weather at one grid point and hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherSample {
    pub grid_lat: f64,
    pub grid_lon: f64,
    pub hour: NaiveDateTime,
    /// 2 m temperature, °C.
    pub temperature: f64,
    /// 2 m relative humidity, percent.
    pub humidity: f64,
    /// cm
    pub snow_depth: f64,
    /// Hourly accumulated ice/snow, mm.
    pub ice_snow_precip: f64,
}

impl WeatherSample {
    pub fn validate(&self) -> std::result::Result<(), String> {
        let finite = [
            self.grid_lat,
            self.grid_lon,
            self.temperature,
            self.humidity,
            self.snow_depth,
            self.ice_snow_precip,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err("non-finite weather value".into());
        }
        if !(0.0..=100.0).contains(&self.humidity) {
            return Err(format!("humidity {} outside [0, 100]", self.humidity));
        }
        if self.snow_depth < 0.0 {
            return Err(format!("negative snow depth {}", self.snow_depth));
        }
        if self.ice_snow_precip < 0.0 {
            return Err(format!("negative ice/snow precipitation {}", self.ice_snow_precip));
        }
        if self.hour.minute() != 0 || self.hour.second() != 0 {
            return Err(format!("hour {} is not truncated to the hour", self.hour));
        }
        Ok(())
    }
}

/// Weather samples indexed by hour.
#[derive(Debug, Clone, Default)]
pub struct WeatherGrid {
    by_hour: BTreeMap<NaiveDateTime, Vec<WeatherSample>>,
}

impl WeatherGrid {
    pub fn new(samples: impl IntoIterator<Item = WeatherSample>) -> Self {
        let mut by_hour: BTreeMap<NaiveDateTime, Vec<WeatherSample>> = BTreeMap::new();
        for s in samples {
            by_hour.entry(s.hour).or_default().push(s);
        }
        Self { by_hour }
    }

    pub fn at_hour(&self, hour: &NaiveDateTime) -> &[WeatherSample] {
        self.by_hour.get(hour).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.by_hour.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.by_hour.is_empty()
    }

    pub fn samples(&self) -> impl Iterator<Item = &WeatherSample> {
        self.by_hour.values().flatten()
    }
}

/// Nearest hour; exactly half past rounds up.
pub fn round_to_hour(t: NaiveDateTime) -> NaiveDateTime {
    let into_hour = i64::from(t.minute()) * 60 + i64::from(t.second());
    let floor = t - Duration::seconds(into_hour) - Duration::nanoseconds(i64::from(t.nanosecond()));
    if into_hour >= 30 * 60 {
        floor + Duration::hours(1)
    } else {
        floor
    }
}

/// Sample at the grid point nearest to `coords` (Euclidean in coordinate
/// space) for the hour nearest to `event_time`. Ties keep the first sample.
pub fn match_weather<'g>(
    spot: &str,
    coords: (f64, f64),
    event_time: NaiveDateTime,
    grid: &'g WeatherGrid,
) -> Result<&'g WeatherSample> {
    let hour = round_to_hour(event_time);
    let candidates = grid.at_hour(&hour);
    let dist2 = |s: &WeatherSample| {
        let dlat = s.grid_lat - coords.0;
        let dlon = s.grid_lon - coords.1;
        dlat * dlat + dlon * dlon
    };
    let mut best: Option<(&WeatherSample, f64)> = None;
    for s in candidates {
        let d = dist2(s);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((s, d));
        }
    }
    best.map(|(s, _)| s).ok_or_else(|| Error::MissingWeather {
        spot: spot.to_string(),
        hour,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionWeather {
    pub temperature: f64,
    pub humidity: f64,
    pub snow_depth: f64,
    pub precip_flag: u8,
}

/// Endpoint averages; the precipitation flag is set when the averaged
/// precipitation is positive.
pub fn section_covariates(dep: &WeatherSample, arr: &WeatherSample) -> SectionWeather {
    let mean_precip = 0.5 * (dep.ice_snow_precip + arr.ice_snow_precip);
    SectionWeather {
        temperature: 0.5 * (dep.temperature + arr.temperature),
        humidity: 0.5 * (dep.humidity + arr.humidity),
        snow_depth: 0.5 * (dep.snow_depth + arr.snow_depth),
        precip_flag: u8::from(mean_precip > 0.0),
    }
}
