//! Timetable and weather ingestion: delay indicators per section, weather
//! matching, and assembly of the per-section analysis dataset.

mod io;
mod weather;

use std::collections::BTreeMap;

use chrono::{NaiveDate, NaiveDateTime};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{
    read_dataset_csv, read_runs_csv, read_weather_csv, write_dataset_csv, write_runs_csv, write_weather_csv,
    DATASET_COLUMNS, RUNS_COLUMNS, WEATHER_COLUMNS,
};
pub use weather::{match_weather, round_to_hour, section_covariates, SectionWeather, WeatherGrid, WeatherSample};

/// Running-time increase (seconds) that counts as a primary delay.
pub const PRIMARY_DELAY_SECS: i64 = 3 * 60;
/// Arrival lateness (seconds) that counts as an arrival delay.
pub const ARRIVAL_DELAY_SECS: i64 = 5 * 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialStation {
    NorthTerminus,
    SouthTerminus,
}

impl InitialStation {
    /// Direction covariate: 1 for runs leaving the north terminus.
    pub fn direction(self) -> u8 {
        match self {
            InitialStation::NorthTerminus => 1,
            InitialStation::SouthTerminus => 0,
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            InitialStation::NorthTerminus => "north_terminus",
            InitialStation::SouthTerminus => "south_terminus",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "north_terminus" => Some(InitialStation::NorthTerminus),
            "south_terminus" => Some(InitialStation::SouthTerminus),
            _ => None,
        }
    }
}

/// Timetable and actual times at one measuring spot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpotRecord {
    pub name: String,
    pub lat: f64,
    pub lon: f64,
    /// Distance from the run's initial station.
    pub cumulative_km: f64,
    pub planned_arrival: NaiveDateTime,
    pub planned_departure: NaiveDateTime,
    pub actual_arrival: Option<NaiveDateTime>,
    pub actual_departure: Option<NaiveDateTime>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub train_id: String,
    pub initial_station: InitialStation,
    pub spots: Vec<SpotRecord>,
}

impl RunRecord {
    pub fn validate(&self) -> Result<()> {
        if self.spots.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "run {} has {} spots, need at least 2",
                self.train_id,
                self.spots.len()
            )));
        }
        for (k, spot) in self.spots.iter().enumerate() {
            if !(spot.cumulative_km >= 0.0) || !spot.cumulative_km.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "run {} spot {}: invalid cumulative km {}",
                    self.train_id, spot.name, spot.cumulative_km
                )));
            }
            if spot.planned_departure < spot.planned_arrival {
                return Err(Error::InvalidInput(format!(
                    "run {} spot {}: planned departure precedes planned arrival",
                    self.train_id, spot.name
                )));
            }
            if k > 0 && spot.cumulative_km <= self.spots[k - 1].cumulative_km {
                return Err(Error::InvalidInput(format!(
                    "run {} spot {}: cumulative km not strictly increasing",
                    self.train_id, spot.name
                )));
            }
        }
        Ok(())
    }

    pub fn direction(&self) -> u8 {
        self.initial_station.direction()
    }

    /// Date of the planned departure from the initial station.
    pub fn service_date(&self) -> NaiveDate {
        self.spots[0].planned_departure.date()
    }
}

/// Delay indicators for one section, before covariates are attached.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectionIndicators {
    pub section_index: usize,
    pub primary_delay: u8,
    pub arrival_delay: u8,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DerivedIndicators {
    pub sections: Vec<SectionIndicators>,
    /// Sections whose actual departure or arrival time is missing.
    pub missing: Vec<usize>,
}

/// Primary and arrival delay indicators for every consecutive spot pair.
pub fn derive_indicators(run: &RunRecord) -> DerivedIndicators {
    let mut out = DerivedIndicators::default();
    for (k, pair) in run.spots.windows(2).enumerate() {
        let (from, to) = (&pair[0], &pair[1]);
        let (Some(act_dep), Some(act_arr)) = (from.actual_departure, to.actual_arrival) else {
            out.missing.push(k);
            continue;
        };
        let planned_run = (to.planned_arrival - from.planned_departure).num_seconds();
        let actual_run = (act_arr - act_dep).num_seconds();
        let lateness = (act_arr - to.planned_arrival).num_seconds();
        out.sections.push(SectionIndicators {
            section_index: k,
            primary_delay: u8::from(actual_run - planned_run >= PRIMARY_DELAY_SECS),
            arrival_delay: u8::from(lateness >= ARRIVAL_DELAY_SECS),
        });
    }
    out
}

/// One train crossing one section between consecutive measuring spots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionObservation {
    pub train_id: String,
    pub service_date: NaiveDate,
    pub section_index: usize,
    pub from_spot: String,
    pub to_spot: String,
    pub from_km: f64,
    pub to_km: f64,
    pub direction: u8,
    pub temperature: f64,
    pub humidity: f64,
    pub snow_depth: f64,
    pub precip_flag: u8,
    pub primary_delay: u8,
    pub arrival_delay: u8,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnalysisDataset {
    pub sections: Vec<SectionObservation>,
}

impl AnalysisDataset {
    pub fn new(mut sections: Vec<SectionObservation>) -> Self {
        sections.sort_by(|a, b| a.train_id.cmp(&b.train_id).then(a.section_index.cmp(&b.section_index)));
        Self { sections }
    }

    pub fn len(&self) -> usize {
        self.sections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sections.is_empty()
    }

    /// Sections grouped per train, in train id order.
    pub fn by_train(&self) -> Vec<(&str, &[SectionObservation])> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..=self.sections.len() {
            if i == self.sections.len() || self.sections[i].train_id != self.sections[start].train_id {
                out.push((self.sections[start].train_id.as_str(), &self.sections[start..i]));
                start = i;
            }
        }
        out
    }

    pub fn date_range(&self) -> Option<(NaiveDate, NaiveDate)> {
        let first = self.sections.iter().map(|s| s.service_date).min()?;
        let last = self.sections.iter().map(|s| s.service_date).max()?;
        Some((first, last))
    }

    /// Sections whose service date lies in `[from, to]`.
    pub fn between(&self, from: NaiveDate, to: NaiveDate) -> Self {
        Self {
            sections: self
                .sections
                .iter()
                .filter(|s| s.service_date >= from && s.service_date <= to)
                .cloned()
                .collect(),
        }
    }
}

/// Leading sections of one train up to its first gap, i.e. the part of the
/// run that is observed continuously from the initial station.
pub fn contiguous_prefix(sections: &[SectionObservation]) -> &[SectionObservation] {
    let mut n = 0;
    for (k, s) in sections.iter().enumerate() {
        let linked = k == 0 || s.from_km == sections[k - 1].to_km;
        if s.section_index != k || !linked {
            break;
        }
        n = k + 1;
    }
    &sections[..n]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunExclusion {
    pub train_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionExclusion {
    pub train_id: String,
    pub section_index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub runs_read: usize,
    pub runs_used: usize,
    pub sections_total: usize,
    pub sections_kept: usize,
    pub runs_excluded: Vec<RunExclusion>,
    pub sections_excluded: Vec<SectionExclusion>,
}

/// Derives indicators and attaches direction and section-averaged weather.
///
/// Weather is matched at the planned departure time of the from-spot and
/// the planned arrival time of the to-spot.
pub fn assemble_dataset(runs: &[RunRecord], grid: &WeatherGrid) -> Result<(AnalysisDataset, IngestReport)> {
    let per_run: Vec<Result<RunOutcome>> = runs.par_iter().map(|run| assemble_run(run, grid)).collect();

    let mut report = IngestReport {
        runs_read: runs.len(),
        ..Default::default()
    };
    let mut sections = Vec::new();
    for (run, outcome) in runs.iter().zip(per_run) {
        match outcome? {
            RunOutcome::Excluded(reason) => report.runs_excluded.push(RunExclusion {
                train_id: run.train_id.clone(),
                reason,
            }),
            RunOutcome::Kept { observations, missing } => {
                report.runs_used += 1;
                report.sections_total += observations.len() + missing.len();
                report.sections_kept += observations.len();
                report
                    .sections_excluded
                    .extend(missing.into_iter().map(|k| SectionExclusion {
                        train_id: run.train_id.clone(),
                        section_index: k,
                        reason: "missing actual time".into(),
                    }));
                sections.extend(observations);
            }
        }
    }
    report
        .sections_excluded
        .sort_by(|a, b| a.train_id.cmp(&b.train_id).then(a.section_index.cmp(&b.section_index)));
    Ok((AnalysisDataset::new(sections), report))
}

enum RunOutcome {
    Excluded(String),
    Kept {
        observations: Vec<SectionObservation>,
        missing: Vec<usize>,
    },
}

fn assemble_run(run: &RunRecord, grid: &WeatherGrid) -> Result<RunOutcome> {
    if let Err(e) = run.validate() {
        return Ok(RunOutcome::Excluded(e.to_string()));
    }
    let derived = derive_indicators(run);
    let service_date = run.service_date();
    let mut observations = Vec::with_capacity(derived.sections.len());
    for ind in &derived.sections {
        let from = &run.spots[ind.section_index];
        let to = &run.spots[ind.section_index + 1];
        let w = section_weather(run, ind.section_index, grid)?;
        observations.push(SectionObservation {
            train_id: run.train_id.clone(),
            service_date,
            section_index: ind.section_index,
            from_spot: from.name.clone(),
            to_spot: to.name.clone(),
            from_km: from.cumulative_km,
            to_km: to.cumulative_km,
            direction: run.direction(),
            temperature: w.temperature,
            humidity: w.humidity,
            snow_depth: w.snow_depth,
            precip_flag: w.precip_flag,
            primary_delay: ind.primary_delay,
            arrival_delay: ind.arrival_delay,
        });
    }
    Ok(RunOutcome::Kept {
        observations,
        missing: derived.missing,
    })
}

/// Weather of section `k` (spots `k` and `k + 1`), matched at the planned
/// departure from the first spot and the planned arrival at the second.
pub fn section_weather(run: &RunRecord, k: usize, grid: &WeatherGrid) -> Result<SectionWeather> {
    let from = &run.spots[k];
    let to = &run.spots[k + 1];
    let dep = match_weather(&from.name, (from.lat, from.lon), from.planned_departure, grid)?;
    let arr = match_weather(&to.name, (to.lat, to.lon), to.planned_arrival, grid)?;
    Ok(section_covariates(dep, arr))
}

/// Groups rows of a runs table into runs, keeping first-seen train order.
pub(crate) fn group_runs(rows: Vec<(String, InitialStation, SpotRecord)>) -> Vec<RunRecord> {
    let mut order: Vec<String> = Vec::new();
    let mut runs: BTreeMap<String, RunRecord> = BTreeMap::new();
    for (train_id, station, spot) in rows {
        runs.entry(train_id.clone())
            .or_insert_with(|| {
                order.push(train_id.clone());
                RunRecord {
                    train_id,
                    initial_station: station,
                    spots: Vec::new(),
                }
            })
            .spots
            .push(spot);
    }
    order.into_iter().map(|id| runs.remove(&id).unwrap()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::Duration;

    fn t(s: &str) -> NaiveDateTime {
        NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S").unwrap()
    }

    fn spot(name: &str, km: f64, planned: &str, actual_arr: Option<&str>, actual_dep: Option<&str>) -> SpotRecord {
        SpotRecord {
            name: name.into(),
            lat: 0.0,
            lon: km,
            cumulative_km: km,
            planned_arrival: t(planned),
            planned_departure: t(planned),
            actual_arrival: actual_arr.map(t),
            actual_departure: actual_dep.map(t),
        }
    }

    fn two_spot_run(actual_dep: &str, actual_arr: &str) -> RunRecord {
        RunRecord {
            train_id: "T1".into(),
            initial_station: InitialStation::SouthTerminus,
            spots: vec![
                spot(
                    "A",
                    0.0,
                    "2018-02-01T10:00:00",
                    Some("2018-02-01T10:00:00"),
                    Some(actual_dep),
                ),
                spot("B", 12.0, "2018-02-01T10:10:00", Some(actual_arr), Some(actual_arr)),
            ],
        }
    }

    #[test]
    fn three_minute_running_time_increase_is_primary() {
        let run = two_spot_run("2018-02-01T10:00:00", "2018-02-01T10:13:00");
        let d = derive_indicators(&run);
        assert_eq!(d.sections[0].primary_delay, 1);
        assert_eq!(d.sections[0].arrival_delay, 0);

        let run = two_spot_run("2018-02-01T10:00:00", "2018-02-01T10:12:59");
        assert_eq!(derive_indicators(&run).sections[0].primary_delay, 0);
    }

    #[test]
    fn on_schedule_run_has_no_delays() {
        let run = two_spot_run("2018-02-01T10:00:00", "2018-02-01T10:10:00");
        let d = derive_indicators(&run);
        assert_eq!(
            d.sections[0],
            SectionIndicators {
                section_index: 0,
                primary_delay: 0,
                arrival_delay: 0
            }
        );
    }

    #[test]
    fn arrival_threshold_is_inclusive_at_five_minutes() {
        // departed late so the running time is unchanged
        let run = two_spot_run("2018-02-01T10:04:59", "2018-02-01T10:14:59");
        let d = derive_indicators(&run);
        assert_eq!(d.sections[0].arrival_delay, 0);
        assert_eq!(d.sections[0].primary_delay, 0);
        let run = two_spot_run("2018-02-01T10:05:00", "2018-02-01T10:15:00");
        assert_eq!(derive_indicators(&run).sections[0].arrival_delay, 1);
    }

    #[test]
    fn missing_actual_time_excludes_only_that_section() {
        let run = RunRecord {
            train_id: "T2".into(),
            initial_station: InitialStation::NorthTerminus,
            spots: vec![
                spot("A", 0.0, "2018-02-01T10:00:00", None, Some("2018-02-01T10:00:00")),
                spot("B", 5.0, "2018-02-01T10:05:00", None, Some("2018-02-01T10:06:00")),
                spot("C", 9.0, "2018-02-01T10:09:00", Some("2018-02-01T10:10:00"), None),
            ],
        };
        let d = derive_indicators(&run);
        assert_eq!(d.missing, vec![0]);
        assert_eq!(d.sections.len(), 1);
        assert_eq!(d.sections[0].section_index, 1);
    }

    #[test]
    fn indicators_invariant_under_time_translation() {
        let run = two_spot_run("2018-02-01T10:02:00", "2018-02-01T10:17:00");
        let mut shifted = run.clone();
        let shift = Duration::minutes(731);
        for s in &mut shifted.spots {
            s.planned_arrival += shift;
            s.planned_departure += shift;
            s.actual_arrival = s.actual_arrival.map(|v| v + shift);
            s.actual_departure = s.actual_departure.map(|v| v + shift);
        }
        assert_eq!(derive_indicators(&run), derive_indicators(&shifted));
    }

    #[test]
    fn run_validation_catches_invariants() {
        let mut run = two_spot_run("2018-02-01T10:00:00", "2018-02-01T10:10:00");
        assert!(run.validate().is_ok());
        run.spots[1].cumulative_km = 0.0;
        assert!(run.validate().is_err());
        run.spots.truncate(1);
        assert!(run.validate().is_err());
    }

    #[test]
    fn direction_from_initial_station() {
        assert_eq!(InitialStation::NorthTerminus.direction(), 1);
        assert_eq!(InitialStation::SouthTerminus.direction(), 0);
    }
}
