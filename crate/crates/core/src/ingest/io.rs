//! CSV formats for runs, weather and the derived dataset.

use std::io::{Read, Write};

use chrono::{NaiveDate, NaiveDateTime, Timelike};

use crate::error::{Error, Result};

use super::{group_runs, InitialStation, RunRecord, SectionObservation, SpotRecord, WeatherSample};

pub const RUNS_COLUMNS: [&str; 10] = [
    "train_id",
    "initial_station",
    "spot_name",
    "spot_lat",
    "spot_lon",
    "cumulative_km",
    "planned_arrival",
    "planned_departure",
    "actual_arrival",
    "actual_departure",
];

pub const WEATHER_COLUMNS: [&str; 7] = [
    "grid_lat",
    "grid_lon",
    "hour",
    "temperature",
    "humidity",
    "snow_depth",
    "ice_snow_precip",
];

pub const DATASET_COLUMNS: [&str; 14] = [
    "train_id",
    "service_date",
    "section_index",
    "from_spot",
    "to_spot",
    "from_km",
    "to_km",
    "direction",
    "temperature",
    "humidity",
    "snow_depth",
    "precip_flag",
    "primary_delay",
    "arrival_delay",
];

pub(crate) fn format_time(t: NaiveDateTime) -> String {
    if t.second() == 0 {
        t.format("%Y-%m-%dT%H:%M").to_string()
    } else {
        t.format("%Y-%m-%dT%H:%M:%S").to_string()
    }
}

fn parse_time(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M")
        .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S"))
        .ok()
}

struct Table<R: Read> {
    source: String,
    reader: csv::Reader<R>,
    index: Vec<usize>,
}

struct Row<'a> {
    source: &'a str,
    line: usize,
    record: csv::StringRecord,
    index: &'a [usize],
    names: &'a [&'static str],
}

impl Row<'_> {
    fn raw(&self, col: usize) -> &str {
        self.record.get(self.index[col]).unwrap_or("").trim()
    }

    fn err(&self, col: usize, what: &str) -> Error {
        Error::parse(
            self.source,
            self.line,
            format!("column {}: {what} (`{}`)", self.names[col], self.raw(col)),
        )
    }

    fn text(&self, col: usize) -> Result<String> {
        let v = self.raw(col);
        if v.is_empty() {
            return Err(self.err(col, "empty value"));
        }
        Ok(v.to_string())
    }

    fn float(&self, col: usize) -> Result<f64> {
        self.raw(col)
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.err(col, "expected a finite number"))
    }

    fn uint(&self, col: usize) -> Result<usize> {
        self.raw(col).parse().map_err(|_| self.err(col, "expected an integer"))
    }

    fn flag(&self, col: usize) -> Result<u8> {
        match self.raw(col) {
            "0" => Ok(0),
            "1" => Ok(1),
            _ => Err(self.err(col, "expected 0 or 1")),
        }
    }

    fn time(&self, col: usize) -> Result<NaiveDateTime> {
        parse_time(self.raw(col)).ok_or_else(|| self.err(col, "expected an ISO-8601 timestamp"))
    }

    fn opt_time(&self, col: usize) -> Result<Option<NaiveDateTime>> {
        if self.raw(col).is_empty() {
            Ok(None)
        } else {
            self.time(col).map(Some)
        }
    }

    fn date(&self, col: usize) -> Result<NaiveDate> {
        NaiveDate::parse_from_str(self.raw(col), "%Y-%m-%d").map_err(|_| self.err(col, "expected a YYYY-MM-DD date"))
    }
}

impl<R: Read> Table<R> {
    fn open(reader: R, source: &str, columns: &[&'static str]) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = reader.headers()?.clone();
        let index = columns
            .iter()
            .map(|c| {
                headers
                    .iter()
                    .position(|h| h == *c)
                    .ok_or_else(|| Error::parse(source, 1, format!("missing column `{c}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            source: source.to_string(),
            reader,
            index,
        })
    }

    fn rows<T>(
        &mut self,
        columns: &'static [&'static str],
        mut f: impl FnMut(&Row<'_>) -> Result<T>,
    ) -> Result<Vec<T>> {
        let mut out = Vec::new();
        let mut record = csv::StringRecord::new();
        loop {
            match self.reader.read_record(&mut record) {
                Ok(false) => break,
                Ok(true) => {}
                Err(e) => {
                    let line = e.position().map_or(0, |p| p.line() as usize);
                    return Err(Error::parse(&self.source, line, e.to_string()));
                }
            }
            let line = record.position().map_or(0, |p| p.line() as usize);
            let row = Row {
                source: &self.source,
                line,
                record: record.clone(),
                index: &self.index,
                names: columns,
            };
            out.push(f(&row)?);
        }
        Ok(out)
    }
}

pub fn read_runs_csv<R: Read>(reader: R, source: &str) -> Result<Vec<RunRecord>> {
    let mut table = Table::open(reader, source, &RUNS_COLUMNS)?;
    let rows = table.rows(&RUNS_COLUMNS, |r| {
        let station =
            InitialStation::parse(r.raw(1)).ok_or_else(|| r.err(1, "expected north_terminus or south_terminus"))?;
        Ok((
            r.text(0)?,
            station,
            SpotRecord {
                name: r.text(2)?,
                lat: r.float(3)?,
                lon: r.float(4)?,
                cumulative_km: r.float(5)?,
                planned_arrival: r.time(6)?,
                planned_departure: r.time(7)?,
                actual_arrival: r.opt_time(8)?,
                actual_departure: r.opt_time(9)?,
            },
        ))
    })?;
    Ok(group_runs(rows))
}

pub fn write_runs_csv<W: Write>(writer: W, runs: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(RUNS_COLUMNS)?;
    for run in runs {
        for s in &run.spots {
            w.write_record([
                run.train_id.clone(),
                run.initial_station.key().to_string(),
                s.name.clone(),
                s.lat.to_string(),
                s.lon.to_string(),
                s.cumulative_km.to_string(),
                format_time(s.planned_arrival),
                format_time(s.planned_departure),
                s.actual_arrival.map(format_time).unwrap_or_default(),
                s.actual_departure.map(format_time).unwrap_or_default(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_weather_csv<R: Read>(reader: R, source: &str) -> Result<Vec<WeatherSample>> {
    let mut table = Table::open(reader, source, &WEATHER_COLUMNS)?;
    table.rows(&WEATHER_COLUMNS, |r| {
        let s = WeatherSample {
            grid_lat: r.float(0)?,
            grid_lon: r.float(1)?,
            hour: r.time(2)?,
            temperature: r.float(3)?,
            humidity: r.float(4)?,
            snow_depth: r.float(5)?,
            ice_snow_precip: r.float(6)?,
        };
        s.validate().map_err(|m| Error::parse(r.source, r.line, m))?;
        Ok(s)
    })
}

pub fn write_weather_csv<'a, W: Write>(writer: W, samples: impl IntoIterator<Item = &'a WeatherSample>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(WEATHER_COLUMNS)?;
    for s in samples {
        w.write_record([
            s.grid_lat.to_string(),
            s.grid_lon.to_string(),
            format_time(s.hour),
            s.temperature.to_string(),
            s.humidity.to_string(),
            s.snow_depth.to_string(),
            s.ice_snow_precip.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset_csv<R: Read>(reader: R, source: &str) -> Result<Vec<SectionObservation>> {
    let mut table = Table::open(reader, source, &DATASET_COLUMNS)?;
    table.rows(&DATASET_COLUMNS, |r| {
        let obs = SectionObservation {
            train_id: r.text(0)?,
            service_date: r.date(1)?,
            section_index: r.uint(2)?,
            from_spot: r.text(3)?,
            to_spot: r.text(4)?,
            from_km: r.float(5)?,
            to_km: r.float(6)?,
            direction: r.flag(7)?,
            temperature: r.float(8)?,
            humidity: r.float(9)?,
            snow_depth: r.float(10)?,
            precip_flag: r.flag(11)?,
            primary_delay: r.flag(12)?,
            arrival_delay: r.flag(13)?,
        };
        if !(obs.to_km > obs.from_km) {
            return Err(Error::parse(r.source, r.line, "to_km must exceed from_km"));
        }
        Ok(obs)
    })
}

pub fn write_dataset_csv<W: Write>(writer: W, sections: &[SectionObservation]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(DATASET_COLUMNS)?;
    for s in sections {
        w.write_record([
            s.train_id.clone(),
            s.service_date.format("%Y-%m-%d").to_string(),
            s.section_index.to_string(),
            s.from_spot.clone(),
            s.to_spot.clone(),
            s.from_km.to_string(),
            s.to_km.to_string(),
            s.direction.to_string(),
            s.temperature.to_string(),
            s.humidity.to_string(),
            s.snow_depth.to_string(),
            s.precip_flag.to_string(),
            s.primary_delay.to_string(),
            s.arrival_delay.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn runs_parse_errors_carry_line_numbers() {
        let text = "train_id,initial_station,spot_name,spot_lat,spot_lon,cumulative_km,planned_arrival,planned_departure,actual_arrival,actual_departure\n\
                    T1,north_terminus,A,63.8,20.2,0,2018-02-01T10:00,2018-02-01T10:00,2018-02-01T10:00,2018-02-01T10:01\n\
                    T1,north_terminus,B,63.7,20.1,abc,2018-02-01T10:10,2018-02-01T10:10,,\n";
        let err = read_runs_csv(text.as_bytes(), "runs.csv").unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("cumulative_km"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_column_is_reported() {
        let err = read_weather_csv("grid_lat,grid_lon\n1,2\n".as_bytes(), "weather.csv").unwrap_err();
        assert!(err.to_string().contains("hour"));
    }

    #[test]
    fn weather_invariants_checked_on_read() {
        let text = "grid_lat,grid_lon,hour,temperature,humidity,snow_depth,ice_snow_precip\n\
                    63,20,2018-02-01T10:00,-3,120,1,0\n";
        let err = read_weather_csv(text.as_bytes(), "weather.csv").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn runs_round_trip_with_blank_actuals() {
        let text = "train_id,initial_station,spot_name,spot_lat,spot_lon,cumulative_km,planned_arrival,planned_departure,actual_arrival,actual_departure\n\
                    T1,south_terminus,A,59.3,18.1,0,2018-02-01T10:00,2018-02-01T10:00,,2018-02-01T10:01\n\
                    T1,south_terminus,B,59.4,18.1,7.5,2018-02-01T10:10,2018-02-01T10:11,2018-02-01T10:12:30,2018-02-01T10:13\n";
        let runs = read_runs_csv(text.as_bytes(), "runs.csv").unwrap();
        assert_eq!(runs.len(), 1);
        assert_eq!(runs[0].spots[0].actual_arrival, None);
        let mut buf = Vec::new();
        write_runs_csv(&mut buf, &runs).unwrap();
        let again = read_runs_csv(buf.as_slice(), "buf").unwrap();
        assert_eq!(runs, again);
    }
}
