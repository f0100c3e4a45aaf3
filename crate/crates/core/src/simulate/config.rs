use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::covariates::Covariate;
use crate::ctmc::{CtmcParams, SegmentScheme, TransitionParams};
use crate::error::{Error, Result};

/// First-order autoregressive process around `mean`, one step per hour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeatherProcess {
    pub mean: f64,
    pub ar: f64,
    pub noise: f64,
}

/// A simulated stretch of service. `severity` scales the configured
/// weather shift; 0 is the base climate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Period {
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub severity: f64,
}

impl Period {
    pub fn days(&self) -> usize {
        ((self.end - self.start).num_days() + 1) as usize
    }
}

/// Weather shift applied per unit of period severity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeverityShift {
    pub temperature: f64,
    pub humidity: f64,
    pub snow_depth: f64,
    pub precip: f64,
}

/// Planted intensity of one chain transition, on the hazard-ratio scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionTruth {
    /// Intensity per km at zero covariates in the first segment.
    pub baseline: f64,
    /// Per covariate: direction, temperature, humidity, snow depth, precipitation.
    pub hazard_ratios: Vec<f64>,
    /// Per segment after the first, relative to the first.
    pub segment_ratios: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CtmcTruth {
    pub boundaries: Vec<f64>,
    pub punctual_to_delayed: TransitionTruth,
    pub delayed_to_punctual: TransitionTruth,
}

/// Planted recurrent primary-delay process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxTruth {
    pub hazard_ratios: Vec<f64>,
    /// Baseline hazard per km of strata 1, 2, …; later strata reuse the last.
    pub baselines: Vec<f64>,
    /// Distances where the baseline is raised by `bump_factor` over
    /// `bump_width` km.
    pub bump_centers: Vec<f64>,
    pub bump_width: f64,
    pub bump_factor: f64,
}

impl TransitionTruth {
    pub fn to_params(&self) -> TransitionParams {
        TransitionParams {
            log_baseline: self.baseline.ln(),
            beta: self.hazard_ratios.iter().map(|r| r.ln()).collect(),
            z: self.segment_ratios.iter().map(|r| r.ln()).collect(),
        }
    }
}

impl CtmcTruth {
    /// Planted chain parameters over the five standard covariates.
    pub fn params(&self) -> Result<CtmcParams> {
        CtmcParams::new(
            Covariate::ALL.iter().map(|c| c.key().to_string()).collect(),
            self.punctual_to_delayed.to_params(),
            self.delayed_to_punctual.to_params(),
        )
    }

    pub fn scheme(&self) -> Result<SegmentScheme> {
        SegmentScheme::new(self.boundaries.clone())
    }
}

impl CoxTruth {
    pub fn beta(&self) -> Vec<f64> {
        self.hazard_ratios.iter().map(|r| r.ln()).collect()
    }

    /// Baseline hazard of stratum `stratum` (1-based) at distance `t`.
    pub fn baseline(&self, stratum: usize, t: f64) -> f64 {
        let base = self.baselines[(stratum.max(1) - 1).min(self.baselines.len() - 1)];
        let half = 0.5 * self.bump_width;
        if self.bump_centers.iter().any(|&c| t >= c - half && t < c + half) {
            base * self.bump_factor
        } else {
            base
        }
    }

    /// Distances where the baseline changes.
    pub fn edges(&self) -> Vec<f64> {
        let half = 0.5 * self.bump_width;
        let mut e: Vec<f64> = self.bump_centers.iter().flat_map(|&c| [c - half, c + half]).collect();
        e.sort_by(f64::total_cmp);
        e.dedup();
        e
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub train_count: usize,
    pub periods: Vec<Period>,
    pub line_length_km: f64,
    pub spot_count: usize,
    pub section_km_min: f64,
    pub section_km_max: f64,
    pub speed_kmh: f64,
    pub departure_hours: Vec<u32>,
    /// Share of trains starting from the north terminus.
    pub direction_mix: f64,
    /// Probability that an actual arrival time is not recorded.
    pub missing_rate: f64,
    pub temperature: WeatherProcess,
    pub humidity: WeatherProcess,
    pub snow_depth: WeatherProcess,
    /// Latent process; values below zero are reported as no precipitation.
    pub precip: WeatherProcess,
    pub severity: SeverityShift,
    pub ctmc: CtmcTruth,
    pub cox: CoxTruth,
}

impl SimConfig {
    /// Two winters of service on a 711 km line with 116 measuring spots,
    /// the second winter colder and snowier, and planted effects of the
    /// size reported for the line.
    pub fn two_winters(seed: u64) -> Self {
        let date = |y, m, d| NaiveDate::from_ymd_opt(y, m, d).unwrap();
        Self {
            seed,
            train_count: 360,
            periods: vec![
                Period {
                    start: date(2016, 12, 1),
                    end: date(2017, 2, 28),
                    severity: 0.0,
                },
                Period {
                    start: date(2017, 12, 1),
                    end: date(2018, 2, 28),
                    severity: 1.0,
                },
            ],
            line_length_km: 711.0,
            spot_count: 116,
            section_km_min: 0.3,
            section_km_max: 15.0,
            speed_kmh: 100.0,
            departure_hours: vec![6, 9, 12, 15, 18],
            direction_mix: 0.5,
            missing_rate: 0.0,
            temperature: WeatherProcess {
                mean: 0.3,
                ar: 0.95,
                noise: 1.0,
            },
            humidity: WeatherProcess {
                mean: 87.5,
                ar: 0.9,
                noise: 2.5,
            },
            snow_depth: WeatherProcess {
                mean: 1.5,
                ar: 0.99,
                noise: 0.3,
            },
            precip: WeatherProcess {
                mean: -0.15,
                ar: 0.8,
                noise: 0.15,
            },
            severity: SeverityShift {
                temperature: -3.0,
                humidity: -5.0,
                snow_depth: 3.0,
                precip: 0.05,
            },
            ctmc: CtmcTruth {
                boundaries: vec![200.0, 500.0],
                punctual_to_delayed: TransitionTruth {
                    baseline: 0.0045,
                    hazard_ratios: vec![0.586, 0.958, 0.997, 1.026, 1.142],
                    segment_ratios: vec![1.947, 1.658],
                },
                delayed_to_punctual: TransitionTruth {
                    baseline: 0.0132,
                    hazard_ratios: vec![0.751, 1.017, 1.003, 0.984, 0.765],
                    segment_ratios: vec![1.038, 0.718],
                },
            },
            cox: CoxTruth {
                hazard_ratios: vec![1.021, 0.989, 1.001, 1.014, 1.225],
                baselines: vec![0.002, 0.003],
                bump_centers: vec![200.0, 500.0],
                bump_width: 10.0,
                bump_factor: 6.0,
            },
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Reads `key = value` lines over the two-winter defaults. `#` starts a
    /// comment; `seed` is required.
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let mut cfg = Self::two_winters(0);
        let mut seed = None;
        let mut severities: Option<(usize, Vec<f64>)> = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                source_name: source_name.to_string(),
                line: line_no,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err(format!("expected `key = value`, got {line:?}")))?;
            let num = |v: &str| v.parse::<f64>().map_err(|_| err(format!("{key}: bad number {v:?}")));
            let list = |v: &str| -> Result<Vec<f64>> {
                if v.is_empty() {
                    return Ok(vec![]);
                }
                v.split(',').map(|x| num(x.trim())).collect()
            };
            let count = |v: &str| v.parse::<usize>().map_err(|_| err(format!("{key}: bad count {v:?}")));
            match key {
                "seed" => seed = Some(v_u64(value).ok_or_else(|| err(format!("seed: bad integer {value:?}")))?),
                "train_count" => cfg.train_count = count(value)?,
                "periods" => cfg.periods = parse_periods(value).map_err(err)?,
                "period_severity" => severities = Some((line_no, list(value)?)),
                "line_length_km" => cfg.line_length_km = num(value)?,
                "spot_count" => cfg.spot_count = count(value)?,
                "section_km_min" => cfg.section_km_min = num(value)?,
                "section_km_max" => cfg.section_km_max = num(value)?,
                "speed_kmh" => cfg.speed_kmh = num(value)?,
                "departure_hours" => {
                    cfg.departure_hours = value
                        .split(',')
                        .map(|h| h.trim().parse::<u32>().ok().filter(|h| *h < 24))
                        .collect::<Option<Vec<_>>>()
                        .ok_or_else(|| err(format!("departure_hours: bad hour list {value:?}")))?
                }
                "direction_mix" => cfg.direction_mix = num(value)?,
                "missing_rate" => cfg.missing_rate = num(value)?,
                "severity_temperature" => cfg.severity.temperature = num(value)?,
                "severity_humidity" => cfg.severity.humidity = num(value)?,
                "severity_snow_depth" => cfg.severity.snow_depth = num(value)?,
                "severity_precip" => cfg.severity.precip = num(value)?,
                "ctmc_boundaries" => cfg.ctmc.boundaries = list(value)?,
                "ctmc_pd_baseline" => cfg.ctmc.punctual_to_delayed.baseline = num(value)?,
                "ctmc_pd_hazard_ratios" => cfg.ctmc.punctual_to_delayed.hazard_ratios = list(value)?,
                "ctmc_pd_segment_ratios" => cfg.ctmc.punctual_to_delayed.segment_ratios = list(value)?,
                "ctmc_dp_baseline" => cfg.ctmc.delayed_to_punctual.baseline = num(value)?,
                "ctmc_dp_hazard_ratios" => cfg.ctmc.delayed_to_punctual.hazard_ratios = list(value)?,
                "ctmc_dp_segment_ratios" => cfg.ctmc.delayed_to_punctual.segment_ratios = list(value)?,
                "cox_hazard_ratios" => cfg.cox.hazard_ratios = list(value)?,
                "cox_baselines" => cfg.cox.baselines = list(value)?,
                "cox_bump_centers" => cfg.cox.bump_centers = list(value)?,
                "cox_bump_width" => cfg.cox.bump_width = num(value)?,
                "cox_bump_factor" => cfg.cox.bump_factor = num(value)?,
                _ => {
                    let process = match key.rsplit_once('_') {
                        Some(("temperature", _)) => Some(&mut cfg.temperature),
                        Some(("humidity", _)) => Some(&mut cfg.humidity),
                        Some(("snow_depth", _)) => Some(&mut cfg.snow_depth),
                        Some(("precip", _)) => Some(&mut cfg.precip),
                        _ => None,
                    };
                    let field = match (process, key.rsplit_once('_').map(|(_, f)| f)) {
                        (Some(p), Some("mean")) => &mut p.mean,
                        (Some(p), Some("ar")) => &mut p.ar,
                        (Some(p), Some("noise")) => &mut p.noise,
                        _ => return Err(err(format!("unknown key {key:?}"))),
                    };
                    *field = num(value)?;
                }
            }
        }
        cfg.seed = seed.ok_or_else(|| Error::Parse {
            source_name: source_name.to_string(),
            line: 0,
            message: "missing required key `seed`".into(),
        })?;
        if let Some((line, sev)) = severities {
            if sev.len() != cfg.periods.len() {
                return Err(Error::Parse {
                    source_name: source_name.to_string(),
                    line,
                    message: format!(
                        "period_severity has {} values for {} periods",
                        sev.len(),
                        cfg.periods.len()
                    ),
                });
            }
            for (p, s) in cfg.periods.iter_mut().zip(sev) {
                p.severity = s;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(format!("simulation config: {m}")));
        if self.periods.is_empty() {
            return bad("at least one period is required");
        }
        if self.periods.iter().any(|p| p.end < p.start) {
            return bad("a period ends before it starts");
        }
        if self.periods.windows(2).any(|w| w[1].start <= w[0].end) {
            return bad("periods must be ascending and disjoint");
        }
        if self.spot_count < 2 {
            return bad("spot_count must be at least 2");
        }
        if !(self.line_length_km > 0.0) {
            return bad("line_length_km must be positive");
        }
        if !(self.section_km_min > 0.0 && self.section_km_max >= self.section_km_min) {
            return bad("section length range must satisfy 0 < min <= max");
        }
        if !(self.speed_kmh > 0.0) {
            return bad("speed_kmh must be positive");
        }
        if self.departure_hours.is_empty() {
            return bad("departure_hours must not be empty");
        }
        if !(0.0..=1.0).contains(&self.direction_mix) || !(0.0..=1.0).contains(&self.missing_rate) {
            return bad("direction_mix and missing_rate must lie in [0, 1]");
        }
        for p in [&self.temperature, &self.humidity, &self.snow_depth, &self.precip] {
            if !(p.ar.abs() < 1.0) || !(p.noise >= 0.0) || !p.mean.is_finite() {
                return bad("weather processes need |ar| < 1, noise >= 0 and a finite mean");
            }
        }
        let m = self.ctmc.boundaries.len();
        if self.ctmc.boundaries.windows(2).any(|w| !(w[1] > w[0]))
            || self
                .ctmc
                .boundaries
                .iter()
                .any(|&b| !(b > 0.0 && b < self.line_length_km))
        {
            return bad("ctmc_boundaries must ascend strictly inside the line");
        }
        for t in [&self.ctmc.punctual_to_delayed, &self.ctmc.delayed_to_punctual] {
            if t.hazard_ratios.len() != 5 {
                return bad("chain hazard ratios need one value per covariate (5)");
            }
            if t.segment_ratios.len() != m {
                return bad("chain segment ratios need one value per boundary");
            }
            if !(t.baseline > 0.0) || t.hazard_ratios.iter().chain(&t.segment_ratios).any(|r| !(*r > 0.0)) {
                return bad("chain rates and ratios must be positive");
            }
        }
        if self.cox.hazard_ratios.len() != 5 || self.cox.hazard_ratios.iter().any(|r| !(*r > 0.0)) {
            return bad("cox_hazard_ratios need 5 positive values");
        }
        if self.cox.baselines.is_empty() || self.cox.baselines.iter().any(|b| !(*b >= 0.0)) {
            return bad("cox_baselines need at least one nonnegative value");
        }
        if !(self.cox.bump_width >= 0.0 && self.cox.bump_factor >= 0.0) {
            return bad("cox bump width and factor must be nonnegative");
        }
        Ok(())
    }

    pub fn total_days(&self) -> usize {
        self.periods.iter().map(Period::days).sum()
    }
}

fn v_u64(s: &str) -> Option<u64> {
    s.parse().ok()
}

fn parse_periods(value: &str) -> std::result::Result<Vec<Period>, String> {
    value
        .split(',')
        .map(|part| {
            let (a, b) = part
                .trim()
                .split_once("..")
                .ok_or_else(|| format!("period {part:?} is not `start..end`"))?;
            let date = |s: &str| NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").map_err(|_| format!("bad date {s:?}"));
            Ok(Period {
                start: date(a)?,
                end: date(b)?,
                severity: 0.0,
            })
        })
        .collect()
}
