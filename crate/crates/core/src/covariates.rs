use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::ingest::SectionObservation;

/// Section-level covariates available to both models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Covariate {
    Direction,
    Temperature,
    Humidity,
    SnowDepth,
    PrecipFlag,
}

impl Covariate {
    pub const ALL: [Covariate; 5] = [
        Covariate::Direction,
        Covariate::Temperature,
        Covariate::Humidity,
        Covariate::SnowDepth,
        Covariate::PrecipFlag,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Covariate::Direction => "direction",
            Covariate::Temperature => "temperature",
            Covariate::Humidity => "humidity",
            Covariate::SnowDepth => "snow_depth",
            Covariate::PrecipFlag => "precip_flag",
        }
    }

    /// Row label used in hazard-ratio tables.
    pub fn label(self) -> &'static str {
        match self {
            Covariate::Direction => "Direction",
            Covariate::Temperature => "Temperature",
            Covariate::Humidity => "Humidity",
            Covariate::SnowDepth => "Snow depth",
            Covariate::PrecipFlag => "Ice/snow precipitation",
        }
    }

    pub fn value(self, obs: &SectionObservation) -> f64 {
        match self {
            Covariate::Direction => f64::from(obs.direction),
            Covariate::Temperature => obs.temperature,
            Covariate::Humidity => obs.humidity,
            Covariate::SnowDepth => obs.snow_depth,
            Covariate::PrecipFlag => f64::from(obs.precip_flag),
        }
    }
}

impl fmt::Display for Covariate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Covariate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Covariate::ALL
            .into_iter()
            .find(|c| c.key() == s.trim())
            .ok_or_else(|| Error::InvalidInput(format!("unknown covariate `{s}`")))
    }
}

/// Ordered list of covariates entering a model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CovariateSpec(pub Vec<Covariate>);

impl CovariateSpec {
    pub fn none() -> Self {
        Self(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = Covariate> + '_ {
        self.0.iter().copied()
    }

    pub fn values(&self, obs: &SectionObservation) -> Vec<f64> {
        self.0.iter().map(|c| c.value(obs)).collect()
    }
}

impl Default for CovariateSpec {
    fn default() -> Self {
        Self(Covariate::ALL.to_vec())
    }
}

impl FromStr for CovariateSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim().is_empty() || s.trim() == "none" {
            return Ok(Self::none());
        }
        s.split(',').map(str::parse).collect::<Result<Vec<_>, _>>().map(Self)
    }
}
