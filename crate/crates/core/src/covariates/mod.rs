//! Model rows: the eight predictors per selected region.

mod collinearity;
pub mod geo;
mod infrastructure;

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::{DateTime, FixedOffset};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data_model::Dataset;
use crate::resilience::ResilienceResult;

pub use collinearity::{column_mean_std, diagnostics, standardize, Diagnostics, StandardizedMatrix};
pub use geo::{distance_to_path, haversine_km, NearestCenterLookup, RegionLookup, EARTH_RADIUS_KM};
pub use infrastructure::{
    restoration_days, road_hours, road_hours_by_region, RoadHoursReport,
    DEFAULT_RESTORATION_THRESHOLD,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CovariateError {
    #[error("invalid coordinate ({lat}, {lon})")]
    InvalidCoordinate { lat: f64, lon: f64 },
    #[error("hazard path is empty")]
    EmptyPath,
    #[error("outage series for {0} is empty")]
    EmptySeries(String),
    #[error("restoration threshold {0} not in (0, 1]")]
    InvalidThreshold(f64),
    #[error("no outage series for county {county} (region {polygon_id})")]
    MissingCounty { county: String, polygon_id: String },
    #[error("region {0} has no attributes")]
    MissingAttributes(String),
    #[error("column {0} is constant")]
    ConstantColumn(usize),
    #[error("columns {columns:?} are exactly collinear")]
    RankDeficient { columns: Vec<usize> },
    #[error("{rows} rows, need at least {needed}")]
    TooFewRows { rows: usize, needed: usize },
    #[error("unknown column {0}")]
    UnknownColumn(String),
    #[error("covariates.csv row {row}: {message}")]
    Parse { row: usize, message: String },
}

/// Predictor columns in model order.
pub const PREDICTORS: [&str; 8] = [
    "road_hours",
    "restore_days",
    "damage",
    "pct_pre2000",
    "dist_km",
    "income",
    "pct_black",
    "pct_hispanic",
];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CovariateRow {
    pub polygon_id: String,
    /// Grouping key (county).
    #[serde(rename = "county")]
    pub group: String,
    /// Response; strictly positive.
    pub trl: f64,
    pub road_hours: f64,
    pub restore_days: f64,
    pub damage: f64,
    pub pct_pre2000: f64,
    pub dist_km: f64,
    pub income: f64,
    pub pct_black: f64,
    pub pct_hispanic: f64,
}

impl CovariateRow {
    pub fn value(&self, column: &str) -> Option<f64> {
        Some(match column {
            "trl" => self.trl,
            "road_hours" => self.road_hours,
            "restore_days" => self.restore_days,
            "damage" => self.damage,
            "pct_pre2000" => self.pct_pre2000,
            "dist_km" => self.dist_km,
            "income" => self.income,
            "pct_black" => self.pct_black,
            "pct_hispanic" => self.pct_hispanic,
            _ => return None,
        })
    }

    pub fn predictors(&self) -> [f64; 8] {
        [
            self.road_hours,
            self.restore_days,
            self.damage,
            self.pct_pre2000,
            self.dist_km,
            self.income,
            self.pct_black,
            self.pct_hispanic,
        ]
    }

    pub fn set_predictors(&mut self, v: [f64; 8]) {
        [
            self.road_hours,
            self.restore_days,
            self.damage,
            self.pct_pre2000,
            self.dist_km,
            self.income,
            self.pct_black,
            self.pct_hispanic,
        ] = v;
    }
}

/// n x columns.len() matrix of the named columns.
pub fn column_matrix(rows: &[CovariateRow], columns: &[&str]) -> Result<DMatrix<f64>, CovariateError> {
    if let Some(c) = columns.iter().find(|c| **c != "trl" && !PREDICTORS.contains(*c)) {
        return Err(CovariateError::UnknownColumn(c.to_string()));
    }
    Ok(DMatrix::from_fn(rows.len(), columns.len(), |i, j| {
        rows[i].value(columns[j]).expect("known column")
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssembleOptions {
    pub restoration_threshold: f64,
    /// Road events are clipped to this window; the analysis horizon in the
    /// dataset timezone when `None`.
    pub road_window: Option<(DateTime<FixedOffset>, DateTime<FixedOffset>)>,
    /// Road events farther than this from every region center are unmapped.
    pub road_match_km: f64,
}

impl Default for AssembleOptions {
    fn default() -> Self {
        AssembleOptions {
            restoration_threshold: DEFAULT_RESTORATION_THRESHOLD,
            road_window: None,
            road_match_km: 25.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assembled {
    pub rows: Vec<CovariateRow>,
    pub road_report: RoadHoursReport,
    pub restore_days_by_county: BTreeMap<String, f64>,
}

/// One row per resilience result, in the order given.
///
/// All subdivisions of a county share the county's restoration time.
pub fn assemble_rows(
    dataset: &Dataset,
    results: &[ResilienceResult],
    options: &AssembleOptions,
) -> Result<Assembled, CovariateError> {
    let window = options
        .road_window
        .unwrap_or_else(|| dataset.horizon().instant_window(dataset.timezone()));
    let lookup = NearestCenterLookup::new(dataset.all_attributes(), options.road_match_km);
    let road_report = road_hours_by_region(dataset.road_events(), window, &lookup);

    let mut restore: BTreeMap<String, f64> = BTreeMap::new();
    let mut rows = Vec::with_capacity(results.len());
    for res in results {
        let region = &res.region;
        let attrs = dataset
            .attributes(&region.polygon_id)
            .ok_or_else(|| CovariateError::MissingAttributes(region.polygon_id.clone()))?;
        let restore_days = match restore.get(&region.county) {
            Some(&d) => d,
            None => {
                let series = dataset.outage_series(&region.county).ok_or_else(|| {
                    CovariateError::MissingCounty {
                        county: region.county.clone(),
                        polygon_id: region.polygon_id.clone(),
                    }
                })?;
                let d = restoration_days(&series, options.restoration_threshold)?;
                restore.insert(region.county.clone(), d);
                d
            }
        };
        rows.push(CovariateRow {
            polygon_id: region.polygon_id.clone(),
            group: region.county.clone(),
            trl: res.trl,
            road_hours: road_report.hours_for(&region.polygon_id),
            restore_days,
            damage: attrs.property_damage,
            pct_pre2000: attrs.pct_pre2000_houses,
            dist_km: distance_to_path(attrs, dataset.hazard_path())?,
            income: attrs.median_income,
            pct_black: attrs.pct_black,
            pct_hispanic: attrs.pct_hispanic,
        });
    }
    Ok(Assembled {
        rows,
        road_report,
        restore_days_by_county: restore,
    })
}

pub fn write_covariates<W: Write>(writer: W, rows: &[CovariateRow]) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(writer);
    let mut header = vec!["polygon_id", "county", "trl"];
    header.extend(PREDICTORS);
    w.write_record(&header).map_err(std::io::Error::other)?;
    for r in rows {
        w.serialize(r).map_err(std::io::Error::other)?;
    }
    w.flush()
}

pub fn read_covariates<R: Read>(reader: R) -> Result<Vec<CovariateRow>, CovariateError> {
    let mut rdr = csv::Reader::from_reader(reader);
    rdr.deserialize()
        .enumerate()
        .map(|(i, r)| {
            r.map_err(|e| CovariateError::Parse {
                row: i + 2,
                message: e.to_string(),
            })
        })
        .collect()
}
