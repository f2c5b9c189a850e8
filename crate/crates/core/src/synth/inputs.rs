//! A complete synthetic input set: activity, outages, road events, a storm
//! track and region attributes for `groups x per_group` regions.

use std::path::Path;

use chrono::{DateTime, Duration, FixedOffset, NaiveDate};
use chrono_tz::Tz;
use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal};

use crate::covariates::geo::haversine_km;
use crate::data_model::{
    write_dataset_csvs, ActivityObservation, Dataset, DatasetParts, HazardPathPoint,
    Horizon, Manifest, OutageObservation, RegionAttributes, RegionId, RoadEvent, RoadEventCategory,
};

use super::{curve_values, rng, CurveParams, SynthError};

pub const SIM_TIMEZONE: Tz = chrono_tz::America::Chicago;

pub fn sim_horizon() -> Horizon {
    Horizon::new(
        NaiveDate::from_ymd_opt(2021, 8, 25).expect("valid date"),
        NaiveDate::from_ymd_opt(2021, 9, 30).expect("valid date"),
    )
    .expect("ordered horizon")
}

pub fn sim_landfall() -> NaiveDate {
    NaiveDate::from_ymd_opt(2021, 8, 29).expect("valid date")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimulationConfig {
    pub seed: u64,
    pub groups: usize,
    pub per_group: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            seed: 7,
            groups: 36,
            per_group: 5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedInputs {
    pub dataset: Dataset,
    pub landfall: NaiveDate,
}

impl SimulatedInputs {
    pub fn manifest(&self, dir: &Path) -> Manifest {
        let mut m = Manifest::conventional(dir, self.dataset.horizon(), SIM_TIMEZONE.name());
        m.landfall = Some(self.landfall);
        m
    }

    /// Writes the five input CSVs and `manifest.json` into `dir`.
    pub fn write(&self, dir: &Path) -> std::io::Result<Manifest> {
        write_dataset_csvs(&self.dataset, dir)?;
        let manifest = self.manifest(dir);
        let json = serde_json::to_string_pretty(&manifest)?;
        std::fs::write(dir.join("manifest.json"), json + "\n")?;
        Ok(manifest)
    }
}

fn track(landfall: DateTime<FixedOffset>) -> Vec<HazardPathPoint> {
    let (a, b) = ((28.6, -90.1), (32.6, -91.3));
    (0..=48)
        .map(|h| {
            let t = h as f64 / 48.0;
            HazardPathPoint {
                timestamp: landfall + Duration::hours(h),
                lat: a.0 + t * (b.0 - a.0),
                lon: a.1 + t * (b.1 - a.1),
            }
        })
        .collect()
}

const CATEGORIES: [RoadEventCategory; 6] = [
    RoadEventCategory::WeatherHazard,
    RoadEventCategory::WeatherClosure,
    RoadEventCategory::RoadClosed,
    RoadEventCategory::Closure,
    RoadEventCategory::Obstruction,
    RoadEventCategory::Other,
];

/// Builds a validated synthetic dataset. Regions nearer the storm track drop
/// deeper and recover more slowly; a share of far regions is left unaffected
/// so that selection has something to exclude.
pub fn simulate_inputs(config: &SimulationConfig) -> Result<SimulatedInputs, SynthError> {
    if config.groups == 0 || config.per_group == 0 {
        return Err(SynthError::BadParams("groups and per_group must be at least 1".into()));
    }
    let mut rng = rng(config.seed);
    let horizon = sim_horizon();
    let days = horizon.days();
    let landfall = sim_landfall();
    let drop_day = horizon.index_of(landfall).expect("landfall inside horizon");
    let (t0, t1) = horizon.instant_window(SIM_TIMEZONE);
    let landfall_instant = t0 + Duration::days(drop_day as i64) + Duration::hours(12);
    let hazard_path = track(landfall_instant);

    let total = config.groups * config.per_group;
    let grid = (total as f64).sqrt().ceil() as usize;
    let jitter = Normal::new(0.0, 0.02).expect("valid sd");
    let damage = LogNormal::new(10.0, 1.2).expect("valid sd");

    let mut activity = Vec::new();
    let mut attributes = Vec::with_capacity(total);
    let mut road_events = Vec::new();
    for g in 0..config.groups {
        let county = format!("Parish {:02}", g + 1);
        for i in 0..config.per_group {
            let r = g * config.per_group + i;
            let polygon_id = format!("22{:03}{:02}", g + 1, i + 1);
            let region = RegionId {
                polygon_id: polygon_id.clone(),
                name: format!("District {}", i + 1),
                county: county.clone(),
            };
            let lat = 29.0 + (r / grid) as f64 * 3.2 / grid as f64 + jitter.sample(&mut rng);
            let lon = -93.0 + (r % grid) as f64 * 4.0 / grid as f64 + jitter.sample(&mut rng);
            let dist = hazard_path
                .iter()
                .map(|p| haversine_km(lat, lon, p.lat, p.lon).expect("in range"))
                .fold(f64::INFINITY, f64::min);

            let affected = dist < 150.0 || rng.random_bool(0.6);
            let closeness = (-dist / 150.0).exp();
            let params = if affected {
                CurveParams {
                    depth: (0.25 + 0.5 * closeness + rng.random_range(-0.08..0.08)).clamp(0.2, 0.95),
                    drop_day,
                    recovery_days: (2.0 + 14.0 * closeness * rng.random_range(0.5..1.5)).round() as usize,
                    noise_sd: 0.02,
                    seed: rng.random(),
                }
            } else {
                CurveParams {
                    depth: 0.03,
                    drop_day,
                    recovery_days: 2,
                    noise_sd: 0.015,
                    seed: rng.random(),
                }
            };
            let q = curve_values(&params, days)?;
            let baseline: f64 = rng.random_range(200.0..5000.0);
            for (d, qd) in q.iter().enumerate() {
                // roughly 2% of region-days are missing from the feed
                if d > 0 && rng.random_bool(0.02) {
                    continue;
                }
                let crisis = (qd * baseline).round().max(0.0) as u64;
                let rate = crisis as f64 / baseline;
                activity.push(ActivityObservation {
                    region: region.clone(),
                    date: horizon.date_at(d),
                    baseline_users: baseline,
                    crisis_users: crisis,
                    z_score: ((rate - 1.0) / 0.1).clamp(-4.0, 4.0),
                });
            }

            let n_events = rng.random_range(0..=(2.0 + 6.0 * closeness) as usize);
            for j in 0..n_events {
                let start = landfall_instant + Duration::minutes(rng.random_range(-600..4320));
                let end = if rng.random_bool(0.1) {
                    None
                } else {
                    Some(start + Duration::minutes(rng.random_range(30..(60.0 + 12_000.0 * closeness) as i64)))
                };
                road_events.push(RoadEvent {
                    event_id: format!("ev-{polygon_id}-{j}"),
                    lat: lat + rng.random_range(-0.01..0.01),
                    lon: lon + rng.random_range(-0.01..0.01),
                    start,
                    end,
                    category: CATEGORIES[rng.random_range(0..CATEGORIES.len())],
                });
            }

            attributes.push(RegionAttributes {
                polygon_id,
                center_lat: lat,
                center_lon: lon,
                median_income: rng.random_range(22_000.0..120_000.0f64).round(),
                pct_black: rng.random_range(0.0..80.0),
                pct_hispanic: rng.random_range(0.0..20.0),
                pct_pre2000_houses: rng.random_range(30.0..95.0),
                property_damage: if rng.random_bool(0.1) {
                    0.0
                } else {
                    (damage.sample(&mut rng) * (0.2 + closeness)).round()
                },
            });
        }
    }

    let mut outages = Vec::new();
    let hours = (t1 - t0).num_hours();
    for g in 0..config.groups {
        let county = format!("Parish {:02}", g + 1);
        let customers: u64 = rng.random_range(2_000..60_000);
        let hit = rng.random_bool(0.9);
        let onset = 24 * drop_day as i64 + rng.random_range(6..24);
        let restore = rng.random_range(24..24 * 14);
        let peak: f64 = rng.random_range(0.3..0.95);
        for h in 0..hours {
            let f = if hit && h >= onset && h < onset + restore {
                let progress = (h - onset) as f64 / restore as f64;
                0.12 + (peak - 0.12) * (1.0 - progress)
            } else {
                rng.random_range(0.0..0.03)
            };
            outages.push(OutageObservation {
                county: county.clone(),
                timestamp: t0 + Duration::hours(h),
                customers_total: customers,
                customers_out: (f * customers as f64).round() as u64,
            });
        }
    }

    let dataset = Dataset::from_parts(DatasetParts {
        horizon,
        timezone: SIM_TIMEZONE,
        activity,
        outages,
        road_events,
        hazard_path,
        attributes,
    })?;
    Ok(SimulatedInputs { dataset, landfall })
}
