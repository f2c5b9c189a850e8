//! Input schemas, validation, and the immutable [`Dataset`].
//!
//! Five CSV tables feed the pipeline: daily activity counts per region,
//! hourly outage counts per county, road events, the hazard track, and
//! per-region attributes. [`Dataset::from_parts`] is the single place where
//! every invariant is checked; nothing downstream re-validates.

mod io;
mod manifest;

use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, Duration, FixedOffset, NaiveDate, TimeZone};
use chrono_tz::Tz;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{
    parse_activity, parse_attributes, parse_hazard_path, parse_outages, parse_road_events,
    write_activity, write_attributes, write_dataset_csvs, write_hazard_path, write_outages,
    write_road_events,
};
pub use manifest::{load_inputs, load_manifest, Manifest};

/// A region missing more than this fraction of horizon days is rejected.
pub const MAX_GAP_FRACTION: f64 = 0.20;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing input file for {role}: {path}")]
    MissingFile { role: &'static str, path: String },
    #[error("{table} row {row}: {message}")]
    Schema {
        table: &'static str,
        row: usize,
        message: String,
    },
    #[error("duplicate activity key ({polygon_id}, {date}) at rows {first_row} and {second_row}")]
    DuplicateKey {
        polygon_id: String,
        date: NaiveDate,
        first_row: usize,
        second_row: usize,
    },
    #[error("activity region {polygon_id} has no row in attributes")]
    Referential { polygon_id: String },
    #[error("empty horizon: {0}")]
    EmptyHorizon(String),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl DataError {
    pub(crate) fn schema(table: &'static str, row: usize, message: impl Into<String>) -> Self {
        DataError::Schema {
            table,
            row,
            message: message.into(),
        }
    }
}

/// Identity of a county subdivision. `county` is the random-effect grouping key.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RegionId {
    pub polygon_id: String,
    pub name: String,
    pub county: String,
}

impl fmt::Display for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({}, {})", self.polygon_id, self.name, self.county)
    }
}

/// One region-day record.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivityObservation {
    pub region: RegionId,
    pub date: NaiveDate,
    /// Mean user count over the 90 days preceding `date`.
    pub baseline_users: f64,
    pub crisis_users: u64,
    pub z_score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutageObservation {
    pub county: String,
    pub timestamp: DateTime<FixedOffset>,
    pub customers_total: u64,
    pub customers_out: u64,
}

impl OutageObservation {
    pub fn fraction_out(&self) -> f64 {
        self.customers_out as f64 / self.customers_total as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoadEventCategory {
    WeatherHazard,
    WeatherClosure,
    RoadClosed,
    Closure,
    Obstruction,
    Other,
}

impl RoadEventCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            RoadEventCategory::WeatherHazard => "weather_hazard",
            RoadEventCategory::WeatherClosure => "weather_closure",
            RoadEventCategory::RoadClosed => "road_closed",
            RoadEventCategory::Closure => "closure",
            RoadEventCategory::Obstruction => "obstruction",
            RoadEventCategory::Other => "other",
        }
    }

    /// Anything outside the five disruption categories maps to `Other`.
    pub fn parse_lenient(raw: &str) -> Self {
        let key: String = raw
            .trim()
            .to_ascii_lowercase()
            .chars()
            .map(|c| if c == ' ' || c == '-' { '_' } else { c })
            .collect();
        match key.trim_end_matches('s') {
            "weather_hazard" => RoadEventCategory::WeatherHazard,
            "weather_closure" => RoadEventCategory::WeatherClosure,
            "road_closed" => RoadEventCategory::RoadClosed,
            "closure" => RoadEventCategory::Closure,
            "obstruction" => RoadEventCategory::Obstruction,
            _ => RoadEventCategory::Other,
        }
    }

    pub fn is_disruption(self) -> bool {
        self != RoadEventCategory::Other
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoadEvent {
    pub event_id: String,
    pub lat: f64,
    pub lon: f64,
    pub start: DateTime<FixedOffset>,
    pub end: Option<DateTime<FixedOffset>>,
    pub category: RoadEventCategory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HazardPathPoint {
    pub timestamp: DateTime<FixedOffset>,
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionAttributes {
    pub polygon_id: String,
    pub center_lat: f64,
    pub center_lon: f64,
    pub median_income: f64,
    pub pct_black: f64,
    pub pct_hispanic: f64,
    pub pct_pre2000_houses: f64,
    /// Zero when no inspected damage was recorded.
    pub property_damage: f64,
}

/// Inclusive range of calendar days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Horizon {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl Horizon {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self, DataError> {
        if end < start {
            return Err(DataError::EmptyHorizon(format!(
                "end {end} precedes start {start}"
            )));
        }
        Ok(Horizon { start, end })
    }

    pub fn days(&self) -> usize {
        (self.end - self.start).num_days() as usize + 1
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }

    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        self.contains(date)
            .then(|| (date - self.start).num_days() as usize)
    }

    pub fn date_at(&self, index: usize) -> NaiveDate {
        self.start + Duration::days(index as i64)
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        (0..self.days()).map(|i| self.date_at(i))
    }

    /// Half-open instant window `[start 00:00, end+1 00:00)` in `tz`.
    pub fn instant_window(&self, tz: Tz) -> (DateTime<FixedOffset>, DateTime<FixedOffset>) {
        (
            local_midnight(tz, self.start),
            local_midnight(tz, self.end + Duration::days(1)),
        )
    }
}

pub(crate) fn local_midnight(tz: Tz, date: NaiveDate) -> DateTime<FixedOffset> {
    let naive = date.and_hms_opt(0, 0, 0).expect("midnight is valid");
    let local = tz
        .from_local_datetime(&naive)
        .earliest()
        .unwrap_or_else(|| tz.from_utc_datetime(&naive));
    local.fixed_offset()
}

/// Hourly outage counts of one county, ordered by timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct OutageSeries {
    pub county: String,
    pub points: Vec<OutageObservation>,
}

/// One day of a region's gap-filled daily activity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DailyRecord {
    pub date: NaiveDate,
    pub baseline_users: f64,
    pub crisis_users: u64,
    pub z_score: f64,
    /// False when the value was carried over from a neighbouring day.
    pub observed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionDaily {
    pub records: Vec<DailyRecord>,
    pub gaps: usize,
}

impl RegionDaily {
    pub fn is_complete(&self) -> bool {
        (self.gaps as f64) <= MAX_GAP_FRACTION * self.records.len() as f64
    }
}

/// Counts reported by [`Dataset::from_parts`].
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LoadReport {
    pub activity_rows_outside_horizon: usize,
    /// Missing horizon days per region (only regions with gaps).
    pub gap_days: BTreeMap<String, usize>,
    /// Regions over the gap limit; they stay in the dataset but cannot be quantified.
    pub incomplete_regions: Vec<String>,
    pub attributes_without_activity: usize,
}

/// Raw tables before validation.
#[derive(Debug, Clone)]
pub struct DatasetParts {
    pub horizon: Horizon,
    pub timezone: Tz,
    pub activity: Vec<ActivityObservation>,
    pub outages: Vec<OutageObservation>,
    pub road_events: Vec<RoadEvent>,
    pub hazard_path: Vec<HazardPathPoint>,
    pub attributes: Vec<RegionAttributes>,
}

/// Validated, immutable inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    horizon: Horizon,
    timezone: Tz,
    regions: Vec<RegionId>,
    /// Sorted by (polygon_id, date).
    activity: Vec<ActivityObservation>,
    activity_ranges: BTreeMap<String, (usize, usize)>,
    /// Sorted by (county, timestamp).
    outages: Vec<OutageObservation>,
    road_events: Vec<RoadEvent>,
    hazard_path: Vec<HazardPathPoint>,
    attributes: BTreeMap<String, RegionAttributes>,
    report: LoadReport,
}

fn check_lat_lon(table: &'static str, row: usize, lat: f64, lon: f64) -> Result<(), DataError> {
    if !(-90.0..=90.0).contains(&lat) {
        return Err(DataError::schema(table, row, format!("latitude {lat} outside [-90, 90]")));
    }
    if !(-180.0..=180.0).contains(&lon) {
        return Err(DataError::schema(
            table,
            row,
            format!("longitude {lon} outside [-180, 180]"),
        ));
    }
    Ok(())
}

fn check_percent(row: usize, column: &str, value: f64) -> Result<(), DataError> {
    if !(0.0..=100.0).contains(&value) {
        return Err(DataError::schema(
            "attributes",
            row,
            format!("{column} = {value} outside [0, 100]"),
        ));
    }
    Ok(())
}

/// Row numbers in errors count the header as row 1, matching CSV line numbers.
fn csv_row(index: usize) -> usize {
    index + 2
}

impl Dataset {
    pub fn from_parts(parts: DatasetParts) -> Result<Dataset, DataError> {
        let DatasetParts {
            horizon,
            timezone,
            activity,
            mut outages,
            road_events,
            hazard_path,
            attributes,
        } = parts;
        let horizon = Horizon::new(horizon.start, horizon.end)?;
        let mut report = LoadReport::default();

        // Attributes.
        let mut attr_map = BTreeMap::new();
        for (i, a) in attributes.into_iter().enumerate() {
            let row = csv_row(i);
            if a.polygon_id.trim().is_empty() {
                return Err(DataError::schema("attributes", row, "empty polygon_id"));
            }
            check_lat_lon("attributes", row, a.center_lat, a.center_lon)?;
            check_percent(row, "pct_black", a.pct_black)?;
            check_percent(row, "pct_hispanic", a.pct_hispanic)?;
            check_percent(row, "pct_pre2000_houses", a.pct_pre2000_houses)?;
            if !(a.property_damage >= 0.0) || !a.property_damage.is_finite() {
                return Err(DataError::schema(
                    "attributes",
                    row,
                    format!("property_damage {} must be a finite value >= 0", a.property_damage),
                ));
            }
            if !a.median_income.is_finite() {
                return Err(DataError::schema("attributes", row, "median_income not finite"));
            }
            if attr_map.contains_key(&a.polygon_id) {
                return Err(DataError::schema(
                    "attributes",
                    row,
                    format!("duplicate polygon_id {}", a.polygon_id),
                ));
            }
            attr_map.insert(a.polygon_id.clone(), a);
        }

        // Activity: validate, drop outside horizon, detect duplicates.
        let mut kept: Vec<(usize, ActivityObservation)> = Vec::with_capacity(activity.len());
        let mut identities: BTreeMap<String, RegionId> = BTreeMap::new();
        for (i, obs) in activity.into_iter().enumerate() {
            let row = csv_row(i);
            let r = &obs.region;
            if r.polygon_id.trim().is_empty() {
                return Err(DataError::schema("activity", row, "empty polygon_id"));
            }
            if r.county.trim().is_empty() {
                return Err(DataError::schema("activity", row, "empty county"));
            }
            if !(-4.0..=4.0).contains(&obs.z_score) {
                return Err(DataError::schema(
                    "activity",
                    row,
                    format!("z_score {} outside [-4, 4]", obs.z_score),
                ));
            }
            if !(obs.baseline_users >= 0.0) || !obs.baseline_users.is_finite() {
                return Err(DataError::schema(
                    "activity",
                    row,
                    format!("baseline_users {} must be finite and >= 0", obs.baseline_users),
                ));
            }
            match identities.get(&r.polygon_id) {
                Some(known) if known != r => {
                    return Err(DataError::schema(
                        "activity",
                        row,
                        format!(
                            "polygon_id {} has name/county ({}, {}) but earlier rows say ({}, {})",
                            r.polygon_id, r.name, r.county, known.name, known.county
                        ),
                    ));
                }
                Some(_) => {}
                None => {
                    identities.insert(r.polygon_id.clone(), r.clone());
                }
            }
            if !horizon.contains(obs.date) {
                report.activity_rows_outside_horizon += 1;
                continue;
            }
            kept.push((row, obs));
        }
        kept.sort_by(|(ra, a), (rb, b)| {
            (&a.region.polygon_id, a.date, ra).cmp(&(&b.region.polygon_id, b.date, rb))
        });
        for pair in kept.windows(2) {
            let (ra, a) = &pair[0];
            let (rb, b) = &pair[1];
            if a.region.polygon_id == b.region.polygon_id && a.date == b.date {
                return Err(DataError::DuplicateKey {
                    polygon_id: a.region.polygon_id.clone(),
                    date: a.date,
                    first_row: *ra,
                    second_row: *rb,
                });
            }
        }
        if kept.is_empty() {
            return Err(DataError::EmptyHorizon(format!(
                "no activity rows between {} and {}",
                horizon.start, horizon.end
            )));
        }
        let activity: Vec<ActivityObservation> = kept.into_iter().map(|(_, o)| o).collect();

        let mut activity_ranges = BTreeMap::new();
        let mut start = 0;
        for i in 1..=activity.len() {
            if i == activity.len() || activity[i].region.polygon_id != activity[start].region.polygon_id
            {
                activity_ranges.insert(activity[start].region.polygon_id.clone(), (start, i));
                start = i;
            }
        }
        let regions: Vec<RegionId> = activity_ranges
            .keys()
            .map(|id| identities[id].clone())
            .collect();
        for r in &regions {
            if !attr_map.contains_key(&r.polygon_id) {
                return Err(DataError::Referential {
                    polygon_id: r.polygon_id.clone(),
                });
            }
        }
        report.attributes_without_activity = attr_map
            .keys()
            .filter(|id| !activity_ranges.contains_key(*id))
            .count();

        // Outages.
        for (i, o) in outages.iter().enumerate() {
            let row = csv_row(i);
            if o.county.trim().is_empty() {
                return Err(DataError::schema("outages", row, "empty county"));
            }
            if o.customers_total == 0 {
                return Err(DataError::schema("outages", row, "customers_total must be positive"));
            }
            if o.customers_out > o.customers_total {
                return Err(DataError::schema(
                    "outages",
                    row,
                    format!(
                        "customers_out ({}) exceeds customers_total ({}); invariant customers_out <= customers_total",
                        o.customers_out, o.customers_total
                    ),
                ));
            }
        }
        outages.sort_by(|a, b| (&a.county, a.timestamp).cmp(&(&b.county, b.timestamp)));
        for pair in outages.windows(2) {
            if pair[0].county == pair[1].county && pair[0].timestamp == pair[1].timestamp {
                return Err(DataError::schema(
                    "outages",
                    0,
                    format!(
                        "duplicate timestamp {} for county {}",
                        pair[0].timestamp, pair[0].county
                    ),
                ));
            }
        }

        for (i, e) in road_events.iter().enumerate() {
            let row = csv_row(i);
            check_lat_lon("road_events", row, e.lat, e.lon)?;
            if let Some(end) = e.end {
                if end < e.start {
                    return Err(DataError::schema(
                        "road_events",
                        row,
                        format!("event {} ends before it starts", e.event_id),
                    ));
                }
            }
        }

        for (i, p) in hazard_path.iter().enumerate() {
            check_lat_lon("hazard_path", csv_row(i), p.lat, p.lon)?;
            if i > 0 && p.timestamp < hazard_path[i - 1].timestamp {
                return Err(DataError::schema(
                    "hazard_path",
                    csv_row(i),
                    "points must be sorted by timestamp",
                ));
            }
        }

        let mut dataset = Dataset {
            horizon,
            timezone,
            regions,
            activity,
            activity_ranges,
            outages,
            road_events,
            hazard_path,
            attributes: attr_map,
            report,
        };
        let mut gap_days = BTreeMap::new();
        let mut incomplete = Vec::new();
        for r in &dataset.regions {
            let daily = dataset
                .daily_activity(&r.polygon_id)
                .expect("region has activity rows");
            if daily.gaps > 0 {
                gap_days.insert(r.polygon_id.clone(), daily.gaps);
            }
            if !daily.is_complete() {
                incomplete.push(r.polygon_id.clone());
            }
        }
        dataset.report.gap_days = gap_days;
        dataset.report.incomplete_regions = incomplete;
        Ok(dataset)
    }

    pub fn horizon(&self) -> Horizon {
        self.horizon
    }

    pub fn timezone(&self) -> Tz {
        self.timezone
    }

    /// Regions in polygon_id order.
    pub fn regions(&self) -> &[RegionId] {
        &self.regions
    }

    pub fn region(&self, polygon_id: &str) -> Option<&RegionId> {
        self.regions
            .binary_search_by(|r| r.polygon_id.as_str().cmp(polygon_id))
            .ok()
            .map(|i| &self.regions[i])
    }

    pub fn activity(&self) -> &[ActivityObservation] {
        &self.activity
    }

    pub fn activity_for(&self, polygon_id: &str) -> &[ActivityObservation] {
        match self.activity_ranges.get(polygon_id) {
            Some(&(a, b)) => &self.activity[a..b],
            None => &[],
        }
    }

    /// One record per horizon day. Missing days take the previous observed
    /// day's values; leading gaps take the first observed day's values.
    pub fn daily_activity(&self, polygon_id: &str) -> Option<RegionDaily> {
        let rows = self.activity_for(polygon_id);
        let first = rows.first()?;
        let mut records = Vec::with_capacity(self.horizon.days());
        let mut gaps = 0;
        let mut next = 0;
        let mut carry = first;
        for date in self.horizon.dates() {
            let observed = next < rows.len() && rows[next].date == date;
            if observed {
                carry = &rows[next];
                next += 1;
            } else {
                gaps += 1;
            }
            records.push(DailyRecord {
                date,
                baseline_users: carry.baseline_users,
                crisis_users: carry.crisis_users,
                z_score: carry.z_score,
                observed,
            });
        }
        Some(RegionDaily { records, gaps })
    }

    pub fn outages(&self) -> &[OutageObservation] {
        &self.outages
    }

    pub fn outage_counties(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self.outages.iter().map(|o| o.county.as_str()).collect();
        out.dedup();
        out
    }

    pub fn outage_series(&self, county: &str) -> Option<OutageSeries> {
        let points: Vec<OutageObservation> = self
            .outages
            .iter()
            .filter(|o| o.county == county)
            .cloned()
            .collect();
        (!points.is_empty()).then(|| OutageSeries {
            county: county.to_string(),
            points,
        })
    }

    pub fn road_events(&self) -> &[RoadEvent] {
        &self.road_events
    }

    pub fn hazard_path(&self) -> &[HazardPathPoint] {
        &self.hazard_path
    }

    pub fn attributes(&self, polygon_id: &str) -> Option<&RegionAttributes> {
        self.attributes.get(polygon_id)
    }

    pub fn all_attributes(&self) -> impl Iterator<Item = &RegionAttributes> {
        self.attributes.values()
    }

    pub fn report(&self) -> &LoadReport {
        &self.report
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn region(id: &str, county: &str) -> RegionId {
        RegionId {
            polygon_id: id.into(),
            name: format!("District {id}"),
            county: county.into(),
        }
    }

    fn attrs(id: &str) -> RegionAttributes {
        RegionAttributes {
            polygon_id: id.into(),
            center_lat: 30.0,
            center_lon: -90.0,
            median_income: 50_000.0,
            pct_black: 30.0,
            pct_hispanic: 4.0,
            pct_pre2000_houses: 70.0,
            property_damage: 0.0,
        }
    }

    fn day(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2021, 8, 25).unwrap() + Duration::days(d as i64)
    }

    fn parts(activity: Vec<ActivityObservation>) -> DatasetParts {
        DatasetParts {
            horizon: Horizon::new(day(0), day(36)).unwrap(),
            timezone: chrono_tz::America::Chicago,
            activity,
            outages: vec![],
            road_events: vec![],
            hazard_path: vec![],
            attributes: vec![attrs("A"), attrs("B")],
        }
    }

    fn obs(id: &str, d: u32, crisis: u64) -> ActivityObservation {
        ActivityObservation {
            region: region(id, "C1"),
            date: day(d),
            baseline_users: 100.0,
            crisis_users: crisis,
            z_score: 0.0,
        }
    }

    #[test]
    fn two_regions_full_horizon() {
        let rows = (0..37)
            .flat_map(|d| [obs("A", d, 100), obs("B", d, 90)])
            .collect();
        let ds = Dataset::from_parts(parts(rows)).unwrap();
        assert_eq!(ds.regions().len(), 2);
        assert_eq!(ds.activity().len(), 74);
        assert!(ds.report().gap_days.is_empty());
    }

    #[test]
    fn duplicate_key_names_both_rows() {
        let rows = vec![obs("A", 0, 10), obs("A", 1, 10), obs("A", 0, 11)];
        match Dataset::from_parts(parts(rows)) {
            Err(DataError::DuplicateKey {
                first_row,
                second_row,
                ..
            }) => assert_eq!((first_row, second_row), (2, 4)),
            other => panic!("expected DuplicateKey, got {other:?}"),
        }
    }

    #[test]
    fn rows_outside_horizon_are_dropped_and_counted() {
        let mut rows: Vec<_> = (0..37).map(|d| obs("A", d, 100)).collect();
        let mut late = obs("A", 0, 100);
        late.date = day(40);
        rows.push(late);
        let ds = Dataset::from_parts(parts(rows)).unwrap();
        assert_eq!(ds.activity().len(), 37);
        assert_eq!(ds.report().activity_rows_outside_horizon, 1);
    }

    #[test]
    fn missing_attributes_is_referential_error() {
        let rows = vec![obs("Z", 0, 1)];
        assert!(matches!(
            Dataset::from_parts(parts(rows)),
            Err(DataError::Referential { .. })
        ));
    }

    #[test]
    fn nothing_inside_horizon_is_empty_horizon() {
        let mut o = obs("A", 0, 1);
        o.date = day(100);
        assert!(matches!(
            Dataset::from_parts(parts(vec![o])),
            Err(DataError::EmptyHorizon(_))
        ));
    }

    #[test]
    fn z_score_out_of_range_rejected() {
        let mut o = obs("A", 0, 1);
        o.z_score = -4.5;
        assert!(matches!(
            Dataset::from_parts(parts(vec![o])),
            Err(DataError::Schema { table: "activity", row: 2, .. })
        ));
    }

    #[test]
    fn outage_out_exceeding_total_rejected() {
        let mut p = parts(vec![obs("A", 0, 1)]);
        p.outages.push(OutageObservation {
            county: "C1".into(),
            timestamp: DateTime::parse_from_rfc3339("2021-08-29T12:00:00-05:00").unwrap(),
            customers_total: 10,
            customers_out: 11,
        });
        let err = Dataset::from_parts(p).unwrap_err();
        assert!(err.to_string().contains("customers_out <= customers_total"), "{err}");
    }

    #[test]
    fn gaps_forward_fill_and_count() {
        // Observed on days 0, 1, 5; everything else filled.
        let rows = vec![obs("A", 1, 50), obs("A", 0, 100), obs("A", 5, 70)];
        let ds = Dataset::from_parts(parts(rows)).unwrap();
        let daily = ds.daily_activity("A").unwrap();
        assert_eq!(daily.records.len(), 37);
        assert_eq!(daily.gaps, 34);
        assert_eq!(daily.records[3].crisis_users, 50);
        assert!(!daily.records[3].observed);
        assert_eq!(daily.records[10].crisis_users, 70);
        assert!(!daily.is_complete());
        assert_eq!(ds.report().incomplete_regions, vec!["A".to_string()]);
    }

    #[test]
    fn leading_gap_back_fills_from_first_observation() {
        let rows: Vec<_> = (2..37).map(|d| obs("A", d, 80 + d as u64)).collect();
        let ds = Dataset::from_parts(parts(rows)).unwrap();
        let daily = ds.daily_activity("A").unwrap();
        assert_eq!(daily.gaps, 2);
        assert_eq!(daily.records[0].crisis_users, 82);
        assert!(daily.is_complete());
    }

    #[test]
    fn gap_limit_is_twenty_percent() {
        // 37 days: 7 gaps (18.9%) pass, 8 gaps (21.6%) fail.
        let seven: Vec<_> = (0..30).map(|d| obs("A", d, 100)).collect();
        let ds = Dataset::from_parts(parts(seven)).unwrap();
        assert!(ds.daily_activity("A").unwrap().is_complete());
        let eight: Vec<_> = (0..29).map(|d| obs("A", d, 100)).collect();
        let ds = Dataset::from_parts(parts(eight)).unwrap();
        assert!(!ds.daily_activity("A").unwrap().is_complete());
    }

    #[test]
    fn category_parsing() {
        assert_eq!(
            RoadEventCategory::parse_lenient("Weather Hazard"),
            RoadEventCategory::WeatherHazard
        );
        assert_eq!(
            RoadEventCategory::parse_lenient("weather closures"),
            RoadEventCategory::WeatherClosure
        );
        assert_eq!(
            RoadEventCategory::parse_lenient("road_closed"),
            RoadEventCategory::RoadClosed
        );
        assert_eq!(RoadEventCategory::parse_lenient("Closures"), RoadEventCategory::Closure);
        assert_eq!(RoadEventCategory::parse_lenient("crash"), RoadEventCategory::Other);
    }

    #[test]
    fn horizon_window_uses_local_midnight() {
        let h = Horizon::new(day(0), day(36)).unwrap();
        let (a, b) = h.instant_window(chrono_tz::America::Chicago);
        assert_eq!(a.to_rfc3339(), "2021-08-25T00:00:00-05:00");
        assert_eq!(b.to_rfc3339(), "2021-10-01T00:00:00-05:00");
        assert_eq!(h.days(), 37);
    }
}
