//! Power-restoration time and road-disruption hours.

use std::collections::BTreeMap;

use chrono::{DateTime, FixedOffset};
use serde::Serialize;

use crate::data_model::{OutageSeries, RoadEvent};

use super::geo::RegionLookup;
use super::CovariateError;

pub const DEFAULT_RESTORATION_THRESHOLD: f64 = 0.10;

/// Days between the outage fraction first reaching `threshold` and the last
/// sample where it is still above `threshold`. Zero when the threshold is
/// never reached.
pub fn restoration_days(series: &OutageSeries, threshold: f64) -> Result<f64, CovariateError> {
    if series.points.is_empty() {
        return Err(CovariateError::EmptySeries(series.county.clone()));
    }
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(CovariateError::InvalidThreshold(threshold));
    }
    let Some(first) = series.points.iter().find(|p| p.fraction_out() >= threshold) else {
        return Ok(0.0);
    };
    let Some(last) = series.points.iter().rev().find(|p| p.fraction_out() > threshold) else {
        return Ok(0.0);
    };
    let seconds = (last.timestamp - first.timestamp).num_seconds();
    Ok((seconds.max(0) as f64) / 86_400.0)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RoadHoursReport {
    pub hours: BTreeMap<String, f64>,
    pub unmapped_events: usize,
    pub excluded_category_events: usize,
}

impl RoadHoursReport {
    pub fn hours_for(&self, polygon_id: &str) -> f64 {
        self.hours.get(polygon_id).copied().unwrap_or(0.0)
    }
}

fn clipped_hours(
    event: &RoadEvent,
    window: (DateTime<FixedOffset>, DateTime<FixedOffset>),
) -> f64 {
    let (w0, w1) = window;
    let start = event.start.max(w0);
    let end = event.end.unwrap_or(w1).min(w1);
    let seconds = (end - start).num_seconds();
    seconds.max(0) as f64 / 3600.0
}

/// Disruption hours per region for every event inside `window`.
///
/// Events of category `Other` are excluded; events the lookup cannot place
/// are skipped and counted. Open-ended events run to the end of the window.
pub fn road_hours_by_region(
    events: &[RoadEvent],
    window: (DateTime<FixedOffset>, DateTime<FixedOffset>),
    lookup: &dyn RegionLookup,
) -> RoadHoursReport {
    let mut report = RoadHoursReport::default();
    for e in events {
        if !e.category.is_disruption() {
            report.excluded_category_events += 1;
            continue;
        }
        let Some(id) = lookup.region_at(e.lat, e.lon) else {
            report.unmapped_events += 1;
            continue;
        };
        *report.hours.entry(id.to_string()).or_insert(0.0) += clipped_hours(e, window);
    }
    report
}

pub fn road_hours(
    events: &[RoadEvent],
    polygon_id: &str,
    window: (DateTime<FixedOffset>, DateTime<FixedOffset>),
    lookup: &dyn RegionLookup,
) -> f64 {
    events
        .iter()
        .filter(|e| e.category.is_disruption())
        .filter(|e| lookup.region_at(e.lat, e.lon) == Some(polygon_id))
        .map(|e| clipped_hours(e, window))
        .sum()
}
