//! Activity-rate curves and transient resilience loss.
//!
//! The quality function of a region is its daily activity rate
//! `Q_d = crisis_users / baseline_users`. Transient resilience loss is the
//! area of the shortfall below baseline over the horizon, integrated with a
//! one-day rectangle rule:
//!
//! ```text
//! TRL = sum_d max(0, 1 - Q_d) * 1 day
//! ```
//!
//! Days above baseline contribute nothing. The maximum possible resilience
//! (MPR) is the horizon length `T`, so `resilience = T - TRL` and
//! `pct_loss = 100 * TRL / T`.

use chrono::{Duration, NaiveDate};
use serde::Serialize;
use thiserror::Error;

use crate::data_model::{Dataset, RegionId};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ResilienceError {
    #[error("baseline users must be positive, got {0}")]
    ZeroBaseline(f64),
    #[error("unknown region {0}")]
    UnknownRegion(String),
    #[error("region {polygon_id} is missing {gaps} of {days} horizon days")]
    IncompleteSeries {
        polygon_id: String,
        gaps: usize,
        days: usize,
    },
    #[error("drop window {start}..={end} is not inside the horizon")]
    WindowOutOfRange { start: NaiveDate, end: NaiveDate },
    #[error("invalid series: {0}")]
    InvalidSeries(String),
    #[error("invalid thresholds: {0}")]
    InvalidThresholds(String),
}

pub fn activity_rate(crisis_users: u64, baseline_users: f64) -> Result<f64, ResilienceError> {
    if !(baseline_users > 0.0) {
        return Err(ResilienceError::ZeroBaseline(baseline_users));
    }
    Ok(crisis_users as f64 / baseline_users)
}

/// Daily activity rates of one region over the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSeries {
    region: RegionId,
    start: NaiveDate,
    rates: Vec<f64>,
}

impl RegionSeries {
    pub fn new(region: RegionId, start: NaiveDate, rates: Vec<f64>) -> Result<Self, ResilienceError> {
        if rates.is_empty() {
            return Err(ResilienceError::InvalidSeries("no days".into()));
        }
        if let Some((i, r)) = rates
            .iter()
            .enumerate()
            .find(|(_, r)| !r.is_finite() || **r < 0.0)
        {
            return Err(ResilienceError::InvalidSeries(format!(
                "rate on day {i} is {r}; rates must be finite and >= 0"
            )));
        }
        Ok(RegionSeries { region, start, rates })
    }

    pub fn region(&self) -> &RegionId {
        &self.region
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    pub fn horizon_days(&self) -> usize {
        self.rates.len()
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn iter(&self) -> impl Iterator<Item = (NaiveDate, f64)> + '_ {
        self.rates
            .iter()
            .enumerate()
            .map(move |(i, &r)| (self.start + Duration::days(i as i64), r))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResilienceResult {
    pub region: RegionId,
    pub trl: f64,
    pub mpr: f64,
    pub resilience: f64,
    pub pct_loss: f64,
}

impl ResilienceResult {
    pub fn from_trl(region: RegionId, trl: f64, mpr: f64) -> Self {
        ResilienceResult {
            region,
            trl,
            mpr,
            resilience: mpr - trl,
            pct_loss: 100.0 * trl / mpr,
        }
    }
}

pub fn build_series(dataset: &Dataset, polygon_id: &str) -> Result<RegionSeries, ResilienceError> {
    let region = dataset
        .region(polygon_id)
        .ok_or_else(|| ResilienceError::UnknownRegion(polygon_id.to_string()))?;
    let daily = dataset
        .daily_activity(polygon_id)
        .ok_or_else(|| ResilienceError::UnknownRegion(polygon_id.to_string()))?;
    if !daily.is_complete() {
        return Err(ResilienceError::IncompleteSeries {
            polygon_id: polygon_id.to_string(),
            gaps: daily.gaps,
            days: daily.records.len(),
        });
    }
    let rates = daily
        .records
        .iter()
        .map(|d| activity_rate(d.crisis_users, d.baseline_users))
        .collect::<Result<Vec<_>, _>>()?;
    RegionSeries::new(region.clone(), dataset.horizon().start, rates)
}

/// Left-rectangle integral of the clamped shortfall, one-day steps.
pub fn shortfall_area(rates: &[f64]) -> f64 {
    rates.iter().map(|&q| (1.0 - q).max(0.0)).sum()
}

pub fn transient_loss(series: &RegionSeries) -> ResilienceResult {
    let trl = shortfall_area(series.rates());
    ResilienceResult::from_trl(series.region().clone(), trl, series.horizon_days() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SelectionThresholds {
    /// A region qualifies when its minimum rate in the window falls below this.
    pub rate_floor: f64,
    /// Inclusive date range searched for the drop.
    pub drop_window: (NaiveDate, NaiveDate),
    pub z_floor: f64,
    /// Minimum number of horizon days with `z < z_floor`.
    pub z_days_min: usize,
}

impl SelectionThresholds {
    pub const DEFAULT_RATE_FLOOR: f64 = 0.90;
    pub const DEFAULT_Z_FLOOR: f64 = -1.82;
    pub const DEFAULT_Z_DAYS_MIN: usize = 2;
    pub const DEFAULT_WINDOW_DAYS: i64 = 7;

    /// Defaults anchored on the landfall day: window `landfall ..= landfall + 7`.
    pub fn for_landfall(landfall: NaiveDate) -> Self {
        SelectionThresholds {
            rate_floor: Self::DEFAULT_RATE_FLOOR,
            drop_window: (landfall, landfall + Duration::days(Self::DEFAULT_WINDOW_DAYS)),
            z_floor: Self::DEFAULT_Z_FLOOR,
            z_days_min: Self::DEFAULT_Z_DAYS_MIN,
        }
    }

    pub fn validate(&self) -> Result<(), ResilienceError> {
        if !(self.rate_floor > 0.0 && self.rate_floor <= 1.0) {
            return Err(ResilienceError::InvalidThresholds(format!(
                "rate_floor {} not in (0, 1]",
                self.rate_floor
            )));
        }
        if !(self.z_floor >= -4.0 && self.z_floor < 0.0) {
            return Err(ResilienceError::InvalidThresholds(format!(
                "z_floor {} not in [-4, 0)",
                self.z_floor
            )));
        }
        if self.drop_window.1 < self.drop_window.0 {
            return Err(ResilienceError::InvalidThresholds(
                "drop window ends before it starts".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionCriterion {
    /// Minimum rate in the drop window not below `rate_floor`.
    RateFloor,
    /// Too few days with `z < z_floor`.
    ZScore,
    /// Series could not be built (gap limit or zero baseline).
    Series,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionDecision {
    pub region: RegionId,
    pub min_rate_in_window: Option<f64>,
    pub z_days_below_floor: usize,
    pub failed: Vec<SelectionCriterion>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl SelectionDecision {
    pub fn included(&self) -> bool {
        self.failed.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Selection {
    pub decisions: Vec<SelectionDecision>,
}

impl Selection {
    pub fn included(&self) -> impl Iterator<Item = &RegionId> {
        self.decisions
            .iter()
            .filter(|d| d.included())
            .map(|d| &d.region)
    }

    pub fn excluded(&self) -> impl Iterator<Item = &SelectionDecision> {
        self.decisions.iter().filter(|d| !d.included())
    }
}

/// Applies the rate-floor and z-score rules to every region of `dataset`.
///
/// Rates come from the gap-filled series; z-score days are counted over
/// observed rows only, so a filled day never counts twice.
pub fn select_affected(
    dataset: &Dataset,
    thresholds: &SelectionThresholds,
) -> Result<Selection, ResilienceError> {
    thresholds.validate()?;
    let horizon = dataset.horizon();
    let (w0, w1) = thresholds.drop_window;
    let (Some(i0), Some(i1)) = (horizon.index_of(w0), horizon.index_of(w1)) else {
        return Err(ResilienceError::WindowOutOfRange { start: w0, end: w1 });
    };

    let mut decisions = Vec::with_capacity(dataset.regions().len());
    for region in dataset.regions() {
        let z_days = dataset
            .activity_for(&region.polygon_id)
            .iter()
            .filter(|o| o.z_score < thresholds.z_floor)
            .count();
        let mut failed = Vec::new();
        let mut note = None;
        let min_rate = match build_series(dataset, &region.polygon_id) {
            Ok(series) => {
                let m = series.rates()[i0..=i1]
                    .iter()
                    .copied()
                    .fold(f64::INFINITY, f64::min);
                if !(m < thresholds.rate_floor) {
                    failed.push(SelectionCriterion::RateFloor);
                }
                Some(m)
            }
            Err(e) => {
                failed.push(SelectionCriterion::Series);
                note = Some(e.to_string());
                None
            }
        };
        if z_days < thresholds.z_days_min {
            failed.push(SelectionCriterion::ZScore);
        }
        decisions.push(SelectionDecision {
            region: region.clone(),
            min_rate_in_window: min_rate,
            z_days_below_floor: z_days,
            failed,
            note,
        });
    }
    Ok(Selection { decisions })
}

/// Selection followed by [`transient_loss`] on every included region.
pub fn quantify(
    dataset: &Dataset,
    thresholds: &SelectionThresholds,
) -> Result<(Selection, Vec<ResilienceResult>), ResilienceError> {
    let selection = select_affected(dataset, thresholds)?;
    let results = selection
        .included()
        .map(|r| build_series(dataset, &r.polygon_id).map(|s| transient_loss(&s)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((selection, results))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::{
        ActivityObservation, DatasetParts, Horizon, RegionAttributes,
    };
    use proptest::prelude::*;

    fn rid(id: &str) -> RegionId {
        RegionId {
            polygon_id: id.into(),
            name: id.into(),
            county: "C".into(),
        }
    }

    fn d0() -> NaiveDate {
        NaiveDate::from_ymd_opt(2021, 8, 25).unwrap()
    }

    fn series(rates: Vec<f64>) -> RegionSeries {
        RegionSeries::new(rid("A"), d0(), rates).unwrap()
    }

    #[test]
    fn rate_examples() {
        assert_eq!(activity_rate(80, 100.0).unwrap(), 0.8);
        assert_eq!(activity_rate(100, 100.0).unwrap(), 1.0);
        assert_eq!(activity_rate(37, 0.0), Err(ResilienceError::ZeroBaseline(0.0)));
    }

    #[test]
    fn no_disruption() {
        let r = transient_loss(&series(vec![1.0; 37]));
        assert_eq!((r.trl, r.resilience, r.pct_loss, r.mpr), (0.0, 37.0, 0.0, 37.0));
    }

    #[test]
    fn rectangle_area() {
        let mut q = vec![0.5; 10];
        q.extend(std::iter::repeat(1.0).take(27));
        let r = transient_loss(&series(q));
        assert_eq!(r.trl, 5.0);
        assert_eq!(r.resilience, 32.0);
    }

    #[test]
    fn table_two_first_row() {
        let r = ResilienceResult::from_trl(rid("P8"), 12.88, 37.0);
        assert!((r.resilience - 24.12).abs() < 1e-9);
        assert!((r.pct_loss - 34.81).abs() < 0.005);
    }

    #[test]
    fn increases_above_baseline_ignored() {
        let r = transient_loss(&series(vec![1.4, 0.5, 2.0]));
        assert_eq!(r.trl, 0.5);
    }

    #[test]
    fn all_zero_is_full_loss() {
        let r = transient_loss(&series(vec![0.0; 37]));
        assert_eq!(r.trl, 37.0);
        assert_eq!(r.pct_loss, 100.0);
    }

    #[test]
    fn negative_rate_rejected() {
        assert!(RegionSeries::new(rid("A"), d0(), vec![1.0, -0.1]).is_err());
        assert!(RegionSeries::new(rid("A"), d0(), vec![]).is_err());
    }

    /// Builds a dataset where region `id` has crisis counts `crisis[d]` on a
    /// baseline of 100 and z-scores `z[d]`.
    fn dataset(regions: &[(&str, Vec<u64>, Vec<f64>)]) -> Dataset {
        let mut activity = Vec::new();
        let mut attributes = Vec::new();
        for (id, crisis, z) in regions {
            for (d, (&c, &zz)) in crisis.iter().zip(z).enumerate() {
                activity.push(ActivityObservation {
                    region: rid(id),
                    date: d0() + Duration::days(d as i64),
                    baseline_users: 100.0,
                    crisis_users: c,
                    z_score: zz,
                });
            }
            attributes.push(RegionAttributes {
                polygon_id: id.to_string(),
                center_lat: 30.0,
                center_lon: -90.0,
                median_income: 1.0,
                pct_black: 0.0,
                pct_hispanic: 0.0,
                pct_pre2000_houses: 0.0,
                property_damage: 0.0,
            });
        }
        Dataset::from_parts(DatasetParts {
            horizon: Horizon::new(d0(), d0() + Duration::days(36)).unwrap(),
            timezone: chrono_tz::UTC,
            activity,
            outages: vec![],
            road_events: vec![],
            hazard_path: vec![],
            attributes,
        })
        .unwrap()
    }

    fn thresholds() -> SelectionThresholds {
        SelectionThresholds::for_landfall(d0() + Duration::days(4))
    }

    #[test]
    fn build_series_examples() {
        let mut crisis = vec![100; 37];
        crisis[6] = 50;
        let ds = dataset(&[("A", crisis, vec![0.0; 37])]);
        let s = build_series(&ds, "A").unwrap();
        assert_eq!(s.horizon_days(), 37);
        assert_eq!(s.rates()[6], 0.5);
        assert!(s.rates().iter().enumerate().all(|(i, &r)| i == 6 || r == 1.0));
        assert_eq!(build_series(&ds, "nope"), Err(ResilienceError::UnknownRegion("nope".into())));
        let dates: Vec<_> = s.iter().map(|(d, _)| d).collect();
        assert!(dates.windows(2).all(|w| w[1] - w[0] == Duration::days(1)));
    }

    #[test]
    fn selection_rules() {
        let mut shallow = vec![100; 37];
        shallow[5] = 95;
        let mut deep = vec![100; 37];
        deep[5] = 70;
        let mut z_hit = vec![0.0; 37];
        z_hit[4] = -3.0;
        z_hit[5] = -3.0;
        z_hit[6] = -3.0;
        let ds = dataset(&[
            ("shallow", shallow, z_hit.clone()),
            ("deep", deep.clone(), z_hit),
            ("calm_z", deep, vec![-1.0; 37]),
        ]);
        let sel = select_affected(&ds, &thresholds()).unwrap();
        let inc: Vec<_> = sel.included().map(|r| r.polygon_id.as_str()).collect();
        assert_eq!(inc, vec!["deep"]);
        let by_id = |id: &str| sel.decisions.iter().find(|d| d.region.polygon_id == id).unwrap();
        assert_eq!(by_id("shallow").failed, vec![SelectionCriterion::RateFloor]);
        assert_eq!(by_id("shallow").min_rate_in_window, Some(0.95));
        assert_eq!(by_id("calm_z").failed, vec![SelectionCriterion::ZScore]);
    }

    #[test]
    fn drop_outside_window_is_not_counted() {
        let mut late = vec![100; 37];
        late[20] = 10;
        let ds = dataset(&[("late", late, vec![-3.0; 37])]);
        let sel = select_affected(&ds, &thresholds()).unwrap();
        assert_eq!(sel.included().count(), 0);
    }

    #[test]
    fn single_z_day_is_not_enough() {
        let mut crisis = vec![100; 37];
        crisis[4] = 50;
        let mut z = vec![0.0; 37];
        z[4] = -3.0;
        let ds = dataset(&[("A", crisis, z)]);
        let sel = select_affected(&ds, &thresholds()).unwrap();
        assert_eq!(sel.decisions[0].failed, vec![SelectionCriterion::ZScore]);
    }

    #[test]
    fn window_outside_horizon() {
        let ds = dataset(&[("A", vec![100; 37], vec![0.0; 37])]);
        let t = SelectionThresholds::for_landfall(d0() + Duration::days(33));
        assert!(matches!(
            select_affected(&ds, &t),
            Err(ResilienceError::WindowOutOfRange { .. })
        ));
    }

    proptest! {
        #[test]
        fn bounds_hold(rates in prop::collection::vec(0.0f64..3.0, 1..60)) {
            let r = transient_loss(&series(rates));
            prop_assert!(r.trl >= 0.0 && r.trl <= r.mpr);
            prop_assert!((0.0..=100.0).contains(&r.pct_loss));
            prop_assert_eq!(r.resilience, r.mpr - r.trl);
        }

        #[test]
        fn lowering_a_day_never_decreases_loss(
            rates in prop::collection::vec(0.0f64..2.0, 1..60),
            idx in any::<prop::sample::Index>(),
            frac in 0.0f64..1.0,
        ) {
            let before = transient_loss(&series(rates.clone())).trl;
            let mut lowered = rates;
            let i = idx.index(lowered.len());
            lowered[i] = lowered[i].min(1.0) * frac;
            prop_assert!(transient_loss(&series(lowered)).trl >= before);
        }

        #[test]
        fn days_at_or_above_baseline_add_nothing(
            rates in prop::collection::vec(0.0f64..2.0, 1..40),
            extra in prop::collection::vec(1.0f64..3.0, 0..10),
        ) {
            let base = transient_loss(&series(rates.clone()));
            let mut longer = rates;
            longer.extend(&extra);
            let grown = transient_loss(&series(longer));
            prop_assert_eq!(grown.trl, base.trl);
            prop_assert_eq!(grown.mpr, base.mpr + extra.len() as f64);
        }
    }
}
