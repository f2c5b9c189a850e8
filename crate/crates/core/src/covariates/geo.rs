use crate::data_model::{HazardPathPoint, RegionAttributes};

use super::CovariateError;

/// Mean Earth radius.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

fn check(lat: f64, lon: f64) -> Result<(), CovariateError> {
    if (-90.0..=90.0).contains(&lat) && (-180.0..=180.0).contains(&lon) {
        Ok(())
    } else {
        Err(CovariateError::InvalidCoordinate { lat, lon })
    }
}

/// Great-circle distance between two points given in degrees.
pub fn haversine_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> Result<f64, CovariateError> {
    check(lat1, lon1)?;
    check(lat2, lon2)?;
    let (phi1, phi2) = (lat1.to_radians(), lat2.to_radians());
    let dphi = (lat2 - lat1).to_radians();
    let dlambda = (lon2 - lon1).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    Ok(2.0 * EARTH_RADIUS_KM * h.clamp(0.0, 1.0).sqrt().asin())
}

/// Minimum distance from the region center to any point of the track.
/// The track is treated as a point set; segments are not interpolated.
pub fn distance_to_path(
    region: &RegionAttributes,
    path: &[HazardPathPoint],
) -> Result<f64, CovariateError> {
    if path.is_empty() {
        return Err(CovariateError::EmptyPath);
    }
    path.iter().try_fold(f64::INFINITY, |best, p| {
        Ok(best.min(haversine_km(region.center_lat, region.center_lon, p.lat, p.lon)?))
    })
}

/// Maps a coordinate to the polygon_id of the region containing it.
pub trait RegionLookup {
    fn region_at(&self, lat: f64, lon: f64) -> Option<&str>;
}

/// Assigns a point to the region with the nearest center, provided it lies
/// within `max_km` of that center.
#[derive(Debug, Clone)]
pub struct NearestCenterLookup {
    centers: Vec<(String, f64, f64)>,
    max_km: f64,
}

impl NearestCenterLookup {
    pub fn new<'a>(regions: impl IntoIterator<Item = &'a RegionAttributes>, max_km: f64) -> Self {
        let mut centers: Vec<_> = regions
            .into_iter()
            .map(|a| (a.polygon_id.clone(), a.center_lat, a.center_lon))
            .collect();
        centers.sort_by(|a, b| a.0.cmp(&b.0));
        NearestCenterLookup { centers, max_km }
    }
}

impl RegionLookup for NearestCenterLookup {
    fn region_at(&self, lat: f64, lon: f64) -> Option<&str> {
        let mut best: Option<(&str, f64)> = None;
        for (id, clat, clon) in &self.centers {
            let Ok(d) = haversine_km(lat, lon, *clat, *clon) else {
                return None;
            };
            if d <= self.max_km && best.map_or(true, |(_, bd)| d < bd) {
                best = Some((id, d));
            }
        }
        best.map(|(id, _)| id)
    }
}
