use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate};
use clap::Args;
use serde::Serialize;
use trlkit_core::data_model::{load_manifest, Manifest};
use trlkit_core::resilience::SelectionThresholds;

use crate::error::CliError;

pub const DEFAULT_ROAD_MATCH_KM: f64 = 25.0;

/// Flags shared by the analysis subcommands.
#[derive(Debug, Clone, Default, Args)]
pub struct AnalysisArgs {
    /// Input manifest (JSON).
    #[arg(long, value_name = "PATH")]
    pub manifest: PathBuf,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Landfall date; the drop window runs from it for 7 days.
    #[arg(long, value_name = "YYYY-MM-DD")]
    pub landfall: Option<NaiveDate>,
    #[arg(long, value_name = "F")]
    pub rate_floor: Option<f64>,
    #[arg(long, value_name = "F", allow_hyphen_values = true)]
    pub z_floor: Option<f64>,
    #[arg(long, value_name = "N")]
    pub z_days: Option<usize>,
    /// GeoJSON FeatureCollection of region polygons keyed by `polygon_id`.
    #[arg(long, value_name = "PATH")]
    pub boundaries: Option<PathBuf>,
}

/// Effective configuration after applying flags over manifest values over
/// built-in defaults. Echoed to `run.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub manifest_path: PathBuf,
    pub output_dir: PathBuf,
    pub landfall: NaiveDate,
    pub thresholds: SelectionThresholds,
    pub road_match_km: f64,
    pub emit_geojson: bool,
    pub boundaries_path: Option<PathBuf>,
    #[serde(skip)]
    pub manifest: Manifest,
}

impl RunConfig {
    pub fn resolve(args: &AnalysisArgs) -> Result<Self, CliError> {
        let manifest = load_manifest(&args.manifest)?;
        Self::with_manifest(args, manifest)
    }

    pub fn with_manifest(args: &AnalysisArgs, manifest: Manifest) -> Result<Self, CliError> {
        let landfall = args.landfall.or(manifest.landfall).ok_or_else(|| {
            CliError::Usage("no landfall date: pass --landfall or set it in the manifest".into())
        })?;
        let defaults = SelectionThresholds::for_landfall(landfall);
        let thresholds = SelectionThresholds {
            rate_floor: args.rate_floor.or(manifest.rate_floor).unwrap_or(defaults.rate_floor),
            drop_window: (
                landfall,
                landfall + Duration::days(SelectionThresholds::DEFAULT_WINDOW_DAYS),
            ),
            z_floor: args.z_floor.or(manifest.z_floor).unwrap_or(defaults.z_floor),
            z_days_min: args.z_days.or(manifest.z_days).unwrap_or(defaults.z_days_min),
        };
        thresholds
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        let road_match_km = manifest.road_match_km.unwrap_or(DEFAULT_ROAD_MATCH_KM);
        if !(road_match_km > 0.0) {
            return Err(CliError::Usage(format!("road_match_km {road_match_km} must be positive")));
        }
        Ok(RunConfig {
            manifest_path: args.manifest.clone(),
            output_dir: args.out.clone(),
            landfall,
            thresholds,
            road_match_km,
            emit_geojson: args.boundaries.is_some(),
            boundaries_path: args.boundaries.clone(),
            manifest,
        })
    }

    pub fn output(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }

    pub fn out_dir(&self) -> &Path {
        &self.output_dir
    }
}
