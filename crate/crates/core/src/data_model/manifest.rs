use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use chrono_tz::Tz;
use serde::{Deserialize, Serialize};

use super::{
    parse_activity, parse_attributes, parse_hazard_path, parse_outages, parse_road_events,
    DataError, Dataset, DatasetParts, Horizon,
};

fn default_timezone() -> String {
    "UTC".to_string()
}

/// Input-file manifest. Relative paths resolve against the manifest's directory.
///
/// The optional analysis knobs sit between built-in defaults and command-line
/// flags in precedence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub activity: PathBuf,
    pub outages: PathBuf,
    pub road_events: PathBuf,
    pub hazard_path: PathBuf,
    pub attributes: PathBuf,
    pub horizon: Horizon,
    #[serde(default = "default_timezone")]
    pub timezone: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landfall: Option<NaiveDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_floor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_floor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_days: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub road_match_km: Option<f64>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Manifest {
    /// Manifest with conventional file names in `dir`.
    pub fn conventional(dir: &Path, horizon: Horizon, timezone: &str) -> Self {
        Manifest {
            activity: "activity.csv".into(),
            outages: "outages.csv".into(),
            road_events: "road_events.csv".into(),
            hazard_path: "hazard_path.csv".into(),
            attributes: "attributes.csv".into(),
            horizon,
            timezone: timezone.to_string(),
            landfall: None,
            rate_floor: None,
            z_floor: None,
            z_days: None,
            road_match_km: None,
            base_dir: dir.to_path_buf(),
        }
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn tz(&self) -> Result<Tz, DataError> {
        Tz::from_str(&self.timezone)
            .map_err(|_| DataError::Manifest(format!("unknown timezone {:?}", self.timezone)))
    }

    fn roles(&self) -> [(&'static str, &PathBuf); 5] {
        [
            ("activity", &self.activity),
            ("outages", &self.outages),
            ("road_events", &self.road_events),
            ("hazard_path", &self.hazard_path),
            ("attributes", &self.attributes),
        ]
    }
}

pub fn load_manifest(path: &Path) -> Result<Manifest, DataError> {
    let file = File::open(path).map_err(|_| DataError::MissingFile {
        role: "manifest",
        path: path.display().to_string(),
    })?;
    let mut manifest: Manifest = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| DataError::Manifest(format!("{}: {e}", path.display())))?;
    manifest.base_dir = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    Ok(manifest)
}

/// Reads and validates the five tables named by `manifest`.
pub fn load_inputs(manifest: &Manifest) -> Result<Dataset, DataError> {
    let horizon = Horizon::new(manifest.horizon.start, manifest.horizon.end)?;
    let timezone = manifest.tz()?;
    let mut readers = Vec::with_capacity(5);
    for (role, path) in manifest.roles() {
        let full = manifest.resolve(path);
        let f = File::open(&full).map_err(|_| DataError::MissingFile {
            role,
            path: full.display().to_string(),
        })?;
        readers.push(BufReader::new(f));
    }
    let mut it = readers.into_iter();
    let mut next = || it.next().expect("five readers");
    let activity = parse_activity(next())?;
    let outages = parse_outages(next())?;
    let road_events = parse_road_events(next())?;
    let hazard_path = parse_hazard_path(next())?;
    let attributes = parse_attributes(next())?;
    Dataset::from_parts(DatasetParts {
        horizon,
        timezone,
        activity,
        outages,
        road_events,
        hazard_path,
        attributes,
    })
}
