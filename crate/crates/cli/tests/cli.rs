use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chrono::{Duration, NaiveDate};
use serde_json::{json, Value};
use tempfile::TempDir;
use trlkit::commands::histogram;

const DAYS: usize = 37;

fn start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2021, 8, 25).unwrap()
}

fn trlkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trlkit"))
        .args(args)
        .output()
        .expect("spawn trlkit")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Region {
    id: &'static str,
    county: &'static str,
    /// Daily activity rate, one per horizon day.
    rates: Vec<f64>,
}

/// Flat at 1 except `days` days of `rate` starting on landfall.
fn dipped(id: &'static str, county: &'static str, rate: f64, days: usize) -> Region {
    let mut rates = vec![1.0; DAYS];
    for r in &mut rates[4..4 + days] {
        *r = rate;
    }
    Region { id, county, rates }
}

/// Writes a small hand-made input set and returns the manifest path.
fn write_inputs(dir: &Path, regions: &[Region], landfall: bool) -> PathBuf {
    let mut activity = String::from("polygon_id,name,county,date,baseline_users,crisis_users,z_score\n");
    let mut attributes = String::from(
        "polygon_id,center_lat,center_lon,median_income,pct_black,pct_hispanic,pct_pre2000_houses,property_damage\n",
    );
    let mut outages = String::from("county,timestamp,customers_total,customers_out\n");
    for (k, r) in regions.iter().enumerate() {
        for (d, rate) in r.rates.iter().enumerate() {
            let date = start() + Duration::days(d as i64);
            let z = if *rate < 0.9 { -3.0 } else { 0.0 };
            writeln!(activity, "{},District {k},{},{date},1000,{},{z}", r.id, r.county, (rate * 1000.0).round()).unwrap();
        }
        writeln!(attributes, "{},{},-90.5,{},{},5,60,{}", r.id, 29.0 + k as f64 * 0.1, 40_000 + 1000 * k, 10 + k, 100 * k).unwrap();
    }
    let mut counties: Vec<&str> = regions.iter().map(|r| r.county).collect();
    counties.dedup();
    for c in counties {
        writeln!(outages, "{c},2021-08-29T00:00:00-05:00,1000,500").unwrap();
        writeln!(outages, "{c},2021-08-30T00:00:00-05:00,1000,0").unwrap();
    }
    fs::write(dir.join("activity.csv"), activity).unwrap();
    fs::write(dir.join("attributes.csv"), attributes).unwrap();
    fs::write(dir.join("outages.csv"), outages).unwrap();
    fs::write(dir.join("road_events.csv"), "event_id,lat,lon,start,end,category\n").unwrap();
    fs::write(
        dir.join("hazard_path.csv"),
        "timestamp,lat,lon\n2021-08-29T12:00:00-05:00,29.1,-90.1\n",
    )
    .unwrap();
    let mut manifest = json!({
        "activity": "activity.csv",
        "outages": "outages.csv",
        "road_events": "road_events.csv",
        "hazard_path": "hazard_path.csv",
        "attributes": "attributes.csv",
        "horizon": { "start": "2021-08-25", "end": "2021-09-30" },
        "timezone": "America/Chicago",
    });
    if landfall {
        manifest["landfall"] = json!("2021-08-29");
    }
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest).unwrap()).unwrap();
    path
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

#[test]
fn simulate_then_each_stage() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    let out = tmp.path().join("out");
    let sim = trlkit(&["simulate", "--out", s(&data), "--seed", "3", "--groups", "12", "--per-group", "4"]);
    assert_eq!(code(&sim), 0, "{}", String::from_utf8_lossy(&sim.stderr));
    let manifest = data.join("manifest.json");
    assert!(manifest.exists());
    assert_eq!(read_json(&data.join("run.json"))["simulate"]["rng"], "ChaCha8");

    for stage in ["quantify", "fit", "report"] {
        let o = trlkit(&[stage, "--manifest", s(&manifest), "--out", s(&out)]);
        assert_eq!(code(&o), 0, "{stage}: {}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(read_json(&out.join("run.json"))["command"], stage);
    }
    for f in ["regions.csv", "selection.json", "covariates.csv", "model.json", "histogram.csv", "curves.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert!(!out.join("choropleth.geojson").exists());

    let model = read_json(&out.join("model.json"));
    let coefs = model["coefficients"].as_array().unwrap();
    assert_eq!(coefs.len(), 9);
    assert_eq!(coefs[0]["name"], "(Intercept)");
    assert_eq!(model["k_params"], 11);
    let (_, regions) = csv_rows(&out.join("regions.csv"));
    assert_eq!(model["n_obs"].as_u64().unwrap() as usize, regions.len());

    // regions.csv is sorted by descending trl.
    let trl: Vec<f64> = regions.iter().map(|r| r[3].parse().unwrap()).collect();
    assert!(trl.windows(2).all(|w| w[0] >= w[1]));

    // Histogram counts add up to the region count.
    let (_, hist) = csv_rows(&out.join("histogram.csv"));
    let total: usize = hist.iter().map(|r| r[2].parse::<usize>().unwrap()).sum();
    assert_eq!(total, regions.len());

    // One curve row per selected region and horizon day.
    let (_, curves) = csv_rows(&out.join("curves.csv"));
    assert_eq!(curves.len(), regions.len() * DAYS);
}

#[test]
fn run_all_flags_override_manifest() {
    let tmp = TempDir::new().unwrap();
    let manifest = write_inputs(tmp.path(), &[dipped("r1", "A", 0.08, 14), dipped("r2", "A", 0.85, 3)], true);
    let out = tmp.path().join("out");
    let o = trlkit(&["quantify", "--manifest", s(&manifest), "--out", s(&out), "--rate-floor", "0.5"]);
    assert_eq!(code(&o), 0);
    let run = read_json(&out.join("run.json"));
    assert_eq!(run["config"]["thresholds"]["rate_floor"], 0.5);
    let (_, rows) = csv_rows(&out.join("regions.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], "r1");

    let o = trlkit(&["quantify", "--manifest", s(&manifest), "--out", s(&out), "--z-floor", "-3.5"]);
    assert_eq!(code(&o), 0);
    let (_, rows) = csv_rows(&out.join("regions.csv"));
    assert!(rows.is_empty());
}

#[test]
fn regions_csv_columns() {
    let tmp = TempDir::new().unwrap();
    let manifest = write_inputs(tmp.path(), &[dipped("r1", "A", 0.08, 14)], true);
    let out = tmp.path().join("out");
    assert_eq!(code(&trlkit(&["quantify", "--manifest", s(&manifest), "--out", s(&out)])), 0);
    let (header, rows) = csv_rows(&out.join("regions.csv"));
    assert_eq!(
        header,
        ["polygon_id", "name", "county", "trl", "resilience", "pct_loss", "trl_2dp", "resilience_2dp", "pct_loss_2dp"]
    );
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][6], "12.88");
    assert_eq!(rows[0][7], "24.12");
    assert_eq!(rows[0][8], "34.81");
    let trl: f64 = rows[0][3].parse().unwrap();
    assert!((trl - 12.88).abs() < 1e-9);
}

#[test]
fn empty_selection_writes_header_only() {
    let tmp = TempDir::new().unwrap();
    let flat = Region {
        id: "r1",
        county: "A",
        rates: vec![1.0; DAYS],
    };
    let manifest = write_inputs(tmp.path(), &[flat], true);
    let out = tmp.path().join("out");
    let o = trlkit(&["quantify", "--manifest", s(&manifest), "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(out.join("regions.csv")).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("polygon_id,"));
    let sel = read_json(&out.join("selection.json"));
    assert_eq!(sel["included"].as_array().unwrap().len(), 0);
    assert_eq!(sel["excluded"].as_array().unwrap().len(), 1);
    let run = read_json(&out.join("run.json"));
    assert_eq!(run["warnings"].as_array().unwrap().len(), 1);
}

#[test]
fn histogram_bins_are_left_closed() {
    assert_eq!(histogram(&[5.2]), vec![(0, 0), (1, 0), (2, 0), (3, 0), (4, 0), (5, 1)]);
    assert_eq!(histogram(&[0.0, 1.0, 0.99]), vec![(0, 2), (1, 1)]);
    assert!(histogram(&[]).is_empty());

    let tmp = TempDir::new().unwrap();
    let manifest = write_inputs(tmp.path(), &[dipped("r1", "A", 0.6, 13)], true);
    let out = tmp.path().join("out");
    assert_eq!(code(&trlkit(&["quantify", "--manifest", s(&manifest), "--out", s(&out)])), 0);
    assert_eq!(code(&trlkit(&["report", "--manifest", s(&manifest), "--out", s(&out)])), 0);
    let (header, rows) = csv_rows(&out.join("histogram.csv"));
    assert_eq!(header, ["bin_start", "bin_end", "count"]);
    assert_eq!(rows.last().unwrap(), &["5", "6", "1"]);
    assert!(rows[..5].iter().all(|r| r[2] == "0"));
}

#[test]
fn boundaries_attach_values_and_warn_on_missing() {
    let tmp = TempDir::new().unwrap();
    let manifest = write_inputs(tmp.path(), &[dipped("r1", "A", 0.08, 14), dipped("r2", "B", 0.5, 6)], true);
    let out = tmp.path().join("out");
    assert_eq!(code(&trlkit(&["quantify", "--manifest", s(&manifest), "--out", s(&out)])), 0);

    let square = json!({ "type": "Polygon", "coordinates": [[[-91, 29], [-90, 29], [-90, 30], [-91, 29]]] });
    let boundaries = json!({
        "type": "FeatureCollection",
        "features": [
            { "type": "Feature", "properties": { "polygon_id": "r1" }, "geometry": square },
            { "type": "Feature", "properties": { "polygon_id": "other" }, "geometry": square },
        ],
    });
    let bpath = tmp.path().join("boundaries.geojson");
    fs::write(&bpath, boundaries.to_string()).unwrap();

    let o = trlkit(&["report", "--manifest", s(&manifest), "--out", s(&out), "--boundaries", s(&bpath)]);
    assert_eq!(code(&o), 0);
    let run = read_json(&out.join("run.json"));
    let warnings = run["warnings"].as_array().unwrap();
    assert_eq!(warnings.len(), 1);
    assert!(warnings[0].as_str().unwrap().contains("r2"));
    assert_eq!(run["config"]["emit_geojson"], true);

    let geo = read_json(&out.join("choropleth.geojson"));
    let f = &geo["features"];
    assert_eq!(f[0]["properties"]["polygon_id"], "r1");
    assert!((f[0]["properties"]["trl"].as_f64().unwrap() - 12.88).abs() < 1e-9);
    assert!((f[0]["properties"]["pct_loss"].as_f64().unwrap() - 34.8108).abs() < 1e-3);
    assert!(f[1]["properties"]["trl"].is_null());
    assert_eq!(f[0]["geometry"], square);
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");

    // Unknown flag.
    assert_eq!(code(&trlkit(&["fit", "--bogus"])), 2);
    // No landfall in flags or manifest.
    let dir = tmp.path().join("nolandfall");
    fs::create_dir(&dir).unwrap();
    let manifest = write_inputs(&dir, &[dipped("r1", "A", 0.08, 14)], false);
    assert_eq!(code(&trlkit(&["quantify", "--manifest", s(&manifest), "--out", s(&out)])), 2);
    assert_eq!(
        code(&trlkit(&["quantify", "--manifest", s(&manifest), "--out", s(&out), "--landfall", "2021-08-29"])),
        0
    );
    // Threshold out of range.
    assert_eq!(
        code(&trlkit(&["quantify", "--manifest", s(&manifest), "--out", s(&out), "--landfall", "2021-08-29", "--rate-floor", "1.5"])),
        2
    );

    // Missing manifest and missing input file.
    assert_eq!(code(&trlkit(&["quantify", "--manifest", "/nonexistent/m.json", "--out", s(&out)])), 3);
    fs::remove_file(dir.join("outages.csv")).unwrap();
    let o = trlkit(&["quantify", "--manifest", s(&manifest), "--out", s(&out), "--landfall", "2021-08-29"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("outages"));

    // Schema violation.
    let bad = tmp.path().join("bad");
    fs::create_dir(&bad).unwrap();
    let manifest = write_inputs(&bad, &[dipped("r1", "A", 0.08, 14)], true);
    let text = fs::read_to_string(bad.join("activity.csv")).unwrap().replacen(",-3\n", ",-9\n", 1);
    fs::write(bad.join("activity.csv"), text).unwrap();
    assert_eq!(code(&trlkit(&["quantify", "--manifest", s(&manifest), "--out", s(&out)])), 4);
}

#[test]
fn constant_covariate_exits_5() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    assert_eq!(code(&trlkit(&["simulate", "--out", s(&data), "--groups", "10", "--per-group", "4"])), 0);
    let path = data.join("attributes.csv");
    let mut r = csv::Reader::from_path(&path).unwrap();
    let header = r.headers().unwrap().clone();
    let col = header.iter().position(|h| h == "pct_black").unwrap();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).unwrap();
    for rec in r.records() {
        let mut fields: Vec<String> = rec.unwrap().iter().map(String::from).collect();
        fields[col] = "12.5".into();
        w.write_record(&fields).unwrap();
    }
    fs::write(&path, w.into_inner().unwrap()).unwrap();

    let out = tmp.path().join("out");
    let o = trlkit(&["fit", "--manifest", s(&data.join("manifest.json")), "--out", s(&out)]);
    assert_eq!(code(&o), 5, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("constant"));
    assert!(!out.join("model.json").exists());
}

#[test]
fn help_and_version_exit_0() {
    assert_eq!(code(&trlkit(&["--help"])), 0);
    assert_eq!(code(&trlkit(&["--version"])), 0);
    assert_eq!(code(&trlkit(&[])), 2);
}
