use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use trlkit_core::covariates::{
    assemble_rows, column_matrix, diagnostics, standardize, write_covariates, AssembleOptions,
    Diagnostics, PREDICTORS,
};
use trlkit_core::data_model::{load_inputs, Dataset};
use trlkit_core::glmm::{
    fit_glmm, wald_table, CoefficientRow, Convergence, FitControls, GlmmFit, ModelSpec, Standardization,
};
use trlkit_core::resilience::{build_series, quantify, ResilienceResult, Selection, SelectionDecision};
use trlkit_core::synth::{simulate_inputs, SimulationConfig};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{csv_bytes, full, two_dp, write_atomic, write_json};

pub const REGIONS_CSV: &str = "regions.csv";
pub const SELECTION_JSON: &str = "selection.json";
pub const COVARIATES_CSV: &str = "covariates.csv";
pub const MODEL_JSON: &str = "model.json";
pub const HISTOGRAM_CSV: &str = "histogram.csv";
pub const CURVES_CSV: &str = "curves.csv";
pub const CHOROPLETH_GEOJSON: &str = "choropleth.geojson";
pub const RUN_JSON: &str = "run.json";

/// Non-fatal conditions collected during a run.
pub type Warnings = Vec<String>;

pub fn cmd_simulate(config: &SimulationConfig, out: &Path) -> Result<Warnings, CliError> {
    let sim = simulate_inputs(config)?;
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let staging = tempfile::tempdir_in(out).map_err(|e| CliError::io(out, e))?;
    sim.write(staging.path()).map_err(|e| CliError::io(staging.path(), e))?;
    for name in [
        "activity.csv",
        "outages.csv",
        "road_events.csv",
        "hazard_path.csv",
        "attributes.csv",
        "manifest.json",
    ] {
        let target = out.join(name);
        std::fs::rename(staging.path().join(name), &target).map_err(|e| CliError::io(target, e))?;
    }
    Ok(Vec::new())
}

struct Analysis {
    dataset: Dataset,
    selection: Selection,
    results: Vec<ResilienceResult>,
}

fn analyze(config: &RunConfig, warnings: &mut Warnings) -> Result<Analysis, CliError> {
    let dataset = load_inputs(&config.manifest)?;
    let report = dataset.report();
    if report.activity_rows_outside_horizon > 0 {
        warnings.push(format!(
            "{} activity rows fall outside the horizon and were ignored",
            report.activity_rows_outside_horizon
        ));
    }
    for id in &report.incomplete_regions {
        warnings.push(format!("region {id} has too many missing days and was excluded"));
    }
    let (selection, results) = quantify(&dataset, &config.thresholds)?;
    if results.is_empty() {
        warnings.push("no region met the selection criteria".into());
    }
    Ok(Analysis {
        dataset,
        selection,
        results,
    })
}

#[derive(Serialize)]
struct SelectionReport<'a> {
    thresholds: &'a trlkit_core::resilience::SelectionThresholds,
    included: Vec<&'a SelectionDecision>,
    excluded: Vec<&'a SelectionDecision>,
}

pub fn cmd_quantify(config: &RunConfig) -> Result<Warnings, CliError> {
    let mut warnings = Vec::new();
    let a = analyze(config, &mut warnings)?;

    let mut sorted: Vec<&ResilienceResult> = a.results.iter().collect();
    sorted.sort_by(|x, y| {
        y.trl
            .total_cmp(&x.trl)
            .then_with(|| x.region.polygon_id.cmp(&y.region.polygon_id))
    });
    let bytes = csv_bytes(
        &[
            "polygon_id",
            "name",
            "county",
            "trl",
            "resilience",
            "pct_loss",
            "trl_2dp",
            "resilience_2dp",
            "pct_loss_2dp",
        ],
        sorted.iter().map(|r| {
            vec![
                r.region.polygon_id.clone(),
                r.region.name.clone(),
                r.region.county.clone(),
                full(r.trl),
                full(r.resilience),
                full(r.pct_loss),
                two_dp(r.trl),
                two_dp(r.resilience),
                two_dp(r.pct_loss),
            ]
        }),
    )?;
    write_atomic(&config.output(REGIONS_CSV), &bytes)?;

    let report = SelectionReport {
        thresholds: &config.thresholds,
        included: a.selection.decisions.iter().filter(|d| d.included()).collect(),
        excluded: a.selection.excluded().collect(),
    };
    write_json(&config.output(SELECTION_JSON), &report)?;
    Ok(warnings)
}

#[derive(Serialize)]
struct RandomEffect<'a> {
    group: &'a str,
    b_hat: f64,
}

#[derive(Serialize)]
struct ModelReport<'a> {
    spec: &'a ModelSpec,
    controls: &'a FitControls,
    coefficients: Vec<CoefficientRow>,
    p_value_reference: &'static str,
    sigma2_group: f64,
    sigma2_resid: f64,
    sigma2_resid_definition: &'static str,
    shape: f64,
    variance_partition: Option<f64>,
    loglik: f64,
    aic: f64,
    bic: f64,
    r2_marginal: f64,
    r2_conditional: f64,
    n_obs: usize,
    n_groups: usize,
    k_params: usize,
    convergence: &'a Convergence,
    standardization: &'a Option<Standardization>,
    random_effects: Vec<RandomEffect<'a>>,
    collinearity: &'a Diagnostics,
}

impl<'a> ModelReport<'a> {
    fn new(spec: &'a ModelSpec, controls: &'a FitControls, fit: &'a GlmmFit, collinearity: &'a Diagnostics) -> Self {
        ModelReport {
            spec,
            controls,
            coefficients: wald_table(fit),
            p_value_reference: "two-sided standard normal",
            sigma2_group: fit.sigma2_group,
            sigma2_resid: fit.sigma2_resid,
            sigma2_resid_definition: "ln(1 + 1/shape)",
            shape: fit.shape,
            variance_partition: fit.variance_partition().ok(),
            loglik: fit.loglik,
            aic: fit.aic,
            bic: fit.bic,
            r2_marginal: fit.r2_marginal,
            r2_conditional: fit.r2_conditional,
            n_obs: fit.n_obs,
            n_groups: fit.n_groups,
            k_params: fit.k_params,
            convergence: &fit.convergence,
            standardization: &fit.standardization,
            random_effects: fit
                .group_names
                .iter()
                .zip(&fit.b_hat)
                .map(|(g, b)| RandomEffect { group: g, b_hat: *b })
                .collect(),
            collinearity,
        }
    }
}

pub fn cmd_fit(config: &RunConfig) -> Result<Warnings, CliError> {
    let mut warnings = Vec::new();
    let a = analyze(config, &mut warnings)?;
    let options = AssembleOptions {
        road_match_km: config.road_match_km,
        ..AssembleOptions::default()
    };
    let assembled = assemble_rows(&a.dataset, &a.results, &options)?;
    if assembled.road_report.unmapped_events > 0 {
        warnings.push(format!(
            "{} road events are farther than {} km from every region center",
            assembled.road_report.unmapped_events, config.road_match_km
        ));
    }
    let mut buf = Vec::new();
    write_covariates(&mut buf, &assembled.rows).map_err(|e| CliError::Internal(e.to_string()))?;
    write_atomic(&config.output(COVARIATES_CSV), &buf)?;

    let raw = column_matrix(&assembled.rows, &PREDICTORS)?;
    let collinearity = diagnostics(&standardize(&raw)?)?;
    let spec = ModelSpec::default();
    let controls = FitControls::default();
    let fit = fit_glmm(&assembled.rows, &spec, &controls)?;
    if fit.convergence.boundary_variance {
        warnings.push("county variance estimate is at its lower bound".into());
    }
    write_json(
        &config.output(MODEL_JSON),
        &ModelReport::new(&spec, &controls, &fit, &collinearity),
    )?;
    if fit.convergence.single_group_fallback {
        return Err(CliError::SingleGroup);
    }
    Ok(warnings)
}

struct RegionRow {
    polygon_id: String,
    trl: f64,
    resilience: f64,
    pct_loss: f64,
}

fn read_regions(path: &Path) -> Result<Vec<RegionRow>, CliError> {
    let text = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::Reader::from_reader(text.as_slice());
    let bad = |m: String| CliError::Usage(format!("{}: {m}", path.display()));
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| bad(format!("missing column `{name}`")))
    };
    let (id, trl, res, pct) = (col("polygon_id")?, col("trl")?, col("resilience")?, col("pct_loss")?);
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let num = |i: usize| -> Result<f64, CliError> {
            rec[i].parse().map_err(|_| bad(format!("bad number {:?}", &rec[i])))
        };
        rows.push(RegionRow {
            polygon_id: rec[id].to_string(),
            trl: num(trl)?,
            resilience: num(res)?,
            pct_loss: num(pct)?,
        });
    }
    Ok(rows)
}

/// Counts per unit-width bin `[k, k + 1)` from 0 up to the bin holding the
/// largest value.
pub fn histogram(values: &[f64]) -> Vec<(usize, usize)> {
    let Some(max) = values.iter().copied().reduce(f64::max) else {
        return Vec::new();
    };
    let mut counts = vec![0usize; max.floor() as usize + 1];
    for v in values {
        counts[v.floor() as usize] += 1;
    }
    counts.into_iter().enumerate().collect()
}

pub fn cmd_report(config: &RunConfig) -> Result<Warnings, CliError> {
    let mut warnings = Vec::new();
    let regions = read_regions(&config.output(REGIONS_CSV))?;

    let trls: Vec<f64> = regions.iter().map(|r| r.trl).collect();
    let bytes = csv_bytes(
        &["bin_start", "bin_end", "count"],
        histogram(&trls)
            .into_iter()
            .map(|(k, c)| vec![k.to_string(), (k + 1).to_string(), c.to_string()]),
    )?;
    write_atomic(&config.output(HISTOGRAM_CSV), &bytes)?;

    let dataset = load_inputs(&config.manifest)?;
    let mut ids: Vec<&str> = regions.iter().map(|r| r.polygon_id.as_str()).collect();
    ids.sort_unstable();
    let mut curve_rows = Vec::new();
    for id in ids {
        let series = build_series(&dataset, id)?;
        for (date, rate) in series.iter() {
            curve_rows.push(vec![id.to_string(), date.to_string(), full(rate)]);
        }
    }
    write_atomic(
        &config.output(CURVES_CSV),
        &csv_bytes(&["polygon_id", "date", "rate"], curve_rows)?,
    )?;

    if let Some(path) = &config.boundaries_path {
        let (geo, missing) = choropleth(path, &regions)?;
        for id in missing {
            warnings.push(format!("no boundary feature for region {id}"));
        }
        write_json(&config.output(CHOROPLETH_GEOJSON), &geo)?;
    }
    Ok(warnings)
}

fn feature_id(feature: &Value) -> Option<String> {
    match feature.get("properties")?.get("polygon_id")? {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// Copies the boundary collection, attaching `trl`, `resilience` and
/// `pct_loss` to every feature whose `polygon_id` has a result. Returns the
/// ids of regions that have no feature.
fn choropleth(path: &Path, regions: &[RegionRow]) -> Result<(Value, Vec<String>), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut geo: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let features = geo
        .get_mut("features")
        .and_then(Value::as_array_mut)
        .ok_or_else(|| CliError::Usage(format!("{}: not a FeatureCollection", path.display())))?;
    let by_id: BTreeMap<&str, &RegionRow> = regions.iter().map(|r| (r.polygon_id.as_str(), r)).collect();
    let mut seen = std::collections::BTreeSet::new();
    for feature in features.iter_mut() {
        let Some(id) = feature_id(feature) else { continue };
        let Some(props) = feature.get_mut("properties").and_then(Value::as_object_mut) else {
            continue;
        };
        match by_id.get(id.as_str()) {
            Some(r) => {
                props.insert("trl".into(), r.trl.into());
                props.insert("resilience".into(), r.resilience.into());
                props.insert("pct_loss".into(), r.pct_loss.into());
                seen.insert(id);
            }
            None => {
                props.insert("trl".into(), Value::Null);
            }
        }
    }
    let missing = regions
        .iter()
        .filter(|r| !seen.contains(&r.polygon_id))
        .map(|r| r.polygon_id.clone())
        .collect();
    Ok((geo, missing))
}
