use tempfile::TempDir;
use trlkit_core::covariates::{assemble_rows, read_covariates, write_covariates, AssembleOptions};
use trlkit_core::data_model::{load_inputs, load_manifest};
use trlkit_core::glmm::{fit_glmm, FitControls, ModelSpec};
use trlkit_core::resilience::{quantify, SelectionThresholds};
use trlkit_core::synth::{simulate_inputs, SimulationConfig};

fn config() -> SimulationConfig {
    SimulationConfig {
        seed: 21,
        groups: 10,
        per_group: 5,
    }
}

#[test]
fn files_reproduce_the_in_memory_dataset() {
    let sim = simulate_inputs(&config()).unwrap();
    let dir = TempDir::new().unwrap();
    sim.write(dir.path()).unwrap();

    let manifest = load_manifest(&dir.path().join("manifest.json")).unwrap();
    assert_eq!(manifest.landfall, Some(sim.landfall));
    let loaded = load_inputs(&manifest).unwrap();
    assert_eq!(loaded.regions(), sim.dataset.regions());
    assert_eq!(loaded.activity(), sim.dataset.activity());
    assert_eq!(loaded.outages(), sim.dataset.outages());
    assert_eq!(loaded.road_events(), sim.dataset.road_events());

    let thresholds = SelectionThresholds::for_landfall(sim.landfall);
    let (sel_a, res_a) = quantify(&sim.dataset, &thresholds).unwrap();
    let (sel_b, res_b) = quantify(&loaded, &thresholds).unwrap();
    assert_eq!(sel_a, sel_b);
    assert_eq!(res_a, res_b);
}

#[test]
fn covariate_file_round_trip_gives_the_same_fit() {
    let sim = simulate_inputs(&config()).unwrap();
    let thresholds = SelectionThresholds::for_landfall(sim.landfall);
    let (_, results) = quantify(&sim.dataset, &thresholds).unwrap();
    let rows = assemble_rows(&sim.dataset, &results, &AssembleOptions::default())
        .unwrap()
        .rows;

    let mut buf = Vec::new();
    write_covariates(&mut buf, &rows).unwrap();
    let back = read_covariates(buf.as_slice()).unwrap();
    assert_eq!(back, rows);

    let spec = ModelSpec::default();
    let controls = FitControls::default();
    let a = fit_glmm(&rows, &spec, &controls).unwrap();
    let b = fit_glmm(&back, &spec, &controls).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.n_obs, rows.len());
    assert!(a.n_groups >= 2 && a.n_groups <= 10);
}
