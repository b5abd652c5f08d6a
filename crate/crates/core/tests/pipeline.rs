use demarg_core::data_pipeline::{
    bootstrap, default_axes, default_k_grid, load_records, save_records, simulate_measurement, simulate_record,
    MeasurementAxis,
};
use demarg_core::demarg_maps::{dm_from_characteristic, MapKind};
use demarg_core::fock_core::fock_state;
use demarg_core::DemargError;

fn negativity(axis: &MeasurementAxis) -> demarg_core::Result<f64> {
    dm_from_characteristic(&axis.to_curve()?, MapKind::Dm2, 6, 3.0)?.negativity()
}

#[test]
fn records_survive_a_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fock2.csv");
    let rho = fock_state(2, 3).unwrap();
    let rec = simulate_record(&rho, "fock2", &default_axes(), &default_k_grid(), 500, 21).unwrap();
    save_records(&rec, &path).unwrap();
    assert!(dir.path().join("fock2.json").exists());
    assert_eq!(load_records(&path).unwrap(), rec);
}

#[test]
fn malformed_rows_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(
        &path,
        "theta_rad,k,re_mean,im_mean,shots_re,shots_im\n0,0.0,1,0,10,10\n0,0.1,1.7,0,10,10\n",
    )
    .unwrap();
    match load_records(&path) {
        Err(DemargError::Validation(msg)) => assert!(msg.contains("bad.csv:3:"), "{msg}"),
        other => panic!("expected a validation error, got {other:?}"),
    }
}

#[test]
fn bootstrap_error_shrinks_with_shots() {
    let rho = fock_state(1, 2).unwrap();
    let k = default_k_grid();
    let sigma = |shots: u64| {
        let axis = simulate_measurement(&rho, 0.4, &k, shots, 5).unwrap();
        bootstrap(&axis, 200, 6, negativity).unwrap().sigma
    };
    let (s1, s16) = (sigma(1000), sigma(16000));
    let ratio = s1 / s16;
    assert!((ratio - 4.0).abs() < 1.0, "σ(1000)/σ(16000) = {ratio}");
}
