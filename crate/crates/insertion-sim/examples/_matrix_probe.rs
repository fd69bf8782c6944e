use insertion_sim::harness::{render_matrix, run_experiment, ExperimentConfig, Scenario};
use insertion_sim::{Calibration, Catalog};

fn main() {
    let cal = Calibration::shipped();
    let cat = Catalog::shipped();
    let scenario = match std::env::args().nth(1).as_deref() {
        Some("lateral") => Scenario::SquareLateral,
        Some("wellplate") => Scenario::WellplateLid,
        Some("petri") => Scenario::PetriLid,
        Some("triangle") => Scenario::Triangle,
        _ => Scenario::Square,
    };
    let cfg = ExperimentConfig::deterministic(scenario);
    let t0 = std::time::Instant::now();
    let report = run_experiment(&cal, &cat, &cfg).unwrap();
    println!("{}", render_matrix(report.matrix.as_ref().unwrap()));
    println!("elapsed: {:.1?}  totals: {:?}", t0.elapsed(), report.status_totals);
}
