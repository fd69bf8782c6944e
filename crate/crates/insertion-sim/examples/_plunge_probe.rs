use insertion_sim::simulator::insertability_limits;
use insertion_sim::trajectory::PressController;
use insertion_sim::{Calibration, Catalog};

fn main() {
    let mut cal = Calibration::shipped();
    if let Some(t0) = std::env::args().nth(1) {
        cal.magnet_yaw.peak_torque = t0.parse().unwrap();
    }
    let cat = Catalog::shipped();
    for (pair, press) in [("square", 11.0), ("triangle", 12.0), ("wellplate_lid", 8.0)] {
        let (obj, site) = cat.pair(pair).unwrap();
        let t = std::time::Instant::now();
        let lims = insertability_limits(&cal, obj, site, &PressController::new(press));
        println!(
            "{pair:<15} geometric {:>2}  compliant {:>2}   ({:.1?})",
            lims.geometric_deg, lims.compliant_deg, t.elapsed()
        );
    }
}
