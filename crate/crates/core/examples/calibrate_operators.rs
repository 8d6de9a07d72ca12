//! Fit both operator profiles to the reference cycle times and print the
//! resulting parameters.
//!
//! ```text
//! cargo run --release --example calibrate_operators
//! ```

use std::time::Instant;

use teleswap::operators::{calibrate, CalibrationTargets};
use teleswap::SimConfig;

fn main() {
    let targets = CalibrationTargets::default();
    let started = Instant::now();
    let cal = match calibrate(&targets, &SimConfig::default()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("calibration failed: {e}");
            std::process::exit(2);
        }
    };
    println!(
        "expert macro mean {:.1} s -> cycle {:.2} s (target {})",
        cal.expert.macro_transit_mean_s, cal.expert_mean_s, targets.expert_cycle_s
    );
    println!(
        "novice macro mean {:.1} s -> cycle {:.2} s (target {})",
        cal.novice.macro_transit_mean_s, cal.novice_mean_s, targets.novice_cycle_s
    );
    println!("{} grid points in {:.2?}", cal.grid.len(), started.elapsed());
}
