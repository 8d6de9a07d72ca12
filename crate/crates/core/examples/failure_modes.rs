//! Failure-mode breakdown of a novice batch compared with an expert one.
//!
//! ```text
//! cargo run --release --example failure_modes
//! ```

use teleswap::fsm::FailureMode;
use teleswap::metrics::run_batch;
use teleswap::operators::OperatorParams;
use teleswap::{SimConfig, Task};

fn main() {
    let sim = SimConfig::default();
    for params in [OperatorParams::expert(), OperatorParams::novice()] {
        let (_, s) = run_batch(&sim, Task::FullCycle, &params, 100, 42).expect("batch runs");
        println!("{}: {} of {} failed ({} timeouts)", params.label, s.n_fail, s.n_total, s.n_timeout);
        for mode in FailureMode::ALL {
            println!("  {:<32} {}", format!("{mode:?}"), s.failure_counts.get(&mode).copied().unwrap_or(0));
        }
    }
}
