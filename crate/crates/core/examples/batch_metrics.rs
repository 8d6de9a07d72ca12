//! Expert and novice batches for each task with success rate and mean task time.
//!
//! ```text
//! cargo run --release --example batch_metrics
//! ```

use teleswap::metrics::run_batch;
use teleswap::operators::OperatorParams;
use teleswap::{SimConfig, Task};

fn main() {
    let sim = SimConfig::default();
    println!("{:<8} {:<8} {:>6} {:>9} {:>10}", "operator", "task", "n", "success", "mean (s)");
    for params in [OperatorParams::expert(), OperatorParams::novice()] {
        for task in Task::ALL {
            let (_, s) = run_batch(&sim, task, &params, 40, 1).expect("batch runs");
            let mean = s.task_time.map(|t| format!("{:.2}", t.mean_s)).unwrap_or_else(|| "-".into());
            println!("{:<8} {:<8} {:>6} {:>8.1}% {:>10}", params.label, task, s.n_total, s.p_success, mean);
        }
    }
}
