//! Novice install time and macro transit across trials within each subject.
//!
//! ```text
//! cargo run --release --example learning_curve
//! ```

use teleswap::metrics::{by_subject, mean_trend, rounds_to_baseline, run_batch, TrialRecord};
use teleswap::operators::OperatorParams;
use teleswap::{SimConfig, Task};

fn install(r: &TrialRecord) -> Option<f64> {
    r.outcome.is_success().then(|| r.timer_s("t_install")).flatten()
}

fn main() {
    let sim = SimConfig::default();
    let (expert, es) = run_batch(&sim, Task::FullCycle, &OperatorParams::expert(), 20, 42).expect("expert batch");
    let (novice, _) = run_batch(&sim, Task::FullCycle, &OperatorParams::novice(), 100, 42).expect("novice batch");
    let baseline = es.task_time.expect("expert succeeds").mean_s;
    drop(expert);

    for (subject, rs) in by_subject(&novice) {
        let line: Vec<String> =
            rs.iter().map(|r| install(r).map(|s| format!("{s:4.1}")).unwrap_or_else(|| "  --".into())).collect();
        let rounds = rounds_to_baseline(&rs, baseline).map(|k| k.to_string()).unwrap_or_else(|| "never".into());
        println!("subject {subject}: {}  (baseline reached: {rounds})", line.join(" "));
    }
    println!("expert baseline {baseline:.2} s");
    println!("t_install rank trend {:+.3}", mean_trend(&novice, install).unwrap_or(f64::NAN));
    println!(
        "macro transit rank trend {:+.3}",
        mean_trend(&novice, |r| r.outcome.is_success().then(|| r.macro_transit_s()).flatten()).unwrap_or(f64::NAN)
    );
}
