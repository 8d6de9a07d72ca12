//! Run a mixed batch, write it as a JSON-lines log, read it back and build the
//! CSV report into a directory.
//!
//! ```text
//! cargo run --release --example report_bundle -- [out_dir]
//! ```

use std::path::PathBuf;

use teleswap::metrics::{build_report, read_log, run_batch, write_log};
use teleswap::operators::OperatorParams;
use teleswap::{SimConfig, Task};

fn main() {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "report".into()));
    let sim = SimConfig::default();
    let mut records = Vec::new();
    for params in [OperatorParams::expert(), OperatorParams::novice()] {
        for task in Task::ALL {
            records.extend(run_batch(&sim, task, &params, 20, 3).expect("batch runs").0);
        }
    }
    std::fs::create_dir_all(&out).expect("output dir");
    let log = out.join("trials.jsonl");
    write_log(&log, &records).expect("write log");
    let back = read_log(&log).expect("read log");
    assert!(back.errors.is_empty());

    let bundle = build_report(&back.records).expect("report");
    bundle.write_to(&out).expect("write report");
    for name in bundle.files.keys() {
        println!("wrote {}", out.join(name).display());
    }
    print!("\n{}", bundle.files["summary.txt"]);
}
