//! One scripted full exchange cycle, printed as its event timeline and timers.
//!
//! ```text
//! cargo run --example single_trial -- [expert|novice] [k] [seed]
//! ```

use teleswap::metrics::{run_trial, PhaseTimers};
use teleswap::operators::{OperatorParams, Skill};
use teleswap::{SimConfig, Task};

fn main() {
    let mut args = std::env::args().skip(1);
    let skill: Skill = args.next().as_deref().unwrap_or("expert").parse().expect("expert or novice");
    let k: u32 = args.next().map(|s| s.parse().expect("k")).unwrap_or(1);
    let seed: u64 = args.next().map(|s| s.parse().expect("seed")).unwrap_or(7);

    let record = run_trial(&SimConfig::default(), Task::FullCycle, &OperatorParams::for_skill(skill), k, seed)
        .expect("trial runs");
    for e in &record.events {
        println!("{:>9.2} s  {:?}", record.secs(e.tick), e.kind);
    }
    println!("\noutcome: {}", record.outcome.label());
    for name in PhaseTimers::NAMES {
        if let Some(s) = record.timer_s(name) {
            println!("{name:<18} {s:>8.2} s");
        }
    }
}
