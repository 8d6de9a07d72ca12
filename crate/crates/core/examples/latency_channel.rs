//! Drive a session through an injected-latency link on a virtual clock and
//! measure the command round trip.
//!
//! ```text
//! cargo run --example latency_channel -- [latency_ms] [jitter_ms]
//! ```

use teleswap::protocol::{ChannelConfig, PoseCommand, SessionLink};
use teleswap::scene::PoseDelta;
use teleswap::session::Session;
use teleswap::{SimConfig, Task};

fn main() {
    let mut args = std::env::args().skip(1);
    let latency: f64 = args.next().map(|s| s.parse().expect("latency_ms")).unwrap_or(50.0);
    let jitter: f64 = args.next().map(|s| s.parse().expect("jitter_ms")).unwrap_or(10.0);

    let session = Session::new(&SimConfig::default(), Task::Attach).expect("session");
    let mut link = SessionLink::new(session, ChannelConfig::with_latency(latency, jitter, 1));
    let step = link.tick_ms();
    let mut sent = Vec::new();
    let mut rtts = Vec::new();
    let mut now = 0.0;
    while rtts.len() < 200 {
        if sent.len() < 200 {
            let seq = sent.len() as u64 + 1;
            let cmd = PoseCommand { delta: PoseDelta { x: 0.5, ..Default::default() }, ..PoseCommand::zero(seq) };
            link.submit(now, cmd);
            sent.push(now);
        }
        link.tick(now).expect("step");
        for s in link.drain_ready(now).into_iter().filter(|s| s.seq > 0) {
            rtts.push(now - sent[s.seq as usize - 1]);
        }
        now += step;
    }
    let mean = rtts.iter().sum::<f64>() / rtts.len() as f64;
    let max = rtts.iter().cloned().fold(f64::MIN, f64::max);
    println!("one-way {latency} ms +/- {jitter} ms, tick {step} ms");
    println!("round trip mean {mean:.1} ms, max {max:.1} ms over {} commands", rtts.len());
    println!("tip x after {} commands: {:.1} mm", sent.len(), link.session().scene().arm_tip.x);
}
