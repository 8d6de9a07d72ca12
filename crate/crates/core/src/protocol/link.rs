//! Clock-agnostic core of one teleoperation session: an uplink injector in
//! front of the command queue, the fixed-rate session step, and a downlink
//! injector on the state stream. The TCP/WebSocket server drives it from a
//! wall clock; tests drive it from a virtual one.

use std::collections::VecDeque;

use crate::protocol::{ChannelConfig, LatencyInjector, PoseCommand, StateUpdate};
use crate::scene::SceneError;
use crate::session::Session;

#[derive(Debug)]
pub struct SessionLink {
    session: Session,
    uplink: LatencyInjector,
    downlink: LatencyInjector,
    inbound: VecDeque<(f64, PoseCommand)>,
    outbound: VecDeque<(f64, StateUpdate)>,
}

impl SessionLink {
    /// `channel.seed` seeds the uplink; the downlink uses the next seed so the
    /// two directions jitter independently.
    pub fn new(session: Session, channel: ChannelConfig) -> Self {
        let down = ChannelConfig { seed: channel.seed.wrapping_add(1), ..channel };
        SessionLink {
            session,
            uplink: LatencyInjector::new(channel),
            downlink: LatencyInjector::new(down),
            inbound: VecDeque::new(),
            outbound: VecDeque::new(),
        }
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    pub fn into_session(self) -> Session {
        self.session
    }

    pub fn tick_ms(&self) -> f64 {
        self.session.config().scene.dt_s * 1000.0
    }

    /// A command left the master at `now_ms`.
    pub fn submit(&mut self, now_ms: f64, cmd: PoseCommand) {
        if let Some(release) = self.uplink.schedule(now_ms) {
            self.inbound.push_back((release, cmd));
        }
    }

    /// Queue a state update on the return path, bypassing the session step.
    pub fn send_state(&mut self, now_ms: f64, update: StateUpdate) {
        if let Some(release) = self.downlink.schedule(now_ms) {
            self.outbound.push_back((release, update));
        }
    }

    /// Run one control tick at `now_ms`: consume at most one released command,
    /// step the session, and queue the resulting update on the return path.
    pub fn tick(&mut self, now_ms: f64) -> Result<(), SceneError> {
        let cmd = match self.inbound.front() {
            Some((release, _)) if *release <= now_ms => self.inbound.pop_front().map(|(_, c)| c),
            _ => None,
        };
        let update = self.session.step(cmd.as_ref())?;
        self.send_state(now_ms, update);
        Ok(())
    }

    /// State updates whose release time has passed.
    pub fn drain_ready(&mut self, now_ms: f64) -> Vec<StateUpdate> {
        let mut out = Vec::new();
        while let Some((release, _)) = self.outbound.front() {
            if *release > now_ms {
                break;
            }
            out.extend(self.outbound.pop_front().map(|(_, u)| u));
        }
        out
    }

    /// Everything still in flight on the return path, regardless of release time.
    pub fn drain_all(&mut self) -> Vec<StateUpdate> {
        self.outbound.drain(..).map(|(_, u)| u).collect()
    }

    pub fn queued_commands(&self) -> usize {
        self.inbound.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SimConfig;
    use crate::fsm::Task;
    use crate::scene::PoseDelta;

    fn link(latency: f64) -> SessionLink {
        let s = Session::new(&SimConfig::default(), Task::Attach).unwrap();
        SessionLink::new(s, ChannelConfig::with_latency(latency, 0.0, 7))
    }

    fn mv(seq: u64) -> PoseCommand {
        PoseCommand { delta: PoseDelta { x: 1.0, ..Default::default() }, ..PoseCommand::zero(seq) }
    }

    #[test]
    fn one_command_per_tick() {
        let mut l = link(0.0);
        for seq in 1..=3 {
            l.submit(0.0, mv(seq));
        }
        l.tick(0.0).unwrap();
        assert_eq!(l.queued_commands(), 2);
        let got = l.drain_ready(0.0);
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].seq, 1);
        l.tick(10.0).unwrap();
        l.tick(20.0).unwrap();
        let seqs: Vec<u64> = l.drain_ready(20.0).iter().map(|u| u.seq).collect();
        assert_eq!(seqs, vec![2, 3]);
    }

    #[test]
    fn round_trip_is_twice_the_latency() {
        let mut l = link(50.0);
        let tick = l.tick_ms();
        let mut now = 0.0;
        let mut seen = None;
        l.submit(30.0, mv(1));
        while seen.is_none() && now < 1000.0 {
            l.tick(now).unwrap();
            if l.drain_ready(now).iter().any(|u| u.seq >= 1) {
                seen = Some(now);
            }
            now += tick;
        }
        let rtt = seen.unwrap() - 30.0;
        assert!((100.0..=100.0 + tick).contains(&rtt), "rtt {rtt}");
    }
}
