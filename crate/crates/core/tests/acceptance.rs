//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Oracles here are written independently of the library
//! helpers they check.

use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use teleswap::fsm::{EventKind, ExchangePhase, FailureMode, Task};
use teleswap::mechanism::{can_release, withdraw_resistance, InterfaceParams, LatchParams};
use teleswap::metrics::{run_batch, success_rate, BatchSummary, Outcome, TrialRecord};
use teleswap::operators::{calibrate, CalibrationTargets, OperatorParams};
use teleswap::protocol::{
    decode, encode, inject_latency, ChannelConfig, ErrorFrame, Frame, Hello, PoseCommand, SessionLink, StateUpdate,
};
use teleswap::scene::{Pose, PoseDelta};
use teleswap::{Session, SimConfig};

struct Verdict {
    ok: bool,
    detail: String,
}

fn verdict(ok: bool, detail: impl Into<String>) -> Verdict {
    Verdict { ok, detail: detail.into() }
}

fn timed(f: impl FnOnce() -> Verdict) -> (Verdict, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

// ---------------------------------------------------------------- gating

fn release_grid() -> Verdict {
    // grid steps are exact binary fractions, so the integer form below is an
    // exact oracle, equality cells included:
    // 5a >= 2.5b + (c/8)(4d)  <=>  10a >= 5b + c*d
    let mut cells = [[[[false; 10]; 10]; 10]; 10];
    let mut mismatches = 0;
    let mut boundary = 0;
    for a in 0..10 {
        for b in 0..10 {
            for c in 0..10 {
                for d in 0..10 {
                    let p = LatchParams {
                        f_release: 5.0 * a as f64,
                        f_lock_preload: 2.5 * b as f64,
                        c_fric: 0.125 * c as f64,
                        f_normal: 4.0 * d as f64,
                    };
                    let got = can_release(&p);
                    let (lhs, rhs) = (10 * a, 5 * b + c * d);
                    if lhs == rhs {
                        boundary += 1;
                    }
                    if got != (lhs >= rhs) {
                        mismatches += 1;
                    }
                    cells[a][b][c][d] = got;
                }
            }
        }
    }
    // more release force never hurts; more preload, friction or normal load never helps
    let mut violations = 0;
    for a in 0..10 {
        for b in 0..10 {
            for c in 0..10 {
                for d in 0..10 {
                    let here = cells[a][b][c][d];
                    if a + 1 < 10 && here && !cells[a + 1][b][c][d] {
                        violations += 1;
                    }
                    if b + 1 < 10 && !here && cells[a][b + 1][c][d] {
                        violations += 1;
                    }
                    if c + 1 < 10 && !here && cells[a][b][c + 1][d] {
                        violations += 1;
                    }
                    if d + 1 < 10 && !here && cells[a][b][c][d + 1] {
                        violations += 1;
                    }
                }
            }
        }
    }
    verdict(
        mismatches == 0 && violations == 0,
        format!("10^4 cells ({boundary} on the boundary), {mismatches} mismatches, {violations} monotonicity violations"),
    )
}

fn withdraw_drop() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut held = 0;
    for _ in 0..1000 {
        let latch = LatchParams {
            f_lock_preload: rng.random_range(1e-3..50.0),
            c_fric: rng.random_range(0.0..1.5),
            f_normal: rng.random_range(0.0..50.0),
            f_release: rng.random_range(0.0..100.0),
        };
        let iface = InterfaceParams {
            f_residual: rng.random_range(0.0..20.0),
            mu_interface: rng.random_range(0.0..1.5),
            n_interface: rng.random_range(0.0..100.0),
        };
        if withdraw_resistance(&iface, true, &latch) < withdraw_resistance(&iface, false, &latch) {
            held += 1;
        }
    }
    verdict(held == 1000, format!("{held}/1000 parameter sets drop on unlock"))
}

// ---------------------------------------------------------------- metrics

fn first_tick(r: &TrialRecord, pred: impl Fn(&EventKind) -> bool) -> Option<u64> {
    r.events.iter().find(|e| pred(&e.kind)).map(|e| e.tick)
}

fn entered(r: &TrialRecord, phase: ExchangePhase) -> Option<u64> {
    first_tick(r, |k| matches!(k, EventKind::PhaseEntered { phase: p } if *p == phase))
}

/// Every timer of a successful record against the raw event ticks.
fn additivity_holds(r: &TrialRecord) -> bool {
    let t = &r.timers;
    let complete = first_tick(r, |k| matches!(k, EventKind::Complete));
    let clock = first_tick(r, |k| matches!(k, EventKind::ClockStarted));
    let unload_ok = match r.task {
        Task::Attach => t.t_unload.is_none(),
        _ => {
            let (Some(ret), Some(ins), Some(rel), Some(det)) = (
                entered(r, ExchangePhase::Returning),
                entered(r, ExchangePhase::Inserting),
                entered(r, ExchangePhase::ReleaseTriggered),
                entered(r, ExchangePhase::Detached),
            ) else {
                return false;
            };
            t.t_move_return == Some(ins - ret)
                && t.t_trigger_release == Some(rel - ins)
                && t.t_withdraw == Some(det - rel)
                && t.t_unload == Some(t.t_move_return.unwrap() + t.t_trigger_release.unwrap() + t.t_withdraw.unwrap())
        }
    };
    let install_ok = match r.task {
        Task::Detach => t.t_install.is_none(),
        _ => {
            let (Some(al), Some(fe), Some(lo), Some(done)) = (
                entered(r, ExchangePhase::Aligning),
                entered(r, ExchangePhase::Feeding),
                entered(r, ExchangePhase::Locked),
                complete,
            ) else {
                return false;
            };
            t.t_align == Some(fe - al)
                && t.t_feed == Some(lo - fe)
                && t.t_lock == Some(done - lo)
                && t.t_install == Some(t.t_align.unwrap() + t.t_feed.unwrap() + t.t_lock.unwrap())
        }
    };
    let exchange_ok = match r.task {
        Task::FullCycle => {
            t.t_exchange.is_some()
                && t.t_exchange == t.t_unload.zip(t.t_install).map(|(u, i)| u + i)
                && t.t_exchange == complete.zip(clock).map(|(c, s)| c - s)
        }
        _ => t.t_exchange.is_none(),
    };
    unload_ok && install_ok && exchange_ok
}

fn additivity(batches: &[(String, Vec<TrialRecord>)]) -> Verdict {
    let mut checked = 0;
    let mut bad = 0;
    for (_, records) in batches {
        for r in records.iter().filter(|r| r.outcome.is_success()) {
            checked += 1;
            if !additivity_holds(r) {
                bad += 1;
            }
        }
    }
    verdict(checked > 0 && bad == 0, format!("{checked} completed records, {bad} violations"))
}

fn recount(records: &[TrialRecord]) -> f64 {
    let failed = records.iter().filter(|r| !matches!(r.outcome, Outcome::Success)).count();
    100.0 * (records.len() - failed) as f64 / records.len() as f64
}

fn success_rates(batches: &[(String, Vec<TrialRecord>)]) -> Verdict {
    let exact = success_rate(3, 20).unwrap();
    let mut mismatched = Vec::new();
    for (name, records) in batches {
        let s = BatchSummary::from_records(records, None);
        if (s.p_success - recount(records)).abs() > 1e-9 {
            mismatched.push(name.clone());
        }
    }
    verdict(
        exact == 85.0 && mismatched.is_empty(),
        format!(
            "success_rate(3, 20) = {exact}; {} batches recounted, {} mismatched {mismatched:?}",
            batches.len(),
            mismatched.len()
        ),
    )
}

fn mean_time(records: &[TrialRecord]) -> f64 {
    let v: Vec<f64> = records.iter().filter_map(|r| r.task_time_s()).collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn calibration(sim: &SimConfig, batches: &mut Vec<(String, Vec<TrialRecord>)>) -> Verdict {
    let targets = CalibrationTargets::default();
    let cal = match calibrate(&targets, sim) {
        Ok(c) => c,
        Err(e) => return verdict(false, e.to_string()),
    };
    let within = |m: f64, target: f64| (m - target).abs() <= 0.15 * target;
    let mut ok = within(cal.expert_mean_s, 48.0) && within(cal.novice_mean_s, 98.0);
    let (mut lo_e, mut hi_e, mut lo_n, mut hi_n) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for seed in 0..10 {
        let (e, _) = run_batch(sim, Task::FullCycle, &cal.expert, 20, seed).unwrap();
        let (n, _) = run_batch(sim, Task::FullCycle, &cal.novice, 20, seed).unwrap();
        let (me, mn) = (mean_time(&e), mean_time(&n));
        ok &= me < mn && within(me, 48.0) && within(mn, 98.0);
        lo_e = lo_e.min(me);
        hi_e = hi_e.max(me);
        lo_n = lo_n.min(mn);
        hi_n = hi_n.max(mn);
        batches.push((format!("cal-expert-{seed}"), e));
        batches.push((format!("cal-novice-{seed}"), n));
    }
    verdict(
        ok,
        format!(
            "calibrated expert {:.2} s, novice {:.2} s; 10-seed ranges expert {lo_e:.1}-{hi_e:.1} s, novice {lo_n:.1}-{hi_n:.1} s",
            cal.expert_mean_s, cal.novice_mean_s
        ),
    )
}

fn count_mode(records: &[TrialRecord], mode: FailureMode) -> usize {
    records.iter().filter(|r| r.outcome == Outcome::Failure(mode)).count()
}

fn failure_modes(sim: &SimConfig, batches: &mut Vec<(String, Vec<TrialRecord>)>) -> Verdict {
    let (novice, _) = run_batch(sim, Task::FullCycle, &OperatorParams::novice(), 100, 42).unwrap();
    let (expert, _) = run_batch(sim, Task::FullCycle, &OperatorParams::expert(), 100, 42).unwrap();
    let tilted = count_mode(&novice, FailureMode::TiltedInsertionNoTrigger);
    let collided = count_mode(&novice, FailureMode::AxialMisalignmentCollision);
    let nf = novice.iter().filter(|r| !r.outcome.is_success()).count();
    let ef = expert.iter().filter(|r| !r.outcome.is_success()).count();
    batches.push(("novice-100".into(), novice));
    batches.push(("expert-100".into(), expert));
    verdict(
        tilted >= 1 && collided >= 1 && ef < nf,
        format!("novice: {tilted} tilted, {collided} collisions, {nf} failures total; expert: {ef} failures"),
    )
}

// ---------------------------------------------------------------- fsm safety

/// Lateral distance from the +x slot axis and angle to it, from raw pose
/// fields. Only valid for the default bay orientation.
fn misalignment(tip: &Pose, slot: &Pose) -> (f64, f64) {
    let lateral = ((tip.y - slot.y).powi(2) + (tip.z - slot.z).powi(2)).sqrt();
    let cos = tip.pitch.to_radians().cos() * tip.yaw.to_radians().cos();
    (lateral, cos.clamp(-1.0, 1.0).acos().to_degrees())
}

fn fsm_safety() -> Verdict {
    let base = SimConfig::default();
    let tol = base.mechanism.envelope.engage_trans_tol;
    let tilt_tol = base.mechanism.envelope.engage_tilt_tol;
    let slot = base.scene.bays[0];
    let mut sequences = 0;
    let mut locks = 0;
    let mut unsafe_locks = Vec::new();
    for lateral_mm in 0..=15 {
        for tilt_deg in 0..=12 {
            for direction in 0..3 {
                for feed in [0.5f64, 1.5, 3.0, 5.0] {
                    for drift in [false, true] {
                        sequences += 1;
                        let (l, t) = (lateral_mm as f64, tilt_deg as f64);
                        let (dy, dz) = match direction {
                            0 => (l, 0.0),
                            1 => (0.0, l),
                            _ => (l / 2f64.sqrt(), -l / 2f64.sqrt()),
                        };
                        // the drifting variant starts aligned and slides sideways while feeding
                        let start = if drift {
                            Pose::at(slot.x - 25.0, slot.y, slot.z)
                        } else {
                            Pose::new(slot.x - 25.0, slot.y + dy, slot.z + dz, t, t / 2.0, 0.0)
                        };
                        let mut cfg = base.clone();
                        cfg.scene.home = start;
                        let mut s = Session::new(&cfg, Task::Attach).unwrap();
                        let drift_ticks = (25.0 / feed).ceil();
                        let mut prev = s.fsm().phase;
                        for seq in 1..=200u64 {
                            let delta = if drift {
                                PoseDelta {
                                    y: dy / drift_ticks,
                                    z: dz / drift_ticks,
                                    pitch: t / drift_ticks,
                                    ..Default::default()
                                }
                            } else {
                                PoseDelta::default()
                            };
                            let cmd = PoseCommand { seq, delta, axial_feed: feed, ..PoseCommand::zero(seq) };
                            s.step(Some(&cmd)).unwrap();
                            let phase = s.fsm().phase;
                            if phase == ExchangePhase::Locked && prev != ExchangePhase::Locked {
                                locks += 1;
                                let (trans, tilt) = misalignment(&s.scene().arm_tip, &slot);
                                if trans > tol + 1e-9 || tilt > tilt_tol + 1e-9 {
                                    unsafe_locks.push((lateral_mm, tilt_deg, direction, feed, drift, trans, tilt));
                                }
                            }
                            prev = phase;
                            if s.is_finished() || phase == ExchangePhase::Locked {
                                break;
                            }
                        }
                    }
                }
            }
        }
    }
    verdict(
        unsafe_locks.is_empty() && locks > 0,
        match unsafe_locks.first() {
            None => format!("{sequences} sequences, {locks} locks, none outside tolerance"),
            Some(first) => format!("{sequences} sequences, {} of {locks} locks outside tolerance, first {first:?}", unsafe_locks.len()),
        },
    )
}

// ---------------------------------------------------------------- protocol

fn random_pose(rng: &mut ChaCha8Rng) -> Pose {
    Pose {
        x: rng.random_range(-500.0..500.0),
        y: rng.random_range(-500.0..500.0),
        z: rng.random_range(-500.0..500.0),
        pitch: rng.random_range(-180.0..180.0),
        yaw: rng.random_range(-180.0..180.0),
        roll: rng.random_range(-180.0..180.0),
    }
}

fn random_frame(rng: &mut ChaCha8Rng, states: &[StateUpdate]) -> Frame {
    match rng.random_range(0..4) {
        0 => {
            let p = random_pose(rng);
            Frame::Cmd(PoseCommand {
                seq: rng.random(),
                client_time_ms: rng.random(),
                session_id: format!("s-{:x}", rng.random::<u32>()),
                delta: PoseDelta { x: p.x, y: p.y, z: p.z, pitch: p.pitch, yaw: p.yaw, roll: p.roll },
                axial_feed: rng.random_range(-10.0..10.0),
            })
        }
        1 => {
            let mut st = states[rng.random_range(0..states.len())].clone();
            st.seq = rng.random();
            st.arm_tip = random_pose(rng);
            st.sim_time = rng.random_range(0.0..1e4);
            Frame::State(st)
        }
        2 => Frame::Hello(Hello {
            task: [Task::Attach, Task::Detach, Task::FullCycle][rng.random_range(0..3)],
            seed: rng.random(),
            session_id: rng.random_bool(0.5).then(|| format!("{:016x}", rng.random::<u64>())),
            dt_s: rng.random_bool(0.5).then_some(0.01),
        }),
        _ => Frame::Err(ErrorFrame::new("seq_gap", format!("expected {} \"quoted\"\n", rng.random::<u16>()))),
    }
}

fn codec_identity() -> Verdict {
    // realistic state payloads, events included, harvested from a real trial
    let sim = SimConfig::default();
    let mut s = Session::new(&sim, Task::FullCycle).unwrap();
    let mut op = teleswap::ScriptedOperator::new(OperatorParams::novice(), 1, 9);
    let mut states = vec![s.snapshot()];
    let mut obs = s.snapshot();
    while !s.is_finished() {
        use teleswap::Pilot;
        let c = op.next_command(&obs);
        obs = s.step(Some(&c)).unwrap();
        if !obs.events_since_last.is_empty() {
            states.push(obs.clone());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(10_000);
    let mut bad = 0;
    for _ in 0..10_000 {
        let f = random_frame(&mut rng, &states);
        let bytes = encode(&f).unwrap();
        let (frames, rest) = decode(&bytes);
        let same = rest.is_empty() && frames.len() == 1 && frames[0].as_ref().ok() == Some(&f);
        if !same {
            bad += 1;
        }
    }
    verdict(bad == 0, format!("10000 frames, {bad} not reproduced"))
}

fn round_trip() -> Verdict {
    let sim = SimConfig::default();
    let tick_ms = sim.scene.dt_s * 1000.0;
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for offset in [0.0, 2.5, 5.0, 9.99] {
        for send_tick in [0u64, 7, 31] {
            let session = Session::new(&sim, Task::Attach).unwrap();
            let mut link = SessionLink::new(session, ChannelConfig::with_latency(50.0, 0.0, 5));
            let sent = send_tick as f64 * tick_ms + offset;
            let mut submitted = false;
            let mut arrival = None;
            for k in 0..100u64 {
                let now = k as f64 * tick_ms;
                if !submitted && now + tick_ms > sent {
                    link.submit(sent, PoseCommand::zero(1));
                    submitted = true;
                }
                link.tick(now + tick_ms).unwrap();
                if let Some(st) = link.drain_ready(now + tick_ms).into_iter().find(|s| s.seq == 1) {
                    arrival = Some(now + tick_ms);
                    let _ = st;
                    break;
                }
            }
            match arrival {
                Some(a) => {
                    let rtt = a - sent;
                    worst = worst.max((rtt - 100.0).abs());
                    ok &= (rtt - 100.0).abs() <= tick_ms + 1e-9;
                }
                None => ok = false,
            }
        }
    }
    verdict(ok, format!("worst |RTT - 100 ms| = {worst:.2} ms (one tick = {tick_ms} ms)"))
}

fn in_order() -> Verdict {
    let cfg = ChannelConfig::with_latency(50.0, 30.0, 77);
    let frames: Vec<(f64, usize)> = (0..10_000).map(|i| (i as f64 * 2.0, i)).collect();
    let out = inject_latency(cfg, frames);
    let mut ok = out.len() == 10_000;
    let mut last = f64::MIN;
    for (i, d) in out.iter().enumerate() {
        ok &= d.frame == i && d.release_ms >= last && d.release_ms >= d.send_ms + 20.0 - 1e-9;
        last = d.release_ms;
    }
    let jittered = out.windows(2).filter(|w| (w[1].release_ms - w[1].send_ms) != (w[0].release_ms - w[0].send_ms)).count();
    verdict(ok && jittered > 0, format!("10000 frames released in send order ({jittered} delay changes)"))
}

// ---------------------------------------------------------------- cli

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_teleswap"))
            .args(["run", "--seed", "42", "--out"])
            .arg(&path)
            .env("RUST_LOG", "off")
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        std::fs::read(path).unwrap()
    };
    let (a, b) = (run("a.jsonl"), run("b.jsonl"));
    verdict(!a.is_empty() && a == b, format!("{} bytes, identical: {}", a.len(), a == b))
}

// ---------------------------------------------------------------- learning

/// Rank correlation from squared rank differences; inputs are free of ties.
fn spearman_no_ties(y: &[f64]) -> f64 {
    let n = y.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| y[a].partial_cmp(&y[b]).unwrap());
    let mut rank = vec![0.0; n];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r as f64 + 1.0;
    }
    let d2: f64 = rank.iter().enumerate().map(|(i, r)| (r - (i as f64 + 1.0)).powi(2)).sum();
    let n = n as f64;
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

fn has_ties(v: &[f64]) -> bool {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    s.windows(2).any(|w| w[0] == w[1])
}

/// Spearman correlation of `series` with its position.
fn rho(series: &[f64]) -> f64 {
    if has_ties(series) {
        // the closed form needs distinct values; defer to the tie-aware routine
        let idx: Vec<f64> = (1..=series.len()).map(|i| i as f64).collect();
        return teleswap::metrics::spearman(&idx, series).unwrap();
    }
    spearman_no_ties(series)
}

fn learning_curve(sim: &SimConfig) -> Verdict {
    let (mut local, mut macro_t) = (Vec::new(), Vec::new());
    for seed in 0..10 {
        let (records, _) = run_batch(sim, Task::FullCycle, &OperatorParams::novice(), 20, seed).unwrap();
        let ok: Vec<&TrialRecord> = records.iter().filter(|r| r.outcome.is_success()).collect();
        // successful trials keep their trial order
        let install: Vec<f64> = ok.iter().map(|r| r.timers.t_install.unwrap() as f64).collect();
        let macro_s: Vec<f64> = ok.iter().map(|r| r.macro_transit.unwrap() as f64).collect();
        local.push(rho(&install));
        macro_t.push(rho(&macro_s));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (l, m) = (mean(&local), mean(&macro_t));
    verdict(l < -0.5 && m.abs() < 0.3, format!("mean rho: t_install {l:.3}, macro transit {m:.3}"))
}

// ---------------------------------------------------------------- driver

fn main() {
    let sim = SimConfig::default();
    let mut results: Vec<(&str, Verdict, Duration, Option<Duration>)> = Vec::new();
    let mut batches: Vec<(String, Vec<TrialRecord>)> = Vec::new();

    let (v, d) = timed(release_grid);
    results.push(("release gating grid", v, d, Some(Duration::from_secs(1))));
    let (v, d) = timed(withdraw_drop);
    results.push(("withdraw resistance drop", v, d, None));

    let (v, d) = timed(|| calibration(&sim, &mut batches));
    results.push(("calibration reproduction", v, d, Some(Duration::from_secs(120))));
    let (v, d) = timed(|| failure_modes(&sim, &mut batches));
    results.push(("failure-mode generation", v, d, None));
    for task in [Task::Attach, Task::Detach, Task::FullCycle] {
        for params in [OperatorParams::expert(), OperatorParams::novice()] {
            let (records, _) = run_batch(&sim, task, &params, 100, 7).unwrap();
            batches.push((format!("{}-{}-100", params.label, task), records));
        }
    }
    let (v, d) = timed(|| additivity(&batches));
    results.push(("phase timer additivity", v, d, None));
    let (v, d) = timed(|| success_rates(&batches));
    results.push(("success rate", v, d, None));

    let (v, d) = timed(fsm_safety);
    results.push(("fsm safety grid", v, d, Some(Duration::from_secs(30))));

    let (v, d) = timed(codec_identity);
    results.push(("protocol codec identity", v, d, None));
    let (v, d) = timed(round_trip);
    results.push(("protocol round trip at 50 ms", v, d, None));
    let (v, d) = timed(in_order);
    results.push(("protocol in-order under jitter", v, d, None));

    let (v, d) = timed(determinism);
    results.push(("run --seed 42 determinism", v, d, None));
    let (v, d) = timed(|| learning_curve(&sim));
    results.push(("learning-curve trends", v, d, None));

    let mut failed = 0;
    for (name, v, took, limit) in &results {
        let in_time = limit.is_none_or(|l| *took < l);
        let pass = v.ok && in_time;
        if !pass {
            failed += 1;
        }
        let budget = limit.map(|l| format!(" (limit {l:.0?})")).unwrap_or_default();
        println!("{} {name}: {} [{took:.2?}{budget}]", if pass { "PASS" } else { "FAIL" }, v.detail);
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
