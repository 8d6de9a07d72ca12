//! Trial records, phase timers, batch summaries, JSON-lines logs and the
//! CSV report bundle.
//!
//! Timers are kept as whole ticks so that the aggregate timers are exact
//! sums of their parts; seconds are derived on output.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::SimConfig;
use crate::fsm::{classify_failure, EventKind, ExchangePhase, FailureMode, Task, TrialEvent};
use crate::operators::{OperatorParams, Pilot, ScriptedOperator};
use crate::session::{Session, SessionError};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("n_total must be positive")]
    EmptyBatch,
    #[error("n_fail ({n_fail}) exceeds n_total ({n_total})")]
    TooManyFailures { n_fail: usize, n_total: usize },
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Scene(#[from] crate::scene::SceneError),
    #[error("I/O: {0}")]
    Io(#[from] io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Percentage of successful trials, `100 * (1 - n_fail / n_total)`.
pub fn success_rate(n_fail: usize, n_total: usize) -> Result<f64, MetricsError> {
    if n_total == 0 {
        return Err(MetricsError::EmptyBatch);
    }
    if n_fail > n_total {
        return Err(MetricsError::TooManyFailures { n_fail, n_total });
    }
    Ok(100.0 * (1.0 - n_fail as f64 / n_total as f64))
}

/// Per-phase durations in ticks. A timer is `None` when its phase was never
/// completed; aggregates need all of their parts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseTimers {
    pub t_move_return: Option<u64>,
    pub t_trigger_release: Option<u64>,
    pub t_withdraw: Option<u64>,
    pub t_align: Option<u64>,
    pub t_feed: Option<u64>,
    pub t_lock: Option<u64>,
    pub t_unload: Option<u64>,
    pub t_install: Option<u64>,
    pub t_exchange: Option<u64>,
}

fn span(a: Option<u64>, b: Option<u64>) -> Option<u64> {
    match (a, b) {
        (Some(a), Some(b)) if b >= a => Some(b - a),
        _ => None,
    }
}

fn sum(parts: &[Option<u64>]) -> Option<u64> {
    parts.iter().try_fold(0u64, |acc, p| p.map(|v| acc + v))
}

impl PhaseTimers {
    pub const NAMES: [&'static str; 9] = [
        "t_move_return",
        "t_trigger_release",
        "t_withdraw",
        "t_align",
        "t_feed",
        "t_lock",
        "t_unload",
        "t_install",
        "t_exchange",
    ];

    /// Derive timers from the phase-entry events of one trial.
    pub fn from_events(events: &[TrialEvent]) -> Self {
        let entered = |phase: ExchangePhase| {
            events.iter().find_map(|e| match e.kind {
                EventKind::PhaseEntered { phase: p } if p == phase => Some(e.tick),
                _ => None,
            })
        };
        let complete = events.iter().find_map(|e| matches!(e.kind, EventKind::Complete).then_some(e.tick));
        let returning = entered(ExchangePhase::Returning);
        let inserting = entered(ExchangePhase::Inserting);
        let released = entered(ExchangePhase::ReleaseTriggered);
        let detached = entered(ExchangePhase::Detached);
        let aligning = entered(ExchangePhase::Aligning);
        let feeding = entered(ExchangePhase::Feeding);
        let locked = entered(ExchangePhase::Locked);

        let t_move_return = span(returning, inserting);
        let t_trigger_release = span(inserting, released);
        let t_withdraw = span(released, detached);
        let t_align = span(aligning, feeding);
        let t_feed = span(feeding, locked);
        let t_lock = if locked.is_some() { span(locked, complete) } else { None };
        let t_unload = sum(&[t_move_return, t_trigger_release, t_withdraw]);
        let t_install = sum(&[t_align, t_feed, t_lock]);
        PhaseTimers {
            t_move_return,
            t_trigger_release,
            t_withdraw,
            t_align,
            t_feed,
            t_lock,
            t_unload,
            t_install,
            t_exchange: sum(&[t_unload, t_install]),
        }
    }

    pub fn get(&self, name: &str) -> Option<u64> {
        match name {
            "t_move_return" => self.t_move_return,
            "t_trigger_release" => self.t_trigger_release,
            "t_withdraw" => self.t_withdraw,
            "t_align" => self.t_align,
            "t_feed" => self.t_feed,
            "t_lock" => self.t_lock,
            "t_unload" => self.t_unload,
            "t_install" => self.t_install,
            "t_exchange" => self.t_exchange,
            _ => None,
        }
    }

    /// The headline timer of `task`.
    pub fn task_time(&self, task: Task) -> Option<u64> {
        match task {
            Task::Attach => self.t_install,
            Task::Detach => self.t_unload,
            Task::FullCycle => self.t_exchange,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Failure(FailureMode),
    Timeout,
}

impl Outcome {
    pub fn is_success(&self) -> bool {
        matches!(self, Outcome::Success)
    }

    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::Failure(m) => m.as_str(),
            Outcome::Timeout => "Timeout",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    /// 1-based subject number within the batch.
    #[serde(default = "first_subject")]
    pub subject: u32,
    /// 1-based trial number within the subject's run (the learning index).
    pub trial_index: u32,
    pub task: Task,
    pub operator: String,
    pub seed: u64,
    pub dt_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
    pub outcome: Outcome,
    pub timers: PhaseTimers,
    /// Ticks from clock start until the tip first reached the repository.
    pub macro_transit: Option<u64>,
    pub end_tick: u64,
    pub events: Vec<TrialEvent>,
}

fn first_subject() -> u32 {
    1
}

impl TrialRecord {
    pub fn from_session(session: &Session, trial_index: u32, operator: &str, seed: u64) -> Self {
        let events = session.events().to_vec();
        let outcome = if let Some(mode) = classify_failure(&events) {
            Outcome::Failure(mode)
        } else if session.fsm().complete {
            Outcome::Success
        } else {
            Outcome::Timeout
        };
        let clock = events.iter().find_map(|e| matches!(e.kind, EventKind::ClockStarted).then_some(e.tick));
        let reached =
            events.iter().find_map(|e| matches!(e.kind, EventKind::RepositoryReached { .. }).then_some(e.tick));
        TrialRecord {
            subject: 1,
            trial_index,
            task: session.fsm().task,
            operator: operator.to_string(),
            seed,
            dt_s: session.scene().dt_s,
            session_id: None,
            outcome,
            timers: PhaseTimers::from_events(&events),
            macro_transit: span(clock, reached),
            end_tick: session.scene().tick,
            events,
        }
    }

    pub fn secs(&self, ticks: u64) -> f64 {
        ticks as f64 * self.dt_s
    }

    /// Headline task time in seconds, for successful trials only.
    pub fn task_time_s(&self) -> Option<f64> {
        if !self.outcome.is_success() {
            return None;
        }
        self.timers.task_time(self.task).map(|t| self.secs(t))
    }

    pub fn timer_s(&self, name: &str) -> Option<f64> {
        self.timers.get(name).map(|t| self.secs(t))
    }

    pub fn macro_transit_s(&self) -> Option<f64> {
        self.macro_transit.map(|t| self.secs(t))
    }
}

/// Drive one session with `pilot` until it completes, fails or times out.
pub fn run_trial_with<P: Pilot>(
    sim: &SimConfig,
    task: Task,
    pilot: &mut P,
    operator: &str,
    trial_index: u32,
    seed: u64,
) -> Result<TrialRecord, MetricsError> {
    let mut session = Session::new(sim, task)?;
    let mut observed = session.snapshot();
    while !session.is_finished() {
        let cmd = pilot.next_command(&observed);
        observed = session.step(Some(&cmd))?;
    }
    Ok(TrialRecord::from_session(&session, trial_index, operator, seed))
}

/// One scripted trial at index `k` (1-based).
pub fn run_trial(
    sim: &SimConfig,
    task: Task,
    params: &OperatorParams,
    k: u32,
    seed: u64,
) -> Result<TrialRecord, MetricsError> {
    let mut op = ScriptedOperator::new(params.clone(), k, seed);
    run_trial_with(sim, task, &mut op, &params.label, k, seed)
}

/// Per-trial seeds derived from one batch seed.
pub fn trial_seeds(batch_seed: u64, n: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(batch_seed);
    (0..n).map(|_| rng.next_u64()).collect()
}

/// `n` trials split into subjects of `params.trials_per_subject` consecutive
/// trials. Within a subject the trial index advances, so novices learn.
pub fn run_batch(
    sim: &SimConfig,
    task: Task,
    params: &OperatorParams,
    n: usize,
    seed: u64,
) -> Result<(Vec<TrialRecord>, BatchSummary), MetricsError> {
    let per = params.trials_per_subject.max(1) as usize;
    let records = trial_seeds(seed, n)
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            let k = (i % per) as u32 + 1;
            let mut r = run_trial(sim, task, params, k, s)?;
            r.subject = (i / per) as u32 + 1;
            Ok(r)
        })
        .collect::<Result<Vec<_>, MetricsError>>()?;
    let summary = BatchSummary::from_records(&records, None);
    Ok((records, summary))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub n: usize,
    pub mean_s: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std_s: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
        Some(Stat { n, mean_s: mean, std_s: var.sqrt() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub n_total: usize,
    /// Failures plus timeouts.
    pub n_fail: usize,
    pub n_timeout: usize,
    pub p_success: f64,
    /// Headline task time over successful trials.
    pub task_time: Option<Stat>,
    /// Per-timer statistics over successful trials.
    pub timers: BTreeMap<String, Stat>,
    pub failure_counts: BTreeMap<FailureMode, usize>,
    pub macro_transit: Option<Stat>,
    /// Per subject, in subject order.
    pub rounds_to_baseline: Vec<Option<u32>>,
}

impl BatchSummary {
    pub fn from_records(records: &[TrialRecord], baseline_s: Option<f64>) -> Self {
        let n_total = records.len();
        let mut failure_counts = BTreeMap::new();
        let mut n_timeout = 0;
        for r in records {
            match r.outcome {
                Outcome::Failure(m) => *failure_counts.entry(m).or_insert(0) += 1,
                Outcome::Timeout => n_timeout += 1,
                Outcome::Success => {}
            }
        }
        let n_fail = records.iter().filter(|r| !r.outcome.is_success()).count();
        let ok: Vec<&TrialRecord> = records.iter().filter(|r| r.outcome.is_success()).collect();
        let mut timers = BTreeMap::new();
        for name in PhaseTimers::NAMES {
            let vals: Vec<f64> = ok.iter().filter_map(|r| r.timer_s(name)).collect();
            if let Some(s) = Stat::of(&vals) {
                timers.insert(name.to_string(), s);
            }
        }
        let task_times: Vec<f64> = ok.iter().filter_map(|r| r.task_time_s()).collect();
        let macros: Vec<f64> = ok.iter().filter_map(|r| r.macro_transit_s()).collect();
        BatchSummary {
            n_total,
            n_fail,
            n_timeout,
            p_success: success_rate(n_fail, n_total).unwrap_or(0.0),
            task_time: Stat::of(&task_times),
            timers,
            failure_counts,
            macro_transit: Stat::of(&macros),
            rounds_to_baseline: baseline_s
                .map(|b| by_subject(records).values().map(|rs| rounds_to_baseline(rs, b)).collect())
                .unwrap_or_default(),
        }
    }
}

/// Records grouped by subject.
pub fn by_subject(records: &[TrialRecord]) -> BTreeMap<u32, Vec<TrialRecord>> {
    let mut m: BTreeMap<u32, Vec<TrialRecord>> = BTreeMap::new();
    for r in records {
        m.entry(r.subject).or_default().push(r.clone());
    }
    m
}

/// First 1-based trial index whose successful task time is at or below
/// `baseline_s`. Expects one subject's records.
pub fn rounds_to_baseline(records: &[TrialRecord], baseline_s: f64) -> Option<u32> {
    let mut sorted: Vec<&TrialRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.trial_index);
    sorted.into_iter().find(|r| r.task_time_s().is_some_and(|t| t <= baseline_s)).map(|r| r.trial_index)
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        // ties share the average of their 1-based ranks
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Spearman rank correlation. `None` for mismatched lengths, fewer than two
/// points or a constant series.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    pearson(&ranks(x), &ranks(y))
}

/// Spearman correlation of a per-trial quantity with trial index, over the
/// records where `metric` is present. Expects one subject's records.
pub fn trend(records: &[TrialRecord], metric: impl Fn(&TrialRecord) -> Option<f64>) -> Option<f64> {
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        records.iter().filter_map(|r| metric(r).map(|v| (r.trial_index as f64, v))).unzip();
    spearman(&xs, &ys)
}

/// [`trend`] per subject, averaged over the subjects where it is defined.
pub fn mean_trend(records: &[TrialRecord], metric: impl Fn(&TrialRecord) -> Option<f64>) -> Option<f64> {
    let per: Vec<f64> = by_subject(records).values().filter_map(|rs| trend(rs, &metric)).collect();
    (!per.is_empty()).then(|| per.iter().sum::<f64>() / per.len() as f64)
}

pub fn write_log(path: impl AsRef<Path>, records: &[TrialRecord]) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn append_log(path: impl AsRef<Path>, record: &TrialRecord) -> io::Result<()> {
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    let mut line = serde_json::to_vec(record)?;
    line.push(b'\n');
    f.write_all(&line)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogLineError {
    /// 1-based line number.
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for LogLineError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone, Default)]
pub struct LogContents {
    pub records: Vec<TrialRecord>,
    pub errors: Vec<LogLineError>,
}

/// Read a JSON-lines log. Bad lines are collected, not fatal.
pub fn read_log(path: impl AsRef<Path>) -> io::Result<LogContents> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = LogContents::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<TrialRecord>(&line) {
            Ok(r) => out.records.push(r),
            Err(e) => out.errors.push(LogLineError { line: i + 1, message: e.to_string() }),
        }
    }
    Ok(out)
}

/// Group key used throughout the report: operator label and task.
fn groups(records: &[TrialRecord]) -> BTreeMap<(String, &'static str), Vec<&TrialRecord>> {
    let mut g: BTreeMap<(String, &'static str), Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        g.entry((r.operator.clone(), r.task.as_str())).or_default().push(r);
    }
    g
}

fn csv_string(rows: Vec<Vec<String>>) -> Result<String, MetricsError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| io::Error::other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.3}")).unwrap_or_default()
}

/// The report files, keyed by file name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReportBundle {
    pub files: BTreeMap<String, String>,
}

impl ReportBundle {
    pub fn write_to(&self, dir: impl AsRef<Path>) -> io::Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        for (name, body) in &self.files {
            fs::write(dir.join(name), body)?;
        }
        Ok(())
    }
}

/// Build task_times.csv, success_rates.csv, failure_modes.csv,
/// learning_curve.csv and summary.txt from a set of records.
pub fn build_report(records: &[TrialRecord]) -> Result<ReportBundle, MetricsError> {
    let grouped = groups(records);
    let mut files = BTreeMap::new();

    let mut rows = vec![vec!["operator".to_string(), "task".into(), "timer".into(), "n".into(), "mean_s".into(), "std_s".into()]];
    for ((op, task), rs) in &grouped {
        let owned: Vec<TrialRecord> = rs.iter().map(|r| (*r).clone()).collect();
        let s = BatchSummary::from_records(&owned, None);
        for (name, st) in &s.timers {
            rows.push(vec![
                op.clone(),
                task.to_string(),
                name.clone(),
                st.n.to_string(),
                format!("{:.3}", st.mean_s),
                format!("{:.3}", st.std_s),
            ]);
        }
    }
    files.insert("task_times.csv".into(), csv_string(rows)?);

    let mut rows = vec![vec!["operator".to_string(), "task".into(), "n_total".into(), "n_fail".into(), "p_success".into()]];
    let mut by_op: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for ((op, task), rs) in &grouped {
        let n_fail = rs.iter().filter(|r| !r.outcome.is_success()).count();
        let e = by_op.entry(op.clone()).or_default();
        e.0 += rs.len();
        e.1 += n_fail;
        rows.push(vec![
            op.clone(),
            task.to_string(),
            rs.len().to_string(),
            n_fail.to_string(),
            format!("{:.3}", success_rate(n_fail, rs.len())?),
        ]);
    }
    for (op, (n, f)) in &by_op {
        rows.push(vec![op.clone(), "all".into(), n.to_string(), f.to_string(), format!("{:.3}", success_rate(*f, *n)?)]);
    }
    files.insert("success_rates.csv".into(), csv_string(rows)?);

    let mut rows = vec![vec!["operator".to_string(), "task".into(), "mode".into(), "count".into()]];
    for ((op, task), rs) in &grouped {
        for mode in FailureMode::ALL {
            let c = rs.iter().filter(|r| r.outcome == Outcome::Failure(mode)).count();
            rows.push(vec![op.clone(), task.to_string(), mode.as_str().into(), c.to_string()]);
        }
        let t = rs.iter().filter(|r| r.outcome == Outcome::Timeout).count();
        rows.push(vec![op.clone(), task.to_string(), "Timeout".into(), t.to_string()]);
    }
    files.insert("failure_modes.csv".into(), csv_string(rows)?);

    let mut rows = vec![vec![
        "operator".to_string(),
        "task".into(),
        "subject".into(),
        "trial_index".into(),
        "task_time_s".into(),
        "t_install_s".into(),
        "macro_transit_s".into(),
    ]];
    for ((op, task), rs) in &grouped {
        let mut rs = rs.clone();
        rs.sort_by_key(|r| (r.subject, r.trial_index));
        // one row per successful trial
        for r in rs.into_iter().filter(|r| r.outcome.is_success()) {
            rows.push(vec![
                op.clone(),
                task.to_string(),
                r.subject.to_string(),
                r.trial_index.to_string(),
                fmt_opt(r.task_time_s()),
                fmt_opt(r.timer_s("t_install")),
                fmt_opt(r.macro_transit_s()),
            ]);
        }
    }
    files.insert("learning_curve.csv".into(), csv_string(rows)?);

    files.insert("summary.txt".into(), summary_text(&grouped));
    Ok(ReportBundle { files })
}

fn summary_text(grouped: &BTreeMap<(String, &'static str), Vec<&TrialRecord>>) -> String {
    use std::fmt::Write as _;
    // the expert mean per task, when present, is the novices' baseline
    let mut baselines: BTreeMap<&str, f64> = BTreeMap::new();
    for ((op, task), rs) in grouped {
        if op == "expert" {
            let owned: Vec<TrialRecord> = rs.iter().map(|r| (*r).clone()).collect();
            if let Some(s) = BatchSummary::from_records(&owned, None).task_time {
                baselines.insert(task, s.mean_s);
            }
        }
    }
    let mut out = String::new();
    for ((op, task), rs) in grouped {
        let owned: Vec<TrialRecord> = rs.iter().map(|r| (*r).clone()).collect();
        let s = BatchSummary::from_records(&owned, baselines.get(task).copied());
        let _ = writeln!(out, "[{op} / {task}]");
        let _ = writeln!(out, "  trials      {}  failed {}  timeouts {}", s.n_total, s.n_fail, s.n_timeout);
        let _ = writeln!(out, "  success     {:.1}%", s.p_success);
        if let Some(t) = s.task_time {
            let _ = writeln!(out, "  task time   {:.2} s +/- {:.2} (n={})", t.mean_s, t.std_s, t.n);
        }
        if let Some(m) = s.macro_transit {
            let _ = writeln!(out, "  macro       {:.2} s +/- {:.2}", m.mean_s, m.std_s);
        }
        for (mode, c) in &s.failure_counts {
            let _ = writeln!(out, "  {:<28}{c}", mode.as_str());
        }
        let local = mean_trend(&owned, |r| r.outcome.is_success().then(|| r.timer_s("t_install")).flatten());
        let macro_t = mean_trend(&owned, |r| r.outcome.is_success().then(|| r.macro_transit_s()).flatten());
        let _ = writeln!(out, "  trend       t_install {}  macro {}", fmt_opt(local), fmt_opt(macro_t));
        if op != "expert" {
            if let Some(b) = baselines.get(task) {
                let rounds: Vec<String> = s
                    .rounds_to_baseline
                    .iter()
                    .map(|k| k.map(|k| k.to_string()).unwrap_or_else(|| "-".into()))
                    .collect();
                let _ = writeln!(out, "  baseline    {b:.2} s, reached at trial [{}]", rounds.join(", "));
            }
        }
    }
    out
}
