//! Deterministic discrete-event kernel.
//!
//! Time is an integer count of subticks. One arbiter unit delay (the decision
//! latency of a two-input arbiter) is [`SUBTICKS_PER_UNIT`] subticks, so every
//! latency quoted in arbiter units is an exact integer multiple.
//!
//! Events scheduled for the same instant are dispatched in id (creation)
//! order, which makes every run a pure function of its inputs.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};
use std::fmt;
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Subticks per arbiter unit delay.
pub const SUBTICKS_PER_UNIT: u64 = 100;

/// A point in simulated time, in subticks.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_units(units: u64) -> Self {
        SimTime(units * SUBTICKS_PER_UNIT)
    }

    pub const fn subticks(self) -> u64 {
        self.0
    }

    pub fn as_units(self) -> f64 {
        self.0 as f64 / SUBTICKS_PER_UNIT as f64
    }

    /// Whole units, if this time lies exactly on a unit boundary.
    pub fn exact_units(self) -> Option<u64> {
        self.0.is_multiple_of(SUBTICKS_PER_UNIT).then_some(self.0 / SUBTICKS_PER_UNIT)
    }

    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub type EventId = u64;

/// Identifies the component an event is addressed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ComponentId(pub u32);

#[derive(Debug, Clone, PartialEq)]
pub struct Event<P> {
    pub id: EventId,
    pub at: SimTime,
    pub target: ComponentId,
    pub payload: P,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KernelError {
    #[error("cannot schedule at t={at} when the kernel is already at t={now}")]
    SchedulingInPast { at: SimTime, now: SimTime },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunStats {
    pub dispatched: u64,
    pub final_time: SimTime,
}

/// Single-threaded event queue. Owns its pending events and the clock.
pub struct Kernel<P> {
    now: SimTime,
    next_id: EventId,
    queue: BinaryHeap<Reverse<(SimTime, EventId)>>,
    payloads: std::collections::HashMap<EventId, (ComponentId, P)>,
    dispatched: u64,
}

impl<P> Default for Kernel<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P> Kernel<P> {
    pub fn new() -> Self {
        Kernel {
            now: SimTime::ZERO,
            next_id: 0,
            queue: BinaryHeap::new(),
            payloads: std::collections::HashMap::new(),
            dispatched: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    /// Queue `payload` for `target` at `at`. Returns the assigned event id.
    pub fn schedule(
        &mut self,
        at: SimTime,
        target: ComponentId,
        payload: P,
    ) -> Result<EventId, KernelError> {
        if at < self.now {
            return Err(KernelError::SchedulingInPast { at, now: self.now });
        }
        let id = self.next_id;
        self.next_id += 1;
        self.queue.push(Reverse((at, id)));
        self.payloads.insert(id, (target, payload));
        Ok(id)
    }

    /// Remove and return the next event if it fires no later than `limit`.
    pub fn pop_until(&mut self, limit: SimTime) -> Option<Event<P>> {
        let Reverse((at, id)) = *self.queue.peek()?;
        if at > limit {
            return None;
        }
        self.queue.pop();
        let (target, payload) = self
            .payloads
            .remove(&id)
            .expect("queued event has a payload");
        self.now = at;
        self.dispatched += 1;
        Some(Event {
            id,
            at,
            target,
            payload,
        })
    }

    /// Dispatch every event with `at <= limit` to `handler`, which may schedule
    /// further events. The clock ends at `limit` (or later, if it already was).
    pub fn run_until<F>(&mut self, limit: SimTime, mut handler: F) -> RunStats
    where
        F: FnMut(&mut Kernel<P>, Event<P>),
    {
        let before = self.dispatched;
        while let Some(ev) = self.pop_until(limit) {
            handler(self, ev);
        }
        if self.now < limit {
            self.now = limit;
        }
        RunStats {
            dispatched: self.dispatched - before,
            final_time: self.now,
        }
    }

    /// Like [`Kernel::run_until`] but stops when the queue drains; the clock
    /// stays at the last dispatched event.
    pub fn run_to_completion<F>(&mut self, mut handler: F) -> RunStats
    where
        F: FnMut(&mut Kernel<P>, Event<P>),
    {
        let before = self.dispatched;
        while let Some(ev) = self.pop_until(SimTime(u64::MAX)) {
            handler(self, ev);
        }
        RunStats {
            dispatched: self.dispatched - before,
            final_time: self.now,
        }
    }
}

/// One signal transition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub time: SimTime,
    pub component: String,
    pub signal: String,
    pub old: u64,
    pub new: u64,
}

impl TraceRecord {
    pub fn new(
        time: SimTime,
        component: impl Into<String>,
        signal: impl Into<String>,
        old: u64,
        new: u64,
    ) -> Self {
        TraceRecord {
            time,
            component: component.into(),
            signal: signal.into(),
            old,
            new,
        }
    }
}

/// Optional, bounded trace buffer. When full, the oldest records are dropped.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    capacity: Option<usize>,
    records: VecDeque<TraceRecord>,
    dropped: u64,
}

impl Trace {
    /// Unbounded trace.
    pub fn unbounded() -> Self {
        Trace {
            capacity: None,
            ..Default::default()
        }
    }

    /// Ring buffer keeping at most `capacity` records.
    pub fn ring(capacity: usize) -> Self {
        Trace {
            capacity: Some(capacity),
            ..Default::default()
        }
    }

    pub fn push(&mut self, rec: TraceRecord) {
        debug_assert!(
            self.records.back().is_none_or(|last| last.time <= rec.time),
            "trace records must be pushed in time order"
        );
        if let Some(cap) = self.capacity {
            if cap == 0 {
                self.dropped += 1;
                return;
            }
            if self.records.len() == cap {
                self.records.pop_front();
                self.dropped += 1;
            }
        }
        self.records.push_back(rec);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    pub fn records(&self) -> impl Iterator<Item = &TraceRecord> {
        self.records.iter()
    }

    pub fn into_vec(self) -> Vec<TraceRecord> {
        self.records.into()
    }
}

/// Optional trace sink; `None` costs a branch per transition.
pub type TraceSink<'a> = Option<&'a mut Trace>;

pub const TRACE_CSV_HEADER: &str = "time,component,signal,old,new";

/// Render records as CSV (`time,component,signal,old,new`, LF line endings).
pub fn trace_to_csv<'a>(records: impl IntoIterator<Item = &'a TraceRecord>) -> String {
    let mut out = String::from(TRACE_CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.time.0, r.component, r.signal, r.old, r.new
        ));
    }
    out
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TraceParseError {
    #[error("missing or wrong header, expected `{TRACE_CSV_HEADER}`")]
    Header,
    #[error("line {line}: {reason}")]
    Line { line: usize, reason: String },
}

pub fn trace_from_csv(text: &str) -> Result<Vec<TraceRecord>, TraceParseError> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(TRACE_CSV_HEADER) {
        return Err(TraceParseError::Header);
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 2;
        let bad = |reason: &str| TraceParseError::Line {
            line: lineno,
            reason: reason.to_string(),
        };
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 5 {
            return Err(bad("expected 5 columns"));
        }
        let num = |s: &str| s.trim().parse::<u64>().map_err(|_| bad("not an integer"));
        out.push(TraceRecord {
            time: SimTime(num(cols[0])?),
            component: cols[1].to_string(),
            signal: cols[2].to_string(),
            old: num(cols[3])?,
            new: num(cols[4])?,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Four-phase handshake channels
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Idle,
    ReqHigh,
    AckHigh,
    ReqLow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HandshakeAction {
    RaiseReq,
    RaiseAck,
    LowerReq,
    LowerAck,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolViolation {
    #[error("{action:?} is illegal in phase {phase:?}")]
    IllegalTransition {
        phase: Phase,
        action: HandshakeAction,
    },
    #[error("req raised at t={at} without valid bundled data")]
    DataNotValid { at: SimTime },
    #[error("transition at t={at} precedes the previous one at t={last}")]
    TimeReversal { at: SimTime, last: SimTime },
}

/// A req/ack channel obeying the four-phase (return-to-zero) protocol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HandshakeChannel {
    name: String,
    phase: Phase,
    bundled: bool,
    data_valid: bool,
    data_valid_at: Option<SimTime>,
    /// Times of the last req↑, ack↑, req↓, ack↓.
    last: [Option<SimTime>; 4],
}

impl HandshakeChannel {
    pub fn new(name: impl Into<String>) -> Self {
        HandshakeChannel {
            name: name.into(),
            phase: Phase::Idle,
            bundled: false,
            data_valid: false,
            data_valid_at: None,
            last: [None; 4],
        }
    }

    /// A channel carrying bundled data: req may only rise after the data.
    pub fn bundled(name: impl Into<String>) -> Self {
        HandshakeChannel {
            bundled: true,
            ..Self::new(name)
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn data_valid(&self) -> bool {
        self.data_valid
    }

    pub fn last_transitions(&self) -> [Option<SimTime>; 4] {
        self.last
    }

    fn latest(&self) -> Option<SimTime> {
        self.last
            .iter()
            .flatten()
            .copied()
            .chain(self.data_valid_at)
            .max()
    }

    pub fn set_data_valid(&mut self, valid: bool, now: SimTime, trace: TraceSink<'_>) {
        if valid == self.data_valid {
            return;
        }
        if let Some(t) = trace {
            t.push(TraceRecord::new(
                now,
                &self.name,
                "data_valid",
                self.data_valid as u64,
                valid as u64,
            ));
        }
        self.data_valid = valid;
        self.data_valid_at = valid.then_some(now);
    }

    pub fn advance(
        &mut self,
        action: HandshakeAction,
        now: SimTime,
        trace: TraceSink<'_>,
    ) -> Result<Phase, ProtocolViolation> {
        use HandshakeAction::*;
        use Phase::*;
        if let Some(last) = self.latest() {
            if now < last {
                return Err(ProtocolViolation::TimeReversal { at: now, last });
            }
        }
        let (next, slot, signal, new) = match (self.phase, action) {
            (Idle, RaiseReq) => (ReqHigh, 0, "req", 1),
            (ReqHigh, RaiseAck) => (AckHigh, 1, "ack", 1),
            (AckHigh, LowerReq) => (ReqLow, 2, "req", 0),
            (ReqLow, LowerAck) => (Idle, 3, "ack", 0),
            (phase, action) => return Err(ProtocolViolation::IllegalTransition { phase, action }),
        };
        if action == RaiseReq && self.bundled {
            match self.data_valid_at {
                Some(t) if self.data_valid && t < now => {}
                _ => return Err(ProtocolViolation::DataNotValid { at: now }),
            }
        }
        if let Some(t) = trace {
            t.push(TraceRecord::new(now, &self.name, signal, 1 - new, new));
        }
        self.phase = next;
        self.last[slot] = Some(now);
        Ok(next)
    }
}

/// A protocol problem found by inspecting a recorded trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceViolation {
    pub constraint: String,
    pub time: SimTime,
    pub detail: String,
}

/// Check every component's `req`/`ack` projection against the cycle
/// `(req↑ ack↑ req↓ ack↓)*`, and that `data_valid` rises strictly before each
/// `req↑` on components that record it.
pub fn check_handshake_trace(records: &[TraceRecord]) -> Vec<TraceViolation> {
    use std::collections::BTreeMap;
    let mut state: BTreeMap<&str, (u8, Option<SimTime>, bool)> = BTreeMap::new();
    let mut out = Vec::new();
    let mut prev_time = SimTime::ZERO;
    for r in records {
        if r.time < prev_time {
            out.push(TraceViolation {
                constraint: "trace-order".into(),
                time: r.time,
                detail: format!("record at {} follows one at {}", r.time, prev_time),
            });
        }
        prev_time = prev_time.max(r.time);
        let entry = state.entry(r.component.as_str()).or_insert((0, None, false));
        match r.signal.as_str() {
            "data_valid" => {
                entry.2 = true;
                entry.1 = (r.new != 0).then_some(r.time);
            }
            "req" | "ack" => {
                let expected = match entry.0 {
                    0 => ("req", 0, 1),
                    1 => ("ack", 0, 1),
                    2 => ("req", 1, 0),
                    _ => ("ack", 1, 0),
                };
                if (r.signal.as_str(), r.old, r.new) != expected {
                    out.push(TraceViolation {
                        constraint: "four-phase".into(),
                        time: r.time,
                        detail: format!(
                            "{}: saw {} {}->{}, expected {} {}->{}",
                            r.component, r.signal, r.old, r.new, expected.0, expected.1, expected.2
                        ),
                    });
                    continue;
                }
                if entry.0 == 0 && entry.2 {
                    match entry.1 {
                        Some(t) if t < r.time => {}
                        _ => out.push(TraceViolation {
                            constraint: "bundled-data".into(),
                            time: r.time,
                            detail: format!("{}: req rose before data was valid", r.component),
                        }),
                    }
                }
                entry.0 = (entry.0 + 1) % 4;
            }
            _ => {}
        }
    }
    out
}
