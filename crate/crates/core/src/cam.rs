//! Asynchronous CAM: NOR-type match semantics, current-race match-line sense
//! amplifiers, and two completion schemes.
//!
//! Baseline completion uses a dummy entry (always matches, slower than every
//! real entry) followed by a configurable delay line. The alternative senses
//! the array's total supply current (CSCD) and acknowledges once every current
//! source has turned off. Two mechanisms shorten the current-on time:
//! feedback closes a matching entry's source as its match-line crosses the
//! sense point, and speculative sense closes a source as soon as one of the
//! last `n_tail` bits mismatches.
//!
//! Timing model, per entry `i` (subticks, request at 0):
//! * charge time `c_i = base * (1 + u_i)`, `u_i ~ U[-sigma, sigma]` drawn once
//!   per array; dummy `c_d = dummy_slowdown * max c_i`;
//! * a source that waits for the dummy turns off at
//!   `c_d + wire * (i + 1) + spread * sigma * base * h_i / s`, where `h_i ~ U[1/2, 1]`
//!   is the sense amplifier's resolution spread and `s` is 1 for a match and
//!   `mismatch_gain * k` for `k` mismatching bits;
//! * feedback turns a matching entry off at `c_i`; speculative sense turns a
//!   tail-mismatching entry off at 0.
//!
//! The search is complete when the last source is off (`t_done`).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{SimTime, TraceRecord, TraceSink, TraceViolation, SUBTICKS_PER_UNIT};
use crate::rng::SimRng;

/// Exact probability.
pub type Probability = num_rational::Ratio<u64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CamError {
    #[error("entry index {index} out of range for {n_entries} entries")]
    IndexOutOfRange { index: usize, n_entries: usize },
    #[error("word {word:#x} does not fit in {width} bits")]
    WidthMismatch { word: u64, width: u32 },
    #[error("invalid CAM configuration: {0}")]
    BadConfig(String),
    #[error("delay line cannot cover {required} subticks; the longest setting gives {max}")]
    Unsatisfiable { required: SimTime, max: SimTime },
    #[error("{case:?} current change {change} is below the sense threshold {threshold}")]
    InsufficientMargin {
        case: CurrentCase,
        change: f64,
        threshold: f64,
    },
    #[error("operation requires CSCD completion")]
    NotCscd,
}

/// Analog spread of the array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceModel {
    /// Half-width of the uniform per-entry charge-time jitter.
    pub sigma: f64,
    pub base_charge: SimTime,
    pub dummy_slowdown: f64,
    /// Dummy-off propagation per entry position, subticks.
    pub wire_per_entry: f64,
    /// Sense-amplifier resolution spread, in multiples of `sigma * base`.
    pub resolve_spread: f64,
    /// How much faster one pull-down path resolves a match-line than a
    /// match near threshold.
    pub mismatch_gain: f64,
}

impl Default for DeviceModel {
    fn default() -> Self {
        DeviceModel {
            sigma: 0.1,
            base_charge: SimTime(1000),
            dummy_slowdown: 1.2,
            wire_per_entry: 0.4,
            resolve_spread: 3.0,
            mismatch_gain: 4.0,
        }
    }
}

impl DeviceModel {
    /// No mismatch and no wire skew: every entry is identical.
    pub fn ideal() -> Self {
        DeviceModel {
            sigma: 0.0,
            wire_per_entry: 0.0,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CompletionMode {
    /// Dummy entry followed by a delay line of `setting` taps; each tap adds
    /// 1/200 of the dummy delay.
    DelayLine { setting: u8 },
    Cscd {
        /// Fraction of one entry's charging current.
        sense_threshold: f64,
        sensor_delay: SimTime,
    },
}

impl CompletionMode {
    pub fn cscd() -> Self {
        CompletionMode::Cscd {
            sense_threshold: 0.5,
            sensor_delay: SimTime(30),
        }
    }

    pub fn is_cscd(&self) -> bool {
        matches!(self, CompletionMode::Cscd { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Mechanisms {
    pub feedback: bool,
    /// Tail length for speculative sense.
    pub speculative: Option<u32>,
}

impl Mechanisms {
    pub const NONE: Mechanisms = Mechanisms {
        feedback: false,
        speculative: None,
    };

    pub fn all(n_tail: u32) -> Self {
        Mechanisms {
            feedback: true,
            speculative: Some(n_tail),
        }
    }
}

/// Handshake timing around the search itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CamTiming {
    /// Search-line setup before the request rises.
    pub sl_setup: SimTime,
    /// Match-line precharge-to-ground on the return phase; also the reset
    /// pulse width.
    pub return_phase: SimTime,
    /// CSCD clock pulse width.
    pub clock_pulse: SimTime,
    pub min_clock_pulse: SimTime,
    pub min_reset_pulse: SimTime,
}

impl Default for CamTiming {
    fn default() -> Self {
        CamTiming {
            sl_setup: SimTime(5),
            return_phase: SimTime(200),
            clock_pulse: SimTime(30),
            min_clock_pulse: SimTime(20),
            min_reset_pulse: SimTime(20),
        }
    }
}

/// Fault injection for the timing checker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CamFaults {
    pub req_before_sl: bool,
    /// Start each search this long after the previous one started instead
    /// of after its handshake completes.
    pub search_interval: Option<SimTime>,
    /// Replace the delay-line delay.
    pub forced_delay: Option<SimTime>,
}

/// Energy unit costs. Fitted knobs, not derived quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    /// Full match-line swing of one entry.
    pub e_ml: f64,
    /// Pull-down current per arbiter unit (100 subticks) of on-time.
    pub e_pulldown: f64,
    /// Per toggled search-line bit per entry.
    pub e_searchline: f64,
    pub e_cscd: f64,
    /// Delay-line tap-select stage, paid once per search.
    pub e_delay_base: f64,
    /// Per tap per edge.
    pub e_delay_step: f64,
    /// Match-line swing left by feedback, as a fraction of full swing.
    pub swing_cap: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        EnergyParams {
            e_ml: 1.0,
            e_pulldown: 0.02,
            e_searchline: 0.02,
            e_cscd: 0.05,
            e_delay_base: 0.05,
            e_delay_step: 0.01,
            swing_cap: 0.6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub e_ml_charge: f64,
    pub e_pulldown: f64,
    pub e_searchline: f64,
    pub e_dummy: f64,
    pub e_cscd: f64,
    pub total: f64,
}

impl EnergyLedger {
    fn finish(mut self) -> Self {
        self.total = self.e_ml_charge + self.e_pulldown + self.e_searchline + self.e_dummy + self.e_cscd;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CloseCause {
    None,
    Feedback,
    Speculative,
    DummyOff,
}

/// Sense-amplifier state of one entry at the end of a search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlsaState {
    /// Peak match-line level as a fraction of full swing.
    pub ml_level: f64,
    pub current_source_on: bool,
    pub close_cause: CloseCause,
    /// When the source turned off.
    pub shutoff: f64,
    /// Pull-down current duration; zero for a match.
    pub pulldown_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub match_flags: Vec<bool>,
    pub entries: Vec<MlsaState>,
    pub width: u32,
    pub mode: CompletionMode,
    pub dummy_delay: SimTime,
    /// Last current-source shutoff, dummy included.
    pub t_done: SimTime,
    /// Request rise to ack rise.
    pub t_ack: SimTime,
    /// Request rise to ack fall.
    pub cycle_time: SimTime,
    /// The delay line acknowledged before every entry resolved.
    pub false_timing: bool,
    pub energy: EnergyLedger,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CamArray {
    width: u32,
    words: Vec<u64>,
    device: DeviceModel,
    charge: Vec<f64>,
    resolve: Vec<f64>,
    dummy: f64,
    pub mode: CompletionMode,
    pub mechanisms: Mechanisms,
    pub energy: EnergyParams,
    pub timing: CamTiming,
    pub faults: CamFaults,
}

fn ceil_time(x: f64) -> SimTime {
    SimTime(x.max(0.0).ceil() as u64)
}

impl CamArray {
    /// All-zero array with per-entry analog spread drawn from `seed`.
    pub fn new(n_entries: usize, width: u32, device: DeviceModel, seed: u64) -> Result<Self, CamError> {
        if n_entries == 0 {
            return Err(CamError::BadConfig("at least one entry is required".into()));
        }
        if !(1..=63).contains(&width) {
            return Err(CamError::BadConfig(format!("width {width} outside 1..=63")));
        }
        if !(device.dummy_slowdown > 1.0) {
            return Err(CamError::BadConfig("dummy_slowdown must exceed 1".into()));
        }
        if !(0.0..1.0).contains(&device.sigma)
            || device.wire_per_entry < 0.0
            || device.resolve_spread < 0.0
            || !(device.mismatch_gain >= 1.0)
        {
            return Err(CamError::BadConfig(
                "device spreads must be non-negative, sigma < 1 and mismatch_gain >= 1".into(),
            ));
        }
        let mut rng = SimRng::new(seed);
        let base = device.base_charge.0 as f64;
        let charge: Vec<f64> = (0..n_entries)
            .map(|_| base * (1.0 + rng.uniform(-device.sigma, device.sigma)))
            .collect();
        let resolve = (0..n_entries).map(|_| 0.5 + 0.5 * rng.unit_f64()).collect();
        let dummy = device.dummy_slowdown * charge.iter().cloned().fold(0.0, f64::max);
        Ok(CamArray {
            width,
            words: vec![0; n_entries],
            device,
            charge,
            resolve,
            dummy,
            mode: CompletionMode::DelayLine { setting: 0 },
            mechanisms: Mechanisms::NONE,
            energy: EnergyParams::default(),
            timing: CamTiming::default(),
            faults: CamFaults::default(),
        })
    }

    pub fn with_mode(mut self, mode: CompletionMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_mechanisms(mut self, m: Mechanisms) -> Self {
        self.mechanisms = m;
        self
    }

    pub fn n_entries(&self) -> usize {
        self.words.len()
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn device(&self) -> &DeviceModel {
        &self.device
    }

    fn mask(&self) -> u64 {
        (1u64 << self.width) - 1
    }

    fn check_word(&self, word: u64) -> Result<(), CamError> {
        if word & !self.mask() != 0 {
            return Err(CamError::WidthMismatch {
                word,
                width: self.width,
            });
        }
        Ok(())
    }

    /// Store `word`. Writing draws no search-side energy.
    pub fn write_entry(&mut self, index: usize, word: u64) -> Result<(), CamError> {
        self.check_word(word)?;
        let n_entries = self.words.len();
        *self
            .words
            .get_mut(index)
            .ok_or(CamError::IndexOutOfRange { index, n_entries })? = word;
        Ok(())
    }

    pub fn read_entry(&self, index: usize) -> Option<u64> {
        self.words.get(index).copied()
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Fill every entry with a uniform random word.
    pub fn fill_random(&mut self, seed: u64) {
        let mut rng = SimRng::new(seed);
        for w in &mut self.words {
            *w = rng.bits(self.width);
        }
    }

    pub fn dummy_delay(&self) -> SimTime {
        ceil_time(self.dummy)
    }

    /// Request-to-ack delay of the dummy-plus-delay-line path.
    pub fn delay_line_delay(&self, setting: u8) -> SimTime {
        ceil_time(self.dummy * (200.0 + setting as f64) / 200.0)
    }

    fn validate_mechanisms(&self) -> Result<(), CamError> {
        if let Some(t) = self.mechanisms.speculative {
            if t == 0 || t > self.width {
                return Err(CamError::BadConfig(format!(
                    "speculative tail {t} must lie in 1..={}",
                    self.width
                )));
            }
        }
        if let CompletionMode::Cscd { sense_threshold, .. } = self.mode {
            if !(sense_threshold > 0.0) {
                return Err(CamError::BadConfig("sense_threshold must be positive".into()));
            }
        }
        Ok(())
    }

    fn entry_state(&self, i: usize, key: u64) -> MlsaState {
        let d = &self.device;
        let diff = self.words[i] ^ key;
        let strength = match diff.count_ones() {
            0 => 1.0,
            k => d.mismatch_gain * k as f64,
        };
        let late = self.dummy
            + d.wire_per_entry * (i + 1) as f64
            + d.resolve_spread * d.sigma * d.base_charge.0 as f64 * self.resolve[i] / strength;
        if diff == 0 {
            let (ml_level, shutoff, close_cause) = if self.mechanisms.feedback {
                (self.energy.swing_cap, self.charge[i], CloseCause::Feedback)
            } else {
                (1.0, late, CloseCause::DummyOff)
            };
            MlsaState {
                ml_level,
                current_source_on: false,
                close_cause,
                shutoff,
                pulldown_time: 0.0,
            }
        } else {
            let tail = self
                .mechanisms
                .speculative
                .map(|t| diff & ((1u64 << t) - 1) != 0)
                .unwrap_or(false);
            let (shutoff, close_cause) = if tail {
                (0.0, CloseCause::Speculative)
            } else {
                (late, CloseCause::DummyOff)
            };
            MlsaState {
                ml_level: 0.0,
                current_source_on: false,
                close_cause,
                shutoff,
                pulldown_time: shutoff,
            }
        }
    }

    /// One full four-phase search.
    pub fn search(&self, key: u64) -> Result<SearchResult, CamError> {
        self.check_word(key)?;
        self.validate_mechanisms()?;
        let entries: Vec<MlsaState> = (0..self.n_entries()).map(|i| self.entry_state(i, key)).collect();
        let match_flags = self.words.iter().map(|&w| w == key).collect();
        let last = entries.iter().map(|e| e.shutoff).fold(self.dummy, f64::max);
        let t_done = ceil_time(last);
        let r = self.timing.return_phase;
        let (t_ack, cycle_time, false_timing) = match self.mode {
            CompletionMode::DelayLine { setting } => {
                let delay = self.faults.forced_delay.unwrap_or_else(|| self.delay_line_delay(setting));
                // the taps past the dummy are traversed again on the return edge
                let taps = delay.saturating_sub(self.dummy_delay());
                (delay, delay + r + taps, delay < t_done)
            }
            CompletionMode::Cscd { sensor_delay, .. } => {
                let ack = t_done + sensor_delay;
                (ack, ack + r, false)
            }
        };
        let mut result = SearchResult {
            match_flags,
            entries,
            width: self.width,
            mode: self.mode,
            dummy_delay: self.dummy_delay(),
            t_done,
            t_ack,
            cycle_time,
            false_timing,
            energy: EnergyLedger::default(),
        };
        result.energy = energy_of_search(&result, &self.energy);
        Ok(result)
    }

    /// Back-to-back searches; records the handshake when `trace` is given.
    pub fn search_sequence(&self, keys: &[u64], trace: TraceSink<'_>) -> Result<Vec<SearchResult>, CamError> {
        let tm = self.timing;
        let mut recs = Vec::new();
        let mut out = Vec::with_capacity(keys.len());
        let mut start = SimTime::ZERO;
        for &key in keys {
            let res = self.search(key)?;
            let (t_sl, t_req) = if self.faults.req_before_sl {
                (start + tm.sl_setup, start)
            } else {
                (start, start + tm.sl_setup)
            };
            let t_ack = t_req + res.t_ack;
            let t_end = t_req + res.cycle_time;
            let t_reset = t_ack;
            recs.push(TraceRecord::new(t_sl, "cam.sl", "valid", 0, 1));
            recs.push(TraceRecord::new(t_req, "cam", "req", 0, 1));
            if res.mode.is_cscd() {
                recs.push(TraceRecord::new(t_ack, "cscd", "clk", 0, 1));
                recs.push(TraceRecord::new(t_ack + tm.clock_pulse, "cscd", "clk", 1, 0));
            }
            recs.push(TraceRecord::new(t_ack, "cam", "ack", 0, 1));
            recs.push(TraceRecord::new(t_ack, "cam", "req", 1, 0));
            recs.push(TraceRecord::new(t_ack, "cam.sl", "valid", 1, 0));
            recs.push(TraceRecord::new(t_reset, "cam", "reset", 0, 1));
            recs.push(TraceRecord::new(t_reset + tm.return_phase, "cam", "reset", 1, 0));
            recs.push(TraceRecord::new(t_end, "cam", "ack", 1, 0));
            start = match self.faults.search_interval {
                Some(iv) => start + iv,
                None => t_end,
            };
            out.push(res);
        }
        if let Some(sink) = trace {
            recs.sort_by_key(|r| r.time);
            for r in recs {
                sink.push(r);
            }
        }
        Ok(out)
    }
}

/// Energy of a finished search. Pure in its inputs.
pub fn energy_of_search(result: &SearchResult, params: &EnergyParams) -> EnergyLedger {
    let unit = SUBTICKS_PER_UNIT as f64;
    let n = result.entries.len() as f64;
    let mut e = EnergyLedger {
        e_ml_charge: result.entries.iter().map(|s| s.ml_level * params.e_ml).sum(),
        e_pulldown: result
            .entries
            .iter()
            .map(|s| s.pulldown_time / unit * params.e_pulldown)
            .sum(),
        e_searchline: result.width as f64 * n * params.e_searchline,
        e_dummy: params.e_ml,
        ..Default::default()
    };
    match result.mode {
        CompletionMode::DelayLine { setting } => {
            e.e_dummy += params.e_delay_base + 2.0 * setting as f64 * params.e_delay_step;
        }
        CompletionMode::Cscd { .. } => e.e_cscd = params.e_cscd,
    }
    e.finish()
}

/// `(2^W - 2^(W - n) + 1) / 2^W`: a uniform key either mismatches somewhere in
/// the last `n` bits or matches outright.
pub fn speculative_close_probability(width: u32, n_tail: u32) -> Result<Probability, CamError> {
    if width == 0 || width > 62 || n_tail > width {
        return Err(CamError::BadConfig(format!(
            "need 1 <= W <= 62 and n_tail <= W, got W={width}, n_tail={n_tail}"
        )));
    }
    let full = 1u64 << width;
    Ok(Probability::new(full - (1u64 << (width - n_tail)) + 1, full))
}

pub fn cycle_time_model(array: &CamArray, key: u64) -> Result<SimTime, CamError> {
    Ok(array.search(key)?.cycle_time)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub setting: u8,
    pub delay: SimTime,
    pub dummy_delay: SimTime,
    /// Delay over dummy delay.
    pub ratio: f64,
}

/// Smallest delay-line setting that never acknowledges early over `trials`
/// searches, alternating random keys with copies of random stored words so
/// slow match resolution is exercised. Uses the array's own mechanisms.
pub fn calibrate_delay_line(array: &CamArray, trials: u64, seed: u64) -> Result<Calibration, CamError> {
    if trials == 0 {
        return Err(CamError::BadConfig("calibration needs at least one trial".into()));
    }
    let mut rng = SimRng::new(seed);
    let mut probe = array.clone().with_mode(CompletionMode::DelayLine { setting: 0 });
    probe.faults.forced_delay = None;
    let mut required = SimTime::ZERO;
    for t in 0..trials {
        let key = if t % 2 == 0 {
            rng.bits(array.width)
        } else {
            probe.words[rng.below(probe.n_entries() as u64) as usize]
        };
        required = required.max(probe.search(key)?.t_done);
    }
    let setting = (0..=u8::MAX)
        .find(|&s| probe.delay_line_delay(s) >= required)
        .ok_or(CamError::Unsatisfiable {
            required,
            max: probe.delay_line_delay(u8::MAX),
        })?;
    let delay = probe.delay_line_delay(setting);
    Ok(Calibration {
        setting,
        delay,
        dummy_delay: probe.dummy_delay(),
        ratio: delay.0 as f64 / probe.dummy_delay().0 as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CurrentCase {
    AllMatch,
    MismatchInTail,
    MismatchInHead,
    Random,
}

impl CurrentCase {
    pub const ALL: [CurrentCase; 4] = [
        CurrentCase::AllMatch,
        CurrentCase::MismatchInTail,
        CurrentCase::MismatchInHead,
        CurrentCase::Random,
    ];
}

/// Supply current drawn by a charging match-line and by a mismatching
/// entry's pull-down path, relative to the dummy entry.
pub const MATCH_CURRENT: f64 = 1.0;
pub const MISMATCH_CURRENT: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginReport {
    pub cases: Vec<(CurrentCase, f64)>,
    pub weakest: CurrentCase,
    pub threshold: f64,
    /// Weakest change over the threshold.
    pub margin: f64,
}

/// Largest drop in array current the CSCD must see, per pattern case.
/// Sources closed at t=0 never contribute.
pub fn worst_case_current_margin(array: &CamArray, seed: u64) -> Result<MarginReport, CamError> {
    let CompletionMode::Cscd { sense_threshold, .. } = array.mode else {
        return Err(CamError::NotCscd);
    };
    let mut rng = SimRng::new(seed);
    let key = rng.bits(array.width);
    let top = 1u64 << (array.width - 1);
    let change = |words: Vec<u64>| -> Result<f64, CamError> {
        let mut probe = array.clone();
        probe.words = words;
        let res = probe.search(key)?;
        Ok(res.entries.iter().zip(&res.match_flags).fold(1.0, |acc, (s, &m)| {
            acc + match (m, s.shutoff > 0.0) {
                (_, false) => 0.0,
                (true, true) => MATCH_CURRENT,
                (false, true) => MISMATCH_CURRENT,
            }
        }))
    };
    let n = array.n_entries();
    let mut cases = Vec::with_capacity(4);
    for case in CurrentCase::ALL {
        let words = match case {
            CurrentCase::AllMatch => vec![key; n],
            CurrentCase::MismatchInTail => vec![key ^ 1; n],
            CurrentCase::MismatchInHead => vec![key ^ top; n],
            CurrentCase::Random => (0..n).map(|_| rng.bits(array.width)).collect(),
        };
        cases.push((case, change(words)?));
    }
    let (weakest, min) = cases
        .iter()
        .cloned()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("four cases");
    if min < sense_threshold {
        return Err(CamError::InsufficientMargin {
            case: weakest,
            change: min,
            threshold: sense_threshold,
        });
    }
    Ok(MarginReport {
        cases,
        weakest,
        threshold: sense_threshold,
        margin: min / sense_threshold,
    })
}

/// Bundled-data (search lines valid strictly before each request), CSCD
/// clock pulse width and spacing, and reset pulse width.
pub fn check_cam_timing(trace: &[TraceRecord], timing: &CamTiming) -> Vec<TraceViolation> {
    let mut out = Vec::new();
    let mut sl_valid_since: Option<SimTime> = None;
    let mut clk_rise: Option<SimTime> = None;
    let mut last_clk_rise: Option<SimTime> = None;
    let mut reset_rise: Option<SimTime> = None;
    let mut v = |constraint: &str, time: SimTime, detail: String| {
        out.push(TraceViolation {
            constraint: constraint.into(),
            time,
            detail,
        })
    };
    for r in trace {
        match (r.component.as_str(), r.signal.as_str(), r.new) {
            ("cam.sl", "valid", 1) => sl_valid_since = Some(r.time),
            ("cam.sl", "valid", _) => sl_valid_since = None,
            ("cam", "req", 1) => match sl_valid_since {
                Some(t) if t < r.time => {}
                _ => v("bundled-data", r.time, format!("request rose at {} before search lines were valid", r.time)),
            },
            ("cscd", "clk", 1) => {
                if let Some(prev) = last_clk_rise {
                    if r.time - prev < timing.min_clock_pulse {
                        v(
                            "clock-pulse-width",
                            r.time,
                            format!("clock rose {} subticks after the previous rise", (r.time - prev).0),
                        );
                    }
                }
                clk_rise = Some(r.time);
                last_clk_rise = Some(r.time);
            }
            ("cscd", "clk", 0) => {
                if let Some(t) = clk_rise.take() {
                    if r.time - t < timing.min_clock_pulse {
                        v("clock-pulse-width", r.time, format!("clock high for {} subticks", (r.time - t).0));
                    }
                }
            }
            ("cam", "reset", 1) => reset_rise = Some(r.time),
            ("cam", "reset", 0) => {
                if let Some(t) = reset_rise.take() {
                    if r.time - t < timing.min_reset_pulse {
                        v("reset-pulse-width", r.time, format!("reset high for {} subticks", (r.time - t).0));
                    }
                }
            }
            _ => {}
        }
    }
    out
}
