//! Behavioural model of the HAT encoding pipeline.
//!
//! One level per four-way arbiter: masking gate, arbiter, first static HC
//! latch, QDI encoder and completion detection. The per-level codes join in
//! a second HC stage into one dual-rail packet, and the ack generator decides
//! which levels give up their grant. Timing is a sequential unit-delay
//! timeline; [`check_timing`] audits the resulting trace.
//!
//! Trace signals (all values raw `u64`):
//! * `neuron{i}/req`: request level.
//! * `arb.L{l}/out`: one-hot grant of the level-`l` arbiter (0 = reset).
//! * `hc1.L{l}/latch`: 1 = closed, 0 = open.
//! * `cd_enc.L{l}/D`: validity of the encoded level code.
//! * `cd_mask.L{l}/V`: post-masking validity; logged on every settle, even
//!   when unchanged, for levels below the top.
//! * `hc2/packet`: dual-rail packet, bit `i` on rails `2i` (true), `2i+1`
//!   (false); 0 is NULL.
//! * `ackgen/ack`: ack level.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{SimTime, TraceRecord, TraceSink, TraceViolation};
use crate::workloads::Spike;

pub fn c_element(a: bool, b: bool, prev: bool) -> bool {
    if a == b {
        a
    } else {
        prev
    }
}

/// A dual-rail word. Bit `i` is `(true_rail >> i & 1, false_rail >> i & 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DualRailValue {
    pub width: u32,
    pub true_rail: u32,
    pub false_rail: u32,
}

impl DualRailValue {
    pub fn null(width: u32) -> Self {
        DualRailValue {
            width,
            true_rail: 0,
            false_rail: 0,
        }
    }

    pub fn from_value(value: u32, width: u32) -> Self {
        let mask = Self::mask(width);
        DualRailValue {
            width,
            true_rail: value & mask,
            false_rail: !value & mask,
        }
    }

    fn mask(width: u32) -> u32 {
        if width >= 32 {
            u32::MAX
        } else {
            (1 << width) - 1
        }
    }

    pub fn is_null(&self) -> bool {
        self.true_rail == 0 && self.false_rail == 0
    }

    /// No bit has both rails high.
    pub fn is_safe(&self) -> bool {
        self.true_rail & self.false_rail == 0
    }

    /// Every bit has exactly one rail high.
    pub fn is_complete(&self) -> bool {
        (self.true_rail ^ self.false_rail) == Self::mask(self.width)
    }

    pub fn value(&self) -> Option<u32> {
        self.is_complete().then_some(self.true_rail)
    }

    /// `self` becomes the high-order part.
    pub fn concat(&self, low: &DualRailValue) -> DualRailValue {
        DualRailValue {
            width: self.width + low.width,
            true_rail: (self.true_rail << low.width) | low.true_rail,
            false_rail: (self.false_rail << low.width) | low.false_rail,
        }
    }

    /// Interleaved wire encoding used in traces.
    pub fn to_raw(&self) -> u64 {
        (0..self.width).fold(0u64, |acc, i| {
            acc | ((self.true_rail as u64 >> i & 1) << (2 * i))
                | ((self.false_rail as u64 >> i & 1) << (2 * i + 1))
        })
    }

    pub fn from_raw(raw: u64, width: u32) -> Self {
        let (mut t, mut f) = (0u32, 0u32);
        for i in 0..width {
            t |= ((raw >> (2 * i)) & 1) as u32 * (1 << i);
            f |= ((raw >> (2 * i + 1)) & 1) as u32 * (1 << i);
        }
        DualRailValue {
            width,
            true_rail: t,
            false_rail: f,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("encoder input {0:#06b} has more than one bit set")]
    NotOneHot(u8),
}

/// One-hot position `k` of a 4-bit input to the 2-bit dual-rail code of `k`;
/// all-zero to NULL.
pub fn qdi_encode(one_hot: u8) -> Result<DualRailValue, EncodeError> {
    let x = one_hot & 0xf;
    match x.count_ones() {
        0 => Ok(DualRailValue::null(2)),
        1 => Ok(DualRailValue::from_value(x.trailing_zeros(), 2)),
        _ => Err(EncodeError::NotOneHot(x)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CdKind {
    OrBased,
    XorBased,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CdBlock {
    pub kind: CdKind,
    pub width: u32,
}

/// OR-based: any input high. XOR-based: exactly one input high, so two
/// overlapping grants read as invalid.
pub fn completion_detect(block: CdBlock, inputs: u32) -> bool {
    let x = inputs & DualRailValue::mask(block.width);
    match block.kind {
        CdKind::OrBased => x != 0,
        CdKind::XorBased => x.count_ones() == 1,
    }
}

/// Dual-rail form: OR-based flags any rail activity, XOR-based flags a
/// complete code (each bit has exactly one rail up).
pub fn completion_detect_dual(block: CdBlock, value: &DualRailValue) -> bool {
    match block.kind {
        CdKind::OrBased => !value.is_null(),
        CdKind::XorBased => value.is_complete(),
    }
}

/// Masked-request latches of one masking gate.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MaskingStage {
    masked: Vec<bool>,
}

impl MaskingStage {
    pub fn new(width: usize) -> Self {
        MaskingStage {
            masked: vec![false; width],
        }
    }

    pub fn state(&self) -> &[bool] {
        &self.masked
    }
}

/// `masked[i] = C(req[i], req[i] & (grant | masked[i]), masked[i])`: a grant
/// sets a latch, only the request's own fall clears it.
pub fn mask_requests(reqs: &[bool], cluster_grant: bool, stage: &mut MaskingStage) -> Vec<bool> {
    if stage.masked.len() < reqs.len() {
        stage.masked.resize(reqs.len(), false);
    }
    for (i, &r) in reqs.iter().enumerate() {
        let prev = stage.masked[i];
        stage.masked[i] = c_element(r, r && (cluster_grant || prev), prev);
    }
    stage.masked[..reqs.len()].to_vec()
}

/// Validity flags seen by the ack generator. `v[l]` is the post-masking flag
/// of level `l` (index 0, the top, is unused); `d[l]` the post-encoder flag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AckGeneratorInputs {
    pub v: Vec<bool>,
    pub d: Vec<bool>,
}

impl AckGeneratorInputs {
    pub fn three_level(v_m: bool, v_l: bool, d_h: bool, d_m: bool, d_l: bool) -> Self {
        AckGeneratorInputs {
            v: vec![false, v_m, v_l],
            d: vec![d_h, d_m, d_l],
        }
    }

    pub fn levels(&self) -> usize {
        self.d.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AckGeneratorState {
    pub ack: bool,
}

/// Result of one ack-generator evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AckStep {
    pub ack: bool,
    /// Per level: whether its grant is released.
    pub resets: Vec<bool>,
}

/// On capture the ack rises and the lowest level always resets; level `l`
/// resets only if every level below it reports no valid request.
pub fn ack_generator_step(inputs: &AckGeneratorInputs, packet_captured: bool, state: &mut AckGeneratorState) -> AckStep {
    let n = inputs.levels();
    if !packet_captured {
        return AckStep {
            ack: state.ack,
            resets: vec![false; n],
        };
    }
    state.ack = true;
    let resets = (0..n)
        .map(|l| inputs.v.iter().skip(l + 1).all(|&v| !v))
        .collect();
    AckStep {
        ack: true,
        resets,
    }
}

/// A captured output packet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelinePacket {
    pub address: u32,
    pub bits: u32,
    pub valid: bool,
}

impl PipelinePacket {
    /// Join per-level codes, top level first.
    pub fn assemble(codes: &[DualRailValue]) -> (PipelinePacket, DualRailValue) {
        let word = codes
            .iter()
            .fold(DualRailValue::null(0), |acc, c| acc.concat(c));
        let valid = codes.iter().all(|c| c.is_complete());
        (
            PipelinePacket {
                address: word.true_rail,
                bits: word.width,
                valid,
            },
            word,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimedPacket {
    pub packet: PipelinePacket,
    pub neuron: u32,
    pub t_request: SimTime,
    pub t_output: SimTime,
}

/// Gate delays in subticks. Defaults: four-input arbiter two units, every
/// other element one subtick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineDelays {
    pub gates: SimTime,
    pub arbiter: SimTime,
    pub latch: SimTime,
    pub latch_close: SimTime,
    pub latch_open: SimTime,
    pub encoder: SimTime,
    pub cd_encoder: SimTime,
    pub cd_mask: SimTime,
    pub c_element: SimTime,
    pub hc2: SimTime,
    pub cd_packet: SimTime,
    pub ack_gen: SimTime,
    pub ack_to_reset: SimTime,
    pub neuron_release: SimTime,
    /// Fault: HC1 latches reopen on the ack without waiting for their input
    /// channel to reset.
    pub skip_input_handshake: bool,
}

impl Default for PipelineDelays {
    fn default() -> Self {
        let one = SimTime(1);
        PipelineDelays {
            gates: one,
            arbiter: SimTime::from_units(2),
            latch: one,
            latch_close: one,
            latch_open: one,
            encoder: one,
            cd_encoder: one,
            cd_mask: one,
            c_element: one,
            hc2: one,
            cd_packet: one,
            ack_gen: one,
            ack_to_reset: one,
            neuron_release: one,
            skip_input_handshake: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PipelineError {
    #[error("pipeline needs 1..=10 levels, got {0}")]
    BadLevels(u32),
    #[error("neuron {neuron} out of range for {n} neurons")]
    NeuronOutOfRange { neuron: u32, n: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PipelineRun {
    pub packets: Vec<TimedPacket>,
    /// Arbitrations per level, top first.
    pub arbitrations: Vec<u64>,
}

fn digit(neuron: u32, levels: u32, l: u32) -> u32 {
    (neuron >> (2 * (levels - 1 - l))) & 3
}

/// Neurons under the level-`l` cluster containing `neuron` (depth 0 = all).
fn cluster(neuron: u32, levels: u32, depth: u32) -> (u32, u32) {
    let shift = 2 * (levels - depth);
    let lo = if shift >= 32 { 0 } else { (neuron >> shift) << shift };
    (lo, lo + (1u32 << shift))
}

/// Run the pipeline for `4^levels` neurons. Among waiting requests the
/// earliest wins, ties to the lowest id; held grants confine the choice to
/// their cluster.
pub fn run_pipeline(
    levels: u32,
    events: &[Spike],
    delays: &PipelineDelays,
    trace: TraceSink<'_>,
) -> Result<PipelineRun, PipelineError> {
    if levels == 0 || levels > 10 {
        return Err(PipelineError::BadLevels(levels));
    }
    let n = 1u32 << (2 * levels);
    if let Some(s) = events.iter().find(|s| s.neuron >= n) {
        return Err(PipelineError::NeuronOutOfRange { neuron: s.neuron, n });
    }
    let lv = levels as usize;
    let d = *delays;
    let mut spikes = events.to_vec();
    spikes.sort();
    let mut recs: Vec<TraceRecord> = Vec::new();
    let mut run = PipelineRun {
        packets: Vec::new(),
        arbitrations: vec![0; lv],
    };
    let mut pending: BTreeMap<u32, VecDeque<SimTime>> = BTreeMap::new();
    let mut codes = vec![DualRailValue::null(2); lv];
    let mut held = 0usize;
    let mut last: Option<u32> = None;
    let mut ack_state = AckGeneratorState::default();
    let mut now = SimTime::ZERO;
    let mut next = 0usize;

    loop {
        while next < spikes.len() && spikes[next].t <= now {
            let s = spikes[next];
            recs.push(TraceRecord::new(s.t, format!("neuron{}", s.neuron), "req", 0, 1));
            pending.entry(s.neuron).or_default().push_back(s.t);
            next += 1;
        }
        if pending.is_empty() {
            if next == spikes.len() {
                break;
            }
            now = now.max(spikes[next].t);
            held = 0;
            continue;
        }
        let (lo, hi) = match last {
            Some(prev) if held > 0 => cluster(prev, levels, held as u32),
            _ => (0, n),
        };
        let (&winner, q) = pending
            .range(lo..hi)
            .min_by_key(|(&id, q)| (q[0], id))
            .expect("held cluster still has valid requests");
        let t_request = q[0];

        // Arbitrate from the first released level down.
        let mut t = now;
        let mut d_ready = now;
        for l in held..lv {
            run.arbitrations[l] += 1;
            let one_hot = 1u8 << digit(winner, levels, l as u32);
            let t_arb = t + d.gates + d.arbiter;
            recs.push(TraceRecord::new(t_arb, format!("arb.L{l}"), "out", 0, one_hot as u64));
            recs.push(TraceRecord::new(t_arb + d.latch_close, format!("hc1.L{l}"), "latch", 0, 1));
            codes[l] = qdi_encode(one_hot).expect("arbiter output is one-hot");
            let t_d = t_arb + d.latch + d.encoder + d.cd_encoder;
            recs.push(TraceRecord::new(t_d, format!("cd_enc.L{l}"), "D", 0, 1));
            d_ready = d_ready.max(t_d);
            t = t_arb;
        }
        let (packet, word) = PipelinePacket::assemble(&codes);
        let captured = packet.valid;
        let t_pkt = d_ready + d.hc2;
        recs.push(TraceRecord::new(t_pkt, "hc2", "packet", 0, word.to_raw()));
        let t_ack = t_pkt + d.cd_packet + d.ack_gen;
        recs.push(TraceRecord::new(t_ack, "ackgen", "ack", 0, 1));
        run.packets.push(TimedPacket {
            packet,
            neuron: winner,
            t_request,
            t_output: t_pkt,
        });

        // Served neuron withdraws; remaining valid requests set the V flags.
        let q = pending.get_mut(&winner).expect("winner pending");
        q.pop_front();
        if q.is_empty() {
            pending.remove(&winner);
        }
        let t_rel = t_ack + d.neuron_release;
        recs.push(TraceRecord::new(t_rel, format!("neuron{winner}"), "req", 1, 0));
        while next < spikes.len() && spikes[next].t <= t_ack {
            let s = spikes[next];
            recs.push(TraceRecord::new(s.t, format!("neuron{}", s.neuron), "req", 0, 1));
            pending.entry(s.neuron).or_default().push_back(s.t);
            next += 1;
        }
        let t_v = t_rel + d.c_element + d.cd_mask;
        let mut v = vec![false; lv];
        for (l, flag) in v.iter_mut().enumerate().skip(1) {
            let (clo, chi) = cluster(winner, levels, l as u32);
            let reqs: Vec<bool> = (clo..chi).map(|i| pending.contains_key(&i)).collect();
            let masked = mask_requests(&reqs, true, &mut MaskingStage::new(reqs.len()));
            let or = CdBlock {
                kind: CdKind::OrBased,
                width: 32,
            };
            *flag = masked.chunks(32).any(|word| {
                let bits = word
                    .iter()
                    .enumerate()
                    .fold(0u32, |acc, (i, &m)| acc | ((m as u32) << i));
                completion_detect(or, bits)
            });
            recs.push(TraceRecord::new(t_v, format!("cd_mask.L{l}"), "V", *flag as u64, *flag as u64));
        }
        let step = ack_generator_step(
            &AckGeneratorInputs {
                v,
                d: vec![true; lv],
            },
            captured,
            &mut ack_state,
        );

        let t_reset = t_ack + d.ack_to_reset;
        let mut t_null = t_pkt;
        for l in (0..lv).filter(|&l| step.resets[l]) {
            let one_hot = 1u64 << digit(winner, levels, l as u32);
            recs.push(TraceRecord::new(t_reset, format!("arb.L{l}"), "out", one_hot, 0));
            let t_open = if d.skip_input_handshake {
                t_ack + d.latch_open
            } else {
                t_reset + d.latch_open
            };
            recs.push(TraceRecord::new(t_open, format!("hc1.L{l}"), "latch", 1, 0));
            let t_dfall = t_reset + d.latch + d.encoder + d.cd_encoder;
            recs.push(TraceRecord::new(t_dfall, format!("cd_enc.L{l}"), "D", 1, 0));
            codes[l] = DualRailValue::null(2);
            t_null = t_null.max(t_dfall);
        }
        held = step.resets.iter().take_while(|&&r| !r).count();
        let t_null = t_null + d.hc2;
        recs.push(TraceRecord::new(t_null, "hc2", "packet", word.to_raw(), 0));
        let t_ack_fall = t_null + d.cd_packet + d.ack_gen;
        recs.push(TraceRecord::new(t_ack_fall, "ackgen", "ack", 1, 0));
        ack_state.ack = false;
        last = Some(winner);
        now = t_ack_fall.max(t_rel);
    }

    if let Some(sink) = trace {
        recs.sort_by_key(|r| r.time);
        for r in recs {
            sink.push(r);
        }
    }
    Ok(run)
}

fn level_of(component: &str, prefix: &str) -> Option<usize> {
    component.strip_prefix(prefix)?.parse().ok()
}

/// Audit a pipeline trace: latch closes before its arbiter output resets (i),
/// reopens strictly after it (ii), post-masking V flags settle before the
/// low-level D flag falls (iii), packets are separated by NULL, and no
/// dual-rail bit ever has both rails high.
pub fn check_timing(trace: &[TraceRecord]) -> Vec<TraceViolation> {
    let mut arb_fall: BTreeMap<usize, Vec<SimTime>> = BTreeMap::new();
    let mut close: BTreeMap<usize, Vec<SimTime>> = BTreeMap::new();
    let mut reopen: BTreeMap<usize, Vec<SimTime>> = BTreeMap::new();
    let mut v_settle: BTreeMap<usize, Vec<SimTime>> = BTreeMap::new();
    let mut d_fall: BTreeMap<usize, Vec<SimTime>> = BTreeMap::new();
    let mut out = Vec::new();
    let mut packet_bits = 0u32;
    let mut packet_level = 0u64;

    for r in trace {
        let c = r.component.as_str();
        match r.signal.as_str() {
            "out" => {
                if let (Some(l), 0) = (level_of(c, "arb.L"), r.new) {
                    arb_fall.entry(l).or_default().push(r.time);
                }
            }
            "latch" => {
                if let Some(l) = level_of(c, "hc1.L") {
                    let m = if r.new == 1 { &mut close } else { &mut reopen };
                    m.entry(l).or_default().push(r.time);
                }
            }
            "V" => {
                if let Some(l) = level_of(c, "cd_mask.L") {
                    v_settle.entry(l).or_default().push(r.time);
                }
            }
            "D" => {
                if let (Some(l), 0) = (level_of(c, "cd_enc.L"), r.new) {
                    d_fall.entry(l).or_default().push(r.time);
                }
                if let Some(l) = level_of(c, "cd_enc.L") {
                    packet_bits = packet_bits.max(2 * (l as u32 + 1));
                }
            }
            "packet" if c == "hc2" => {
                if r.old != 0 && r.new != 0 || r.new != 0 && packet_level != 0 {
                    out.push(TraceViolation {
                        constraint: "null-spacer".into(),
                        time: r.time,
                        detail: format!("packet {:#x} follows {:#x} without NULL", r.new, packet_level),
                    });
                }
                let width = packet_bits.max(32);
                let dr = DualRailValue::from_raw(r.new, width);
                if !dr.is_safe() {
                    out.push(TraceViolation {
                        constraint: "dual-rail".into(),
                        time: r.time,
                        detail: format!("packet {:#x} has a bit with both rails high", r.new),
                    });
                }
                packet_level = r.new;
            }
            _ => {}
        }
    }

    for (l, closes) in &close {
        let falls = arb_fall.get(l).map(Vec::as_slice).unwrap_or(&[]);
        for (k, (&tc, &tf)) in closes.iter().zip(falls).enumerate() {
            if tc >= tf {
                out.push(TraceViolation {
                    constraint: "latch-close-before-reset".into(),
                    time: tc,
                    detail: format!("level {l} grant {k}: latch closed at {tc}, arbiter output reset at {tf}"),
                });
            }
        }
    }
    for (l, opens) in &reopen {
        let falls = arb_fall.get(l).map(Vec::as_slice).unwrap_or(&[]);
        for (k, (&to, &tf)) in opens.iter().zip(falls).enumerate() {
            if to <= tf {
                out.push(TraceViolation {
                    constraint: "latch-reopen-after-reset".into(),
                    time: to,
                    detail: format!("level {l} grant {k}: latch reopened at {to}, input reset at {tf}"),
                });
            }
        }
    }
    if let Some((&low, low_falls)) = d_fall.iter().next_back() {
        for (l, settles) in &v_settle {
            for (k, (&tv, &td)) in settles.iter().zip(low_falls).enumerate() {
                if tv >= td {
                    out.push(TraceViolation {
                        constraint: "v-before-d".into(),
                        time: tv,
                        detail: format!("packet {k}: V of level {l} settled at {tv}, D of level {low} fell at {td}"),
                    });
                }
            }
        }
    }
    out.sort_by_key(|v| v.time);
    out
}

pub fn violations_to_json(violations: &[TraceViolation]) -> String {
    serde_json::to_string_pretty(violations).expect("violations serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Trace;

    fn spike(t: u64, neuron: u32) -> Spike {
        Spike {
            t: SimTime(t),
            neuron,
        }
    }

    #[test]
    fn c_element_truth_table() {
        assert!(c_element(true, true, false));
        assert!(!c_element(false, false, true));
        assert!(c_element(true, false, true));
        assert!(!c_element(false, true, false));
    }

    #[test]
    fn masking_passes_granted_requests() {
        let reqs = [false, true, true, false];
        let mut st = MaskingStage::new(4);
        assert_eq!(mask_requests(&reqs, true, &mut st), reqs.to_vec());
        let mut fresh = MaskingStage::new(4);
        assert_eq!(mask_requests(&reqs, false, &mut fresh), vec![false; 4]);
    }

    #[test]
    fn masked_request_outlives_grant() {
        let mut st = MaskingStage::new(1);
        assert_eq!(mask_requests(&[true], true, &mut st), vec![true]);
        // grant drops while the request is still up: latch holds
        assert_eq!(mask_requests(&[true], false, &mut st), vec![true]);
        // request falls: four-phase cycle completes
        assert_eq!(mask_requests(&[false], false, &mut st), vec![false]);
        // a new request without grant stays masked off
        assert_eq!(mask_requests(&[true], false, &mut st), vec![false]);
    }

    #[test]
    fn completion_detection_kinds() {
        let xor = CdBlock { kind: CdKind::XorBased, width: 4 };
        let or = CdBlock { kind: CdKind::OrBased, width: 4 };
        assert!(completion_detect(xor, 0b0010));
        assert!(!completion_detect(xor, 0b0110));
        assert!(!completion_detect(or, 0));
        assert!(completion_detect(or, 0b0110));
        assert!(completion_detect_dual(xor, &DualRailValue::from_value(2, 2)));
        assert!(!completion_detect_dual(xor, &DualRailValue::null(2)));
    }

    #[test]
    fn encoder_cases() {
        assert_eq!(qdi_encode(0b0001), Ok(DualRailValue::from_value(0, 2)));
        assert_eq!(qdi_encode(0b0001).unwrap().false_rail, 0b11);
        assert_eq!(qdi_encode(0b1000).unwrap().value(), Some(3));
        assert_eq!(qdi_encode(0b0101), Err(EncodeError::NotOneHot(0b0101)));
        assert!(qdi_encode(0).unwrap().is_null());
    }

    #[test]
    fn raw_interleave_round_trip() {
        let v = DualRailValue::from_value(0b010101, 6);
        assert_eq!(DualRailValue::from_raw(v.to_raw(), 6), v);
        assert_eq!(DualRailValue::from_value(1, 1).to_raw(), 0b01);
        assert_eq!(DualRailValue::from_value(0, 1).to_raw(), 0b10);
    }

    #[test]
    fn ack_generator_cases() {
        let mut st = AckGeneratorState::default();
        let s = ack_generator_step(&AckGeneratorInputs::three_level(true, true, true, true, true), true, &mut st);
        assert_eq!(s.resets, vec![false, false, true]);
        let s = ack_generator_step(&AckGeneratorInputs::three_level(true, false, true, true, true), true, &mut st);
        assert_eq!(s.resets, vec![false, true, true]);
        let s = ack_generator_step(&AckGeneratorInputs::three_level(false, false, true, true, true), true, &mut st);
        assert_eq!(s.resets, vec![true, true, true]);
        let mut idle = AckGeneratorState::default();
        let s = ack_generator_step(&AckGeneratorInputs::three_level(true, true, true, true, true), false, &mut idle);
        assert!(!s.ack);
        assert_eq!(s.resets, vec![false; 3]);
    }

    #[test]
    fn neuron_21_packet() {
        let run = run_pipeline(3, &[spike(0, 21)], &PipelineDelays::default(), None).unwrap();
        assert_eq!(run.packets.len(), 1);
        assert_eq!(run.packets[0].packet.address, 0b010101);
        assert!(run.packets[0].packet.valid);
    }

    #[test]
    fn empty_input_no_packets() {
        let run = run_pipeline(3, &[], &PipelineDelays::default(), None).unwrap();
        assert!(run.packets.is_empty());
        assert_eq!(run.arbitrations, vec![0, 0, 0]);
    }

    #[test]
    fn low_cluster_burst_holds_upper_grants() {
        let ev: Vec<Spike> = (20..24).map(|i| spike(0, i)).collect();
        let run = run_pipeline(3, &ev, &PipelineDelays::default(), None).unwrap();
        assert_eq!(run.arbitrations, vec![1, 1, 4]);
        let ids: Vec<u32> = run.packets.iter().map(|p| p.packet.address).collect();
        assert_eq!(ids, vec![20, 21, 22, 23]);
    }

    #[test]
    fn nominal_run_is_clean() {
        let ev: Vec<Spike> = (0..64).map(|i| spike((i as u64 * 37) % 500, i)).collect();
        let mut tr = Trace::unbounded();
        let run = run_pipeline(3, &ev, &PipelineDelays::default(), Some(&mut tr)).unwrap();
        assert_eq!(run.packets.len(), 64);
        let v = check_timing(&tr.into_vec());
        assert!(v.is_empty(), "{}", violations_to_json(&v));
    }

    fn violations_with(d: PipelineDelays) -> Vec<TraceViolation> {
        let ev: Vec<Spike> = [5u32, 6, 40].iter().map(|&i| spike(0, i)).collect();
        let mut tr = Trace::unbounded();
        run_pipeline(3, &ev, &d, Some(&mut tr)).unwrap();
        check_timing(&tr.into_vec())
    }

    #[test]
    fn slow_latch_close_flags_constraint_one() {
        let d = PipelineDelays {
            latch_close: SimTime(5_000),
            ..Default::default()
        };
        let v = violations_with(d);
        assert!(v.iter().any(|x| x.constraint == "latch-close-before-reset"));
        assert!(v.iter().all(|x| x.constraint == "latch-close-before-reset"));
    }

    #[test]
    fn early_reopen_flags_constraint_two() {
        let d = PipelineDelays {
            skip_input_handshake: true,
            ..Default::default()
        };
        let v = violations_with(d);
        assert!(!v.is_empty());
        assert!(v.iter().all(|x| x.constraint == "latch-reopen-after-reset"));
    }

    #[test]
    fn slow_mask_cd_flags_constraint_three() {
        let d = PipelineDelays {
            cd_mask: SimTime(10),
            ..Default::default()
        };
        let v = violations_with(d);
        assert!(!v.is_empty());
        assert!(v.iter().all(|x| x.constraint == "v-before-d"));
    }

    #[test]
    fn merged_packets_flag_null_spacer() {
        let p = DualRailValue::from_value(1, 2).to_raw();
        let q = DualRailValue::from_value(2, 2).to_raw();
        let tr = vec![
            TraceRecord::new(SimTime(1), "hc2", "packet", 0, p),
            TraceRecord::new(SimTime(2), "hc2", "packet", p, q),
            TraceRecord::new(SimTime(3), "hc2", "packet", q, 0b11),
        ];
        let v = check_timing(&tr);
        assert!(v.iter().any(|x| x.constraint == "null-spacer"));
        assert!(v.iter().any(|x| x.constraint == "dual-rail"));
    }

    #[test]
    fn violation_json_shape() {
        let v = vec![TraceViolation {
            constraint: "v-before-d".into(),
            time: SimTime(7),
            detail: "x".into(),
        }];
        let j: serde_json::Value = serde_json::from_str(&violations_to_json(&v)).unwrap();
        assert_eq!(j[0]["constraint"], "v-before-d");
        assert_eq!(j[0]["time"], 7);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(matches!(
            run_pipeline(3, &[spike(0, 64)], &PipelineDelays::default(), None),
            Err(PipelineError::NeuronOutOfRange { .. })
        ));
        assert_eq!(run_pipeline(0, &[], &PipelineDelays::default(), None), Err(PipelineError::BadLevels(0)));
    }

    proptest::proptest! {
        #[test]
        fn packets_always_match_ids(ids in proptest::collection::vec(0u32..64, 1..20), gap in 0u64..400) {
            let ev: Vec<Spike> = ids.iter().enumerate().map(|(k, &i)| spike(k as u64 * gap, i)).collect();
            let mut tr = Trace::unbounded();
            let run = run_pipeline(3, &ev, &PipelineDelays::default(), Some(&mut tr)).unwrap();
            proptest::prop_assert_eq!(run.packets.len(), ids.len());
            for p in &run.packets {
                proptest::prop_assert_eq!(p.packet.address, p.neuron);
                proptest::prop_assert!(p.t_output > p.t_request);
            }
            proptest::prop_assert!(check_timing(&tr.into_vec()).is_empty());
        }
    }
}
