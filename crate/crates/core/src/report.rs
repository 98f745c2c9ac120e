//! Experiment harness: analytic-vs-simulated tables, scaling sweeps, the CAM
//! ablation report and the end-to-end AER demo.
//!
//! Sweep points run on independent arbiter instances through a bounded rayon
//! pool; results come back in input order, so output bytes do not depend on
//! the number of workers.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::hash::Hasher;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arbitration::{
    analytic_burst_latency, analytic_sparse_latency, arbiter_count, normalized_area, validate, AddressEvent,
    ArbError, ArbiterConfig, ArbiterInstance, ArchitectureKind, Units, DEFAULT_WIRED_OR_OVERHEAD,
};
use crate::cam::{
    calibrate_delay_line, CamArray, CamError, Calibration, CompletionMode, DeviceModel, Mechanisms,
};
use crate::kernel::{SimTime, TraceViolation};
use crate::rng::SimRng;
use crate::stats::SampleStats;
use crate::workloads::{Workload, WorkloadError};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Arb(#[from] ArbError),
    #[error(transparent)]
    Cam(#[from] CamError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error("invalid report configuration: {0}")]
    Config(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArbMode {
    Sparse,
    Burst,
    Poisson,
}

impl ArbMode {
    pub fn name(self) -> &'static str {
        match self {
            ArbMode::Sparse => "sparse",
            ArbMode::Burst => "burst",
            ArbMode::Poisson => "poisson",
        }
    }
}

impl FromStr for ArbMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sparse" => Ok(ArbMode::Sparse),
            "burst" => Ok(ArbMode::Burst),
            "poisson" => Ok(ArbMode::Poisson),
            _ => Err(format!("unknown mode `{s}`; expected one of sparse, burst, poisson")),
        }
    }
}

pub fn units_to_f64(u: Units) -> f64 {
    *u.numer() as f64 / *u.denom() as f64
}

/// One measured point. `analytic` is absent for Poisson traffic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArbRow {
    pub arch: ArchitectureKind,
    pub n: u32,
    pub mode: ArbMode,
    pub analytic: Option<f64>,
    pub sim_mean: f64,
    pub sim_ci95: f64,
    pub trials: u64,
    pub seed: u64,
    pub within_tolerance: Option<bool>,
}

/// Simulated-vs-analytic agreement rule for one architecture and mode.
pub fn tolerance_rule(arch: ArchitectureKind, mode: ArbMode) -> &'static str {
    match (arch, mode) {
        (_, ArbMode::Poisson) => "none (no closed form)",
        (a, ArbMode::Sparse) if a.is_stochastic_sparse() => "within 3 standard errors",
        (ArchitectureKind::HierArbiterTree, ArbMode::Burst) => "within 10%",
        _ => "exact",
    }
}

fn within(arch: ArchitectureKind, mode: ArbMode, analytic: f64, stats: &SampleStats) -> Option<bool> {
    Some(match (arch, mode) {
        (_, ArbMode::Poisson) => return None,
        (a, ArbMode::Sparse) if a.is_stochastic_sparse() => stats.within(analytic, 3.0),
        (ArchitectureKind::HierArbiterTree, ArbMode::Burst) => (stats.mean - analytic).abs() <= 0.10 * analytic,
        _ => stats.mean == analytic,
    })
}

/// Seed for one sweep point, independent of scheduling.
pub fn point_seed(seed: u64, arch: ArchitectureKind, n: u32) -> u64 {
    let idx = ArchitectureKind::ALL.iter().position(|&a| a == arch).unwrap() as u64;
    SimRng::derive(seed, (idx << 32) | n as u64).next_u64()
}

/// Poisson load used by `--mode poisson`: half an event per unit.
pub const POISSON_RATE: f64 = 0.5;

/// Measure one (architecture, N) point.
pub fn measure_point(arch: ArchitectureKind, n: u32, mode: ArbMode, trials: u64, seed: u64) -> Result<ArbRow, ReportError> {
    validate(arch, n as u64)?;
    let mut inst = ArbiterInstance::new(ArbiterConfig::new(arch, n), seed)?;
    let (analytic, stats) = match mode {
        ArbMode::Sparse => (
            Some(units_to_f64(analytic_sparse_latency(arch, n as u64)?)),
            inst.measure_sparse(trials, seed),
        ),
        ArbMode::Burst => (
            Some(units_to_f64(analytic_burst_latency(arch, n as u64)?)),
            SampleStats::from_iter([inst.measure_burst().as_units()]),
        ),
        ArbMode::Poisson => {
            let w = Workload::new(
                crate::workloads::WorkloadKind::Poisson {
                    rate: POISSON_RATE,
                    duration: trials.max(1),
                },
                seed,
            );
            let ev = inst.simulate(&w.generate(n)?);
            (None, SampleStats::from_iter(ev.iter().map(|e| e.latency().as_units())))
        }
    };
    Ok(ArbRow {
        arch,
        n,
        mode,
        analytic,
        sim_mean: stats.mean,
        sim_ci95: stats.ci95,
        trials: stats.n,
        seed,
        within_tolerance: analytic.and_then(|a| within(arch, mode, a, &stats)),
    })
}

/// Bounded worker pool; `jobs == 0` means one per core.
pub fn pool(jobs: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("thread pool")
}

/// A reference figure copied from the published tables. Technology
/// dependent; never compared against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub arch: ArchitectureKind,
    pub n: u32,
    pub value: String,
}

fn references(table: usize) -> Vec<Reference> {
    use ArchitectureKind::*;
    let data: [[&str; 2]; 5] = match table {
        1 => [["1.7 ns", "2.1 ns"], ["1.8 ns", "2.3 ns"], ["25.3 ns", "102.7 ns"], ["5.7 ns", "9.2 ns"], ["1.7 ns", "2.0 ns"]],
        2 => [["83.7 ns", "436.9 ns"], ["-", "-"], ["40.5 ns", "178.4 ns"], ["48.9 ns", "192.9 ns"], ["47.2 ns", "194.4 ns"]],
        _ => [["72.3", "277.4"], ["83.4", "286.7"], ["79.1", "272.5"], ["89.2", "296.3"], ["59.4", "192.4"]],
    };
    [BinaryTree, GreedyTree, TokenRing, HierTokenRing, HierArbiterTree]
        .into_iter()
        .zip(data)
        .flat_map(|(arch, v)| {
            [(64, v[0]), (256, v[1])].map(|(n, value)| Reference {
                arch,
                n,
                value: value.to_string(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub title: String,
    pub rows: Vec<ArbRow>,
    /// Published figures at N = 64 and 256, for orientation only.
    pub reference: Vec<Reference>,
    pub footer: Vec<String>,
}

impl ComparisonTable {
    pub fn cell(&self, arch: ArchitectureKind, n: u32) -> Option<&ArbRow> {
        self.rows.iter().find(|r| r.arch == arch && r.n == n)
    }

    pub fn all_within_tolerance(&self) -> bool {
        self.rows.iter().all(|r| r.within_tolerance != Some(false))
    }

    pub fn render(&self) -> String {
        let mut s = format!("{}\n", self.title);
        let _ = writeln!(
            s,
            "{:<12} {:>6} {:>12} {:>12} {:>10} {:>8} {:>4} {:>18}",
            "arch", "n", "analytic", "sim_mean", "ci95", "trials", "ok", "reference*"
        );
        for r in &self.rows {
            let reference = self
                .reference
                .iter()
                .find(|x| x.arch == r.arch && x.n == r.n)
                .map(|x| x.value.as_str())
                .unwrap_or("");
            let _ = writeln!(
                s,
                "{:<12} {:>6} {:>12} {:>12.4} {:>10.4} {:>8} {:>4} {:>18}",
                r.arch.name(),
                r.n,
                r.analytic.map(fmt_f64).unwrap_or_default(),
                r.sim_mean,
                r.sim_ci95,
                r.trials,
                match r.within_tolerance {
                    Some(true) => "yes",
                    Some(false) => "NO",
                    None => "-",
                },
                reference
            );
        }
        for f in &self.footer {
            let _ = writeln!(s, "{f}");
        }
        s
    }
}

fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

fn tolerance_footer(mode: ArbMode) -> Vec<String> {
    let mut f = vec![format!("tolerance ({}):", mode.name())];
    for a in ArchitectureKind::ALL {
        f.push(format!("  {:<12} {}", a.name(), tolerance_rule(a, mode)));
    }
    f.push("* published reference figures; technology dependent, not reproducible here".into());
    f
}

fn run_points(
    points: Vec<(ArchitectureKind, u32)>,
    mode: ArbMode,
    trials: u64,
    seed: u64,
    jobs: usize,
) -> Vec<Result<ArbRow, ReportError>> {
    pool(jobs).install(|| {
        points
            .into_par_iter()
            .map(|(a, n)| measure_point(a, n, mode, trials, point_seed(seed, a, n)))
            .collect()
    })
}

fn table(title: &str, ns: &[u32], mode: ArbMode, trials: u64, seed: u64, jobs: usize, reference: usize) -> Result<ComparisonTable, ReportError> {
    let points = ArchitectureKind::ALL
        .iter()
        .flat_map(|&a| ns.iter().map(move |&n| (a, n)))
        .collect();
    let rows = run_points(points, mode, trials, seed, jobs)
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ComparisonTable {
        title: title.into(),
        rows,
        reference: references(reference),
        footer: tolerance_footer(mode),
    })
}

/// Average single-event latency, analytic vs simulated.
pub fn table_latency_sparse(ns: &[u32], trials: u64, seed: u64, jobs: usize) -> Result<ComparisonTable, ReportError> {
    table("Average latency with sparse events (arbiter units)", ns, ArbMode::Sparse, trials, seed, jobs, 1)
}

/// Completion time of a full burst, analytic vs simulated.
pub fn table_latency_burst(ns: &[u32], seed: u64, jobs: usize) -> Result<ComparisonTable, ReportError> {
    table("Latency with burst events (arbiter units)", ns, ArbMode::Burst, 1, seed, jobs, 2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaRow {
    pub arch: ArchitectureKind,
    pub n: u32,
    pub arbiter_count: u64,
    pub normalized_area: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaTable {
    pub rows: Vec<AreaRow>,
    pub reference: Vec<Reference>,
    pub footer: Vec<String>,
}

impl AreaTable {
    pub fn render(&self) -> String {
        let mut s = String::from("Normalized area (two-input arbiter cells)\n");
        let _ = writeln!(s, "{:<12} {:>6} {:>10} {:>12} {:>12}", "arch", "n", "arbiters", "with wiring", "reference*");
        for r in &self.rows {
            let reference = self
                .reference
                .iter()
                .find(|x| x.arch == r.arch && x.n == r.n)
                .map(|x| x.value.as_str())
                .unwrap_or("");
            let _ = writeln!(
                s,
                "{:<12} {:>6} {:>10} {:>12.2} {:>12}",
                r.arch.name(),
                r.n,
                r.arbiter_count,
                r.normalized_area,
                reference
            );
        }
        for f in &self.footer {
            let _ = writeln!(s, "{f}");
        }
        s
    }
}

pub fn table_area(ns: &[u32]) -> Result<AreaTable, ReportError> {
    let mut rows = Vec::new();
    for arch in ArchitectureKind::ALL {
        for &n in ns {
            rows.push(AreaRow {
                arch,
                n,
                arbiter_count: arbiter_count(arch, n as u64)?,
                normalized_area: normalized_area(arch, n as u64, DEFAULT_WIRED_OR_OVERHEAD)?,
            });
        }
    }
    Ok(AreaTable {
        rows,
        reference: references(3),
        footer: vec![
            format!(
                "with wiring: hier-tree adds {DEFAULT_WIRED_OR_OVERHEAD} cell areas per neuron for wired-OR request sharing (fitted at N=64)"
            ),
            "* published layout-normalized areas; not reproducible here".into(),
        ],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub rows: Vec<ArbRow>,
    /// Points skipped because N is invalid for the architecture.
    pub skipped: Vec<String>,
}

/// Every architecture at every N; invalid combinations are skipped with a note.
pub fn sweep_scaling(ns: &[u32], mode: ArbMode, trials: u64, seed: u64, jobs: usize) -> Result<Sweep, ReportError> {
    let mut points = Vec::new();
    let mut skipped = Vec::new();
    for arch in ArchitectureKind::ALL {
        for &n in ns {
            match validate(arch, n as u64) {
                Ok(()) => points.push((arch, n)),
                Err(e) => skipped.push(e.to_string()),
            }
        }
    }
    let rows = run_points(points, mode, trials, seed, jobs)
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Sweep { rows, skipped })
}

#[derive(Debug, Serialize, Deserialize)]
struct ArbCsv {
    arch: String,
    n: u32,
    mode: String,
    analytic: String,
    sim_mean: String,
    sim_ci95: String,
    trials: u64,
    seed: u64,
}

pub const ARB_CSV_HEADER: &str = "arch,n,mode,analytic,sim_mean,sim_ci95,trials,seed";

pub fn arb_rows_to_csv(rows: &[ArbRow]) -> Result<String, ReportError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    for r in rows {
        w.serialize(ArbCsv {
            arch: r.arch.name().into(),
            n: r.n,
            mode: r.mode.name().into(),
            analytic: r.analytic.map(fmt_f64).unwrap_or_default(),
            sim_mean: format!("{:.6}", r.sim_mean),
            sim_ci95: format!("{:.6}", r.sim_ci95),
            trials: r.trials,
            seed: r.seed,
        })?;
    }
    if rows.is_empty() {
        return Ok(format!("{ARB_CSV_HEADER}\n"));
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?).expect("utf-8"))
}

/// Parse rows written by [`arb_rows_to_csv`]; tolerance flags are recomputed.
pub fn arb_rows_from_csv(text: &str) -> Result<Vec<ArbRow>, ReportError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    if r.headers()?.iter().collect::<Vec<_>>().join(",") != ARB_CSV_HEADER {
        return Err(ReportError::Config("unexpected arbitration CSV header".into()));
    }
    let bad = |what: &str| ReportError::Config(format!("bad {what} field"));
    r.deserialize::<ArbCsv>()
        .map(|rec| {
            let rec = rec?;
            let arch: ArchitectureKind = rec.arch.parse().map_err(|_| bad("arch"))?;
            let mode: ArbMode = rec.mode.parse().map_err(|_| bad("mode"))?;
            let analytic = if rec.analytic.is_empty() {
                None
            } else {
                Some(rec.analytic.parse().map_err(|_| bad("analytic"))?)
            };
            let sim_mean: f64 = rec.sim_mean.parse().map_err(|_| bad("sim_mean"))?;
            let sim_ci95: f64 = rec.sim_ci95.parse().map_err(|_| bad("sim_ci95"))?;
            let stats = SampleStats {
                n: rec.trials,
                mean: sim_mean,
                std_dev: 0.0,
                std_err: sim_ci95 / 1.96,
                ci95: sim_ci95,
            };
            Ok(ArbRow {
                arch,
                n: rec.n,
                mode,
                analytic,
                sim_mean,
                sim_ci95,
                trials: rec.trials,
                seed: rec.seed,
                within_tolerance: analytic.and_then(|a| within(arch, mode, a, &stats)),
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// CAM report
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchCase {
    AllMatch,
    AllMismatch,
    Random,
}

impl SearchCase {
    pub const ALL: [SearchCase; 3] = [SearchCase::AllMatch, SearchCase::AllMismatch, SearchCase::Random];

    pub fn name(self) -> &'static str {
        match self {
            SearchCase::AllMatch => "all-match",
            SearchCase::AllMismatch => "all-mismatch",
            SearchCase::Random => "random",
        }
    }
}

/// One CAM design point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CamPoint {
    pub entries: usize,
    pub width: u32,
}

impl CamPoint {
    pub const SMALL: CamPoint = CamPoint { entries: 16, width: 11 };
    pub const LARGE: CamPoint = CamPoint { entries: 512, width: 11 };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CamRow {
    pub entries: usize,
    pub width: u32,
    pub mode: String,
    pub feedback: bool,
    pub spec_tail: u32,
    pub case: SearchCase,
    pub cycle_mean: f64,
    pub energy_mean: f64,
    pub seed: u64,
    /// Searches where the delay line acknowledged before every entry resolved.
    pub false_timing: u64,
}

impl CamRow {
    pub fn is_baseline(&self) -> bool {
        self.mode == "delay-line" && !self.feedback && self.spec_tail == 0
    }

    pub fn is_full(&self) -> bool {
        self.mode == "cscd" && self.feedback && self.spec_tail > 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CamReport {
    pub rows: Vec<CamRow>,
    pub calibrations: Vec<(CamPoint, Calibration)>,
    pub trials: u64,
    pub n_tail: u32,
    pub footer: Vec<String>,
}

fn mode_name(m: &CompletionMode) -> &'static str {
    match m {
        CompletionMode::DelayLine { .. } => "delay-line",
        CompletionMode::Cscd { .. } => "cscd",
    }
}

/// Keys and stored words for one trial of `case`.
fn case_words(case: SearchCase, entries: usize, width: u32, rng: &mut SimRng) -> (u64, Vec<u64>) {
    let key = rng.bits(width);
    let words = match case {
        SearchCase::AllMatch => vec![key; entries],
        SearchCase::AllMismatch => (0..entries)
            .map(|_| loop {
                let w = rng.bits(width);
                if w != key {
                    break w;
                }
            })
            .collect(),
        SearchCase::Random => (0..entries).map(|_| rng.bits(width)).collect(),
    };
    (key, words)
}

/// Baseline calibration: the library calibration plus one search where every
/// entry matches, so no entry's match resolution is missed.
pub fn calibrate_point(point: CamPoint, device: DeviceModel, trials: u64, seed: u64) -> Result<(CamArray, Calibration), ReportError> {
    let mut base = CamArray::new(point.entries, point.width, device, seed)?;
    base.fill_random(seed ^ 0x5eed);
    let mut cal = calibrate_delay_line(&base, trials, seed)?;
    // every entry matching at once covers each entry's slowest resolution
    let mut probe = base.clone();
    let w = probe.words()[0];
    for j in 0..point.entries {
        probe.write_entry(j, w)?;
    }
    let required = probe.search(w)?.t_done;
    if required > cal.delay {
        let setting = (cal.setting..=u8::MAX)
            .find(|&s| base.delay_line_delay(s) >= required)
            .ok_or(CamError::Unsatisfiable {
                required,
                max: base.delay_line_delay(u8::MAX),
            })?;
        cal.setting = setting;
        cal.delay = base.delay_line_delay(setting);
        cal.ratio = cal.delay.0 as f64 / cal.dummy_delay.0 as f64;
    }
    Ok((base, cal))
}

/// Cycle time and energy for every mode/mechanism combination and case.
pub fn cam_report(points: &[CamPoint], trials: u64, n_tail: u32, seed: u64, jobs: usize) -> Result<CamReport, ReportError> {
    if trials == 0 {
        return Err(ReportError::Config("cam report needs at least one trial".into()));
    }
    let mut calibrations = Vec::new();
    let mut tasks = Vec::new();
    for &p in points {
        let (base, cal) = calibrate_point(p, DeviceModel::default(), trials.max(64), seed)?;
        calibrations.push((p, cal));
        for mode in [CompletionMode::DelayLine { setting: cal.setting }, CompletionMode::cscd()] {
            for feedback in [false, true] {
                for spec in [None, Some(n_tail)] {
                    for case in SearchCase::ALL {
                        let arr = base.clone().with_mode(mode).with_mechanisms(Mechanisms {
                            feedback,
                            speculative: spec,
                        });
                        tasks.push((p, arr, case));
                    }
                }
            }
        }
    }
    let rows = pool(jobs).install(|| {
        tasks
            .into_par_iter()
            .map(|(p, mut arr, case)| -> Result<CamRow, ReportError> {
                // same keys for every variant of a point and case
                let mut rng = SimRng::derive(seed, (p.entries as u64) << 8 | case as u64);
                let (mut cyc, mut en, mut ft) = (0.0, 0.0, 0u64);
                for _ in 0..trials {
                    let (key, words) = case_words(case, p.entries, p.width, &mut rng);
                    for (i, w) in words.into_iter().enumerate() {
                        arr.write_entry(i, w)?;
                    }
                    let r = arr.search(key)?;
                    cyc += r.cycle_time.0 as f64;
                    en += r.energy.total;
                    ft += r.false_timing as u64;
                }
                Ok(CamRow {
                    entries: p.entries,
                    width: p.width,
                    mode: mode_name(&arr.mode).into(),
                    feedback: arr.mechanisms.feedback,
                    spec_tail: arr.mechanisms.speculative.unwrap_or(0),
                    case,
                    cycle_mean: cyc / trials as f64,
                    energy_mean: en / trials as f64,
                    seed,
                    false_timing: ft,
                })
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(CamReport {
        rows,
        calibrations,
        trials,
        n_tail,
        footer: vec![
            "baseline: dummy entry + calibrated delay line, no feedback, no speculative sense".into(),
            "cycle times in subticks, energy in full match-line swings; energy knobs are fitted".into(),
            "* published: cycle improvement 35.5% (16x11) and 40.4% (512x11); energy saving 35.8% all-match, 40.2% all-mismatch, 46.7% random; areas 225.3/245.5 um^2 (16x11) and 7242.1/7620.6 um^2 (512x11), baseline/new; not reproducible here".into(),
        ],
    })
}

impl CamReport {
    pub fn row(&self, p: CamPoint, mode: &str, feedback: bool, spec: bool, case: SearchCase) -> Option<&CamRow> {
        self.rows.iter().find(|r| {
            r.entries == p.entries
                && r.width == p.width
                && r.mode == mode
                && r.feedback == feedback
                && (r.spec_tail > 0) == spec
                && r.case == case
        })
    }

    /// `1 - full / baseline` cycle time on random data.
    pub fn cycle_improvement(&self, p: CamPoint) -> Option<f64> {
        let b = self.row(p, "delay-line", false, false, SearchCase::Random)?;
        let f = self.row(p, "cscd", true, true, SearchCase::Random)?;
        Some(1.0 - f.cycle_mean / b.cycle_mean)
    }

    /// `1 - variant / baseline` energy for `case`.
    pub fn energy_saving(&self, p: CamPoint, mode: &str, feedback: bool, spec: bool, case: SearchCase) -> Option<f64> {
        let b = self.row(p, "delay-line", false, false, case)?;
        let v = self.row(p, mode, feedback, spec, case)?;
        Some(1.0 - v.energy_mean / b.energy_mean)
    }

    pub fn render(&self) -> String {
        let mut s = String::from("CAM cycle time and energy, normalized to baseline\n");
        let _ = writeln!(
            s,
            "{:>7} {:>5} {:<10} {:>3} {:>4} {:<12} {:>10} {:>7} {:>10} {:>7}",
            "entries", "width", "mode", "fb", "spec", "case", "cycle", "norm", "energy", "norm"
        );
        for r in &self.rows {
            let b = self
                .row(CamPoint { entries: r.entries, width: r.width }, "delay-line", false, false, r.case)
                .expect("baseline present");
            let _ = writeln!(
                s,
                "{:>7} {:>5} {:<10} {:>3} {:>4} {:<12} {:>10.2} {:>7.4} {:>10.4} {:>7.4}",
                r.entries,
                r.width,
                r.mode,
                r.feedback as u8,
                r.spec_tail,
                r.case.name(),
                r.cycle_mean,
                r.cycle_mean / b.cycle_mean,
                r.energy_mean,
                r.energy_mean / b.energy_mean
            );
        }
        for (p, c) in &self.calibrations {
            let _ = writeln!(
                s,
                "calibration {}x{}: setting {} delay {} dummy {} ratio {:.4}",
                p.entries, p.width, c.setting, c.delay, c.dummy_delay, c.ratio
            );
        }
        for f in &self.footer {
            let _ = writeln!(s, "{f}");
        }
        s
    }
}

#[derive(Debug, Serialize)]
struct CamCsv<'a> {
    entries: usize,
    width: u32,
    mode: &'a str,
    feedback: bool,
    spec_tail: u32,
    case: &'a str,
    cycle_mean: String,
    energy_mean: String,
    seed: u64,
}

pub const CAM_CSV_HEADER: &str = "entries,width,mode,feedback,spec_tail,case,cycle_mean,energy_mean,seed";

pub fn cam_rows_to_csv(rows: &[CamRow]) -> Result<String, ReportError> {
    if rows.is_empty() {
        return Ok(format!("{CAM_CSV_HEADER}\n"));
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    for r in rows {
        w.serialize(CamCsv {
            entries: r.entries,
            width: r.width,
            mode: &r.mode,
            feedback: r.feedback,
            spec_tail: r.spec_tail,
            case: r.case.name(),
            cycle_mean: format!("{:.4}", r.cycle_mean),
            energy_mean: format!("{:.6}", r.energy_mean),
            seed: r.seed,
        })?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?).expect("utf-8"))
}

// ---------------------------------------------------------------------------
// End-to-end demo
// ---------------------------------------------------------------------------

/// Routing CAM for the demo; `None` entries hold no valid tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoCam {
    pub tags: Vec<Option<u64>>,
    pub width: u32,
    pub mode: CompletionMode,
    pub mechanisms: Mechanisms,
    pub seed: u64,
}

impl DemoCam {
    /// Entry `i` stores tag `i`.
    pub fn identity(n: usize, width: u32) -> Self {
        DemoCam {
            tags: (0..n as u64).map(Some).collect(),
            width,
            mode: CompletionMode::cscd(),
            mechanisms: Mechanisms::all(3.min(width)),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoEvent {
    pub neuron: u32,
    pub address: u32,
    pub t_request: SimTime,
    pub t_output: SimTime,
    /// Entries whose tag equals the address.
    pub targets: Vec<usize>,
    pub search_cycle: SimTime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoLog {
    pub arch: ArchitectureKind,
    pub n: u32,
    pub events: Vec<DemoEvent>,
}

/// Arbitrate `workload` on `arch`, then look every address up in the CAM.
pub fn aer_demo(arch: ArchitectureKind, n: u32, workload: &Workload, cam: &DemoCam) -> Result<DemoLog, ReportError> {
    let addr_bits = 32 - (n - 1).leading_zeros();
    if cam.width < addr_bits {
        return Err(ReportError::Config(format!(
            "CAM width {} cannot hold {addr_bits}-bit addresses",
            cam.width
        )));
    }
    let mut inst = ArbiterInstance::new(ArbiterConfig::new(arch, n), workload.seed)?;
    let events: Vec<AddressEvent> = inst.simulate(&workload.generate(n)?);
    let array = if cam.tags.is_empty() {
        None
    } else {
        let mut a = CamArray::new(cam.tags.len(), cam.width, DeviceModel::default(), cam.seed)?
            .with_mode(cam.mode)
            .with_mechanisms(cam.mechanisms);
        for (i, t) in cam.tags.iter().enumerate() {
            a.write_entry(i, t.unwrap_or(0))?;
        }
        Some(a)
    };
    let mut out = Vec::with_capacity(events.len());
    for e in events {
        let (targets, search_cycle) = match &array {
            Some(a) => {
                let r = a.search(e.encoded_address as u64)?;
                let t = r
                    .match_flags
                    .iter()
                    .enumerate()
                    .filter(|&(i, &m)| m && cam.tags[i].is_some())
                    .map(|(i, _)| i)
                    .collect();
                (t, r.cycle_time)
            }
            None => (Vec::new(), SimTime::ZERO),
        };
        out.push(DemoEvent {
            neuron: e.neuron_id,
            address: e.encoded_address,
            t_request: e.t_request,
            t_output: e.t_output,
            targets,
            search_cycle,
        });
    }
    Ok(DemoLog { arch, n, events: out })
}

// ---------------------------------------------------------------------------
// Summary
// ---------------------------------------------------------------------------

/// FNV-1a 64 over the canonical (key-sorted, compact) JSON of `config`.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let canonical = serde_json::to_value(config).expect("config serializes");
    let mut h = fnv::FnvHasher::default();
    h.write(serde_json::to_string(&canonical).expect("json").as_bytes());
    format!("{:016x}", h.finish())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub tables: BTreeMap<String, serde_json::Value>,
    pub violations: Vec<TraceViolation>,
    pub config_hash: String,
    pub config: serde_json::Value,
}

impl Summary {
    pub fn new<T: Serialize>(config: &T) -> Self {
        Summary {
            tables: BTreeMap::new(),
            violations: Vec::new(),
            config_hash: config_hash(config),
            config: serde_json::to_value(config).expect("config serializes"),
        }
    }

    pub fn add<T: Serialize>(&mut self, name: &str, table: &T) {
        self.tables
            .insert(name.into(), serde_json::to_value(table).expect("table serializes"));
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ArchitectureKind::*;

    #[test]
    fn small_tables() {
        let t = table_latency_sparse(&[4], 50, 1, 1).unwrap();
        assert_eq!(t.cell(BinaryTree, 4).unwrap().analytic, Some(2.0));
        let b = table_latency_burst(&[16], 1, 1).unwrap();
        assert_eq!(b.cell(TokenRing, 16).unwrap().analytic, Some(16.0));
        assert!(b.all_within_tolerance());
        let a = table_area(&[4]).unwrap();
        let hat = a.rows.iter().find(|r| r.arch == HierArbiterTree).unwrap();
        assert_eq!(hat.arbiter_count, 3);
    }

    #[test]
    fn sweep_skips_invalid_sizes() {
        let s = sweep_scaling(&[16, 32], ArbMode::Burst, 1, 0, 2).unwrap();
        assert!(s.rows.iter().all(|r| !(r.n == 32 && matches!(r.arch, HierTokenRing | HierArbiterTree))));
        assert_eq!(s.skipped.len(), 2);
    }

    #[test]
    fn binary_burst_at_1024() {
        let r = measure_point(BinaryTree, 1024, ArbMode::Burst, 1, 0).unwrap();
        assert_eq!(r.analytic, Some(18432.0));
        assert_eq!(r.sim_mean, 18432.0);
    }

    #[test]
    fn csv_round_trip() {
        let s = sweep_scaling(&[16, 64], ArbMode::Sparse, 200, 3, 2).unwrap();
        let text = arb_rows_to_csv(&s.rows).unwrap();
        assert!(text.starts_with(ARB_CSV_HEADER));
        let back = arb_rows_from_csv(&text).unwrap();
        assert_eq!(back.len(), s.rows.len());
        assert_eq!(arb_rows_to_csv(&back).unwrap(), text);
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let a = sweep_scaling(&[16, 64], ArbMode::Sparse, 300, 9, 1).unwrap();
        let b = sweep_scaling(&[16, 64], ArbMode::Sparse, 300, 9, 4).unwrap();
        assert_eq!(arb_rows_to_csv(&a.rows).unwrap(), arb_rows_to_csv(&b.rows).unwrap());
    }

    #[test]
    fn demo_matches_tags() {
        let cam = DemoCam {
            tags: vec![Some(5), Some(9), Some(5), None],
            width: 11,
            mode: CompletionMode::cscd(),
            mechanisms: Mechanisms::NONE,
            seed: 0,
        };
        let w = Workload::new(
            crate::workloads::WorkloadKind::LocalizedBurst { cluster_id: 5, size: 1 },
            0,
        );
        let log = aer_demo(HierArbiterTree, 64, &w, &cam).unwrap();
        assert_eq!(log.events.len(), 1);
        assert_eq!(log.events[0].targets, vec![0, 2]);
    }

    #[test]
    fn demo_empty_cam_never_matches() {
        let cam = DemoCam {
            tags: vec![None; 4],
            ..DemoCam::identity(0, 11)
        };
        let log = aer_demo(HierArbiterTree, 64, &Workload::burst(0), &cam).unwrap();
        assert!(log.events.iter().all(|e| e.targets.is_empty()));
        let none = DemoCam::identity(0, 11);
        let log = aer_demo(TokenRing, 64, &Workload::burst(0), &none).unwrap();
        assert!(log.events.iter().all(|e| e.targets.is_empty()));
    }

    #[test]
    fn demo_burst_is_one_hot() {
        let log = aer_demo(HierArbiterTree, 64, &Workload::burst(0), &DemoCam::identity(64, 11)).unwrap();
        assert_eq!(log.events.len(), 64);
        for e in &log.events {
            assert_eq!(e.targets, vec![e.neuron as usize]);
        }
        assert!(aer_demo(HierArbiterTree, 64, &Workload::burst(0), &DemoCam::identity(64, 5)).is_err());
    }

    #[test]
    fn hash_ignores_key_order() {
        let a: serde_json::Value = serde_json::from_str(r#"{"a":1,"b":[2,3]}"#).unwrap();
        let b: serde_json::Value = serde_json::from_str(r#"{"b":[2,3],"a":1}"#).unwrap();
        assert_eq!(config_hash(&a), config_hash(&b));
        assert_ne!(config_hash(&a), config_hash(&serde_json::json!({"a": 2})));
    }

    #[test]
    fn small_cam_report_trends() {
        let r = cam_report(&[CamPoint::SMALL], 200, 3, 1, 2).unwrap();
        assert_eq!(r.rows.len(), 8 * 3);
        let p = CamPoint::SMALL;
        assert_eq!(
            r.energy_saving(p, "delay-line", false, true, SearchCase::AllMatch),
            Some(0.0)
        );
        assert!(r.cycle_improvement(p).unwrap() > 0.0);
        assert!(r.rows.iter().filter(|x| x.mode == "delay-line").all(|x| x.false_timing == 0));
        let csv = cam_rows_to_csv(&r.rows).unwrap();
        assert!(csv.starts_with(CAM_CSV_HEADER));
        assert_eq!(csv.lines().count(), 25);
    }
}
