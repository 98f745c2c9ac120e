use std::fmt::Write as _;

use hatsim::arbitration::ArchitectureKind;
use hatsim::cam::{
    calibrate_delay_line, check_cam_timing, CamArray, CamTiming, CompletionMode, DeviceModel, Mechanisms,
};
use hatsim::kernel::{check_handshake_trace, trace_from_csv, trace_to_csv, SimTime, Trace, TraceViolation};
use hatsim::pipeline::{check_timing, run_pipeline, PipelineDelays};
use hatsim::report::{
    aer_demo, arb_rows_to_csv, calibrate_point, cam_report, cam_rows_to_csv, config_hash, measure_point,
    point_seed, sweep_scaling, table_area, table_latency_burst, table_latency_sparse, ArbMode, ArbRow, CamPoint,
    DemoCam, Summary, POISSON_RATE,
};
use hatsim::rng::SimRng;
use hatsim::workloads::{Workload, WorkloadKind};
use serde_json::{json, Value};

use crate::config::{Completion, Flags, Format, TraceKind};
use crate::CliError;

pub struct Output {
    pub body: String,
    /// Timing or invariant violations found; nonzero exits with status 3.
    pub violations: usize,
}

const DEFAULT_SEED: u64 = 1;

fn seed(f: &Flags) -> u64 {
    f.seed.unwrap_or(DEFAULT_SEED)
}

fn format(f: &Flags) -> Format {
    f.format.unwrap_or(Format::Text)
}

fn jobs(f: &Flags) -> usize {
    f.jobs.unwrap_or(0)
}

fn single<T: Copy>(list: &Option<Vec<T>>, default: T, name: &str) -> Result<T, CliError> {
    match list.as_deref() {
        None => Ok(default),
        Some([x]) => Ok(*x),
        Some(_) => Err(CliError::Config(format!("--{name} takes a single value for this command"))),
    }
}

fn csv_out(cfg: &Value, csv: &str) -> String {
    format!("# config: {cfg}\n# config_hash: {}\n{csv}", config_hash(cfg))
}

fn text_out(cfg: &Value, mut text: String) -> String {
    if !text.ends_with('\n') {
        text.push('\n');
    }
    format!("{text}\nconfig: {cfg}\nconfig_hash: {}\n", config_hash(cfg))
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or("-".into(), |v| format!("{v:.3}"))
}

fn arb_rows_text(rows: &[ArbRow]) -> String {
    let mut s = format!(
        "{:<12} {:>6} {:<8} {:>10} {:>10} {:>9} {:>8} {:>5}\n",
        "arch", "n", "mode", "analytic", "sim_mean", "ci95", "trials", "ok"
    );
    for r in rows {
        let ok = match r.within_tolerance {
            Some(true) => "yes",
            Some(false) => "no",
            None => "-",
        };
        writeln!(
            s,
            "{:<12} {:>6} {:<8} {:>10} {:>10.3} {:>9.3} {:>8} {:>5}",
            r.arch.name(),
            r.n,
            r.mode.name(),
            fmt_opt(r.analytic),
            r.sim_mean,
            r.sim_ci95,
            r.trials,
            ok
        )
        .unwrap();
    }
    s
}

fn violations_text(v: &[TraceViolation]) -> String {
    if v.is_empty() {
        return "no violations\n".into();
    }
    v.iter()
        .map(|x| format!("{} at {}: {}\n", x.constraint, x.time.0, x.detail))
        .collect()
}

fn violations_csv(v: &[TraceViolation]) -> String {
    let mut s = String::from("constraint,time,detail\n");
    for x in v {
        writeln!(s, "{},{},\"{}\"", x.constraint, x.time.0, x.detail.replace('"', "\"\"")).unwrap();
    }
    s
}

fn write_trace(path: &std::path::Path, trace: &Trace) -> Result<(), CliError> {
    std::fs::write(path, trace_to_csv(trace.records()))
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn workload_for(mode: ArbMode, trials: u64, seed: u64) -> Workload {
    match mode {
        ArbMode::Sparse => Workload::sparse(trials, seed),
        ArbMode::Burst => Workload::burst(seed),
        ArbMode::Poisson => Workload::new(
            WorkloadKind::Poisson {
                rate: POISSON_RATE,
                duration: trials.max(1),
            },
            seed,
        ),
    }
}

fn pipeline_levels(n: u32) -> Option<u32> {
    (1..=10).find(|&l| 1u64 << (2 * l) == n as u64)
}

pub fn arb_run(f: &Flags) -> Result<Output, CliError> {
    let arch = f.arch.unwrap_or(ArchitectureKind::HierArbiterTree);
    let ns = f.n.clone().unwrap_or_else(|| vec![64]);
    let mode = f.mode.unwrap_or(ArbMode::Sparse);
    let trials = f.trials.unwrap_or(10_000);
    let seed = seed(f);
    let cfg = json!({"command": "arb run", "arch": arch, "n": ns, "mode": mode, "trials": trials, "seed": seed});
    let rows = ns
        .iter()
        .map(|&n| measure_point(arch, n, mode, trials, point_seed(seed, arch, n)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut violations = Vec::new();
    if let Some(path) = &f.trace {
        // the pipeline is the gate-level form of the hierarchical tree
        let n = single(&f.n, 64, "n")?;
        if arch != ArchitectureKind::HierArbiterTree {
            return Err(CliError::Config("--trace is only available for --arch hier-tree".into()));
        }
        let levels = pipeline_levels(n)
            .ok_or_else(|| CliError::Config(format!("--trace needs N to be a power of 4, got {n}")))?;
        let spikes = workload_for(mode, trials, point_seed(seed, arch, n)).generate(n)?;
        let mut trace = Trace::unbounded();
        run_pipeline(levels, &spikes, &PipelineDelays::default(), Some(&mut trace))?;
        write_trace(path, &trace)?;
        violations = check_timing(&trace.into_vec());
    }
    let body = match format(f) {
        Format::Text => {
            let mut t = arb_rows_text(&rows);
            if f.trace.is_some() {
                t.push_str(&violations_text(&violations));
            }
            text_out(&cfg, t)
        }
        Format::Csv => csv_out(&cfg, &arb_rows_to_csv(&rows)?),
        Format::Json => {
            let mut s = Summary::new(&cfg);
            s.add("rows", &rows);
            s.violations = violations.clone();
            s.to_json()
        }
    };
    Ok(Output {
        body,
        violations: violations.len(),
    })
}

pub fn arb_tables(f: &Flags) -> Result<Output, CliError> {
    let ns = f.n.clone().unwrap_or_else(|| vec![64, 256]);
    let trials = f.trials.unwrap_or(10_000);
    let seed = seed(f);
    let cfg = json!({"command": "arb tables", "n": ns, "trials": trials, "seed": seed});
    let sparse = table_latency_sparse(&ns, trials, seed, jobs(f))?;
    let burst = table_latency_burst(&ns, seed, jobs(f))?;
    let area = table_area(&ns)?;
    let body = match format(f) {
        Format::Text => text_out(
            &cfg,
            format!("{}\n{}\n{}", sparse.render(), burst.render(), area.render()),
        ),
        Format::Csv => {
            let rows: Vec<ArbRow> = sparse.rows.iter().chain(&burst.rows).cloned().collect();
            csv_out(&cfg, &arb_rows_to_csv(&rows)?)
        }
        Format::Json => {
            let mut s = Summary::new(&cfg);
            s.add("latency_sparse", &sparse);
            s.add("latency_burst", &burst);
            s.add("area", &area);
            s.to_json()
        }
    };
    Ok(Output { body, violations: 0 })
}

pub fn sweep(f: &Flags) -> Result<Output, CliError> {
    let ns = f.n.clone().unwrap_or_else(|| vec![16, 64, 256, 1024]);
    let mode = f.mode.unwrap_or(ArbMode::Sparse);
    let trials = f.trials.unwrap_or(10_000);
    let seed = seed(f);
    let cfg = json!({"command": "sweep", "n": ns, "mode": mode, "trials": trials, "seed": seed});
    let sw = sweep_scaling(&ns, mode, trials, seed, jobs(f))?;
    let body = match format(f) {
        Format::Text => {
            let mut t = arb_rows_text(&sw.rows);
            for s in &sw.skipped {
                writeln!(t, "skipped: {s}").unwrap();
            }
            text_out(&cfg, t)
        }
        Format::Csv => csv_out(&cfg, &arb_rows_to_csv(&sw.rows)?),
        Format::Json => {
            let mut s = Summary::new(&cfg);
            s.add("sweep", &sw);
            s.to_json()
        }
    };
    Ok(Output { body, violations: 0 })
}

fn mechanisms(f: &Flags, feedback: bool, spec: u32) -> Mechanisms {
    let spec = f.speculative.unwrap_or(spec);
    Mechanisms {
        feedback: f.feedback.unwrap_or(feedback),
        speculative: (spec > 0).then_some(spec),
    }
}

pub fn cam_search(f: &Flags) -> Result<Output, CliError> {
    let entries = single(&f.entries, 16, "entries")?;
    let width = f.width.unwrap_or(11);
    let completion = f.completion.unwrap_or(Completion::Cscd);
    let mech = mechanisms(f, false, 0);
    let trials = f.trials.unwrap_or(1000);
    let seed = seed(f);
    let point = CamPoint { entries, width };
    let (base, cal) = calibrate_point(point, DeviceModel::default(), 1000, seed)?;
    let mode = match completion {
        Completion::DelayLine => CompletionMode::DelayLine { setting: cal.setting },
        Completion::Cscd => CompletionMode::cscd(),
    };
    let cfg = json!({
        "command": "cam search", "entries": entries, "width": width, "completion": completion,
        "feedback": mech.feedback, "speculative": mech.speculative.unwrap_or(0), "trials": trials, "seed": seed,
    });
    let array = base.with_mode(mode).with_mechanisms(mech);
    let mut rng = SimRng::derive(seed, 1);
    let keys: Vec<u64> = (0..trials).map(|_| rng.bits(width)).collect();
    let mut trace = f.trace.as_ref().map(|_| Trace::unbounded());
    let results = array.search_sequence(&keys, trace.as_mut())?;
    let mut violations = Vec::new();
    if let (Some(path), Some(trace)) = (&f.trace, trace) {
        write_trace(path, &trace)?;
        violations = check_cam_timing(&trace.into_vec(), &CamTiming::default());
    }
    let false_timing = results.iter().filter(|r| r.false_timing).count();
    let n = results.len().max(1) as f64;
    let cycle_mean = results.iter().map(|r| r.cycle_time.as_units()).sum::<f64>() / n;
    let energy_mean = results.iter().map(|r| r.energy.total).sum::<f64>() / n;
    let body = match format(f) {
        Format::Text => {
            let mut t = String::new();
            writeln!(t, "searches      {}", results.len()).unwrap();
            writeln!(t, "delay-line    setting {} ({:.3}x dummy)", cal.setting, cal.ratio).unwrap();
            writeln!(t, "cycle mean    {cycle_mean:.3} units").unwrap();
            writeln!(t, "energy mean   {energy_mean:.4}").unwrap();
            writeln!(t, "false timing  {false_timing}").unwrap();
            if f.trace.is_some() {
                t.push_str(&violations_text(&violations));
            }
            text_out(&cfg, t)
        }
        Format::Csv => {
            let mut c = String::from("index,key,matches,cycle,energy,false_timing\n");
            for (i, (k, r)) in keys.iter().zip(&results).enumerate() {
                let m = r.match_flags.iter().filter(|&&b| b).count();
                writeln!(c, "{i},{k},{m},{},{:.6},{}", r.cycle_time.0, r.energy.total, r.false_timing).unwrap();
            }
            csv_out(&cfg, &c)
        }
        Format::Json => {
            let mut s = Summary::new(&cfg);
            s.add(
                "search",
                &json!({
                    "searches": results.len(), "calibration": cal, "cycle_mean": cycle_mean,
                    "energy_mean": energy_mean, "false_timing": false_timing,
                }),
            );
            s.violations = violations.clone();
            s.to_json()
        }
    };
    Ok(Output {
        body,
        violations: violations.len() + false_timing,
    })
}

pub fn cam_report_cmd(f: &Flags) -> Result<Output, CliError> {
    let entries = f.entries.clone().unwrap_or_else(|| vec![16, 512]);
    let width = f.width.unwrap_or(11);
    let trials = f.trials.unwrap_or(200);
    let n_tail = f.speculative.unwrap_or(3);
    if n_tail == 0 || n_tail > width {
        return Err(CliError::Config(format!("--speculative must be in 1..={width} for cam report")));
    }
    let seed = seed(f);
    let cfg = json!({"command": "cam report", "entries": entries, "width": width, "trials": trials, "speculative": n_tail, "seed": seed});
    let points: Vec<CamPoint> = entries.iter().map(|&e| CamPoint { entries: e, width }).collect();
    let rep = cam_report(&points, trials, n_tail, seed, jobs(f))?;
    let false_timing: u64 = rep.rows.iter().map(|r| r.false_timing).sum();
    let body = match format(f) {
        Format::Text => text_out(&cfg, rep.render()),
        Format::Csv => csv_out(&cfg, &cam_rows_to_csv(&rep.rows)?),
        Format::Json => {
            let mut s = Summary::new(&cfg);
            s.add("cam", &rep);
            s.to_json()
        }
    };
    Ok(Output {
        body,
        violations: false_timing as usize,
    })
}

pub fn demo(f: &Flags) -> Result<Output, CliError> {
    let arch = f.arch.unwrap_or(ArchitectureKind::HierArbiterTree);
    let n = single(&f.n, 64, "n")?;
    let mode = f.mode.unwrap_or(ArbMode::Burst);
    let trials = f.trials.unwrap_or(100);
    let seed = seed(f);
    let addr_bits = 32 - n.saturating_sub(1).leading_zeros();
    let width = f.width.unwrap_or(addr_bits.max(11));
    let entries = single(&f.entries, n as usize, "entries")?;
    let completion = f.completion.unwrap_or(Completion::Cscd);
    let mech = mechanisms(f, true, 3.min(width));
    let cfg = json!({
        "command": "demo", "arch": arch, "n": n, "mode": mode, "trials": trials, "seed": seed,
        "entries": entries, "width": width, "completion": completion,
        "feedback": mech.feedback, "speculative": mech.speculative.unwrap_or(0),
    });
    let mut cam = DemoCam::identity(entries, width);
    cam.mechanisms = mech;
    cam.seed = seed;
    cam.mode = match completion {
        Completion::Cscd => CompletionMode::cscd(),
        Completion::DelayLine => {
            let mut a = CamArray::new(entries, width, DeviceModel::default(), seed)?.with_mechanisms(mech);
            for i in 0..entries {
                a.write_entry(i, i as u64)?;
            }
            CompletionMode::DelayLine {
                setting: calibrate_delay_line(&a, 1000, seed)?.setting,
            }
        }
    };
    let workload = workload_for(mode, trials, seed);
    let expected = workload.generate(n)?.len();
    let log = aer_demo(arch, n, &workload, &cam)?;
    let mut problems = Vec::new();
    if log.events.len() != expected {
        problems.push(format!("{} spikes produced {} events", expected, log.events.len()));
    }
    for e in &log.events {
        if e.address != e.neuron {
            problems.push(format!("neuron {} encoded as {}", e.neuron, e.address));
        }
        let want: Vec<usize> = if (e.neuron as usize) < entries { vec![e.neuron as usize] } else { vec![] };
        if e.targets != want {
            problems.push(format!("neuron {} routed to {:?}", e.neuron, e.targets));
        }
    }
    let violations: Vec<TraceViolation> = problems
        .into_iter()
        .map(|detail| TraceViolation {
            constraint: "address-routing".into(),
            time: SimTime::ZERO,
            detail,
        })
        .collect();
    let body = match format(f) {
        Format::Text | Format::Csv => {
            let mut c = String::from("neuron,address,t_request,t_output,targets,search_cycle\n");
            for e in &log.events {
                let targets: Vec<String> = e.targets.iter().map(|t| t.to_string()).collect();
                writeln!(
                    c,
                    "{},{},{},{},{},{}",
                    e.neuron,
                    e.address,
                    e.t_request.0,
                    e.t_output.0,
                    targets.join(";"),
                    e.search_cycle.0
                )
                .unwrap();
            }
            if format(f) == Format::Csv {
                csv_out(&cfg, &c)
            } else {
                c.push_str(&violations_text(&violations));
                text_out(&cfg, c)
            }
        }
        Format::Json => {
            let mut s = Summary::new(&cfg);
            s.add("demo", &log);
            s.violations = violations.clone();
            s.to_json()
        }
    };
    Ok(Output {
        body,
        violations: violations.len(),
    })
}

fn detect_kind(records: &[hatsim::kernel::TraceRecord]) -> TraceKind {
    if records.iter().any(|r| r.component == "hc2") {
        TraceKind::Pipeline
    } else if records.iter().any(|r| r.component.starts_with("cam")) {
        TraceKind::Cam
    } else {
        TraceKind::Handshake
    }
}

pub fn check(f: &Flags) -> Result<Output, CliError> {
    let path = f
        .trace
        .as_ref()
        .ok_or_else(|| CliError::Config("check needs --trace <file>".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let records = trace_from_csv(&text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let kind = match f.kind.unwrap_or(TraceKind::Auto) {
        TraceKind::Auto => detect_kind(&records),
        k => k,
    };
    let violations = match kind {
        TraceKind::Pipeline => check_timing(&records),
        TraceKind::Cam => check_cam_timing(&records, &CamTiming::default()),
        _ => check_handshake_trace(&records),
    };
    let cfg = json!({"command": "check", "trace": path.display().to_string(), "kind": kind, "records": records.len()});
    let body = match format(f) {
        Format::Text => text_out(&cfg, violations_text(&violations)),
        Format::Csv => csv_out(&cfg, &violations_csv(&violations)),
        Format::Json => {
            let mut s = Summary::new(&cfg);
            s.violations = violations.clone();
            s.to_json()
        }
    };
    Ok(Output {
        body,
        violations: violations.len(),
    })
}
