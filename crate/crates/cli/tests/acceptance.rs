//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::collections::BTreeMap;
use std::process::Command;
use std::time::Instant;

use hatsim::arbitration::{
    analytic_burst_latency, analytic_sparse_latency, arbiter_count, mutual_exclusion_violations, ArbiterConfig,
    ArbiterInstance, ArchitectureKind as A, Units,
};
use hatsim::cam::{
    speculative_close_probability, worst_case_current_margin, CamArray, CloseCause, CompletionMode, CurrentCase,
    DeviceModel, Mechanisms, Probability,
};
use hatsim::kernel::{SimTime, Trace};
use hatsim::pipeline::{check_timing, run_pipeline, PipelineDelays};
use hatsim::report::{cam_report, measure_point, ArbMode, CamPoint, SearchCase};
use hatsim::rng::SimRng;
use hatsim::workloads::{Spike, Workload, WorkloadKind};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn u(num: u64, den: u64) -> Units {
    Units::new(num, den)
}

const ORDER: [A; 5] = [A::BinaryTree, A::GreedyTree, A::TokenRing, A::HierTokenRing, A::HierArbiterTree];

fn exact_table(f: impl Fn(A, u64) -> Result<Units, String>, expect: [(u64, [Units; 5]); 2]) -> Outcome {
    for (n, row) in expect {
        for (arch, want) in ORDER.into_iter().zip(row) {
            let got = f(arch, n)?;
            ensure(got == want, || format!("{arch} N={n}: got {got}, want {want}"))?;
        }
    }
    Ok("10 of 10 values exact".into())
}

fn c1_sparse_formulas() -> Outcome {
    exact_table(
        |a, n| analytic_sparse_latency(a, n).map_err(|e| e.to_string()),
        [
            (64, [u(10, 1), u(10, 1), u(65, 2), u(8, 1), u(6, 1)]),
            (256, [u(14, 1), u(14, 1), u(257, 2), u(16, 1), u(8, 1)]),
        ],
    )
}

fn c2_burst_formulas() -> Outcome {
    let w = |xs: [u64; 5]| xs.map(|x| u(x, 1));
    exact_table(
        |a, n| analytic_burst_latency(a, n).map_err(|e| e.to_string()),
        [(64, w([640, 186, 64, 80, 71])), (256, w([3584, 762, 256, 288, 275]))],
    )
}

fn c3_arbiter_counts() -> Outcome {
    let w = |xs: [u64; 5]| xs.map(|x| u(x, 1));
    exact_table(
        |a, n| arbiter_count(a, n).map(|c| u(c, 1)).map_err(|e| e.to_string()),
        [(64, w([63, 63, 64, 80, 9])), (256, w([255, 255, 256, 288, 12]))],
    )
}

fn c4_simulation_matches_formulas() -> Outcome {
    let mut worst_z: f64 = 0.0;
    for n in [16u32, 64, 256] {
        for arch in ORDER {
            for mode in [ArbMode::Sparse, ArbMode::Burst] {
                let r = measure_point(arch, n, mode, 100_000, 1000 + n as u64).map_err(|e| e.to_string())?;
                ensure(r.within_tolerance == Some(true), || {
                    format!("{arch} N={n} {}: sim {} vs analytic {:?}", mode.name(), r.sim_mean, r.analytic)
                })?;
                if arch.is_stochastic_sparse() && mode == ArbMode::Sparse {
                    let se = r.sim_ci95 / 1.96;
                    worst_z = worst_z.max((r.sim_mean - r.analytic.unwrap()).abs() / se);
                }
            }
        }
        let hat = measure_point(A::HierArbiterTree, n, ArbMode::Burst, 1, 7).map_err(|e| e.to_string())?;
        let target = 17.0 / 16.0 * n as f64 + 3.0;
        ensure((hat.sim_mean - target).abs() <= 0.1 * target, || {
            format!("hat burst N={n}: {} vs {target}", hat.sim_mean)
        })?;
    }
    Ok(format!("30 points; stochastic sparse worst |z| = {worst_z:.2}"))
}

fn c5_sparse_dominance() -> Outcome {
    let mut ratio256 = f64::NAN;
    for n in [16u32, 64, 256, 1024] {
        let rows: Vec<_> = ORDER
            .iter()
            .map(|&a| measure_point(a, n, ArbMode::Sparse, 20_000, 500 + n as u64))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        let hat = rows[4].sim_mean;
        for r in &rows[..4] {
            // a statistical tie (hier-ring at N=16) counts as not beaten
            let se = r.sim_ci95 / 1.96;
            ensure(hat <= r.sim_mean + 3.0 * se, || {
                format!("N={n}: hier-tree {hat} beaten by {} {}", r.arch, r.sim_mean)
            })?;
        }
        if n == 256 {
            ratio256 = hat / rows[2].sim_mean;
        }
    }
    ensure(ratio256 <= 0.3, || format!("hier-tree/token-ring at 256 = {ratio256:.3}"))?;
    Ok(format!("minimum at every N; hier-tree/token-ring at 256 = {ratio256:.3}"))
}

fn c6_arbitration_properties() -> Outcome {
    let mut total = 0usize;
    let mut grants = 0usize;
    let mut chunk = 0u64;
    while total < 1_000_000 {
        for arch in ORDER {
            let n = [16u32, 64, 256][(chunk % 3) as usize];
            let rate = [0.05, 0.5, 4.0][((chunk / 3) % 3) as usize];
            let spikes = Workload::new(
                WorkloadKind::Poisson {
                    rate,
                    duration: (10_000.0 / rate) as u64,
                },
                chunk,
            )
            .generate(n)
            .map_err(|e| e.to_string())?;
            let mut inst = ArbiterInstance::new(ArbiterConfig::new(arch, n), chunk).map_err(|e| e.to_string())?;
            let events = inst.simulate(&spikes);
            let tag = || format!("{arch} N={n} rate={rate} seed={chunk}");
            let v = mutual_exclusion_violations(inst.grant_log());
            ensure(v.is_empty(), || format!("{}: {} overlapping grants", tag(), v.len()))?;
            let mut want: BTreeMap<(u32, SimTime), i64> = BTreeMap::new();
            for s in &spikes {
                *want.entry((s.neuron, s.t)).or_default() += 1;
            }
            for e in &events {
                ensure(e.encoded_address == e.neuron_id, || {
                    format!("{}: neuron {} encoded {}", tag(), e.neuron_id, e.encoded_address)
                })?;
                *want.entry((e.neuron_id, e.t_request)).or_default() -= 1;
            }
            let bad = want.values().filter(|&&c| c != 0).count();
            ensure(bad == 0, || format!("{}: {bad} lost or duplicated requests", tag()))?;
            // zero-cost re-service of the token holder may share a timestamp
            ensure(events.windows(2).all(|w| w[0].t_output <= w[1].t_output), || {
                format!("{}: outputs out of order", tag())
            })?;
            total += events.len();
            grants += inst.grant_log().len();
            chunk += 1;
        }
    }
    Ok(format!("{total} events, {grants} grants, {chunk} runs"))
}

fn c7_pipeline() -> Outcome {
    let d = PipelineDelays::default();
    for id in 0..64u32 {
        let run = run_pipeline(3, &[Spike { t: SimTime::ZERO, neuron: id }], &d, None).map_err(|e| e.to_string())?;
        let p = &run.packets[0].packet;
        ensure(run.packets.len() == 1 && p.address == id && p.bits == 6 && p.valid, || {
            format!("id {id}: {:?}", run.packets)
        })?;
    }
    let burst: Vec<Spike> = (20..24).map(|neuron| Spike { t: SimTime::ZERO, neuron }).collect();
    let run = run_pipeline(3, &burst, &d, None).map_err(|e| e.to_string())?;
    ensure(run.arbitrations == [1, 1, 4], || format!("burst arbitrations {:?}", run.arbitrations))?;

    let check = |spikes: &[Spike], delays: &PipelineDelays| -> Result<Vec<String>, String> {
        let mut tr = Trace::unbounded();
        run_pipeline(3, spikes, delays, Some(&mut tr)).map_err(|e| e.to_string())?;
        Ok(check_timing(&tr.into_vec()).into_iter().map(|v| v.constraint).collect())
    };
    let nominal: Vec<Spike> = (0..64).map(|i| Spike { t: SimTime((i as u64 * 37) % 500), neuron: i }).collect();
    let v = check(&nominal, &d)?;
    ensure(v.is_empty(), || format!("nominal run flagged {v:?}"))?;
    let faulted: Vec<Spike> = [5u32, 6, 40].iter().map(|&neuron| Spike { t: SimTime::ZERO, neuron }).collect();
    for (delays, constraint) in [
        (PipelineDelays { latch_close: SimTime(5_000), ..d }, "latch-close-before-reset"),
        (PipelineDelays { skip_input_handshake: true, ..d }, "latch-reopen-after-reset"),
        (PipelineDelays { cd_mask: SimTime(10), ..d }, "v-before-d"),
    ] {
        let v = check(&faulted, &delays)?;
        ensure(v.iter().any(|c| c == constraint), || format!("fault for {constraint} gave {v:?}"))?;
    }
    Ok("64 ids exact; burst arbitrations [1, 1, 4]; 3 faults caught".into())
}

fn naive(words: &[u64], key: u64) -> Vec<bool> {
    words.iter().map(|&w| w == key).collect()
}

fn c8_cam_oracle() -> Outcome {
    let configs = |w: u32| {
        [
            (CompletionMode::cscd(), Mechanisms::all(3.min(w))),
            (CompletionMode::DelayLine { setting: 60 }, Mechanisms::NONE),
        ]
    };
    let mut searches = 0u64;
    for width in 1..=8u32 {
        for entries in [1usize, 2, 7, 16] {
            for fill in 0..4u64 {
                for (mode, mech) in configs(width) {
                    let mut a = CamArray::new(entries, width, DeviceModel::default(), fill)
                        .map_err(|e| e.to_string())?
                        .with_mode(mode)
                        .with_mechanisms(mech);
                    if fill == 0 {
                        for j in 0..entries {
                            a.write_entry(j, j as u64 % (1 << width)).map_err(|e| e.to_string())?;
                        }
                    } else {
                        a.fill_random(fill);
                    }
                    for key in 0..1u64 << width {
                        let got = a.search(key).map_err(|e| e.to_string())?.match_flags;
                        ensure(got == naive(a.words(), key), || format!("W={width} n={entries} key={key}"))?;
                        searches += 1;
                    }
                }
            }
        }
    }
    let mut rng = SimRng::new(88);
    let mut a = CamArray::new(512, 11, DeviceModel::default(), 88)
        .map_err(|e| e.to_string())?
        .with_mode(CompletionMode::cscd())
        .with_mechanisms(Mechanisms::all(3));
    for t in 0..10_000u64 {
        if t % 100 == 0 {
            a.fill_random(rng.next_u64());
        }
        // half the keys are stored words so matches actually occur
        let key = if t % 2 == 0 { rng.bits(11) } else { a.words()[rng.below(512) as usize] };
        let got = a.search(key).map_err(|e| e.to_string())?.match_flags;
        ensure(got == naive(a.words(), key), || format!("512x11 trial {t}"))?;
        searches += 1;
    }
    Ok(format!("{searches} searches, 0 mismatches"))
}

fn c9_speculative_probability() -> Outcome {
    let p = speculative_close_probability(10, 3).map_err(|e| e.to_string())?;
    ensure(p == Probability::new(897, 1024), || format!("formula gave {p}"))?;
    let samples = 1_000_000u64;
    let mut rng = SimRng::new(9);
    let mut a = CamArray::new(1, 10, DeviceModel::default(), 9)
        .map_err(|e| e.to_string())?
        .with_mode(CompletionMode::cscd())
        .with_mechanisms(Mechanisms { feedback: false, speculative: Some(3) });
    let mut hits = 0u64;
    for _ in 0..samples {
        a.write_entry(0, rng.bits(10)).map_err(|e| e.to_string())?;
        let r = a.search(rng.bits(10)).map_err(|e| e.to_string())?;
        if r.match_flags[0] || r.entries[0].close_cause == CloseCause::Speculative {
            hits += 1;
        }
    }
    let pf = 897.0 / 1024.0;
    let freq = hits as f64 / samples as f64;
    let se = (pf * (1.0 - pf) / samples as f64).sqrt();
    let z = (freq - pf) / se;
    ensure(z.abs() <= 3.0, || format!("frequency {freq:.5} vs {pf:.5}, z = {z:.2}"))?;
    Ok(format!("897/1024 exact; Monte-Carlo {freq:.5}, z = {z:.2}"))
}

fn c10_cam_trends() -> Outcome {
    let points = [CamPoint::SMALL, CamPoint::LARGE];
    let rep = cam_report(&points, 400, 3, 2024, 0).map_err(|e| e.to_string())?;
    let eps = 1e-9;
    let flags = [(false, false), (false, true), (true, false), (true, true)];
    for p in points {
        for case in SearchCase::ALL {
            let row = |mode: &str, fb: bool, spec: bool| {
                rep.row(p, mode, fb, spec, case)
                    .ok_or_else(|| format!("missing row {mode} fb={fb} spec={spec}"))
            };
            let base = row("delay-line", false, false)?.energy_mean;
            let full = row("cscd", true, true)?.energy_mean;
            for (fb, spec) in flags {
                let (c, d) = (row("cscd", fb, spec)?, row("delay-line", fb, spec)?);
                ensure(c.cycle_mean <= d.cycle_mean, || {
                    format!("(a) {}x{} {} fb={fb} spec={spec}: cscd {} > dl {}", p.entries, p.width, case.name(), c.cycle_mean, d.cycle_mean)
                })?;
                for e in [c.energy_mean, d.energy_mean] {
                    ensure(full <= e + eps && e <= base + eps, || {
                        format!("(c) {}x{} {}: {full} <= {e} <= {base} fails", p.entries, p.width, case.name())
                    })?;
                }
            }
        }
    }
    let (small, large) = (
        rep.cycle_improvement(CamPoint::SMALL).unwrap(),
        rep.cycle_improvement(CamPoint::LARGE).unwrap(),
    );
    ensure(large >= small, || format!("(b) improvement 512x11 {large:.3} < 16x11 {small:.3}"))?;
    let mut random = Vec::new();
    for p in points {
        let s = |mode: &str, fb, spec, case| rep.energy_saving(p, mode, fb, spec, case).unwrap();
        let r = s("cscd", true, true, SearchCase::Random);
        ensure((0.35..=0.55).contains(&r), || format!("(d) random saving {r:.3} at {}x{}", p.entries, p.width))?;
        random.push(r);
        let m = SearchCase::AllMatch;
        ensure(
            (s("cscd", true, true, m) - s("cscd", true, false, m)).abs() < eps
                && s("delay-line", false, true, m).abs() < eps
                && s("cscd", true, false, m) > 0.0,
            || "(d) all-match saving not driven by feedback and CSCD alone".into(),
        )?;
        let x = SearchCase::AllMismatch;
        ensure(
            s("delay-line", false, true, x) > 0.0
                && s("delay-line", true, false, x).abs() < eps
                && s("cscd", true, true, x) > s("cscd", true, false, x),
            || "(d) all-mismatch saving not driven by speculative sense".into(),
        )?;
    }
    Ok(format!(
        "cycle improvement {small:.3} -> {large:.3}; random saving {:.3} / {:.3}",
        random[0], random[1]
    ))
}

fn c11_cscd_margin() -> Outcome {
    let mut out = Vec::new();
    for p in [CamPoint::SMALL, CamPoint::LARGE] {
        let mut a = CamArray::new(p.entries, p.width, DeviceModel::default(), 11)
            .map_err(|e| e.to_string())?
            .with_mode(CompletionMode::cscd())
            .with_mechanisms(Mechanisms::all(3));
        a.fill_random(11);
        let m = worst_case_current_margin(&a, 11).map_err(|e| e.to_string())?;
        let min = m.cases.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
        let tail = m.cases.iter().find(|c| c.0 == CurrentCase::MismatchInTail).map(|c| c.1);
        ensure(m.weakest == CurrentCase::MismatchInTail && tail == Some(min), || {
            format!("{}x{}: weakest {:?} in {:?}", p.entries, p.width, m.weakest, m.cases)
        })?;
        ensure(m.margin > 1.0, || format!("{}x{}: margin {}", p.entries, p.width, m.margin))?;
        out.push(format!("{:.2}", m.margin));
    }
    Ok(format!("mismatch-in-tail weakest; margins {}", out.join(" / ")))
}

fn c12_cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let runs: [&[&str]; 7] = [
        &["arb", "run", "--arch", "token-ring", "--n", "64,256", "--trials", "2000", "--format", "csv"],
        &["arb", "tables", "--n", "64,256", "--trials", "2000", "--format", "json"],
        &["sweep", "--mode", "poisson", "--trials", "200", "--format", "csv"],
        &["cam", "search", "--completion", "delay-line", "--trials", "300", "--format", "csv"],
        &["cam", "report", "--trials", "50", "--format", "json"],
        &["demo", "--arch", "greedy-tree", "--n", "64", "--format", "json"],
        &["arb", "run", "--mode", "burst", "--format", "text"],
    ];
    for (i, args) in runs.iter().enumerate() {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let path = dir.path().join(format!("{i}-{rep}.out"));
            let st = Command::new(env!("CARGO_BIN_EXE_hatsim"))
                .args(*args)
                .args(["--seed", "31", "--out"])
                .arg(&path)
                .status()
                .map_err(|e| e.to_string())?;
            ensure(st.success(), || format!("{args:?} exited {st}"))?;
            outputs.push(std::fs::read(&path).map_err(|e| e.to_string())?);
        }
        ensure(outputs[0] == outputs[1], || format!("{args:?} differs between runs"))?;
        ensure(!outputs[0].is_empty() && std::str::from_utf8(&outputs[0]).is_ok(), || {
            format!("{args:?} produced empty or non-UTF-8 output")
        })?;
    }
    Ok(format!("{} invocations byte-identical", runs.len()))
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("sparse latency formulas", c1_sparse_formulas),
        ("burst latency formulas", c2_burst_formulas),
        ("arbiter counts", c3_arbiter_counts),
        ("simulation matches formulas", c4_simulation_matches_formulas),
        ("sparse-mode dominance", c5_sparse_dominance),
        ("arbitration correctness", c6_arbitration_properties),
        ("hierarchical pipeline", c7_pipeline),
        ("CAM functional oracle", c8_cam_oracle),
        ("speculative close probability", c9_speculative_probability),
        ("CAM relative trends", c10_cam_trends),
        ("CSCD worst-case margin", c11_cscd_margin),
        ("CLI determinism", c12_cli_determinism),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let k = i + 1;
        if only.is_some_and(|o| o != k) {
            continue;
        }
        let start = Instant::now();
        let r = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match r {
            Ok(detail) => println!("PASS {k:>2} {name}: {detail} ({secs:.1} s)"),
            Err(why) => {
                failed += 1;
                println!("FAIL {k:>2} {name}: {why} ({secs:.1} s)");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
