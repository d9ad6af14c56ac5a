//! One line per acceptance criterion; exits non-zero if any fails.

mod common;

use std::path::Path;
use std::time::{Duration, Instant};

use common::*;
use omagent_core::engine::{DncOutcome, DEPTH_EXCEEDED};
use omagent_core::eval::{load_dataset, run_benchmark, BenchmarkOptions, Category, EvalReport, Mode};
use omagent_core::fixtures;
use omagent_core::task_tree::TaskStatus;
use omagent_core::toolbox::{rewind_args, ToolCall};
use omagent_core::trace::{TraceDocument, TraceEvent};
use omagent_core::video::{detect_scenes, sample_frames, DetectionParams};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn random_table(rng: &mut StdRng) -> (Table, String) {
    let mut table = Table::new();
    let mut next = 1;
    let mut queue = vec![("t0".to_string(), 0u32)];
    while let Some((task, level)) = queue.pop() {
        let roll: f64 = rng.gen();
        let plan = if level < 4 && roll < 0.45 {
            let n = rng.gen_range(1..=4);
            let subs: Vec<String> = (0..n).map(|i| format!("t{}", next + i)).collect();
            next += n;
            queue.extend(subs.iter().rev().map(|s| (s.clone(), level + 1)));
            Plan::Split(subs)
        } else if roll < 0.7 {
            answer("done")
        } else if roll < 0.85 {
            lookup(if rng.gen_bool(0.5) { "cafe" } else { "gone" })
        } else {
            Plan::Refuse("no".into())
        };
        table.push((task, plan));
    }
    (table, "t0".into())
}

fn dnc_conformance() -> Check {
    ensure(DEPTH_EXCEEDED == "Task tree depth exceeded", "depth message changed")?;
    let table = heist_table();
    let exec = run_engine(
        &scripted_agent(&table),
        &heist_tools(),
        omagent_core::engine::EngineConfig { max_depth: 2, ..Default::default() },
        HEIST,
    );
    let want = reference(&table, &["cafe"], HEIST, 2);
    let got = observed(&exec);
    ensure(got.judged == want.judged && got.statuses == want.statuses, "heist run differs from the reference")?;
    let verdicts: std::collections::BTreeSet<&str> = exec
        .events
        .iter()
        .filter_map(|e| match e {
            TraceEvent::Conquered { verdict, .. } => Some(verdict.as_str()),
            _ => None,
        })
        .collect();
    ensure(verdicts.len() == 3, format!("verdicts seen: {verdicts:?}"))?;
    let deepest = exec.tree.nodes().filter(|n| n.status != TaskStatus::TooDeep).map(|n| n.depth).max().unwrap_or(0);
    ensure(deepest >= 2, "nesting under two levels")?;
    let limited = exec.tree.nodes().any(|n| n.failure_reason.as_deref() == Some("Task tree depth exceeded"));
    ensure(limited, "no node hit the depth limit")?;

    let flat: Table = vec![("Do everything".into(), split(&["one", "two"]))];
    let zero = run_engine(
        &scripted_agent(&flat),
        &heist_tools(),
        omagent_core::engine::EngineConfig { max_depth: 0, ..Default::default() },
        "Do everything",
    );
    ensure(zero.outcome == DncOutcome::Unresolved("Task tree depth exceeded".into()), "max_depth 0 did not stop")?;

    let mut rng = StdRng::seed_from_u64(1);
    let runs = 300;
    for i in 0..runs {
        let (table, root) = random_table(&mut rng);
        let depth = rng.gen_range(0..5);
        let exec = run_engine(
            &scripted_agent(&table),
            &heist_tools(),
            omagent_core::engine::EngineConfig { max_depth: depth, ..Default::default() },
            &root,
        );
        let (got, want) = (observed(&exec), reference(&table, &["cafe"], &root, depth));
        ensure(
            got.judged == want.judged && got.statuses == want.statuses && got.root == want.root,
            format!("random script {i} differs"),
        )?;
    }
    Ok(format!("heist scenario plus {runs} random scripts match the reference"))
}

fn scene_detection() -> Check {
    let mut rng = StdRng::seed_from_u64(7);
    for i in 0..200 {
        let frames = random_stream(&mut rng);
        let (th, min) = (rng.gen_range(0.02..0.9), rng.gen_range(0.1..12.0));
        let params = DetectionParams { diff_threshold: th, min_segment_seconds: min, ..Default::default() };
        let got = detect_scenes(&frames, &params).map_err(|e| e.to_string())?;
        ensure(got == scene_oracle(&frames, th, min), format!("stream {i} differs from the oracle"))?;
        check_tiling(&got, &frames, 1e-9).map_err(|e| format!("stream {i}: {e}"))?;
    }
    let mut rng = StdRng::seed_from_u64(11);
    for i in 0..50 {
        let frames = random_stream(&mut rng);
        let min = rng.gen_range(0.5..6.0);
        let counts: Vec<usize> = (1..20)
            .map(|k| {
                let p =
                    DetectionParams { diff_threshold: k as f64 * 0.05, min_segment_seconds: min, ..Default::default() };
                detect_scenes(&frames, &p).map(|s| s.len()).unwrap_or(usize::MAX)
            })
            .collect();
        ensure(counts.windows(2).all(|w| w[0] >= w[1]), format!("stream {i} not monotone: {counts:?}"))?;
    }
    Ok("200 streams equal the oracle and tile exactly; 50 streams monotone".into())
}

fn vector_search() -> Check {
    const DIM: usize = 24;
    let mut rng = StdRng::seed_from_u64(3);
    let entries = random_entries(&mut rng, 10_000, DIM);
    let store = store_of(&entries, DIM);
    for i in 0..100 {
        let q: Vec<f32> = if i % 3 == 0 {
            entries[rng.gen_range(0..entries.len())].embedding.clone()
        } else {
            (0..DIM).map(|_| rng.gen_range(-1.0..1.0)).collect()
        };
        let video = (i % 2 == 0).then(|| VIDEOS[i % 3]);
        let window = match i % 4 {
            0 => None,
            1 => {
                let t = rng.gen_range(0.0..60_000.0);
                Some((t, t))
            }
            _ => {
                let a = rng.gen_range(0.0..60_000.0);
                Some((a, a + rng.gen_range(1.0..5_000.0)))
            }
        };
        let k = [1, 5, 10, 50][i % 4];
        let got: Vec<(String, f64)> = store
            .vector_search(&q, &filter_of(video, window), k)
            .map_err(|e| e.to_string())?
            .into_iter()
            .map(|h| (h.entry.entry_id, h.score))
            .collect();
        ensure(got == brute_top_k(&entries, &q, video, window, k), format!("query {i} ranks differ"))?;
    }

    let small = random_entries(&mut rng, 300, 4);
    let store = store_of(&small, 4);
    let mut points: Vec<f64> = small.iter().flat_map(|e| [e.start_ts, e.end_ts]).collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    let probes: Vec<f64> = points.iter().step_by(9).flat_map(|&p| [p - 0.25, p, p + 0.25]).collect();
    let mut windows = 0;
    for (i, &a) in probes.iter().enumerate() {
        for &b in probes[i..].iter().step_by(4) {
            let got: std::collections::BTreeSet<String> = store
                .vector_search(&[1.0, 0.0, 0.0, 0.0], &filter_of(None, Some((a, b))), small.len())
                .map_err(|e| e.to_string())?
                .into_iter()
                .map(|h| h.entry.entry_id)
                .collect();
            let want = small.iter().filter(|e| admitted(e, None, Some((a, b)))).map(|e| e.entry_id.clone()).collect();
            ensure(got == want, format!("window [{a}, {b}] is unsound or incomplete"))?;
            windows += 1;
        }
    }
    Ok(format!("100 queries over 10000 entries exact; {windows} windows sound and complete"))
}

fn scoring() -> Check {
    let cases = scoring_cases();
    let wrong: Vec<usize> = cases
        .iter()
        .enumerate()
        .filter(|(_, c)| {
            let (got, want) = run_scoring_case(c);
            got != want
        })
        .map(|(i, _)| i)
        .collect();
    ensure(wrong.is_empty(), format!("cases {wrong:?} scored wrongly"))?;
    Ok(format!("{} cases", cases.len()))
}

fn evaluate(
    ws: &omagent_core::workspace::Workspace,
    dataset: &Path,
    mode: Mode,
    traces: Option<&Path>,
) -> Result<EvalReport, String> {
    let questions = load_dataset(dataset).map_err(|e| e.to_string())?;
    let session = ws.session().map_err(|e| e.to_string())?;
    let system = ws.answerer(&session, mode, false);
    let opts = BenchmarkOptions { concurrency: 1, trace_dir: traces.map(Path::to_path_buf) };
    run_benchmark(&questions, system.as_ref(), &ws.video_types(), &opts).map_err(|e| e.to_string())
}

fn end_to_end() -> Check {
    let (_dir, ws) = fixture_workspace();
    let dataset = ws.root().join(fixtures::DATASET_FILE);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let report = evaluate(&ws, &dataset, Mode::Omagent, Some(a.path()))?;
    ensure(report.total.total == 20, format!("{} questions", report.total.total))?;
    let missed: Vec<&str> = report.records.iter().filter(|r| !r.correct).map(|r| r.qid.as_str()).collect();
    ensure(missed.is_empty(), format!("missed {missed:?}"))?;
    evaluate(&ws, &dataset, Mode::Omagent, Some(b.path()))?;

    let scene = TraceDocument::load(&a.path().join("A2.json")).map_err(|e| e.to_string())?;
    ensure(scene.count("divided") >= 1, "scene-change trace has no divider event")?;
    ensure(scene.tool_calls("rewinder").count() >= 1, "scene-change trace has no rewinder call")?;
    for r in &report.records {
        let name = format!("{}.json", r.qid);
        let (x, y) = (std::fs::read(a.path().join(&name)), std::fs::read(b.path().join(&name)));
        ensure(x.is_ok() && x.ok() == y.ok(), format!("trace {name} differs between runs"))?;
    }
    Ok("20/20 correct; scene-change trace divides and rewinds; traces byte-identical".into())
}

fn detail_loss() -> Check {
    let (_dir, ws) = fixture_workspace();
    let dataset = ws.root().join(fixtures::DETAIL_LOSS_FILE);
    let acc = |mode| -> Result<f64, String> {
        let r = evaluate(&ws, &dataset, mode, None)?;
        Ok(r.category(Category::EventLocalization).map(|a| a.accuracy).unwrap_or(0.0))
    };
    let (om, stt, rag) = (acc(Mode::Omagent)?, acc(Mode::FramesStt)?, acc(Mode::Video2rag)?);
    ensure(om > stt && om > rag, format!("omagent {om:.2}, frames_stt {stt:.2}, video2rag {rag:.2}"))?;
    Ok(format!("event localization: omagent {om:.2}, frames_stt {stt:.2}, video2rag {rag:.2}"))
}

fn rewinder_recovery() -> Check {
    let (_dir, ws) = fixture_workspace();
    let session = ws.session().map_err(|e| e.to_string())?;
    let source = session.library.require(fixtures::ROY_FAMILY).map_err(|e| e.to_string())?.clone();
    let (lo, hi) = (152.0, 153.0);
    let entry = ws
        .store()
        .entries(Some(fixtures::ROY_FAMILY))
        .into_iter()
        .find(|e| e.start_ts <= lo && lo < e.end_ts)
        .ok_or("no segment holds the event")?;
    let sampled = sample_frames(entry.span(), &source.frames, 10).map_err(|e| e.to_string())?;
    ensure(sampled.frames.len() == 10, "segment did not yield 10 samples")?;
    ensure(sampled.frames.iter().all(|f| f.timestamp < lo || f.timestamp >= hi), "a sampled frame shows the event")?;
    ensure(!entry.caption_text.contains("drops"), "the stored caption already mentions the event")?;

    let rewind = |fps: f64| {
        let mut args =
            rewind_args(fixtures::ROY_FAMILY, entry.start_ts, entry.end_ts, "Does a cigarette drop to the ground?");
        args["granularity"] = serde_json::json!(fps);
        session.tools.invoke(&ToolCall::new("rewinder", args))
    };
    let fine = rewind(1.0);
    ensure(
        fine.ok && fine.content.contains("00:02:32") && fine.content.contains("drops"),
        format!("1 fps: {}", fine.content),
    )?;
    let coarse = rewind(0.2);
    ensure(!coarse.content.contains("drops"), format!("0.2 fps found it: {}", coarse.content))?;

    let d1 = |mode| -> Result<bool, String> {
        let r = evaluate(&ws, &ws.root().join(fixtures::DETAIL_LOSS_FILE), mode, None)?;
        Ok(r.records.iter().find(|r| r.qid == "D1").ok_or("no D1")?.correct)
    };
    ensure(!d1(Mode::Video2rag)?, "video2rag answered the one-second event")?;
    ensure(d1(Mode::Omagent)?, "omagent missed the one-second event")?;
    Ok(format!(
        "event at 00:02:32 missed by the 10 samples of [{}, {}]; found at 1 fps, not at 0.2 fps or by video2rag",
        entry.start_ts, entry.end_ts
    ))
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Check); 7] = [
        ("dnc conformance", Duration::from_secs(5), dnc_conformance),
        ("scene detection", Duration::from_secs(10), scene_detection),
        ("vector search", Duration::from_secs(30), vector_search),
        ("scoring rules", Duration::from_secs(5), scoring),
        ("end-to-end fixtures", Duration::from_secs(60), end_to_end),
        ("detail-loss ablation", Duration::from_secs(60), detail_loss),
        ("rewinder recovery", Duration::from_secs(60), rewinder_recovery),
    ];
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(_) if took > *budget => Err(format!("took {took:.2?}, budget {budget:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS [{}] {name}: {detail} ({took:.2?})", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL [{}] {name}: {why} ({took:.2?})", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
