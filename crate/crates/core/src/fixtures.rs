//! Two synthetic videos with scripted content, a 20-question dataset over
//! them, and the agent and search scripts that drive the offline runs.
//!
//! `write_all(dir)` lays everything out so `dir` can be opened directly as
//! a [`crate::workspace::Workspace`].

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use crate::error::Result;
use crate::eval::{save_dataset, Category, EvalQuestion, GroundTruth};
use crate::providers::{Condition, ProviderConfig, ProviderKind, ProvidersConfig, Rule, Script, SearchSnippet};
use crate::video::{
    BoundingBox, EventScript, FaceTrack, FrameRecord, SceneScript, SyntheticScript, Utterance, VideoManifest, VideoType,
};

pub const ROY_FAMILY: &str = "roy_family";
pub const WILD_COAST: &str = "wild_coast";
pub const FEATURE_DIM: usize = 8;

pub const MANIFEST_DIR: &str = "manifests";
pub const DATASET_FILE: &str = "dataset.jsonl";
pub const DETAIL_LOSS_FILE: &str = "detail_loss.jsonl";
pub const AGENT_SCRIPT_FILE: &str = "agent_script.json";
pub const SEARCH_FILE: &str = "search.json";

type SceneRow<'a> = (f64, f64, &'a str, &'a str, &'a [&'a str]);

fn scenes(rows: &[SceneRow]) -> Vec<SceneScript> {
    rows.iter()
        .map(|&(t0, t1, location, tod, details)| SceneScript {
            t0,
            t1,
            location: location.into(),
            time_of_day: Some(tod.into()),
            details: details.iter().map(|d| d.to_string()).collect(),
        })
        .collect()
}

fn events(rows: &[(f64, f64, &str)]) -> Vec<EventScript> {
    rows.iter().map(|&(t0, t1, text)| EventScript { t0, t1, text: text.into() }).collect()
}

fn say(speaker: &str, t0: f64, t1: f64, text: &str) -> Utterance {
    Utterance { speaker: speaker.into(), text: text.into(), t0, t1 }
}

fn face(label: &str, t0: f64, t1: f64) -> FaceTrack {
    FaceTrack { t0, t1, label: label.into(), bbox: BoundingBox { x: 0.3, y: 0.2, w: 0.25, h: 0.4 } }
}

/// One-hot scene colour plus a small per-frame wobble, so histogram
/// distance is near zero inside a scene and large across scenes.
fn frame_feature(scene: usize, t: f64) -> Vec<f32> {
    let mut v = vec![0.05f32; FEATURE_DIM];
    v[scene % FEATURE_DIM] += 1.0;
    let wobble = ((t as u64).wrapping_mul(2_654_435_761) % 1000) as f32 / 1000.0;
    v[(scene + 1) % FEATURE_DIM] += 0.01 * wobble;
    v
}

fn frames(script: &SyntheticScript, duration: f64) -> Vec<FrameRecord> {
    (0..=duration as usize)
        .map(|i| {
            let t = i as f64;
            let scene = script
                .scenes
                .iter()
                .position(|s| s.t0 <= t && t < s.t1)
                .unwrap_or(script.scenes.len().saturating_sub(1));
            FrameRecord { timestamp: t, feature: Some(frame_feature(scene, t)), image: None }
        })
        .collect()
}

fn manifest(
    video_id: &str,
    title: &str,
    video_type: VideoType,
    duration: f64,
    script: SyntheticScript,
    transcript: Vec<Utterance>,
    faces: Vec<FaceTrack>,
) -> VideoManifest {
    VideoManifest {
        video_id: video_id.into(),
        title: Some(title.into()),
        video_type: Some(video_type),
        duration,
        audio: None,
        frames: frames(&script, duration),
        transcript,
        faces,
        script: Some(script),
    }
}

/// A drama episode: seven scenes, two of them on the same street, and two
/// one-second events that a 4 s sampling grid misses.
pub fn roy_family() -> VideoManifest {
    let script = SyntheticScript {
        scenes: scenes(&[
            (0.0, 60.0, "private jet cabin", "morning", &["cream leather seats", "champagne on a tray"]),
            (60.0, 120.0, "rooftop helipad", "morning", &["a red helicopter", "strong wind"]),
            (120.0, 160.0, "city street", "night", &["wet asphalt", "yellow taxis"]),
            (160.0, 240.0, "city street", "night", &["a newsstand", "neon signs"]),
            (240.0, 300.0, "office lobby", "night", &["marble floor", "security desk"]),
            (300.0, 360.0, "executive office", "night", &["glass desk", "skyline windows"]),
            (360.0, 420.0, "parking garage", "night", &["concrete pillars", "black sedan"]),
        ]),
        events: events(&[
            (10.0, 30.0, "Roman pours champagne"),
            (70.0, 90.0, "The helicopter lands on the roof"),
            (125.0, 150.0, "Kendall smokes a cigarette"),
            (152.0, 153.0, "A cigarette drops to the ground"),
            (170.0, 200.0, "Kendall buys a newspaper"),
            (250.0, 270.0, "Kendall shows a badge at the security desk"),
            (310.0, 330.0, "Logan signs a contract"),
            (318.0, 319.0, "A phone screen lights up on the glass desk"),
            (370.0, 400.0, "Shiv drives away in a black sedan"),
        ]),
    };
    let transcript = vec![
        say("Roman", 5.0, 9.0, "Morning, everyone, the champagne is on me."),
        say("Logan", 75.0, 80.0, "Get everyone inside before the wind picks up."),
        say("Kendall", 175.0, 179.0, "I need to see the morning papers."),
        say("Logan", 320.0, 326.0, "Sign it today or we lose the deal."),
        say("Shiv", 375.0, 379.0, "I'm not coming back tonight."),
    ];
    let faces = vec![
        face("Roman Roy", 0.0, 60.0),
        face("Kendall Roy", 120.0, 280.0),
        face("Logan Roy", 330.0, 350.0),
        face("Shiv Roy", 360.0, 420.0),
    ];
    manifest(ROY_FAMILY, "The Roy Family", VideoType::EpisodeMovie, 420.0, script, transcript, faces)
}

/// A nature documentary with a recurring event (a seal surfacing three times).
pub fn wild_coast() -> VideoManifest {
    let script = SyntheticScript {
        scenes: scenes(&[
            (0.0, 60.0, "tidal flats", "dawn", &["low fog", "shallow pools"]),
            (60.0, 120.0, "pelican colony", "dawn", &["nests of sticks", "rocky ledge"]),
            (120.0, 180.0, "ranger station", "midday", &["radio equipment", "field notebooks"]),
            (180.0, 240.0, "kelp forest", "midday", &["green kelp", "sea otters"]),
            (240.0, 300.0, "beach at sunset", "evening", &["orange sky", "driftwood"]),
        ]),
        events: events(&[
            (10.0, 40.0, "A heron hunts fish in the shallows"),
            (27.0, 30.0, "A seal surfaces near the rocks"),
            (70.0, 100.0, "A pelican chick collapses in the nest"),
            (100.0, 115.0, "An adult pelican feeds a chick"),
            (130.0, 150.0, "A ranger weighs a pelican chick"),
            (190.0, 220.0, "A sea otter cracks a clam on a rock"),
            (201.0, 204.0, "A seal surfaces near the rocks"),
            (250.0, 280.0, "The ranger releases a tagged pelican"),
            (279.0, 282.0, "A seal surfaces near the rocks"),
        ]),
    };
    let transcript = vec![
        say("Narrator", 2.0, 8.0, "At dawn the tide retreats from the flats."),
        say("Narrator", 72.0, 78.0, "Food is scarce this season and the weakest chicks struggle."),
        say("Maya", 135.0, 140.0, "This chick weighs barely two kilos."),
        say("Narrator", 195.0, 200.0, "Otters use stones as tools."),
        say("Maya", 255.0, 260.0, "Off you go, tag number forty two."),
    ];
    let faces = vec![face("Maya", 120.0, 180.0), face("Maya", 240.0, 300.0)];
    manifest(WILD_COAST, "Wild Coast", VideoType::Documentary, 300.0, script, transcript, faces)
}

pub fn manifests() -> Vec<VideoManifest> {
    vec![roy_family(), wild_coast()]
}

fn choice(
    qid: &str,
    video: &str,
    category: Category,
    question: &str,
    options: &[&str],
    truth: &[char],
) -> EvalQuestion {
    EvalQuestion {
        qid: qid.into(),
        video_id: video.into(),
        category,
        question: question.into(),
        options: options.iter().enumerate().map(|(i, o)| ((b'a' + i as u8) as char, o.to_string())).collect(),
        ground_truth: GroundTruth::Labels(truth.to_vec()),
    }
}

fn locate(qid: &str, video: &str, question: &str, truth: &[&str]) -> EvalQuestion {
    EvalQuestion {
        qid: qid.into(),
        video_id: video.into(),
        category: Category::EventLocalization,
        question: question.into(),
        options: BTreeMap::new(),
        ground_truth: GroundTruth::Times(truth.iter().map(|t| t.to_string()).collect()),
    }
}

pub fn dataset() -> Vec<EvalQuestion> {
    use Category::*;
    let (r, w) = (ROY_FAMILY, WILD_COAST);
    vec![
        locate("A1", r, "When was the first time a cigarette dropped to the ground?", &["00:02:32"]),
        choice(
            "A2",
            r,
            Reasoning,
            "Are there any scene changes between 03:58 and 04:02, and what is their connection?",
            &[
                "Scene change from city street to office lobby; both scenes feature Kendall Roy",
                "Scene change from private jet cabin to rooftop helipad; both scenes feature Roman Roy",
                "No scene change; the street stays empty",
            ],
            &['a'],
        ),
        choice(
            "A3",
            r,
            InformationSummary,
            "Who is the person at 5 minutes and 41 seconds in the video?",
            &["Logan Roy", "Kendall Roy", "Roman Roy"],
            &['a'],
        ),
        choice(
            "A4",
            r,
            InformationSummary,
            "Where does the helicopter land?",
            &["On a rooftop helipad", "In a hospital car park", "On a beach"],
            &['a'],
        ),
        choice(
            "A5",
            r,
            InformationSummary,
            "What does Kendall buy on the city street?",
            &["A newspaper", "A bouquet of tulips", "A lottery ticket"],
            &['a'],
        ),
        choice(
            "A6",
            r,
            Reasoning,
            "Why does Logan want the contract signed today?",
            &["Or they lose the deal", "The lawyers are on holiday", "The jet is leaving soon"],
            &['a'],
        ),
        choice(
            "A7",
            r,
            ExternalKnowledge,
            "Logan Roy founded which fictional media company?",
            &["Waystar Royco", "Pierce Global Media", "Vaulter"],
            &['a'],
        ),
        locate("A8", r, "When does Kendall show a badge at the security desk?", &["[00:04:10, 00:04:30]"]),
        choice(
            "A9",
            r,
            InformationSummary,
            "Who drives away in the black sedan?",
            &["Shiv", "Gerri", "Connor"],
            &['a'],
        ),
        choice(
            "A10",
            r,
            Reasoning,
            "What time of day is it when the helicopter lands?",
            &["Morning", "Midnight", "Sunset"],
            &['a'],
        ),
        locate("B1", w, "When does a seal surface?", &["00:00:27", "00:03:21", "00:04:39"]),
        choice(
            "B2",
            w,
            InformationSummary,
            "What happens to the pelican chick in the nest?",
            &["The pelican chick collapses", "The chick learns to fly", "A gull steals the chick"],
            &['a'],
        ),
        choice(
            "B3",
            w,
            Reasoning,
            "Why do the weakest chicks struggle?",
            &["Food is scarce this season", "The water is too cold", "Eagles hunt them"],
            &['a'],
        ),
        choice(
            "B4",
            w,
            InformationSummary,
            "Which animals appear in the video?",
            &["Heron", "Sea otter", "Polar bear", "Pelican"],
            &['a', 'b', 'd'],
        ),
        locate("B5", w, "When is a chick weighed at the ranger station?", &["[00:02:10, 00:02:30]"]),
        choice(
            "B6",
            w,
            ExternalKnowledge,
            "Which pelican species is the largest?",
            &["Dalmatian pelican", "Brown pelican", "Peruvian pelican"],
            &['a'],
        ),
        choice(
            "B7",
            w,
            InformationSummary,
            "Where does the ranger release the tagged pelican?",
            &["On the beach at sunset", "In a mangrove swamp", "On a fishing pier"],
            &['a'],
        ),
        choice(
            "B8",
            w,
            Reasoning,
            "What does the sea otter use to crack the clam?",
            &["A rock", "A shell", "Its teeth"],
            &['a'],
        ),
        locate("B9", w, "When does the sea otter crack a clam?", &["[00:03:10, 00:03:40]"]),
        choice(
            "B10",
            w,
            InformationSummary,
            "What is the weather like on the tidal flats at dawn?",
            &["Low fog", "Heavy snow", "A thunderstorm"],
            &['a'],
        ),
    ]
}

/// Localization questions about brief or precisely bounded events, where
/// coarse frame sampling or segment-level captions lose the detail.
pub fn detail_loss_dataset() -> Vec<EvalQuestion> {
    let r = ROY_FAMILY;
    vec![
        locate("D1", r, "When was the first time a cigarette dropped to the ground?", &["00:02:32"]),
        locate("D2", r, "When does a phone screen light up in the executive office?", &["00:05:18"]),
        locate("D3", r, "When does the helicopter land on the roof?", &["[00:01:10, 00:01:30]"]),
        locate("D4", r, "When does Kendall show a badge at the security desk?", &["[00:04:10, 00:04:30]"]),
    ]
}

fn root() -> Condition {
    Condition { path: "/parent_task".into(), equals: Some("null".into()), ..Condition::default() }
}

fn rewind(t0: &str, t1: &str) -> serde_json::Value {
    json!({
        "type": "requires_tool",
        "tool": "rewinder",
        "args": {"video_id": "{{/video_id}}", "t0": t0, "t1": t1, "instruction": "{{/task}}"}
    })
}

fn search(query: &str) -> serde_json::Value {
    json!({"type": "requires_tool", "tool": "web_search", "args": {"query": query}})
}

/// Agent rules for the dataset's tool-dependent questions; everything else
/// falls through to the simulated model.
pub fn agent_script() -> Script {
    let mut s = Script::default();
    s.rule(Rule::new(
        "verdict",
        vec![root(), Condition::task_contains("scene change")],
        json!({"type": "too_complex", "reason": "needs frame inspection around the window and a comparison of the scenes"}),
    ))
    .rule(Rule::new(
        "plan",
        vec![Condition::task_contains("scene change")],
        json!({"success": true, "tasks": [
            "Extract frames between 03:58 and 04:02 and identify any scene changes",
            "Identify the people who appear in each scene",
            "Determine the connection between the scenes"
        ]}),
    ))
    .rule(Rule::new(
        "verdict",
        vec![Condition::task_prefix("Extract frames")],
        rewind("{{/filter/lo|hms}}", "{{/filter/hi|hms}}"),
    ))
    .rule(Rule::new(
        "verdict",
        vec![Condition::task_prefix("Identify the people")],
        rewind("{{/filter/lo|hms}}", "{{/filter/hi|hms}}"),
    ))
    .rule(Rule::new("verdict", vec![root(), Condition::task_contains("media company")], search("Logan Roy media company")))
    .rule(Rule::new("verdict", vec![root(), Condition::task_contains("species")], search("largest pelican species")))
    .rule(Rule::new(
        "verdict",
        vec![root(), Condition::task_prefix("When")],
        rewind("{{/hits/0/start|hms}}", "{{/hits/0/end|hms}}"),
    ));
    s
}

pub fn search_answers() -> BTreeMap<String, Vec<SearchSnippet>> {
    let snippet = |title: &str, text: &str| SearchSnippet { title: title.into(), snippet: text.into() };
    BTreeMap::from([
        (
            "Logan Roy media company".to_string(),
            vec![snippet(
                "Waystar Royco",
                "Logan Roy is the founder and chief executive of Waystar Royco, a family-controlled media conglomerate.",
            )],
        ),
        (
            "largest pelican species".to_string(),
            vec![snippet(
                "Dalmatian pelican",
                "The Dalmatian pelican is the largest of the pelican species, with a wingspan of up to 3.5 metres.",
            )],
        ),
    ])
}

/// Offline providers with the scripted agent on top of the simulated model.
pub fn providers_config() -> ProvidersConfig {
    ProvidersConfig {
        agent: ProviderConfig::scripted(AGENT_SCRIPT_FILE, Some(ProviderConfig::of(ProviderKind::Simulated))),
        search: Some(ProviderConfig {
            script_path: Some(SEARCH_FILE.into()),
            ..ProviderConfig::of(ProviderKind::Fixture)
        }),
        ..ProvidersConfig::default()
    }
}

pub struct FixturePaths {
    pub root: PathBuf,
    pub manifests: Vec<PathBuf>,
    pub dataset: PathBuf,
    pub detail_loss: PathBuf,
}

/// Writes manifests, datasets, scripts and `providers.json` under `dir`.
pub fn write_all(dir: &Path) -> Result<FixturePaths> {
    fs::create_dir_all(dir.join(MANIFEST_DIR))?;
    let mut paths = Vec::new();
    for m in manifests() {
        let path = dir.join(MANIFEST_DIR).join(format!("{}.json", m.video_id));
        m.save(&path)?;
        paths.push(path);
    }
    save_dataset(&dir.join(DATASET_FILE), &dataset())?;
    save_dataset(&dir.join(DETAIL_LOSS_FILE), &detail_loss_dataset())?;
    agent_script().save(&dir.join(AGENT_SCRIPT_FILE))?;
    fs::write(dir.join(SEARCH_FILE), serde_json::to_string_pretty(&search_answers())?)?;
    providers_config().save(&dir.join(crate::workspace::PROVIDERS_FILE))?;
    Ok(FixturePaths {
        root: dir.to_path_buf(),
        manifests: paths,
        dataset: dir.join(DATASET_FILE),
        detail_loss: dir.join(DETAIL_LOSS_FILE),
    })
}
