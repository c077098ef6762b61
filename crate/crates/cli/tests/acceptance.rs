//! Acceptance run: one pass/fail line per criterion. Criterion 3 is reported
//! but does not gate the run. Runs without the test harness so the lines are
//! always printed.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use axum::body::Body;
use axum::http::{Method, Request};
use goalscope_agents::Route;
use goalscope_cli::replay;
use goalscope_cli::transcript::{template_transcript, INTRODUCTION_STEPS};
use goalscope_core::conflicts::{enumerate_exhaustive, enumerate_marco_until};
use goalscope_core::efcc::QuestionType;
use goalscope_core::fixtures;
use goalscope_core::session::Project;
use goalscope_service::{router, App, MemoryStore, Options};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};
use tower::ServiceExt;

const RUNNING_LIMIT: Duration = Duration::from_secs(1);
const INTRODUCTION_LIMIT: Duration = Duration::from_secs(60);
const INTRODUCTION_MAX_ORACLE_CALLS: u64 = 256;
const EVALUATION_LIMIT: Duration = Duration::from_secs(600);
const EVALUATION_TARGET: (usize, usize, u64) = (224, 313, 27);
const EVALUATION_DROPS: [&str; 6] = [
    "alice-hangs-out",
    "bob-hangs-out",
    "cook-dinner",
    "go-shopping",
    "hairdresser",
    "drink-with-friends",
];
const DUALITY_CASES: usize = 1000;
const DUALITY_LIMIT: Duration = Duration::from_secs(10);
const LTLF_CASES: usize = 10_000;
const SERVICE_LIMIT: Duration = Duration::from_secs(90);
const SEED: u64 = 0x5eed_0001;

fn ids(p: &Project, family: &[goalscope_core::goalset::GoalSet]) -> Vec<Vec<String>> {
    family.iter().map(|s| p.ids_of(*s)).collect()
}

fn within(what: &str, start: Instant, limit: Duration) -> Duration {
    let took = start.elapsed();
    assert!(took < limit, "{what} took {took:?}, limit {limit:?}");
    took
}

fn names(p: &Project) -> Vec<String> {
    p.goals().iter().map(|g| g.id.clone()).collect()
}

fn running_example() -> String {
    let start = Instant::now();
    let mut p = fixtures::running_example();
    let d = enumerate_exhaustive(p.oracle().as_ref(), names(&p)).unwrap();
    assert_eq!(ids(&p, &d.mus), vec![vec!["C", "M"]]);
    assert_eq!(ids(&p, &d.mcs), vec![vec!["C"], vec!["M"]]);
    let step = p.create_step(&["S", "M"], &["S", "C", "M"], None).unwrap().id.clone();
    let resolved = p.run_step(&step).unwrap();
    assert_eq!(resolved.g_true, vec!["S", "M"]);
    let b = p.ask(&step, QuestionType::SHow, &["C"]).unwrap();
    let wire = serde_json::to_value(b.to_wire(&|i| p.goals()[i].id.clone())).unwrap();
    assert_eq!(wire["answer"], json!([["M"]]), "S-HOW {{C}}: cancel the sports match");
    let took = within("running example", start, RUNNING_LIMIT);
    format!("MUS {{C,M}}, MCS {{C}},{{M}}, S-HOW(C) = {{M}} in {took:.2?}")
}

fn introduction() -> String {
    let start = Instant::now();
    let p = fixtures::intro_instance();
    assert_eq!(p.goals().len(), 8);
    let demo = p.precompute_demo().unwrap();
    let d = &demo.conflicts;
    assert_eq!(d.mus.len(), 2);
    assert_eq!(d.mcs.len(), 6);
    assert_eq!(demo.max_utility, 15);
    let utilities: Vec<u64> = p.goals().iter().map(|g| g.utility).collect();
    let (_, drops) = d.cheapest_corrections(&utilities);
    assert_eq!(ids(&p, &drops), vec![vec!["clean-home", "alice-violin"]]);
    let calls = p.oracle().cache().planner_calls();
    assert!(calls <= INTRODUCTION_MAX_ORACLE_CALLS, "{calls} planner calls");
    let took = within("introduction instance", start, INTRODUCTION_LIMIT);
    format!("2 MUS, 6 MCS, max utility 15, drops {{violin, clean home}}, {calls} planner calls in {took:.2?}")
}

/// Never panics on a count mismatch; the line carries the comparison.
fn evaluation() -> (bool, String) {
    let start = Instant::now();
    let p = fixtures::eval_instance();
    let d = enumerate_marco_until(p.oracle().as_ref(), names(&p), Some(start + EVALUATION_LIMIT)).unwrap();
    let took = start.elapsed();
    let utilities: Vec<u64> = p.goals().iter().map(|g| g.utility).collect();
    let best = d.max_utility(&utilities);
    let (_, drops) = d.cheapest_corrections(&utilities);
    let target_drops = p.set_of(&EVALUATION_DROPS).unwrap();
    let same_optimum = drops == vec![target_drops];
    let (mus, mcs, max) = EVALUATION_TARGET;
    let exact = !d.incomplete && d.mus.len() == mus && d.mcs.len() == mcs && best == max;
    let mut line = format!(
        "{} MUS / {} MCS, max utility {best}{} in {took:.1?}; target {mus} / {mcs}, {max}",
        d.mus.len(),
        d.mcs.len(),
        if d.incomplete { " (incomplete)" } else { "" },
    );
    if !exact {
        line.push_str(
            "; fixture divergence: the instance is rebuilt from its prose description, whose travel and \
             pickup rules are not fully stated",
        );
        line.push_str(if same_optimum {
            "; the unique optimal correction is the target drop list"
        } else {
            "; the optimal correction also differs from the target drop list"
        });
    }
    (exact, line)
}

fn duality() -> String {
    let start = Instant::now();
    let fully = support::duality::check(DUALITY_CASES, SEED);
    let took = within("duality suite", start, DUALITY_LIMIT);
    format!("{DUALITY_CASES} oracles ({fully} fully solvable) in {took:.2?}")
}

fn ltlf() -> String {
    let mismatches = support::ltlf::progression_mismatches(LTLF_CASES, SEED);
    assert!(
        mismatches.is_empty(),
        "{} mismatches, first {:?}",
        mismatches.len(),
        mismatches.first()
    );
    let goals = support::ltlf::fixture_round_trip();
    format!("{LTLF_CASES} cases, 0 mismatches; {goals} fixture goals round-trip")
}

fn transcription() -> String {
    let n = support::transcription::check_all_steps();
    format!("{n} questions over the running-example lattice, every branch covered")
}

fn protocol() -> String {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("replays");
    let mut paths: Vec<_> = std::fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
    paths.sort();
    let mut routes = BTreeSet::new();
    let mut labels = BTreeSet::new();
    let mut turns = 0;
    for path in &paths {
        let script = replay::load(path).unwrap();
        for t in &script.turns {
            for r in &t.responses {
                if let Some(qt) = r.output.get("questionType").and_then(Value::as_str) {
                    let used = r.output["used"].as_str().unwrap_or_default();
                    labels.insert(format!("{qt}/{used}"));
                }
            }
        }
        let report = replay::run(&script).unwrap();
        assert!(report.passed(), "{}", report.lines().join("\n"));
        turns += report.turns.len();
        routes.extend(report.turns.iter().map(|t| t.turn.decision.route()));
    }
    assert_eq!(routes.len(), 4, "routes covered: {routes:?}");
    assert!(routes.contains(&Route::FollowUp) && routes.contains(&Route::EfqueryGt));
    for needed in [
        "US-WHY/NO-ARGUMENT-REQUIRED",
        "DIRECT-ET/NO-ARGUMENT-REQUIRED",
        "DIRECT-USER/NO-ARGUMENT-REQUIRED",
        "S-WHY-NOT/ALREADY-USED",
    ] {
        assert!(labels.contains(needed), "no script exercises {needed}");
    }
    format!("{} scripts, {turns} turns, all four routes", paths.len())
}

fn templates() -> String {
    let first = template_transcript("introduction", &INTRODUCTION_STEPS).unwrap();
    let second = template_transcript("introduction", &INTRODUCTION_STEPS).unwrap();
    assert!(first == second, "two runs differ");
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/introduction-template.txt");
    assert!(
        first == std::fs::read_to_string(&golden).unwrap(),
        "differs from {}",
        golden.display()
    );
    format!("{} bytes, identical across runs and to the golden file", first.len())
}

async fn call(r: &axum::Router, method: Method, path: &str, body: Option<Value>) -> Value {
    let req = Request::builder()
        .method(method)
        .uri(path)
        .header("content-type", "application/json")
        .body(body.map_or(Body::empty(), |b| Body::from(b.to_string())))
        .unwrap();
    let resp = r.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let v: Value = serde_json::from_slice(&bytes).unwrap();
    assert!(status.is_success(), "{path}: {status} {v}");
    v
}

async fn wait_job(r: &axum::Router, id: &str) {
    loop {
        let j = call(r, Method::GET, &format!("/jobs/{id}"), None).await;
        match j["status"].as_str() {
            Some("done") => return,
            Some("failed") => panic!("job {id} failed: {j}"),
            _ => tokio::time::sleep(Duration::from_millis(5)).await,
        }
    }
}

fn service() -> String {
    let start = Instant::now();
    let rt = tokio::runtime::Runtime::new().unwrap();
    let answer = rt.block_on(async {
        let app = App::open(Options::new(Arc::new(MemoryStore::new()))).unwrap();
        let r = router(app, None);
        let project = call(
            &r,
            Method::POST,
            "/projects",
            Some(json!({ "fixture": "introduction", "mode": "demo" })),
        )
        .await;
        let pid = project["id"].as_str().unwrap().to_string();
        let job = call(&r, Method::POST, &format!("/projects/{pid}/demo"), None).await;
        wait_job(&r, job["id"].as_str().unwrap()).await;
        let demo = call(&r, Method::GET, &format!("/projects/{pid}/demo"), None).await;
        assert_eq!(demo["maxUtility"], 15);
        let enforce = [
            "do-groceries",
            "cook-lunch",
            "cook-dinner",
            "bob-tennis",
            "bob-homework",
            "alice-homework",
        ];
        let accepted = call(
            &r,
            Method::POST,
            &format!("/projects/{pid}/steps"),
            Some(json!({ "gEnf": enforce })),
        )
        .await;
        wait_job(&r, accepted["job"]["id"].as_str().unwrap()).await;
        let sid = accepted["id"].as_str().unwrap().to_string();
        let step = call(&r, Method::GET, &format!("/steps/{sid}"), None).await;
        assert_eq!(step["status"], "solvable");
        assert_eq!(step["utility"], 15);
        let menu = call(&r, Method::GET, &format!("/steps/{sid}/menu"), None).await;
        let entry = menu["entries"]
            .as_array()
            .unwrap()
            .iter()
            .find(|e| e["questionType"] == "S-WHY-NOT" && e["args"] == json!(["alice-violin"]))
            .cloned()
            .expect("S-WHY-NOT on the violin lesson is offered");
        let mut input = entry.clone();
        input.as_object_mut().unwrap().remove("label");
        input["kind"] = json!("menu");
        let turn = call(&r, Method::POST, &format!("/steps/{sid}/question"), Some(input)).await;
        assert_eq!(turn["bundles"][0]["answer"], json!([["alice-homework"]]));
        turn["answer"].as_str().unwrap().to_string()
    });
    assert_eq!(
        answer,
        "There is a conflict between Alice has violin lesson and all the goal subsets: {Alice does homework}."
    );
    let took = within("service round trip", start, SERVICE_LIMIT);
    format!("create, demo, step, menu question, template answer in {took:.2?}")
}

fn panic_text(e: Box<dyn std::any::Any + Send>) -> String {
    e.downcast_ref::<String>()
        .cloned()
        .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "panicked".into())
}

/// Number, name and check; the check panics on failure.
type Criterion = (u8, &'static str, fn() -> String);

fn main() {
    let gating: [Criterion; 8] = [
        (1, "running example", running_example),
        (2, "introduction instance", introduction),
        (4, "duality suite", duality),
        (5, "LTLf progression", ltlf),
        (6, "formula transcription", transcription),
        (7, "protocol replay", protocol),
        (8, "template determinism", templates),
        (9, "service round trip", service),
    ];
    let mut lines: Vec<(u8, String)> = Vec::new();
    let mut failed = Vec::new();
    for (n, name, run) in gating {
        let line = match catch_unwind(AssertUnwindSafe(run)) {
            Ok(detail) => format!("PASS criterion {n} ({name}): {detail}"),
            Err(e) => {
                failed.push(n);
                format!("FAIL criterion {n} ({name}): {}", panic_text(e))
            }
        };
        lines.push((n, line));
    }
    let line = match catch_unwind(evaluation) {
        Ok((true, detail)) => format!("PASS criterion 3 (evaluation instance, non-gating): {detail}"),
        Ok((false, detail)) => format!("FAIL criterion 3 (evaluation instance, non-gating): {detail}"),
        Err(e) => format!("FAIL criterion 3 (evaluation instance, non-gating): {}", panic_text(e)),
    };
    lines.push((3, line));
    lines.sort();
    for (_, l) in &lines {
        println!("{l}");
    }
    if !failed.is_empty() {
        eprintln!("gating criteria failed: {failed:?}");
        std::process::exit(1);
    }
}
