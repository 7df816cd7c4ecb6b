use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::{Command, Output};

use milestone_core::document::short_date;
use milestone_core::fixture;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn fx(name: &str) -> String {
    fixtures().join(name).to_string_lossy().into_owned()
}

fn milestone(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_milestone")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn matrix_prints_the_work_package_totals() {
    let out = milestone(&["matrix", &fx("amazonlight.plan")]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let totals = text.lines().find(|l| l.trim_start().starts_with("Work Packages")).unwrap();
    let numbers: Vec<&str> = totals.trim_start().trim_start_matches("Work Packages").split_whitespace().collect();
    assert_eq!(numbers.join(" "), "2600 0 140 100 0 10 750 40 350 10 350 50 50 150 0 0");
    assert!(text.contains("Crosscutting pool: 600 h"));

    let csv = stdout(&milestone(&["--format", "csv", "matrix", &fx("amazonlight.plan")]));
    assert_eq!(csv.lines().last().unwrap(), ",Work Packages,2600,0,140,100,0,10,750,40,350,10,350,50,50,150,0,0");
}

#[test]
fn unusable_input_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.plan");
    std::fs::write(&empty, "").unwrap();
    assert_eq!(milestone(&["validate", empty.to_str().unwrap()]).status.code(), Some(2));
    let junk = dir.path().join("junk.plan");
    std::fs::write(&junk, "{\"schema\": \"something-else\"}").unwrap();
    assert_eq!(milestone(&["validate", junk.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(milestone(&["validate", "no/such/file.plan"]).status.code(), Some(2));
    assert_eq!(milestone(&["validate", "--frobnicate", &fx("amazonlight.plan")]).status.code(), Some(2));
    assert_eq!(milestone(&["--quantum", "0", "svg", &fx("amazonlight-scheduled.plan")]).status.code(), Some(2));
    assert_eq!(milestone(&["--format", "svg", "dates", &fx("amazonlight-scheduled.plan")]).status.code(), Some(2));
    assert_eq!(milestone(&[]).status.code(), Some(2));
}

#[test]
fn validate_reports_clean_and_broken_plans() {
    let out = milestone(&["validate", &fx("amazonlight-scheduled.plan")]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "clean\n");

    let mut plan = fixture::amazonlight_scheduled();
    plan.schedule.as_mut().unwrap().placements.get_mut(&"R1".into()).unwrap().insert(13, 50.into());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.plan");
    std::fs::write(&path, plan.to_json()).unwrap();
    let out = milestone(&["validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("blackout_violation"), "{}", stdout(&out));
}

#[test]
fn checked_hand_layout_gives_the_committed_plan_dates() {
    let out = milestone(&["schedule", &fx("amazonlight-negotiated.plan"), "--check", &fx("hand-layout.json")]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let checked: BTreeMap<String, String> = stdout(&out)
        .lines()
        .map(|l| {
            let mut f = l.split_whitespace();
            let id = f.next().unwrap().to_string();
            let date = chrono::NaiveDate::parse_from_str(f.next().unwrap(), "%Y-%m-%d").unwrap();
            (id, short_date(date))
        })
        .collect();

    let committed = std::fs::read_to_string(fixtures().join("amazonlight-plan.txt")).unwrap();
    let plan = fixture::amazonlight_negotiated();
    let mut matched = 0;
    for m in plan.graph.milestones() {
        let line = committed.lines().find(|l| l.trim_end().ends_with(m.name.as_str())).unwrap();
        assert!(line.contains(&format!(" {} ", checked[m.id.as_str()])), "{}: {line}", m.id);
        matched += 1;
    }
    assert_eq!(matched, 15);
}

#[test]
fn committed_plan_output_is_current() {
    let out = milestone(&["plan", &fx("amazonlight-scheduled.plan")]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), std::fs::read_to_string(fixtures().join("amazonlight-plan.txt")).unwrap());
}

#[test]
fn rejected_placements_fail_the_check() {
    let dir = tempfile::tempdir().unwrap();
    let mut records = fixture::hand_layout_records();
    records.get_mut(&"R1".into()).unwrap().insert(14, 10.into());
    let path = dir.path().join("layout.json");
    std::fs::write(&path, serde_json::to_string(&records).unwrap()).unwrap();
    let out = milestone(&["schedule", &fx("amazonlight-negotiated.plan"), "--check", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("R1"));
}

#[test]
fn automatic_layout_reports_the_april_deadline() {
    let out = milestone(&["schedule", &fx("amazonlight.plan")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("earliest feasible week 31"), "{}", stdout(&out));

    let dir = tempfile::tempdir().unwrap();
    let saved = dir.path().join("may.plan");
    let out = milestone(&["schedule", &fx("amazonlight-negotiated.plan"), "-o", saved.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(milestone(&["validate", saved.to_str().unwrap()]).status.code(), Some(0));
    let dates = stdout(&milestone(&["dates", saved.to_str().unwrap()]));
    assert!(dates.lines().any(|l| l.starts_with("SD") && l.contains("2026-05-01")), "{dates}");
}

#[test]
fn output_is_deterministic() {
    for args in [
        vec!["svg", "--quantum", "20"],
        vec!["schedule", "--format", "json"],
        vec!["plan", "--format", "json"],
        vec!["matrix"],
    ] {
        let mut full = args.clone();
        let plan = fx("amazonlight-negotiated.plan");
        full.push(&plan);
        let a = milestone(&full);
        let b = milestone(&full);
        assert_eq!(a.stdout, b.stdout, "{args:?}");
        assert!(!a.stdout.is_empty());
    }
    let svg = stdout(&milestone(&["svg", &fx("amazonlight-scheduled.plan")]));
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
}

#[test]
fn committed_fixtures_match_the_library() {
    for (name, args) in [
        ("amazonlight.plan", "amazonlight"),
        ("amazonlight-negotiated.plan", "negotiated"),
        ("amazonlight-scheduled.plan", "scheduled"),
        ("hand-layout.json", "hand-layout"),
    ] {
        let out = milestone(&["fixture", args]);
        assert_eq!(stdout(&out), std::fs::read_to_string(fixtures().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn reproduce_walks_the_example() {
    let out = milestone(&["reproduce"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("earliest feasible week 31 starts 2026-04-27"), "{text}");
    assert!(text.contains("validates clean"));
}
