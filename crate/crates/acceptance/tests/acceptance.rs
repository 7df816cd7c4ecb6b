//! Acceptance run. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any of them fails.
//!
//! The crash test runs this same binary as a child writer
//! (`--crash-child <dir> <tag>`) and kills it mid-stream.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use milestone_core::schedule::{auto_schedule, earliest_completion, Diagnostic};
use milestone_core::{fixture, Hours, MilestoneId, Plan};
use milestone_service::{PlanStore, StoreError};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::{invariants, Instance};

type Outcome = Result<String, String>;
type Criterion = fn() -> Outcome;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

fn within(started: Instant, limit: Duration) -> Result<Duration, String> {
    let took = started.elapsed();
    ensure(took < limit, || format!("took {took:?}, limit {limit:?}"))?;
    Ok(took)
}

fn matrix_reproduction() -> Outcome {
    let started = Instant::now();
    let plan = fixture::amazonlight();
    let table = plan.matrix.table(&plan.backlog, &plan.graph).map_err(|e| e.to_string())?;
    let took = within(started, Duration::from_secs(1))?;

    let want: [i64; 15] = [0, 140, 100, 0, 10, 750, 40, 350, 10, 350, 50, 50, 150, 0, 0];
    let got: Vec<Hours> = table.column_totals.clone();
    ensure(got == want.map(Hours::new), || format!("column totals {got:?}"))?;
    ensure(table.total_effort == 2600, || format!("total {}", table.total_effort))?;
    ensure(table.crosscutting_pool == 600, || format!("pool {}", table.crosscutting_pool))?;
    for row in &table.rows {
        let allocated: Hours = row.cells.iter().flatten().copied().sum();
        let item = plan.backlog.get(&row.item_id).unwrap();
        let expected = if item.crosscutting { Hours::ZERO } else { row.effort };
        ensure(allocated == expected, || format!("row {} allocates {allocated} of {}", row.wbs_code, row.effort))?;
    }
    let v = plan.matrix.validate(&plan.backlog, &plan.graph);
    ensure(v.is_empty(), || format!("matrix violations {v:?}"))?;
    Ok(format!("total 2600, 15 columns exact, pool 600, {} rows, {took:.1?}", table.rows.len()))
}

fn due_date_derivation() -> Outcome {
    let started = Instant::now();
    let plan = fixture::amazonlight_scheduled();
    let report = plan.validate();
    let dates = plan.due_dates().map_err(|e| e.to_string())?;
    let took = within(started, Duration::from_secs(1))?;
    ensure(report.is_clean(), || format!("hand layout is not clean: {report:?}"))?;

    // the planned-date column of the milestone table
    let reference = [
        ("KO", date(2025, 10, 1)),
        ("DCA", date(2025, 10, 20)),
        ("IS", date(2025, 11, 1)),
        ("DC", date(2025, 11, 10)),
        ("CIA", date(2026, 1, 10)),
        ("R1", date(2026, 1, 15)),
        ("BL", date(2026, 1, 20)),
        ("R2", date(2026, 2, 10)),
        ("BR", date(2026, 2, 25)),
        ("R3", date(2026, 3, 10)),
        ("ATPA", date(2026, 3, 15)),
        ("ATPC", date(2026, 4, 1)),
        ("SD", date(2026, 5, 1)),
        ("SO", date(2026, 5, 15)),
        ("PC", date(2026, 5, 15)),
    ];
    let mut worst = 0;
    for (id, want) in reference {
        let m = plan.graph.get(&MilestoneId::new(id)).ok_or(format!("no milestone {id}"))?;
        let got = dates[&m.id];
        let off = (got - want).num_days();
        if let Some(hard) = m.hard_date {
            ensure(got == hard && hard == want, || format!("hard {id}: {got}, want {want}"))?;
        } else {
            ensure(off.abs() <= 7, || format!("{id}: {got}, want {want} ± 7 days"))?;
            worst = worst.max(off.abs());
        }
    }
    Ok(format!("clean, soft dates within {worst} days, hard dates exact, {took:.1?}"))
}

fn infeasibility_negotiation() -> Outcome {
    let plan = fixture::amazonlight();
    let view = plan.view();
    let out = auto_schedule(&view, &[], None).map_err(|e| e.to_string())?;
    let sd = MilestoneId::new("SD");
    let found = out.diagnostics.iter().find_map(|d| match d {
        Diagnostic::Infeasible { milestone, anchor_week, earliest_feasible_week, .. } if *milestone == sd => {
            Some((*anchor_week, *earliest_feasible_week))
        }
        _ => None,
    });
    let (anchor, earliest) = found.ok_or_else(|| format!("no Infeasible for SD: {:?}", out.diagnostics))?;
    let may_first = date(2026, 5, 1);
    let bound = plan.calendar.week_of(may_first);
    ensure(i64::from(earliest) <= bound, || format!("earliest week {earliest} is after May 1 (week {bound})"))?;
    let searched = earliest_completion(&view, &[], &sd, None).map_err(|e| e.to_string())?;
    ensure(searched == earliest, || format!("earliest_completion {searched} disagrees with diagnostic {earliest}"))?;

    let negotiated = fixture::amazonlight_negotiated();
    let again = auto_schedule(&negotiated.view(), &[], None).map_err(|e| e.to_string())?;
    ensure(again.is_feasible(), || format!("May 1 plan still infeasible: {:?}", again.diagnostics))?;
    Ok(format!(
        "SD infeasible at week {anchor} (Apr 1); earliest week {earliest} starts {}; May 1 plan feasible",
        plan.calendar.week_start(earliest)
    ))
}

fn oracle_equivalence() -> Outcome {
    const INSTANCES: usize = 500;
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut feasible, mut compared) = (0, 0);
    for k in 0..INSTANCES {
        let inst = Instance::random(&mut rng);
        let plan = inst.to_plan();
        let view = plan.view();
        let out = auto_schedule(&view, &[], None).map_err(|e| format!("#{k}: {e}"))?;
        let oracle = inst.feasible();
        ensure(out.is_feasible() == oracle, || format!("#{k}: greedy {} exhaustive {oracle}: {inst:?}", out.is_feasible()))?;
        if !oracle {
            continue;
        }
        feasible += 1;
        for m in 0..inst.notes.len() {
            let greedy = earliest_completion(&view, &[], &Instance::id(m), None).map_err(|e| format!("#{k} m{m}: {e}"))?;
            let best = inst.earliest(m).ok_or_else(|| format!("#{k} m{m}: oracle found no week"))?;
            ensure(i64::from(greedy) <= best + 1, || format!("#{k} m{m}: greedy week {greedy}, optimum {best}: {inst:?}"))?;
            compared += 1;
        }
    }
    let took = within(started, Duration::from_secs(60))?;
    Ok(format!("{INSTANCES} instances ({feasible} feasible), {compared} completion weeks within optimum + 1, {took:.1?}"))
}

fn invariant_suite() -> Outcome {
    const CASES: u32 = 1000;
    let started = Instant::now();
    for (name, check) in invariants::ALL {
        let mut runner = TestRunner::new(Config { cases: CASES, failure_persistence: None, ..Config::default() });
        runner.run(&(any::<u64>(), any::<u32>()), |(seed, pick)| check(seed, pick)).map_err(|e| format!("{name}: {e}"))?;
    }
    Ok(format!("{} properties × {CASES} cases, {:.1?}", invariants::ALL.len(), started.elapsed()))
}

const CRASH_PLAN: &str = "crashplan";

/// Child side of the crash test: commit new versions as fast as possible and
/// report each one only after `save` returned.
fn crash_child(dir: &Path, tag: &str) -> ! {
    let store = PlanStore::open(dir).unwrap();
    let stdout = std::io::stdout();
    loop {
        let (mut plan, current) = store.load_latest(CRASH_PLAN).unwrap();
        plan.name = format!("{tag}:{}", current + 1);
        match store.save(CRASH_PLAN, current, &plan) {
            Ok(v) => {
                let mut out = stdout.lock();
                writeln!(out, "committed {v}").unwrap();
                out.flush().unwrap();
            }
            Err(StoreError::Conflict { .. }) => {}
            Err(e) => panic!("{e}"),
        }
    }
}

fn crash_safe_persistence() -> Outcome {
    const ROUNDS: usize = 12;
    const WRITERS: [&str; 2] = ["a", "b"];
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let store = PlanStore::open(dir.path()).map_err(|e| e.to_string())?;
    store.create_with_id(CRASH_PLAN, &fixture::amazonlight_scheduled()).map_err(|e| e.to_string())?;
    let plan_dir = dir.path().join("plans").join(CRASH_PLAN);
    let exe = std::env::current_exe().map_err(|e| e.to_string())?;

    // version -> writer that was told it committed
    let mut acked: BTreeMap<u64, String> = BTreeMap::new();
    let mut killed_unacked = 0;
    for round in 0..ROUNDS {
        let (tx, rx) = mpsc::channel::<(String, u64)>();
        let mut children = Vec::new();
        for tag in WRITERS {
            let mut child = Command::new(&exe)
                .args(["--crash-child", dir.path().to_str().unwrap(), tag])
                .stdout(Stdio::piped())
                .stderr(Stdio::null())
                .spawn()
                .map_err(|e| e.to_string())?;
            let out = child.stdout.take().unwrap();
            let tx = tx.clone();
            let reader = std::thread::spawn(move || {
                for line in BufReader::new(out).lines().map_while(Result::ok) {
                    if let Some(v) = line.strip_prefix("committed ").and_then(|v| v.parse().ok()) {
                        let _ = tx.send((tag.to_string(), v));
                    }
                }
            });
            children.push((child, reader));
        }
        drop(tx);

        // let a few versions through, then pull the plug at a varying moment
        let target = 2 + round;
        let deadline = Instant::now() + Duration::from_secs(20);
        let mut seen = 0;
        while seen < target && Instant::now() < deadline {
            if let Ok((tag, v)) = rx.recv_timeout(Duration::from_millis(50)) {
                if let Some(prev) = acked.insert(v, tag.clone()) {
                    return Err(format!("version {v} acknowledged to both {prev} and {tag}"));
                }
                seen += 1;
            }
        }
        std::thread::sleep(Duration::from_micros(300 * round as u64));
        for (child, _) in &mut children {
            child.kill().map_err(|e| e.to_string())?;
        }
        for (mut child, reader) in children {
            child.wait().map_err(|e| e.to_string())?;
            reader.join().unwrap();
        }
        for (tag, v) in rx.try_iter() {
            if let Some(prev) = acked.insert(v, tag.clone()) {
                return Err(format!("version {v} acknowledged to both {prev} and {tag}"));
            }
        }
        killed_unacked += WRITERS.len();

        // a torn temporary from a write that never got linked
        let plan_json = fixture::amazonlight().to_json();
        std::fs::write(plan_dir.join(format!(".tmp-torn{round}")), &plan_json[..plan_json.len() / 2])
            .map_err(|e| e.to_string())?;
    }

    let reopened = PlanStore::open(dir.path()).map_err(|e| e.to_string())?;
    let leftovers: Vec<_> = std::fs::read_dir(&plan_dir)
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.starts_with(".tmp"))
        .collect();
    ensure(leftovers.is_empty(), || format!("temporaries survived reopening: {leftovers:?}"))?;

    let versions = reopened.versions(CRASH_PLAN).map_err(|e| e.to_string())?;
    let n = versions.len() as u64;
    ensure(versions == (1..=n).collect::<Vec<_>>(), || format!("versions have gaps: {versions:?}"))?;
    let last_ack = acked.keys().next_back().copied().unwrap_or(1);
    ensure(n >= last_ack, || format!("acknowledged version {last_ack} lost, store ends at {n}"))?;
    // a writer may be killed after committing but before saying so
    ensure(n <= last_ack + killed_unacked as u64, || format!("{n} versions but only {last_ack} acknowledged"))?;
    for v in 2..=n {
        let plan: Plan = reopened.load(CRASH_PLAN, v).map_err(|e| format!("version {v}: {e}"))?;
        let (tag, claimed) = plan.name.split_once(':').ok_or(format!("version {v} has name {}", plan.name))?;
        ensure(claimed == v.to_string(), || format!("version {v} holds the plan written as {claimed}"))?;
        if let Some(who) = acked.get(&v) {
            ensure(who == tag, || format!("version {v} acknowledged to {who} but written by {tag}"))?;
        }
    }
    ensure(acked.len() as u64 >= ROUNDS as u64, || format!("only {} commits acknowledged", acked.len()))?;
    let (plan, latest) = reopened.load_latest(CRASH_PLAN).map_err(|e| e.to_string())?;
    reopened.save(CRASH_PLAN, latest, &plan).map_err(|e| format!("store not writable after recovery: {e}"))?;
    Ok(format!(
        "{ROUNDS} rounds × {} killed writers, {} acknowledged commits, {n} versions recovered intact",
        WRITERS.len(),
        acked.len()
    ))
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    if let Some(i) = args.iter().position(|a| a == "--crash-child") {
        crash_child(Path::new(&args[i + 1]), &args[i + 2]);
    }
    // cargo passes filters and harness flags through; a plain listing request
    // should not run anything
    if args.iter().any(|a| a == "--list") {
        return;
    }

    let criteria: [(&str, Criterion); 6] = [
        ("1 matrix reproduction", matrix_reproduction),
        ("2 due-date derivation", due_date_derivation),
        ("3 infeasibility negotiation", infeasibility_negotiation),
        ("4 oracle equivalence", oracle_equivalence),
        ("5 invariant suite", invariant_suite),
        ("6 crash-safe persistence", crash_safe_persistence),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("PASS  criterion {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  criterion {name}: {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
