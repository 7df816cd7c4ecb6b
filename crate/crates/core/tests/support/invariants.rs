//! The invariants the engine promises, written against a seed so the same
//! checks run under proptest here and in the acceptance runner.

use chrono::NaiveDate;
use milestone_core::backlog::BacklogItem;
use milestone_core::graph::Milestone;
use milestone_core::matrix::MatrixViolation;
use milestone_core::schedule::{auto_schedule, completion_weeks, derive_due_dates, validate_schedule, AutoSchedule};
use milestone_core::{
    Backlog, Hours, ItemId, MilestoneId, MilestonePlanDocument, Plan, RenderFormat, ScheduleError, Week,
    WorkPackageConstraint,
};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use super::Instance;

/// A random forest of up to 12 items; leaves carry quarter-hour estimates,
/// some of them crosscutting.
fn random_backlog(rng: &mut ChaCha8Rng) -> Backlog {
    let mut b = Backlog::new();
    let mut codes: Vec<(ItemId, String, usize)> = Vec::new();
    let mut roots = 0;
    for i in 0..rng.gen_range(1..=12) {
        let parent = if codes.is_empty() || rng.gen_bool(0.3) { None } else { Some(rng.gen_range(0..codes.len())) };
        let code = match parent {
            None => {
                roots += 1;
                format!("{roots}")
            }
            Some(p) => {
                codes[p].2 += 1;
                format!("{}.{}", codes[p].1, codes[p].2)
            }
        };
        let id = b
            .add_item(parent.map(|p| &codes[p].0), BacklogItem::new(format!("i{i}"), code.clone(), format!("item {i}")))
            .unwrap();
        codes.push((id, code, 0));
    }
    let leaves: Vec<ItemId> = b.leaves().iter().map(|l| l.id.clone()).collect();
    for id in leaves {
        b.set_effort(&id, Some(Hours::ratio(rng.gen_range(0..=800), 4))).unwrap();
        if rng.gen_bool(0.2) {
            b.set_crosscutting(&id, true).unwrap();
        }
    }
    b
}

/// Random backlog, up to five milestones, and every non-crosscutting leaf
/// split across milestones until its budget is used up.
fn random_allocated(seed: u64) -> Plan {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut plan = Plan::new("p", milestone_core::Calendar::new(super::start(), 10, 2));
    plan.backlog = random_backlog(&mut rng);
    let n = rng.gen_range(1..=5);
    for i in 0..n {
        plan.graph.add_milestone(Milestone::soft(format!("m{i}"), format!("M{i}"))).unwrap();
    }
    for leaf in plan.backlog.leaves() {
        let budget = leaf.effort_hours.unwrap_or(Hours::ZERO);
        let mut left = budget;
        // crosscutting leaves keep some of their hours back for the pool
        let keep = if leaf.crosscutting { budget / 2 } else { Hours::ZERO };
        while left > keep {
            let take = (Hours::ratio(rng.gen_range(1..=400), 4)).min(left - keep);
            let m = MilestoneId::new(format!("m{}", rng.gen_range(0..n)));
            plan.matrix.allocate(&plan.backlog, &plan.graph, &leaf.id, &m, take).unwrap();
            left -= take;
        }
    }
    plan
}

/// A random scheduling instance with a crosscutting pool and, now and then,
/// weekly caps and gates on top.
fn random_scheduled(seed: u64) -> (Instance, Plan) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inst = Instance::random(&mut rng);
    let mut plan = inst.to_plan();
    if rng.gen_bool(0.5) {
        let pool = rng.gen_range(1..=(inst.weeks as i64 * 4));
        plan.backlog.add_item(None, BacklogItem::new("pm", "99", "management").effort(pool).crosscutting()).unwrap();
    }
    let n = inst.notes.len();
    for i in 0..n {
        if rng.gen_bool(0.2) {
            let mut c = WorkPackageConstraint::new(Instance::id(i)).cap(rng.gen_range(10..=80));
            if i > 0 && rng.gen_bool(0.5) {
                c = c.after(Instance::id(rng.gen_range(0..i)));
            }
            plan.constraints.push(c);
        }
    }
    (inst, plan)
}

/// The automatic layout, or `None` when the pool alone does not fit the
/// calendar (all weeks blacked out, say).
fn layout(plan: &Plan) -> Option<AutoSchedule> {
    match auto_schedule(&plan.view(), &[], None) {
        Ok(out) => Some(out),
        Err(ScheduleError::PoolExceedsCapacity { .. }) => None,
        Err(e) => panic!("{e}"),
    }
}

fn rollup_by_hand(b: &Backlog, id: &ItemId) -> Hours {
    let kids: Vec<ItemId> = b.children(id).map(|c| c.id.clone()).collect();
    if kids.is_empty() {
        b.get(id).unwrap().effort_hours.unwrap_or(Hours::ZERO)
    } else {
        kids.iter().map(|k| rollup_by_hand(b, k)).sum()
    }
}

pub fn backlog_rollup_is_sum_of_leaves(seed: u64, _pick: u32) -> Result<(), TestCaseError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = random_backlog(&mut rng);
    let leaves: Hours = b.leaves().iter().map(|l| l.effort_hours.unwrap_or(Hours::ZERO)).sum();
    prop_assert_eq!(b.total_effort(), leaves);
    for item in b.items() {
        prop_assert_eq!(b.rollup_effort(&item.id).unwrap(), rollup_by_hand(&b, &item.id));
    }
    prop_assert_eq!(b.validate(), b.validate());
    Ok(())
}

pub fn matrix_columns_and_pool_account_for_every_hour(seed: u64, _pick: u32) -> Result<(), TestCaseError> {
    let plan = random_allocated(seed);
    let columns: Hours = plan.matrix.work_packages(&plan.graph).values().copied().sum();
    let pool = plan.matrix.crosscutting_pool(&plan.backlog);
    prop_assert_eq!(columns + pool, plan.backlog.total_effort());
    let v = plan.matrix.validate(&plan.backlog, &plan.graph);
    prop_assert!(v.is_empty(), "{:?}", v);

    let table = plan.matrix.table(&plan.backlog, &plan.graph).unwrap();
    let cells: Hours = table.rows.iter().flat_map(|r| r.cells.iter().flatten()).copied().sum();
    prop_assert_eq!(cells, table.column_totals.iter().copied().sum::<Hours>());
    Ok(())
}

pub fn under_allocation_never_reports_a_conservation_mismatch(seed: u64, _pick: u32) -> Result<(), TestCaseError> {
    let mut plan = random_allocated(seed);
    let cells: Vec<_> = plan.matrix.allocations().collect();
    if let Some(a) = cells.first() {
        plan.matrix.deallocate(&a.item_id, &a.milestone_id, a.hours).unwrap();
    }
    let v = plan.matrix.validate(&plan.backlog, &plan.graph);
    let mismatch = v.iter().any(|x| matches!(x, MatrixViolation::ConservationMismatch { .. }));
    prop_assert!(!mismatch);
    Ok(())
}

pub fn feasible_layouts_place_every_hour(seed: u64, _pick: u32) -> Result<(), TestCaseError> {
    let (_, plan) = random_scheduled(seed);
    let Some(out) = layout(&plan) else { return Ok(()) };
    if out.is_feasible() {
        for (m, effort) in plan.matrix.work_packages(&plan.graph) {
            prop_assert_eq!(out.schedule.placed_total(&m), effort);
        }
        let profiled: Hours = out.schedule.crosscutting_profile.values().copied().sum();
        prop_assert_eq!(profiled, plan.matrix.crosscutting_pool(&plan.backlog));
        let v = validate_schedule(&plan.view(), &out.schedule).unwrap();
        prop_assert!(v.is_empty(), "{:?}", v);
    }
    Ok(())
}

pub fn no_week_is_over_capacity(seed: u64, _pick: u32) -> Result<(), TestCaseError> {
    let (_, plan) = random_scheduled(seed);
    let Some(out) = layout(&plan) else { return Ok(()) };
    for w in plan.calendar.weeks() {
        prop_assert!(out.schedule.load(w) <= plan.calendar.capacity(w).unwrap(), "week {}", w);
    }
    Ok(())
}

pub fn successors_never_finish_first(seed: u64, _pick: u32) -> Result<(), TestCaseError> {
    let (_, plan) = random_scheduled(seed);
    let Some(out) = layout(&plan) else { return Ok(()) };
    if out.is_feasible() {
        let c = completion_weeks(&plan.view(), &out.schedule).unwrap();
        for d in plan.graph.dependencies() {
            prop_assert!(c[&d.successor] >= c[&d.predecessor], "{:?}", d);
        }
    }
    Ok(())
}

pub fn anchors_hold_whenever_no_diagnostic_says_otherwise(seed: u64, _pick: u32) -> Result<(), TestCaseError> {
    let (_, plan) = random_scheduled(seed);
    let Some(out) = layout(&plan) else { return Ok(()) };
    for m in plan.graph.milestones() {
        let Some(date) = m.hard_date else { continue };
        let reported = out.diagnostics.iter().any(|d| d.milestone() == &m.id);
        if let Some(due) = out.schedule.due_week(&m.id) {
            prop_assert!(reported || i64::from(due) <= plan.calendar.week_of(date), "{}", m.id);
        }
    }
    Ok(())
}

pub fn another_blackout_never_brings_a_date_forward(seed: u64, pick: u32) -> Result<(), TestCaseError> {
    let (inst, plan) = random_scheduled(seed);
    let free: Vec<Week> = plan.calendar.weeks().filter(|w| !plan.calendar.is_blackout(*w)).collect();
    if free.is_empty() {
        return Ok(());
    }
    let mut darker = plan.clone();
    darker.calendar.blackouts.insert(free[pick as usize % free.len()]);
    let (Some(a), Some(b)) = (layout(&plan), layout(&darker)) else { return Ok(()) };
    if a.is_feasible() && b.is_feasible() {
        let before = derive_due_dates(&plan.view(), &a.schedule).unwrap();
        let after = derive_due_dates(&darker.view(), &b.schedule).unwrap();
        for (m, d) in &before {
            prop_assert!(after[m] >= *d, "{} moved from {} to {} in {:?}", m, d, after[m], inst);
        }
    }
    Ok(())
}

pub fn auto_schedule_is_a_pure_function(seed: u64, _pick: u32) -> Result<(), TestCaseError> {
    let (_, plan) = random_scheduled(seed);
    let a = auto_schedule(&plan.view(), &[], None);
    let b = auto_schedule(&plan.clone().view(), &[], None);
    let bytes = |r: &Result<AutoSchedule, ScheduleError>| serde_json::to_string(&r.as_ref().map(|o| (&o.schedule, &o.diagnostics))).unwrap();
    prop_assert_eq!(bytes(&a), bytes(&b));
    Ok(())
}

pub fn regenerating_the_document_changes_nothing(seed: u64, _pick: u32) -> Result<(), TestCaseError> {
    let (_, mut plan) = random_scheduled(seed);
    if plan.auto_schedule(None).is_err() {
        return Ok(());
    }
    let as_of = NaiveDate::from_ymd_opt(2025, 1, 6).unwrap();
    let first = plan.assemble_document(as_of).cloned();
    let second = plan.assemble_document(as_of).cloned();
    prop_assert_eq!(&first, &second);
    if let Ok(doc) = first {
        let json = doc.render(RenderFormat::Json);
        let back: MilestonePlanDocument = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(&back, &doc);
        prop_assert_eq!(back.render(RenderFormat::TextTable), doc.render(RenderFormat::TextTable));
    }
    Ok(())
}

pub fn plan_files_round_trip(seed: u64, _pick: u32) -> Result<(), TestCaseError> {
    let (_, mut plan) = random_scheduled(seed);
    if seed.is_multiple_of(2) {
        let _ = plan.auto_schedule(None);
        let _ = plan.assemble_document(NaiveDate::from_ymd_opt(2025, 2, 3).unwrap());
    }
    let text = plan.to_json();
    let back = Plan::from_json(&text).unwrap();
    prop_assert_eq!(&back, &plan);
    prop_assert_eq!(back.to_json(), text);
    prop_assert_eq!(back.due_dates().ok(), plan.due_dates().ok());
    Ok(())
}

pub fn allocated_plans_round_trip(seed: u64, _pick: u32) -> Result<(), TestCaseError> {
    let plan = random_allocated(seed);
    let back = Plan::from_json(&plan.to_json()).unwrap();
    prop_assert_eq!(back, plan);
    Ok(())
}

/// Every invariant, by name. Each takes a seed for the random instance and
/// a second number some of them use to pick within it.
pub type Check = fn(u64, u32) -> Result<(), TestCaseError>;

pub const ALL: &[(&str, Check)] = &[
    ("backlog_rollup_is_sum_of_leaves", backlog_rollup_is_sum_of_leaves),
    ("matrix_columns_and_pool_account_for_every_hour", matrix_columns_and_pool_account_for_every_hour),
    ("under_allocation_never_reports_a_conservation_mismatch", under_allocation_never_reports_a_conservation_mismatch),
    ("feasible_layouts_place_every_hour", feasible_layouts_place_every_hour),
    ("no_week_is_over_capacity", no_week_is_over_capacity),
    ("successors_never_finish_first", successors_never_finish_first),
    ("anchors_hold_whenever_no_diagnostic_says_otherwise", anchors_hold_whenever_no_diagnostic_says_otherwise),
    ("another_blackout_never_brings_a_date_forward", another_blackout_never_brings_a_date_forward),
    ("auto_schedule_is_a_pure_function", auto_schedule_is_a_pure_function),
    ("regenerating_the_document_changes_nothing", regenerating_the_document_changes_nothing),
    ("plan_files_round_trip", plan_files_round_trip),
    ("allocated_plans_round_trip", allocated_plans_round_trip),
];
