//! Greedy layout of all work packages.
//!
//! Packages are filled forward from their first allowed week in dependency
//! order, earliest deadline first, where a package's deadline is the tightest
//! anchor it or anything after it has to meet. A second pass pushes forward
//! any package whose gate or finish-to-finish edge the first pass broke.
//! Whatever misses an anchor is reported rather than rejected, so a planner
//! can see how late things run.
//!
//! Hard packages are not right-aligned against their anchors: doing so made
//! dates depend on the calendar in odd ways, with an extra blackout week
//! sometimes pulling a milestone earlier.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::calendar::Week;
use crate::graph::{MilestoneId, MilestoneKind};
use crate::hours::Hours;
use crate::plan::PlanView;

use super::context::{augmented_edges, augmented_order, completion_weeks, gate_week, predecessor_finish};
use super::validate::{breaches, ff_breach};
use super::{compute_anchors, timebox, Buffer, ConstraintKind, Schedule, ScheduleError, WeekHours};

/// Cooperative cancellation for long scheduling runs.
#[derive(Debug, Clone, Default)]
pub struct CancelToken(Arc<AtomicBool>);

impl CancelToken {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cancel(&self) {
        self.0.store(true, Ordering::Relaxed);
    }

    pub fn is_cancelled(&self) -> bool {
        self.0.load(Ordering::Relaxed)
    }
}

/// Something the layout could not honour.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "diagnostic", rename_all = "snake_case")]
pub enum Diagnostic {
    /// A hard milestone finishes after its anchor week. `shortfall_hours` is the
    /// work of the milestone and its predecessors that lands after the anchor.
    Infeasible { milestone: MilestoneId, anchor_week: Week, earliest_feasible_week: Week, shortfall_hours: Hours },
    /// Hours that did not fit before the end of the horizon.
    Unplaced { milestone: MilestoneId, hours: Hours },
    /// A constraint had to be dropped to place the package at all.
    ConstraintRelaxed { milestone: MilestoneId, kind: ConstraintKind },
}

impl Diagnostic {
    pub fn milestone(&self) -> &MilestoneId {
        match self {
            Diagnostic::Infeasible { milestone, .. }
            | Diagnostic::Unplaced { milestone, .. }
            | Diagnostic::ConstraintRelaxed { milestone, .. } => milestone,
        }
    }

    pub fn to_error(&self) -> ScheduleError {
        match self.clone() {
            Diagnostic::Infeasible { milestone, anchor_week, earliest_feasible_week, shortfall_hours } => {
                ScheduleError::Infeasible { milestone, shortfall_hours, earliest_feasible_week, anchor_week }
            }
            Diagnostic::Unplaced { milestone, hours } => ScheduleError::Unplaced(hours, milestone),
            Diagnostic::ConstraintRelaxed { milestone, kind } => ScheduleError::ConstraintViolation { milestone, kind },
        }
    }
}

/// Result of [`auto_schedule`]: the layout (relaxed where needed) plus what it
/// could not honour.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AutoSchedule {
    pub schedule: Schedule,
    pub diagnostics: Vec<Diagnostic>,
}

impl AutoSchedule {
    pub fn is_feasible(&self) -> bool {
        self.diagnostics.is_empty()
    }

    /// The schedule if feasible, else the first diagnostic as an error.
    pub fn into_result(self) -> Result<Schedule, ScheduleError> {
        match self.diagnostics.first() {
            None => Ok(self.schedule),
            Some(d) => Err(d.to_error()),
        }
    }
}

/// Lays out every work package and the crosscutting pool from scratch.
/// `buffers` are kept where they are. Fails outright only on structural
/// problems (cycles, hard dates off the calendar, a pool too large for the
/// team) or cancellation.
pub fn auto_schedule(view: &PlanView<'_>, buffers: &[Buffer], cancel: Option<&CancelToken>) -> Result<AutoSchedule, ScheduleError> {
    run(view, buffers, cancel)
}

/// Earliest week in which `milestone` can be reached without making any
/// unrelated hard milestone late. Anchors of the milestone itself and of its
/// successors do not count.
///
/// Found by pinning the milestone to week 1, 2, ... as if it were hard and
/// keeping the first week that lays out cleanly.
pub fn earliest_completion(
    view: &PlanView<'_>,
    buffers: &[Buffer],
    milestone: &MilestoneId,
    cancel: Option<&CancelToken>,
) -> Result<Week, ScheduleError> {
    let target = view.graph.get(milestone).ok_or_else(|| ScheduleError::UnknownMilestone(milestone.clone()))?;
    let mut relaxed = view.graph.clone();
    for s in view.graph.transitive_successors(milestone)? {
        let mut m = relaxed.get(&s).expect("successor exists").clone();
        m.kind = MilestoneKind::Soft;
        m.hard_date = None;
        relaxed.update_milestone(m)?;
    }
    let cal = view.calendar;
    let mut last = None;
    for week in cal.weeks() {
        let mut graph = relaxed.clone();
        let mut m = target.clone();
        m.kind = MilestoneKind::Hard;
        m.hard_date = Some(cal.week_start(week));
        graph.update_milestone(m)?;
        let pinned = PlanView { graph: &graph, ..*view };
        let out = run(&pinned, buffers, cancel)?;
        if out.is_feasible() {
            let completions = completion_weeks(view, &out.schedule)?;
            let own = out.schedule.due_week(milestone).map(i64::from).unwrap_or(1);
            let preds = predecessor_finish(view, &completions, milestone).ok().flatten().unwrap_or(1);
            return Ok(own.max(preds).max(1) as Week);
        }
        last = Some(out);
    }
    match last.and_then(|o| o.diagnostics.first().map(Diagnostic::to_error)) {
        Some(e) => Err(e),
        None => Err(ScheduleError::UnscheduledMilestone(milestone.clone())),
    }
}

fn run(view: &PlanView<'_>, buffers: &[Buffer], cancel: Option<&CancelToken>) -> Result<AutoSchedule, ScheduleError> {
    let cal = view.calendar;
    if let Some(e) = cal.validate().into_iter().next() {
        return Err(e.into());
    }
    view.graph.topological_order()?;
    let anchors = compute_anchors(view.graph, cal)?;
    let efforts: BTreeMap<MilestoneId, Hours> =
        view.matrix.work_packages(view.graph).into_iter().filter(|(_, h)| h.is_positive()).collect();
    let pool = view.matrix.crosscutting_pool(view.backlog);

    let horizon = cal.horizon_weeks;
    let total: Hours = efforts.values().copied().sum::<Hours>() + pool;
    let mut cumulative = Hours::ZERO;
    let mut span = horizon;
    for w in cal.weeks() {
        cumulative += cal.capacity_unchecked(w);
        if cumulative >= total {
            span = w;
            break;
        }
    }
    span = span.max(anchors.values().copied().max().unwrap_or(1));

    let mut packer = Packer::new(view, efforts, anchors, buffers, cancel)?;
    loop {
        packer.check_cancel()?;
        match packer.pack(span, pool) {
            Err(ScheduleError::PoolExceedsCapacity { .. }) if span < horizon => {
                span += 1;
                continue;
            }
            Err(e) => return Err(e),
            Ok(()) => {}
        }
        let last = packer.sched.placements.values().filter_map(timebox).map(|(_, l)| l).max().unwrap_or(1);
        if last > span && span < horizon {
            span = last.min(horizon);
            continue;
        }
        break;
    }
    let diagnostics = packer.diagnostics()?;
    Ok(AutoSchedule { schedule: packer.sched, diagnostics })
}

struct Packer<'v, 'a> {
    view: &'v PlanView<'a>,
    efforts: BTreeMap<MilestoneId, Hours>,
    topo: HashMap<MilestoneId, usize>,
    deadlines: HashMap<MilestoneId, Week>,
    anchors: BTreeMap<MilestoneId, Week>,
    buffers: Vec<Buffer>,
    cancel: Option<&'v CancelToken>,
    sched: Schedule,
    relaxed: Vec<Diagnostic>,
}

impl<'v, 'a> Packer<'v, 'a> {
    fn new(
        view: &'v PlanView<'a>,
        efforts: BTreeMap<MilestoneId, Hours>,
        anchors: BTreeMap<MilestoneId, Week>,
        buffers: &[Buffer],
        cancel: Option<&'v CancelToken>,
    ) -> Result<Self, ScheduleError> {
        let order = augmented_order(view, |i, _| i)?;
        let topo: HashMap<MilestoneId, usize> = order.iter().enumerate().map(|(i, m)| (m.clone(), i)).collect();
        // latest week each milestone may finish without pushing a hard one late
        let edges = augmented_edges(view);
        let mut deadlines: HashMap<MilestoneId, Week> = HashMap::new();
        for m in order.iter().rev() {
            let mut d = anchors.get(m).copied().unwrap_or(view.calendar.horizon_weeks);
            for (p, s) in &edges {
                if p == m {
                    if let Some(&sd) = deadlines.get(s) {
                        d = d.min(sd);
                    }
                }
            }
            deadlines.insert(m.clone(), d);
        }
        Ok(Packer {
            view,
            efforts,
            topo,
            deadlines,
            anchors,
            buffers: buffers.to_vec(),
            cancel,
            sched: Schedule::default(),
            relaxed: Vec::new(),
        })
    }

    fn check_cancel(&self) -> Result<(), ScheduleError> {
        match self.cancel {
            Some(c) if c.is_cancelled() => Err(ScheduleError::Cancelled),
            _ => Ok(()),
        }
    }

    fn pack(&mut self, span: Week, pool: Hours) -> Result<(), ScheduleError> {
        self.sched = Schedule { anchors: self.anchors.clone(), buffers: self.buffers.clone(), ..Schedule::default() };
        self.relaxed.clear();
        self.sched.spread_crosscutting_through(self.view.calendar, pool, span)?;

        let order = augmented_order(self.view, |_, m| (self.deadlines[m], self.topo[m]))?;
        for m in &order {
            if self.efforts.contains_key(m) && !self.sched.placements.contains_key(m) {
                self.check_cancel()?;
                self.place_forward(m)?;
            }
        }

        let order = augmented_order(self.view, |i, _| i)?;
        for m in &order {
            if !self.efforts.contains_key(m) || !self.needs_repair(m)? {
                continue;
            }
            self.check_cancel()?;
            self.sched.placements.remove(m);
            self.relaxed.retain(|d| d.milestone() != m);
            self.place_forward(m)?;
        }
        Ok(())
    }

    fn needs_repair(&self, m: &MilestoneId) -> Result<bool, ScheduleError> {
        let completions = completion_weeks(self.view, &self.sched)?;
        if ff_breach(self.view, &completions, m) {
            return Ok(true);
        }
        let Some(c) = self.view.constraint(m) else { return Ok(false) };
        let Some(hours) = self.sched.placements.get(m) else { return Ok(false) };
        Ok(breaches(self.view, &completions, c, hours)
            .iter()
            .any(|k| matches!(k, ConstraintKind::NotBefore { .. })))
    }

    /// `(first allowed week, week the package must not finish before)`;
    /// beyond the horizon when a gate or predecessor is itself unplaced.
    fn window(&self, m: &MilestoneId) -> Result<(i64, i64), ScheduleError> {
        let beyond = self.view.calendar.horizon_weeks as i64 + 1;
        let completions = completion_weeks(self.view, &self.sched)?;
        let from = match self.view.constraint(m).map(|c| gate_week(self.view, &completions, c)) {
            None | Some(Ok(None)) => 1,
            Some(Ok(Some(w))) => w.max(1),
            Some(Err(_)) => beyond,
        };
        let mut min_due = match predecessor_finish(self.view, &completions, m) {
            Ok(w) => w.unwrap_or(1),
            Err(()) => beyond,
        };
        // a hard milestone counts as reached on its anchor week anyway
        if self.anchors.get(m).is_some_and(|&a| min_due <= a as i64) {
            min_due = 1;
        }
        Ok((from, min_due))
    }

    fn cap(&self, m: &MilestoneId) -> Option<Hours> {
        self.view.constraint(m).and_then(|c| c.max_weekly_hours)
    }

    fn contiguous(&self, m: &MilestoneId) -> bool {
        self.view.constraint(m).is_some_and(|c| c.contiguous)
    }

    fn avail(&self, m: &MilestoneId, week: i64) -> Hours {
        let cal = self.view.calendar;
        if week < 1 || week > cal.horizon_weeks as i64 || cal.is_blackout(week as Week) {
            return Hours::ZERO;
        }
        let w = week as Week;
        let free = self.sched.residual(cal, w).max(Hours::ZERO);
        match self.cap(m) {
            Some(cap) => {
                let mine = self.sched.placements.get(m).and_then(|h| h.get(&w)).copied().unwrap_or(Hours::ZERO);
                free.min((cap - mine).max(Hours::ZERO))
            }
            None => free,
        }
    }

    fn put(&mut self, m: &MilestoneId, week: i64, h: Hours) {
        let slot = self.sched.placements.entry(m.clone()).or_default().entry(week as Week).or_insert(Hours::ZERO);
        *slot += h;
    }

    fn commit(&mut self, m: &MilestoneId, plan: WeekHours) {
        for (w, h) in plan {
            self.put(m, w as i64, h);
        }
    }

    fn horizon(&self) -> i64 {
        self.view.calendar.horizon_weeks as i64
    }

    /// Right-aligned against the deadline; overflow goes forward past it.
    /// Earliest-first fill from the package's window.
    fn place_forward(&mut self, m: &MilestoneId) -> Result<(), ScheduleError> {
        let effort = self.efforts[m];
        let (from, min_due) = self.window(m)?;
        if self.contiguous(m) {
            if let Some(plan) = self.forward_contiguous(m, effort, from, min_due) {
                self.commit(m, plan);
                return Ok(());
            }
            let gap_week = from.clamp(1, self.horizon()) as Week;
            self.relaxed.push(Diagnostic::ConstraintRelaxed { milestone: m.clone(), kind: ConstraintKind::NotContiguous { gap_week } });
        }
        let left = self.forward(m, effort, from, min_due);
        self.note_unplaced(m, left);
        Ok(())
    }

    fn note_unplaced(&mut self, m: &MilestoneId, left: Hours) {
        if left.is_positive() {
            self.relaxed.push(Diagnostic::Unplaced { milestone: m.clone(), hours: left });
        }
    }

    /// Fills weeks from `from` onwards. When the package may not finish
    /// before `min_due`, a person-day of it goes into the first available
    /// week at or after `min_due` so the package cannot end too early.
    fn forward(&mut self, m: &MilestoneId, amount: Hours, from: i64, min_due: i64) -> Hours {
        let mut remaining = amount;
        if min_due > from {
            if let Some(t) = (min_due..=self.horizon()).find(|&t| self.avail(m, t).is_positive()) {
                let day = self.view.calendar.hours_per_fte_week / 5;
                let x = self.avail(m, t).min(remaining).min(day);
                self.put(m, t, x);
                remaining -= x;
            } else {
                return remaining;
            }
        }
        let mut w = from.max(1);
        while w <= self.horizon() && remaining.is_positive() {
            let a = self.avail(m, w);
            if a.is_positive() {
                let x = a.min(remaining);
                self.put(m, w, x);
                remaining -= x;
            }
            w += 1;
        }
        remaining
    }

    fn forward_contiguous(&self, m: &MilestoneId, amount: Hours, from: i64, min_due: i64) -> Option<WeekHours> {
        let cal = self.view.calendar;
        for start in from.max(1)..=self.horizon() {
            if !self.avail(m, start).is_positive() {
                continue;
            }
            let mut plan = WeekHours::new();
            let mut remaining = amount;
            let mut w = start;
            while remaining.is_positive() && w <= self.horizon() {
                if cal.is_blackout(w as Week) {
                    w += 1;
                    continue;
                }
                let a = self.avail(m, w);
                if !a.is_positive() {
                    break;
                }
                let x = a.min(remaining);
                plan.insert(w as Week, x);
                remaining -= x;
                w += 1;
            }
            if remaining.is_zero() && plan.keys().last().is_some_and(|&l| l as i64 >= min_due) {
                return Some(plan);
            }
        }
        None
    }

    fn diagnostics(&self) -> Result<Vec<Diagnostic>, ScheduleError> {
        let view = self.view;
        let completions = completion_weeks(view, &self.sched)?;
        let mut out = Vec::new();
        for m in augmented_order(view, |i, _| i)? {
            let Some(&anchor) = self.anchors.get(&m) else { continue };
            let own = self.sched.due_week(&m).map(i64::from).unwrap_or(anchor as i64);
            // an unfinished predecessor is reported on its own
            let preds = predecessor_finish(view, &completions, &m).ok().flatten();
            let finish = own.max(preds.unwrap_or(1));
            if finish <= anchor as i64 {
                continue;
            }
            let mut involved = view.graph.transitive_predecessors(&m)?;
            involved.insert(m.clone());
            let shortfall: Hours = involved
                .iter()
                .filter_map(|p| self.sched.placements.get(p))
                .flat_map(|h| h.range(anchor + 1..))
                .map(|(_, h)| *h)
                .sum();
            out.push(Diagnostic::Infeasible {
                milestone: m.clone(),
                anchor_week: anchor,
                earliest_feasible_week: finish as Week,
                shortfall_hours: shortfall,
            });
        }
        out.extend(self.relaxed.iter().cloned());
        Ok(out)
    }
}
