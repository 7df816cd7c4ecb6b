//! Random small planning instances and a brute-force reference solver for
//! them. The solver knows nothing about the library's scheduler: it tries
//! every combination of due weeks and checks capacity with Hall's condition
//! on prefix windows.

#![allow(dead_code)]

pub mod invariants;

use chrono::{Days, NaiveDate};
use milestone_core::backlog::BacklogItem;
use milestone_core::graph::{Dependency, Milestone};
use milestone_core::{Calendar, Hours, ItemId, MilestoneId, Plan};
use rand::Rng;

pub const NOTE: i64 = 40;

#[derive(Debug, Clone)]
pub struct Instance {
    pub weeks: u32,
    /// Notes of capacity per working week.
    pub capacity: u32,
    pub blackouts: Vec<u32>,
    /// Notes of work per milestone.
    pub notes: Vec<u32>,
    /// Hard anchor week per milestone.
    pub anchor: Vec<Option<u32>>,
    pub edges: Vec<(usize, usize)>,
}

pub fn start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2025, 1, 6).unwrap()
}

impl Instance {
    pub fn random(rng: &mut impl Rng) -> Instance {
        let weeks = rng.gen_range(3..=10);
        let capacity = rng.gen_range(1..=2);
        let mut blackouts = Vec::new();
        for _ in 0..rng.gen_range(0..=2) {
            let w = rng.gen_range(1..=weeks);
            if !blackouts.contains(&w) {
                blackouts.push(w);
            }
        }
        blackouts.sort();
        let n = rng.gen_range(1..=4);
        let notes = (0..n).map(|_| rng.gen_range(0..=3)).collect();
        let anchor = (0..n).map(|_| rng.gen_bool(0.4).then(|| rng.gen_range(1..=weeks))).collect();
        let mut edges = Vec::new();
        for j in 0..n {
            for i in 0..j {
                if rng.gen_bool(0.4) {
                    edges.push((i, j));
                }
            }
        }
        Instance { weeks, capacity, blackouts, notes, anchor, edges }
    }

    pub fn id(i: usize) -> MilestoneId {
        MilestoneId::new(format!("m{i}"))
    }

    pub fn to_plan(&self) -> Plan {
        let cal = Calendar::new(start(), self.weeks, self.capacity as i64).with_blackouts(self.blackouts.iter().copied());
        let mut plan = Plan::new("random", cal);
        for (i, a) in self.anchor.iter().enumerate() {
            let m = match a {
                // anywhere inside the anchor week
                Some(w) => Milestone::hard(format!("m{i}"), format!("M{i}"), start() + Days::new(7 * (*w as u64 - 1) + (i as u64 % 7))),
                None => Milestone::soft(format!("m{i}"), format!("M{i}")),
            };
            plan.graph.add_milestone(m).unwrap();
        }
        for &(p, s) in &self.edges {
            plan.graph.add_dependency(Dependency::new(Self::id(p), Self::id(s))).unwrap();
        }
        for (i, &n) in self.notes.iter().enumerate() {
            if n == 0 {
                continue;
            }
            let item = format!("{}", i + 1);
            plan.backlog.add_item(None, BacklogItem::new(item.clone(), item.clone(), "work").effort(n as i64 * NOTE)).unwrap();
            plan.matrix
                .allocate(&plan.backlog, &plan.graph, &ItemId::new(item), &Self::id(i), Hours::new(n as i64 * NOTE))
                .unwrap();
        }
        plan
    }

    fn working(&self, w: u32) -> bool {
        !self.blackouts.contains(&w)
    }

    fn topo(&self) -> Vec<usize> {
        // edges always go from lower to higher index
        (0..self.notes.len()).collect()
    }

    fn preds(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter(move |e| e.1 == i).map(|e| e.0)
    }

    /// Can every package finish exactly in its due week without exceeding
    /// any week's capacity? Hours are divisible, so a package only needs
    /// some positive amount in its due week (which is a working week) and
    /// the rest anywhere before it. Hall's condition on prefixes then decides.
    fn packable(&self, due: &[u32]) -> bool {
        let mut supply = 0i64;
        for t in 1..=self.weeks {
            if self.working(t) {
                supply += self.capacity as i64;
            }
            let demand: i64 =
                self.notes.iter().enumerate().filter(|(i, &n)| n > 0 && due[*i] <= t).map(|(_, &n)| n as i64).sum();
            if demand > supply {
                return false;
            }
        }
        true
    }

    /// Completion week of every milestone under the given due weeks, with
    /// the anchors of `ignore` not counted.
    fn completions(&self, due: &[u32], ignore: &[bool]) -> Vec<i64> {
        let mut c = vec![0i64; self.notes.len()];
        for i in self.topo() {
            let own = if self.notes[i] > 0 { Some(due[i] as i64) } else { None };
            let anchor = if ignore[i] { None } else { self.anchor[i].map(|a| a as i64) };
            c[i] = match (anchor, own) {
                (Some(a), Some(d)) => a.max(d),
                (Some(a), None) => a,
                (None, Some(d)) => d,
                (None, None) => self.preds(i).map(|p| c[p]).max().unwrap_or(1),
            };
        }
        c
    }

    /// Every due-week vector that meets capacity, anchors (except those in
    /// `ignore`) and finish-to-finish order. Calls `f` with the vector and
    /// the completions; stops early if `f` returns true.
    fn search(&self, ignore: &[bool], mut f: impl FnMut(&[u32], &[i64]) -> bool) {
        let n = self.notes.len();
        let choices: Vec<Vec<u32>> = (0..n)
            .map(|i| if self.notes[i] == 0 { vec![0] } else { (1..=self.weeks).filter(|&w| self.working(w)).collect() })
            .collect();
        let mut due = vec![0u32; n];
        fn rec(
            inst: &Instance,
            k: usize,
            choices: &[Vec<u32>],
            due: &mut Vec<u32>,
            ignore: &[bool],
            f: &mut dyn FnMut(&[u32], &[i64]) -> bool,
        ) -> bool {
            if k == choices.len() {
                if !inst.packable(due) {
                    return false;
                }
                let c = inst.completions(due, ignore);
                for i in 0..due.len() {
                    if inst.notes[i] > 0 && !ignore[i] {
                        if let Some(a) = inst.anchor[i] {
                            if due[i] > a {
                                return false;
                            }
                        }
                    }
                }
                for &(p, s) in &inst.edges {
                    if c[s] < c[p] {
                        return false;
                    }
                }
                for i in 0..due.len() {
                    if let (Some(a), false) = (inst.anchor[i], ignore[i]) {
                        let late = inst.preds(i).any(|p| c[p] > a as i64);
                        if late {
                            return false;
                        }
                    }
                }
                return f(due, &c);
            }
            for &w in &choices[k] {
                due[k] = w;
                if rec(inst, k + 1, choices, due, ignore, f) {
                    return true;
                }
            }
            false
        }
        rec(self, 0, &choices, &mut due, ignore, &mut f);
    }

    pub fn feasible(&self) -> bool {
        let ignore = vec![false; self.notes.len()];
        let mut found = false;
        self.search(&ignore, |_, _| {
            found = true;
            true
        });
        found
    }

    fn successors_closure(&self, m: usize) -> Vec<bool> {
        let mut mark = vec![false; self.notes.len()];
        mark[m] = true;
        for i in 0..self.notes.len() {
            if self.preds(i).any(|p| mark[p]) {
                mark[i] = true;
            }
        }
        mark
    }

    /// Smallest week in which `m` can be reached: its own work done and all
    /// its predecessors reached, with the anchors of `m` and everything after
    /// it ignored.
    pub fn earliest(&self, m: usize) -> Option<i64> {
        let ignore = self.successors_closure(m);
        let mut best: Option<i64> = None;
        self.search(&ignore, |due, c| {
            let own = if self.notes[m] > 0 { due[m] as i64 } else { 1 };
            let preds = self.preds(m).map(|p| c[p]).max().unwrap_or(1);
            let finish = if self.notes[m] > 0 || self.anchor[m].is_some() { own.max(preds) } else { c[m] };
            best = Some(best.map_or(finish, |b| b.min(finish)));
            false
        });
        best
    }
}
