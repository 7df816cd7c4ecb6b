//! AmazonLight, the small bookshop web site used throughout the docs and the
//! acceptance tests: 2600 hours of backlog, fifteen milestones, four people
//! from the end of September with Christmas and New Year off.

use std::collections::BTreeMap;

use chrono::NaiveDate;

use crate::backlog::{BacklogItem, ItemId, ItemKind};
use crate::calendar::Calendar;
use crate::graph::{Dependency, Milestone, MilestoneId, Responsible};
use crate::hours::Hours;
use crate::plan::Plan;
use crate::schedule::{WeekHours, WorkPackageConstraint};

fn d(y: i32, m: u32, day: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, day).expect("valid fixture date")
}

/// Matrix column order.
pub const MILESTONE_IDS: [&str; 15] =
    ["KO", "DCA", "IS", "CIA", "DC", "R1", "BL", "R2", "BR", "R3", "ATPA", "ATPC", "SD", "SO", "PC"];

pub fn calendar() -> Calendar {
    Calendar::new(d(2025, 9, 29), 36, 4).with_blackouts([13, 14])
}

/// The plan as first drafted, with deployment wanted by April 1st.
pub fn amazonlight() -> Plan {
    build(d(2026, 4, 1))
}

/// The plan after moving deployment to May 1st.
pub fn amazonlight_negotiated() -> Plan {
    build(d(2026, 5, 1))
}

/// The negotiated plan with the hand-made layout of [`hand_layout`] and
/// the project management pool spread over the whole project.
pub fn amazonlight_scheduled() -> Plan {
    let mut plan = amazonlight_negotiated();
    for (m, hours) in hand_layout() {
        plan.place(&m, hours).expect("fixture layout is valid");
    }
    plan.spread_crosscutting().expect("fixture pool fits");
    plan
}

fn build(deploy_by: NaiveDate) -> Plan {
    let mut plan = Plan::new("AmazonLight", calendar());

    let b = &mut plan.backlog;
    let root = b.add_item(None, BacklogItem::new("1", "1", "AmazonLight Project").kind(ItemKind::Deliverable)).unwrap();
    let leaf = |id: &str, name: &str, hours: i64| BacklogItem::new(id, id, name).effort(hours).kind(ItemKind::TechnicalStory);
    b.add_item(Some(&root), leaf("1.a", "UX Design", 150)).unwrap();
    b.add_item(Some(&root), leaf("1.b", "Infrastructure", 100)).unwrap();
    let web = b.add_item(Some(&root), BacklogItem::new("1.c", "1.c", "Website Software").kind(ItemKind::Deliverable)).unwrap();
    let browsing = b.add_item(Some(&web), BacklogItem::new("1.c.1", "1.c.1", "Browsing").kind(ItemKind::Epic)).unwrap();
    let story = |id: &str, name: &str, hours: i64| BacklogItem::new(id, id, name).effort(hours);
    b.add_item(Some(&browsing), story("1.c.1.1", "Category List", 100)).unwrap();
    b.add_item(Some(&browsing), story("1.c.1.2", "Category Book List", 150)).unwrap();
    b.add_item(Some(&browsing), story("1.c.1.3", "Book Details", 100)).unwrap();
    let buying = b.add_item(Some(&web), BacklogItem::new("1.c.2", "1.c.2", "Buying").kind(ItemKind::Epic)).unwrap();
    b.add_item(Some(&buying), story("1.c.2.1", "Add to Cart", 100)).unwrap();
    b.add_item(Some(&buying), story("1.c.2.2", "Remove From Cart", 50)).unwrap();
    b.add_item(Some(&buying), story("1.c.2.3", "Shipping Method", 50)).unwrap();
    b.add_item(Some(&buying), story("1.c.2.4", "Checkout", 100)).unwrap();
    b.add_item(Some(&web), story("1.c.3", "Emergent features (R3)", 250).kind(ItemKind::PlanningPackage)).unwrap();
    b.add_item(Some(&web), story("1.c.4", "Database Design", 200).kind(ItemKind::Epic)).unwrap();
    b.add_item(Some(&web), leaf("1.c.5", "Refactoring", 350)).unwrap();
    b.add_item(Some(&root), leaf("1.d", "Beta testing", 50)).unwrap();
    b.add_item(Some(&root), leaf("1.e", "Acceptance Testing", 100)).unwrap();
    b.add_item(Some(&root), leaf("1.f", "Deployment", 150)).unwrap();
    b.add_item(Some(&root), leaf("1.g", "Project Management", 600).crosscutting()).unwrap();

    let g = &mut plan.graph;
    let ms = [
        Milestone::hard("KO", "Project kick-off", d(2025, 10, 1))
            .criteria("Team staffed and kick-off meeting with the sponsor held")
            .rationale("9")
            .responsible(Responsible::Joint),
        Milestone::soft("DCA", "UX concept approved")
            .criteria("Sponsor signed off on the information architecture and UI design")
            .rationale("10")
            .responsible(Responsible::Client),
        Milestone::soft("IS", "Cloud infrastructure selected")
            .criteria("Hosting provider chosen after comparing at least five candidates")
            .rationale("10")
            .responsible(Responsible::Team),
        Milestone::soft("CIA", "Cloud infrastructure available")
            .criteria("Production cloud environment provisioned by the customer")
            .rationale("Proposed by team")
            .responsible(Responsible::Client)
            .committed_on(d(2026, 1, 10)),
        Milestone::soft("DC", "Ux design completed")
            .criteria("Sponsor feedback folded into the design")
            .rationale("Proposed by team")
            .responsible(Responsible::Team),
        Milestone::soft("R1", "Release 1: CL, BD, AC, CO, Data Base")
            .criteria("Release 1 stories done with 90% test coverage, running in production configuration, no broken links")
            .rationale("4, 5")
            .responsible(Responsible::Team),
        Milestone::soft("BL", "Beta testing launched")
            .criteria("Release 1 open to beta users with instrumentation and hypotheses in place")
            .rationale("1")
            .responsible(Responsible::Team),
        Milestone::soft("R2", "Release 2: CBL, RC, SM")
            .criteria("Release 2 stories done with 90% test coverage, running in production configuration")
            .rationale("4, 6")
            .responsible(Responsible::Team),
        Milestone::soft("BR", "Beta testing results reviewed")
            .criteria("Every beta finding triaged")
            .rationale("1")
            .responsible(Responsible::Joint),
        Milestone::soft("R3", "Release 3: Customer feedback + emergent features")
            .criteria("Beta feedback and emergent stories implemented within the reserved budget")
            .rationale("7")
            .responsible(Responsible::Team),
        Milestone::soft("ATPA", "Acceptance testing procedure approved")
            .criteria("Sponsor approved the acceptance suite, with positive, negative and invalid cases per feature")
            .rationale("2")
            .responsible(Responsible::Client),
        Milestone::soft("ATPC", "Acceptance test completed")
            .criteria("Acceptance suite passes and the sponsor has no objections")
            .rationale("2")
            .responsible(Responsible::Joint),
        Milestone::hard("SD", "System deployed", deploy_by)
            .criteria("Running in production, operators trained, 15 days without a software fault")
            .rationale("8")
            .responsible(Responsible::Team),
        Milestone::soft("SO", "Customer sign-off")
            .criteria("Customer takes ownership of the software")
            .rationale("3")
            .responsible(Responsible::Client)
            .committed_on(d(2026, 5, 15)),
        Milestone::hard("PC", "Project closed", d(2026, 5, 15))
            .criteria("Postmortem held and records archived")
            .rationale("8")
            .responsible(Responsible::Team),
    ];
    for m in ms {
        g.add_milestone(m).unwrap();
    }
    for (p, s) in [
        ("KO", "DCA"),
        ("KO", "IS"),
        ("KO", "ATPA"),
        ("DCA", "DC"),
        ("IS", "CIA"),
        ("DC", "R1"),
        ("CIA", "R1"),
        ("R1", "BL"),
        ("R1", "R2"),
        ("BL", "BR"),
        ("BR", "R3"),
        ("R2", "R3"),
        ("R3", "ATPC"),
        ("ATPA", "ATPC"),
        ("ATPC", "SD"),
        ("SD", "SO"),
        ("SO", "PC"),
    ] {
        g.add_dependency(Dependency::new(p, s)).unwrap();
    }

    for (item, m, h) in [
        ("1.a", "DCA", 140),
        ("1.a", "DC", 10),
        ("1.b", "IS", 100),
        ("1.c.1.1", "R1", 100),
        ("1.c.1.3", "R1", 100),
        ("1.c.2.1", "R1", 100),
        ("1.c.2.4", "R1", 100),
        ("1.c.4", "R1", 200),
        ("1.c.5", "R1", 150),
        ("1.d", "BL", 40),
        ("1.c.1.2", "R2", 150),
        ("1.c.2.2", "R2", 50),
        ("1.c.2.3", "R2", 50),
        ("1.c.5", "R2", 100),
        ("1.d", "BR", 10),
        ("1.c.3", "R3", 250),
        ("1.c.5", "R3", 100),
        ("1.e", "ATPA", 50),
        ("1.e", "ATPC", 50),
        ("1.f", "SD", 150),
    ] {
        plan.matrix
            .allocate(&plan.backlog, &plan.graph, &ItemId::new(item), &MilestoneId::new(m), Hours::new(h))
            .unwrap();
    }

    // Layout rules: design work is done by at most one person at a time,
    // programming waits for the infrastructure choice, each phase of the
    // beta and acceptance cycle waits for the previous one, and the beta
    // period runs for several weeks at a trickle.
    plan.constraints = vec![
        WorkPackageConstraint::new("DCA").cap(40),
        WorkPackageConstraint::new("IS").cap(40),
        WorkPackageConstraint::new("DC").cap(40),
        WorkPackageConstraint::new("R1").cap(120).after("IS"),
        WorkPackageConstraint::new("R2").after("IS"),
        WorkPackageConstraint::new("BL").after("R1"),
        WorkPackageConstraint::new("BR").cap(2).after("BL"),
        WorkPackageConstraint::new("R3").cap(120).after("BR"),
        WorkPackageConstraint::new("ATPC").cap(20).after("R3"),
        WorkPackageConstraint::new("SD").cap(40).after("ATPC"),
    ];
    plan
}

/// A hand layout in the spirit of the sticky-note canvas: design and
/// infrastructure first at one person each, Release 1 split around the
/// holidays, Release 2 and the beta next, then Release 3, acceptance and
/// deployment.
pub fn hand_layout() -> Vec<(MilestoneId, WeekHours)> {
    let row = |m: &str, weeks: &[(u32, i64)]| {
        let hours: WeekHours = weeks.iter().map(|&(w, h)| (w, Hours::new(h))).collect();
        (MilestoneId::new(m), hours)
    };
    vec![
        row("DCA", &[(1, 40), (2, 40), (3, 40), (4, 20)]),
        row("IS", &[(1, 20), (2, 20), (3, 20), (4, 20), (5, 20)]),
        row("DC", &[(6, 10)]),
        row("R1", &[(6, 100), (7, 100), (8, 100), (9, 100), (10, 100), (11, 100), (12, 100), (15, 50)]),
        row("BL", &[(16, 40)]),
        row("R2", &[(15, 40), (16, 100), (17, 100), (18, 100), (19, 10)]),
        row("BR", &[(17, 2), (18, 2), (19, 2), (20, 2), (21, 2)]),
        row("R3", &[(22, 120), (23, 120), (24, 110)]),
        row("ATPA", &[(23, 20), (24, 30)]),
        row("ATPC", &[(25, 20), (26, 20), (27, 10)]),
        row("SD", &[(28, 40), (29, 40), (30, 40), (31, 30)]),
    ]
}

/// [`hand_layout`] keyed by milestone.
pub fn hand_layout_records() -> BTreeMap<MilestoneId, WeekHours> {
    hand_layout().into_iter().collect()
}
