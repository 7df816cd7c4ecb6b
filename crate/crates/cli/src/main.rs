//! `milestone`: run the planning pipeline on plan files from the shell.
//!
//! Exit status is 0 on success, 1 when the plan has violations or the layout
//! has diagnostics, and 2 for usage errors and unreadable input.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use chrono::NaiveDate;
use clap::{Parser, Subcommand, ValueEnum};
use milestone_core::matrix::MatrixTable;
use milestone_core::schedule::{render_canvas_svg, CanvasOptions, Diagnostic, WeekHours};
use milestone_core::{fixture, Hours, MilestoneId, Plan, RenderFormat, Schedule};
use milestone_service::PlanStore;

#[derive(Debug, Parser)]
#[command(name = "milestone", version, about = "Milestone planning from the command line")]
struct Cli {
    #[command(flatten)]
    config: CliConfig,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct CliConfig {
    /// Directory of the plan store used by `serve`.
    #[arg(long, global = true, default_value = "plans")]
    store: PathBuf,
    /// Output format. Not every command supports every format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Hours per sticky note on the canvas.
    #[arg(long, global = true, default_value_t = 40, value_parser = clap::value_parser!(u32).range(1..))]
    quantum: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
    Svg,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check backlog, milestones, matrix, calendar and schedule.
    Validate { plan: PathBuf },
    /// Print the planning matrix with its work package totals.
    Matrix { plan: PathBuf },
    /// Lay out every work package automatically, or check a hand layout.
    Schedule {
        plan: PathBuf,
        /// Placement records (`{"<milestone>": {"<week>": hours}}`) to check
        /// instead of laying out automatically.
        #[arg(long, value_name = "RECORDS")]
        check: Option<PathBuf>,
        /// Write the plan with its new schedule here.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Derived due date of every milestone.
    Dates { plan: PathBuf },
    /// The milestone plan table.
    Plan {
        plan: PathBuf,
        /// Status date of the table. Defaults to the calendar start.
        #[arg(long)]
        as_of: Option<NaiveDate>,
    },
    /// Picture of the schedule canvas.
    Svg {
        plan: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Serve the HTTP API over the plan store.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
    /// Write one of the bundled AmazonLight files.
    Fixture {
        #[arg(value_enum)]
        name: FixtureName,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Walk through the AmazonLight example from matrix to plan table.
    Reproduce,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FixtureName {
    /// The plan with deployment wanted by April 1st.
    Amazonlight,
    /// Deployment moved to May 1st.
    Negotiated,
    /// The negotiated plan with the hand layout applied.
    Scheduled,
    /// Placement records of the hand layout, for `schedule --check`.
    HandLayout,
}

/// What a command produced: its output and whether it found problems.
struct Outcome {
    stdout: String,
    problems: bool,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Outcome { stdout, problems: false }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(out) => {
            print!("{}", out.stdout);
            ExitCode::from(u8::from(out.problems))
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    let cfg = &cli.config;
    match cli.command {
        Command::Validate { plan } => validate(&load(&plan)?, cfg.format),
        Command::Matrix { plan } => matrix(&load(&plan)?, cfg.format),
        Command::Schedule { plan, check: None, output } => auto(load(&plan)?, cfg.format, output.as_deref()),
        Command::Schedule { plan, check: Some(records), output } => {
            check(load(&plan)?, &read_records(&records)?, cfg.format, output.as_deref())
        }
        Command::Dates { plan } => {
            let (plan, diagnostics) = scheduled(load(&plan)?)?;
            let mut out = dates(&plan, cfg.format)?;
            out.problems |= !diagnostics.is_empty();
            Ok(out)
        }
        Command::Plan { plan, as_of } => {
            let (mut plan, diagnostics) = scheduled(load(&plan)?)?;
            let as_of = as_of.unwrap_or(plan.calendar.start_date);
            let format = match cfg.format {
                Format::Text => RenderFormat::TextTable,
                Format::Json => RenderFormat::Json,
                Format::Svg => RenderFormat::Svg,
                Format::Csv => bail!("`plan` renders as text, json or svg"),
            };
            let doc = plan.assemble_document(as_of)?;
            Ok(Outcome { stdout: doc.render(format), problems: !diagnostics.is_empty() })
        }
        Command::Svg { plan, output } => {
            let (plan, diagnostics) = scheduled(load(&plan)?)?;
            let opts = CanvasOptions { quantum: Hours::new(cfg.quantum.into()), ..CanvasOptions::default() };
            let svg = render_canvas_svg(&plan.view(), plan.schedule.as_ref().expect("scheduled"), &opts);
            let stdout = emit(svg, output.as_deref())?;
            Ok(Outcome { stdout, problems: !diagnostics.is_empty() })
        }
        Command::Serve { addr } => {
            let store = PlanStore::open(&cfg.store).with_context(|| format!("opening store {}", cfg.store.display()))?;
            eprintln!("serving {} on http://{addr}", cfg.store.display());
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(milestone_service::serve(addr, store))?;
            Ok(Outcome::ok(String::new()))
        }
        Command::Fixture { name, output } => {
            let text = match name {
                FixtureName::Amazonlight => fixture::amazonlight().to_json(),
                FixtureName::Negotiated => fixture::amazonlight_negotiated().to_json(),
                FixtureName::Scheduled => fixture::amazonlight_scheduled().to_json(),
                FixtureName::HandLayout => {
                    let mut s = serde_json::to_string_pretty(&fixture::hand_layout_records())?;
                    s.push('\n');
                    s
                }
            };
            Ok(Outcome::ok(emit(text, output.as_deref())?))
        }
        Command::Reproduce => reproduce(),
    }
}

fn load(path: &Path) -> anyhow::Result<Plan> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if text.trim().is_empty() {
        bail!("{} is empty", path.display());
    }
    Plan::from_json(&text).with_context(|| format!("loading {}", path.display()))
}

/// Writes `text` to `path` and returns nothing to print, or returns `text`.
fn emit(text: String, path: Option<&Path>) -> anyhow::Result<String> {
    match path {
        Some(p) => {
            std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

fn json(value: &impl serde::Serialize) -> anyhow::Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn only(format: Format, allowed: &[Format], command: &str) -> anyhow::Result<()> {
    if allowed.contains(&format) {
        Ok(())
    } else {
        let names: Vec<_> = allowed.iter().map(|f| f.to_possible_value().unwrap().get_name().to_string()).collect();
        bail!("`{command}` supports --format {}", names.join(", "))
    }
}

/// The plan with a schedule: its own if it has one, else an automatic layout.
fn scheduled(mut plan: Plan) -> anyhow::Result<(Plan, Vec<Diagnostic>)> {
    if plan.schedule.as_ref().is_some_and(|s| !s.placements.is_empty()) {
        return Ok((plan, Vec::new()));
    }
    let diagnostics = plan.auto_schedule(None)?;
    for d in &diagnostics {
        eprintln!("diagnostic: {}", d.to_error());
    }
    Ok((plan, diagnostics))
}

fn validate(plan: &Plan, format: Format) -> anyhow::Result<Outcome> {
    only(format, &[Format::Text, Format::Json], "validate")?;
    let report = plan.validate();
    let stdout = if format == Format::Json {
        json(&report)?
    } else {
        let mut s = String::new();
        for v in &report.backlog {
            writeln!(s, "backlog: {v}")?;
        }
        for v in &report.graph {
            writeln!(s, "milestones: {v}")?;
        }
        for v in &report.calendar {
            writeln!(s, "calendar: {v}")?;
        }
        for v in &report.matrix {
            writeln!(s, "matrix: {v}")?;
        }
        for v in &report.schedule {
            writeln!(s, "schedule: {}", serde_json::to_string(v)?)?;
        }
        for v in &report.lints {
            writeln!(s, "lint: {}", serde_json::to_string(v)?)?;
        }
        if report.is_clean() {
            s.push_str("clean\n");
        }
        s
    };
    Ok(Outcome { stdout, problems: !report.is_clean() })
}

fn matrix(plan: &Plan, format: Format) -> anyhow::Result<Outcome> {
    let table = plan.matrix.table(&plan.backlog, &plan.graph)?;
    let violations = plan.matrix.validate(&plan.backlog, &plan.graph);
    for v in &violations {
        eprintln!("matrix: {v}");
    }
    let stdout = match format {
        Format::Json => json(&table)?,
        Format::Csv => table.to_delimited(','),
        Format::Text => aligned(&table),
        Format::Svg => bail!("`matrix` supports --format text, json, csv"),
    };
    Ok(Outcome { stdout, problems: violations.iter().any(|v| !v.is_warning()) })
}

/// Fixed-width matrix: milestone ids as column heads, then one line per leaf
/// and the totals. The pool is reported after the table.
fn aligned(table: &MatrixTable) -> String {
    let mut lines: Vec<Vec<String>> = Vec::new();
    let mut head = vec!["WBS".to_string(), "Item".to_string(), "Total".to_string()];
    head.extend(table.columns.iter().map(|(id, _)| id.to_string()));
    lines.push(head);
    for row in &table.rows {
        let mut line = vec![row.wbs_code.clone(), row.name.clone(), row.effort.to_string()];
        line.extend(row.cells.iter().map(|c| c.map(|h| h.to_string()).unwrap_or_else(|| ".".into())));
        lines.push(line);
    }
    let mut totals = vec![String::new(), "Work Packages".to_string(), table.total_effort.to_string()];
    totals.extend(table.column_totals.iter().map(Hours::to_string));
    lines.push(totals);

    let cols = lines[0].len();
    let widths: Vec<usize> = (0..cols).map(|c| lines.iter().map(|l| l[c].chars().count()).max().unwrap_or(0)).collect();
    let mut s = String::new();
    for line in &lines {
        let mut text = String::new();
        for (c, cell) in line.iter().enumerate() {
            let pad = widths[c] - cell.chars().count();
            if c > 0 {
                text.push_str("  ");
            }
            // names left, numbers right
            if c < 2 {
                text.push_str(cell);
                text.extend(std::iter::repeat_n(' ', pad));
            } else {
                text.extend(std::iter::repeat_n(' ', pad));
                text.push_str(cell);
            }
        }
        s.push_str(text.trim_end());
        s.push('\n');
    }
    let _ = writeln!(s, "Crosscutting pool: {} h", table.crosscutting_pool);
    s
}

fn records_text(plan: &Plan) -> anyhow::Result<String> {
    let schedule = plan.schedule.as_ref().ok_or_else(|| anyhow!("plan has no schedule"))?;
    let mut s = String::new();
    let mut line = |label: &str, hours: &WeekHours| {
        let cells: Vec<String> = hours.iter().map(|(w, h)| format!("{w}:{h}")).collect();
        let total: Hours = hours.values().copied().sum();
        let _ = writeln!(s, "{label:<14} {total:>5} h  {}", cells.join(" "));
    };
    for id in plan.graph.topological_order()? {
        if let Some(hours) = schedule.placements.get(&id) {
            line(id.as_str(), hours);
        }
    }
    if !schedule.crosscutting_profile.is_empty() {
        line("*crosscutting", &schedule.crosscutting_profile);
    }
    Ok(s)
}

fn auto(mut plan: Plan, format: Format, output: Option<&Path>) -> anyhow::Result<Outcome> {
    only(format, &[Format::Text, Format::Json], "schedule")?;
    let diagnostics = plan.auto_schedule(None)?;
    let mut stdout = if format == Format::Json {
        json(&serde_json::json!({
            "records": plan.schedule.as_ref().map(|s| s.export_records()),
            "diagnostics": diagnostics,
        }))?
    } else {
        let mut s = records_text(&plan)?;
        for d in &diagnostics {
            writeln!(s, "diagnostic: {}", d.to_error())?;
        }
        s
    };
    if let Some(path) = output {
        stdout.push_str(&emit(plan.to_json(), Some(path))?);
    }
    Ok(Outcome { stdout, problems: !diagnostics.is_empty() })
}

fn read_records(path: &Path) -> anyhow::Result<BTreeMap<String, WeekHours>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("{} is not a placement record file", path.display()))
}

/// Places the records by hand, in dependency order, and reports the dates or
/// what is wrong with the layout.
fn check(
    mut plan: Plan,
    records: &BTreeMap<String, WeekHours>,
    format: Format,
    output: Option<&Path>,
) -> anyhow::Result<Outcome> {
    only(format, &[Format::Text, Format::Json], "schedule --check")?;
    plan.schedule = None;
    let mut rejected = Vec::new();
    for id in plan.graph.topological_order()? {
        if let Some(hours) = records.get(id.as_str()) {
            if let Err(e) = plan.place(&id, hours.clone()) {
                rejected.push(format!("{id}: {e}"));
            }
        }
    }
    for key in records.keys() {
        if key != "*crosscutting" && !plan.graph.contains(&MilestoneId::new(key.as_str())) {
            rejected.push(format!("{key}: unknown milestone"));
        }
    }
    match records.get("*crosscutting") {
        Some(profile) => {
            let mut schedule = match plan.schedule.take() {
                Some(s) => s,
                None => {
                    let mut s = Schedule::new();
                    s.anchor_hard_milestones(&plan.graph, &plan.calendar)?;
                    s
                }
            };
            schedule.crosscutting_profile = profile.clone();
            plan.schedule = Some(schedule);
        }
        None => {
            if let Err(e) = plan.spread_crosscutting() {
                rejected.push(format!("crosscutting: {e}"));
            }
        }
    }
    let report = plan.validate();
    let mut problems = !rejected.is_empty() || !report.is_clean();
    let mut stdout = String::new();
    for r in &rejected {
        eprintln!("rejected: {r}");
    }
    if !report.is_clean() {
        eprint!("{}", validate(&plan, Format::Text)?.stdout);
    }
    match plan.due_dates() {
        Ok(_) => stdout.push_str(&dates(&plan, format)?.stdout),
        Err(e) => {
            eprintln!("dates: {e}");
            problems = true;
        }
    }
    if let Some(path) = output {
        emit(plan.to_json(), Some(path))?;
    }
    Ok(Outcome { stdout, problems })
}

fn dates(plan: &Plan, format: Format) -> anyhow::Result<Outcome> {
    only(format, &[Format::Text, Format::Json], "dates")?;
    let dates = plan.due_dates()?;
    let stdout = if format == Format::Json {
        json(&dates)?
    } else {
        let mut s = String::new();
        for id in plan.graph.topological_order()? {
            let m = plan.graph.get(&id).expect("ordered ids exist");
            let hard = if m.is_hard() { "hard" } else { "soft" };
            writeln!(s, "{:<6} {}  {hard}  {}", id.as_str(), dates[&id], m.name)?;
        }
        s
    };
    Ok(Outcome::ok(stdout))
}

fn reproduce() -> anyhow::Result<Outcome> {
    let mut s = String::new();
    let first = fixture::amazonlight();
    s.push_str("== planning matrix\n");
    s.push_str(&aligned(&first.matrix.table(&first.backlog, &first.graph)?));

    s.push_str("\n== automatic layout, deployment by April 1st\n");
    let mut april = first.clone();
    let diagnostics = april.auto_schedule(None)?;
    for d in &diagnostics {
        writeln!(s, "{}", d.to_error())?;
        if let Diagnostic::Infeasible { earliest_feasible_week, .. } = d {
            writeln!(s, "earliest feasible week {earliest_feasible_week} starts {}", april.calendar.week_start(*earliest_feasible_week))?;
        }
    }

    s.push_str("\n== automatic layout, deployment by May 1st\n");
    let mut may = fixture::amazonlight_negotiated();
    let diagnostics = may.auto_schedule(None)?;
    if diagnostics.is_empty() {
        s.push_str("feasible\n");
    }
    for d in &diagnostics {
        writeln!(s, "{}", d.to_error())?;
    }
    s.push_str(&dates(&may, Format::Text)?.stdout);

    s.push_str("\n== hand layout\n");
    let mut hand = fixture::amazonlight_scheduled();
    s.push_str(&records_text(&hand)?);
    let report = hand.validate();
    writeln!(s, "{}", if report.is_clean() { "validates clean" } else { "has violations" })?;

    s.push_str("\n== milestone plan\n");
    let as_of = hand.calendar.start_date;
    s.push_str(&hand.assemble_document(as_of)?.render(RenderFormat::TextTable));
    Ok(Outcome { stdout: s, problems: !report.is_clean() })
}
