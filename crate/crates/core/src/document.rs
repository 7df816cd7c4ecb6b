//! The milestone plan handed to stakeholders: one row per milestone with its
//! planned date, who is responsible, and how execution is going.
//!
//! Planned dates come from the schedule and are never edited here. Execution
//! updates only touch status and forecast, and every update keeps the previous
//! rows in `history`.

use std::fmt::Write;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::graph::{MilestoneId, Responsible};
use crate::plan::PlanView;
use crate::schedule::{derive_due_dates, Schedule, ScheduleError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MilestoneStatus {
    NotStarted,
    InProgress,
    Completed,
}

impl MilestoneStatus {
    /// Letter used in the State column.
    pub fn code(self) -> &'static str {
        match self {
            MilestoneStatus::Completed => "C",
            MilestoneStatus::InProgress => "P",
            MilestoneStatus::NotStarted => "",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanRow {
    pub milestone_id: MilestoneId,
    pub description: String,
    pub planned_date: NaiveDate,
    /// Expected date while open; the actual date once completed.
    #[serde(default)]
    pub forecast_date: Option<NaiveDate>,
    pub status: MilestoneStatus,
    #[serde(default)]
    pub responsible: Option<Responsible>,
    pub hard: bool,
}

/// Rows as they stood before an update.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentVersion {
    pub as_of: NaiveDate,
    pub rows: Vec<PlanRow>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MilestonePlanDocument {
    pub as_of: NaiveDate,
    /// SHA-256 of the schedule the planned dates were derived from.
    pub provenance: String,
    pub rows: Vec<PlanRow>,
    #[serde(default)]
    pub history: Vec<DocumentVersion>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize)]
#[serde(tag = "error", content = "detail", rename_all = "snake_case")]
pub enum DocumentError {
    #[error("no row for milestone {0}")]
    UnknownRow(MilestoneId),
    #[error("completing {0} needs a date")]
    CompletedWithoutDate(MilestoneId),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RenderFormat {
    TextTable,
    Json,
    Svg,
}

impl std::str::FromStr for RenderFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" | "text_table" | "table" => Ok(RenderFormat::TextTable),
            "json" => Ok(RenderFormat::Json),
            "svg" => Ok(RenderFormat::Svg),
            other => Err(format!("unknown format {other:?} (expected text, json or svg)")),
        }
    }
}

pub fn schedule_digest(schedule: &Schedule) -> String {
    let bytes = serde_json::to_vec(schedule).expect("schedules serialize");
    let digest = Sha256::digest(&bytes);
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

impl MilestonePlanDocument {
    /// Builds the document from a complete schedule. Rows follow the
    /// dependency order, with milestones that are free to go in either order
    /// sorted by planned date.
    pub fn assemble(view: &PlanView<'_>, schedule: &Schedule, as_of: NaiveDate) -> Result<Self, DocumentError> {
        let dates = derive_due_dates(view, schedule)?;
        let order = view
            .graph
            .topological_order_by(|i, m| (dates.get(&m.id).copied(), i))
            .map_err(ScheduleError::from)?;
        let rows = order
            .iter()
            .map(|id| {
                let m = view.graph.get(id).expect("ordered ids exist");
                PlanRow {
                    milestone_id: id.clone(),
                    description: m.name.clone(),
                    planned_date: dates[id],
                    forecast_date: None,
                    status: MilestoneStatus::NotStarted,
                    responsible: m.responsible,
                    hard: m.is_hard(),
                }
            })
            .collect();
        Ok(MilestonePlanDocument { as_of, provenance: schedule_digest(schedule), rows, history: Vec::new() })
    }

    pub fn row(&self, id: &MilestoneId) -> Option<&PlanRow> {
        self.rows.iter().find(|r| &r.milestone_id == id)
    }

    /// Records execution progress. The previous rows go to `history` and
    /// `as_of` moves forward to `on` (never backwards).
    pub fn update_status(
        &mut self,
        id: &MilestoneId,
        status: MilestoneStatus,
        forecast_date: Option<NaiveDate>,
        on: NaiveDate,
    ) -> Result<(), DocumentError> {
        let idx = self
            .rows
            .iter()
            .position(|r| &r.milestone_id == id)
            .ok_or_else(|| DocumentError::UnknownRow(id.clone()))?;
        if status == MilestoneStatus::Completed && forecast_date.is_none() {
            return Err(DocumentError::CompletedWithoutDate(id.clone()));
        }
        self.history.push(DocumentVersion { as_of: self.as_of, rows: self.rows.clone() });
        let row = &mut self.rows[idx];
        row.status = status;
        if forecast_date.is_some() {
            row.forecast_date = forecast_date;
        }
        self.as_of = self.as_of.max(on);
        Ok(())
    }

    /// The document as it was after `n` updates (0 is the assembled original).
    pub fn version(&self, n: usize) -> Option<MilestonePlanDocument> {
        if n == self.history.len() {
            return Some(MilestonePlanDocument { history: self.history.clone(), ..self.clone() });
        }
        let v = self.history.get(n)?;
        Some(MilestonePlanDocument {
            as_of: v.as_of,
            provenance: self.provenance.clone(),
            rows: v.rows.clone(),
            history: self.history[..n].to_vec(),
        })
    }

    pub fn render(&self, format: RenderFormat) -> String {
        match format {
            RenderFormat::TextTable => self.render_text(),
            RenderFormat::Json => {
                let mut s = serde_json::to_string_pretty(self).expect("documents serialize");
                s.push('\n');
                s
            }
            RenderFormat::Svg => self.render_svg(),
        }
    }

    fn cells(&self) -> Vec<[String; 6]> {
        self.rows
            .iter()
            .map(|r| {
                let glyph = if r.hard { "●" } else { "○" };
                let (team, client) = match r.responsible {
                    Some(Responsible::Team) => (glyph, ""),
                    Some(Responsible::Client) => ("", glyph),
                    Some(Responsible::Joint) => (glyph, glyph),
                    None => ("", ""),
                };
                [
                    r.status.code().to_string(),
                    short_date(r.planned_date),
                    r.forecast_date.map(short_date).unwrap_or_default(),
                    team.to_string(),
                    client.to_string(),
                    r.description.clone(),
                ]
            })
            .collect()
    }

    fn render_text(&self) -> String {
        const HEADER: [&str; 6] = ["State", "Planned date", "Forecasted date", "Team", "Client", "Description"];
        let cells = self.cells();
        let mut widths: Vec<usize> = HEADER.iter().map(|h| h.chars().count()).collect();
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let mut out = String::new();
        let line = |out: &mut String, fields: &[&str]| {
            let mut l = String::new();
            for (i, (f, w)) in fields.iter().zip(&widths).enumerate() {
                if i > 0 {
                    l.push_str("  ");
                }
                l.push_str(f);
                l.extend(std::iter::repeat_n(' ', w - f.chars().count()));
            }
            out.push_str(l.trim_end());
            out.push('\n');
        };
        line(&mut out, &HEADER);
        let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
        line(&mut out, &rule.iter().map(String::as_str).collect::<Vec<_>>());
        for row in &cells {
            line(&mut out, &row.iter().map(String::as_str).collect::<Vec<_>>());
        }
        out.push_str("State: C = completed, P = in progress, blank = not started. ● hard milestone, ○ soft milestone\n");
        out
    }

    fn render_svg(&self) -> String {
        let row_h = 24u32;
        let cols: [(&str, u32); 6] =
            [("State", 50), ("Planned date", 100), ("Forecasted date", 120), ("Team", 50), ("Client", 50), ("Description", 340)];
        let width: u32 = cols.iter().map(|c| c.1).sum();
        let height = row_h * (self.rows.len() as u32 + 1) + 8;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
        );
        let mut x = 0;
        for (name, w) in cols {
            let _ = writeln!(s, r#"<text x="{}" y="16" font-weight="bold">{name}</text>"#, x + 4);
            x += w;
        }
        for (i, (row, r)) in self.cells().iter().zip(&self.rows).enumerate() {
            let y = row_h * (i as u32 + 1);
            if i % 2 == 0 {
                let _ = writeln!(s, r##"<rect x="0" y="{}" width="{width}" height="{row_h}" fill="#f2f2f2"/>"##, y + 2);
            }
            let mut x = 0;
            for (k, (_, w)) in cols.iter().enumerate() {
                let text = &row[k];
                if (k == 3 || k == 4) && !text.is_empty() {
                    let fill = if r.hard { "#222222" } else { "none" };
                    let _ = writeln!(
                        s,
                        r##"<circle cx="{}" cy="{}" r="6" fill="{fill}" stroke="#222222"/>"##,
                        x + w / 2,
                        y + row_h / 2 + 2
                    );
                } else if !text.is_empty() {
                    let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, x + 4, y + 17, crate::schedule::escape_xml(text));
                }
                x += w;
            }
        }
        s.push_str("</svg>\n");
        s
    }
}

/// "Oct 1st", "May 15th".
pub fn short_date(d: NaiveDate) -> String {
    let day = d.day();
    let suffix = match (day % 10, day % 100) {
        (1, n) if n != 11 => "st",
        (2, n) if n != 12 => "nd",
        (3, n) if n != 13 => "rd",
        _ => "th",
    };
    format!("{} {day}{suffix}", d.format("%b"))
}
