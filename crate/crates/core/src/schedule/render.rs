//! SVG picture of the schedule canvas: one column per week, one row per
//! milestone, cells shaded by how much of the week the package takes.

use std::fmt::Write;

use crate::hours::Hours;
use crate::plan::PlanView;

use super::{Schedule, WeekHours};

#[derive(Debug, Clone)]
pub struct CanvasOptions {
    pub cell_width: u32,
    pub row_height: u32,
    pub label_width: u32,
    /// Hours per sticky note. Each cell is labelled with the number of notes
    /// it holds, rounded up.
    pub quantum: Hours,
}

impl Default for CanvasOptions {
    fn default() -> Self {
        CanvasOptions { cell_width: 28, row_height: 22, label_width: 160, quantum: Hours::new(40) }
    }
}

pub(crate) fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Deterministic for a given plan and schedule.
pub fn render_canvas_svg(view: &PlanView<'_>, schedule: &Schedule, opts: &CanvasOptions) -> String {
    let cal = view.calendar;
    let weeks = cal.horizon_weeks;
    let mut rows: Vec<(String, Option<&WeekHours>, Option<u32>)> = Vec::new();
    let order = view.graph.topological_order().unwrap_or_else(|_| view.graph.milestones().iter().map(|m| m.id.clone()).collect());
    for id in &order {
        let m = view.graph.get(id).expect("ordered ids exist");
        rows.push((m.name.clone(), schedule.placements.get(id), schedule.anchors.get(id).copied()));
    }
    if !schedule.crosscutting_profile.is_empty() {
        rows.push(("crosscutting".to_string(), Some(&schedule.crosscutting_profile), None));
    }
    let capacity = cal.weekly_capacity();
    let header = opts.row_height;
    let width = opts.label_width + weeks * opts.cell_width;
    let height = header + rows.len() as u32 * opts.row_height;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="10">"#
    );
    for w in cal.weeks() {
        let x = opts.label_width + (w - 1) * opts.cell_width;
        if cal.is_blackout(w) {
            let _ = writeln!(s, r##"<rect x="{x}" y="0" width="{}" height="{height}" fill="#dddddd"/>"##, opts.cell_width);
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{w}</text>"#, x + opts.cell_width / 2, header - 6);
    }
    for (i, (label, hours, anchor)) in rows.iter().enumerate() {
        let y = header + i as u32 * opts.row_height;
        let _ = writeln!(s, r#"<text x="4" y="{}">{}</text>"#, y + opts.row_height - 7, escape(label));
        if let Some(hours) = hours {
            for (&w, &h) in hours.iter() {
                if w < 1 || w > weeks {
                    continue;
                }
                let x = opts.label_width + (w - 1) * opts.cell_width;
                let share = if capacity.is_positive() { (h / capacity).to_f64().clamp(0.0, 1.0) } else { 0.0 };
                let _ = writeln!(
                    s,
                    r##"<rect x="{x}" y="{y}" width="{}" height="{}" fill="#3a6ea5" fill-opacity="{:.3}"><title>{} h</title></rect>"##,
                    opts.cell_width,
                    opts.row_height - 2,
                    0.2 + 0.8 * share,
                    fmt_hours(h)
                );
                if opts.quantum.is_positive() {
                    let notes = h.ceil_div(opts.quantum);
                    let _ = writeln!(
                        s,
                        r##"<text x="{}" y="{}" text-anchor="middle" fill="#ffffff">{notes}</text>"##,
                        x + opts.cell_width / 2,
                        y + opts.row_height - 7
                    );
                }
            }
        }
        if let Some(a) = anchor {
            let x = opts.label_width + a * opts.cell_width;
            let _ = writeln!(
                s,
                r##"<line x1="{x}" y1="{y}" x2="{x}" y2="{}" stroke="#c0392b" stroke-width="2"/>"##,
                y + opts.row_height
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

fn fmt_hours(h: Hours) -> String {
    if h.is_integer() {
        h.to_string()
    } else {
        format!("{:.2}", h.to_f64())
    }
}
