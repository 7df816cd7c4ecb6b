//! Weekly capacity calendar. Week 1 starts on `start_date`; week `w` covers
//! `[start + 7(w-1), start + 7w)`.

use std::collections::BTreeSet;
use std::ops::RangeInclusive;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::hours::Hours;

/// 1-based week index on the scheduling canvas.
pub type Week = u32;

fn default_hours_per_fte_week() -> Hours {
    Hours::new(40)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Calendar {
    pub start_date: NaiveDate,
    pub horizon_weeks: u32,
    pub fte_count: Hours,
    #[serde(default = "default_hours_per_fte_week")]
    pub hours_per_fte_week: Hours,
    /// Weeks with no capacity at all (holidays, training, vacations).
    #[serde(default)]
    pub blackouts: BTreeSet<Week>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum CalendarError {
    #[error("week {week} is outside the {horizon}-week horizon")]
    WeekOutOfHorizon { week: i64, horizon: u32 },
    #[error("horizon must be at least one week")]
    EmptyHorizon,
    #[error("team size and hours per FTE week must be positive")]
    NoCapacity,
}

impl Calendar {
    pub fn new(start_date: NaiveDate, horizon_weeks: u32, fte_count: impl Into<Hours>) -> Self {
        Calendar {
            start_date,
            horizon_weeks,
            fte_count: fte_count.into(),
            hours_per_fte_week: default_hours_per_fte_week(),
            blackouts: BTreeSet::new(),
        }
    }

    pub fn with_blackouts(mut self, weeks: impl IntoIterator<Item = Week>) -> Self {
        self.blackouts.extend(weeks);
        self
    }

    pub fn weeks(&self) -> RangeInclusive<Week> {
        1..=self.horizon_weeks
    }

    pub fn contains(&self, week: Week) -> bool {
        (1..=self.horizon_weeks).contains(&week)
    }

    pub fn is_blackout(&self, week: Week) -> bool {
        self.blackouts.contains(&week)
    }

    /// Capacity of a full working week: FTEs times hours per FTE week.
    pub fn weekly_capacity(&self) -> Hours {
        self.fte_count * self.hours_per_fte_week
    }

    pub fn capacity(&self, week: Week) -> Result<Hours, CalendarError> {
        if !self.contains(week) {
            return Err(CalendarError::WeekOutOfHorizon { week: week as i64, horizon: self.horizon_weeks });
        }
        Ok(self.capacity_unchecked(week))
    }

    pub(crate) fn capacity_unchecked(&self, week: Week) -> Hours {
        if self.is_blackout(week) || !self.contains(week) {
            Hours::ZERO
        } else {
            self.weekly_capacity()
        }
    }

    /// Week index containing `date`; may fall outside the horizon (zero or negative
    /// before the start).
    pub fn week_of(&self, date: NaiveDate) -> i64 {
        let days = (date - self.start_date).num_days();
        days.div_euclid(7) + 1
    }

    pub fn week_start(&self, week: Week) -> NaiveDate {
        self.start_date + Days::new(7 * (week as u64).saturating_sub(1))
    }

    /// Last day of `week`.
    pub fn week_end(&self, week: Week) -> NaiveDate {
        self.start_date + Days::new(7 * week as u64) - Days::new(1)
    }

    /// Non-blackout weeks in `1..=last`, clipped to the horizon.
    pub fn working_weeks_through(&self, last: Week) -> impl Iterator<Item = Week> + '_ {
        (1..=last.min(self.horizon_weeks)).filter(move |w| !self.is_blackout(*w))
    }

    pub fn validate(&self) -> Vec<CalendarError> {
        let mut out = Vec::new();
        if self.horizon_weeks == 0 {
            out.push(CalendarError::EmptyHorizon);
        }
        if !self.fte_count.is_positive() || !self.hours_per_fte_week.is_positive() {
            out.push(CalendarError::NoCapacity);
        }
        out
    }
}
