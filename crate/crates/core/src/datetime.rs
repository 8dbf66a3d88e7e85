//! The `DateTime` helper class shipped with every registry.
//!
//! Weekdays are numbered Monday = 1 through Sunday = 7 and weeks start on
//! Monday. Offsets apply the largest unit first; month and year offsets clamp
//! the day to the length of the target month. Times are naive (no zone).

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use chrono::{Datelike, Months, NaiveDate, NaiveDateTime, TimeDelta, Timelike};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::registry::{
    ClassDescriptor, ClassKind, FunctionDescriptor, HostError, PropertyDescriptor,
};
use crate::types::TypeRef;
use crate::value::Value;

pub const CLASS: &str = "DateTime";
const ISO_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DateTime(NaiveDateTime);

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum DateTimeError {
    #[error("invalid {field}: {detail}")]
    InvalidField { field: &'static str, detail: String },
    #[error("date arithmetic left the supported range")]
    OutOfRange,
    #[error("malformed ISO-8601 date-time `{0}`")]
    Malformed(String),
}

/// Signed amounts for [`DateTime::offset`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Offset {
    pub years: i64,
    pub months: i64,
    pub weeks: i64,
    pub days: i64,
    pub hours: i64,
    pub minutes: i64,
    pub seconds: i64,
}

/// Fields for [`DateTime::set`]; `None` leaves a field unchanged.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FieldSet {
    pub year: Option<i64>,
    pub month: Option<i64>,
    pub day: Option<i64>,
    pub hour: Option<i64>,
    pub minute: Option<i64>,
    pub second: Option<i64>,
    pub week_of_the_day: Option<i64>,
}

impl DateTime {
    pub fn new(
        year: i32,
        month: u32,
        day: u32,
        hour: u32,
        minute: u32,
        second: u32,
    ) -> Result<Self, DateTimeError> {
        let date = NaiveDate::from_ymd_opt(year, month, day).ok_or_else(|| {
            DateTimeError::InvalidField {
                field: "day",
                detail: format!("{year:04}-{month:02}-{day:02} is not a calendar date"),
            }
        })?;
        let dt = date.and_hms_opt(hour, minute, second).ok_or_else(|| {
            DateTimeError::InvalidField {
                field: "time",
                detail: format!("{hour:02}:{minute:02}:{second:02} is not a valid time"),
            }
        })?;
        Ok(DateTime(dt))
    }

    pub fn from_naive(dt: NaiveDateTime) -> Self {
        DateTime(dt.with_nanosecond(0).unwrap_or(dt))
    }

    pub fn naive(&self) -> NaiveDateTime {
        self.0
    }

    pub fn year(&self) -> i32 {
        self.0.year()
    }
    pub fn month(&self) -> u32 {
        self.0.month()
    }
    pub fn day(&self) -> u32 {
        self.0.day()
    }
    pub fn hour(&self) -> u32 {
        self.0.hour()
    }
    pub fn minute(&self) -> u32 {
        self.0.minute()
    }
    pub fn second(&self) -> u32 {
        self.0.second()
    }

    /// 1 = Monday … 7 = Sunday.
    pub fn week_of_the_day(&self) -> u32 {
        self.0.weekday().number_from_monday()
    }

    pub fn offset(&self, by: Offset) -> Result<DateTime, DateTimeError> {
        let mut dt = self.0;
        dt = add_months(dt, by.years.checked_mul(12).ok_or(DateTimeError::OutOfRange)?)?;
        dt = add_months(dt, by.months)?;
        let deltas = [
            TimeDelta::try_weeks(by.weeks),
            TimeDelta::try_days(by.days),
            TimeDelta::try_hours(by.hours),
            TimeDelta::try_minutes(by.minutes),
            TimeDelta::try_seconds(by.seconds),
        ];
        for delta in deltas {
            let delta = delta.ok_or(DateTimeError::OutOfRange)?;
            dt = dt
                .checked_add_signed(delta)
                .ok_or(DateTimeError::OutOfRange)?;
        }
        Ok(DateTime(dt))
    }

    /// Calendar fields are set together and then validated; no clamping.
    /// `week_of_the_day` moves within the Monday-started week, last. It
    /// cannot be combined with a date field: the shift may leave the month
    /// or year just set, and a second application would land elsewhere.
    pub fn set(&self, fields: FieldSet) -> Result<DateTime, DateTimeError> {
        if fields.week_of_the_day.is_some()
            && (fields.year.is_some() || fields.month.is_some() || fields.day.is_some())
        {
            return Err(DateTimeError::InvalidField {
                field: "weekOfTheDay",
                detail: "cannot be combined with year, month or day".into(),
            });
        }
        let year = pick(fields.year, self.year() as i64, "year", i32::MIN as i64, i32::MAX as i64)?;
        let month = pick(fields.month, self.month() as i64, "month", 1, 12)?;
        let day = pick(fields.day, self.day() as i64, "day", 1, 31)?;
        let hour = pick(fields.hour, self.hour() as i64, "hour", 0, 23)?;
        let minute = pick(fields.minute, self.minute() as i64, "minute", 0, 59)?;
        let second = pick(fields.second, self.second() as i64, "second", 0, 59)?;
        let base = DateTime::new(
            year as i32,
            month as u32,
            day as u32,
            hour as u32,
            minute as u32,
            second as u32,
        )?;
        match fields.week_of_the_day {
            None => Ok(base),
            Some(w) if (1..=7).contains(&w) => {
                let shift = w - base.week_of_the_day() as i64;
                base.offset(Offset {
                    days: shift,
                    ..Offset::default()
                })
            }
            Some(w) => Err(DateTimeError::InvalidField {
                field: "weekOfTheDay",
                detail: format!("{w} is outside 1..=7"),
            }),
        }
    }

    pub fn to_iso(&self) -> String {
        self.0.format(ISO_FORMAT).to_string()
    }
}

fn add_months(dt: NaiveDateTime, months: i64) -> Result<NaiveDateTime, DateTimeError> {
    let magnitude = u32::try_from(months.unsigned_abs()).map_err(|_| DateTimeError::OutOfRange)?;
    let result = if months >= 0 {
        dt.checked_add_months(Months::new(magnitude))
    } else {
        dt.checked_sub_months(Months::new(magnitude))
    };
    result.ok_or(DateTimeError::OutOfRange)
}

fn pick(
    new: Option<i64>,
    current: i64,
    field: &'static str,
    lo: i64,
    hi: i64,
) -> Result<i64, DateTimeError> {
    match new {
        None => Ok(current),
        Some(v) if (lo..=hi).contains(&v) => Ok(v),
        Some(v) => Err(DateTimeError::InvalidField {
            field,
            detail: format!("{v} is outside {lo}..={hi}"),
        }),
    }
}

impl fmt::Display for DateTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_iso())
    }
}

impl FromStr for DateTime {
    type Err = DateTimeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NaiveDateTime::parse_from_str(s, ISO_FORMAT)
            .map(DateTime)
            .map_err(|_| DateTimeError::Malformed(s.to_string()))
    }
}

impl Serialize for DateTime {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_iso())
    }
}

impl<'de> Deserialize<'de> for DateTime {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Source of `DateTime.Current`.
pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime;
}

#[derive(Clone, Copy, Debug)]
pub struct FixedClock(pub DateTime);

impl Clock for FixedClock {
    fn now(&self) -> DateTime {
        self.0
    }
}

/// Local wall-clock time, truncated to seconds.
#[derive(Clone, Copy, Debug, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime {
        DateTime::from_naive(chrono::Local::now().naive_local())
    }
}

fn receiver(recv: &Value) -> Result<DateTime, HostError> {
    match recv {
        Value::DateTime(dt) => Ok(*dt),
        other => Err(HostError::new(
            "TypeMismatch",
            format!("expected a DateTime receiver, got {other}"),
        )),
    }
}

fn date_error(err: DateTimeError) -> HostError {
    let code = match err {
        DateTimeError::InvalidField { .. } => "InvalidField",
        DateTimeError::OutOfRange => "OutOfRange",
        DateTimeError::Malformed(_) => "Malformed",
    };
    HostError::new(code, err.to_string())
}

const UNITS: [&str; 7] = ["year", "month", "week", "day", "hour", "minute", "second"];
const SETTABLE: [&str; 7] = [
    "year",
    "month",
    "day",
    "hour",
    "minute",
    "second",
    "weekOfTheDay",
];

/// Descriptor registered under the name `DateTime`.
pub fn class_descriptor() -> ClassDescriptor {
    let mut class = ClassDescriptor::new(CLASS, ClassKind::Helper);

    let field = |name: &'static str, exemplar: &str, get: fn(&DateTime) -> i64| {
        PropertyDescriptor::new(name, TypeRef::Integer)
            .exemplar(exemplar)
            .computed(Arc::new(move |_store, recv| Ok(Value::Int(get(&receiver(recv)?)))))
    };
    class = class
        .property(field("year", "the year", |d| d.year() as i64))
        .property(field("month", "the month (1-12)", |d| d.month() as i64))
        .property(field("day", "the day of the month", |d| d.day() as i64))
        .property(field("hour", "the hour (0-23)", |d| d.hour() as i64))
        .property(field("minute", "the minute", |d| d.minute() as i64))
        .property(field("second", "the second", |d| d.second() as i64))
        .property(field(
            "weekOfTheDay",
            "day of the week, Monday is 1 and Sunday is 7",
            |d| d.week_of_the_day() as i64,
        ));

    let mut current = FunctionDescriptor::static_fn("Current", TypeRef::class(CLASS))
        .exemplar("now")
        .implement(|ctx, _recv, _args| Ok(Value::DateTime(ctx.clock.now())));
    current.aliases.push("now".to_string());
    class = class.function(current);

    let mut offset = FunctionDescriptor::method("offset", TypeRef::class(CLASS))
        .exemplar("one week ago: offset(week: -1)");
    for unit in UNITS {
        offset = offset.param_default(unit, TypeRef::Integer, Value::Int(0));
    }
    offset = offset.implement(|_ctx, recv, args| {
        let by = Offset {
            years: args.int("year")?,
            months: args.int("month")?,
            weeks: args.int("week")?,
            days: args.int("day")?,
            hours: args.int("hour")?,
            minutes: args.int("minute")?,
            seconds: args.int("second")?,
        };
        receiver(recv)?.offset(by).map(Value::DateTime).map_err(date_error)
    });
    class = class.function(offset);

    let mut set = FunctionDescriptor::method("set", TypeRef::class(CLASS))
        .exemplar("on Thursday: set(weekOfTheDay: 4)");
    for name in SETTABLE {
        set = set.param_default(name, TypeRef::Integer, Value::Void);
    }
    set = set.implement(|_ctx, recv, args| {
        let fields = FieldSet {
            year: args.opt_int("year")?,
            month: args.opt_int("month")?,
            day: args.opt_int("day")?,
            hour: args.opt_int("hour")?,
            minute: args.opt_int("minute")?,
            second: args.opt_int("second")?,
            week_of_the_day: args.opt_int("weekOfTheDay")?,
        };
        receiver(recv)?.set(fields).map(Value::DateTime).map_err(date_error)
    });
    class.function(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dt(s: &str) -> DateTime {
        s.parse().unwrap()
    }

    #[test]
    fn last_thursday_from_wednesday() {
        let base = dt("2023-03-15T12:00:00");
        assert_eq!(base.week_of_the_day(), 3);
        let week_ago = base
            .offset(Offset {
                weeks: -1,
                ..Default::default()
            })
            .unwrap();
        assert_eq!(week_ago, dt("2023-03-08T12:00:00"));
        let thursday = week_ago
            .set(FieldSet {
                week_of_the_day: Some(4),
                ..Default::default()
            })
            .unwrap();
        assert_eq!(thursday, dt("2023-03-09T12:00:00"));
    }

    #[test]
    fn month_offset_clamps() {
        let jan31 = dt("2023-01-31T00:00:00");
        let feb = jan31
            .offset(Offset {
                months: 1,
                ..Default::default()
            })
            .unwrap();
        assert_eq!(feb, dt("2023-02-28T00:00:00"));
        let leap = dt("2024-02-29T08:30:00")
            .offset(Offset {
                years: 1,
                ..Default::default()
            })
            .unwrap();
        assert_eq!(leap, dt("2025-02-28T08:30:00"));
    }

    #[test]
    fn zero_offset_is_identity() {
        let base = dt("2023-03-15T12:00:00");
        assert_eq!(base.offset(Offset::default()).unwrap(), base);
    }

    #[test]
    fn set_rejects_invalid_dates() {
        let base = dt("2023-03-15T12:00:00");
        let err = base
            .set(FieldSet {
                month: Some(2),
                day: Some(30),
                ..Default::default()
            })
            .unwrap_err();
        assert!(matches!(err, DateTimeError::InvalidField { .. }));
        assert!(base
            .set(FieldSet {
                week_of_the_day: Some(8),
                ..Default::default()
            })
            .is_err());
        assert!(base
            .set(FieldSet {
                hour: Some(24),
                ..Default::default()
            })
            .is_err());
    }

    #[test]
    fn set_current_weekday_is_identity() {
        let base = dt("2023-03-15T12:00:00");
        let same = base
            .set(FieldSet {
                week_of_the_day: Some(3),
                ..Default::default()
            })
            .unwrap();
        assert_eq!(same, base);
    }

    #[test]
    fn sunday_stays_in_its_week() {
        // 2023-03-19 is a Sunday; Monday of that week is 03-13.
        let sunday = dt("2023-03-19T09:00:00");
        assert_eq!(sunday.week_of_the_day(), 7);
        let monday = sunday
            .set(FieldSet {
                week_of_the_day: Some(1),
                ..Default::default()
            })
            .unwrap();
        assert_eq!(monday, dt("2023-03-13T09:00:00"));
    }

    #[test]
    fn iso_round_trip_and_errors() {
        let base = dt("2023-03-15T12:00:00");
        assert_eq!(base.to_iso().parse::<DateTime>().unwrap(), base);
        assert!("2023-03-15 12:00".parse::<DateTime>().is_err());
        let json = serde_json::to_string(&base).unwrap();
        assert_eq!(json, "\"2023-03-15T12:00:00\"");
    }

    #[test]
    fn fixed_clock_is_stable() {
        let clock = FixedClock(dt("2023-03-15T12:00:00"));
        assert_eq!(clock.now(), clock.now());
    }

    #[test]
    fn system_clock_is_monotone() {
        let clock = SystemClock;
        let a = clock.now();
        let b = clock.now();
        assert!(a <= b);
    }

    #[test]
    fn huge_offsets_error_instead_of_panicking() {
        let base = dt("2023-03-15T12:00:00");
        assert_eq!(
            base.offset(Offset {
                years: i64::MAX,
                ..Default::default()
            }),
            Err(DateTimeError::OutOfRange)
        );
        assert!(base
            .offset(Offset {
                days: i64::MAX,
                ..Default::default()
            })
            .is_err());
    }
}
