//! Bucketed aggregation over stored sessions and turns.

use std::collections::BTreeMap;
use std::str::FromStr;

use chrono::{DateTime, Datelike, Duration, DurationRound, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::record::{SessionRecord, TurnRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Sessions,
    Turns,
    OodRate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    Client,
    Application,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Hour,
    Day,
    Week,
}

macro_rules! keyword_from_str {
    ($ty:ty, $($word:literal => $variant:expr),+) => {
        impl FromStr for $ty {
            type Err = MetricError;

            fn from_str(s: &str) -> Result<Self, MetricError> {
                match s {
                    $($word => Ok($variant),)+
                    _ => Err(MetricError::UnknownKeyword(s.to_string())),
                }
            }
        }
    };
}

keyword_from_str!(Metric, "sessions" => Metric::Sessions, "turns" => Metric::Turns, "ood_rate" => Metric::OodRate);
keyword_from_str!(GroupBy, "client" => GroupBy::Client, "application" => GroupBy::Application, "none" => GroupBy::None);
keyword_from_str!(Granularity, "hour" => Granularity::Hour, "day" => Granularity::Day, "week" => Granularity::Week);

#[derive(Debug, Clone, PartialEq)]
pub struct MetricQuery {
    pub metric: Metric,
    pub group_by: GroupBy,
    pub granularity: Granularity,
    /// Inclusive.
    pub from: DateTime<Utc>,
    /// Exclusive.
    pub to: DateTime<Utc>,
    pub user: Option<String>,
    pub application: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricPoint {
    pub bucket_start: DateTime<Utc>,
    pub group: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricSeries {
    pub buckets: Vec<MetricPoint>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("invalid time range: `from` must be before `to`")]
    InvalidRange,
    #[error("unknown keyword `{0}`")]
    UnknownKeyword(String),
}

/// Start of the bucket containing `t`. Weeks start on Monday.
pub fn bucket_start(t: DateTime<Utc>, granularity: Granularity) -> DateTime<Utc> {
    match granularity {
        Granularity::Hour => t.duration_trunc(Duration::hours(1)).unwrap_or(t),
        Granularity::Day => t.duration_trunc(Duration::days(1)).unwrap_or(t),
        Granularity::Week => {
            let monday = t.date_naive() - Duration::days(i64::from(t.weekday().num_days_from_monday()));
            Utc.from_utc_datetime(&monday.and_hms_opt(0, 0, 0).expect("midnight exists"))
        }
    }
}

fn group_key(session: &SessionRecord, group_by: GroupBy) -> String {
    match group_by {
        GroupBy::Client => session.client_tag.clone(),
        GroupBy::Application => session.app_id.clone(),
        GroupBy::None => "all".to_string(),
    }
}

/// Evaluates `q` over the given sessions and their turns. Sessions count by
/// start time, turns by receipt time; both must fall in `[from, to)`.
pub fn query_metrics<'a>(
    sessions: impl IntoIterator<Item = (&'a SessionRecord, &'a [TurnRecord])>,
    q: &MetricQuery,
) -> Result<MetricSeries, MetricError> {
    if q.from >= q.to {
        return Err(MetricError::InvalidRange);
    }
    let in_range = |t: DateTime<Utc>| q.from <= t && t < q.to;
    // (bucket, group) -> (numerator, denominator)
    let mut acc: BTreeMap<(DateTime<Utc>, String), (u64, u64)> = BTreeMap::new();
    for (session, turns) in sessions {
        if q.user.as_ref().is_some_and(|u| *u != session.user_id)
            || q.application.as_ref().is_some_and(|a| *a != session.app_id)
        {
            continue;
        }
        let group = group_key(session, q.group_by);
        match q.metric {
            Metric::Sessions => {
                if in_range(session.started_at) {
                    let key = (bucket_start(session.started_at, q.granularity), group);
                    acc.entry(key).or_default().0 += 1;
                }
            }
            Metric::Turns | Metric::OodRate => {
                for turn in turns.iter().filter(|t| in_range(t.received_at)) {
                    let key = (bucket_start(turn.received_at, q.granularity), group.clone());
                    let entry = acc.entry(key).or_default();
                    entry.1 += 1;
                    if q.metric == Metric::Turns || turn.is_out_of_domain() {
                        entry.0 += 1;
                    }
                }
            }
        }
    }
    let buckets = acc
        .into_iter()
        .map(|((bucket_start, group), (num, den))| MetricPoint {
            bucket_start,
            group,
            value: match q.metric {
                Metric::OodRate => num as f64 / den as f64,
                _ => num as f64,
            },
        })
        .collect();
    Ok(MetricSeries { buckets })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(s: &str) -> DateTime<Utc> {
        s.parse().unwrap()
    }

    #[test]
    fn week_buckets_start_on_monday() {
        // 2024-05-16 is a Thursday.
        assert_eq!(bucket_start(at("2024-05-16T13:45:00Z"), Granularity::Week), at("2024-05-13T00:00:00Z"));
        assert_eq!(bucket_start(at("2024-05-13T00:00:00Z"), Granularity::Week), at("2024-05-13T00:00:00Z"));
        assert_eq!(bucket_start(at("2024-05-19T23:59:59Z"), Granularity::Week), at("2024-05-13T00:00:00Z"));
        assert_eq!(bucket_start(at("2024-05-16T13:45:10Z"), Granularity::Hour), at("2024-05-16T13:00:00Z"));
        assert_eq!(bucket_start(at("2024-05-16T13:45:10Z"), Granularity::Day), at("2024-05-16T00:00:00Z"));
    }

    #[test]
    fn empty_input_gives_empty_series() {
        let q = MetricQuery {
            metric: Metric::Sessions,
            group_by: GroupBy::Client,
            granularity: Granularity::Day,
            from: at("2024-01-01T00:00:00Z"),
            to: at("2025-01-01T00:00:00Z"),
            user: None,
            application: None,
        };
        assert_eq!(query_metrics([], &q).unwrap(), MetricSeries::default());
        let bad = MetricQuery { to: q.from, ..q };
        assert_eq!(query_metrics([], &bad), Err(MetricError::InvalidRange));
    }

    #[test]
    fn keywords_parse() {
        assert_eq!("ood_rate".parse::<Metric>(), Ok(Metric::OodRate));
        assert_eq!("week".parse::<Granularity>(), Ok(Granularity::Week));
        assert!("month".parse::<Granularity>().is_err());
    }
}
