//! Tick-data loading and previous-tick sampling onto a regular grid.
//!
//! Tick files are CSV with header `timestamp,price[,condition]`; timestamps
//! are ISO-8601 or epoch seconds, auto-detected once per file. Sampling
//! uses the last trade at or before each grid time, one session per
//! calendar day, producing a day-segmented [`SampledPath`].

use std::collections::BTreeSet;
use std::io::BufRead;
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime, NaiveTime, Timelike};

use crate::error::{Error, Result};
use crate::path::SampledPath;

/// One trade record.
#[derive(Debug, Clone, PartialEq)]
pub struct Tick {
    /// Seconds since the Unix epoch, with sub-second precision.
    pub timestamp: f64,
    pub price: f64,
    pub condition: Option<String>,
}

/// A parsed tick file.
#[derive(Debug, Clone, PartialEq)]
pub struct TickSeries {
    pub ticks: Vec<Tick>,
    /// Rows dropped by the condition allowlist.
    pub dropped_by_condition: usize,
}

/// Options controlling tick parsing.
#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Keep only rows whose condition code is in this set (empty string
    /// matches rows with no condition column).
    pub condition_allowlist: Option<BTreeSet<String>>,
    /// Sort by timestamp instead of rejecting non-monotone files.
    pub sort: bool,
}

/// Trading-session description used by the sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionSpec {
    pub open: NaiveTime,
    pub close: NaiveTime,
    /// Trading dates to sample; empty means every date present in the data.
    pub calendar: Vec<NaiveDate>,
}

impl SessionSpec {
    pub fn new(open: NaiveTime, close: NaiveTime, calendar: Vec<NaiveDate>) -> Result<Self> {
        if open >= close {
            return Err(Error::Config(format!(
                "session open {open} must precede close {close}"
            )));
        }
        Ok(SessionSpec {
            open,
            close,
            calendar,
        })
    }

    /// Regular NYSE-style session, 09:30–16:00.
    pub fn regular(calendar: Vec<NaiveDate>) -> Self {
        SessionSpec {
            open: NaiveTime::from_hms_opt(9, 30, 0).unwrap(),
            close: NaiveTime::from_hms_opt(16, 0, 0).unwrap(),
            calendar,
        }
    }
}

fn parse_timestamp_iso(s: &str) -> Option<f64> {
    let s = s.trim().trim_end_matches('Z');
    let fmts = ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"];
    for f in fmts {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, f) {
            return Some(dt.and_utc().timestamp() as f64 + dt.nanosecond() as f64 * 1e-9);
        }
    }
    None
}

/// Parse a tick CSV from a reader. The header row is required; timestamps
/// are auto-detected as epoch seconds or ISO-8601 from the first data row.
pub fn load_ticks_from(reader: impl BufRead, options: &LoadOptions) -> Result<TickSeries> {
    let mut ticks = Vec::new();
    let mut dropped = 0usize;
    let mut mode: Option<bool> = None; // Some(true) = epoch seconds
    let mut last_ts = f64::NEG_INFINITY;
    let mut monotone = true;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if idx == 0 {
            let h = line.trim().to_ascii_lowercase();
            if !h.starts_with("timestamp,price") {
                return Err(Error::Data(format!(
                    "line {lineno}: expected header 'timestamp,price[,condition]', got '{line}'"
                )));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.splitn(3, ',');
        let ts_raw = fields.next().unwrap_or("").trim();
        let price_raw = fields
            .next()
            .ok_or_else(|| Error::Data(format!("line {lineno}: missing price field")))?
            .trim();
        let condition = fields.next().map(|c| c.trim().to_string());

        let epoch_mode = *mode.get_or_insert_with(|| ts_raw.parse::<f64>().is_ok());
        let timestamp = if epoch_mode {
            ts_raw.parse::<f64>().map_err(|_| {
                Error::Data(format!("line {lineno}: bad epoch timestamp '{ts_raw}'"))
            })?
        } else {
            parse_timestamp_iso(ts_raw).ok_or_else(|| {
                Error::Data(format!("line {lineno}: bad ISO-8601 timestamp '{ts_raw}'"))
            })?
        };
        let price: f64 = price_raw
            .parse()
            .map_err(|_| Error::Data(format!("line {lineno}: bad price '{price_raw}'")))?;
        if !(price > 0.0) || !price.is_finite() {
            return Err(Error::Data(format!(
                "line {lineno}: price must be positive, got {price}"
            )));
        }
        if let Some(allow) = &options.condition_allowlist {
            let code = condition.as_deref().unwrap_or("");
            if !allow.contains(code) {
                dropped += 1;
                continue;
            }
        }
        if timestamp < last_ts {
            monotone = false;
        }
        last_ts = timestamp;
        ticks.push(Tick {
            timestamp,
            price,
            condition,
        });
    }
    if !monotone {
        if options.sort {
            ticks.sort_by(|a, b| a.timestamp.partial_cmp(&b.timestamp).unwrap());
        } else {
            return Err(Error::Data(
                "timestamps are not nondecreasing (pass --sort to reorder)".to_string(),
            ));
        }
    }
    Ok(TickSeries {
        ticks,
        dropped_by_condition: dropped,
    })
}

/// Parse a tick CSV file.
pub fn load_ticks(path: &Path, options: &LoadOptions) -> Result<TickSeries> {
    let file = std::fs::File::open(path)?;
    load_ticks_from(std::io::BufReader::new(file), options)
}

/// What happened while sampling each session day.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize)]
pub struct SamplingReport {
    /// Days with no usable tick at all, skipped.
    pub skipped_days: Vec<String>,
    /// Days whose opening grid points were back-filled from the first
    /// in-session tick.
    pub backfilled_days: Vec<String>,
    pub n_days: usize,
    pub n_observations: usize,
}

fn date_of(ts: f64) -> NaiveDate {
    chrono::DateTime::from_timestamp(ts.floor() as i64, 0)
        .unwrap()
        .date_naive()
}

fn epoch_of(date: NaiveDate, time: NaiveTime) -> f64 {
    date.and_time(time).and_utc().timestamp() as f64
        + f64::from(time.nanosecond()) * 1e-9
}

/// Sample a tick series onto the regular grid `open, open+Δ, …, close`
/// for each calendar day, carrying the last trade price forward.
///
/// Grid values are log prices. Days without ticks are skipped and
/// reported; when the first tick falls after the open, earlier grid points
/// are back-filled from it and the day is flagged.
pub fn previous_tick_sample(
    ticks: &TickSeries,
    step_seconds: f64,
    session: &SessionSpec,
) -> Result<(SampledPath, SamplingReport)> {
    if !(step_seconds > 0.0) {
        return Err(Error::Config("step must be positive".to_string()));
    }
    let dates: Vec<NaiveDate> = if session.calendar.is_empty() {
        let mut ds: Vec<NaiveDate> = ticks.ticks.iter().map(|t| date_of(t.timestamp)).collect();
        ds.dedup();
        ds.sort();
        ds.dedup();
        ds
    } else {
        session.calendar.clone()
    };
    if dates.is_empty() {
        return Err(Error::Data("no session days to sample".to_string()));
    }
    let mut observations = Vec::new();
    let mut day_offsets = Vec::new();
    let mut report = SamplingReport::default();
    let mut cursor = 0usize; // ticks are time-ordered; never rewound
    for date in dates {
        let open_ts = epoch_of(date, session.open);
        let close_ts = epoch_of(date, session.close);
        let n_steps = ((close_ts - open_ts) / step_seconds).floor() as usize;
        // last tick strictly before the open carries into the session
        while cursor < ticks.ticks.len() && ticks.ticks[cursor].timestamp < open_ts {
            cursor += 1;
        }
        let mut last_price = cursor.checked_sub(1).map(|i| ticks.ticks[i].price);
        // a day with no tick inside [open, close] is skipped, not sampled flat
        let first_in_session = ticks.ticks[cursor..]
            .iter()
            .take_while(|t| t.timestamp <= close_ts)
            .map(|t| (t.timestamp, t.price))
            .next();
        let Some((first_ts, first_price)) = first_in_session else {
            report.skipped_days.push(date.to_string());
            continue;
        };
        let mut backfilled = false;
        if last_price.is_none() {
            // no tick at or before the open: back-fill from the first trade
            last_price = Some(first_price);
            backfilled = first_ts > open_ts;
        }
        let day_start = observations.len();
        let mut scan = cursor;
        for j in 0..=n_steps {
            let t_grid = open_ts + j as f64 * step_seconds;
            while scan < ticks.ticks.len() && ticks.ticks[scan].timestamp <= t_grid {
                last_price = Some(ticks.ticks[scan].price);
                scan += 1;
            }
            observations.push(last_price.unwrap().ln());
        }
        cursor = scan;
        day_offsets.push(day_start);
        if backfilled {
            report.backfilled_days.push(date.to_string());
        }
    }
    if day_offsets.is_empty() {
        return Err(Error::Data("every session day was empty".to_string()));
    }
    report.n_days = day_offsets.len();
    report.n_observations = observations.len();
    let path = SampledPath::new(step_seconds, observations, day_offsets)?;
    Ok((path, report))
}

// ---------------------------------------------------------------------------
// Path CSV format: grid_index,log_price,day_id
// ---------------------------------------------------------------------------

/// Serialize a path in the `grid_index,log_price,day_id` format.
pub fn write_path_csv(path: &SampledPath, out: &Path) -> Result<()> {
    let mut s = String::from("grid_index,log_price,day_id\n");
    for d in 0..path.n_days() {
        let (lo, hi) = path.day_range(d);
        for i in lo..hi {
            s.push_str(&format!("{},{},{}\n", i, path.observations()[i], d));
        }
    }
    std::fs::write(out, s)?;
    Ok(())
}

/// Read a path from the `grid_index,log_price,day_id` format. The grid step
/// is not part of the format and must be supplied.
pub fn read_path_csv(file: &Path, step_seconds: f64) -> Result<SampledPath> {
    let content = std::fs::read_to_string(file)?;
    let mut observations = Vec::new();
    let mut day_offsets = Vec::new();
    let mut last_day: Option<u64> = None;
    for (idx, line) in content.lines().enumerate() {
        let lineno = idx + 1;
        if idx == 0 {
            if !line.trim().eq_ignore_ascii_case("grid_index,log_price,day_id") {
                return Err(Error::Data(format!(
                    "line {lineno}: expected header 'grid_index,log_price,day_id'"
                )));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::Data(format!("line {lineno}: expected 3 fields")));
        }
        let log_price: f64 = parts[1]
            .trim()
            .parse()
            .map_err(|_| Error::Data(format!("line {lineno}: bad log_price")))?;
        let day: u64 = parts[2]
            .trim()
            .parse()
            .map_err(|_| Error::Data(format!("line {lineno}: bad day_id")))?;
        if last_day != Some(day) {
            if let Some(prev) = last_day {
                if day != prev + 1 {
                    return Err(Error::Data(format!(
                        "line {lineno}: day_id jumps from {prev} to {day}"
                    )));
                }
            }
            day_offsets.push(observations.len());
            last_day = Some(day);
        }
        observations.push(log_price);
    }
    SampledPath::new(step_seconds, observations, day_offsets)
}

/// Export a path as a synthetic tick file: day `d` maps to `start_date + d`
/// with one trade per grid point at the session times.
pub fn write_ticks_csv(
    path: &SampledPath,
    out: &Path,
    start_date: NaiveDate,
    session: &SessionSpec,
) -> Result<()> {
    let mut s = String::from("timestamp,price\n");
    for d in 0..path.n_days() {
        let date = start_date + chrono::Days::new(d as u64);
        let open_ts = epoch_of(date, session.open);
        let (lo, hi) = path.day_range(d);
        for (j, i) in (lo..hi).enumerate() {
            let ts = open_ts + j as f64 * path.step_seconds();
            let price = path.observations()[i].exp();
            s.push_str(&format!("{ts},{price}\n"));
        }
    }
    std::fs::write(out, s)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn opts() -> LoadOptions {
        LoadOptions::default()
    }

    #[test]
    fn loads_well_formed_file() {
        let csv = "timestamp,price\n100.0,10.0\n101.5,10.5\n103.0,10.4\n";
        let ts = load_ticks_from(Cursor::new(csv), &opts()).unwrap();
        assert_eq!(ts.ticks.len(), 3);
        assert_eq!(ts.ticks[1].timestamp, 101.5);
        assert_eq!(ts.dropped_by_condition, 0);
    }

    #[test]
    fn rejects_bad_price_with_line_number() {
        let csv = "timestamp,price\n100.0,10.0\n101.0,-3.0\n";
        match load_ticks_from(Cursor::new(csv), &opts()) {
            Err(Error::Data(msg)) => assert!(msg.contains("line 3"), "msg: {msg}"),
            other => panic!("expected data error, got {other:?}"),
        }
        let csv = "timestamp,price\n100.0,abc\n";
        match load_ticks_from(Cursor::new(csv), &opts()) {
            Err(Error::Data(msg)) => assert!(msg.contains("line 2"), "msg: {msg}"),
            other => panic!("expected data error, got {other:?}"),
        }
    }

    #[test]
    fn allowlist_drops_and_counts() {
        let csv = "timestamp,price,condition\n1,10,@\n2,11,Z\n3,12,\n4,13,@\n";
        let options = LoadOptions {
            condition_allowlist: Some(
                ["@".to_string(), String::new()].into_iter().collect(),
            ),
            sort: false,
        };
        let ts = load_ticks_from(Cursor::new(csv), &options).unwrap();
        assert_eq!(ts.ticks.len(), 3);
        assert_eq!(ts.dropped_by_condition, 1);
    }

    #[test]
    fn non_monotone_needs_sort_flag() {
        let csv = "timestamp,price\n2,10\n1,11\n";
        assert!(matches!(
            load_ticks_from(Cursor::new(csv), &opts()),
            Err(Error::Data(_))
        ));
        let options = LoadOptions {
            sort: true,
            ..Default::default()
        };
        let ts = load_ticks_from(Cursor::new(csv), &options).unwrap();
        assert_eq!(ts.ticks[0].price, 11.0);
    }

    #[test]
    fn iso_timestamps_are_detected() {
        let csv = "timestamp,price\n2006-03-01T09:30:00,10\n2006-03-01T09:30:05.5,11\n";
        let ts = load_ticks_from(Cursor::new(csv), &opts()).unwrap();
        assert_eq!(ts.ticks.len(), 2);
        assert!((ts.ticks[1].timestamp - ts.ticks[0].timestamp - 5.5).abs() < 1e-9);
    }

    fn session_at_zero() -> SessionSpec {
        // epoch date 1970-01-01, session 00:00:00 to 00:00:30
        SessionSpec::new(
            NaiveTime::from_hms_opt(0, 0, 0).unwrap(),
            NaiveTime::from_hms_opt(0, 0, 30).unwrap(),
            vec![NaiveDate::from_ymd_opt(1970, 1, 1).unwrap()],
        )
        .unwrap()
    }

    #[test]
    fn previous_tick_rule_carries_last_price() {
        // ticks at t=0 (100) and t=7 (101); 5s grid: 100, 100, 101, ...
        let ticks = TickSeries {
            ticks: vec![
                Tick { timestamp: 0.0, price: 100.0, condition: None },
                Tick { timestamp: 7.0, price: 101.0, condition: None },
            ],
            dropped_by_condition: 0,
        };
        let (path, report) = previous_tick_sample(&ticks, 5.0, &session_at_zero()).unwrap();
        let obs = path.observations();
        assert_eq!(obs.len(), 7); // grid 0,5,...,30
        assert_eq!(obs[0], 100.0f64.ln());
        assert_eq!(obs[1], 100.0f64.ln());
        assert_eq!(obs[2], 101.0f64.ln());
        assert_eq!(obs[6], 101.0f64.ln());
        assert!(report.backfilled_days.is_empty());
    }

    #[test]
    fn backfill_flagged_when_no_tick_before_open() {
        let ticks = TickSeries {
            ticks: vec![Tick { timestamp: 12.0, price: 50.0, condition: None }],
            dropped_by_condition: 0,
        };
        let (path, report) = previous_tick_sample(&ticks, 5.0, &session_at_zero()).unwrap();
        assert_eq!(path.observations()[0], 50.0f64.ln());
        assert_eq!(report.backfilled_days.len(), 1);
    }

    #[test]
    fn empty_days_are_skipped_and_reported() {
        let mut session = session_at_zero();
        session.calendar.push(NaiveDate::from_ymd_opt(1970, 1, 2).unwrap());
        let ticks = TickSeries {
            ticks: vec![Tick { timestamp: 1.0, price: 10.0, condition: None }],
            dropped_by_condition: 0,
        };
        let (path, report) = previous_tick_sample(&ticks, 5.0, &session).unwrap();
        assert_eq!(path.n_days(), 1);
        assert_eq!(report.skipped_days, vec!["1970-01-02".to_string()]);
    }

    #[test]
    fn thirty_minute_grid_on_a_regular_session() {
        // 6.5 h session at 30-minute steps: 13 increments per day
        let date = NaiveDate::from_ymd_opt(2006, 3, 1).unwrap();
        let session = SessionSpec::regular(vec![date]);
        let open = epoch_of(date, session.open);
        let ticks = TickSeries {
            ticks: vec![Tick { timestamp: open, price: 20.0, condition: None }],
            dropped_by_condition: 0,
        };
        let (path, _) = previous_tick_sample(&ticks, 1800.0, &session).unwrap();
        assert_eq!(path.day_increment_count(0), 13);
    }

    #[test]
    fn path_csv_round_trip_is_exact() {
        let obs = vec![0.0, 0.1, -0.2, 0.3, 0.25, 0.5];
        let path = SampledPath::new(5.0, obs, vec![0, 3]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("p.csv");
        write_path_csv(&path, &f).unwrap();
        let back = read_path_csv(&f, 5.0).unwrap();
        assert_eq!(back.observations(), path.observations());
        assert_eq!(back.day_offsets(), path.day_offsets());
    }
}
