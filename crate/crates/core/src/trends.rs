//! Weekly post volume and LOWESS smoothing of tweet tendency and polarity
//! over time.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use chrono::{DateTime, Datelike, Duration, NaiveDate, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attitude::ScoredTweet;
use crate::corpus::RawPost;
use crate::error::{Error, Result};

pub const DEFAULT_BANDWIDTH: f64 = 0.3;
pub const DEFAULT_ROBUST_ITERATIONS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesPoint {
    /// Days since the earliest post.
    pub t: f64,
    pub y: f64,
}

/// Monday of the ISO week containing `date`.
pub fn week_start(date: NaiveDate) -> NaiveDate {
    date - Duration::days(date.weekday().num_days_from_monday() as i64)
}

/// Post counts per ISO week, zero-filled between the first and last week.
pub fn weekly_volume(posts: &[RawPost]) -> Vec<(NaiveDate, usize)> {
    let mut counts: BTreeMap<NaiveDate, usize> = BTreeMap::new();
    for p in posts {
        *counts.entry(week_start(p.timestamp.date_naive())).or_insert(0) += 1;
    }
    let (Some(&first), Some(&last)) = (counts.keys().next(), counts.keys().next_back()) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    let mut week = first;
    while week <= last {
        out.push((week, counts.get(&week).copied().unwrap_or(0)));
        week += Duration::days(7);
    }
    out
}

/// Deterministic sub-second offset (in days) derived from a post id, used
/// to break timestamp ties before smoothing.
pub fn tie_jitter(post_id: &str) -> f64 {
    let digest = Sha256::digest(post_id.as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    let unit = (u64::from_be_bytes(bytes) >> 11) as f64 / (1u64 << 53) as f64;
    unit / 86_400.0
}

fn days_between(origin: &DateTime<Utc>, t: &DateTime<Utc>) -> f64 {
    (*t - *origin).num_milliseconds() as f64 / 86_400_000.0
}

/// Time series of one tweet metric. Points are sorted by jittered time;
/// the returned indices map each point back to its tweet.
pub fn tweet_series<F>(tweets: &[ScoredTweet], metric: F) -> (Vec<TimeSeriesPoint>, Vec<usize>)
where
    F: Fn(&ScoredTweet) -> f64,
{
    let Some(origin) = tweets.iter().map(|t| t.timestamp).min() else {
        return (Vec::new(), Vec::new());
    };
    let mut order: Vec<(f64, usize)> = tweets
        .iter()
        .enumerate()
        .map(|(i, t)| (days_between(&origin, &t.timestamp) + tie_jitter(&t.post_id), i))
        .collect();
    order.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(Ordering::Equal)
            .then_with(|| tweets[a.1].post_id.cmp(&tweets[b.1].post_id))
    });
    let points = order
        .iter()
        .map(|&(t, i)| TimeSeriesPoint { t, y: metric(&tweets[i]) })
        .collect();
    (points, order.into_iter().map(|(_, i)| i).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LowessParams {
    /// Share of points in each local window, in (0, 1].
    pub bandwidth: f64,
    pub robust_iterations: usize,
    /// Points closer than `delta` to the last fitted point are linearly
    /// interpolated instead of fitted. 0 fits every point.
    pub delta: f64,
}

impl Default for LowessParams {
    fn default() -> Self {
        LowessParams {
            bandwidth: DEFAULT_BANDWIDTH,
            robust_iterations: DEFAULT_ROBUST_ITERATIONS,
            delta: 0.0,
        }
    }
}

fn tricube(u: f64) -> f64 {
    if u >= 1.0 {
        0.0
    } else {
        let c = 1.0 - u * u * u;
        c * c * c
    }
}

fn bisquare(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        let c = 1.0 - u * u;
        c * c
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Weighted least-squares line through the window, evaluated at `at`.
fn local_fit(x: &[f64], y: &[f64], weights: &[f64], at: f64) -> Option<f64> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let xm = x.iter().zip(weights).map(|(a, w)| a * w).sum::<f64>() / total;
    let ym = y.iter().zip(weights).map(|(a, w)| a * w).sum::<f64>() / total;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for ((a, b), w) in x.iter().zip(y).zip(weights) {
        sxx += w * (a - xm) * (a - xm);
        sxy += w * (a - xm) * (b - ym);
    }
    let span = x.last().unwrap_or(&0.0) - x.first().unwrap_or(&0.0);
    if sxx > 1e-12 * total * span * span && sxx > 0.0 {
        Some(ym + sxy / sxx * (at - xm))
    } else {
        Some(ym)
    }
}

fn smooth_pass(x: &[f64], y: &[f64], q: usize, delta: f64, robust: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut fitted = vec![0.0; n];
    let mut left = 0usize;
    let mut weights = vec![0.0; q];
    let mut fit_at = |i: usize, left: &mut usize| -> f64 {
        while *left + q < n && x[i] - x[*left] > x[*left + q] - x[i] {
            *left += 1;
        }
        let right = *left + q - 1;
        let h = (x[i] - x[*left]).max(x[right] - x[i]);
        for (k, j) in (*left..=right).enumerate() {
            let d = (x[j] - x[i]).abs();
            let base = if h > 0.0 { tricube(d / h) } else { 1.0 };
            weights[k] = base * robust[j];
        }
        local_fit(&x[*left..=right], &y[*left..=right], &weights, x[i]).unwrap_or(y[i])
    };

    let mut i = 0usize;
    let mut last: Option<usize> = None;
    loop {
        fitted[i] = fit_at(i, &mut left);
        if let Some(l) = last {
            if l + 1 < i {
                let (x0, x1, y0, y1) = (x[l], x[i], fitted[l], fitted[i]);
                for j in l + 1..i {
                    let a = (x[j] - x0) / (x1 - x0);
                    fitted[j] = a * y1 + (1.0 - a) * y0;
                }
            }
        }
        let mut l = i;
        let cut = x[l] + delta;
        let mut next = l + 1;
        while next < n && x[next] <= cut {
            if x[next] == x[l] {
                fitted[next] = fitted[l];
                l = next;
            }
            next += 1;
        }
        last = Some(l);
        if l >= n - 1 {
            break;
        }
        i = (l + 1).max(next.saturating_sub(1));
    }
    fitted
}

/// Locally weighted linear regression (LOWESS), evaluated at each input
/// point. Points must be sorted by `t`.
///
/// Each fit uses the `⌈bandwidth · n⌉` nearest neighbours with tricube
/// distance weights; each robust iteration reweights points by the
/// bisquare of their residual over six median absolute residuals.
pub fn lowess_with(points: &[TimeSeriesPoint], params: LowessParams) -> Result<Vec<TimeSeriesPoint>> {
    let n = points.len();
    if n < 2 {
        return Err(Error::InsufficientData(n));
    }
    if !(params.bandwidth > 0.0 && params.bandwidth <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "bandwidth must be in (0, 1], got {}",
            params.bandwidth
        )));
    }
    if !(params.delta >= 0.0) {
        return Err(Error::InvalidConfig("delta must be non-negative".into()));
    }
    if points.windows(2).any(|w| !(w[0].t <= w[1].t)) {
        return Err(Error::InvalidConfig("points must be sorted by t".into()));
    }
    let x: Vec<f64> = points.iter().map(|p| p.t).collect();
    let y: Vec<f64> = points.iter().map(|p| p.y).collect();
    let q = ((params.bandwidth * n as f64 - 1e-9).ceil() as usize).clamp(2, n);

    let mut robust = vec![1.0; n];
    let mut fitted = smooth_pass(&x, &y, q, params.delta, &robust);
    for _ in 0..params.robust_iterations {
        let mut residuals: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| (a - b).abs()).collect();
        let scale = 6.0 * median(&mut residuals.clone());
        if !(scale > 0.0) {
            break;
        }
        for (w, r) in robust.iter_mut().zip(residuals.iter_mut()) {
            *w = bisquare(*r / scale);
        }
        fitted = smooth_pass(&x, &y, q, params.delta, &robust);
    }
    Ok(x.into_iter()
        .zip(fitted)
        .map(|(t, y)| TimeSeriesPoint { t, y })
        .collect())
}

pub fn lowess(points: &[TimeSeriesPoint], bandwidth: f64, robust_iterations: usize) -> Result<Vec<TimeSeriesPoint>> {
    lowess_with(
        points,
        LowessParams {
            bandwidth,
            robust_iterations,
            delta: 0.0,
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Series {
    Tendency,
    Polarity,
    WeeklyCount,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendRecord {
    pub t_iso: String,
    pub raw_y: f64,
    pub smoothed_y: f64,
    pub series: Series,
}

/// Smoothed tendency and polarity of every tweet, in time order.
pub fn tweet_trends(tweets: &[ScoredTweet], params: LowessParams) -> Result<Vec<TrendRecord>> {
    let mut out = Vec::new();
    for (series, metric) in [
        (Series::Tendency, (|t: &ScoredTweet| t.tendency) as fn(&ScoredTweet) -> f64),
        (Series::Polarity, |t: &ScoredTweet| t.polarity),
    ] {
        let (points, order) = tweet_series(tweets, metric);
        let smoothed = lowess_with(&points, params)?;
        for ((p, s), &i) in points.iter().zip(&smoothed).zip(&order) {
            out.push(TrendRecord {
                t_iso: tweets[i].timestamp.to_rfc3339_opts(SecondsFormat::Secs, true),
                raw_y: p.y,
                smoothed_y: s.y,
                series,
            });
        }
    }
    Ok(out)
}

/// Weekly counts with their LOWESS curve (raw counts repeated when there
/// are fewer than two weeks).
pub fn weekly_trend(posts: &[RawPost], params: LowessParams) -> Result<Vec<TrendRecord>> {
    let weeks = weekly_volume(posts);
    let points: Vec<TimeSeriesPoint> = weeks
        .iter()
        .enumerate()
        .map(|(i, &(_, c))| TimeSeriesPoint {
            t: 7.0 * i as f64,
            y: c as f64,
        })
        .collect();
    let smoothed = if points.len() >= 2 {
        lowess_with(&points, params)?
    } else {
        points.clone()
    };
    Ok(weeks
        .iter()
        .zip(&smoothed)
        .map(|(&(week, c), s)| TrendRecord {
            t_iso: week.format("%Y-%m-%d").to_string(),
            raw_y: c as f64,
            smoothed_y: s.y,
            series: Series::WeeklyCount,
        })
        .collect())
}

pub fn write_trends(writer: impl std::io::Write, records: &[TrendRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    for r in records {
        out.serialize(r)?;
    }
    out.flush().map_err(|e| Error::io("<trend csv>", e))?;
    Ok(())
}

pub fn write_trends_csv(path: &Path, records: &[TrendRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_trends(file, records)
}

pub fn read_trends(reader: impl std::io::Read) -> Result<Vec<TrendRecord>> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn at(y: i32, m: u32, d: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(y, m, d, 12, 0, 0).unwrap()
    }

    fn pts(xs: &[f64], f: impl Fn(f64) -> f64) -> Vec<TimeSeriesPoint> {
        xs.iter().map(|&t| TimeSeriesPoint { t, y: f(t) }).collect()
    }

    #[test]
    fn one_week() {
        // 2017-07-31 is a Monday
        let posts: Vec<_> = (0..7)
            .map(|d| RawPost::original(d.to_string(), "a", at(2017, 7, 31) + Duration::days(d as i64), "x"))
            .collect();
        let weeks = weekly_volume(&posts);
        assert_eq!(weeks, vec![(NaiveDate::from_ymd_opt(2017, 7, 31).unwrap(), 7)]);
    }

    #[test]
    fn zero_fill() {
        let posts = vec![
            RawPost::original("1", "a", at(2017, 1, 2), "x"),
            RawPost::original("2", "a", at(2017, 1, 18), "x"),
        ];
        let weeks = weekly_volume(&posts);
        assert_eq!(weeks.len(), 3);
        assert_eq!(weeks[1], (NaiveDate::from_ymd_opt(2017, 1, 9).unwrap(), 0));
        assert!(weekly_volume(&[]).is_empty());
    }

    #[test]
    fn collinear_is_exact() {
        let xs: Vec<f64> = (0..40).map(|i| (i as f64).powf(1.3) * 0.7).collect();
        let input = pts(&xs, |t| 2.0 * t + 1.0);
        for iters in [0, 2] {
            let out = lowess(&input, 0.3, iters).unwrap();
            for (p, s) in input.iter().zip(&out) {
                assert_eq!(p.t, s.t);
                assert!((s.y - p.y).abs() < 1e-8, "{} vs {}", s.y, p.y);
            }
        }
    }

    #[test]
    fn constant_series() {
        let xs: Vec<f64> = (0..25).map(|i| i as f64).collect();
        let out = lowess(&pts(&xs, |_| 3.5), 0.5, 2).unwrap();
        assert!(out.iter().all(|p| (p.y - 3.5).abs() < 1e-12));
    }

    #[test]
    fn errors() {
        let one = pts(&[0.0], |t| t);
        assert!(matches!(lowess(&one, 0.3, 0), Err(Error::InsufficientData(1))));
        let two = pts(&[0.0, 1.0], |t| t);
        assert!(lowess(&two, 0.0, 0).is_err());
        assert!(lowess(&two, 1.5, 0).is_err());
        let unsorted = pts(&[1.0, 0.0], |t| t);
        assert!(lowess(&unsorted, 0.5, 0).is_err());
    }

    #[test]
    fn delta_interpolation_close_to_full_fit() {
        let xs: Vec<f64> = (0..400).map(|i| i as f64 * 0.05).collect();
        let input = pts(&xs, |t| (t / 3.0).sin());
        let full = lowess(&input, 0.2, 0).unwrap();
        let fast = lowess_with(&input, LowessParams { bandwidth: 0.2, robust_iterations: 0, delta: 0.2 }).unwrap();
        let worst = full.iter().zip(&fast).map(|(a, b)| (a.y - b.y).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-3, "{worst}");
    }

    #[test]
    fn jitter_is_sub_second_and_stable() {
        let a = tie_jitter("post-1");
        assert_eq!(a, tie_jitter("post-1"));
        assert_ne!(a, tie_jitter("post-2"));
        assert!((0.0..1.0 / 86_400.0).contains(&a));
    }

    #[test]
    fn tied_timestamps_get_ordered() {
        let ts = at(2017, 3, 3);
        let tweets: Vec<_> = (0..5).map(|i| ScoredTweet::new(format!("p{i}"), "a", ts, i as f64, 1.0)).collect();
        let (points, order) = tweet_series(&tweets, |t| t.tendency);
        assert_eq!(points.len(), 5);
        assert!(points.windows(2).all(|w| w[0].t < w[1].t));
        let mut seen = order.clone();
        seen.sort();
        assert_eq!(seen, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn trend_csv_round_trip() {
        let tweets: Vec<_> = (0..6)
            .map(|i| ScoredTweet::new(format!("p{i}"), "a", at(2017, 1, 1 + i), 0.1 * i as f64 - 0.2, 0.3))
            .collect();
        let records = tweet_trends(&tweets, LowessParams::default()).unwrap();
        assert_eq!(records.len(), 12);
        let mut first = Vec::new();
        write_trends(&mut first, &records).unwrap();
        let back = read_trends(first.as_slice()).unwrap();
        let mut second = Vec::new();
        write_trends(&mut second, &back).unwrap();
        assert_eq!(first, second);
        assert!(String::from_utf8(first).unwrap().starts_with("t_iso,raw_y,smoothed_y,series\n"));
    }
}
