//! Natural indicators, outlier cleaning, monthly baselines, rating-curve
//! fitting and indicator forecasting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hydronet::{FlowFit, LakeId, PerLake};
use crate::series::{mean, population_std, MonthlySeries, YearMonth};

/// Per-lake monthly natural indicator (m3 over the month), all lakes aligned.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndicatorSeries {
    pub start: YearMonth,
    pub lakes: PerLake<Vec<f64>>,
}

impl IndicatorSeries {
    pub fn new(start: YearMonth, lakes: PerLake<Vec<f64>>) -> Result<Self> {
        let s = Self { start, lakes };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.lakes[LakeId::Superior].len();
        for (lake, v) in self.lakes.iter() {
            if v.len() != n {
                return Err(Error::Precondition(format!(
                    "indicator series for lake {lake} has {} months, expected {n}",
                    v.len()
                )));
            }
            if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
                return Err(Error::Domain(format!("indicator for lake {lake} is {bad}")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.lakes[LakeId::Superior].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn end(&self) -> YearMonth {
        self.start.add_months(self.len() as i64 - 1)
    }

    /// All lakes' values for month index `t`.
    pub fn month(&self, t: usize) -> PerLake<f64> {
        PerLake::from_fn(|l| self.lakes[l][t])
    }

    pub fn lake(&self, lake: LakeId) -> MonthlySeries {
        MonthlySeries::new(self.start, self.lakes[lake].clone())
    }

    pub fn push(&mut self, values: PerLake<f64>) {
        for lake in LakeId::ALL {
            self.lakes[lake].push(values[lake]);
        }
    }

    /// Months `[from, from + len)` by index.
    pub fn slice(&self, from: usize, len: usize) -> Result<Self> {
        if from + len > self.len() {
            return Err(Error::Precondition(format!(
                "indicator series has {} months, asked for {}..{}",
                self.len(),
                from,
                from + len
            )));
        }
        Ok(Self {
            start: self.start.add_months(from as i64),
            lakes: self.lakes.map(|_, v| v[from..from + len].to_vec()),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutlierRule {
    /// Beyond mean +/- 3 standard deviations of the calendar-month group.
    ThreeSigma,
    /// Beyond [Q1 - 1.5 IQR, Q3 + 1.5 IQR] of the calendar-month group.
    Iqr,
}

/// A monthly series with gaps where samples were removed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CleanedSeries {
    pub start: YearMonth,
    pub values: Vec<Option<f64>>,
}

impl From<&MonthlySeries> for CleanedSeries {
    fn from(s: &MonthlySeries) -> Self {
        Self {
            start: s.start,
            values: s.values.iter().copied().map(Some).collect(),
        }
    }
}

impl CleanedSeries {
    fn calendar_month(&self, i: usize) -> usize {
        (self.start.month0() + i) % 12
    }

    /// Retained samples grouped by zero-based calendar month.
    pub fn by_calendar_month(&self) -> [Vec<f64>; 12] {
        let mut groups: [Vec<f64>; 12] = Default::default();
        for (i, v) in self.values.iter().enumerate() {
            if let Some(v) = v {
                groups[self.calendar_month(i)].push(*v);
            }
        }
        groups
    }

    pub fn retained(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().flatten().copied()
    }

    /// Apply the cleaning rule again to the retained samples.
    pub fn remove_outliers(&self, rule: OutlierRule) -> Result<(CleanedSeries, CleaningReport)> {
        clean(self, rule)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub rule: OutlierRule,
    /// Indices (into the input) of removed samples.
    pub removed: Vec<usize>,
    /// Mean of retained samples per calendar month (January first).
    pub retained_means: [Option<f64>; 12],
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Single-pass removal of samples that are outliers within their calendar-month group.
pub fn remove_outliers(series: &MonthlySeries, rule: OutlierRule) -> Result<(CleanedSeries, CleaningReport)> {
    clean(&CleanedSeries::from(series), rule)
}

fn clean(series: &CleanedSeries, rule: OutlierRule) -> Result<(CleanedSeries, CleaningReport)> {
    if series.values.len() < 24 {
        return Err(Error::Precondition(format!(
            "outlier removal needs at least 24 months, got {}",
            series.values.len()
        )));
    }
    let groups = series.by_calendar_month();
    let fences: Vec<(f64, f64)> = groups
        .iter()
        .map(|g| {
            if g.len() < 2 {
                return (f64::NEG_INFINITY, f64::INFINITY);
            }
            match rule {
                OutlierRule::ThreeSigma => {
                    let m = mean(g);
                    let s = population_std(g);
                    (m - 3.0 * s, m + 3.0 * s)
                }
                OutlierRule::Iqr => {
                    let mut sorted = g.clone();
                    sorted.sort_by(f64::total_cmp);
                    let q1 = quantile(&sorted, 0.25);
                    let q3 = quantile(&sorted, 0.75);
                    let iqr = q3 - q1;
                    (q1 - 1.5 * iqr, q3 + 1.5 * iqr)
                }
            }
        })
        .collect();

    let mut removed = Vec::new();
    let mut values = series.values.clone();
    for (i, v) in values.iter_mut().enumerate() {
        if let Some(x) = *v {
            let (lo, hi) = fences[series.calendar_month(i)];
            if x < lo || x > hi {
                removed.push(i);
                *v = None;
            }
        }
    }
    let cleaned = CleanedSeries {
        start: series.start,
        values,
    };
    let retained_means = cleaned
        .by_calendar_month()
        .map(|g| if g.is_empty() { None } else { Some(mean(&g)) });
    Ok((
        cleaned,
        CleaningReport {
            rule,
            removed,
            retained_means,
        },
    ))
}

const MONTH_NAMES: [&str; 12] = [
    "January", "February", "March", "April", "May", "June", "July", "August", "September",
    "October", "November", "December",
];

/// Per-calendar-month mean of retained samples, January first.
pub fn monthly_baseline(series: &CleanedSeries) -> Result<[f64; 12]> {
    let groups = series.by_calendar_month();
    let mut out = [0.0; 12];
    for (m, g) in groups.iter().enumerate() {
        if g.is_empty() {
            return Err(Error::Data(format!("no retained samples for {}", MONTH_NAMES[m])));
        }
        out[m] = mean(g);
    }
    Ok(out)
}

/// Ordinary least squares of flow at month `t` on level at month `t - 1`.
/// Returns the fit in table units (10^3 m2/s, 10^5 m3/s).
pub fn fit_coefficients(levels: &MonthlySeries, flows: &MonthlySeries) -> Result<FlowFit> {
    if !levels.aligned_with(flows) {
        return Err(Error::Precondition(format!(
            "level series {}..{} and flow series {}..{} are not aligned",
            levels.start,
            levels.end(),
            flows.start,
            flows.end()
        )));
    }
    if levels.len() < 12 {
        return Err(Error::Precondition(format!(
            "fitting needs at least 12 months, got {}",
            levels.len()
        )));
    }
    let x = &levels.values[..levels.len() - 1];
    let y = &flows.values[1..];
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite sample in fit input".into()));
    }
    let n = x.len() as f64;
    let xm = mean(x);
    let ym = mean(y);
    let sxx: f64 = x.iter().map(|v| (v - xm) * (v - xm)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - xm) * (b - ym)).sum();
    let scale = x.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
    if sxx / n <= (1e-12 * scale).powi(2) {
        return Err(Error::DegenerateFit {
            pair: String::new(),
            reason: "lake level has zero variance".into(),
        });
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let ss_tot: f64 = y.iter().map(|v| (v - ym) * (v - ym)).sum();
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - (slope * a + intercept);
            r * r
        })
        .sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(FlowFit {
        slope: slope / 1e3,
        intercept: intercept / 1e5,
        r_squared,
    })
}

/// Natural indicator of one lake from its water balance:
/// `area * (H(t+1) - H(t)) - (In(t) - Out(t)) * month_seconds`.
///
/// `levels` are end-of-month levels starting one month before the flows, so
/// `levels[t]` is the level at the start of flow month `t`.
pub fn extract_indicator(
    levels: &MonthlySeries,
    inflow: &MonthlySeries,
    outflow: &MonthlySeries,
    area: f64,
    month_seconds: f64,
) -> Result<MonthlySeries> {
    if !inflow.aligned_with(outflow) {
        return Err(Error::Precondition("inflow and outflow series are not aligned".into()));
    }
    if inflow.is_empty() || levels.len() < 2 {
        return Err(Error::Precondition("indicator extraction needs at least 2 months".into()));
    }
    if levels.start.add_months(1) != inflow.start || levels.len() != inflow.len() + 1 {
        return Err(Error::Precondition(format!(
            "levels {}..{} must bracket flows {}..{}",
            levels.start,
            levels.end(),
            inflow.start,
            inflow.end()
        )));
    }
    if !(area.is_finite() && area > 0.0) {
        return Err(Error::Domain(format!("area {area} must be positive")));
    }
    let values = (0..inflow.len())
        .map(|t| {
            area * (levels.values[t + 1] - levels.values[t])
                - (inflow.values[t] - outflow.values[t]) * month_seconds
        })
        .collect();
    Ok(MonthlySeries::new(inflow.start, values))
}

/// Minimum number of years of a calendar month before a trend line is fitted.
const TREND_MIN_YEARS: usize = 3;

/// Forecast `horizon` months past the end of `history`. Each calendar month is
/// extrapolated from its own trend line across years (its mean when fewer than
/// three years are available).
pub fn forecast_indicator(history: &IndicatorSeries, horizon: usize) -> Result<IndicatorSeries> {
    if history.len() < 24 {
        return Err(Error::Precondition(format!(
            "forecasting needs at least 24 months of history, got {}",
            history.len()
        )));
    }
    let start = history.end().add_months(1);
    let lakes = PerLake::from_fn(|lake| forecast_lake(&history.lake(lake), start, horizon));
    IndicatorSeries::new(start, lakes)
}

fn forecast_lake(series: &MonthlySeries, start: YearMonth, horizon: usize) -> Vec<f64> {
    let mut by_month: [Vec<(f64, f64)>; 12] = Default::default();
    for (i, v) in series.values.iter().enumerate() {
        let ym = series.month_at(i);
        by_month[ym.month0()].push((ym.year as f64, *v));
    }
    (0..horizon)
        .map(|h| {
            let target = start.add_months(h as i64);
            let pts = &by_month[target.month0()];
            if pts.len() < TREND_MIN_YEARS {
                let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
                return mean(&ys);
            }
            let n = pts.len() as f64;
            let xm = pts.iter().map(|p| p.0).sum::<f64>() / n;
            let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
            let sxx: f64 = pts.iter().map(|p| (p.0 - xm).powi(2)).sum();
            let sxy: f64 = pts.iter().map(|p| (p.0 - xm) * (p.1 - ym)).sum();
            let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
            ym + slope * (target.year as f64 - xm)
        })
        .collect()
}
