//! Monthly delayed water balance: rating curves, the one-month step and its fold.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::topology::{Endpoint, LakeId, NetworkTopology, PerLake, PerRiver, RiverId};
use crate::error::{Error, Result};
use crate::indicators::IndicatorSeries;

/// Linear lake-level to river-flow fit, in the units of the reference table:
/// slope in 10^3 m2/s per meter of level, intercept in 10^5 m3/s.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowFit {
    pub slope: f64,
    pub intercept: f64,
    #[serde(default)]
    pub r_squared: f64,
}

impl FlowFit {
    pub fn new(slope: f64, intercept: f64) -> Self {
        Self {
            slope,
            intercept,
            r_squared: 1.0,
        }
    }

    /// Slope in SI units (m2/s).
    pub fn slope_si(&self) -> f64 {
        self.slope * 1e3
    }

    /// Intercept in SI units (m3/s).
    pub fn intercept_si(&self) -> f64 {
        self.intercept * 1e5
    }

    /// Level (m) at which the raw linear flow crosses zero.
    pub fn zero_flow_level(&self) -> f64 {
        -self.intercept_si() / self.slope_si()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.slope.is_finite() && self.slope > 0.0 && self.intercept.is_finite()) {
            return Err(Error::Domain(format!(
                "rating fit needs finite positive slope, got slope {} intercept {}",
                self.slope, self.intercept
            )));
        }
        Ok(())
    }
}

/// Rating fits for the four level-driven rivers (a, b, c, d).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<RiverId, FlowFit>", into = "BTreeMap<RiverId, FlowFit>")]
pub struct FlowCoefficients {
    fits: PerRiver<Option<FlowFit>>,
}

impl FlowCoefficients {
    pub fn new(fits: impl IntoIterator<Item = (RiverId, FlowFit)>) -> Result<Self> {
        let mut out = PerRiver::default();
        for (river, fit) in fits {
            if !RiverId::RATED.contains(&river) {
                return Err(Error::Config(format!("river {river} has no rating curve")));
            }
            fit.validate()?;
            out[river] = Some(fit);
        }
        for river in RiverId::RATED {
            if out[river].is_none() {
                return Err(Error::Config(format!("missing rating fit for river {river}")));
            }
        }
        Ok(Self { fits: out })
    }

    /// Reference rating fits for the chain (Superior-St. Marys, Michigan-Huron-St. Clair,
    /// St. Clair-Detroit, Erie-Niagara). Used as ground truth by the synthetic generator.
    pub fn reference() -> Self {
        Self::new([
            (RiverId::StMarys, FlowFit::new(1.69, -3.0744)),
            (RiverId::StClair, FlowFit::new(1.97, -3.3980)),
            (RiverId::Detroit, FlowFit::new(1.51, -2.6076)),
            (RiverId::Niagara, FlowFit::new(2.09, -3.5799)),
        ])
        .expect("reference fits are valid")
    }

    pub fn get(&self, river: RiverId) -> Result<&FlowFit> {
        self.fits[river]
            .as_ref()
            .ok_or_else(|| Error::Precondition(format!("no rating fit for river {river}")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (RiverId, &FlowFit)> {
        self.fits.iter().filter_map(|(r, f)| f.as_ref().map(|f| (r, f)))
    }
}

impl TryFrom<BTreeMap<RiverId, FlowFit>> for FlowCoefficients {
    type Error = Error;
    fn try_from(map: BTreeMap<RiverId, FlowFit>) -> Result<Self> {
        Self::new(map)
    }
}

impl From<FlowCoefficients> for BTreeMap<RiverId, FlowFit> {
    fn from(c: FlowCoefficients) -> Self {
        c.iter().map(|(r, f)| (r, *f)).collect()
    }
}

/// Outflow (m3/s) of a rated river given the upstream lake level (m).
/// Negative raw values clamp to zero: rivers never reverse.
pub fn river_flow(level: f64, fit: &FlowFit) -> Result<f64> {
    if !level.is_finite() {
        return Err(Error::Domain(format!("lake level {level} is not finite")));
    }
    Ok((fit.slope_si() * level + fit.intercept_si()).max(0.0))
}

/// Network state at the start of month `month`: levels, and the flows that
/// acted during the month just ended.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LakeState {
    pub month: usize,
    pub levels: PerLake<f64>,
    pub flows: PerRiver<f64>,
}

impl LakeState {
    pub fn new(levels: PerLake<f64>) -> Self {
        Self {
            month: 0,
            levels,
            flows: PerRiver::splat(0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (lake, h) in self.levels.iter() {
            if !(h.is_finite() && *h > 0.0) {
                return Err(Error::Domain(format!("lake {lake} level {h} must be finite and positive")));
            }
        }
        for (river, f) in self.flows.iter() {
            if !(f.is_finite() && *f >= 0.0) {
                return Err(Error::Domain(format!("river {river} flow {f} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

/// Dam releases (m3/s) for the controllable rivers over a number of months.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlPlan {
    rivers: Vec<RiverId>,
    months: usize,
    // river-major: values[i * months + t]
    values: Vec<f64>,
}

impl ControlPlan {
    pub fn new(rivers: Vec<RiverId>, months: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rivers.len() * months {
            return Err(Error::Precondition(format!(
                "plan for {} rivers x {} months needs {} values, got {}",
                rivers.len(),
                months,
                rivers.len() * months,
                values.len()
            )));
        }
        Ok(Self {
            rivers,
            months,
            values,
        })
    }

    pub fn from_series(series: impl IntoIterator<Item = (RiverId, Vec<f64>)>) -> Result<Self> {
        let mut rivers = Vec::new();
        let mut values = Vec::new();
        let mut months = None;
        for (river, s) in series {
            if *months.get_or_insert(s.len()) != s.len() {
                return Err(Error::Precondition("plan series differ in length".into()));
            }
            rivers.push(river);
            values.extend(s);
        }
        Self::new(rivers, months.unwrap_or(0), values)
    }

    /// The same release every month.
    pub fn constant(rivers: &[RiverId], months: usize, release: impl Fn(RiverId) -> f64) -> Self {
        let values = rivers
            .iter()
            .flat_map(|r| std::iter::repeat_n(release(*r), months))
            .collect();
        Self {
            rivers: rivers.to_vec(),
            months,
            values,
        }
    }

    pub fn rivers(&self) -> &[RiverId] {
        &self.rivers
    }

    pub fn months(&self) -> usize {
        self.months
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Same layout, new values (as produced by an optimizer).
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.rivers.clone(), self.months, values)
    }

    pub fn series(&self, river: RiverId) -> Option<&[f64]> {
        let i = self.rivers.iter().position(|r| *r == river)?;
        Some(&self.values[i * self.months..(i + 1) * self.months])
    }

    pub fn series_mut(&mut self, river: RiverId) -> Option<&mut [f64]> {
        let i = self.rivers.iter().position(|r| *r == river)?;
        Some(&mut self.values[i * self.months..(i + 1) * self.months])
    }

    /// Releases for month `t`.
    pub fn slice(&self, t: usize) -> PerRiver<Option<f64>> {
        let mut out = PerRiver::splat(None);
        for (i, r) in self.rivers.iter().enumerate() {
            out[*r] = Some(self.values[i * self.months + t]);
        }
        out
    }

    /// Months `[from, from + len)` as a new plan.
    pub fn sub_plan(&self, from: usize, len: usize) -> Result<Self> {
        if from + len > self.months {
            return Err(Error::Precondition(format!(
                "plan has {} months, asked for {}..{}",
                self.months,
                from,
                from + len
            )));
        }
        let values = (0..self.rivers.len())
            .flat_map(|i| self.values[i * self.months + from..i * self.months + from + len].iter().copied())
            .collect();
        Self::new(self.rivers.clone(), len, values)
    }

    /// Per-coordinate lower and upper bounds from the topology, in plan layout.
    pub fn coordinate_bounds(&self, topology: &NetworkTopology) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut lo = Vec::with_capacity(self.values.len());
        let mut hi = Vec::with_capacity(self.values.len());
        for r in &self.rivers {
            let b = topology.bounds(*r)?;
            lo.extend(std::iter::repeat_n(b.min, self.months));
            hi.extend(std::iter::repeat_n(b.max, self.months));
        }
        Ok((lo, hi))
    }
}

#[derive(Serialize, Deserialize)]
struct PlanFile {
    months: usize,
    releases: BTreeMap<RiverId, Vec<f64>>,
}

impl Serialize for ControlPlan {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PlanFile {
            months: self.months,
            releases: self
                .rivers
                .iter()
                .map(|r| (*r, self.series(*r).unwrap().to_vec()))
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ControlPlan {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let f = PlanFile::deserialize(d)?;
        let plan = ControlPlan::from_series(f.releases).map_err(serde::de::Error::custom)?;
        if plan.months != f.months && !plan.rivers.is_empty() {
            return Err(serde::de::Error::custom("months does not match release length"));
        }
        Ok(plan)
    }
}

/// Exogenous inputs for one month.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonthForcing {
    /// Natural indicator per lake (m3 over the month).
    pub indicators: PerLake<f64>,
    /// Additive flow shifts (m3/s) applied after rating or control.
    pub offsets: PerRiver<f64>,
    /// Known flows (m3/s) that replace the rating curve or the control.
    pub prescribed: PerRiver<Option<f64>>,
}

impl MonthForcing {
    pub fn from_indicators(indicators: PerLake<f64>) -> Self {
        Self {
            indicators,
            offsets: PerRiver::splat(0.0),
            prescribed: PerRiver::splat(None),
        }
    }

    pub fn with_ottawa(mut self, flow: f64) -> Self {
        self.prescribed[RiverId::Ottawa] = Some(flow);
        self
    }
}

/// One forcing record per month of an indicator series.
pub fn forcing_from_indicators(indicators: &IndicatorSeries) -> Vec<MonthForcing> {
    (0..indicators.len())
        .map(|t| MonthForcing::from_indicators(indicators.month(t)))
        .collect()
}

/// Advance the network one month.
///
/// Flows during month `t` come from the plan (controllable edges), from a
/// prescribed value, or from the rating curve of the upstream level at the
/// start of the month. Each lake then moves by its net volume over its area.
pub fn step(
    state: &LakeState,
    controls: &PerRiver<Option<f64>>,
    forcing: &MonthForcing,
    topology: &NetworkTopology,
    coefficients: &FlowCoefficients,
) -> Result<LakeState> {
    let month_seconds = topology.month_seconds();
    let mut flows = PerRiver::splat(0.0);
    for river in RiverId::ALL {
        let edge = &topology.edges[river];
        let base = if let Some(known) = forcing.prescribed[river] {
            known
        } else if edge.controllable {
            let v = controls[river].ok_or_else(|| {
                Error::Precondition(format!("no control value for river {river} in month {}", state.month))
            })?;
            let b = topology.bounds(river)?;
            let tol = 1e-9 * b.max.abs().max(1.0);
            if !(v >= b.min - tol && v <= b.max + tol) {
                return Err(Error::ConstraintViolation {
                    river: river.to_string(),
                    value: v,
                    min: b.min,
                    max: b.max,
                });
            }
            v
        } else if let Some(src) = edge.from {
            river_flow(state.levels[src], coefficients.get(river)?)?
        } else {
            0.0
        };
        let f = (base + forcing.offsets[river]).max(0.0);
        if !f.is_finite() {
            return Err(Error::Numerical(format!("river {river} flow is {f}")));
        }
        flows[river] = f;
    }

    let mut net = PerLake::splat(0.0);
    for river in RiverId::ALL {
        let edge = &topology.edges[river];
        if let Some(src) = edge.from {
            net[src] -= flows[river];
        }
        if let Endpoint::Lake(dst) = edge.to {
            net[dst] += flows[river];
        }
    }

    let mut levels = state.levels;
    for lake in LakeId::ALL {
        let delta = forcing.indicators[lake];
        if !delta.is_finite() {
            return Err(Error::Precondition(format!("indicator for lake {lake} is {delta}")));
        }
        let volume = net[lake] * month_seconds + delta;
        let h = state.levels[lake] + volume / topology.area(lake);
        if !h.is_finite() {
            return Err(Error::Numerical(format!("lake {lake} level became {h}")));
        }
        levels[lake] = h;
    }

    Ok(LakeState {
        month: state.month + 1,
        levels,
        flows,
    })
}

/// States for months `0..=horizon` of a run, with the plan and forcing consumed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<LakeState>,
    pub plan: ControlPlan,
    pub forcing: Vec<MonthForcing>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.states.len() - 1
    }

    /// End-of-month levels for months `0..horizon`.
    pub fn levels(&self, lake: LakeId) -> Vec<f64> {
        self.states[1..].iter().map(|s| s.levels[lake]).collect()
    }

    /// Flows during months `0..horizon`.
    pub fn flows(&self, river: RiverId) -> Vec<f64> {
        self.states[1..].iter().map(|s| s.flows[river]).collect()
    }

    pub fn final_state(&self) -> &LakeState {
        self.states.last().expect("trajectory holds the initial state")
    }
}

/// Fold [`step`] over `horizon` months.
pub fn simulate(
    initial: &LakeState,
    plan: &ControlPlan,
    forcing: &[MonthForcing],
    topology: &NetworkTopology,
    coefficients: &FlowCoefficients,
    horizon: usize,
) -> Result<Trajectory> {
    if plan.months() < horizon && !plan.rivers().is_empty() {
        return Err(Error::Precondition(format!(
            "plan covers {} months, horizon is {horizon}",
            plan.months()
        )));
    }
    if forcing.len() < horizon {
        return Err(Error::Precondition(format!(
            "forcing covers {} months, horizon is {horizon}",
            forcing.len()
        )));
    }
    let mut states = Vec::with_capacity(horizon + 1);
    states.push(initial.clone());
    for t in 0..horizon {
        let next = step(&states[t], &plan.slice(t), &forcing[t], topology, coefficients)?;
        states.push(next);
    }
    Ok(Trajectory {
        states,
        plan: plan.clone(),
        forcing: forcing[..horizon].to_vec(),
    })
}

/// Ratio of monthly flow to the multi-year mean for that calendar month.
pub fn water_level_index(
    flow: &crate::series::MonthlySeries,
    baseline_by_month: &[f64; 12],
) -> Result<crate::series::MonthlySeries> {
    if let Some(bad) = baseline_by_month.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
        return Err(Error::Domain(format!("baseline mean {bad} must be positive")));
    }
    let values = flow
        .values
        .iter()
        .enumerate()
        .map(|(i, f)| f / baseline_by_month[flow.calendar_month(i)])
        .collect();
    Ok(crate::series::MonthlySeries::new(flow.start, values))
}

/// Retention residual at the Montreal junction (m3/s):
/// `st_lawrence - ottawa - e_release - nature - residents`.
pub fn montreal_balance(
    st_lawrence: f64,
    ottawa: f64,
    e_release: f64,
    nature: f64,
    residents: f64,
) -> Result<f64> {
    let all = [st_lawrence, ottawa, e_release, nature, residents];
    if all.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("Montreal balance inputs must be finite".into()));
    }
    if st_lawrence < 0.0 || ottawa < 0.0 || e_release < 0.0 {
        return Err(Error::Domain("Montreal flows must be nonnegative".into()));
    }
    Ok(st_lawrence - ottawa - e_release - nature - residents)
}
