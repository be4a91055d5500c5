//! Receding-horizon dam control: forecast the natural indicators, anneal a
//! release plan over the prediction horizon, apply its first month to the
//! truth model, read back what actually happened and repeat.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::annealer::{try_anneal, AnnealConfig};
use crate::error::{Error, Result};
use crate::grading::{grade_outcomes, GradeReport, MonthOutcome, ObjectiveMode};
use crate::hydronet::{step, ControlPlan, LakeId, LakeState, MonthForcing, PerLake, RiverId};
use crate::indicators::{extract_indicator, forecast_indicator, IndicatorSeries};
use crate::scenario::Scenario;
use crate::series::{mean, MonthlySeries, YearMonth};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelBand {
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MpcConfig {
    pub horizon: usize,
    pub apply_window: usize,
    pub anneal: AnnealConfig,
    pub objective: ObjectiveMode,
    /// Stop the run when a realized level leaves its band.
    pub emergency: BTreeMap<LakeId, LevelBand>,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            horizon: 6,
            apply_window: 1,
            anneal: AnnealConfig::default(),
            objective: ObjectiveMode::Basic,
            emergency: BTreeMap::new(),
        }
    }
}

impl MpcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.apply_window == 0 || self.apply_window > self.horizon {
            return Err(Error::Config(format!(
                "need 1 <= apply window ({}) <= horizon ({})",
                self.apply_window, self.horizon
            )));
        }
        for (lake, b) in &self.emergency {
            if !(b.min < b.max) {
                return Err(Error::Config(format!("emergency band for lake {lake} is empty")));
            }
        }
        self.anneal.validate()
    }
}

/// Everything the planner may look at when choosing a plan.
pub struct PlanningInput<'a> {
    pub scenario: &'a Scenario,
    pub current: &'a LakeState,
    /// Calendar month of the first planned month.
    pub start: YearMonth,
    pub forcing: &'a [MonthForcing],
    /// Realized outcomes before `current`, oldest first, for window padding.
    pub past: &'a [MonthOutcome],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonPlan {
    pub plan: ControlPlan,
    pub score: f64,
    /// Planned end-of-month states, one per horizon month.
    pub states: Vec<LakeState>,
}

/// Mean objective over the horizon of the 12-month grade window ending at
/// each planned month.
fn horizon_score(input: &PlanningInput<'_>, plan: &ControlPlan, mode: ObjectiveMode) -> Result<(f64, Vec<LakeState>)> {
    let h = input.forcing.len();
    let s = input.scenario;
    let pad = 11.min(input.past.len());
    let mut window: Vec<MonthOutcome> = input.past[input.past.len() - pad..].to_vec();
    let mut state = input.current.clone();
    let mut states = Vec::with_capacity(h);
    let mut total = 0.0;
    for t in 0..h {
        state = step(&state, &plan.slice(t), &input.forcing[t], &s.topology, &s.coefficients)?;
        window.push(MonthOutcome {
            levels: state.levels,
            e_release: state.flows[RiverId::StLawrence],
            ottawa: state.flows[RiverId::Ottawa],
        });
        let w = &window[window.len().saturating_sub(12)..];
        if w.len() < 12 {
            return Err(Error::Precondition("need 11 months of realized history to grade a horizon".into()));
        }
        total += mode.score(&grade_outcomes(w, &s.constraints, &s.baselines)?)?;
        states.push(state.clone());
    }
    Ok((total / h as f64, states))
}

/// Anneal a release plan over the horizon covered by `input.forcing`.
pub fn plan_horizon(input: &PlanningInput<'_>, config: &MpcConfig, seed: u64) -> Result<HorizonPlan> {
    let s = input.scenario;
    let h = input.forcing.len();
    if h == 0 {
        return Err(Error::Precondition("empty forecast".into()));
    }
    let initial = s.passthrough_plan(input.start, h)?;
    let (lo, hi) = initial.coordinate_bounds(&s.topology)?;
    let objective = |x: &[f64]| -> Result<f64> {
        let plan = initial.with_values(x.to_vec())?;
        Ok(horizon_score(input, &plan, config.objective)?.0)
    };
    let anneal = AnnealConfig { seed, ..config.anneal };
    let result = try_anneal(&objective, initial.as_slice(), &lo, &hi, &anneal)?;
    let plan = initial.with_values(result.best)?;
    let (score, states) = horizon_score(input, &plan, config.objective)?;
    Ok(HorizonPlan { plan, score, states })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MpcStep {
    pub month: YearMonth,
    /// Forecast indicators (m3) and Ottawa flows the plan was made with.
    pub forecast: IndicatorSeries,
    pub forecast_ottawa: Vec<f64>,
    pub plan: HorizonPlan,
    /// Releases applied to the truth model: the first apply-window months of `plan`.
    pub applied: ControlPlan,
    /// Realized end-of-month states for the applied months.
    pub realized: Vec<LakeState>,
    /// Indicators recovered from the realized water balance.
    pub realized_indicators: Vec<PerLake<f64>>,
    /// Grade of the 12-month window ending at each applied month.
    pub grades: Vec<GradeReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MpcRunRecord {
    pub steps: Vec<MpcStep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stopped: Option<String>,
}

impl MpcRunRecord {
    pub fn months(&self) -> usize {
        self.steps.iter().map(|s| s.realized.len()).sum()
    }

    pub fn monthly_grades(&self) -> Vec<&GradeReport> {
        self.steps.iter().flat_map(|s| s.grades.iter()).collect()
    }

    pub fn realized_outcomes(&self) -> Vec<MonthOutcome> {
        self.steps
            .iter()
            .flat_map(|s| s.realized.iter())
            .map(outcome)
            .collect()
    }
}

fn outcome(s: &LakeState) -> MonthOutcome {
    MonthOutcome {
        levels: s.levels,
        e_release: s.flows[RiverId::StLawrence],
        ottawa: s.flows[RiverId::Ottawa],
    }
}

/// Ottawa forecast: the historical mean of each calendar month.
fn forecast_ottawa(history: &MonthlySeries, start: YearMonth, horizon: usize) -> Vec<f64> {
    let mut by_month: [Vec<f64>; 12] = Default::default();
    for (i, v) in history.values.iter().enumerate() {
        by_month[history.calendar_month(i)].push(*v);
    }
    (0..horizon)
        .map(|h| mean(&by_month[start.add_months(h as i64).month0()]))
        .collect()
}

/// Indicators of one realized month from its water balance.
fn realized_indicator(scenario: &Scenario, before: &LakeState, after: &LakeState, month: YearMonth) -> Result<PerLake<f64>> {
    let topo = &scenario.topology;
    let mut out = PerLake::splat(0.0);
    for lake in LakeId::ALL {
        let (mut inflow, mut outflow) = (0.0, 0.0);
        for r in RiverId::ALL {
            if topo.edges[r].to == crate::hydronet::Endpoint::Lake(lake) {
                inflow += after.flows[r];
            }
            if topo.source(r) == Some(lake) {
                outflow += after.flows[r];
            }
        }
        let levels = MonthlySeries::new(month.add_months(-1), vec![before.levels[lake], after.levels[lake]]);
        let ind = extract_indicator(
            &levels,
            &MonthlySeries::new(month, vec![inflow]),
            &MonthlySeries::new(month, vec![outflow]),
            topo.area(lake),
            topo.month_seconds(),
        )?;
        out[lake] = ind.values[0];
    }
    Ok(out)
}

/// A failed run with everything recorded before the failure.
#[derive(Debug)]
pub struct MpcError {
    pub partial: MpcRunRecord,
    pub source: Error,
}

impl std::fmt::Display for MpcError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (after {} months)", self.source, self.partial.months())
    }
}

impl std::error::Error for MpcError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

impl From<MpcError> for Error {
    fn from(e: MpcError) -> Self {
        e.source
    }
}

/// Run the controller over the first `months` evaluation months. The planner
/// sees only the forecast, the realized past and the current state; the truth
/// forcing is used solely to advance the network.
pub fn mpc_run(scenario: &Scenario, config: &MpcConfig, months: usize) -> std::result::Result<MpcRunRecord, MpcError> {
    let mut record = MpcRunRecord {
        steps: Vec::new(),
        stopped: None,
    };
    match run_steps(scenario, config, months, &mut record) {
        Ok(()) => Ok(record),
        Err(source) => Err(MpcError {
            partial: record,
            source,
        }),
    }
}

fn run_steps(scenario: &Scenario, config: &MpcConfig, months: usize, record: &mut MpcRunRecord) -> Result<()> {
    config.validate()?;
    if months == 0 || months > scenario.months() {
        return Err(Error::Precondition(format!(
            "months must be in 1..={}, got {months}",
            scenario.months()
        )));
    }
    let mut history = scenario.history.clone();
    let mut ottawa_history = scenario.history_ottawa.clone();
    let mut past = scenario.history_outcomes.clone();
    let mut state = scenario.initial.clone();
    let mut t = 0;
    while t < months {
        let month = scenario.start().add_months(t as i64);
        let forecast = forecast_indicator(&history, config.horizon)?;
        let ottawa = forecast_ottawa(&ottawa_history, month, config.horizon);
        let forcing: Vec<MonthForcing> = (0..config.horizon)
            .map(|h| MonthForcing::from_indicators(forecast.month(h)).with_ottawa(ottawa[h]))
            .collect();
        let input = PlanningInput {
            scenario,
            current: &state,
            start: month,
            forcing: &forcing,
            past: &past,
        };
        let plan = plan_horizon(&input, config, config.anneal.seed.wrapping_add(t as u64))?;
        let apply = config.apply_window.min(months - t);
        let applied = plan.plan.sub_plan(0, apply)?;

        let truth = scenario.truth_forcing(t, apply);
        let mut realized = Vec::with_capacity(apply);
        let mut indicators = Vec::with_capacity(apply);
        let mut grades = Vec::with_capacity(apply);
        let mut stop = None;
        for k in 0..apply {
            let m = month.add_months(k as i64);
            let next = step(&state, &applied.slice(k), &truth[k], &scenario.topology, &scenario.coefficients)?;
            let ind = realized_indicator(scenario, &state, &next, m)?;
            history.push(ind);
            ottawa_history.values.push(next.flows[RiverId::Ottawa]);
            past.push(outcome(&next));
            grades.push(grade_outcomes(&past[past.len() - 12..], &scenario.constraints, &scenario.baselines)?);
            for (lake, band) in &config.emergency {
                let h = next.levels[*lake];
                if h < band.min || h > band.max {
                    stop = Some(format!(
                        "{m}: lake {lake} level {h:.3} m left [{:.3}, {:.3}]",
                        band.min, band.max
                    ));
                    break;
                }
            }
            indicators.push(ind);
            realized.push(next.clone());
            state = next;
            if stop.is_some() {
                break;
            }
        }
        t += realized.len();
        record.steps.push(MpcStep {
            month,
            forecast,
            forecast_ottawa: ottawa,
            plan,
            applied,
            realized,
            realized_indicators: indicators,
            grades,
        });
        if let Some(reason) = stop {
            log::warn!("emergency stop: {reason}");
            record.stopped = Some(reason);
            break;
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub min: f64,
    pub median: f64,
}

impl Stats {
    pub fn of(xs: &[f64]) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::Precondition("no values to summarize".into()));
        }
        let mut sorted = xs.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        Ok(Self {
            mean: mean(xs),
            min: sorted[0],
            median,
        })
    }
}

/// Yearly statistics of the monthly lake-mean `G_L` and `G_F`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradeSummary {
    pub monthly_g_l: Vec<f64>,
    pub monthly_g_f: Vec<f64>,
    pub g_l: Stats,
    pub g_f: Stats,
}

impl GradeSummary {
    pub fn of(grades: &[&GradeReport]) -> Result<Self> {
        let (monthly_g_l, monthly_g_f): (Vec<f64>, Vec<f64>) = grades.iter().map(|g| g.lake_means()).unzip();
        Ok(Self {
            g_l: Stats::of(&monthly_g_l)?,
            g_f: Stats::of(&monthly_g_f)?,
            monthly_g_l,
            monthly_g_f,
        })
    }
}

/// Releases fixed at the historical monthly means over the first `months`
/// evaluation months, simulated with the truth forcing.
pub fn passthrough_run(scenario: &Scenario, months: usize) -> Result<(ControlPlan, Vec<LakeState>, Vec<GradeReport>)> {
    let plan = scenario.passthrough_plan(scenario.start(), months)?;
    let traj = crate::hydronet::simulate(
        &scenario.initial,
        &plan,
        &scenario.truth_forcing(0, months),
        &scenario.topology,
        &scenario.coefficients,
        months,
    )?;
    let grades = scenario.rolling_grades_of(&traj)?;
    Ok((plan, traj.states[1..].to_vec(), grades))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub wlpcm: GradeSummary,
    pub passthrough: GradeSummary,
}

pub fn compare(record: &MpcRunRecord, passthrough: &[GradeReport]) -> Result<Comparison> {
    let n = record.months();
    let base: Vec<&GradeReport> = passthrough.iter().take(n).collect();
    Ok(Comparison {
        wlpcm: GradeSummary::of(&record.monthly_grades())?,
        passthrough: GradeSummary::of(&base)?,
    })
}

/// A release plan chosen with the evaluation-period indicators known in
/// advance, next to the passthrough plan it started from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct YearPlan {
    pub plan: ControlPlan,
    pub grade: GradeReport,
    pub score: f64,
    pub passthrough_grade: GradeReport,
    pub passthrough_score: f64,
}

/// Anneal the releases of the first `months` evaluation months against the
/// grade of the 12-month window ending with the last of them.
pub fn optimize_year(scenario: &Scenario, anneal: &AnnealConfig, mode: ObjectiveMode, months: usize) -> Result<YearPlan> {
    if months == 0 || months > scenario.months() {
        return Err(Error::Precondition(format!(
            "months must be in 1..={}, got {months}",
            scenario.months()
        )));
    }
    let forcing = scenario.truth_forcing(0, months);
    let grade = |plan: &ControlPlan| -> Result<GradeReport> {
        let traj = crate::hydronet::simulate(
            &scenario.initial,
            plan,
            &forcing,
            &scenario.topology,
            &scenario.coefficients,
            months,
        )?;
        let last = scenario.rolling_grades_of(&traj)?;
        Ok(last.into_iter().next_back().expect("months >= 1"))
    };
    let initial = scenario.passthrough_plan(scenario.start(), months)?;
    let (lo, hi) = initial.coordinate_bounds(&scenario.topology)?;
    let objective = |x: &[f64]| mode.score(&grade(&initial.with_values(x.to_vec())?)?);
    let result = try_anneal(&objective, initial.as_slice(), &lo, &hi, anneal)?;
    let plan = initial.with_values(result.best)?;
    let g = grade(&plan)?;
    let p = grade(&initial)?;
    Ok(YearPlan {
        score: mode.score(&g)?,
        passthrough_score: mode.score(&p)?,
        plan,
        grade: g,
        passthrough_grade: p,
    })
}
