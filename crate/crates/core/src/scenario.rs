//! Assembling a control scenario from historical and evaluation data:
//! network-wide fitting and indicator extraction, baselines, bounds and the
//! truth forcing for the evaluation period.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::grading::{
    grade_outcomes, trajectory_outcomes, Baselines, FloodParams, GradeReport, MonthOutcome, SeriesBaseline,
    StakeholderConstraints,
};
use crate::hydronet::{
    simulate, ControlPlan, Endpoint, FlowBounds, FlowCoefficients, FlowFit, LakeId, LakeState, MonthForcing,
    NetworkTopology, PerLake, PerRiver, RiverId, Trajectory,
};
use crate::indicators::{
    extract_indicator, fit_coefficients, monthly_baseline, remove_outliers, CleanedSeries, IndicatorSeries,
    OutlierRule,
};
use crate::series::{mean, population_std, MonthlySeries, YearMonth};

/// Name of a lake/river pair as used in fit reports and errors, e.g. `superior->st_marys`.
pub fn pair_name(river: RiverId, topology: &NetworkTopology) -> String {
    match topology.source(river) {
        Some(lake) => format!("{}->{}", lake.name(), river.name()),
        None => river.name().to_string(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairFit {
    pub pair: String,
    pub lake: LakeId,
    pub river: RiverId,
    pub fit: FlowFit,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub coefficients: FlowCoefficients,
    pub pairs: Vec<PairFit>,
}

/// Fit every rated river against the level of the lake it drains.
pub fn fit_network(data: &Dataset, topology: &NetworkTopology) -> Result<FitReport> {
    let mut pairs = Vec::new();
    for river in RiverId::RATED {
        let lake = topology
            .source(river)
            .ok_or_else(|| Error::Config(format!("rated river {river} has no source lake")))?;
        let pair = pair_name(river, topology);
        let levels = data.level(lake)?;
        let flows = data.flow(river)?;
        let (lv, fl) = overlap(levels, flows).ok_or_else(|| Error::Data(format!("{pair}: level and flow series do not overlap")))?;
        let fit = fit_coefficients(&lv, &fl).map_err(|e| match e {
            Error::DegenerateFit { reason, .. } => Error::DegenerateFit { pair: pair.clone(), reason },
            Error::Precondition(m) => Error::Data(format!("{pair}: {m}")),
            other => other,
        })?;
        pairs.push(PairFit {
            pair,
            lake,
            river,
            fit,
            samples: lv.len() - 1,
        });
    }
    let coefficients = FlowCoefficients::new(pairs.iter().map(|p| (p.river, p.fit)))?;
    Ok(FitReport { coefficients, pairs })
}

/// The common month span of two series.
fn overlap(a: &MonthlySeries, b: &MonthlySeries) -> Option<(MonthlySeries, MonthlySeries)> {
    let start = a.start.max(b.start);
    let end = a.end().min(b.end());
    if end < start {
        return None;
    }
    let len = (end.months_since(start) + 1) as usize;
    let cut = |s: &MonthlySeries| MonthlySeries::new(start, s.window(start, len).expect("inside span").to_vec());
    Some((cut(a), cut(b)))
}

/// Reject topologies on which the explicit monthly update of a lake drained by
/// a rated river would oscillate and diverge.
pub fn check_stability(topology: &NetworkTopology, coefficients: &FlowCoefficients) -> Result<()> {
    for river in RiverId::RATED {
        if topology.edges[river].controllable {
            continue;
        }
        let Some(lake) = topology.source(river) else { continue };
        let gain = topology.explicit_gain(lake, coefficients.get(river)?.slope_si());
        if gain >= 2.0 {
            return Err(Error::Unstable {
                lake: lake.name().to_string(),
                gain,
            });
        }
    }
    Ok(())
}

fn all_same_span<'a>(series: impl IntoIterator<Item = &'a MonthlySeries>) -> Result<(YearMonth, usize)> {
    let mut span = None;
    for s in series {
        match span {
            None => span = Some((s.start, s.len())),
            Some((start, len)) if start != s.start || len != s.len() => {
                return Err(Error::Data(format!(
                    "series must share one span: {}..{} vs {}..{}",
                    start,
                    start.add_months(len as i64 - 1),
                    s.start,
                    s.end()
                )))
            }
            _ => {}
        }
    }
    span.ok_or_else(|| Error::Data("no series".into()))
}

/// Total inflow and outflow series of a lake from the dataset's river flows.
fn lake_fluxes(
    data: &Dataset,
    topology: &NetworkTopology,
    lake: LakeId,
    start: YearMonth,
    len: usize,
) -> Result<(MonthlySeries, MonthlySeries)> {
    let mut inflow = vec![0.0; len];
    let mut outflow = vec![0.0; len];
    for river in RiverId::ALL {
        let feeds = topology.edges[river].to == Endpoint::Lake(lake);
        let drains = topology.source(river) == Some(lake);
        if !(feeds || drains) {
            continue;
        }
        let w = data.flow(river)?.window(start, len).map_err(|e| Error::Data(e.to_string()))?;
        let target = if feeds { &mut inflow } else { &mut outflow };
        for (t, v) in target.iter_mut().zip(w) {
            *t += v;
        }
    }
    Ok((MonthlySeries::new(start, inflow), MonthlySeries::new(start, outflow)))
}

/// Natural indicators of all lakes. All level and flow series must share one
/// span; indicators start one month after it, since each needs the level at
/// the end of the previous month.
pub fn network_indicators(data: &Dataset, topology: &NetworkTopology) -> Result<IndicatorSeries> {
    let levels: Vec<&MonthlySeries> = LakeId::ALL.iter().map(|l| data.level(*l)).collect::<Result<_>>()?;
    let flows: Vec<&MonthlySeries> = RiverId::ALL.iter().map(|r| data.flow(*r)).collect::<Result<_>>()?;
    let (start, len) = all_same_span(levels.iter().copied().chain(flows.iter().copied()))?;
    if len < 2 {
        return Err(Error::Data("indicator extraction needs at least 2 months".into()));
    }
    let fstart = start.add_months(1);
    let mut lakes: PerLake<Vec<f64>> = PerLake::default();
    for lake in LakeId::ALL {
        let (inflow, outflow) = lake_fluxes(data, topology, lake, fstart, len - 1)?;
        let ind = extract_indicator(
            data.level(lake)?,
            &inflow,
            &outflow,
            topology.area(lake),
            topology.month_seconds(),
        )?;
        lakes[lake] = ind.values;
    }
    IndicatorSeries::new(fstart, lakes)
}

/// Simulate `data` with every flow prescribed from the record and the given
/// indicators. Used to check that extraction and simulation invert each other.
pub fn replay_recorded_flows(
    data: &Dataset,
    topology: &NetworkTopology,
    coefficients: &FlowCoefficients,
    indicators: &IndicatorSeries,
) -> Result<Trajectory> {
    let before = indicators.start.add_months(-1);
    let initial = LakeState::new(PerLake::from_fn(|l| {
        data.level(l).and_then(|s| s.window(before, 1).map(|w| w[0])).unwrap_or(f64::NAN)
    }));
    initial.validate()?;
    let n = indicators.len();
    let mut forcing = Vec::with_capacity(n);
    for t in 0..n {
        let ym = indicators.start.add_months(t as i64);
        let mut f = MonthForcing::from_indicators(indicators.month(t));
        for river in RiverId::ALL {
            f.prescribed[river] = Some(data.flow(river)?.window(ym, 1)?[0]);
        }
        forcing.push(f);
    }
    let mut topo = topology.clone();
    for r in RiverId::ALL {
        topo.edges[r].controllable = false;
    }
    simulate(&initial, &ControlPlan::constant(&[], n, |_| 0.0), &forcing, &topo, coefficients, n)
}

fn series_baseline(s: &MonthlySeries, rule: OutlierRule) -> Result<(SeriesBaseline, CleanedSeries)> {
    let (clean, _) = remove_outliers(s, rule)?;
    Ok((SeriesBaseline::from_monthly(monthly_baseline(&clean)?), clean))
}

/// Per-lake level baselines, the St. Lawrence flow baseline (when the record
/// has river e and the Ottawa) and flood levels derived from Lake Ontario.
pub fn build_baselines(data: &Dataset, constraints: &StakeholderConstraints, rule: OutlierRule) -> Result<Baselines> {
    let mut lakes = Vec::with_capacity(5);
    let mut ontario_clean = None;
    for lake in LakeId::ALL {
        let (b, clean) = series_baseline(data.level(lake)?, rule)?;
        lakes.push(b);
        if lake == LakeId::Ontario {
            ontario_clean = Some(clean);
        }
    }
    let lakes = PerLake(lakes.try_into().expect("five lakes"));

    let st_lawrence = match (data.flow(RiverId::StLawrence), data.flow(RiverId::Ottawa)) {
        (Ok(e), Ok(ott)) => {
            let terms = constraints.ontario.map(|o| o.montreal).unwrap_or_default();
            let (e, ott) = overlap(e, ott).ok_or_else(|| Error::Data("river e and the Ottawa do not overlap".into()))?;
            let below: Vec<f64> = e.values.iter().zip(&ott.values).map(|(a, b)| terms.st_lawrence(*a, *b)).collect();
            Some(series_baseline(&MonthlySeries::new(e.start, below), rule)?.0)
        }
        _ => None,
    };

    let retained: Vec<f64> = ontario_clean.expect("ontario graded").retained().collect();
    let std = population_std(&retained);
    let flood = if std > 0.0 {
        Some(FloodParams::from_statistics(mean(&retained), std)?)
    } else {
        None
    };
    Ok(Baselines {
        lakes,
        st_lawrence,
        flood,
    })
}

/// Mean historical release of each controllable river per calendar month.
fn monthly_release_means(data: &Dataset, rivers: &[RiverId]) -> Result<Vec<[f64; 12]>> {
    rivers
        .iter()
        .map(|r| monthly_baseline(&CleanedSeries::from(data.flow(*r)?)))
        .collect()
}

/// A fully specified evaluation problem.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub topology: NetworkTopology,
    pub coefficients: FlowCoefficients,
    pub constraints: StakeholderConstraints,
    pub baselines: Baselines,
    /// Indicators over the historical record, available for forecasting.
    pub history: IndicatorSeries,
    /// Ottawa flow over the same months as `history`.
    pub history_ottawa: MonthlySeries,
    /// Realized outcomes over the historical record, oldest first, for padding
    /// grading windows.
    pub history_outcomes: Vec<MonthOutcome>,
    /// Mean historical release per calendar month for each controllable river.
    pub release_means: Vec<(RiverId, [f64; 12])>,
    /// State at the start of the first evaluation month.
    pub initial: LakeState,
    /// True indicators over the evaluation months.
    pub truth: IndicatorSeries,
    pub truth_ottawa: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioOptions {
    pub outlier_rule: Option<OutlierRule>,
    /// Use these coefficients instead of fitting the history.
    pub coefficients: Option<FlowCoefficients>,
}

impl Scenario {
    /// Build a scenario from a historical record and the evaluation period that
    /// directly follows it.
    pub fn build(
        history: &Dataset,
        evaluation: &Dataset,
        topology: &NetworkTopology,
        constraints: &StakeholderConstraints,
        options: &ScenarioOptions,
    ) -> Result<Self> {
        topology.validate()?;
        constraints.validate()?;
        let rule = options.outlier_rule.unwrap_or(OutlierRule::ThreeSigma);
        let coefficients = match &options.coefficients {
            Some(c) => c.clone(),
            None => fit_network(history, topology)?.coefficients,
        };
        check_stability(topology, &coefficients)?;

        let mut topology = topology.clone();
        let controllable = topology.controllable();
        for r in &controllable {
            if topology.edges[*r].bounds.is_none() {
                let m = mean(&history.flow(*r)?.values);
                topology.edges[*r].bounds = Some(FlowBounds {
                    min: 0.5 * m,
                    max: 1.5 * m,
                });
            }
        }

        let mut full = history.clone();
        full.append(evaluation)?;
        let indicators = network_indicators(&full, &topology)?;
        let hist_end = all_same_span(LakeId::ALL.iter().filter_map(|l| history.level(*l).ok()))
            .map(|(s, n)| s.add_months(n as i64 - 1))?;
        let n_hist = (hist_end.months_since(indicators.start) + 1) as usize;
        let n_eval = indicators.len() - n_hist;
        if n_eval == 0 {
            return Err(Error::Data("evaluation period is empty".into()));
        }
        let history_ind = indicators.slice(0, n_hist)?;
        let truth = indicators.slice(n_hist, n_eval)?;

        let ottawa = full.flow(RiverId::Ottawa)?;
        let history_ottawa = MonthlySeries::new(history_ind.start, ottawa.window(history_ind.start, n_hist)?.to_vec());
        let truth_ottawa = ottawa.window(truth.start, n_eval)?.to_vec();

        let (hstart, hlen) = all_same_span(LakeId::ALL.iter().map(|l| history.level(*l)).collect::<Result<Vec<_>>>()?)?;
        let e_flow = history.flow(RiverId::StLawrence)?.window(hstart, hlen)?;
        let o_flow = history.flow(RiverId::Ottawa)?.window(hstart, hlen)?;
        let history_outcomes = (0..hlen)
            .map(|t| {
                Ok(MonthOutcome {
                    levels: PerLake::from_fn(|l| history.level(l).map(|s| s.values[t]).unwrap_or(f64::NAN)),
                    e_release: e_flow[t],
                    ottawa: o_flow[t],
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let last = history_outcomes.last().expect("non-empty history");
        let mut initial = LakeState::new(last.levels);
        initial.flows = PerRiver::from_fn(|r| history.flow(r).map(|s| *s.values.last().unwrap()).unwrap_or(0.0));
        initial.validate()?;

        let release_means = controllable
            .iter()
            .copied()
            .zip(monthly_release_means(history, &controllable)?)
            .collect();

        Ok(Self {
            baselines: build_baselines(history, constraints, rule)?,
            topology,
            coefficients,
            constraints: constraints.clone(),
            history: history_ind,
            history_ottawa,
            history_outcomes,
            release_means,
            initial,
            truth,
            truth_ottawa,
        })
    }

    pub fn start(&self) -> YearMonth {
        self.truth.start
    }

    pub fn months(&self) -> usize {
        self.truth.len()
    }

    pub fn controllable(&self) -> Vec<RiverId> {
        self.release_means.iter().map(|(r, _)| *r).collect()
    }

    /// Truth forcing for evaluation months `[from, from + len)`.
    pub fn truth_forcing(&self, from: usize, len: usize) -> Vec<MonthForcing> {
        (from..from + len)
            .map(|t| MonthForcing::from_indicators(self.truth.month(t)).with_ottawa(self.truth_ottawa[t]))
            .collect()
    }

    /// Historical mean release for each controllable river, clipped to bounds,
    /// for `len` months starting at `start`.
    pub fn passthrough_plan(&self, start: YearMonth, len: usize) -> Result<ControlPlan> {
        ControlPlan::from_series(
            self.release_means
                .iter()
                .map(|(r, means)| {
                    let b = self.topology.bounds(*r)?;
                    Ok((*r, (0..len).map(|t| b.clip(means[start.add_months(t as i64).month0()])).collect()))
                })
                .collect::<Result<Vec<_>>>()?,
        )
    }

    /// Simulate the whole evaluation period under `plan` with the truth forcing.
    pub fn simulate_truth(&self, plan: &ControlPlan) -> Result<Trajectory> {
        let n = self.months();
        simulate(&self.initial, plan, &self.truth_forcing(0, n), &self.topology, &self.coefficients, n)
    }

    /// Grade of the 12-month window ending at each evaluation month, padded
    /// with historical outcomes.
    pub fn rolling_grades(&self, outcomes: &[MonthOutcome]) -> Result<Vec<GradeReport>> {
        let mut all = self.history_outcomes.clone();
        let h = all.len();
        all.extend_from_slice(outcomes);
        (0..outcomes.len())
            .map(|m| {
                let end = h + m + 1;
                if end < 12 {
                    return Err(Error::Precondition("not enough history to pad a 12-month window".into()));
                }
                grade_outcomes(&all[end - 12..end], &self.constraints, &self.baselines)
            })
            .collect()
    }

    pub fn rolling_grades_of(&self, trajectory: &Trajectory) -> Result<Vec<GradeReport>> {
        self.rolling_grades(&trajectory_outcomes(trajectory))
    }
}

/// Paths of the files that make up a scenario on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioPaths {
    pub history: PathBuf,
    pub evaluation: PathBuf,
    pub topology: PathBuf,
    pub constraints: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<PathBuf>,
}

impl ScenarioPaths {
    /// Resolve relative paths against `base`.
    pub fn resolved(&self, base: &Path) -> Self {
        let r = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base.join(p) };
        Self {
            history: r(&self.history),
            evaluation: r(&self.evaluation),
            topology: r(&self.topology),
            constraints: r(&self.constraints),
            coefficients: self.coefficients.as_ref().map(r),
        }
    }

    pub fn inputs(&self) -> Vec<&Path> {
        let mut v = vec![
            self.history.as_path(),
            self.evaluation.as_path(),
            self.topology.as_path(),
            self.constraints.as_path(),
        ];
        if let Some(c) = &self.coefficients {
            v.push(c);
        }
        v
    }

    pub fn load(&self, outlier_rule: Option<OutlierRule>) -> Result<Scenario> {
        let open = |p: &Path| {
            std::fs::File::open(p).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", p.display()))))
        };
        let read = |p: &Path| {
            std::fs::read_to_string(p)
                .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", p.display()))))
        };
        let history = Dataset::read_csv(open(&self.history)?)?;
        let evaluation = Dataset::read_csv(open(&self.evaluation)?)?;
        let topology = NetworkTopology::from_json(&read(&self.topology)?)?;
        let constraints = StakeholderConstraints::from_json(&read(&self.constraints)?)?;
        let coefficients = match &self.coefficients {
            Some(p) => Some(serde_json::from_str::<FlowCoefficients>(&read(p)?)?),
            None => None,
        };
        Scenario::build(
            &history,
            &evaluation,
            &topology,
            &constraints,
            &ScenarioOptions {
                outlier_rule,
                coefficients,
            },
        )
    }
}
