//! Scenario perturbations and the difference-based sensitivity indices.
//!
//! Releases stay fixed at a given plan so that an index measures how the
//! grades respond to the natural inputs, not how a re-optimized controller
//! would compensate.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grading::{grade_outcomes, trajectory_outcomes, Baselines, MonthOutcome, StakeholderConstraints};
use crate::hydronet::{simulate, ControlPlan, FlowCoefficients, LakeId, LakeState, MonthForcing, NetworkTopology, RiverId};
use crate::scenario::Scenario;
use crate::series::{mean, population_std, YearMonth};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerturbationKind {
    DamFlow { edge: RiverId },
    Precipitation,
    IceClog,
    SnowPack,
}

/// One perturbation of magnitude `delta`: m3/s for dam flow and ice clog, a
/// fraction of the indicators for precipitation, meters of March Superior
/// rise for snow pack.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    #[serde(flatten)]
    pub kind: PerturbationKind,
    pub delta: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dispersion {
    /// Root mean square of the grade differences.
    #[default]
    Rmse,
    /// Population standard deviation of the grade differences.
    Std,
}

impl Dispersion {
    pub fn of(&self, xs: &[f64]) -> f64 {
        match self {
            Dispersion::Rmse => (xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64).sqrt(),
            Dispersion::Std => population_std(xs),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// A plan-fixed simulation problem whose outcome is graded over the 12
/// months ending with its last month.
#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityScenario {
    pub start: YearMonth,
    pub initial: LakeState,
    pub forcing: Vec<MonthForcing>,
    pub plan: ControlPlan,
    pub topology: NetworkTopology,
    pub coefficients: FlowCoefficients,
    pub constraints: StakeholderConstraints,
    pub baselines: Baselines,
    /// Realized outcomes before `start`, for padding short runs.
    pub past: Vec<MonthOutcome>,
}

impl SensitivityScenario {
    /// The scenario's evaluation period under `plan` (passthrough when `None`).
    pub fn from_scenario(s: &Scenario, plan: Option<ControlPlan>) -> Result<Self> {
        let n = s.months();
        let plan = match plan {
            Some(p) => p,
            None => s.passthrough_plan(s.start(), n)?,
        };
        Ok(Self {
            start: s.start(),
            initial: s.initial.clone(),
            forcing: s.truth_forcing(0, n),
            plan,
            topology: s.topology.clone(),
            coefficients: s.coefficients.clone(),
            constraints: s.constraints.clone(),
            baselines: s.baselines.clone(),
            past: s.history_outcomes.clone(),
        })
    }

    pub fn months(&self) -> usize {
        self.forcing.len()
    }

    fn months_in(&self, month0: usize) -> Vec<usize> {
        (0..self.months())
            .filter(|t| self.start.add_months(*t as i64).month0() == month0)
            .collect()
    }

    /// Grade components of the 12-month window ending at the last month.
    pub fn grade_components(&self) -> Result<Vec<f64>> {
        let n = self.months();
        let traj = simulate(&self.initial, &self.plan, &self.forcing, &self.topology, &self.coefficients, n)?;
        let mut window = self.past.clone();
        window.extend(trajectory_outcomes(&traj));
        if window.len() < 12 {
            return Err(Error::Precondition("fewer than 12 months to grade".into()));
        }
        let report = grade_outcomes(&window[window.len() - 12..], &self.constraints, &self.baselines)?;
        Ok(report.components())
    }
}

pub fn apply_perturbation(scn: &SensitivityScenario, p: &Perturbation, sign: Sign) -> Result<SensitivityScenario> {
    let mut out = scn.clone();
    let d = sign.factor() * p.delta;
    match p.kind {
        PerturbationKind::Precipitation => {
            for f in &mut out.forcing {
                for lake in LakeId::ALL {
                    f.indicators[lake] *= 1.0 + d;
                }
            }
        }
        PerturbationKind::IceClog => {
            let jan = scn.months_in(0);
            let mar = scn.months_in(2);
            if jan.is_empty() || mar.is_empty() {
                return Err(Error::Precondition("ice clog needs a January and a March in the scenario".into()));
            }
            for (months, shift) in [(jan, -d), (mar, 2.0 * d)] {
                for t in months {
                    for r in RiverId::ALL {
                        out.forcing[t].offsets[r] += shift;
                    }
                }
            }
        }
        PerturbationKind::SnowPack => {
            let mar = scn.months_in(2);
            if mar.is_empty() {
                return Err(Error::Precondition("snow pack needs a March in the scenario".into()));
            }
            let volume = d * scn.topology.area(LakeId::Superior);
            for t in mar {
                out.forcing[t].indicators[LakeId::Superior] += volume;
            }
        }
        PerturbationKind::DamFlow { edge } => {
            let b = scn.topology.bounds(edge)?;
            let series = out
                .plan
                .series_mut(edge)
                .ok_or_else(|| Error::Precondition(format!("river {edge} is not in the plan")))?;
            for v in series {
                *v = b.clip(*v + d);
            }
        }
    }
    Ok(out)
}

fn check_delta(delta: f64) -> Result<()> {
    if delta.is_finite() && delta > 0.0 {
        Ok(())
    } else {
        Err(Error::Precondition(format!("perturbation size {delta} must be > 0")))
    }
}

fn differences(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Central index: dispersion of `G(+delta) - G(-delta)` over all grade
/// components, divided by `2 delta`.
pub fn sensitivity_index(scn: &SensitivityScenario, p: &Perturbation, dispersion: Dispersion) -> Result<f64> {
    check_delta(p.delta)?;
    let (plus, minus) = rayon::join(
        || apply_perturbation(scn, p, Sign::Plus)?.grade_components(),
        || apply_perturbation(scn, p, Sign::Minus)?.grade_components(),
    );
    Ok(dispersion.of(&differences(&plus?, &minus?)) / (2.0 * p.delta))
}

/// One-sided dam index: dispersion of `G(base) - G(edge - delta)`, divided by `delta`.
pub fn dam_sensitivity(scn: &SensitivityScenario, edge: RiverId, delta: f64, dispersion: Dispersion) -> Result<f64> {
    check_delta(delta)?;
    let p = Perturbation {
        kind: PerturbationKind::DamFlow { edge },
        delta,
    };
    let base = scn.grade_components()?;
    let lowered = apply_perturbation(scn, &p, Sign::Minus)?.grade_components()?;
    Ok(dispersion.of(&differences(&base, &lowered)) / delta)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensitivityConfig {
    pub perturbations: Vec<Perturbation>,
    pub dispersion: Dispersion,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityEntry {
    #[serde(flatten)]
    pub perturbation: Perturbation,
    pub index: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub dispersion: Dispersion,
    pub entries: Vec<SensitivityEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_rain: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_ice: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_snow: Option<f64>,
    /// One-sided index per dam edge.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub dam: BTreeMap<RiverId, f64>,
    /// `S_rain + S_ice + S_snow` over the indices present.
    pub total: f64,
}

impl SensitivityReport {
    fn natural_sum(&self) -> f64 {
        [self.s_rain, self.s_ice, self.s_snow].iter().flatten().sum()
    }

    pub fn validate(&self) -> Result<()> {
        let all = self
            .entries
            .iter()
            .map(|e| e.index)
            .chain(self.dam.values().copied())
            .chain([self.s_rain, self.s_ice, self.s_snow].into_iter().flatten());
        for v in all {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Numerical(format!("sensitivity index {v} must be finite and >= 0")));
            }
        }
        let sum = self.natural_sum();
        if (sum - self.total).abs() > 1e-12 * sum.abs().max(1.0) {
            return Err(Error::Numerical(format!("total {} != component sum {sum}", self.total)));
        }
        Ok(())
    }
}

/// Evaluate every configured perturbation. Natural kinds use the central
/// index; dam flows use the one-sided index. A kind listed twice keeps its
/// last value in the named fields.
pub fn run_sensitivity(scn: &SensitivityScenario, config: &SensitivityConfig) -> Result<SensitivityReport> {
    let mut report = SensitivityReport {
        dispersion: config.dispersion,
        ..Default::default()
    };
    for p in &config.perturbations {
        let index = match p.kind {
            PerturbationKind::DamFlow { edge } => {
                let s = dam_sensitivity(scn, edge, p.delta, config.dispersion)?;
                report.dam.insert(edge, s);
                s
            }
            kind => {
                let s = sensitivity_index(scn, p, config.dispersion)?;
                match kind {
                    PerturbationKind::Precipitation => report.s_rain = Some(s),
                    PerturbationKind::IceClog => report.s_ice = Some(s),
                    _ => report.s_snow = Some(s),
                }
                s
            }
        };
        report.entries.push(SensitivityEntry { perturbation: *p, index });
    }
    report.total = report.natural_sum();
    report.validate()?;
    Ok(report)
}

/// The three natural perturbations at a common relative size: `fraction` of
/// the indicators, of the mean rated-river flow, and of one meter of March
/// Superior rise.
pub fn standard_perturbations(fraction: f64, mean_rated_flow: f64) -> Vec<Perturbation> {
    vec![
        Perturbation {
            kind: PerturbationKind::Precipitation,
            delta: fraction,
        },
        Perturbation {
            kind: PerturbationKind::IceClog,
            delta: fraction * mean_rated_flow,
        },
        Perturbation {
            kind: PerturbationKind::SnowPack,
            delta: fraction,
        },
    ]
}

/// Mean rated flow of the four level-driven rivers at their lakes' mean
/// historical levels.
pub fn mean_rated_flow(s: &Scenario) -> f64 {
    let per_river: Vec<f64> = RiverId::RATED
        .iter()
        .filter_map(|r| {
            let fit = s.coefficients.get(*r).ok()?;
            let lake = s.topology.source(*r)?;
            let levels: Vec<f64> = s.history_outcomes.iter().map(|o| o.levels[lake]).collect();
            Some(fit.slope_si() * mean(&levels) + fit.intercept_si())
        })
        .collect();
    mean(&per_river)
}
