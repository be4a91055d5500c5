//! Stakeholder satisfaction grades for lakes and, for Lake Ontario, the
//! St. Lawrence flow, flood exposure and Montreal retention.
//!
//! Every four-point grade is clamped to `[0, 4]`. The flood grade lies in
//! `[-4, 0]` and the retention grade in `[-4, 0]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hydronet::{montreal_balance, LakeId, PerLake, RiverId, Trajectory};
use crate::series::{mean, population_std};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Demand {
    High,
    #[default]
    Medium,
    Low,
}

/// Raw (unclamped) score for a deviation `dev` from baseline:
/// `2 + side*dev`, `4 - mid*|dev|`, `2 - side*dev` for High, Medium, Low.
pub fn raw_score(demand: Demand, dev: f64, side: f64, mid: f64) -> f64 {
    match demand {
        Demand::High => 2.0 + side * dev,
        Demand::Medium => 4.0 - mid * dev.abs(),
        Demand::Low => 2.0 - side * dev,
    }
}

fn clamp4(x: f64) -> f64 {
    x.clamp(0.0, 4.0)
}

fn check_twelve(xs: &[f64], what: &str) -> Result<()> {
    if xs.len() != 12 {
        return Err(Error::Precondition(format!("{what} needs 12 monthly samples, got {}", xs.len())));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain(format!("{what} has a non-finite sample")));
    }
    Ok(())
}

/// Level grade from the twelve-month mean level against the baseline `h_star`.
pub fn grade_level(levels: &[f64], h_star: f64, demand: Demand) -> Result<f64> {
    check_twelve(levels, "level grade")?;
    Ok(clamp4(raw_score(demand, mean(levels) - h_star, 9.0, 18.0)))
}

/// Fluctuation grade from the twelve-month population standard deviation.
pub fn grade_fluctuation(levels: &[f64], sigma_hat: f64, demand: Demand) -> Result<f64> {
    check_twelve(levels, "fluctuation grade")?;
    if !(sigma_hat >= 0.0) {
        return Err(Error::Precondition(format!("baseline deviation {sigma_hat} must be >= 0")));
    }
    Ok(clamp4(raw_score(demand, population_std(levels) - sigma_hat, 12.0, 24.0)))
}

/// Flood grade of the twelve-month maximum level: 0 below the warning level,
/// `-4 * sqrt((H - warning) / f_sigma)` up to the highest level, -4 above.
pub fn grade_flood(levels: &[f64], warning: f64, highest: f64, f_sigma: f64) -> Result<f64> {
    check_twelve(levels, "flood grade")?;
    let flood = FloodParams::new(warning, highest)?;
    if (f_sigma - flood.f_sigma()).abs() > 1e-9 * flood.f_sigma().max(1.0) {
        return Err(Error::Precondition(format!(
            "flood spread {f_sigma} must equal highest - warning = {}",
            flood.f_sigma()
        )));
    }
    let h = levels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(flood.score(h))
}

/// St. Lawrence flow grade; flows in m3/s, scored in 10^3 m3/s.
pub fn grade_river_flow(flows: &[f64], f_star: f64, demand: Demand) -> Result<f64> {
    check_twelve(flows, "river flow grade")?;
    let dev = (mean(flows) - f_star) / 1e3;
    Ok(clamp4(raw_score(demand, dev, 200.0, 400.0)))
}

/// St. Lawrence fluctuation grade on the population standard deviation (m3/s).
pub fn grade_river_fluctuation(flows: &[f64], sigma_hat: f64, demand: Demand) -> Result<f64> {
    check_twelve(flows, "river fluctuation grade")?;
    if !(sigma_hat >= 0.0) {
        return Err(Error::Precondition(format!("baseline deviation {sigma_hat} must be >= 0")));
    }
    let dev = population_std(flows) - sigma_hat;
    Ok(clamp4(raw_score(demand, dev, 1.0 / 80.0, 1.0 / 160.0)))
}

/// Montreal retention grade `-(residual / scale)^2`, floored at -4.
pub fn grade_montreal(residual: f64, scale: f64) -> Result<f64> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::Precondition(format!("retention scale {scale} must be > 0")));
    }
    if !residual.is_finite() {
        return Err(Error::Domain(format!("retention residual {residual} is not finite")));
    }
    let r = residual / scale;
    Ok((-(r * r)).max(-4.0))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LakeDemand {
    #[serde(default, rename = "level_demand")]
    pub level: Demand,
    #[serde(default, rename = "fluctuation_demand")]
    pub fluctuation: Demand,
}

/// Warning (`H#`) and emergency (`H_highest`) levels for Lake Ontario.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloodParams {
    pub warning_level: f64,
    pub highest_level: f64,
}

impl FloodParams {
    pub fn new(warning_level: f64, highest_level: f64) -> Result<Self> {
        if !(warning_level.is_finite() && highest_level.is_finite() && warning_level < highest_level) {
            return Err(Error::Precondition(format!(
                "flood levels need warning < highest, got {warning_level} and {highest_level}"
            )));
        }
        Ok(Self {
            warning_level,
            highest_level,
        })
    }

    /// Warning at mean + 1 std, emergency at mean + 2 std.
    pub fn from_statistics(mean: f64, std: f64) -> Result<Self> {
        Self::new(mean + std, mean + 2.0 * std)
    }

    pub fn f_sigma(&self) -> f64 {
        self.highest_level - self.warning_level
    }

    pub fn score(&self, max_level: f64) -> f64 {
        if max_level < self.warning_level {
            0.0
        } else if max_level < self.highest_level {
            -4.0 * ((max_level - self.warning_level) / self.f_sigma()).sqrt()
        } else {
            -4.0
        }
    }
}

fn default_retention_scale() -> f64 {
    500.0
}

/// Montreal junction terms (m3/s).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MontrealTerms {
    #[serde(default)]
    pub nature: f64,
    #[serde(default)]
    pub residents: f64,
    #[serde(default = "default_retention_scale")]
    pub scale: f64,
    /// Channel capacity below Montreal; inflow above it is retained.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub st_lawrence_capacity: Option<f64>,
}

impl Default for MontrealTerms {
    fn default() -> Self {
        Self {
            nature: 0.0,
            residents: 0.0,
            scale: default_retention_scale(),
            st_lawrence_capacity: None,
        }
    }
}

impl MontrealTerms {
    /// Junction inflow before any retention.
    pub fn junction_inflow(&self, e_release: f64, ottawa: f64) -> f64 {
        e_release + ottawa + self.nature + self.residents
    }

    /// St. Lawrence flow below Montreal: the junction inflow, capped by the channel capacity.
    pub fn st_lawrence(&self, e_release: f64, ottawa: f64) -> f64 {
        let inflow = self.junction_inflow(e_release, ottawa).max(0.0);
        match self.st_lawrence_capacity {
            Some(cap) => inflow.min(cap),
            None => inflow,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OntarioConstraints {
    /// Demands on the St. Lawrence flow and its fluctuation.
    #[serde(default)]
    pub river: LakeDemand,
    /// Flood levels; derived from cleaned Ontario history when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flood: Option<FloodParams>,
    #[serde(default)]
    pub montreal: MontrealTerms,
}

/// Stakeholder constraints: per-lake demands plus the optional Ontario extension.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StakeholderConstraints {
    #[serde(with = "lake_demands")]
    pub lakes: PerLake<LakeDemand>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ontario: Option<OntarioConstraints>,
}

mod lake_demands {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::LakeDemand;
    use crate::hydronet::{LakeId, PerLake};

    pub fn serialize<S: Serializer>(v: &PerLake<LakeDemand>, s: S) -> Result<S::Ok, S::Error> {
        v.serialize(s)
    }

    /// Lakes left out of the file default to Medium/Medium.
    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<PerLake<LakeDemand>, D::Error> {
        let map: BTreeMap<LakeId, LakeDemand> = BTreeMap::deserialize(d)?;
        Ok(PerLake::from_fn(|l| map.get(&l).copied().unwrap_or_default()))
    }
}

impl StakeholderConstraints {
    pub fn all_medium() -> Self {
        Self::default()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(o) = &self.ontario {
            if let Some(f) = &o.flood {
                FloodParams::new(f.warning_level, f.highest_level)?;
            }
            if !(o.montreal.scale.is_finite() && o.montreal.scale > 0.0) {
                return Err(Error::Config("Montreal retention scale must be > 0".into()));
            }
        }
        Ok(())
    }
}

/// Historical reference statistics for one series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesBaseline {
    /// Multi-year mean per calendar month, January first.
    pub monthly: [f64; 12],
    /// Mean of the monthly baseline (`H*` or `F*`).
    pub mean: f64,
    /// Population standard deviation of the monthly baseline.
    pub sigma: f64,
}

impl SeriesBaseline {
    pub fn from_monthly(monthly: [f64; 12]) -> Self {
        Self {
            monthly,
            mean: mean(&monthly),
            sigma: population_std(&monthly),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Baselines {
    pub lakes: PerLake<SeriesBaseline>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub st_lawrence: Option<SeriesBaseline>,
    /// Flood levels derived from history, used when constraints give none.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flood: Option<FloodParams>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LakeGrade {
    pub g_l: f64,
    pub g_f: f64,
    pub sum: f64,
    pub mean_level: f64,
    pub sigma: f64,
    pub h_star: f64,
    pub sigma_hat: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OntarioGrade {
    pub g_l: f64,
    pub g_f: f64,
    pub g_d: f64,
    pub g_l_river: f64,
    pub g_f_river: f64,
    pub g_m: f64,
    pub total: f64,
    pub max_level: f64,
    pub flow_mean: f64,
    pub flow_sigma: f64,
    pub f_star: f64,
    pub flow_sigma_hat: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradeReport {
    pub lakes: PerLake<LakeGrade>,
    /// Sum of per-lake `G_L + G_F`, in `[0, 40]`.
    pub total: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ontario: Option<OntarioGrade>,
}

impl GradeReport {
    /// All graded components in a fixed order: per-lake `G_L`, `G_F`, then the
    /// Ontario flood, river and retention grades when present.
    pub fn components(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.lakes.0.iter().flat_map(|g| [g.g_l, g.g_f]).collect();
        if let Some(o) = &self.ontario {
            out.extend([o.g_d, o.g_l_river, o.g_f_river, o.g_m]);
        }
        out
    }

    /// Mean `G_L` and `G_F` over the five lakes.
    pub fn lake_means(&self) -> (f64, f64) {
        let gl: Vec<f64> = self.lakes.0.iter().map(|g| g.g_l).collect();
        let gf: Vec<f64> = self.lakes.0.iter().map(|g| g.g_f).collect();
        (mean(&gl), mean(&gf))
    }

    /// Check component ranges and that totals equal the sum of their parts.
    pub fn validate(&self) -> Result<()> {
        let in4 = |x: f64| (0.0..=4.0).contains(&x);
        for (lake, g) in self.lakes.iter() {
            if !in4(g.g_l) || !in4(g.g_f) || (g.sum - (g.g_l + g.g_f)).abs() > 1e-9 {
                return Err(Error::Numerical(format!("lake {lake} grade out of range: {g:?}")));
            }
        }
        let sum: f64 = self.lakes.0.iter().map(|g| g.sum).sum();
        if (sum - self.total).abs() > 1e-9 || !(0.0..=40.0).contains(&self.total) {
            return Err(Error::Numerical(format!("total {} != component sum {sum}", self.total)));
        }
        if let Some(o) = &self.ontario {
            let parts = o.g_l + o.g_f + o.g_d + o.g_l_river + o.g_f_river + o.g_m;
            if !(-4.0..=0.0).contains(&o.g_d)
                || !in4(o.g_l_river)
                || !in4(o.g_f_river)
                || !(-4.0..=0.0).contains(&o.g_m)
                || (parts - o.total).abs() > 1e-9
            {
                return Err(Error::Numerical(format!("Ontario grade inconsistent: {o:?}")));
            }
        }
        Ok(())
    }
}

pub fn grade_lake(levels: &[f64], baseline: &SeriesBaseline, demand: LakeDemand) -> Result<LakeGrade> {
    let g_l = grade_level(levels, baseline.mean, demand.level)?;
    let g_f = grade_fluctuation(levels, baseline.sigma, demand.fluctuation)?;
    Ok(LakeGrade {
        g_l,
        g_f,
        sum: g_l + g_f,
        mean_level: mean(levels),
        sigma: population_std(levels),
        h_star: baseline.mean,
        sigma_hat: baseline.sigma,
    })
}

/// Twelve-month Montreal and St. Lawrence inputs for the Ontario extension.
pub struct OntarioWindow<'a> {
    /// Lake Ontario end-of-month levels.
    pub levels: &'a [f64],
    /// St. Lawrence flows below Montreal.
    pub st_lawrence: &'a [f64],
    /// Montreal retention residuals.
    pub residuals: &'a [f64],
}

/// Network grade over a twelve-month window of end-of-month levels.
pub fn grade_network(
    levels: &PerLake<&[f64]>,
    constraints: &StakeholderConstraints,
    baselines: &Baselines,
    ontario: Option<OntarioWindow<'_>>,
) -> Result<GradeReport> {
    let mut lakes = [None; 5];
    for lake in LakeId::ALL {
        lakes[lake.index()] = Some(grade_lake(levels[lake], &baselines.lakes[lake], constraints.lakes[lake])?);
    }
    let lakes = PerLake(lakes.map(|g| g.expect("graded")));
    let total = lakes.0.iter().map(|g| g.sum).sum();
    let ontario = match (&constraints.ontario, ontario) {
        (Some(oc), Some(w)) => Some(grade_ontario(&lakes[LakeId::Ontario], oc, baselines, &w)?),
        (Some(_), None) => {
            return Err(Error::Precondition("Ontario constraints need St. Lawrence and Montreal inputs".into()))
        }
        (None, _) => None,
    };
    Ok(GradeReport { lakes, total, ontario })
}

fn grade_ontario(
    lake: &LakeGrade,
    oc: &OntarioConstraints,
    baselines: &Baselines,
    w: &OntarioWindow<'_>,
) -> Result<OntarioGrade> {
    let flood = oc
        .flood
        .or(baselines.flood)
        .ok_or_else(|| Error::Precondition("no flood levels configured or derived".into()))?;
    let river = baselines
        .st_lawrence
        .ok_or_else(|| Error::Precondition("no St. Lawrence baseline".into()))?;
    let g_d = grade_flood(w.levels, flood.warning_level, flood.highest_level, flood.f_sigma())?;
    let g_l_river = grade_river_flow(w.st_lawrence, river.mean, oc.river.level)?;
    let g_f_river = grade_river_fluctuation(w.st_lawrence, river.sigma, oc.river.fluctuation)?;
    if w.residuals.is_empty() {
        return Err(Error::Precondition("no Montreal residuals".into()));
    }
    let g_m = w
        .residuals
        .iter()
        .map(|r| grade_montreal(*r, oc.montreal.scale))
        .sum::<Result<f64>>()?
        / w.residuals.len() as f64;
    Ok(OntarioGrade {
        g_l: lake.g_l,
        g_f: lake.g_f,
        g_d,
        g_l_river,
        g_f_river,
        g_m,
        total: lake.g_l + lake.g_f + g_d + g_l_river + g_f_river + g_m,
        max_level: w.levels.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        flow_mean: mean(w.st_lawrence),
        flow_sigma: population_std(w.st_lawrence),
        f_star: river.mean,
        flow_sigma_hat: river.sigma,
    })
}

/// What the optimizer maximizes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveMode {
    /// Network total `sum(G_L + G_F)`.
    #[default]
    Basic,
    /// Lake Ontario total including flood, river and retention grades.
    Ontario,
}

impl ObjectiveMode {
    pub fn score(&self, report: &GradeReport) -> Result<f64> {
        match self {
            ObjectiveMode::Basic => Ok(report.total),
            ObjectiveMode::Ontario => report
                .ontario
                .map(|o| o.total)
                .ok_or_else(|| Error::Config("ontario objective needs an ontario constraints block".into())),
        }
    }
}

/// End-of-month levels and the Montreal inflows of one month.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonthOutcome {
    pub levels: PerLake<f64>,
    /// Lake Ontario release (river e) during the month, m3/s.
    pub e_release: f64,
    pub ottawa: f64,
}

/// Grade the twelve months of `window`.
pub fn grade_outcomes(
    window: &[MonthOutcome],
    constraints: &StakeholderConstraints,
    baselines: &Baselines,
) -> Result<GradeReport> {
    if window.len() != 12 {
        return Err(Error::Precondition(format!("grading needs 12 months, got {}", window.len())));
    }
    let per_lake: PerLake<Vec<f64>> = PerLake::from_fn(|l| window.iter().map(|m| m.levels[l]).collect());
    let refs = PerLake::from_fn(|l| per_lake[l].as_slice());
    match &constraints.ontario {
        None => grade_network(&refs, constraints, baselines, None),
        Some(oc) => {
            let m = &oc.montreal;
            let mut sl = Vec::with_capacity(12);
            let mut residuals = Vec::with_capacity(12);
            for o in window {
                let f = m.st_lawrence(o.e_release, o.ottawa);
                residuals.push(montreal_balance(f, o.ottawa, o.e_release, m.nature, m.residents)?);
                sl.push(f);
            }
            let w = OntarioWindow {
                levels: refs[LakeId::Ontario],
                st_lawrence: &sl,
                residuals: &residuals,
            };
            grade_network(&refs, constraints, baselines, Some(w))
        }
    }
}

/// Outcomes for the months simulated in `trajectory`.
pub fn trajectory_outcomes(trajectory: &Trajectory) -> Vec<MonthOutcome> {
    trajectory.states[1..]
        .iter()
        .map(|s| MonthOutcome {
            levels: s.levels,
            e_release: s.flows[RiverId::StLawrence],
            ottawa: s.flows[RiverId::Ottawa],
        })
        .collect()
}

/// Grade a twelve-month trajectory.
pub fn grade_trajectory(
    trajectory: &Trajectory,
    constraints: &StakeholderConstraints,
    baselines: &Baselines,
) -> Result<GradeReport> {
    if trajectory.horizon() != 12 {
        return Err(Error::Precondition(format!(
            "grading needs a 12-month trajectory, got {}",
            trajectory.horizon()
        )));
    }
    grade_outcomes(&trajectory_outcomes(trajectory), constraints, baselines)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn twelve(v: f64) -> Vec<f64> {
        vec![v; 12]
    }

    #[test]
    fn level_examples() {
        assert_eq!(grade_level(&twelve(180.0), 180.0, Demand::Medium).unwrap(), 4.0);
        // raw 2 + 9 * 0.5 = 6.5, clamped.
        assert_eq!(grade_level(&twelve(180.5), 180.0, Demand::High).unwrap(), 4.0);
        // raw 2 - 9 * 0.5 = -2.5, clamped.
        assert_eq!(grade_level(&twelve(180.5), 180.0, Demand::Low).unwrap(), 0.0);
        assert!((grade_level(&twelve(180.1), 180.0, Demand::High).unwrap() - 2.9).abs() < 1e-9);
        assert!(matches!(grade_level(&[1.0; 11], 1.0, Demand::Medium), Err(Error::Precondition(_))));
    }

    fn with_sigma(sigma: f64) -> Vec<f64> {
        (0..12).map(|i| if i % 2 == 0 { 100.0 + sigma } else { 100.0 - sigma }).collect()
    }

    #[test]
    fn fluctuation_examples() {
        assert!((grade_fluctuation(&with_sigma(0.3), 0.3, Demand::Medium).unwrap() - 4.0).abs() < 1e-9);
        assert!((grade_fluctuation(&with_sigma(0.4), 0.3, Demand::High).unwrap() - 3.2).abs() < 1e-9);
        // raw 2 + 12 * 0.25 = 5, clamped.
        assert_eq!(grade_fluctuation(&with_sigma(0.05), 0.3, Demand::Low).unwrap(), 4.0);
        assert!(grade_fluctuation(&with_sigma(0.1), -0.1, Demand::Low).is_err());
    }

    #[test]
    fn fluctuation_uses_population_deviation() {
        let xs: Vec<f64> = (0..12).map(f64::from).collect();
        let sigma = (143.0_f64 / 12.0).sqrt();
        let g = grade_fluctuation(&xs, sigma + 0.05, Demand::High).unwrap();
        assert!((g - (2.0 - 12.0 * 0.05)).abs() < 1e-9);
    }

    #[test]
    fn flood_examples() {
        let (w, hi) = (75.0, 75.4);
        let fs = hi - w;
        assert_eq!(grade_flood(&twelve(74.9), w, hi, fs).unwrap(), 0.0);
        let mut xs = twelve(74.0);
        xs[5] = w + 0.25 * fs;
        assert!((grade_flood(&xs, w, hi, fs).unwrap() + 2.0).abs() < 1e-12);
        xs[5] = hi;
        assert_eq!(grade_flood(&xs, w, hi, fs).unwrap(), -4.0);
        assert!(grade_flood(&xs, hi, w, fs).is_err());
        assert!(grade_flood(&xs, w, hi, 2.0 * fs).is_err());
    }

    #[test]
    fn river_examples() {
        let f_star = 7000.0;
        assert_eq!(grade_river_flow(&twelve(7000.0), f_star, Demand::Medium).unwrap(), 4.0);
        assert!((grade_river_flow(&twelve(7005.0), f_star, Demand::High).unwrap() - 3.0).abs() < 1e-9);
        assert_eq!(grade_river_flow(&twelve(7020.0), f_star, Demand::Low).unwrap(), 0.0);

        let alt = |s: f64| (0..12).map(|i| if i % 2 == 0 { 7000.0 + s } else { 7000.0 - s }).collect::<Vec<_>>();
        assert!((grade_river_fluctuation(&alt(300.0), 300.0, Demand::Medium).unwrap() - 4.0).abs() < 1e-9);
        assert!((grade_river_fluctuation(&alt(460.0), 300.0, Demand::High).unwrap() - 4.0).abs() < 1e-12);
        // raw 2 - 240/80 = -1, clamped.
        assert_eq!(grade_river_fluctuation(&alt(540.0), 300.0, Demand::Low).unwrap(), 0.0);
    }

    #[test]
    fn montreal_examples() {
        assert_eq!(grade_montreal(0.0, 500.0).unwrap(), 0.0);
        assert_eq!(grade_montreal(500.0, 500.0).unwrap(), -1.0);
        assert_eq!(grade_montreal(1500.0, 500.0).unwrap(), -4.0);
        assert!(grade_montreal(1.0, 0.0).is_err());
    }

    #[test]
    fn constraints_file_defaults_missing_lakes() {
        let c = StakeholderConstraints::from_json(
            r#"{"lakes": {"A": {"level_demand": "high"}, "E": {"fluctuation_demand": "low"}}}"#,
        )
        .unwrap();
        assert_eq!(c.lakes[LakeId::Superior].level, Demand::High);
        assert_eq!(c.lakes[LakeId::Superior].fluctuation, Demand::Medium);
        assert_eq!(c.lakes[LakeId::Erie], LakeDemand::default());
        assert_eq!(c.lakes[LakeId::Ontario].fluctuation, Demand::Low);
        assert!(c.ontario.is_none());

        let bad = r#"{"lakes": {}, "ontario": {"flood": {"warning_level": 75.5, "highest_level": 75.0}}}"#;
        assert!(StakeholderConstraints::from_json(bad).is_err());
    }

    #[test]
    fn st_lawrence_capacity_retains_excess() {
        let m = MontrealTerms {
            nature: 300.0,
            residents: 200.0,
            scale: 500.0,
            st_lawrence_capacity: Some(9_000.0),
        };
        assert_eq!(m.st_lawrence(6_000.0, 2_000.0), 8_500.0);
        assert_eq!(m.st_lawrence(7_000.0, 2_500.0), 9_000.0);
    }
}
