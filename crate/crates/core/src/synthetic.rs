//! Seeded synthetic scenarios: seasonal lake levels, rating-curve flows with
//! Gaussian noise, a regulated Ontario outflow and an exogenous Ottawa.
//!
//! Levels are generated first and flows follow from them, so the natural
//! indicators recovered from the record absorb whatever the flows leave
//! unbalanced. The evaluation year carries a wet spring on Superior,
//! Michigan-Huron and Ontario plus an Ottawa flood.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, SeriesKey};
use crate::error::{Error, Result};
use crate::grading::{Demand, LakeDemand, MontrealTerms, OntarioConstraints, StakeholderConstraints};
use crate::hydronet::{default_topology, river_flow, FlowCoefficients, LakeId, NetworkTopology, PerLake, RiverId};
use crate::series::{MonthlySeries, YearMonth};

/// Effective St. Clair area that keeps its explicit monthly update stable.
pub const EFFECTIVE_ST_CLAIR_AREA: f64 = 5e9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub start: YearMonth,
    pub history_months: usize,
    pub evaluation_months: usize,
    /// Standard deviation of the flow noise (m3/s).
    pub flow_noise: f64,
    pub st_clair_area: f64,
    /// Add the wet-spring anomaly to the evaluation period.
    pub wet_spring: bool,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            seed: 2017,
            start: YearMonth { year: 2006, month: 1 },
            history_months: 132,
            evaluation_months: 12,
            flow_noise: 50.0,
            st_clair_area: EFFECTIVE_ST_CLAIR_AREA,
            wet_spring: true,
        }
    }
}

/// Mean level (m) of each lake; for A-D this is where the reference rating
/// curve delivers the nominal mean flow.
pub const MEAN_LEVELS: [f64; 5] = [183.16, 175.18, 176.26, 174.06, 74.8];
/// Seasonal half-range of each lake level (m), peaking in late summer.
const SEASONAL_AMPLITUDE: [f64; 5] = [0.6, 0.6, 0.55, 0.55, 0.45];
const SEASONAL_PEAK_MONTH0: f64 = 7.0;
/// Interannual AR(1) drift on levels.
const DRIFT_PERSISTENCE: f64 = 0.8;
const DRIFT_INNOVATION: f64 = 0.02;

/// Ontario release rule: nominal flow plus a gain on the level excess.
const E_NOMINAL: f64 = 7_000.0;
const E_LEVEL_GAIN: f64 = 2_000.0;
const OTTAWA_MEAN: f64 = 2_000.0;
const OTTAWA_SEASONAL: f64 = 900.0;

/// Extra level (m) reached by the end of the wet spring, per lake.
const WET_SPRING_RISE: [f64; 5] = [0.15, 0.25, 0.3, 0.3, 0.8];
const OTTAWA_FLOOD: f64 = 3_500.0;

/// Fraction of the wet-spring rise accumulated by evaluation month `m0`
/// (calendar month, zero-based): ramps through March-June and stays.
fn wet_ramp(m0: usize) -> f64 {
    match m0 {
        0 | 1 => 0.0,
        2..=5 => (m0 - 1) as f64 / 4.0,
        _ => 1.0,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticScenario {
    pub config: SyntheticConfig,
    pub history: Dataset,
    pub evaluation: Dataset,
    pub topology: NetworkTopology,
    pub constraints: StakeholderConstraints,
    /// Rating curves the flows were generated from.
    pub coefficients: FlowCoefficients,
}

/// Topology of the synthetic network: default areas except the effective
/// St. Clair area, dams on a and e with bounds left to the scenario builder.
pub fn synthetic_topology(st_clair_area: f64) -> NetworkTopology {
    let mut t = default_topology();
    t.lakes[LakeId::StClair].area_m2 = st_clair_area;
    for r in [RiverId::StMarys, RiverId::StLawrence] {
        t.edges[r].bounds = None;
    }
    t
}

/// Mixed demands: shipping wants Superior high, Erie shoreline owners want
/// a steady lake, everything else has no preference.
pub fn synthetic_constraints() -> StakeholderConstraints {
    let mut c = StakeholderConstraints::all_medium();
    c.lakes[LakeId::Superior] = LakeDemand {
        level: Demand::High,
        fluctuation: Demand::Medium,
    };
    c.lakes[LakeId::Erie] = LakeDemand {
        level: Demand::Medium,
        fluctuation: Demand::Low,
    };
    c.ontario = Some(OntarioConstraints {
        river: LakeDemand::default(),
        flood: None,
        montreal: MontrealTerms {
            nature: 300.0,
            residents: 200.0,
            scale: 500.0,
            st_lawrence_capacity: Some(14_000.0),
        },
    });
    c
}

pub fn generate(config: &SyntheticConfig) -> Result<SyntheticScenario> {
    if config.history_months < 24 || config.evaluation_months == 0 {
        return Err(Error::Config("synthetic data needs >= 24 history months and >= 1 evaluation month".into()));
    }
    if !(config.flow_noise >= 0.0 && config.st_clair_area > 0.0) {
        return Err(Error::Config("flow noise must be >= 0 and the St. Clair area > 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noise = Normal::new(0.0, config.flow_noise).map_err(|e| Error::Config(e.to_string()))?;
    let drift_noise = Normal::new(0.0, DRIFT_INNOVATION).expect("valid sigma");
    let coefficients = FlowCoefficients::reference();
    let total = config.history_months + config.evaluation_months;

    // levels[t] for t = 0..=total; index 0 is the month before the record.
    let mut drift = [0.0; 5];
    let mut levels: Vec<PerLake<f64>> = Vec::with_capacity(total + 1);
    for t in 0..=total {
        let ym = config.start.add_months(t as i64 - 1);
        let m0 = ym.month0();
        let season = (2.0 * PI * (m0 as f64 - SEASONAL_PEAK_MONTH0) / 12.0).cos();
        let wet = if config.wet_spring && t > config.history_months {
            wet_ramp(m0)
        } else {
            0.0
        };
        for d in drift.iter_mut() {
            *d = DRIFT_PERSISTENCE * *d + drift_noise.sample(&mut rng);
        }
        levels.push(PerLake::from_fn(|l| {
            let k = l.index();
            MEAN_LEVELS[k] + SEASONAL_AMPLITUDE[k] * season + drift[k] + wet * WET_SPRING_RISE[k]
        }));
    }

    let mut flows: Vec<[f64; 6]> = Vec::with_capacity(total);
    for t in 1..=total {
        let prev = &levels[t - 1];
        let ym = config.start.add_months(t as i64 - 1);
        let mut f = [0.0; 6];
        for r in RiverId::RATED {
            let src = match r {
                RiverId::StMarys => LakeId::Superior,
                RiverId::StClair => LakeId::MichiganHuron,
                RiverId::Detroit => LakeId::StClair,
                _ => LakeId::Erie,
            };
            f[r.index()] = (river_flow(prev[src], coefficients.get(r)?)? + noise.sample(&mut rng)).max(0.0);
        }
        f[RiverId::StLawrence.index()] =
            (E_NOMINAL + E_LEVEL_GAIN * (prev[LakeId::Ontario] - MEAN_LEVELS[4]) + noise.sample(&mut rng)).max(0.0);
        let season = (2.0 * PI * (ym.month0() as f64 - 4.0) / 12.0).cos();
        let flood = if config.wet_spring && t > config.history_months && (3..=4).contains(&ym.month0()) {
            OTTAWA_FLOOD
        } else {
            0.0
        };
        f[RiverId::Ottawa.index()] = (OTTAWA_MEAN + OTTAWA_SEASONAL * season + flood + noise.sample(&mut rng)).max(0.0);
        flows.push(f);
    }

    let dataset = |from: usize, len: usize| {
        let start = config.start.add_months(from as i64);
        let mut d = Dataset::new();
        for lake in LakeId::ALL {
            let v = (from..from + len).map(|t| levels[t + 1][lake]).collect();
            d.insert(SeriesKey::Level(lake), MonthlySeries::new(start, v));
        }
        for river in RiverId::ALL {
            let v = (from..from + len).map(|t| flows[t][river.index()]).collect();
            d.insert(SeriesKey::Flow(river), MonthlySeries::new(start, v));
        }
        d
    };

    Ok(SyntheticScenario {
        config: config.clone(),
        history: dataset(0, config.history_months),
        evaluation: dataset(config.history_months, config.evaluation_months),
        topology: synthetic_topology(config.st_clair_area),
        constraints: synthetic_constraints(),
        coefficients,
    })
}

pub const HISTORY_FILE: &str = "history.csv";
pub const EVALUATION_FILE: &str = "evaluation.csv";
pub const TOPOLOGY_FILE: &str = "topology.json";
pub const CONSTRAINTS_FILE: &str = "constraints.json";

impl SyntheticScenario {
    /// Write the data, topology and constraints files into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let paths: Vec<PathBuf> = [HISTORY_FILE, EVALUATION_FILE, TOPOLOGY_FILE, CONSTRAINTS_FILE]
            .iter()
            .map(|f| dir.join(f))
            .collect();
        self.history.write_csv(std::fs::File::create(&paths[0])?)?;
        self.evaluation.write_csv(std::fs::File::create(&paths[1])?)?;
        std::fs::write(&paths[2], self.topology.to_json() + "\n")?;
        std::fs::write(&paths[3], serde_json::to_string_pretty(&self.constraints)? + "\n")?;
        Ok(paths)
    }
}
