//! Simulated-annealing maximizer over a bounded box of control values.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnealConfig {
    pub initial_temperature: f64,
    pub min_temperature: f64,
    pub cooling_rate: f64,
    /// Proposal half-width as a fraction of each coordinate's bound width.
    pub step: f64,
    pub iterations_per_temperature: usize,
    /// Independent chains; chain 0 starts from the given point.
    pub restarts: usize,
    pub seed: u64,
    /// Keep every proposal in the trace. Off by default, it is large.
    pub record_moves: bool,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        Self {
            initial_temperature: 1.0,
            min_temperature: 1e-4,
            cooling_rate: 0.995,
            step: 0.05,
            iterations_per_temperature: 20,
            restarts: 4,
            seed: 0,
            record_moves: false,
        }
    }
}

impl AnnealConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.min_temperature > 0.0
            && self.min_temperature < self.initial_temperature
            && self.initial_temperature.is_finite()
            && self.cooling_rate > 0.0
            && self.cooling_rate < 1.0
            && self.step >= 0.0
            && self.step <= 1.0
            && self.iterations_per_temperature >= 1
            && self.restarts >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid anneal config: {self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: u64,
    pub temperature: f64,
    pub current: f64,
    pub best: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoveRecord {
    pub from_score: f64,
    pub to_score: f64,
    pub accepted: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AnnealTrace {
    /// One point per temperature level, taken after its iterations.
    pub points: Vec<TracePoint>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub moves: Vec<MoveRecord>,
    pub best: Vec<f64>,
    pub best_score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnealResult {
    pub best: Vec<f64>,
    pub best_score: f64,
    /// Index of the chain that found `best`.
    pub chain: usize,
    pub traces: Vec<AnnealTrace>,
}

fn check_box(x: &[f64], lo: &[f64], hi: &[f64]) -> Result<()> {
    if x.len() != lo.len() || x.len() != hi.len() {
        return Err(Error::Precondition(format!(
            "plan has {} coordinates but bounds have {} and {}",
            x.len(),
            lo.len(),
            hi.len()
        )));
    }
    for (i, ((&v, &l), &h)) in x.iter().zip(lo).zip(hi).enumerate() {
        if !(l <= h) {
            return Err(Error::Precondition(format!("coordinate {i}: empty bounds [{l}, {h}]")));
        }
        if !(l..=h).contains(&v) {
            return Err(Error::Precondition(format!("coordinate {i}: {v} outside [{l}, {h}]")));
        }
    }
    Ok(())
}

/// Perturb one uniformly chosen coordinate by `U(-step, step) * width`, then clip.
pub fn neighbor<R: Rng + ?Sized>(x: &[f64], lo: &[f64], hi: &[f64], step: f64, rng: &mut R) -> Vec<f64> {
    let mut out = x.to_vec();
    if x.is_empty() {
        return out;
    }
    let i = rng.random_range(0..x.len());
    let u: f64 = rng.random_range(-1.0..=1.0);
    out[i] = (x[i] + u * step * (hi[i] - lo[i])).clamp(lo[i], hi[i]);
    out
}

fn evaluate<F>(objective: &F, x: &[f64]) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let score = objective(x)?;
    if score.is_finite() {
        Ok(score)
    } else {
        Err(Error::Optimization {
            score,
            plan: x.to_vec(),
        })
    }
}

/// One Metropolis chain with geometric cooling, run until `T <= T_min`.
pub fn anneal_chain<F, R>(
    objective: &F,
    initial: &[f64],
    lo: &[f64],
    hi: &[f64],
    config: &AnnealConfig,
    rng: &mut R,
) -> Result<AnnealTrace>
where
    F: Fn(&[f64]) -> Result<f64>,
    R: Rng + ?Sized,
{
    config.validate()?;
    check_box(initial, lo, hi)?;
    let mut current = initial.to_vec();
    let mut current_score = evaluate(objective, &current)?;
    let mut trace = AnnealTrace {
        best: current.clone(),
        best_score: current_score,
        ..Default::default()
    };
    let mut t = config.initial_temperature;
    let mut iteration = 0u64;
    while t > config.min_temperature {
        for _ in 0..config.iterations_per_temperature {
            iteration += 1;
            let candidate = neighbor(&current, lo, hi, config.step, rng);
            let score = evaluate(objective, &candidate)?;
            let delta = score - current_score;
            let accepted = delta > 0.0 || rng.random::<f64>() < (delta / t).exp();
            if config.record_moves {
                trace.moves.push(MoveRecord {
                    from_score: current_score,
                    to_score: score,
                    accepted,
                });
            }
            if accepted {
                current = candidate;
                current_score = score;
                if current_score > trace.best_score {
                    trace.best_score = current_score;
                    trace.best.clone_from(&current);
                }
            }
        }
        trace.points.push(TracePoint {
            iteration,
            temperature: t,
            current: current_score,
            best: trace.best_score,
        });
        t *= config.cooling_rate;
    }
    Ok(trace)
}

/// Maximize `objective` over the box with `config.restarts` independent chains
/// run in parallel. Chain `k` draws from stream `k` of the seeded generator;
/// chains after the first start from a uniform random point.
pub fn try_anneal<F>(objective: &F, initial: &[f64], lo: &[f64], hi: &[f64], config: &AnnealConfig) -> Result<AnnealResult>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    config.validate()?;
    check_box(initial, lo, hi)?;
    let traces = (0..config.restarts)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(k as u64);
            let start: Vec<f64> = if k == 0 {
                initial.to_vec()
            } else {
                lo.iter()
                    .zip(hi)
                    .map(|(&l, &h)| if h > l { rng.random_range(l..=h) } else { l })
                    .collect()
            };
            anneal_chain(objective, &start, lo, hi, config, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut chain = 0;
    for (k, tr) in traces.iter().enumerate() {
        if tr.best_score > traces[chain].best_score {
            chain = k;
        }
    }
    Ok(AnnealResult {
        best: traces[chain].best.clone(),
        best_score: traces[chain].best_score,
        chain,
        traces,
    })
}

/// [`try_anneal`] for infallible objectives.
pub fn anneal<F>(objective: &F, initial: &[f64], lo: &[f64], hi: &[f64], config: &AnnealConfig) -> Result<AnnealResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    try_anneal(&|x: &[f64]| Ok(objective(x)), initial, lo, hi, config)
}
