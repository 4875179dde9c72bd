//! Seeded stochastic campaign generator.
//!
//! Each infected member independently decides to forward with probability
//! `p`; a decider draws a Poisson(λ) number of contact attempts, each
//! targeting a uniformly random member of the population (including the
//! already infected — those attempts are recorded as events but infect no
//! one, which the ingestion pipeline must absorb). Transmission delays are
//! exponential with configurable mean, rounded to whole seconds with a
//! one-second floor so timestamps along any chain strictly increase.
//!
//! Events are processed through a time-ordered queue, so the simulator's
//! own notion of who infected whom coincides with what `build_forest` will
//! reconstruct from the emitted log.
//!
//! All randomness comes from one ChaCha12 stream (`rand_chacha` 0.9) seeded
//! with `rng_seed`: the emitted log is a pure function of [`SimParams`].

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::io::Write;

use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Exp, Poisson};
use rayon::prelude::*;
use thiserror::Error;

use crate::event::{EventLog, EventRecord};
use crate::forest::{build_forest, OrphanPolicy};
use crate::model::{self, ModelParams};
use crate::series::generation_counts;
use crate::util::run_parallel;

/// RNG algorithm recorded in emitted logs, pinned for reproducibility.
pub const RNG_ALGORITHM: &str = "ChaCha12 (rand_chacha 0.9)";

/// Simulation parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimParams {
    /// Forwarding probability per infected member.
    pub p: f64,
    /// Mean contact attempts per forwarding member.
    pub lambda: f64,
    /// Population size; targets are drawn uniformly from it.
    pub population: u64,
    /// Generation-1 members, drawn from the population.
    pub seeds: u64,
    /// Mean transmission delay in seconds.
    pub mean_delay_secs: f64,
    /// Members of this generation no longer forward.
    pub max_generations: u32,
    pub rng_seed: u64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            p: 0.5,
            lambda: 2.0,
            population: 1000,
            seeds: 1,
            mean_delay_secs: 3600.0,
            max_generations: 100,
            rng_seed: 42,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("invalid simulation parameters: {0}")]
    InvalidParams(String),
}

impl SimParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidParams(msg));
        if !(0.0..=1.0).contains(&self.p) {
            return bad(format!("p = {} outside [0, 1]", self.p));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda = {} must be >= 0", self.lambda));
        }
        if self.population < 1 {
            return bad("population must be at least 1".into());
        }
        if self.seeds < 1 || self.seeds > self.population {
            return bad(format!(
                "seeds = {} must be in 1..=population ({})",
                self.seeds, self.population
            ));
        }
        if !(self.mean_delay_secs > 0.0 && self.mean_delay_secs.is_finite()) {
            return bad(format!(
                "mean_delay_secs = {} must be positive",
                self.mean_delay_secs
            ));
        }
        if self.max_generations < 1 {
            return bad("max_generations must be at least 1".into());
        }
        Ok(())
    }

    /// Comment lines recording every parameter, written into emitted logs.
    pub fn comment_lines(&self) -> Vec<String> {
        vec![
            format!(
                "simulated campaign: p={} lambda={} population={} seeds={} \
                 mean_delay_secs={} max_generations={} rng_seed={}",
                self.p,
                self.lambda,
                self.population,
                self.seeds,
                self.mean_delay_secs,
                self.max_generations,
                self.rng_seed
            ),
            format!("rng: {RNG_ALGORITHM}"),
        ]
    }
}

fn actor_id(member: u64) -> String {
    format!("u{member:06}")
}

#[derive(PartialEq, Eq, PartialOrd, Ord)]
struct Pending {
    at: i64,
    seq: u64,
    sender: u64,
    target: u64,
}

/// Runs one campaign and returns its event log (seed records at time zero,
/// then every attempt in chronological order).
pub fn simulate(params: &SimParams) -> Result<EventLog, SimError> {
    params.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(params.rng_seed);
    let poisson =
        (params.lambda > 0.0).then(|| Poisson::new(params.lambda).expect("validated lambda"));
    let delay_dist = Exp::new(1.0 / params.mean_delay_secs).expect("validated mean delay");

    let mut records = Vec::new();
    let mut generation: HashMap<u64, u32> = HashMap::new();
    let mut queue: BinaryHeap<Reverse<Pending>> = BinaryHeap::new();
    let mut seq = 0u64;

    let schedule = |member: u64,
                    gen: u32,
                    now: i64,
                    rng: &mut ChaCha12Rng,
                    queue: &mut BinaryHeap<Reverse<Pending>>,
                    seq: &mut u64| {
        if gen >= params.max_generations || !rng.random_bool(params.p) {
            return;
        }
        let attempts = poisson.as_ref().map_or(0, |d| d.sample(rng) as u64);
        for _ in 0..attempts {
            let target = rng.random_range(0..params.population);
            let delay = (delay_dist.sample(rng).round() as i64).max(1);
            queue.push(Reverse(Pending {
                at: now + delay,
                seq: *seq,
                sender: member,
                target,
            }));
            *seq += 1;
        }
    };

    for member in 0..params.seeds {
        records.push(EventRecord {
            sender: None,
            recipient: actor_id(member),
            timestamp: 0,
        });
        generation.insert(member, 1);
    }
    for member in 0..params.seeds {
        schedule(member, 1, 0, &mut rng, &mut queue, &mut seq);
    }

    while let Some(Reverse(event)) = queue.pop() {
        records.push(EventRecord {
            sender: Some(actor_id(event.sender)),
            recipient: actor_id(event.target),
            timestamp: event.at,
        });
        if !generation.contains_key(&event.target) {
            let gen = generation[&event.sender] + 1;
            generation.insert(event.target, gen);
            schedule(event.target, gen, event.at, &mut rng, &mut queue, &mut seq);
        }
    }
    Ok(EventLog::new(records))
}

/// One row of the simulator-versus-model comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonRow {
    pub generation: usize,
    /// Mean infected per generation over all runs.
    pub mean_infected: f64,
    /// Deterministic projection for the same parameters.
    pub expected_infected: f64,
    /// `|mean − expected| / expected`; `None` where the expectation is 0.
    pub rel_deviation: Option<f64>,
}

/// Runs the simulator `runs` times (seeds `rng_seed + i`), pipes every log
/// through forest construction and generation counting, and compares mean
/// per-generation infections against the deterministic projection.
pub fn empirical_vs_expected(
    params: &SimParams,
    runs: u32,
) -> Result<Vec<ComparisonRow>, SimError> {
    params.validate()?;
    assert!(runs >= 1, "need at least one run");
    let horizon = params.max_generations as usize;

    let sums: Vec<u64> = run_parallel(|| {
        (0..runs)
            .into_par_iter()
            .map(|i| {
                let run_params = SimParams {
                    rng_seed: params.rng_seed.wrapping_add(u64::from(i)),
                    ..*params
                };
                let log = simulate(&run_params).expect("validated params");
                let forest =
                    build_forest(&log, OrphanPolicy::Reject).expect("simulated logs have seeds");
                let series = generation_counts(&forest).expect("non-empty forest");
                let mut counts = vec![0u64; horizon];
                for g in 1..=series.generations().min(horizon) {
                    counts[g - 1] = series.infected(g);
                }
                counts
            })
            .reduce(
                || vec![0u64; horizon],
                |mut acc, counts| {
                    for (a, c) in acc.iter_mut().zip(counts) {
                        *a += c;
                    }
                    acc
                },
            )
    });

    let model_params = ModelParams::new(params.p, params.lambda, params.population as f64)
        .map_err(|e| SimError::InvalidParams(e.to_string()))?;
    // Tiny eps: the expectation column should not truncate ahead of the data.
    let expected = model::project(&model_params, params.seeds, horizon, 1e-9);

    let last_active = sums.iter().rposition(|&s| s > 0).map_or(1, |i| i + 1);
    let rows = last_active.max(expected.len());
    Ok((1..=rows)
        .map(|g| {
            let mean = sums[g - 1] as f64 / f64::from(runs);
            let exp = if g <= expected.len() {
                expected.infected(g)
            } else {
                0.0
            };
            let rel = (exp > 0.0).then(|| (mean - exp).abs() / exp);
            ComparisonRow {
                generation: g,
                mean_infected: mean,
                expected_infected: exp,
                rel_deviation: rel,
            }
        })
        .collect())
}

/// Writes `generation,mean_infected,expected_infected,rel_deviation`.
pub fn write_comparison_csv<W: Write>(mut out: W, rows: &[ComparisonRow]) -> std::io::Result<()> {
    writeln!(
        out,
        "generation,mean_infected,expected_infected,rel_deviation"
    )?;
    for row in rows {
        let rel = row
            .rel_deviation
            .map_or(String::new(), |r| format!("{r:.6}"));
        writeln!(
            out,
            "{},{:.6},{:.6},{rel}",
            row.generation, row.mean_infected, row.expected_infected
        )?;
    }
    Ok(())
}

/// Draws valid random parameters for property tests: sub- through
/// super-critical regimes over small populations.
pub fn random_params(seed: u64) -> SimParams {
    let mut rng = SmallRng::seed_from_u64(seed);
    let population = rng.random_range(20..2000);
    SimParams {
        p: rng.random_range(0.0..=1.0),
        lambda: rng.random_range(0.0..4.0),
        population,
        seeds: rng.random_range(1..=5.min(population)),
        mean_delay_secs: rng.random_range(60.0..86_400.0),
        max_generations: rng.random_range(3..60),
        rng_seed: seed,
    }
}
