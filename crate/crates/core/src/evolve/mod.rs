//! Multi-objective neuroevolution of network weights.
//!
//! One generation: evaluate, extract the rank-0 elites, fill the rest of the
//! population with tournament winners recombined by uniform crossover and
//! perturbed by clipped Gaussian noise. [`Trainer`] drives the loop and keeps
//! an all-time Pareto archive.

mod operators;
mod train;

use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fitness::{eval_fitness, to_minimization, EvalContext, FitnessParams, FitnessVector, ObjectiveDirections};
use crate::neuralnet::{Bounds, Network, NetworkInput, NetworkTopology, SolutionVector};
use crate::pareto::{hypervolume, non_dominated_sort, ObjectivePoint, RankedPopulation};
use crate::simworld::EpisodeRecord;
use crate::util::KahanSum;
use crate::{Error, Result};

pub use operators::{mutate, tournament_select, uniform_crossover};
pub use train::{
    latest_checkpoint, load_checkpoint, train, write_stats_csv, ArchiveEntry, LoadedCheckpoint,
    ParetoArchive, TrainOutcome, Trainer,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolutionConfig {
    /// Population size `K`.
    pub population: usize,
    pub generations: usize,
    /// Probability that an offspring pair is produced by crossover.
    pub p_cross: f64,
    /// Probability that an offspring is mutated, and per-gene probability
    /// inside the mutation.
    pub p_mut: f64,
    pub noise_std: f64,
    /// Perturbations are clipped to `[-noise_clip, noise_clip]`.
    pub noise_clip: f64,
    /// Defaults to `population / 4`.
    pub elite_capacity: Option<usize>,
    pub tournament_size: usize,
    pub seed: u64,
    pub bounds: Bounds,
    /// Episodes per fitness evaluation.
    pub batch_size: usize,
    /// Draw a fresh training batch every generation instead of reusing one.
    pub rotate_batch: bool,
    pub checkpoint_every: usize,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            population: 50,
            generations: 100,
            p_cross: 0.5,
            p_mut: 0.5,
            noise_std: 0.1,
            noise_clip: 3.0,
            elite_capacity: None,
            tournament_size: 2,
            seed: 0,
            bounds: Bounds::default(),
            batch_size: 16,
            rotate_batch: false,
            checkpoint_every: 10,
        }
    }
}

impl EvolutionConfig {
    pub fn elite_capacity(&self) -> usize {
        self.elite_capacity.unwrap_or(self.population / 4)
    }

    pub fn validate(&self) -> Result<()> {
        if self.population < 4 {
            return Err(Error::domain("population must be at least 4"));
        }
        for (name, p) in [("p_cross", self.p_cross), ("p_mut", self.p_mut)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::domain(format!("{name} must lie in [0, 1]")));
            }
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::domain("noise_std must be finite and non-negative"));
        }
        if !(self.noise_clip > 0.0) {
            return Err(Error::domain("noise_clip must be positive"));
        }
        if self.elite_capacity() >= self.population {
            return Err(Error::domain("elite_capacity must be smaller than the population"));
        }
        if self.tournament_size != 2 {
            return Err(Error::domain("only binary tournaments are supported"));
        }
        if self.batch_size == 0 || self.checkpoint_every == 0 {
            return Err(Error::domain("batch_size and checkpoint_every must be positive"));
        }
        Bounds::new(self.bounds.lower, self.bounds.upper)?;
        Ok(())
    }
}

/// Result of scoring one genome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub fitness: FitnessVector,
    pub objective: ObjectivePoint,
    /// The network produced a non-finite output and `fitness` is the sentinel.
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub theta: SolutionVector,
    pub evaluation: Option<Evaluation>,
}

impl Individual {
    pub fn new(theta: SolutionVector) -> Self {
        Self {
            theta,
            evaluation: None,
        }
    }

    pub fn fitness(&self) -> Option<&FitnessVector> {
        self.evaluation.as_ref().map(|e| &e.fitness)
    }

    pub fn objective(&self) -> Option<&ObjectivePoint> {
        self.evaluation.as_ref().map(|e| &e.objective)
    }
}

/// Pre-encoded episodes plus everything needed to score predictions.
#[derive(Debug, Clone)]
pub struct EvalBatch {
    inputs: Vec<NetworkInput>,
    contexts: Vec<EvalContext>,
    params: FitnessParams,
}

impl EvalBatch {
    /// Predictions are ego-relative, so each episode is scored from the
    /// origin with the ego heading at prediction time.
    pub fn new(episodes: &[EpisodeRecord], v_min: f64, v_max: f64) -> Result<Self> {
        let first = episodes
            .first()
            .ok_or_else(|| Error::domain("evaluation batch is empty"))?;
        let mut inputs = Vec::with_capacity(episodes.len());
        let mut contexts = Vec::with_capacity(episodes.len());
        for ep in episodes {
            if ep.dt != first.dt {
                return Err(Error::domain("episodes disagree on the set-point period"));
            }
            inputs.push(NetworkInput::from_grids(&ep.grids, ep.dest_rel())?);
            contexts.push(EvalContext::ego_relative(ep.dest_rel(), ep.current().heading));
        }
        Ok(Self {
            inputs,
            contexts,
            params: FitnessParams {
                dt: first.dt,
                v_min,
                v_max,
            },
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// The episodes at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::domain("evaluation batch is empty"));
        }
        if let Some(&i) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::domain(format!("episode index {i} out of range")));
        }
        Ok(Self {
            inputs: indices.iter().map(|&i| self.inputs[i].clone()).collect(),
            contexts: indices.iter().map(|&i| self.contexts[i]).collect(),
            params: self.params,
        })
    }

    pub fn params(&self) -> &FitnessParams {
        &self.params
    }
}

/// Mean fitness of one genome over the batch, or `None` if any prediction
/// was non-finite.
pub fn evaluate_theta(
    topology: &NetworkTopology,
    theta: &SolutionVector,
    batch: &EvalBatch,
) -> Result<Option<FitnessVector>> {
    let net = Network::new(topology, theta)?;
    let mut scores = Vec::with_capacity(batch.len());
    for (input, ctx) in batch.inputs.iter().zip(&batch.contexts) {
        let traj = net.forward(input)?;
        if !traj.is_finite() {
            return Ok(None);
        }
        scores.push(eval_fitness(&traj, ctx, &batch.params)?);
    }
    Ok(FitnessVector::mean(&scores))
}

/// Scores every unevaluated individual (in parallel) and returns how many
/// failed. Failed individuals get [`FitnessVector::worst_case`] of the
/// successful ones in this call and in the already evaluated members.
pub fn evaluate_population(
    pop: &mut [Individual],
    topology: &NetworkTopology,
    batch: &EvalBatch,
    dirs: &ObjectiveDirections,
) -> Result<usize> {
    let expected = topology.param_count()?;
    for ind in pop.iter() {
        Error::check_len("genome", expected, ind.theta.len())?;
    }
    let pending: Vec<usize> = (0..pop.len()).filter(|&i| pop[i].evaluation.is_none()).collect();
    let results = pending
        .par_iter()
        .map(|&i| evaluate_theta(topology, &pop[i].theta, batch))
        .collect::<Result<Vec<_>>>()?;

    let observed: Vec<FitnessVector> = pop
        .iter()
        .filter_map(|ind| ind.evaluation.as_ref().filter(|e| !e.failed).map(|e| e.fitness))
        .chain(results.iter().flatten().copied())
        .collect();
    let sentinel = FitnessVector::worst_case(&observed);

    let mut failed = 0;
    for (i, r) in pending.into_iter().zip(results) {
        let (fitness, is_failed) = match r {
            Some(f) => (f, false),
            None => {
                failed += 1;
                (sentinel, true)
            }
        };
        pop[i].evaluation = Some(Evaluation {
            objective: to_minimization(&fitness, dirs)?,
            fitness,
            failed: is_failed,
        });
    }
    Ok(failed)
}

/// Per-generation monitoring record. Wall time is neither serialized nor
/// compared, so saved stats are reproducible.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub mean: [f64; 3],
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub front_size: usize,
    pub hypervolume: f64,
    pub failed_evaluations: usize,
    #[serde(skip)]
    pub wall_time: Duration,
}

fn objectives(pop: &[Individual]) -> Result<Vec<ObjectivePoint>> {
    pop.iter()
        .map(|ind| {
            ind.objective()
                .cloned()
                .ok_or_else(|| Error::domain("population contains unevaluated individuals"))
        })
        .collect()
}

/// Statistics of an evaluated population. The hypervolume counts only the
/// front members that dominate `hv_reference`.
pub fn population_stats(
    generation: usize,
    pop: &[Individual],
    ranked: &RankedPopulation,
    hv_reference: &ObjectivePoint,
    failed_evaluations: usize,
) -> Result<GenerationStats> {
    let mut sum = [KahanSum::default(); 3];
    let mut min = [f64::INFINITY; 3];
    let mut max = [f64::NEG_INFINITY; 3];
    for ind in pop {
        let f = ind
            .fitness()
            .ok_or_else(|| Error::domain("population contains unevaluated individuals"))?
            .as_array();
        for k in 0..3 {
            sum[k].add(f[k]);
            min[k] = min[k].min(f[k]);
            max[k] = max[k].max(f[k]);
        }
    }
    let front: Vec<ObjectivePoint> = ranked.fronts[0]
        .iter()
        .map(|&i| ranked.points[i].clone())
        .filter(|p| p.values.iter().zip(&hv_reference.values).all(|(a, r)| a < r))
        .collect();
    Ok(GenerationStats {
        generation,
        mean: sum.map(|s| s.value() / pop.len() as f64),
        min,
        max,
        front_size: ranked.fronts[0].len(),
        hypervolume: hypervolume(&front, hv_reference)?,
        failed_evaluations,
        wall_time: Duration::ZERO,
    })
}

impl PartialEq for GenerationStats {
    fn eq(&self, other: &Self) -> bool {
        self.generation == other.generation
            && self.mean == other.mean
            && self.min == other.min
            && self.max == other.max
            && self.front_size == other.front_size
            && self.hypervolume == other.hypervolume
            && self.failed_evaluations == other.failed_evaluations
    }
}

/// Fixed hypervolume reference: per objective, `max + 0.1 * range + 1`.
pub fn hypervolume_reference(points: &[ObjectivePoint]) -> Result<ObjectivePoint> {
    let first = points
        .first()
        .ok_or_else(|| Error::domain("no points to derive a reference from"))?;
    let values = (0..first.dim())
        .map(|k| {
            let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                (lo.min(p.values[k]), hi.max(p.values[k]))
            });
            hi + 0.1 * (hi - lo) + 1.0
        })
        .collect();
    ObjectivePoint::new(values)
}

/// Network architecture, evaluation data and objective directions.
#[derive(Debug, Clone)]
pub struct Evaluator<'a> {
    pub topology: &'a NetworkTopology,
    pub batch: &'a EvalBatch,
    pub directions: &'a ObjectiveDirections,
}

impl Evaluator<'_> {
    pub fn evaluate(&self, pop: &mut [Individual]) -> Result<usize> {
        evaluate_population(pop, self.topology, self.batch, self.directions)
    }
}

#[derive(Debug, Clone)]
pub struct GenerationOutcome {
    /// Elites first, in the order they appear in `elites`, then offspring.
    pub population: Vec<Individual>,
    /// Statistics of the new population.
    pub stats: GenerationStats,
    /// Indices (into the input population) of the individuals carried over
    /// unchanged.
    pub elites: Vec<usize>,
}

/// Rank-0 members, truncated to `capacity` by descending crowding distance
/// (ties to the lower index). Returned in ascending index order.
pub fn select_elites(ranked: &RankedPopulation, capacity: usize) -> Vec<usize> {
    let mut front = ranked.fronts[0].clone();
    front.sort_by(|&a, &b| ranked.prefer(a, b));
    front.truncate(capacity);
    front.sort_unstable();
    front
}

/// Produces generation `generation + 1` from the evaluated population `pop`.
/// Offspring are scored with `evaluator`. Elites keep their evaluation unless
/// `config.rotate_batch` is set, in which case they are rescored too.
pub fn evolve_generation<R: Rng + ?Sized>(
    pop: &[Individual],
    evaluator: &Evaluator<'_>,
    config: &EvolutionConfig,
    hv_reference: &ObjectivePoint,
    generation: usize,
    rng: &mut R,
) -> Result<GenerationOutcome> {
    config.validate()?;
    Error::check_len("population", config.population, pop.len())?;
    let start = Instant::now();
    let ranked = non_dominated_sort(&objectives(pop)?)?;
    let elites = select_elites(&ranked, config.elite_capacity());

    let mut next: Vec<Individual> = elites
        .iter()
        .map(|&i| {
            let mut e = pop[i].clone();
            if config.rotate_batch {
                e.evaluation = None;
            }
            e
        })
        .collect();
    while next.len() < config.population {
        let a = &pop[tournament_select(&ranked, rng)?].theta;
        let b = &pop[tournament_select(&ranked, rng)?].theta;
        let (c1, c2) = if rng.random_bool(config.p_cross) {
            uniform_crossover(a, b, rng)?
        } else {
            (a.clone(), b.clone())
        };
        for child in [c1, c2] {
            if next.len() == config.population {
                break;
            }
            let child = if rng.random_bool(config.p_mut) {
                mutate(&child, rng, config)?
            } else {
                child
            };
            next.push(Individual::new(child));
        }
    }

    let failed = evaluator.evaluate(&mut next)?;
    let ranked_next = non_dominated_sort(&objectives(&next)?)?;
    let mut stats = population_stats(generation + 1, &next, &ranked_next, hv_reference, failed)?;
    stats.wall_time = start.elapsed();
    Ok(GenerationOutcome {
        population: next,
        stats,
        elites,
    })
}
