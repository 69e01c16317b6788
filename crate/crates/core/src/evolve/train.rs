//! Training loop, all-time archive and checkpoints.

use std::borrow::Cow;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    evolve_generation, hypervolume_reference, objectives, population_stats, EvalBatch, Evaluation,
    Evaluator, EvolutionConfig, GenerationStats, Individual,
};
use crate::fitness::{FitnessVector, ObjectiveDirections};
use crate::neuralnet::{
    blob_name, init_random, read_blob, write_blob, CheckpointHeader, NetworkTopology, SolutionVector,
};
use crate::pareto::{non_dominated_sort, pareto_front, ObjectivePoint};
use crate::util::mix_seed;
use crate::{Error, Result};

const INIT_STREAM: u64 = 0;
const GENERATION_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ArchiveEntry {
    pub theta: SolutionVector,
    pub fitness: FitnessVector,
    pub objective: ObjectivePoint,
    /// Generation in which the genome entered the archive.
    pub generation: usize,
}

/// All-time non-dominated set. Always an anti-chain; genomes are unique
/// bit-for-bit.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParetoArchive {
    entries: Vec<ArchiveEntry>,
}

impl ParetoArchive {
    pub fn entries(&self) -> &[ArchiveEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn objectives(&self) -> Vec<ObjectivePoint> {
        self.entries.iter().map(|e| e.objective.clone()).collect()
    }

    /// Merges candidates and drops everything dominated. Existing entries
    /// keep their position ahead of new ones.
    pub fn insert(&mut self, candidates: impl IntoIterator<Item = ArchiveEntry>) -> Result<()> {
        let mut merged = std::mem::take(&mut self.entries);
        for c in candidates {
            if !merged.iter().any(|e| e.theta.bit_eq(&c.theta)) {
                merged.push(c);
            }
        }
        if merged.is_empty() {
            return Ok(());
        }
        let points: Vec<ObjectivePoint> = merged.iter().map(|e| e.objective.clone()).collect();
        let keep = pareto_front(&points)?;
        let mut keep = keep.into_iter().peekable();
        self.entries = merged
            .into_iter()
            .enumerate()
            .filter(|(i, _)| keep.next_if_eq(i).is_some())
            .map(|(_, e)| e)
            .collect();
        Ok(())
    }

    /// Component-wise mean fitness of the entries.
    pub fn mean_fitness(&self) -> Option<FitnessVector> {
        FitnessVector::mean(self.entries.iter().map(|e| &e.fitness))
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub archive: ParetoArchive,
    pub population: Vec<Individual>,
    /// Rank-0 members of the final population.
    pub final_front: Vec<usize>,
    /// One row per generation, starting with the initial population.
    pub stats: Vec<GenerationStats>,
}

/// Generation-by-generation driver.
///
/// The archive is scored on a fixed validation batch (the first
/// `batch_size` episodes). Without batch rotation that is also the training
/// batch; with rotation, generation `g` trains on a sliding window of the
/// episodes.
#[derive(Debug, Clone)]
pub struct Trainer {
    config: EvolutionConfig,
    topology: NetworkTopology,
    directions: ObjectiveDirections,
    data: EvalBatch,
    validation: EvalBatch,
    generation: usize,
    population: Vec<Individual>,
    archive: ParetoArchive,
    stats: Vec<GenerationStats>,
    hv_reference: ObjectivePoint,
}

impl Trainer {
    /// Draws and scores the initial population.
    pub fn new(config: EvolutionConfig, topology: NetworkTopology, data: EvalBatch) -> Result<Self> {
        config.validate()?;
        topology.validate()?;
        let validation = validation_batch(&config, &data)?;
        let start = Instant::now();
        let mut population = (0..config.population)
            .map(|i| {
                let seed = mix_seed(mix_seed(config.seed, INIT_STREAM), i as u64);
                init_random(&topology, seed, config.bounds).map(Individual::new)
            })
            .collect::<Result<Vec<_>>>()?;
        let directions = ObjectiveDirections::default();
        let batch = training_batch(&config, &data, &validation, 0)?;
        let failed = super::evaluate_population(&mut population, &topology, &batch, &directions)?;
        let points = objectives(&population)?;
        let hv_reference = hypervolume_reference(&points)?;
        let ranked = non_dominated_sort(&points)?;
        let mut stats = population_stats(0, &population, &ranked, &hv_reference, failed)?;
        stats.wall_time = start.elapsed();
        let mut trainer = Self {
            config,
            topology,
            directions,
            data,
            validation,
            generation: 0,
            population,
            archive: ParetoArchive::default(),
            stats: vec![stats],
            hv_reference,
        };
        trainer.update_archive()?;
        Ok(trainer)
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn population(&self) -> &[Individual] {
        &self.population
    }

    pub fn archive(&self) -> &ParetoArchive {
        &self.archive
    }

    pub fn stats(&self) -> &[GenerationStats] {
        &self.stats
    }

    pub fn config(&self) -> &EvolutionConfig {
        &self.config
    }

    pub fn hv_reference(&self) -> &ObjectivePoint {
        &self.hv_reference
    }

    /// Advances one generation; returns the indices of the previous
    /// population that survived as elites (now at the head of the population).
    pub fn step(&mut self) -> Result<Vec<usize>> {
        let g = self.generation;
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(
            mix_seed(self.config.seed, GENERATION_STREAM),
            g as u64,
        ));
        let batch = training_batch(&self.config, &self.data, &self.validation, g + 1)?;
        let evaluator = Evaluator {
            topology: &self.topology,
            batch: &batch,
            directions: &self.directions,
        };
        let outcome = evolve_generation(
            &self.population,
            &evaluator,
            &self.config,
            &self.hv_reference,
            g,
            &mut rng,
        )?;
        self.population = outcome.population;
        self.stats.push(outcome.stats);
        self.generation += 1;
        self.update_archive()?;
        Ok(outcome.elites)
    }

    fn update_archive(&mut self) -> Result<()> {
        let ranked = non_dominated_sort(&objectives(&self.population)?)?;
        let mut candidates: Vec<Individual> = ranked.fronts[0]
            .iter()
            .map(|&i| &self.population[i])
            .filter(|ind| ind.evaluation.as_ref().is_some_and(|e| !e.failed))
            .cloned()
            .collect();
        if self.config.rotate_batch {
            for c in &mut candidates {
                c.evaluation = None;
            }
            super::evaluate_population(&mut candidates, &self.topology, &self.validation, &self.directions)?;
        }
        let generation = self.generation;
        self.archive.insert(candidates.into_iter().filter_map(|c| {
            let e = c.evaluation.filter(|e| !e.failed)?;
            Some(ArchiveEntry {
                theta: c.theta,
                fitness: e.fitness,
                objective: e.objective,
                generation,
            })
        }))
    }

    /// Runs until `config.generations`, checkpointing every
    /// `checkpoint_every` generations and at the end when `checkpoint_dir`
    /// is given.
    pub fn run(mut self, checkpoint_dir: Option<&Path>) -> Result<TrainOutcome> {
        if let Some(dir) = checkpoint_dir {
            if latest_checkpoint(dir)?.is_none() {
                self.write_checkpoint(dir)?;
            }
        }
        while self.generation < self.config.generations {
            self.step()?;
            if let Some(dir) = checkpoint_dir {
                if self.generation % self.config.checkpoint_every == 0
                    || self.generation == self.config.generations
                {
                    self.write_checkpoint(dir)?;
                }
            }
        }
        let final_front = pareto_front(&objectives(&self.population)?)?;
        Ok(TrainOutcome {
            archive: self.archive,
            population: self.population,
            final_front,
            stats: self.stats,
        })
    }

    /// Writes `gen_NNNNN/` under `dir` atomically (staged then renamed).
    pub fn write_checkpoint(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let name = checkpoint_name(self.generation);
        let staging = dir.join(format!(".{name}.tmp"));
        if staging.exists() {
            fs::remove_dir_all(&staging)?;
        }
        fs::create_dir(&staging)?;

        let header = CheckpointHeader::new(&self.topology, self.config.bounds, vec![self.config.seed])?;
        write_json(&staging.join("header.json"), &header)?;
        let state = CheckpointState {
            generation: self.generation,
            config: self.config.clone(),
            hv_reference: self.hv_reference.clone(),
            stats: self.stats.clone(),
            population: self
                .population
                .iter()
                .map(|ind| ind.evaluation.clone())
                .collect(),
            archive: self
                .archive
                .entries
                .iter()
                .map(|e| ArchiveMeta {
                    fitness: e.fitness,
                    objective: e.objective.clone(),
                    generation: e.generation,
                })
                .collect(),
        };
        write_json(&staging.join("state.json"), &state)?;
        for (i, ind) in self.population.iter().enumerate() {
            write_blob(&staging.join(blob_name("pop", i)), &ind.theta)?;
        }
        for (i, e) in self.archive.entries.iter().enumerate() {
            write_blob(&staging.join(blob_name("archive", i)), &e.theta)?;
        }

        let target = dir.join(name);
        if target.exists() {
            fs::remove_dir_all(&target)?;
        }
        fs::rename(&staging, &target)?;
        Ok(target)
    }

    /// Restores a trainer from a checkpoint directory written by
    /// [`Trainer::write_checkpoint`]. `config` may differ from the stored
    /// one only in `generations`.
    pub fn resume(
        checkpoint: &Path,
        config: EvolutionConfig,
        topology: NetworkTopology,
        data: EvalBatch,
    ) -> Result<Self> {
        let loaded = load_checkpoint(checkpoint)?;
        if loaded.header.topology != topology {
            return Err(Error::data("checkpoint topology differs from the requested one"));
        }
        let stored = EvolutionConfig {
            generations: config.generations,
            ..loaded.config.clone()
        };
        if stored != config {
            return Err(Error::data("checkpoint was written with a different evolution config"));
        }
        config.validate()?;
        Error::check_len("checkpoint population", config.population, loaded.population.len())?;
        let validation = validation_batch(&config, &data)?;
        Ok(Self {
            config,
            topology,
            directions: ObjectiveDirections::default(),
            data,
            validation,
            generation: loaded.generation,
            population: loaded.population,
            archive: loaded.archive,
            stats: loaded.stats,
            hv_reference: loaded.hv_reference,
        })
    }
}

/// Full contents of one checkpoint directory.
#[derive(Debug, Clone)]
pub struct LoadedCheckpoint {
    pub header: CheckpointHeader,
    pub generation: usize,
    pub config: EvolutionConfig,
    pub hv_reference: ObjectivePoint,
    pub stats: Vec<GenerationStats>,
    pub population: Vec<Individual>,
    pub archive: ParetoArchive,
}

pub fn load_checkpoint(checkpoint: &Path) -> Result<LoadedCheckpoint> {
    let header: CheckpointHeader = read_json(&checkpoint.join("header.json"))?;
    let state: CheckpointState = read_json(&checkpoint.join("state.json"))?;
    let population = state
        .population
        .into_iter()
        .enumerate()
        .map(|(i, evaluation)| {
            let theta = read_blob(&checkpoint.join(blob_name("pop", i)), &header)?;
            Ok(Individual { theta, evaluation })
        })
        .collect::<Result<Vec<_>>>()?;
    let entries = state
        .archive
        .into_iter()
        .enumerate()
        .map(|(i, m)| {
            Ok(ArchiveEntry {
                theta: read_blob(&checkpoint.join(blob_name("archive", i)), &header)?,
                fitness: m.fitness,
                objective: m.objective,
                generation: m.generation,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LoadedCheckpoint {
        header,
        generation: state.generation,
        config: state.config,
        hv_reference: state.hv_reference,
        stats: state.stats,
        population,
        archive: ParetoArchive { entries },
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct ArchiveMeta {
    fitness: FitnessVector,
    objective: ObjectivePoint,
    generation: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointState {
    generation: usize,
    config: EvolutionConfig,
    hv_reference: ObjectivePoint,
    stats: Vec<GenerationStats>,
    population: Vec<Option<Evaluation>>,
    archive: Vec<ArchiveMeta>,
}

fn checkpoint_name(generation: usize) -> String {
    format!("gen_{generation:05}")
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::data(format!("{}: {e}", path.display())))
}

fn validation_batch(config: &EvolutionConfig, data: &EvalBatch) -> Result<EvalBatch> {
    let n = config.batch_size.min(data.len());
    data.subset(&(0..n).collect::<Vec<_>>())
}

fn training_batch<'a>(
    config: &EvolutionConfig,
    data: &EvalBatch,
    validation: &'a EvalBatch,
    generation: usize,
) -> Result<Cow<'a, EvalBatch>> {
    if !config.rotate_batch {
        return Ok(Cow::Borrowed(validation));
    }
    let n = data.len();
    let bs = config.batch_size.min(n);
    let start = generation * bs;
    let idx: Vec<usize> = (0..bs).map(|j| (start + j) % n).collect();
    Ok(Cow::Owned(data.subset(&idx)?))
}

/// Most recent complete checkpoint under `dir`, if any.
pub fn latest_checkpoint(dir: &Path) -> Result<Option<PathBuf>> {
    if !dir.is_dir() {
        return Ok(None);
    }
    let mut best: Option<(usize, PathBuf)> = None;
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let Some(g) = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("gen_"))
            .and_then(|n| n.parse::<usize>().ok())
        else {
            continue;
        };
        if path.join("state.json").is_file() && best.as_ref().is_none_or(|(b, _)| g > *b) {
            best = Some((g, path));
        }
    }
    Ok(best.map(|(_, p)| p))
}

/// Trains from scratch, or resumes from the latest checkpoint in
/// `checkpoint_dir` when one exists.
pub fn train(
    config: &EvolutionConfig,
    topology: &NetworkTopology,
    data: EvalBatch,
    checkpoint_dir: Option<&Path>,
) -> Result<TrainOutcome> {
    let resumed = match checkpoint_dir {
        Some(dir) => latest_checkpoint(dir)?,
        None => None,
    };
    let trainer = match resumed {
        Some(path) => Trainer::resume(&path, config.clone(), topology.clone(), data)?,
        None => Trainer::new(config.clone(), topology.clone(), data)?,
    };
    trainer.run(checkpoint_dir)
}

/// `generation,l1_mean,l2_mean,l3_mean,front_size,hypervolume`
pub fn write_stats_csv(path: &Path, stats: &[GenerationStats]) -> Result<()> {
    let mut out = fs::File::create(path)?;
    writeln!(out, "generation,l1_mean,l2_mean,l3_mean,front_size,hypervolume")?;
    for s in stats {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            s.generation, s.mean[0], s.mean[1], s.mean[2], s.front_size, s.hypervolume
        )?;
    }
    Ok(())
}
