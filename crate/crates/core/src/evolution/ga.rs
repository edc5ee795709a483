use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    choose_partitions, domination_counts, domination_rank_select, fitness_mo, mutate, population_fitness, recombine_at,
    splice_conflicts, tournament_select, ElitistArchive, GaConfig, Individual, MutationKind,
};
use crate::generator::{program_rng, sample_block, GenError, SamplerConfig};
use crate::grammar::EnrichedGrammar;
use crate::ir::{Block, FeatureVector, VECTOR_LEN};
use crate::semantics::SemanticContext;

/// Stream reserved for the variation and selection randomness; per-program
/// streams count up from 0.
const ENGINE_STREAM: u64 = u64::MAX;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariationStats {
    pub crossovers: u64,
    /// Crossovers abandoned because no conflict-free mate was found.
    pub mate_failures: u64,
    pub removals: u64,
    pub context_free_additions: u64,
    pub context_aware_additions: u64,
}

/// Summary of one generation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    pub offspring: Vec<u64>,
    pub population: Vec<u64>,
    /// Σ f_so over the new population (single-objective search only).
    pub fitness_sum: Option<f64>,
    pub best_fitness_sum: Option<f64>,
    pub archive_size: Option<usize>,
}

/// Shared state of both algorithms: configuration, randomness, the current
/// population and the program counter.
struct Engine<'a> {
    grammar: &'a EnrichedGrammar,
    root: &'a SemanticContext,
    sampler: SamplerConfig,
    ga: GaConfig,
    rng: ChaCha8Rng,
    population: Vec<Individual>,
    next_id: u64,
    generation: usize,
    stats: VariationStats,
}

impl<'a> Engine<'a> {
    fn new(
        grammar: &'a EnrichedGrammar,
        root: &'a SemanticContext,
        sampler: SamplerConfig,
        ga: GaConfig,
    ) -> Result<Self, GenError> {
        sampler.validate()?;
        ga.validate().map_err(GenError::InvalidConfig)?;
        let mut rng = ChaCha8Rng::seed_from_u64(sampler.rng_seed);
        rng.set_stream(ENGINE_STREAM);
        Ok(Engine {
            grammar,
            root,
            sampler,
            ga,
            rng,
            population: Vec::new(),
            next_id: 0,
            generation: 0,
            stats: VariationStats::default(),
        })
    }

    fn individual(&mut self, block: Block) -> Individual {
        let id = self.next_id;
        self.next_id += 1;
        Individual::new(id, block)
    }

    /// Samples the initial population, each member from its own stream.
    fn initialize(&mut self) -> Vec<Individual> {
        let n = self.ga.population;
        let mut out = Vec::with_capacity(n);
        let mut attempts = 0;
        while out.len() < n && attempts < 10 * n {
            attempts += 1;
            let k = self.next_id;
            self.next_id += 1;
            match sample_block(
                self.grammar,
                self.root,
                &self.sampler,
                &mut program_rng(self.sampler.rng_seed, k),
            ) {
                Ok(block) => out.push(Individual::new(k, block)),
                Err(e) => log::warn!("initial sample {k} failed: {e}"),
            }
        }
        self.population = out.clone();
        out
    }

    fn vectors(items: &[Individual]) -> Vec<FeatureVector> {
        items.iter().map(|i| i.vector).collect()
    }

    /// Index of the better of two uniformly drawn members (lower score).
    fn binary_tournament(&mut self, scores: &[f64]) -> usize {
        let a = self.rng.gen_range(0..scores.len());
        let b = self.rng.gen_range(0..scores.len());
        if scores[b] < scores[a] {
            b
        } else {
            a
        }
    }

    /// Creates `population` offspring by binary-tournament parent choice,
    /// crossover and mutation.
    fn offspring(&mut self, scores: &[f64]) -> Vec<Individual> {
        let n = self.ga.population;
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let i = self.binary_tournament(scores);
            let mut j = self.binary_tournament(scores);
            let mut children = None;
            if self.rng.gen_bool(self.ga.crossover_rate) {
                for attempt in 0..self.ga.mate_attempts.max(1) {
                    if attempt > 0 {
                        j = self.binary_tournament(scores);
                    }
                    let (p1, p2) = (&self.population[i].block, &self.population[j].block);
                    let (x1, x2) = choose_partitions(p1, p2, &mut self.rng);
                    if splice_conflicts(p1, p2, &x1, &x2).is_empty() {
                        children = Some(recombine_at(p1, p2, &x1, &x2));
                        break;
                    }
                }
                match children {
                    Some(_) => self.stats.crossovers += 1,
                    None => self.stats.mate_failures += 1,
                }
            }
            let (c1, c2) =
                children.unwrap_or_else(|| (self.population[i].block.clone(), self.population[j].block.clone()));
            for child in [c1, c2] {
                if out.len() == n {
                    break;
                }
                let child = if self.rng.gen_bool(self.ga.mutation_rate) {
                    let (kind, b) = mutate(&child, self.grammar, self.root, &self.sampler, &mut self.rng);
                    match kind {
                        MutationKind::Removal => self.stats.removals += 1,
                        MutationKind::AddContextFree => self.stats.context_free_additions += 1,
                        MutationKind::AddContextAware => self.stats.context_aware_additions += 1,
                    }
                    b
                } else {
                    child
                };
                let ind = self.individual(child);
                out.push(ind);
            }
        }
        out
    }
}

/// Single-objective search: selection favours members far from their
/// nearest neighbour. Tracks the population with the smallest fitness sum
/// seen so far.
pub struct Sodga<'a> {
    engine: Engine<'a>,
    best: Vec<Individual>,
    best_sum: f64,
}

impl<'a> Sodga<'a> {
    pub fn new(
        grammar: &'a EnrichedGrammar,
        root: &'a SemanticContext,
        sampler: SamplerConfig,
        ga: GaConfig,
    ) -> Result<Self, GenError> {
        Ok(Sodga {
            engine: Engine::new(grammar, root, sampler, ga)?,
            best: Vec::new(),
            best_sum: f64::INFINITY,
        })
    }

    /// Samples the initial population and returns it.
    pub fn initialize(&mut self) -> Vec<Individual> {
        let pop = self.engine.initialize();
        self.update_best();
        pop
    }

    fn fitness_sum(pop: &[Individual], ga: &GaConfig) -> f64 {
        population_fitness(&Engine::vectors(pop), ga.distance).iter().sum()
    }

    fn update_best(&mut self) -> f64 {
        let sum = Self::fitness_sum(&self.engine.population, &self.engine.ga);
        if sum < self.best_sum || self.best.is_empty() {
            self.best_sum = sum;
            self.best = self.engine.population.clone();
        }
        sum
    }

    /// Runs one generation and returns the offspring it created.
    pub fn step(&mut self) -> (Vec<Individual>, GenerationRecord) {
        let e = &mut self.engine;
        let scores = population_fitness(&Engine::vectors(&e.population), e.ga.distance);
        let offspring = e.offspring(&scores);
        let mut pool = std::mem::take(&mut e.population);
        pool.extend(offspring.iter().cloned());
        let sel = tournament_select(
            &Engine::vectors(&pool),
            e.ga.population,
            e.ga.distance,
            e.ga.tournament,
            e.ga.elite,
            &mut e.rng,
        );
        e.population = sel.chosen.iter().map(|&i| pool[i].clone()).collect();
        e.generation += 1;
        let sum = self.update_best();
        let record = GenerationRecord {
            generation: self.engine.generation,
            offspring: offspring.iter().map(|o| o.id).collect(),
            population: self.engine.population.iter().map(|p| p.id).collect(),
            fitness_sum: Some(sum),
            best_fitness_sum: Some(self.best_sum),
            archive_size: None,
        };
        (offspring, record)
    }

    pub fn population(&self) -> &[Individual] {
        &self.engine.population
    }

    pub fn best_population(&self) -> &[Individual] {
        &self.best
    }

    pub fn best_fitness_sum(&self) -> f64 {
        self.best_sum
    }

    pub fn generation(&self) -> usize {
        self.engine.generation
    }

    pub fn stats(&self) -> &VariationStats {
        &self.engine.stats
    }
}

/// Many-objective search: rank-based selection on Pareto domination, with an
/// unbounded archive of every non-dominated program seen.
pub struct Modga<'a> {
    engine: Engine<'a>,
    archive: ElitistArchive,
}

impl<'a> Modga<'a> {
    pub fn new(
        grammar: &'a EnrichedGrammar,
        root: &'a SemanticContext,
        sampler: SamplerConfig,
        ga: GaConfig,
    ) -> Result<Self, GenError> {
        Ok(Modga {
            engine: Engine::new(grammar, root, sampler, ga)?,
            archive: ElitistArchive::new(),
        })
    }

    pub fn initialize(&mut self) -> Vec<Individual> {
        let pop = self.engine.initialize();
        self.archive.update(&pop);
        pop
    }

    fn objectives(items: &[Individual]) -> Vec<[i64; VECTOR_LEN]> {
        items.iter().map(|i| fitness_mo(&i.vector)).collect()
    }

    pub fn step(&mut self) -> (Vec<Individual>, GenerationRecord) {
        let e = &mut self.engine;
        let scores: Vec<f64> = domination_counts(&Self::objectives(&e.population))
            .into_iter()
            .map(|c| c as f64)
            .collect();
        let offspring = e.offspring(&scores);
        self.archive.update(&offspring);
        let mut pool = std::mem::take(&mut e.population);
        pool.extend(offspring.iter().cloned());
        let chosen = domination_rank_select(&Self::objectives(&pool), e.ga.population, &mut e.rng);
        e.population = chosen.iter().map(|&i| pool[i].clone()).collect();
        e.generation += 1;
        let record = GenerationRecord {
            generation: e.generation,
            offspring: offspring.iter().map(|o| o.id).collect(),
            population: e.population.iter().map(|p| p.id).collect(),
            fitness_sum: None,
            best_fitness_sum: None,
            archive_size: Some(self.archive.len()),
        };
        (offspring, record)
    }

    pub fn population(&self) -> &[Individual] {
        &self.engine.population
    }

    pub fn archive(&self) -> &ElitistArchive {
        &self.archive
    }

    pub fn generation(&self) -> usize {
        self.engine.generation
    }

    pub fn stats(&self) -> &VariationStats {
        &self.engine.stats
    }
}

/// Evolves until the budget runs out and returns the best population.
pub fn run_sodga(
    g: &EnrichedGrammar,
    root: &SemanticContext,
    sampler: &SamplerConfig,
    ga: &GaConfig,
    budget: Duration,
) -> Result<Vec<Individual>, GenError> {
    let start = Instant::now();
    let mut search = Sodga::new(g, root, sampler.clone(), ga.clone())?;
    search.initialize();
    while start.elapsed() < budget {
        search.step();
    }
    Ok(search.best_population().to_vec())
}

/// Evolves until the budget runs out and returns the archive.
pub fn run_modga(
    g: &EnrichedGrammar,
    root: &SemanticContext,
    sampler: &SamplerConfig,
    ga: &GaConfig,
    budget: Duration,
) -> Result<ElitistArchive, GenError> {
    let start = Instant::now();
    let mut search = Modga::new(g, root, sampler.clone(), ga.clone())?;
    search.initialize();
    while start.elapsed() < budget {
        search.step();
    }
    Ok(search.archive)
}
