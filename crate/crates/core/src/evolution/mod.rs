//! Diversity-driven search over blocks: fitness functions, selection,
//! variation operators, the elitist archive and the two genetic algorithms.

mod archive;
mod ga;
mod operators;
mod selection;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ir::{feature_vector, Block, FeatureVector, VECTOR_LEN};

pub use archive::ElitistArchive;
pub use ga::{run_modga, run_sodga, GenerationRecord, Modga, Sodga, VariationStats};
pub use operators::{
    choose_partitions, mate_conflicts, mutate, mutate_add_context_aware, mutate_add_context_free, mutate_removal,
    recombine, recombine_at, splice_conflicts, MutationKind,
};
pub use selection::{domination_counts, domination_rank_select, tournament_select, Tournament, TournamentSelection};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvolutionError {
    #[error("vectors of different dimension ({0} vs {1})")]
    DimensionMismatch(usize, usize),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceKind {
    #[default]
    L2,
    Linf,
}

impl FromStr for DistanceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "l2" | "euclidean" => Ok(DistanceKind::L2),
            "linf" | "l-inf" | "chebyshev" => Ok(DistanceKind::Linf),
            _ => Err(format!("unknown distance '{s}' (expected l2 or linf)")),
        }
    }
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistanceKind::L2 => "l2",
            DistanceKind::Linf => "linf",
        })
    }
}

/// Euclidean or Chebyshev distance between two count vectors.
pub fn distance(a: &[u64], b: &[u64], kind: DistanceKind) -> Result<f64, EvolutionError> {
    if a.len() != b.len() {
        return Err(EvolutionError::DimensionMismatch(a.len(), b.len()));
    }
    let diffs = a.iter().zip(b).map(|(x, y)| x.abs_diff(*y) as f64);
    Ok(match kind {
        DistanceKind::L2 => diffs.map(|d| d * d).sum::<f64>().sqrt(),
        DistanceKind::Linf => diffs.fold(0.0, f64::max),
    })
}

/// Distance from member `index` to its nearest other member; `+∞` when
/// there is no other member.
pub fn dissimilarity(index: usize, population: &[FeatureVector], kind: DistanceKind) -> f64 {
    population
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != index)
        .map(|(_, v)| distance(population[index].as_slice(), v.as_slice(), kind).expect("equal dimensions"))
        .fold(f64::INFINITY, f64::min)
}

/// Distance from a vector outside the population to its nearest member.
pub fn dissimilarity_to(v: &FeatureVector, population: &[FeatureVector], kind: DistanceKind) -> f64 {
    population
        .iter()
        .map(|p| distance(v.as_slice(), p.as_slice(), kind).expect("equal dimensions"))
        .fold(f64::INFINITY, f64::min)
}

/// Single-objective fitness `1 / (1 + dis)`, minimized. An infinite
/// dissimilarity maps to 0.
pub fn fitness_so(dis: f64) -> f64 {
    if dis.is_infinite() {
        0.0
    } else {
        1.0 / (1.0 + dis)
    }
}

/// Fitness of every member relative to the others.
pub fn population_fitness(population: &[FeatureVector], kind: DistanceKind) -> Vec<f64> {
    (0..population.len())
        .map(|i| fitness_so(dissimilarity(i, population, kind)))
        .collect()
}

/// Many-objective fitness: negated size followed by the feature counts,
/// every entry maximized.
pub fn fitness_mo(v: &FeatureVector) -> [i64; VECTOR_LEN] {
    let mut out = [0i64; VECTOR_LEN];
    out[0] = -(v.0[0] as i64);
    for i in 1..VECTOR_LEN {
        out[i] = v.0[i] as i64;
    }
    out
}

/// Pareto domination for maximized objectives.
pub fn dominates(a: &[i64], b: &[i64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y) && a.iter().zip(b).any(|(x, y)| x > y)
}

/// A block together with its cached feature vector. `id` numbers the
/// programs of a run in creation order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Individual {
    pub id: u64,
    pub block: Block,
    pub vector: FeatureVector,
}

impl Individual {
    pub fn new(id: u64, block: Block) -> Self {
        let vector = feature_vector(&block);
        Individual { id, block, vector }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    pub population: usize,
    pub tournament: usize,
    pub distance: DistanceKind,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    /// Best individuals carried over unconditionally by single-objective
    /// selection.
    pub elite: usize,
    /// Attempts at finding a conflict-free mate before crossover is skipped.
    pub mate_attempts: usize,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: 50,
            tournament: 10,
            distance: DistanceKind::L2,
            crossover_rate: 0.75,
            mutation_rate: 0.8,
            elite: 1,
            mate_attempts: 4,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.population < 2 {
            return Err("population size must be at least 2".into());
        }
        if self.tournament < 1 {
            return Err("tournament size must be at least 1".into());
        }
        for (name, p) in [("crossover", self.crossover_rate), ("mutation", self.mutation_rate)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} rate {p} is outside [0, 1]"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: [u64; 7]) -> FeatureVector {
        FeatureVector(x)
    }

    #[test]
    fn distances() {
        let a = [3, 1, 2, 0, 0, 0, 0];
        let b = [1, 1, 5, 0, 0, 0, 0];
        assert_eq!(distance(&a, &b, DistanceKind::Linf).unwrap(), 3.0);
        assert!((distance(&a, &b, DistanceKind::L2).unwrap() - 13f64.sqrt()).abs() < 1e-12);
        assert_eq!(distance(&a, &a, DistanceKind::L2).unwrap(), 0.0);
        assert_eq!(
            distance(&a, &[1, 2], DistanceKind::L2),
            Err(EvolutionError::DimensionMismatch(7, 2))
        );
    }

    #[test]
    fn dissimilarity_and_fitness() {
        let p = [v([1, 0, 0, 0, 0, 0, 0]), v([2, 0, 0, 0, 0, 0, 0])];
        assert_eq!(dissimilarity(0, &p, DistanceKind::L2), 1.0);
        assert_eq!(dissimilarity(1, &p, DistanceKind::L2), 1.0);
        assert_eq!(fitness_so(1.0), 0.5);
        assert_eq!(fitness_so(0.0), 1.0);
        let lone = [v([5; 7])];
        assert_eq!(dissimilarity(0, &lone, DistanceKind::L2), f64::INFINITY);
        assert_eq!(fitness_so(f64::INFINITY), 0.0);
        let dup = [v([5; 7]), v([5; 7]), v([9; 7])];
        assert_eq!(dissimilarity(0, &dup, DistanceKind::Linf), 0.0);
    }

    #[test]
    fn many_objective_vector() {
        let x = v([14, 2, 0, 0, 1, 0, 0]);
        assert_eq!(fitness_mo(&x), [-14, 2, 0, 0, 1, 0, 0]);
        assert!(dominates(&[0, 1], &[0, 0]));
        assert!(!dominates(&[0, 0], &[0, 0]));
        assert!(!dominates(&[1, 0], &[0, 1]));
    }
}
