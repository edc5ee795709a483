use serde::{Deserialize, Serialize};

use super::{dominates, fitness_mo, Individual};
use crate::ir::VECTOR_LEN;

/// Non-dominated set of every individual offered so far. Entries with
/// identical objective vectors are kept once (the first one offered).
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ElitistArchive {
    entries: Vec<Individual>,
}

impl ElitistArchive {
    pub fn new() -> Self {
        ElitistArchive::default()
    }

    pub fn entries(&self) -> &[Individual] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn objectives(&self) -> Vec<[i64; VECTOR_LEN]> {
        self.entries.iter().map(|e| fitness_mo(&e.vector)).collect()
    }

    /// Offers one individual. Returns whether it entered the archive.
    pub fn offer(&mut self, candidate: &Individual) -> bool {
        let c = fitness_mo(&candidate.vector);
        let rejected = self.entries.iter().any(|e| {
            let o = fitness_mo(&e.vector);
            o == c || dominates(&o, &c)
        });
        if rejected {
            return false;
        }
        self.entries.retain(|e| !dominates(&c, &fitness_mo(&e.vector)));
        self.entries.push(candidate.clone());
        true
    }

    /// Offers every candidate in order; returns how many were admitted.
    pub fn update<'a>(&mut self, candidates: impl IntoIterator<Item = &'a Individual>) -> usize {
        candidates.into_iter().filter(|c| self.offer(c)).count()
    }
}
