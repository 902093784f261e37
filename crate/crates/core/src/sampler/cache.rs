use std::collections::HashMap;
use std::num::NonZeroUsize;

use lru::LruCache;
use serde::Serialize;

use crate::estimator::{Objective, ObjectiveValue};
use crate::mask::ComponentMask;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    /// Evaluations that failed (e.g. non-convergence) and were scored +∞.
    pub failures: u64,
    pub first_failure: Option<String>,
}

impl CacheStats {
    pub fn hit_rate(&self) -> f64 {
        let total = self.hits + self.misses;
        if total == 0 {
            0.0
        } else {
            self.hits as f64 / total as f64
        }
    }
}

enum Store {
    Unbounded(HashMap<ComponentMask, ObjectiveValue>),
    Bounded(LruCache<ComponentMask, ObjectiveValue>),
}

/// Memoised objective keyed by mask bits. Every miss is also appended to a
/// log of evaluated states in evaluation order.
pub struct ObjectiveCache<'o> {
    objective: &'o dyn Objective,
    store: Store,
    stats: CacheStats,
    evaluated: Vec<(ComponentMask, ObjectiveValue)>,
}

impl<'o> ObjectiveCache<'o> {
    pub fn new(objective: &'o dyn Objective, capacity: Option<usize>) -> Self {
        let store = match capacity.and_then(NonZeroUsize::new) {
            Some(c) => Store::Bounded(LruCache::new(c)),
            None => Store::Unbounded(HashMap::new()),
        };
        ObjectiveCache {
            objective,
            store,
            stats: CacheStats::default(),
            evaluated: Vec::new(),
        }
    }

    pub fn get(&mut self, mask: &ComponentMask) -> ObjectiveValue {
        let hit = match &mut self.store {
            Store::Unbounded(h) => h.get(mask).copied(),
            Store::Bounded(l) => l.get(mask).copied(),
        };
        if let Some(v) = hit {
            self.stats.hits += 1;
            return v;
        }
        self.stats.misses += 1;
        let v = match self.objective.evaluate(mask) {
            Ok(v) => v,
            Err(e) => {
                self.stats.failures += 1;
                log::debug!("objective failed at {mask}: {e}");
                if self.stats.first_failure.is_none() {
                    self.stats.first_failure = Some(format!("{mask}: {e}"));
                }
                ObjectiveValue::infinite()
            }
        };
        match &mut self.store {
            Store::Unbounded(h) => {
                h.insert(mask.clone(), v);
            }
            Store::Bounded(l) => {
                l.put(mask.clone(), v);
            }
        }
        self.evaluated.push((mask.clone(), v));
        v
    }

    pub fn stats(&self) -> &CacheStats {
        &self.stats
    }

    pub fn into_parts(self) -> (CacheStats, Vec<(ComponentMask, ObjectiveValue)>) {
        (self.stats, self.evaluated)
    }
}
