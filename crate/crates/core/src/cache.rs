//! Per-worker memo of solved partner models.
//!
//! A cache is bound to one [`PlannerConfig`]; memoised nested policies are
//! only valid under the budget and seed they were computed with. The level 0
//! tables do not depend on the config and are shared between caches derived
//! with [`ModelCache::with_config`], also across threads.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::cell::{Cell, RefCell};
use core::ops::Deref;

use hashbrown::HashMap;
use rustc_hash::FxBuildHasher;

use crate::game::GuiltType;
use crate::hierarchy::{AgentSpec, Level0Investor, Policy};
use crate::history::History;
use crate::planner::PlannerConfig;

struct Level0Set {
    beta_bits: u64,
    solvers: [Level0Investor; 3],
}

/// Shared handle to one level 0 solver.
#[derive(Clone)]
pub struct Level0Handle {
    set: Arc<Level0Set>,
    guilt: GuiltType,
}

impl Deref for Level0Handle {
    type Target = Level0Investor;

    fn deref(&self) -> &Level0Investor {
        &self.set.solvers[self.guilt.index()]
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct ModelKey {
    role: u8,
    tom: i8,
    guilt: u8,
    planning: u8,
    beta: u64,
    history: Vec<u8>,
}

impl ModelKey {
    fn new(spec: &AgentSpec, history: &History) -> Self {
        ModelKey {
            role: spec.role as u8,
            tom: spec.tom,
            guilt: spec.guilt.index() as u8,
            planning: spec.planning,
            beta: spec.beta.to_bits(),
            history: history.key_bytes(),
        }
    }
}

/// Level 0 solvers detached from any cache, for handing to worker threads.
#[derive(Clone, Default)]
pub struct Level0Tables {
    sets: Vec<Arc<Level0Set>>,
}

impl Level0Tables {
    pub fn new() -> Self {
        Level0Tables::default()
    }

    /// Makes sure solvers for `beta` exist, so that every cache built from
    /// these tables shares them.
    pub fn prepare(&mut self, beta: f64) {
        let bits = beta.to_bits();
        if !self.sets.iter().any(|s| s.beta_bits == bits) {
            self.sets.push(Arc::new(Level0Set {
                beta_bits: bits,
                solvers: GuiltType::ALL.map(|g| Level0Investor::new(g, beta)),
            }));
        }
    }
}

pub struct ModelCache {
    config: PlannerConfig,
    level0: RefCell<Vec<Arc<Level0Set>>>,
    models: RefCell<HashMap<ModelKey, Policy, FxBuildHasher>>,
    hits: Cell<u64>,
    misses: Cell<u64>,
}

impl ModelCache {
    pub fn new(config: PlannerConfig) -> Self {
        ModelCache {
            config,
            level0: RefCell::new(Vec::new()),
            models: RefCell::new(HashMap::default()),
            hits: Cell::new(0),
            misses: Cell::new(0),
        }
    }

    /// A fresh cache for `config` that reuses this cache's level 0 tables.
    pub fn with_config(&self, config: PlannerConfig) -> Self {
        let c = ModelCache::new(config);
        *c.level0.borrow_mut() = self.level0.borrow().clone();
        c
    }

    pub fn with_tables(config: PlannerConfig, tables: &Level0Tables) -> Self {
        let c = ModelCache::new(config);
        *c.level0.borrow_mut() = tables.sets.clone();
        c
    }

    /// The level 0 solvers this cache has created or inherited so far.
    pub fn tables(&self) -> Level0Tables {
        Level0Tables {
            sets: self.level0.borrow().clone(),
        }
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.config
    }

    pub fn level0(&self, guilt: GuiltType, beta: f64) -> Level0Handle {
        let bits = beta.to_bits();
        let mut sets = self.level0.borrow_mut();
        let set = match sets.iter().find(|s| s.beta_bits == bits) {
            Some(s) => s.clone(),
            None => {
                let mut t = Level0Tables::new();
                t.prepare(beta);
                let s = t.sets.pop().expect("just prepared");
                sets.push(s.clone());
                s
            }
        };
        Level0Handle { set, guilt }
    }

    pub(crate) fn lookup_model(&self, spec: &AgentSpec, history: &History) -> Option<Policy> {
        let found = self
            .models
            .borrow()
            .get(&ModelKey::new(spec, history))
            .copied();
        match found {
            Some(_) => self.hits.set(self.hits.get() + 1),
            None => self.misses.set(self.misses.get() + 1),
        }
        found
    }

    pub(crate) fn store_model(&self, spec: &AgentSpec, history: &History, policy: Policy) {
        self.models
            .borrow_mut()
            .insert(ModelKey::new(spec, history), policy);
    }

    /// Number of memoised nested policies.
    pub fn models_len(&self) -> usize {
        self.models.borrow().len()
    }

    /// `(hits, misses)` of nested-policy lookups.
    pub fn model_lookups(&self) -> (u64, u64) {
        (self.hits.get(), self.misses.get())
    }

    pub fn clear_models(&self) {
        self.models.borrow_mut().clear();
    }
}
