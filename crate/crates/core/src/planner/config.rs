use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::ROUNDS;

/// How the per-round budget shrinks over the game.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    /// `n, 9n/10, …, n/10`.
    #[default]
    Linear,
    Constant,
}

/// Which model answers the agent's actions during rollouts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RolloutPartner {
    /// The sampled partner model, as inside the tree.
    #[default]
    Model,
    /// The sampled partner type acting at level −1.
    Reactive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PlannerConfig {
    /// Simulations for the first round (`n`).
    pub simulations: u32,
    #[serde(default)]
    pub schedule: Schedule,
    /// SoftUCT exploration constant `c`.
    #[serde(default = "default_exploration")]
    pub exploration: f64,
    #[serde(default = "default_epsilon")]
    pub rollout_epsilon: f64,
    #[serde(default)]
    pub rollout_partner: RolloutPartner,
    /// Share of the current round budget given to nested partner searches.
    #[serde(default = "default_fraction")]
    pub nested_fraction: f64,
    /// Share of the round budget spent on constant-strategy pre-search, on
    /// top of the budget itself.
    #[serde(default = "default_fraction")]
    pub presearch_fraction: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_exploration() -> f64 {
    25.0
}

fn default_epsilon() -> f64 {
    0.1
}

fn default_fraction() -> f64 {
    0.1
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig::with_simulations(25_000)
    }
}

impl PlannerConfig {
    pub fn with_simulations(simulations: u32) -> Self {
        PlannerConfig {
            simulations,
            schedule: Schedule::Linear,
            exploration: default_exploration(),
            rollout_epsilon: default_epsilon(),
            rollout_partner: RolloutPartner::Model,
            nested_fraction: default_fraction(),
            presearch_fraction: default_fraction(),
            seed: 0,
        }
    }

    pub fn seeded(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.simulations == 0 {
            return Err(Error::Config("simulation budget must be at least 1".into()));
        }
        if !(self.exploration.is_finite() && self.exploration >= 0.0) {
            return Err(Error::Config(alloc::format!(
                "exploration constant {} must be non-negative",
                self.exploration
            )));
        }
        for (name, v) in [
            ("rollout epsilon", self.rollout_epsilon),
            ("nested fraction", self.nested_fraction),
            ("presearch fraction", self.presearch_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(alloc::format!("{name} {v} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Simulations for a decision at `round` (zero-based).
    pub fn budget_for_round(&self, round: usize) -> u32 {
        let n = self.simulations as u64;
        let b = match self.schedule {
            Schedule::Linear => n * (ROUNDS - round.min(ROUNDS - 1)) as u64 / ROUNDS as u64,
            Schedule::Constant => n,
        };
        b.max(1) as u32
    }

    pub fn nested_budget(&self, round: usize) -> u32 {
        let b = self.budget_for_round(round) as f64 * self.nested_fraction;
        (libm::round(b) as u32).max(1)
    }

    /// Pre-search simulations per constant strategy for a given budget.
    pub fn presearch_per_strategy(&self, budget: u32) -> u32 {
        if self.presearch_fraction == 0.0 {
            return 0;
        }
        let total = libm::round(budget as f64 * self.presearch_fraction) as u32;
        (total / crate::game::N_ACTIONS as u32).max(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_schedule() {
        let c = PlannerConfig::with_simulations(25_000);
        let budgets: alloc::vec::Vec<u32> = (0..10).map(|r| c.budget_for_round(r)).collect();
        assert_eq!(
            budgets,
            [25_000, 22_500, 20_000, 17_500, 15_000, 12_500, 10_000, 7_500, 5_000, 2_500]
        );
        assert_eq!(c.nested_budget(0), 2_500);
        assert_eq!(c.presearch_per_strategy(25_000), 500);
        let tiny = PlannerConfig::with_simulations(3);
        assert_eq!(tiny.budget_for_round(9), 1);
        assert_eq!(tiny.nested_budget(9), 1);
        assert_eq!(tiny.presearch_per_strategy(3), 1);
    }

    #[test]
    fn validation() {
        assert!(PlannerConfig::default().validate().is_ok());
        assert!(PlannerConfig::with_simulations(0).validate().is_err());
        let mut c = PlannerConfig::default();
        c.exploration = -1.0;
        assert!(c.validate().is_err());
        let mut c = PlannerConfig::default();
        c.rollout_epsilon = 1.5;
        assert!(c.validate().is_err());
    }
}
