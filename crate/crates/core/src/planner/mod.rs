//! Tree search over future exchanges for agents with a partner model.
//!
//! Each simulation draws a partner guilt type from the agent's current belief
//! and keeps it for the whole simulation. The partner's responses come from
//! the corresponding partner model, whose own belief follows the simulated
//! history, so simulated partners learn. Leaves are valued by an ε-greedy
//! rollout over level −1 immediate utilities. Before the main loop, each
//! constant strategy (always the same investment or return category) is
//! simulated for a fixed share of the budget.

mod config;
pub mod tree;

pub use config::{PlannerConfig, RolloutPartner, Schedule};
pub use tree::{soft_uct_select, Node, Tree};

use alloc::string::ToString;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::belief::DirMultBelief;
use crate::cache::ModelCache;
use crate::error::{Error, Result};
use crate::game::{
    trustee_action_count, utility_unchecked, GuiltType, InvestorAction, Role, TrusteeAction,
    N_ACTIONS, ROUNDS,
};
use crate::hierarchy::{
    legal_count, level0::planning_steps, level_minus1, model_policy, softmax_policy, survives,
    AgentSpec, Policy,
};
use crate::history::History;
use crate::seed::{self, Rng};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SearchStats {
    pub budget: u32,
    pub presearch: u32,
    /// Simulations started at the root, pre-search included.
    pub root_entries: u64,
    pub rollouts: u64,
    pub nodes: usize,
    /// Whether the values were computed exactly because only the current
    /// step lies within the horizon.
    pub exact: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchResult {
    pub qvalues: [f64; N_ACTIONS],
    pub counts: [u32; N_ACTIONS],
    pub legal: usize,
    pub policy: Policy,
    pub stats: SearchStats,
}

/// Draws a partner type from the predictive distribution of `belief`.
pub fn sample_guilt<R: rand::Rng + ?Sized>(belief: &DirMultBelief, rng: &mut R) -> GuiltType {
    let p = belief.predictive();
    let u: f64 = rng.gen();
    if u < p[0] {
        GuiltType::Greedy
    } else if u < p[0] + p[1] {
        GuiltType::Pragmatic
    } else {
        GuiltType::Guilty
    }
}

/// Action values and policy of `agent` at the end of `history`.
pub fn search(
    agent: &AgentSpec,
    belief: &DirMultBelief,
    history: &History,
    cache: &ModelCache,
    budget: u32,
    seed: u64,
) -> Result<SearchResult> {
    if budget == 0 {
        return Err(Error::Config("search budget must be at least 1".to_string()));
    }
    let config = cache.config();
    config.validate()?;
    let round = history.round();
    if round >= ROUNDS {
        return Err(Error::Config("the game is over".to_string()));
    }
    let partners = GuiltType::ALL.map(|g| agent.partner_model(g));
    let partners = match partners {
        [Some(a), Some(b), Some(c)] => [a, b, c],
        _ => return Err(Error::Config("level -1 agents do not search".to_string())),
    };
    let legal = legal_count(agent.role, history);
    if planning_steps(round, agent.planning) <= 1 {
        return immediate(agent, belief, history, cache, &partners, legal, budget);
    }

    let mut s = Searcher {
        agent,
        cache,
        config,
        root_round: round,
        partners,
        investor_greedy: level_minus1::investor_policy(agent.guilt, agent.beta).argmax(),
        tree: Tree::with_root(legal),
        rng: seed::rng(seed),
        rollouts: 0,
        #[cfg(test)]
        shadow: alloc::vec::Vec::new(),
    };
    let mut root_entries = 0u64;
    let per_strategy = if agent.tom > 0 {
        config.presearch_per_strategy(budget)
    } else {
        0
    };
    for constant in 0..N_ACTIONS {
        for _ in 0..per_strategy {
            s.run_root(belief, history, Some(constant))?;
            root_entries += 1;
        }
    }
    for _ in 0..budget {
        s.run_root(belief, history, None)?;
        root_entries += 1;
    }

    let root = s.tree.root();
    let policy = softmax_policy(&root.value[..legal], agent.beta);
    Ok(SearchResult {
        qvalues: root.value,
        counts: root.count,
        legal,
        policy,
        stats: SearchStats {
            budget,
            presearch: per_strategy * N_ACTIONS as u32,
            root_entries,
            rollouts: s.rollouts,
            nodes: s.tree.len(),
            exact: false,
        },
    })
}

/// Expected immediate utilities when nothing beyond the current step counts.
fn immediate(
    agent: &AgentSpec,
    belief: &DirMultBelief,
    history: &History,
    cache: &ModelCache,
    partners: &[AgentSpec; 3],
    legal: usize,
    budget: u32,
) -> Result<SearchResult> {
    let mut q = [0.0; N_ACTIONS];
    match agent.role {
        Role::Investor => {
            let p = belief.predictive();
            for inv in InvestorAction::ALL {
                let before = history.clone().with_pending(inv);
                for (j, partner) in partners.iter().enumerate() {
                    let response = model_policy(partner, &before, cache)?;
                    for t in 0..response.len() {
                        q[inv.index()] += p[j]
                            * response.prob(t)
                            * utility_unchecked(Role::Investor, inv.index(), t, agent.guilt.value());
                    }
                }
            }
        }
        Role::Trustee => {
            q = level_minus1::trustee_utilities(history.pending.expect("trustee turn"), agent.guilt);
        }
    }
    Ok(SearchResult {
        qvalues: q,
        counts: [0; N_ACTIONS],
        legal,
        policy: softmax_policy(&q[..legal], agent.beta),
        stats: SearchStats {
            budget,
            exact: true,
            ..SearchStats::default()
        },
    })
}

struct Searcher<'a> {
    agent: &'a AgentSpec,
    cache: &'a ModelCache,
    config: &'a PlannerConfig,
    root_round: usize,
    partners: [AgentSpec; 3],
    investor_greedy: usize,
    tree: Tree,
    rng: Rng,
    rollouts: u64,
    // every return backed up through (node, action), for checking the means
    #[cfg(test)]
    shadow: alloc::vec::Vec<(u32, usize, f64)>,
}

impl Searcher<'_> {
    fn run_root(&mut self, belief: &DirMultBelief, history: &History, forced: Option<usize>) -> Result<f64> {
        let guilt = sample_guilt(belief, &mut self.rng);
        let mut h = history.clone();
        self.simulate(guilt, &mut h, 0, 0, forced)
    }

    fn survives(&self, steps: usize) -> bool {
        survives(steps, self.root_round, self.agent.planning)
    }

    fn simulate(
        &mut self,
        guilt: GuiltType,
        h: &mut History,
        steps: usize,
        node: u32,
        forced: Option<usize>,
    ) -> Result<f64> {
        let legal = self.tree.node(node).legal as usize;
        let action = match forced {
            Some(c) if c < legal => c,
            Some(_) => 0,
            None => soft_uct_select(
                self.tree.node(node),
                self.agent.beta,
                self.config.exploration,
                &mut self.rng,
            ),
        };
        let (reward, obs) = self.step(guilt, h, action, steps, false)?;
        let future = if !self.survives(steps + 1) {
            0.0
        } else if let Some(child) = self.tree.child(node, action, obs) {
            self.simulate(guilt, h, steps + 1, child, forced)?
        } else {
            let legal = legal_count(self.agent.role, h);
            self.tree.expand(node, action, obs, legal);
            self.rollout(guilt, h, steps + 1, forced)?
        };
        let ret = reward + future;
        self.tree.node_mut(node).record(action, ret);
        #[cfg(test)]
        self.shadow.push((node, action, ret));
        Ok(ret)
    }

    fn rollout(&mut self, guilt: GuiltType, h: &mut History, mut steps: usize, forced: Option<usize>) -> Result<f64> {
        self.rollouts += 1;
        let mut total = 0.0;
        while self.survives(steps) {
            let legal = legal_count(self.agent.role, h);
            let action = match forced {
                Some(c) if c < legal => c,
                Some(_) => 0,
                None => self.rollout_action(h, legal),
            };
            let reactive = self.config.rollout_partner == RolloutPartner::Reactive;
            let (r, _) = self.step(guilt, h, action, steps, reactive)?;
            total += r;
            steps += 1;
        }
        Ok(total)
    }

    /// ε-greedy over the agent's own level −1 immediate utilities.
    fn rollout_action(&mut self, h: &History, legal: usize) -> usize {
        if self.rng.gen::<f64>() < self.config.rollout_epsilon {
            return self.rng.gen_range(0..legal);
        }
        match self.agent.role {
            Role::Investor => self.investor_greedy,
            Role::Trustee => {
                let inv = h.pending.expect("trustee turn");
                let u = level_minus1::trustee_utilities(inv, self.agent.guilt);
                softmax_policy(&u[..legal], 1.0).argmax()
            }
        }
    }

    /// Plays `action` against the sampled partner. Returns the agent's reward
    /// and the partner action it observes next (0 when nothing follows).
    fn step(
        &mut self,
        guilt: GuiltType,
        h: &mut History,
        action: usize,
        steps: usize,
        reactive: bool,
    ) -> Result<(f64, usize)> {
        let partner = self.partners[guilt.index()];
        match self.agent.role {
            Role::Investor => {
                let inv = InvestorAction::ALL[action];
                h.pending = Some(inv);
                let response = if reactive {
                    level_minus1::trustee_policy(inv, guilt, self.agent.beta)
                } else {
                    model_policy(&partner, h, self.cache)?
                };
                let t = response.sample(&mut self.rng);
                let r = utility_unchecked(Role::Investor, action, t, self.agent.guilt.value());
                h.complete(TrusteeAction::ALL[t])?;
                Ok((r, t))
            }
            Role::Trustee => {
                let inv = h.pending.expect("trustee turn");
                debug_assert!(action < trustee_action_count(inv));
                let r = utility_unchecked(Role::Trustee, inv.index(), action, self.agent.guilt.value());
                h.complete(TrusteeAction::ALL[action])?;
                if !self.survives(steps + 1) {
                    return Ok((r, 0));
                }
                let next = if reactive {
                    level_minus1::investor_policy(guilt, self.agent.beta)
                } else {
                    model_policy(&partner, h, self.cache)?
                };
                let a = next.sample(&mut self.rng);
                h.pending = Some(InvestorAction::ALL[a]);
                Ok((r, a))
            }
        }
    }
}
