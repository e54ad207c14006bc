//! One live game between a human and a configured agent.
//!
//! The state machine only ever waits for the human: the agent's moves are
//! computed as soon as it is its turn.

use serde::{Deserialize, Serialize};
use trustgame_core::game::{legal_trustee_actions, ExchangeOutcome, ROUNDS};
use trustgame_core::hierarchy::{agent_decision, replay_beliefs, sample_action};
use trustgame_core::inference::{fit_role, ParameterGrid, RoleFit};
use trustgame_core::simulator::{action_seed, planner_digest, GameRecord, RecordSource, RECORD_SCHEMA_VERSION};
use trustgame_core::{
    AgentSpec, DirMultBelief, Error as CoreError, History, InvestorAction, ModelCache, PlannerConfig,
    Role, TrusteeAction,
};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SessionError {
    #[error("{0}")]
    Validation(String),
    #[error("illegal action: {0}")]
    IllegalAction(String),
    #[error("not your turn: {0}")]
    WrongTurn(String),
    #[error("the session is closed")]
    Closed,
    #[error("the game is not finished yet")]
    Incomplete,
    #[error("planner failure: {0}")]
    Planner(#[from] CoreError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Status {
    AwaitingHuman,
    Closed,
}

/// Action submitted by the human. `round` (1-based) and `role` are optional
/// guards: if given and stale, the submission is refused as a wrong turn.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HumanAction {
    pub category: u8,
    #[serde(default)]
    pub round: Option<usize>,
    #[serde(default)]
    pub role: Option<Role>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExchangeView {
    pub round: usize,
    pub investment: u8,
    #[serde(rename = "return")]
    pub ret: u8,
    pub investor_payoff: f64,
    pub trustee_payoff: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Payoffs {
    pub investor: f64,
    pub trustee: f64,
    pub combined: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentMove {
    pub role: Role,
    pub round: usize,
    pub category: u8,
}

/// Everything a client needs to render the game.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionView {
    pub id: String,
    pub human_role: Role,
    pub agent_spec: AgentSpec,
    pub planner: PlannerConfig,
    pub status: Status,
    /// Current round, from 1; stays at 10 once the game is over.
    pub round: usize,
    /// Role expected to act next; absent once closed.
    pub turn: Option<Role>,
    pub legal_actions: Vec<u8>,
    pub pending_investment: Option<u8>,
    pub exchanges: Vec<ExchangeView>,
    pub payoffs: Payoffs,
    /// Agent's predictive belief over the human's guilt (greedy, pragmatic, guilty).
    pub agent_belief: [f64; 3],
    pub agent_belief_trace: Vec<[f64; 3]>,
    pub last_agent_move: Option<AgentMove>,
    /// The finished game, in the record format, once closed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record: Option<GameRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionFit {
    pub role: Role,
    pub best: AgentSpec,
    /// All cells tied for the minimum.
    pub ties: Vec<AgentSpec>,
    pub nll: f64,
    pub baseline_nll: f64,
    pub fit: RoleFit,
    pub budget: u32,
    pub seed: u64,
}

pub struct Session {
    pub id: String,
    human: Role,
    agent: AgentSpec,
    cache: ModelCache,
    history: History,
    trace: Vec<DirMultBelief>,
    last_agent_move: Option<AgentMove>,
}

impl Session {
    /// Validates the setup and, if the agent invests first, plays its move.
    pub fn start(id: String, human: Role, agent: AgentSpec, config: PlannerConfig) -> Result<Self, SessionError> {
        Self::check_setup(human, &agent, &config)?;
        Self::start_with_cache(id, human, agent, ModelCache::new(config))
    }

    pub fn check_setup(human: Role, agent: &AgentSpec, config: &PlannerConfig) -> Result<(), SessionError> {
        agent.validate().map_err(|e| SessionError::Validation(e.to_string()))?;
        if agent.role != human.partner() {
            return Err(SessionError::Validation(format!(
                "the agent must play the {} when the human is the {}",
                human.partner(),
                human
            )));
        }
        if !agent.in_grid() {
            return Err(SessionError::Validation(format!("agent {agent} is outside the supported grid")));
        }
        config.validate().map_err(|e| SessionError::Validation(e.to_string()))
    }

    /// As [`Session::start`] with a prepared cache (e.g. sharing level 0
    /// tables); the setup must already have passed [`Session::check_setup`].
    pub fn start_with_cache(id: String, human: Role, agent: AgentSpec, cache: ModelCache) -> Result<Self, SessionError> {
        let mut s = Session {
            id,
            human,
            agent,
            cache,
            history: History::new(),
            trace: vec![DirMultBelief::prior()],
            last_agent_move: None,
        };
        if agent.role == Role::Investor {
            s.agent_move()?;
        }
        Ok(s)
    }

    pub fn is_closed(&self) -> bool {
        self.history.is_complete()
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    fn turn(&self) -> Option<Role> {
        if self.is_closed() {
            None
        } else if self.history.pending.is_some() {
            Some(Role::Trustee)
        } else {
            Some(Role::Investor)
        }
    }

    fn legal(&self) -> Vec<u8> {
        match (self.turn(), self.history.pending) {
            (Some(r), _) if r != self.human => Vec::new(),
            (Some(Role::Investor), _) => (0..5).collect(),
            (Some(Role::Trustee), Some(inv)) => legal_trustee_actions(inv).iter().map(|t| t.category()).collect(),
            _ => Vec::new(),
        }
    }

    fn agent_move(&mut self) -> Result<(), SessionError> {
        let round = self.history.round();
        let d = agent_decision(&self.agent, &self.history, &self.cache)?;
        let a = sample_action(&d.policy, action_seed(self.cache.config().seed, self.agent.role, round));
        match self.agent.role {
            Role::Investor => self.history.pending = Some(InvestorAction::ALL[a]),
            Role::Trustee => self.history.complete(TrusteeAction::ALL[a])?,
        }
        self.last_agent_move = Some(AgentMove {
            role: self.agent.role,
            round: round + 1,
            category: a as u8,
        });
        Ok(())
    }

    fn refresh_trace(&mut self) -> Result<(), SessionError> {
        let done = History {
            exchanges: self.history.exchanges.clone(),
            pending: None,
        };
        self.trace = replay_beliefs(&self.agent, &done, &self.cache)?;
        Ok(())
    }

    /// Applies the human's action and, unless the game ended, the agent's reply.
    pub fn submit(&mut self, action: HumanAction) -> Result<(), SessionError> {
        if self.is_closed() {
            return Err(SessionError::Closed);
        }
        let round = self.history.round() + 1;
        if let Some(r) = action.round {
            if r != round {
                return Err(SessionError::WrongTurn(format!("round {r} is not the current round {round}")));
            }
        }
        if let Some(role) = action.role {
            if role != self.human {
                return Err(SessionError::WrongTurn(format!("the human plays the {}", self.human)));
            }
        }
        if self.turn() != Some(self.human) {
            return Err(SessionError::WrongTurn("waiting for the agent".into()));
        }
        match self.human {
            Role::Investor => {
                let inv = InvestorAction::new(action.category).map_err(|e| SessionError::IllegalAction(e.to_string()))?;
                self.history.pending = Some(inv);
                if let Err(e) = self.agent_move() {
                    self.history.pending = None;
                    return Err(e);
                }
            }
            Role::Trustee => {
                let inv = self.history.pending.expect("trustee turn has a pending investment");
                let t = TrusteeAction::new(action.category)
                    .ok()
                    .filter(|t| t.is_legal_after(inv))
                    .ok_or_else(|| {
                        SessionError::IllegalAction(format!(
                            "return category {} after investment category {}",
                            action.category,
                            inv.category()
                        ))
                    })?;
                self.history.complete(t)?;
                if !self.is_closed() {
                    self.agent_move()?;
                }
            }
        }
        self.refresh_trace()
    }

    /// The completed game as a record of live play.
    pub fn record(&self) -> Result<GameRecord, SessionError> {
        if !self.is_closed() {
            return Err(SessionError::Incomplete);
        }
        let mut r = GameRecord::observed(Some(self.id.clone()), &self.history.exchanges)?;
        r.source = RecordSource::Live;
        let (inv, tr) = match self.agent.role {
            Role::Investor => (Some(self.agent), None),
            Role::Trustee => (None, Some(self.agent)),
        };
        r.investor_spec = inv;
        r.trustee_spec = tr;
        match self.agent.role {
            Role::Investor => r.investor_belief_trace = self.trace.clone(),
            Role::Trustee => r.trustee_belief_trace = self.trace.clone(),
        }
        let cfg = *self.cache.config();
        r.seed = Some(cfg.seed);
        r.planner = Some(cfg);
        r.planner_digest = Some(planner_digest(&cfg));
        debug_assert_eq!(r.schema_version, RECORD_SCHEMA_VERSION);
        Ok(r)
    }

    /// Fits the human's play on their role's grid cells with the session's
    /// planner settings.
    pub fn fit(&self, grid: &ParameterGrid) -> Result<SessionFit, SessionError> {
        let record = self.record()?;
        let cache = ModelCache::with_tables(*self.cache.config(), &self.cache.tables());
        let rf = fit_role(&record, grid.cells(self.human), &cache)?;
        Ok(SessionFit {
            role: self.human,
            best: *rf.best_cell(),
            ties: rf.best.iter().map(|&i| rf.cells[i].cell).collect(),
            nll: rf.min_nll(),
            baseline_nll: trustgame_core::inference::uniform_nll(&record, self.human),
            fit: rf,
            budget: cache.config().simulations,
            seed: cache.config().seed,
        })
    }

    pub fn view(&self) -> SessionView {
        let outcomes: Vec<ExchangeOutcome> = self
            .history
            .exchanges
            .iter()
            .map(|e| ExchangeOutcome::new(e.investor, e.trustee).expect("history holds legal exchanges"))
            .collect();
        let investor: f64 = outcomes.iter().map(|o| o.investor_payoff.as_f64()).sum();
        let trustee: f64 = outcomes.iter().map(|o| o.trustee_payoff.as_f64()).sum();
        SessionView {
            id: self.id.clone(),
            human_role: self.human,
            agent_spec: self.agent,
            planner: *self.cache.config(),
            status: if self.is_closed() { Status::Closed } else { Status::AwaitingHuman },
            round: (self.history.round() + 1).min(ROUNDS),
            turn: self.turn(),
            legal_actions: self.legal(),
            pending_investment: self.history.pending.map(|i| i.category()),
            exchanges: outcomes
                .iter()
                .enumerate()
                .map(|(i, o)| ExchangeView {
                    round: i + 1,
                    investment: o.investor_action.category(),
                    ret: o.trustee_action.category(),
                    investor_payoff: o.investor_payoff.as_f64(),
                    trustee_payoff: o.trustee_payoff.as_f64(),
                })
                .collect(),
            payoffs: Payoffs {
                investor,
                trustee,
                combined: investor + trustee,
            },
            agent_belief: self.trace.last().expect("prior present").predictive(),
            agent_belief_trace: self.trace.iter().map(DirMultBelief::predictive).collect(),
            last_agent_move: self.last_agent_move,
            record: self.record().ok(),
        }
    }
}
