//! Dyads, trajectory statistics and search diagnostics.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::belief::DirMultBelief;
use crate::cache::ModelCache;
use crate::error::{Error, Result};
use crate::game::{ExchangeOutcome, InvestorAction, Money, Role, TrusteeAction, N_ACTIONS, ROUNDS};
use crate::hierarchy::{agent_decision, replay_beliefs, sample_action, AgentSpec, Policy};
use crate::history::{Exchange, History};
use crate::planner::PlannerConfig;
use crate::seed;
use crate::stats;

pub const RECORD_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordSource {
    #[default]
    Simulated,
    Observed,
    Live,
}

/// One game, simulated or observed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct GameRecord {
    pub schema_version: u32,
    #[serde(default)]
    pub source: RecordSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dyad_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub investor_spec: Option<AgentSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trustee_spec: Option<AgentSpec>,
    pub rounds: Vec<ExchangeOutcome>,
    #[serde(default)]
    pub investor_belief_trace: Vec<DirMultBelief>,
    #[serde(default)]
    pub trustee_belief_trace: Vec<DirMultBelief>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planner: Option<PlannerConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planner_digest: Option<String>,
}

impl GameRecord {
    /// A record of observed play without specs, seeds or belief traces.
    pub fn observed(dyad_id: Option<String>, exchanges: &[Exchange]) -> Result<Self> {
        let rounds = exchanges
            .iter()
            .map(|e| ExchangeOutcome::new(e.investor, e.trustee))
            .collect::<Result<Vec<_>>>()?;
        let r = GameRecord {
            schema_version: RECORD_SCHEMA_VERSION,
            source: RecordSource::Observed,
            dyad_id,
            investor_spec: None,
            trustee_spec: None,
            rounds,
            investor_belief_trace: Vec::new(),
            trustee_belief_trace: Vec::new(),
            seed: None,
            planner: None,
            planner_digest: None,
        };
        r.validate()?;
        Ok(r)
    }

    /// Checks the invariants a loaded record must satisfy. Live records may
    /// be incomplete; all others have exactly ten rounds.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != RECORD_SCHEMA_VERSION {
            return Err(Error::InvalidRecord(alloc::format!(
                "schema version {} (expected {RECORD_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let complete_required = self.source != RecordSource::Live;
        if self.rounds.len() > ROUNDS || (complete_required && self.rounds.len() != ROUNDS) {
            return Err(Error::InvalidRecord(alloc::format!(
                "{} rounds (expected {ROUNDS})",
                self.rounds.len()
            )));
        }
        for (i, o) in self.rounds.iter().enumerate() {
            let expected = ExchangeOutcome::new(o.investor_action, o.trustee_action)
                .map_err(|e| Error::InvalidRecord(alloc::format!("round {}: {e}", i + 1)))?;
            if expected != *o {
                return Err(Error::InvalidRecord(alloc::format!(
                    "round {}: payoffs do not match the actions",
                    i + 1
                )));
            }
        }
        for (name, trace) in [
            ("investor", &self.investor_belief_trace),
            ("trustee", &self.trustee_belief_trace),
        ] {
            if !trace.is_empty() && trace.len() != self.rounds.len() + 1 {
                return Err(Error::InvalidRecord(alloc::format!(
                    "{name} belief trace has {} entries for {} rounds",
                    trace.len(),
                    self.rounds.len()
                )));
            }
        }
        for spec in [&self.investor_spec, &self.trustee_spec].into_iter().flatten() {
            spec.validate()?;
        }
        Ok(())
    }

    pub fn exchanges(&self) -> Vec<Exchange> {
        self.rounds
            .iter()
            .map(|o| Exchange {
                investor: o.investor_action,
                trustee: o.trustee_action,
            })
            .collect()
    }

    pub fn history(&self) -> History {
        History {
            exchanges: self.exchanges(),
            pending: None,
        }
    }
}

/// Stable short digest of a planner configuration.
pub fn planner_digest(config: &PlannerConfig) -> String {
    let d = seed::derive(
        0x7472_7573_7467_616d,
        &(
            config.simulations,
            config.schedule as u8,
            config.exploration.to_bits(),
            config.rollout_epsilon.to_bits(),
            config.rollout_partner as u8,
            config.nested_fraction.to_bits(),
            config.presearch_fraction.to_bits(),
        ),
    );
    alloc::format!("{d:016x}")
}

/// Seed for the action actually taken by `role` in `round` of a dyad.
pub fn action_seed(dyad_seed: u64, role: Role, round: usize) -> u64 {
    seed::derive(dyad_seed, &(0xac_u8, role as u8, round as u8))
}

/// Plays one ten-round game between two agents.
pub fn play_dyad(
    investor: &AgentSpec,
    trustee: &AgentSpec,
    config: &PlannerConfig,
    dyad_seed: u64,
) -> Result<GameRecord> {
    let cache = ModelCache::new(config.seeded(dyad_seed));
    play_dyad_with_cache(investor, trustee, &cache)
}

/// As [`play_dyad`], with the seed and budget taken from `cache`'s config.
pub fn play_dyad_with_cache(
    investor: &AgentSpec,
    trustee: &AgentSpec,
    cache: &ModelCache,
) -> Result<GameRecord> {
    if investor.role != Role::Investor || trustee.role != Role::Trustee {
        return Err(Error::InvalidSpec("dyad needs an investor and a trustee".into()));
    }
    investor.validate()?;
    trustee.validate()?;
    let config = *cache.config();
    config.validate()?;
    let dyad_seed = config.seed;
    let mut h = History::new();
    for round in 0..ROUNDS {
        let d = agent_decision(investor, &h, cache)?;
        let a = sample_action(&d.policy, action_seed(dyad_seed, Role::Investor, round));
        h.pending = Some(InvestorAction::ALL[a]);
        let d = agent_decision(trustee, &h, cache)?;
        let t = sample_action(&d.policy, action_seed(dyad_seed, Role::Trustee, round));
        h.complete(TrusteeAction::ALL[t])?;
    }
    let record = GameRecord {
        schema_version: RECORD_SCHEMA_VERSION,
        source: RecordSource::Simulated,
        dyad_id: None,
        investor_spec: Some(*investor),
        trustee_spec: Some(*trustee),
        rounds: h
            .exchanges
            .iter()
            .map(|e| ExchangeOutcome::new(e.investor, e.trustee))
            .collect::<Result<_>>()?,
        investor_belief_trace: replay_beliefs(investor, &h, cache)?,
        trustee_belief_trace: trustee_trace(trustee, &h, cache)?,
        seed: Some(dyad_seed),
        planner: Some(config),
        planner_digest: Some(planner_digest(&config)),
    };
    Ok(record)
}

// the trustee observes each investment before replying, so its trace over a
// finished game already has one entry per round after the prior
fn trustee_trace(spec: &AgentSpec, h: &History, cache: &ModelCache) -> Result<Vec<DirMultBelief>> {
    replay_beliefs(spec, h, cache)
}

/// Seed of repetition `rep` of pairing `pairing` in a batch.
pub fn batch_seed(base: u64, pairing: usize, rep: usize) -> u64 {
    seed::derive(base, &(pairing as u32, rep as u32))
}

/// Sequential batch; records ordered by (pairing, repetition).
pub fn batch(
    pairings: &[(AgentSpec, AgentSpec)],
    repetitions: usize,
    config: &PlannerConfig,
) -> Result<Vec<Vec<GameRecord>>> {
    if repetitions == 0 {
        return Err(Error::Config("repetitions must be at least 1".into()));
    }
    let shared = ModelCache::new(*config);
    pairings
        .iter()
        .enumerate()
        .map(|(i, (inv, tr))| {
            (0..repetitions)
                .map(|rep| {
                    let cache = shared.with_config(config.seeded(batch_seed(config.seed, i, rep)));
                    play_dyad_with_cache(inv, tr, &cache)
                })
                .collect()
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Gains {
    pub investor: Money,
    pub trustee: Money,
    pub combined: Money,
}

pub fn total_gains(record: &GameRecord) -> Gains {
    let investor: Money = record.rounds.iter().map(|o| o.investor_payoff).sum();
    let trustee: Money = record.rounds.iter().map(|o| o.trustee_payoff).sum();
    Gains {
        investor,
        trustee,
        combined: investor + trustee,
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    fn of(xs: &[f64]) -> Self {
        if xs.is_empty() {
            return MeanStd::default();
        }
        MeanStd {
            mean: stats::mean(xs),
            std: stats::std_dev(xs),
            n: xs.len(),
        }
    }
}

/// Per-round aggregates over a set of records. Trustee returns are averaged
/// over non-degenerate rounds only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrajectoryStats {
    pub records: usize,
    pub investment: Vec<MeanStd>,
    pub repayment: Vec<MeanStd>,
    /// Mean predictive belief of the investor about the trustee, per trace
    /// entry (entry `t` is the belief when acting in round `t`).
    pub investor_posterior: Vec<[f64; 3]>,
    pub trustee_posterior: Vec<[f64; 3]>,
}

pub const POSTERIOR_SNAPSHOT_ROUNDS: [usize; 4] = [0, 3, 6, 9];

impl TrajectoryStats {
    pub fn from_records(records: &[GameRecord]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptySample);
        }
        let mut investment = Vec::with_capacity(ROUNDS);
        let mut repayment = Vec::with_capacity(ROUNDS);
        for r in 0..ROUNDS {
            let inv: Vec<f64> = records
                .iter()
                .filter_map(|g| g.rounds.get(r))
                .map(|o| o.investor_action.fraction_f64())
                .collect();
            let ret: Vec<f64> = records
                .iter()
                .filter_map(|g| g.rounds.get(r))
                .filter(|o| !o.investor_action.is_zero())
                .map(|o| o.trustee_action.fraction_f64())
                .collect();
            investment.push(MeanStd::of(&inv));
            repayment.push(MeanStd::of(&ret));
        }
        Ok(TrajectoryStats {
            records: records.len(),
            investment,
            repayment,
            investor_posterior: mean_trace(records.iter().map(|g| &g.investor_belief_trace)),
            trustee_posterior: mean_trace(records.iter().map(|g| &g.trustee_belief_trace)),
        })
    }

    /// Posterior means at rounds 0, 3, 6 and 9.
    pub fn posterior_snapshots(&self, role: Role) -> Vec<(usize, [f64; 3])> {
        let trace = match role {
            Role::Investor => &self.investor_posterior,
            Role::Trustee => &self.trustee_posterior,
        };
        POSTERIOR_SNAPSHOT_ROUNDS
            .iter()
            .filter_map(|&r| trace.get(r).map(|p| (r, *p)))
            .collect()
    }
}

fn mean_trace<'a>(traces: impl Iterator<Item = &'a Vec<DirMultBelief>>) -> Vec<[f64; 3]> {
    let mut sums: Vec<[f64; 3]> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for t in traces {
        for (i, b) in t.iter().enumerate() {
            if sums.len() <= i {
                sums.push([0.0; 3]);
                counts.push(0);
            }
            let p = b.predictive();
            for j in 0..3 {
                sums[i][j] += p[j];
            }
            counts[i] += 1;
        }
    }
    sums.iter()
        .zip(&counts)
        .map(|(s, &n)| [s[0] / n as f64, s[1] / n as f64, s[2] / n as f64])
        .collect()
}

/// First-action policy of an agent at the start of a game.
pub fn first_action_policy(spec: &AgentSpec, config: &PlannerConfig, seed: u64) -> Result<Policy> {
    let cache = ModelCache::new(config.seeded(seed));
    first_action_policy_with_cache(spec, &cache)
}

pub fn first_action_policy_with_cache(spec: &AgentSpec, cache: &ModelCache) -> Result<Policy> {
    let h = match spec.role {
        Role::Investor => History::new(),
        Role::Trustee => {
            return Err(Error::InvalidSpec(
                "first-action diagnostics are defined for investors".into(),
            ))
        }
    };
    Ok(agent_decision(spec, &h, cache)?.policy)
}

/// Seed of simulated subject `k` in a convergence diagnostic.
pub fn subject_seed(base: u64, k: usize) -> u64 {
    batch_seed(base, 0, k)
}

/// Seed of reference run `r` in a convergence diagnostic.
pub fn reference_seed(base: u64, r: usize) -> u64 {
    batch_seed(base, 1, r)
}

/// First-action distributions of `subjects` seeded runs at each budget,
/// compared with the mean of `reference_runs` runs at `reference_budget`.
/// Sequential; the companion crate has a parallel, timed version.
pub fn convergence_diagnostic(
    spec: &AgentSpec,
    budgets: &[u32],
    reference_budget: u32,
    subjects: usize,
    reference_runs: usize,
    config: &PlannerConfig,
) -> Result<(Policy, Vec<DiscrepancyMatrix>)> {
    if reference_runs == 0 {
        return Err(Error::EmptySample);
    }
    let shared = ModelCache::new(*config);
    let run = |budget: u32, seed: u64| {
        let cfg = PlannerConfig {
            simulations: budget,
            seed,
            ..*config
        };
        first_action_policy_with_cache(spec, &shared.with_config(cfg))
    };
    let refs = (0..reference_runs)
        .map(|r| run(reference_budget, reference_seed(config.seed, r)))
        .collect::<Result<Vec<_>>>()?;
    let reference = Policy::mean(&refs)?;
    let out = budgets
        .iter()
        .map(|&b| {
            let ps = (0..subjects)
                .map(|k| run(b, subject_seed(config.seed, k)))
                .collect::<Result<Vec<_>>>()?;
            DiscrepancyMatrix::from_policies(&ps, &reference)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((reference, out))
}

/// Covariance-form discrepancy of per-subject first-action distributions
/// around a converged reference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DiscrepancyMatrix {
    pub c: [[f64; N_ACTIONS]; N_ACTIONS],
    pub subjects: usize,
    pub reference: [f64; N_ACTIONS],
    /// Largest single-probability deviation of any subject.
    pub max_abs_deviation: f64,
}

impl DiscrepancyMatrix {
    pub fn from_policies(subjects: &[Policy], reference: &Policy) -> Result<Self> {
        if subjects.len() < 2 {
            return Err(Error::EmptySample);
        }
        let r = reference.to_array();
        let mut c = [[0.0; N_ACTIONS]; N_ACTIONS];
        let mut max_dev: f64 = 0.0;
        for p in subjects {
            let p = p.to_array();
            for i in 0..N_ACTIONS {
                let di = p[i] - r[i];
                max_dev = max_dev.max(di.abs());
                for j in 0..N_ACTIONS {
                    c[i][j] += di * (p[j] - r[j]);
                }
            }
        }
        let norm = (subjects.len() - 1) as f64;
        for row in c.iter_mut() {
            for v in row.iter_mut() {
                *v /= norm;
            }
        }
        Ok(DiscrepancyMatrix {
            c,
            subjects: subjects.len(),
            reference: r,
            max_abs_deviation: max_dev,
        })
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.c.iter().flatten().map(|v| v * v).sum()
    }

    /// Largest root-mean-square deviation of one action's probability from
    /// the reference, `max_i sqrt(C_ii)`.
    pub fn rms_deviation(&self) -> f64 {
        (0..N_ACTIONS).map(|i| libm::sqrt(self.c[i][i])).fold(0.0, f64::max)
    }

    pub fn trace(&self) -> f64 {
        (0..N_ACTIONS).map(|i| self.c[i][i]).sum()
    }
}

/// Per-round Welch tests comparing two sets of records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RoundComparison {
    pub investor_p: Vec<f64>,
    pub trustee_p: Vec<f64>,
}

impl RoundComparison {
    pub fn min_p(&self) -> f64 {
        self.investor_p
            .iter()
            .chain(&self.trustee_p)
            .copied()
            .fold(1.0, f64::min)
    }

    pub fn significant_rounds(&self, level: f64) -> usize {
        self.investor_p
            .iter()
            .chain(&self.trustee_p)
            .filter(|&&p| p < level)
            .count()
    }
}

/// Compares action fractions round by round. Degenerate trustee rounds are
/// skipped; a round with fewer than two returns on either side gets p = 1.
pub fn compare_rounds(a: &[GameRecord], b: &[GameRecord]) -> Result<RoundComparison> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let fractions = |recs: &[GameRecord], r: usize, role: Role| -> Vec<f64> {
        recs.iter()
            .filter_map(|g| g.rounds.get(r))
            .filter(|o| role == Role::Investor || !o.investor_action.is_zero())
            .map(|o| match role {
                Role::Investor => o.investor_action.fraction_f64(),
                Role::Trustee => o.trustee_action.fraction_f64(),
            })
            .collect()
    };
    let mut out = RoundComparison {
        investor_p: Vec::with_capacity(ROUNDS),
        trustee_p: Vec::with_capacity(ROUNDS),
    };
    for r in 0..ROUNDS {
        for role in [Role::Investor, Role::Trustee] {
            let (x, y) = (fractions(a, r, role), fractions(b, r, role));
            let p = match stats::welch_t_test(&x, &y) {
                Ok(t) => t.p_value,
                Err(_) => 1.0,
            };
            match role {
                Role::Investor => out.investor_p.push(p),
                Role::Trustee => out.trustee_p.push(p),
            }
        }
    }
    Ok(out)
}

/// Plays both pairings with the same dyad seeds and compares them per round.
pub fn horizon_equivalence(
    pair_a: (AgentSpec, AgentSpec),
    pair_b: (AgentSpec, AgentSpec),
    repetitions: usize,
    config: &PlannerConfig,
) -> Result<RoundComparison> {
    let run = |pair: (AgentSpec, AgentSpec)| -> Result<Vec<GameRecord>> {
        let shared = ModelCache::new(*config);
        (0..repetitions)
            .map(|rep| {
                let cache = shared.with_config(config.seeded(batch_seed(config.seed, 0, rep)));
                play_dyad_with_cache(&pair.0, &pair.1, &cache)
            })
            .collect()
    };
    compare_rounds(&run(pair_a)?, &run(pair_b)?)
}
