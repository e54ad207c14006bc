//! Likelihood of observed play under candidate agents, grid fits and
//! confusion matrices.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use hashbrown::HashMap;
use serde::{Deserialize, Serialize};

use crate::cache::ModelCache;
use crate::error::{Error, Result};
use crate::game::{classify_investment, classify_return, GuiltType, Role, N_ACTIONS};
use crate::hierarchy::{agent_decision, AgentSpec};
use crate::history::{Exchange, History};
use crate::planner::PlannerConfig;
use crate::simulator::{play_dyad_with_cache, batch_seed, GameRecord};

/// Probabilities below this are clamped when accumulating the NLL.
pub const LIKELIHOOD_FLOOR: f64 = 1e-9;

pub const GRID_GUILT: [GuiltType; 3] = GuiltType::ALL;
pub const GRID_PLANNING: [u8; 3] = [0, 2, 7];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterGrid {
    pub investor: Vec<AgentSpec>,
    pub trustee: Vec<AgentSpec>,
}

impl ParameterGrid {
    /// Investors `{0,2} × α × {0,2,7}` (18 cells); trustees at level 0 with
    /// `P = 0` plus level 1 `× α × {0,2,7}` (12 cells).
    pub fn full() -> Self {
        let mut investor = Vec::new();
        for tom in [0, 2] {
            for g in GRID_GUILT {
                for p in GRID_PLANNING {
                    investor.push(AgentSpec::investor(tom, g, p).expect("grid spec"));
                }
            }
        }
        let mut trustee = Vec::new();
        for g in GRID_GUILT {
            trustee.push(AgentSpec::trustee(0, g, 0).expect("grid spec"));
        }
        for g in GRID_GUILT {
            for p in GRID_PLANNING {
                trustee.push(AgentSpec::trustee(1, g, p).expect("grid spec"));
            }
        }
        ParameterGrid { investor, trustee }
    }

    pub fn single(investor: AgentSpec, trustee: AgentSpec) -> Self {
        ParameterGrid {
            investor: alloc::vec![investor],
            trustee: alloc::vec![trustee],
        }
    }

    pub fn cells(&self, role: Role) -> &[AgentSpec] {
        match role {
            Role::Investor => &self.investor,
            Role::Trustee => &self.trustee,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RoleNll {
    pub nll: f64,
    /// Probability of each observed action of this role, in order. Degenerate
    /// trustee turns are omitted.
    pub likelihoods: Vec<f64>,
    /// Number of observed actions whose probability fell below the floor.
    pub clamped: usize,
}

/// NLL of one role's actions in `record` under `cell`, replaying the
/// agent's beliefs along the recorded history.
pub fn role_nll(record: &GameRecord, cell: &AgentSpec, cache: &ModelCache) -> Result<RoleNll> {
    cell.validate()?;
    let mut h = History::new();
    let mut out = RoleNll {
        nll: 0.0,
        likelihoods: Vec::new(),
        clamped: 0,
    };
    for e in record.exchanges() {
        let observed = match cell.role {
            Role::Investor => Some(e.investor.index()),
            Role::Trustee => {
                h.pending = Some(e.investor);
                (!e.investor.is_zero()).then(|| e.trustee.index())
            }
        };
        if let Some(a) = observed {
            let p = agent_decision(cell, &h, cache)?.policy.prob(a);
            if p < LIKELIHOOD_FLOOR {
                out.clamped += 1;
            }
            out.nll -= libm::log(p.max(LIKELIHOOD_FLOOR));
            out.likelihoods.push(p);
        }
        h.pending = None;
        h.exchanges.push(e);
    }
    Ok(out)
}

pub fn nll(
    record: &GameRecord,
    investor_cell: &AgentSpec,
    trustee_cell: &AgentSpec,
    config: &PlannerConfig,
) -> Result<(RoleNll, RoleNll)> {
    let cache = ModelCache::new(*config);
    Ok((
        role_nll(record, investor_cell, &cache)?,
        role_nll(record, trustee_cell, &cache)?,
    ))
}

/// NLL of a policy that picks uniformly among `actions` in each of `rounds`.
pub fn uniform_baseline(rounds: usize, actions: usize) -> f64 {
    rounds as f64 * libm::log(actions as f64)
}

/// NLL of uniformly random play of `role` in `record`.
pub fn uniform_nll(record: &GameRecord, role: Role) -> f64 {
    let decisions = record
        .rounds
        .iter()
        .filter(|o| role == Role::Investor || !o.investor_action.is_zero())
        .count();
    uniform_baseline(decisions, N_ACTIONS)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CellFit {
    pub cell: AgentSpec,
    pub nll: f64,
    pub clamped: usize,
    pub likelihoods: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RoleFit {
    pub cells: Vec<CellFit>,
    /// Indices of all cells attaining the minimum NLL.
    pub best: Vec<usize>,
}

impl RoleFit {
    pub fn from_cells(cells: Vec<CellFit>) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::EmptySample);
        }
        let min = cells.iter().map(|c| c.nll).fold(f64::INFINITY, f64::min);
        let best = cells
            .iter()
            .enumerate()
            .filter(|(_, c)| c.nll <= min + 1e-12)
            .map(|(i, _)| i)
            .collect();
        Ok(RoleFit { cells, best })
    }

    pub fn best_cell(&self) -> &AgentSpec {
        &self.cells[self.best[0]].cell
    }

    pub fn min_nll(&self) -> f64 {
        self.cells[self.best[0]].nll
    }

    /// Cells ordered by NLL (stable for ties), with their rank starting at 1.
    pub fn ranked(&self) -> Vec<(usize, &CellFit)> {
        let mut idx: Vec<usize> = (0..self.cells.len()).collect();
        idx.sort_by(|&a, &b| self.cells[a].nll.total_cmp(&self.cells[b].nll));
        idx.into_iter()
            .enumerate()
            .map(|(rank, i)| (rank + 1, &self.cells[i]))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FitResult {
    pub investor: RoleFit,
    pub trustee: RoleFit,
    /// First-round simulations of the evaluation planner.
    pub budget: u32,
    pub seed: u64,
}

pub fn fit_role(record: &GameRecord, cells: &[AgentSpec], cache: &ModelCache) -> Result<RoleFit> {
    let fits = cells
        .iter()
        .map(|cell| {
            let r = role_nll(record, cell, cache)?;
            Ok(CellFit {
                cell: *cell,
                nll: r.nll,
                clamped: r.clamped,
                likelihoods: r.likelihoods,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    RoleFit::from_cells(fits)
}

/// Exhaustive grid evaluation. The roles decouple given the record, so each
/// is fitted on its own cells.
pub fn fit(record: &GameRecord, grid: &ParameterGrid, config: &PlannerConfig) -> Result<FitResult> {
    record.validate()?;
    if record.rounds.len() != crate::game::ROUNDS {
        return Err(Error::InvalidRecord("fits need a complete game".to_string()));
    }
    let cache = ModelCache::new(*config);
    fit_with_cache(record, grid, &cache)
}

pub fn fit_with_cache(record: &GameRecord, grid: &ParameterGrid, cache: &ModelCache) -> Result<FitResult> {
    Ok(FitResult {
        investor: fit_role(record, &grid.investor, cache)?,
        trustee: fit_role(record, &grid.trustee, cache)?,
        budget: cache.config().simulations,
        seed: cache.config().seed,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parameter {
    Guilt,
    Tom,
    Planning,
}

impl Parameter {
    pub const ALL: [Parameter; 3] = [Parameter::Guilt, Parameter::Tom, Parameter::Planning];

    pub fn label(self) -> &'static str {
        match self {
            Parameter::Guilt => "guilt",
            Parameter::Tom => "tom",
            Parameter::Planning => "planning",
        }
    }

    /// Value of this parameter in a spec, scaled to an integer key.
    pub fn key(self, spec: &AgentSpec) -> i64 {
        match self {
            Parameter::Guilt => libm::round(spec.guilt.value() * 10.0) as i64,
            Parameter::Tom => spec.tom as i64,
            Parameter::Planning => spec.planning as i64,
        }
    }

    fn display(self, key: i64) -> String {
        match self {
            Parameter::Guilt => GuiltType::from_value(key as f64 / 10.0)
                .map(|g| alloc::format!("{}", g.value()))
                .unwrap_or_else(|_| key.to_string()),
            _ => key.to_string(),
        }
    }
}

/// `P(estimated | true)` for one parameter of one role.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConfusionMatrix {
    pub parameter: Parameter,
    pub role: Role,
    pub labels: Vec<String>,
    /// Rows are true values, columns estimates.
    pub matrix: Vec<Vec<f64>>,
    /// Records behind each row.
    pub row_counts: Vec<usize>,
}

impl ConfusionMatrix {
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.labels.len()).map(|i| self.matrix[i][i]).collect()
    }

    pub fn min_diagonal(&self) -> f64 {
        self.diagonal()
            .iter()
            .zip(&self.row_counts)
            .filter(|(_, &n)| n > 0)
            .map(|(d, _)| *d)
            .fold(f64::INFINITY, f64::min)
    }

    /// Mass above minus mass below the diagonal, averaged over rows.
    pub fn upward_skew(&self) -> f64 {
        let n = self.labels.len();
        let mut s = 0.0;
        let mut rows = 0;
        for i in 0..n {
            if self.row_counts[i] == 0 {
                continue;
            }
            rows += 1;
            for j in 0..n {
                if j > i {
                    s += self.matrix[i][j];
                } else if j < i {
                    s -= self.matrix[i][j];
                }
            }
        }
        if rows == 0 {
            0.0
        } else {
            s / rows as f64
        }
    }
}

/// One generated record's true cells and its fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FittedRecord {
    pub true_investor: AgentSpec,
    pub true_trustee: AgentSpec,
    pub fit: FitResult,
}

/// Tabulates marginal confusion matrices. Ties share the record's mass
/// evenly among the tied cells.
pub fn tabulate(grid: &ParameterGrid, fitted: &[FittedRecord]) -> Vec<ConfusionMatrix> {
    let mut out = Vec::new();
    for role in [Role::Investor, Role::Trustee] {
        for param in Parameter::ALL {
            let mut keys: Vec<i64> = grid.cells(role).iter().map(|c| param.key(c)).collect();
            keys.sort_unstable();
            keys.dedup();
            let pos: HashMap<i64, usize> = keys.iter().enumerate().map(|(i, &k)| (k, i)).collect();
            let n = keys.len();
            let mut m = alloc::vec![alloc::vec![0.0; n]; n];
            let mut counts = alloc::vec![0usize; n];
            for f in fitted {
                let (truth, rf) = match role {
                    Role::Investor => (&f.true_investor, &f.fit.investor),
                    Role::Trustee => (&f.true_trustee, &f.fit.trustee),
                };
                let Some(&row) = pos.get(&param.key(truth)) else {
                    continue;
                };
                counts[row] += 1;
                let share = 1.0 / rf.best.len() as f64;
                for &b in &rf.best {
                    if let Some(&col) = pos.get(&param.key(&rf.cells[b].cell)) {
                        m[row][col] += share;
                    }
                }
            }
            for (row, &c) in m.iter_mut().zip(&counts) {
                if c > 0 {
                    for v in row.iter_mut() {
                        *v /= c as f64;
                    }
                }
            }
            out.push(ConfusionMatrix {
                parameter: param,
                role,
                labels: keys.iter().map(|&k| param.display(k)).collect(),
                matrix: m,
                row_counts: counts,
            });
        }
    }
    out
}

/// Generates `repetitions` records for every investor × trustee pairing of
/// the grid, fits each on the same grid and tabulates. Sequential; see the
/// companion crate for a parallel driver.
pub fn confusion(
    grid: &ParameterGrid,
    repetitions: usize,
    config: &PlannerConfig,
) -> Result<Vec<ConfusionMatrix>> {
    if repetitions == 0 {
        return Err(Error::Config("repetitions must be at least 1".into()));
    }
    let shared = ModelCache::new(*config);
    let mut fitted = Vec::new();
    let mut pairing = 0;
    for inv in &grid.investor {
        for tr in &grid.trustee {
            for rep in 0..repetitions {
                let seed = batch_seed(config.seed, pairing, rep);
                fitted.push(generate_and_fit(inv, tr, grid, &shared, seed)?);
            }
            pairing += 1;
        }
    }
    Ok(tabulate(grid, &fitted))
}

/// Plays one dyad with `seed` and fits it; the fit uses an independent
/// evaluation seed derived from the same value.
pub fn generate_and_fit(
    investor: &AgentSpec,
    trustee: &AgentSpec,
    grid: &ParameterGrid,
    shared: &ModelCache,
    seed: u64,
) -> Result<FittedRecord> {
    let config = *shared.config();
    let play = shared.with_config(config.seeded(seed));
    let record = play_dyad_with_cache(investor, trustee, &play)?;
    let eval = shared.with_config(config.seeded(crate::seed::derive(seed, &0xf17_u32)));
    Ok(FittedRecord {
        true_investor: *investor,
        true_trustee: *trustee,
        fit: fit_with_cache(&record, grid, &eval)?,
    })
}

/// One row of raw experimental data. Rounds are numbered from 1.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RawRow {
    pub dyad_id: String,
    pub round: u32,
    pub invested_amount: i64,
    pub returned_amount: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Rejection {
    pub dyad_id: String,
    pub round: Option<u32>,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub records: Vec<GameRecord>,
    pub rejected: Vec<Rejection>,
}

/// Categorises one game given as `(invested, returned)` amounts per round.
pub fn ingest_game(dyad_id: Option<String>, amounts: &[(i64, i64)]) -> Result<GameRecord> {
    if amounts.len() != crate::game::ROUNDS {
        return Err(Error::InvalidRecord(alloc::format!(
            "{} rounds (expected {})",
            amounts.len(),
            crate::game::ROUNDS
        )));
    }
    let exchanges = amounts
        .iter()
        .map(|&(inv, ret)| {
            let i = classify_investment(inv)?;
            let t = classify_return(ret, inv)?;
            Exchange::new(i, t)
        })
        .collect::<Result<Vec<_>>>()?;
    GameRecord::observed(dyad_id, &exchanges)
}

/// Groups rows by dyad (in order of first appearance) and categorises each
/// complete game. A dyad with any bad row is rejected as a whole and every
/// offending row is reported.
pub fn ingest_observed(rows: &[RawRow]) -> IngestReport {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: HashMap<&str, Vec<&RawRow>> = HashMap::new();
    for r in rows {
        let g = groups.entry(r.dyad_id.as_str()).or_insert_with(|| {
            order.push(r.dyad_id.as_str());
            Vec::new()
        });
        g.push(r);
    }
    let mut report = IngestReport::default();
    for id in order {
        let mut g = groups.remove(id).unwrap_or_default();
        g.sort_by_key(|r| r.round);
        let mut problems = Vec::new();
        for r in &g {
            if let Err(e) = classify_investment(r.invested_amount)
                .and_then(|_| classify_return(r.returned_amount, r.invested_amount))
            {
                problems.push(Rejection {
                    dyad_id: id.to_string(),
                    round: Some(r.round),
                    reason: e.to_string(),
                });
            }
        }
        let rounds: Vec<u32> = g.iter().map(|r| r.round).collect();
        let expected: Vec<u32> = (1..=crate::game::ROUNDS as u32).collect();
        if rounds != expected {
            problems.push(Rejection {
                dyad_id: id.to_string(),
                round: None,
                reason: alloc::format!("rounds {rounds:?} are not 1..=10 each exactly once"),
            });
        }
        if !problems.is_empty() {
            report.rejected.extend(problems);
            continue;
        }
        let amounts: Vec<(i64, i64)> = g
            .iter()
            .map(|r| (r.invested_amount, r.returned_amount))
            .collect();
        match ingest_game(Some(id.to_string()), &amounts) {
            Ok(rec) => report.records.push(rec),
            Err(e) => report.rejected.push(Rejection {
                dyad_id: id.to_string(),
                round: None,
                reason: e.to_string(),
            }),
        }
    }
    report
}
