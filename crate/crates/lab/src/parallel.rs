//! Multi-threaded drivers. Each work unit gets its own model cache built
//! from shared level 0 tables; results are collected in the same order as
//! the sequential drivers in core, and are identical to them.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use trustgame_core::hierarchy::DEFAULT_BETA;
use trustgame_core::inference::{
    fit_role, generate_and_fit, tabulate, CellFit, ConfusionMatrix, FitResult, FittedRecord,
    ParameterGrid, RoleFit,
};
use trustgame_core::simulator::{
    batch_seed, first_action_policy_with_cache, play_dyad_with_cache, reference_seed, subject_seed,
    DiscrepancyMatrix, GameRecord,
};
use trustgame_core::{AgentSpec, Error, Level0Tables, ModelCache, PlannerConfig, Policy, Result, Role};

/// A worker pool plus the level 0 tables its jobs share.
pub struct Runner {
    pool: rayon::ThreadPool,
    tables: Level0Tables,
}

impl Runner {
    /// `workers = None` uses the available parallelism.
    pub fn new(workers: Option<usize>) -> anyhow::Result<Self> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = workers {
            anyhow::ensure!(n > 0, "worker count must be at least 1");
            b = b.num_threads(n);
        }
        let mut tables = Level0Tables::new();
        tables.prepare(DEFAULT_BETA);
        Ok(Runner {
            pool: b.build()?,
            tables,
        })
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }

    fn prepare<'a>(&mut self, specs: impl IntoIterator<Item = &'a AgentSpec>) {
        for s in specs {
            self.tables.prepare(s.beta);
        }
    }

    fn cache(&self, config: PlannerConfig) -> ModelCache {
        ModelCache::with_tables(config, &self.tables)
    }

    /// Plays every pairing `repetitions` times; records are grouped by
    /// pairing and ordered by repetition.
    pub fn batch(
        &mut self,
        pairings: &[(AgentSpec, AgentSpec)],
        repetitions: usize,
        config: &PlannerConfig,
    ) -> Result<Vec<Vec<GameRecord>>> {
        if repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        config.validate()?;
        self.prepare(pairings.iter().flat_map(|(i, t)| [i, t]));
        let jobs: Vec<(usize, usize)> = (0..pairings.len())
            .flat_map(|p| (0..repetitions).map(move |r| (p, r)))
            .collect();
        let records: Vec<GameRecord> = self.pool.install(|| {
            jobs.par_iter()
                .map(|&(p, r)| {
                    let cache = self.cache(config.seeded(batch_seed(config.seed, p, r)));
                    play_dyad_with_cache(&pairings[p].0, &pairings[p].1, &cache)
                })
                .collect::<Result<Vec<_>>>()
        })?;
        let mut it = records.into_iter();
        Ok((0..pairings.len())
            .map(|_| it.by_ref().take(repetitions).collect())
            .collect())
    }

    /// Fits one record on the grid. Cells sharing (role, ToM, horizon) run
    /// together so that they reuse nested partner models.
    pub fn fit(&mut self, record: &GameRecord, grid: &ParameterGrid, config: &PlannerConfig) -> Result<FitResult> {
        record.validate()?;
        if record.rounds.len() != trustgame_core::game::ROUNDS {
            return Err(Error::InvalidRecord("fits need a complete game".into()));
        }
        config.validate()?;
        self.prepare(grid.investor.iter().chain(&grid.trustee));
        let mut groups: Vec<(Role, i8, u8, Vec<usize>)> = Vec::new();
        for role in [Role::Investor, Role::Trustee] {
            for (i, c) in grid.cells(role).iter().enumerate() {
                match groups
                    .iter_mut()
                    .find(|g| g.0 == role && g.1 == c.tom && g.2 == c.planning)
                {
                    Some(g) => g.3.push(i),
                    None => groups.push((role, c.tom, c.planning, vec![i])),
                }
            }
        }
        let done: Vec<Vec<(Role, usize, CellFit)>> = self.pool.install(|| {
            groups
                .par_iter()
                .map(|(role, _, _, idx)| {
                    let cache = self.cache(*config);
                    let cells: Vec<AgentSpec> = idx.iter().map(|&i| grid.cells(*role)[i]).collect();
                    let rf = fit_role(record, &cells, &cache)?;
                    Ok(idx.iter().copied().zip(rf.cells).map(|(i, c)| (*role, i, c)).collect())
                })
                .collect::<Result<Vec<_>>>()
        })?;
        let mut inv: Vec<Option<CellFit>> = vec![None; grid.investor.len()];
        let mut tr: Vec<Option<CellFit>> = vec![None; grid.trustee.len()];
        for (role, i, c) in done.into_iter().flatten() {
            match role {
                Role::Investor => inv[i] = Some(c),
                Role::Trustee => tr[i] = Some(c),
            }
        }
        Ok(FitResult {
            investor: RoleFit::from_cells(inv.into_iter().map(|c| c.expect("every cell fitted")).collect())?,
            trustee: RoleFit::from_cells(tr.into_iter().map(|c| c.expect("every cell fitted")).collect())?,
            budget: config.simulations,
            seed: config.seed,
        })
    }

    /// Fits many records, one job per record.
    pub fn fit_many(&mut self, records: &[GameRecord], grid: &ParameterGrid, config: &PlannerConfig) -> Result<Vec<FitResult>> {
        config.validate()?;
        self.prepare(grid.investor.iter().chain(&grid.trustee));
        self.pool.install(|| {
            records
                .par_iter()
                .map(|r| {
                    r.validate()?;
                    trustgame_core::inference::fit_with_cache(r, grid, &self.cache(*config))
                })
                .collect()
        })
    }

    /// Generates `repetitions` records for each grid pairing, fits them and
    /// tabulates, exactly as [`trustgame_core::inference::confusion`].
    pub fn confusion(
        &mut self,
        grid: &ParameterGrid,
        repetitions: usize,
        config: &PlannerConfig,
    ) -> Result<(Vec<ConfusionMatrix>, Vec<FittedRecord>)> {
        if repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        config.validate()?;
        self.prepare(grid.investor.iter().chain(&grid.trustee));
        let mut jobs = Vec::new();
        let mut pairing = 0;
        for inv in &grid.investor {
            for tr in &grid.trustee {
                for rep in 0..repetitions {
                    jobs.push((*inv, *tr, batch_seed(config.seed, pairing, rep)));
                }
                pairing += 1;
            }
        }
        let fitted = self.pool.install(|| {
            jobs.par_iter()
                .map(|(inv, tr, seed)| generate_and_fit(inv, tr, grid, &self.cache(*config), *seed))
                .collect::<Result<Vec<_>>>()
        })?;
        Ok((tabulate(grid, &fitted), fitted))
    }

    /// First-action convergence with wall-clock timings.
    pub fn convergence(
        &mut self,
        spec: &AgentSpec,
        budgets: &[u32],
        reference_budget: u32,
        subjects: usize,
        reference_runs: usize,
        config: &PlannerConfig,
    ) -> Result<ConvergenceReport> {
        config.validate()?;
        if reference_runs == 0 || subjects < 2 {
            return Err(Error::EmptySample);
        }
        self.prepare([spec]);
        // fill the level 0 tables first so that no timed run pays for them
        let warm = PlannerConfig {
            simulations: 1,
            ..*config
        };
        first_action_policy_with_cache(spec, &self.cache(warm))?;
        let timed = |budget: u32, seed: u64| -> Result<(Policy, f64)> {
            let cfg = PlannerConfig {
                simulations: budget,
                seed,
                ..*config
            };
            let t = Instant::now();
            let p = first_action_policy_with_cache(spec, &self.cache(cfg))?;
            Ok((p, t.elapsed().as_secs_f64()))
        };
        let refs: Vec<(Policy, f64)> = self.pool.install(|| {
            (0..reference_runs)
                .into_par_iter()
                .map(|r| timed(reference_budget, reference_seed(config.seed, r)))
                .collect::<Result<Vec<_>>>()
        })?;
        let ref_policies: Vec<Policy> = refs.iter().map(|r| r.0).collect();
        let reference = Policy::mean(&ref_policies)?;
        let mut rows = Vec::new();
        for &b in budgets {
            let runs: Vec<(Policy, f64)> = self.pool.install(|| {
                (0..subjects)
                    .into_par_iter()
                    .map(|k| timed(b, subject_seed(config.seed, k)))
                    .collect::<Result<Vec<_>>>()
            })?;
            let policies: Vec<Policy> = runs.iter().map(|r| r.0).collect();
            let mean = Policy::mean(&policies)?;
            rows.push(BudgetRow {
                budget: b,
                mean_seconds: runs.iter().map(|r| r.1).sum::<f64>() / runs.len() as f64,
                mean_policy: mean.to_array(),
                mean_deviation: mean.max_abs_diff(&reference),
                policies: policies.iter().map(Policy::to_array).collect(),
                discrepancy: DiscrepancyMatrix::from_policies(&policies, &reference)?,
            });
        }
        Ok(ConvergenceReport {
            spec: *spec,
            reference_budget,
            reference_runs,
            reference: reference.to_array(),
            reference_policies: ref_policies.iter().map(Policy::to_array).collect(),
            reference_seconds: refs.iter().map(|r| r.1).sum::<f64>() / refs.len() as f64,
            rows,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BudgetRow {
    pub budget: u32,
    pub mean_seconds: f64,
    /// First-action distribution averaged over subjects.
    pub mean_policy: [f64; 5],
    /// L∞ distance between `mean_policy` and the reference.
    pub mean_deviation: f64,
    pub discrepancy: DiscrepancyMatrix,
    /// First-action distribution of each subject, in seed order.
    pub policies: Vec<[f64; 5]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConvergenceReport {
    pub spec: AgentSpec,
    pub reference_budget: u32,
    pub reference_runs: usize,
    pub reference: [f64; 5],
    pub reference_policies: Vec<[f64; 5]>,
    pub reference_seconds: f64,
    pub rows: Vec<BudgetRow>,
}
