//! Acceptance checks, one line per criterion.
//!
//! Cheap criteria always run. Long experiments are listed in `HEAVY` and
//! only run when `TRUSTGAME_ACCEPTANCE` is `full` or a comma-separated list
//! of their names; otherwise they print `GATED` with a cost estimate (one
//! core, release) and the last recorded outcome, if any.
//! `TRUSTGAME_WORKERS` sets the worker count. Exits nonzero on any failure.

use std::path::Path;
use std::time::Instant;

use trustgame::cli;
use trustgame::manifest::Manifest;
use trustgame::parallel::Runner;
use trustgame_core::game::{
    fehr_schmidt_utility, investor_payoff, trustee_action_count, trustee_payoff, ENDOWMENT, MULTIPLIER, N_ACTIONS,
};
use trustgame_core::hierarchy::exact::ordered_investor_qvalues;
use trustgame_core::hierarchy::level0::{level0_trustee_planning_qvalues, planning_steps};
use trustgame_core::hierarchy::{agent_decision, level_minus1, softmax_policy, DEFAULT_BETA};
use trustgame_core::inference::{uniform_baseline, uniform_nll, FittedRecord, Parameter, ParameterGrid};
use trustgame_core::simulator::{compare_rounds, total_gains, GameRecord};
use trustgame_core::stats::{mean, welch_greater};
use trustgame_core::{
    seed, AgentSpec, Exchange, GuiltType, History, InvestorAction, Level0Tables, ModelCache, PlannerConfig,
    Role, TrusteeAction,
};

const TOL: f64 = 1e-9;
/// Base seed of every seeded experiment below, fixed before any run.
const SEED: u64 = 1;

enum Status {
    Pass,
    Fail,
    Gated,
}

struct Line {
    name: &'static str,
    status: Status,
    detail: String,
    seconds: f64,
}

type Check = fn(&mut Ctx) -> Result<(bool, String), String>;

struct Ctx {
    runner: Runner,
    beta: f64,
}

const CHEAP: &[(&str, Check)] = &[
    ("baseline-nll", baseline_nll),
    ("theorem-suite", theorem_suite),
    ("payoff-conservation", payoff_conservation),
    ("determinism", determinism),
];

/// (name, check, estimated single-core cost and last recorded outcome)
const HEAVY: &[(&str, Check, &str)] = &[
    ("convergence-desk", convergence_desk, "~3 min; failed at seed 1 with RMS 0.204 > 0.15"),
    ("convergence-full", convergence_full, "~1.5 h; passed at seed 1, RMS < 1e-3 with a policy saturated on category 4"),
    ("cooperation-gains", cooperation_gains, "~15 min; failed at seed 1, 575.0 vs 571.0, p=0.30"),
    ("phenotype-coaxing", phenotype_coaxing, "~1 min; failed at seed 1, no early returns above half the pot in either arm"),
    ("phenotype-impulsivity", phenotype_impulsivity, "~1 min; passed at seed 1, 2.705 vs 3.025"),
    ("phenotype-greed", phenotype_greed, "~25 min; passed at seed 1, 2.883 vs 0.850"),
    ("confusion-reduced", confusion_reduced, "~100 h; never run"),
    ("horizon-7-vs-9", horizon_7_vs_9, "~25 min; passed at seed 1, smallest p 0.231"),
];

fn main() {
    let selection = std::env::var("TRUSTGAME_ACCEPTANCE").unwrap_or_default();
    let selected = |name: &str| selection == "full" || selection.split(',').any(|s| s.trim() == name);
    let workers = std::env::var("TRUSTGAME_WORKERS").ok().and_then(|w| w.parse().ok());
    let mut ctx = Ctx {
        runner: Runner::new(workers).expect("worker pool"),
        beta: DEFAULT_BETA,
    };

    let mut lines = Vec::new();
    for &(name, check) in CHEAP {
        lines.push(run_check(name, check, &mut ctx));
    }
    for &(name, check, cost) in HEAVY {
        let line = if selected(name) {
            run_check(name, check, &mut ctx)
        } else {
            Line {
                name,
                status: Status::Gated,
                detail: format!("not run ({cost}); set TRUSTGAME_ACCEPTANCE={name} or full"),
                seconds: 0.0,
            }
        };
        if matches!(line.status, Status::Gated) {
            print_line(&line);
        }
        lines.push(line);
    }
    let failed = lines.iter().filter(|l| matches!(l.status, Status::Fail)).count();
    let passed = lines.iter().filter(|l| matches!(l.status, Status::Pass)).count();
    let gated = lines.len() - failed - passed;
    println!("acceptance: {passed} passed, {failed} failed, {gated} gated");
    if failed > 0 {
        std::process::exit(1);
    }
}

fn run_check(name: &'static str, check: Check, ctx: &mut Ctx) -> Line {
    let t = Instant::now();
    let (status, detail) = match check(ctx) {
        Ok((true, d)) => (Status::Pass, d),
        Ok((false, d)) => (Status::Fail, d),
        Err(e) => (Status::Fail, format!("error: {e}")),
    };
    let line = Line {
        name,
        status,
        detail,
        seconds: t.elapsed().as_secs_f64(),
    };
    print_line(&line);
    line
}

fn print_line(l: &Line) {
    let tag = match l.status {
        Status::Pass => "PASS ",
        Status::Fail => "FAIL ",
        Status::Gated => "GATED",
    };
    println!("{tag} {:<22} {} [{:.1}s]", l.name, l.detail, l.seconds);
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn cfg(simulations: u32) -> PlannerConfig {
    PlannerConfig::with_simulations(simulations).seeded(SEED)
}

fn inv(tom: i8, alpha: f64, planning: u8) -> AgentSpec {
    AgentSpec::investor(tom, GuiltType::from_value(alpha).unwrap(), planning).unwrap()
}

fn tr(tom: i8, alpha: f64, planning: u8) -> AgentSpec {
    AgentSpec::trustee(tom, GuiltType::from_value(alpha).unwrap(), planning).unwrap()
}

// ---------------------------------------------------------------- baseline

fn baseline_nll(_: &mut Ctx) -> Result<(bool, String), String> {
    let expected = 10.0 * 5f64.ln();
    let b = uniform_baseline(10, 5);
    // the same value from a record whose ten investments are all scored
    let rec = trustgame_core::inference::ingest_game(None, &[(10, 10); 10]).map_err(err)?;
    let r = uniform_nll(&rec, Role::Investor);
    let ok = (b - expected).abs() < 1e-12 && (r - expected).abs() < 1e-12 && (b - 16.094).abs() < 5e-4 && (b * 10.0).round() == 161.0;
    Ok((ok, format!("uniform NLL {b:.6} (record {r:.6}), expected {expected:.6} ~ 16.1")))
}

// ---------------------------------------------------------------- theorems

/// Deterministic pseudo-random history of `len` rounds.
fn history(key: u64, len: usize) -> History {
    let ex = (0..len)
        .map(|i| {
            let a = seed::derive(key, &(i as u32, 0u8));
            let b = seed::derive(key, &(i as u32, 1u8));
            let inv = InvestorAction::ALL[(a % 5) as usize];
            let t = TrusteeAction::ALL[(b % trustee_action_count(inv) as u64) as usize];
            Exchange::new(inv, t).unwrap()
        })
        .collect();
    History::from_exchanges(ex).unwrap()
}

fn permuted(h: &History, key: u64) -> History {
    let mut ex = h.exchanges.clone();
    // Fisher-Yates with derived draws
    for i in (1..ex.len()).rev() {
        let j = (seed::derive(key, &(i as u32, 7u8)) % (i as u64 + 1)) as usize;
        ex.swap(i, j);
    }
    History::from_exchanges(ex).unwrap()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn theorem_suite(ctx: &mut Ctx) -> Result<(bool, String), String> {
    let beta = ctx.beta;
    let mut tables = Level0Tables::new();
    tables.prepare(beta);
    let cache = ModelCache::with_tables(cfg(10), &tables);
    let reactive = |h: &History, g: GuiltType| level_minus1::trustee_policy(h.pending.unwrap(), g, beta);
    let level0_trustee = |planning: u8| {
        move |h: &History, g: GuiltType| {
            let mut invs: Vec<InvestorAction> = h.exchanges.iter().map(|e| e.investor).collect();
            invs.push(h.pending.unwrap());
            let q = level0_trustee_planning_qvalues(g, beta, planning, &invs);
            softmax_policy(&q[..trustee_action_count(h.pending.unwrap())], beta)
        }
    };

    // level 0 investor values do not depend on the order of past exchanges:
    // the exact solver on permuted histories, and an ordered brute-force
    // recursion wherever the remaining horizon keeps it tractable
    let (mut t1, mut t1_cases) = (0.0f64, 0);
    for g in GuiltType::ALL {
        for planning in [0u8, 2, 7] {
            for k in 0..12u64 {
                let len = (k as usize * 7 + planning as usize) % 10;
                let h = history(k * 97 + g.index() as u64 * 13 + planning as u64, len);
                let hp = permuted(&h, k + 1000);
                let spec = inv(0, g.value(), planning);
                let a = agent_decision(&spec, &h, &cache).map_err(err)?.qvalues;
                let b = agent_decision(&spec, &hp, &cache).map_err(err)?.qvalues;
                t1 = t1.max(max_diff(&a, &b));
                if planning_steps(len, planning) <= 3 {
                    let oa = ordered_investor_qvalues(g, beta, planning, &h, &reactive);
                    let ob = ordered_investor_qvalues(g, beta, planning, &hp, &reactive);
                    t1 = t1.max(max_diff(&oa, &ob)).max(max_diff(&oa, &a));
                }
                t1_cases += 1;
            }
        }
    }

    // a level 0 trustee acts the same whatever its horizon
    let (mut t2, mut t2_cases) = (0.0f64, 0);
    for g in GuiltType::ALL {
        for k in 0..20u64 {
            let len = 1 + (k as usize % 10);
            let invs: Vec<InvestorAction> = (0..len)
                .map(|i| InvestorAction::ALL[(seed::derive(k + 500, &(i as u32)) % 5) as usize])
                .collect();
            let n = trustee_action_count(*invs.last().unwrap());
            let reference = level_minus1::trustee_policy(*invs.last().unwrap(), g, beta);
            for planning in [0u8, 2, 7] {
                let q = level0_trustee_planning_qvalues(g, beta, planning, &invs);
                let p = softmax_policy(&q[..n], beta);
                t2 = t2.max(max_diff(p.probs(), reference.probs()));
                t2_cases += 1;
            }
            let spec = tr(0, g.value(), 0);
            let h = history(k + 900, len - 1).with_pending(*invs.last().unwrap());
            let d = agent_decision(&spec, &h, &cache).map_err(err)?;
            t2 = t2.max(max_diff(d.policy.probs(), reference.probs()));
        }
    }

    // a level 1 investor, which models a planning level 0 trustee, acts as
    // a level 0 investor: brute force against the exact solver, and the
    // dispatch of level 1 specs
    let (mut t3, mut t3_cases) = (0.0f64, 0);
    for g in GuiltType::ALL {
        for planning in [0u8, 2, 7] {
            for k in 0..8u64 {
                let len = if planning == 7 { 7 + (k as usize % 3) } else { (k as usize * 3) % 10 };
                let h = history(k * 31 + 7 + g.index() as u64, len);
                let level0 = agent_decision(&inv(0, g.value(), planning), &h, &cache).map_err(err)?;
                let level1 = agent_decision(&inv(1, g.value(), planning), &h, &cache).map_err(err)?;
                t3 = t3.max(max_diff(level0.policy.probs(), level1.policy.probs()));
                if planning_steps(len, planning) <= 3 {
                    let q1 = ordered_investor_qvalues(g, beta, planning, &h, &level0_trustee(planning));
                    let p1 = softmax_policy(&q1, beta);
                    t3 = t3.max(max_diff(p1.probs(), level0.policy.probs()));
                }
                t3_cases += 1;
            }
        }
    }
    let ok = t1 <= TOL && t2 <= TOL && t3 <= TOL;
    Ok((
        ok,
        format!(
            "max deviation: order invariance {t1:.1e} ({t1_cases} histories), trustee horizon {t2:.1e} ({t2_cases}), level 1 = level 0 {t3:.1e} ({t3_cases}); tol {TOL:.0e}"
        ),
    ))
}

// ------------------------------------------------------ payoffs, utilities

fn payoff_conservation(_: &mut Ctx) -> Result<(bool, String), String> {
    let mut checked = 0;
    let mut bad = Vec::new();
    for ci in 0..N_ACTIONS {
        for ct in 0..N_ACTIONS {
            // independent oracle in money units: a_I = ci/4 of the
            // endowment, a_T = ct/6 of the tripled investment
            let a_i = ci as f64 / 4.0;
            let a_t = if ci == 0 { 0.0 } else { ct as f64 / 6.0 };
            let e = ENDOWMENT as f64;
            let m = MULTIPLIER as f64;
            let chi_i = e - e * a_i + m * e * a_i * a_t;
            let chi_t = m * e * a_i - m * e * a_i * a_t;
            if (chi_i + chi_t - (e + (m - 1.0) * e * a_i)).abs() > 1e-12 {
                bad.push(format!("oracle ({ci},{ct})"));
            }
            let i = InvestorAction::ALL[ci];
            let t = if ci == 0 { TrusteeAction::ALL[0] } else { TrusteeAction::ALL[ct] };
            if ci > 0 || ct == 0 {
                let pi = investor_payoff(i, t).map_err(err)?.as_f64();
                let pt = trustee_payoff(i, t).map_err(err)?.as_f64();
                if pi != chi_i || pt != chi_t {
                    bad.push(format!("payoff ({ci},{ct}): {pi},{pt} vs {chi_i},{chi_t}"));
                }
                for role in [Role::Investor, Role::Trustee] {
                    let (own, other) = match role {
                        Role::Investor => (chi_i, chi_t),
                        Role::Trustee => (chi_t, chi_i),
                    };
                    let u0 = fehr_schmidt_utility(role, i, t, GuiltType::Greedy).map_err(err)?;
                    if u0 != own {
                        bad.push(format!("collapse {role} ({ci},{ct})"));
                    }
                    for g in [GuiltType::Pragmatic, GuiltType::Guilty] {
                        let u = fehr_schmidt_utility(role, i, t, g).map_err(err)?;
                        let expect = own - g.value() * (own - other).max(0.0);
                        if (u - expect).abs() > 1e-12 {
                            bad.push(format!("utility {role} ({ci},{ct}) α={}", g.value()));
                        }
                    }
                }
            } else if trustee_payoff(i, TrusteeAction::ALL[ct]).is_ok() {
                bad.push(format!("return {ct} accepted after zero investment"));
            }
            checked += 1;
        }
    }
    Ok((
        bad.is_empty(),
        if bad.is_empty() {
            format!("{checked} pairs: χI+χT = 20+40·aI, α=0 utility = own payoff, zero investment degenerate")
        } else {
            format!("violations: {}", bad.join("; "))
        },
    ))
}

// ------------------------------------------------------------ convergence

/// Binding statistic: the largest per-action root-mean-square deviation of
/// the 20 subjects' first-action probabilities from the reference.
fn convergence(
    ctx: &mut Ctx,
    spec: AgentSpec,
    budget: u32,
    reference: u32,
    reference_runs: usize,
    tol: f64,
) -> Result<(bool, String), String> {
    let report = ctx
        .runner
        .convergence(&spec, &[budget], reference, 20, reference_runs, &cfg(budget))
        .map_err(err)?;
    let row = &report.rows[0];
    let rms = row.discrepancy.rms_deviation();
    Ok((
        rms <= tol,
        format!(
            "{spec} n={budget} vs {reference_runs}x{reference}: per-action RMS deviation {rms:.2e} (tol {tol}); worst single run {:.2e}, mean policy {:.2e}; reference {:.3?}; {:.1}s per run",
            row.discrepancy.max_abs_deviation,
            row.mean_deviation,
            report.reference,
            row.mean_seconds
        ),
    ))
}

fn convergence_desk(ctx: &mut Ctx) -> Result<(bool, String), String> {
    convergence(ctx, inv(2, 1.0, 2), 5_000, 50_000, 3, 0.15)
}

fn convergence_full(ctx: &mut Ctx) -> Result<(bool, String), String> {
    convergence(ctx, inv(2, 1.0, 7), 25_000, 200_000, 1, 0.1)
}

// --------------------------------------------------------- generated play

fn play(ctx: &mut Ctx, i: AgentSpec, t: AgentSpec, n: usize, budget: u32) -> Result<Vec<GameRecord>, String> {
    let mut groups = ctx.runner.batch(&[(i, t)], n, &cfg(budget)).map_err(err)?;
    Ok(groups.remove(0))
}

fn cooperation_gains(ctx: &mut Ctx) -> Result<(bool, String), String> {
    let long = play(ctx, inv(2, 1.0, 7), tr(1, 1.0, 7), 20, 5_000)?;
    let short = play(ctx, inv(2, 1.0, 2), tr(1, 1.0, 2), 20, 5_000)?;
    let g = |rs: &[GameRecord]| -> Vec<f64> { rs.iter().map(|r| total_gains(r).combined.as_f64()).collect() };
    let (a, b) = (g(&long), g(&short));
    let test = welch_greater(&a, &b).map_err(err)?;
    Ok((
        test.p_value < 0.05,
        format!(
            "combined gains P=7 {:.1} vs P=2 {:.1} (n=20 each), one-sided Welch p={:.4}; need p<0.05",
            mean(&a),
            mean(&b),
            test.p_value
        ),
    ))
}

fn investments(rs: &[GameRecord], rounds: std::ops::Range<usize>) -> Vec<f64> {
    rs.iter()
        .flat_map(|r| r.rounds[rounds.clone()].iter().map(|o| o.investor_action.category() as f64))
        .collect()
}

fn phenotype_coaxing(ctx: &mut Ctx) -> Result<(bool, String), String> {
    let investor = inv(0, 1.0, 7);
    let level1 = play(ctx, investor, tr(1, 0.4, 7), 20, 5_000)?;
    let level0 = play(ctx, investor, tr(0, 0.4, 0), 20, 5_000)?;
    // share of early non-degenerate returns above an even split of the pot
    let rate = |rs: &[GameRecord]| {
        let early: Vec<_> = rs
            .iter()
            .flat_map(|r| r.rounds[..3].iter())
            .filter(|o| o.investor_action.category() > 0)
            .collect();
        let above = early.iter().filter(|o| o.trustee_action.category() > 3).count();
        (above as f64 / early.len().max(1) as f64, early.len())
    };
    let ((r1, n1), (r0, n0)) = (rate(&level1), rate(&level0));
    Ok((
        r1 > r0,
        format!("rounds 1-3 returns above half the pot: level 1 {r1:.3} (of {n1}) vs level 0 {r0:.3} (of {n0})"),
    ))
}

fn phenotype_impulsivity(ctx: &mut Ctx) -> Result<(bool, String), String> {
    let investor = inv(0, 1.0, 2);
    let short = play(ctx, investor, tr(1, 0.4, 2), 20, 5_000)?;
    let long = play(ctx, investor, tr(1, 0.4, 7), 20, 5_000)?;
    let (a, b) = (mean(&investments(&short, 0..10)), mean(&investments(&long, 0..10)));
    Ok((
        a < b,
        format!("mean investment category against trustee P=2 {a:.3} vs P=7 {b:.3}"),
    ))
}

fn phenotype_greed(ctx: &mut Ctx) -> Result<(bool, String), String> {
    let rs = play(ctx, inv(2, 0.0, 7), tr(1, 0.0, 7), 20, 5_000)?;
    let (early, late) = (mean(&investments(&rs, 0..6)), mean(&investments(&rs, 6..10)));
    let per_round: Vec<String> = (0..10).map(|r| format!("{:.2}", mean(&investments(&rs, r..r + 1)))).collect();
    Ok((
        late < early,
        format!(
            "greedy dyads: mean investment rounds 1-6 {early:.3}, rounds 7-10 {late:.3} (per round {})",
            per_round.join(" ")
        ),
    ))
}

// -------------------------------------------------------------- inversion

fn tied_share(fitted: &[FittedRecord], role: Role, param: Parameter, filter: impl Fn(&FittedRecord) -> bool) -> Vec<(i64, f64)> {
    let mut tally: Vec<(i64, f64)> = Vec::new();
    for f in fitted.iter().filter(|f| filter(f)) {
        let rf = match role {
            Role::Investor => &f.fit.investor,
            Role::Trustee => &f.fit.trustee,
        };
        let share = 1.0 / rf.best.len() as f64;
        for &b in &rf.best {
            let k = param.key(&rf.cells[b].cell);
            match tally.iter_mut().find(|(key, _)| *key == k) {
                Some((_, v)) => *v += share,
                None => tally.push((k, share)),
            }
        }
    }
    tally
}

fn confusion_reduced(ctx: &mut Ctx) -> Result<(bool, String), String> {
    let (matrices, fitted) = ctx.runner.confusion(&ParameterGrid::full(), 5, &cfg(5_000)).map_err(err)?;
    let guilt_diag = |role: Role| {
        matrices
            .iter()
            .find(|m| m.role == role && m.parameter == Parameter::Guilt)
            .map(|m| m.min_diagonal())
            .unwrap_or(0.0)
    };
    let (di, dt) = (guilt_diag(Role::Investor), guilt_diag(Role::Trustee));
    let tally = tied_share(&fitted, Role::Investor, Parameter::Planning, |f| {
        f.true_investor.planning == 7 && f.true_trustee.tom == 1 && f.true_trustee.planning == 2
    });
    let modal = tally
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(k, _)| *k)
        .unwrap_or(-1);
    Ok((
        di >= 0.6 && dt >= 0.6 && modal == Parameter::Planning.key(&inv(0, 0.0, 2)),
        format!(
            "guilt diagonal min: investor {di:.3}, trustee {dt:.3} (need >= 0.6); P^I=7 vs P^T=2 trustee: recovered investor planning {tally:?}"
        ),
    ))
}

fn horizon_7_vs_9(ctx: &mut Ctx) -> Result<(bool, String), String> {
    let a = play(ctx, inv(2, 0.4, 7), tr(1, 0.4, 7), 20, 5_000)?;
    let b = play(ctx, inv(2, 0.4, 9), tr(1, 0.4, 9), 20, 5_000)?;
    let c = compare_rounds(&a, &b).map_err(err)?;
    let sig = c.significant_rounds(0.05);
    Ok((
        sig == 0,
        format!("rounds with p<0.05 (both roles, Welch): {sig}; smallest p {:.3}", c.min_p()),
    ))
}

// ------------------------------------------------------------- determinism

fn determinism(_: &mut Ctx) -> Result<(bool, String), String> {
    let tmp = tempfile::tempdir().map_err(err)?;
    let d = tmp.path();
    let p = |s: &str| d.join(s).to_str().unwrap().to_string();
    let commands: Vec<(String, Vec<String>)> = vec![
        ("sim".into(), split(&format!("simulate --investor investor:2,1,2 --trustee trustee:1,0.4,2 -n 200 --seed 3 --out-dir {}", p("sim")))),
        ("batch".into(), split(&format!("batch --investor investor:0,1,7 --trustee trustee:1,0,2 -r 3 -n 100 --seed 4 --out-dir {}", p("batch")))),
        ("fit".into(), split(&format!("fit --records {} --cell investor:2,1,2 --cell investor:0,0,2 --cell trustee:1,0.4,2 --cell trustee:0,1,0 -n 100 --out-dir {}", p("sim/record.json"), p("fit")))),
        ("export".into(), split(&format!("export trajectories --records {} --out-dir {}", p("batch/records.json"), p("export")))),
    ];
    let mut mismatches = Vec::new();
    let mut files = 0;
    for (dir, args) in &commands {
        cli::run(args.clone()).map_err(err)?;
        let manifest = Path::new(&p(dir)).join("manifest.json");
        let first = Manifest::load(&manifest).map_err(err)?;
        let bytes: Vec<Vec<u8>> = first
            .outputs
            .iter()
            .map(|o| std::fs::read(Path::new(&p(dir)).join(&o.path)).unwrap())
            .collect();
        let manifest_bytes = std::fs::read(&manifest).map_err(err)?;
        cli::run(vec!["replay".into(), manifest.to_str().unwrap().into()]).map_err(err)?;
        for (o, b) in first.outputs.iter().zip(&bytes) {
            files += 1;
            if std::fs::read(Path::new(&p(dir)).join(&o.path)).map_err(err)? != *b {
                mismatches.push(format!("{dir}/{}", o.path));
            }
        }
        if std::fs::read(&manifest).map_err(err)? != manifest_bytes {
            mismatches.push(format!("{dir}/manifest.json"));
        }
    }
    // worker count does not change results
    let one = format!("--workers 1 batch --investor investor:2,0.4,2 --trustee trustee:1,1,2 -r 4 -n 100 --seed 5 --out-dir {}", p("w1"));
    let two = format!("--workers 3 batch --investor investor:2,0.4,2 --trustee trustee:1,1,2 -r 4 -n 100 --seed 5 --out-dir {}", p("w3"));
    cli::run(split(&one)).map_err(err)?;
    cli::run(split(&two)).map_err(err)?;
    for f in ["records.json", "trajectories.csv", "gains.csv", "posteriors.csv"] {
        files += 1;
        if std::fs::read(d.join("w1").join(f)).map_err(err)? != std::fs::read(d.join("w3").join(f)).map_err(err)? {
            mismatches.push(format!("workers {f}"));
        }
    }
    Ok((
        mismatches.is_empty(),
        if mismatches.is_empty() {
            format!("{files} outputs and {} manifests byte-identical on replay and across worker counts", commands.len())
        } else {
            format!("differing: {}", mismatches.join(", "))
        },
    ))
}

fn split(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}
