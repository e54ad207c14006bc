//! Exact solvers for level 0 agents.
//!
//! A level 0 investor models the trustee at level −1, whose responses do not
//! depend on the round, so its belief (and hence its action values) depends
//! only on the multiset of exchanges seen so far. The future of such an agent
//! forms a recombining tree: the value of a node is a function of the
//! multiset and the number of remaining planning steps. [`Level0Investor`]
//! memoises that function in dense tables indexed by the combinatorial rank
//! of the multiset.
//!
//! A level 0 trustee gains nothing from planning: its actions cannot move the
//! level −1 investor it models, so future value is the same for every return.

use alloc::boxed::Box;
use core::alloc::Layout;
use core::sync::atomic::{AtomicU64, Ordering};

use once_cell::race::OnceBox;

use crate::belief::DirMultBelief;
use crate::game::{utility_unchecked, GuiltType, InvestorAction, Role, N_ACTIONS, ROUNDS};
use crate::hierarchy::{level_minus1, softmax_mean, softmax_policy, survives, Policy};
use crate::history::{pair_index, History, N_PAIRS};

const MAX_ITEMS: usize = ROUNDS;

const fn binomials() -> [[u64; MAX_ITEMS + 2]; 32] {
    let mut t = [[0u64; MAX_ITEMS + 2]; 32];
    let mut n = 0;
    while n < 32 {
        t[n][0] = 1;
        let mut k = 1;
        while k < MAX_ITEMS + 2 {
            t[n][k] = if n == 0 { 0 } else { t[n - 1][k - 1] + t[n - 1][k] };
            k += 1;
        }
        n += 1;
    }
    t
}

static BINOM: [[u64; MAX_ITEMS + 2]; 32] = binomials();

// offsets[m] = number of multisets (over the 21 pairs) of size < m
const fn size_offsets() -> [u64; MAX_ITEMS + 2] {
    let b = binomials();
    let mut off = [0u64; MAX_ITEMS + 2];
    let mut m = 0;
    while m < MAX_ITEMS + 1 {
        off[m + 1] = off[m] + b[N_PAIRS - 1 + m][m];
        m += 1;
    }
    off
}

static OFFSETS: [u64; MAX_ITEMS + 2] = size_offsets();

/// Multiset of exchanges, as counts per pair index.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct PairCounts {
    counts: [u8; N_PAIRS],
    size: u8,
}

impl PairCounts {
    pub fn from_history(history: &History) -> Self {
        let mut c = PairCounts::default();
        for e in &history.exchanges {
            c.push(e.pair_index());
        }
        c
    }

    #[inline]
    pub fn push(&mut self, pair: usize) {
        self.counts[pair] += 1;
        self.size += 1;
    }

    #[inline]
    pub fn pop(&mut self, pair: usize) {
        self.counts[pair] -= 1;
        self.size -= 1;
    }

    pub fn size(&self) -> usize {
        self.size as usize
    }

    pub fn count(&self, pair: usize) -> u8 {
        self.counts[pair]
    }

    /// Position among all multisets of size ≤ `MAX_ITEMS`, ordered by size
    /// then combinatorial rank.
    fn index(&self) -> usize {
        let mut rank = 0u64;
        let mut i = 0usize;
        for (x, &c) in self.counts.iter().enumerate() {
            for _ in 0..c {
                i += 1;
                rank += BINOM[x + i - 1][i];
            }
        }
        (OFFSETS[self.size as usize] + rank) as usize
    }
}

struct Table {
    // stored as !bits so that zeroed memory means "not computed"
    cells: Box<[AtomicU64]>,
}

impl Table {
    fn new(len: usize) -> Self {
        let layout = Layout::array::<AtomicU64>(len).expect("table size fits in memory");
        // zeroed allocation leaves untouched pages unmapped; the larger
        // tables are only sparsely visited
        let cells = unsafe {
            let ptr = alloc::alloc::alloc_zeroed(layout) as *mut AtomicU64;
            if ptr.is_null() {
                alloc::alloc::handle_alloc_error(layout);
            }
            Box::from_raw(core::ptr::slice_from_raw_parts_mut(ptr, len))
        };
        Table { cells }
    }

    #[inline]
    fn get(&self, idx: usize) -> Option<f64> {
        let v = self.cells[idx].load(Ordering::Relaxed);
        (v != 0).then(|| f64::from_bits(!v))
    }

    #[inline]
    fn set(&self, idx: usize, value: f64) {
        self.cells[idx].store(!value.to_bits(), Ordering::Relaxed);
    }
}

/// Number of decision steps a level 0 agent evaluates at `round`
/// (the current one plus up to `planning` further ones inside the game).
pub fn planning_steps(round: usize, planning: u8) -> usize {
    if round >= ROUNDS {
        0
    } else {
        (planning as usize).min(ROUNDS - 1 - round) + 1
    }
}

/// Memoised exact solver for a level 0 investor of one guilt type.
///
/// Safe to share between threads; concurrent writers store identical values.
pub struct Level0Investor {
    guilt: GuiltType,
    beta: f64,
    reward: [f64; N_PAIRS],
    likelihood: [[f64; 3]; N_PAIRS],
    // expected immediate utility of each investment under each trustee type
    immediate: [[f64; 3]; N_ACTIONS],
    tables: [OnceBox<Table>; MAX_ITEMS + 1],
}

impl Level0Investor {
    pub fn new(guilt: GuiltType, beta: f64) -> Self {
        let mut reward = [0.0; N_PAIRS];
        let mut likelihood = [[0.0; 3]; N_PAIRS];
        let mut immediate = [[0.0; 3]; N_ACTIONS];
        for inv in InvestorAction::ALL {
            let responses = GuiltType::ALL.map(|g| level_minus1::trustee_policy(inv, g, beta));
            for t in 0..crate::game::trustee_action_count(inv) {
                let x = pair_index(inv.index(), t);
                reward[x] = utility_unchecked(Role::Investor, inv.index(), t, guilt.value());
                for j in 0..3 {
                    likelihood[x][j] = responses[j].prob(t);
                    immediate[inv.index()][j] += responses[j].prob(t) * reward[x];
                }
            }
        }
        Level0Investor {
            guilt,
            beta,
            reward,
            likelihood,
            immediate,
            tables: Default::default(),
        }
    }

    pub fn guilt(&self) -> GuiltType {
        self.guilt
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Dirichlet parameters implied by the multiset, summed in pair order.
    fn params(&self, m: &PairCounts) -> [f64; 3] {
        let mut a = [1.0; 3];
        for (x, &c) in m.counts.iter().enumerate() {
            if c > 0 {
                let c = c as f64;
                for j in 0..3 {
                    a[j] += c * self.likelihood[x][j];
                }
            }
        }
        a
    }

    pub fn belief(&self, m: &PairCounts) -> DirMultBelief {
        DirMultBelief::from_params(self.params(m)).expect("parameters start at 1")
    }

    /// Probability of each trustee type producing `pair`.
    pub fn pair_likelihood(&self, pair: usize) -> [f64; 3] {
        self.likelihood[pair]
    }

    fn table(&self, steps: usize) -> &Table {
        self.tables[steps].get_or_init(|| {
            // sizes 0..=MAX_ITEMS − steps
            Box::new(Table::new(OFFSETS[MAX_ITEMS - steps + 1] as usize))
        })
    }

    fn q_inner(&self, m: &mut PairCounts, steps: usize) -> [f64; N_ACTIONS] {
        let a = self.params(m);
        let total = a[0] + a[1] + a[2];
        let p = [a[0] / total, a[1] / total, a[2] / total];
        let mut q = [0.0; N_ACTIONS];
        if steps <= 1 {
            for (inv, slot) in q.iter_mut().enumerate() {
                let u = &self.immediate[inv];
                *slot = p[0] * u[0] + p[1] * u[1] + p[2] * u[2];
            }
            return q;
        }
        for (inv, slot) in q.iter_mut().enumerate() {
            let legal = if inv == 0 { 1 } else { N_ACTIONS };
            let mut acc = 0.0;
            for t in 0..legal {
                let x = pair_index(inv, t);
                let l = &self.likelihood[x];
                let prob = p[0] * l[0] + p[1] * l[1] + p[2] * l[2];
                m.push(x);
                let w = self.value(m, steps - 1);
                m.pop(x);
                acc += prob * (self.reward[x] + w);
            }
            *slot = acc;
        }
        q
    }

    /// Softmax-weighted value of standing at `m` with `steps` decisions left.
    fn value(&self, m: &mut PairCounts, steps: usize) -> f64 {
        match steps {
            0 => 0.0,
            1 => softmax_mean(&self.q_inner(m, 1), self.beta),
            _ => {
                debug_assert!(m.size() + steps <= MAX_ITEMS);
                let table = self.table(steps);
                let idx = m.index();
                if let Some(v) = table.get(idx) {
                    return v;
                }
                let v = softmax_mean(&self.q_inner(m, steps), self.beta);
                table.set(idx, v);
                v
            }
        }
    }

    /// Action values with `steps` decisions in view (1 = immediate only).
    pub fn qvalues_for_steps(&self, counts: &PairCounts, steps: usize) -> [f64; N_ACTIONS] {
        let mut m = *counts;
        let steps = steps.min(MAX_ITEMS - m.size()).max(1);
        self.q_inner(&mut m, steps)
    }

    pub fn qvalues(&self, counts: &PairCounts, round: usize, planning: u8) -> [f64; N_ACTIONS] {
        self.qvalues_for_steps(counts, planning_steps(round, planning))
    }

    pub fn policy(&self, counts: &PairCounts, round: usize, planning: u8) -> Policy {
        softmax_policy(&self.qvalues(counts, round, planning), self.beta)
    }
}

/// A level 0 trustee responds exactly like a level −1 trustee of the same
/// guilt, whatever its planning horizon.
pub fn level0_trustee_policy(investment: InvestorAction, guilt: GuiltType, beta: f64) -> Policy {
    level_minus1::trustee_policy(investment, guilt, beta)
}

/// Full Bellman evaluation for a planning level 0 trustee. Used to check that
/// planning does not change its policy; [`level0_trustee_policy`] is the
/// production path.
///
/// `investments` are all investments observed so far including the current
/// one (the last element), which the trustee is about to answer.
pub fn level0_trustee_planning_qvalues(
    guilt: GuiltType,
    beta: f64,
    planning: u8,
    investments: &[InvestorAction],
) -> [f64; N_ACTIONS] {
    let current = *investments.last().expect("current investment required");
    let round = investments.len() - 1;
    let partner: [Policy; 3] = GuiltType::ALL.map(|g| level_minus1::investor_policy(g, beta));
    let mut counts = [0u32; N_ACTIONS];
    for inv in investments {
        counts[inv.index()] += 1;
    }
    let solver = TrusteePlanner {
        guilt,
        beta,
        planning,
        root_round: round,
        partner,
    };
    let future = solver.future(&mut counts, 1);
    let mut q = [0.0; N_ACTIONS];
    for t in 0..crate::game::trustee_action_count(current) {
        q[t] = utility_unchecked(Role::Trustee, current.index(), t, guilt.value()) + future;
    }
    q
}

struct TrusteePlanner {
    guilt: GuiltType,
    beta: f64,
    planning: u8,
    root_round: usize,
    partner: [Policy; 3],
}

impl TrusteePlanner {
    fn params(&self, counts: &[u32; N_ACTIONS]) -> [f64; 3] {
        let mut a = [1.0; 3];
        for (c, &n) in counts.iter().enumerate() {
            for (j, slot) in a.iter_mut().enumerate() {
                *slot += n as f64 * self.partner[j].prob(c);
            }
        }
        a
    }

    // value of everything from the next investment on, `steps` ahead
    fn future(&self, counts: &mut [u32; N_ACTIONS], steps: usize) -> f64 {
        if !survives(steps, self.root_round, self.planning) {
            return 0.0;
        }
        let a = self.params(counts);
        let total = a[0] + a[1] + a[2];
        let mut v = 0.0;
        for inv in InvestorAction::ALL {
            let prob: f64 = (0..3).map(|j| a[j] / total * self.partner[j].prob(inv.index())).sum();
            counts[inv.index()] += 1;
            let next = self.future(counts, steps + 1);
            counts[inv.index()] -= 1;
            let legal = crate::game::trustee_action_count(inv);
            let mut q = [0.0; N_ACTIONS];
            for (t, slot) in q.iter_mut().enumerate().take(legal) {
                *slot = utility_unchecked(Role::Trustee, inv.index(), t, self.guilt.value()) + next;
            }
            v += prob * softmax_mean(&q[..legal], self.beta);
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::TrusteeAction;
    use crate::history::Exchange;

    const BETA: f64 = 1.0 / 3.0;

    #[test]
    fn offsets_match_multiset_counts() {
        // C(20 + m, m) multisets of size m over 21 symbols
        assert_eq!(OFFSETS[1], 1);
        assert_eq!(OFFSETS[2] - OFFSETS[1], 21);
        assert_eq!(OFFSETS[3] - OFFSETS[2], 231);
    }

    #[test]
    fn multiset_index_is_a_bijection_for_small_sizes() {
        let mut seen = alloc::collections::BTreeSet::new();
        for a in 0..N_PAIRS {
            for b in a..N_PAIRS {
                let mut m = PairCounts::default();
                m.push(a);
                m.push(b);
                let idx = m.index();
                assert!(idx >= OFFSETS[2] as usize && idx < OFFSETS[3] as usize);
                assert!(seen.insert(idx));
            }
        }
        assert_eq!(seen.len(), 231);
    }

    #[test]
    fn horizon_zero_is_immediate_expected_utility() {
        let solver = Level0Investor::new(GuiltType::Pragmatic, BETA);
        let q = solver.qvalues(&PairCounts::default(), 0, 0);
        let direct = level_minus1::investor_values(GuiltType::Pragmatic, BETA);
        for i in 0..N_ACTIONS {
            assert!((q[i] - direct[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn greedy_myopic_investor_keeps_endowment() {
        let solver = Level0Investor::new(GuiltType::Greedy, BETA);
        let q = solver.qvalues(&PairCounts::default(), 0, 0);
        assert_eq!(softmax_policy(&q, BETA).argmax(), 0);
    }

    #[test]
    fn planning_steps_respect_game_end() {
        assert_eq!(planning_steps(0, 7), 8);
        assert_eq!(planning_steps(5, 7), 5);
        assert_eq!(planning_steps(9, 7), 1);
        assert_eq!(planning_steps(9, 0), 1);
        assert_eq!(planning_steps(10, 2), 0);
    }

    #[test]
    fn belief_follows_accumulated_likelihoods() {
        let solver = Level0Investor::new(GuiltType::Guilty, BETA);
        let e = Exchange::new(InvestorAction::ALL[4], TrusteeAction::ALL[3]).unwrap();
        let h = History::from_exchanges(alloc::vec![e, e]).unwrap();
        let counts = PairCounts::from_history(&h);
        let mut expected = DirMultBelief::prior();
        for _ in 0..2 {
            let l = GuiltType::ALL.map(|g| {
                level_minus1::trustee_policy(InvestorAction::ALL[4], g, BETA).prob(3)
            });
            expected = expected.update(l).unwrap();
        }
        let got = solver.belief(&counts);
        for j in 0..3 {
            assert!((got.params()[j] - expected.params()[j]).abs() < 1e-12);
        }
        assert_eq!(got.mode(), GuiltType::Guilty);
    }

    #[test]
    fn trustee_planning_shifts_values_uniformly() {
        let invs = [InvestorAction::ALL[2], InvestorAction::ALL[4]];
        let q0 = level0_trustee_planning_qvalues(GuiltType::Pragmatic, BETA, 0, &invs);
        let q2 = level0_trustee_planning_qvalues(GuiltType::Pragmatic, BETA, 2, &invs);
        let shift = q2[0] - q0[0];
        assert!(shift > 0.0);
        for t in 0..N_ACTIONS {
            assert!((q2[t] - q0[t] - shift).abs() < 1e-9);
        }
    }
}
