//! Brute-force Bellman evaluation over ordered histories.
//!
//! Exponential in the horizon and only meant as an oracle: it makes no use of
//! the recombining structure and updates beliefs one observation at a time in
//! the order they happened, so agreement with the [`super::Level0Investor`]
//! tables checks both the tables and the order invariance they rely on.

use crate::belief::DirMultBelief;
use crate::game::{
    trustee_action_count, utility_unchecked, GuiltType, InvestorAction, Role, TrusteeAction,
    N_ACTIONS,
};
use crate::hierarchy::{level0::planning_steps, softmax_mean, Policy};
use crate::history::History;

/// Belief of an investor after `history`, updating in order with the
/// likelihoods given by `partner(prefix with pending investment, guilt)`.
pub fn ordered_belief<F>(history: &History, partner: &F) -> DirMultBelief
where
    F: Fn(&History, GuiltType) -> Policy,
{
    let mut b = DirMultBelief::prior();
    let mut prefix = History::new();
    for e in &history.exchanges {
        let before = prefix.clone().with_pending(e.investor);
        let l = GuiltType::ALL.map(|g| partner(&before, g).prob(e.trustee.index()));
        b = b.update_unchecked(l);
        prefix.exchanges.push(*e);
    }
    b
}

/// Investor action values at the end of `history` for a horizon of
/// `planning`, given an arbitrary model of the trustee's response.
pub fn ordered_investor_qvalues<F>(
    guilt: GuiltType,
    beta: f64,
    planning: u8,
    history: &History,
    partner: &F,
) -> [f64; N_ACTIONS]
where
    F: Fn(&History, GuiltType) -> Policy,
{
    let steps = planning_steps(history.round(), planning);
    let belief = ordered_belief(history, partner);
    let mut h = history.clone();
    qvalues(guilt, beta, &mut h, belief, steps.max(1), partner)
}

fn qvalues<F>(
    guilt: GuiltType,
    beta: f64,
    h: &mut History,
    belief: DirMultBelief,
    steps: usize,
    partner: &F,
) -> [f64; N_ACTIONS]
where
    F: Fn(&History, GuiltType) -> Policy,
{
    let p = belief.predictive();
    let mut q = [0.0; N_ACTIONS];
    for inv in InvestorAction::ALL {
        let before = h.clone().with_pending(inv);
        let responses = GuiltType::ALL.map(|g| partner(&before, g));
        let mut acc = 0.0;
        for t in 0..trustee_action_count(inv) {
            let l = [responses[0].prob(t), responses[1].prob(t), responses[2].prob(t)];
            let prob = p[0] * l[0] + p[1] * l[1] + p[2] * l[2];
            if prob == 0.0 {
                continue;
            }
            let mut v = utility_unchecked(Role::Investor, inv.index(), t, guilt.value());
            if steps > 1 {
                let mut next = before.clone();
                next.complete(TrusteeAction::ALL[t]).expect("legal by construction");
                let child = qvalues(guilt, beta, &mut next, belief.update_unchecked(l), steps - 1, partner);
                v += softmax_mean(&child, beta);
            }
            acc += prob * v;
        }
        q[inv.index()] = acc;
    }
    q
}
