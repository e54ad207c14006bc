//! Level −1 models: purely reactive agents that assume every partner type is
//! equally likely and act on immediate utilities only.

use crate::game::{utility_unchecked, GuiltType, InvestorAction, Role, N_ACTIONS};
use crate::hierarchy::{softmax_policy, Policy};

/// Immediate Fehr-Schmidt utilities of the trustee's five returns.
pub fn trustee_utilities(investment: InvestorAction, guilt: GuiltType) -> [f64; N_ACTIONS] {
    let mut u = [0.0; N_ACTIONS];
    let legal = crate::game::trustee_action_count(investment);
    for (t, slot) in u.iter_mut().enumerate().take(legal) {
        *slot = utility_unchecked(Role::Trustee, investment.index(), t, guilt.value());
    }
    u
}

pub fn trustee_policy(investment: InvestorAction, guilt: GuiltType, beta: f64) -> Policy {
    let legal = crate::game::trustee_action_count(investment);
    softmax_policy(&trustee_utilities(investment, guilt)[..legal], beta)
}

/// Expected immediate utility of each investment, marginalising over the three
/// trustee types (1/3 each) and their immediate-utility softmax responses.
pub fn investor_values(guilt: GuiltType, beta: f64) -> [f64; N_ACTIONS] {
    let mut values = [0.0; N_ACTIONS];
    for inv in InvestorAction::ALL {
        let mut v = 0.0;
        for partner in GuiltType::ALL {
            let response = trustee_policy(inv, partner, beta);
            for t in 0..response.len() {
                v += response.prob(t)
                    * utility_unchecked(Role::Investor, inv.index(), t, guilt.value())
                    / 3.0;
            }
        }
        values[inv.index()] = v;
    }
    values
}

pub fn investor_policy(guilt: GuiltType, beta: f64) -> Policy {
    softmax_policy(&investor_values(guilt, beta), beta)
}

/// Dispatch on role. The trustee needs this round's investment; the
/// investor's physical state is static, so its policy ignores the round.
pub fn level_minus1_policy(
    role: Role,
    guilt: GuiltType,
    beta: f64,
    investment: Option<InvestorAction>,
) -> crate::Result<Policy> {
    match role {
        Role::Investor => Ok(investor_policy(guilt, beta)),
        Role::Trustee => investment
            .map(|inv| trustee_policy(inv, guilt, beta))
            .ok_or_else(|| crate::Error::Config("trustee policy needs the investment".into())),
    }
}
