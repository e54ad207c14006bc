//! The physical trust game.
//!
//! Each round the investor receives an endowment of 20 and sends a fraction
//! `a^I ∈ {0, 1/4, 1/2, 3/4, 1}` of it. The transfer is tripled and the trustee
//! returns a fraction `a^T ∈ {0, 1/6, 1/3, 1/2, 2/3}` of the tripled amount.
//! All monetary arithmetic is exact: payoffs are multiples of one half, so
//! [`Money`] stores half units.

use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ENDOWMENT: i64 = 20;
pub const MULTIPLIER: i64 = 3;
pub const ROUNDS: usize = 10;
pub const N_ACTIONS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Investor,
    Trustee,
}

impl Role {
    pub fn partner(self) -> Role {
        match self {
            Role::Investor => Role::Trustee,
            Role::Trustee => Role::Investor,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Investor => "investor",
            Role::Trustee => "trustee",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Exact amount of money, stored in half units.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Money(i64);

impl Money {
    pub const ZERO: Money = Money(0);

    pub const fn from_halves(halves: i64) -> Money {
        Money(halves)
    }

    pub const fn from_units(units: i64) -> Money {
        Money(2 * units)
    }

    pub const fn halves(self) -> i64 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 2.0
    }
}

impl core::ops::Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl core::ops::AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        self.0 += rhs.0;
    }
}

impl core::ops::Sub for Money {
    type Output = Money;
    fn sub(self, rhs: Money) -> Money {
        Money(self.0 - rhs.0)
    }
}

impl core::iter::Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::ZERO, |a, b| a + b)
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 % 2 == 0 {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}.5", self.0 / 2)
        }
    }
}

/// Investment category; the fraction sent is `category / 4`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct InvestorAction(u8);

impl InvestorAction {
    pub const ALL: [InvestorAction; N_ACTIONS] = [
        InvestorAction(0),
        InvestorAction(1),
        InvestorAction(2),
        InvestorAction(3),
        InvestorAction(4),
    ];

    pub fn new(category: u8) -> Result<Self> {
        if (category as usize) < N_ACTIONS {
            Ok(InvestorAction(category))
        } else {
            Err(Error::IllegalCategory(category))
        }
    }

    pub const fn category(self) -> u8 {
        self.0
    }

    pub const fn index(self) -> usize {
        self.0 as usize
    }

    /// Fraction of the endowment sent, as `(numerator, denominator)`.
    pub const fn fraction(self) -> (i64, i64) {
        (self.0 as i64, 4)
    }

    pub fn fraction_f64(self) -> f64 {
        self.0 as f64 / 4.0
    }

    /// Amount sent in whole money units (0, 5, 10, 15 or 20).
    pub const fn amount(self) -> i64 {
        ENDOWMENT * self.0 as i64 / 4
    }

    pub const fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl TryFrom<u8> for InvestorAction {
    type Error = Error;
    fn try_from(value: u8) -> Result<Self> {
        InvestorAction::new(value)
    }
}

impl From<InvestorAction> for u8 {
    fn from(a: InvestorAction) -> u8 {
        a.0
    }
}

/// Return category; the fraction of the tripled investment sent back is
/// `category / 6`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct TrusteeAction(u8);

impl TrusteeAction {
    pub const ALL: [TrusteeAction; N_ACTIONS] = [
        TrusteeAction(0),
        TrusteeAction(1),
        TrusteeAction(2),
        TrusteeAction(3),
        TrusteeAction(4),
    ];

    /// The only legal return after a zero investment.
    pub const DEGENERATE: TrusteeAction = TrusteeAction(0);

    pub fn new(category: u8) -> Result<Self> {
        if (category as usize) < N_ACTIONS {
            Ok(TrusteeAction(category))
        } else {
            Err(Error::IllegalCategory(category))
        }
    }

    pub const fn category(self) -> u8 {
        self.0
    }

    pub const fn index(self) -> usize {
        self.0 as usize
    }

    pub const fn fraction(self) -> (i64, i64) {
        (self.0 as i64, 6)
    }

    pub fn fraction_f64(self) -> f64 {
        self.0 as f64 / 6.0
    }

    pub fn is_legal_after(self, investment: InvestorAction) -> bool {
        !investment.is_zero() || self.0 == 0
    }
}

impl TryFrom<u8> for TrusteeAction {
    type Error = Error;
    fn try_from(value: u8) -> Result<Self> {
        TrusteeAction::new(value)
    }
}

impl From<TrusteeAction> for u8 {
    fn from(a: TrusteeAction) -> u8 {
        a.0
    }
}

/// Number of legal trustee categories after an investment (1 or 5).
pub const fn trustee_action_count(investment: InvestorAction) -> usize {
    if investment.is_zero() {
        1
    } else {
        N_ACTIONS
    }
}

pub fn legal_trustee_actions(investment: InvestorAction) -> &'static [TrusteeAction] {
    &TrusteeAction::ALL[..trustee_action_count(investment)]
}

fn check_pair(investment: InvestorAction, ret: TrusteeAction) -> Result<()> {
    if ret.is_legal_after(investment) {
        Ok(())
    } else {
        Err(Error::IllegalReturn {
            investor: investment.category(),
            trustee: ret.category(),
        })
    }
}

// χ^I = 20 − 20·a^I + 60·a^I·a^T with a^I = cI/4, a^T = cT/6; doubled:
// 40 − 10·cI + 5·cI·cT.
const fn investor_payoff_halves(ci: i64, ct: i64) -> i64 {
    2 * ENDOWMENT - 10 * ci + 5 * ci * ct
}

// χ^T = 60·a^I − 60·a^I·a^T; doubled: 30·cI − 5·cI·cT.
const fn trustee_payoff_halves(ci: i64, ct: i64) -> i64 {
    30 * ci - 5 * ci * ct
}

pub fn investor_payoff(investment: InvestorAction, ret: TrusteeAction) -> Result<Money> {
    check_pair(investment, ret)?;
    Ok(Money(investor_payoff_halves(
        investment.category() as i64,
        ret.category() as i64,
    )))
}

pub fn trustee_payoff(investment: InvestorAction, ret: TrusteeAction) -> Result<Money> {
    check_pair(investment, ret)?;
    Ok(Money(trustee_payoff_halves(
        investment.category() as i64,
        ret.category() as i64,
    )))
}

/// Inequality-aversion coefficient. Exactly three types exist.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub enum GuiltType {
    Greedy,
    Pragmatic,
    Guilty,
}

impl GuiltType {
    pub const ALL: [GuiltType; 3] = [GuiltType::Greedy, GuiltType::Pragmatic, GuiltType::Guilty];

    pub const fn value(self) -> f64 {
        match self {
            GuiltType::Greedy => 0.0,
            GuiltType::Pragmatic => 0.4,
            GuiltType::Guilty => 1.0,
        }
    }

    pub const fn index(self) -> usize {
        match self {
            GuiltType::Greedy => 0,
            GuiltType::Pragmatic => 1,
            GuiltType::Guilty => 2,
        }
    }

    pub const fn from_index(index: usize) -> GuiltType {
        match index {
            0 => GuiltType::Greedy,
            1 => GuiltType::Pragmatic,
            _ => GuiltType::Guilty,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            GuiltType::Greedy => "greedy",
            GuiltType::Pragmatic => "pragmatic",
            GuiltType::Guilty => "guilty",
        }
    }

    pub fn from_value(value: f64) -> Result<GuiltType> {
        GuiltType::ALL
            .into_iter()
            .find(|g| libm::fabs(g.value() - value) < 1e-9)
            .ok_or(Error::UnknownGuilt(value))
    }
}

impl TryFrom<f64> for GuiltType {
    type Error = Error;
    fn try_from(value: f64) -> Result<Self> {
        GuiltType::from_value(value)
    }
}

impl From<GuiltType> for f64 {
    fn from(g: GuiltType) -> f64 {
        g.value()
    }
}

impl fmt::Display for GuiltType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Payoffs of one completed exchange.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExchangeOutcome {
    pub investor_action: InvestorAction,
    pub trustee_action: TrusteeAction,
    pub investor_payoff: Money,
    pub trustee_payoff: Money,
}

impl ExchangeOutcome {
    pub fn new(investment: InvestorAction, ret: TrusteeAction) -> Result<Self> {
        Ok(ExchangeOutcome {
            investor_action: investment,
            trustee_action: ret,
            investor_payoff: investor_payoff(investment, ret)?,
            trustee_payoff: trustee_payoff(investment, ret)?,
        })
    }
}

/// `r = χ_self − α·max(χ_self − χ_other, 0)`.
pub fn fehr_schmidt_utility(
    role: Role,
    investment: InvestorAction,
    ret: TrusteeAction,
    guilt: GuiltType,
) -> Result<f64> {
    check_pair(investment, ret)?;
    Ok(utility_unchecked(role, investment.index(), ret.index(), guilt.value()))
}

/// Utility for category indices that the caller already knows to be legal.
pub(crate) fn utility_unchecked(role: Role, ci: usize, ct: usize, alpha: f64) -> f64 {
    let inv = investor_payoff_halves(ci as i64, ct as i64) as f64 / 2.0;
    let tru = trustee_payoff_halves(ci as i64, ct as i64) as f64 / 2.0;
    let (own, other) = match role {
        Role::Investor => (inv, tru),
        Role::Trustee => (tru, inv),
    };
    let ahead = own - other;
    if ahead > 0.0 {
        own - alpha * ahead
    } else {
        own
    }
}

/// Nearest of the centres {0, 5, 10, 15, 20}.
pub fn classify_investment(amount: i64) -> Result<InvestorAction> {
    if !(0..=ENDOWMENT).contains(&amount) {
        return Err(Error::AmountOutOfRange {
            amount,
            max: ENDOWMENT,
        });
    }
    InvestorAction::new(((amount + 2) / 5) as u8)
}

/// Nearest fraction `k/6` (k = 0..4) of the tripled investment; ties go to
/// the lower category. A zero investment yields the degenerate category.
pub fn classify_return(amount: i64, investment: i64) -> Result<TrusteeAction> {
    if !(0..=ENDOWMENT).contains(&investment) {
        return Err(Error::AmountOutOfRange {
            amount: investment,
            max: ENDOWMENT,
        });
    }
    let pot = MULTIPLIER * investment;
    if !(0..=pot).contains(&amount) {
        return Err(Error::AmountOutOfRange { amount, max: pot });
    }
    if investment == 0 {
        return Ok(TrusteeAction::DEGENERATE);
    }
    // compare |6·amount − k·pot| to stay in integers
    let mut best = 0u8;
    let mut best_dist = i64::MAX;
    for k in 0..N_ACTIONS as i64 {
        let dist = (6 * amount - k * pot).abs();
        if dist < best_dist {
            best_dist = dist;
            best = k as u8;
        }
    }
    TrusteeAction::new(best)
}
