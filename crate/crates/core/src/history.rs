use alloc::vec::Vec;
use core::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{InvestorAction, TrusteeAction, ROUNDS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Exchange {
    pub investor: InvestorAction,
    pub trustee: TrusteeAction,
}

impl Exchange {
    pub fn new(investor: InvestorAction, trustee: TrusteeAction) -> Result<Self> {
        if !trustee.is_legal_after(investor) {
            return Err(Error::IllegalReturn {
                investor: investor.category(),
                trustee: trustee.category(),
            });
        }
        Ok(Exchange { investor, trustee })
    }

    /// Dense index over the 21 legal pairs: 0 is the degenerate exchange,
    /// then `1 + 5·(investment − 1) + return`.
    pub const fn pair_index(self) -> usize {
        pair_index(self.investor.index(), self.trustee.index())
    }
}

pub const N_PAIRS: usize = 21;

pub const fn pair_index(investment: usize, ret: usize) -> usize {
    if investment == 0 {
        0
    } else {
        1 + 5 * (investment - 1) + ret
    }
}

/// Publicly observed play: completed exchanges plus, when the trustee is to
/// move, the current round's investment.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct History {
    pub exchanges: Vec<Exchange>,
    pub pending: Option<InvestorAction>,
}

impl Hash for History {
    fn hash<H: Hasher>(&self, state: &mut H) {
        for e in &self.exchanges {
            state.write_u8(e.pair_index() as u8);
        }
        state.write_u8(match self.pending {
            Some(a) => 100 + a.category(),
            None => 255,
        });
    }
}

impl History {
    pub fn new() -> Self {
        History::default()
    }

    pub fn from_exchanges(exchanges: Vec<Exchange>) -> Result<Self> {
        if exchanges.len() > ROUNDS {
            return Err(Error::InvalidRecord(alloc::format!(
                "{} exchanges exceed the game length",
                exchanges.len()
            )));
        }
        Ok(History {
            exchanges,
            pending: None,
        })
    }

    /// Zero-based index of the current round.
    pub fn round(&self) -> usize {
        self.exchanges.len()
    }

    pub fn is_complete(&self) -> bool {
        self.exchanges.len() >= ROUNDS
    }

    pub fn with_pending(mut self, investment: InvestorAction) -> Self {
        self.pending = Some(investment);
        self
    }

    /// Completes the pending exchange with the trustee's return.
    pub fn complete(&mut self, ret: TrusteeAction) -> Result<()> {
        let investor = self
            .pending
            .take()
            .ok_or_else(|| Error::Config("no pending investment to complete".into()))?;
        self.exchanges.push(Exchange::new(investor, ret)?);
        Ok(())
    }

    /// Compact key: one byte per exchange plus the pending marker.
    pub fn key_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.exchanges.len() + 1);
        out.extend(self.exchanges.iter().map(|e| e.pair_index() as u8));
        out.push(match self.pending {
            Some(a) => 100 + a.category(),
            None => 255,
        });
        out
    }
}
