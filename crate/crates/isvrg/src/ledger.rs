//! IFO accounting.
//!
//! An IFO (incremental first-order oracle) call is one evaluation of a pair
//! `(f_i(x), ∇f_i(x))`. The ledger keeps two monotone counters so that
//! algorithmic cost and diagnostic cost never mix:
//!
//! * `optimization`: oracle work the algorithm itself performs,
//! * `evaluation`: oracle work spent on diagnostics (trace objectives,
//!   gradient norms, enumeration oracles).

use serde::{Deserialize, Serialize};

/// Which counter an oracle call is charged to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LedgerChannel {
    Optimization,
    Evaluation,
}

/// Monotone IFO counters. Counters only ever increase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IfoLedger {
    optimization: u64,
    evaluation: u64,
}

impl IfoLedger {
    pub fn new() -> Self {
        IfoLedger::default()
    }

    pub fn charge(&mut self, channel: LedgerChannel, count: u64) {
        match channel {
            LedgerChannel::Optimization => self.optimization += count,
            LedgerChannel::Evaluation => self.evaluation += count,
        }
    }

    pub fn optimization_ifo(&self) -> u64 {
        self.optimization
    }

    pub fn evaluation_ifo(&self) -> u64 {
        self.evaluation
    }

    /// Fold another ledger into this one (used after parallel runs finish).
    pub fn merge(&mut self, other: &IfoLedger) {
        self.optimization += other.optimization;
        self.evaluation += other.evaluation;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn channels_are_independent() {
        let mut ledger = IfoLedger::new();
        ledger.charge(LedgerChannel::Optimization, 3);
        ledger.charge(LedgerChannel::Evaluation, 7);
        ledger.charge(LedgerChannel::Optimization, 2);
        assert_eq!(ledger.optimization_ifo(), 5);
        assert_eq!(ledger.evaluation_ifo(), 7);
    }

    #[test]
    fn merge_adds_both_channels() {
        let mut a = IfoLedger::new();
        a.charge(LedgerChannel::Optimization, 10);
        let mut b = IfoLedger::new();
        b.charge(LedgerChannel::Optimization, 5);
        b.charge(LedgerChannel::Evaluation, 1);
        a.merge(&b);
        assert_eq!(a.optimization_ifo(), 15);
        assert_eq!(a.evaluation_ifo(), 1);
    }
}
