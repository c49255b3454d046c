use serde::{Deserialize, Serialize};

use super::Profile;
use crate::record::Record;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsageEntry {
    pub tag: String,
    pub profile: Profile,
    pub provider: String,
    pub model: String,
    pub prompt_units: u64,
    pub completion_units: u64,
    pub elapsed_ms: u64,
    pub cached: bool,
    pub attempts: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageTotals {
    pub calls: u64,
    pub cached_calls: u64,
    pub prompt_units: u64,
    pub completion_units: u64,
    pub optimizer_calls: u64,
    pub executor_calls: u64,
}

/// Per-call usage with running totals.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UsageLedger {
    pub entries: Vec<UsageEntry>,
    pub totals: UsageTotals,
}

impl Record for UsageLedger {
    const KIND: &'static str = "usage_ledger";
}

impl UsageLedger {
    pub fn push(&mut self, entry: UsageEntry) {
        let t = &mut self.totals;
        t.calls += 1;
        t.cached_calls += u64::from(entry.cached);
        t.prompt_units += entry.prompt_units;
        t.completion_units += entry.completion_units;
        match entry.profile {
            Profile::Optimizer => t.optimizer_calls += 1,
            Profile::Executor => t.executor_calls += 1,
        }
        self.entries.push(entry);
    }

    /// Totals recomputed from the entries.
    pub fn recount(&self) -> UsageTotals {
        let mut fresh = UsageLedger::default();
        for e in &self.entries {
            fresh.push(e.clone());
        }
        fresh.totals
    }

    /// Number of calls whose tag names operator `op`.
    pub fn calls_for(&self, op: &str) -> usize {
        self.entries
            .iter()
            .filter(|e| e.tag.split('/').next() == Some(op))
            .count()
    }

    pub fn total_units(&self) -> u64 {
        self.totals.prompt_units + self.totals.completion_units
    }
}
