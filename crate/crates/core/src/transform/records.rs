use serde::{Deserialize, Serialize};

use crate::model::{AdjustmentOp, Flaw};
use crate::record::Record;

/// Root-cause analysis of an evaluation's errors.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemAnalysis {
    pub explanation: String,
    pub implicated_steps: Vec<usize>,
}

impl Record for ProblemAnalysis {
    const KIND: &'static str = "problem_analysis";
}

impl ProblemAnalysis {
    pub fn is_empty(&self) -> bool {
        self.explanation.trim().is_empty() && self.implicated_steps.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub flaw: Flaw,
    pub failed_adjustment: Option<String>,
}

/// For each current flaw, the quoted earlier adjustment that did not fix it.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureLedger {
    pub entries: Vec<LedgerEntry>,
}

impl Record for FailureLedger {
    const KIND: &'static str = "failure_ledger";
}

impl FailureLedger {
    pub fn none_for(flaws: &[Flaw]) -> Self {
        Self {
            entries: flaws
                .iter()
                .map(|f| LedgerEntry {
                    flaw: f.clone(),
                    failed_adjustment: None,
                })
                .collect(),
        }
    }

    pub fn quotes(&self) -> impl Iterator<Item = &str> {
        self.entries
            .iter()
            .filter_map(|e| e.failed_adjustment.as_deref())
    }

    pub fn quote_for(&self, flaw: &Flaw) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| &e.flaw == flaw)
            .and_then(|e| e.failed_adjustment.as_deref())
    }

    /// True when `op`'s canonical text occurs inside any ledgered quote.
    pub fn repeats(&self, op: &AdjustmentOp) -> bool {
        let canonical = op.canonical();
        self.quotes().any(|q| q.contains(&canonical))
    }
}

/// What the merge operator sees for one flaw.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeItem {
    pub flaw: usize,
    pub identified_flaw: Flaw,
    pub failed_adjustment: Option<String>,
    pub recommended_adjustment: Vec<AdjustmentOp>,
    pub best_team_insights: Option<String>,
    pub best_team_adjustment: Vec<AdjustmentOp>,
    pub past_best_setup_reflection: Option<String>,
    pub past_best_adjustment: Vec<AdjustmentOp>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeInput {
    pub flaws: Vec<MergeItem>,
}

impl Record for MergeInput {
    const KIND: &'static str = "merge_input";
}
