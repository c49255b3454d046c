use serde::{Deserialize, Serialize};
use std::fmt;

use super::{AdjustmentOp, Flaw, OpKind};
use crate::record::Record;

/// Which update term produced a velocity entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TermOrigin {
    FailureTerm,
    PersonalTerm,
    GlobalTerm,
    Init,
    Merged,
}

impl fmt::Display for TermOrigin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TermOrigin::FailureTerm => "failure",
            TermOrigin::PersonalTerm => "personal",
            TermOrigin::GlobalTerm => "global",
            TermOrigin::Init => "init",
            TermOrigin::Merged => "merged",
        };
        f.write_str(s)
    }
}

/// Adjustments proposed for one flaw.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VelocityEntry {
    pub flaw: Flaw,
    pub ops: Vec<AdjustmentOp>,
    pub origin: TermOrigin,
    /// Quoted prior adjustment that failed to resolve this flaw.
    pub failed_adjustment: Option<String>,
    /// Comparative insight grounding a personal/global term entry.
    pub insight: Option<String>,
    /// For merged entries: the terms whose operations were carried over.
    /// Empty on a merged entry means the operations were synthesized.
    pub sources: Vec<TermOrigin>,
}

impl VelocityEntry {
    pub fn new(flaw: Flaw, ops: Vec<AdjustmentOp>, origin: TermOrigin) -> Self {
        Self {
            flaw,
            ops,
            origin,
            failed_adjustment: None,
            insight: None,
            sources: Vec::new(),
        }
    }

    pub fn with_failed_adjustment(mut self, quote: Option<String>) -> Self {
        self.failed_adjustment = quote;
        self
    }

    pub fn with_insight(mut self, insight: Option<String>) -> Self {
        self.insight = insight;
        self
    }

    pub fn with_sources(mut self, sources: Vec<TermOrigin>) -> Self {
        self.sources = sources;
        self
    }
}

/// An adjustment plan: typed operations bound to the flaws they address.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Velocity {
    pub entries: Vec<VelocityEntry>,
}

impl Record for Velocity {
    const KIND: &'static str = "velocity";
}

impl Velocity {
    pub fn new(entries: Vec<VelocityEntry>) -> Self {
        Self { entries }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn has_ops(&self) -> bool {
        self.entries.iter().any(|e| !e.ops.is_empty())
    }

    /// All operations in entry order.
    pub fn ops(&self) -> impl Iterator<Item = &AdjustmentOp> {
        self.entries.iter().flat_map(|e| e.ops.iter())
    }

    pub fn op_count(&self) -> usize {
        self.entries.iter().map(|e| e.ops.len()).sum()
    }

    /// The entry addressing `flaw`, if any.
    pub fn entry_for(&self, flaw: &Flaw) -> Option<&VelocityEntry> {
        self.entries.iter().find(|e| &e.flaw == flaw)
    }

    /// Drops operations of the disabled kinds (ablation switches).
    pub fn filtered(&self, allow_role_ops: bool, allow_workflow_ops: bool) -> Velocity {
        let keep = |k: OpKind| {
            if k.is_role_op() {
                allow_role_ops
            } else {
                allow_workflow_ops
            }
        };
        Velocity {
            entries: self
                .entries
                .iter()
                .map(|e| {
                    let mut e = e.clone();
                    e.ops.retain(|op| keep(op.kind()));
                    e
                })
                .collect(),
        }
    }

    /// One-line summaries of every operation, for reports.
    pub fn summaries(&self) -> Vec<String> {
        self.ops().map(AdjustmentOp::summary).collect()
    }
}
