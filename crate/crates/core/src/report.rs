//! Pass/fail reports with concrete witnesses.
//!
//! Reports render as one line per check: `name<TAB>verdict<TAB>witness`.

use std::fmt;

use crate::node::{NodeId, NodeSet};

/// Evidence attached to a failed check.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Witness {
    pub nodes: Vec<NodeId>,
    pub sets: Vec<NodeSet>,
    pub detail: String,
}

impl Witness {
    pub fn nodes<I: IntoIterator<Item = NodeId>>(nodes: I) -> Self {
        Witness {
            nodes: nodes.into_iter().collect(),
            ..Default::default()
        }
    }

    pub fn sets<I: IntoIterator<Item = NodeSet>>(sets: I) -> Self {
        Witness {
            sets: sets.into_iter().collect(),
            ..Default::default()
        }
    }

    pub fn detail(detail: impl Into<String>) -> Self {
        Witness {
            detail: detail.into(),
            ..Default::default()
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if !self.nodes.is_empty() {
            let ids: Vec<String> = self.nodes.iter().map(|n| n.to_string()).collect();
            parts.push(format!("nodes={}", ids.join(",")));
        }
        if !self.sets.is_empty() {
            let sets: Vec<String> = self.sets.iter().map(|s| s.to_string()).collect();
            parts.push(format!("sets={}", sets.join(";")));
        }
        if !self.detail.is_empty() {
            parts.push(self.detail.clone());
        }
        if parts.is_empty() {
            f.write_str("-")
        } else {
            f.write_str(&parts.join(" "))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail(Witness),
    /// The property could not be judged (e.g. liveness on a bounded trace).
    NotApplicable,
}

impl Verdict {
    pub fn from_witness(witness: Option<Witness>) -> Self {
        match witness {
            None => Verdict::Pass,
            Some(w) => Verdict::Fail(w),
        }
    }

    pub fn is_pass(&self) -> bool {
        matches!(self, Verdict::Pass)
    }

    pub fn is_fail(&self) -> bool {
        matches!(self, Verdict::Fail(_))
    }

    pub fn witness(&self) -> Option<&Witness> {
        match self {
            Verdict::Fail(w) => Some(w),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail(_) => "fail",
            Verdict::NotApplicable => "n/a",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AxiomCheck {
    pub name: String,
    pub verdict: Verdict,
}

/// Ordered list of named checks.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AxiomReport {
    pub checks: Vec<AxiomCheck>,
}

impl AxiomReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, verdict: Verdict) {
        self.checks.push(AxiomCheck {
            name: name.into(),
            verdict,
        });
    }

    pub fn extend(&mut self, other: AxiomReport) {
        self.checks.extend(other.checks);
    }

    /// True iff no check failed.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| !c.verdict.is_fail())
    }

    pub fn get(&self, name: &str) -> Option<&Verdict> {
        self.checks.iter().find(|c| c.name == name).map(|c| &c.verdict)
    }

    /// True iff the named check exists and passed.
    pub fn holds(&self, name: &str) -> bool {
        self.get(name).is_some_and(Verdict::is_pass)
    }
}

impl fmt::Display for AxiomReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let witness = c.verdict.witness().map_or_else(|| "-".to_string(), |w| w.to_string());
            writeln!(f, "{}\t{}\t{}", c.name, c.verdict.label(), witness)?;
        }
        Ok(())
    }
}
