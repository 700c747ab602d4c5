//! Split-access audit. All target reads in the runner go through a
//! [`ScoringVault`]; test targets are released only after every model and
//! every selection step has been fitted.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::dataset::{Split, Target};
use crate::error::{Error, Result};
use crate::pipeline::TargetTable;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAudit {
    pub test_rows: usize,
    /// Requests for test targets made before scoring opened. Each one was
    /// refused with an error.
    pub test_reads_before_scoring: usize,
    /// Test-target reads made by final scoring.
    pub test_reads_during_scoring: usize,
    pub passed: bool,
}

pub struct ScoringVault<'a> {
    targets: &'a TargetTable,
    open: AtomicBool,
    violations: AtomicUsize,
    scoring_reads: AtomicUsize,
}

impl<'a> ScoringVault<'a> {
    pub fn new(targets: &'a TargetTable) -> Self {
        ScoringVault {
            targets,
            open: AtomicBool::new(false),
            violations: AtomicUsize::new(0),
            scoring_reads: AtomicUsize::new(0),
        }
    }

    pub fn targets(&self) -> &TargetTable {
        self.targets
    }

    /// Targets for fitting or selection. Test rows are refused.
    pub fn fit_values(&self, target: Target, rows: &[usize]) -> Result<Vec<f64>> {
        self.targets.values(target, rows).inspect_err(|e| {
            if matches!(e, Error::Audit(_)) {
                self.violations.fetch_add(1, Ordering::SeqCst);
            }
        })
    }

    /// Ends the fitting phase. Irreversible.
    pub fn open_scoring(&self) {
        self.open.store(true, Ordering::SeqCst);
    }

    /// Test-split targets for final scoring.
    pub fn test_values(&self, target: Target) -> Result<Vec<f64>> {
        if !self.open.load(Ordering::SeqCst) {
            self.violations.fetch_add(1, Ordering::SeqCst);
            return Err(Error::Audit("test targets requested before scoring opened".into()));
        }
        self.scoring_reads.fetch_add(1, Ordering::SeqCst);
        self.targets.unguarded(target, &self.targets.indices(Split::Test))
    }

    pub fn audit(&self) -> SplitAudit {
        let before = self.violations.load(Ordering::SeqCst);
        SplitAudit {
            test_rows: self.targets.indices(Split::Test).len(),
            test_reads_before_scoring: before,
            test_reads_during_scoring: self.scoring_reads.load(Ordering::SeqCst),
            passed: before == 0,
        }
    }
}
