//! JSON-serialisable result records whose verdict can be re-derived from the
//! stored numbers alone.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `|computed − reference| ≤ tolerance`.
    Absolute,
    /// `max(computed/reference, reference/computed) ≤ tolerance`.
    Factor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, limit, pass: value <= limit }
    }

    pub fn holds(&self) -> bool {
        self.value <= self.limit
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub claim: String,
    pub paper_value: Option<f64>,
    pub computed_value: f64,
    /// Value the computation is judged against; the published value unless an
    /// independent oracle supersedes it.
    pub reference_value: Option<f64>,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub pass: bool,
    #[serde(default)]
    pub checks: Vec<Check>,
    #[serde(default)]
    pub flags: Vec<String>,
    #[serde(default)]
    pub grid_metadata: serde_json::Value,
}

impl Report {
    pub fn new(claim: impl Into<String>, computed_value: f64) -> Self {
        Self {
            claim: claim.into(),
            paper_value: None,
            computed_value,
            reference_value: None,
            tolerance: 0.0,
            comparison: Comparison::Absolute,
            pass: false,
            checks: Vec::new(),
            flags: Vec::new(),
            grid_metadata: serde_json::Value::Null,
        }
    }

    pub fn published(mut self, value: f64) -> Self {
        self.paper_value = Some(value);
        self
    }

    pub fn against(mut self, reference: f64, tolerance: f64, comparison: Comparison) -> Self {
        self.reference_value = Some(reference);
        self.tolerance = tolerance;
        self.comparison = comparison;
        self
    }

    pub fn check(mut self, name: impl Into<String>, value: f64, limit: f64) -> Self {
        self.checks.push(Check::new(name, value, limit));
        self
    }

    pub fn flag(mut self, note: impl Into<String>) -> Self {
        self.flags.push(note.into());
        self
    }

    pub fn metadata(mut self, value: serde_json::Value) -> Self {
        self.grid_metadata = value;
        self
    }

    /// Sets `pass` from the stored values.
    pub fn finish(mut self) -> Self {
        for c in &mut self.checks {
            c.pass = c.holds();
        }
        self.pass = self.evaluate();
        self
    }

    /// Verdict recomputed from the numbers, ignoring the stored `pass` fields.
    pub fn evaluate(&self) -> bool {
        let main = match self.reference_value {
            None => self.computed_value.is_finite(),
            Some(r) => match self.comparison {
                Comparison::Absolute => (self.computed_value - r).abs() <= self.tolerance,
                Comparison::Factor => {
                    let ratio = self.computed_value / r;
                    ratio > 0.0 && ratio.max(1.0 / ratio) <= self.tolerance
                }
            },
        };
        main && self.checks.iter().all(Check::holds)
    }
}
