use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

/// One asserted bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub relation: Relation,
    pub satisfied: bool,
}

impl Metric {
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, bound, relation: Relation::AtMost, satisfied: value <= bound }
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, bound, relation: Relation::AtLeast, satisfied: value >= bound }
    }

    /// A boolean condition recorded as `1 >= 1` or `0 >= 1`.
    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Self::at_least(name, if ok { 1.0 } else { 0.0 }, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub experiment: String,
    pub pass: bool,
    pub metrics: Vec<Metric>,
    pub provenance: Provenance,
}

impl Certificate {
    pub fn new(experiment: &str, metrics: Vec<Metric>, provenance: Provenance) -> Self {
        Self { experiment: experiment.to_string(), pass: metrics.iter().all(|m| m.satisfied), metrics, provenance }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("certificate serializes");
        s.push('\n');
        s
    }
}
