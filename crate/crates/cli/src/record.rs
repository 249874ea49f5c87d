use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{ExperimentConfig, VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub experiment: String,
    pub params: BTreeMap<String, Value>,
    pub scalars: BTreeMap<String, f64>,
    pub residuals: BTreeMap<String, f64>,
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub series: BTreeMap<String, Vec<f64>>,
    /// Set when a sweep point was not computed, with the reason.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
    pub wall_time_s: f64,
    pub version: String,
    pub config_hash: String,
}

impl ResultRecord {
    pub fn scalar(&self, key: &str) -> Option<f64> {
        self.scalars.get(key).copied()
    }

    pub fn param_str(&self, key: &str) -> Option<&str> {
        self.params.get(key).and_then(Value::as_str)
    }

    pub fn param_u64(&self, key: &str) -> Option<u64> {
        self.params.get(key).and_then(Value::as_u64)
    }
}

/// Incremental construction of a record; non-finite values are dropped so
/// every stored number round-trips through JSON.
pub struct RecordBuilder {
    record: ResultRecord,
    started: Instant,
}

impl RecordBuilder {
    pub fn new(config: &ExperimentConfig, kind: &str) -> Self {
        let mut params = BTreeMap::new();
        params.insert("kind".to_string(), Value::from(kind));
        RecordBuilder {
            record: ResultRecord {
                experiment: config.experiment.name().to_string(),
                params,
                scalars: BTreeMap::new(),
                residuals: BTreeMap::new(),
                tolerances: BTreeMap::new(),
                series: BTreeMap::new(),
                skipped: None,
                wall_time_s: 0.0,
                version: VERSION.to_string(),
                config_hash: config.hash(),
            },
            started: Instant::now(),
        }
    }

    pub fn param(mut self, key: &str, v: impl Into<Value>) -> Self {
        self.record.params.insert(key.to_string(), v.into());
        self
    }

    pub fn scalar(mut self, key: &str, v: f64) -> Self {
        if v.is_finite() {
            self.record.scalars.insert(key.to_string(), v);
        }
        self
    }

    pub fn flag(self, key: &str, v: bool) -> Self {
        self.scalar(key, if v { 1.0 } else { 0.0 })
    }

    pub fn residual(mut self, key: &str, v: f64) -> Self {
        if v.is_finite() {
            self.record.residuals.insert(key.to_string(), v);
        }
        self
    }

    pub fn tolerance(mut self, key: &str, v: f64) -> Self {
        self.record.tolerances.insert(key.to_string(), v);
        self
    }

    pub fn series(mut self, key: &str, v: Vec<f64>) -> Self {
        self.record.series.insert(key.to_string(), v.into_iter().filter(|x| x.is_finite()).collect());
        self
    }

    pub fn skipped(mut self, reason: impl Into<String>) -> Self {
        self.record.skipped = Some(reason.into());
        self
    }

    pub fn finish(mut self) -> ResultRecord {
        self.record.wall_time_s = self.started.elapsed().as_secs_f64();
        self.record
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Check { name: name.to_string(), passed, detail: detail.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunDocument {
    pub experiment: String,
    pub config: ExperimentConfig,
    pub records: Vec<ResultRecord>,
    pub checks: Vec<Check>,
    pub version: String,
}

impl RunDocument {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Records whose `kind` parameter equals `kind`.
    pub fn of_kind<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = &'a ResultRecord> + 'a {
        self.records.iter().filter(move |r| r.param_str("kind") == Some(kind))
    }

    /// The payload with wall times zeroed, for comparing runs.
    pub fn without_timings(&self) -> RunDocument {
        let mut d = self.clone();
        for r in &mut d.records {
            r.wall_time_s = 0.0;
        }
        d
    }
}
