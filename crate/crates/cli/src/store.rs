use std::collections::BTreeSet;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde_json::Value;

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::record::{ResultRecord, RunDocument};

pub const OUT_ENV: &str = "UNCLE_FORGE_OUT";
pub const DEFAULT_OUT: &str = "uncle-forge-out";
pub const RECORDS_FILE: &str = "records.jsonl";

/// Result directory: one JSON document and one CSV per config hash, plus
/// an append-only log of every computed record.
pub struct Store {
    root: PathBuf,
    append: Mutex<()>,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Store { root, append: Mutex::new(()) })
    }

    /// `--out`, then `UNCLE_FORGE_OUT`, then `./uncle-forge-out`.
    pub fn resolve_root(flag: Option<&Path>) -> PathBuf {
        if let Some(p) = flag {
            return p.to_path_buf();
        }
        match std::env::var_os(OUT_ENV) {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => PathBuf::from(DEFAULT_OUT),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn stem(config: &ExperimentConfig) -> String {
        format!("{}-{}", config.experiment.name(), &config.hash()[..16])
    }

    pub fn json_path(&self, config: &ExperimentConfig) -> PathBuf {
        self.root.join(format!("{}.json", Self::stem(config)))
    }

    pub fn csv_path(&self, config: &ExperimentConfig) -> PathBuf {
        self.root.join(format!("{}.csv", Self::stem(config)))
    }

    pub fn records_path(&self) -> PathBuf {
        self.root.join(RECORDS_FILE)
    }

    /// A cached document for exactly this config, if one exists.
    pub fn load(&self, config: &ExperimentConfig) -> Result<Option<RunDocument>> {
        let path = self.json_path(config);
        if !path.exists() {
            return Ok(None);
        }
        let doc: RunDocument = serde_json::from_str(&fs::read_to_string(&path)?)?;
        let hash = config.hash();
        if doc.records.iter().any(|r| r.config_hash != hash) {
            return Ok(None);
        }
        Ok(Some(doc))
    }

    pub fn save(&self, doc: &RunDocument) -> Result<()> {
        let json = self.json_path(&doc.config);
        write_atomic(&json, serde_json::to_string_pretty(doc)?.as_bytes())?;
        let csv = self.csv_path(&doc.config);
        write_atomic(&csv, &csv_bytes(&doc.records)?)?;
        self.append(&doc.records)
    }

    fn append(&self, records: &[ResultRecord]) -> Result<()> {
        let _guard = self.append.lock().unwrap_or_else(|e| e.into_inner());
        let mut buf = Vec::new();
        for r in records {
            serde_json::to_writer(&mut buf, r)?;
            buf.push(b'\n');
        }
        let mut f = OpenOptions::new().create(true).append(true).open(self.records_path())?;
        f.write_all(&buf)?;
        f.sync_data()?;
        Ok(())
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_data()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// One row per record; columns are the union of parameter, scalar,
/// residual and tolerance names, in sorted order within each group.
pub fn csv_bytes(records: &[ResultRecord]) -> Result<Vec<u8>> {
    let params: BTreeSet<&str> = records.iter().flat_map(|r| r.params.keys().map(String::as_str)).collect();
    let scalars: BTreeSet<&str> = records.iter().flat_map(|r| r.scalars.keys().map(String::as_str)).collect();
    let residuals: BTreeSet<&str> = records.iter().flat_map(|r| r.residuals.keys().map(String::as_str)).collect();
    let tols: BTreeSet<&str> = records.iter().flat_map(|r| r.tolerances.keys().map(String::as_str)).collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["experiment".to_string()];
    header.extend(params.iter().map(|s| s.to_string()));
    header.extend(scalars.iter().map(|s| s.to_string()));
    header.extend(residuals.iter().map(|s| format!("residual_{s}")));
    header.extend(tols.iter().map(|s| format!("tol_{s}")));
    header.extend(["skipped", "wall_time_s", "version", "config_hash"].map(String::from));
    w.write_record(&header)?;
    let num = |v: Option<&f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
    for r in records {
        let mut row = vec![r.experiment.clone()];
        row.extend(params.iter().map(|k| r.params.get(*k).map(cell).unwrap_or_default()));
        row.extend(scalars.iter().map(|k| num(r.scalars.get(*k))));
        row.extend(residuals.iter().map(|k| num(r.residuals.get(*k))));
        row.extend(tols.iter().map(|k| num(r.tolerances.get(*k))));
        row.push(r.skipped.clone().unwrap_or_default());
        row.push(format!("{:.6}", r.wall_time_s));
        row.push(r.version.clone());
        row.push(r.config_hash.clone());
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| std::io::Error::other(e.to_string()).into())
}
