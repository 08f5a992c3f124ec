//! Scenario records persisted to a single JSON file. Every write replaces
//! the file atomically through a temporary sibling.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use borrowsize::Scenario;
use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("store {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("store {path} is corrupt: {message}")]
    Corrupt { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioRecord {
    pub id: String,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
    pub scenario: Scenario,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordSummary {
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
}

#[derive(Serialize, Deserialize)]
struct StoredRecord {
    id: String,
    created_at: DateTime<Utc>,
    updated_at: DateTime<Utc>,
    scenario: Value,
}

#[derive(Serialize, Deserialize)]
struct StoreFile {
    schema_version: u64,
    records: Vec<StoredRecord>,
}

#[derive(Debug)]
pub struct ScenarioStore {
    path: PathBuf,
    records: Mutex<BTreeMap<String, ScenarioRecord>>,
}

fn now() -> DateTime<Utc> {
    // Millisecond resolution keeps the RFC 3339 text stable across reloads.
    let t = Utc::now();
    DateTime::parse_from_rfc3339(&t.to_rfc3339_opts(SecondsFormat::Millis, true))
        .map(|d| d.with_timezone(&Utc))
        .unwrap_or(t)
}

impl ScenarioStore {
    /// Opens the store at `path`, starting empty if the file does not exist.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let path = path.into();
        let records = match std::fs::read_to_string(&path) {
            Ok(text) => Self::parse(&path, &text)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeMap::new(),
            Err(source) => {
                return Err(StoreError::Io {
                    path: path.display().to_string(),
                    source,
                })
            }
        };
        Ok(Self {
            path,
            records: Mutex::new(records),
        })
    }

    fn parse(path: &Path, text: &str) -> Result<BTreeMap<String, ScenarioRecord>, StoreError> {
        let corrupt = |message: String| StoreError::Corrupt {
            path: path.display().to_string(),
            message,
        };
        let file: StoreFile = serde_json::from_str(text).map_err(|e| corrupt(e.to_string()))?;
        file.records
            .into_iter()
            .map(|r| {
                let scenario = Scenario::from_value_at(&r.scenario, "", None).map_err(|errs| {
                    corrupt(format!(
                        "record {}: {}",
                        r.id,
                        errs.first().map(ToString::to_string).unwrap_or_default()
                    ))
                })?;
                Ok((
                    r.id.clone(),
                    ScenarioRecord {
                        id: r.id,
                        created_at: r.created_at,
                        updated_at: r.updated_at,
                        scenario,
                    },
                ))
            })
            .collect()
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn persist(&self, records: &BTreeMap<String, ScenarioRecord>) -> Result<(), StoreError> {
        let io = |source| StoreError::Io {
            path: self.path.display().to_string(),
            source,
        };
        let file = StoreFile {
            schema_version: 1,
            records: records
                .values()
                .map(|r| StoredRecord {
                    id: r.id.clone(),
                    created_at: r.created_at,
                    updated_at: r.updated_at,
                    scenario: serde_json::to_value(&r.scenario).expect("scenario serializes"),
                })
                .collect(),
        };
        let text = serde_json::to_string_pretty(&file).expect("store serializes") + "\n";
        let dir = match self.path.parent() {
            Some(d) if !d.as_os_str().is_empty() => d,
            _ => Path::new("."),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
        tmp.write_all(text.as_bytes()).map_err(io)?;
        tmp.as_file().sync_all().map_err(io)?;
        tmp.persist(&self.path).map_err(|e| io(e.error))?;
        Ok(())
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, BTreeMap<String, ScenarioRecord>> {
        self.records.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn list(&self) -> Vec<RecordSummary> {
        self.lock()
            .values()
            .map(|r| RecordSummary {
                id: r.id.clone(),
                name: r.scenario.name.clone(),
                created_at: r.created_at,
                updated_at: r.updated_at,
            })
            .collect()
    }

    pub fn get(&self, id: &str) -> Option<ScenarioRecord> {
        self.lock().get(id).cloned()
    }

    pub fn create(&self, scenario: Scenario) -> Result<ScenarioRecord, StoreError> {
        let mut records = self.lock();
        let t = now();
        let record = ScenarioRecord {
            id: uuid::Uuid::new_v4().simple().to_string(),
            created_at: t,
            updated_at: t,
            scenario,
        };
        let mut next = records.clone();
        next.insert(record.id.clone(), record.clone());
        self.persist(&next)?;
        *records = next;
        Ok(record)
    }

    /// Replaces the scenario of an existing record. `None` if unknown.
    pub fn update(
        &self,
        id: &str,
        scenario: Scenario,
    ) -> Result<Option<ScenarioRecord>, StoreError> {
        let mut records = self.lock();
        let Some(old) = records.get(id) else {
            return Ok(None);
        };
        let record = ScenarioRecord {
            id: id.to_string(),
            created_at: old.created_at,
            updated_at: now(),
            scenario,
        };
        let mut next = records.clone();
        next.insert(id.to_string(), record.clone());
        self.persist(&next)?;
        *records = next;
        Ok(Some(record))
    }

    /// `false` if the record did not exist.
    pub fn delete(&self, id: &str) -> Result<bool, StoreError> {
        let mut records = self.lock();
        if !records.contains_key(id) {
            return Ok(false);
        }
        let mut next = records.clone();
        next.remove(id);
        self.persist(&next)?;
        *records = next;
        Ok(true)
    }
}
