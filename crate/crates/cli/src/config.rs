use std::path::{Path, PathBuf};

use anyhow::Context;
use namlite::data::{SchemaOverride, Table};
use namlite::train::{Dataset, LabelColumns, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::failure::ConfigError;

fn default_output_dir() -> PathBuf {
    PathBuf::from("namlite-out")
}

/// A run description: where the data lives, which columns are labels, where
/// outputs go, and the model configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub train_data: PathBuf,
    #[serde(default)]
    pub test_data: Option<PathBuf>,
    /// JSON column-kind override.
    #[serde(default)]
    pub schema: Option<PathBuf>,
    #[serde(default)]
    pub target: Option<String>,
    #[serde(default)]
    pub time: Option<String>,
    #[serde(default)]
    pub event: Option<String>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub model: TrainConfig,
}

impl RunConfig {
    /// Reads a config; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> anyhow::Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| ConfigError(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.train_data);
        resolve(&mut cfg.output_dir);
        cfg.test_data.as_mut().map(resolve);
        cfg.schema.as_mut().map(resolve);
        cfg.model.validate()?;
        Ok(cfg)
    }

    fn overrides(&self) -> anyhow::Result<Option<SchemaOverride>> {
        Ok(self.schema.as_deref().map(SchemaOverride::from_path).transpose()?)
    }

    /// Label columns from the config, falling back to the schema override.
    pub fn label_columns(&self) -> anyhow::Result<LabelColumns> {
        let o = self.overrides()?.unwrap_or_default();
        Ok(LabelColumns {
            target: self.target.clone().or(o.target),
            time: self.time.clone().or(o.time),
            event: self.event.clone().or(o.event),
        })
    }

    pub fn dataset(&self, path: &Path) -> anyhow::Result<Dataset> {
        let table = Table::from_path(path).with_context(|| format!("reading {}", path.display()))?;
        let overrides = self.overrides()?;
        let ds = Dataset::from_table(&table, self.model.task, &self.label_columns()?, overrides.as_ref())?;
        Ok(ds)
    }

    pub fn create_output_dir(&self) -> anyhow::Result<()> {
        std::fs::create_dir_all(&self.output_dir)
            .with_context(|| format!("creating {}", self.output_dir.display()))
    }
}
