//! TOML configuration file for the `provgate` binary, merged with
//! command-line flags (flags win).

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use provgate_core::record::Timestamp;
use provgate_core::service::ServiceConfig;

pub const DEFAULT_LISTEN: &str = "127.0.0.1:7070";
pub const DEFAULT_DATA_DIR: &str = "provgate-data";

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub data_dir: Option<PathBuf>,
    pub listen: Option<String>,
    /// ISO-8601 instant, e.g. `2014-01-01T00:00:00Z`.
    pub fixed_clock: Option<String>,
    #[serde(default)]
    pub generation: GenerationSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationSection {
    pub violation_vocabulary: Option<BTreeSet<String>>,
    pub default_temporal_days: Option<u32>,
    pub permitted_scope: Option<BTreeSet<String>>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("bad config {}: {e}", path.display()))
    }
}

/// Effective settings after merging flags over the config file.
pub struct Settings {
    pub service: ServiceConfig,
    pub listen: String,
}

pub fn resolve(
    config_path: Option<&Path>,
    data_dir_flag: Option<PathBuf>,
    fixed_clock_flag: Option<&str>,
) -> Result<Settings, String> {
    let file = match config_path {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let data_dir = data_dir_flag
        .or(file.data_dir)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_DATA_DIR));
    let mut service = ServiceConfig::new(data_dir);
    if let Some(vocab) = file.generation.violation_vocabulary {
        service.gen_config.violation_vocabulary = vocab;
    }
    if let Some(days) = file.generation.default_temporal_days {
        service.gen_config.default_temporal_days = days;
    }
    if let Some(scope) = file.generation.permitted_scope {
        service.gen_config.permitted_scope = scope;
    }
    let clock = fixed_clock_flag
        .map(str::to_string)
        .or(file.fixed_clock);
    if let Some(raw) = clock {
        let at = Timestamp::parse(&raw)
            .map_err(|e| format!("bad --fixed-clock value {raw:?}: {e}"))?;
        service = service.with_fixed_clock(at);
    }
    let listen = file.listen.unwrap_or_else(|| DEFAULT_LISTEN.to_string());
    Ok(Settings { service, listen })
}
