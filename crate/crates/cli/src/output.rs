use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::{CliError, RunConfig};

/// Provenance stamped on every artifact.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Meta {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub layout: String,
}

impl Meta {
    pub fn new(command: &str, cfg: &RunConfig, layout: &str) -> Self {
        Self {
            command: command.into(),
            config_hash: cfg.hash(),
            seed: cfg.seed,
            layout: layout.into(),
        }
    }

    fn csv_line(&self) -> String {
        format!(
            "# command={} config_hash={} seed={} layout={}\n",
            self.command, self.config_hash, self.seed, self.layout
        )
    }
}

pub(crate) fn out_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    fs::create_dir_all(&cfg.output_dir)?;
    Ok(cfg.output_dir.clone())
}

pub(crate) fn write_csv(dir: &Path, name: &str, meta: &Meta, body: &str) -> Result<(), CliError> {
    fs::write(dir.join(name), meta.csv_line() + body)?;
    Ok(())
}

#[derive(Serialize)]
struct WithMeta<'a, T: Serialize> {
    meta: &'a Meta,
    #[serde(flatten)]
    body: &'a T,
}

/// Writes `body` (a JSON object) with a leading `"meta"` field.
pub(crate) fn write_json<T: Serialize>(
    dir: &Path,
    name: &str,
    meta: &Meta,
    body: &T,
) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(&WithMeta { meta, body })
        .map_err(|e| CliError::Usage(format!("cannot serialize {name}: {e}")))?;
    text.push('\n');
    fs::write(dir.join(name), text)?;
    Ok(())
}
