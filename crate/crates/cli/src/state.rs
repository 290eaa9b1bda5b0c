//! The CLI's "current session": which file was opened and as what category.
//! `analyze ask` rebuilds the session from this record, reusing the index
//! cache so embeddings are not recomputed.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use logchat_core::indexer::content_hash;
use logchat_core::orchestrator::open_session;
use logchat_core::{LogCategory, ModelGateway, Session, SessionOptions};
use serde::{Deserialize, Serialize};

pub const DEFAULT_STATE_DIR: &str = ".logchat";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SavedSession {
    pub file: PathBuf,
    pub category: String,
    pub content_hash: String,
}

impl SavedSession {
    pub fn of(file: &Path, session: &Session) -> anyhow::Result<Self> {
        Ok(Self {
            file: std::path::absolute(file)?,
            category: session.category.name().to_string(),
            content_hash: session.content_hash.clone(),
        })
    }

    pub fn save(&self, path: &Path) -> anyhow::Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")
            .with_context(|| format!("writing {}", path.display()))
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("no open session at {} (run `logchat analyze open <file>` first)", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Re-creates the session with the recorded category, refusing if the
    /// file changed since it was opened.
    pub fn reopen(&self, gateway: &dyn ModelGateway, opts: &SessionOptions) -> anyhow::Result<Session> {
        let raw = std::fs::read(&self.file).with_context(|| format!("reading {}", self.file.display()))?;
        let raw = String::from_utf8_lossy(&raw);
        if content_hash(&raw) != self.content_hash {
            bail!("{} changed since it was opened; run `logchat analyze open` again", self.file.display());
        }
        let category: LogCategory = self.category.parse()?;
        let opts = SessionOptions {
            category_override: Some(category),
            ..opts.clone()
        };
        Ok(open_session(&file_name(&self.file), &raw, gateway, &opts)?)
    }
}

pub fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}
