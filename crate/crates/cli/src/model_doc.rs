//! On-disk model document: one JSON file per fitted model.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use qrh_core::qrh1::Qrh1Model;
use qrh_core::qrh2::Qrh2Model;

use crate::io_util::write_atomic;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum ModelDoc {
    #[serde(rename = "qrh1")]
    One(Qrh1Model),
    #[serde(rename = "qrh2")]
    Two(Qrh2Model),
}

impl ModelDoc {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading model {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing model {}", path.display()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        write_atomic(path, text.as_bytes())
    }

    #[allow(dead_code)]
    pub fn kind(&self) -> &str {
        match self {
            ModelDoc::One(m) => &m.kind,
            ModelDoc::Two(m) => &m.kind,
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            ModelDoc::One(m) => m.param_count(),
            ModelDoc::Two(m) => m.param_count(),
        }
    }
}
