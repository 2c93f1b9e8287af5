//! Backend discovery.
//!
//! A manifest is a small JSON file naming a backend, the kind of plugin that
//! implements it, its layout preset, and (optionally) the fingerprint it is
//! expected to have:
//!
//! ```json
//! {"format_version": 1, "name": "toy", "kind": "toy", "layout_preset": "toy-128",
//!  "params": "toy-params.json", "fingerprint": "toy-0123456789abcdef"}
//! ```
//!
//! `params` is resolved relative to the manifest's directory. Only the `toy`
//! kind ships with this crate; other kinds need external weights.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::style_space::{LayoutConfig, StyleLayout};

use super::toy::{ToyBackend, ToyParams, ToySpec, DEFAULT_TOY_SEED};
use super::BackendBundle;

pub const MANIFEST_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendManifest {
    #[serde(default = "default_version")]
    pub format_version: u32,
    pub name: String,
    pub kind: String,
    /// Preset name or a path to a layout JSON file.
    pub layout_preset: String,
    #[serde(default)]
    pub fingerprint: Option<String>,
    /// Toy parameter sidecar; generated from `seed` when absent.
    #[serde(default)]
    pub params: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_version() -> u32 {
    MANIFEST_FORMAT_VERSION
}

impl BackendManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: BackendManifest = serde_json::from_str(&text)?;
        if manifest.format_version != MANIFEST_FORMAT_VERSION {
            return Err(Error::UnsupportedVersion {
                found: manifest.format_version,
                supported: MANIFEST_FORMAT_VERSION,
            });
        }
        Ok(manifest)
    }

    fn layout_config(&self, base_dir: &Path) -> Result<LayoutConfig> {
        match LayoutConfig::preset(&self.layout_preset) {
            Ok(config) => Ok(config),
            Err(Error::NotFound(_)) => {
                let path = base_dir.join(&self.layout_preset);
                let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                LayoutConfig::from_json(&text)
            }
            Err(e) => Err(e),
        }
    }

    /// Instantiates the backend described by this manifest.
    pub fn instantiate(&self, base_dir: &Path) -> Result<BackendBundle> {
        let layout = self.layout_config(base_dir)?;
        let bundle = match self.kind.as_str() {
            "toy" => {
                let params = match &self.params {
                    Some(rel) => ToyParams::load(&base_dir.join(rel))?,
                    None => {
                        let spec = ToySpec {
                            layout: layout.clone(),
                            ..ToySpec::default()
                        };
                        ToyParams::generate(&spec, self.seed.unwrap_or(DEFAULT_TOY_SEED))?
                    }
                };
                if StyleLayout::build(&params.layout)?.fingerprint()
                    != StyleLayout::build(&layout)?.fingerprint()
                {
                    return Err(Error::Backend(format!(
                        "toy params for {} do not match layout {}",
                        params.layout.model, self.layout_preset
                    )));
                }
                ToyBackend::new(params)?.bundle()
            }
            other => {
                return Err(Error::Capability(format!(
                    "backend kind {other:?} needs external model weights that are not available in this build"
                )))
            }
        };
        if let Some(expected) = &self.fingerprint {
            if bundle.fingerprint() != expected {
                return Err(Error::Backend(format!(
                    "backend {} has fingerprint {}, manifest expects {expected}",
                    self.name,
                    bundle.fingerprint()
                )));
            }
        }
        Ok(bundle)
    }
}

/// Resolves a backend by built-in name (`toy`) or manifest path.
pub fn resolve_backend(spec: &str) -> Result<BackendBundle> {
    if spec == "toy" {
        return super::toy::default_toy().map(|t| t.bundle());
    }
    let path = Path::new(spec);
    if path.is_file() {
        let manifest = BackendManifest::load(path)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        return manifest.instantiate(base);
    }
    Err(Error::Backend(format!(
        "unknown backend {spec:?}: expected \"toy\" or a manifest file"
    )))
}
