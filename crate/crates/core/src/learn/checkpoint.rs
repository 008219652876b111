use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::nn::{Activation, Mlp};
use crate::error::{Error, Result};

/// JSON side of a checkpoint; parameters live in a sibling `.bin` file of
/// little-endian `f64`s, networks concatenated in manifest order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format_version: u32,
    pub learner: String,
    pub networks: Vec<NetworkEntry>,
    /// Arbitrary run configuration (bounds, locus, learner settings).
    pub config: serde_json::Value,
    pub config_hash: String,
    pub params_file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkEntry {
    pub name: String,
    pub sizes: Vec<usize>,
    pub activation: Activation,
    pub n_params: usize,
}

pub fn config_hash(config: &serde_json::Value) -> String {
    let bytes = serde_json::to_vec(config).unwrap_or_default();
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes `<stem>.json` and `<stem>.bin`; returns the manifest path.
pub fn save_checkpoint(
    stem: &Path,
    learner: &str,
    networks: &[(&str, &Mlp)],
    config: serde_json::Value,
) -> Result<PathBuf> {
    if let Some(dir) = stem.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let bin_path = stem.with_extension("bin");
    let json_path = stem.with_extension("json");
    let mut bytes = Vec::new();
    let mut entries = Vec::new();
    for (name, net) in networks {
        for p in &net.params {
            bytes.extend_from_slice(&p.to_le_bytes());
        }
        entries.push(NetworkEntry {
            name: name.to_string(),
            sizes: net.sizes.clone(),
            activation: net.activation,
            n_params: net.n_params(),
        });
    }
    fs::write(&bin_path, bytes)?;
    let manifest = CheckpointManifest {
        format_version: 1,
        learner: learner.to_string(),
        networks: entries,
        config_hash: config_hash(&config),
        config,
        params_file: bin_path.file_name().unwrap().to_string_lossy().into_owned(),
    };
    fs::write(&json_path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(json_path)
}

/// Reads a manifest and rebuilds its networks.
pub fn load_checkpoint(manifest_path: &Path) -> Result<(CheckpointManifest, Vec<(String, Mlp)>)> {
    let manifest: CheckpointManifest = serde_json::from_str(&fs::read_to_string(manifest_path)?)?;
    if manifest.config_hash != config_hash(&manifest.config) {
        return Err(Error::Format("checkpoint config hash mismatch".into()));
    }
    let bin = manifest_path.with_file_name(&manifest.params_file);
    let bytes = fs::read(bin)?;
    let total: usize = manifest.networks.iter().map(|n| n.n_params).sum();
    if bytes.len() != total * 8 {
        return Err(Error::Format(format!("expected {} parameter bytes, found {}", total * 8, bytes.len())));
    }
    let mut values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let mut nets = Vec::new();
    for e in &manifest.networks {
        if Mlp::count(&e.sizes) != e.n_params {
            return Err(Error::Format(format!("network {} size mismatch", e.name)));
        }
        let params: Vec<f64> = values.by_ref().take(e.n_params).collect();
        nets.push((
            e.name.clone(),
            Mlp {
                sizes: e.sizes.clone(),
                activation: e.activation,
                params,
            },
        ));
    }
    Ok((manifest, nets))
}
