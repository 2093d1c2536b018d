//! Run configuration: JSON with a versioned schema, loaded from disk and
//! optionally patched by `--set key=value` overrides before validation.

use std::fs;
use std::path::Path;

use amlab_core::lagrangian::{Catalog, LagrangianSpec};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

/// Uniform scan grid on one axis; in two dimensions the grid is the product
/// of the range with itself.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanRange {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl ScanRange {
    pub fn values(&self) -> Vec<f64> {
        assert!(self.step > 0.0);
        let n = ((self.max - self.min) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.min + i as f64 * self.step).collect()
    }
}

/// Optional overrides for the solver tolerances; unset fields fall back to
/// the grid-derived defaults of the compute modules.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    pub tol_a: Option<f64>,
    pub tol_flat: Option<f64>,
    pub v_tol: Option<f64>,
    pub mass_tol: Option<f64>,
    pub hausdorff: Option<f64>,
    pub t_step: Option<f64>,
    pub patch_step: Option<f64>,
    pub patch_radius: Option<usize>,
    pub kam_tol: Option<f64>,
    pub kam_max_iter: Option<usize>,
    pub lp_max_iter: Option<usize>,
    pub n_min: Option<usize>,
    pub n_max: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Catalog preset name; mutually exclusive with `lagrangian`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lagrangian: Option<LagrangianSpec>,
    /// Nodes per axis.
    pub n: usize,
    pub tau: f64,
    /// Velocity cap; defaults to the Lagrangian's own cap.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<f64>,
    /// Cohomology target for `aubry`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<[f64; 2]>,
    /// Homology target for `mather`, `flats`, `singular`, `verify-theorem`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<[f64; 2]>,
    /// Scan grid for `alpha`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_scan: Option<ScanRange>,
    /// Scan grid for `beta`; with `ray = true` it parametrizes `t h`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_scan: Option<ScanRange>,
    /// Scan `t h` for t in `h_scan` instead of a product grid.
    #[serde(default)]
    pub ray: bool,
    #[serde(default)]
    pub tolerances: ToleranceOverrides,
    /// Seed for `lemma-suite`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
}

impl RunConfig {
    pub fn lagrangian(&self) -> Result<LagrangianSpec, String> {
        match (&self.preset, &self.lagrangian) {
            (Some(name), None) => Catalog::by_name(name)
                .ok_or_else(|| format!("unknown preset {name:?}")),
            (None, Some(spec)) => Ok(spec.clone()),
            (Some(_), Some(_)) => Err("preset and lagrangian are mutually exclusive".into()),
            (None, None) => Err("one of preset or lagrangian is required".into()),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(format!(
                "schema_version {} unsupported (expected {})",
                self.schema_version, SCHEMA_VERSION
            ));
        }
        if self.n < 8 {
            return Err("n must be at least 8".into());
        }
        if !(self.tau > 0.0) {
            return Err("tau must be positive".into());
        }
        if let Some(cap) = self.cap {
            if !(cap > 0.0) {
                return Err("cap must be positive".into());
            }
        }
        for scan in [self.c_scan, self.h_scan].into_iter().flatten() {
            if !(scan.step > 0.0) || scan.max < scan.min {
                return Err("scan ranges need step > 0 and max >= min".into());
            }
        }
        self.lagrangian()?;
        Ok(())
    }
}

/// Apply a `key=value` override to a JSON document. Dotted keys descend into
/// objects; the value is parsed as JSON when possible, else kept as a string.
pub fn apply_set(doc: &mut serde_json::Value, spec: &str) -> Result<(), String> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| format!("--set {spec:?}: expected key=value"))?;
    let value = serde_json::from_str(raw)
        .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let mut node = doc;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| format!("--set {spec:?}: {part:?} is not an object field"))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj
            .entry(part.to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    unreachable!()
}

/// Load a config file, apply overrides, and validate. Returns the parsed
/// config together with the patched JSON document (echoed into manifests).
pub fn load(path: &Path, sets: &[String]) -> Result<(RunConfig, serde_json::Value), ConfigError> {
    let shown = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: shown.clone(),
        source,
    })?;
    let mut doc: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| ConfigError::Parse {
            path: shown.clone(),
            message: format!("line {} column {}: {}", e.line(), e.column(), e),
        })?;
    for spec in sets {
        apply_set(&mut doc, spec).map_err(|message| ConfigError::Invalid {
            path: shown.clone(),
            message,
        })?;
    }
    let config: RunConfig =
        serde_json::from_value(doc.clone()).map_err(|e| ConfigError::Parse {
            path: shown.clone(),
            message: e.to_string(),
        })?;
    config.validate().map_err(|message| ConfigError::Invalid {
        path: shown,
        message,
    })?;
    Ok((config, doc))
}
