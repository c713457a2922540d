//! Service and CLI configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use predism_core::damagemap::Predictor;
use predism_core::ensemble::{
    Backbone, BackboneKind, CoOccurrence, ExternalBackbone, ModelFile, ReferenceBackbone, Transport,
    DEFAULT_TIMEOUT_MS,
};
use predism_core::hazard::load_thresholds;
use predism_core::rastergeom::DEFAULT_CHIP_SIZE;
use predism_core::{BackboneRegistry, DisasterType, Head, Palette, ThresholdTable, DISASTER_TYPES};
use serde::{Deserialize, Serialize};

use crate::error::AppError;

pub const CONFIG_ENV: &str = "PREDISM_CONFIG";

/// How one disaster type's backbone is provided.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BackendDecl {
    ReferenceOrdinal,
    ReferenceSoftmax,
    External {
        /// argv of a long-running process speaking line-delimited JSON.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        command: Option<Vec<String>>,
        /// Endpoint accepting POSTed requests, such as `http://host/infer`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        url: Option<String>,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
        #[serde(default = "default_pool_size")]
        pool_size: usize,
    },
}

fn default_timeout_ms() -> u64 {
    DEFAULT_TIMEOUT_MS
}

fn default_pool_size() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub chip_size: usize,
    pub tau: f64,
    /// Per-attribute threshold rows overriding the defaults.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<serde_json::Value>,
    pub palette: Palette,
    /// Per-type backends. Empty means reference-ordinal for every type.
    pub backends: BTreeMap<DisasterType, BackendDecl>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub co_occurrence: Option<CoOccurrence>,
    /// Trained heads; untrained hazard-prior heads are used where absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_root: Option<PathBuf>,
    pub artifacts_dir: PathBuf,
    pub listen: String,
}

impl Default for AppConfig {
    fn default() -> Self {
        AppConfig {
            chip_size: DEFAULT_CHIP_SIZE,
            tau: predism_core::ensemble::DEFAULT_TAU,
            thresholds: None,
            palette: Palette::default(),
            backends: BTreeMap::new(),
            co_occurrence: None,
            model_path: None,
            data_root: None,
            artifacts_dir: PathBuf::from("artifacts"),
            listen: "127.0.0.1:8080".into(),
        }
    }
}

impl AppConfig {
    pub fn from_json(text: &str) -> Result<Self, AppError> {
        let cfg: AppConfig = serde_json::from_str(text).map_err(|e| AppError::config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AppError::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// An explicit path wins over `PREDISM_CONFIG`; with neither, defaults.
    pub fn resolve(explicit: Option<&Path>) -> Result<Self, AppError> {
        match explicit {
            Some(p) => Self::load(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) if !p.is_empty() => Self::load(Path::new(&p)),
                _ => Ok(Self::default()),
            },
        }
    }

    pub fn validate(&self) -> Result<(), AppError> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(AppError::config(format!("tau must lie in (0, 1), got {}", self.tau)));
        }
        if self.chip_size < 8 {
            return Err(AppError::config(format!("chip_size must be at least 8, got {}", self.chip_size)));
        }
        self.threshold_table()?;
        if let Some(c) = &self.co_occurrence {
            c.validate().map_err(|e| AppError::config(e.to_string()))?;
        }
        for (t, decl) in &self.backends {
            if let BackendDecl::External {
                command,
                url,
                timeout_ms,
                pool_size,
            } = decl
            {
                let ok = match (command, url) {
                    (Some(c), None) => !c.is_empty(),
                    (None, Some(u)) => !u.is_empty(),
                    _ => false,
                };
                if !ok {
                    return Err(AppError::config(format!(
                        "external backend for {t} needs exactly one of a non-empty command or url"
                    )));
                }
                if *timeout_ms == 0 || *pool_size == 0 {
                    return Err(AppError::config(format!("external backend for {t}: timeout and pool size must be positive")));
                }
            }
        }
        Ok(())
    }

    pub fn threshold_table(&self) -> Result<ThresholdTable, AppError> {
        load_thresholds(self.thresholds.as_ref()).map_err(|e| AppError::config(format!("thresholds: {e}")))
    }

    fn model(&self) -> Result<Option<ModelFile>, AppError> {
        self.model_path
            .as_deref()
            .map(|p| ModelFile::load(p).map_err(|e| AppError::startup(format!("model {}: {e}", p.display()))))
            .transpose()
    }

    /// Resolves every declared backend. External processes are spawned here
    /// so a bad command fails at startup rather than on the first request.
    pub fn build_registry(&self) -> Result<BackboneRegistry, AppError> {
        let model = self.model()?;
        let trained = |t: DisasterType| model.as_ref().and_then(|m| m.heads.get(&t).cloned());
        let co = self
            .co_occurrence
            .clone()
            .or_else(|| model.as_ref().and_then(|m| m.co_occurrence.clone()));

        let decls: Vec<(DisasterType, Option<&BackendDecl>)> = if self.backends.is_empty() {
            DISASTER_TYPES.iter().map(|&t| (t, None)).collect()
        } else {
            self.backends.iter().map(|(&t, d)| (t, Some(d))).collect()
        };
        let mut backbones: Vec<Arc<dyn Backbone>> = Vec::new();
        for (t, decl) in decls {
            let backbone: Arc<dyn Backbone> = match decl {
                None => {
                    let head = trained(t).unwrap_or_else(|| Head::Ordinal(predism_core::OrdinalHead::hazard_prior()));
                    Arc::new(reference(t, head)?)
                }
                Some(BackendDecl::ReferenceOrdinal) => {
                    let head = match trained(t) {
                        Some(h @ Head::Ordinal(_)) => h,
                        Some(_) => return Err(kind_mismatch(t, BackboneKind::ReferenceOrdinal)),
                        None => Head::Ordinal(predism_core::OrdinalHead::hazard_prior()),
                    };
                    Arc::new(reference(t, head)?)
                }
                Some(BackendDecl::ReferenceSoftmax) => {
                    let head = match trained(t) {
                        Some(h @ Head::Softmax(_)) => h,
                        Some(_) => return Err(kind_mismatch(t, BackboneKind::ReferenceSoftmax)),
                        None => Head::Softmax(predism_core::SoftmaxHead::hazard_prior()),
                    };
                    Arc::new(reference(t, head)?)
                }
                Some(BackendDecl::External {
                    command,
                    url,
                    timeout_ms,
                    pool_size,
                }) => {
                    let transport = match (command, url) {
                        (Some(c), _) => Transport::Process {
                            command: c.clone(),
                            pool_size: *pool_size,
                        },
                        (None, Some(u)) => Transport::Http { url: u.clone() },
                        (None, None) => return Err(AppError::config(format!("external backend for {t} has no target"))),
                    };
                    let ext = ExternalBackbone::new(t, transport, Duration::from_millis(*timeout_ms))
                        .map_err(|e| AppError::startup(e.to_string()))?;
                    ext.warm_up().map_err(|e| AppError::startup(e.to_string()))?;
                    Arc::new(ext)
                }
            };
            backbones.push(backbone);
        }
        BackboneRegistry::new(backbones, co).map_err(|e| AppError::startup(e.to_string()))
    }

    pub fn predictor(&self) -> Result<Predictor, AppError> {
        let mut p = Predictor::new(self.build_registry()?);
        p.thresholds = self.threshold_table()?;
        p.tau = self.tau;
        p.chip_size = self.chip_size;
        p.palette_id = self.palette.id.clone();
        Ok(p)
    }
}

fn reference(t: DisasterType, head: Head) -> Result<ReferenceBackbone, AppError> {
    ReferenceBackbone::new(t, head).map_err(|e| AppError::startup(format!("head for {t}: {e}")))
}

fn kind_mismatch(t: DisasterType, want: BackboneKind) -> AppError {
    AppError::startup(format!("model head for {t} does not match the declared {want} backend"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = AppConfig::default();
        c.validate().unwrap();
        assert_eq!(c.chip_size, 64);
        assert_eq!(c.tau, 0.35);
        let reg = c.build_registry().unwrap();
        assert_eq!(reg.types().count(), 7);
    }

    #[test]
    fn parses_backend_declarations() {
        let c = AppConfig::from_json(
            r#"{"tau": 0.4, "backends": {
                "flood": {"kind": "reference-softmax"},
                "fire": {"kind": "external", "url": "http://127.0.0.1:9/infer"}
            }}"#,
        )
        .unwrap();
        assert_eq!(c.tau, 0.4);
        assert_eq!(c.backends[&DisasterType::Flood], BackendDecl::ReferenceSoftmax);
        match &c.backends[&DisasterType::Fire] {
            BackendDecl::External { timeout_ms, pool_size, .. } => {
                assert_eq!(*timeout_ms, 5000);
                assert_eq!(*pool_size, 1);
            }
            other => panic!("{other:?}"),
        }
        let reg = c.build_registry().unwrap();
        assert_eq!(reg.types().collect::<Vec<_>>(), [DisasterType::Fire, DisasterType::Flood]);
    }

    #[test]
    fn rejects_invalid_values() {
        for bad in [
            r#"{"tau": 1.0}"#,
            r#"{"chip_size": 4}"#,
            r#"{"backends": {"meteor": {"kind": "reference-ordinal"}}}"#,
            r#"{"backends": {"flood": {"kind": "external"}}}"#,
            r#"{"thresholds": {"fatality": [1, 2, 3, 4, 5]}}"#,
            r#"{"unknown_key": 1}"#,
        ] {
            assert!(AppConfig::from_json(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn unspawnable_external_fails_at_startup() {
        let c = AppConfig::from_json(
            r#"{"backends": {"flood": {"kind": "external", "command": ["/nonexistent/model-server"]}}}"#,
        )
        .unwrap();
        let err = c.build_registry().unwrap_err();
        assert_eq!(err.code, "BackendStartupFailure");
    }
}
