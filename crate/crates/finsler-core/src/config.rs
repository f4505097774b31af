//! Run configuration: JSON document driving the command layer.

use crate::connections::{ConnectionKind, ProcessKind};
use crate::error::{FinslerError, Result};
use crate::jets::DEFAULT_FIBER_FLOOR;
use crate::metrics::MetricSpec;
use crate::sample::SamplePlan;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

fn default_schema_version() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSection {
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_fiber_floor")]
    pub fiber_floor: f64,
}

fn default_count() -> usize {
    20
}
fn default_seed() -> u64 {
    1
}
fn default_fiber_floor() -> f64 {
    DEFAULT_FIBER_FLOOR
}

impl Default for SampleSection {
    fn default() -> Self {
        SampleSection {
            count: default_count(),
            seed: default_seed(),
            fiber_floor: default_fiber_floor(),
        }
    }
}

impl SampleSection {
    pub fn plan(&self) -> SamplePlan {
        SamplePlan {
            count: self.count,
            seed: self.seed,
            fiber_floor: self.fiber_floor,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSection {
    /// Exact-path identities (Taylor vs Taylor).
    #[serde(default = "default_exact")]
    pub exact: f64,
    /// Finite-difference-limited identities.
    #[serde(default = "default_fd")]
    pub fd: f64,
    /// Vanishing-tensor classification threshold.
    #[serde(default = "default_classification")]
    pub classification: f64,
}

fn default_exact() -> f64 {
    1e-9
}
fn default_fd() -> f64 {
    1e-4
}
fn default_classification() -> f64 {
    1e-7
}

impl Default for ToleranceSection {
    fn default() -> Self {
        ToleranceSection {
            exact: default_exact(),
            fd: default_fd(),
            classification: default_classification(),
        }
    }
}

/// Selection for the verify command: the full base-times-process matrix,
/// or one (base, process) pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VerifySelection {
    All(AllTag),
    One {
        base: ConnectionKind,
        process: ProcessKind,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllTag {
    All,
}

impl Default for VerifySelection {
    fn default() -> Self {
        VerifySelection::All(AllTag::All)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeodesicSection {
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
    pub duration: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub metric: MetricSpec,
    #[serde(default)]
    pub samples: SampleSection,
    #[serde(default)]
    pub tolerances: ToleranceSection,
    /// Connection for eval-style tensor output; defaults to Cartan.
    #[serde(default)]
    pub connection: Option<ConnectionKind>,
    #[serde(default)]
    pub verify: Option<VerifySelection>,
    #[serde(default)]
    pub geodesic: Option<GeodesicSection>,
    /// Optional defaults for output location/format; CLI flags override.
    #[serde(default)]
    pub out_dir: Option<String>,
    #[serde(default)]
    pub format: Option<String>,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| FinslerError::Config(format!("cannot read {}: {}", path.display(), e)))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| FinslerError::Config(format!("config parse error: {}", e)))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(FinslerError::Config(format!(
                "unsupported schema_version {} (expected {})",
                self.schema_version, SCHEMA_VERSION
            )));
        }
        if self.samples.count < 1 {
            return Err(FinslerError::Config("samples.count must be >= 1".into()));
        }
        if !(self.samples.fiber_floor > 0.0) {
            return Err(FinslerError::Config("samples.fiber_floor must be > 0".into()));
        }
        for (name, v) in [
            ("exact", self.tolerances.exact),
            ("fd", self.tolerances.fd),
            ("classification", self.tolerances.classification),
        ] {
            if !(v > 0.0) {
                return Err(FinslerError::Config(format!(
                    "tolerances.{} must be > 0",
                    name
                )));
            }
        }
        if let Some(g) = &self.geodesic {
            if g.steps < 1 {
                return Err(FinslerError::Config("geodesic.steps must be >= 1".into()));
            }
            if !(g.duration > 0.0) {
                return Err(FinslerError::Config("geodesic.duration must be > 0".into()));
            }
            if g.x0.len() != g.y0.len() {
                return Err(FinslerError::Config(
                    "geodesic.x0 and geodesic.y0 must have the same dimension".into(),
                ));
            }
        }
        if let Some(f) = &self.format {
            if f != "json" && f != "csv" {
                return Err(FinslerError::Config(format!(
                    "format must be json or csv, got {}",
                    f
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> serde_json::Value {
        serde_json::json!({
            "metric": {
                "dimension": 2,
                "family": "riemannian",
                "chart_domain": {"lo": [-1.0, -1.0], "hi": [1.0, 1.0]}
            }
        })
    }

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg: RunConfig = serde_json::from_value(minimal()).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.samples.count, 20);
        assert_eq!(cfg.samples.seed, 1);
        assert_eq!(cfg.tolerances.classification, 1e-7);
    }

    #[test]
    fn bad_count_rejected() {
        let mut v = minimal();
        v["samples"] = serde_json::json!({"count": 0});
        let cfg: RunConfig = serde_json::from_value(v).unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn unknown_field_rejected() {
        let mut v = minimal();
        v["banana"] = serde_json::json!(1);
        assert!(serde_json::from_value::<RunConfig>(v).is_err());
    }

    #[test]
    fn verify_selection_forms() {
        let one: VerifySelection =
            serde_json::from_value(serde_json::json!({"base": "cartan", "process": "shen_c"}))
                .unwrap();
        assert!(matches!(one, VerifySelection::One { .. }));
        let all: VerifySelection = serde_json::from_value(serde_json::json!("all")).unwrap();
        assert!(matches!(all, VerifySelection::All(_)));
    }
}
