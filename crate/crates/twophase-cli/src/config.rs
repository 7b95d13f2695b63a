//! Run configuration: defaults, JSON file, `TWOPHASE_*` environment overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use twophase::field::FieldGrid;
use twophase::regions::delta_of;
use twophase::{PhysicalParams, RegionCase, C64};

use crate::error::CliError;

/// Prefix of environment variables that override config fields.
/// Nested fields are joined with `__`, e.g. `TWOPHASE_PARAMS__MU_PLUS=2`.
pub const ENV_PREFIX: &str = "TWOPHASE_";

/// JSON schema describing [`RunConfig`].
pub const SCHEMA: &str = include_str!("../schema/run_config.schema.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub params: PhysicalParams,
    pub case: RegionCase,
    /// Shift for cases C2 and C3, `[re, im]`.
    pub delta: Option<C64>,
    pub mode: ModeConfig,
    pub field: FieldConfig,
    pub sweep: SweepConfig,
    pub verify: VerifyConfig,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Overrides the pass threshold of the command being run.
    pub tol: Option<f64>,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: PhysicalParams::default(),
            case: RegionCase::C1,
            delta: None,
            mode: ModeConfig::default(),
            field: FieldConfig::default(),
            sweep: SweepConfig::default(),
            verify: VerifyConfig::default(),
            output_dir: PathBuf::from("out"),
            seed: 0,
            tol: None,
            threads: None,
        }
    }
}

/// A single Fourier mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModeConfig {
    pub lambda: C64,
    pub xi: Vec<f64>,
    /// Samples per interval in profile output.
    pub profile_points: usize,
    /// Points per boundary-layer width on the coarsest oracle grid.
    pub oracle_resolution: usize,
    /// Number of grid halvings in the oracle study.
    pub oracle_levels: usize,
}

impl Default for ModeConfig {
    fn default() -> Self {
        Self { lambda: C64::new(1.5, 0.8), xi: vec![0.9], profile_points: 65, oracle_resolution: 16, oracle_levels: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldConfig {
    pub grid: FieldGrid,
    pub gamma: f64,
    /// Include interior sources in random data.
    pub interior: bool,
    pub max_harmonic: i32,
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self { grid: FieldGrid::default(), gamma: 2.0, interior: false, max_harmonic: 2 }
    }
}

/// Tensor grid of region points for `sweep`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub n_lambda: usize,
    pub lambda_max: f64,
    pub n_a: usize,
    pub a_range: (f64, f64),
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { n_lambda: 16, lambda_max: 1e4, n_a: 16, a_range: (1e-3, 1e2) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub det_samples: usize,
    pub kernel_lambda: C64,
    pub rbound_family: usize,
    pub bundles: usize,
    /// Upper bound accepted for the norm ratio in `verify evolve`.
    pub ratio_bound: f64,
    pub nonlinear_grid: FieldGrid,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            det_samples: 10_000,
            kernel_lambda: C64::new(1.0, 0.0),
            rbound_family: 4,
            bundles: 4,
            ratio_bound: 10.0,
            nonlinear_grid: FieldGrid { m: 16, n_t: 16, n_lower: 16, n_upper: 32, x_max: 8.0, t_end: 1.0, ..FieldGrid::default() },
        }
    }
}

impl RunConfig {
    /// Reads `path` (or starts from defaults), applies environment overrides
    /// and validates.
    pub fn load(path: Option<&Path>, env: impl IntoIterator<Item = (String, String)>) -> Result<Self, CliError> {
        let mut value = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                let v: Value = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("schema error in {}: {e}", p.display())))?;
                if !v.is_object() {
                    return Err(CliError::Usage(format!("schema error in {}: top level must be an object", p.display())));
                }
                v
            }
            None => Value::Object(Default::default()),
        };
        apply_env(&mut value, env)?;
        let cfg: RunConfig = serde_json::from_value(value).map_err(|e| CliError::Usage(format!("schema error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Usage(format!("config error: {m}")));
        self.params.validate().map_err(|e| CliError::Usage(format!("config error: {e}")))?;
        self.field.grid.validate().map_err(|e| CliError::Usage(format!("config error: field.grid: {e}")))?;
        self.verify.nonlinear_grid.validate().map_err(|e| CliError::Usage(format!("config error: verify.nonlinear_grid: {e}")))?;
        if self.case != RegionCase::C1 {
            delta_of(C64::new(1.0, 0.0), self.case, &self.params, self.delta).map_err(|e| CliError::Usage(format!("config error: {e}")))?;
        }
        if self.mode.xi.is_empty() || self.mode.xi.iter().any(|x| !x.is_finite()) {
            return bad("mode.xi must be a nonempty list of finite numbers".into());
        }
        if self.mode.profile_points < 2 || self.mode.oracle_resolution < 4 || self.mode.oracle_levels < 2 {
            return bad("mode.profile_points >= 2, mode.oracle_resolution >= 4 and mode.oracle_levels >= 2 are required".into());
        }
        if !(self.field.gamma > 0.0 && self.field.gamma.is_finite()) || self.field.max_harmonic < 1 {
            return bad("field.gamma must be positive and field.max_harmonic at least 1".into());
        }
        if self.sweep.n_lambda == 0 || self.sweep.n_a == 0 || !(self.sweep.a_range.0 > 0.0 && self.sweep.a_range.1 >= self.sweep.a_range.0) || self.sweep.lambda_max < self.params.lambda0 {
            return bad("sweep needs n_lambda, n_a >= 1, 0 < a_range.0 <= a_range.1 and lambda_max >= lambda0".into());
        }
        if self.verify.det_samples < 4 || self.verify.bundles == 0 || self.verify.rbound_family == 0 || !(self.verify.ratio_bound > 0.0) {
            return bad("verify.det_samples >= 4, verify.bundles >= 1, verify.rbound_family >= 1 and verify.ratio_bound > 0 are required".into());
        }
        if let Some(t) = self.tol {
            if !(t > 0.0 && t.is_finite()) {
                return bad(format!("tol must be positive, got {t}"));
            }
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1".into());
        }
        Ok(())
    }

    /// Shift used for C2/C3 sampling; zero in case C1, where it is derived per point.
    pub fn delta_or_zero(&self) -> C64 {
        self.delta.unwrap_or(C64::new(0.0, 0.0))
    }

    pub fn tol_or(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }

    /// Canonical JSON used for the config hash. Output location and thread
    /// cap do not affect results and are left out.
    pub fn canonical_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Value::Object(m) = &mut v {
            m.remove("output_dir");
            m.remove("threads");
        }
        v.to_string()
    }
}

/// Applies `TWOPHASE_A__B=value` as `{"a": {"b": value}}`. Values that parse
/// as JSON are taken as such, anything else as a string.
pub fn apply_env(value: &mut Value, env: impl IntoIterator<Item = (String, String)>) -> Result<(), CliError> {
    let mut vars: Vec<(String, String)> = env.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
    vars.sort();
    for (key, raw) in vars {
        let path: Vec<String> = key[ENV_PREFIX.len()..].split("__").map(|s| s.to_ascii_lowercase()).collect();
        if path.iter().any(|s| s.is_empty()) {
            return Err(CliError::Usage(format!("malformed override variable {key}")));
        }
        let parsed = serde_json::from_str::<Value>(&raw).unwrap_or(Value::String(raw.clone()));
        let mut node = &mut *value;
        for (i, seg) in path.iter().enumerate() {
            let obj = match node {
                Value::Object(m) => m,
                _ => return Err(CliError::Usage(format!("override {key}: {} is not an object", path[..i].join(".")))),
            };
            if i + 1 == path.len() {
                obj.insert(seg.clone(), parsed.clone());
                break;
            }
            node = obj.entry(seg.clone()).or_insert_with(|| Value::Object(Default::default()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
        assert_eq!(RunConfig::load(None, vec![]).unwrap(), RunConfig::default());
    }

    #[test]
    fn nested_override() {
        let cfg = RunConfig::load(None, env(&[("TWOPHASE_PARAMS__MU_PLUS", "2.5"), ("TWOPHASE_SEED", "9"), ("TWOPHASE_MODE__LAMBDA", "[2, 1]"), ("OTHER", "x")])).unwrap();
        assert_eq!(cfg.params.mu_plus, 2.5);
        assert_eq!(cfg.params.mu_minus, 1.0);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.mode.lambda, C64::new(2.0, 1.0));
    }

    #[test]
    fn unknown_override_is_rejected() {
        let err = RunConfig::load(None, env(&[("TWOPHASE_PARAMS__MU", "1")])).unwrap_err();
        assert!(matches!(err, CliError::Usage(ref m) if m.contains("unknown field")), "{err}");
        assert!(RunConfig::load(None, env(&[("TWOPHASE_SEED__X", "1")])).is_err());
    }

    #[test]
    fn shift_required_off_c1() {
        assert!(RunConfig::load(None, env(&[("TWOPHASE_CASE", "C2")])).is_err());
        let cfg = RunConfig::load(None, env(&[("TWOPHASE_CASE", "C2"), ("TWOPHASE_DELTA", "[-0.3, 0.4]")])).unwrap();
        assert_eq!(cfg.delta_or_zero(), C64::new(-0.3, 0.4));
    }

    #[test]
    fn schema_lists_every_field() {
        fn walk(cfg: &Value, schema: &Value, path: &str) {
            let props = schema["properties"].as_object().unwrap_or_else(|| panic!("{path}: no properties"));
            let obj = cfg.as_object().unwrap();
            let mut a: Vec<&String> = obj.keys().collect();
            let mut b: Vec<&String> = props.keys().collect();
            a.sort();
            b.sort();
            assert_eq!(a, b, "{path}");
            assert_eq!(schema["additionalProperties"], Value::Bool(false), "{path}");
            for (k, v) in obj {
                if v.is_object() {
                    walk(v, &props[k.as_str()], &format!("{path}.{k}"));
                }
            }
        }
        let schema: Value = serde_json::from_str(SCHEMA).unwrap();
        let cfg = serde_json::to_value(RunConfig::default()).unwrap();
        walk(&cfg, &schema, "$");
    }
}
