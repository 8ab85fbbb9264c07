//! Run configuration: one JSON document per run, schema-validated with
//! unknown keys rejected, plus dotted-path `--set key=value` overrides.

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;
use serde_json::Value;

use multibubble::geometry::DomainSpec;
use multibubble::green::{EngineMethod, GreenEngine};
use multibubble::reduced::{Configuration, Regime, RegimeKind};
use multibubble::search::SearchOptions;

/// Engine build options.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EngineBlock {
    pub n_boundary: usize,
    pub tol: f64,
    /// "auto", "analytic_ball" or "collocation".
    pub method: String,
}

impl Default for EngineBlock {
    fn default() -> Self {
        EngineBlock {
            n_boundary: 400,
            tol: 1e-8,
            method: "auto".into(),
        }
    }
}

/// Regime description as written in configs.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeBlock {
    pub kind: String,
    pub n: usize,
    pub kappa: usize,
    #[serde(default)]
    pub lambdas: Option<Vec<i32>>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub eps_list: Option<Vec<f64>>,
    #[serde(default)]
    pub hole_center: Option<Vec<f64>>,
    #[serde(default)]
    pub interaction_sign: Option<f64>,
}

impl RegimeBlock {
    pub fn build(&self) -> Result<Regime> {
        let eps_sign = match (self.epsilon, self.eps_list.as_ref()) {
            (Some(e), _) if e != 0.0 => e.signum() as i32,
            (None, Some(list)) if !list.is_empty() && list[0] != 0.0 => list[0].signum() as i32,
            _ => 1,
        };
        let mut regime = match self.kind.as_str() {
            "mbn" => Regime::mbn(
                self.n,
                self.kappa,
                eps_sign,
                self.lambdas
                    .clone()
                    .ok_or_else(|| anyhow!("regime kind \"mbn\" requires \"lambdas\""))?,
            )?,
            "mac" => Regime::mac(
                self.n,
                self.kappa,
                eps_sign,
                self.lambdas
                    .clone()
                    .ok_or_else(|| anyhow!("regime kind \"mac\" requires \"lambdas\""))?,
            )?,
            "tac" => Regime::tac(self.n, self.kappa)?,
            "tc" => Regime::tc(
                self.n,
                self.kappa,
                self.hole_center
                    .clone()
                    .ok_or_else(|| anyhow!("regime kind \"tc\" requires \"hole_center\""))?,
            )?,
            other => bail!("unknown regime kind \"{other}\""),
        };
        if let Some(s) = self.interaction_sign {
            regime.interaction_sign = s;
            regime.validate()?;
        }
        if let Some(lams) = &self.lambdas {
            if matches!(regime.kind, RegimeKind::Tac | RegimeKind::Tc) && *lams != regime.lambdas {
                bail!("tower regimes fix lambdas to the alternating sequence");
            }
        }
        Ok(regime)
    }

    pub fn epsilon(&self) -> Result<f64> {
        self.epsilon
            .ok_or_else(|| anyhow!("this command requires \"regime.epsilon\""))
    }

    pub fn eps_list(&self) -> Result<Vec<f64>> {
        self.eps_list
            .clone()
            .ok_or_else(|| anyhow!("this command requires \"regime.eps_list\""))
    }
}

/// Subset of the search options exposed in configs.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchBlock {
    pub max_iters: Option<usize>,
    pub grad_tol: Option<f64>,
    pub dedup_radius: Option<f64>,
    pub log_rate_bound: Option<f64>,
    pub interior_margin_rel: Option<f64>,
    pub separation_margin_rel: Option<f64>,
}

impl SearchBlock {
    pub fn build(&self) -> SearchOptions {
        let mut o = SearchOptions::default();
        if let Some(v) = self.max_iters {
            o.max_iters = v;
        }
        if let Some(v) = self.grad_tol {
            o.grad_tol = v;
        }
        if let Some(v) = self.dedup_radius {
            o.dedup_radius = v;
        }
        if let Some(v) = self.log_rate_bound {
            o.log_rate_bound = v;
        }
        if let Some(v) = self.interior_margin_rel {
            o.interior_margin_rel = v;
        }
        if let Some(v) = self.separation_margin_rel {
            o.separation_margin_rel = v;
        }
        o
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobinMapBlock {
    pub axes: [usize; 2],
    pub fixed: Vec<f64>,
    pub extent: [[f64; 2]; 2],
    pub resolution: [usize; 2],
    #[serde(default = "default_margin")]
    pub boundary_margin: f64,
}

fn default_margin() -> f64 {
    0.02
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreenProbeBlock {
    #[serde(default)]
    pub points: Vec<Vec<f64>>,
    #[serde(default)]
    pub pairs: Vec<[Vec<f64>; 2]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReduceBlock {
    /// Multistart count; 0 skips the search (landscape-only runs).
    pub count: usize,
    /// Optional reduced-energy landscape grid over two configuration
    /// coordinates, written next to the report as CSV.
    #[serde(default)]
    pub landscape: Option<LandscapeBlock>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeBlock {
    /// Base configuration; the scanned coordinates are overwritten.
    pub configuration: Value,
    /// Flattened coordinate indices to scan (see the configuration
    /// coordinate layout: ambient points first, then log-rates).
    pub coords: [usize; 2],
    pub extent: [[f64; 2]; 2],
    pub resolution: [usize; 2],
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssembleBlock {
    pub configuration: Value,
    #[serde(default)]
    pub segment: Option<SegmentBlock>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentBlock {
    pub from: Vec<f64>,
    pub to: Vec<f64>,
    pub samples: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub configuration: Value,
    #[serde(default)]
    pub quad_budget: Option<usize>,
    #[serde(default)]
    pub n_boundary: Option<usize>,
    #[serde(default)]
    pub engine_tol: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelCheckBlock {
    pub dims: Vec<usize>,
    pub deltas: Vec<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_samples() -> usize {
    50
}

fn default_threshold() -> f64 {
    1e-4
}

/// The whole run configuration.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub domain: Option<Value>,
    #[serde(default)]
    pub engine: EngineBlock,
    #[serde(default)]
    pub regime: Option<RegimeBlock>,
    #[serde(default)]
    pub search: SearchBlock,
    #[serde(default)]
    pub seed: u64,
    /// Output file path of the command's artifact.
    pub output: String,
    #[serde(default)]
    pub robin_map: Option<RobinMapBlock>,
    #[serde(default)]
    pub green_probe: Option<GreenProbeBlock>,
    #[serde(default)]
    pub reduce: Option<ReduceBlock>,
    #[serde(default)]
    pub assemble: Option<AssembleBlock>,
    #[serde(default)]
    pub residual_sweep: Option<SweepBlock>,
    #[serde(default)]
    pub kernel_check: Option<KernelCheckBlock>,
}

impl RunConfig {
    /// Parse a JSON document plus `--set key=value` overrides (dotted paths;
    /// values parsed as JSON, falling back to strings).
    pub fn from_json_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut value: Value = serde_json::from_str(text).context("config is not valid JSON")?;
        for item in overrides {
            apply_override(&mut value, item)?;
        }
        let config: RunConfig =
            serde_json::from_value(value.clone()).context("config schema violation")?;
        // the domain and configurations are validated strictly by hand (the
        // tagged-enum form cannot reject unknown keys via serde)
        if let Some(d) = &config.domain {
            DomainSpec::from_json_value(d)?;
        }
        if let Some(a) = &config.assemble {
            validate_configuration_value(&a.configuration)?;
        }
        if let Some(s) = &config.residual_sweep {
            validate_configuration_value(&s.configuration)?;
        }
        if let Some(r) = &config.reduce {
            if let Some(l) = &r.landscape {
                validate_configuration_value(&l.configuration)?;
            }
        }
        Ok(config)
    }

    pub fn domain_spec(&self) -> Result<DomainSpec> {
        let v = self
            .domain
            .as_ref()
            .ok_or_else(|| anyhow!("this command requires a \"domain\""))?;
        Ok(DomainSpec::from_json_value(v)?)
    }

    pub fn regime_block(&self) -> Result<&RegimeBlock> {
        self.regime
            .as_ref()
            .ok_or_else(|| anyhow!("this command requires a \"regime\""))
    }

    pub fn build_engine(&self) -> Result<GreenEngine> {
        let domain = self.domain_spec()?;
        let engine = match self.engine.method.as_str() {
            "auto" => GreenEngine::build(&domain, self.engine.n_boundary, self.engine.tol)?,
            "analytic_ball" => GreenEngine::build_with_method(
                &domain,
                self.engine.n_boundary,
                self.engine.tol,
                EngineMethod::AnalyticBall,
            )?,
            "collocation" => GreenEngine::build_with_method(
                &domain,
                self.engine.n_boundary,
                self.engine.tol,
                EngineMethod::Collocation,
            )?,
            other => bail!("unknown engine method \"{other}\""),
        };
        Ok(engine)
    }
}

/// Parse a configuration value into the library type after strict key checks.
pub fn parse_configuration(v: &Value) -> Result<Configuration> {
    validate_configuration_value(v)?;
    Ok(serde_json::from_value(v.clone())?)
}

fn validate_configuration_value(v: &Value) -> Result<()> {
    let obj = v
        .as_object()
        .ok_or_else(|| anyhow!("configuration must be a JSON object"))?;
    let ty = obj
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| anyhow!("configuration requires a string \"type\""))?;
    let allowed: &[&str] = match ty {
        "multi" => &["type", "points", "log_rates"],
        "tower_ac" => &["type", "offsets", "base", "log_rates"],
        "tower_c" => &["type", "offsets", "log_rates"],
        other => bail!("unknown configuration type \"{other}\""),
    };
    for key in obj.keys() {
        if !allowed.contains(&key.as_str()) {
            bail!("unknown key \"{key}\" in configuration of type \"{ty}\"");
        }
    }
    Ok(())
}

/// Apply one `--set path.to.key=value` override.
fn apply_override(root: &mut Value, item: &str) -> Result<()> {
    let (path, raw) = item
        .split_once('=')
        .ok_or_else(|| anyhow!("--set expects key=value, got \"{item}\""))?;
    let parsed: Value = serde_json::from_str(raw).unwrap_or(Value::String(raw.to_string()));
    let mut cursor = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if i + 1 == parts.len() {
            match cursor {
                Value::Object(map) => {
                    map.insert(part.to_string(), parsed);
                    return Ok(());
                }
                Value::Array(arr) => {
                    let idx: usize = part.parse().context("array index in --set path")?;
                    if idx >= arr.len() {
                        bail!("--set index {idx} out of bounds");
                    }
                    arr[idx] = parsed;
                    return Ok(());
                }
                _ => bail!("--set path \"{path}\" does not address an object"),
            }
        }
        cursor = match cursor {
            Value::Object(map) => map
                .entry(part.to_string())
                .or_insert_with(|| Value::Object(Default::default())),
            Value::Array(arr) => {
                let idx: usize = part.parse().context("array index in --set path")?;
                arr.get_mut(idx)
                    .ok_or_else(|| anyhow!("--set index {idx} out of bounds"))?
            }
            _ => bail!("--set path \"{path}\" descends into a scalar"),
        };
    }
    unreachable!()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "domain": {"kind":"ball","center":[0,0,0],"radius":1.0,"n":3},
        "regime": {"kind":"mac","n":3,"kappa":1,"lambdas":[1],"epsilon":1e-3},
        "output": "out.json",
        "reduce": {"count": 4}
    }"#;

    #[test]
    fn minimal_config_parses() {
        let cfg = RunConfig::from_json_str(MINIMAL, &[]).unwrap();
        assert_eq!(cfg.reduce.as_ref().unwrap().count, 4);
        let regime = cfg.regime_block().unwrap().build().unwrap();
        assert_eq!(regime.kappa, 1);
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = MINIMAL.replace("\"seed\"", "\"zzz\"");
        let with_extra = bad.replace("\"output\"", "\"unexpected\": 1, \"output\"");
        assert!(RunConfig::from_json_str(&with_extra, &[]).is_err());
    }

    #[test]
    fn overrides_apply() {
        let cfg = RunConfig::from_json_str(
            MINIMAL,
            &[
                "reduce.count=16".to_string(),
                "regime.epsilon=-1e-4".to_string(),
                "seed=7".to_string(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.reduce.as_ref().unwrap().count, 16);
        assert_eq!(cfg.seed, 7);
        let regime = cfg.regime_block().unwrap().build().unwrap();
        assert_eq!(regime.eps_sign, -1);
    }

    #[test]
    fn tower_lambda_override_rejected() {
        let text = r#"{
            "regime": {"kind":"tac","n":4,"kappa":2,"lambdas":[1,1],"epsilon":1e-3},
            "output": "o.json"
        }"#;
        let cfg = RunConfig::from_json_str(text, &[]).unwrap();
        assert!(cfg.regime_block().unwrap().build().is_err());
    }
}
