//! Run configuration: JSON file, dotted overrides, validation.

use std::path::PathBuf;

use bns_emm::esscher::default_variance_range;
use bns_emm::mc::{McOptions, Payoff};
use bns_emm::{BdlpModel, BnsParams, CumulantContext, JumpTilt, MeasureSpec, Tolerance};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "reference_model")]
    pub model: BnsParams,
    #[serde(default = "default_measure")]
    pub measure: MeasureSpec,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default)]
    pub pricing: PricingConfig,
    #[serde(default)]
    pub compare: CompareConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
    pub n_paths: u64,
    /// `null` means 252 steps per unit of time.
    pub n_steps: Option<usize>,
    pub seed: u64,
    /// `null` defers to `BNS_WORKERS`, then to the number of cores.
    pub workers: Option<usize>,
    pub antithetic: bool,
    pub memm_batch: u64,
    pub v_grid: VGrid,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        let tol = Tolerance::default();
        let mc = McOptions::default();
        Self {
            abs_tol: tol.abs_tol,
            rel_tol: tol.rel_tol,
            max_iter: tol.max_iter,
            n_paths: mc.n_paths,
            n_steps: None,
            seed: mc.seed,
            workers: None,
            antithetic: false,
            memm_batch: mc.memm_batch,
            v_grid: VGrid::default(),
        }
    }
}

/// Log-spaced variance grid; missing ends cover the range visited by paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VGrid {
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub n: usize,
}

impl Default for VGrid {
    fn default() -> Self {
        Self { lo: None, hi: None, n: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PricingConfig {
    pub payoffs: Vec<Payoff>,
    /// Empty means at the money.
    pub strikes: Vec<f64>,
    /// Empty means the `measure` block alone.
    pub measures: Vec<MeasureSpec>,
}

impl Default for PricingConfig {
    fn default() -> Self {
        Self {
            payoffs: vec![Payoff::Call],
            strikes: Vec::new(),
            measures: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareConfig {
    pub measures: Vec<MeasureSpec>,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            measures: vec![
                MeasureSpec::ExpEsscher,
                MeasureSpec::LinEsscher,
                MeasureSpec::Minimal,
                MeasureSpec::StructurePreserving { tilt: JumpTilt::Identity },
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Number of paths written by `simulate`.
    pub paths: u64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("."),
            paths: 10,
        }
    }
}

fn reference_model() -> BnsParams {
    BnsParams {
        mu: 0.0,
        beta: 0.0,
        rho: -1.0,
        lambda: 1.0,
        v0: 1.0,
        s0: 100.0,
        horizon: 1.0,
        bdlp: BdlpModel::PoissonToy {
            jump_size: 1.0,
            intensity: 1.0,
        },
    }
}

fn default_measure() -> MeasureSpec {
    MeasureSpec::ExpEsscher
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: reference_model(),
            measure: default_measure(),
            numerics: NumericsConfig::default(),
            pricing: PricingConfig::default(),
            compare: CompareConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

/// Source text kept to attach line numbers to errors.
#[derive(Debug, Clone, Default)]
pub struct Source {
    pub name: String,
    pub text: String,
    pub overridden: Vec<String>,
}

impl Source {
    /// 1-based line of the key at `path`, if it appears in the file.
    pub fn line_of(&self, path: &[&str]) -> Option<usize> {
        let mut from = 0;
        let lines: Vec<&str> = self.text.lines().collect();
        let mut found = None;
        for key in path {
            let needle = format!("\"{key}\"");
            let idx = (from..lines.len()).find(|&i| lines[i].contains(&needle))?;
            found = Some(idx + 1);
            from = idx;
        }
        found
    }

    fn locate(&self, dotted: &str) -> String {
        if self.overridden.iter().any(|o| dotted == o || dotted.starts_with(&format!("{o}."))) {
            return format!("{dotted} (from --set)");
        }
        let parts: Vec<&str> = dotted.split('.').filter(|p| !p.is_empty()).collect();
        match self.line_of(&parts) {
            Some(line) => format!("{}:{line}: {dotted}", self.name),
            None => format!("{}: {dotted}", self.name),
        }
    }

    pub fn error(&self, dotted: &str, msg: impl std::fmt::Display) -> CliError {
        CliError::Validation(format!("{}: {msg}", self.locate(dotted)))
    }
}

/// Sets `a.b.c = value` in a JSON document, creating objects on the way.
pub fn apply_override(doc: &mut Value, assignment: &str) -> CliResult<String> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Validation(format!("override `{assignment}` is not of the form key=value")))?;
    let path = path.trim();
    if path.is_empty() || path.split('.').any(str::is_empty) {
        return Err(CliError::Validation(format!("override `{assignment}` has an empty key")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        let obj = match node {
            Value::Object(map) => map,
            Value::Null => {
                *node = Value::Object(Default::default());
                node.as_object_mut().expect("just created")
            }
            _ => {
                return Err(CliError::Validation(format!(
                    "override `{assignment}`: `{}` is not an object",
                    keys[..i].join(".")
                )))
            }
        };
        if i + 1 == keys.len() {
            obj.insert((*key).to_string(), value);
            break;
        }
        node = obj.entry(*key).or_insert(Value::Null);
    }
    Ok(path.to_string())
}

/// Overlays `top` on `base`. Tagged objects (`family`, `kind`) replace
/// their counterpart whole so variant fields never mix.
fn merge(base: Value, top: Value) -> Value {
    match (base, top) {
        (Value::Object(mut b), Value::Object(t)) if !t.contains_key("family") && !t.contains_key("kind") => {
            for (k, v) in t {
                let merged = match b.remove(&k) {
                    Some(old) => merge(old, v),
                    None => v,
                };
                b.insert(k, merged);
            }
            Value::Object(b)
        }
        (_, t) => t,
    }
}

impl RunConfig {
    /// Parses `text`, applies overrides, validates and materializes defaults.
    pub fn load(name: &str, text: &str, overrides: &[String]) -> CliResult<(Self, Source)> {
        let mut source = Source {
            name: name.to_string(),
            text: text.to_string(),
            overridden: Vec::new(),
        };
        let doc: Value = if text.trim().is_empty() {
            Value::Object(Default::default())
        } else {
            serde_json::from_str(text).map_err(|e| {
                CliError::Validation(format!("{name}:{}:{}: {e}", e.line(), e.column()))
            })?
        };
        if !doc.is_object() {
            return Err(CliError::Validation(format!("{name}: top level must be a JSON object")));
        }
        let mut doc = merge(serde_json::to_value(RunConfig::default()).expect("serializable"), doc);
        for o in overrides {
            source.overridden.push(apply_override(&mut doc, o)?);
        }
        let mut cfg: RunConfig = serde_path_to_error::deserialize(doc).map_err(|e| {
            let path = e.path().to_string();
            source.error(&path, e.into_inner())
        })?;
        cfg.validate(&source)?;
        cfg.materialize();
        Ok((cfg, source))
    }

    pub fn tolerance(&self) -> Tolerance {
        Tolerance {
            abs_tol: self.numerics.abs_tol,
            rel_tol: self.numerics.rel_tol,
            max_iter: self.numerics.max_iter,
        }
    }

    pub fn context(&self) -> CliResult<CumulantContext> {
        Ok(CumulantContext::new(self.model, self.tolerance())?)
    }

    fn validate(&self, src: &Source) -> CliResult<()> {
        if let Err(e) = self.model.validate() {
            let field = match &e {
                bns_emm::Error::InvalidParameter { name, .. } => {
                    if ["mu", "beta", "rho", "lambda", "v0", "s0", "horizon"].contains(name) {
                        format!("model.{name}")
                    } else {
                        format!("model.bdlp.{name}")
                    }
                }
                _ => "model".to_string(),
            };
            return Err(src.error(&field, e));
        }
        self.tolerance().validate().map_err(|e| src.error("numerics", e))?;
        let n = &self.numerics;
        if n.n_paths < 2 {
            return Err(src.error("numerics.n_paths", "at least two paths are required"));
        }
        if n.n_steps == Some(0) {
            return Err(src.error("numerics.n_steps", "must be positive"));
        }
        if n.memm_batch < 2 {
            return Err(src.error("numerics.memm_batch", "at least two paths are required"));
        }
        if n.workers == Some(0) {
            return Err(src.error("numerics.workers", "must be positive"));
        }
        if n.v_grid.n < 2 {
            return Err(src.error("numerics.v_grid.n", "at least two points are required"));
        }
        for (key, v) in [("lo", n.v_grid.lo), ("hi", n.v_grid.hi)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(src.error(&format!("numerics.v_grid.{key}"), "must be positive and finite"));
                }
            }
        }
        if let (Some(lo), Some(hi)) = (n.v_grid.lo, n.v_grid.hi) {
            if hi <= lo {
                return Err(src.error("numerics.v_grid.hi", "must exceed lo"));
            }
        }
        for (i, k) in self.pricing.strikes.iter().enumerate() {
            if !(*k > 0.0 && k.is_finite()) {
                return Err(src.error(&format!("pricing.strikes.{i}"), "strikes must be positive"));
            }
        }
        let tilts = std::iter::once(("measure".to_string(), &self.measure))
            .chain(self.pricing.measures.iter().enumerate().map(|(i, m)| (format!("pricing.measures.{i}"), m)))
            .chain(self.compare.measures.iter().enumerate().map(|(i, m)| (format!("compare.measures.{i}"), m)));
        for (path, m) in tilts {
            if let MeasureSpec::StructurePreserving { tilt } = m {
                tilt.validate().map_err(|e| src.error(&format!("{path}.tilt"), e))?;
            }
        }
        if self.output.paths == 0 {
            return Err(src.error("output.paths", "must be positive"));
        }
        Ok(())
    }

    fn materialize(&mut self) {
        let n_steps = self.numerics.n_steps.unwrap_or_else(|| self.model.default_steps());
        self.numerics.n_steps = Some(n_steps);
        if self.numerics.v_grid.lo.is_none() || self.numerics.v_grid.hi.is_none() {
            if let Ok(ctx) = self.context() {
                let (lo, hi) = default_variance_range(&ctx);
                let lo = *self.numerics.v_grid.lo.get_or_insert(lo);
                self.numerics.v_grid.hi.get_or_insert(hi.max(lo * 1.01));
            }
        }
        if self.pricing.strikes.is_empty() {
            self.pricing.strikes.push(self.model.s0);
        }
        if self.pricing.measures.is_empty() {
            self.pricing.measures.push(self.measure.clone());
        }
    }

    pub fn mc_options(&self, workers: usize) -> McOptions {
        McOptions {
            n_paths: self.numerics.n_paths,
            n_steps: self.numerics.n_steps.unwrap_or_else(|| self.model.default_steps()),
            seed: self.numerics.seed,
            workers,
            antithetic: self.numerics.antithetic,
            memm_batch: self.numerics.memm_batch,
        }
    }

    pub fn v_grid(&self) -> Vec<f64> {
        let g = &self.numerics.v_grid;
        let lo = g.lo.unwrap_or(self.model.variance_floor());
        let hi = g.hi.unwrap_or(lo * 10.0);
        bns_emm::numerics::log_grid(lo, hi, g.n)
    }

    /// SHA-256 of everything that determines numerical output. Worker count
    /// and output location are left out.
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.numerics.workers = None;
        canon.output = OutputConfig::default();
        let text = serde_json::to_string(&canon).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}
