//! Run configuration: flag and file parsing, defaults and validation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use metaboson::lattice::{BoundaryCondition, BulkModel};
use metaboson::models::{pdmc_default_shift, Preset};
use serde::{Deserialize, Deserializer, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Spectrum,
    PhaseDiagram,
    Modes,
    Correlate,
    Parity,
    Pseudospec,
    Transient,
}

impl Task {
    pub const ALL: [Task; 7] =
        [Task::Spectrum, Task::PhaseDiagram, Task::Modes, Task::Correlate, Task::Parity, Task::Pseudospec, Task::Transient];

    pub fn as_str(&self) -> &'static str {
        match self {
            Task::Spectrum => "spectrum",
            Task::PhaseDiagram => "phase-diagram",
            Task::Modes => "modes",
            Task::Correlate => "correlate",
            Task::Parity => "parity",
            Task::Pseudospec => "pseudospec",
            Task::Transient => "transient",
        }
    }

    pub fn parse(s: &str) -> Option<Task> {
        Task::ALL.into_iter().find(|t| t.as_str() == s)
    }

    /// Accepted `--grid` keys with their defaults (None: no default).
    pub fn grid_keys(&self) -> &'static [(&'static str, Option<&'static str>)] {
        match self {
            Task::Spectrum => &[("nk", Some("256"))],
            Task::PhaseDiagram => &[("x", None), ("y", None)],
            Task::Modes => &[("frac", Some("0.01")), ("norm", Some("symmetric"))],
            Task::Correlate => &[
                ("frac", Some("0.01")),
                ("norm", Some("symmetric")),
                ("kind", Some("qu")),
                ("tau", Some("-5:5:201")),
                ("omega", None),
            ],
            Task::Parity => &[("frac", Some("0.1")), ("theta", Some("1")), ("phi", Some("0,1.5707963267948966,3.141592653589793")), ("t", Some("0:60:601"))],
            Task::Pseudospec => &[("nx", Some("60")), ("ny", Some("60")), ("re", None), ("im", None)],
            Task::Transient => &[("mode", Some("0")), ("samples", Some("250")), ("t", Some("0:100:201"))],
        }
    }
}

/// Parameter names and defaults of each named preset.
pub fn preset_params(model: &str) -> Option<&'static [(&'static str, f64)]> {
    Some(match model {
        "dbkc" => &[("j", 2.0), ("delta", 0.5), ("mu", 0.0), ("kappa", 0.3), ("gamma", 0.0)],
        // alpha defaults to the smallest shift that keeps the bosonic chain PSD
        "pdmc" => &[("j", 0.5), ("delta", 1.0), ("mu", -0.3), ("alpha", f64::NAN)],
        "dbkc-pure-ss" => &[("j", 2.0), ("delta", 0.5), ("kappa", 0.3)],
        "dns" => &[("j_plus", 1.0), ("j_minus", 0.25), ("kappa_minus", 0.3), ("kappa_plus", 0.0)],
        "ddw" => &[("delta_h", 0.5), ("delta_d", 1.0), ("mu", 0.0), ("kappa_minus", 0.5), ("kappa_plus", 0.5)],
        _ => return None,
    })
}

pub const MODEL_NAMES: [&str; 6] = ["dbkc", "pdmc", "dbkc-pure-ss", "dns", "ddw", "custom"];

fn grid_values<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, String>, D::Error> {
    let raw = BTreeMap::<String, serde_json::Value>::deserialize(d)?;
    raw.into_iter()
        .map(|(k, v)| match v {
            serde_json::Value::String(s) => Ok((k, s)),
            serde_json::Value::Number(n) => Ok((k, n.to_string())),
            other => Err(serde::de::Error::custom(format!("grid value for '{k}' must be a string or number, got {other}"))),
        })
        .collect()
}

/// Everything needed to reproduce a run. Written verbatim, with defaults
/// filled in, into every metadata sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: Task,
    pub model: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom_model: Option<BulkModel>,
    #[serde(default = "default_bc")]
    pub bc: String,
    #[serde(default = "default_sizes")]
    pub sizes: Vec<usize>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, deserialize_with = "grid_values")]
    pub grid: BTreeMap<String, String>,
}

fn default_bc() -> String {
    "obc".into()
}

fn default_sizes() -> Vec<usize> {
    vec![25]
}

fn default_out() -> PathBuf {
    PathBuf::from(".")
}

/// Configuration error, reported with exit code 2.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Where a value came from, for error messages.
#[derive(Debug, Clone)]
pub enum Origin {
    Flags,
    File { path: String, text: String },
}

impl Origin {
    /// Prefix naming the flag, or the file line mentioning `key`.
    pub fn locate(&self, flag: &str, key: &str) -> String {
        match self {
            Origin::Flags => flag.to_string(),
            Origin::File { path, text } => {
                let needle = format!("\"{key}\"");
                match text.lines().position(|l| l.contains(&needle)) {
                    Some(i) => format!("{path}:{}", i + 1),
                    None => path.clone(),
                }
            }
        }
    }
}

/// `file:line:col: message` without serde's own location suffix.
pub fn json_error(name: &str, e: serde_json::Error) -> ConfigError {
    let full = e.to_string();
    let suffix = format!(" at line {} column {}", e.line(), e.column());
    let msg = full.strip_suffix(&suffix).unwrap_or(&full);
    ConfigError(format!("{name}:{}:{}: {msg}", e.line(), e.column()))
}

/// Reads a run configuration or a metadata sidecar (its "config" field).
pub fn load_file(path: &Path) -> Result<(RunConfig, Origin), ConfigError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{name}: {e}")))?;
    let at = |e: serde_json::Error| json_error(&name, e);
    let value: serde_json::Value = serde_json::from_str(&text).map_err(at)?;
    let cfg: RunConfig = if value.get("config").is_some() && value.get("task").is_none() {
        // metadata sidecar
        serde_json::from_value(value["config"].clone()).map_err(|e| ConfigError(format!("{name}: config: {e}")))?
    } else {
        serde_json::from_str(&text).map_err(at)?
    };
    Ok((cfg, Origin::File { path: name, text }))
}

/// `key=val,key=val` into ordered pairs.
pub fn parse_pairs(flag: &str, s: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        match item.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => out.push((k.trim().to_string(), v.trim().to_string())),
            _ => return err(format!("{flag}: expected key=value, got '{item}'")),
        }
    }
    Ok(out)
}

/// Values of `--grid`: commas separate entries unless they sit inside a
/// list value, so `phi=0,1.57,x=...` is split on keys.
pub fn parse_grid(s: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out: Vec<(String, String)> = Vec::new();
    for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        match item.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => out.push((k.trim().to_string(), v.trim().to_string())),
            None if !out.is_empty() => {
                let last = out.last_mut().expect("non-empty");
                last.1.push(',');
                last.1.push_str(item);
            }
            _ => return err(format!("--grid: expected key=value, got '{item}'")),
        }
    }
    Ok(out)
}

pub fn parse_f64(at: &str, key: &str, v: &str) -> Result<f64, ConfigError> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => err(format!("{at}: '{key}' must be a finite number, got '{v}'")),
    }
}

pub fn parse_usize(at: &str, key: &str, v: &str) -> Result<usize, ConfigError> {
    v.parse::<usize>().map_err(|_| ConfigError(format!("{at}: '{key}' must be a non-negative integer, got '{v}'")))
}

/// `--N 25` or `--N 10,20,30`.
pub fn parse_sizes(s: &str) -> Result<Vec<usize>, ConfigError> {
    s.split(',').map(str::trim).map(|t| parse_usize("--N", "N", t)).collect()
}

/// `--N-range a:b[:step]`, inclusive of both ends.
pub fn parse_size_range(s: &str) -> Result<Vec<usize>, ConfigError> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    if !(2..=3).contains(&parts.len()) {
        return err(format!("--N-range: expected start:end[:step], got '{s}'"));
    }
    let a = parse_usize("--N-range", "start", parts[0])?;
    let b = parse_usize("--N-range", "end", parts[1])?;
    let step = if parts.len() == 3 { parse_usize("--N-range", "step", parts[2])? } else { 1 };
    if step == 0 || b < a {
        return err(format!("--N-range: need start <= end and step >= 1, got '{s}'"));
    }
    Ok((a..=b).step_by(step).collect())
}

/// Uniform grid `lo:hi:n`, inclusive; n = 1 gives lo.
pub fn parse_linspace(at: &str, key: &str, s: &str) -> Result<Vec<f64>, ConfigError> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return err(format!("{at}: '{key}' expects lo:hi:n, got '{s}'"));
    }
    let lo = parse_f64(at, key, parts[0])?;
    let hi = parse_f64(at, key, parts[1])?;
    let n = parse_usize(at, key, parts[2])?;
    if n == 0 || n > 1_000_000 {
        return err(format!("{at}: '{key}' needs 1 <= n <= 1000000, got {n}"));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
}

/// Comma list of numbers or a `lo:hi:n` grid.
pub fn parse_values(at: &str, key: &str, s: &str) -> Result<Vec<f64>, ConfigError> {
    if s.contains(':') {
        return parse_linspace(at, key, s);
    }
    s.split(',').map(|t| parse_f64(at, key, t.trim())).collect()
}

/// Model after validation.
#[derive(Debug, Clone)]
pub enum Model {
    Bulk(BulkModel),
    /// The pure-steady-state DBKC, built per size from the parameters.
    PureSs,
}

impl Model {
    pub fn bulk(&self) -> Option<&BulkModel> {
        match self {
            Model::Bulk(b) => Some(b),
            Model::PureSs => None,
        }
    }
}

/// One swept axis of a phase diagram.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub param: String,
    pub values: Vec<f64>,
}

/// Validated configuration ready to execute.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: RunConfig,
    pub model: Option<Model>,
    pub bc: BoundaryCondition,
}

/// Builds a preset from a complete parameter map.
pub fn build_preset(model: &str, p: &BTreeMap<String, f64>) -> Preset {
    let g = |k: &str| p[k];
    match model {
        "dbkc" => Preset::Dbkc { j: g("j"), delta: g("delta"), mu: g("mu"), kappa: g("kappa"), gamma: g("gamma") },
        "pdmc" => Preset::Pdmc { j: g("j"), delta: g("delta"), mu: g("mu"), alpha: g("alpha") },
        "dbkc-pure-ss" => Preset::DbkcPureSs { j: g("j"), delta: g("delta"), kappa: g("kappa") },
        "dns" => Preset::Dns {
            j_plus: g("j_plus"),
            j_minus: g("j_minus"),
            kappa_minus: g("kappa_minus"),
            kappa_plus: g("kappa_plus"),
        },
        "ddw" => Preset::Ddw {
            delta_h: g("delta_h"),
            delta_d: g("delta_d"),
            mu: g("mu"),
            kappa_minus: g("kappa_minus"),
            kappa_plus: g("kappa_plus"),
        },
        _ => unreachable!("model name validated"),
    }
}

/// Fills the pdmc shift when it was left at its default.
pub fn complete_params(model: &str, p: &mut BTreeMap<String, f64>) {
    if model == "pdmc" && p.get("alpha").is_none_or(|a| a.is_nan()) {
        p.insert("alpha".into(), pdmc_default_shift(p["j"], p["delta"], p["mu"]));
    }
}

/// Validates the configuration and fills every default so the stored
/// config alone reproduces the run.
pub fn resolve(mut cfg: RunConfig, origin: &Origin) -> Result<Resolved, ConfigError> {
    let at_model = origin.locate("--model", "model");
    if !MODEL_NAMES.contains(&cfg.model.as_str()) {
        return err(format!("{at_model}: unknown model '{}' (expected one of {})", cfg.model, MODEL_NAMES.join(", ")));
    }
    let custom = cfg.model == "custom";
    if custom {
        if cfg.custom_model.is_none() {
            return err(format!("{at_model}: model 'custom' needs a bulk model (use --model custom:FILE.json)"));
        }
        if let Some(k) = cfg.params.keys().next() {
            return err(format!("{}: the custom model takes no parameters, got '{k}'", origin.locate("--params", k)));
        }
    } else {
        if cfg.custom_model.is_some() {
            return err(format!("{}: custom_model is only used with model 'custom'", origin.locate("--model", "custom_model")));
        }
        let known = preset_params(&cfg.model).expect("known preset");
        for (k, v) in &cfg.params {
            if !known.iter().any(|(n, _)| n == k) {
                let names: Vec<&str> = known.iter().map(|p| p.0).collect();
                return err(format!(
                    "{}: unknown parameter '{k}' for model {} (expected {})",
                    origin.locate("--params", k),
                    cfg.model,
                    names.join(", ")
                ));
            }
            if !v.is_finite() {
                return err(format!("{}: parameter '{k}' must be finite", origin.locate("--params", k)));
            }
        }
        for (k, d) in known {
            // a swept pdmc keeps its shift tied to the point unless given
            if d.is_nan() && cfg.task == Task::PhaseDiagram {
                continue;
            }
            cfg.params.entry(k.to_string()).or_insert(*d);
        }
        if cfg.task != Task::PhaseDiagram {
            complete_params(&cfg.model, &mut cfg.params);
        }
    }

    let at_bc = origin.locate("--bc", "bc");
    let bc = BoundaryCondition::parse(&cfg.bc).map_err(|e| ConfigError(format!("{at_bc}: {e}")))?;
    if !matches!(bc, BoundaryCondition::Obc | BoundaryCondition::Pbc) {
        return err(format!("{at_bc}: finite runs need bc obc or pbc, got '{}'", cfg.bc));
    }
    cfg.bc = bc.as_str().to_string();
    if cfg.model == "dbkc-pure-ss" && bc != BoundaryCondition::Obc {
        return err(format!("{at_bc}: the pure-steady-state DBKC is defined for open chains only"));
    }

    let at_n = origin.locate("--N", "sizes");
    if cfg.sizes.is_empty() {
        return err(format!("{at_n}: at least one chain size is required"));
    }
    if let Some(n) = cfg.sizes.iter().find(|&&n| n == 0) {
        return err(format!("{at_n}: chain size must be positive, got {n}"));
    }

    let task = cfg.task;
    let keys = task.grid_keys();
    for k in cfg.grid.keys() {
        if !keys.iter().any(|(n, _)| n == k) {
            let names: Vec<&str> = keys.iter().map(|p| p.0).collect();
            return err(format!(
                "{}: unknown grid key '{k}' for task {} (expected {})",
                origin.locate("--grid", k),
                task.as_str(),
                names.join(", ")
            ));
        }
    }
    for (k, d) in keys {
        if let Some(d) = d {
            cfg.grid.entry(k.to_string()).or_insert_with(|| d.to_string());
        }
    }

    // The phase diagram builds its own model at every point.
    let model = if task == Task::PhaseDiagram {
        if custom || cfg.model == "dbkc-pure-ss" {
            return err(format!("{at_model}: phase-diagram sweeps a bulk preset, not '{}'", cfg.model));
        }
        None
    } else if custom {
        Some(Model::Bulk(cfg.custom_model.clone().expect("checked")))
    } else {
        let preset = build_preset(&cfg.model, &cfg.params);
        let bulk = preset.bulk().map_err(|e| ConfigError(format!("{}: {e}", origin.locate("--params", "params"))))?;
        Some(bulk.map_or(Model::PureSs, Model::Bulk))
    };
    if let Some(range) = model.as_ref().and_then(|m| m.bulk()).map(|b| b.range()) {
        if let Some(n) = cfg.sizes.iter().find(|&&n| n <= range) {
            return err(format!("{at_n}: N = {n} must exceed the coupling range R = {range}"));
        }
    }
    if task == Task::Parity && cfg.model != "dbkc-pure-ss" {
        return err(format!("{at_model}: parity needs the normal modes of model dbkc-pure-ss, got '{}'", cfg.model));
    }
    if task == Task::PhaseDiagram && !cfg.grid.contains_key("x") {
        return err(format!("{}: phase-diagram needs --grid x=PARAM:lo:hi:n", origin.locate("--grid", "grid")));
    }

    let resolved = Resolved { config: cfg, model, bc };
    resolved.check_grid(origin)?;
    Ok(resolved)
}

impl Resolved {
    pub fn grid(&self, key: &str) -> Option<&str> {
        self.config.grid.get(key).map(String::as_str)
    }

    fn at(&self, origin: &Origin, key: &str) -> String {
        origin.locate("--grid", key)
    }

    /// Parses every grid value once so that malformed values fail before
    /// any work starts.
    fn check_grid(&self, origin: &Origin) -> Result<(), ConfigError> {
        for (k, v) in &self.config.grid {
            let at = self.at(origin, k);
            match k.as_str() {
                "nk" | "nx" | "ny" | "samples" => {
                    if parse_usize(&at, k, v)? == 0 {
                        return err(format!("{at}: '{k}' must be positive"));
                    }
                }
                "mode" => {
                    parse_usize(&at, k, v)?;
                }
                "frac" => {
                    let f = parse_f64(&at, k, v)?;
                    if !(f > 0.0 && f < 1.0) {
                        return err(format!("{at}: 'frac' must lie in (0, 1), got {f}"));
                    }
                }
                "theta" => {
                    parse_f64(&at, k, v)?;
                }
                "norm" => {
                    if !matches!(v.as_str(), "symmetric" | "unit-zm") {
                        return err(format!("{at}: 'norm' must be symmetric or unit-zm, got '{v}'"));
                    }
                }
                "kind" => {
                    if !matches!(v.as_str(), "qu" | "ss") {
                        return err(format!("{at}: 'kind' must be qu or ss, got '{v}'"));
                    }
                }
                "tau" | "omega" | "t" => {
                    parse_linspace(&at, k, v)?;
                }
                "phi" => {
                    parse_values(&at, k, v)?;
                }
                "re" | "im" => {
                    let parts: Vec<&str> = v.split(':').collect();
                    if parts.len() != 2 {
                        return err(format!("{at}: '{k}' expects lo:hi, got '{v}'"));
                    }
                    let lo = parse_f64(&at, k, parts[0])?;
                    let hi = parse_f64(&at, k, parts[1])?;
                    if !(lo < hi) {
                        return err(format!("{at}: '{k}' needs lo < hi, got '{v}'"));
                    }
                }
                "x" | "y" => {
                    self.axis(origin, k)?;
                }
                _ => unreachable!("keys validated"),
            }
        }
        if self.config.grid.contains_key("re") != self.config.grid.contains_key("im") {
            return err(format!("{}: 're' and 'im' must be given together", self.at(origin, "re")));
        }
        if let (Some(x), Some(y)) = (self.grid("x"), self.grid("y")) {
            if x.split(':').next() == y.split(':').next() {
                return err(format!("{}: x and y sweep the same parameter", self.at(origin, "y")));
            }
        }
        Ok(())
    }

    /// Sweep axis `PARAM:lo:hi:n`.
    pub fn axis(&self, origin: &Origin, key: &str) -> Result<Axis, ConfigError> {
        let at = self.at(origin, key);
        let v = self.grid(key).ok_or_else(|| ConfigError(format!("{at}: missing '{key}'")))?;
        let Some((param, rest)) = v.split_once(':') else {
            return err(format!("{at}: '{key}' expects PARAM:lo:hi:n, got '{v}'"));
        };
        let known = preset_params(&self.config.model).expect("bulk preset");
        if !known.iter().any(|(n, _)| *n == param) {
            let names: Vec<&str> = known.iter().map(|p| p.0).collect();
            return err(format!("{at}: cannot sweep '{param}' of model {} (expected {})", self.config.model, names.join(", ")));
        }
        Ok(Axis { param: param.to_string(), values: parse_linspace(&at, key, rest)? })
    }

    pub fn usize_opt(&self, key: &str) -> usize {
        self.grid(key).and_then(|v| v.parse().ok()).expect("validated grid value")
    }

    pub fn f64_opt(&self, key: &str) -> f64 {
        self.grid(key).and_then(|v| v.parse().ok()).expect("validated grid value")
    }

    pub fn list_opt(&self, key: &str) -> Option<Vec<f64>> {
        self.grid(key).map(|v| parse_values("--grid", key, v).expect("validated grid value"))
    }

    pub fn range_opt(&self, key: &str) -> Option<(f64, f64)> {
        self.grid(key).map(|v| {
            let (a, b) = v.split_once(':').expect("validated grid value");
            (a.parse().expect("validated"), b.parse().expect("validated"))
        })
    }
}
