//! Flat `key = value` scenario configuration and sweep expansion.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cic::check_threshold;
use crate::generate::GeneratorKind;
use crate::multipath::MulticastMode;
use crate::time::SimTime;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("key '{0}' given twice")]
    Duplicate(String),
    #[error("unknown key '{0}'")]
    UnknownKey(String),
    #[error("invalid value for '{key}': {message}")]
    Invalid { key: String, message: String },
    #[error("{0}")]
    Missing(String),
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        message: message.into(),
    }
}

/// Ordered key/value pairs with unique keys.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConfigMap {
    entries: Vec<(String, String)>,
}

impl ConfigMap {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Inserts or replaces.
    pub fn set(&mut self, key: &str, value: &str) {
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value.to_string(),
            None => self.entries.push((key.to_string(), value.to_string())),
        }
    }

    pub fn remove(&mut self, key: &str) -> Option<String> {
        let i = self.entries.iter().position(|(k, _)| k == key)?;
        Some(self.entries.remove(i).1)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _)| k.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn render(&self) -> String {
        self.entries
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

/// A base config plus sweep axes (`sweep.<key> = v1,v2,...`).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExperimentSpec {
    pub base: ConfigMap,
    pub axes: Vec<(String, Vec<String>)>,
    /// Directory relative paths are resolved against.
    pub base_dir: PathBuf,
}

/// Keys that steer the experiment rather than a single scenario.
pub const EXPERIMENT_KEYS: [&str; 2] = ["out", "jobs"];

impl ExperimentSpec {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut spec = ExperimentSpec {
            base_dir: base_dir.to_path_buf(),
            ..Default::default()
        };
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let syntax = |message: &str| ConfigError::Syntax {
                line: idx + 1,
                message: message.to_string(),
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| syntax("expected 'key = value'"))?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(syntax("invalid key"));
            }
            if let Some(axis) = key.strip_prefix("sweep.") {
                if spec.axes.iter().any(|(k, _)| k == axis) {
                    return Err(ConfigError::Duplicate(key.to_string()));
                }
                let values: Vec<String> = value
                    .split(',')
                    .map(|v| v.trim().to_string())
                    .filter(|v| !v.is_empty())
                    .collect();
                if values.is_empty() {
                    return Err(syntax("sweep axis needs at least one value"));
                }
                spec.axes.push((axis.to_string(), values));
            } else {
                if spec.base.get(key).is_some() {
                    return Err(ConfigError::Duplicate(key.to_string()));
                }
                spec.base.set(key, value);
            }
        }
        Ok(spec)
    }

    /// Pins `key` to `value`, dropping any sweep over it. A `sweep.<key>`
    /// name replaces that axis instead.
    pub fn set(&mut self, key: &str, value: &str) {
        if let Some(axis) = key.strip_prefix("sweep.") {
            let values = value.split(',').map(|v| v.trim().to_string()).collect();
            self.base.remove(axis);
            match self.axes.iter_mut().find(|(k, _)| k == axis) {
                Some(slot) => slot.1 = values,
                None => self.axes.push((axis.to_string(), values)),
            }
            return;
        }
        self.axes.retain(|(k, _)| k != key);
        self.base.set(key, value);
    }

    /// Cross product of the axes, first axis outermost.
    pub fn expand(&self) -> Vec<ConfigMap> {
        let mut out = vec![self.base.clone()];
        for (key, values) in &self.axes {
            out = out
                .into_iter()
                .flat_map(|m| {
                    values.iter().map(move |v| {
                        let mut m = m.clone();
                        m.set(key, v);
                        m
                    })
                })
                .collect();
        }
        out
    }

    pub fn scenarios(&self) -> Result<Vec<ScenarioConfig>, ConfigError> {
        self.expand()
            .iter()
            .map(|m| ScenarioConfig::from_map(m, &self.base_dir))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Contact,
    Multipath,
    Energy,
}

impl ScenarioKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::Contact => "contact",
            ScenarioKind::Multipath => "multipath",
            ScenarioKind::Energy => "energy",
        }
    }

    pub fn default_policy(self) -> Policy {
        match self {
            ScenarioKind::Contact => Policy::Esp,
            ScenarioKind::Multipath => Policy::Multipath,
            ScenarioKind::Energy => Policy::PowerAware,
        }
    }

    fn default_horizon_s(self) -> i64 {
        match self {
            ScenarioKind::Contact => 3000,
            ScenarioKind::Multipath => 60,
            ScenarioKind::Energy => 2000,
        }
    }

    fn default_rate(self) -> f64 {
        match self {
            ScenarioKind::Multipath => 10.0,
            _ => 1.0,
        }
    }
}

impl FromStr for ScenarioKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "contact" => Ok(ScenarioKind::Contact),
            "multipath" => Ok(ScenarioKind::Multipath),
            "energy" => Ok(ScenarioKind::Energy),
            _ => Err(format!("unknown scenario '{s}'")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Esp,
    DhrCic,
    Epidemic,
    Gossip,
    Direct,
    Multipath,
    MinHop,
    PowerAware,
}

impl Policy {
    pub const ALL: [Policy; 8] = [
        Policy::Esp,
        Policy::DhrCic,
        Policy::Epidemic,
        Policy::Gossip,
        Policy::Direct,
        Policy::Multipath,
        Policy::MinHop,
        Policy::PowerAware,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Policy::Esp => "esp",
            Policy::DhrCic => "dhr_cic",
            Policy::Epidemic => "epidemic",
            Policy::Gossip => "gossip",
            Policy::Direct => "direct",
            Policy::Multipath => "multipath",
            Policy::MinHop => "min_hop",
            Policy::PowerAware => "power_aware",
        }
    }

    pub fn fits(self, kind: ScenarioKind) -> bool {
        use Policy::*;
        match kind {
            ScenarioKind::Contact => matches!(self, Esp | DhrCic | Epidemic | Gossip | Direct),
            ScenarioKind::Multipath => matches!(self, Multipath | Epidemic | Gossip),
            ScenarioKind::Energy => matches!(self, MinHop | PowerAware),
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Policy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Policy::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown policy '{s}'"))
    }
}

/// Where a scenario's network comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    Generator { kind: GeneratorKind, n: usize },
    Plan(PathBuf),
    Topology(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    pub source: Source,
    pub moves: Option<PathBuf>,
    pub energy: Option<PathBuf>,
    pub policy: Policy,
    pub mode: MulticastMode,
    pub gossip_p: f64,
    pub threshold: f64,
    pub window: SimTime,
    pub branching: usize,
    pub budget: Option<usize>,
    pub k_paths: usize,
    pub measurement_period: SimTime,
    pub rate_update_period: SimTime,
    pub beta: f64,
    /// Packets per second (per source in energy scenarios).
    pub rate: f64,
    pub rate_min: f64,
    pub seed: u64,
    pub horizon: SimTime,
    pub bundles: usize,
    pub bundle_size: u64,
    pub ttl: SimTime,
    pub gen_window: SimTime,
    pub source_node: u32,
    pub destinations: Vec<u32>,
    pub sources: Vec<u32>,
    pub sink: Option<u32>,
    pub hop_delay: SimTime,
    pub route_expiry: SimTime,
    pub energy_default: f64,
    pub trace: bool,
}

pub const SCENARIO_KEYS: [&str; 34] = [
    "scenario",
    "generator",
    "n",
    "plan",
    "topology",
    "moves",
    "energy",
    "policy",
    "mode",
    "gossip_p",
    "threshold",
    "window",
    "branching",
    "budget",
    "k_paths",
    "measurement_period",
    "rate_update_period",
    "beta",
    "rate",
    "rate_min",
    "seed",
    "horizon",
    "bundles",
    "bundle_size",
    "ttl",
    "gen_window",
    "source",
    "destinations",
    "sources",
    "sink",
    "hop_delay",
    "route_expiry",
    "energy_default",
    "trace",
];

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse::<T>()
        .map_err(|_| invalid(key, format!("cannot parse '{v}'")))
}

fn parse_secs(key: &str, v: &str) -> Result<SimTime, ConfigError> {
    SimTime::parse_secs(v).map_err(|m| invalid(key, m))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<u32>, ConfigError> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn parse_bool(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(invalid(key, format!("expected true or false, got '{v}'"))),
    }
}

impl ScenarioConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let spec = ExperimentSpec::parse(text, base_dir)?;
        if !spec.axes.is_empty() {
            return Err(ConfigError::Missing(
                "sweep axes need an experiment, not a single scenario".into(),
            ));
        }
        ScenarioConfig::from_map(&spec.base, base_dir)
    }

    pub fn from_map(map: &ConfigMap, base_dir: &Path) -> Result<Self, ConfigError> {
        for key in map.keys() {
            if !SCENARIO_KEYS.contains(&key) && !EXPERIMENT_KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey(key.to_string()));
            }
        }
        let path = |key: &str| map.get(key).map(|v| base_dir.join(v));
        let generator = map
            .get("generator")
            .map(|v| {
                v.parse::<GeneratorKind>()
                    .map_err(|m| invalid("generator", m))
            })
            .transpose()?;
        let n = map.get("n").map(|v| parse::<usize>("n", v)).transpose()?;
        let source = match (generator, path("plan"), path("topology")) {
            (Some(kind), None, None) => Source::Generator {
                kind,
                n: n.unwrap_or(kind.default_n()),
            },
            (None, Some(p), None) => Source::Plan(p),
            (None, None, Some(p)) => Source::Topology(p),
            (None, None, None) => {
                return Err(ConfigError::Missing(
                    "one of 'generator', 'plan' or 'topology' is required".into(),
                ))
            }
            _ => {
                return Err(ConfigError::Missing(
                    "'generator', 'plan' and 'topology' are mutually exclusive".into(),
                ))
            }
        };
        // generator defaults sit beneath explicit keys
        let mut merged = ConfigMap::default();
        if let Source::Generator { kind, n } = &source {
            for (k, v) in kind.defaults(*n) {
                merged.set(&k, &v);
            }
        }
        for (k, v) in map.iter() {
            merged.set(k, v);
        }
        let get = |key: &str| merged.get(key);

        let scenario = match get("scenario") {
            Some(v) => v.parse().map_err(|m| invalid("scenario", m))?,
            None => match source {
                Source::Plan(_) => ScenarioKind::Contact,
                _ => return Err(ConfigError::Missing("'scenario' is required".into())),
            },
        };
        match (&source, scenario) {
            (Source::Plan(_), ScenarioKind::Contact)
            | (Source::Topology(_), ScenarioKind::Multipath | ScenarioKind::Energy)
            | (Source::Generator { .. }, _) => {}
            _ => {
                return Err(invalid(
                    "scenario",
                    "contact scenarios read a 'plan', others a 'topology'",
                ))
            }
        }
        let policy = match get("policy") {
            Some(v) => v.parse().map_err(|m| invalid("policy", m))?,
            None => scenario.default_policy(),
        };
        if !policy.fits(scenario) {
            return Err(invalid(
                "policy",
                format!(
                    "'{policy}' does not apply to {} scenarios",
                    scenario.as_str()
                ),
            ));
        }

        let secs_or = |key: &str, default: i64| -> Result<SimTime, ConfigError> {
            get(key).map_or(Ok(SimTime::from_secs(default)), |v| parse_secs(key, v))
        };
        let f64_or = |key: &str, default: f64| -> Result<f64, ConfigError> {
            get(key).map_or(Ok(default), |v| parse(key, v))
        };
        let measurement_period = secs_or("measurement_period", 1)?;
        let rate_update_period = match get("rate_update_period") {
            Some(v) => parse_secs("rate_update_period", v)?,
            None => SimTime(measurement_period.0 * 2),
        };
        let cfg = ScenarioConfig {
            scenario,
            source,
            moves: path("moves"),
            energy: path("energy"),
            policy,
            mode: get("mode")
                .map(|v| v.parse().map_err(|m| invalid("mode", m)))
                .transpose()?
                .unwrap_or_default(),
            gossip_p: f64_or("gossip_p", 0.6)?,
            threshold: f64_or("threshold", 0.7)?,
            window: secs_or("window", 3600)?,
            branching: get("branching").map_or(Ok(3), |v| parse("branching", v))?,
            budget: get("budget").map(|v| parse("budget", v)).transpose()?,
            k_paths: get("k_paths").map_or(Ok(2), |v| parse("k_paths", v))?,
            measurement_period,
            rate_update_period,
            beta: f64_or("beta", 0.5)?,
            rate: f64_or("rate", scenario.default_rate())?,
            rate_min: f64_or("rate_min", 1.0)?,
            seed: get("seed").map_or(Ok(1), |v| parse("seed", v))?,
            horizon: secs_or("horizon", scenario.default_horizon_s())?,
            bundles: get("bundles").map_or(Ok(50), |v| parse("bundles", v))?,
            bundle_size: get("bundle_size").map_or(Ok(1000), |v| parse("bundle_size", v))?,
            ttl: secs_or("ttl", 2000)?,
            gen_window: secs_or("gen_window", 500)?,
            source_node: get("source").map_or(Ok(0), |v| parse("source", v))?,
            destinations: get("destinations")
                .map_or(Ok(Vec::new()), |v| parse_list("destinations", v))?,
            sources: get("sources").map_or(Ok(Vec::new()), |v| parse_list("sources", v))?,
            sink: get("sink").map(|v| parse("sink", v)).transpose()?,
            hop_delay: get("hop_delay").map_or(Ok(SimTime(10)), |v| parse_secs("hop_delay", v))?,
            route_expiry: secs_or("route_expiry", 30)?,
            energy_default: f64_or("energy_default", 10.0)?,
            trace: get("trace").map_or(Ok(false), |v| parse_bool("trace", v))?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.measurement_period <= SimTime::ZERO {
            return Err(invalid("measurement_period", "must be positive"));
        }
        if self.rate_update_period <= SimTime::ZERO {
            return Err(invalid("rate_update_period", "must be positive"));
        }
        check_threshold(self.threshold).map_err(|e| invalid("threshold", e.to_string()))?;
        if !(0.0..=1.0).contains(&self.gossip_p) {
            return Err(invalid("gossip_p", "must lie in [0, 1]"));
        }
        if self.branching < 2 {
            return Err(invalid("branching", "must be at least 2"));
        }
        if self.k_paths == 0 {
            return Err(invalid("k_paths", "must be at least 1"));
        }
        if self.window <= SimTime::ZERO {
            return Err(invalid("window", "must be positive"));
        }
        if self.horizon <= SimTime::ZERO {
            return Err(invalid("horizon", "must be positive"));
        }
        if self.ttl <= SimTime::ZERO {
            return Err(invalid("ttl", "must be positive"));
        }
        if self.bundle_size == 0 {
            return Err(invalid("bundle_size", "must be positive"));
        }
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return Err(invalid("rate", "must be positive"));
        }
        if !(self.rate_min > 0.0 && self.rate_min <= self.rate) {
            return Err(invalid("rate_min", "must be positive and at most 'rate'"));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(invalid("beta", "must be non-negative"));
        }
        if self.hop_delay <= SimTime::ZERO {
            return Err(invalid("hop_delay", "must be positive"));
        }
        if !(self.energy_default >= 0.0 && self.energy_default.is_finite()) {
            return Err(invalid("energy_default", "must be non-negative"));
        }
        Ok(())
    }

    pub fn node_count_hint(&self) -> Option<usize> {
        match self.source {
            Source::Generator { n, .. } => Some(n),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> Result<ScenarioConfig, ConfigError> {
        ScenarioConfig::parse(text, Path::new("/base"))
    }

    #[test]
    fn defaults_and_generator_keys() {
        let c = cfg("generator = grid-plan\nn = 9").unwrap();
        assert_eq!(c.scenario, ScenarioKind::Contact);
        assert_eq!(c.policy, Policy::Esp);
        assert_eq!(c.measurement_period, SimTime::from_secs(1));
        assert_eq!(c.rate_update_period, SimTime::from_secs(2));
        assert_eq!(c.hop_delay, SimTime(10));
        let m = cfg("generator = random-topology\npolicy = gossip").unwrap();
        assert_eq!(m.scenario, ScenarioKind::Multipath);
        assert_eq!(m.destinations, vec![27, 28, 29]);
        assert_eq!(m.horizon, SimTime::from_secs(60));
        let e = cfg("generator = dumbbell-energy\nhorizon = 50").unwrap();
        assert_eq!(e.sources, vec![0, 1, 2, 3]);
        assert_eq!(e.sink, Some(8));
        assert_eq!(e.horizon, SimTime::from_secs(50));
    }

    #[test]
    fn period_pairing() {
        let c = cfg("generator = grid-plan\nmeasurement_period = 0.5").unwrap();
        assert_eq!(c.rate_update_period, SimTime(1000));
        assert!(cfg("generator = grid-plan\nmeasurement_period = 0").is_err());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            cfg("generator = grid-plan\nfoo = 1"),
            Err(ConfigError::UnknownKey(_))
        ));
        assert!(matches!(
            cfg("seed = 1\nseed = 2"),
            Err(ConfigError::Duplicate(_))
        ));
        assert!(matches!(
            cfg("generator = grid-plan\nthreshold = 0.9"),
            Err(ConfigError::Invalid { .. })
        ));
        assert!(matches!(
            cfg("generator = grid-plan\npolicy = power_aware"),
            Err(ConfigError::Invalid { .. })
        ));
        assert!(matches!(
            cfg("generator = mesh"),
            Err(ConfigError::Invalid { .. })
        ));
        assert!(matches!(cfg("policy = esp"), Err(ConfigError::Missing(_))));
        assert!(matches!(
            cfg("plan = a\ntopology = b"),
            Err(ConfigError::Missing(_))
        ));
        assert!(matches!(
            cfg("just text"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        assert!(cfg("plan = p.txt\nscenario = energy").is_err());
    }

    #[test]
    fn paths_resolve_against_base() {
        let c = cfg("plan = plans/a.txt").unwrap();
        assert_eq!(c.source, Source::Plan(PathBuf::from("/base/plans/a.txt")));
    }

    #[test]
    fn sweep_cross_product() {
        let spec = ExperimentSpec::parse(
            "generator = grid-plan\nsweep.n = 9,27,81\nsweep.policy = esp, dhr_cic\n",
            Path::new("."),
        )
        .unwrap();
        let runs = spec.scenarios().unwrap();
        let labels: Vec<_> = runs
            .iter()
            .map(|c| (c.node_count_hint().unwrap(), c.policy.as_str()))
            .collect();
        assert_eq!(
            labels,
            vec![
                (9, "esp"),
                (9, "dhr_cic"),
                (27, "esp"),
                (27, "dhr_cic"),
                (81, "esp"),
                (81, "dhr_cic")
            ]
        );
        let mut pinned = spec.clone();
        pinned.set("n", "9");
        assert_eq!(pinned.expand().len(), 2);
        assert!(
            ScenarioConfig::parse("generator = grid-plan\nsweep.n = 9", Path::new(".")).is_err()
        );
    }
}
