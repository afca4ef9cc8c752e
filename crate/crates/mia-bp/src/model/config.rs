//! TOML config ingestion.
//!
//! The on-disk schema is deliberately flat (see the repository's `configs/`
//! directory for complete examples):
//!
//! ```toml
//! nodes = 4
//! patterns = "all-subsets"            # or a list of node-index lists
//! [[links]]
//! a = 1
//! b = 2
//! rate = "1/9"                        # "p/q", decimal string, or bare number
//! [[commodities]]
//! dest = 4
//! [[arrivals]]
//! node = 1
//! dest = 4
//! rate = 0.52
//! [policy]
//! kind = "vq"
//! [sim]
//! horizon = 200000
//! seed = 1
//! ```
//!
//! Rates become exact rationals. Bare TOML floats go through their shortest
//! round-trip decimal form first (`0.52` means the decimal 52/100, not the
//! nearest binary double), so configs mean what they say.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use num::{One, Signed};
use serde::Deserialize;
use thiserror::Error;

use crate::rational::{parse_rat, ParseRatError, Rat};

use super::{
    normalize_rates, unit_fraction_floor, ArrivalDist, ArrivalSpec, ArrivalStream, ModelError,
    NetworkConfig, PatternSet, Patterns, PolicyKind, PolicyParams, SimParams, Topology, Violation,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("{path}: {field}: {source}")]
    Number {
        path: PathBuf,
        field: String,
        #[source]
        source: ParseRatError,
    },
    #[error("{path}: {field}: {message}")]
    BadValue {
        path: PathBuf,
        field: String,
        message: String,
    },
    #[error("{path}: {source}")]
    Model {
        path: PathBuf,
        #[source]
        source: ModelError,
    },
    #[error("{path}: invalid configuration:{}", render_violations(violations))]
    Invalid {
        path: PathBuf,
        violations: Vec<Violation>,
    },
}

fn render_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| format!("\n  - {v}"))
        .collect::<String>()
}

/// A rate value as it may appear in TOML: integer, float, or string.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawNumber {
    Int(i64),
    Float(f64),
    Str(String),
}

impl RawNumber {
    fn to_rat(&self) -> Result<Rat, ParseRatError> {
        match self {
            RawNumber::Int(i) => Ok(Rat::from_integer((*i).into())),
            // Rust prints the shortest decimal that round-trips, which is
            // the literal the config author most plausibly wrote.
            RawNumber::Float(f) => parse_rat(&format!("{f}")),
            RawNumber::Str(s) => parse_rat(s),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    nodes: u32,
    #[serde(default)]
    interference_free: bool,
    links: Vec<RawLink>,
    patterns: Option<RawPatterns>,
    #[serde(default)]
    pattern_rates: Vec<RawOverride>,
    commodities: Vec<RawCommodity>,
    #[serde(default)]
    arrivals: Vec<RawArrival>,
    policy: RawPolicy,
    sim: RawSim,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLink {
    a: u32,
    b: u32,
    rate: RawNumber,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawPatterns {
    Keyword(String),
    Lists(Vec<Vec<u32>>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOverride {
    pattern_index: usize,
    a: u32,
    b: u32,
    rate: RawNumber,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCommodity {
    dest: u32,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArrival {
    node: u32,
    dest: u32,
    rate: RawNumber,
    #[serde(default = "default_dist")]
    dist: String,
    #[serde(default = "default_a_max")]
    a_max: u32,
}

fn default_dist() -> String {
    "bernoulli".into()
}

fn default_a_max() -> u32 {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPolicy {
    kind: String,
    #[serde(rename = "T", default = "default_epoch")]
    t: u32,
    eta: Option<RawNumber>,
    gamma: Option<RawNumber>,
}

fn default_epoch() -> u32 {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSim {
    horizon: u64,
    seed: u64,
}

/// Reads, parses, normalizes, and validates a config file.
pub fn load_config(path: impl AsRef<Path>) -> Result<NetworkConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.into(),
        source,
    })?;
    let raw: RawConfig = toml::from_str(&text).map_err(|source| ConfigError::Parse {
        path: path.into(),
        source,
    })?;
    let p = path.to_path_buf();

    let number = |field: String, n: &RawNumber| {
        n.to_rat().map_err(|source| ConfigError::Number {
            path: p.clone(),
            field,
            source,
        })
    };
    let bad = |field: &str, message: String| ConfigError::BadValue {
        path: p.clone(),
        field: field.into(),
        message,
    };

    let mut links = BTreeMap::new();
    for (idx, l) in raw.links.iter().enumerate() {
        let r = number(format!("links[{idx}].rate"), &l.rate)?;
        let dup = links.insert((l.a, l.b), r.clone()).is_some()
            | links.insert((l.b, l.a), r).is_some();
        if dup {
            return Err(bad(
                &format!("links[{idx}]"),
                format!("duplicate link ({}, {})", l.a, l.b),
            ));
        }
    }

    let patterns = match (&raw.patterns, raw.interference_free) {
        (Some(RawPatterns::Keyword(k)), _) if k == "all-subsets" => Patterns::AllSubsets,
        (Some(RawPatterns::Keyword(k)), _) => {
            return Err(bad(
                "patterns",
                format!("unknown keyword {k:?}; expected \"all-subsets\" or a list of node lists"),
            ))
        }
        (Some(RawPatterns::Lists(lists)), _) => Patterns::Explicit(
            lists
                .iter()
                .map(|s| s.iter().copied().collect::<BTreeSet<u32>>())
                .collect(),
        ),
        (None, true) => Patterns::AllSubsets,
        (None, false) => {
            return Err(bad(
                "patterns",
                "missing; provide a pattern list or set interference_free = true".into(),
            ))
        }
    };

    let mut overrides = BTreeMap::new();
    for (idx, o) in raw.pattern_rates.iter().enumerate() {
        let field = format!("pattern_rates[{idx}].rate");
        let r = number(field.clone(), &o.rate)?;
        if !r.is_positive() || r > Rat::one() {
            return Err(bad(&field, format!("rate {r} outside (0, 1]")));
        }
        let r = unit_fraction_floor(&r);
        overrides.insert((o.pattern_index, (o.a, o.b)), r.clone());
        overrides.insert((o.pattern_index, (o.b, o.a)), r);
    }

    let commodities: BTreeSet<u32> = raw.commodities.iter().map(|c| c.dest).collect();

    let mut streams = Vec::new();
    for (idx, a) in raw.arrivals.iter().enumerate() {
        let dist = match a.dist.as_str() {
            "bernoulli" => ArrivalDist::Bernoulli,
            "batch" => ArrivalDist::Batch,
            other => {
                return Err(bad(
                    &format!("arrivals[{idx}].dist"),
                    format!("unknown distribution {other:?}; expected \"bernoulli\" or \"batch\""),
                ))
            }
        };
        streams.push(ArrivalStream {
            node: a.node,
            commodity: a.dest,
            rate: number(format!("arrivals[{idx}].rate"), &a.rate)?,
            dist,
            a_max: a.a_max,
        });
    }

    let kind = match raw.policy.kind.as_str() {
        "tslot" => PolicyKind::TSlot,
        "vq" => PolicyKind::Vq,
        "vq-enhanced" => PolicyKind::VqEnhanced,
        "randomized" => PolicyKind::Randomized,
        other => {
            return Err(bad(
                "policy.kind",
                format!(
                    "unknown policy {other:?}; expected tslot, vq, vq-enhanced, or randomized"
                ),
            ))
        }
    };
    let eta = match &raw.policy.eta {
        Some(n) => number("policy.eta".into(), n)?,
        None => Rat::one(),
    };
    let gamma = match &raw.policy.gamma {
        Some(n) => number("policy.gamma".into(), n)?,
        None => crate::rational::rat(1, 2),
    };

    let topology = Topology {
        n_nodes: raw.nodes,
        links,
        commodities,
    };
    let topology = normalize_rates(&topology).map_err(|source| ConfigError::Model {
        path: p.clone(),
        source,
    })?;

    let config = NetworkConfig {
        topology,
        patterns: PatternSet { patterns, overrides },
        arrivals: ArrivalSpec { streams },
        policy: PolicyParams {
            kind,
            t: raw.policy.t,
            eta,
            gamma,
        },
        sim: SimParams {
            horizon: raw.sim.horizon,
            seed: raw.sim.seed,
        },
    };

    let violations = super::validate(&config);
    if !violations.is_empty() {
        return Err(ConfigError::Invalid {
            path: p,
            violations,
        });
    }
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use std::io::Write;

    fn load_str(text: &str) -> Result<NetworkConfig, ConfigError> {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        load_config(f.path())
    }

    const MINIMAL_TAIL: &str = r#"
        [policy]
        kind = "vq"
        [sim]
        horizon = 1000
        seed = 1
    "#;

    #[test]
    fn four_node_reference_parses() {
        let path = concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../../configs/four_node.toml"
        );
        let cfg = load_config(path).unwrap();
        assert_eq!(cfg.topology.n_nodes, 4);
        assert_eq!(cfg.topology.rate(1, 2), Some(&rat(1, 1)));
        assert_eq!(cfg.topology.rate(2, 4), Some(&rat(1, 1)));
        assert_eq!(cfg.topology.rate(2, 3), Some(&rat(1, 1)));
        assert_eq!(cfg.topology.rate(3, 4), Some(&rat(1, 1)));
        assert_eq!(cfg.topology.rate(1, 4), Some(&rat(1, 9)));
        assert_eq!(cfg.topology.rate(4, 1), Some(&rat(1, 9)));
        assert_eq!(cfg.topology.commodities, [4].into());
        assert!(cfg.patterns.is_all_subsets());
        assert_eq!(cfg.arrivals.streams.len(), 2);
    }

    #[test]
    fn ten_node_reference_parses() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/ten_node.toml");
        let cfg = load_config(path).unwrap();
        assert_eq!(cfg.topology.n_nodes, 10);
        assert_eq!(cfg.topology.commodities.len(), 2);
    }

    #[test]
    fn weak_rate_normalizes_on_load() {
        let cfg = load_str(&format!(
            r#"
            nodes = 2
            interference_free = true
            [[links]]
            a = 1
            b = 2
            rate = "2/3"
            [[commodities]]
            dest = 2
            {MINIMAL_TAIL}
            "#
        ))
        .unwrap();
        assert_eq!(cfg.topology.rate(1, 2), Some(&rat(1, 2)));
    }

    #[test]
    fn bare_float_rates_are_exact_decimals() {
        let cfg = load_str(&format!(
            r#"
            nodes = 2
            interference_free = true
            [[links]]
            a = 1
            b = 2
            rate = 1
            [[commodities]]
            dest = 2
            [[arrivals]]
            node = 1
            dest = 2
            rate = 0.52
            {MINIMAL_TAIL}
            "#
        ))
        .unwrap();
        assert_eq!(cfg.arrivals.streams[0].rate, rat(13, 25));
    }

    #[test]
    fn missing_patterns_without_flag_is_an_error() {
        let err = load_str(&format!(
            r#"
            nodes = 2
            [[links]]
            a = 1
            b = 2
            rate = 1
            [[commodities]]
            dest = 2
            {MINIMAL_TAIL}
            "#
        ))
        .unwrap_err();
        assert!(err.to_string().contains("patterns"));
    }

    #[test]
    fn explicit_pattern_lists_parse() {
        let cfg = load_str(&format!(
            r#"
            nodes = 2
            patterns = [[], [1], [2], [1, 2]]
            [[links]]
            a = 1
            b = 2
            rate = 1
            [[commodities]]
            dest = 2
            {MINIMAL_TAIL}
            "#
        ))
        .unwrap();
        match &cfg.patterns.patterns {
            Patterns::Explicit(list) => assert_eq!(list.len(), 4),
            other => panic!("expected explicit patterns, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_links_are_rejected() {
        let err = load_str(&format!(
            r#"
            nodes = 2
            interference_free = true
            [[links]]
            a = 1
            b = 2
            rate = 1
            [[links]]
            a = 2
            b = 1
            rate = 1
            [[commodities]]
            dest = 2
            {MINIMAL_TAIL}
            "#
        ))
        .unwrap_err();
        assert!(err.to_string().contains("duplicate link"));
    }

    #[test]
    fn validation_failures_are_listed() {
        let err = load_str(
            r#"
            nodes = 2
            interference_free = true
            [[links]]
            a = 1
            b = 2
            rate = 1
            [[commodities]]
            dest = 2
            [policy]
            kind = "vq"
            eta = "1/2"
            [sim]
            horizon = 10
            seed = 1
            "#,
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("invalid configuration"), "{msg}");
        assert!(msg.contains("eta"), "{msg}");
    }

    #[test]
    fn unknown_policy_kind_is_an_error() {
        let err = load_str(
            r#"
            nodes = 2
            interference_free = true
            [[links]]
            a = 1
            b = 2
            rate = 1
            [[commodities]]
            dest = 2
            [policy]
            kind = "lifo"
            [sim]
            horizon = 10
            seed = 1
            "#,
        )
        .unwrap_err();
        assert!(matches!(err, ConfigError::BadValue { .. }));
    }

    #[test]
    fn syntax_errors_carry_the_path() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(b"nodes = [unclosed").unwrap();
        let err = load_config(f.path()).unwrap_err();
        assert!(err.to_string().contains(&f.path().display().to_string()));
    }
}
