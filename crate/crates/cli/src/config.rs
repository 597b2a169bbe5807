//! Run configuration: a flat `key = value` file with `#` comments.
//!
//! Values resolve in three layers, later ones winning: built-in defaults,
//! the config file, then command-line overrides. `seed` has no default.
//!
//! | key                   | default    | meaning                                        |
//! |-----------------------|------------|------------------------------------------------|
//! | `splitting_s`         | 0          | fine-structure splitting, µeV                  |
//! | `exciton_dwell`       | 1          | exciton dwell time, ns                         |
//! | `background_fraction` | 0          | unpolarised share of zero-delay coincidences   |
//! | `scramble_prob`       | 0          | spin-scattering probability                    |
//! | `inner_diagonal`      | unset      | HV/VH population target; sets `scramble_prob`  |
//! | `cycles`              | 1000000    | excitation cycles per setting                  |
//! | `pair_efficiency`     | 0.5        | per-photon detection probability               |
//! | `seed`                | required   | master RNG seed                                |
//! | `max_delay`           | 10         | histogram half-width in cycles                 |
//! | `event_format`        | binary     | `csv` or `binary`                              |
//! | `bootstrap_resamples` | 200        | tomography bootstrap resamples (0 disables)    |
//! | `bootstrap_depth`     | observed   | coincidences per setting used for error bars   |
//! | `hwp_points`          | 91         | plate angles in the HWP scan over [0, π/2]     |

use std::collections::BTreeMap;

use biexciton_core::cascade::{scramble_for_inner_diagonal, DotParams};
use biexciton_core::eventio::EventFormat;
use biexciton_core::tomography::MIN_RESAMPLES;
use sha2::{Digest, Sha256};

use crate::error::CliError;

const KEYS: [&str; 13] = [
    "splitting_s",
    "exciton_dwell",
    "background_fraction",
    "scramble_prob",
    "inner_diagonal",
    "cycles",
    "pair_efficiency",
    "seed",
    "max_delay",
    "event_format",
    "bootstrap_resamples",
    "bootstrap_depth",
    "hwp_points",
];

fn defaults() -> BTreeMap<String, String> {
    [
        ("splitting_s", "0"),
        ("exciton_dwell", "1"),
        ("background_fraction", "0"),
        ("cycles", "1000000"),
        ("pair_efficiency", "0.5"),
        ("max_delay", "10"),
        ("event_format", "binary"),
        ("bootstrap_resamples", "200"),
        ("bootstrap_depth", "observed"),
        ("hwp_points", "91"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

/// Parses the file format into key/value pairs, rejecting unknown and
/// repeated keys with their line number.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::usage(format!("config line {}: expected `key = value`", i + 1))
        })?;
        let (key, value) = (key.trim(), value.trim());
        check_key(key).map_err(|e| CliError::usage(format!("config line {}: {e}", i + 1)))?;
        if out.insert(key.to_string(), value.to_string()).is_some() {
            return Err(CliError::usage(format!(
                "config line {}: `{key}` set twice",
                i + 1
            )));
        }
    }
    Ok(out)
}

fn check_key(key: &str) -> Result<(), String> {
    if KEYS.contains(&key) {
        Ok(())
    } else {
        Err(format!("unknown key `{key}`"))
    }
}

/// Splits a `KEY=VALUE` override.
pub fn parse_override(s: &str) -> Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or("expected KEY=VALUE")?;
    let k = k.trim();
    check_key(k)?;
    Ok((k.to_string(), v.trim().to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dot: DotParams,
    pub inner_diagonal: Option<f64>,
    pub cycles: u64,
    pub pair_efficiency: f64,
    /// Required by every stage that draws random numbers.
    pub seed: Option<u64>,
    pub max_delay: u32,
    pub event_format: EventFormat,
    pub bootstrap_resamples: usize,
    /// `None` keeps the observed counts.
    pub bootstrap_depth: Option<u64>,
    pub hwp_points: usize,
}

fn value<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<T, CliError> {
    let raw = map
        .get(key)
        .ok_or_else(|| CliError::usage(format!("`{key}` is required")))?;
    raw.parse()
        .map_err(|_| CliError::usage(format!("`{key}`: cannot parse {raw:?}")))
}

impl RunConfig {
    /// Resolves defaults, then `file`, then `overrides`.
    pub fn resolve(file: Option<&str>, overrides: &[(String, String)]) -> Result<Self, CliError> {
        let mut map = defaults();
        if let Some(text) = file {
            map.extend(parse_config_text(text)?);
        }
        for (k, v) in overrides {
            map.insert(k.clone(), v.clone());
        }
        Self::from_map(&map)
    }

    fn from_map(map: &BTreeMap<String, String>) -> Result<Self, CliError> {
        let background: f64 = value(map, "background_fraction")?;
        let inner_diagonal: Option<f64> = match map.get("inner_diagonal") {
            Some(_) => Some(value(map, "inner_diagonal")?),
            None => None,
        };
        let scramble_prob = match (inner_diagonal, map.contains_key("scramble_prob")) {
            (Some(_), true) => {
                return Err(CliError::usage(
                    "set either `scramble_prob` or `inner_diagonal`, not both",
                ))
            }
            (Some(target), false) => scramble_for_inner_diagonal(background, target)?,
            (None, true) => value(map, "scramble_prob")?,
            (None, false) => 0.0,
        };
        let dot = DotParams {
            splitting_s: value(map, "splitting_s")?,
            exciton_dwell: value(map, "exciton_dwell")?,
            scramble_prob,
            background_fraction: background,
        };
        dot.validate()?;
        let depth = match map.get("bootstrap_depth").map(String::as_str) {
            None | Some("observed") => None,
            Some(_) => Some(value::<u64>(map, "bootstrap_depth")?),
        };
        let cfg = RunConfig {
            dot,
            inner_diagonal,
            cycles: value(map, "cycles")?,
            pair_efficiency: value(map, "pair_efficiency")?,
            seed: match map.get("seed") {
                Some(_) => Some(value(map, "seed")?),
                None => None,
            },
            max_delay: value(map, "max_delay")?,
            event_format: value(map, "event_format")?,
            bootstrap_resamples: value(map, "bootstrap_resamples")?,
            bootstrap_depth: depth,
            hwp_points: value(map, "hwp_points")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.cycles == 0 {
            return Err(CliError::usage("`cycles` must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.pair_efficiency) {
            return Err(CliError::usage("`pair_efficiency` must lie in [0, 1]"));
        }
        if self.max_delay < 2 {
            return Err(CliError::usage("`max_delay` must be at least 2"));
        }
        if self.bootstrap_resamples != 0 && self.bootstrap_resamples < MIN_RESAMPLES {
            return Err(CliError::usage(format!(
                "`bootstrap_resamples` must be 0 or at least {MIN_RESAMPLES}"
            )));
        }
        if self.bootstrap_depth == Some(0) {
            return Err(CliError::usage(
                "`bootstrap_depth` must be positive or `observed`",
            ));
        }
        Ok(())
    }

    /// Fully resolved settings, one `key = value` per line in key order.
    /// This text is what the config hash covers.
    pub fn canonical(&self) -> String {
        let mut map = BTreeMap::new();
        let d = &self.dot;
        map.insert("splitting_s", d.splitting_s.to_string());
        map.insert("exciton_dwell", d.exciton_dwell.to_string());
        map.insert("background_fraction", d.background_fraction.to_string());
        map.insert("scramble_prob", d.scramble_prob.to_string());
        if let Some(t) = self.inner_diagonal {
            map.insert("inner_diagonal", t.to_string());
        }
        map.insert("cycles", self.cycles.to_string());
        map.insert("pair_efficiency", self.pair_efficiency.to_string());
        map.insert(
            "seed",
            self.seed.map_or("unset".to_string(), |s| s.to_string()),
        );
        map.insert("max_delay", self.max_delay.to_string());
        map.insert("event_format", self.event_format.extension().to_string());
        map.insert("bootstrap_resamples", self.bootstrap_resamples.to_string());
        map.insert(
            "bootstrap_depth",
            self.bootstrap_depth
                .map_or("observed".to_string(), |d| d.to_string()),
        );
        map.insert("hwp_points", self.hwp_points.to_string());
        map.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn require_seed(&self) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| {
            CliError::usage("`seed` is required: set it in the config file or pass --seed")
        })
    }

    pub fn hash(&self) -> String {
        hex(&Sha256::digest(self.canonical().as_bytes()))
    }

    /// Seed for one named stream: the first eight bytes, little-endian, of
    /// SHA-256 over `"<seed>:<name>"`.
    pub fn derived_seed(&self, name: &str) -> Result<u64, CliError> {
        let digest = Sha256::digest(format!("{}:{name}", self.require_seed()?).as_bytes());
        Ok(u64::from_le_bytes(
            digest[..8].try_into().expect("32-byte digest"),
        ))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ov(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn seed_has_no_default() {
        let cfg = RunConfig::resolve(None, &[]).unwrap();
        let err = cfg.require_seed().unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("seed"));
        assert!(cfg.derived_seed("H_rect").is_err());
        let cfg = RunConfig::resolve(None, &ov(&[("seed", "1")])).unwrap();
        assert_eq!(cfg.require_seed().unwrap(), 1);
    }

    #[test]
    fn precedence_cli_over_file_over_default() {
        let file = "seed = 5\ncycles = 200 # trailing comment\n";
        let cfg = RunConfig::resolve(Some(file), &ov(&[("seed", "9")])).unwrap();
        assert_eq!(cfg.seed, Some(9));
        assert_eq!(cfg.cycles, 200);
        assert_eq!(cfg.max_delay, 10);
    }

    #[test]
    fn file_errors_name_the_line() {
        let err = parse_config_text("# c\nseed = 1\nbogus = 2\n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        let err = parse_config_text("seed = 1\nseed = 2\n").unwrap_err();
        assert!(err.to_string().contains("twice"));
        assert!(parse_config_text("seed 1\n").is_err());
    }

    #[test]
    fn inner_diagonal_calibrates_scramble() {
        let file = "seed = 1\nbackground_fraction = 0.14\ninner_diagonal = 0.085\n";
        let cfg = RunConfig::resolve(Some(file), &[]).unwrap();
        assert!((cfg.dot.scramble_prob - 0.1 / 0.86).abs() < 1e-12);
        let both = format!("{file}scramble_prob = 0.1\n");
        assert!(RunConfig::resolve(Some(&both), &[]).is_err());
    }

    #[test]
    fn hash_ignores_layout_but_not_values() {
        let a = RunConfig::resolve(Some("seed = 1\ncycles = 100\n"), &[]).unwrap();
        let b = RunConfig::resolve(Some("# x\ncycles=100\n\nseed=1"), &[]).unwrap();
        let c = RunConfig::resolve(Some("seed = 2\ncycles = 100\n"), &[]).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn invalid_values_are_usage_errors() {
        for bad in [
            "pair_efficiency = 1.5",
            "background_fraction = -0.1",
            "cycles = 0",
            "event_format = xml",
            "bootstrap_resamples = 10",
            "bootstrap_depth = 0",
        ] {
            let err = RunConfig::resolve(Some(&format!("seed = 1\n{bad}\n")), &[]).unwrap_err();
            assert_eq!(err.exit_code(), 1, "{bad}: {err}");
        }
    }

    #[test]
    fn derived_seeds_differ_per_stream() {
        let cfg = RunConfig::resolve(None, &ov(&[("seed", "1")])).unwrap();
        let seed = |name| cfg.derived_seed(name).unwrap();
        assert_ne!(seed("H_rect"), seed("V_rect"));
        assert_eq!(seed("H_rect"), seed("H_rect"));
    }

    #[test]
    fn shipped_fixtures_resolve() {
        let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/configs");
        for name in ["ideal.cfg", "paper_dot.cfg", "classical.cfg"] {
            let text = std::fs::read_to_string(format!("{dir}/{name}")).unwrap();
            RunConfig::resolve(Some(&text), &[]).unwrap();
        }
    }
}
