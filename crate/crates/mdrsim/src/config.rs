//! Experiment parameterization.

use std::path::Path;

use crate::coding::CodingParams;
use crate::error::{Error, Result};
use crate::routing::RoutingPolicy;
use crate::topology::grid_dims;

/// Default master seed; any fixed value works, reruns with the same seed
/// are byte-identical.
pub const DEFAULT_SEED: u64 = 42;

/// Full parameterization of one simulated scenario.
///
/// Defaults mirror the reference setup: 250 nodes on a 100 m x 100 m area
/// with 50 m transmission range, four domains, 50 runs of 1500 rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub num_nodes: u32,
    /// Deployment area (width, height) in meters.
    pub area: (f64, f64),
    /// Transmission radius in meters; adjacency is `dist <= range`.
    pub range: f64,
    /// Number of rectangular domains; 2 or a perfect square.
    pub num_domains: u32,
    pub policy: RoutingPolicy,
    pub coding: CodingParams,
    /// Hop budget for the random phase; on expiry a share switches to its
    /// min-hop route.
    pub counter: u32,
    /// Fraction of nodes handed to the adversary, in [0, 1].
    pub compromise_fraction: f64,
    /// Rounds between special-node re-elections.
    pub election_period: u32,
    /// Rounds between in-domain position reshuffles; 0 disables.
    pub reshuffle_period: u32,
    pub messages_per_run: u32,
    pub runs: u32,
    pub sim_rounds: u32,
    pub seed: u64,
    /// When set, the special-special handoff requires physical adjacency
    /// instead of the default one-logical-hop link.
    pub strict_special_links: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            num_nodes: 250,
            area: (100.0, 100.0),
            range: 50.0,
            num_domains: 4,
            policy: RoutingPolicy::Mdron,
            coding: CodingParams { n: 4, k: 3 },
            counter: 10,
            compromise_fraction: 0.0,
            election_period: 5,
            reshuffle_period: 10,
            messages_per_run: 100,
            runs: 50,
            sim_rounds: 1500,
            seed: DEFAULT_SEED,
            strict_special_links: false,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_nodes < 2 {
            return Err(Error::config(format!(
                "need at least 2 nodes, got {}",
                self.num_nodes
            )));
        }
        if !(self.area.0 > 0.0 && self.area.1 > 0.0) {
            return Err(Error::config(format!(
                "area dimensions must be positive, got {}x{}",
                self.area.0, self.area.1
            )));
        }
        if !(self.range > 0.0) {
            return Err(Error::config(format!(
                "transmission range must be positive, got {}",
                self.range
            )));
        }
        grid_dims(self.num_domains)?;
        self.coding.validate()?;
        if !(0.0..=1.0).contains(&self.compromise_fraction) {
            return Err(Error::config(format!(
                "compromise fraction must be in [0, 1], got {}",
                self.compromise_fraction
            )));
        }
        if self.election_period == 0 {
            return Err(Error::config("election period must be >= 1"));
        }
        if self.runs == 0 {
            return Err(Error::config("need at least one run"));
        }
        if self.sim_rounds == 0 {
            return Err(Error::config("need at least one simulation round"));
        }
        Ok(())
    }

    /// Parses a flat `key = value` document mirroring the field names.
    /// Blank lines and `#` comments are ignored; unknown keys are errors.
    pub fn from_kv_str(text: &str) -> Result<ScenarioConfig> {
        let mut config = ScenarioConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("line {}: expected key = value", lineno + 1))
            })?;
            config.set_kv(key.trim(), value.trim()).map_err(|e| {
                Error::config(format!("line {}: {e}", lineno + 1))
            })?;
        }
        Ok(config)
    }

    pub fn from_kv_file(path: &Path) -> Result<ScenarioConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_kv_str(&text)
    }

    fn set_kv(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::config(format!("invalid value {value:?} for {key}")))
        }
        match key {
            "num_nodes" => self.num_nodes = parse(key, value)?,
            "area" => self.area = parse_area(value)?,
            "range" => self.range = parse(key, value)?,
            "num_domains" => self.num_domains = parse(key, value)?,
            "policy" => self.policy = parse(key, value)?,
            "shares" => self.coding = parse(key, value)?,
            "counter" => self.counter = parse(key, value)?,
            "compromise_fraction" => self.compromise_fraction = parse(key, value)?,
            "election_period" => self.election_period = parse(key, value)?,
            "reshuffle_period" => self.reshuffle_period = parse(key, value)?,
            "messages_per_run" => self.messages_per_run = parse(key, value)?,
            "runs" => self.runs = parse(key, value)?,
            "sim_rounds" => self.sim_rounds = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "strict_special_links" => self.strict_special_links = parse(key, value)?,
            other => return Err(Error::config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }
}

/// Parses `WxH`, e.g. `100x100`.
pub fn parse_area(s: &str) -> Result<(f64, f64)> {
    let err = || Error::config(format!("invalid area {s:?}, expected WxH"));
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(err)?;
    let w: f64 = w.trim().parse().map_err(|_| err())?;
    let h: f64 = h.trim().parse().map_err(|_| err())?;
    Ok((w, h))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ScenarioConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_degenerate_inputs() {
        let mut c = ScenarioConfig {
            num_nodes: 1,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        c.num_nodes = 10;
        c.area = (0.0, 100.0);
        assert!(c.validate().is_err());
        c.area = (100.0, 100.0);
        c.num_domains = 3;
        assert!(c.validate().is_err());
        c.num_domains = 4;
        c.compromise_fraction = 1.5;
        assert!(c.validate().is_err());
    }

    #[test]
    fn kv_roundtrip_overrides_defaults() {
        let text = "\
# comment
num_nodes = 40
area = 80x60
range = 25
policy = MDRWON
shares = 5:2
reshuffle_period = 0
strict_special_links = true
";
        let c = ScenarioConfig::from_kv_str(text).unwrap();
        assert_eq!(c.num_nodes, 40);
        assert_eq!(c.area, (80.0, 60.0));
        assert_eq!(c.range, 25.0);
        assert_eq!(c.policy, RoutingPolicy::Mdrwon);
        assert_eq!((c.coding.n, c.coding.k), (5, 2));
        assert_eq!(c.reshuffle_period, 0);
        assert!(c.strict_special_links);
        // untouched keys keep defaults
        assert_eq!(c.runs, 50);
    }

    #[test]
    fn kv_rejects_unknown_key() {
        assert!(ScenarioConfig::from_kv_str("nodes = 10").is_err());
        assert!(ScenarioConfig::from_kv_str("num_nodes 10").is_err());
    }

    #[test]
    fn parse_area_accepts_wxh() {
        assert_eq!(parse_area("100x100").unwrap(), (100.0, 100.0));
        assert_eq!(parse_area("80X40.5").unwrap(), (80.0, 40.5));
        assert!(parse_area("100").is_err());
    }
}
