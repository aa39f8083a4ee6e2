//! Flat `key = value` configuration with command-line overrides.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use latticebolt::{StrategyKind, StreamStrategy};

/// Environment variable that overrides the worker count.
pub const WORKERS_ENV: &str = "LATTICEBOLT_WORKERS";

#[derive(Debug, Default, Clone)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

fn normalize(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('-', "_")
}

impl Settings {
    /// Parses `key = value` lines. Blank lines and lines starting with `#`
    /// are skipped; keys are case-insensitive and `-` equals `_`.
    pub fn parse(text: &str, allowed: &[&str]) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| anyhow!("line {}: expected key = value, got {line:?}", n + 1))?;
            let key = normalize(k);
            if !allowed.contains(&key.as_str()) {
                bail!("line {}: unknown key {key:?}; expected one of {}", n + 1, allowed.join(", "));
            }
            values.insert(key, v.trim().to_owned());
        }
        Ok(Self { values })
    }

    pub fn load(path: Option<&Path>, allowed: &[&str]) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                Self::parse(&text, allowed).with_context(|| format!("config file {}", p.display()))
            }
        }
    }

    /// A flag value replaces whatever the file said.
    pub fn set<V: Display>(&mut self, key: &str, value: Option<V>) {
        if let Some(v) = value {
            self.values.insert(normalize(key), v.to_string());
        }
    }

    pub fn remove(&mut self, key: &str) {
        self.values.remove(key);
    }

    pub fn set_flag(&mut self, key: &str, on: bool) {
        if on {
            self.values.insert(normalize(key), "true".into());
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        self.raw(key).map(|v| v.parse::<T>().map_err(|e| anyhow!("{key} = {v:?}: {e}"))).transpose()
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn bool(&self, key: &str) -> Result<bool> {
        match self.raw(key).map(str::to_ascii_lowercase).as_deref() {
            None | Some("false" | "0" | "no" | "off") => Ok(false),
            Some("true" | "1" | "yes" | "on") => Ok(true),
            Some(v) => bail!("{key} = {v:?}: expected true or false"),
        }
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: Display,
    {
        self.raw(key)
            .map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<T>().map_err(|e| anyhow!("{key}: {s:?}: {e}")))
                    .collect()
            })
            .transpose()
    }

    pub fn as_map(&self) -> &BTreeMap<String, String> {
        &self.values
    }
}

/// `direct`, `tile`, `tile16`, `lane`, `lane8`. A bare kind takes the
/// width from `tile_width`/`lane_width` or the default for `nx`.
pub fn parse_strategy(s: &str, nx: usize, tile_width: Option<usize>, lane_width: Option<usize>) -> Result<StreamStrategy> {
    let split = s.find(|c: char| c.is_ascii_digit()).unwrap_or(s.len());
    let (name, digits) = s.split_at(split);
    let kind: StrategyKind = name.parse()?;
    let width = if digits.is_empty() {
        None
    } else {
        Some(digits.parse::<usize>().map_err(|_| anyhow!("strategy {s:?}: bad width"))?)
    };
    let defaults = StreamStrategy::new(kind, nx);
    Ok(match kind {
        StrategyKind::Direct if width.is_some() => bail!("strategy {s:?}: direct takes no width"),
        StrategyKind::Direct => StreamStrategy::direct(),
        StrategyKind::TileBuffered => StreamStrategy::tile(width.or(tile_width).unwrap_or(defaults.tile_width)),
        StrategyKind::LaneRotate => StreamStrategy::lane(width.or(lane_width).unwrap_or(defaults.lane_width)),
    })
}

/// Worker count: flag, then environment, then config file, then all cores.
pub fn workers(flag: Option<usize>, file: Option<usize>) -> Result<usize> {
    let env = match std::env::var(WORKERS_ENV) {
        Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| anyhow!("{WORKERS_ENV}={v:?} is not a count"))?),
        Err(_) => None,
    };
    let n = flag.or(env).or(file).unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if n == 0 {
        bail!("worker count must be positive");
    }
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_values_are_overridden_by_flags() {
        let mut s = Settings::parse("# cavity\nre = 100\nLid-Speed=0.05\n\nsize = 32\n", &["re", "lid_speed", "size"]).unwrap();
        s.set("size", Some(48));
        s.set::<f64>("re", None);
        assert_eq!(s.get::<usize>("size").unwrap(), Some(48));
        assert_eq!(s.get::<f64>("re").unwrap(), Some(100.0));
        assert_eq!(s.get::<f64>("lid_speed").unwrap(), Some(0.05));
    }

    #[test]
    fn bad_lines_are_located() {
        let e = Settings::parse("re = 1\nnonsense\n", &["re"]).unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
        let e = Settings::parse("colour = red\n", &["re"]).unwrap_err();
        assert!(e.to_string().contains("unknown key"), "{e}");
    }

    #[test]
    fn strategy_names() {
        assert_eq!(parse_strategy("tile16", 64, None, None).unwrap(), StreamStrategy::tile(16));
        assert_eq!(parse_strategy("lane", 64, None, Some(8)).unwrap(), StreamStrategy::lane(8));
        assert_eq!(parse_strategy("direct", 64, None, None).unwrap().kind, StrategyKind::Direct);
        assert!(parse_strategy("direct4", 64, None, None).is_err());
        assert!(parse_strategy("spiral", 64, None, None).is_err());
    }

    #[test]
    fn lists_and_bools() {
        let s = Settings::parse("sizes = 16, 24,32\nflag = yes\n", &["sizes", "flag"]).unwrap();
        assert_eq!(s.list::<usize>("sizes").unwrap(), Some(vec![16, 24, 32]));
        assert!(s.bool("flag").unwrap());
        assert!(!s.bool("missing").unwrap());
    }
}
