//! Plain-text `key=value` configuration with defaults, file merging, and
//! command-line overrides.
//!
//! Every experiment command owns a fixed key set with defaults; a config
//! file and then individual overrides may replace values but never invent
//! keys, so typos fail loudly. The fully resolved configuration is echoed
//! into the output directory in sorted order — re-running a command from
//! its own echo reproduces it exactly.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// 64-bit FNV-1a hash, used to fingerprint resolved configurations.
pub fn fnv1a_64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Seed-list syntax: a lone integer `n` means seeds `0..n`; a comma list
/// gives the exact seeds (a trailing comma allows a single literal seed,
/// e.g. `"7,"`).
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let text = text.trim();
    if text.is_empty() {
        return Err(Error::config("empty seed argument"));
    }
    if text.contains(',') {
        let seeds: Vec<u64> = text
            .split(',')
            .map(str::trim)
            .filter(|part| !part.is_empty())
            .map(|part| {
                part.parse()
                    .map_err(|_| Error::config(format!("bad seed {part:?}")))
            })
            .collect::<Result<_>>()?;
        if seeds.is_empty() {
            return Err(Error::config("empty seed list"));
        }
        Ok(seeds)
    } else {
        let n: u64 = text
            .parse()
            .map_err(|_| Error::config(format!("bad seed count {text:?}")))?;
        if n == 0 {
            return Err(Error::config("seed count must be positive"));
        }
        Ok((0..n).collect())
    }
}

/// A command's resolved settings: a closed key set with current values.
#[derive(Clone, Debug)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    /// Starts from a command's full key set with default values.
    pub fn from_defaults(defaults: &[(&str, &str)]) -> Config {
        Config {
            values: defaults
                .iter()
                .map(|&(k, v)| (k.to_owned(), v.to_owned()))
                .collect(),
        }
    }

    /// Merges a `key=value` file; blank lines and `#` comments are ignored.
    /// Keys outside the command's key set are errors.
    pub fn merge_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(format!(
                    "{}:{}: expected key=value, got {line:?}",
                    path.display(),
                    i + 1
                ))
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Overrides one value; the key must exist in the command's key set.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.to_owned();
                Ok(())
            }
            None => {
                let known: Vec<&str> = self.values.keys().map(String::as_str).collect();
                Err(Error::config(format!(
                    "unknown key {key:?} for this command; known keys: {}",
                    known.join(", ")
                )))
            }
        }
    }

    pub fn get_str(&self, key: &str) -> &str {
        self.values
            .get(key)
            .unwrap_or_else(|| panic!("key {key:?} missing from defaults"))
    }

    pub fn get_f64(&self, key: &str) -> Result<f64> {
        self.get_str(key).parse().map_err(|_| {
            Error::config(format!(
                "key {key}: expected a number, got {:?}",
                self.get_str(key)
            ))
        })
    }

    pub fn get_usize(&self, key: &str) -> Result<usize> {
        self.get_str(key).parse().map_err(|_| {
            Error::config(format!(
                "key {key}: expected an integer, got {:?}",
                self.get_str(key)
            ))
        })
    }

    pub fn get_u64(&self, key: &str) -> Result<u64> {
        self.get_str(key).parse().map_err(|_| {
            Error::config(format!(
                "key {key}: expected an integer, got {:?}",
                self.get_str(key)
            ))
        })
    }

    /// Comma-separated numbers.
    pub fn get_f64_list(&self, key: &str) -> Result<Vec<f64>> {
        self.get_str(key)
            .split(',')
            .map(str::trim)
            .filter(|part| !part.is_empty())
            .map(|part| {
                part.parse()
                    .map_err(|_| Error::config(format!("key {key}: bad number {part:?}")))
            })
            .collect()
    }

    /// Comma-separated integers.
    pub fn get_u32_list(&self, key: &str) -> Result<Vec<u32>> {
        self.get_str(key)
            .split(',')
            .map(str::trim)
            .filter(|part| !part.is_empty())
            .map(|part| {
                part.parse()
                    .map_err(|_| Error::config(format!("key {key}: bad integer {part:?}")))
            })
            .collect()
    }

    /// Comma-separated names or paths.
    pub fn get_str_list(&self, key: &str) -> Vec<String> {
        self.get_str(key)
            .split(',')
            .map(str::trim)
            .filter(|part| !part.is_empty())
            .map(str::to_owned)
            .collect()
    }

    pub fn seeds(&self) -> Result<Vec<u64>> {
        parse_seeds(self.get_str("seeds"))
    }

    /// The resolved configuration as reloadable text: a command comment, the
    /// sorted `key=value` lines, and a fingerprint comment.
    pub fn echo(&self, command: &str) -> String {
        let mut body = format!("# qprior {command}\n");
        for (k, v) in &self.values {
            body.push_str(k);
            body.push('=');
            body.push_str(v);
            body.push('\n');
        }
        let hash = fnv1a_64(body.as_bytes());
        body.push_str(&format!("# config_hash={hash:016x}\n"));
        body
    }

    /// Writes the echo into `dir/config.txt`.
    pub fn write_echo(&self, dir: impl AsRef<Path>, command: &str) -> Result<()> {
        let path = dir.as_ref().join("config.txt");
        fs::write(&path, self.echo(command)).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_syntax() {
        assert_eq!(parse_seeds("3").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seeds("5,9,13").unwrap(), vec![5, 9, 13]);
        assert_eq!(parse_seeds("7,").unwrap(), vec![7]);
        assert_eq!(parse_seeds(" 1, 2 ").unwrap(), vec![1, 2]);
        assert!(parse_seeds("0").is_err());
        assert!(parse_seeds("").is_err());
        assert!(parse_seeds(",").is_err());
        assert!(parse_seeds("a,b").is_err());
    }

    #[test]
    fn fnv_is_stable() {
        assert_eq!(fnv1a_64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a_64(b"a"), 0xaf63dc4c8601ec8c);
        assert_ne!(fnv1a_64(b"ab"), fnv1a_64(b"ba"));
    }

    fn base() -> Config {
        Config::from_defaults(&[("episodes", "2000"), ("rho", "0.95"), ("seeds", "10")])
    }

    #[test]
    fn overrides_replace_known_keys_only() {
        let mut cfg = base();
        cfg.set("episodes", "50").unwrap();
        assert_eq!(cfg.get_usize("episodes").unwrap(), 50);
        assert!(cfg.set("episode", "50").is_err(), "typo must be rejected");
    }

    #[test]
    fn file_merge_and_comments() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        fs::write(&path, "# comment\n\nepisodes = 123\nrho=0.5\n").unwrap();
        let mut cfg = base();
        cfg.merge_file(&path).unwrap();
        assert_eq!(cfg.get_usize("episodes").unwrap(), 123);
        assert_eq!(cfg.get_f64("rho").unwrap(), 0.5);

        fs::write(&path, "bogus_key=1\n").unwrap();
        assert!(cfg.merge_file(&path).is_err());
        fs::write(&path, "no equals sign\n").unwrap();
        assert!(cfg.merge_file(&path).is_err());
    }

    #[test]
    fn echo_is_sorted_reloadable_and_fingerprinted() {
        let mut cfg = base();
        cfg.set("rho", "0.5").unwrap();
        let echo = cfg.echo("train-target");
        let lines: Vec<&str> = echo.lines().collect();
        assert_eq!(lines[0], "# qprior train-target");
        assert_eq!(lines[1], "episodes=2000");
        assert_eq!(lines[2], "rho=0.5");
        assert_eq!(lines[3], "seeds=10");
        assert!(lines[4].starts_with("# config_hash="));

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("echo.cfg");
        fs::write(&path, &echo).unwrap();
        let mut reloaded = base();
        reloaded.merge_file(&path).unwrap();
        assert_eq!(reloaded.echo("train-target"), echo);
    }

    #[test]
    fn typed_getters_report_the_key() {
        let mut cfg = base();
        cfg.set("rho", "fast").unwrap();
        let err = cfg.get_f64("rho").unwrap_err().to_string();
        assert!(err.contains("rho"), "{err}");
    }

    #[test]
    fn list_getters() {
        let cfg = Config::from_defaults(&[("rhos", "0, 0.5,0.95,1"), ("counts", "1,2,3")]);
        assert_eq!(cfg.get_f64_list("rhos").unwrap(), vec![0.0, 0.5, 0.95, 1.0]);
        assert_eq!(cfg.get_u32_list("counts").unwrap(), vec![1, 2, 3]);
    }
}
