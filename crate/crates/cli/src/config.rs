//! Global configuration file (TOML or JSON, chosen by extension).
//!
//! Every section is optional; command-line flags override file values, which
//! override the built-in defaults.

use std::path::Path;

use serde::Deserialize;

use crate::cli_error::{CliError, CliResult};

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub filterbank: FilterbankSection,
    #[serde(default)]
    pub vq: VqSection,
    #[serde(default)]
    pub index: IndexSection,
    #[serde(default)]
    pub search: SearchSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterbankSection {
    pub channels: usize,
    pub q: f64,
    pub f_low: f64,
    pub f_high: f64,
    pub hop_ms: f64,
    pub window_ms: f64,
}

impl Default for FilterbankSection {
    fn default() -> Self {
        FilterbankSection {
            channels: 7,
            q: 10.0,
            f_low: 100.0,
            f_high: 6400.0,
            hop_ms: 10.0,
            window_ms: 60.0,
        }
    }
}

impl FilterbankSection {
    pub fn to_core(&self) -> plascan_core::FilterbankConfig64 {
        plascan_core::features::FilterbankConfig {
            channels: self.channels,
            q: self.q,
            f_low: self.f_low,
            f_high: self.f_high,
            hop_s: self.hop_ms / 1000.0,
            window_s: self.window_ms / 1000.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VqSection {
    pub size: usize,
    pub epsilon: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for VqSection {
    fn default() -> Self {
        VqSection {
            size: 128,
            epsilon: 1e-3,
            tol: 1e-4,
            max_iters: 100,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexSection {
    pub window_frames: u32,
    pub segments: usize,
    pub sigma: f64,
    pub delta: usize,
    pub block: usize,
    pub dynseg: String,
}

impl Default for IndexSection {
    fn default() -> Self {
        IndexSection {
            window_frames: 1500,
            segments: 1000,
            sigma: 0.9,
            delta: 500,
            block: 50,
            dynseg: "none".into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSection {
    pub theta: f64,
}

impl Default for SearchSection {
    fn default() -> Self {
        SearchSection { theta: 85.0 }
    }
}

impl Config {
    pub fn load(path: Option<&Path>) -> CliResult<Config> {
        let Some(path) = path else {
            return Ok(Config::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::data(format!("cannot read config {}: {e}", path.display())))?;
        let is_json = path
            .extension()
            .is_some_and(|ext| ext.eq_ignore_ascii_case("json"));
        if is_json {
            serde_json::from_str(&text)
                .map_err(|e| CliError::data(format!("invalid JSON config: {e}")))
        } else {
            toml::from_str(&text).map_err(|e| CliError::data(format!("invalid TOML config: {e}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(
            &path,
            "[filterbank]\nchannels = 5\nq = 8.0\nf_low = 50.0\nf_high = 4000.0\nhop_ms = 20.0\nwindow_ms = 40.0\n\n[search]\ntheta = 42.0\n",
        )
        .unwrap();
        let config = Config::load(Some(&path)).unwrap();
        assert_eq!(config.filterbank.channels, 5);
        assert_eq!(config.search.theta, 42.0);
        // Untouched sections keep defaults.
        assert_eq!(config.vq.size, 128);
    }

    #[test]
    fn json_variant() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"vq": {"size": 64, "epsilon": 1e-3, "tol": 1e-4, "max_iters": 50}}"#).unwrap();
        let config = Config::load(Some(&path)).unwrap();
        assert_eq!(config.vq.size, 64);
        assert_eq!(config.vq.max_iters, 50);
    }

    #[test]
    fn unknown_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "[filterbank]\nchannles = 5\n").unwrap();
        assert!(Config::load(Some(&path)).is_err());
    }
}
