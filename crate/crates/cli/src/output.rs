//! CSV and JSON rendering. Numbers use Rust's shortest round-trip decimal form,
//! so every value reads back bit for bit.

use allee_core::seed::RNG_DESCRIPTION;
use serde::Serialize;

use crate::config::RunConfig;

pub const ARTIFACT: &str = concat!("allee ", env!("CARGO_PKG_VERSION"));

/// Prefix of the metadata lines that echo the configuration.
pub const CONFIG_PREFIX: &str = "# config: ";

/// `#` comment block placed above every CSV header.
pub fn metadata_lines(command: &str, cfg: &RunConfig) -> String {
    let mut out =
        format!("# artifact: {ARTIFACT}\n# command: {command}\n# rng: {RNG_DESCRIPTION}\n");
    for (k, v) in cfg.entries() {
        out.push_str(&format!("{CONFIG_PREFIX}{k}={v}\n"));
    }
    out
}

/// Recovers the configuration echoed in a CSV's metadata block.
pub fn config_from_metadata(text: &str) -> Result<RunConfig, crate::config::ConfigError> {
    let echoed: String = text
        .lines()
        .filter_map(|l| l.strip_prefix(CONFIG_PREFIX))
        .map(|l| format!("{l}\n"))
        .collect();
    RunConfig::from_text(&echoed)
}

pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(command: &str, cfg: &RunConfig, header: &str) -> Self {
        let mut text = metadata_lines(command, cfg);
        text.push_str(header);
        text.push('\n');
        Self { text }
    }

    pub fn row(&mut self, fields: &[&dyn std::fmt::Display]) {
        for (i, f) in fields.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            self.text.push_str(&f.to_string());
        }
        self.text.push('\n');
    }

    pub fn finish(self) -> String {
        self.text
    }
}

#[derive(Debug, Serialize)]
pub struct Metadata {
    pub artifact: &'static str,
    pub command: String,
    pub rng: &'static str,
    /// `key=value` lines, parseable as a config file.
    pub config: Vec<String>,
}

impl Metadata {
    pub fn new(command: &str, cfg: &RunConfig) -> Self {
        Self {
            artifact: ARTIFACT,
            command: command.to_string(),
            rng: RNG_DESCRIPTION,
            config: cfg
                .entries()
                .into_iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect(),
        }
    }
}
