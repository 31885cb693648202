//! Run configuration: a plain-text `key=value` file, overridden by flags.

use std::fmt::Write as _;
use std::str::FromStr;

use super::CliError;
use crate::segmenter::SegmenterConfig;

/// Working resolution of the segmenter, `width × height`.
pub const DEFAULT_WORKING_SIZE: (usize, usize) = (224, 128);

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub segmenter: SegmenterConfig,
    pub width: usize,
    pub height: usize,
    pub jobs: usize,
    pub deterministic: bool,
    /// Also write HSV flow and coloured label images.
    pub viz: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            segmenter: SegmenterConfig::default(),
            width: DEFAULT_WORKING_SIZE.0,
            height: DEFAULT_WORKING_SIZE.1,
            jobs: 1,
            deterministic: true,
            viz: false,
        }
    }
}

/// Keys accepted in a config file, matching the long flag names.
pub const CONFIG_KEYS: [&str; 17] = [
    "k",
    "nu",
    "degree",
    "gamma",
    "eta",
    "iters",
    "g-steps",
    "g-step",
    "seed",
    "init",
    "loss-variant",
    "model-family",
    "width",
    "height",
    "jobs",
    "deterministic",
    "viz",
];

/// Informational keys written to manifests and ignored on input.
const IGNORED_KEYS: [&str; 3] = ["version", "input", "output"];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value.trim().parse().map_err(|_| CliError::Config(format!("bad value for `{key}`: {value}")))
}

fn parse_with<T>(key: &str, value: &str, f: impl FnOnce(&str) -> Result<T, String>) -> Result<T, CliError> {
    f(value.trim()).map_err(|e| CliError::Config(format!("`{key}`: {e}")))
}

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let s = &mut self.segmenter;
        match key {
            "k" => s.segments = parse(key, value)?,
            "nu" => s.nu = parse(key, value)?,
            "degree" => s.degree = parse(key, value)?,
            "gamma" => s.gamma = parse(key, value)?,
            "eta" => s.eta = parse(key, value)?,
            "iters" => s.outer_iters = parse(key, value)?,
            "g-steps" => s.g_steps = parse(key, value)?,
            "g-step" => s.g_step = parse(key, value)?,
            "seed" => s.seed = parse(key, value)?,
            "init" => s.init = parse_with(key, value, str::parse)?,
            "loss-variant" => s.loss_variant = parse_with(key, value, str::parse)?,
            "model-family" => s.model_family = parse_with(key, value, str::parse)?,
            "width" => self.width = parse(key, value)?,
            "height" => self.height = parse(key, value)?,
            "jobs" => self.jobs = parse(key, value)?,
            "deterministic" => self.deterministic = parse(key, value)?,
            "viz" => self.viz = parse(key, value)?,
            k if IGNORED_KEYS.contains(&k) => {}
            other => return Err(CliError::Config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Reads a config file body; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("config line {}: expected key=value", n + 1)))?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.segmenter.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.width == 0 || self.height == 0 {
            return Err(CliError::Config("working resolution must be positive".into()));
        }
        if self.jobs == 0 {
            return Err(CliError::Config("jobs must be at least 1".into()));
        }
        Ok(())
    }

    /// Every setting as `key=value` lines, readable back by [`RunConfig::apply_text`].
    pub fn to_text(&self) -> String {
        let s = &self.segmenter;
        let mut out = String::new();
        let values: [(&str, String); 17] = [
            ("k", s.segments.to_string()),
            ("nu", s.nu.to_string()),
            ("degree", s.degree.to_string()),
            ("gamma", s.gamma.to_string()),
            ("eta", s.eta.to_string()),
            ("iters", s.outer_iters.to_string()),
            ("g-steps", s.g_steps.to_string()),
            ("g-step", s.g_step.to_string()),
            ("seed", s.seed.to_string()),
            ("init", s.init.to_string()),
            ("loss-variant", s.loss_variant.to_string()),
            ("model-family", s.model_family.to_string()),
            ("width", self.width.to_string()),
            ("height", self.height.to_string()),
            ("jobs", self.jobs.to_string()),
            ("deterministic", self.deterministic.to_string()),
            ("viz", self.viz.to_string()),
        ];
        for (k, v) in values {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segmenter::{InitStrategy, LossVariant};

    #[test]
    fn text_round_trip() {
        let mut c = RunConfig::default();
        c.apply_text("# run\nk = 3\ngamma=0.5\ninit=random\nloss-variant=alternate:0.25:0.125\nwidth=64\n").unwrap();
        assert_eq!(c.segmenter.segments, 3);
        assert_eq!(c.segmenter.init, InitStrategy::Random);
        assert_eq!(c.segmenter.loss_variant, LossVariant::Alternate { gamma1: 0.25, gamma2: 0.125 });
        let mut back = RunConfig::default();
        back.apply_text(&c.to_text()).unwrap();
        assert_eq!(back, c);
        assert!(CONFIG_KEYS.iter().all(|k| c.to_text().contains(&format!("{k}="))));
    }

    #[test]
    fn bad_settings() {
        let mut c = RunConfig::default();
        assert!(matches!(c.set("k", "two"), Err(CliError::Config(_))));
        assert!(matches!(c.set("colour", "red"), Err(CliError::Config(_))));
        assert!(matches!(c.apply_text("k"), Err(CliError::Config(_))));
        c.set("eta", "0.7").unwrap();
        assert!(c.validate().is_err());
    }
}
