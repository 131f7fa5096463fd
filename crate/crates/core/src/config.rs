//! Run configuration: every knob of the pipeline in one TOML document.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::drift::UpdateConfig;
use crate::error::{Error, Result};
use crate::filter::AdosConfig;
use crate::io::StreamHeader;
use crate::net::ModelConfig;
use crate::scoring::{ThresholdConfig, NORMAL_RATIO};
use crate::stream::StreamConfig;

/// Threshold settings. Unset values are calibrated from labeled data.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringConfig {
    pub tau: Option<f64>,
    /// Anomaly threshold of the pruning detector; defaults to `tau`.
    pub t_a: Option<f64>,
    /// Normal threshold of the pruning detector; defaults to `0.7·t_a`.
    pub t_n: Option<f64>,
    /// Number of top-ranked segment ids to list in reports.
    pub top_k: Option<usize>,
}

impl ScoringConfig {
    /// Resolves thresholds, falling back to `calibrated` for `tau`.
    pub fn thresholds(&self, calibrated: Option<f64>) -> Result<ThresholdConfig> {
        let tau = self
            .tau
            .or(calibrated)
            .ok_or_else(|| Error::Config("no tau configured and none calibrated".into()))?;
        let t_a = self.t_a.unwrap_or(tau);
        let t = ThresholdConfig {
            tau,
            t_a,
            t_n: self.t_n.unwrap_or(NORMAL_RATIO * t_a),
        };
        t.validate()?;
        Ok(t)
    }
}

/// Named parameter sets for the four reference datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Inf,
    Spe,
    Ted,
    Twi,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Inf, Preset::Spe, Preset::Ted, Preset::Twi];

    /// `(tau, omega, t1, t2, sparse_groups)`.
    pub fn values(self) -> (f64, f64, f64, f64, usize) {
        match self {
            Preset::Inf => (0.182, 0.8, 1.6, 0.5, 10),
            Preset::Spe => (0.097, 0.9, 1.8, 0.45, 11),
            Preset::Ted => (0.052, 0.9, 1.8, 0.5, 11),
            Preset::Twi => (0.058, 0.9, 1.6, 0.5, 12),
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "inf" => Ok(Preset::Inf),
            "spe" => Ok(Preset::Spe),
            "ted" => Ok(Preset::Ted),
            "twi" => Ok(Preset::Twi),
            other => Err(Error::Config(format!(
                "unknown preset {other:?} (expected inf, spe, ted or twi)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub stream: StreamConfig,
    pub model: ModelConfig,
    pub scoring: ScoringConfig,
    pub ados: AdosConfig,
    pub update: UpdateConfig,
}

impl RunConfig {
    /// Parses a TOML document; missing sections take their defaults.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("run config is always representable in TOML")
    }

    /// Sets the run seed and derives the per-module seeds from it.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.stream.seed = seed;
        self.model.seed = seed;
        self
    }

    pub fn apply_preset(&mut self, preset: Preset) {
        let (tau, omega, t1, t2, sparse) = preset.values();
        self.scoring.tau = Some(tau);
        self.model.omega = omega;
        self.ados.t1 = t1;
        self.ados.t2 = t2;
        self.ados.sparse_groups = sparse;
    }

    /// Checks each section and the consistency between them.
    pub fn validate(&self) -> Result<()> {
        self.stream.validate()?;
        self.model.validate()?;
        self.ados.validate()?;
        self.update.validate()?;
        let mismatch = |what: &str, a: usize, b: usize| {
            Error::Config(format!("{what} differs between model ({a}) and stream ({b})"))
        };
        if self.model.d1 != self.stream.d1 {
            return Err(mismatch("d1", self.model.d1, self.stream.d1));
        }
        if self.model.d2 != self.stream.d2() {
            return Err(mismatch("d2", self.model.d2, self.stream.d2()));
        }
        if self.model.q != self.stream.q {
            return Err(mismatch("q", self.model.q, self.stream.q));
        }
        if self.update.count_channels != self.stream.count_channels() {
            return Err(mismatch(
                "count channels",
                self.update.count_channels,
                self.stream.count_channels(),
            ));
        }
        if let (Some(a), Some(n)) = (self.scoring.t_a, self.scoring.t_n) {
            if n >= a {
                return Err(Error::Config(format!("t_n {n} must be below t_a {a}")));
            }
        }
        Ok(())
    }

    /// Checks the model shape against a data file header.
    pub fn check_header(&self, header: &StreamHeader) -> Result<()> {
        for (what, cfg, file) in [
            ("d1", self.model.d1, header.d1),
            ("d2", self.model.d2, header.d2),
        ] {
            if cfg != file {
                return Err(Error::Config(format!(
                    "{what} is {cfg} in the configuration but {file} in the data file"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_consistent_and_round_trip() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn partial_document_fills_defaults() {
        let cfg = RunConfig::from_toml("seed = 3\n[model]\nlr = 0.01\n").unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.model.lr, 0.01);
        assert_eq!(cfg.model.h1, ModelConfig::default().h1);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("[model]\nlearning_rate = 0.1\n").is_err());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let err = RunConfig::from_toml("[model]\nd1 = 12\n").unwrap_err();
        assert!(err.to_string().contains("d1"), "{err}");
    }

    #[test]
    fn thresholds_resolve_with_defaults() {
        let s = ScoringConfig::default();
        assert!(s.thresholds(None).is_err());
        let t = s.thresholds(Some(0.2)).unwrap();
        assert_eq!((t.tau, t.t_a), (0.2, 0.2));
        assert!((t.t_n - 0.14).abs() < 1e-15);
    }

    #[test]
    fn presets_apply_and_validate() {
        for p in Preset::ALL {
            let mut cfg = RunConfig::default();
            cfg.apply_preset(p);
            cfg.validate().unwrap();
            assert_eq!(cfg.scoring.tau, Some(p.values().0));
        }
        assert_eq!(Preset::parse("TWI").unwrap(), Preset::Twi);
        assert!(Preset::parse("xyz").is_err());
    }
}
