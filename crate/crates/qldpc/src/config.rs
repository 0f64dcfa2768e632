//! TOML experiment configuration: code family, noise sweep, schedule,
//! decoder settings, and shot budget.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::decoder::{BpConfig, BpVariant, OsdConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub code: CodeSection,
    pub noise: NoiseSection,
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub decoder: DecoderSection,
    pub run: RunSection,
    #[serde(default)]
    pub fit: Option<FitSection>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeSection {
    /// One of "hgp", "lp", "sc-toric", "surface", "import".
    pub family: String,
    /// Family instance (hgp: 1-3, lp: 1-4); ignored otherwise.
    #[serde(default = "one")]
    pub index: usize,
    /// Construction seed for randomized families.
    #[serde(default = "seven")]
    pub seed: u64,
    /// Distance for "surface" and "sc-toric".
    #[serde(default)]
    pub d: Option<usize>,
    /// Directory with exported matrices for "import".
    #[serde(default)]
    pub path: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    /// Swept parameter values: p_bell in "bell" mode, unified p in
    /// "unified" mode (where p_gate = p / 50).
    pub sweep: Vec<f64>,
    /// "bell" or "unified".
    #[serde(default = "bell_mode")]
    pub mode: String,
    /// Two-qubit gate error, fixed across the sweep in "bell" mode.
    #[serde(default = "default_p_gate")]
    pub p_gate: f64,
    /// If true, the values above are already effective single-sided rates
    /// (p'); if false they are two-sided rates and are folded first.
    #[serde(default = "yes")]
    pub folded: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub rounds: usize,
    pub cycles_per_round: usize,
    /// Any of "z", "x".
    pub bases: Vec<String>,
    /// Extra ancilla-measurement flip probability (0 unless modeling
    /// additional readout noise).
    #[serde(default)]
    pub meas_flip: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoderSection {
    /// "product-sum" or "min-sum".
    pub variant: String,
    pub max_iterations: usize,
    pub damping: f64,
    pub stop: bool,
    pub osd_order: usize,
    pub osd_sweep: usize,
}

impl Default for DecoderSection {
    fn default() -> Self {
        Self {
            variant: "product-sum".into(),
            max_iterations: 30,
            damping: 0.0,
            stop: true,
            osd_order: 0,
            osd_sweep: 10,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// Shot cap per point (adaptive early-stop may use fewer).
    pub shots: u64,
    pub seed: u64,
    /// Output directory.
    #[serde(default = "default_out")]
    pub out: String,
    /// Early-stop when stderr / p_hat < target_rel_stderr.
    #[serde(default = "yes")]
    pub adaptive: bool,
    #[serde(default = "default_rel_stderr")]
    pub target_rel_stderr: f64,
    /// Shots sampled per block (recorded in the manifest).
    #[serde(default = "default_block")]
    pub block_size: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    /// "threshold" or "subthreshold".
    pub kind: String,
    /// Error-floor mask: points with p outside [p_min, p_max] are excluded.
    #[serde(default)]
    pub p_min: Option<f64>,
    #[serde(default)]
    pub p_max: Option<f64>,
    /// Combine Z and X bases (independence assumption) before fitting;
    /// otherwise each basis is fit separately and must be unique.
    #[serde(default = "yes")]
    pub combine_bases: bool,
}

fn one() -> usize {
    1
}
fn seven() -> u64 {
    7
}
fn yes() -> bool {
    true
}
fn bell_mode() -> String {
    "bell".into()
}
fn default_p_gate() -> f64 {
    0.002
}
fn default_out() -> String {
    "out".into()
}
fn default_rel_stderr() -> f64 {
    0.1
}
fn default_block() -> u64 {
    1024
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        let cfg: Self = toml::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError::Invalid(msg));
        match self.code.family.as_str() {
            "hgp" => {
                if !(1..=3).contains(&self.code.index) {
                    return fail(format!("hgp index {} not in 1..=3", self.code.index));
                }
            }
            "lp" => {
                if !(1..=4).contains(&self.code.index) {
                    return fail(format!("lp index {} not in 1..=4", self.code.index));
                }
            }
            "surface" | "sc-toric" => {
                let d = self.code.d.unwrap_or(0);
                if d < 2 {
                    return fail(format!("family {} needs d >= 2", self.code.family));
                }
            }
            "import" => {
                if self.code.path.is_none() {
                    return fail("import family needs code.path".into());
                }
            }
            other => return fail(format!("unknown code family {other:?}")),
        }
        if self.noise.sweep.is_empty() {
            return fail("noise.sweep must contain at least one value".into());
        }
        for &p in &self.noise.sweep {
            if !(0.0..=1.0).contains(&p) {
                return fail(format!("sweep value {p} outside [0,1]"));
            }
        }
        match self.noise.mode.as_str() {
            "bell" => {
                if !(0.0..=1.0).contains(&self.noise.p_gate) {
                    return fail(format!("p_gate {} outside [0,1]", self.noise.p_gate));
                }
            }
            // Unified sweep implies the ratio rule p_gate = p / 50; the
            // fixed p_gate field is unused.
            "unified" => {}
            other => return fail(format!("unknown noise mode {other:?}")),
        }
        if self.schedule.rounds < 1 || self.schedule.cycles_per_round < 1 {
            return fail("schedule needs rounds >= 1 and cycles_per_round >= 1".into());
        }
        if self.schedule.bases.is_empty() {
            return fail("schedule.bases must not be empty".into());
        }
        for b in &self.schedule.bases {
            if b != "z" && b != "x" {
                return fail(format!("unknown basis {b:?} (use \"z\" or \"x\")"));
            }
        }
        if !(0.0..=1.0).contains(&self.schedule.meas_flip) {
            return fail(format!("meas_flip {} outside [0,1]", self.schedule.meas_flip));
        }
        match self.decoder.variant.as_str() {
            "product-sum" | "min-sum" => {}
            other => return fail(format!("unknown BP variant {other:?}")),
        }
        if self.decoder.max_iterations < 1 {
            return fail("decoder.max_iterations must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.decoder.damping) {
            return fail(format!("damping {} outside [0,1)", self.decoder.damping));
        }
        if self.run.shots < 1 {
            return fail("run.shots must be >= 1".into());
        }
        if self.run.block_size < 1 {
            return fail("run.block_size must be >= 1".into());
        }
        if let Some(fit) = &self.fit {
            match fit.kind.as_str() {
                "threshold" | "subthreshold" => {}
                other => return fail(format!("unknown fit kind {other:?}")),
            }
        }
        Ok(())
    }

    /// Canonical serialized form used for hashing and the manifest.
    pub fn canonical_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical form, hex-encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Swept points as (swept value, p_bell_eff, p_gate_eff).
    pub fn noise_points(&self) -> Result<Vec<(f64, f64, f64)>, ConfigError> {
        self.noise
            .sweep
            .iter()
            .map(|&p| {
                let (p_bell, p_gate) = if self.noise.mode == "unified" {
                    (p, p / 50.0)
                } else {
                    (p, self.noise.p_gate)
                };
                if self.noise.folded {
                    Ok((p, p_bell, p_gate))
                } else {
                    let fold = crate::distill::FoldedNoise::new(p_bell, p_gate)
                        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
                    Ok((p, fold.p_bell_eff, fold.p_gate_eff))
                }
            })
            .collect()
    }

    pub fn bp_config(&self) -> BpConfig {
        BpConfig {
            variant: if self.decoder.variant == "min-sum" {
                BpVariant::MinSum
            } else {
                BpVariant::ProductSum
            },
            max_iterations: self.decoder.max_iterations,
            damping: self.decoder.damping,
            stop: self.decoder.stop,
        }
    }

    pub fn osd_config(&self) -> OsdConfig {
        OsdConfig { order: self.decoder.osd_order, sweep: self.decoder.osd_sweep }
    }

    /// A fully explicit template with every default spelled out.
    pub fn template() -> String {
        let cfg = ExperimentConfig {
            code: CodeSection {
                family: "hgp".into(),
                index: 1,
                seed: 7,
                d: None,
                path: None,
            },
            noise: NoiseSection {
                sweep: vec![0.08, 0.10, 0.12],
                mode: "bell".into(),
                p_gate: 0.002,
                folded: true,
            },
            schedule: ScheduleSection {
                rounds: 14,
                cycles_per_round: 3,
                bases: vec!["z".into()],
                meas_flip: 0.0,
            },
            decoder: DecoderSection::default(),
            run: RunSection {
                shots: 1000,
                seed: 1,
                out: "out".into(),
                adaptive: true,
                target_rel_stderr: 0.1,
                block_size: 1024,
            },
            fit: Some(FitSection {
                kind: "threshold".into(),
                p_min: None,
                p_max: None,
                combine_bases: true,
            }),
        };
        cfg.canonical_toml()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(ConfigError::Parse)?;
        cfg.validate()?;
        Ok(cfg)
    }

    #[test]
    fn template_roundtrips() {
        let cfg = parse(&ExperimentConfig::template()).unwrap();
        assert_eq!(cfg.code.family, "hgp");
        assert_eq!(cfg.schedule.rounds, 14);
        assert_eq!(cfg.decoder.osd_sweep, 10);
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = parse(&ExperimentConfig::template()).unwrap();
        let b = parse(&ExperimentConfig::template()).unwrap();
        assert_eq!(a.hash(), b.hash());
        let mut c = a.clone();
        c.run.seed += 1;
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn rejects_bad_values() {
        let mut cfg = parse(&ExperimentConfig::template()).unwrap();
        cfg.noise.sweep = vec![1.5];
        assert!(cfg.validate().is_err());
        let mut cfg = parse(&ExperimentConfig::template()).unwrap();
        cfg.schedule.bases = vec!["y".into()];
        assert!(cfg.validate().is_err());
        let mut cfg = parse(&ExperimentConfig::template()).unwrap();
        cfg.code.family = "hamming".into();
        assert!(cfg.validate().is_err());
        let mut cfg = parse(&ExperimentConfig::template()).unwrap();
        cfg.run.shots = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn unified_mode_applies_ratio_rule() {
        let mut cfg = parse(&ExperimentConfig::template()).unwrap();
        cfg.noise.mode = "unified".into();
        cfg.noise.sweep = vec![0.05];
        let pts = cfg.noise_points().unwrap();
        assert_eq!(pts.len(), 1);
        assert!((pts[0].1 - 0.05).abs() < 1e-15);
        assert!((pts[0].2 - 0.001).abs() < 1e-15);
    }

    #[test]
    fn folding_applies_when_requested() {
        let mut cfg = parse(&ExperimentConfig::template()).unwrap();
        cfg.noise.folded = false;
        cfg.noise.sweep = vec![0.05];
        let pts = cfg.noise_points().unwrap();
        let want = crate::distill::fold_bell_noise(0.05).unwrap();
        assert!((pts[0].1 - want).abs() < 1e-15);
        assert!((pts[0].2 - 0.004).abs() < 1e-15);
    }
}
