//! Run configuration: a TOML file with named sources, absorbers and detection
//! chains, experiment and interferometer parameters.
//!
//! Built-in presets are always available by name; a table of the same name in
//! the file overrides individual fields of the preset (or defines a new entry
//! when no preset is named).
//!
//! ```toml
//! schema_version = 1
//! master_seed = 7
//!
//! [sources.my-sld]
//! preset = "SLD"
//! mean_power_w = 5e-4
//!
//! [experiment]
//! thermal_source = "my-sld"
//! repeats = 8
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::experiments::{AbsorberEntry, ExcitationModel, Fig2Setup, SourceEntry, SweepSettings};
use crate::instruments::{DetectionChain, FringeFilter};
use crate::numeric::logspace;
use crate::source::{Bandwidth, SourceSpec, SpectralShape, Statistics};
use crate::tpa::AbsorberSpec;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_SEED: u64 = 20_240_601;
pub const SEED_ENV: &str = "PHOTONSTAT_SEED";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub preset: Option<String>,
    pub statistics: Option<Statistics>,
    pub center_wavelength_m: Option<f64>,
    pub bandwidth_fwhm: Option<Bandwidth>,
    pub spectral_shape: Option<SpectralShape>,
    pub mean_power_w: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbsorberConfig {
    pub preset: Option<String>,
    pub omega_f: Option<f64>,
    pub delta_omega_f: Option<f64>,
    pub dipole_sq: Option<f64>,
    pub quantum_yield: Option<f64>,
    pub label: Option<String>,
    pub reference_counts: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub preset: Option<String>,
    pub collection_efficiency: Option<f64>,
    pub quantum_efficiency: Option<f64>,
    pub dark_rate: Option<f64>,
    pub integration_time: Option<f64>,
    pub power_correction_eta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub thermal_source: String,
    pub coherent_source: String,
    pub fluorophores: Vec<String>,
    pub chain: String,
    /// Explicit excitation powers; when empty, `power_points` log-spaced
    /// values between `power_min_w` and `power_max_w`.
    pub powers_w: Vec<f64>,
    pub power_min_w: f64,
    pub power_max_w: f64,
    pub power_points: usize,
    pub repeats: usize,
    pub noise: bool,
    pub excitation_model: ExcitationModel,
    pub calibration_power_w: f64,
    pub acceptance_band: [f64; 2],
    pub systematic_error: f64,
    pub power_calibration_error: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            thermal_source: "SLD".into(),
            coherent_source: "DFB".into(),
            fluorophores: vec!["DCM".into(), "CdTe-QD".into(), "RhodamineB".into()],
            chain: "paper-EMCCD".into(),
            powers_w: Vec::new(),
            power_min_w: 30e-6,
            power_max_w: 1e-3,
            power_points: 12,
            repeats: 5,
            noise: true,
            excitation_model: ExcitationModel::Trace,
            calibration_power_w: 300e-6,
            acceptance_band: [1.8, 2.2],
            systematic_error: 0.10,
            power_calibration_error: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TraceConfig {
    pub samples: usize,
    pub dt_s: f64,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            samples: 1 << 20,
            dt_s: 1.5e-14,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HbtConfig {
    pub samples: usize,
    /// Fine scan covers `±fine_span_tc` coherence times.
    pub fine_span_tc: f64,
    pub fine_points: usize,
    pub tail_start_tc: f64,
    pub tail_end_tc: f64,
    pub tail_points: usize,
    pub filter: FringeFilter,
    pub readout_noise: f64,
    pub linear_background: f64,
}

impl Default for HbtConfig {
    fn default() -> Self {
        Self {
            samples: 1 << 18,
            fine_span_tc: 2.0,
            fine_points: 401,
            tail_start_tc: 6.0,
            tail_end_tc: 12.0,
            tail_points: 25,
            filter: FringeFilter::Analytic,
            readout_noise: 0.0,
            linear_background: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default = "default_seed")]
    pub master_seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub sources: BTreeMap<String, SourceConfig>,
    #[serde(default)]
    pub absorbers: BTreeMap<String, AbsorberConfig>,
    #[serde(default)]
    pub chains: BTreeMap<String, ChainConfig>,
    #[serde(default)]
    pub experiment: ExperimentConfig,
    #[serde(default)]
    pub trace: TraceConfig,
    #[serde(default)]
    pub hbt: HbtConfig,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            master_seed: DEFAULT_SEED,
            output_dir: None,
            sources: BTreeMap::new(),
            absorbers: BTreeMap::new(),
            chains: BTreeMap::new(),
            experiment: ExperimentConfig::default(),
            trace: TraceConfig::default(),
            hbt: HbtConfig::default(),
        }
    }
}

/// Built-in source names.
pub const SOURCE_PRESETS: [&str; 7] = [
    "SLD",
    "SLD-residual",
    "DFB",
    "pseudo-M2",
    "pseudo-M8",
    "pseudo-M64",
    "tunable-1.5",
];

pub fn source_preset(name: &str) -> Option<SourceSpec> {
    match name {
        "SLD" => Some(SourceSpec::sld()),
        "SLD-residual" => Some(SourceSpec::sld_with_residual_coherence(1.9)),
        "DFB" => Some(SourceSpec::dfb_laser()),
        "pseudo-M2" => Some(SourceSpec::pseudo_thermal(2)),
        "pseudo-M8" => Some(SourceSpec::pseudo_thermal(8)),
        "pseudo-M64" => Some(SourceSpec::pseudo_thermal(64)),
        "tunable-1.5" => Some(SourceSpec::tunable(1.5)),
        _ => None,
    }
}

/// Coherent signal counts at the calibration power for built-in absorbers.
pub fn reference_counts_preset(name: &str) -> Option<f64> {
    match name {
        "DCM" => Some(100.0),
        "CdTe-QD" => Some(80.0),
        "RhodamineB" => Some(40.0),
        _ => None,
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.check_schema()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    fn check_schema(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(config_err(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        Ok(())
    }

    /// Applies the seed precedence: flag, then environment, then file.
    pub fn apply_seed_override(&mut self, flag: Option<u64>, env: Option<&str>) -> Result<()> {
        if let Some(s) = flag {
            self.master_seed = s;
        } else if let Some(text) = env {
            self.master_seed = text
                .trim()
                .parse()
                .map_err(|_| config_err(format!("{SEED_ENV}={text:?} is not a u64")))?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, excluding the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        let json = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn source(&self, name: &str) -> Result<SourceSpec> {
        let entry = self.sources.get(name);
        let preset_name = entry.and_then(|e| e.preset.as_deref()).unwrap_or(name);
        let base = source_preset(preset_name);
        let spec = match (entry, base) {
            (None, None) => return Err(config_err(format!("unknown source {name:?}"))),
            (None, Some(b)) => b,
            (Some(e), base) => {
                if e.preset.is_some() && base.is_none() {
                    return Err(config_err(format!("unknown source preset {preset_name:?}")));
                }
                let missing = || config_err(format!("source {name:?} is incomplete and names no preset"));
                let b = match base {
                    Some(b) => b,
                    None => SourceSpec {
                        statistics: e.statistics.clone().ok_or_else(missing)?,
                        center_wavelength: e.center_wavelength_m.ok_or_else(missing)?,
                        bandwidth: e.bandwidth_fwhm.ok_or_else(missing)?,
                        spectral_shape: e.spectral_shape.unwrap_or_default(),
                        mean_power: e.mean_power_w.ok_or_else(missing)?,
                    },
                };
                SourceSpec {
                    statistics: e.statistics.clone().unwrap_or(b.statistics),
                    center_wavelength: e.center_wavelength_m.unwrap_or(b.center_wavelength),
                    bandwidth: e.bandwidth_fwhm.unwrap_or(b.bandwidth),
                    spectral_shape: e.spectral_shape.unwrap_or(b.spectral_shape),
                    mean_power: e.mean_power_w.unwrap_or(b.mean_power),
                }
            }
        };
        spec.validate()
            .map_err(|e| config_err(format!("source {name:?}: {e}")))?;
        Ok(spec)
    }

    pub fn absorber(&self, name: &str) -> Result<AbsorberEntry> {
        let entry = self.absorbers.get(name);
        let preset_name = entry.and_then(|e| e.preset.as_deref()).unwrap_or(name);
        let base = AbsorberSpec::preset(preset_name);
        let base_counts = reference_counts_preset(preset_name);
        let (spec, counts) = match (entry, base) {
            (None, None) => return Err(config_err(format!("unknown absorber {name:?}"))),
            (None, Some(b)) => (b, base_counts),
            (Some(e), base) => {
                if e.preset.is_some() && base.is_none() {
                    return Err(config_err(format!("unknown absorber preset {preset_name:?}")));
                }
                let missing = || config_err(format!("absorber {name:?} is incomplete and names no preset"));
                let b = match base {
                    Some(b) => b,
                    None => AbsorberSpec {
                        omega_f: e.omega_f.ok_or_else(missing)?,
                        delta_omega_f: e.delta_omega_f.ok_or_else(missing)?,
                        dipole_sq: e.dipole_sq.unwrap_or(1.0),
                        quantum_yield: e.quantum_yield.ok_or_else(missing)?,
                        label: e.label.clone().unwrap_or_else(|| name.to_string()),
                    },
                };
                (
                    AbsorberSpec {
                        omega_f: e.omega_f.unwrap_or(b.omega_f),
                        delta_omega_f: e.delta_omega_f.unwrap_or(b.delta_omega_f),
                        dipole_sq: e.dipole_sq.unwrap_or(b.dipole_sq),
                        quantum_yield: e.quantum_yield.unwrap_or(b.quantum_yield),
                        label: e.label.clone().unwrap_or(b.label),
                    },
                    e.reference_counts.or(base_counts),
                )
            }
        };
        spec.validate()
            .map_err(|e| config_err(format!("absorber {name:?}: {e}")))?;
        let reference_counts = counts.unwrap_or(100.0);
        if !(reference_counts > 0.0) {
            return Err(config_err(format!("absorber {name:?}: reference_counts must be positive")));
        }
        Ok(AbsorberEntry {
            name: name.to_string(),
            spec,
            reference_counts,
        })
    }

    pub fn chain(&self, name: &str) -> Result<DetectionChain> {
        let entry = self.chains.get(name);
        let preset_name = entry.and_then(|e| e.preset.as_deref()).unwrap_or(name);
        let base = DetectionChain::preset(preset_name);
        let chain = match (entry, base) {
            (None, None) => return Err(config_err(format!("unknown detection chain {name:?}"))),
            (None, Some(b)) => b,
            (Some(e), base) => {
                if e.preset.is_some() && base.is_none() {
                    return Err(config_err(format!("unknown chain preset {preset_name:?}")));
                }
                let b = base.unwrap_or_else(DetectionChain::paper_emccd);
                DetectionChain {
                    collection_efficiency: e.collection_efficiency.unwrap_or(b.collection_efficiency),
                    quantum_efficiency: e.quantum_efficiency.unwrap_or(b.quantum_efficiency),
                    dark_rate: e.dark_rate.unwrap_or(b.dark_rate),
                    integration_time: e.integration_time.unwrap_or(b.integration_time),
                    power_correction_eta: e.power_correction_eta.unwrap_or(b.power_correction_eta),
                }
            }
        };
        chain
            .validate()
            .map_err(|e| config_err(format!("chain {name:?}: {e}")))?;
        Ok(chain)
    }

    pub fn sweep_settings(&self) -> Result<SweepSettings> {
        let e = &self.experiment;
        let powers = if e.powers_w.is_empty() {
            if !(e.power_min_w > 0.0 && e.power_max_w > e.power_min_w) || e.power_points < 2 {
                return Err(config_err("power range must satisfy 0 < min < max with >= 2 points"));
            }
            logspace(e.power_min_w, e.power_max_w, e.power_points)
        } else {
            e.powers_w.clone()
        };
        let s = SweepSettings {
            powers,
            repeats: e.repeats,
            noise: e.noise,
            excitation: e.excitation_model,
            trace_samples: self.trace.samples,
            trace_dt: self.trace.dt_s,
            power_calibration_error: e.power_calibration_error,
        };
        s.validate().map_err(|err| config_err(err.to_string()))?;
        Ok(s)
    }

    /// Resolves every preset the comparison experiment needs.
    pub fn fig2_setup(&self) -> Result<Fig2Setup> {
        let e = &self.experiment;
        if e.fluorophores.is_empty() {
            return Err(config_err("experiment.fluorophores is empty"));
        }
        let absorbers = e
            .fluorophores
            .iter()
            .map(|n| self.absorber(n))
            .collect::<Result<Vec<_>>>()?;
        let [lo, hi] = e.acceptance_band;
        if !(lo < hi) {
            return Err(config_err("acceptance_band must be [low, high] with low < high"));
        }
        if !(e.calibration_power_w > 0.0) {
            return Err(config_err("calibration_power_w must be positive"));
        }
        Ok(Fig2Setup {
            master_seed: self.master_seed,
            thermal: SourceEntry {
                name: e.thermal_source.clone(),
                spec: self.source(&e.thermal_source)?,
            },
            coherent: SourceEntry {
                name: e.coherent_source.clone(),
                spec: self.source(&e.coherent_source)?,
            },
            absorbers,
            chain: self.chain(&e.chain)?,
            sweep: self.sweep_settings()?,
            calibration_power: e.calibration_power_w,
            acceptance_band: (lo, hi),
            systematic_error: e.systematic_error,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_gets_defaults() {
        let c = RunConfig::from_toml_str("schema_version = 1\n").unwrap();
        assert_eq!(c, RunConfig::default());
        assert!(c.fig2_setup().is_ok());
    }

    #[test]
    fn wrong_schema_is_config_error() {
        let e = RunConfig::from_toml_str("schema_version = 9\n").unwrap_err();
        assert_eq!(e.code(), "config-error");
        let e = RunConfig::from_toml_str("schema_version = 1\nbogus = 3\n").unwrap_err();
        assert_eq!(e.code(), "config-error");
    }

    #[test]
    fn preset_override_and_custom_source() {
        let text = r#"
schema_version = 1
[sources.dim]
preset = "SLD"
mean_power_w = 2e-4

[sources.custom]
statistics = { kind = "pseudo-thermal", modes = 3 }
center_wavelength_m = 8e-7
bandwidth_fwhm = { hz = 1e12 }
spectral_shape = "lorentzian"
mean_power_w = 1e-3
"#;
        let c = RunConfig::from_toml_str(text).unwrap();
        let dim = c.source("dim").unwrap();
        assert_eq!(dim.mean_power, 2e-4);
        assert_eq!(dim.center_wavelength, SourceSpec::sld().center_wavelength);
        let custom = c.source("custom").unwrap();
        assert_eq!(custom.statistics, Statistics::PseudoThermal { modes: 3 });
        assert!(matches!(c.source("nope"), Err(Error::Config(_))));
    }

    #[test]
    fn missing_fluorophore_is_config_error() {
        let mut c = RunConfig::default();
        c.experiment.fluorophores = vec!["Unobtainium".into()];
        assert!(matches!(c.fig2_setup(), Err(Error::Config(_))));
    }

    #[test]
    fn seed_precedence() {
        let mut c = RunConfig::default();
        c.apply_seed_override(None, Some("42")).unwrap();
        assert_eq!(c.master_seed, 42);
        c.apply_seed_override(Some(7), Some("42")).unwrap();
        assert_eq!(c.master_seed, 7);
        assert!(c.apply_seed_override(None, Some("x")).is_err());
    }

    #[test]
    fn hash_ignores_output_dir_only() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.output_dir = Some("elsewhere".into());
        assert_eq!(a.hash(), b.hash());
        b.master_seed += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn all_builtin_sources_resolve() {
        let c = RunConfig::default();
        for name in SOURCE_PRESETS {
            c.source(name).unwrap();
        }
    }
}
