//! Preset and scenario files.
//!
//! Everything is TOML with units spelled out in key names. A fiber preset
//! describes one fiber plus its default axis assignments; a scenario wires
//! fibers, pumps, source, detectors and noise into one runnable experiment.
//! Unknown keys are rejected so that typos fail loudly.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::counting::{NoiseSpec, TrainConfig};
use crate::detector::DetectorSpec;
use crate::dispersion::{Axis, BsAxes, FiberSpec, FrequencyQuartet, MiAxes};
use crate::error::{Result, SimError};
use crate::source::SourceSpec;
use crate::translator::{make_coupler, BsCoupler, PumpField};

fn cfg_err(e: impl std::fmt::Display) -> SimError {
    SimError::Config(e.to_string())
}

/// On-disk fiber preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberPreset {
    pub name: String,
    pub reference_wavelength_nm: f64,
    pub zdw_wavelength_nm: f64,
    pub beta2_ps2_per_km: f64,
    pub beta3_ps3_per_km: f64,
    pub beta4_ps4_per_km: f64,
    pub birefringence_dn: f64,
    pub gamma_per_w_km: f64,
    pub length_m: f64,
    pub valid_min_nm: f64,
    pub valid_max_nm: f64,
    /// Default axis assignment for the one-pump pair process.
    pub mi_pump_axis: Axis,
    pub mi_sideband_axis: Axis,
    /// Default common axis for the two-pump translation process.
    pub bs_axis: Axis,
}

impl FiberPreset {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| cfg_err(format!("cannot read {}: {e}", path.display())))?;
        let preset: FiberPreset = toml::from_str(&text)
            .map_err(|e| cfg_err(format!("{}: {e}", path.display())))?;
        preset.fiber()?.validate()?;
        Ok(preset)
    }

    pub fn fiber(&self) -> Result<FiberSpec> {
        let f = FiberSpec {
            reference_wavelength_nm: self.reference_wavelength_nm,
            zdw_wavelength_nm: self.zdw_wavelength_nm,
            beta2_ps2_per_km: self.beta2_ps2_per_km,
            beta3_ps3_per_km: self.beta3_ps3_per_km,
            beta4_ps4_per_km: self.beta4_ps4_per_km,
            birefringence_dn: self.birefringence_dn,
            gamma_per_w_km: self.gamma_per_w_km,
            length_m: self.length_m,
            valid_min_nm: self.valid_min_nm,
            valid_max_nm: self.valid_max_nm,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn mi_axes(&self) -> MiAxes {
        MiAxes {
            pump: self.mi_pump_axis,
            signal: self.mi_sideband_axis,
            idler: self.mi_sideband_axis,
        }
    }

    pub fn bs_axes(&self) -> BsAxes {
        BsAxes::scalar(self.bs_axis)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    pub epsilon: f64,
    #[serde(default = "default_one")]
    pub schmidt_modes: u32,
    pub herald_efficiency: f64,
    pub herald_dark_prob: f64,
    pub signal_delivery: f64,
    pub rep_rate_hz: f64,
}

fn default_one() -> u32 {
    1
}

/// Translator settings: either a pinned efficiency (calibrated scenarios)
/// or the physical pump/fiber description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranslatorSection {
    /// Pinned `|nu(L)|^2`; mutually exclusive with the physical block.
    pub efficiency: Option<f64>,
    /// Path to the translator fiber preset, relative to the scenario file.
    pub fiber: Option<String>,
    pub pump1_wavelength_nm: Option<f64>,
    pub pump1_power_mw: Option<f64>,
    pub pump2_wavelength_nm: Option<f64>,
    pub pump2_power_mw: Option<f64>,
    pub input_wavelength_nm: Option<f64>,
    /// Scalar pulse temporal-overlap factor in [0, 1].
    pub overlap: Option<f64>,
    /// Group-slowness difference between the two channels, ps/km.
    pub walkoff_ps_per_km: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    pub efficiency: f64,
    pub dark_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub mean_683: f64,
    pub mean_659: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub n_runs: usize,
    pub pulses_per_run: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcceptanceFilterSection {
    pub input_center_nm: f64,
    pub output_center_nm: f64,
    pub input_fwhm_nm: f64,
    pub span_nm: f64,
    pub points: usize,
}

/// A runnable experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Master seed; a CLI `--seed` overrides it.
    pub seed: Option<u64>,
    pub source: SourceSection,
    pub translator: TranslatorSection,
    pub detector_683: DetectorSection,
    pub detector_659: DetectorSection,
    pub noise: NoiseSection,
    pub run: RunSection,
    pub acceptance_filter: Option<AcceptanceFilterSection>,
    /// Directory of the scenario file, for resolving relative preset paths.
    #[serde(skip)]
    base_dir: PathBuf,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| cfg_err(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: ScenarioConfig = toml::from_str(&text)
            .map_err(|e| cfg_err(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.source_spec()?;
        self.noise_spec()?;
        DetectorSpec::new(self.detector_683.efficiency, self.detector_683.dark_prob)?;
        DetectorSpec::new(self.detector_659.efficiency, self.detector_659.dark_prob)?;
        if self.run.n_runs == 0 || self.run.pulses_per_run == 0 {
            return Err(cfg_err("run.n_runs and run.pulses_per_run must be positive"));
        }
        let t = &self.translator;
        let physical = [
            t.fiber.is_some(),
            t.pump1_wavelength_nm.is_some(),
            t.pump1_power_mw.is_some(),
            t.pump2_wavelength_nm.is_some(),
            t.pump2_power_mw.is_some(),
            t.input_wavelength_nm.is_some(),
        ];
        match (t.efficiency, physical.iter().any(|&b| b)) {
            (Some(e), false) => {
                if !(0.0..=1.0).contains(&e) {
                    return Err(cfg_err(format!(
                        "translator.efficiency must be in [0,1], got {e}"
                    )));
                }
            }
            (None, true) => {
                if !physical.iter().all(|&b| b) {
                    return Err(cfg_err(
                        "physical translator block needs fiber, both pumps and input_wavelength_nm",
                    ));
                }
            }
            (Some(_), true) => {
                return Err(cfg_err(
                    "translator: give either efficiency or the physical pump/fiber block, not both",
                ))
            }
            (None, false) => {
                return Err(cfg_err(
                    "translator: give either efficiency or the physical pump/fiber block",
                ))
            }
        }
        Ok(())
    }

    pub fn source_spec(&self) -> Result<SourceSpec> {
        let s = SourceSpec {
            epsilon: self.source.epsilon,
            schmidt_modes: self.source.schmidt_modes,
            herald: DetectorSpec::new(self.source.herald_efficiency, self.source.herald_dark_prob)?,
            signal_delivery: self.source.signal_delivery,
            rep_rate_hz: self.source.rep_rate_hz,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn noise_spec(&self) -> Result<NoiseSpec> {
        let n = NoiseSpec {
            mean_683: self.noise.mean_683,
            mean_659: self.noise.mean_659,
        };
        n.validate()?;
        Ok(n)
    }

    /// Builds the coupler: straight from the pinned efficiency, or from the
    /// physical fiber + pump description.
    pub fn coupler(&self) -> Result<BsCoupler> {
        let t = &self.translator;
        if let Some(e) = t.efficiency {
            // nominal 20 m; only |kappa| L matters downstream
            return BsCoupler::from_efficiency(e, 20.0);
        }
        let preset = FiberPreset::load(&self.base_dir.join(t.fiber.as_ref().unwrap()))?;
        let fiber = preset.fiber()?;
        let p1 = PumpField {
            wavelength_nm: t.pump1_wavelength_nm.unwrap(),
            power_w: t.pump1_power_mw.unwrap() * 1e-3,
        };
        let p2 = PumpField {
            wavelength_nm: t.pump2_wavelength_nm.unwrap(),
            power_w: t.pump2_power_mw.unwrap() * 1e-3,
        };
        let quartet = FrequencyQuartet::bs_conserving_nm(
            p1.wavelength_nm,
            t.input_wavelength_nm.unwrap(),
            p2.wavelength_nm,
        )?;
        make_coupler(
            &fiber,
            &p1,
            &p2,
            &quartet,
            preset.bs_axes(),
            t.overlap.unwrap_or(1.0),
        )
    }

    /// Assembles the Monte Carlo train configuration.
    pub fn train_config(&self) -> Result<TrainConfig> {
        let coupler = self.coupler()?;
        let cfg = TrainConfig {
            source: self.source_spec()?,
            translation_efficiency: crate::translator::conversion_efficiency(&coupler),
            detector_683: DetectorSpec::new(
                self.detector_683.efficiency,
                self.detector_683.dark_prob,
            )?,
            detector_659: DetectorSpec::new(
                self.detector_659.efficiency,
                self.detector_659.dark_prob,
            )?,
            noise: self.noise_spec()?,
            split_683: 0.5,
            split_659: 0.5,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical serialized form (fixed field order) used for provenance
    /// hashing: identical resolved configs produce identical strings.
    pub fn canonical_string(&self, resolved_seed: u64) -> String {
        let mut c = self.clone();
        c.seed = Some(resolved_seed);
        toml::to_string(&c).expect("scenario serializes")
    }
}

/// Round-trips a scenario through its serialized form; used to check that
/// parse -> serialize -> parse is semantically the identity.
pub fn reparse(cfg: &ScenarioConfig) -> Result<ScenarioConfig> {
    let text = toml::to_string(cfg).map_err(cfg_err)?;
    let mut back: ScenarioConfig = toml::from_str(&text).map_err(cfg_err)?;
    back.base_dir = cfg.base_dir.clone();
    Ok(back)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario_text() -> &'static str {
        r#"
seed = 42

[source]
epsilon = 0.11
schmidt_modes = 10
herald_efficiency = 0.12
herald_dark_prob = 1e-5
signal_delivery = 0.31
rep_rate_hz = 76e6

[translator]
efficiency = 0.286

[detector_683]
efficiency = 0.5
dark_prob = 1e-5

[detector_659]
efficiency = 0.5
dark_prob = 1e-5

[noise]
mean_683 = 0.0034
mean_659 = 0.0035

[run]
n_runs = 30
pulses_per_run = 1000000
"#
    }

    #[test]
    fn parses_and_validates() {
        let cfg: ScenarioConfig = toml::from_str(scenario_text()).unwrap();
        cfg.validate().unwrap();
        let train = cfg.train_config().unwrap();
        assert!((train.translation_efficiency - 0.286).abs() < 1e-12);
        assert_eq!(cfg.seed, Some(42));
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = scenario_text().replace("epsilon = 0.11", "epsilon = 0.11\nbogus_key = 1");
        let err = toml::from_str::<ScenarioConfig>(&text).unwrap_err();
        assert!(err.to_string().contains("bogus_key"));
    }

    #[test]
    fn efficiency_and_physical_conflict() {
        let text = scenario_text().replace(
            "efficiency = 0.286",
            "efficiency = 0.286\nfiber = \"x.toml\"\npump1_wavelength_nm = 808.0\npump1_power_mw = 20.0\npump2_wavelength_nm = 845.0\npump2_power_mw = 30.0\ninput_wavelength_nm = 683.0",
        );
        let cfg: ScenarioConfig = toml::from_str(&text).unwrap();
        assert!(matches!(cfg.validate(), Err(SimError::Config(_))));
    }

    #[test]
    fn round_trip_semantically_identical() {
        let cfg: ScenarioConfig = toml::from_str(scenario_text()).unwrap();
        let back = reparse(&cfg).unwrap();
        assert_eq!(cfg, back);
        // key order independence: canonical strings match
        assert_eq!(cfg.canonical_string(42), back.canonical_string(42));
    }
}
