//! Versioned scenario documents.
//!
//! A scenario is a single JSON object. Every key carries its unit, unknown
//! keys are rejected and any missing key takes the bench value listed in
//! [`ScenarioConfig::default`]. Parsing, serializing and parsing again gives
//! back the same document.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::components::{
    calibrate_coupler, read_anchors_csv, CalibrationAnchor, CalibrationOptions, ChipLayout, CouplerModel,
    DetectorModel, Filter, SpdcSource,
};
use crate::error::{Error, Result};
use crate::link::{DistanceCriterion, LinkParams};
use crate::montecarlo::{PairLaw, Scenario};
use crate::statistics::HeraldModel;
use crate::units::{Lineshape, SpectralMode};

pub const SCHEMA_VERSION: u32 = 1;

/// Upper bound on the number of points a [`Range`] may expand to.
const MAX_RANGE_POINTS: usize = 1_000_000;

/// Inclusive arithmetic grid `start, start + step, …` up to `stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Range {
    pub const fn new(start: f64, stop: f64, step: f64) -> Self {
        Range { start, stop, step }
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        let Range { start, stop, step } = *self;
        if !(start.is_finite() && stop.is_finite() && step.is_finite()) || step <= 0.0 || stop < start {
            return Err(Error::Configuration(format!(
                "range needs finite start <= stop and a positive step, got {start}..{stop} by {step}"
            )));
        }
        // Tolerate stop landing a rounding error short of a grid point.
        let span = (stop - start) / step;
        let n = (span + 1e-9 * span.max(1.0)).floor() as usize + 1;
        if n > MAX_RANGE_POINTS {
            return Err(Error::Configuration(format!(
                "range expands to {n} points, limit {MAX_RANGE_POINTS}"
            )));
        }
        Ok((0..n).map(|i| start + i as f64 * step).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PumpConfig {
    pub repetition_rate_hz: f64,
    pub duration_ps: f64,
    /// Rate of the detector gates, a random subset of the pump pulses.
    pub gate_rate_hz: f64,
}

impl Default for PumpConfig {
    fn default() -> Self {
        PumpConfig {
            repetition_rate_hz: 76e6,
            duration_ps: 2.5,
            gate_rate_hz: 600e3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub center_wavelength_nm: f64,
    pub fwhm_bandwidth_pm: f64,
    pub lineshape: Lineshape,
    /// Mean pairs per pulse per mW of pump.
    pub pairs_per_mw: f64,
    pub pump_power_mw: f64,
    #[serde(default)]
    pub pair_statistics: PairLaw,
}

impl SourceConfig {
    fn from_source(source: &SpdcSource, law: PairLaw) -> Self {
        SourceConfig {
            center_wavelength_nm: source.spectrum.center_wavelength_nm,
            fwhm_bandwidth_pm: source.spectrum.fwhm_bandwidth_pm,
            lineshape: source.spectrum.lineshape,
            pairs_per_mw: source.pairs_per_mw,
            pump_power_mw: source.pump_power_mw,
            pair_statistics: law,
        }
    }

    pub fn source(&self) -> SpdcSource {
        SpdcSource {
            spectrum: SpectralMode {
                center_wavelength_nm: self.center_wavelength_nm,
                fwhm_bandwidth_pm: self.fwhm_bandwidth_pm,
                lineshape: self.lineshape,
            },
            pairs_per_mw: self.pairs_per_mw,
            pump_power_mw: self.pump_power_mw,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourcesConfig {
    pub external: SourceConfig,
    pub chip: SourceConfig,
}

impl Default for SourcesConfig {
    fn default() -> Self {
        let bench = Scenario::bench();
        SourcesConfig {
            external: SourceConfig::from_source(&bench.external_source, bench.external_law),
            chip: SourceConfig::from_source(&bench.chip_source, bench.chip_law),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FiltersConfig {
    /// Signal filter on the external source, toward chip port 1.
    pub external_signal: Filter,
    /// Idler filter on the external source, toward the monitor.
    pub external_idler: Filter,
    pub output_a: Filter,
    pub output_b: Filter,
    pub output_c: Filter,
}

impl Default for FiltersConfig {
    fn default() -> Self {
        let bench = Scenario::bench();
        FiltersConfig {
            external_signal: bench.external_signal_filter,
            external_idler: bench.external_idler_filter,
            output_a: bench.output_filter_a,
            output_b: bench.output_filter_b,
            output_c: bench.output_filter_c,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossesConfig {
    /// Fibre between the external source and chip port 1.
    pub external_fibre_db: f64,
    pub monitor_db: f64,
}

/// Measured points a coupler model is fitted to, inline or from a CSV file
/// with columns `voltage_V,cross_ratio`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationConfig {
    pub anchors: Vec<CalibrationAnchor>,
    /// Resolved against the directory of the configuration file.
    pub anchors_csv: Option<PathBuf>,
    /// Fit `κL` as well as the detuning slope.
    pub fit_coupling: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CouplerConfig {
    pub voltage_v: f64,
    pub model: CouplerModel,
    /// When present the model is replaced by a fit to these anchors.
    pub calibration: Option<CalibrationConfig>,
}

impl Default for CouplerConfig {
    fn default() -> Self {
        CouplerConfig {
            voltage_v: 30.0,
            model: CouplerModel::default(),
            calibration: None,
        }
    }
}

impl CouplerConfig {
    /// The coupler model, calibrated if anchors are given.
    pub fn resolve(&self, base_dir: Option<&Path>) -> Result<CouplerModel> {
        let Some(cal) = &self.calibration else {
            return Ok(self.model);
        };
        let anchors = match (&cal.anchors_csv, cal.anchors.is_empty()) {
            (Some(_), false) => {
                return Err(Error::Configuration(
                    "calibration takes either inline anchors or anchors_csv, not both".into(),
                ))
            }
            (Some(path), true) => {
                let path = match base_dir {
                    Some(dir) if path.is_relative() => dir.join(path),
                    _ => path.clone(),
                };
                let file = File::open(&path).map_err(|e| io_error(&path, e))?;
                read_anchors_csv(file)?
            }
            (None, _) => cal.anchors.clone(),
        };
        let options = CalibrationOptions {
            fit_coupling: cal.fit_coupling,
            interaction_length_mm: self.model.interaction_length_mm,
        };
        Ok(calibrate_coupler(&anchors, options)?.model)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChipConfig {
    pub layout: ChipLayout,
    pub c1: CouplerConfig,
    pub c2: CouplerConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorsConfig {
    pub a: DetectorModel,
    pub b: DetectorModel,
    pub c: DetectorModel,
    /// `null` removes the monitor detector.
    pub monitor: Option<DetectorModel>,
}

impl Default for DetectorsConfig {
    fn default() -> Self {
        let d = DetectorModel::bench_ingaas();
        DetectorsConfig {
            a: d,
            b: d,
            c: d,
            monitor: Some(d),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HomConfig {
    pub delay_mm: f64,
    /// `null` takes the coherence time of the A/B output filters.
    pub dip_fwhm_ps: Option<f64>,
    /// Truncation of the pair-number laws.
    pub n_max: usize,
    pub positions_mm: Range,
}

impl Default for HomConfig {
    fn default() -> Self {
        HomConfig {
            delay_mm: 0.0,
            dip_fwhm_ps: None,
            n_max: Scenario::bench().n_max,
            positions_mm: Range::new(-15.0, 15.0, 0.5),
        }
    }
}

/// Herald applied to the chip arm of a visibility map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeraldChoice {
    /// No conditioning.
    None,
    VanishingEfficiency,
    Ideal,
    Model(HeraldModel),
}

impl HeraldChoice {
    pub fn model(self) -> Option<HeraldModel> {
        match self {
            HeraldChoice::None => None,
            HeraldChoice::VanishingEfficiency => Some(HeraldModel::vanishing_efficiency()),
            HeraldChoice::Ideal => Some(HeraldModel::ideal()),
            HeraldChoice::Model(m) => Some(m),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VisibilityMapConfig {
    /// Mean pair number of the external source.
    pub n_a: Range,
    /// Mean pair number of the chip source.
    pub n_b: Range,
    pub herald: HeraldChoice,
}

impl Default for VisibilityMapConfig {
    fn default() -> Self {
        VisibilityMapConfig {
            n_a: Range::new(0.005, 0.1, 0.005),
            n_b: Range::new(0.005, 0.1, 0.005),
            herald: HeraldChoice::VanishingEfficiency,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkConfig {
    pub fiber_loss_db_per_km: f64,
    pub detector: DetectorModel,
    pub pulse_rate_hz: f64,
    pub mean_photon_per_pulse: f64,
    pub teleport_fidelity: f64,
    pub local_pair_mean: f64,
    /// Measured chip insertion loss used by the folded relay; `null` takes
    /// the loss computed from `chip.layout`.
    pub chip_insertion_loss_db: Option<f64>,
    pub criterion: DistanceCriterion,
    pub distances_km: Range,
}

impl Default for LinkConfig {
    fn default() -> Self {
        let p = LinkParams::default();
        LinkConfig {
            fiber_loss_db_per_km: p.fiber_loss_db_per_km,
            detector: p.detector,
            pulse_rate_hz: p.pulse_rate_hz,
            mean_photon_per_pulse: p.mean_photon_per_pulse,
            teleport_fidelity: p.teleport_fidelity,
            local_pair_mean: p.local_pair_mean,
            chip_insertion_loss_db: p.chip.insertion_loss_override_db,
            criterion: DistanceCriterion::SnrUnity,
            distances_km: Range::new(0.0, 500.0, 2.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CouplerCurveConfig {
    pub voltages_v: Range,
}

impl Default for CouplerCurveConfig {
    fn default() -> Self {
        CouplerCurveConfig {
            voltages_v: Range::new(0.0, 60.0, 0.5),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumConfig {
    pub wavelengths_nm: Range,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig {
            wavelengths_nm: Range::new(1450.0, 1620.0, 0.5),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    /// Free text kept with the document; JSON has no comments.
    pub notes: BTreeMap<String, String>,
    pub pump: PumpConfig,
    pub sources: SourcesConfig,
    pub filters: FiltersConfig,
    pub losses: LossesConfig,
    pub chip: ChipConfig,
    pub detectors: DetectorsConfig,
    pub hom: HomConfig,
    pub visibility_map: VisibilityMapConfig,
    pub link: LinkConfig,
    pub coupler_curve: CouplerCurveConfig,
    pub spectrum: SpectrumConfig,
    /// Directory relative paths are resolved against; not serialized.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl Default for ScenarioConfig {
    /// The bench apparatus and the link parameter set.
    fn default() -> Self {
        ScenarioConfig {
            schema_version: SCHEMA_VERSION,
            notes: BTreeMap::new(),
            pump: PumpConfig::default(),
            sources: SourcesConfig::default(),
            filters: FiltersConfig::default(),
            losses: LossesConfig::default(),
            chip: ChipConfig::default(),
            detectors: DetectorsConfig::default(),
            hom: HomConfig::default(),
            visibility_map: VisibilityMapConfig::default(),
            link: LinkConfig::default(),
            coupler_curve: CouplerCurveConfig::default(),
            spectrum: SpectrumConfig::default(),
            base_dir: None,
        }
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let malformed = |e: serde_json::Error| Error::Configuration(format!("malformed scenario: {e}"));
        let value: serde_json::Value = serde_json::from_str(text).map_err(malformed)?;
        // Every other key may be omitted, the version may not.
        if value.get("schema_version").is_none() {
            return Err(Error::Configuration("scenario lacks schema_version".into()));
        }
        let config: ScenarioConfig = serde_json::from_value(value).map_err(malformed)?;
        if config.schema_version != SCHEMA_VERSION {
            return Err(Error::Configuration(format!(
                "unsupported schema_version {}, expected {SCHEMA_VERSION}",
                config.schema_version
            )));
        }
        Ok(config)
    }

    /// Reads a document; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        let mut config = Self::from_json(&text)?;
        config.base_dir = path.parent().map(Path::to_path_buf);
        Ok(config)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Configuration(e.to_string()))
    }

    pub fn coupler_c1(&self) -> Result<CouplerModel> {
        self.chip.c1.resolve(self.base_dir.as_deref())
    }

    pub fn coupler_c2(&self) -> Result<CouplerModel> {
        self.chip.c2.resolve(self.base_dir.as_deref())
    }

    /// The simulated apparatus, validated.
    pub fn scenario(&self) -> Result<Scenario> {
        let s = Scenario {
            repetition_rate_hz: self.pump.repetition_rate_hz,
            gate_rate_hz: self.pump.gate_rate_hz,
            pump_duration_ps: self.pump.duration_ps,
            external_source: self.sources.external.source(),
            external_law: self.sources.external.pair_statistics,
            chip_source: self.sources.chip.source(),
            chip_law: self.sources.chip.pair_statistics,
            external_signal_filter: self.filters.external_signal,
            external_idler_filter: self.filters.external_idler,
            external_fibre_loss_db: self.losses.external_fibre_db,
            monitor_loss_db: self.losses.monitor_db,
            layout: self.chip.layout.clone(),
            coupler_c1: self.coupler_c1()?,
            coupler_c2: self.coupler_c2()?,
            c1_voltage_v: self.chip.c1.voltage_v,
            c2_voltage_v: self.chip.c2.voltage_v,
            output_filter_a: self.filters.output_a,
            output_filter_b: self.filters.output_b,
            output_filter_c: self.filters.output_c,
            detector_a: self.detectors.a,
            detector_b: self.detectors.b,
            detector_c: self.detectors.c,
            monitor: self.detectors.monitor,
            delay_mm: self.hom.delay_mm,
            dip_fwhm_ps: self.hom.dip_fwhm_ps,
            n_max: self.hom.n_max,
        };
        s.validate()?;
        Ok(s)
    }

    /// Link parameters, validated. The folded relay uses `chip.layout`.
    pub fn link_params(&self) -> Result<LinkParams> {
        let mut chip = self.chip.layout.clone();
        if self.link.chip_insertion_loss_db.is_some() {
            chip.insertion_loss_override_db = self.link.chip_insertion_loss_db;
        }
        let p = LinkParams {
            fiber_loss_db_per_km: self.link.fiber_loss_db_per_km,
            detector: self.link.detector,
            pulse_rate_hz: self.link.pulse_rate_hz,
            mean_photon_per_pulse: self.link.mean_photon_per_pulse,
            teleport_fidelity: self.link.teleport_fidelity,
            local_pair_mean: self.link.local_pair_mean,
            chip,
        };
        p.validate()?;
        Ok(p)
    }
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

/// Names accepted by [`preset`].
pub const PRESET_NAMES: [&str; 5] = ["paper-fig2", "paper-fig3", "paper-fig4", "paper-fig5", "paper-fig6"];

/// Raw text of a bundled preset.
pub fn preset_source(name: &str) -> Option<&'static str> {
    Some(match name {
        "paper-fig2" => include_str!("../presets/paper-fig2.json"),
        "paper-fig3" => include_str!("../presets/paper-fig3.json"),
        "paper-fig4" => include_str!("../presets/paper-fig4.json"),
        "paper-fig5" => include_str!("../presets/paper-fig5.json"),
        "paper-fig6" => include_str!("../presets/paper-fig6.json"),
        _ => return None,
    })
}

pub fn preset(name: &str) -> Result<ScenarioConfig> {
    let text = preset_source(name).ok_or_else(|| {
        Error::Configuration(format!(
            "unknown preset {name:?}, expected one of {}",
            PRESET_NAMES.join(", ")
        ))
    })?;
    ScenarioConfig::from_json(text)
}
