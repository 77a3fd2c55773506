use serde::{Deserialize, Serialize};

use crate::components::{ChipLayout, ChipNode, CouplerModel, DetectorModel, Filter, SpdcSource};
use crate::error::{Error, Result};
use crate::interference::{gaussian, v_statistics, v_timing, VisibilityBreakdown};
use crate::statistics::{self, herald_condition, HeraldModel, PhotonNumberDistribution, DEFAULT_N_MAX};
use crate::units::{delay_to_path, Decibels, Picoseconds};

use super::accidentals::DarkProbabilities;

/// Pair-number law of a source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairLaw {
    #[default]
    Thermal,
    Poisson,
    /// Exactly this many pairs every pulse, whatever the pump power.
    Fock(usize),
}

impl PairLaw {
    pub fn distribution(self, mean: f64, n_max: usize) -> Result<PhotonNumberDistribution> {
        match self {
            PairLaw::Thermal => statistics::thermal(mean, n_max),
            PairLaw::Poisson => statistics::poisson(mean, n_max),
            PairLaw::Fock(n) => Ok(PhotonNumberDistribution::fock(n)),
        }
    }
}

/// Everything needed to simulate the coalescence experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub repetition_rate_hz: f64,
    /// Average rate of detector gates, drawn at random among laser pulses.
    pub gate_rate_hz: f64,
    pub pump_duration_ps: f64,
    pub external_source: SpdcSource,
    pub external_law: PairLaw,
    pub chip_source: SpdcSource,
    pub chip_law: PairLaw,
    /// Filter on the external photon sent to port 1.
    pub external_signal_filter: Filter,
    /// Filter on the external partner photon sent to the monitor detector.
    pub external_idler_filter: Filter,
    pub external_fibre_loss_db: f64,
    pub monitor_loss_db: f64,
    pub layout: ChipLayout,
    pub coupler_c1: CouplerModel,
    pub coupler_c2: CouplerModel,
    pub c1_voltage_v: f64,
    pub c2_voltage_v: f64,
    pub output_filter_a: Filter,
    pub output_filter_b: Filter,
    pub output_filter_c: Filter,
    pub detector_a: DetectorModel,
    pub detector_b: DetectorModel,
    pub detector_c: DetectorModel,
    pub monitor: Option<DetectorModel>,
    /// Path-length difference between the two photons reaching C₂.
    pub delay_mm: f64,
    /// Temporal FWHM of the dip; defaults to the coherence time set by the
    /// A/B output filters.
    pub dip_fwhm_ps: Option<f64>,
    pub n_max: usize,
}

fn filter(center_wavelength_nm: f64, fwhm_bandwidth_pm: f64) -> Filter {
    Filter {
        center_wavelength_nm,
        fwhm_bandwidth_pm,
        insertion_loss_db: 0.0,
    }
}

impl Scenario {
    /// Bench configuration: 1.5 mW on the external source, 7 mW on the chip,
    /// 200 pm filters at 1530 nm, 800 pm filters at 1534 nm, both couplers at
    /// 30 V, InGaAs detectors gated at 600 kHz.
    pub fn bench() -> Self {
        let signal = filter(1530.0, 200.0);
        let idler = filter(1534.0, 800.0);
        Scenario {
            repetition_rate_hz: 76e6,
            gate_rate_hz: 600e3,
            pump_duration_ps: 2.5,
            external_source: SpdcSource::degenerate_1532(0.05 / 1.5, 1.5),
            external_law: PairLaw::Thermal,
            chip_source: SpdcSource::degenerate_1532(0.02 / 7.0, 7.0),
            chip_law: PairLaw::Thermal,
            external_signal_filter: signal,
            external_idler_filter: idler,
            external_fibre_loss_db: 0.0,
            monitor_loss_db: 0.0,
            layout: ChipLayout::default(),
            coupler_c1: CouplerModel::default(),
            coupler_c2: CouplerModel::default(),
            c1_voltage_v: 30.0,
            c2_voltage_v: 30.0,
            output_filter_a: signal,
            output_filter_b: signal,
            output_filter_c: idler,
            detector_a: DetectorModel::bench_ingaas(),
            detector_b: DetectorModel::bench_ingaas(),
            detector_c: DetectorModel::bench_ingaas(),
            monitor: Some(DetectorModel::bench_ingaas()),
            delay_mm: 0.0,
            dip_fwhm_ps: None,
            n_max: DEFAULT_N_MAX,
        }
    }

    /// Lossless chip, ideal detectors, every pulse gated and no monitor;
    /// mean pair numbers `n_a` (external) and `n_b` (chip).
    pub fn idealized(n_a: f64, n_b: f64) -> Self {
        let mut s = Scenario::bench();
        s.external_source.pairs_per_mw = n_a / s.external_source.pump_power_mw;
        s.chip_source.pairs_per_mw = n_b / s.chip_source.pump_power_mw;
        s.layout = ChipLayout::lossless();
        s.detector_a = DetectorModel::ideal();
        s.detector_b = DetectorModel::ideal();
        s.detector_c = DetectorModel::ideal();
        s.monitor = None;
        s.gate_rate_hz = s.repetition_rate_hz;
        s
    }

    pub fn validate(&self) -> Result<()> {
        self.channels().map(|_| ())
    }

    /// Reduces the scenario to per-photon probabilities.
    pub fn channels(&self) -> Result<Channels> {
        let cfg = |msg: String| Error::Configuration(msg);
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(cfg(format!("{name} must be positive, got {v}")))
            }
        };
        let loss = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(Decibels(v).transmission())
            } else {
                Err(cfg(format!("{name} must be a non-negative loss, got {v} dB")))
            }
        };
        positive("repetition rate", self.repetition_rate_hz)?;
        positive("gate rate", self.gate_rate_hz)?;
        if self.gate_rate_hz > self.repetition_rate_hz {
            return Err(cfg(format!(
                "gate rate {} Hz exceeds the repetition rate {} Hz",
                self.gate_rate_hz, self.repetition_rate_hz
            )));
        }
        if !(self.pump_duration_ps.is_finite() && self.pump_duration_ps >= 0.0) {
            return Err(cfg(format!(
                "pump duration must be non-negative, got {}",
                self.pump_duration_ps
            )));
        }
        if !self.delay_mm.is_finite() {
            return Err(cfg("delay must be finite".into()));
        }
        if self.n_max < 2 {
            return Err(cfg(format!("n_max must be at least 2, got {}", self.n_max)));
        }
        let wrap = |e: Error| match e {
            Error::Domain(m) => Error::Configuration(m),
            other => other,
        };
        self.external_source.validate().map_err(wrap)?;
        self.chip_source.validate().map_err(wrap)?;
        for f in [
            &self.external_signal_filter,
            &self.external_idler_filter,
            &self.output_filter_a,
            &self.output_filter_b,
            &self.output_filter_c,
        ] {
            f.validate().map_err(wrap)?;
        }
        for d in [&self.detector_a, &self.detector_b, &self.detector_c]
            .into_iter()
            .chain(self.monitor.as_ref())
        {
            d.validate().map_err(wrap)?;
        }
        self.layout.validate()?;
        for c in [&self.coupler_c1, &self.coupler_c2] {
            if !(c.coupling_strength_times_length.is_finite() && c.detuning_per_volt.is_finite()) {
                return Err(cfg("coupler parameters must be finite".into()));
            }
        }

        // Pair photons leave C₁ on either waveguide; the wavelength filters
        // are what keeps misrouted photons off the wrong detector.
        let signal = self.output_filter_a.center_wavelength_nm;
        let idler = self.output_filter_c.center_wavelength_nm;
        if self.output_filter_b.transmission_at(signal) == 0.0
            || self.external_signal_filter.transmission_at(signal) == 0.0
        {
            return Err(cfg(format!(
                "the external and B filters must pass the {signal} nm photons selected at A"
            )));
        }
        if self.output_filter_c.transmission_at(signal) > 0.0
            || self.output_filter_a.transmission_at(idler) > 0.0
            || self.output_filter_b.transmission_at(idler) > 0.0
        {
            return Err(cfg("the A/B and C output filters overlap".into()));
        }

        let t1 = self.coupler_c1.cross_ratio(self.c1_voltage_v);
        let external_pairs = self
            .external_law
            .distribution(self.external_source.mean_pairs(), self.n_max)
            .map_err(wrap)?;
        let chip_pairs = self
            .chip_law
            .distribution(self.chip_source.mean_pairs(), self.n_max)
            .map_err(wrap)?;
        let tau_c = self.output_filter_a.mode().coherence_time().map_err(wrap)?;
        let dip_fwhm_ps = self.dip_fwhm_ps.unwrap_or(tau_c.0);
        positive("dip width", dip_fwhm_ps)?;

        Ok(Channels {
            gate_probability: self.gate_rate_hz / self.repetition_rate_hz,
            external_pairs,
            chip_pairs,
            external_to_c2: loss("external fibre loss", self.external_fibre_loss_db)?
                * self.external_signal_filter.transmission()
                * self.layout.path_transmission(ChipNode::Port1, ChipNode::C2)?,
            chip_to_c2: t1 * self.layout.path_transmission(ChipNode::Spdc, ChipNode::C2)?,
            arrive_c: (1.0 - t1)
                * self.layout.path_transmission(ChipNode::Spdc, ChipNode::PortC)?
                * self.output_filter_c.transmission(),
            eta_c: self.detector_c.efficiency,
            dark_c: self.detector_c.dark_prob_per_gate(),
            c2_cross: self.coupler_c2.cross_ratio(self.c2_voltage_v),
            arrive_a: self.layout.path_transmission(ChipNode::C2, ChipNode::PortA)?
                * self.output_filter_a.transmission(),
            eta_a: self.detector_a.efficiency,
            dark_a: self.detector_a.dark_prob_per_gate(),
            arrive_b: self.layout.path_transmission(ChipNode::C2, ChipNode::PortB)?
                * self.output_filter_b.transmission(),
            eta_b: self.detector_b.efficiency,
            dark_b: self.detector_b.dark_prob_per_gate(),
            monitor: match &self.monitor {
                Some(m) => Some(MonitorChannel {
                    arrive: self.external_idler_filter.transmission() * loss("monitor loss", self.monitor_loss_db)?,
                    efficiency: m.efficiency,
                    dark: m.dark_prob_per_gate(),
                }),
                None => None,
            },
            v_timing: v_timing(Picoseconds(self.pump_duration_ps), tau_c).map_err(wrap)?,
            dip_fwhm_mm: delay_to_path(Picoseconds(dip_fwhm_ps)).0,
        })
    }
}

/// Monitor arm on the external source's partner photons.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorChannel {
    pub arrive: f64,
    pub efficiency: f64,
    pub dark: f64,
}

/// Per-photon probabilities derived from a [`Scenario`].
#[derive(Debug, Clone, PartialEq)]
pub struct Channels {
    pub gate_probability: f64,
    pub external_pairs: PhotonNumberDistribution,
    pub chip_pairs: PhotonNumberDistribution,
    /// External photon reaching the port-1 input of C₂.
    pub external_to_c2: f64,
    /// Chip photon leaving C₁ toward C₂ and reaching it.
    pub chip_to_c2: f64,
    /// Chip partner photon leaving C₁ toward port C and reaching D_c.
    pub arrive_c: f64,
    pub eta_c: f64,
    pub dark_c: f64,
    /// Cross ratio of C₂; a port-1 photon exits at A on the bar path.
    pub c2_cross: f64,
    pub arrive_a: f64,
    pub eta_a: f64,
    pub dark_a: f64,
    pub arrive_b: f64,
    pub eta_b: f64,
    pub dark_b: f64,
    pub monitor: Option<MonitorChannel>,
    pub v_timing: f64,
    pub dip_fwhm_mm: f64,
}

impl Channels {
    /// Temporal-mode overlap of the two photons at C₂ for a path difference.
    pub fn overlap_at(&self, delay_mm: f64) -> f64 {
        self.v_timing * gaussian(delay_mm, 0.0, self.dip_fwhm_mm)
    }

    pub fn darks(&self) -> DarkProbabilities {
        DarkProbabilities {
            a: self.dark_a,
            b: self.dark_b,
            c: self.dark_c,
        }
    }

    /// Herald seen by the chip photon headed for C₂.
    pub fn herald(&self) -> Result<HeraldModel> {
        HeraldModel::new(self.arrive_c * self.eta_c, self.dark_c)
    }

    /// Photon-number laws at the two inputs of C₂, the chip arm conditioned
    /// on a click at D_c.
    pub fn coupler_inputs(&self) -> Result<(PhotonNumberDistribution, PhotonNumberDistribution)> {
        let a = self.external_pairs.thinned(self.external_to_c2)?;
        let b = herald_condition(&self.chip_pairs, &self.herald()?)?.thinned(self.chip_to_c2)?;
        Ok((a, b))
    }

    /// Closed-form visibility prediction for this apparatus.
    pub fn predicted_visibility(&self) -> Result<VisibilityBreakdown> {
        let (a, b) = self.coupler_inputs()?;
        Ok(VisibilityBreakdown::new(v_statistics(&a, &b)?, self.v_timing))
    }
}
