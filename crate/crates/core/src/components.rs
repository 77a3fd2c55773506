//! Parametric models of the optical elements: the SPDC pair source, the
//! electro-optic directional couplers, band-pass filters, gated detectors and
//! the chip's port-to-port layout.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::statistics::{self, PhotonNumberDistribution};
use crate::units::{Decibels, Lineshape, SpectralMode, FOUR_LN_2};

/// Half-width of `sinc²(x)` at half maximum, i.e. the root of `sinc²(x) = 1/2`.
const SINC2_HALF_WIDTH: f64 = 1.391_557_378_251_51;

fn check_probability(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Configuration(format!("{name} must lie in [0, 1], got {v}")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Source
// ---------------------------------------------------------------------------

/// A pulsed SPDC photon-pair source with brightness linear in pump power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpdcSource {
    pub spectrum: SpectralMode,
    /// Mean pairs per pulse per mW of pump.
    pub pairs_per_mw: f64,
    pub pump_power_mw: f64,
}

impl SpdcSource {
    /// Degenerate emission around 1532 nm with an 80 nm sinc² envelope.
    pub fn degenerate_1532(pairs_per_mw: f64, pump_power_mw: f64) -> Self {
        SpdcSource {
            spectrum: SpectralMode {
                center_wavelength_nm: 1532.0,
                fwhm_bandwidth_pm: 80_000.0,
                lineshape: Lineshape::SincSquared,
            },
            pairs_per_mw,
            pump_power_mw,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spectrum.validate()?;
        if !(self.pairs_per_mw.is_finite() && self.pairs_per_mw >= 0.0) {
            return Err(Error::Configuration(format!(
                "pairs per mW must be non-negative, got {}",
                self.pairs_per_mw
            )));
        }
        if !(self.pump_power_mw.is_finite() && self.pump_power_mw >= 0.0) {
            return Err(Error::Configuration(format!(
                "pump power must be non-negative, got {}",
                self.pump_power_mw
            )));
        }
        Ok(())
    }

    /// Mean pairs per pulse, `N = pairs_per_mw · pump_power`.
    pub fn mean_pairs(&self) -> f64 {
        self.pairs_per_mw * self.pump_power_mw
    }

    /// Thermal pair-number law at this source's mean.
    pub fn distribution(&self, n_max: usize) -> Result<PhotonNumberDistribution> {
        statistics::thermal(self.mean_pairs(), n_max)
    }

    /// Fraction of the emitted spectrum falling inside a filter's pass band.
    pub fn band_fraction(&self, filter: &Filter) -> f64 {
        let lo = filter.center_wavelength_nm - filter.fwhm_bandwidth_pm * 1e-3 / 2.0;
        let hi = filter.center_wavelength_nm + filter.fwhm_bandwidth_pm * 1e-3 / 2.0;
        let inside = simpson(|l| spdc_spectral_density(self, l), lo, hi, 2000);
        inside / self.envelope_area_nm()
    }

    /// Integral of the unit-peak envelope over all wavelengths, in nm.
    fn envelope_area_nm(&self) -> f64 {
        let fwhm_nm = self.spectrum.fwhm_bandwidth_pm * 1e-3;
        match self.spectrum.lineshape {
            Lineshape::Gaussian => fwhm_nm * (std::f64::consts::PI / FOUR_LN_2).sqrt(),
            Lineshape::SincSquared => {
                let scale = 2.0 * SINC2_HALF_WIDTH / fwhm_nm;
                std::f64::consts::PI / scale
            }
        }
    }
}

/// Unit-peak spectral envelope of the source at `wavelength_nm`.
pub fn spdc_spectral_density(source: &SpdcSource, wavelength_nm: f64) -> f64 {
    let fwhm_nm = source.spectrum.fwhm_bandwidth_pm * 1e-3;
    let offset = wavelength_nm - source.spectrum.center_wavelength_nm;
    match source.spectrum.lineshape {
        Lineshape::Gaussian => (-FOUR_LN_2 * (offset / fwhm_nm).powi(2)).exp(),
        Lineshape::SincSquared => {
            let x = 2.0 * SINC2_HALF_WIDTH * offset / fwhm_nm;
            if x == 0.0 {
                1.0
            } else {
                (x.sin() / x).powi(2)
            }
        }
    }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + i as f64 * h);
    }
    sum * h / 3.0
}

// ---------------------------------------------------------------------------
// Filter
// ---------------------------------------------------------------------------

/// Ideal rectangular band-pass filter with a flat insertion loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Filter {
    pub center_wavelength_nm: f64,
    pub fwhm_bandwidth_pm: f64,
    #[serde(default)]
    pub insertion_loss_db: f64,
}

impl Filter {
    pub fn validate(&self) -> Result<()> {
        self.mode().validate()?;
        if !(self.insertion_loss_db.is_finite() && self.insertion_loss_db >= 0.0) {
            return Err(Error::Configuration(format!(
                "filter insertion loss must be non-negative, got {}",
                self.insertion_loss_db
            )));
        }
        Ok(())
    }

    /// In-band power transmission.
    pub fn transmission(&self) -> f64 {
        Decibels(self.insertion_loss_db).transmission()
    }

    /// Transmission at a given wavelength.
    pub fn transmission_at(&self, wavelength_nm: f64) -> f64 {
        let half = self.fwhm_bandwidth_pm * 1e-3 / 2.0;
        if (wavelength_nm - self.center_wavelength_nm).abs() <= half {
            self.transmission()
        } else {
            0.0
        }
    }

    /// Spectral mode of photons leaving the filter. Coherence times use the
    /// gaussian time-bandwidth convention.
    pub fn mode(&self) -> SpectralMode {
        SpectralMode {
            center_wavelength_nm: self.center_wavelength_nm,
            fwhm_bandwidth_pm: self.fwhm_bandwidth_pm,
            lineshape: Lineshape::Gaussian,
        }
    }
}

// ---------------------------------------------------------------------------
// Coupler
// ---------------------------------------------------------------------------

/// Two-waveguide coupled-mode directional coupler with electro-optic
/// detuning linear in the applied voltage.
///
/// With `k = κ·L` and `δ·L = γ·V`, the cross-port power fraction is
/// `k²/(k²+(γV)²) · sin²(√(k²+(γV)²))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplerModel {
    /// `κ·L`, radians.
    #[serde(rename = "coupling_strength_times_length_rad")]
    pub coupling_strength_times_length: f64,
    /// `γ`, radians of `δ·L` per volt.
    #[serde(rename = "detuning_rad_per_v")]
    pub detuning_per_volt: f64,
    pub interaction_length_mm: f64,
}

impl Default for CouplerModel {
    /// Full transfer at zero volts over 9 mm, balanced at 30 V.
    fn default() -> Self {
        CouplerModel {
            coupling_strength_times_length: FRAC_PI_2,
            detuning_per_volt: 0.041_819_067_411_536,
            interaction_length_mm: 9.0,
        }
    }
}

impl CouplerModel {
    /// Cross-port power fraction at `voltage`.
    pub fn cross_ratio(&self, voltage: f64) -> f64 {
        cross_fraction(self.coupling_strength_times_length, self.detuning_per_volt * voltage)
    }

    /// Bar-port power fraction at `voltage`.
    pub fn bar_ratio(&self, voltage: f64) -> f64 {
        1.0 - self.cross_ratio(voltage)
    }

    /// Ratio `δL/κL` at `voltage`.
    pub fn detuning_ratio(&self, voltage: f64) -> f64 {
        self.detuning_per_volt * voltage / self.coupling_strength_times_length
    }
}

fn cross_fraction(k: f64, dl: f64) -> f64 {
    let s2 = k * k + dl * dl;
    if s2 == 0.0 {
        return 0.0;
    }
    let s = s2.sqrt();
    (k * k / s2 * s.sin().powi(2)).clamp(0.0, 1.0)
}

/// Evaluates the coupler's cross-port fraction at `voltage`.
pub fn coupler_ratio(model: &CouplerModel, voltage: f64) -> f64 {
    model.cross_ratio(voltage)
}

/// A measured `(voltage, cross ratio)` point used for calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationAnchor {
    #[serde(rename = "voltage_V")]
    pub voltage_v: f64,
    pub cross_ratio: f64,
}

impl CalibrationAnchor {
    pub fn new(voltage_v: f64, cross_ratio: f64) -> Self {
        CalibrationAnchor { voltage_v, cross_ratio }
    }
}

/// Default anchors: full transfer at 0 V and 50/50 at 30 V.
pub fn default_anchors() -> Vec<CalibrationAnchor> {
    vec![CalibrationAnchor::new(0.0, 1.0), CalibrationAnchor::new(30.0, 0.5)]
}

/// Reads anchors from CSV with a `voltage_V,cross_ratio` header.
pub fn read_anchors_csv(reader: impl Read) -> Result<Vec<CalibrationAnchor>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "voltage_V" || &headers[1] != "cross_ratio" {
        return Err(Error::Parse(format!(
            "anchor CSV must have header voltage_V,cross_ratio, got {:?}",
            headers.iter().collect::<Vec<_>>()
        )));
    }
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

/// Options for [`calibrate_coupler`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationOptions {
    /// Also fit `κL` instead of pinning it to π/2.
    pub fit_coupling: bool,
    pub interaction_length_mm: f64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions {
            fit_coupling: false,
            interaction_length_mm: 9.0,
        }
    }
}

/// Result of a coupler fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplerCalibration {
    pub model: CouplerModel,
    /// Root-mean-square of `T(V_i) - r_i` over the anchors.
    pub rms_residual: f64,
    /// False when no anchor sits at non-zero voltage, leaving `γ` free.
    pub detuning_constrained: bool,
}

/// Least-squares fit of the coupler model to calibration anchors.
///
/// `γ` is searched on the first tuning lobe (`δL ≤ √3·κL` at the largest
/// anchor voltage), where the cross ratio falls monotonically from `sin²κL`.
pub fn calibrate_coupler(anchors: &[CalibrationAnchor], options: CalibrationOptions) -> Result<CouplerCalibration> {
    if anchors.is_empty() {
        return Err(Error::Calibration("at least one anchor is required".into()));
    }
    for a in anchors {
        if !a.voltage_v.is_finite() || !(0.0..=1.0).contains(&a.cross_ratio) {
            return Err(Error::Calibration(format!(
                "anchor ({} V, {}) is outside the reachable range [0, 1]",
                a.voltage_v, a.cross_ratio
            )));
        }
    }
    let v_max = anchors.iter().map(|a| a.voltage_v.abs()).fold(0.0, f64::max);
    let constrained = v_max > 0.0;

    let fit_gamma = |k: f64| -> (f64, f64) {
        let ssr = |g: f64| -> f64 {
            anchors
                .iter()
                .map(|a| (cross_fraction(k, g * a.voltage_v) - a.cross_ratio).powi(2))
                .sum()
        };
        if !constrained {
            return (0.0, ssr(0.0));
        }
        let g_max = 3f64.sqrt() * k / v_max;
        minimize_scalar(ssr, 0.0, g_max)
    };

    let (k, gamma, ssr) = if options.fit_coupling {
        let (k, _) = minimize_scalar(|k| fit_gamma(k).1, 1e-6, std::f64::consts::PI);
        let (g, s) = fit_gamma(k);
        (k, g, s)
    } else {
        let k = FRAC_PI_2;
        let t0 = cross_fraction(k, 0.0);
        if let Some(a) = anchors.iter().find(|a| a.cross_ratio > t0 + 1e-12) {
            return Err(Error::Calibration(format!(
                "anchor ratio {} exceeds the zero-voltage transfer {t0}",
                a.cross_ratio
            )));
        }
        let (g, s) = fit_gamma(k);
        (k, g, s)
    };

    Ok(CouplerCalibration {
        model: CouplerModel {
            coupling_strength_times_length: k,
            detuning_per_volt: gamma,
            interaction_length_mm: options.interaction_length_mm,
        },
        rms_residual: (ssr / anchors.len() as f64).sqrt(),
        detuning_constrained: constrained,
    })
}

/// Grid scan followed by golden-section refinement on `[lo, hi]`.
fn minimize_scalar(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    const GRID: usize = 2000;
    let step = (hi - lo) / GRID as f64;
    let mut best = (lo, f(lo));
    for i in 1..=GRID {
        let x = lo + i as f64 * step;
        let y = f(x);
        if y < best.1 {
            best = (x, y);
        }
    }
    let mut a = (best.0 - step).max(lo);
    let mut b = (best.0 + step).min(hi);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-15 * (1.0 + a.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    let x = (a + b) / 2.0;
    let y = f(x);
    if y <= best.1 {
        (x, y)
    } else {
        best
    }
}

// ---------------------------------------------------------------------------
// Detector
// ---------------------------------------------------------------------------

/// Gated single-photon avalanche detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorModel {
    pub efficiency: f64,
    pub dark_prob_per_ns: f64,
    pub gate_window_ns: f64,
}

impl DetectorModel {
    /// InGaAs APD used on the bench: 10 % efficiency, 1e-5 dark counts per ns.
    pub fn bench_ingaas() -> Self {
        DetectorModel {
            efficiency: 0.10,
            dark_prob_per_ns: 1e-5,
            gate_window_ns: 1.0,
        }
    }

    /// Detector assumed for the key-rate comparison: 1e-6 dark counts per ns.
    pub fn link_ingaas() -> Self {
        DetectorModel {
            efficiency: 0.10,
            dark_prob_per_ns: 1e-6,
            gate_window_ns: 1.0,
        }
    }

    pub fn ideal() -> Self {
        DetectorModel {
            efficiency: 1.0,
            dark_prob_per_ns: 0.0,
            gate_window_ns: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("detector efficiency", self.efficiency)?;
        check_probability("dark probability per ns", self.dark_prob_per_ns)?;
        if !(self.gate_window_ns.is_finite() && self.gate_window_ns > 0.0) {
            return Err(Error::Configuration(format!(
                "gate window must be positive, got {} ns",
                self.gate_window_ns
            )));
        }
        Ok(())
    }

    /// `1 - (1 - p_ns)^window`.
    pub fn dark_prob_per_gate(&self) -> f64 {
        -(self.gate_window_ns * (-self.dark_prob_per_ns).ln_1p()).exp_m1()
    }

    /// Click probability with `incident` photons in the gate.
    pub fn click_prob(&self, incident: usize) -> f64 {
        let miss = (1.0 - self.efficiency).powi(incident as i32) * (1.0 - self.dark_prob_per_gate());
        1.0 - miss
    }
}

/// `1 - (1-η)ⁿ (1 - p_dark_gate)`.
pub fn detector_click_prob(model: &DetectorModel, incident_photons: usize) -> f64 {
    model.click_prob(incident_photons)
}

// ---------------------------------------------------------------------------
// Chip layout
// ---------------------------------------------------------------------------

/// Elements of the relay chip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChipNode {
    /// Input for Alice's photon.
    Port1,
    /// Pump input.
    Port2,
    Spdc,
    C1,
    C2,
    PortA,
    PortB,
    /// Output of the teleported photon.
    PortC,
}

impl ChipNode {
    pub fn is_input(self) -> bool {
        matches!(self, ChipNode::Port1 | ChipNode::Port2)
    }

    pub fn is_output(self) -> bool {
        matches!(self, ChipNode::PortA | ChipNode::PortB | ChipNode::PortC)
    }
}

impl fmt::Display for ChipNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ChipNode::Port1 => "port1",
            ChipNode::Port2 => "port2",
            ChipNode::Spdc => "spdc",
            ChipNode::C1 => "c1",
            ChipNode::C2 => "c2",
            ChipNode::PortA => "port_a",
            ChipNode::PortB => "port_b",
            ChipNode::PortC => "port_c",
        };
        f.write_str(s)
    }
}

/// Waveguide section between two chip elements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub from: ChipNode,
    pub to: ChipNode,
    pub loss_db: Option<f64>,
}

/// Directed element graph of the relay chip with per-segment losses.
///
/// Fibre-to-chip coupling is charged when a path starts at an input port and
/// chip-to-fibre coupling when it ends at an output port.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChipLayout {
    pub input_coupling_db: Option<f64>,
    pub output_coupling_db: Option<f64>,
    pub segments: Vec<Segment>,
    /// Measured port-1 to port-A insertion loss. When set it is reported
    /// verbatim and every path loss is rescaled to agree with it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub insertion_loss_override_db: Option<f64>,
}

impl Default for ChipLayout {
    /// 3 dB per fibre interface and 2.5 dB of waveguide loss along every
    /// input-to-output path.
    fn default() -> Self {
        use ChipNode::*;
        let seg = |from, to, loss: f64| Segment {
            from,
            to,
            loss_db: Some(loss),
        };
        ChipLayout {
            input_coupling_db: Some(3.0),
            output_coupling_db: Some(3.0),
            segments: vec![
                seg(Port1, C2, 1.25),
                seg(Port2, Spdc, 0.25),
                seg(Spdc, C1, 1.0),
                seg(C1, C2, 0.0),
                seg(C1, PortC, 1.25),
                seg(C2, PortA, 1.25),
                seg(C2, PortB, 1.25),
            ],
            insertion_loss_override_db: None,
        }
    }
}

impl ChipLayout {
    /// Same topology with every loss set to zero.
    pub fn lossless() -> Self {
        let mut layout = ChipLayout {
            input_coupling_db: Some(0.0),
            output_coupling_db: Some(0.0),
            ..ChipLayout::default()
        };
        for s in &mut layout.segments {
            s.loss_db = Some(0.0);
        }
        layout
    }

    fn successors(&self) -> BTreeMap<ChipNode, Vec<&Segment>> {
        let mut map: BTreeMap<ChipNode, Vec<&Segment>> = BTreeMap::new();
        for s in &self.segments {
            map.entry(s.from).or_default().push(s);
        }
        map
    }

    /// Checks losses are set, the graph is acyclic and every path ends at an
    /// output port.
    pub fn validate(&self) -> Result<()> {
        let coupling = [
            ("input coupling", self.input_coupling_db),
            ("output coupling", self.output_coupling_db),
        ];
        for (name, v) in coupling {
            match v {
                None => return Err(Error::Configuration(format!("missing {name} loss"))),
                Some(v) if !(v.is_finite() && v >= 0.0) => {
                    return Err(Error::Configuration(format!("{name} loss must be non-negative")))
                }
                _ => {}
            }
        }
        for s in &self.segments {
            match s.loss_db {
                None => {
                    return Err(Error::Configuration(format!(
                        "missing loss for segment {} -> {}",
                        s.from, s.to
                    )))
                }
                Some(v) if !(v.is_finite() && v >= 0.0) => {
                    return Err(Error::Configuration(format!(
                        "segment {} -> {} has invalid loss {v}",
                        s.from, s.to
                    )))
                }
                _ => {}
            }
            if s.from.is_output() {
                return Err(Error::Configuration(format!(
                    "output port {} has an outgoing segment",
                    s.from
                )));
            }
            if s.to.is_input() {
                return Err(Error::Configuration(format!(
                    "input port {} has an incoming segment",
                    s.to
                )));
            }
        }
        if let Some(v) = self.insertion_loss_override_db {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Configuration(format!("invalid insertion loss override {v}")));
            }
        }
        let succ = self.successors();
        let nodes: BTreeSet<ChipNode> = self.segments.iter().flat_map(|s| [s.from, s.to]).collect();
        for n in &nodes {
            if !n.is_output() && !succ.contains_key(n) {
                return Err(Error::Configuration(format!("element {n} is a dead end")));
            }
        }
        // Depth-first search with colouring to detect cycles.
        let mut state: BTreeMap<ChipNode, u8> = BTreeMap::new();
        fn visit(n: ChipNode, succ: &BTreeMap<ChipNode, Vec<&Segment>>, state: &mut BTreeMap<ChipNode, u8>) -> bool {
            match state.get(&n) {
                Some(1) => return false,
                Some(2) => return true,
                _ => {}
            }
            state.insert(n, 1);
            for s in succ.get(&n).into_iter().flatten() {
                if !visit(s.to, succ, state) {
                    return false;
                }
            }
            state.insert(n, 2);
            true
        }
        for &n in &nodes {
            if !visit(n, &succ, &mut state) {
                return Err(Error::Configuration("chip layout contains a cycle".into()));
            }
        }
        Ok(())
    }

    /// Unscaled loss along the path `from -> to`, including fibre coupling at
    /// port endpoints. Errors when no path or more than one path exists.
    fn nominal_path_loss(&self, from: ChipNode, to: ChipNode) -> Result<Decibels> {
        self.validate()?;
        let succ = self.successors();
        let mut found: Vec<f64> = Vec::new();
        let mut stack = vec![(from, 0.0)];
        while let Some((node, acc)) = stack.pop() {
            if node == to {
                found.push(acc);
                continue;
            }
            for s in succ.get(&node).into_iter().flatten() {
                stack.push((s.to, acc + s.loss_db.unwrap_or(0.0)));
            }
        }
        let waveguide = match found.as_slice() {
            [one] => *one,
            [] => return Err(Error::Configuration(format!("no path from {from} to {to}"))),
            _ => return Err(Error::Configuration(format!("several paths from {from} to {to}"))),
        };
        let mut total = Decibels(waveguide);
        if from.is_input() {
            total += Decibels(self.input_coupling_db.unwrap_or(0.0));
        }
        if to.is_output() {
            total += Decibels(self.output_coupling_db.unwrap_or(0.0));
        }
        Ok(total)
    }

    fn scale(&self) -> Result<f64> {
        match self.insertion_loss_override_db {
            None => Ok(1.0),
            Some(measured) => {
                let nominal = self.nominal_path_loss(ChipNode::Port1, ChipNode::PortA)?.0;
                if nominal == 0.0 {
                    if measured == 0.0 {
                        Ok(1.0)
                    } else {
                        Err(Error::Configuration(
                            "cannot apportion a measured loss over a lossless layout".into(),
                        ))
                    }
                } else {
                    Ok(measured / nominal)
                }
            }
        }
    }

    /// Loss along `from -> to`, rescaled to the measured insertion loss when
    /// an override is present.
    pub fn path_loss(&self, from: ChipNode, to: ChipNode) -> Result<Decibels> {
        Ok(Decibels(self.nominal_path_loss(from, to)?.0 * self.scale()?))
    }

    /// Power transmission along `from -> to`.
    pub fn path_transmission(&self, from: ChipNode, to: ChipNode) -> Result<f64> {
        Ok(self.path_loss(from, to)?.transmission())
    }

    /// Fraction of the port-1 to port-A insertion loss seen by a photon born
    /// in the SPDC section on its way out of port C.
    pub fn generated_photon_loss_fraction(&self) -> Result<f64> {
        let il = self.nominal_path_loss(ChipNode::Port1, ChipNode::PortA)?.0;
        if il == 0.0 {
            return Ok(0.0);
        }
        Ok(self.nominal_path_loss(ChipNode::Spdc, ChipNode::PortC)?.0 / il)
    }
}

/// Fibre-to-fibre insertion loss of the chip, port 1 to port A.
pub fn chip_insertion_loss(layout: &ChipLayout) -> Result<Decibels> {
    match layout.insertion_loss_override_db {
        Some(v) => {
            layout.validate()?;
            Ok(Decibels(v))
        }
        None => layout.path_loss(ChipNode::Port1, ChipNode::PortA),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn coupler_full_transfer_at_zero_volts() {
        let m = CouplerModel::default();
        assert_abs_diff_eq!(coupler_ratio(&m, 0.0), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn coupler_balanced_at_detuning_ratio_point_eight() {
        // root of sin²((π/2)√(1+x²))/(1+x²) = 1/2 is x = 0.79869
        let x = 0.798_685_355_284_701;
        let m = CouplerModel {
            coupling_strength_times_length: FRAC_PI_2,
            detuning_per_volt: x * FRAC_PI_2 / 30.0,
            interaction_length_mm: 9.0,
        };
        assert_abs_diff_eq!(m.cross_ratio(30.0), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(m.detuning_ratio(30.0), 0.80, epsilon = 0.01);
    }

    #[test]
    fn calibration_default_anchors() {
        let cal = calibrate_coupler(&default_anchors(), CalibrationOptions::default()).unwrap();
        let expected = 0.798_685_355_284_701 * FRAC_PI_2 / 30.0;
        assert_abs_diff_eq!(cal.model.detuning_per_volt, expected, epsilon = 1e-9);
        assert!(cal.rms_residual < 1e-6);
        assert!(cal.detuning_constrained);
        assert_abs_diff_eq!(cal.model.cross_ratio(30.0), 0.5, epsilon = 1e-9);
    }

    #[test]
    fn calibration_single_zero_anchor() {
        let cal = calibrate_coupler(&[CalibrationAnchor::new(0.0, 1.0)], CalibrationOptions::default()).unwrap();
        assert_eq!(cal.model.coupling_strength_times_length, FRAC_PI_2);
        assert!(!cal.detuning_constrained);
        assert!(cal.rms_residual < 1e-12);
    }

    #[test]
    fn calibration_rejects_unreachable() {
        let err = calibrate_coupler(&[CalibrationAnchor::new(10.0, 1.2)], CalibrationOptions::default());
        assert!(matches!(err, Err(Error::Calibration(_))));
        assert!(calibrate_coupler(&[], CalibrationOptions::default()).is_err());
    }

    #[test]
    fn calibration_with_free_coupling() {
        let truth = CouplerModel {
            coupling_strength_times_length: 1.4,
            detuning_per_volt: 0.03,
            interaction_length_mm: 9.0,
        };
        let anchors: Vec<_> = [0.0, 10.0, 20.0, 30.0, 40.0]
            .iter()
            .map(|&v| CalibrationAnchor::new(v, truth.cross_ratio(v)))
            .collect();
        let opts = CalibrationOptions {
            fit_coupling: true,
            ..Default::default()
        };
        let cal = calibrate_coupler(&anchors, opts).unwrap();
        assert!(cal.rms_residual < 1e-6, "{}", cal.rms_residual);
        for a in &anchors {
            assert_abs_diff_eq!(cal.model.cross_ratio(a.voltage_v), a.cross_ratio, epsilon = 1e-5);
        }
    }

    #[test]
    fn calibration_reports_nonzero_residual_when_model_cannot_fit() {
        let anchors = [
            CalibrationAnchor::new(0.0, 0.9),
            CalibrationAnchor::new(20.0, 0.85),
            CalibrationAnchor::new(30.0, 0.5),
        ];
        let cal = calibrate_coupler(&anchors, CalibrationOptions::default()).unwrap();
        assert!(cal.rms_residual > 1e-3);
    }

    #[test]
    fn anchors_from_csv() {
        let text = "voltage_V,cross_ratio\n0,1.0\n30,0.5\n";
        let anchors = read_anchors_csv(text.as_bytes()).unwrap();
        assert_eq!(anchors, default_anchors());
        assert!(read_anchors_csv("volts,ratio\n0,1\n".as_bytes()).is_err());
        assert!(read_anchors_csv("voltage_V,cross_ratio\n0,abc\n".as_bytes()).is_err());
    }

    #[test]
    fn spectral_density_peak_symmetry_width() {
        let src = SpdcSource::degenerate_1532(1.0, 1.0);
        assert_eq!(spdc_spectral_density(&src, 1532.0), 1.0);
        for x in [0.5, 7.0, 33.3, 100.0] {
            assert_abs_diff_eq!(
                spdc_spectral_density(&src, 1532.0 + x),
                spdc_spectral_density(&src, 1532.0 - x),
                epsilon = 1e-15
            );
            assert!(spdc_spectral_density(&src, 1532.0 + x) < 1.0);
        }
        let half = |lo: f64, hi: f64| {
            let (mut a, mut b) = (lo, hi);
            for _ in 0..100 {
                let m = 0.5 * (a + b);
                if spdc_spectral_density(&src, m) > 0.5 {
                    a = m;
                } else {
                    b = m;
                }
            }
            0.5 * (a + b)
        };
        let right = half(1532.0, 1600.0);
        let left = 2.0 * 1532.0 - right;
        assert_abs_diff_eq!(right - left, 80.0, epsilon = 0.1);
    }

    #[test]
    fn band_fraction_of_whole_spectrum() {
        let mut src = SpdcSource::degenerate_1532(1.0, 1.0);
        src.spectrum.lineshape = Lineshape::Gaussian;
        let wide = Filter {
            center_wavelength_nm: 1532.0,
            fwhm_bandwidth_pm: 1_000_000.0,
            insertion_loss_db: 0.0,
        };
        assert_abs_diff_eq!(src.band_fraction(&wide), 1.0, epsilon = 1e-6);
        let narrow = Filter {
            center_wavelength_nm: 1530.0,
            fwhm_bandwidth_pm: 200.0,
            insertion_loss_db: 0.0,
        };
        let f = src.band_fraction(&narrow);
        assert!(f > 0.0 && f < 0.01);
    }

    #[test]
    fn filter_transmission() {
        let f = Filter {
            center_wavelength_nm: 1530.0,
            fwhm_bandwidth_pm: 200.0,
            insertion_loss_db: 3.0,
        };
        assert_abs_diff_eq!(f.transmission_at(1530.05), 0.501187, epsilon = 1e-6);
        assert_eq!(f.transmission_at(1530.2), 0.0);
    }

    #[test]
    fn detector_examples() {
        let d = DetectorModel::bench_ingaas();
        assert_abs_diff_eq!(detector_click_prob(&d, 0), 1e-5, epsilon = 1e-10);
        let no_dark = DetectorModel {
            dark_prob_per_ns: 0.0,
            ..d
        };
        assert_abs_diff_eq!(detector_click_prob(&no_dark, 1), 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(detector_click_prob(&no_dark, 2), 0.19, epsilon = 1e-15);
    }

    #[test]
    fn default_layout_insertion_loss() {
        let layout = ChipLayout::default();
        assert_abs_diff_eq!(chip_insertion_loss(&layout).unwrap().0, 8.5, epsilon = 1e-12);
        for (from, to) in [
            (ChipNode::Port1, ChipNode::PortB),
            (ChipNode::Port2, ChipNode::PortA),
            (ChipNode::Port2, ChipNode::PortC),
        ] {
            assert_abs_diff_eq!(layout.path_loss(from, to).unwrap().0, 8.5, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(chip_insertion_loss(&ChipLayout::lossless()).unwrap().0, 0.0);
    }

    #[test]
    fn measured_override_is_verbatim() {
        let layout = ChipLayout {
            insertion_loss_override_db: Some(9.0),
            ..Default::default()
        };
        assert_eq!(chip_insertion_loss(&layout).unwrap().0, 9.0);
        assert_abs_diff_eq!(
            layout.path_loss(ChipNode::Port1, ChipNode::PortA).unwrap().0,
            9.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn missing_segment_loss_is_configuration_error() {
        let mut layout = ChipLayout::default();
        layout.segments[2].loss_db = None;
        assert!(matches!(chip_insertion_loss(&layout), Err(Error::Configuration(_))));
        let layout = ChipLayout {
            input_coupling_db: None,
            ..Default::default()
        };
        assert!(matches!(chip_insertion_loss(&layout), Err(Error::Configuration(_))));
    }

    #[test]
    fn layout_rejects_cycles_and_dead_ends() {
        let mut layout = ChipLayout::default();
        layout.segments.push(Segment {
            from: ChipNode::C2,
            to: ChipNode::C1,
            loss_db: Some(0.0),
        });
        assert!(layout.validate().is_err());
        let mut layout = ChipLayout::default();
        layout.segments.retain(|s| s.from != ChipNode::C1);
        assert!(layout.validate().is_err());
    }

    #[test]
    fn generated_photon_fraction() {
        let f = ChipLayout::default().generated_photon_loss_fraction().unwrap();
        assert_abs_diff_eq!(f, 5.25 / 8.5, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn cross_ratio_bounded_and_conserving(k in 0.0f64..3.0, g in -0.2f64..0.2, v in -100.0f64..100.0) {
            let m = CouplerModel { coupling_strength_times_length: k, detuning_per_volt: g, interaction_length_mm: 9.0 };
            let t = m.cross_ratio(v);
            prop_assert!((0.0..=1.0).contains(&t));
            prop_assert_eq!(t + m.bar_ratio(v), 1.0);
        }

        #[test]
        fn cross_ratio_continuous(v in 0.0f64..60.0) {
            let m = CouplerModel::default();
            prop_assert!((m.cross_ratio(v) - m.cross_ratio(v + 1e-7)).abs() < 1e-6);
        }

        #[test]
        fn click_prob_monotone(
            n in 0usize..6,
            eta in 0.0f64..0.9,
            dark in 0.0f64..0.01,
            de in 0.0f64..0.1,
            dd in 0.0f64..0.01,
        ) {
            let base = DetectorModel { efficiency: eta, dark_prob_per_ns: dark, gate_window_ns: 1.0 };
            let p = base.click_prob(n);
            prop_assert!(base.click_prob(n + 1) >= p);
            let more_eta = DetectorModel { efficiency: eta + de, ..base };
            prop_assert!(more_eta.click_prob(n) >= p);
            let more_dark = DetectorModel { dark_prob_per_ns: dark + dd, ..base };
            prop_assert!(more_dark.click_prob(n) >= p);
        }

        #[test]
        fn loss_additive_along_path(losses in proptest::collection::vec(0.0f64..5.0, 7), coupling in 0.0f64..5.0) {
            let mut layout = ChipLayout::default();
            layout.input_coupling_db = Some(coupling);
            layout.output_coupling_db = Some(coupling);
            for (s, l) in layout.segments.iter_mut().zip(&losses) {
                s.loss_db = Some(*l);
            }
            // port1 -> c2 -> port_a
            let expected = 2.0 * coupling + losses[0] + losses[5];
            let got = chip_insertion_loss(&layout).unwrap().0;
            prop_assert!((got - expected).abs() < 1e-12);
            // reversing the segment order must not change anything
            layout.segments.reverse();
            prop_assert!((chip_insertion_loss(&layout).unwrap().0 - expected).abs() < 1e-12);
        }
    }
}
