//! Key-rate budget of a one-way fibre link, with and without a
//! teleportation relay, as a function of distance.
//!
//! Per gated pulse, with `T(L) = 10^(-αL/10)` the fibre transmission and `d`
//! the per-gate dark probability:
//!
//! * direct link: signal `μηT(L)`, accidental `d`;
//! * relay at distance `xL` from Alice: Alice's photon reaches a BSM detector
//!   with `p_a = μT(xL)t_a`, the local photon `b` with `p_b`; a true herald
//!   occurs with `½p_a p_b η²` (linear-optics Bell measurement), false
//!   heralds with `p_a η d`, `p_b η d` and `d²`. Bob's detector is gated by
//!   the herald and sees photon `c` with `q = t_c T(...)η`. The signal is
//!   true heralds followed by a detection of `c`; accidentals are false
//!   heralds from `b` followed by `c`, plus any herald followed by a dark
//!   click at Bob.
//!
//! In the folded relay the chip sits at the relay node: `t_a` is the
//! port-1-to-A insertion loss, photon `b` leaves the C₁ splitter toward C₂
//! with probability ½ and `b`, `c` see the loss from the SPDC section to the
//! outputs. In the standard relay the pair source sits midway between the
//! relay node and Bob and no chip losses apply.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::components::{ChipLayout, ChipNode, DetectorModel};
use crate::error::{Error, Result};
use crate::units::Decibels;

/// Distance beyond which a link is reported as unbounded.
pub const MAX_SEARCH_KM: f64 = 1e4;

/// Bisection tolerance on the maximum distance.
pub const DISTANCE_TOLERANCE_KM: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkParams {
    pub fiber_loss_db_per_km: f64,
    pub detector: DetectorModel,
    pub pulse_rate_hz: f64,
    /// Mean photon number per pulse sent by Alice.
    pub mean_photon_per_pulse: f64,
    pub teleport_fidelity: f64,
    /// Mean pair number per pulse of the relay's own source.
    pub local_pair_mean: f64,
    /// Chip used by the folded relay.
    pub chip: ChipLayout,
}

impl Default for LinkParams {
    /// 0.2 dB/km fibre, 10 % efficient detectors with 10⁻⁶ dark counts per
    /// ns, teleportation fidelity 0.8 and a chip with 9 dB insertion loss.
    fn default() -> Self {
        let chip = ChipLayout {
            insertion_loss_override_db: Some(9.0),
            ..ChipLayout::default()
        };
        LinkParams {
            fiber_loss_db_per_km: 0.2,
            detector: DetectorModel::link_ingaas(),
            pulse_rate_hz: 76e6,
            mean_photon_per_pulse: 1.0,
            teleport_fidelity: 0.8,
            local_pair_mean: 0.02,
            chip,
        }
    }
}

impl LinkParams {
    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Configuration(m));
        if !(self.fiber_loss_db_per_km.is_finite() && self.fiber_loss_db_per_km >= 0.0) {
            return cfg(format!(
                "fibre loss must be non-negative, got {}",
                self.fiber_loss_db_per_km
            ));
        }
        if !(0.5..=1.0).contains(&self.teleport_fidelity) {
            return cfg(format!(
                "teleportation fidelity must lie in [0.5, 1], got {}",
                self.teleport_fidelity
            ));
        }
        if !(self.pulse_rate_hz.is_finite() && self.pulse_rate_hz > 0.0) {
            return cfg(format!("pulse rate must be positive, got {}", self.pulse_rate_hz));
        }
        if !(self.mean_photon_per_pulse.is_finite() && self.mean_photon_per_pulse > 0.0) {
            return cfg(format!(
                "mean photon number must be positive, got {}",
                self.mean_photon_per_pulse
            ));
        }
        if !(self.local_pair_mean.is_finite() && self.local_pair_mean > 0.0) {
            return cfg(format!(
                "local pair mean must be positive, got {}",
                self.local_pair_mean
            ));
        }
        self.detector.validate()?;
        self.chip.validate()
    }

    fn fibre(&self, km: f64) -> f64 {
        Decibels(self.fiber_loss_db_per_km * km).transmission()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkVariant {
    Direct,
    StandardRelay,
    FoldedRelay,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkModel {
    pub variant: LinkVariant,
    /// Relay distance from Alice as a fraction of the link; optimised when
    /// unset. Ignored by the direct link.
    pub relay_position: Option<f64>,
    /// Replace the chip by a lossless one.
    pub lossless_chip: bool,
}

impl LinkModel {
    pub fn direct() -> Self {
        LinkModel {
            variant: LinkVariant::Direct,
            relay_position: None,
            lossless_chip: false,
        }
    }

    pub fn standard_relay() -> Self {
        LinkModel {
            variant: LinkVariant::StandardRelay,
            ..LinkModel::direct()
        }
    }

    pub fn folded_relay() -> Self {
        LinkModel {
            variant: LinkVariant::FoldedRelay,
            ..LinkModel::direct()
        }
    }

    pub fn folded_relay_lossless() -> Self {
        LinkModel {
            lossless_chip: true,
            ..LinkModel::folded_relay()
        }
    }

    pub fn at(self, relay_position: f64) -> Self {
        LinkModel {
            relay_position: Some(relay_position),
            ..self
        }
    }

    /// Column name used in sweep tables.
    pub fn name(&self) -> &'static str {
        match (self.variant, self.lossless_chip) {
            (LinkVariant::Direct, _) => "direct",
            (LinkVariant::StandardRelay, _) => "standard_relay",
            (LinkVariant::FoldedRelay, false) => "folded_relay",
            (LinkVariant::FoldedRelay, true) => "folded_relay_lossless",
        }
    }

    fn validate(&self) -> Result<()> {
        if let Some(x) = self.relay_position {
            if self.variant != LinkVariant::Direct && !(x > 0.0 && x < 1.0) {
                return Err(Error::Domain(format!("relay position must lie in (0, 1), got {x}")));
            }
        }
        Ok(())
    }
}

/// Per-gate probabilities at one distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkRates {
    pub signal_prob: f64,
    pub accidental_prob: f64,
    pub qber: f64,
    /// Detection probability relative to the direct link at zero distance.
    pub normalized_rate: f64,
}

impl LinkRates {
    pub fn snr(&self) -> f64 {
        self.signal_prob / self.accidental_prob
    }
}

/// Chip transmissions seen by the relay photons.
struct RelayChip {
    alice: f64,
    local: f64,
}

fn relay_chip(model: &LinkModel, params: &LinkParams) -> Result<RelayChip> {
    let layout = if model.lossless_chip {
        ChipLayout::lossless()
    } else {
        params.chip.clone()
    };
    Ok(RelayChip {
        alice: layout.path_transmission(ChipNode::Port1, ChipNode::PortA)?,
        local: layout.path_transmission(ChipNode::Spdc, ChipNode::PortC)?,
    })
}

fn qber(signal: f64, accidental: f64, intrinsic: f64) -> f64 {
    let total = signal + accidental;
    if total <= 0.0 {
        return 0.5;
    }
    (0.5 * accidental + intrinsic * signal) / total
}

/// Signal, accidental, QBER and normalised rate of `model` at `distance_km`.
/// Relay variants without a fixed position are evaluated at the midpoint.
pub fn link_rates(model: &LinkModel, params: &LinkParams, distance_km: f64) -> Result<LinkRates> {
    params.validate()?;
    model.validate()?;
    if !(distance_km.is_finite() && distance_km >= 0.0) {
        return Err(Error::Domain(format!(
            "distance must be non-negative, got {distance_km}"
        )));
    }
    let chip = match model.variant {
        LinkVariant::FoldedRelay => Some(relay_chip(model, params)?),
        _ => None,
    };
    Ok(rates_unchecked(model, params, chip.as_ref(), distance_km))
}

fn rates_unchecked(model: &LinkModel, params: &LinkParams, chip: Option<&RelayChip>, l: f64) -> LinkRates {
    let eta = params.detector.efficiency;
    let d = params.detector.dark_prob_per_gate();
    let mu = params.mean_photon_per_pulse;
    let reference = mu * eta + d;
    let (signal, accidental, intrinsic) = match model.variant {
        LinkVariant::Direct => (mu * eta * params.fibre(l), d, 0.0),
        variant => {
            let x = model.relay_position.unwrap_or(0.5);
            let (p_a, p_b, q) = if variant == LinkVariant::FoldedRelay {
                let chip = chip.expect("folded relay needs chip transmissions");
                (
                    (mu * params.fibre(x * l) * chip.alice).min(1.0),
                    params.local_pair_mean * 0.5 * chip.local,
                    chip.local * params.fibre((1.0 - x) * l) * eta,
                )
            } else {
                let t_half = params.fibre((1.0 - x) * l / 2.0);
                (
                    (mu * params.fibre(x * l)).min(1.0),
                    params.local_pair_mean * t_half,
                    t_half * eta,
                )
            };
            let true_herald = 0.5 * p_a * p_b * eta * eta;
            let false_a = p_a * eta * d;
            let false_b = p_b * eta * d;
            let herald = true_herald + false_a + false_b + d * d;
            (
                true_herald * q,
                false_b * q + herald * d,
                (1.0 - params.teleport_fidelity) / 2.0,
            )
        }
    };
    LinkRates {
        signal_prob: signal,
        accidental_prob: accidental,
        qber: qber(signal, accidental, intrinsic),
        normalized_rate: (signal + accidental) / reference,
    }
}

/// Condition under which a link stops being useful.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceCriterion {
    /// Signal no longer exceeds accidentals.
    SnrUnity,
    /// QBER at or above the threshold.
    QberThreshold(f64),
}

impl DistanceCriterion {
    /// Default QBER threshold.
    pub const DEFAULT_QBER: f64 = 0.11;

    fn holds(&self, r: &LinkRates) -> bool {
        match *self {
            DistanceCriterion::SnrUnity => r.signal_prob > r.accidental_prob,
            DistanceCriterion::QberThreshold(q) => r.qber < q,
        }
    }
}

/// Maximum useful distance of a link model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaxDistance {
    /// `None` when the criterion still holds at [`MAX_SEARCH_KM`].
    pub distance_km: Option<f64>,
    /// Relay position used, when the model has one.
    pub relay_position: Option<f64>,
    /// Maximum distance with the relay at the midpoint.
    pub midpoint_distance_km: Option<f64>,
}

impl MaxDistance {
    pub fn unbounded(&self) -> bool {
        self.distance_km.is_none()
    }
}

fn crossing(
    model: &LinkModel,
    params: &LinkParams,
    chip: Option<&RelayChip>,
    criterion: DistanceCriterion,
) -> Option<f64> {
    let ok = |l: f64| criterion.holds(&rates_unchecked(model, params, chip, l));
    if ok(MAX_SEARCH_KM) {
        return None;
    }
    if !ok(0.0) {
        return Some(0.0);
    }
    let (mut lo, mut hi) = (0.0, MAX_SEARCH_KM);
    while hi - lo > DISTANCE_TOLERANCE_KM {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Smallest distance at which `criterion` fails, maximised over the relay
/// position unless the model fixes it.
pub fn max_distance(model: &LinkModel, params: &LinkParams, criterion: DistanceCriterion) -> Result<MaxDistance> {
    params.validate()?;
    model.validate()?;
    if let DistanceCriterion::QberThreshold(q) = criterion {
        if !(q > 0.0 && q <= 0.5) {
            return Err(Error::Domain(format!("QBER threshold must lie in (0, 0.5], got {q}")));
        }
    }
    if model.variant == LinkVariant::Direct {
        return Ok(MaxDistance {
            distance_km: crossing(model, params, None, criterion),
            relay_position: None,
            midpoint_distance_km: None,
        });
    }
    let chip = match model.variant {
        LinkVariant::FoldedRelay => Some(relay_chip(model, params)?),
        _ => None,
    };
    let chip = chip.as_ref();
    let at = |x: f64| crossing(&model.at(x), params, chip, criterion);
    let midpoint = at(0.5);
    let (x, distance) = match model.relay_position {
        Some(x) => (x, at(x)),
        None => optimise_position(&at),
    };
    Ok(MaxDistance {
        distance_km: distance,
        relay_position: Some(x),
        midpoint_distance_km: midpoint,
    })
}

/// Grid search over `(0, 1)` refined by golden-section search.
fn optimise_position(at: &dyn Fn(f64) -> Option<f64>) -> (f64, Option<f64>) {
    let score = |x: f64| at(x).unwrap_or(f64::INFINITY);
    const GRID: usize = 100;
    let mut best = (0.5, score(0.5));
    for i in 1..GRID {
        let x = i as f64 / GRID as f64;
        let s = score(x);
        if s > best.1 {
            best = (x, s);
        }
    }
    if best.1.is_infinite() {
        return (best.0, None);
    }
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let step = 1.0 / GRID as f64;
    let (mut a, mut b) = ((best.0 - step).max(1e-6), (best.0 + step).min(1.0 - 1e-6));
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (score(c), score(d));
    while b - a > 1e-6 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = score(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = score(d);
        }
    }
    let x = 0.5 * (a + b);
    let s = score(x);
    if s >= best.1 {
        (x, Some(s))
    } else {
        (best.0, Some(best.1))
    }
}

/// Normalised rates of several link models over a list of distances.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub models: Vec<LinkModel>,
    /// Relay position used for each model.
    pub relay_positions: Vec<Option<f64>>,
    pub distances_km: Vec<f64>,
    /// `rates[i][j]`: model `j` at distance `i`.
    pub rates: Vec<Vec<LinkRates>>,
}

impl SweepResult {
    pub fn column(&self, model: usize) -> impl Iterator<Item = f64> + '_ {
        self.rates.iter().map(move |row| row[model].normalized_rate)
    }

    /// Absolute rate in counts per second: normalised rate times the direct
    /// link's detection probability at zero distance times the pulse rate.
    pub fn absolute_rate(&self, params: &LinkParams, distance: usize, model: usize) -> f64 {
        let reference =
            params.mean_photon_per_pulse * params.detector.efficiency + params.detector.dark_prob_per_gate();
        self.rates[distance][model].normalized_rate * reference * params.pulse_rate_hz
    }
}

/// Evaluates every model at every distance. Relay models without a fixed
/// position use the position that maximises their reach under SNR = 1.
pub fn sweep(models: &[LinkModel], params: &LinkParams, distances: &[f64]) -> Result<SweepResult> {
    if models.is_empty() || distances.is_empty() {
        return Err(Error::Domain("sweep needs at least one model and one distance".into()));
    }
    params.validate()?;
    let mut resolved = Vec::with_capacity(models.len());
    let mut chips = Vec::with_capacity(models.len());
    for m in models {
        m.validate()?;
        let fixed = match (m.variant, m.relay_position) {
            (LinkVariant::Direct, _) => *m,
            (_, Some(_)) => *m,
            (_, None) => {
                let best = max_distance(m, params, DistanceCriterion::SnrUnity)?;
                m.at(best.relay_position.unwrap_or(0.5))
            }
        };
        chips.push(match m.variant {
            LinkVariant::FoldedRelay => Some(relay_chip(m, params)?),
            _ => None,
        });
        resolved.push(fixed);
    }
    for &l in distances {
        if !(l.is_finite() && l >= 0.0) {
            return Err(Error::Domain(format!("distance must be non-negative, got {l}")));
        }
    }
    let rates = distances
        .par_iter()
        .map(|&l| {
            resolved
                .iter()
                .zip(&chips)
                .map(|(m, c)| rates_unchecked(m, params, c.as_ref(), l))
                .collect()
        })
        .collect();
    Ok(SweepResult {
        models: models.to_vec(),
        relay_positions: resolved
            .iter()
            .map(|m| {
                if m.variant == LinkVariant::Direct {
                    None
                } else {
                    m.relay_position
                }
            })
            .collect(),
        distances_km: distances.to_vec(),
        rates,
    })
}

/// Maximum distances of the direct link and a relay model, and their ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistanceGain {
    pub direct_km: f64,
    pub relay: MaxDistance,
    pub gain: Option<f64>,
}

pub fn distance_gain(model: &LinkModel, params: &LinkParams, criterion: DistanceCriterion) -> Result<DistanceGain> {
    let direct = max_distance(&LinkModel::direct(), params, criterion)?;
    let direct_km = direct
        .distance_km
        .ok_or_else(|| Error::Domain("the direct link has no distance limit".into()))?;
    let relay = max_distance(model, params, criterion)?;
    Ok(DistanceGain {
        direct_km,
        relay,
        gain: relay.distance_km.map(|d| d / direct_km),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn params() -> LinkParams {
        LinkParams::default()
    }

    #[test]
    fn direct_normalisation_anchor() {
        let r = link_rates(&LinkModel::direct(), &params(), 0.0).unwrap();
        assert_relative_eq!(r.normalized_rate, 1.0, max_relative = 1e-15);
        assert_eq!(r.qber, 0.5 * r.accidental_prob / (r.signal_prob + r.accidental_prob));
    }

    #[test]
    fn direct_limit_is_250_km() {
        let m = max_distance(&LinkModel::direct(), &params(), DistanceCriterion::SnrUnity).unwrap();
        assert!((m.distance_km.unwrap() - 250.0).abs() < 0.01, "{m:?}");
        let r = link_rates(&LinkModel::direct(), &params(), 250.0).unwrap();
        assert_relative_eq!(r.snr(), 1.0, max_relative = 1e-9);
    }

    #[test]
    fn direct_loses_a_decade_every_50_km() {
        let p = params();
        let signal = |l: f64| link_rates(&LinkModel::direct(), &p, l).unwrap().signal_prob;
        assert_relative_eq!(signal(50.0) / signal(100.0), 10.0, max_relative = 1e-12);
        assert_relative_eq!(signal(0.0) / signal(50.0), 10.0, max_relative = 1e-12);
    }

    #[test]
    fn chip_loss_penalises_short_links() {
        let p = params();
        let folded = link_rates(&LinkModel::folded_relay(), &p, 0.0).unwrap();
        let direct = link_rates(&LinkModel::direct(), &p, 0.0).unwrap();
        assert!(folded.normalized_rate < direct.normalized_rate);
    }

    #[test]
    fn distance_gains() {
        let p = params();
        let lossless = distance_gain(&LinkModel::folded_relay_lossless(), &p, DistanceCriterion::SnrUnity).unwrap();
        let realistic = distance_gain(&LinkModel::folded_relay(), &p, DistanceCriterion::SnrUnity).unwrap();
        assert!((lossless.gain.unwrap() - 1.7865).abs() < 1e-3, "{lossless:?}");
        assert!((realistic.gain.unwrap() - 1.4950).abs() < 1e-3, "{realistic:?}");
        let x = lossless.relay.relay_position.unwrap();
        assert!(x > 0.0 && x < 1.0);
        assert!(lossless.relay.distance_km.unwrap() >= lossless.relay.midpoint_distance_km.unwrap());
    }

    #[test]
    fn nominal_layout_gain() {
        let mut p = params();
        p.chip.insertion_loss_override_db = None;
        let g = distance_gain(&LinkModel::folded_relay(), &p, DistanceCriterion::SnrUnity).unwrap();
        assert!((g.gain.unwrap() - 1.5112).abs() < 1e-3, "{g:?}");
    }

    #[test]
    fn qber_threshold_is_shorter_than_snr() {
        let p = params();
        let snr = max_distance(&LinkModel::folded_relay(), &p, DistanceCriterion::SnrUnity).unwrap();
        let q = max_distance(&LinkModel::folded_relay(), &p, DistanceCriterion::QberThreshold(0.11)).unwrap();
        assert!(q.distance_km.unwrap() < snr.distance_km.unwrap());
        // the intrinsic relay error alone exceeds a 5 % threshold
        let tight = max_distance(&LinkModel::folded_relay(), &p, DistanceCriterion::QberThreshold(0.05)).unwrap();
        assert_eq!(tight.distance_km, Some(0.0));
    }

    #[test]
    fn unbounded_without_darks() {
        let mut p = params();
        p.detector.dark_prob_per_ns = 0.0;
        let m = max_distance(&LinkModel::direct(), &p, DistanceCriterion::SnrUnity).unwrap();
        assert!(m.unbounded());
    }

    #[test]
    fn sweep_intercepts_and_ordering() {
        let p = params();
        let models = [
            LinkModel::direct(),
            LinkModel::standard_relay(),
            LinkModel::folded_relay(),
            LinkModel::folded_relay_lossless(),
        ];
        let distances: Vec<f64> = (0..=40).map(|i| i as f64 * 10.0).collect();
        let s = sweep(&models, &p, &distances).unwrap();
        assert_eq!(s.rates.len(), distances.len());
        assert_relative_eq!(s.rates[0][0].normalized_rate, 1.0);
        for (j, m) in s.models.iter().enumerate() {
            let direct = link_rates(&m.at(s.relay_positions[j].unwrap_or(0.5)), &p, 0.0).unwrap();
            assert_eq!(s.rates[0][j].normalized_rate, direct.normalized_rate);
        }
        // at 350 km only the relays are above their noise floor
        let i = distances.iter().position(|&l| l == 350.0).unwrap();
        assert!(s.rates[i][0].snr() < 1.0);
        assert!(s.rates[i][2].snr() > 1.0);
        assert!(s.rates[i][3].snr() > s.rates[i][2].snr());
        assert_relative_eq!(s.absolute_rate(&p, 0, 0), (0.1 + 1e-6) * 76e6, max_relative = 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = params();
        assert!(link_rates(&LinkModel::direct(), &p, -1.0).is_err());
        assert!(link_rates(&LinkModel::folded_relay().at(1.0), &p, 1.0).is_err());
        let mut bad = p.clone();
        bad.teleport_fidelity = 0.4;
        assert!(matches!(
            link_rates(&LinkModel::direct(), &bad, 1.0),
            Err(Error::Configuration(_))
        ));
        assert!(sweep(&[], &p, &[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn rates_decrease_with_distance(l in 0.0f64..900.0, dl in 0.5f64..50.0, x in 0.05f64..0.95) {
            let p = params();
            for m in [LinkModel::direct(), LinkModel::standard_relay().at(x), LinkModel::folded_relay().at(x), LinkModel::folded_relay_lossless().at(x)] {
                let a = link_rates(&m, &p, l).unwrap().normalized_rate;
                let b = link_rates(&m, &p, l + dl).unwrap().normalized_rate;
                prop_assert!(b < a, "{} at {} km", m.name(), l);
            }
        }

        #[test]
        fn lossless_folded_outreaches_direct(
            alpha in 0.15f64..0.4,
            eta in 0.05f64..0.9,
            dark in 1e-8f64..1e-4,
            pair in 0.005f64..0.1,
        ) {
            let p = LinkParams {
                fiber_loss_db_per_km: alpha,
                detector: DetectorModel { efficiency: eta, dark_prob_per_ns: dark, gate_window_ns: 1.0 },
                local_pair_mean: pair,
                ..params()
            };
            let g = distance_gain(&LinkModel::folded_relay_lossless(), &p, DistanceCriterion::SnrUnity).unwrap();
            prop_assert!(g.gain.unwrap() > 1.0);
        }

        #[test]
        fn gain_independent_of_pulse_rate(rate in 1e3f64..1e10) {
            let mut p = params();
            let g0 = distance_gain(&LinkModel::folded_relay(), &p, DistanceCriterion::SnrUnity).unwrap();
            p.pulse_rate_hz = rate;
            let g1 = distance_gain(&LinkModel::folded_relay(), &p, DistanceCriterion::SnrUnity).unwrap();
            prop_assert_eq!(g0.gain, g1.gain);
        }

        #[test]
        fn qber_tends_to_half_in_noise(l in 600.0f64..2000.0) {
            let r = link_rates(&LinkModel::direct(), &params(), l).unwrap();
            prop_assert!((r.qber - 0.5).abs() < 0.5 * r.snr() + 1e-12);
        }
    }
}
