use serde::Serialize;

use crate::error::{Error, Result};
use crate::interference::{DipProfile, DipSample};

use super::accidentals::{subtract_accidentals, AccidentalEstimate};
use super::expected::{expected_counts, ExpectedCounts};
use super::scenario::Scenario;
use super::{simulate, Tallies};

/// First stream tag used by scan points; 0 and 1 belong to [`super::run`].
const FIRST_SCAN_STREAM: u64 = 2;

/// One delay setting of a dip scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanPoint {
    pub position_mm: f64,
    pub overlap: f64,
    /// Simulated tallies; absent in the analytic limit.
    pub tallies: Option<Tallies>,
    pub accidentals: Option<AccidentalEstimate>,
    /// Exact probabilities; present only in the analytic limit.
    pub expected: Option<ExpectedCounts>,
    /// Net three-fold rate per second of gating.
    pub rate_hz: f64,
    pub error_hz: f64,
}

/// Net three-fold rate against path difference with its gaussian fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DipScan {
    pub pulses_per_point: u64,
    pub seed: u64,
    pub points: Vec<ScanPoint>,
    pub profile: DipProfile,
}

/// Scans the delay over `positions`. With `n_pulses_per_point == 0` each
/// point takes its exact expectation instead of a simulated tally.
pub fn scan_dip(scenario: &Scenario, positions: &[f64], n_pulses_per_point: u64, seed: u64) -> Result<DipScan> {
    let channels = scenario.channels()?;
    if positions.len() < 3 {
        return Err(Error::Domain(format!(
            "a dip scan needs at least 3 positions, got {}",
            positions.len()
        )));
    }
    let lo = positions.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = positions.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi - lo > 2.0 * channels.dip_fwhm_mm) {
        return Err(Error::Domain(format!(
            "scan span {:.3} mm must exceed twice the expected dip width {:.3} mm",
            hi - lo,
            channels.dip_fwhm_mm
        )));
    }
    let gate_rate = scenario.gate_rate_hz;
    let points: Vec<ScanPoint> = positions
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let overlap = channels.overlap_at(x);
            if n_pulses_per_point == 0 {
                let e = expected_counts(&channels, overlap);
                ScanPoint {
                    position_mm: x,
                    overlap,
                    tallies: None,
                    accidentals: None,
                    expected: Some(e),
                    rate_hz: e.photon_threefold * gate_rate,
                    error_hz: 0.0,
                }
            } else {
                let t = simulate(
                    &channels,
                    overlap,
                    n_pulses_per_point,
                    seed,
                    FIRST_SCAN_STREAM + i as u64,
                );
                let acc = subtract_accidentals(&t, &channels.darks());
                let per_gate = if t.gated_pulses > 0 {
                    gate_rate / t.gated_pulses as f64
                } else {
                    0.0
                };
                ScanPoint {
                    position_mm: x,
                    overlap,
                    tallies: Some(t),
                    accidentals: Some(acc),
                    expected: None,
                    rate_hz: acc.net * per_gate,
                    error_hz: acc.net_error * per_gate,
                }
            }
        })
        .collect();
    let samples = points
        .iter()
        .map(|p| DipSample {
            position_mm: p.position_mm,
            rate: p.rate_hz,
            error: p.error_hz,
        })
        .collect();
    Ok(DipScan {
        pulses_per_point: n_pulses_per_point,
        seed,
        points,
        profile: DipProfile::from_samples(samples),
    })
}
