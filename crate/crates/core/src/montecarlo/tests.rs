use approx::assert_relative_eq;

use super::expected::recovered_threefold;
use super::*;
use crate::interference::dip_profile;
use crate::units::path_to_delay;
use crate::units::Millimetres;

/// Both sources emit exactly one pair, C₁ sends every chip photon to C₂.
fn single_photons() -> Scenario {
    let mut s = Scenario::idealized(1.0, 1.0);
    s.external_law = PairLaw::Fock(1);
    s.chip_law = PairLaw::Fock(1);
    s.c1_voltage_v = 0.0;
    s.pump_duration_ps = 0.0;
    s
}

#[test]
fn perfect_bunching_at_zero_delay() {
    let s = single_photons();
    let ch = s.channels().unwrap();
    let t = simulate(&ch, ch.overlap_at(0.0), 100_000, 7, 0);
    assert_eq!(t.gated_pulses, 100_000);
    assert_eq!(t.twofold_ab, 0);
    assert_eq!(t.threefold_abc, 0);
    assert_eq!(t.singles.a + t.singles.b, 100_000);
}

#[test]
fn distinguishable_photons_split_half_the_time() {
    let mut s = single_photons();
    s.delay_mm = 1000.0;
    let ch = s.channels().unwrap();
    let n = 400_000u64;
    let t = simulate(&ch, ch.overlap_at(s.delay_mm), n, 7, 0);
    let p = t.twofold_ab as f64 / n as f64;
    let sigma = (0.25 / n as f64).sqrt();
    assert!((p - 0.5).abs() < 4.0 * sigma, "{p}");
    let e = expected_counts(&ch, ch.overlap_at(s.delay_mm));
    assert_relative_eq!(e.clicks.ab, 0.5, max_relative = 1e-12);
}

#[test]
fn photon_ledger_balances() {
    let mut s = Scenario::bench();
    s.external_source.pump_power_mw = 30.0;
    s.chip_source.pump_power_mw = 70.0;
    let ch = s.channels().unwrap();
    let t = simulate(&ch, 0.5, 20_000_000, 3, 0);
    assert!(t.photons.generated > 0);
    assert!(t.photons.is_balanced(), "{:?}", t.photons);
    assert!(t.photons.detected >= t.singles.a.min(1));
}

#[test]
fn gating_fraction_is_binomial() {
    let s = Scenario::bench();
    let ch = s.channels().unwrap();
    let n = 50_000_000u64;
    let t = simulate(&ch, 0.0, n, 11, 0);
    let p = 600e3 / 76e6;
    let sigma = (n as f64 * p * (1.0 - p)).sqrt();
    let dev = t.gated_pulses as f64 - n as f64 * p;
    assert!(dev.abs() < 4.0 * sigma, "{} vs {}", t.gated_pulses, n as f64 * p);
}

#[test]
fn tallies_are_ordered() {
    let mut s = Scenario::bench();
    s.external_source.pump_power_mw = 15.0;
    s.chip_source.pump_power_mw = 70.0;
    s.detector_a.dark_prob_per_ns = 1e-3;
    let r = run(&s, 30_000_000, 5).unwrap();
    for t in [r.at_delay, r.reference] {
        assert!(t.threefold_abc <= t.twofold_ab.min(t.twofold_ac).min(t.twofold_bc));
        assert!(t.threefold_abc <= t.singles.c);
        assert!(t.twofold_ab <= t.singles.a.min(t.singles.b));
    }
}

#[test]
fn deterministic_across_thread_counts() {
    let s = Scenario::idealized(0.05, 0.02);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| run(&s, 1_000_000, 42).unwrap());
    let b = four.install(|| run(&s, 1_000_000, 42).unwrap());
    assert_eq!(a, b);
    let c = run(&s, 1_000_000, 43).unwrap();
    assert_ne!(a.at_delay, c.at_delay);
}

#[test]
fn reference_stream_is_independent() {
    let s = Scenario::idealized(0.05, 0.02);
    let ch = s.channels().unwrap();
    let x = simulate(&ch, 0.0, 200_000, 1, STREAM_AT_DELAY);
    let y = simulate(&ch, 0.0, 200_000, 1, STREAM_REFERENCE);
    assert_ne!(x, y);
}

#[test]
fn monte_carlo_matches_expectation() {
    let mut s = Scenario::idealized(0.05, 0.05);
    s.detector_a.efficiency = 0.5;
    s.detector_c.dark_prob_per_ns = 1e-3;
    s.c2_voltage_v = 20.0;
    let ch = s.channels().unwrap();
    let n = 4_000_000u64;
    let overlap = 0.6;
    let t = simulate(&ch, overlap, n, 9, 0);
    let e = expected_counts(&ch, overlap);
    let check = |count: u64, p: f64| {
        let mean = p * n as f64;
        let z = (count as f64 - mean) / mean.sqrt();
        assert!(z.abs() < 4.5, "count {count} expected {mean}");
    };
    check(t.singles.a, e.clicks.a);
    check(t.singles.b, e.clicks.b);
    check(t.singles.c, e.clicks.c);
    check(t.twofold_ab, e.clicks.ab);
    check(t.twofold_ac, e.clicks.ac);
    check(t.twofold_bc, e.clicks.bc);
    check(t.threefold_abc, e.clicks.abc);
}

#[test]
fn subtraction_inverts_expected_clicks() {
    let mut s = Scenario::bench();
    s.detector_a.dark_prob_per_ns = 1e-3;
    s.detector_b.dark_prob_per_ns = 2e-3;
    s.detector_c.dark_prob_per_ns = 5e-4;
    let ch = s.channels().unwrap();
    for overlap in [0.0, 0.4, 0.99] {
        let e = expected_counts(&ch, overlap);
        assert!(e.accidental_threefold() > 0.0);
        let r = recovered_threefold(&e, &ch);
        assert_relative_eq!(r, e.photon_threefold, max_relative = 1e-9);
    }
}

#[test]
fn expected_matches_closed_form_in_low_gain_limit() {
    let s = Scenario::idealized(1e-3, 1e-3);
    let ch = s.channels().unwrap();
    let v_mc = 1.0 - expected_counts(&ch, ch.v_timing).photon_threefold / expected_counts(&ch, 0.0).photon_threefold;
    let v = ch.predicted_visibility().unwrap().v_total;
    assert!((v_mc - v).abs() < 2e-3, "{v_mc} vs {v}");
}

#[test]
fn analytic_scan_reproduces_dip_profile() {
    let mut s = Scenario::idealized(0.02, 0.01);
    s.dip_fwhm_ps = Some(20.0);
    let positions: Vec<f64> = (-24..=24).map(|i| i as f64 * 0.5).collect();
    let scan = scan_dip(&s, &positions, 0, 1).unwrap();
    let ch = s.channels().unwrap();
    let base = expected_counts(&ch, 0.0).photon_threefold * s.gate_rate_hz;
    let bottom = expected_counts(&ch, ch.v_timing).photon_threefold * s.gate_rate_hz;
    let v = 1.0 - bottom / base;
    let model = dip_profile(v, crate::units::Picoseconds(20.0), base, &positions).unwrap();
    for (p, m) in scan.points.iter().zip(&model.samples) {
        assert_relative_eq!(p.rate_hz, m.rate, max_relative = 1e-9);
    }
    let fit = scan.profile.fit.unwrap();
    assert_relative_eq!(fit.fwhm_mm, 5.99585, max_relative = 1e-4);
    assert_relative_eq!(path_to_delay(Millimetres(fit.fwhm_mm)).0, 20.0, max_relative = 1e-4);
}

#[test]
fn scan_preconditions() {
    let s = Scenario::idealized(0.02, 0.01);
    assert!(matches!(scan_dip(&s, &[0.0, 1.0], 0, 1), Err(Error::Domain(_))));
    assert!(matches!(scan_dip(&s, &[-1.0, 0.0, 1.0], 0, 1), Err(Error::Domain(_))));
}

#[test]
fn invalid_scenarios_are_configuration_errors() {
    let mut s = Scenario::bench();
    s.gate_rate_hz = 1e9;
    assert!(matches!(run(&s, 10, 1), Err(Error::Configuration(_))));
    let mut s = Scenario::bench();
    s.output_filter_c.center_wavelength_nm = 1530.0;
    assert!(matches!(s.validate(), Err(Error::Configuration(_))));
    let mut s = Scenario::bench();
    s.detector_b.efficiency = 1.5;
    assert!(matches!(s.validate(), Err(Error::Configuration(_))));
    let mut s = Scenario::bench();
    s.layout
        .segments
        .retain(|seg| seg.to != crate::components::ChipNode::PortC);
    assert!(matches!(s.validate(), Err(Error::Configuration(_))));
    assert!(matches!(run(&Scenario::bench(), 0, 1), Err(Error::Domain(_))));
}

#[test]
fn dark_free_run_has_no_accidentals() {
    let s = Scenario::idealized(0.05, 0.02);
    let r = run(&s, 500_000, 2).unwrap();
    assert_eq!(r.accidentals_at_delay.net, r.at_delay.threefold_abc as f64);
    assert_eq!(r.raw_visibility, r.net_visibility);
}

#[test]
fn signal_free_run_is_pure_accidentals() {
    let mut s = Scenario::bench();
    s.external_source.pump_power_mw = 0.0;
    s.chip_source.pump_power_mw = 0.0;
    for d in [&mut s.detector_a, &mut s.detector_b, &mut s.detector_c] {
        d.dark_prob_per_ns = 0.02;
    }
    s.gate_rate_hz = s.repetition_rate_hz;
    let r = run(&s, 2_000_000, 4).unwrap();
    let acc = r.accidentals_at_delay;
    assert!(acc.raw > 0.0);
    assert_eq!(r.at_delay.photons.generated, 0);
    assert!(acc.net <= 3.0 * acc.net_error, "{acc:?}");
}
