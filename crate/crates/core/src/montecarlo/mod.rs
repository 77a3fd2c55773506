//! Pulse-by-pulse simulation of the coalescence experiment: an external pair
//! source feeding port 1 of the chip, the on-chip pair source split at C₁,
//! two-photon interference at C₂ and gated detection at outputs A, B and C.

mod accidentals;
mod expected;
mod scan;
mod scenario;

use std::ops::{Add, AddAssign};

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::statistics::Sampler;

pub use accidentals::{
    photon_only_threefold, subtract_accidentals, AccidentalEstimate, ClickProbabilities, DarkProbabilities,
};
pub use expected::{expected_counts, ExpectedCounts};
pub use scan::{scan_dip, DipScan, ScanPoint};
pub use scenario::{Channels, MonitorChannel, PairLaw, Scenario};

/// Pulses handled by one random stream. Fixed so that results never depend
/// on how batches are spread over threads.
pub const BATCH_PULSES: u64 = 1 << 16;

/// Stream tag of the run at the configured delay.
pub const STREAM_AT_DELAY: u64 = 0;
/// Stream tag of the distinguishable reference run.
pub const STREAM_REFERENCE: u64 = 1;

/// Click tallies per detector.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Singles {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub monitor: u64,
}

/// Fate of every photon created during a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PhotonLedger {
    pub generated: u64,
    /// Absorbed, scattered or filtered out before reaching a detector.
    pub lost: u64,
    /// Reached a detector without producing a photo-count.
    pub undetected: u64,
    pub detected: u64,
}

impl PhotonLedger {
    pub fn is_balanced(&self) -> bool {
        self.lost + self.undetected + self.detected == self.generated
    }
}

/// Integer tallies of one simulated stream.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Tallies {
    pub gated_pulses: u64,
    pub singles: Singles,
    pub twofold_ab: u64,
    pub twofold_ac: u64,
    pub twofold_bc: u64,
    pub threefold_abc: u64,
    pub photons: PhotonLedger,
}

impl Add for Tallies {
    type Output = Tallies;
    fn add(mut self, rhs: Tallies) -> Tallies {
        self += rhs;
        self
    }
}

impl AddAssign for Tallies {
    fn add_assign(&mut self, r: Tallies) {
        self.gated_pulses += r.gated_pulses;
        self.singles.a += r.singles.a;
        self.singles.b += r.singles.b;
        self.singles.c += r.singles.c;
        self.singles.monitor += r.singles.monitor;
        self.twofold_ab += r.twofold_ab;
        self.twofold_ac += r.twofold_ac;
        self.twofold_bc += r.twofold_bc;
        self.threefold_abc += r.threefold_abc;
        self.photons.generated += r.photons.generated;
        self.photons.lost += r.photons.lost;
        self.photons.undetected += r.photons.undetected;
        self.photons.detected += r.photons.detected;
    }
}

/// A visibility `1 - R(δx)/R_ref` with its propagated one-sigma error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VisibilityEstimate {
    pub value: f64,
    pub error: f64,
}

impl VisibilityEstimate {
    /// Visibility from counts `(count, error, gated)` at the delay and in
    /// the reference stream. `None` when the reference holds no events.
    pub fn from_counts(at: (f64, f64, u64), reference: (f64, f64, u64)) -> Option<Self> {
        let (c_d, s_d, g_d) = at;
        let (c_r, s_r, g_r) = reference;
        if c_r <= 0.0 || g_d == 0 || g_r == 0 {
            return None;
        }
        let r_d = c_d / g_d as f64;
        let r_r = c_r / g_r as f64;
        let ratio = r_d / r_r;
        let rel_d = s_d / g_d as f64 / r_r;
        let rel_r = ratio * (s_r / c_r);
        Some(VisibilityEstimate {
            value: 1.0 - ratio,
            error: (rel_d * rel_d + rel_r * rel_r).sqrt(),
        })
    }

    /// Number of standard errors separating the estimate from `expected`.
    pub fn z_score(&self, expected: f64) -> f64 {
        (self.value - expected) / self.error
    }
}

/// Result of [`run`]: tallies at the configured delay and in an independent
/// reference stream with fully distinguishable photons.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountsReport {
    pub seed: u64,
    pub pulses_simulated: u64,
    pub delay_mm: f64,
    pub at_delay: Tallies,
    pub reference: Tallies,
    pub dark_prob_per_gate: DarkProbabilities,
    pub accidentals_at_delay: AccidentalEstimate,
    pub accidentals_reference: AccidentalEstimate,
    pub raw_visibility: Option<VisibilityEstimate>,
    pub net_visibility: Option<VisibilityEstimate>,
}

impl CountsReport {
    pub fn gated_pulses(&self) -> u64 {
        self.at_delay.gated_pulses
    }
}

/// Simulates `n_pulses` laser pulses at the scenario's delay and again with
/// distinguishable photons, then subtracts accidentals from both.
pub fn run(scenario: &Scenario, n_pulses: u64, seed: u64) -> Result<CountsReport> {
    if n_pulses == 0 {
        return Err(Error::Domain("number of pulses must be positive".into()));
    }
    let channels = scenario.channels()?;
    let at_delay = simulate(
        &channels,
        channels.overlap_at(scenario.delay_mm),
        n_pulses,
        seed,
        STREAM_AT_DELAY,
    );
    let reference = simulate(&channels, 0.0, n_pulses, seed, STREAM_REFERENCE);
    let darks = channels.darks();
    let acc_d = subtract_accidentals(&at_delay, &darks);
    let acc_r = subtract_accidentals(&reference, &darks);
    let raw = VisibilityEstimate::from_counts(
        (
            at_delay.threefold_abc as f64,
            poisson_sigma(at_delay.threefold_abc as f64),
            at_delay.gated_pulses,
        ),
        (
            reference.threefold_abc as f64,
            poisson_sigma(reference.threefold_abc as f64),
            reference.gated_pulses,
        ),
    );
    let net = VisibilityEstimate::from_counts(
        (acc_d.net, acc_d.net_error, at_delay.gated_pulses),
        (acc_r.net, acc_r.net_error, reference.gated_pulses),
    );
    Ok(CountsReport {
        seed,
        pulses_simulated: n_pulses,
        delay_mm: scenario.delay_mm,
        at_delay,
        reference,
        dark_prob_per_gate: darks,
        accidentals_at_delay: acc_d,
        accidentals_reference: acc_r,
        raw_visibility: raw,
        net_visibility: net,
    })
}

/// `√count`, floored at one event so empty tallies keep a finite error.
pub(crate) fn poisson_sigma(count: f64) -> f64 {
    count.max(1.0).sqrt()
}

/// Runs one stream of `n_pulses` pulses with two-photon overlap `overlap`.
pub fn simulate(channels: &Channels, overlap: f64, n_pulses: u64, seed: u64, stream: u64) -> Tallies {
    let n_batches = n_pulses.div_ceil(BATCH_PULSES);
    let sampler_a = channels.external_pairs.sampler();
    let sampler_b = channels.chip_pairs.sampler();
    let hom = Coalescence::new(channels.c2_cross, overlap);
    (0..n_batches)
        .into_par_iter()
        .map(|batch| {
            let start = batch * BATCH_PULSES;
            let len = BATCH_PULSES.min(n_pulses - start);
            let mut rng = Xoshiro256PlusPlus::seed_from_u64(stream_key(seed, stream, batch));
            let mut t = Tallies::default();
            let gated = gated_in_batch(&mut rng, len, channels.gate_probability);
            for _ in 0..gated {
                pulse(&mut rng, channels, &hom, &sampler_a, &sampler_b, &mut t);
            }
            t.gated_pulses = gated;
            t
        })
        .reduce(Tallies::default, Add::add)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn stream_key(seed: u64, stream: u64, batch: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ batch)
}

/// Number of gated pulses among `len`, each selected independently with
/// probability `p`, drawn by geometric skipping.
fn gated_in_batch(rng: &mut Xoshiro256PlusPlus, len: u64, p: f64) -> u64 {
    if p >= 1.0 {
        return len;
    }
    if p <= 0.0 {
        return 0;
    }
    let log_q = (-p).ln_1p();
    let mut count = 0;
    let mut pos = 0u64;
    loop {
        let u: f64 = 1.0 - rng.random::<f64>();
        let skip = (u.ln() / log_q).floor();
        if skip >= (len - pos) as f64 {
            return count;
        }
        pos += skip as u64 + 1;
        count += 1;
        if pos >= len {
            return count;
        }
    }
}

/// Outcome probabilities for one photon entering each input of C₂.
struct Coalescence {
    split: f64,
    both_a: f64,
}

impl Coalescence {
    fn new(cross: f64, overlap: f64) -> Self {
        let t = cross;
        let tr = t * (1.0 - t);
        Coalescence {
            split: (t * t + (1.0 - t) * (1.0 - t) - 2.0 * tr * overlap).max(0.0),
            both_a: tr * (1.0 + overlap),
        }
    }
}

/// Sends one photon toward a detector. Returns true when it is detected.
#[inline]
fn deliver(rng: &mut Xoshiro256PlusPlus, arrive: f64, eta: f64, ledger: &mut PhotonLedger) -> bool {
    let u: f64 = rng.random();
    if u < arrive * eta {
        ledger.detected += 1;
        true
    } else if u < arrive {
        ledger.undetected += 1;
        false
    } else {
        ledger.lost += 1;
        false
    }
}

#[inline]
fn dark(rng: &mut Xoshiro256PlusPlus, p: f64) -> bool {
    p > 0.0 && rng.random::<f64>() < p
}

fn pulse(
    rng: &mut Xoshiro256PlusPlus,
    ch: &Channels,
    hom: &Coalescence,
    sampler_a: &Sampler,
    sampler_b: &Sampler,
    t: &mut Tallies,
) {
    let ka = sampler_a.sample(rng.random());
    let kb = sampler_b.sample(rng.random());
    let ledger = &mut t.photons;
    ledger.generated += 2 * (ka + kb) as u64;

    // External pairs: the 1530 nm photon heads for C₂, its partner for the
    // monitor detector.
    let mut ma = 0usize;
    let mut monitor_hit = false;
    for _ in 0..ka {
        if rng.random::<f64>() < ch.external_to_c2 {
            ma += 1;
        } else {
            ledger.lost += 1;
        }
        match &ch.monitor {
            Some(m) => monitor_hit |= deliver(rng, m.arrive, m.efficiency, ledger),
            None => ledger.lost += 1,
        }
    }

    // On-chip pairs, split at C₁.
    let mut mb = 0usize;
    let mut c_hit = false;
    for _ in 0..kb {
        if rng.random::<f64>() < ch.chip_to_c2 {
            mb += 1;
        } else {
            ledger.lost += 1;
        }
        c_hit |= deliver(rng, ch.arrive_c, ch.eta_c, ledger);
    }

    // Routing at C₂.
    let (na, nb) = if ma == 1 && mb == 1 {
        let u: f64 = rng.random();
        if u < hom.split {
            (1, 1)
        } else if u < hom.split + hom.both_a {
            (2, 0)
        } else {
            (0, 2)
        }
    } else {
        let mut na = 0;
        for _ in 0..ma {
            na += usize::from(rng.random::<f64>() >= ch.c2_cross);
        }
        for _ in 0..mb {
            na += usize::from(rng.random::<f64>() < ch.c2_cross);
        }
        (na, ma + mb - na)
    };

    let mut a_hit = false;
    for _ in 0..na {
        a_hit |= deliver(rng, ch.arrive_a, ch.eta_a, ledger);
    }
    let mut b_hit = false;
    for _ in 0..nb {
        b_hit |= deliver(rng, ch.arrive_b, ch.eta_b, ledger);
    }

    a_hit |= dark(rng, ch.dark_a);
    b_hit |= dark(rng, ch.dark_b);
    c_hit |= dark(rng, ch.dark_c);
    if let Some(m) = &ch.monitor {
        monitor_hit |= dark(rng, m.dark);
    }

    let s = &mut t.singles;
    s.a += u64::from(a_hit);
    s.b += u64::from(b_hit);
    s.c += u64::from(c_hit);
    s.monitor += u64::from(monitor_hit);
    t.twofold_ab += u64::from(a_hit && b_hit);
    t.twofold_ac += u64::from(a_hit && c_hit);
    t.twofold_bc += u64::from(b_hit && c_hit);
    t.threefold_abc += u64::from(a_hit && b_hit && c_hit);
}

#[cfg(test)]
mod tests;
