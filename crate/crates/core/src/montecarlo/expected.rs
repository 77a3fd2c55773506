use serde::Serialize;

use crate::statistics::binomial_pmf;

#[cfg(test)]
use super::accidentals::photon_only_threefold;
use super::accidentals::ClickProbabilities;
use super::scenario::Channels;
use super::Coalescence;

/// Exact per-gate click probabilities of the simulated apparatus, the limit
/// of infinitely many pulses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpectedCounts {
    pub overlap: f64,
    pub clicks: ClickProbabilities,
    pub monitor: f64,
    /// Three-fold probability with every dark click removed.
    pub photon_threefold: f64,
}

impl ExpectedCounts {
    pub fn accidental_threefold(&self) -> f64 {
        self.clicks.abc - self.photon_threefold
    }
}

/// `1 - Π(1-x)^n` over `(x, n)` factors, accurate when the result is small.
fn miss_complement(factors: &[(f64, usize)]) -> f64 {
    let mut log_keep = 0.0;
    for &(x, n) in factors {
        if n == 0 || x == 0.0 {
            continue;
        }
        if x >= 1.0 {
            return 1.0;
        }
        log_keep += n as f64 * (-x).ln_1p();
    }
    -log_keep.exp_m1()
}

struct Outputs {
    e_a: f64,
    e_b: f64,
    dark_a: f64,
    dark_b: f64,
    cross: f64,
}

/// Click probabilities of A, B and of both.
struct PortClicks {
    a: f64,
    b: f64,
    ab: f64,
}

impl Outputs {
    fn placed(&self, na: usize, nb: usize) -> PortClicks {
        let a = miss_complement(&[(self.dark_a, 1), (self.e_a, na)]);
        let b = miss_complement(&[(self.dark_b, 1), (self.e_b, nb)]);
        PortClicks { a, b, ab: a * b }
    }

    fn clicks(&self, hom: &Coalescence, ma: usize, mb: usize) -> PortClicks {
        if ma == 1 && mb == 1 {
            let both_b = 1.0 - hom.split - hom.both_a;
            let branches = [
                (hom.split, self.placed(1, 1)),
                (hom.both_a, self.placed(2, 0)),
                (both_b, self.placed(0, 2)),
            ];
            let mix = |f: fn(&PortClicks) -> f64| branches.iter().map(|(w, c)| w * f(c)).sum();
            return PortClicks {
                a: mix(|c| c.a),
                b: mix(|c| c.b),
                ab: mix(|c| c.ab),
            };
        }
        // A port-1 photon exits at A with probability 1 - t, a chip photon with t.
        let (e_a, e_b, t) = (self.e_a, self.e_b, self.cross);
        let (ra, rb) = (1.0 - t, t);
        let a = miss_complement(&[(self.dark_a, 1), (ra * e_a, ma), (rb * e_a, mb)]);
        let b = miss_complement(&[(self.dark_b, 1), ((1.0 - ra) * e_b, ma), ((1.0 - rb) * e_b, mb)]);
        let either = miss_complement(&[
            (self.dark_a, 1),
            (self.dark_b, 1),
            (ra * e_a + (1.0 - ra) * e_b, ma),
            (rb * e_a + (1.0 - rb) * e_b, mb),
        ]);
        PortClicks {
            a,
            b,
            ab: a + b - either,
        }
    }
}

fn click_probabilities(ch: &Channels, hom: &Coalescence, darks: bool) -> ClickProbabilities {
    let dark = |d: f64| if darks { d } else { 0.0 };
    let out = Outputs {
        e_a: ch.arrive_a * ch.eta_a,
        e_b: ch.arrive_b * ch.eta_b,
        dark_a: dark(ch.dark_a),
        dark_b: dark(ch.dark_b),
        cross: ch.c2_cross,
    };
    let e_c = ch.arrive_c * ch.eta_c;
    let mut p = ClickProbabilities::default();
    for (ka, &wa) in ch.external_pairs.pmf().iter().enumerate() {
        if wa == 0.0 {
            continue;
        }
        for (kb, &wb) in ch.chip_pairs.pmf().iter().enumerate() {
            if wb == 0.0 {
                continue;
            }
            // D_c sees only chip partners, independent of the C₂ routing.
            let c = miss_complement(&[(dark(ch.dark_c), 1), (e_c, kb)]);
            let mut ports = PortClicks {
                a: 0.0,
                b: 0.0,
                ab: 0.0,
            };
            let mut total = 0.0;
            for ma in 0..=ka {
                let wma = binomial_pmf(ka, ma, ch.external_to_c2);
                for mb in 0..=kb {
                    let wm = wma * binomial_pmf(kb, mb, ch.chip_to_c2);
                    if wm == 0.0 {
                        continue;
                    }
                    let k = out.clicks(hom, ma, mb);
                    ports.a += wm * k.a;
                    ports.b += wm * k.b;
                    ports.ab += wm * k.ab;
                    total += wm;
                }
            }
            let w = wa * wb;
            p.a += w * ports.a;
            p.b += w * ports.b;
            p.c += w * total * c;
            p.ab += w * ports.ab;
            p.ac += w * ports.a * c;
            p.bc += w * ports.b * c;
            p.abc += w * ports.ab * c;
        }
    }
    p
}

/// Enumerates every pair-number and routing pattern up to the truncation of
/// the source laws and returns exact click probabilities at `overlap`.
pub fn expected_counts(ch: &Channels, overlap: f64) -> ExpectedCounts {
    let hom = Coalescence::new(ch.c2_cross, overlap);
    let clicks = click_probabilities(ch, &hom, true);
    let photon_threefold = click_probabilities(ch, &hom, false).abc;
    let monitor = match &ch.monitor {
        Some(m) => {
            let e = m.arrive * m.efficiency;
            ch.external_pairs
                .pmf()
                .iter()
                .enumerate()
                .map(|(k, w)| w * miss_complement(&[(m.dark, 1), (e, k)]))
                .sum()
        }
        None => 0.0,
    };
    ExpectedCounts {
        overlap,
        clicks,
        monitor,
        photon_threefold,
    }
}

/// Photon-only three-fold recovered from the click probabilities alone.
#[cfg(test)]
pub(crate) fn recovered_threefold(e: &ExpectedCounts, ch: &Channels) -> f64 {
    photon_only_threefold(&e.clicks, &ch.darks())
}
