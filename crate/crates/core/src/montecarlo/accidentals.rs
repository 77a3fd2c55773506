use serde::Serialize;

use super::{poisson_sigma, Tallies};

/// Per-gate dark-click probabilities of D_a, D_b and D_c.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct DarkProbabilities {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// Split of the raw three-fold tally into photon events and accidentals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AccidentalEstimate {
    pub raw: f64,
    pub raw_error: f64,
    /// Three-folds involving at least one dark click.
    pub accidentals: f64,
    pub net: f64,
    pub net_error: f64,
}

/// Removes three-folds involving dark clicks.
///
/// Dark clicks are independent of the light and of each other, so the
/// probability that none of a detector set `X` clicks factorises as
/// `N_X = Π_{x∈X}(1-d_x) · Y_X`, with `Y_X` the photon-only no-click
/// probability. Every `N_X` follows from the measured singles, two-folds and
/// three-folds; dividing out the dark factors and recombining the `Y_X` by
/// inclusion-exclusion yields the photon-only three-fold probability.
pub fn subtract_accidentals(t: &Tallies, darks: &DarkProbabilities) -> AccidentalEstimate {
    let raw = t.threefold_abc as f64;
    let raw_error = poisson_sigma(raw);
    let g = t.gated_pulses as f64;
    if t.gated_pulses == 0 || (darks.a == 0.0 && darks.b == 0.0 && darks.c == 0.0) {
        return AccidentalEstimate {
            raw,
            raw_error,
            accidentals: 0.0,
            net: raw,
            net_error: raw_error,
        };
    }
    let p = |c: u64| c as f64 / g;
    let probs = ClickProbabilities {
        a: p(t.singles.a),
        b: p(t.singles.b),
        c: p(t.singles.c),
        ab: p(t.twofold_ab),
        ac: p(t.twofold_ac),
        bc: p(t.twofold_bc),
        abc: p(t.threefold_abc),
    };
    let q_abc = photon_only_threefold(&probs, darks);

    let net = (q_abc * g).clamp(0.0, raw);
    let accidentals = raw - net;
    // The accidental estimate rests on two-fold tallies; take the scarcest
    // one as its relative precision.
    let support = t.twofold_ab.min(t.twofold_ac).min(t.twofold_bc) as f64;
    let acc_error = accidentals / (1.0 + support).sqrt();
    AccidentalEstimate {
        raw,
        raw_error,
        accidentals,
        net,
        net_error: (raw_error * raw_error + acc_error * acc_error).sqrt(),
    }
}

/// Per-gate probabilities that each detector set clicks together.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ClickProbabilities {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub ab: f64,
    pub ac: f64,
    pub bc: f64,
    pub abc: f64,
}

/// Three-fold probability with the dark-click contributions removed.
pub fn photon_only_threefold(p: &ClickProbabilities, darks: &DarkProbabilities) -> f64 {
    let (da, db, dc) = (darks.a, darks.b, darks.c);
    // `Y_X - 1` for every detector set; the constant terms cancel in the
    // inclusion-exclusion sum and are dropped to keep small differences exact.
    let y = |no_click_minus_one: f64, ds: &[f64]| {
        let keep: f64 = ds.iter().map(|d| 1.0 - d).product();
        no_click_minus_one / keep + dark_excess(ds)
    };
    let ya = y(-p.a, &[da]);
    let yb = y(-p.b, &[db]);
    let yc = y(-p.c, &[dc]);
    let yab = y(-p.a - p.b + p.ab, &[da, db]);
    let yac = y(-p.a - p.c + p.ac, &[da, dc]);
    let ybc = y(-p.b - p.c + p.bc, &[db, dc]);
    let yabc = y(-p.a - p.b - p.c + p.ab + p.ac + p.bc - p.abc, &[da, db, dc]);
    -ya - yb - yc + yab + yac + ybc - yabc
}

/// `1/Π(1-d) - 1` without cancellation for small `d`.
fn dark_excess(ds: &[f64]) -> f64 {
    let log_keep: f64 = ds.iter().map(|d| (-d).ln_1p()).sum();
    (-log_keep).exp_m1()
}
