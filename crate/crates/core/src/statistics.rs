//! Photon-pair number distributions per pump pulse and their conditioning on
//! a herald detection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default truncation point of the number basis.
pub const DEFAULT_N_MAX: usize = 20;

/// Probability mass allowed to be lost to truncation.
pub const TRUNCATION_TOLERANCE: f64 = 1e-12;

/// Which constructor produced a distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Thermal,
    Poisson,
    Conditional,
    Custom,
}

/// Truncated probability mass function over the number of pairs (or photons)
/// in one pulse, indexed by `n = 0..=n_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonNumberDistribution {
    pmf: Vec<f64>,
    mean_pairs: f64,
    family: Family,
}

fn check_mean(mean: f64) -> Result<()> {
    if !mean.is_finite() || mean < 0.0 {
        return Err(Error::Domain(format!(
            "mean pair number must be finite and non-negative, got {mean}"
        )));
    }
    Ok(())
}

/// Single-mode thermal distribution `Nⁿ/(1+N)ⁿ⁺¹`, truncated at `n_max`.
pub fn thermal(mean: f64, n_max: usize) -> Result<PhotonNumberDistribution> {
    check_mean(mean)?;
    let ratio = mean / (1.0 + mean);
    let mut pmf = Vec::with_capacity(n_max + 1);
    let mut p = 1.0 / (1.0 + mean);
    for _ in 0..=n_max {
        pmf.push(p);
        p *= ratio;
    }
    Ok(PhotonNumberDistribution {
        pmf,
        mean_pairs: mean,
        family: Family::Thermal,
    })
}

/// Poisson distribution `e^{-N} Nⁿ/n!`, truncated at `n_max`.
pub fn poisson(mean: f64, n_max: usize) -> Result<PhotonNumberDistribution> {
    check_mean(mean)?;
    let mut pmf = Vec::with_capacity(n_max + 1);
    let mut p = (-mean).exp();
    for n in 0..=n_max {
        pmf.push(p);
        p *= mean / (n + 1) as f64;
    }
    Ok(PhotonNumberDistribution {
        pmf,
        mean_pairs: mean,
        family: Family::Poisson,
    })
}

impl PhotonNumberDistribution {
    /// Builds a distribution from explicit probabilities. The entries must be
    /// non-negative and sum to one within [`TRUNCATION_TOLERANCE`].
    pub fn custom(pmf: Vec<f64>) -> Result<Self> {
        if pmf.is_empty() {
            return Err(Error::Domain("empty probability mass function".into()));
        }
        if pmf.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Domain("probabilities must be finite and non-negative".into()));
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > TRUNCATION_TOLERANCE {
            return Err(Error::Domain(format!("probabilities sum to {total}, not 1")));
        }
        let mean = moment(&pmf);
        Ok(PhotonNumberDistribution {
            pmf,
            mean_pairs: mean,
            family: Family::Custom,
        })
    }

    /// Vacuum: zero pairs with certainty.
    pub fn vacuum() -> Self {
        PhotonNumberDistribution {
            pmf: vec![1.0],
            mean_pairs: 0.0,
            family: Family::Custom,
        }
    }

    /// Exactly `n` quanta with certainty.
    pub fn fock(n: usize) -> Self {
        let mut pmf = vec![0.0; n + 1];
        pmf[n] = 1.0;
        PhotonNumberDistribution {
            pmf,
            mean_pairs: n as f64,
            family: Family::Custom,
        }
    }

    /// `P(n)`; zero beyond the truncation point.
    pub fn p(&self, n: usize) -> f64 {
        self.pmf.get(n).copied().unwrap_or(0.0)
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn n_max(&self) -> usize {
        self.pmf.len() - 1
    }

    /// The mean the distribution was constructed for.
    pub fn mean_pairs(&self) -> f64 {
        self.mean_pairs
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// Total retained probability mass.
    pub fn total(&self) -> f64 {
        self.pmf.iter().sum()
    }

    /// Mean computed from the (truncated) mass function.
    pub fn pmf_mean(&self) -> f64 {
        moment(&self.pmf)
    }

    /// Whether the retained mass is within the truncation tolerance of one.
    pub fn is_normalized(&self) -> bool {
        let total = self.total();
        (1.0 - TRUNCATION_TOLERANCE..=1.0 + 1e-15).contains(&total)
    }

    /// Binomial thinning: every quantum independently survives with
    /// probability `transmission`. Thermal and Poisson laws stay in their family.
    pub fn thinned(&self, transmission: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&transmission) {
            return Err(Error::Domain(format!(
                "transmission must lie in [0, 1], got {transmission}"
            )));
        }
        let n_max = self.n_max();
        let mut out = vec![0.0; n_max + 1];
        for (n, &pn) in self.pmf.iter().enumerate() {
            if pn == 0.0 {
                continue;
            }
            for (k, slot) in out.iter_mut().enumerate().take(n + 1) {
                *slot += pn * binomial_pmf(n, k, transmission);
            }
        }
        Ok(PhotonNumberDistribution {
            pmf: out,
            mean_pairs: self.mean_pairs * transmission,
            family: self.family,
        })
    }

    /// Cumulative table for inverse-transform sampling.
    pub fn sampler(&self) -> Sampler {
        let total = self.total();
        let mut acc = 0.0;
        let cdf = self
            .pmf
            .iter()
            .map(|p| {
                acc += p / total;
                acc
            })
            .collect();
        Sampler { cdf }
    }
}

fn moment(pmf: &[f64]) -> f64 {
    pmf.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
}

/// `C(n, k) p^k (1-p)^(n-k)`.
pub fn binomial_pmf(n: usize, k: usize, p: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut coeff = 1.0;
    for i in 0..k.min(n - k) {
        coeff = coeff * (n - i) as f64 / (i + 1) as f64;
    }
    coeff * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
}

/// Inverse-CDF sampler over a [`PhotonNumberDistribution`].
#[derive(Debug, Clone)]
pub struct Sampler {
    cdf: Vec<f64>,
}

impl Sampler {
    /// Maps a uniform deviate in `[0, 1)` to a number of quanta.
    #[inline]
    pub fn sample(&self, u: f64) -> usize {
        // Vacuum dominates at the means used here, so a linear scan wins.
        for (n, &c) in self.cdf.iter().enumerate() {
            if u < c {
                return n;
            }
        }
        self.cdf.len() - 1
    }
}

/// Detection model of a herald arm: end-to-end efficiency from pair creation
/// to a click, plus the per-gate dark-click probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeraldModel {
    pub herald_efficiency: f64,
    pub herald_dark_prob: f64,
}

impl HeraldModel {
    pub fn new(herald_efficiency: f64, herald_dark_prob: f64) -> Result<Self> {
        let model = HeraldModel {
            herald_efficiency,
            herald_dark_prob,
        };
        model.validate()?;
        Ok(model)
    }

    /// The `η_h → 0` limit with no dark clicks. Conditioning then weights
    /// every term by its pair number.
    pub fn vanishing_efficiency() -> Self {
        HeraldModel {
            herald_efficiency: 0.0,
            herald_dark_prob: 0.0,
        }
    }

    /// A perfect herald: every pair clicks, nothing else does.
    pub fn ideal() -> Self {
        HeraldModel {
            herald_efficiency: 1.0,
            herald_dark_prob: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("herald efficiency", self.herald_efficiency),
            ("herald dark probability", self.herald_dark_prob),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Domain(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }

    fn is_vanishing_limit(&self) -> bool {
        self.herald_efficiency == 0.0 && self.herald_dark_prob == 0.0
    }

    /// `1 - (1-η)ⁿ(1-d)`: probability the herald fires given `n` pairs.
    pub fn click_prob(&self, n: usize) -> f64 {
        let eta = self.herald_efficiency;
        let dark = self.herald_dark_prob;
        if n == 0 {
            return dark;
        }
        if eta >= 1.0 {
            return 1.0;
        }
        let log_miss = n as f64 * (-eta).ln_1p() + (-dark).ln_1p();
        -log_miss.exp_m1()
    }
}

/// Conditions `dist` on a herald click.
///
/// With the herald model `(0, 0)` the result is the vanishing-efficiency
/// limit `n·P(n)/N`. Conditioning on a vacuum-only distribution with no dark
/// clicks is undefined.
pub fn herald_condition(dist: &PhotonNumberDistribution, model: &HeraldModel) -> Result<PhotonNumberDistribution> {
    model.validate()?;
    let weighted: Vec<f64> = if model.is_vanishing_limit() {
        dist.pmf.iter().enumerate().map(|(n, p)| n as f64 * p).collect()
    } else {
        dist.pmf
            .iter()
            .enumerate()
            .map(|(n, p)| p * model.click_prob(n))
            .collect()
    };
    let click: f64 = weighted.iter().sum();
    if click <= 0.0 {
        return Err(Error::UndefinedConditioning(
            "the herald never fires for this distribution".into(),
        ));
    }
    let pmf: Vec<f64> = weighted.into_iter().map(|w| w / click).collect();
    let mean = moment(&pmf);
    Ok(PhotonNumberDistribution {
        pmf,
        mean_pairs: mean,
        family: Family::Conditional,
    })
}
