//! Closed-form Hong-Ou-Mandel visibility: the timing bound, the multi-pair
//! statistics bound, visibility maps over source brightness and the gaussian
//! dip profile with its least-squares fit.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::statistics::{self, herald_condition, HeraldModel, PhotonNumberDistribution};
use crate::units::{delay_to_path, Picoseconds, FOUR_LN_2};

/// Visibility split into its independent limiting factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VisibilityBreakdown {
    pub v_statistics: f64,
    pub v_timing: f64,
    pub v_total: f64,
}

impl VisibilityBreakdown {
    pub fn new(v_statistics: f64, v_timing: f64) -> Self {
        VisibilityBreakdown {
            v_statistics,
            v_timing,
            v_total: v_statistics * v_timing,
        }
    }
}

/// Upper bound from the arrival-time uncertainty of the two photons,
/// `1/√((τ_uncert/τ_c)² + 1)`.
pub fn v_timing(tau_uncert: Picoseconds, tau_c: Picoseconds) -> Result<f64> {
    if !(tau_c.0.is_finite() && tau_c.0 > 0.0) {
        return Err(Error::Domain(format!("coherence time must be positive, got {tau_c}")));
    }
    if !(tau_uncert.0.is_finite() && tau_uncert.0 >= 0.0) {
        return Err(Error::Domain(format!(
            "timing uncertainty must be non-negative, got {tau_uncert}"
        )));
    }
    let r = tau_uncert.0 / tau_c.0;
    Ok(1.0 / (r * r + 1.0).sqrt())
}

/// Coincidence probabilities inside and outside the dip, to second order in
/// the photon numbers entering each coupler input:
///
/// `p_min = P₀ₐP₂ᵦ + P₂ₐP₀ᵦ`, `p_max = P₁ₐP₁ᵦ + p_min`.
pub fn p_coincidence_bounds(dist_a: &PhotonNumberDistribution, dist_b: &PhotonNumberDistribution) -> (f64, f64) {
    let p_min = dist_a.p(0) * dist_b.p(2) + dist_a.p(2) * dist_b.p(0);
    let p_max = dist_a.p(1) * dist_b.p(1) + p_min;
    (p_min, p_max)
}

/// `(p_max - p_min)/p_max`.
pub fn v_statistics(dist_a: &PhotonNumberDistribution, dist_b: &PhotonNumberDistribution) -> Result<f64> {
    let (p_min, p_max) = p_coincidence_bounds(dist_a, dist_b);
    if p_max <= 0.0 {
        return Err(Error::UndefinedVisibility);
    }
    Ok(((p_max - p_min) / p_max).clamp(0.0, 1.0))
}

/// Visibility over a grid of source means.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VisibilityMap {
    pub n_a: Vec<f64>,
    pub n_b: Vec<f64>,
    /// `values[i][j]` is the visibility at `(n_a[i], n_b[j])`.
    pub values: Vec<Vec<f64>>,
}

impl VisibilityMap {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }

    /// Rows `(N_a, N_b, visibility)` in grid order.
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.n_a.iter().enumerate().flat_map(move |(i, &a)| {
            self.n_b
                .iter()
                .enumerate()
                .map(move |(j, &b)| (a, b, self.values[i][j]))
        })
    }
}

/// Evaluates [`v_statistics`] between an unheralded thermal source of mean
/// `N_a` and a thermal source of mean `N_b` conditioned on `herald` (or left
/// unheralded when `herald` is `None`).
pub fn visibility_map(grid_na: &[f64], grid_nb: &[f64], herald: Option<&HeraldModel>) -> Result<VisibilityMap> {
    if grid_na.is_empty() || grid_nb.is_empty() {
        return Err(Error::Domain("visibility map grids must be non-empty".into()));
    }
    let dists_b: Vec<PhotonNumberDistribution> = grid_nb
        .iter()
        .map(|&nb| {
            let d = statistics::thermal(nb, statistics::DEFAULT_N_MAX)?;
            match herald {
                Some(h) => herald_condition(&d, h),
                None => Ok(d),
            }
        })
        .collect::<Result<_>>()?;
    let values = grid_na
        .par_iter()
        .map(|&na| {
            let da = statistics::thermal(na, statistics::DEFAULT_N_MAX)?;
            dists_b
                .iter()
                .map(|db| v_statistics(&da, db))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VisibilityMap {
        n_a: grid_na.to_vec(),
        n_b: grid_nb.to_vec(),
        values,
    })
}

/// One point of a measured or modelled dip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DipSample {
    pub position_mm: f64,
    pub rate: f64,
    /// One-sigma uncertainty on `rate`; zero for noiseless samples.
    pub error: f64,
}

/// Parameters of a gaussian dip fitted to samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DipFit {
    pub baseline: f64,
    pub baseline_error: f64,
    pub visibility: f64,
    pub visibility_error: f64,
    pub fwhm_mm: f64,
    pub fwhm_error_mm: f64,
    pub center_mm: f64,
    pub center_error_mm: f64,
    pub reduced_chi_squared: f64,
}

/// Sampled dip together with its gaussian fit. When the fit fails the raw
/// samples are kept and `fit_failure` holds the reason.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DipProfile {
    pub samples: Vec<DipSample>,
    pub fit: Option<DipFit>,
    pub fit_failure: Option<String>,
}

impl DipProfile {
    pub fn from_samples(samples: Vec<DipSample>) -> Self {
        match fit_gaussian_dip(&samples) {
            Ok(fit) => DipProfile {
                samples,
                fit: Some(fit),
                fit_failure: None,
            },
            Err(e) => DipProfile {
                samples,
                fit: None,
                fit_failure: Some(e.to_string()),
            },
        }
    }
}

/// Gaussian dip `baseline·[1 - V·exp(-4 ln2 (δx/(c·τ))²)]` evaluated at
/// `positions` and re-fitted.
pub fn dip_profile(v_total: f64, tau_fwhm: Picoseconds, baseline: f64, positions: &[f64]) -> Result<DipProfile> {
    if !(0.0..=1.0).contains(&v_total) {
        return Err(Error::Domain(format!("visibility must lie in [0, 1], got {v_total}")));
    }
    if !(tau_fwhm.0.is_finite() && tau_fwhm.0 > 0.0) {
        return Err(Error::Domain(format!("dip width must be positive, got {tau_fwhm}")));
    }
    let width_mm = delay_to_path(tau_fwhm).0;
    let samples = positions
        .iter()
        .map(|&x| DipSample {
            position_mm: x,
            rate: baseline * (1.0 - v_total * gaussian(x, 0.0, width_mm)),
            error: 0.0,
        })
        .collect();
    Ok(DipProfile::from_samples(samples))
}

/// Unit-peak gaussian of full width `fwhm` centred at `center`.
pub fn gaussian(x: f64, center: f64, fwhm: f64) -> f64 {
    let u = (x - center) / fwhm;
    (-FOUR_LN_2 * u * u).exp()
}

fn dip_model(p: &[f64; 4], x: f64) -> (f64, [f64; 4]) {
    let [b, v, w, c] = *p;
    let g = gaussian(x, c, w);
    let u = (x - c) / w;
    let value = b * (1.0 - v * g);
    // d/dw and d/dc of exp(-4ln2 u²)
    let dg_dw = g * 2.0 * FOUR_LN_2 * u * u / w;
    let dg_dc = g * 2.0 * FOUR_LN_2 * u / w;
    (value, [1.0 - v * g, -b * g, -b * v * dg_dw, -b * v * dg_dc])
}

/// Weighted Levenberg-Marquardt fit of a gaussian dip.
pub fn fit_gaussian_dip(samples: &[DipSample]) -> Result<DipFit> {
    if samples.len() < 4 {
        return Err(Error::FitFailure(format!(
            "need at least 4 samples to fit a dip, got {}",
            samples.len()
        )));
    }
    let all_weighted = samples.iter().all(|s| s.error > 0.0);
    let weight = |s: &DipSample| if all_weighted { 1.0 / (s.error * s.error) } else { 1.0 };

    let (x_lo, x_hi) = samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
        (lo.min(s.position_mm), hi.max(s.position_mm))
    });
    let span = x_hi - x_lo;
    if !(span > 0.0) {
        return Err(Error::FitFailure("samples do not span any positions".into()));
    }
    let baseline0 = {
        let mut by_distance: Vec<&DipSample> = samples.iter().collect();
        let mid = 0.5 * (x_lo + x_hi);
        by_distance.sort_by(|a, b| {
            (b.position_mm - mid)
                .abs()
                .partial_cmp(&(a.position_mm - mid).abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let k = (samples.len() / 3).max(2);
        by_distance[..k].iter().map(|s| s.rate).sum::<f64>() / k as f64
    };
    let min_sample = samples
        .iter()
        .min_by(|a, b| a.rate.partial_cmp(&b.rate).unwrap_or(std::cmp::Ordering::Equal))
        .copied()
        .ok_or_else(|| Error::FitFailure("no samples".into()))?;
    if !(baseline0 > 0.0) {
        return Err(Error::FitFailure("baseline is not positive".into()));
    }
    let v0 = (1.0 - min_sample.rate / baseline0).clamp(0.01, 1.0);
    let mut p = [baseline0, v0, span / 4.0, min_sample.position_mm];

    let chi2 = |p: &[f64; 4]| -> f64 {
        samples
            .iter()
            .map(|s| {
                let r = s.rate - dip_model(p, s.position_mm).0;
                weight(s) * r * r
            })
            .sum()
    };

    let mut lambda = 1e-3;
    let mut current = chi2(&p);
    let mut converged = false;
    for _ in 0..500 {
        let mut jtj = [[0.0; 4]; 4];
        let mut jtr = [0.0; 4];
        for s in samples {
            let (value, grad) = dip_model(&p, s.position_mm);
            let w = weight(s);
            let r = s.rate - value;
            for i in 0..4 {
                jtr[i] += w * grad[i] * r;
                for j in 0..4 {
                    jtj[i][j] += w * grad[i] * grad[j];
                }
            }
        }
        let mut damped = jtj;
        for (i, row) in damped.iter_mut().enumerate() {
            row[i] += lambda * jtj[i][i].max(1e-300);
        }
        let Some(step) = solve4(damped, jtr) else {
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
            continue;
        };
        let mut trial = p;
        for i in 0..4 {
            trial[i] += step[i];
        }
        trial[2] = trial[2].abs();
        let next = chi2(&trial);
        if next.is_finite() && next <= current {
            let improvement = current - next;
            p = trial;
            current = next;
            lambda = (lambda / 10.0).max(1e-12);
            let small_step = step
                .iter()
                .zip(p.iter())
                .all(|(d, v)| d.abs() <= 1e-12 * (v.abs() + 1e-12));
            if small_step || improvement <= 1e-15 * (current + 1e-300) {
                converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                converged = current.is_finite();
                break;
            }
        }
    }
    if !converged || p.iter().any(|v| !v.is_finite()) || p[0] <= 0.0 || p[2] <= 0.0 {
        return Err(Error::FitFailure("gaussian dip fit did not converge".into()));
    }

    let mut jtj = [[0.0; 4]; 4];
    for s in samples {
        let (_, grad) = dip_model(&p, s.position_mm);
        let w = weight(s);
        for i in 0..4 {
            for j in 0..4 {
                jtj[i][j] += w * grad[i] * grad[j];
            }
        }
    }
    let dof = samples.len().saturating_sub(4).max(1) as f64;
    let reduced = current / dof;
    // Unweighted fits take their noise scale from the residuals.
    let scale = if all_weighted { 1.0 } else { reduced };
    let cov = invert4(jtj).ok_or_else(|| Error::FitFailure("singular fit covariance".into()))?;
    let err = |i: usize| (cov[i][i] * scale).max(0.0).sqrt();
    Ok(DipFit {
        baseline: p[0],
        baseline_error: err(0),
        visibility: p[1],
        visibility_error: err(1),
        fwhm_mm: p[2],
        fwhm_error_mm: err(2),
        center_mm: p[3],
        center_error_mm: err(3),
        reduced_chi_squared: reduced,
    })
}

fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let pivot = (col..4).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[pivot][col].abs() < 1e-300 || !a[pivot][col].is_finite() {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..4 {
            let f = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 4];
    for row in (0..4).rev() {
        let s: f64 = (row + 1..4).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

fn invert4(a: [[f64; 4]; 4]) -> Option<[[f64; 4]; 4]> {
    let mut inv = [[0.0; 4]; 4];
    for col in 0..4 {
        let mut e = [0.0; 4];
        e[col] = 1.0;
        let x = solve4(a, e)?;
        for row in 0..4 {
            inv[row][col] = x[row];
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statistics::{thermal, DEFAULT_N_MAX};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn th(n: f64) -> PhotonNumberDistribution {
        thermal(n, DEFAULT_N_MAX).unwrap()
    }

    #[test]
    fn timing_examples() {
        let v = v_timing(Picoseconds(2.5), Picoseconds(17.3)).unwrap();
        assert_abs_diff_eq!(v, 0.990, epsilon = 5e-4);
        assert_eq!(v_timing(Picoseconds(0.0), Picoseconds(3.0)).unwrap(), 1.0);
        assert_abs_diff_eq!(
            v_timing(Picoseconds(4.0), Picoseconds(4.0)).unwrap(),
            std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-15
        );
        assert!(matches!(
            v_timing(Picoseconds(1.0), Picoseconds(0.0)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn operating_point_bounds() {
        let a = th(0.05);
        let b = herald_condition(&th(0.02), &HeraldModel::vanishing_efficiency()).unwrap();
        let (p_min, p_max) = p_coincidence_bounds(&a, &b);
        assert_abs_diff_eq!(p_min, 0.035898, epsilon = 5e-7);
        assert_abs_diff_eq!(p_max, 0.079488, epsilon = 5e-7);
        assert_abs_diff_eq!(v_statistics(&a, &b).unwrap(), 0.548, epsilon = 1e-3);
        let b1 = herald_condition(&th(0.02), &HeraldModel::ideal()).unwrap();
        assert_abs_diff_eq!(v_statistics(&a, &b1).unwrap(), 0.708, epsilon = 1e-3);
    }

    #[test]
    fn vacuum_partner_gives_no_visibility() {
        let a = th(0.05);
        let vac = PhotonNumberDistribution::vacuum();
        let (p_min, p_max) = p_coincidence_bounds(&a, &vac);
        assert_eq!(p_min, p_max);
        assert_eq!(p_min, a.p(2));
        assert_eq!(v_statistics(&a, &vac).unwrap(), 0.0);
    }

    #[test]
    fn ideal_heralding_both_sides() {
        let a = herald_condition(&th(0.05), &HeraldModel::ideal()).unwrap();
        let b = herald_condition(&th(0.02), &HeraldModel::ideal()).unwrap();
        assert_eq!(p_coincidence_bounds(&a, &b).0, 0.0);
        assert_eq!(v_statistics(&a, &b).unwrap(), 1.0);
        let one = PhotonNumberDistribution::fock(1);
        assert_eq!(v_statistics(&one, &one).unwrap(), 1.0);
    }

    #[test]
    fn undefined_visibility() {
        let vac = PhotonNumberDistribution::vacuum();
        assert!(matches!(v_statistics(&vac, &vac), Err(Error::UndefinedVisibility)));
    }

    #[test]
    fn thermal_thermal_is_one_third() {
        for n in [0.001, 0.02, 0.05, 0.2] {
            let v = v_statistics(&th(n), &th(n)).unwrap();
            assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn map_diagonal_and_operating_point() {
        let grid = [0.005, 0.01, 0.02, 0.05, 0.1];
        let map = visibility_map(&grid, &grid, None).unwrap();
        for i in 0..grid.len() {
            assert_abs_diff_eq!(map.get(i, i), 1.0 / 3.0, epsilon = 1e-12);
        }
        let map = visibility_map(&[0.05], &[0.02], Some(&HeraldModel::vanishing_efficiency())).unwrap();
        assert_abs_diff_eq!(map.get(0, 0), 0.548, epsilon = 1e-3);
        assert_eq!(map.rows().count(), 1);
        assert!(visibility_map(&[], &[0.1], None).is_err());
    }

    #[test]
    fn map_matches_pointwise_evaluation() {
        let na = [0.01, 0.03, 0.05];
        let nb = [0.005, 0.02, 0.04];
        let herald = HeraldModel::new(0.3, 1e-4).unwrap();
        let map = visibility_map(&na, &nb, Some(&herald)).unwrap();
        for (i, &a) in na.iter().enumerate() {
            for (j, &b) in nb.iter().enumerate() {
                let db = herald_condition(&th(b), &herald).unwrap();
                // brute-force bounds straight from the pmfs
                let da = th(a);
                let p_min = da.pmf()[0] * db.pmf()[2] + da.pmf()[2] * db.pmf()[0];
                let p_max = da.pmf()[1] * db.pmf()[1] + p_min;
                assert_abs_diff_eq!(map.get(i, j), (p_max - p_min) / p_max, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn dip_width_from_coherence_time() {
        let positions: Vec<f64> = (-40..=40).map(|i| i as f64 * 0.25).collect();
        let prof = dip_profile(0.8, Picoseconds(20.0), 100.0, &positions).unwrap();
        let fit = prof.fit.unwrap();
        assert_abs_diff_eq!(fit.fwhm_mm, 6.0, epsilon = 0.01);
        assert_abs_diff_eq!(fit.fwhm_mm, delay_to_path(Picoseconds(20.0)).0, epsilon = 1e-6);
        assert_abs_diff_eq!(fit.visibility, 0.8, epsilon = 1e-8);
        let bottom = prof.samples.iter().find(|s| s.position_mm == 0.0).unwrap();
        assert_abs_diff_eq!(bottom.rate, 100.0 * (1.0 - 0.8), epsilon = 1e-12);
    }

    #[test]
    fn flat_profile_when_no_visibility() {
        let positions: Vec<f64> = (-10..=10).map(f64::from).collect();
        let prof = dip_profile(0.0, Picoseconds(20.0), 5.0, &positions).unwrap();
        assert!(prof.samples.iter().all(|s| s.rate == 5.0));
        assert!(dip_profile(1.5, Picoseconds(20.0), 5.0, &positions).is_err());
        assert!(dip_profile(0.5, Picoseconds(0.0), 5.0, &positions).is_err());
    }

    #[test]
    fn fit_failure_keeps_samples() {
        let samples = vec![
            DipSample {
                position_mm: 0.0,
                rate: 1.0,
                error: 0.0,
            },
            DipSample {
                position_mm: 1.0,
                rate: 1.0,
                error: 0.0,
            },
        ];
        let prof = DipProfile::from_samples(samples.clone());
        assert!(prof.fit.is_none());
        assert!(prof.fit_failure.is_some());
        assert_eq!(prof.samples, samples);
    }

    #[test]
    fn weighted_fit_recovers_parameters() {
        let positions: Vec<f64> = (-20..=20).map(|i| i as f64 * 0.5).collect();
        let samples: Vec<DipSample> = positions
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let clean = 1000.0 * (1.0 - 0.5 * gaussian(x, 0.3, 5.0));
                // deterministic ±1σ jitter
                let sigma = clean.sqrt();
                let jitter = if i % 2 == 0 { 0.5 } else { -0.5 } * sigma;
                DipSample {
                    position_mm: x,
                    rate: clean + jitter,
                    error: sigma,
                }
            })
            .collect();
        let fit = fit_gaussian_dip(&samples).unwrap();
        assert!((fit.visibility - 0.5).abs() < 3.0 * fit.visibility_error + 0.02);
        assert!((fit.fwhm_mm - 5.0).abs() < 3.0 * fit.fwhm_error_mm + 0.2);
        assert!(fit.visibility_error > 0.0 && fit.fwhm_error_mm > 0.0);
    }

    proptest! {
        #[test]
        fn visibility_in_unit_interval(
            na in 0.0f64..0.3,
            nb in 1e-4f64..0.3,
            eta in 0.0f64..=1.0,
            dark in 0.0f64..0.1,
        ) {
            let b = herald_condition(&th(nb), &HeraldModel::new(eta, dark).unwrap()).unwrap();
            let a = th(na);
            if let Ok(v) = v_statistics(&a, &b) {
                prop_assert!((0.0..=1.0).contains(&v));
                let (p_min, p_max) = p_coincidence_bounds(&a, &b);
                prop_assert_eq!(v == 1.0, p_min == 0.0 && p_max > 0.0);
            }
        }

        #[test]
        fn product_below_each_factor(vs in 0.0f64..=1.0, tu in 0.0f64..50.0, tc in 0.1f64..50.0) {
            let vt = v_timing(Picoseconds(tu), Picoseconds(tc)).unwrap();
            let b = VisibilityBreakdown::new(vs, vt);
            prop_assert!(b.v_total <= vs.min(vt) + 1e-15);
        }

        #[test]
        fn heralded_map_nonincreasing_in_nb(na in 0.001f64..0.1, eta in 0.0f64..=1.0) {
            let nb: Vec<f64> = (1..=20).map(|i| i as f64 * 0.005).collect();
            let herald = HeraldModel::new(eta, 0.0).unwrap();
            let map = visibility_map(&[na], &nb, Some(&herald)).unwrap();
            for j in 1..nb.len() {
                prop_assert!(map.get(0, j) <= map.get(0, j - 1) + 1e-12);
            }
        }

        #[test]
        fn dip_is_even_and_refits(v in 0.05f64..1.0, tau in 5.0f64..40.0) {
            let w = delay_to_path(Picoseconds(tau)).0;
            let positions: Vec<f64> = (-30..=30).map(|i| i as f64 * w / 10.0).collect();
            let prof = dip_profile(v, Picoseconds(tau), 1.0, &positions).unwrap();
            let n = prof.samples.len();
            for i in 0..n / 2 {
                prop_assert!((prof.samples[i].rate - prof.samples[n - 1 - i].rate).abs() < 1e-12);
            }
            let fit = prof.fit.unwrap();
            prop_assert!((fit.fwhm_mm / w - 1.0).abs() < 0.005);
        }
    }
}
