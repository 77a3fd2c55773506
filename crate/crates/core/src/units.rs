//! Physical quantities and the unit conversions shared by every other module.
//!
//! Wavelengths are carried in nanometres, spectral widths in picometres,
//! durations in picoseconds, optical path differences in millimetres and
//! losses in decibels. All conversions between these go through this module.

use std::fmt;
use std::ops::{Add, AddAssign, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vacuum speed of light in metres per second.
pub const SPEED_OF_LIGHT_M_PER_S: f64 = 299_792_458.0;

/// Vacuum speed of light expressed in millimetres per picosecond.
pub const SPEED_OF_LIGHT_MM_PER_PS: f64 = SPEED_OF_LIGHT_M_PER_S * 1e-9;

/// `4 ln 2`, the constant turning a FWHM into a gaussian exponent.
pub const FOUR_LN_2: f64 = 4.0 * std::f64::consts::LN_2;

/// A duration in picoseconds.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Picoseconds(pub f64);

/// An optical path length in millimetres.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Millimetres(pub f64);

/// A power ratio in decibels. Positive values are losses.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Decibels(pub f64);

impl Picoseconds {
    pub fn value(self) -> f64 {
        self.0
    }
}

impl Millimetres {
    pub fn value(self) -> f64 {
        self.0
    }
}

impl Decibels {
    pub fn value(self) -> f64 {
        self.0
    }

    /// Power transmission `10^(-loss/10)` for a loss in dB.
    pub fn transmission(self) -> f64 {
        10f64.powf(-self.0 / 10.0)
    }

    /// Loss in dB corresponding to a power transmission in `(0, 1]`.
    pub fn from_transmission(t: f64) -> Self {
        Decibels(-10.0 * t.log10())
    }
}

impl Add for Decibels {
    type Output = Decibels;
    fn add(self, rhs: Decibels) -> Decibels {
        Decibels(self.0 + rhs.0)
    }
}

impl AddAssign for Decibels {
    fn add_assign(&mut self, rhs: Decibels) {
        self.0 += rhs.0;
    }
}

impl Sub for Decibels {
    type Output = Decibels;
    fn sub(self, rhs: Decibels) -> Decibels {
        Decibels(self.0 - rhs.0)
    }
}

impl std::iter::Sum for Decibels {
    fn sum<I: Iterator<Item = Decibels>>(iter: I) -> Decibels {
        iter.fold(Decibels(0.0), Add::add)
    }
}

impl Neg for Millimetres {
    type Output = Millimetres;
    fn neg(self) -> Millimetres {
        Millimetres(-self.0)
    }
}

impl fmt::Display for Picoseconds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ps", self.0)
    }
}

impl fmt::Display for Millimetres {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} mm", self.0)
    }
}

impl fmt::Display for Decibels {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} dB", self.0)
    }
}

/// Spectral envelope of a light field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lineshape {
    Gaussian,
    SincSquared,
}

impl Lineshape {
    /// Transform-limited time-bandwidth product `Δν·Δt` of the lineshape.
    pub fn time_bandwidth_product(self) -> f64 {
        match self {
            Lineshape::Gaussian => 0.441,
            Lineshape::SincSquared => 0.886,
        }
    }
}

/// A light field described by its centre wavelength, FWHM and lineshape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralMode {
    pub center_wavelength_nm: f64,
    pub fwhm_bandwidth_pm: f64,
    pub lineshape: Lineshape,
}

impl SpectralMode {
    pub fn new(center_wavelength_nm: f64, fwhm_bandwidth_pm: f64, lineshape: Lineshape) -> Result<Self> {
        let mode = SpectralMode {
            center_wavelength_nm,
            fwhm_bandwidth_pm,
            lineshape,
        };
        mode.validate()?;
        Ok(mode)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.center_wavelength_nm.is_finite() && self.center_wavelength_nm > 0.0) {
            return Err(Error::Domain(format!(
                "centre wavelength must be positive, got {} nm",
                self.center_wavelength_nm
            )));
        }
        if !(self.fwhm_bandwidth_pm.is_finite() && self.fwhm_bandwidth_pm > 0.0) {
            return Err(Error::Domain(format!(
                "spectral bandwidth must be positive, got {} pm",
                self.fwhm_bandwidth_pm
            )));
        }
        Ok(())
    }

    /// Coherence time of the mode, see [`coherence_time`].
    pub fn coherence_time(&self) -> Result<Picoseconds> {
        coherence_time(self)
    }
}

/// Transform-limited coherence time `K·λ²/(c·Δλ)` of a spectral mode.
pub fn coherence_time(mode: &SpectralMode) -> Result<Picoseconds> {
    mode.validate()?;
    let lambda_m = mode.center_wavelength_nm * 1e-9;
    let dlambda_m = mode.fwhm_bandwidth_pm * 1e-12;
    let seconds = mode.lineshape.time_bandwidth_product() * lambda_m * lambda_m / (SPEED_OF_LIGHT_M_PER_S * dlambda_m);
    Ok(Picoseconds(seconds * 1e12))
}

/// A path-length difference together with its vacuum-equivalent delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathDelay {
    pub path_difference: Millimetres,
    pub equivalent_delay: Picoseconds,
}

impl PathDelay {
    pub fn from_path(path_difference: Millimetres) -> Self {
        PathDelay {
            path_difference,
            equivalent_delay: path_to_delay(path_difference),
        }
    }

    pub fn from_delay(delay: Picoseconds) -> Self {
        PathDelay {
            path_difference: delay_to_path(delay),
            equivalent_delay: delay,
        }
    }
}

/// Free-space delay for a path difference.
pub fn path_to_delay(path: Millimetres) -> Picoseconds {
    Picoseconds(path.0 / SPEED_OF_LIGHT_MM_PER_PS)
}

/// Free-space path difference for a delay.
pub fn delay_to_path(delay: Picoseconds) -> Millimetres {
    Millimetres(delay.0 * SPEED_OF_LIGHT_MM_PER_PS)
}
