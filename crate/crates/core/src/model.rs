//! Physical constants, atom/laser parameter sets and derived scales.
//!
//! Everything is stored in SI base units. Conversions from the lab units
//! used on the command line (μm, multiples of γ) live in [`units`].

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.0545718e-34;
/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380649e-23;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub boltzmann: f64,
}

impl PhysicalConstants {
    pub const SI: PhysicalConstants = PhysicalConstants {
        hbar: HBAR,
        boltzmann: BOLTZMANN,
    };
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::SI
    }
}

/// Cesium D2 line preset. The mass is the standard atomic mass of ¹³³Cs
/// (132.905 u), supplied here as an external input.
pub mod cesium {
    pub const MASS: f64 = 2.2069e-25;
    pub const GAMMA: f64 = 33.3e6;
}

pub mod units {
    pub const MICROMETRE: f64 = 1e-6;

    pub fn from_um(x: f64) -> f64 {
        x * MICROMETRE
    }

    pub fn to_um(x: f64) -> f64 {
        x / MICROMETRE
    }

    pub fn from_gamma_multiple(multiple: f64, gamma: f64) -> f64 {
        multiple * gamma
    }

    pub fn to_gamma_multiple(rate: f64, gamma: f64) -> f64 {
        rate / gamma
    }
}

/// Spatial dependence of the Rabi frequency.
#[derive(Debug, Clone, PartialEq)]
pub enum RabiProfile {
    /// Ω on (0, L), zero elsewhere.
    SharpEdged { omega: f64 },
    /// L·Ω₀·exp(−(x−x₀)²/2δ²)/(δ√(2π)); the pulse area equals that of a
    /// sharp-edged beam of width L and frequency Ω₀.
    Gaussian { omega0: f64, center: f64, width: f64 },
    /// Linear interpolation through (x, Ω) samples, zero outside.
    Tabulated { samples: Vec<(f64, f64)> },
}

impl RabiProfile {
    pub fn value(&self, x: f64, beam_width: f64) -> f64 {
        match self {
            RabiProfile::SharpEdged { omega } => {
                if x > 0.0 && x < beam_width {
                    *omega
                } else {
                    0.0
                }
            }
            RabiProfile::Gaussian { omega0, center, width } => {
                let u = (x - center) / width;
                beam_width * omega0 * (-0.5 * u * u).exp() / (width * (2.0 * PI).sqrt())
            }
            RabiProfile::Tabulated { samples } => interpolate(samples, x),
        }
    }

    pub fn peak(&self, beam_width: f64) -> f64 {
        match self {
            RabiProfile::SharpEdged { omega } => *omega,
            RabiProfile::Gaussian { omega0, width, .. } => {
                beam_width * omega0 / (width * (2.0 * PI).sqrt())
            }
            RabiProfile::Tabulated { samples } => {
                samples.iter().map(|s| s.1).fold(0.0, f64::max)
            }
        }
    }

    pub fn is_sharp(&self) -> bool {
        matches!(self, RabiProfile::SharpEdged { .. })
    }
}

fn interpolate(samples: &[(f64, f64)], x: f64) -> f64 {
    if samples.len() < 2 || x < samples[0].0 || x > samples[samples.len() - 1].0 {
        return 0.0;
    }
    let i = samples.partition_point(|s| s.0 <= x).clamp(1, samples.len() - 1);
    let (x0, y0) = samples[i - 1];
    let (x1, y1) = samples[i];
    if x1 == x0 {
        return y0;
    }
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtomLaserConfig {
    pub mass: f64,
    pub gamma: f64,
    pub profile: RabiProfile,
    pub beam_width: f64,
}

impl AtomLaserConfig {
    pub fn sharp(mass: f64, gamma: f64, omega: f64, beam_width: f64) -> Self {
        Self {
            mass,
            gamma,
            profile: RabiProfile::SharpEdged { omega },
            beam_width,
        }
    }

    pub fn cesium(omega: f64, beam_width: f64) -> Self {
        Self::sharp(cesium::MASS, cesium::GAMMA, omega, beam_width)
    }

    pub fn validate(self) -> Result<ValidatedConfig> {
        validate(self)
    }
}

/// A configuration whose values passed [`validate`]. Immutable.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedConfig(AtomLaserConfig);

impl ValidatedConfig {
    pub fn mass(&self) -> f64 {
        self.0.mass
    }

    pub fn gamma(&self) -> f64 {
        self.0.gamma
    }

    pub fn beam_width(&self) -> f64 {
        self.0.beam_width
    }

    pub fn profile(&self) -> &RabiProfile {
        &self.0.profile
    }

    /// Constant Rabi frequency of a sharp-edged beam, or the profile peak.
    pub fn omega(&self) -> f64 {
        self.0.profile.peak(self.0.beam_width)
    }

    pub fn inner(&self) -> &AtomLaserConfig {
        &self.0
    }

    /// Copy with a different decay rate (re-validated).
    pub fn with_gamma(&self, gamma: f64) -> Result<ValidatedConfig> {
        AtomLaserConfig { gamma, ..self.0.clone() }.validate()
    }

    pub fn with_profile(&self, profile: RabiProfile) -> Result<ValidatedConfig> {
        AtomLaserConfig { profile, ..self.0.clone() }.validate()
    }

    pub fn with_omega(&self, omega: f64) -> Result<ValidatedConfig> {
        self.with_profile(RabiProfile::SharpEdged { omega })
    }

    pub fn wavenumber(&self, v: f64) -> f64 {
        self.0.mass * v / HBAR
    }

    pub fn velocity(&self, k: f64) -> f64 {
        HBAR * k / self.0.mass
    }
}

pub fn validate(config: AtomLaserConfig) -> Result<ValidatedConfig> {
    if !(config.mass > 0.0) || !config.mass.is_finite() {
        return Err(Error::NonPositiveMass { field: "mass", value: config.mass });
    }
    if !(config.gamma >= 0.0) || !config.gamma.is_finite() {
        return Err(Error::NegativeRate { field: "gamma", value: config.gamma });
    }
    if !(config.beam_width > 0.0) || !config.beam_width.is_finite() {
        return Err(Error::NonPositiveWidth { field: "beam_width", value: config.beam_width });
    }
    match &config.profile {
        RabiProfile::SharpEdged { omega } => {
            if !(*omega >= 0.0) || !omega.is_finite() {
                return Err(Error::NegativeRate { field: "omega", value: *omega });
            }
        }
        RabiProfile::Gaussian { omega0, center, width } => {
            if !(*omega0 >= 0.0) || !omega0.is_finite() {
                return Err(Error::NegativeRate { field: "profile.omega0", value: *omega0 });
            }
            if !(*width > 0.0) || !width.is_finite() {
                return Err(Error::NonPositiveWidth { field: "profile.delta", value: *width });
            }
            if !center.is_finite() {
                return Err(Error::InvalidArgument("profile.x0 is not finite".into()));
            }
        }
        RabiProfile::Tabulated { samples } => {
            if samples.len() < 2 {
                return Err(Error::InvalidArgument("tabulated profile needs at least two samples".into()));
            }
            if samples.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                return Err(Error::InvalidArgument("tabulated profile positions must increase".into()));
            }
            if let Some(s) = samples.iter().find(|s| !(s.1 >= 0.0)) {
                return Err(Error::NegativeRate { field: "profile.samples", value: s.1 });
            }
        }
    }
    Ok(ValidatedConfig(config))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Driving {
    Weak,
    Strong,
}

/// Characteristic scales of an atom with velocity `v` in a given beam.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleReport {
    pub velocity: f64,
    pub kinetic_energy: f64,
    pub wavenumber: f64,
    /// 2E/(ħΩ); reflection matters when this is of order one or below.
    pub energy_ratio: f64,
    /// Ω/γ.
    pub drive_ratio: f64,
    /// L/l with l the penetration length.
    pub width_ratio: f64,
    pub penetration_length: f64,
    pub de_broglie_wavelength: f64,
    pub rabi_wavelength: f64,
    pub driving: Driving,
}

pub fn derived_scales(config: &ValidatedConfig, v: f64) -> Result<ScaleReport> {
    if !(v > 0.0) {
        return Err(Error::NonPositiveVelocity(v));
    }
    let m = config.mass();
    let omega = config.omega();
    let gamma = config.gamma();
    let energy = 0.5 * m * v * v;
    let k = m * v / HBAR;
    let l = crate::regime::penetration_length(v, gamma, omega);
    let drive_ratio = omega / gamma;
    Ok(ScaleReport {
        velocity: v,
        kinetic_energy: energy,
        wavenumber: k,
        energy_ratio: 2.0 * energy / (HBAR * omega),
        drive_ratio,
        width_ratio: config.beam_width() / l,
        penetration_length: l,
        de_broglie_wavelength: 2.0 * PI / k,
        rabi_wavelength: 2.0 * PI * v / omega,
        driving: if drive_ratio > 1.0 { Driving::Strong } else { Driving::Weak },
    })
}
