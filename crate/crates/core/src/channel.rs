//! Atmospheric channel model for an intensity-modulated optical path.
//!
//! Turns physical link parameters — distance, apertures, beam divergence,
//! attenuation, refractive-index structure constant — into the statistical
//! quantities the BER formulas consume: log-amplitude variances (weak
//! turbulence, Rytov theory), geometric/attenuation path loss, transmit
//! aperture correlation, and the log-normal irradiance/SNR densities.
//!
//! Units are SI throughout (meters, radians); attenuation is the customary
//! dB/km and the config surface additionally accepts divergence in mrad.

use nalgebra::DMatrix;

use crate::numerics::symmetric_matrix_sqrt;
use crate::{Error, Result};

/// Clear-weather refractive-index structure constant (m^(-2/3)).
pub const CLEAR_CN2: f64 = 5e-14;
/// Clear-weather attenuation (dB/km).
pub const CLEAR_ATTENUATION_DB_PER_KM: f64 = 0.43;
/// Light-fog refractive-index structure constant (m^(-2/3)).
pub const LIGHT_FOG_CN2: f64 = 1.7e-14;
/// Light-fog attenuation (dB/km).
pub const LIGHT_FOG_ATTENUATION_DB_PER_KM: f64 = 20.0;

/// Geometry and weather for one optical path.
///
/// The reference link: 1550 nm laser over 1200 m, 20 cm apertures on both
/// ends, 2 mrad full divergence, and a transmit-aperture separation chosen
/// so that the spatial correlation coefficient is 0.3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkScenario {
    /// Carrier wavelength λ (m).
    pub wavelength: f64,
    /// End-to-end link distance l (m).
    pub link_distance: f64,
    /// Weather attenuation α (dB/km).
    pub attenuation_db_per_km: f64,
    /// Refractive-index structure constant C_n² (m^(-2/3)).
    pub refractive_index_constant: f64,
    /// Transmit aperture diameter D_T (m).
    pub tx_aperture: f64,
    /// Receive aperture diameter D_R (m).
    pub rx_aperture: f64,
    /// Full transmit divergence angle θ_T (rad).
    pub divergence_angle: f64,
    /// Separation d between adjacent transmit apertures (m).
    pub tx_separation: f64,
}

impl LinkScenario {
    /// Reference 1200 m link in clear weather.
    pub fn clear() -> Self {
        Self {
            wavelength: 1550e-9,
            link_distance: 1200.0,
            attenuation_db_per_km: CLEAR_ATTENUATION_DB_PER_KM,
            refractive_index_constant: CLEAR_CN2,
            tx_aperture: 0.2,
            rx_aperture: 0.2,
            divergence_angle: 2e-3,
            tx_separation: 0.0482,
        }
    }

    /// Reference 1200 m link in light fog.
    pub fn light_fog() -> Self {
        Self {
            attenuation_db_per_km: LIGHT_FOG_ATTENUATION_DB_PER_KM,
            refractive_index_constant: LIGHT_FOG_CN2,
            ..Self::clear()
        }
    }

    /// Optical wave number k = 2π/λ (rad/m).
    pub fn wave_number(&self) -> f64 {
        2.0 * core::f64::consts::PI / self.wavelength
    }

    /// Checks the structural invariants: strictly positive lengths and
    /// angles, non-negative attenuation and turbulence constant.
    pub fn validate(&self) -> Result<()> {
        let positives = [
            ("wavelength", self.wavelength),
            ("link_distance", self.link_distance),
            ("tx_aperture", self.tx_aperture),
            ("rx_aperture", self.rx_aperture),
            ("divergence_angle", self.divergence_angle),
        ];
        for (name, value) in positives {
            if !(value > 0.0) {
                return Err(Error::NonPositive { name, value });
            }
        }
        let non_negatives = [
            ("attenuation_db_per_km", self.attenuation_db_per_km),
            ("refractive_index_constant", self.refractive_index_constant),
            ("tx_separation", self.tx_separation),
        ];
        for (name, value) in non_negatives {
            if !(value >= 0.0) {
                return Err(Error::Negative { name, value });
            }
        }
        Ok(())
    }
}

/// Log-amplitude turbulence statistics for the (possibly multi-aperture)
/// transmit side of one hop.
///
/// The log-amplitude X of each branch is Gaussian with standard deviation
/// `sigma_x` and mean `mu_x = -sigma_x²`, which normalizes the irradiance
/// gain h = e^(2X) to unit mean. Across `n_tx` apertures the X's are jointly
/// Gaussian with covariance `Γ_ij = sigma_x²·rho^|i-j|`; the symmetric root
/// of Γ (`c_ij`) drives both the closed-form tensor quadrature and the Monte
/// Carlo sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct TurbulenceStat {
    sigma_x: f64,
    mu_x: f64,
    rho: f64,
    covariance: DMatrix<f64>,
    covariance_sqrt: DMatrix<f64>,
}

impl TurbulenceStat {
    /// Builds the statistics for `n_tx` apertures with per-branch
    /// log-amplitude standard deviation `sigma_x` and neighbor correlation
    /// `rho`.
    ///
    /// # Errors
    ///
    /// * [`Error::Negative`] for `sigma_x < 0`.
    /// * [`Error::CorrelationRange`] for `rho` outside [0, 1].
    /// * [`Error::NonPositive`] for `n_tx = 0`.
    pub fn new(sigma_x: f64, n_tx: usize, rho: f64) -> Result<Self> {
        if !(sigma_x >= 0.0) {
            return Err(Error::Negative { name: "sigma_x", value: sigma_x });
        }
        if n_tx == 0 {
            return Err(Error::NonPositive { name: "n_tx", value: 0.0 });
        }
        let covariance = covariance_matrix(n_tx, sigma_x * sigma_x, rho)?;
        // A 1×1 covariance has the exact square root [σ_x]; taking it
        // directly keeps the single-branch case bit-identical to the scalar
        // path (an eigendecomposition round-trip can cost one ulp).
        let covariance_sqrt = if n_tx == 1 {
            nalgebra::DMatrix::from_element(1, 1, sigma_x)
        } else {
            symmetric_matrix_sqrt(&covariance)?
        };
        Ok(Self {
            sigma_x,
            mu_x: -sigma_x * sigma_x,
            rho,
            covariance,
            covariance_sqrt,
        })
    }

    /// Single-aperture statistics (correlation is irrelevant).
    pub fn siso(sigma_x: f64) -> Result<Self> {
        Self::new(sigma_x, 1, 0.0)
    }

    /// Per-branch log-amplitude standard deviation σ_x.
    pub fn sigma_x(&self) -> f64 {
        self.sigma_x
    }

    /// Log-amplitude mean μ_x = -σ_x² (unit-mean gain normalization).
    pub fn mu_x(&self) -> f64 {
        self.mu_x
    }

    /// Neighbor correlation coefficient ρ.
    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Number of transmit apertures.
    pub fn n_tx(&self) -> usize {
        self.covariance.nrows()
    }

    /// Spatial covariance Γ of the log-amplitudes.
    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// Symmetric square root of Γ (the combining coefficients c_ij).
    pub fn covariance_sqrt(&self) -> &DMatrix<f64> {
        &self.covariance_sqrt
    }
}

/// Weak-turbulence log-amplitude variance σ_x² = 0.124·k^(7/6)·C_n²·l^(11/6)
/// at the given propagation distance (m).
///
/// All quantities are SI; the distance is in meters.
///
/// # Errors
///
/// [`Error::NonPositive`] for a non-positive distance.
///
/// # Example
///
/// ```
/// use fso_ber::channel::{rytov_variance, LinkScenario};
///
/// let link = LinkScenario::clear();
/// let var = rytov_variance(&link, 1200.0).unwrap();
/// assert!((var.sqrt() - 0.3744).abs() < 1e-3);
/// ```
pub fn rytov_variance(scenario: &LinkScenario, distance: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::NonPositive { name: "distance", value: distance });
    }
    let k = scenario.wave_number();
    Ok(0.124 * k.powf(7.0 / 6.0) * scenario.refractive_index_constant * distance.powf(11.0 / 6.0))
}

/// Path-loss coefficient β(l) = 10^(-α·l_km/10) · D_R² / (D_T + θ_T·l)²
/// combining weather attenuation and geometric spreading.
///
/// # Errors
///
/// [`Error::NonPositive`] for a non-positive distance.
pub fn path_loss(scenario: &LinkScenario, distance: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::NonPositive { name: "distance", value: distance });
    }
    let attenuation = 10f64.powf(-scenario.attenuation_db_per_km * (distance / 1000.0) / 10.0);
    let capture = scenario.rx_aperture / (scenario.tx_aperture + scenario.divergence_angle * distance);
    Ok(attenuation * capture * capture)
}

/// Per-hop path loss normalized to the direct link:
/// β_kn = β(l/K) / β(l) for K equidistant hops over the scenario's
/// `link_distance`. Equals 1 for K = 1 and exceeds 1 for shorter hops.
///
/// # Errors
///
/// [`Error::NonPositive`] for `hop_count = 0` or a non-positive link distance.
pub fn normalized_hop_path_loss(scenario: &LinkScenario, hop_count: usize) -> Result<f64> {
    if hop_count == 0 {
        return Err(Error::NonPositive { name: "hop_count", value: 0.0 });
    }
    let total = scenario.link_distance;
    if hop_count == 1 {
        // The direct link is its own reference.
        path_loss(scenario, total)?;
        return Ok(1.0);
    }
    let hop = total / hop_count as f64;
    Ok(path_loss(scenario, hop)? / path_loss(scenario, total)?)
}

/// Correlation length d₀ = √(λ·l) of the turbulence-induced irradiance
/// pattern at distance `l`.
pub fn coherence_length(wavelength: f64, distance: f64) -> f64 {
    (wavelength * distance).sqrt()
}

/// Spatial correlation coefficient between adjacent transmit apertures,
/// ρ = exp(-(d/d₀)^(5/3)) with d₀ = √(λ·l) evaluated over the scenario's
/// link distance.
///
/// Returns 1 for co-located apertures (d = 0) and decreases strictly in d.
pub fn correlation_coefficient(scenario: &LinkScenario) -> Result<f64> {
    if !(scenario.tx_separation >= 0.0) {
        return Err(Error::Negative { name: "tx_separation", value: scenario.tx_separation });
    }
    let d0 = coherence_length(scenario.wavelength, scenario.link_distance);
    Ok((-(scenario.tx_separation / d0).powf(5.0 / 3.0)).exp())
}

/// Spatial covariance Γ_ij = σ_y²·ρ^|i-j| of the per-aperture
/// log-amplitudes: symmetric Toeplitz, positive semidefinite for ρ ∈ [0, 1).
///
/// # Errors
///
/// * [`Error::CorrelationRange`] for ρ outside [0, 1].
/// * [`Error::Negative`] for a negative variance.
/// * [`Error::NonPositive`] for `n_tx = 0`.
pub fn covariance_matrix(n_tx: usize, sigma_y_sq: f64, rho: f64) -> Result<DMatrix<f64>> {
    if n_tx == 0 {
        return Err(Error::NonPositive { name: "n_tx", value: 0.0 });
    }
    if !(sigma_y_sq >= 0.0) {
        return Err(Error::Negative { name: "sigma_y_sq", value: sigma_y_sq });
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::CorrelationRange(rho));
    }
    Ok(DMatrix::from_fn(n_tx, n_tx, |i, j| {
        sigma_y_sq * rho.powi((i as i32 - j as i32).abs())
    }))
}

/// Log-amplitude standard deviation implied by a scintillation index:
/// σ_x = √(ln(1 + SI)) / 2, the inverse of SI = e^(4σ_x²) - 1.
///
/// # Errors
///
/// [`Error::Negative`] for SI < 0.
///
/// # Example
///
/// ```
/// use fso_ber::channel::sigma_from_scintillation_index;
///
/// let sigma = sigma_from_scintillation_index(0.75).unwrap();
/// assert!((sigma - 0.374).abs() < 1e-3);
/// ```
pub fn sigma_from_scintillation_index(si: f64) -> Result<f64> {
    if !(si >= 0.0) {
        return Err(Error::Negative { name: "scintillation_index", value: si });
    }
    Ok((1.0 + si).ln().sqrt() / 2.0)
}

/// Scintillation index SI = e^(4σ_x²) - 1 implied by a log-amplitude
/// standard deviation (the forward direction of
/// [`sigma_from_scintillation_index`]).
pub fn scintillation_index(sigma_x: f64) -> f64 {
    (4.0 * sigma_x * sigma_x).exp_m1()
}

/// Which marginal density [`channel_density`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityKind {
    /// Density of the irradiance gain h = e^(2X).
    Irradiance,
    /// Density of the instantaneous SNR γ = β²·γ̄·h².
    Snr,
}

/// Log-normal marginal density of the channel, either of the irradiance
/// gain h or of the instantaneous SNR γ (single aperture).
///
/// With X ~ N(-σ², σ²) and h = e^(2X):
///
/// * irradiance: f(h) = exp(-(ln h + 2σ²)²/(8σ²)) / (2·h·σ·√(2π))
/// * SNR, γ = β²γ̄h²: f(γ) = exp(-(ln(γ/(β²γ̄)) + 4σ²)²/(32σ²)) / (4·γ·σ·√(2π))
///
/// Both are valid densities with unit mass over (0, ∞); `mean_snr` and
/// `beta` only matter for the SNR kind.
///
/// # Errors
///
/// * [`Error::NonPositive`] for `value ≤ 0` (and, for the SNR kind,
///   non-positive `mean_snr` or `beta`).
/// * [`Error::DegenerateDensity`] at σ = 0, where the distribution is a
///   point mass.
pub fn channel_density(
    kind: DensityKind,
    value: f64,
    stat: &TurbulenceStat,
    mean_snr: f64,
    beta: f64,
) -> Result<f64> {
    let sigma = stat.sigma_x();
    if sigma == 0.0 {
        return Err(Error::DegenerateDensity);
    }
    if !(value > 0.0) {
        return Err(Error::NonPositive { name: "value", value });
    }
    let sqrt_2pi = (2.0 * core::f64::consts::PI).sqrt();
    match kind {
        DensityKind::Irradiance => {
            let z = value.ln() + 2.0 * sigma * sigma;
            Ok((-z * z / (8.0 * sigma * sigma)).exp() / (2.0 * value * sigma * sqrt_2pi))
        }
        DensityKind::Snr => {
            if !(mean_snr > 0.0) {
                return Err(Error::NonPositive { name: "mean_snr", value: mean_snr });
            }
            if !(beta > 0.0) {
                return Err(Error::NonPositive { name: "beta", value: beta });
            }
            let z = (value / (beta * beta * mean_snr)).ln() + 4.0 * sigma * sigma;
            Ok((-z * z / (32.0 * sigma * sigma)).exp() / (4.0 * value * sigma * sqrt_2pi))
        }
    }
}

// ---------------------------------------------------------------------------
// tests
// ---------------------------------------------------------------------------
