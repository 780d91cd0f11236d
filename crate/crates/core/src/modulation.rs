//! Conditional (fixed-channel) error-probability kernels for every
//! supported intensity-modulation scheme, in exact-Q and two-exponential
//! (Chiani) forms.
//!
//! Every scheme's conditional bit-error probability is the same shape,
//! `F · Q(√(c·γ))`: a per-scheme amplitude prefactor `F` times the Gaussian
//! tail at a per-scheme SNR coefficient `c`. The closed-form BER engines
//! average the two-exponential form of this kernel over the fading
//! distribution; the Monte Carlo oracle averages the exact form.

use statrs::function::erf::erfc;

use crate::{Error, Result};

/// Q-function evaluation mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BepMode {
    /// Full double precision via the complementary error function.
    Exact,
    /// Chiani's two-exponential approximation
    /// `(1/12)e^(-x²/2) + (1/4)e^(-2x²/3)`.
    Chiani,
}

/// Smallest argument at which the two-exponential approximation still
/// upper-bounds the exact Q-function.
///
/// Below this crossover the approximation *under*-estimates Q — at x = 0 it
/// gives 1/3 against the exact 1/2 — so "Chiani ≥ exact" holds only on
/// `x ≥ CHIANI_CROSSOVER`. The approximation was designed for the tail and
/// is within a few percent there.
pub const CHIANI_CROSSOVER: f64 = 0.665508198090414;

/// Gaussian tail probability Q(x).
///
/// * [`BepMode::Exact`]: `½·erfc(x/√2)`, valid for all real x.
/// * [`BepMode::Chiani`]: the two-exponential approximation, defined for
///   x ≥ 0 and an upper bound on the exact value for
///   x ≥ [`CHIANI_CROSSOVER`].
///
/// # Errors
///
/// [`Error::NegativeQArgument`] for the approximation with x < 0.
///
/// # Example
///
/// ```
/// use fso_ber::modulation::{gaussian_q, BepMode};
///
/// assert_eq!(gaussian_q(0.0, BepMode::Exact).unwrap(), 0.5);
/// let approx = gaussian_q(1.0, BepMode::Chiani).unwrap();
/// let exact = gaussian_q(1.0, BepMode::Exact).unwrap();
/// assert!(approx >= exact);
/// ```
pub fn gaussian_q(x: f64, mode: BepMode) -> Result<f64> {
    match mode {
        BepMode::Exact => Ok(0.5 * erfc(x / core::f64::consts::SQRT_2)),
        BepMode::Chiani => {
            if x < 0.0 {
                return Err(Error::NegativeQArgument(x));
            }
            let x2 = x * x;
            Ok((-0.5 * x2).exp() / 12.0 + (-2.0 * x2 / 3.0).exp() / 4.0)
        }
    }
}

/// Modulation family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// On-off keying (binary intensity).
    Ook,
    /// M-ary pulse-amplitude modulation.
    Pam,
    /// M-ary quadrature-amplitude modulation.
    Qam,
    /// M²-QAM: M amplitude levels per quadrature axis (M² points).
    QamSquared,
}

impl core::fmt::Display for Scheme {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Scheme::Ook => write!(f, "ook"),
            Scheme::Pam => write!(f, "pam"),
            Scheme::Qam => write!(f, "qam"),
            Scheme::QamSquared => write!(f, "qam_squared"),
        }
    }
}

/// A fully-derived modulation choice: scheme, constellation order, and the
/// `F·Q(√(c·γ))` kernel constants.
///
/// For [`Scheme::QamSquared`] the stored `order` is the per-axis amplitude
/// count M, so the constellation has M² points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulationSpec {
    scheme: Scheme,
    order: u32,
    snr_coefficient: f64,
    amplitude_prefactor: f64,
    substituted_formula: bool,
}

fn check_order(m: u32) -> Result<f64> {
    if m < 2 || !m.is_power_of_two() {
        return Err(Error::ModulationOrder(m));
    }
    Ok((m as f64).log2())
}

impl ModulationSpec {
    /// On-off keying: conditional BEP `Q(√(γ/2))`.
    pub fn ook() -> Self {
        Self {
            scheme: Scheme::Ook,
            order: 2,
            snr_coefficient: 0.5,
            amplitude_prefactor: 1.0,
            substituted_formula: false,
        }
    }

    /// OOK spelled with an explicit order, rejecting anything but M = 2.
    pub fn ook_with_order(m: u32) -> Result<Self> {
        if m != 2 {
            return Err(Error::OokOrder(m));
        }
        Ok(Self::ook())
    }

    /// M-PAM with the standard average-intensity Gray-coded kernel
    /// `2(M-1)/(M·log₂M) · Q(√(γ·log₂M)/(M-1))`.
    ///
    /// This is a stand-in convention (the flag
    /// [`substituted_formula`](Self::substituted_formula) is set and
    /// surfaces in CSV metadata and validator warnings): PAM normalization
    /// conventions differ across the literature, and comparisons against
    /// PAM curves from other tools should check which convention they use.
    pub fn pam(m: u32) -> Result<Self> {
        let bits = check_order(m)?;
        let levels = (m - 1) as f64;
        Ok(Self {
            scheme: Scheme::Pam,
            order: m,
            snr_coefficient: bits / (levels * levels),
            amplitude_prefactor: 2.0 * levels / (m as f64 * bits),
            substituted_formula: true,
        })
    }

    /// M-PAM under the peak-intensity normalization,
    /// `c = log₂M / (2(M-1)²)` — reduces to [`ModulationSpec::ook`] at
    /// M = 2. Same prefactor and caveat flag as [`ModulationSpec::pam`];
    /// exposed so PAM results can be compared across conventions.
    pub fn pam_peak_intensity(m: u32) -> Result<Self> {
        let base = Self::pam(m)?;
        Ok(Self {
            snr_coefficient: base.snr_coefficient / 2.0,
            ..base
        })
    }

    /// M-QAM: prefactor `2(1-1/√M)/log₂M`, coefficient
    /// `c = 3·log₂M / (2(M-1))`.
    pub fn qam(m: u32) -> Result<Self> {
        let bits = check_order(m)?;
        let mf = m as f64;
        Ok(Self {
            scheme: Scheme::Qam,
            order: m,
            snr_coefficient: 3.0 * bits / (2.0 * (mf - 1.0)),
            amplitude_prefactor: 2.0 * (1.0 - 1.0 / mf.sqrt()) / bits,
            substituted_formula: false,
        })
    }

    /// M²-QAM (M amplitude levels per axis): prefactor
    /// `2(M-1)/(M·log₂M)`, coefficient `c = log₂M / (4(M-1)²)`.
    pub fn qam_squared(m: u32) -> Result<Self> {
        let bits = check_order(m)?;
        let mf = m as f64;
        let levels = mf - 1.0;
        Ok(Self {
            scheme: Scheme::QamSquared,
            order: m,
            snr_coefficient: bits / (4.0 * levels * levels),
            amplitude_prefactor: 2.0 * levels / (mf * bits),
            substituted_formula: false,
        })
    }

    /// Modulation family.
    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// Constellation order parameter M (per-axis count for
    /// [`Scheme::QamSquared`]).
    pub fn order(&self) -> u32 {
        self.order
    }

    /// Number of constellation points (M, or M² for
    /// [`Scheme::QamSquared`]).
    pub fn constellation_size(&self) -> u64 {
        match self.scheme {
            Scheme::QamSquared => self.order as u64 * self.order as u64,
            _ => self.order as u64,
        }
    }

    /// Bits carried per symbol, log₂ of the constellation size.
    pub fn bits_per_symbol(&self) -> f64 {
        (self.constellation_size() as f64).log2()
    }

    /// SNR coefficient c in `F·Q(√(c·γ))`.
    pub fn snr_coefficient(&self) -> f64 {
        self.snr_coefficient
    }

    /// Amplitude prefactor F in `F·Q(√(c·γ))`.
    pub fn amplitude_prefactor(&self) -> f64 {
        self.amplitude_prefactor
    }

    /// Prefactor with the quadrature normalization folded in, F/√π — the
    /// constant multiplying a Gauss–Hermite node sum.
    pub fn quadrature_prefactor(&self) -> f64 {
        self.amplitude_prefactor / core::f64::consts::PI.sqrt()
    }

    /// True when this kernel is a stand-in convention rather than a form
    /// with a single canonical definition (currently: both PAM variants).
    pub fn substituted_formula(&self) -> bool {
        self.substituted_formula
    }

    /// Short human-readable tag, e.g. `ook`, `4-pam`, `8-qam`,
    /// `16-qam_squared` (M² points for the latter).
    pub fn label(&self) -> String {
        match self.scheme {
            Scheme::Ook => "ook".to_string(),
            _ => format!("{}-{}", self.constellation_size(), self.scheme),
        }
    }
}

/// Conditional bit-error probability at instantaneous electrical SNR γ:
/// `F·Q(√(c·γ))` in the requested Q-form.
///
/// Exact mode stays within [0, ½] and is monotone non-increasing in γ;
/// γ = 0 is legal everywhere (the kernel's maximum).
///
/// # Errors
///
/// [`Error::Negative`] for γ < 0.
///
/// # Example
///
/// ```
/// use fso_ber::modulation::{conditional_bep, BepMode, ModulationSpec};
///
/// let ook = ModulationSpec::ook();
/// let bep = conditional_bep(&ook, 4.0, BepMode::Chiani).unwrap();
/// assert!((bep - 0.096556).abs() < 1e-6);
/// ```
pub fn conditional_bep(spec: &ModulationSpec, gamma: f64, mode: BepMode) -> Result<f64> {
    if !(gamma >= 0.0) {
        return Err(Error::Negative { name: "gamma", value: gamma });
    }
    let arg = (spec.snr_coefficient * gamma).sqrt();
    Ok(spec.amplitude_prefactor * gaussian_q(arg, mode)?)
}

/// Conditional symbol-error probability of rectangular M-QAM at symbol
/// SNR-per-bit γ, exact-Q form.
///
/// * even log₂M (square constellations): `P_M = 1 - (1 - P_√M)²` with
///   `P_√M = 2(1-1/√M)·Q(√(3·log₂M·γ/(M-1)))`;
/// * odd log₂M (rectangular): the union-style upper bound
///   `4·Q(√(3·log₂M·γ/(M-1)))`, clamped to 1.
///
/// # Errors
///
/// [`Error::ModulationOrder`] / [`Error::Negative`] on bad inputs.
pub fn qam_symbol_error(m: u32, gamma: f64) -> Result<f64> {
    let bits = check_order(m)?;
    if !(gamma >= 0.0) {
        return Err(Error::Negative { name: "gamma", value: gamma });
    }
    let mf = m as f64;
    let q = gaussian_q((3.0 * bits * gamma / (mf - 1.0)).sqrt(), BepMode::Exact)?;
    if (bits as u64) % 2 == 0 {
        let p_side = 2.0 * (1.0 - 1.0 / mf.sqrt()) * q;
        Ok(1.0 - (1.0 - p_side) * (1.0 - p_side))
    } else {
        Ok((4.0 * q).min(1.0))
    }
}

/// Display-level minimum-distance figure for DC-biased M-ary signalling:
/// `d_min = (P/(M-1))·√(2·log₂M/R)` plus the matching union-bound
/// symbol-error estimate `((4M-1)/M)·Q(d_min/(2σ_n))`.
///
/// The BER engines never consume this — they average [`conditional_bep`] —
/// but it is useful for link-budget tables.
///
/// # Errors
///
/// [`Error::NonPositive`] / [`Error::ModulationOrder`] on bad inputs.
pub fn qam_dmin_union_bound(
    m: u32,
    power: f64,
    bit_rate: f64,
    noise_std: f64,
) -> Result<(f64, f64)> {
    let bits = check_order(m)?;
    for (name, value) in [("power", power), ("bit_rate", bit_rate), ("noise_std", noise_std)] {
        if !(value > 0.0) {
            return Err(Error::NonPositive { name, value });
        }
    }
    let d_min = power / (m as f64 - 1.0) * (2.0 * bits / bit_rate).sqrt();
    let neighbors = (4.0 * m as f64 - 1.0) / m as f64;
    let ser = neighbors * gaussian_q(d_min / (2.0 * noise_std), BepMode::Exact)?;
    Ok((d_min, ser.min(1.0)))
}

/// Mean electrical SNR, optionally tied to its physical power form.
///
/// The power form fixes γ̄ = 2P²/(σ_n²·R); when both a stated mean and the
/// power triple are supplied they must agree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrSpec {
    mean_snr: f64,
    power_form: Option<PowerForm>,
}

/// Physical quantities behind a mean SNR: signal power (W), bit rate
/// (bit/s), and noise variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerForm {
    pub signal_power: f64,
    pub bit_rate: f64,
    pub noise_variance: f64,
}

impl PowerForm {
    /// Mean SNR implied by this power triple: 2P²/(σ_n²·R).
    pub fn mean_snr(&self) -> f64 {
        2.0 * self.signal_power * self.signal_power / (self.noise_variance * self.bit_rate)
    }
}

impl SnrSpec {
    /// A bare mean SNR (γ̄ ≥ 0).
    pub fn from_mean(mean_snr: f64) -> Result<Self> {
        if !(mean_snr >= 0.0) {
            return Err(Error::Negative { name: "mean_snr", value: mean_snr });
        }
        Ok(Self { mean_snr, power_form: None })
    }

    /// Derives the mean SNR from its power form.
    pub fn from_power(form: PowerForm) -> Result<Self> {
        for (name, value) in [
            ("signal_power", form.signal_power),
            ("bit_rate", form.bit_rate),
            ("noise_variance", form.noise_variance),
        ] {
            if !(value > 0.0) {
                return Err(Error::NonPositive { name, value });
            }
        }
        Ok(Self { mean_snr: form.mean_snr(), power_form: Some(form) })
    }

    /// Attaches a power form to a stated mean, requiring agreement to
    /// within 1e-9 relative.
    pub fn with_power_form(self, form: PowerForm) -> Result<Self> {
        let derived = form.mean_snr();
        let scale = self.mean_snr.abs().max(derived.abs()).max(f64::MIN_POSITIVE);
        if (self.mean_snr - derived).abs() / scale > 1e-9 {
            return Err(Error::SnrMismatch { stated: self.mean_snr, derived });
        }
        Ok(Self { power_form: Some(form), ..self })
    }

    /// Mean electrical SNR γ̄.
    pub fn mean_snr(&self) -> f64 {
        self.mean_snr
    }

    /// The attached power form, when given.
    pub fn power_form(&self) -> Option<PowerForm> {
        self.power_form
    }
}

// ---------------------------------------------------------------------------
// tests
// ---------------------------------------------------------------------------
