//! Bit-error-rate analysis for free-space optical (FSO) links over
//! log-normal atmospheric turbulence.
//!
//! The library models intensity-modulated / direct-detection links in four
//! topologies — direct SISO, repetition-coded MISO, multi-hop
//! decode-and-forward SISO, and multi-hop MISO — with OOK, M-PAM, M-QAM and
//! M²-QAM signalling. For each topology it offers:
//!
//! * **Closed forms** ([`ber_engine`]): Gauss–Hermite quadrature averages of
//!   the two-exponential conditional bit-error probability over the
//!   log-normal fading distribution, including the correlated-aperture
//!   tensor rule for MISO.
//! * **Monte Carlo** ([`montecarlo`]): a semi-analytic estimator that
//!   averages the exact conditional bit-error probability over sampled
//!   channel gains, reaching deep-BER territory without bit-level
//!   simulation, plus a bit-level OOK cross-check.
//! * **Scenario plumbing** ([`scenario`]): TOML configs, SNR sweeps,
//!   target-SNR bisection, gain comparisons, CSV emission, and presets that
//!   reproduce the reference link budgets.
//!
//! # Example
//!
//! Closed-form BER of a 1.2 km clear-weather OOK link at 30 dB mean SNR:
//!
//! ```
//! use fso_ber::ber_engine::ber_hop_siso;
//! use fso_ber::channel::{rytov_variance, LinkScenario};
//! use fso_ber::modulation::ModulationSpec;
//! use fso_ber::numerics::QuadratureRule;
//!
//! let link = LinkScenario::clear();
//! let sigma = rytov_variance(&link, link.link_distance).unwrap().sqrt();
//! let rule = QuadratureRule::gauss_hermite(30).unwrap();
//! let ook = ModulationSpec::ook();
//! // Path loss normalized out: the SNR axis refers to the direct link itself.
//! let ber = ber_hop_siso(&ook, 1e3, 1.0, sigma, &rule).unwrap();
//! assert!(ber > 0.0 && ber < 1e-2);
//! ```

pub mod ber_engine;
pub mod channel;
pub mod modulation;
pub mod montecarlo;
pub mod numerics;
pub mod scenario;

use thiserror::Error;

/// Unified error type for the whole library.
///
/// Variants fall into two broad classes that the CLI maps onto exit codes:
/// configuration/domain problems (exit 1) and numeric failures such as a
/// missing BER crossing or an oversized tensor rule (exit 2).
#[derive(Debug, Error)]
pub enum Error {
    // --- numerics ---------------------------------------------------------
    #[error("quadrature order {0} is outside the supported range 1..=128")]
    QuadratureOrder(usize),
    #[error("matrix entry ({i},{j}) breaks symmetry by {delta:.3e} (tolerance 1e-12)")]
    NotSymmetric { i: usize, j: usize, delta: f64 },
    #[error("matrix is not positive semidefinite: eigenvalue {0:.6e} is below -1e-12")]
    Indefinite(f64),

    // --- domain guards shared by several modules --------------------------
    #[error("{name} must be strictly positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("{name} must be non-negative, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("correlation coefficient must lie in [0, 1], got {0}")]
    CorrelationRange(f64),
    #[error("the density degenerates to a point mass at sigma = 0; evaluate the conditional BEP directly")]
    DegenerateDensity,

    // --- modulation --------------------------------------------------------
    #[error("the two-exponential Q approximation is defined for x >= 0, got {0}")]
    NegativeQArgument(f64),
    #[error("modulation order {0} must be a power of two with M >= 2")]
    ModulationOrder(u32),
    #[error("OOK is binary: order must be 2, got {0}")]
    OokOrder(u32),
    #[error("mean SNR mismatch: stated {stated} but the power form gives 2P^2/(sigma_n^2*R) = {derived}")]
    SnrMismatch { stated: f64, derived: f64 },

    // --- ber_engine --------------------------------------------------------
    #[error(
        "tensor quadrature needs {points} nodes ({order}^{branches}); the cap is {cap} — lower the per-dimension order"
    )]
    TensorTooLarge { order: usize, branches: usize, points: u64, cap: u64 },
    #[error("per-hop BER {0} is outside [0, 0.5]")]
    BerRange(f64),
    #[error("a topology needs at least one hop")]
    NoHops,
    #[error("identical-hop composition requires equal per-hop BERs; use the product-form upper bound for heterogeneous hops")]
    HeterogeneousHops,

    // --- montecarlo ---------------------------------------------------------
    #[error("sample count {got} is below the minimum {min}")]
    TooFewSamples { got: u64, min: u64 },

    // --- scenario -----------------------------------------------------------
    #[error(
        "BER never crosses {target:.3e} in [{lo_db} dB, {hi_db} dB]: BER({lo_db} dB) = {f_lo:.3e}, BER({hi_db} dB) = {f_hi:.3e}"
    )]
    NoCrossing { target: f64, lo_db: f64, hi_db: f64, f_lo: f64, f_hi: f64 },
    #[error("target BER must lie in (0, 0.5], got {0}")]
    TargetRange(f64),
    #[error("invalid config:\n{0}")]
    InvalidConfig(String),
    #[error("config parse error: {0}")]
    ConfigParse(Box<toml::de::Error>),
    #[error("CSV parse error at line {line}: {message}")]
    CsvParse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::ConfigParse(Box::new(e))
    }
}

/// Library-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
