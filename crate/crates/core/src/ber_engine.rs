//! Closed-form average BER over the log-normal channel: single-hop SISO and
//! repetition-coded MISO kernels via Gauss–Hermite quadrature, plus
//! decode-and-forward multi-hop composition.
//!
//! A hop's instantaneous electrical SNR is γ = β²·γ̄·h² with h the
//! log-normal irradiance gain; averaging the two-exponential conditional
//! BEP over h becomes a Hermite-weighted node sum after the substitution
//! X = −σ² + σ√2·x. Multi-hop links decode and re-transmit at each relay,
//! so per-hop error probabilities compose by parity.

use crate::channel::{
    correlation_coefficient, normalized_hop_path_loss, rytov_variance, LinkScenario,
    TurbulenceStat,
};
use crate::modulation::{conditional_bep, BepMode, ModulationSpec};
use crate::numerics::{QuadratureRule, TENSOR_HARD_CAP};
use crate::{Error, Result};

/// √32 — the log-amplitude-to-exponent scale: h² = exp(√32·σ·x − 4σ²) under
/// the Hermite substitution.
const SQRT_32: f64 = 5.656854249492381;

fn check_hop_inputs(mean_snr: f64, beta: f64) -> Result<()> {
    if !(mean_snr >= 0.0) {
        return Err(Error::Negative { name: "mean_snr", value: mean_snr });
    }
    if !(beta > 0.0) {
        return Err(Error::NonPositive { name: "beta", value: beta });
    }
    Ok(())
}

/// Average BER of one single-transmitter hop: the two-exponential
/// conditional BEP averaged over log-normal fading with log-amplitude
/// standard deviation `sigma_x`, mean electrical SNR `mean_snr` (linear)
/// and normalized path gain `beta`.
///
/// `sigma_x = 0` short-circuits to the conditional BEP at β²γ̄ (the
/// no-turbulence limit).
///
/// # Errors
///
/// Rejects negative `mean_snr`, non-positive `beta`, negative `sigma_x`.
///
/// # Example
///
/// ```
/// use fso_ber::ber_engine::ber_hop_siso;
/// use fso_ber::modulation::ModulationSpec;
/// use fso_ber::numerics::QuadratureRule;
///
/// let rule = QuadratureRule::gauss_hermite(30).unwrap();
/// let ber = ber_hop_siso(&ModulationSpec::ook(), 1.0e4, 1.0, 0.3744, &rule).unwrap();
/// assert!(ber > 0.0 && ber < 1.0e-5);
/// ```
pub fn ber_hop_siso(
    spec: &ModulationSpec,
    mean_snr: f64,
    beta: f64,
    sigma_x: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    check_hop_inputs(mean_snr, beta)?;
    if !(sigma_x >= 0.0) {
        return Err(Error::Negative { name: "sigma_x", value: sigma_x });
    }
    let gamma_scale = beta * beta * mean_snr;
    if sigma_x == 0.0 {
        return conditional_bep(spec, gamma_scale, BepMode::Chiani);
    }
    let var4 = 4.0 * sigma_x * sigma_x;
    let mut sum = 0.0;
    for (&x, &w) in rule.nodes().iter().zip(rule.weights()) {
        let gamma = gamma_scale * (SQRT_32 * (sigma_x * x) - var4).exp();
        sum += w * conditional_bep(spec, gamma, BepMode::Chiani)?;
    }
    Ok(sum / core::f64::consts::PI.sqrt())
}

/// Average BER of one repetition-coded multi-transmitter hop.
///
/// The `stat` carries the per-aperture log-amplitude covariance; the hop's
/// combined gain is the power sum (1/N_t)·Σᵢhᵢ², averaged by an N_t-fold
/// tensor Gauss–Hermite rule over the decorrelated coordinates. This is the
/// standard moment-matched form and a slightly optimistic envelope of
/// amplitude combining — the Monte Carlo estimator in
/// [`crate::montecarlo`] averages the amplitude-combined SNR instead, and
/// sits a little above this value at low BER.
///
/// With one transmitter the node sums reduce termwise to
/// [`ber_hop_siso`]'s, so the two agree to machine precision.
///
/// # Errors
///
/// [`Error::TensorTooLarge`] when `order^n_tx` exceeds 10⁷ points, plus the
/// input guards of [`ber_hop_siso`].
pub fn ber_hop_miso(
    spec: &ModulationSpec,
    mean_snr: f64,
    beta: f64,
    stat: &TurbulenceStat,
    rule: &QuadratureRule,
) -> Result<f64> {
    check_hop_inputs(mean_snr, beta)?;
    let n_tx = stat.n_tx();
    let order = rule.order();
    let points = (order as u64).checked_pow(n_tx as u32).unwrap_or(u64::MAX);
    if points > TENSOR_HARD_CAP as u64 {
        return Err(Error::TensorTooLarge {
            order,
            branches: n_tx,
            points,
            cap: TENSOR_HARD_CAP as u64,
        });
    }
    let gamma_scale = beta * beta * mean_snr;
    let sigma = stat.sigma_x();
    if sigma == 0.0 {
        return conditional_bep(spec, gamma_scale, BepMode::Chiani);
    }
    let var4 = 4.0 * sigma * sigma;
    let nodes = rule.nodes();
    let weights = rule.weights();
    let sqrt_cov = stat.covariance_sqrt();

    // Walk the multi-index odometer-style; `index` is the per-dimension
    // node choice, most-significant dimension first so the n_tx = 1 order
    // matches the SISO loop exactly.
    let mut index = vec![0usize; n_tx];
    let mut sum = 0.0;
    loop {
        let mut weight = 1.0;
        for &i in &index {
            weight *= weights[i];
        }
        let mut gamma = 0.0;
        for i in 0..n_tx {
            // (S·x)_i with x the chosen node vector.
            let mut proj = 0.0;
            for (j, &idx) in index.iter().enumerate() {
                proj += sqrt_cov[(i, j)] * nodes[idx];
            }
            gamma += (SQRT_32 * proj - var4).exp();
        }
        gamma *= gamma_scale / n_tx as f64;
        sum += weight * conditional_bep(spec, gamma, BepMode::Chiani)?;

        // Advance the last dimension fastest.
        let mut dim = n_tx;
        loop {
            if dim == 0 {
                let norm = core::f64::consts::PI.sqrt().powi(n_tx as i32);
                return Ok(sum / norm);
            }
            dim -= 1;
            index[dim] += 1;
            if index[dim] < order {
                break;
            }
            index[dim] = 0;
        }
    }
}

/// Union-style composition of decode-and-forward hop error probabilities:
/// an end-to-end error occurs unless every hop is correct, giving
/// `1 − Π(1 − b_k)`. Valid for heterogeneous hops; counts double-error
/// cancellations as errors, hence an upper bound.
///
/// Evaluated as `−expm1(Σ ln1p(−b_k))` so tiny per-hop BERs keep full
/// relative precision; a single hop passes through unchanged. The raw
/// product form can exceed ½ for large per-hop BERs while the exact
/// parity value never does, so the result is capped at ½ — still a valid
/// bound, just never looser than the trivial one.
///
/// # Errors
///
/// [`Error::NoHops`] on an empty slice; [`Error::BerRange`] for any
/// b ∉ [0, ½].
///
/// # Example
///
/// ```
/// use fso_ber::ber_engine::compose_multihop_upper;
///
/// let b = compose_multihop_upper(&[1.0e-3; 3]).unwrap();
/// assert!((b - 2.9970e-3).abs() < 1.0e-6);
/// ```
pub fn compose_multihop_upper(hop_bers: &[f64]) -> Result<f64> {
    if hop_bers.is_empty() {
        return Err(Error::NoHops);
    }
    for &b in hop_bers {
        if !(0.0..=0.5).contains(&b) {
            return Err(Error::BerRange(b));
        }
    }
    if hop_bers.len() == 1 {
        return Ok(hop_bers[0]);
    }
    let log_correct: f64 = hop_bers.iter().map(|&b| (-b).ln_1p()).sum();
    Ok((-log_correct.exp_m1()).min(0.5))
}

/// Parity-exact composition of `k` identical decode-and-forward hops:
/// an end-to-end bit error needs an odd number of hop errors, giving
/// `½·[1 − (1 − 2b)^k]`.
///
/// Evaluated as `−½·expm1(k·ln1p(−2b))` so tiny per-hop BERs keep full
/// relative precision; k = 1 passes the hop BER through unchanged.
///
/// # Errors
///
/// [`Error::NoHops`] for k = 0; [`Error::BerRange`] for b ∉ [0, ½].
///
/// # Example
///
/// ```
/// use fso_ber::ber_engine::compose_multihop_identical;
///
/// let b = compose_multihop_identical(1.0e-3, 3).unwrap();
/// assert!((b - 2.9940e-3).abs() < 1.0e-6);
/// ```
pub fn compose_multihop_identical(hop_ber: f64, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::NoHops);
    }
    if !(0.0..=0.5).contains(&hop_ber) {
        return Err(Error::BerRange(hop_ber));
    }
    if k == 1 {
        return Ok(hop_ber);
    }
    Ok(-0.5 * (k as f64 * (-2.0 * hop_ber).ln_1p()).exp_m1())
}

/// How per-hop BERs combine into the end-to-end figure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComposeMode {
    /// `1 − Π(1−b_k)`: heterogeneous-safe upper bound.
    UpperBound,
    /// `½[1−(1−2b)^K]`: parity-exact, requires identical hops (default).
    IdenticalApprox,
}

/// One decode-and-forward hop: its log-amplitude standard deviation and
/// normalized path gain β (hop path loss over direct-link path loss).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hop {
    pub sigma_x: f64,
    pub beta: f64,
}

/// A link layout: the hop chain, the transmit-aperture count, the
/// aperture correlation, and the composition rule.
///
/// The sweep axis everywhere is the *direct link's* mean SNR including its
/// own path loss; each hop's β is normalized against that baseline, so a
/// shorter hop has β > 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    hops: Vec<Hop>,
    n_tx: usize,
    rho: f64,
    compose: ComposeMode,
}

impl Topology {
    /// Direct (single-hop) link over the full scenario distance: β = 1 by
    /// construction, σ from the scenario's turbulence at full length, and
    /// ρ from its aperture geometry.
    pub fn direct(scenario: &LinkScenario, n_tx: usize) -> Result<Self> {
        Self::equidistant(scenario, 1, n_tx)
    }

    /// `k` equal hops of length `link_distance/k`, each with its own
    /// turbulence strength and normalized path gain. ρ comes from the
    /// scenario's aperture separation at the full link distance.
    pub fn equidistant(scenario: &LinkScenario, k: usize, n_tx: usize) -> Result<Self> {
        let rho = if n_tx > 1 { correlation_coefficient(scenario)? } else { 0.0 };
        Self::equidistant_with_rho(scenario, k, n_tx, rho)
    }

    /// [`Topology::equidistant`] with the aperture correlation pinned
    /// explicitly instead of derived from the geometry.
    pub fn equidistant_with_rho(
        scenario: &LinkScenario,
        k: usize,
        n_tx: usize,
        rho: f64,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::NoHops);
        }
        if n_tx == 0 {
            return Err(Error::NonPositive { name: "n_tx", value: 0.0 });
        }
        let hop_sigma = rytov_variance(scenario, scenario.link_distance / k as f64)?.sqrt();
        let beta = normalized_hop_path_loss(scenario, k)?;
        Ok(Self {
            hops: vec![Hop { sigma_x: hop_sigma, beta }; k],
            n_tx,
            rho,
            compose: ComposeMode::IdenticalApprox,
        })
    }

    /// Builds a layout from explicit hops (heterogeneous links, tests).
    pub fn from_hops(hops: Vec<Hop>, n_tx: usize, rho: f64, compose: ComposeMode) -> Result<Self> {
        if hops.is_empty() {
            return Err(Error::NoHops);
        }
        if n_tx == 0 {
            return Err(Error::NonPositive { name: "n_tx", value: 0.0 });
        }
        for hop in &hops {
            if !(hop.sigma_x >= 0.0) {
                return Err(Error::Negative { name: "sigma_x", value: hop.sigma_x });
            }
            if !(hop.beta > 0.0) {
                return Err(Error::NonPositive { name: "beta", value: hop.beta });
            }
        }
        Ok(Self { hops, n_tx, rho, compose })
    }

    /// Replaces the composition rule.
    pub fn with_compose(mut self, compose: ComposeMode) -> Self {
        self.compose = compose;
        self
    }

    /// The hop chain.
    pub fn hops(&self) -> &[Hop] {
        &self.hops
    }

    /// Number of transmit apertures.
    pub fn n_tx(&self) -> usize {
        self.n_tx
    }

    /// Aperture log-amplitude correlation (0 when single-transmitter).
    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Composition rule in force.
    pub fn compose(&self) -> ComposeMode {
        self.compose
    }

    /// True when every hop equals the first bit-for-bit — the requirement
    /// for the parity-exact composition.
    pub fn hops_identical(&self) -> bool {
        self.hops.windows(2).all(|w| w[0] == w[1])
    }
}

/// End-to-end average BER of a layout at a mean SNR in dB: per-hop closed
/// forms composed per the layout's rule, clamped to ½ (a hard decision is
/// never worse than a coin flip).
///
/// # Errors
///
/// [`Error::HeterogeneousHops`] when the parity-exact rule meets unequal
/// hops; otherwise the hop kernels' own guards.
pub fn system_ber(
    topology: &Topology,
    spec: &ModulationSpec,
    mean_snr_db: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    let mean_snr = 10.0_f64.powf(mean_snr_db / 10.0);
    let hop_ber = |hop: &Hop| -> Result<f64> {
        if topology.n_tx == 1 {
            ber_hop_siso(spec, mean_snr, hop.beta, hop.sigma_x, rule)
        } else {
            let stat = TurbulenceStat::new(hop.sigma_x, topology.n_tx, topology.rho)?;
            ber_hop_miso(spec, mean_snr, hop.beta, &stat, rule)
        }
    };
    let composed = match topology.compose {
        ComposeMode::IdenticalApprox => {
            if !topology.hops_identical() {
                return Err(Error::HeterogeneousHops);
            }
            let b = hop_ber(&topology.hops[0])?.min(0.5);
            compose_multihop_identical(b, topology.hops.len())?
        }
        ComposeMode::UpperBound => {
            let mut bers = Vec::with_capacity(topology.hops.len());
            for hop in &topology.hops {
                bers.push(hop_ber(hop)?.min(0.5));
            }
            compose_multihop_upper(&bers)?
        }
    };
    Ok(composed.min(0.5))
}

// ---------------------------------------------------------------------------
// tests
// ---------------------------------------------------------------------------
