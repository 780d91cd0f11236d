//! Semi-analytic Monte Carlo oracle: sample correlated log-normal channel
//! gains, average the conditional BEP over them, and report normal-theory
//! confidence intervals; plus a bit-level on-off-keying simulator for
//! end-to-end sanity checks.
//!
//! Averaging the conditional BEP over sampled gains ("semi-analytic")
//! reaches deep-BER territory that bit-flipping simulation cannot: the
//! estimand is E[BEP(γ(h))], not a count of rare bit errors.
//!
//! Sampling is chunked; every chunk derives its own counter-based stream
//! cipher seed, and chunk results are combined by a fixed-order pairwise
//! tree, so estimates are bit-identical for a given seed no matter how many
//! worker threads participate.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::ber_engine::{compose_multihop_identical, compose_multihop_upper, ComposeMode, Topology};
use crate::channel::TurbulenceStat;
use crate::modulation::{conditional_bep, BepMode, ModulationSpec};
use crate::{Error, Result};

/// Samples drawn per deterministic chunk.
pub const CHUNK_SIZE: u64 = 65_536;

/// Minimum sample count for the semi-analytic estimator.
pub const MIN_SEMI_ANALYTIC_SAMPLES: u64 = 10_000;

/// Minimum bit count for the bit-level simulator.
pub const MIN_BITLEVEL_BITS: u64 = 100_000;

const GAINS_SALT: u64 = 0x6761_696e_73;
const SEMI_SALT: u64 = 0x7365_6d69_0000;
const BITLEVEL_SALT: u64 = 0x6269_7473;

/// A Monte Carlo estimate with its 95% normal-approximation confidence
/// halfwidth (`1.96·s/√n`). The normal interval is approximate when fewer
/// than a few dozen samples carry the estimate's mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    /// Estimated error probability, clamped to [0, ½].
    pub mean: f64,
    /// 95% confidence halfwidth, `1.96·s/√n`.
    pub halfwidth_95: f64,
    /// Number of samples behind the estimate (per hop for multi-hop runs).
    pub samples: u64,
    /// Seed the estimate was produced from.
    pub seed: u64,
}

// --------------------------------------------------------------------------
// deterministic chunk seeding
// --------------------------------------------------------------------------

/// SplitMix64: the standard 64-bit mixing sequence, used only to spread
/// (seed, salt, chunk index) into a full 256-bit stream-cipher key.
struct SplitMix64(u64);

impl SplitMix64 {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
}

/// Counter-based chunk stream: the chunk index is mixed into the key, so
/// chunk streams are independent of how chunks are scheduled over threads.
fn chunk_rng(seed: u64, salt: u64, chunk: u64) -> ChaCha8Rng {
    let mut mixer = SplitMix64(
        seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ chunk.wrapping_mul(0xbf58_476d_1ce4_e5b9),
    );
    let mut key = [0u8; 32];
    for word in key.chunks_exact_mut(8) {
        word.copy_from_slice(&mixer.next().to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

fn chunk_bounds(total: u64) -> impl Iterator<Item = (u64, u64)> {
    let chunks = total.div_ceil(CHUNK_SIZE);
    (0..chunks).map(move |c| {
        let start = c * CHUNK_SIZE;
        (c, (total - start).min(CHUNK_SIZE))
    })
}

// --------------------------------------------------------------------------
// accumulation
// --------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
struct Accum {
    sum: f64,
    sum_sq: f64,
    count: u64,
}

impl Accum {
    fn combine(self, other: Self) -> Self {
        Self {
            sum: self.sum + other.sum,
            sum_sq: self.sum_sq + other.sum_sq,
            count: self.count + other.count,
        }
    }
}

/// Fixed-shape pairwise tree over the ordered chunk results; the shape
/// depends only on the chunk count, never on thread scheduling.
fn tree_reduce(mut level: Vec<Accum>) -> Accum {
    debug_assert!(!level.is_empty());
    while level.len() > 1 {
        level = level
            .chunks(2)
            .map(|pair| if pair.len() == 2 { pair[0].combine(pair[1]) } else { pair[0] })
            .collect();
    }
    level[0]
}

fn finish(acc: Accum, seed: u64) -> McEstimate {
    let n = acc.count as f64;
    let mean = acc.sum / n;
    let variance = ((acc.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    McEstimate {
        mean: mean.min(0.5),
        halfwidth_95: 1.96 * (variance / n).sqrt(),
        samples: acc.count,
        seed,
    }
}

// --------------------------------------------------------------------------
// gain sampling
// --------------------------------------------------------------------------

/// Draws one correlated gain vector into `h`, using the per-branch
/// covariance square root: Y = μ·1 + S·z, hᵢ = e^(2Yᵢ).
fn draw_gains(rng: &mut ChaCha8Rng, stat: &TurbulenceStat, z: &mut [f64], h: &mut [f64]) {
    let n_tx = stat.n_tx();
    for zj in z.iter_mut() {
        *zj = rng.sample(StandardNormal);
    }
    let sqrt_cov = stat.covariance_sqrt();
    let mu = stat.mu_x();
    for i in 0..n_tx {
        let mut y = mu;
        for (j, &zj) in z.iter().enumerate() {
            y += sqrt_cov[(i, j)] * zj;
        }
        h[i] = (2.0 * y).exp();
    }
}

/// Samples `count` correlated log-normal gain vectors; row s holds the
/// N_t per-aperture gains of sample s.
///
/// Deterministic for a fixed seed regardless of worker count. With
/// σ_x = 0 every gain is exactly 1.
///
/// # Errors
///
/// [`Error::TooFewSamples`] when `count` is zero.
///
/// # Example
///
/// ```
/// use fso_ber::channel::TurbulenceStat;
/// use fso_ber::montecarlo::sample_channel_gains;
///
/// let stat = TurbulenceStat::new(0.2, 2, 0.3).unwrap();
/// let gains = sample_channel_gains(&stat, 1000, 42).unwrap();
/// assert_eq!((gains.nrows(), gains.ncols()), (1000, 2));
/// assert!(gains.iter().all(|&h| h > 0.0));
/// ```
pub fn sample_channel_gains(stat: &TurbulenceStat, count: u64, seed: u64) -> Result<DMatrix<f64>> {
    if count == 0 {
        return Err(Error::TooFewSamples { got: 0, min: 1 });
    }
    let n_tx = stat.n_tx();
    let rows: Vec<Vec<f64>> = chunk_bounds(count)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(chunk, cnt)| {
            let mut rng = chunk_rng(seed, GAINS_SALT, chunk);
            let mut z = vec![0.0; n_tx];
            let mut h = vec![0.0; n_tx];
            let mut out = Vec::with_capacity((cnt as usize) * n_tx);
            for _ in 0..cnt {
                draw_gains(&mut rng, stat, &mut z, &mut h);
                out.extend_from_slice(&h);
            }
            out
        })
        .collect();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(DMatrix::from_row_iterator(count as usize, n_tx, flat))
}

// --------------------------------------------------------------------------
// semi-analytic BER
// --------------------------------------------------------------------------

fn hop_estimate(
    stat: &TurbulenceStat,
    spec: &ModulationSpec,
    mean_snr: f64,
    beta: f64,
    samples: u64,
    seed: u64,
    salt: u64,
    mode: BepMode,
) -> Result<McEstimate> {
    let gamma_scale = beta * beta * mean_snr;
    if stat.sigma_x() == 0.0 {
        // Degenerate channel: the estimate is the conditional BEP itself.
        return Ok(McEstimate {
            mean: conditional_bep(spec, gamma_scale, mode)?,
            halfwidth_95: 0.0,
            samples,
            seed,
        });
    }
    let n_tx = stat.n_tx() as f64;
    let accums: Vec<Accum> = chunk_bounds(samples)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(chunk, cnt)| {
            let mut rng = chunk_rng(seed, salt, chunk);
            let mut z = vec![0.0; stat.n_tx()];
            let mut h = vec![0.0; stat.n_tx()];
            let mut acc = Accum { sum: 0.0, sum_sq: 0.0, count: cnt };
            for _ in 0..cnt {
                draw_gains(&mut rng, stat, &mut z, &mut h);
                // Repetition-coded combining averages the received
                // amplitudes: γ = β²γ̄·((1/N_t)Σhᵢ)².
                let h_eff = h.iter().sum::<f64>() / n_tx;
                let gamma = gamma_scale * h_eff * h_eff;
                let bep = conditional_bep(spec, gamma, mode)
                    .expect("gamma is non-negative by construction");
                acc.sum += bep;
                acc.sum_sq += bep * bep;
            }
            acc
        })
        .collect();
    Ok(finish(tree_reduce(accums), seed))
}

/// Semi-analytic Monte Carlo BER of a layout: per-hop averages of the
/// exact conditional BEP over sampled gains, composed across hops on the
/// per-hop means, with a delta-method confidence halfwidth.
///
/// This estimator uses amplitude combining — the true repetition-coded
/// receiver — so at low BER it sits slightly *above* the closed form of
/// [`crate::ber_engine::ber_hop_miso`], whose power-sum step drops the
/// amplitude cross terms. See [`semi_analytic_ber_with_mode`] to instead
/// match the closed form's two-exponential kernel.
///
/// # Errors
///
/// [`Error::TooFewSamples`] below 10⁴ samples; topology/modulation guards
/// as in the closed forms.
pub fn semi_analytic_ber(
    topology: &Topology,
    spec: &ModulationSpec,
    mean_snr_db: f64,
    samples: u64,
    seed: u64,
) -> Result<McEstimate> {
    semi_analytic_ber_with_mode(topology, spec, mean_snr_db, samples, seed, BepMode::Exact)
}

/// [`semi_analytic_ber`] with the conditional-BEP kernel chosen
/// explicitly. [`BepMode::Chiani`] estimates the same quantity the
/// closed forms integrate, which is what makes closed-vs-MC confidence
/// intervals meaningful; [`BepMode::Exact`] is the physical estimator.
pub fn semi_analytic_ber_with_mode(
    topology: &Topology,
    spec: &ModulationSpec,
    mean_snr_db: f64,
    samples: u64,
    seed: u64,
    mode: BepMode,
) -> Result<McEstimate> {
    if samples < MIN_SEMI_ANALYTIC_SAMPLES {
        return Err(Error::TooFewSamples { got: samples, min: MIN_SEMI_ANALYTIC_SAMPLES });
    }
    let mean_snr = 10.0_f64.powf(mean_snr_db / 10.0);
    if !mean_snr.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "mean SNR {mean_snr_db} dB overflows the linear scale"
        )));
    }
    let hops = topology.hops();
    match topology.compose() {
        ComposeMode::IdenticalApprox => {
            if !topology.hops_identical() {
                return Err(Error::HeterogeneousHops);
            }
            let stat = TurbulenceStat::new(hops[0].sigma_x, topology.n_tx(), topology.rho())?;
            let hop = hop_estimate(
                &stat, spec, mean_snr, hops[0].beta, samples, seed, SEMI_SALT, mode,
            )?;
            let k = hops.len();
            let b = hop.mean.min(0.5);
            let mean = compose_multihop_identical(b, k)?;
            // Delta method through B(b) = ½[1−(1−2b)^K]: B'(b) = K(1−2b)^(K−1).
            let slope = k as f64 * (1.0 - 2.0 * b).powi(k as i32 - 1);
            Ok(McEstimate {
                mean: mean.min(0.5),
                halfwidth_95: hop.halfwidth_95 * slope,
                samples,
                seed,
            })
        }
        ComposeMode::UpperBound => {
            let mut means = Vec::with_capacity(hops.len());
            let mut halfwidths = Vec::with_capacity(hops.len());
            for (k, hop) in hops.iter().enumerate() {
                let stat = TurbulenceStat::new(hop.sigma_x, topology.n_tx(), topology.rho())?;
                let est = hop_estimate(
                    &stat,
                    spec,
                    mean_snr,
                    hop.beta,
                    samples,
                    seed,
                    SEMI_SALT + k as u64,
                    mode,
                )?;
                means.push(est.mean.min(0.5));
                halfwidths.push(est.halfwidth_95);
            }
            let mean = compose_multihop_upper(&means)?;
            // Delta method through B = 1−Π(1−b_k): ∂B/∂b_k = Π_{j≠k}(1−b_j).
            let mut var = 0.0;
            for k in 0..means.len() {
                let mut partial = 1.0;
                for (j, &b) in means.iter().enumerate() {
                    if j != k {
                        partial *= 1.0 - b;
                    }
                }
                var += (partial * halfwidths[k]).powi(2);
            }
            Ok(McEstimate {
                mean: mean.min(0.5),
                halfwidth_95: var.sqrt(),
                samples,
                seed,
            })
        }
    }
}

/// [`semi_analytic_ber`] with a target relative halfwidth: doubles the
/// sample count (re-running deterministically) until
/// `halfwidth_95 ≤ target_rel_halfwidth·mean` or `max_samples` is reached.
/// The result is still fully determined by `(inputs, seed)`.
///
/// # Errors
///
/// As [`semi_analytic_ber`]; additionally rejects a non-positive target.
pub fn semi_analytic_ber_adaptive(
    topology: &Topology,
    spec: &ModulationSpec,
    mean_snr_db: f64,
    initial_samples: u64,
    seed: u64,
    target_rel_halfwidth: f64,
    max_samples: u64,
) -> Result<McEstimate> {
    if !(target_rel_halfwidth > 0.0) {
        return Err(Error::NonPositive {
            name: "target_rel_halfwidth",
            value: target_rel_halfwidth,
        });
    }
    let mut n = initial_samples;
    loop {
        let est = semi_analytic_ber(topology, spec, mean_snr_db, n, seed)?;
        let tight = est.mean > 0.0 && est.halfwidth_95 <= target_rel_halfwidth * est.mean;
        if tight || n >= max_samples {
            return Ok(est);
        }
        n = (n.saturating_mul(2)).min(max_samples);
    }
}

// --------------------------------------------------------------------------
// bit-level simulation
// --------------------------------------------------------------------------

/// Bit-level on-off-keying simulator: equiprobable on/off symbols through
/// the sampled gain and unit-variance Gaussian noise, threshold detection
/// at the per-realization maximum-likelihood midpoint.
///
/// The "on" amplitude is √(2γ) with γ = β²γ̄·h_eff², matching the
/// conditional BEP convention Q(√(γ/2)); multi-aperture statistics combine
/// by amplitude averaging.
///
/// # Errors
///
/// [`Error::TooFewSamples`] below 10⁵ bits; `beta` must be positive.
pub fn bitlevel_ook_ber(
    mean_snr_db: f64,
    stat: &TurbulenceStat,
    beta: f64,
    bits: u64,
    seed: u64,
) -> Result<McEstimate> {
    if bits < MIN_BITLEVEL_BITS {
        return Err(Error::TooFewSamples { got: bits, min: MIN_BITLEVEL_BITS });
    }
    if !(beta > 0.0) {
        return Err(Error::NonPositive { name: "beta", value: beta });
    }
    let mean_snr = 10.0_f64.powf(mean_snr_db / 10.0);
    if !mean_snr.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "mean SNR {mean_snr_db} dB overflows the linear scale"
        )));
    }
    let amp_scale = (2.0 * mean_snr).sqrt() * beta;
    let n_tx = stat.n_tx() as f64;
    let accums: Vec<Accum> = chunk_bounds(bits)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(chunk, cnt)| {
            let mut rng = chunk_rng(seed, BITLEVEL_SALT, chunk);
            let mut z = vec![0.0; stat.n_tx()];
            let mut h = vec![0.0; stat.n_tx()];
            let mut acc = Accum { sum: 0.0, sum_sq: 0.0, count: cnt };
            for _ in 0..cnt {
                draw_gains(&mut rng, stat, &mut z, &mut h);
                let h_eff = h.iter().sum::<f64>() / n_tx;
                let amplitude = amp_scale * h_eff;
                let bit_on: bool = rng.random_bool(0.5);
                let noise: f64 = rng.sample(StandardNormal);
                let received = if bit_on { amplitude + noise } else { noise };
                let decided_on = received > 0.5 * amplitude;
                if decided_on != bit_on {
                    acc.sum += 1.0;
                    acc.sum_sq += 1.0;
                }
            }
            acc
        })
        .collect();
    Ok(finish(tree_reduce(accums), seed))
}

// --------------------------------------------------------------------------
// tests
// --------------------------------------------------------------------------
