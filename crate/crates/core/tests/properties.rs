//! Randomized invariant checks across the library: bound ordering of the
//! Q-function forms, covariance factorization, multi-hop composition
//! algebra, CSV round-tripping, bisection stability, and the reduction
//! lattice between the MISO and SISO engines.

use fso_ber::ber_engine::{
    ber_hop_miso, ber_hop_siso, compose_multihop_identical, compose_multihop_upper, ComposeMode,
    Hop, Topology,
};
use fso_ber::channel::{covariance_matrix, TurbulenceStat};
use fso_ber::modulation::{gaussian_q, BepMode, ModulationSpec};
use fso_ber::numerics::{symmetric_matrix_sqrt, QuadratureRule};
use fso_ber::scenario::{
    emit_csv_string, parse_csv_str, snr_at_target_ber_bracket, BerPoint, SweepResult,
};
use proptest::prelude::*;

/// Any finite double, including signed zeros, subnormals, and the extremes.
fn finite_f64() -> impl Strategy<Value = f64> {
    prop_oneof![
        prop::num::f64::POSITIVE | prop::num::f64::NEGATIVE
            | prop::num::f64::NORMAL
            | prop::num::f64::SUBNORMAL
            | prop::num::f64::ZERO,
        Just(5e-324),
        Just(f64::MAX),
        Just(-f64::MAX),
        Just(0.0),
    ]
}

fn ber_point() -> impl Strategy<Value = BerPoint> {
    (finite_f64(), finite_f64(), prop::option::of(finite_f64()), prop::option::of(finite_f64()))
        .prop_map(|(snr_db, ber_closed, ber_mc, mc_halfwidth_95)| BerPoint {
            snr_db,
            ber_closed,
            ber_mc,
            mc_halfwidth_95,
        })
}

fn metadata_entry() -> impl Strategy<Value = (String, String)> {
    ("[a-z][a-z0-9_]{0,15}", "[ -~]{0,30}")
}

fn scheme() -> impl Strategy<Value = ModulationSpec> {
    prop_oneof![
        Just(ModulationSpec::ook()),
        Just(ModulationSpec::pam(4).unwrap()),
        Just(ModulationSpec::qam(4).unwrap()),
        Just(ModulationSpec::qam_squared(4).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    /// Beyond its crossover point the two-exponential form stays at or
    /// above the exact Q-function (it is *not* a bound below ~0.6655).
    #[test]
    fn chiani_upper_bounds_exact_q_beyond_the_crossover(x in 0.6656f64..10.0) {
        let approx = gaussian_q(x, BepMode::Chiani).unwrap();
        let exact = gaussian_q(x, BepMode::Exact).unwrap();
        prop_assert!(
            approx >= exact,
            "chiani {approx:e} fell below exact {exact:e} at x = {x}"
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// The covariance square root reconstructs the covariance, entrywise.
    #[test]
    fn covariance_sqrt_reconstructs_the_matrix(
        n_tx in 1usize..=5,
        rho in 0.0f64..=0.99,
        sigma_y_sq in 1e-4f64..0.25,
    ) {
        let cov = covariance_matrix(n_tx, sigma_y_sq, rho).unwrap();
        let root = symmetric_matrix_sqrt(&cov).unwrap();
        let rebuilt = &root * root.transpose();
        for i in 0..n_tx {
            for j in 0..n_tx {
                prop_assert!(
                    (rebuilt[(i, j)] - cov[(i, j)]).abs() <= 1e-12 * sigma_y_sq.max(1.0),
                    "entry ({i},{j}): {} vs {}", rebuilt[(i, j)], cov[(i, j)]
                );
            }
        }
    }

    /// Single-hop composition is the identity; the product-form bound
    /// dominates the identical-hop approximation; both stay in [0, ½];
    /// and extra hops never reduce the end-to-end error rate.
    #[test]
    fn composition_algebra(hop_ber in 0.0f64..=0.5, k in 1usize..=6) {
        let identical_1 = compose_multihop_identical(hop_ber, 1).unwrap();
        let upper_1 = compose_multihop_upper(&[hop_ber]).unwrap();
        prop_assert_eq!(identical_1, hop_ber);
        prop_assert_eq!(upper_1, hop_ber);

        let identical = compose_multihop_identical(hop_ber, k).unwrap();
        let upper = compose_multihop_upper(&vec![hop_ber; k]).unwrap();
        prop_assert!((0.0..=0.5).contains(&identical), "identical = {identical}");
        prop_assert!((0.0..=0.5).contains(&upper), "upper = {upper}");
        prop_assert!(
            upper >= identical - 1e-15,
            "product-form bound {upper:e} below identical-hop value {identical:e} at k = {k}"
        );

        let longer = compose_multihop_identical(hop_ber, k + 1).unwrap();
        prop_assert!(
            longer >= identical - 1e-15,
            "adding a hop reduced the composed BER: {longer:e} < {identical:e}"
        );
    }

    /// Emitted CSV parses back to the identical result, for any finite
    /// values — the scientific formatter is round-trip exact.
    #[test]
    fn csv_round_trip_is_exact(
        metadata in prop::collection::vec(metadata_entry(), 0..6),
        points in prop::collection::vec(ber_point(), 0..12),
    ) {
        let result = SweepResult { metadata, points };
        let text = emit_csv_string(&result);
        let back = parse_csv_str(&text).unwrap();
        prop_assert_eq!(back, result);
    }

    /// The closed form is non-increasing along the SNR axis for every
    /// scheme (clamped at one half on the low side).
    #[test]
    fn siso_ber_is_monotone_in_snr(
        spec in scheme(),
        sigma in 0.01f64..0.45,
        db_lo in -10.0f64..50.0,
        delta_db in 0.1f64..20.0,
    ) {
        let rule = QuadratureRule::gauss_hermite(30).unwrap();
        let lo = 10.0f64.powf(db_lo / 10.0);
        let hi = 10.0f64.powf((db_lo + delta_db) / 10.0);
        let ber_lo = ber_hop_siso(&spec, lo, 1.0, sigma, &rule).unwrap();
        let ber_hi = ber_hop_siso(&spec, hi, 1.0, sigma, &rule).unwrap();
        prop_assert!(
            ber_hi <= ber_lo * (1.0 + 1e-12),
            "BER rose with SNR: {ber_lo:e} @ {db_lo} dB -> {ber_hi:e} @ {} dB",
            db_lo + delta_db
        );
    }

    /// A one-transmitter multi-aperture hop is exactly a SISO hop.
    #[test]
    fn single_transmitter_miso_matches_siso(
        spec in scheme(),
        sigma in 0.01f64..0.45,
        db in -10.0f64..50.0,
        beta in 0.1f64..2.0,
    ) {
        let rule = QuadratureRule::gauss_hermite(30).unwrap();
        let mean_snr = 10.0f64.powf(db / 10.0);
        let stat = TurbulenceStat::new(sigma, 1, 0.0).unwrap();
        let siso = ber_hop_siso(&spec, mean_snr, beta, sigma, &rule).unwrap();
        let miso = ber_hop_miso(&spec, mean_snr, beta, &stat, &rule).unwrap();
        let rel = (siso - miso).abs() / siso.max(f64::MIN_POSITIVE);
        prop_assert!(rel <= 1e-15, "siso {siso:e} vs single-branch miso {miso:e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Any bracket containing the crossing bisects to the same answer
    /// (within the resolution of two independent 0.002 dB brackets).
    #[test]
    fn bisection_is_bracket_independent(
        target_exp in -11.0f64..-1.0,
        lo_shift in 0.0f64..8.0,
        hi_shift in 0.0f64..40.0,
    ) {
        let target = 10.0f64.powf(target_exp);
        let topo = Topology::from_hops(
            vec![Hop { sigma_x: 0.1, beta: 1.0 }],
            1,
            0.0,
            ComposeMode::IdenticalApprox,
        )
        .unwrap();
        let spec = ModulationSpec::ook();
        let rule = QuadratureRule::gauss_hermite(30).unwrap();
        let a = snr_at_target_ber_bracket(&topo, &spec, &rule, target, 0.0, 60.0).unwrap();
        let b = snr_at_target_ber_bracket(
            &topo, &spec, &rule, target, -lo_shift, 60.0 + hi_shift,
        )
        .unwrap();
        prop_assert!(
            (a - b).abs() <= 0.01,
            "brackets disagree: {a} vs {b} for target {target:e}"
        );
    }
}
