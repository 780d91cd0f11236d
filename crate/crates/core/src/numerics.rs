//! Quadrature rules and matrix factorizations the closed forms require.
//!
//! The BER closed forms are weighted-node sums against the physicists'
//! Hermite weight `e^(-x²)`; the MISO forms additionally need the symmetric
//! square root of the aperture covariance matrix. Both are computed from
//! symmetric eigenproblems — no hard-coded node tables.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::{Error, Result};

/// Largest supported 1-D quadrature order.
pub const MAX_ORDER: usize = 128;

/// Default 1-D quadrature order for the SISO closed forms.
pub const DEFAULT_ORDER_1D: usize = 30;

/// Reduced per-dimension order used when a tensor rule at
/// [`DEFAULT_ORDER_1D`] would exceed [`TENSOR_SOFT_CAP`] points.
pub const DEFAULT_ORDER_TENSOR: usize = 20;

/// Tensor-rule size above which the default per-dimension order drops to
/// [`DEFAULT_ORDER_TENSOR`].
pub const TENSOR_SOFT_CAP: u64 = 1_000_000;

/// Hard ceiling on tensor-rule size; larger requests are an error.
pub const TENSOR_HARD_CAP: u64 = 10_000_000;

/// A Gauss–Hermite quadrature rule in the physicists' convention:
/// `∫ f(x)·e^(-x²) dx ≈ Σ wᵢ·f(xᵢ)` over (-∞, ∞).
///
/// Nodes are symmetric about zero, weights are positive, and the weights sum
/// to √π (the total mass of `e^(-x²)`).
///
/// # Example
///
/// ```
/// use fso_ber::numerics::QuadratureRule;
///
/// let rule = QuadratureRule::gauss_hermite(10).unwrap();
/// let second_moment = rule.integrate(|x| x * x);
/// assert!((second_moment - core::f64::consts::PI.sqrt() / 2.0).abs() < 1e-12);
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// Builds the order-`n` Gauss–Hermite rule: Golub–Welsch eigenvalues of
    /// the Jacobi matrix (off-diagonal `√(i/2)`) seed the nodes, Newton
    /// steps against the orthonormal Hermite recurrence polish each to
    /// machine precision, and the weights follow analytically as
    /// `1/(n·h̃_{n-1}(xᵢ)²)`. The polish matters: the eigensolver alone
    /// leaves ~1e-9 wobble in the nodes that every closed form downstream
    /// would inherit.
    ///
    /// # Errors
    ///
    /// [`Error::QuadratureOrder`] when `n` is outside `1..=128`.
    pub fn gauss_hermite(n: usize) -> Result<Self> {
        if n < 1 || n > MAX_ORDER {
            return Err(Error::QuadratureOrder(n));
        }
        let sqrt_pi = core::f64::consts::PI.sqrt();
        if n == 1 {
            // The eigensolver is overkill for the 1x1 case.
            return Ok(Self {
                nodes: vec![0.0],
                weights: vec![sqrt_pi],
            });
        }

        let mut jacobi = DMatrix::<f64>::zeros(n, n);
        for i in 1..n {
            let b = (i as f64 / 2.0).sqrt();
            jacobi[(i - 1, i)] = b;
            jacobi[(i, i - 1)] = b;
        }
        let eigen = SymmetricEigen::new(jacobi);
        let mut nodes: Vec<f64> = eigen.eigenvalues.iter().copied().collect();
        nodes.sort_by(f64::total_cmp);

        for x in nodes.iter_mut() {
            for _ in 0..4 {
                let (h_n, h_prev) = normalized_hermite(n, *x);
                let derivative = (2.0 * n as f64).sqrt() * h_prev;
                let step = h_n / derivative;
                *x -= step;
                if step.abs() <= f64::EPSILON * x.abs().max(1.0) {
                    break;
                }
            }
        }

        // The true rule is symmetric about zero; make the mirror exact.
        let half = n / 2;
        for i in 0..half {
            let j = n - 1 - i;
            let mag = 0.5 * (nodes[j] - nodes[i]);
            nodes[i] = -mag;
            nodes[j] = mag;
        }
        if n % 2 == 1 {
            nodes[half] = 0.0;
        }

        // The normalized recurrence keeps every intermediate O(1), so the
        // weight formula is stable at any supported order.
        let weights: Vec<f64> = nodes
            .iter()
            .map(|&x| {
                let (_, h_prev) = normalized_hermite(n, x);
                1.0 / (n as f64 * h_prev * h_prev)
            })
            .collect();

        Ok(Self { nodes, weights })
    }

    /// Quadrature nodes in ascending order.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Weights matching [`nodes`](Self::nodes) by index.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of nodes.
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Approximates `∫ f(x)·e^(-x²) dx` over the real line.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Default per-dimension order for a `branches`-fold tensor rule: 30
    /// while `30^branches` stays within the soft cap, 20 above it.
    pub fn default_tensor_order(branches: usize) -> usize {
        let soft = (DEFAULT_ORDER_1D as u128).checked_pow(branches as u32);
        match soft {
            Some(points) if points <= TENSOR_SOFT_CAP as u128 => DEFAULT_ORDER_1D,
            _ => DEFAULT_ORDER_TENSOR,
        }
    }
}

/// Values `(h̃_n(x), h̃_{n-1}(x))` of the Hermite polynomials orthonormal
/// under the weight `e^(-x²)`: `h̃₀ = π^(-1/4)` and
/// `x·h̃_k = √((k+1)/2)·h̃_{k+1} + √(k/2)·h̃_{k-1}`.
fn normalized_hermite(n: usize, x: f64) -> (f64, f64) {
    let mut prev = 0.0;
    let mut current = core::f64::consts::PI.powf(-0.25);
    for k in 0..n {
        let next =
            (x * current - (k as f64 / 2.0).sqrt() * prev) / ((k as f64 + 1.0) / 2.0).sqrt();
        prev = current;
        current = next;
    }
    (current, prev)
}

/// Symmetric positive-semidefinite square root `S` of a symmetric PSD
/// matrix, with `S·S` reproducing the input.
///
/// Uses an eigendecomposition (not Cholesky) so the result is itself
/// symmetric. Eigenvalues in `[-1e-12, 0)` are treated as rounding noise and
/// clamped to zero.
///
/// # Errors
///
/// * [`Error::NotSymmetric`] when any entry pair differs by more than 1e-12.
/// * [`Error::Indefinite`] when an eigenvalue falls below -1e-12.
///
/// # Example
///
/// ```
/// use fso_ber::numerics::symmetric_matrix_sqrt;
/// use nalgebra::DMatrix;
///
/// let m = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 9.0]);
/// let s = symmetric_matrix_sqrt(&m).unwrap();
/// assert!((s[(0, 0)] - 2.0).abs() < 1e-12 && (s[(1, 1)] - 3.0).abs() < 1e-12);
/// ```
pub fn symmetric_matrix_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let delta = (m[(i, j)] - m[(j, i)]).abs();
            if delta > 1e-12 {
                return Err(Error::NotSymmetric { i, j, delta });
            }
        }
    }

    let eigen = SymmetricEigen::new(m.clone());
    let mut roots = eigen.eigenvalues.clone();
    for lambda in roots.iter_mut() {
        if *lambda < -1e-12 {
            return Err(Error::Indefinite(*lambda));
        }
        *lambda = lambda.max(0.0).sqrt();
    }

    let v = &eigen.eigenvectors;
    let mut s = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let col = v.column(k);
        let r = roots[k];
        for i in 0..n {
            for j in 0..n {
                s[(i, j)] += r * col[i] * col[j];
            }
        }
    }
    // The sum above is symmetric up to rounding; make it exact.
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (s[(i, j)] + s[(j, i)]);
            s[(i, j)] = avg;
            s[(j, i)] = avg;
        }
    }
    Ok(s)
}

/// Adaptive Simpson integration of `f` over `[a, b]` to absolute tolerance
/// `tol` (with relative refinement once the running estimate dominates).
///
/// This is the reference integrator the test suite uses to cross-check the
/// Gauss–Hermite closed forms against direct numeric integration; it is
/// deliberately simple and conservatively refined.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }

    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, left, lm, flm, 0.5 * tol, depth - 1)
            + recurse(f, m, fm, b, fb, right, rm, frm, 0.5 * tol, depth - 1)
    }

    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, 48)
}

// ---------------------------------------------------------------------------
// tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const SQRT_PI: f64 = 1.7724538509055160;

    #[test]
    fn order_one_is_the_midpoint_rule() {
        let rule = QuadratureRule::gauss_hermite(1).unwrap();
        assert_eq!(rule.nodes(), &[0.0], "order 1 must place its node at 0");
        assert_abs_diff_eq!(rule.weights()[0], SQRT_PI, epsilon = 1e-15);
    }

    #[test]
    fn order_two_matches_the_known_rule() {
        let rule = QuadratureRule::gauss_hermite(2).unwrap();
        let inv_sqrt2 = 1.0 / 2.0_f64.sqrt();
        assert_abs_diff_eq!(rule.nodes()[0], -inv_sqrt2, epsilon = 1e-14);
        assert_abs_diff_eq!(rule.nodes()[1], inv_sqrt2, epsilon = 1e-14);
        assert_abs_diff_eq!(rule.weights()[0], SQRT_PI / 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(rule.weights()[1], SQRT_PI / 2.0, epsilon = 1e-14);
    }

    #[test]
    fn order_three_matches_the_known_rule() {
        let rule = QuadratureRule::gauss_hermite(3).unwrap();
        let x = (1.5_f64).sqrt();
        assert_abs_diff_eq!(rule.nodes()[0], -x, epsilon = 1e-13);
        assert_abs_diff_eq!(rule.nodes()[1], 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!(rule.nodes()[2], x, epsilon = 1e-13);
        assert_abs_diff_eq!(rule.weights()[0], SQRT_PI / 6.0, epsilon = 1e-13);
        assert_abs_diff_eq!(rule.weights()[1], 2.0 * SQRT_PI / 3.0, epsilon = 1e-13);
        assert_abs_diff_eq!(rule.weights()[2], SQRT_PI / 6.0, epsilon = 1e-13);
    }

    #[test]
    fn weights_sum_to_sqrt_pi_and_moments_match() {
        for n in [1, 2, 3, 5, 10, 20, 30, 40, 64, 100, 128] {
            let rule = QuadratureRule::gauss_hermite(n).unwrap();
            let mass: f64 = rule.weights().iter().sum();
            assert!(
                (mass - SQRT_PI).abs() < 1e-12,
                "order {n}: weight mass {mass} should be sqrt(pi)"
            );
            if n >= 2 {
                let m2 = rule.integrate(|x| x * x);
                assert!(
                    (m2 - SQRT_PI / 2.0).abs() < 1e-10,
                    "order {n}: second moment {m2} should be sqrt(pi)/2"
                );
            }
            if n >= 3 {
                let m4 = rule.integrate(|x| x.powi(4));
                assert!(
                    (m4 - 0.75 * SQRT_PI).abs() < 1e-9,
                    "order {n}: fourth moment {m4} should be 3*sqrt(pi)/4"
                );
            }
        }
    }

    #[test]
    fn rule_is_exact_for_polynomials_up_to_degree_2n_minus_1() {
        // Gaussian moments: ∫ x^d e^{-x²} dx = Γ((d+1)/2) for even d, 0 for odd.
        fn gaussian_moment(d: u32) -> f64 {
            if d % 2 == 1 {
                return 0.0;
            }
            // Γ(k + 1/2) = (2k)!/(4^k k!)·√π with k = d/2.
            let k = (d / 2) as i32;
            let mut value = core::f64::consts::PI.sqrt();
            for i in 0..k {
                value *= (i as f64) + 0.5;
            }
            value
        }
        for n in [5usize, 10, 20] {
            let rule = QuadratureRule::gauss_hermite(n).unwrap();
            for d in 0..(2 * n as u32) {
                let got = rule.integrate(|x| x.powi(d as i32));
                let want = gaussian_moment(d);
                if want == 0.0 {
                    // Odd moments cancel pairwise *exactly* thanks to the
                    // enforced node mirror; the sequential total only carries
                    // summation rounding, which scales with the term sizes.
                    for i in 0..n / 2 {
                        let j = n - 1 - i;
                        let (x, w) = (rule.nodes()[i], rule.weights()[i]);
                        let (y, v) = (rule.nodes()[j], rule.weights()[j]);
                        assert_eq!(
                            w * x.powi(d as i32),
                            -(v * y.powi(d as i32)),
                            "order {n}, degree {d}: pair {i}/{j} must cancel exactly"
                        );
                    }
                    let scale: f64 = rule
                        .nodes()
                        .iter()
                        .zip(rule.weights())
                        .map(|(&x, &w)| (w * x.powi(d as i32)).abs())
                        .sum();
                    assert!(
                        got.abs() <= scale * 1e-13,
                        "order {n}, degree {d}: odd moment {got} exceeds rounding scale"
                    );
                } else {
                    assert!(
                        ((got - want) / want).abs() < 1e-9,
                        "order {n}, degree {d}: got {got}, want {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn nodes_are_symmetric_and_weights_positive() {
        for n in [7usize, 16, 25, 30, 33, 64] {
            let rule = QuadratureRule::gauss_hermite(n).unwrap();
            for i in 0..n {
                let j = n - 1 - i;
                assert_eq!(
                    rule.nodes()[i], -rule.nodes()[j],
                    "order {n}: nodes {i}/{j} must mirror exactly"
                );
                assert!(rule.weights()[i] > 0.0, "order {n}: weight {i} must be positive");
            }
        }
    }

    #[test]
    fn out_of_range_orders_are_rejected() {
        assert!(matches!(
            QuadratureRule::gauss_hermite(0),
            Err(Error::QuadratureOrder(0))
        ));
        assert!(matches!(
            QuadratureRule::gauss_hermite(129),
            Err(Error::QuadratureOrder(129))
        ));
    }

    #[test]
    fn default_tensor_order_drops_past_the_soft_cap() {
        assert_eq!(QuadratureRule::default_tensor_order(1), 30);
        assert_eq!(QuadratureRule::default_tensor_order(2), 30);
        assert_eq!(QuadratureRule::default_tensor_order(3), 30);
        assert_eq!(QuadratureRule::default_tensor_order(4), 30, "30^4 = 810000 is below the cap");
        assert_eq!(QuadratureRule::default_tensor_order(5), 20, "30^5 exceeds the soft cap");
    }

    #[test]
    fn matrix_sqrt_reproduces_identity_and_diagonals() {
        let id = DMatrix::<f64>::identity(3, 3);
        let s = symmetric_matrix_sqrt(&id).unwrap();
        assert!((&s - &id).abs().max() < 1e-13, "sqrt(I) must be I");

        let d = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 9.0]);
        let s = symmetric_matrix_sqrt(&d).unwrap();
        assert_abs_diff_eq!(s[(0, 0)], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s[(1, 1)], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s[(0, 1)], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn matrix_sqrt_multiplies_back() {
        let m = DMatrix::from_row_slice(2, 2, &[0.04, 0.012, 0.012, 0.04]);
        let s = symmetric_matrix_sqrt(&m).unwrap();
        let back = &s * &s;
        assert!(
            (&back - &m).abs().max() < 1e-10,
            "S*S must reproduce the input within 1e-10 per entry"
        );
        assert_eq!(s[(0, 1)], s[(1, 0)], "the root must be symmetric");
    }

    #[test]
    fn matrix_sqrt_rejects_asymmetric_and_indefinite_inputs() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.2, 1.0]);
        assert!(matches!(
            symmetric_matrix_sqrt(&asym),
            Err(Error::NotSymmetric { .. })
        ));

        let indef = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(symmetric_matrix_sqrt(&indef), Err(Error::Indefinite(_))));
    }

    #[test]
    fn matrix_sqrt_clamps_rounding_noise() {
        // Eigenvalues 1 and -5e-13: the tiny negative must clamp to zero.
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[0.5 - 2.5e-13, 0.5 + 2.5e-13, 0.5 + 2.5e-13, 0.5 - 2.5e-13],
        );
        let s = symmetric_matrix_sqrt(&m).unwrap();
        let back = &s * &s;
        assert!((&back - &m).abs().max() < 1e-10);
    }

    #[test]
    fn adaptive_simpson_integrates_a_gaussian() {
        let f = |x: f64| (-x * x).exp();
        let got = adaptive_simpson(&f, -12.0, 12.0, 1e-12);
        assert!(
            (got - SQRT_PI).abs() < 1e-10,
            "gaussian mass: got {got}, want {SQRT_PI}"
        );
    }
}
