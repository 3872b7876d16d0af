//! Lower bound on the probability that a limiting trajectory is spatially
//! non-trivial.
//!
//! The bound is the nonnegative root of `A·√λ + B·λ − R = 0`, solved as a
//! quadratic in `s = √λ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::HMoments;

/// Value of the bound for `h = 0.1 cos x` as published alongside the
/// normalized inequality. The closed-form root is slightly smaller.
pub const PUBLISHED_COSINE_BOUND: f64 = 0.2298;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInput {
    pub h_stats: HMoments,
    /// Poincaré constant.
    pub c_p: f64,
    /// Domain length `|D|`.
    pub domain_len: f64,
}

/// Coefficients of `A·s + B·s² − R = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCoefficients {
    pub a: f64,
    pub b: f64,
    pub r: f64,
}

impl BoundInput {
    pub fn new(h_stats: HMoments, c_p: f64, domain_len: f64) -> Result<Self> {
        let mut bad = Vec::new();
        if !(c_p > 0.0 && c_p.is_finite()) {
            bad.push(format!("c_p must be positive, got {c_p}"));
        }
        if !(domain_len > 0.0 && domain_len.is_finite()) {
            bad.push(format!("domain_len must be positive, got {domain_len}"));
        }
        if !(h_stats.grad_l2_sq >= 0.0) {
            bad.push(format!("grad_l2_sq must be nonnegative, got {}", h_stats.grad_l2_sq));
        }
        if bad.is_empty() {
            Ok(Self { h_stats, c_p, domain_len })
        } else {
            Err(Error::InvalidInput(bad.join("; ")))
        }
    }

    /// Exact moments of `alpha·cos x` on `[0, 2πk]` with `C_p = 1`.
    pub fn cosine_normalized(alpha: f64, k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidInput("cosine bound needs k >= 1".into()));
        }
        let len = 2.0 * std::f64::consts::PI * k as f64;
        let a2 = alpha * alpha;
        let h_stats = HMoments {
            mean: 0.0,
            mean_sq: 0.5 * a2,
            mean_abs: 2.0 * alpha.abs() / std::f64::consts::PI,
            sup: alpha.abs(),
            grad_l2_sq: 0.5 * a2 * len,
        };
        Self::new(h_stats, 1.0, len)
    }

    pub fn coefficients(&self) -> BoundCoefficients {
        let m = &self.h_stats;
        let mut var = m.mean_sq - m.mean * m.mean;
        if var < 0.0 {
            log::warn!("negative variance {var:e} of the noise intensity clamped to zero");
            var = 0.0;
        }
        BoundCoefficients {
            a: (2.0 + m.sup * m.sup * self.c_p) * std::f64::consts::SQRT_2 * self.c_p * m.grad_l2_sq / self.domain_len,
            b: m.mean_abs * m.mean_abs + 2.0 * var,
            r: 2.0 * var,
        }
    }
}

/// Nonnegative root `λ = s²` of `A·s + B·s² − R = 0`, clamped to `[0, 1]`.
pub fn solve(c: &BoundCoefficients) -> f64 {
    if c.r <= 0.0 {
        return 0.0;
    }
    let s = if c.b > 0.0 {
        // 2R / (A + √(A² + 4BR)) avoids cancellation for large A
        2.0 * c.r / (c.a + (c.a * c.a + 4.0 * c.b * c.r).sqrt())
    } else if c.a > 0.0 {
        c.r / c.a
    } else {
        f64::INFINITY
    };
    let lambda = s * s;
    if lambda > 1.0 {
        log::warn!("bound root {lambda} exceeds 1 and is clamped");
        1.0
    } else {
        lambda
    }
}

/// Independent root of the same equation by bisection on `s ∈ [0, 1]`,
/// used to cross-check [`solve`]. Returns 1 when there is no root in range.
pub fn solve_bisection(c: &BoundCoefficients) -> f64 {
    if c.r <= 0.0 {
        return 0.0;
    }
    let f = |s: f64| c.a * s + c.b * s * s - c.r;
    if f(1.0) < 0.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let s = 0.5 * (lo + hi);
    s * s
}

/// Coefficients of the normalized cosine form.
pub fn cosine_coefficients(alpha: f64) -> BoundCoefficients {
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    BoundCoefficients { a: std::f64::consts::SQRT_2 * (2.0 + alpha * alpha) / 2.0, b: 1.0 + 4.0 / pi2, r: 1.0 }
}

pub fn lower_bound_general(input: &BoundInput) -> f64 {
    solve(&input.coefficients())
}

/// Root of `(1 + 4/π²)·λ + (√2(2+α²)/2)·√λ − 1 = 0`; independent of `k`.
pub fn lower_bound_cosine(alpha: f64, k: u32) -> Result<f64> {
    if alpha == 0.0 || !alpha.is_finite() {
        return Err(Error::InvalidInput(format!("cosine bound needs a finite nonzero amplitude, got {alpha}")));
    }
    if k == 0 {
        return Err(Error::InvalidInput("cosine bound needs k >= 1".into()));
    }
    Ok(solve(&cosine_coefficients(alpha)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub lambda_star: f64,
    pub empirical_fraction: f64,
    pub trajectories: usize,
    pub floor: f64,
    pub consistent: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub published_value: Option<f64>,
    pub note: String,
}

/// Compares `λ*` with the fraction of trajectories whose minimum gradient
/// energy stays above `floor`. Diagnostic only: the bound concerns the
/// vanishing-damping limit.
pub fn cross_validate_bound(min_gradients: &[f64], lambda_star: f64, floor: f64) -> BoundReport {
    let above = min_gradients.iter().filter(|m| **m > floor).count();
    let fraction = if min_gradients.is_empty() { 0.0 } else { above as f64 / min_gradients.len() as f64 };
    let consistent = fraction >= lambda_star;
    let note = if consistent {
        format!(
            "{above}/{} trajectories non-trivial; fraction {fraction:.4} >= bound {lambda_star:.4}",
            min_gradients.len()
        )
    } else {
        format!("inconsistent: fraction {fraction:.4} of non-trivial trajectories is below the bound {lambda_star:.4}")
    };
    BoundReport {
        lambda_star,
        empirical_fraction: fraction,
        trajectories: min_gradients.len(),
        floor,
        consistent,
        published_value: None,
        note,
    }
}

/// Gap between the computed cosine bound and the published figure.
pub fn published_gap(alpha: f64) -> Option<f64> {
    (alpha == 0.1).then(|| lower_bound_cosine(alpha, 1).map(|l| PUBLISHED_COSINE_BOUND - l).ok()).flatten()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::NoiseIntensity;
    use crate::grid::Grid1D;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn bisect(c: &BoundCoefficients) -> f64 {
        solve_bisection(c)
    }

    #[test]
    fn cosine_bound_value() {
        let l = lower_bound_cosine(0.1, 1).unwrap();
        assert!((l - 0.2283).abs() < 5e-4, "{l}");
        let c = BoundCoefficients { a: 1.421285, b: 1.405285, r: 1.0 };
        assert!((bisect(&c) - l).abs() < 1e-6);
        let exact = BoundCoefficients { a: 2.01 * std::f64::consts::SQRT_2 / 2.0, b: 1.0 + 4.0 / (PI * PI), r: 1.0 };
        assert!((bisect(&exact) - l).abs() < 1e-10);
        // the published figure is above the computed root
        let gap = published_gap(0.1).unwrap();
        assert!(gap > 1e-3 && gap < 2e-3, "{gap}");
        assert!(published_gap(0.2).is_none());
    }

    #[test]
    fn cosine_bound_independent_of_k_and_vanishes_for_large_alpha() {
        let l1 = lower_bound_cosine(0.3, 1).unwrap();
        for k in 2..5 {
            assert_eq!(lower_bound_cosine(0.3, k).unwrap(), l1);
        }
        assert!(lower_bound_cosine(100.0, 1).unwrap() < 1e-7);
        assert!(lower_bound_cosine(0.0, 1).is_err());
    }

    #[test]
    fn general_reproduces_cosine_form() {
        for alpha in [0.01, 0.1, 0.5, 1.0, 3.0] {
            for k in 1..4 {
                let g = lower_bound_general(&BoundInput::cosine_normalized(alpha, k).unwrap());
                let c = lower_bound_cosine(alpha, k).unwrap();
                assert!((g - c).abs() < 1e-12, "alpha {alpha} k {k}: {g} vs {c}");
            }
        }
    }

    #[test]
    fn constant_noise_gives_zero() {
        let grid = Grid1D::new(2.0 * PI, 65).unwrap();
        let h = NoiseIntensity::constant(grid, 0.7);
        let input = BoundInput::new(h.moments(), 1.0, grid.length()).unwrap();
        assert_eq!(lower_bound_general(&input), 0.0);
    }

    #[test]
    fn measured_cosine_moments() {
        // the amplitude cancels from A/R and B/R, so the quadrature moments
        // of 0.1 cos x give the cosine form up to the error in ⟨|h|⟩
        let grid = Grid1D::new(2.0 * PI, 1025).unwrap();
        let h = NoiseIntensity::cosine(grid, 0.1, 1).unwrap();
        let input = BoundInput::new(h.moments(), 1.0, grid.length()).unwrap();
        let c = input.coefficients();
        let l = lower_bound_general(&input);
        assert!((l - bisect(&c)).abs() < 1e-10);
        assert!((l - lower_bound_cosine(0.1, 1).unwrap()).abs() < 1e-5, "{l}");
    }

    #[test]
    fn doubling_h_changes_only_the_sup_term() {
        let base = BoundInput::cosine_normalized(0.1, 1).unwrap();
        let doubled = BoundInput::cosine_normalized(0.2, 1).unwrap();
        let (c0, c1) = (base.coefficients(), doubled.coefficients());
        assert!((c1.r / c0.r - 4.0).abs() < 1e-14);
        assert!((c1.b / c0.b - 4.0).abs() < 1e-14);
        assert!((c1.a / c0.a - 4.0 * 2.04 / 2.01).abs() < 1e-13);
        assert!(lower_bound_general(&doubled) < lower_bound_general(&base));
    }

    #[test]
    fn homogeneity_at_fixed_sup() {
        // scaling mean_sq, mean_abs² and grad by 4 with ‖h‖_∞ fixed
        let base = BoundInput::cosine_normalized(0.1, 1).unwrap();
        let mut scaled = base;
        scaled.h_stats.mean_sq *= 4.0;
        scaled.h_stats.mean_abs *= 2.0;
        scaled.h_stats.grad_l2_sq *= 4.0;
        let (c0, c1) = (base.coefficients(), scaled.coefficients());
        assert!((c1.r / c0.r - 4.0).abs() < 1e-14);
        assert!((c1.a / c0.a - 4.0).abs() < 1e-14);
        assert!((c1.b / c0.b - 4.0).abs() < 1e-14);
        assert!((lower_bound_general(&scaled) - lower_bound_general(&base)).abs() < 1e-14);
    }

    #[test]
    fn invalid_inputs() {
        let m = BoundInput::cosine_normalized(0.1, 1).unwrap().h_stats;
        assert!(BoundInput::new(m, 0.0, 1.0).is_err());
        assert!(BoundInput::new(m, 1.0, -1.0).is_err());
        let mut neg = m;
        neg.mean = 1.0;
        neg.mean_sq = 1.0 - 1e-14;
        let input = BoundInput::new(neg, 1.0, 1.0).unwrap();
        assert_eq!(input.coefficients().r, 0.0);
        assert_eq!(lower_bound_general(&input), 0.0);
    }

    #[test]
    fn root_is_clamped_to_one() {
        assert_eq!(solve(&BoundCoefficients { a: 0.0, b: 0.1, r: 1.0 }), 1.0);
        assert_eq!(solve(&BoundCoefficients { a: 0.0, b: 0.0, r: 1.0 }), 1.0);
    }

    #[test]
    fn cross_validation_report() {
        let r = cross_validate_bound(&[0.0; 8], 0.0, 1e-8);
        assert_eq!(r.empirical_fraction, 0.0);
        assert!(r.consistent);
        let r = cross_validate_bound(&[0.0; 8], 0.2, 1e-8);
        assert!(!r.consistent);
        assert!(r.note.starts_with("inconsistent"));
        let r = cross_validate_bound(&[1.0, 1.0, 0.0, 1.0], 0.2283, 1e-8);
        assert_eq!(r.empirical_fraction, 0.75);
        assert!(r.consistent);
    }

    proptest! {
        #[test]
        fn closed_form_matches_bisection(a in 0.0f64..10.0, b in 0.1f64..5.0, r in 0.01f64..1.0) {
            let c = BoundCoefficients { a, b, r };
            let l = solve(&c);
            prop_assume!(a + b >= r); // root inside [0, 1]
            prop_assert!((l - bisect(&c)).abs() < 1e-10);
        }

        #[test]
        fn monotone_in_a(a in 0.0f64..10.0, da in 0.0f64..5.0, b in 0.1f64..5.0, r in 0.01f64..1.0) {
            let l0 = solve(&BoundCoefficients { a, b, r });
            let l1 = solve(&BoundCoefficients { a: a + da, b, r });
            prop_assert!(l1 <= l0 + 1e-15);
            prop_assert!((0.0..=1.0).contains(&l0));
        }
    }
}
