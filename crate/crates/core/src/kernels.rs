//! Kernel functions. Every kernel has compact support on `[-1, 1]` so
//! estimators can skip incidents farther than one bandwidth without
//! changing any result.

use std::f64::consts::FRAC_2_PI;

use crate::domain::Bandwidths;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum KernelId {
    #[default]
    Epanechnikov,
}

impl KernelId {
    /// Univariate kernel weight at the standardized offset `u`.
    pub fn eval(self, u: f64) -> f64 {
        match self {
            KernelId::Epanechnikov => epanechnikov(u),
        }
    }

    /// Radially symmetric bivariate kernel at squared radius `r2 = u² + v²`.
    pub fn eval_radial(self, r2: f64) -> f64 {
        match self {
            KernelId::Epanechnikov => {
                if r2 <= 1.0 {
                    FRAC_2_PI * (1.0 - r2)
                } else {
                    0.0
                }
            }
        }
    }

    /// Standardized support radius: `eval(u) == 0` whenever `|u| >= support()`.
    pub fn support(self) -> f64 {
        1.0
    }
}

/// `0.75 (1 - u²)` on `|u| <= 1`, zero elsewhere.
pub fn epanechnikov(u: f64) -> f64 {
    if u.abs() <= 1.0 {
        0.75 * (1.0 - u * u)
    } else {
        0.0
    }
}

/// Combines three univariate factors into the normalized product weight.
///
/// Shared by the point evaluator and the grid scatter so both produce
/// identical floating-point values for the same offsets.
#[inline]
pub fn product_from_factors(kx: f64, ky: f64, kt: f64, bw: &Bandwidths) -> f64 {
    (kx * ky * kt) / (bw.h_x() * bw.h_y() * bw.h_t())
}

/// Product-kernel weight per m²·day for offsets `(dx, dy, dt)`.
pub fn product_kernel_weight(dx: f64, dy: f64, dt: f64, bw: &Bandwidths, kernel: KernelId) -> f64 {
    let kx = kernel.eval(dx / bw.h_x());
    if kx == 0.0 {
        return 0.0;
    }
    let ky = kernel.eval(dy / bw.h_y());
    if ky == 0.0 {
        return 0.0;
    }
    let kt = kernel.eval(dt / bw.h_t());
    if kt == 0.0 {
        return 0.0;
    }
    product_from_factors(kx, ky, kt, bw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit() -> Bandwidths {
        Bandwidths::new(1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn epanechnikov_values() {
        assert_eq!(epanechnikov(0.0), 0.75);
        assert_eq!(epanechnikov(1.0), 0.0);
        assert_eq!(epanechnikov(-1.0), 0.0);
        assert_eq!(epanechnikov(0.5), 0.5625);
        assert_eq!(epanechnikov(1.5), 0.0);
    }

    #[test]
    fn product_weight_values() {
        assert_eq!(product_kernel_weight(0.0, 0.0, 0.0, &unit(), KernelId::Epanechnikov), 0.421875);
        assert_eq!(
            product_kernel_weight(0.5, 0.0, 0.0, &unit(), KernelId::Epanechnikov),
            0.31640625
        );
        let bw = Bandwidths::new(360.0, 702.0, 22.0).unwrap();
        assert_eq!(product_kernel_weight(360.0, 0.0, 0.0, &bw, KernelId::Epanechnikov), 0.0);
        assert_eq!(product_kernel_weight(0.0, -702.0, 0.0, &bw, KernelId::Epanechnikov), 0.0);
        assert_eq!(product_kernel_weight(0.0, 0.0, 22.0, &bw, KernelId::Epanechnikov), 0.0);
    }

    #[test]
    fn radial_peak() {
        assert_eq!(KernelId::Epanechnikov.eval_radial(0.0), 2.0 / std::f64::consts::PI);
        assert_eq!(KernelId::Epanechnikov.eval_radial(1.0), 0.0);
        assert_eq!(KernelId::Epanechnikov.eval_radial(1.01), 0.0);
    }

    proptest! {
        #[test]
        fn product_weight_is_symmetric(
            dx in -3.0f64..3.0, dy in -3.0f64..3.0, dt in -3.0f64..3.0,
            hx in 0.1f64..4.0, hy in 0.1f64..4.0, ht in 0.1f64..4.0,
        ) {
            let bw = Bandwidths::new(hx, hy, ht).unwrap();
            let k = KernelId::Epanechnikov;
            let w = product_kernel_weight(dx, dy, dt, &bw, k);
            prop_assert!(w >= 0.0);
            prop_assert_eq!(w, product_kernel_weight(-dx, -dy, -dt, &bw, k));
        }

        #[test]
        fn product_weight_scales_as_inverse_cube(
            dx in -3.0f64..3.0, dy in -3.0f64..3.0, dt in -3.0f64..3.0,
            hx in 0.5f64..4.0, hy in 0.5f64..4.0, ht in 0.5f64..4.0,
            a in 0.1f64..10.0,
        ) {
            let k = KernelId::Epanechnikov;
            let bw = Bandwidths::new(hx, hy, ht).unwrap();
            let scaled = Bandwidths::new(a * hx, a * hy, a * ht).unwrap();
            let w = product_kernel_weight(dx, dy, dt, &bw, k);
            let ws = product_kernel_weight(a * dx, a * dy, a * dt, &scaled, k);
            // Points within rounding distance of the support edge are excluded.
            let near_edge = [dx / hx, dy / hy, dt / ht].iter().any(|u| (u.abs() - 1.0).abs() < 1e-9);
            prop_assume!(!near_edge);
            prop_assert!((ws - w / (a * a * a)).abs() <= 1e-12 * (w / (a * a * a)).max(1e-300));
        }
    }
}
