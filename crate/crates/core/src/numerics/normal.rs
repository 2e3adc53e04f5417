use std::f64::consts::FRAC_1_SQRT_2;

/// Standard normal CDF via `erfc`, accurate in the lower tail.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// Standard normal survival function `1 - Phi(z)`, accurate in the upper tail.
pub fn std_normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z * FRAC_1_SQRT_2)
}
