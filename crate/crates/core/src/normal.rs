//! Standard normal helpers shared by every module.

use statrs::distribution::{ContinuousCDF, Normal};

/// `1/sqrt(2*pi)`, the peak of the standard normal density.
pub const PHI_MAX: f64 = 0.398_942_280_401_432_7;

/// `log(sqrt(2*pi))`.
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

#[inline]
pub fn phi(x: f64) -> f64 {
    PHI_MAX * (-0.5 * x * x).exp()
}

#[inline]
pub fn ln_phi(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Upper-`alpha` quantile `z` with `P(N(0,1) > z) = alpha`.
pub fn upper_quantile(alpha: f64) -> f64 {
    let std = Normal::standard();
    -std.inverse_cdf(alpha)
}

/// Natural log floored at one, i.e. `log(x ∨ e)`.
#[inline]
pub fn log_floor_e(x: f64) -> f64 {
    x.max(std::f64::consts::E).ln()
}

/// `log(sum(exp(a)))` without overflow. Empty or all `-inf` input gives `-inf`.
pub fn log_sum_exp(a: &[f64]) -> f64 {
    let max = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + a.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Composite Simpson rule on `[a, b]` with an even number of panels chosen so
/// that the step does not exceed `max_step`.
pub fn simpson<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, max_step: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut panels = ((b - a) / max_step).ceil() as usize;
    panels = panels.max(2);
    if panels % 2 == 1 {
        panels += 1;
    }
    simpson_panels(&mut f, a, b, panels)
}

/// Composite Simpson rule with exactly `panels` (even) subintervals.
pub fn simpson_panels<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64, panels: usize) -> f64 {
    debug_assert!(panels >= 2 && panels.is_multiple_of(2));
    let h = (b - a) / panels as f64;
    let mut acc = f(a) + f(b);
    for k in 1..panels {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}
