//! Normal location mixtures with a finitely supported mixing distribution.
//!
//! For `G = sum_j w_j delta_{u_j}` the mixture density is
//! `f_G(x) = sum_j w_j phi(x - u_j)` and the Bayes rule under squared loss is
//! the posterior mean `t_G(x) = x + f'_G(x) / f_G(x)`. All ratios are evaluated
//! through log-weights with the largest exponent factored out, so the rules stay
//! finite when `|x - u_j|` is far beyond the range where `phi` underflows.

use serde::{Deserialize, Serialize};

use crate::normal::{self, LN_SQRT_2PI, PHI_MAX};
use crate::par::{self, Execution};
use crate::{Error, Result};

/// Tolerance on the total mass of a mixture.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Padding, in noise standard deviations, of the quadrature window used by
/// [`DiscreteMixture::bayes_risk`] and [`hellinger`].
pub const QUADRATURE_PAD: f64 = 8.0;

/// Maximal Simpson step used by [`DiscreteMixture::bayes_risk`] and [`hellinger`].
pub const QUADRATURE_STEP: f64 = 0.01;

/// A distribution on finitely many points of the real line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMixture {
    support: Vec<f64>,
    weights: Vec<f64>,
}

/// `(f, f', f'')` of a mixture density at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivatives {
    pub density: f64,
    pub first: f64,
    pub second: f64,
}

/// Scale-free summaries of the posterior of the mean given `Y = x`.
///
/// `score = f'/f = E[xi - x | x]` and `second_moment = f''/f + 1 = E[(xi - x)^2 | x]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorMoments {
    pub log_density: f64,
    pub score: f64,
    pub second_moment: f64,
}

impl DiscreteMixture {
    /// Builds a mixture after checking that the support is finite and strictly
    /// increasing and that the weights are nonnegative with unit sum.
    pub fn new(support: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidMixture("empty support".into()));
        }
        if support.len() != weights.len() {
            return Err(Error::InvalidMixture(format!(
                "{} support points but {} weights",
                support.len(),
                weights.len()
            )));
        }
        if let Some(i) = support.iter().position(|u| !u.is_finite()) {
            return Err(Error::InvalidMixture(format!(
                "support point {i} is not finite"
            )));
        }
        if let Some(i) = support.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::InvalidMixture(format!(
                "support not strictly increasing at index {}",
                i + 1
            )));
        }
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidMixture(format!(
                "weight {i} is negative or not finite"
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidMixture(format!(
                "weights sum to {total}, not 1"
            )));
        }
        Ok(Self { support, weights })
    }

    /// Like [`DiscreteMixture::new`] but rescales the weights to unit mass first.
    pub fn normalized(support: Vec<f64>, mut weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidMixture(format!(
                "total mass {total} cannot be normalized"
            )));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Self::new(support, weights)
    }

    pub fn point_mass(at: f64) -> Self {
        Self {
            support: vec![at],
            weights: vec![1.0],
        }
    }

    /// Empirical distribution of `values`: one atom per distinct value, weighted
    /// by its multiplicity.
    pub fn empirical(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidMixture(
                "empirical distribution of no values".into(),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let mut support = Vec::new();
        let mut counts: Vec<usize> = Vec::new();
        for v in sorted {
            match support.last() {
                Some(&last) if last == v => *counts.last_mut().unwrap() += 1,
                _ => {
                    support.push(v);
                    counts.push(1);
                }
            }
        }
        let weights = counts.into_iter().map(|c| c as f64 / n).collect();
        Self::normalized(support, weights)
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn min_support(&self) -> f64 {
        self.support[0]
    }

    pub fn max_support(&self) -> f64 {
        self.support[self.support.len() - 1]
    }

    /// The distribution of `xi + shift` for `xi ~ self`.
    pub fn shifted(&self, shift: f64) -> Self {
        Self {
            support: self.support.iter().map(|u| u + shift).collect(),
            weights: self.weights.clone(),
        }
    }

    /// Atoms with strictly positive weight.
    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.support
            .iter()
            .copied()
            .zip(self.weights.iter().copied())
            .filter(|(_, w)| *w > 0.0)
    }

    /// `log w_j - (x - u_j)^2 / 2` over positive-weight atoms, with its maximum.
    fn log_terms(&self, x: f64, buf: &mut Vec<f64>) -> f64 {
        buf.clear();
        let mut max = f64::NEG_INFINITY;
        for (u, w) in self.atoms() {
            let d = x - u;
            let a = w.ln() - 0.5 * d * d;
            max = max.max(a);
            buf.push(a);
        }
        max
    }

    /// `f_G(x)`.
    pub fn density(&self, x: f64) -> f64 {
        self.atoms().map(|(u, w)| w * normal::phi(x - u)).sum()
    }

    /// `log f_G(x)`, accurate far into the tails.
    pub fn log_density(&self, x: f64) -> f64 {
        let mut buf = Vec::with_capacity(self.len());
        self.log_terms(x, &mut buf);
        normal::log_sum_exp(&buf) - LN_SQRT_2PI
    }

    /// `(f_G, f'_G, f''_G)` at `x` by direct summation.
    pub fn density_derivs(&self, x: f64) -> Derivatives {
        let mut out = Derivatives {
            density: 0.0,
            first: 0.0,
            second: 0.0,
        };
        for (u, w) in self.atoms() {
            let d = x - u;
            let k = w * normal::phi(d);
            out.density += k;
            out.first -= d * k;
            out.second += (d * d - 1.0) * k;
        }
        out
    }

    /// Posterior moments of `xi - x` given `Y = x`, computed with normalized
    /// posterior weights so they never underflow.
    pub fn posterior_moments(&self, x: f64) -> PosteriorMoments {
        let mut buf = Vec::with_capacity(self.len());
        let max = self.log_terms(x, &mut buf);
        let mut total = 0.0;
        let mut first = 0.0;
        let mut second = 0.0;
        for ((u, _), a) in self.atoms().zip(&buf) {
            let p = (a - max).exp();
            let d = u - x;
            total += p;
            first += p * d;
            second += p * d * d;
        }
        PosteriorMoments {
            log_density: max + total.ln() - LN_SQRT_2PI,
            score: first / total,
            second_moment: second / total,
        }
    }

    /// Bayes rule `E[xi | Y = x]` under `xi ~ G`, `Y | xi ~ N(xi, 1)`.
    pub fn posterior_mean(&self, x: f64) -> f64 {
        let mut buf = Vec::with_capacity(self.len());
        self.posterior_mean_with(x, &mut buf)
    }

    fn posterior_mean_with(&self, x: f64, buf: &mut Vec<f64>) -> f64 {
        let max = self.log_terms(x, buf);
        let mut num = 0.0;
        let mut den = 0.0;
        for ((u, _), a) in self.atoms().zip(buf.iter()) {
            let p = (a - max).exp();
            num += p * u;
            den += p;
        }
        // Rounding can push the ratio a hair outside the support hull.
        (num / den).clamp(self.min_support(), self.max_support())
    }

    /// Componentwise posterior mean of every entry of `xs`.
    pub fn posterior_means(&self, xs: &[f64], exec: Execution) -> Vec<f64> {
        par::map_slice(exec, xs, |&x| self.posterior_mean(x))
    }

    /// `x + f'_G(x) / (f_G(x) ∨ rho)`.
    pub fn regularized_posterior_mean(&self, x: f64, rho: RegularizationLevel) -> f64 {
        let rho = rho.value();
        if rho.is_infinite() {
            return x;
        }
        let m = self.posterior_moments(x);
        if rho <= 0.0 || m.log_density >= rho.ln() {
            return self.posterior_mean(x);
        }
        // f'/rho = (f'/f) * (f/rho)
        x + m.score * (m.log_density - rho.ln()).exp()
    }

    /// Minimum Bayes risk `R*(G) = 1 - ∫ (f'_G)^2 / f_G`.
    pub fn bayes_risk(&self) -> f64 {
        let lo = self.min_support() - QUADRATURE_PAD;
        let hi = self.max_support() + QUADRATURE_PAD;
        let fisher = normal::simpson(
            |x| {
                let m = self.posterior_moments(x);
                (m.log_density.exp() * m.score * m.score).max(0.0)
            },
            lo,
            hi,
            QUADRATURE_STEP,
        );
        (1.0 - fisher).clamp(0.0, 1.0)
    }
}

/// Hellinger distance `(∫ (sqrt f_G - sqrt f_H)^2)^{1/2}` between two mixture
/// densities, by Simpson quadrature over the padded union of the supports.
pub fn hellinger(g: &DiscreteMixture, h: &DiscreteMixture) -> f64 {
    let lo = g.min_support().min(h.min_support()) - QUADRATURE_PAD;
    let hi = g.max_support().max(h.max_support()) + QUADRATURE_PAD;
    let sq = normal::simpson(
        |x| {
            let a = (0.5 * g.log_density(x)).exp();
            let b = (0.5 * h.log_density(x)).exp();
            (a - b) * (a - b)
        },
        lo,
        hi,
        QUADRATURE_STEP,
    );
    sq.max(0.0).sqrt().min(std::f64::consts::SQRT_2)
}

/// Inverse of the standard normal density on `[0, inf)`:
/// `sqrt(-log(2 pi y^2))` for `0 < y <= phi(0)`.
pub fn inv_phi(y: f64) -> Result<f64> {
    if !(y > 0.0 && y <= PHI_MAX * (1.0 + 1e-12)) {
        return Err(Error::InvalidParameter(format!(
            "inv_phi argument {y} outside (0, 1/sqrt(2 pi)]"
        )));
    }
    Ok(inv_phi_sq_ln(y.ln()).sqrt())
}

/// `-log(2 pi y^2)` from `log y`, clamped at zero.
pub(crate) fn inv_phi_sq_ln(ln_y: f64) -> f64 {
    (-2.0 * (ln_y + LN_SQRT_2PI)).max(0.0)
}

/// Density floor `rho` of the regularized Bayes rule.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct RegularizationLevel(f64);

impl RegularizationLevel {
    pub fn new(rho: f64) -> Result<Self> {
        if rho.is_nan() || rho < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "regularization level {rho} < 0"
            )));
        }
        Ok(Self(rho))
    }

    pub const fn zero() -> Self {
        Self(0.0)
    }

    pub const fn infinite() -> Self {
        Self(f64::INFINITY)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two_atoms(a: f64) -> DiscreteMixture {
        DiscreteMixture::new(vec![-a, a], vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn rejects_bad_mixtures() {
        assert!(DiscreteMixture::new(vec![], vec![]).is_err());
        assert!(DiscreteMixture::new(vec![1.0, 1.0], vec![0.5, 0.5]).is_err());
        assert!(DiscreteMixture::new(vec![0.0, 1.0], vec![0.5, 0.6]).is_err());
        assert!(DiscreteMixture::new(vec![0.0, 1.0], vec![-0.5, 1.5]).is_err());
        assert!(DiscreteMixture::new(vec![0.0], vec![1.0 + 1e-13]).is_ok());
    }

    #[test]
    fn empirical_merges_ties() {
        let g = DiscreteMixture::empirical(&[3.0, 0.0, 3.0, 0.0, 0.0]).unwrap();
        assert_eq!(g.support(), &[0.0, 3.0]);
        assert_abs_diff_eq!(g.weights()[0], 0.6, epsilon = 1e-15);
    }

    #[test]
    fn density_examples() {
        let d0 = DiscreteMixture::point_mass(0.0);
        assert_abs_diff_eq!(d0.density(0.0), 0.398_942_3, epsilon = 1e-7);
        assert_abs_diff_eq!(d0.density(1.0), 0.241_970_7, epsilon = 1e-7);
        assert_abs_diff_eq!(two_atoms(2.0).density(0.0), 0.053_991_0, epsilon = 1e-7);
        assert_abs_diff_eq!(
            two_atoms(2.0).log_density(0.5),
            two_atoms(2.0).density(0.5).ln(),
            epsilon = 1e-13
        );
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(
            DiscreteMixture::point_mass(0.0).density_derivs(0.0).first,
            0.0
        );
        assert_abs_diff_eq!(
            two_atoms(2.0).density_derivs(0.0).first,
            0.0,
            epsilon = 1e-15
        );
        let mu = 1.7;
        let g = DiscreteMixture::point_mass(mu);
        for x in [-2.0, 0.0, 0.3, 4.0] {
            let d = g.density_derivs(x);
            assert_abs_diff_eq!(d.first / d.density, mu - x, epsilon = 1e-12);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let g = DiscreteMixture::new(vec![-1.0, 0.5, 2.0], vec![0.2, 0.5, 0.3]).unwrap();
        let h = 1e-4;
        for x in [-2.0, 0.0, 1.1, 3.0] {
            let d = g.density_derivs(x);
            let fd1 = (g.density(x + h) - g.density(x - h)) / (2.0 * h);
            let fd2 = (g.density(x + h) - 2.0 * g.density(x) + g.density(x - h)) / (h * h);
            assert_abs_diff_eq!(d.first, fd1, epsilon = 1e-8);
            assert_abs_diff_eq!(d.second, fd2, epsilon = 1e-6);
        }
    }

    #[test]
    fn posterior_mean_examples() {
        assert_eq!(DiscreteMixture::point_mass(0.0).posterior_mean(3.3), 0.0);
        assert_eq!(DiscreteMixture::point_mass(2.5).posterior_mean(-7.0), 2.5);
        let g = two_atoms(2.0);
        assert_abs_diff_eq!(g.posterior_mean(1.0), 1.928_055_2, epsilon = 1e-7);
        // direct ratio of sums
        let direct = (2.0 * normal::phi(-1.0) - 2.0 * normal::phi(3.0))
            / (normal::phi(-1.0) + normal::phi(3.0));
        assert_abs_diff_eq!(g.posterior_mean(1.0), direct, epsilon = 1e-14);
    }

    #[test]
    fn posterior_mean_survives_far_tails() {
        let g = DiscreteMixture::new(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        assert_eq!(g.density(45.0), 0.0);
        assert_abs_diff_eq!(g.posterior_mean(45.0), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.posterior_mean(-45.0), 0.0, epsilon = 1e-12);
        assert!(g.log_density(45.0).is_finite());
    }

    #[test]
    fn regularized_examples() {
        let g = two_atoms(1.5);
        for x in [-3.0, -0.2, 0.0, 2.2] {
            assert_eq!(
                g.regularized_posterior_mean(x, RegularizationLevel::zero()),
                g.posterior_mean(x)
            );
            assert_eq!(
                g.regularized_posterior_mean(x, RegularizationLevel::infinite()),
                x
            );
        }
        let d0 = DiscreteMixture::point_mass(0.0);
        let rho = RegularizationLevel::new(0.1).unwrap();
        let expected = 3.0 + (-3.0 * normal::phi(3.0)) / 0.1;
        assert_abs_diff_eq!(
            d0.regularized_posterior_mean(3.0, rho),
            expected,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            d0.regularized_posterior_mean(3.0, rho),
            2.867_045,
            epsilon = 1e-6
        );
        assert!(RegularizationLevel::new(-1.0).is_err());
    }

    #[test]
    fn inv_phi_examples() {
        assert_eq!(inv_phi(PHI_MAX).unwrap(), 0.0);
        assert_abs_diff_eq!(inv_phi(normal::phi(1.0)).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(inv_phi(normal::phi(2.5)).unwrap(), 2.5, epsilon = 1e-12);
        assert_eq!(inv_phi(PHI_MAX * (1.0 + 1e-14)).unwrap(), 0.0);
        assert!(inv_phi(0.0).is_err());
        assert!(inv_phi(0.5).is_err());
    }

    #[test]
    fn bayes_risk_of_point_mass_is_zero() {
        for c in [-4.0, 0.0, 11.0] {
            assert_abs_diff_eq!(
                DiscreteMixture::point_mass(c).bayes_risk(),
                0.0,
                epsilon = 1e-9
            );
        }
        let r = two_atoms(3.0).bayes_risk();
        assert!((0.0..=1.0).contains(&r));
    }

    #[test]
    fn hellinger_examples() {
        let g = two_atoms(1.0);
        assert_abs_diff_eq!(hellinger(&g, &g), 0.0, epsilon = 1e-12);
        let d = hellinger(
            &DiscreteMixture::point_mass(0.0),
            &DiscreteMixture::point_mass(2.0),
        );
        let closed = (2.0 * (1.0 - (-0.5f64).exp())).sqrt();
        assert_abs_diff_eq!(d, closed, epsilon = 1e-6);
        assert_abs_diff_eq!(d, 0.887_096, epsilon = 1e-6);
        let far = hellinger(
            &DiscreteMixture::point_mass(0.0),
            &DiscreteMixture::point_mass(60.0),
        );
        assert!(far <= std::f64::consts::SQRT_2 + 1e-9);
    }

    #[test]
    fn shift_moves_support() {
        let g = two_atoms(1.0).shifted(2.0);
        assert_eq!(g.support(), &[1.0, 3.0]);
    }
}
