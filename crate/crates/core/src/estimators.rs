//! Estimators of the mean vector from one observation vector `X`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::mixtures::DiscreteMixture;
use crate::normal;
use crate::npmle::{self, GridMode, KernelMatrix, StopRule};
use crate::par::Execution;
use crate::{Error, Result};

/// Default bandwidth constant of the zero-proportion estimator.
pub const DEFAULT_KAPPA: f64 = 0.5;

/// Simpson panels for the zero-proportion kernel `psi(z; h)`.
pub const ZERO_PROPORTION_PANELS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopMode {
    #[default]
    Fixed,
    Certified,
}

/// Grid and stopping choices shared by the two GMLEB variants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    #[serde(default)]
    pub grid: GridMode,
    #[serde(default)]
    pub stop: StopMode,
    /// EM steps in fixed mode.
    #[serde(default = "default_iterations")]
    pub iterations: usize,
}

fn default_iterations() -> usize {
    npmle::DEFAULT_EM_ITERATIONS
}

fn default_kappa() -> f64 {
    DEFAULT_KAPPA
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            grid: GridMode::Paper,
            stop: StopMode::Fixed,
            iterations: npmle::DEFAULT_EM_ITERATIONS,
        }
    }
}

impl FitOptions {
    fn stop_rule(&self, n: usize) -> StopRule {
        match self.stop {
            StopMode::Fixed => StopRule::FixedIterations(self.iterations),
            StopMode::Certified => StopRule::certified(n),
        }
    }
}

/// Point the James–Stein estimator shrinks toward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShrinkageTarget {
    #[default]
    GrandMean,
    Origin,
}

/// Which estimator to run, with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimatorSpec {
    Gmleb {
        #[serde(flatten)]
        fit: FitOptions,
    },
    SGmleb {
        #[serde(default = "default_kappa")]
        kappa: f64,
        #[serde(flatten)]
        fit: FitOptions,
    },
    Oracle,
    JamesStein {
        #[serde(default)]
        target: ShrinkageTarget,
    },
    Sure,
    Fdr {
        q: f64,
    },
    UniversalSoft,
    UniversalHard,
    Identity,
}

impl EstimatorSpec {
    pub fn gmleb() -> Self {
        EstimatorSpec::Gmleb {
            fit: FitOptions::default(),
        }
    }

    pub fn s_gmleb() -> Self {
        EstimatorSpec::SGmleb {
            kappa: DEFAULT_KAPPA,
            fit: FitOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            EstimatorSpec::Fdr { q } if !(q > 0.0 && q <= 0.5) => Err(Error::InvalidParameter(
                format!("FDR level q = {q} not in (0, 1/2]"),
            )),
            EstimatorSpec::SGmleb { kappa, .. } if !(kappa > 0.0 && kappa <= 1.0) => Err(
                Error::InvalidParameter(format!("kappa = {kappa} not in (0, 1]")),
            ),
            _ => Ok(()),
        }
    }

    /// Short machine-friendly name used in CSV output.
    pub fn label(&self) -> String {
        match self {
            EstimatorSpec::Gmleb { .. } => "gmleb".into(),
            EstimatorSpec::SGmleb { .. } => "s_gmleb".into(),
            EstimatorSpec::Oracle => "oracle".into(),
            EstimatorSpec::JamesStein {
                target: ShrinkageTarget::GrandMean,
            } => "james_stein".into(),
            EstimatorSpec::JamesStein {
                target: ShrinkageTarget::Origin,
            } => "james_stein_origin".into(),
            EstimatorSpec::Sure => "sure".into(),
            EstimatorSpec::Fdr { q } => format!("fdr({q})"),
            EstimatorSpec::UniversalSoft => "universal_soft".into(),
            EstimatorSpec::UniversalHard => "universal_hard".into(),
            EstimatorSpec::Identity => "identity".into(),
        }
    }

    pub fn needs_truth(&self) -> bool {
        matches!(self, EstimatorSpec::Oracle)
    }
}

impl fmt::Display for EstimatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorSpec::Gmleb { .. } => f.write_str("GMLEB"),
            EstimatorSpec::SGmleb { .. } => f.write_str("S-GMLEB"),
            EstimatorSpec::Oracle => f.write_str("Oracle"),
            EstimatorSpec::JamesStein {
                target: ShrinkageTarget::GrandMean,
            } => f.write_str("James–Stein"),
            EstimatorSpec::JamesStein {
                target: ShrinkageTarget::Origin,
            } => f.write_str("James–Stein (origin)"),
            EstimatorSpec::Sure => f.write_str("SURE"),
            EstimatorSpec::Fdr { q } => write!(f, "FDR ({q})"),
            EstimatorSpec::UniversalSoft => f.write_str("Universal soft"),
            EstimatorSpec::UniversalHard => f.write_str("Universal hard"),
            EstimatorSpec::Identity => f.write_str("Identity"),
        }
    }
}

/// Side information produced along with the estimates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metadata {
    /// Fitted (or oracle) prior for the empirical Bayes rules.
    pub mixture: Option<DiscreteMixture>,
    pub em_iterations: Option<usize>,
    pub final_loglik: Option<f64>,
    pub threshold: Option<f64>,
    pub shrinkage: Option<f64>,
    pub zero_proportion: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    pub estimates: Vec<f64>,
    pub metadata: Metadata,
}

impl EstimateResult {
    fn plain(estimates: Vec<f64>) -> Self {
        Self {
            estimates,
            metadata: Metadata::default(),
        }
    }
}

fn check_data(x: &[f64], what: &'static str, min: usize) -> Result<()> {
    if x.len() < min {
        return Err(Error::TooFewObservations {
            what,
            min,
            n: x.len(),
        });
    }
    match x.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFinite(i)),
        None => Ok(()),
    }
}

/// Runs the estimator described by `spec`. `truth` is required by the oracle
/// rule and ignored otherwise.
pub fn estimate(spec: &EstimatorSpec, x: &[f64], truth: Option<&[f64]>) -> Result<EstimateResult> {
    estimate_with(spec, x, truth, Execution::default())
}

pub fn estimate_with(
    spec: &EstimatorSpec,
    x: &[f64],
    truth: Option<&[f64]>,
    exec: Execution,
) -> Result<EstimateResult> {
    spec.validate()?;
    match *spec {
        EstimatorSpec::Gmleb { fit } => gmleb_with(x, &fit, exec),
        EstimatorSpec::SGmleb { kappa, fit } => s_gmleb_with(x, kappa, &fit, exec),
        EstimatorSpec::Oracle => {
            let theta = truth.ok_or_else(|| {
                Error::InvalidParameter("the oracle rule needs the true means".into())
            })?;
            oracle_rule_with(theta, x, exec)
        }
        EstimatorSpec::JamesStein { target } => james_stein_toward(x, target),
        EstimatorSpec::Sure => sure_soft(x),
        EstimatorSpec::Fdr { q } => fdr_threshold(x, q),
        EstimatorSpec::UniversalSoft => universal(x, Threshold::Soft),
        EstimatorSpec::UniversalHard => universal(x, Threshold::Hard),
        EstimatorSpec::Identity => {
            check_data(x, "identity", 0)?;
            Ok(EstimateResult::plain(x.to_vec()))
        }
    }
}

/// Fits the NPMLE on the configured grid from `init` (or uniform weights)
/// and applies its posterior mean to every coordinate.
fn plug_in(
    x: &[f64],
    opts: &FitOptions,
    init: impl FnOnce(&npmle::Grid) -> Vec<f64>,
    exec: Execution,
) -> Result<EstimateResult> {
    let grid = npmle::build_grid(opts.grid, x)?;
    if grid.degenerate {
        let mixture = DiscreteMixture::point_mass(grid.points[0]);
        return Ok(EstimateResult {
            estimates: vec![grid.points[0]; x.len()],
            metadata: Metadata {
                mixture: Some(mixture),
                em_iterations: Some(0),
                final_loglik: Some(npmle::log_likelihood(
                    &DiscreteMixture::point_mass(grid.points[0]),
                    x,
                )),
                ..Metadata::default()
            },
        });
    }
    let kernel = KernelMatrix::new(x, &grid.points, exec);
    let w0 = init(&grid);
    let fit = npmle::fit_with_kernel(&kernel, &grid.points, &w0, opts.stop_rule(x.len()))?;
    let estimates = fit.mixture.posterior_means(x, exec);
    Ok(EstimateResult {
        estimates,
        metadata: Metadata {
            em_iterations: Some(fit.iterations),
            final_loglik: Some(fit.final_loglik()),
            mixture: Some(fit.mixture),
            ..Metadata::default()
        },
    })
}

/// GMLEB with the zero-anchored grid, uniform start and 100 EM steps.
pub fn gmleb(x: &[f64]) -> Result<EstimateResult> {
    gmleb_with(x, &FitOptions::default(), Execution::default())
}

pub fn gmleb_with(x: &[f64], opts: &FitOptions, exec: Execution) -> Result<EstimateResult> {
    check_data(x, "GMLEB", 1)?;
    plug_in(x, opts, |g| npmle::uniform_weights(g.len()), exec)
}

/// `psi(z; h) = h ∫_0^{1/h} e^{t^2/2} cos(z t) dt`, the Fourier kernel of the
/// zero-proportion estimator with a uniform `[-1, 1]` smoothing density.
#[derive(Debug, Clone)]
pub struct ZeroProportionKernel {
    step: f64,
    coefficients: Vec<f64>,
}

impl ZeroProportionKernel {
    pub fn new(h: f64) -> Self {
        let panels = ZERO_PROPORTION_PANELS;
        let upper = 1.0 / h;
        let step = upper / panels as f64;
        let coefficients = (0..=panels)
            .map(|k| {
                let t = k as f64 * step;
                let w = if k == 0 || k == panels {
                    1.0
                } else if k % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                h * w * step / 3.0 * (0.5 * t * t).exp()
            })
            .collect();
        Self { step, coefficients }
    }

    pub fn eval(&self, z: f64) -> f64 {
        // cos(z t_k) by complex rotation; error grows linearly in k
        let (s, c) = (z * self.step).sin_cos();
        let (mut re, mut im) = (1.0, 0.0);
        let mut acc = 0.0;
        for w in &self.coefficients {
            acc += w * re;
            let next_re = re * c - im * s;
            im = re * s + im * c;
            re = next_re;
        }
        acc
    }
}

/// Bandwidth `h_n = (kappa log n)^{-1/2}`.
pub fn zero_proportion_bandwidth(n: usize, kappa: f64) -> f64 {
    (kappa * (n as f64).ln()).sqrt().recip()
}

/// Mean of `psi(X_j; h_n)` before clamping.
pub fn zero_proportion_raw(x: &[f64], kappa: f64) -> f64 {
    let kernel = ZeroProportionKernel::new(zero_proportion_bandwidth(x.len(), kappa));
    x.iter().map(|&z| kernel.eval(z)).sum::<f64>() / x.len() as f64
}

/// Fourier estimate of the proportion of zero means, clamped to `[0, 1]`.
pub fn estimate_zero_proportion(x: &[f64], kappa: f64) -> Result<f64> {
    check_data(x, "zero-proportion estimate", 2)?;
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "kappa = {kappa} not in (0, 1]"
        )));
    }
    Ok(zero_proportion_raw(x, kappa).clamp(0.0, 1.0))
}

/// GMLEB whose EM starts with mass `omega_0` at the zero grid point.
pub fn s_gmleb(x: &[f64]) -> Result<EstimateResult> {
    s_gmleb_with(
        x,
        DEFAULT_KAPPA,
        &FitOptions::default(),
        Execution::default(),
    )
}

pub fn s_gmleb_with(
    x: &[f64],
    kappa: f64,
    opts: &FitOptions,
    exec: Execution,
) -> Result<EstimateResult> {
    check_data(x, "S-GMLEB", 2)?;
    let omega = estimate_zero_proportion(x, kappa)?;
    // A start with no mass off zero never leaves the point mass at zero.
    let start = omega.min(1.0 - 1.0 / x.len() as f64);
    let mut out = plug_in(x, opts, |g| sparse_start(g, start), exec)?;
    out.metadata.zero_proportion = Some(omega);
    Ok(out)
}

/// Mass `omega` at the zero grid point, the rest spread uniformly. Grids
/// without a zero point get uniform weights.
pub fn sparse_start(grid: &npmle::Grid, omega: f64) -> Vec<f64> {
    let m = grid.len();
    match grid.zero_index {
        Some(j0) if m > 1 => {
            let mut w = vec![(1.0 - omega) / (m - 1) as f64; m];
            w[j0] = omega;
            w
        }
        _ => npmle::uniform_weights(m),
    }
}

/// Posterior mean under the empirical distribution of the true means.
pub fn oracle_rule(theta: &[f64], x: &[f64]) -> Result<EstimateResult> {
    oracle_rule_with(theta, x, Execution::default())
}

pub fn oracle_rule_with(theta: &[f64], x: &[f64], exec: Execution) -> Result<EstimateResult> {
    if theta.len() != x.len() {
        return Err(Error::LengthMismatch {
            left: theta.len(),
            right: x.len(),
        });
    }
    check_data(x, "oracle rule", 1)?;
    let prior = DiscreteMixture::empirical(theta)?;
    let estimates = prior.posterior_means(x, exec);
    Ok(EstimateResult {
        estimates,
        metadata: Metadata {
            mixture: Some(prior),
            ..Metadata::default()
        },
    })
}

/// Positive-part James–Stein shrinkage toward the grand mean:
/// `Xbar + (1 - (n - 3)/S)_+ (X_i - Xbar)`, `S = sum (X_i - Xbar)^2`.
pub fn james_stein(x: &[f64]) -> Result<EstimateResult> {
    james_stein_toward(x, ShrinkageTarget::GrandMean)
}

/// Positive-part James–Stein shrinkage toward `target`. Toward the origin the
/// factor is `(1 - (n - 2)/||X||^2)_+`.
pub fn james_stein_toward(x: &[f64], target: ShrinkageTarget) -> Result<EstimateResult> {
    check_data(x, "James–Stein", 4)?;
    let n = x.len() as f64;
    let (center, dof) = match target {
        ShrinkageTarget::GrandMean => (x.iter().sum::<f64>() / n, n - 3.0),
        ShrinkageTarget::Origin => (0.0, n - 2.0),
    };
    let s: f64 = x.iter().map(|v| (v - center) * (v - center)).sum();
    let factor = if s > 0.0 {
        (1.0 - dof / s).max(0.0)
    } else {
        0.0
    };
    Ok(EstimateResult {
        estimates: x.iter().map(|v| center + factor * (v - center)).collect(),
        metadata: Metadata {
            shrinkage: Some(factor),
            ..Metadata::default()
        },
    })
}

pub fn soft_threshold(x: f64, t: f64) -> f64 {
    x.signum() * (x.abs() - t).max(0.0)
}

/// `sqrt(2 log n)`.
pub fn universal_level(n: usize) -> f64 {
    (2.0 * (n as f64).ln()).sqrt()
}

/// Stein's unbiased risk estimate of soft thresholding at `t`:
/// `n - 2 #{|X_i| <= t} + sum min(X_i^2, t^2)`.
pub fn sure_risk(x: &[f64], t: f64) -> f64 {
    let below = x.iter().filter(|v| v.abs() <= t).count() as f64;
    x.len() as f64 - 2.0 * below + x.iter().map(|v| (v * v).min(t * t)).sum::<f64>()
}

/// Threshold minimizing SURE over `{0} ∪ {|X_i| <= sqrt(2 log n)} ∪ {sqrt(2 log n)}`,
/// ties going to the smaller threshold. Runs in `O(n log n)`.
pub fn sure_threshold(x: &[f64]) -> f64 {
    let n = x.len();
    let cap = universal_level(n);
    let mut abs: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    abs.sort_by(f64::total_cmp);

    let mut candidates: Vec<f64> = std::iter::once(0.0)
        .chain(abs.iter().copied().filter(|a| *a <= cap))
        .chain(std::iter::once(cap))
        .collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    // Sweep candidates upward, tracking #{|X| <= t} and the sum of X^2 below t.
    let mut best = (f64::INFINITY, 0.0);
    let mut idx = 0;
    let mut sq_below = 0.0;
    for &t in &candidates {
        while idx < n && abs[idx] <= t {
            sq_below += abs[idx] * abs[idx];
            idx += 1;
        }
        let above = (n - idx) as f64;
        let risk = n as f64 - 2.0 * idx as f64 + sq_below + above * t * t;
        if risk < best.0 {
            best = (risk, t);
        }
    }
    best.1
}

/// Soft thresholding at the SURE-minimizing threshold.
pub fn sure_soft(x: &[f64]) -> Result<EstimateResult> {
    check_data(x, "SURE", 1)?;
    let t = sure_threshold(x);
    Ok(EstimateResult {
        estimates: x.iter().map(|&v| soft_threshold(v, t)).collect(),
        metadata: Metadata {
            threshold: Some(t),
            ..Metadata::default()
        },
    })
}

/// Hard thresholding at the Benjamini–Hochberg cut: with `|X|_(1) >= ... >= |X|_(n)`,
/// keep the `k` largest where `k = max{k : |X|_(k) >= z(q k / (2n))}`.
pub fn fdr_threshold(x: &[f64], q: f64) -> Result<EstimateResult> {
    check_data(x, "FDR", 1)?;
    if !(q > 0.0 && q <= 0.5) {
        return Err(Error::InvalidParameter(format!(
            "FDR level q = {q} not in (0, 1/2]"
        )));
    }
    let n = x.len();
    let mut abs: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    abs.sort_by(|a, b| b.total_cmp(a));
    let cut = (1..=n)
        .rev()
        .find(|&k| abs[k - 1] >= normal::upper_quantile(q * k as f64 / (2.0 * n as f64)));
    let (estimates, threshold) = match cut {
        Some(k) => {
            let t = abs[k - 1];
            (
                x.iter()
                    .map(|&v| if v.abs() >= t { v } else { 0.0 })
                    .collect(),
                t,
            )
        }
        None => (vec![0.0; n], f64::INFINITY),
    };
    Ok(EstimateResult {
        estimates,
        metadata: Metadata {
            threshold: Some(threshold),
            ..Metadata::default()
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Threshold {
    Soft,
    Hard,
}

/// Soft or hard thresholding at `sqrt(2 log n)`.
pub fn universal(x: &[f64], mode: Threshold) -> Result<EstimateResult> {
    check_data(x, "universal threshold", 1)?;
    let t = universal_level(x.len());
    let estimates = x
        .iter()
        .map(|&v| match mode {
            Threshold::Soft => soft_threshold(v, t),
            Threshold::Hard => {
                if v.abs() > t {
                    v
                } else {
                    0.0
                }
            }
        })
        .collect();
    Ok(EstimateResult {
        estimates,
        metadata: Metadata {
            threshold: Some(t),
            ..Metadata::default()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gmleb_on_zeros() {
        let r = gmleb(&[0.0; 7]).unwrap();
        assert!(r.estimates.iter().all(|v| *v == 0.0));
        let r = s_gmleb(&[0.0; 7]).unwrap();
        assert!(r.estimates.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn gmleb_single_observation() {
        // EM from uniform weights leaves w_j ∝ phi(c - u_j)^k, whose posterior
        // mean sits about 0.8/sqrt(k) inside c; 100 steps is not enough.
        let r = gmleb(&[3.0]).unwrap();
        assert!((r.estimates[0] - 3.0).abs() < 0.1);
        let long = FitOptions {
            iterations: 100_000,
            ..FitOptions::default()
        };
        // |c| large enough that 2 eps exceeds the 1e5-step offset
        for c in [3.0, -2.5] {
            let r = gmleb_with(&[c], &long, Execution::Sequential).unwrap();
            let eps = c.abs() / 999.0;
            assert!(
                (r.estimates[0] - c).abs() <= 2.0 * eps,
                "{c}: {}",
                r.estimates[0]
            );
        }
    }

    #[test]
    fn gmleb_estimates_within_grid() {
        let x = [-1.3, 0.2, 0.9, 4.4, 2.0];
        let r = gmleb(&x).unwrap();
        let g = r.metadata.mixture.as_ref().unwrap();
        for v in &r.estimates {
            assert!(*v >= g.min_support() && *v <= g.max_support());
        }
        assert_eq!(r.metadata.em_iterations, Some(100));
    }

    #[test]
    fn zero_proportion_kernel_at_origin() {
        // 1-D trapezoid oracle on 10^6 points for ∫_0^1 e^{t^2/2} dt
        let n = 1_000_000;
        let h = 1.0 / n as f64;
        let mut acc = 0.5 * (1.0 + 0.5f64.exp());
        for k in 1..n {
            let t = k as f64 * h;
            acc += (0.5 * t * t).exp();
        }
        let oracle = acc * h;
        assert_abs_diff_eq!(oracle, 1.194_96, epsilon = 1e-5);
        let k = ZeroProportionKernel::new(1.0);
        assert_abs_diff_eq!(k.eval(0.0), oracle, epsilon = 1e-10);
    }

    #[test]
    fn zero_proportion_kernel_matches_direct_cosines() {
        let k = ZeroProportionKernel::new(0.6);
        for z in [0.3, 2.0, 7.5, 50.0] {
            let upper = 1.0 / 0.6;
            let direct = 0.6
                * normal::simpson(
                    |t| (0.5 * t * t).exp() * (z * t).cos(),
                    0.0,
                    upper,
                    upper / 4096.0,
                );
            assert_abs_diff_eq!(k.eval(z), direct, epsilon = 1e-10);
        }
    }

    #[test]
    fn zero_proportion_vanishes_far_out() {
        let x = vec![50.0; 100];
        let raw = zero_proportion_raw(&x, DEFAULT_KAPPA);
        assert!(raw.abs() < 0.05, "{raw}");
        assert!(estimate_zero_proportion(&[0.0], 0.5).is_err());
    }

    #[test]
    fn sparse_start_matches_uniform() {
        let g = npmle::build_grid_paper(&[1.0, -2.0]).unwrap();
        let m = g.len();
        let w = sparse_start(&g, 1.0 / m as f64);
        for v in &w {
            assert_abs_diff_eq!(*v, 1.0 / m as f64, epsilon = 1e-15);
        }
        let w = sparse_start(&g, 0.4);
        assert_eq!(w[g.zero_index.unwrap()], 0.4);
        assert_abs_diff_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn oracle_examples() {
        let x = [0.5, -1.0, 2.0];
        let r = oracle_rule(&[0.0; 3], &x).unwrap();
        assert!(r.estimates.iter().all(|v| *v == 0.0));
        let r = oracle_rule(&[1.5; 3], &x).unwrap();
        assert!(r.estimates.iter().all(|v| *v == 1.5));
        assert!(oracle_rule(&[0.0; 2], &x).is_err());
        assert!(estimate(&EstimatorSpec::Oracle, &x, None).is_err());
    }

    #[test]
    fn james_stein_examples() {
        let r = james_stein(&[1.0, -1.0, 1.0, -1.0]).unwrap();
        assert_eq!(r.metadata.shrinkage, Some(0.75));
        assert_eq!(r.estimates, vec![0.75, -0.75, 0.75, -0.75]);
        let r = james_stein_toward(&[1.0, -1.0, 1.0, -1.0], ShrinkageTarget::Origin).unwrap();
        assert_eq!(r.metadata.shrinkage, Some(0.5));
        let r = james_stein(&[2.0; 5]).unwrap();
        assert_eq!(r.estimates, vec![2.0; 5]);
        assert_eq!(r.metadata.shrinkage, Some(0.0));
        assert!(james_stein(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn sure_examples() {
        let r = sure_soft(&[0.0; 10]).unwrap();
        assert!(r.estimates.iter().all(|v| *v == 0.0));
        let x = [0.1, 5.0];
        assert_abs_diff_eq!(sure_risk(&x, 0.0), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sure_risk(&x, 0.1), 0.02, epsilon = 1e-15);
        let cap = universal_level(2);
        assert_abs_diff_eq!(sure_risk(&x, cap), 0.01 + 2.0 * 2f64.ln(), epsilon = 1e-12);
        assert_eq!(sure_threshold(&x), 0.1);
    }

    #[test]
    fn fdr_examples() {
        let r = fdr_threshold(&[10.0, 0.1], 0.1).unwrap();
        assert_eq!(r.estimates, vec![10.0, 0.0]);
        assert_eq!(r.metadata.threshold, Some(10.0));
        let r = fdr_threshold(&[0.5, -1.0, 2.0], 0.01).unwrap();
        assert_eq!(r.estimates, vec![0.0; 3]);
        assert!(fdr_threshold(&[1.0], 0.7).is_err());
    }

    #[test]
    fn universal_examples() {
        assert_abs_diff_eq!(universal_level(1000), 3.716_922, epsilon = 1e-6);
        let lam = universal_level(4);
        let x = [lam, -lam - 1.0, 0.3, 0.0];
        let hard = universal(&x, Threshold::Hard).unwrap().estimates;
        assert_eq!(hard, vec![0.0, -lam - 1.0, 0.0, 0.0]);
        let soft = universal(&x, Threshold::Soft).unwrap().estimates;
        assert_abs_diff_eq!(soft[1], -1.0, epsilon = 1e-12);
        assert_eq!(soft[0], 0.0);
        for mode in [Threshold::Soft, Threshold::Hard] {
            assert!(universal(&[0.0; 5], mode)
                .unwrap()
                .estimates
                .iter()
                .all(|v| *v == 0.0));
        }
    }

    #[test]
    fn identity_returns_input() {
        let x = [0.1, -3.0, 2.5];
        assert_eq!(
            estimate(&EstimatorSpec::Identity, &x, None)
                .unwrap()
                .estimates,
            x
        );
    }

    #[test]
    fn spec_json_roundtrip() {
        let s: EstimatorSpec = serde_json::from_str(r#"{"kind":"fdr","q":0.01}"#).unwrap();
        assert_eq!(s, EstimatorSpec::Fdr { q: 0.01 });
        let s: EstimatorSpec = serde_json::from_str(r#"{"kind":"s_gmleb"}"#).unwrap();
        assert_eq!(s, EstimatorSpec::s_gmleb());
        let s: EstimatorSpec =
            serde_json::from_str(r#"{"kind":"gmleb","grid":"certified","stop":"certified"}"#)
                .unwrap();
        assert!(matches!(s, EstimatorSpec::Gmleb { fit } if fit.grid == GridMode::Certified));
        assert!(serde_json::from_str::<EstimatorSpec>(r#"{"kind":"bogus"}"#).is_err());
        assert_eq!(EstimatorSpec::Fdr { q: 0.01 }.label(), "fdr(0.01)");
        let s: EstimatorSpec =
            serde_json::from_str(r#"{"kind":"james_stein","target":"origin"}"#).unwrap();
        assert_eq!(s.label(), "james_stein_origin");
        let s: EstimatorSpec = serde_json::from_str(r#"{"kind":"james_stein"}"#).unwrap();
        assert_eq!(s.label(), "james_stein");
        assert_eq!(EstimatorSpec::Fdr { q: 0.1 }.to_string(), "FDR (0.1)");
    }
}
