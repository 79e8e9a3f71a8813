//! Generalized (nonparametric) maximum likelihood for the mixing distribution.
//!
//! The mixing distribution is restricted to a fixed grid and its weights are
//! optimized with the EM update
//!
//! ```text
//! w_j <- n^{-1} sum_i w_j phi(X_i - u_j) / sum_l w_l phi(X_i - u_l)
//! ```
//!
//! Two grid recipes are provided: the 999-interval grid anchored at zero used
//! for the simulation tables ([`build_grid_paper`]), and an equispaced grid
//! on the data range fine enough for the certified stopping rule
//! ([`build_grid_certified`]). Stopping is either a fixed number of EM steps or
//! the weight-ratio certificate that guarantees the likelihood is within a
//! factor `q_n` of the unrestricted maximum.

use serde::{Deserialize, Serialize};

use crate::mixtures::DiscreteMixture;
use crate::normal::{self, LN_SQRT_2PI};
use crate::par::{self, Execution};
use crate::{Error, Result};

/// Number of EM steps used for the simulation tables.
pub const DEFAULT_EM_ITERATIONS: usize = 100;

/// Iteration cap for certified stopping.
pub const DEFAULT_MAX_ITERATIONS: usize = 100_000;

/// Number of grid intervals spanning the data range in the zero-anchored grid.
pub const PAPER_GRID_INTERVALS: f64 = 999.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridMode {
    #[default]
    Paper,
    Certified,
}

/// Approximation factor `q_n = (e sqrt(2 pi) / n^2) ∧ 1`.
pub fn default_q(n: usize) -> f64 {
    let n = n as f64;
    (std::f64::consts::E * (2.0 * std::f64::consts::PI).sqrt() / (n * n)).min(1.0)
}

/// A grid of candidate support points.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub points: Vec<f64>,
    /// Spacing between consecutive points; zero for a degenerate grid.
    pub spacing: f64,
    /// Index of the grid point at zero, when there is one.
    pub zero_index: Option<usize>,
    /// True when the data have zero range and the grid is a single point.
    pub degenerate: bool,
}

impl Grid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn check_finite(x: &[f64]) -> Result<()> {
    if x.is_empty() {
        return Err(Error::TooFewObservations {
            what: "grid construction",
            min: 1,
            n: 0,
        });
    }
    match x.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFinite(i)),
        None => Ok(()),
    }
}

fn range(x: &[f64]) -> (f64, f64) {
    x.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

/// Grid of multiples of `eps = range(X ∪ {0}) / 999` covering `X ∪ {0}`, with
/// zero as a grid point. Yields 999 or 1000 points unless every `X_i` is zero.
pub fn build_grid_paper(x: &[f64]) -> Result<Grid> {
    check_finite(x)?;
    let (lo, hi) = range(x);
    let (lo, hi) = (lo.min(0.0), hi.max(0.0));
    let spacing = (hi - lo) / PAPER_GRID_INTERVALS;
    if spacing == 0.0 {
        return Ok(Grid {
            points: vec![0.0],
            spacing: 0.0,
            zero_index: Some(0),
            degenerate: true,
        });
    }
    // u_1 - eps < lo <= u_1 and u_m <= hi < u_m + eps; the slack absorbs
    // rounding in range/eps when the range is an exact multiple of eps.
    let steps = |v: f64| (v / spacing + 1e-9).floor() as i64;
    let below = steps(-lo);
    let above = steps(hi);
    let points = (-below..=above).map(|k| k as f64 * spacing).collect();
    Ok(Grid {
        points,
        spacing,
        zero_index: Some(below as usize),
        degenerate: false,
    })
}

/// Number of points of the certified grid for data range `r` and sample size
/// `n`: the smallest `m` with `eps^2 (r^2/4 + 1/8) <= 1/n`, `eps = r/(m-1)`.
pub fn certified_grid_size(r: f64, n: usize) -> usize {
    if r <= 0.0 {
        return 1;
    }
    let nf = n as f64;
    let spread = r * r / 4.0 + 0.125;
    let satisfied = |intervals: usize| {
        let eps = r / intervals as f64;
        eps * eps * spread <= 1.0 / nf
    };
    let mut intervals = ((r * (nf * spread).sqrt()).ceil() as usize).max(1);
    while !satisfied(intervals) {
        intervals += 1;
    }
    while intervals > 1 && satisfied(intervals - 1) {
        intervals -= 1;
    }
    intervals + 1
}

/// Equispaced grid from `min X` to `max X` fine enough for certified stopping.
pub fn build_grid_certified(x: &[f64]) -> Result<Grid> {
    check_finite(x)?;
    let (lo, hi) = range(x);
    let r = hi - lo;
    if r == 0.0 {
        return Ok(Grid {
            points: vec![lo],
            spacing: 0.0,
            zero_index: (lo == 0.0).then_some(0),
            degenerate: true,
        });
    }
    let m = certified_grid_size(r, x.len());
    let spacing = r / (m - 1) as f64;
    let mut points: Vec<f64> = (0..m).map(|j| lo + j as f64 * spacing).collect();
    points[m - 1] = hi;
    let zero_index = (lo <= 0.0 && hi >= 0.0).then(|| {
        let j = (-lo / spacing).round() as usize;
        j.min(m - 1)
    });
    Ok(Grid {
        points,
        spacing,
        zero_index,
        degenerate: false,
    })
}

pub fn build_grid(mode: GridMode, x: &[f64]) -> Result<Grid> {
    match mode {
        GridMode::Paper => build_grid_paper(x),
        GridMode::Certified => build_grid_certified(x),
    }
}

/// `sum_i log f_G(X_i)`.
pub fn log_likelihood(g: &DiscreteMixture, x: &[f64]) -> f64 {
    x.iter().map(|&xi| g.log_density(xi)).sum()
}

/// Row-scaled matrix of `phi(X_i - u_j)`.
///
/// Each row is stored divided by its largest entry; the log of that factor is
/// kept in `row_log_scale`. The EM update is invariant to row scaling, and the
/// log-likelihood adds the scales back, so no entry underflows however far the
/// data sit from parts of the grid.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    row_log_scale: Vec<f64>,
}

impl KernelMatrix {
    pub fn new(x: &[f64], grid: &[f64], exec: Execution) -> Self {
        let cols = grid.len();
        let mut values = vec![0.0; x.len() * cols];
        par::fill_rows(exec, &mut values, cols, |i, row| {
            let xi = x[i];
            let nearest = grid
                .iter()
                .map(|u| (xi - u) * (xi - u))
                .fold(f64::INFINITY, f64::min);
            for (k, u) in row.iter_mut().zip(grid) {
                let d = xi - u;
                *k = (0.5 * (nearest - d * d)).exp();
            }
        });
        let row_log_scale = x
            .iter()
            .map(|xi| {
                let nearest = grid
                    .iter()
                    .map(|u| (xi - u) * (xi - u))
                    .fold(f64::INFINITY, f64::min);
                -0.5 * nearest - LN_SQRT_2PI
            })
            .collect();
        Self {
            rows: x.len(),
            cols,
            values,
            row_log_scale,
        }
    }

    /// Wraps an explicit `rows x cols` row-major matrix of kernel values.
    pub fn from_values(values: Vec<f64>, rows: usize, cols: usize) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::LengthMismatch {
                left: values.len(),
                right: rows * cols,
            });
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParameter(
                "kernel entries must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            rows,
            cols,
            values,
            row_log_scale: vec![0.0; rows],
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    /// Row sums `sum_j K_ij w_j`.
    fn mix(&self, weights: &[f64], out: &mut Vec<f64>) -> Result<()> {
        out.clear();
        for i in 0..self.rows {
            let d = dot(self.row(i), weights);
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::DegenerateRow { row: i });
            }
            out.push(d);
        }
        Ok(())
    }

    fn loglik_from_mix(&self, mix: &[f64]) -> f64 {
        mix.iter()
            .zip(&self.row_log_scale)
            .map(|(d, s)| d.ln() + s)
            .sum()
    }

    /// Log-likelihood of the grid mixture with the given weights.
    pub fn log_likelihood(&self, weights: &[f64]) -> Result<f64> {
        let mut mix = Vec::with_capacity(self.rows);
        self.mix(weights, &mut mix)?;
        Ok(self.loglik_from_mix(&mix))
    }
}

/// Scratch state reused across EM iterations.
/// Dot product with independent partial sums, so the loop vectorizes.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    const LANES: usize = 8;
    let mut acc = [0.0; LANES];
    let (a_main, a_rest) = a.split_at(a.len() - a.len() % LANES);
    let b_main = &b[..a_main.len()];
    for (ca, cb) in a_main.chunks_exact(LANES).zip(b_main.chunks_exact(LANES)) {
        for l in 0..LANES {
            acc[l] += ca[l] * cb[l];
        }
    }
    let tail: f64 = a_rest
        .iter()
        .zip(&b[a_main.len()..])
        .map(|(x, y)| x * y)
        .sum();
    acc.iter().sum::<f64>() + tail
}

struct EmWorkspace {
    mix: Vec<f64>,
}

impl EmWorkspace {
    fn new(rows: usize) -> Self {
        Self {
            mix: Vec::with_capacity(rows),
        }
    }

    /// One EM update of `weights` into `next`. Returns the log-likelihood of
    /// the input weights, which falls out of the E-step for free. Each kernel
    /// row is used for both steps while it is still in cache.
    fn step(&mut self, kernel: &KernelMatrix, weights: &[f64], next: &mut [f64]) -> Result<f64> {
        self.mix.clear();
        next.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..kernel.rows {
            let row = kernel.row(i);
            let d = dot(row, weights);
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::DegenerateRow { row: i });
            }
            self.mix.push(d);
            let inv = 1.0 / d;
            for (acc, k) in next.iter_mut().zip(row) {
                *acc += k * inv;
            }
        }
        let n = kernel.rows as f64;
        for (acc, w) in next.iter_mut().zip(weights) {
            *acc *= w / n;
        }
        Ok(kernel.loglik_from_mix(&self.mix))
    }
}

fn check_weights(weights: &[f64], cols: usize) -> Result<()> {
    if weights.len() != cols {
        return Err(Error::LengthMismatch {
            left: weights.len(),
            right: cols,
        });
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidParameter(
            "weights must be nonnegative".into(),
        ));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "weights sum to {total}, not 1"
        )));
    }
    Ok(())
}

/// A single EM update of the grid weights.
pub fn em_step(weights: &[f64], kernel: &KernelMatrix) -> Result<Vec<f64>> {
    check_weights(weights, kernel.cols)?;
    let mut next = vec![0.0; weights.len()];
    EmWorkspace::new(kernel.rows).step(kernel, weights, &mut next)?;
    Ok(next)
}

/// When to stop the EM iterations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Exactly this many EM steps.
    FixedIterations(usize),
    /// Stop once `max_j log(w_j^(k) / w_j^(k-1)) <= log(1/(e q_n)) / n`.
    Certified { q_n: f64, max_iterations: usize },
}

impl StopRule {
    pub fn certified(n: usize) -> Self {
        StopRule::Certified {
            q_n: default_q(n),
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule::FixedIterations(DEFAULT_EM_ITERATIONS)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub max_log_weight_ratio: f64,
    pub threshold: f64,
    pub satisfied: bool,
}

/// Outcome of an EM solve on a fixed grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NpmleFit {
    pub mixture: DiscreteMixture,
    /// Log-likelihood of the initial weights followed by one entry per EM step.
    pub loglik_trace: Vec<f64>,
    pub iterations: usize,
    pub certificate: Option<Certificate>,
}

impl NpmleFit {
    pub fn final_loglik(&self) -> f64 {
        *self
            .loglik_trace
            .last()
            .expect("trace holds the initial value")
    }
}

/// Largest `log(new_j / old_j)`; atoms with zero previous weight stay at zero
/// under EM and contribute a ratio of zero.
fn max_log_ratio(prev: &[f64], next: &[f64]) -> f64 {
    prev.iter()
        .zip(next)
        .map(|(p, q)| if *p > 0.0 { (q / p).ln() } else { 0.0 })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Runs EM from `init` on `grid` until `stop` fires.
pub fn fit_npmle(x: &[f64], grid: &[f64], init: &[f64], stop: StopRule) -> Result<NpmleFit> {
    let kernel = KernelMatrix::new(x, grid, Execution::Sequential);
    fit_with_kernel(&kernel, grid, init, stop)
}

/// [`fit_npmle`] with a precomputed kernel matrix.
pub fn fit_with_kernel(
    kernel: &KernelMatrix,
    grid: &[f64],
    init: &[f64],
    stop: StopRule,
) -> Result<NpmleFit> {
    if kernel.rows == 0 {
        return Err(Error::TooFewObservations {
            what: "NPMLE",
            min: 1,
            n: 0,
        });
    }
    if grid.len() != kernel.cols {
        return Err(Error::LengthMismatch {
            left: grid.len(),
            right: kernel.cols,
        });
    }
    check_weights(init, kernel.cols)?;
    let n = kernel.rows as f64;
    let mut ws = EmWorkspace::new(kernel.rows);
    let mut current = init.to_vec();
    let mut next = vec![0.0; init.len()];
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut certificate = None;

    match stop {
        StopRule::FixedIterations(k) => {
            for _ in 0..k {
                trace.push(ws.step(kernel, &current, &mut next)?);
                std::mem::swap(&mut current, &mut next);
                iterations += 1;
            }
        }
        StopRule::Certified {
            q_n,
            max_iterations,
        } => {
            if !(q_n > 0.0 && q_n <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "q_n = {q_n} not in (0, 1]"
                )));
            }
            if init.iter().any(|w| *w <= 0.0) {
                return Err(Error::InvalidParameter(
                    "certified stopping needs strictly positive initial weights".into(),
                ));
            }
            let threshold = (1.0 / (std::f64::consts::E * q_n)).ln() / n;
            let mut cert = Certificate {
                max_log_weight_ratio: f64::INFINITY,
                threshold,
                satisfied: false,
            };
            while iterations < max_iterations {
                trace.push(ws.step(kernel, &current, &mut next)?);
                iterations += 1;
                cert.max_log_weight_ratio = max_log_ratio(&current, &next);
                std::mem::swap(&mut current, &mut next);
                if cert.max_log_weight_ratio <= threshold {
                    cert.satisfied = true;
                    break;
                }
            }
            certificate = Some(cert);
        }
    }
    trace.push(kernel.log_likelihood(&current)?);
    let mixture = DiscreteMixture::normalized(grid.to_vec(), current)?;
    Ok(NpmleFit {
        mixture,
        loglik_trace: trace,
        iterations,
        certificate,
    })
}

/// Per-observation check of the density floor `f(X_j) >= q_n/(e n) phi(0)`
/// implied by an approximate NPMLE.
pub fn density_floor_check(fit: &NpmleFit, x: &[f64], q_n: f64) -> Vec<bool> {
    let ln_floor = density_floor(q_n, x.len()).ln();
    x.iter()
        .map(|&xi| fit.mixture.log_density(xi) >= ln_floor)
        .collect()
}

/// `q_n / (e n sqrt(2 pi))`, the density floor and regularization level at
/// which the regularized rule coincides with the plug-in Bayes rule.
pub fn density_floor(q_n: f64, n: usize) -> f64 {
    q_n / (std::f64::consts::E * n as f64) * normal::PHI_MAX
}

/// Uniform weights over `m` points.
pub fn uniform_weights(m: usize) -> Vec<f64> {
    vec![1.0 / m as f64; m]
}
