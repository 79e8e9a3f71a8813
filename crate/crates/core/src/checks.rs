//! Randomized invariant checks run by `gmleb check` and the test suites.
//!
//! Each check draws its own inputs from a fixed seed and reports a
//! [`CheckOutcome`]; none of them panics on failure.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::estimators::{soft_threshold, universal_level};
use crate::mixtures::{
    self, hellinger, inv_phi, Derivatives, DiscreteMixture, RegularizationLevel,
};
use crate::npmle::{self, StopRule};
use crate::simlab::mean_se;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self {
            name,
            passed,
            detail,
        }
    }
}

/// Sizes of the randomized checks.
#[derive(Debug, Clone, Copy)]
pub struct CheckConfig {
    pub seed: u64,
    pub samples: usize,
    pub em_datasets: usize,
    pub compound_reps: usize,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            seed: 20_090_401,
            samples: 1000,
            em_datasets: 100,
            compound_reps: 100_000,
        }
    }
}

impl CheckConfig {
    pub fn quick() -> Self {
        Self {
            samples: 200,
            em_datasets: 12,
            compound_reps: 5_000,
            ..Self::default()
        }
    }
}

/// Random mixture with 1 to 6 atoms in `[-5, 5]`.
pub fn random_mixture<R: Rng>(rng: &mut R) -> DiscreteMixture {
    let m = rng.random_range(1..=6);
    let mut support: Vec<f64> = (0..m).map(|_| rng.random_range(-5.0..5.0)).collect();
    support.sort_by(f64::total_cmp);
    support.dedup();
    let weights: Vec<f64> = support
        .iter()
        .map(|_| rng.random_range(0.05..1.0))
        .collect();
    DiscreteMixture::normalized(support, weights).expect("valid random mixture")
}

fn random_point<R: Rng>(rng: &mut R, g: &DiscreteMixture) -> f64 {
    rng.random_range(g.min_support() - 3.0..g.max_support() + 3.0)
}

/// Score and curvature bounds with a caller-supplied derivative oracle: at
/// random `(G, x)`,
/// `f'/f` equals `t_G(x) - x` and
/// `(f'/f)^2 <= f''/f + 1 <= -log(2 pi f^2)`.
pub fn score_bounds_with<F>(cfg: &CheckConfig, derivs: F) -> CheckOutcome
where
    F: Fn(&DiscreteMixture, f64) -> Derivatives,
{
    const SLACK: f64 = 1e-8;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut worst = f64::INFINITY;
    let mut score_err: f64 = 0.0;
    for _ in 0..cfg.samples {
        let g = random_mixture(&mut rng);
        let x = random_point(&mut rng, &g);
        let d = derivs(&g, x);
        let score = d.first / d.density;
        let second = d.second / d.density + 1.0;
        let bound = mixtures::inv_phi_sq_ln(d.density.ln());
        worst = worst.min(second - score * score).min(bound - second);
        let err = (score - (g.posterior_mean(x) - x)).abs() / (1.0 + score.abs());
        score_err = score_err.max(err);
    }
    let passed = worst >= -SLACK && score_err <= SLACK;
    CheckOutcome::new(
        "score_bounds",
        passed,
        format!("min slack {worst:.3e}, max score error {score_err:.3e}"),
    )
}

pub fn score_bounds(cfg: &CheckConfig) -> CheckOutcome {
    score_bounds_with(cfg, |g, x| g.density_derivs(x))
}

/// Bounds on the regularized Bayes rule: `|x - t(x; rho)| <= L(rho)` and a
/// central-difference slope in `[0, L(rho)^2]`, up to `1e-6`.
pub fn regularized_rule_bounds(cfg: &CheckConfig) -> CheckOutcome {
    const H: f64 = 1e-5;
    const TOL: f64 = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let mut failures = 0usize;
    let mut worst_gap: f64 = f64::INFINITY;
    for &rho in &[1e-2, 1e-4, 1e-8] {
        let level = RegularizationLevel::new(rho).expect("positive");
        let l = inv_phi(rho).expect("rho below phi(0)");
        for _ in 0..cfg.samples {
            let g = random_mixture(&mut rng);
            let x = random_point(&mut rng, &g);
            let t = |y: f64| g.regularized_posterior_mean(y, level);
            let shift = (x - t(x)).abs();
            let slope = (t(x + H) - t(x - H)) / (2.0 * H);
            let gap = (l - shift).min(slope + TOL).min(l * l + TOL - slope);
            worst_gap = worst_gap.min(gap);
            if shift > l || slope < -TOL || slope > l * l + TOL {
                failures += 1;
            }
        }
    }
    CheckOutcome::new(
        "regularized_rule_bounds",
        failures == 0,
        format!("{failures} violations, min margin {worst_gap:.3e}"),
    )
}

/// Every EM step on the zero-anchored grid keeps the log-likelihood from
/// decreasing, up to `1e-9` relative.
pub fn em_ascent(cfg: &CheckConfig) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xe4);
    let sizes = [1usize, 10, 200];
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for d in 0..cfg.em_datasets {
        let n = sizes[d % sizes.len()];
        let g = random_mixture(&mut rng);
        let x: Vec<f64> = (0..n)
            .map(|_| {
                let u = rng.random::<f64>();
                let mut acc = 0.0;
                let mut pick = g.max_support();
                for (s, w) in g.atoms() {
                    acc += w;
                    if u < acc {
                        pick = s;
                        break;
                    }
                }
                pick + rng.sample::<f64, _>(StandardNormal)
            })
            .collect();
        let grid = match npmle::build_grid_paper(&x) {
            Ok(grid) => grid,
            Err(_) => {
                failures += 1;
                continue;
            }
        };
        let init = npmle::uniform_weights(grid.len());
        let Ok(fit) = npmle::fit_npmle(&x, &grid.points, &init, StopRule::default()) else {
            failures += 1;
            continue;
        };
        for w in fit.loglik_trace.windows(2) {
            let drop = (w[0] - w[1]) / w[0].abs().max(1.0);
            worst = worst.max(drop);
            if w[1] < w[0] - 1e-9 * w[0].abs() {
                failures += 1;
            }
        }
    }
    CheckOutcome::new(
        "em_ascent",
        failures == 0,
        format!("{failures} decreasing steps, worst relative drop {worst:.3e}"),
    )
}

/// Hellinger quadrature against `sqrt(2 (1 - exp(-mu^2 / 8)))` for unit
/// normals `mu` apart.
pub fn hellinger_closed_form() -> CheckOutcome {
    let mut worst: f64 = 0.0;
    for mu in [0.5, 1.0, 2.0, 4.0] {
        let d = hellinger(
            &DiscreteMixture::point_mass(0.0),
            &DiscreteMixture::point_mass(mu),
        );
        let exact = (2.0 * (1.0 - (-mu * mu / 8.0).exp())).sqrt();
        worst = worst.max((d - exact).abs());
    }
    CheckOutcome::new(
        "hellinger_closed_form",
        worst <= 1e-6,
        format!("max error {worst:.3e}"),
    )
}

/// Compound risk versus Bayes risk of a fixed separable rule.
#[derive(Debug, Clone, Copy)]
pub struct CompoundComparison {
    pub compound_risk: f64,
    pub compound_se: f64,
    pub bayes_risk: f64,
    pub bayes_se: f64,
}

impl CompoundComparison {
    pub fn z_score(&self) -> f64 {
        let se = self.compound_se.hypot(self.bayes_se);
        (self.compound_risk - self.bayes_risk).abs() / se
    }
}

/// Monte Carlo estimates of the compound risk `E n^{-1} sum (t(X_i) - theta_i)^2`
/// and of the single-coordinate Bayes risk `E (t(Y) - xi)^2` with `xi` uniform
/// over the entries of `theta`, for `t` soft thresholding at `sqrt(2 log n)`.
pub fn compound_vs_bayes(theta: &[f64], reps: usize, seed: u64) -> CompoundComparison {
    let n = theta.len();
    let lambda = universal_level(n);
    let rule = |x: f64| soft_threshold(x, lambda);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let compound: Vec<f64> = (0..reps)
        .map(|_| {
            theta
                .iter()
                .map(|&t| {
                    let e = rule(t + rng.sample::<f64, _>(StandardNormal)) - t;
                    e * e
                })
                .sum::<f64>()
                / n as f64
        })
        .collect();
    let (cm, cse) = mean_se(compound.into_iter());

    let draws = reps * n;
    let bayes = (0..draws).map(|_| {
        let xi = theta[rng.random_range(0..n)];
        let e = rule(xi + rng.sample::<f64, _>(StandardNormal)) - xi;
        e * e
    });
    let (bm, bse) = mean_se(bayes);
    CompoundComparison {
        compound_risk: cm.unwrap_or(f64::NAN),
        compound_se: cse.unwrap_or(f64::NAN),
        bayes_risk: bm.unwrap_or(f64::NAN),
        bayes_se: bse.unwrap_or(f64::NAN),
    }
}

/// The mean vector used by [`compound_equivalence`]: 100 means, 10 at 3,
/// 20 at -1.5, the rest 0.
pub fn compound_theta() -> Vec<f64> {
    (0..100)
        .map(|i| match i {
            0..=9 => 3.0,
            10..=29 => -1.5,
            _ => 0.0,
        })
        .collect()
}

pub fn compound_equivalence(cfg: &CheckConfig) -> CheckOutcome {
    let c = compound_vs_bayes(&compound_theta(), cfg.compound_reps, cfg.seed ^ 0x25);
    CheckOutcome::new(
        "compound_equivalence",
        c.z_score() <= 3.0,
        format!(
            "compound {:.5} ± {:.1e}, bayes {:.5} ± {:.1e}, z = {:.2}",
            c.compound_risk,
            c.compound_se,
            c.bayes_risk,
            c.bayes_se,
            c.z_score()
        ),
    )
}

/// Certified fits satisfy the density floor at every observation and their
/// regularized rule at that floor coincides with the plug-in rule.
pub fn certified_density_floor(cfg: &CheckConfig) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xf1);
    let datasets = (cfg.em_datasets / 10).max(2);
    let mut failures = 0;
    let mut unsatisfied = 0;
    for _ in 0..datasets {
        let n = 100;
        let x: Vec<f64> = (0..n)
            .map(|i| if i < 20 { 2.5 } else { 0.0 } + rng.sample::<f64, _>(StandardNormal))
            .collect();
        let grid = npmle::build_grid_certified(&x).expect("finite data");
        let init = npmle::uniform_weights(grid.len());
        let Ok(fit) = npmle::fit_npmle(&x, &grid.points, &init, StopRule::certified(n)) else {
            failures += 1;
            continue;
        };
        if !fit.certificate.is_some_and(|c| c.satisfied) {
            unsatisfied += 1;
            continue;
        }
        let q = npmle::default_q(n);
        failures += npmle::density_floor_check(&fit, &x, q)
            .iter()
            .filter(|ok| !**ok)
            .count();
        let rho = RegularizationLevel::new(npmle::density_floor(q, n)).expect("positive");
        for &xi in &x {
            let a = fit.mixture.regularized_posterior_mean(xi, rho);
            let b = fit.mixture.posterior_mean(xi);
            if (a - b).abs() > 1e-9 {
                failures += 1;
            }
        }
    }
    CheckOutcome::new(
        "certified_density_floor",
        failures == 0 && unsatisfied == 0,
        format!("{failures} violations, {unsatisfied} uncertified fits over {datasets} datasets"),
    )
}

pub fn run_all(cfg: &CheckConfig) -> Vec<CheckOutcome> {
    vec![
        score_bounds(cfg),
        regularized_rule_bounds(cfg),
        em_ascent(cfg),
        hellinger_closed_form(),
        compound_equivalence(cfg),
        certified_density_floor(cfg),
    ]
}
