//! Losses, regrets, weak moments and convergence-rate calculators.

use serde::Serialize;

use crate::mixtures::DiscreteMixture;
use crate::normal::log_floor_e;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossReport {
    /// `||theta_hat - theta||^2`.
    pub total_sq_error: f64,
    /// `||theta_hat - theta||^2 / n`.
    pub avg_loss: f64,
    pub regret: Option<f64>,
    pub sqrt_regret: Option<f64>,
}

pub fn average_loss(theta_hat: &[f64], theta: &[f64]) -> Result<LossReport> {
    if theta_hat.len() != theta.len() {
        return Err(Error::LengthMismatch {
            left: theta_hat.len(),
            right: theta.len(),
        });
    }
    if theta.is_empty() {
        return Err(Error::TooFewObservations {
            what: "average loss",
            min: 1,
            n: 0,
        });
    }
    let total = total_sq_error(theta_hat, theta);
    Ok(LossReport {
        total_sq_error: total,
        avg_loss: total / theta.len() as f64,
        regret: None,
        sqrt_regret: None,
    })
}

/// `||a - b||^2` over the common prefix.
pub fn total_sq_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

impl LossReport {
    /// Attaches the regrets of this loss relative to `oracle_risk`.
    pub fn with_regret(mut self, oracle_risk: f64) -> Self {
        let (r, s) = regret(self.avg_loss, oracle_risk);
        self.regret = Some(r);
        self.sqrt_regret = Some(s);
        self
    }
}

/// `(risk - oracle, sqrt(risk) - sqrt(oracle))`.
pub fn regret(risk: f64, oracle_risk: f64) -> (f64, f64) {
    (risk - oracle_risk, risk.sqrt() - oracle_risk.sqrt())
}

/// Order of a weak moment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MomentOrder {
    Finite(f64),
    Infinite,
}

/// Weak `l_p` moment `(sup_{x>0} x^p G(|u| > x))^{1/p}`.
///
/// For an atomic `G` the supremum is approached as `x` rises to an atom's
/// absolute value, so the tail is evaluated closed: `G(|u| >= |u_j|)`.
pub fn weak_moment(g: &DiscreteMixture, p: MomentOrder) -> Result<f64> {
    let mut atoms: Vec<(f64, f64)> = g.atoms().map(|(u, w)| (u.abs(), w)).collect();
    match p {
        MomentOrder::Infinite => Ok(atoms.iter().map(|(a, _)| *a).fold(0.0, f64::max)),
        MomentOrder::Finite(p) => {
            if p.is_nan() || p <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "moment order p = {p} must be > 0"
                )));
            }
            atoms.sort_by(|a, b| b.0.total_cmp(&a.0));
            let mut tail = 0.0;
            let mut best: f64 = 0.0;
            let mut i = 0;
            while i < atoms.len() {
                let a = atoms[i].0;
                while i < atoms.len() && atoms[i].0 == a {
                    tail += atoms[i].1;
                    i += 1;
                }
                if a > 0.0 {
                    best = best.max(a.powf(p) * tail.min(1.0));
                }
            }
            Ok(best.powf(1.0 / p))
        }
    }
}

/// Convergence rate
/// `max(sqrt(2 log n), (n^{1/p} sqrt(log n) mu_p)^{p/(2+2p)}) sqrt(log n / n)`,
/// with `log` read as `log(· ∨ e)`.
pub fn rate_epsilon(n: usize, g: &DiscreteMixture, p: MomentOrder) -> Result<f64> {
    if n < 2 {
        return Err(Error::TooFewObservations {
            what: "convergence rate",
            min: 2,
            n,
        });
    }
    let nf = n as f64;
    let ln = log_floor_e(nf);
    let mu = weak_moment(g, p)?;
    let tail = (ln / nf).sqrt();
    let lead = match p {
        MomentOrder::Infinite => (2.0 * ln).max(ln.sqrt() * mu).sqrt(),
        MomentOrder::Finite(p) => {
            if ln < 2.0 / p {
                return Err(Error::InvalidParameter(format!(
                    "need log n >= 2/p, got log n = {ln}, p = {p}"
                )));
            }
            let second = (nf.powf(1.0 / p) * ln.sqrt() * mu).powf(p / (2.0 + 2.0 * p));
            (2.0 * ln).sqrt().max(second)
        }
    };
    Ok(lead * tail)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn loss_examples() {
        let t = [1.0, 2.0];
        let r = average_loss(&t, &t).unwrap();
        assert_eq!(r.total_sq_error, 0.0);
        let r = average_loss(&[2.0, 1.0], &t).unwrap();
        assert_eq!(r.avg_loss, 1.0);
        assert_eq!(r.total_sq_error, 2.0);
        assert!(average_loss(&[1.0], &t).is_err());
    }

    #[test]
    fn regret_examples() {
        assert_eq!(regret(2.0, 2.0), (0.0, 0.0));
        assert_eq!(regret(4.0, 1.0), (3.0, 1.0));
        // total-error scale, GMLEB vs oracle at 50 atoms of height 5
        assert_eq!(regret(58.0, 46.0).0, 12.0);
        let r = average_loss(&[2.0, 0.0], &[0.0, 0.0])
            .unwrap()
            .with_regret(1.0);
        assert_eq!(r.regret, Some(1.0));
    }

    #[test]
    fn weak_moment_examples() {
        let g = DiscreteMixture::point_mass(-3.0);
        for p in [0.5, 1.0, 2.0, 7.0] {
            assert_abs_diff_eq!(
                weak_moment(&g, MomentOrder::Finite(p)).unwrap(),
                3.0,
                epsilon = 1e-12
            );
        }
        let g = DiscreteMixture::new(vec![1.0, 2.0], vec![0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(
            weak_moment(&g, MomentOrder::Finite(1.0)).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        assert_eq!(weak_moment(&g, MomentOrder::Infinite).unwrap(), 2.0);
        let d0 = DiscreteMixture::point_mass(0.0);
        assert_eq!(weak_moment(&d0, MomentOrder::Finite(1.0)).unwrap(), 0.0);
        assert!(weak_moment(&g, MomentOrder::Finite(0.0)).is_err());
    }

    #[test]
    fn weak_moment_merges_symmetric_atoms() {
        let g = DiscreteMixture::new(vec![-2.0, 0.0, 2.0], vec![0.25, 0.5, 0.25]).unwrap();
        // tail at |u| >= 2 carries both atoms
        assert_abs_diff_eq!(
            weak_moment(&g, MomentOrder::Finite(1.0)).unwrap(),
            1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn rate_examples() {
        let d0 = DiscreteMixture::point_mass(0.0);
        let n = 1000;
        let ln = (n as f64).ln();
        let first = (2.0 * ln).sqrt() * (ln / n as f64).sqrt();
        assert_abs_diff_eq!(first, 0.308_924, epsilon = 1e-6);
        for p in [
            MomentOrder::Finite(1.0),
            MomentOrder::Finite(2.0),
            MomentOrder::Infinite,
        ] {
            assert_abs_diff_eq!(rate_epsilon(n, &d0, p).unwrap(), first, epsilon = 1e-12);
        }
        let g = DiscreteMixture::point_mass(2.0 * ln / ln.sqrt());
        assert_abs_diff_eq!(
            rate_epsilon(n, &g, MomentOrder::Infinite).unwrap(),
            first,
            epsilon = 1e-12
        );
        assert!(rate_epsilon(1, &d0, MomentOrder::Infinite).is_err());
        assert!(rate_epsilon(10, &d0, MomentOrder::Finite(0.1)).is_err());
    }

    #[test]
    fn rate_decreases_in_n() {
        let d0 = DiscreteMixture::point_mass(0.0);
        let mut prev = f64::INFINITY;
        for n in 8..2000 {
            let r = rate_epsilon(n, &d0, MomentOrder::Finite(1.0)).unwrap();
            assert!(r < prev, "n = {n}");
            prev = r;
        }
    }
}
