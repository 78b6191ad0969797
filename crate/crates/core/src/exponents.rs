//! Scaling exponents of the multiscaling construction.
//!
//! All exponents are ratios of cumulant combinations to `kappa = K[2] - 2K[1]`,
//! scaled by the prescribed two-point exponent `tau2`:
//!
//! - `tau(n1, n2) = tau2 (K[n1+n2] - K[n1] - K[n2]) / kappa`
//! - `mu(n) = tau2 (K[n] - n K[1]) / kappa`
//! - `xi(m_1, ..., m_k) = tau(m_1 + ... + m_{k-1}, m_k) - tau(m_2 + ... + m_{k-1}, m_k)`
//! - `h(k) = mu(k - 1) - mu(k)`

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, DomainError, Result};
use crate::levy::LevyBasis;

/// `tau2 * numerator / kappa`, ordered so that `numerator == kappa` gives `tau2` exactly.
fn scaled(basis: &LevyBasis, tau2: f64, numerator: f64) -> Result<f64, DomainError> {
    Ok(tau2 * (numerator / basis.kappa()?))
}

fn k(basis: &LevyBasis, n: u32) -> Result<f64, DomainError> {
    basis.cumulant(n as f64)
}

/// `tau(n1, n2)`; `tau(0, n) = 0`.
pub fn tau_exponent(basis: &LevyBasis, tau2: f64, n1: u32, n2: u32) -> Result<f64, DomainError> {
    scaled(basis, tau2, k(basis, n1 + n2)? - k(basis, n1)? - k(basis, n2)?)
}

/// `mu(n)`, the coarse-grained moment exponent. `mu(0) = mu(1) = 0`, `mu(2) = tau2`.
pub fn mu_exponent(basis: &LevyBasis, tau2: f64, n: u32) -> Result<f64, DomainError> {
    // Repeated subtraction keeps mu(2) bitwise equal to tau(1, 1).
    let k1 = k(basis, 1)?;
    let numerator = (0..n).fold(k(basis, n)?, |acc, _| acc - k1);
    scaled(basis, tau2, numerator)
}

/// Nested-gap exponent for an ordered tuple of orders (length at least 2).
///
/// For two orders this is `tau(m1, m2)`; for three it is
/// `tau(m1 + m2, m3) - tau(m2, m3)`.
pub fn xi_exponent(basis: &LevyBasis, tau2: f64, orders: &[u32]) -> Result<f64> {
    if orders.len() < 2 {
        return invalid(format!("xi needs at least two orders, got {}", orders.len()));
    }
    let last = orders[orders.len() - 1];
    let inner: u32 = orders[1..orders.len() - 1].iter().sum();
    let outer = inner + orders[0];
    Ok(tau_exponent(basis, tau2, outer, last)? - tau_exponent(basis, tau2, inner, last)?)
}

/// `h(k) = mu(k-1) - mu(k)`, with `h(1) = 0`.
pub fn h_increment(basis: &LevyBasis, tau2: f64, k: u32) -> Result<f64> {
    if k == 0 {
        return invalid("h(k) is defined for k >= 1");
    }
    Ok(mu_exponent(basis, tau2, k - 1)? - mu_exponent(basis, tau2, k)?)
}

/// Whether `mu(n) - mu(n-1) < 1`, the sufficient condition for the coarse
/// moment of order `n` to scale. A domain error means `<eps^n>` does not exist.
pub fn check_multifractal_condition(basis: &LevyBasis, tau2: f64, n: u32) -> Result<bool> {
    if n == 0 {
        return invalid("the multifractal condition is defined for n >= 1");
    }
    let step = scaled(basis, tau2, k(basis, n)? - k(basis, n - 1)? - k(basis, 1)?)?;
    Ok(step < 1.0)
}

/// Three-valued outcome of the multifractal condition for one order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionStatus {
    Holds,
    Violated,
    /// `K[n]` is infinite: the moment does not exist.
    Undefined,
}

impl ConditionStatus {
    pub fn evaluate(basis: &LevyBasis, tau2: f64, n: u32) -> Self {
        match check_multifractal_condition(basis, tau2, n) {
            Ok(true) => Self::Holds,
            Ok(false) => Self::Violated,
            Err(_) => Self::Undefined,
        }
    }
}

impl fmt::Display for ConditionStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Holds => "true",
            Self::Violated => "false",
            Self::Undefined => "undefined",
        })
    }
}

/// The first order at which coarse-moment scaling is no longer guaranteed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriticalOrder {
    pub order: u32,
    pub status: ConditionStatus,
}

/// Smallest `n <= max_order` where the condition fails or the moment is undefined.
pub fn critical_order(basis: &LevyBasis, tau2: f64, max_order: u32) -> Option<CriticalOrder> {
    (1..=max_order).find_map(|n| match ConditionStatus::evaluate(basis, tau2, n) {
        ConditionStatus::Holds => None,
        status => Some(CriticalOrder { order: n, status }),
    })
}

/// One factor of the fusion rule: the correlator scales as
/// `(distance between points first and last)^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionTerm {
    pub first: usize,
    pub last: usize,
    pub exponent: f64,
}

/// Power-law exponents of an ordered purely spatial (or purely temporal)
/// n-point correlator `<eps_1^{m_1} ... eps_n^{m_n}>`.
///
/// Adjacent pairs carry `-tau(m_i, m_{i+1})`, wider gaps `-xi(m_i, ..., m_j)`.
pub fn fusion_prediction(orders: &[u32], basis: &LevyBasis, tau2: f64) -> Result<Vec<FusionTerm>> {
    if orders.len() < 2 {
        return invalid("fusion rules need at least two points");
    }
    let mut terms = Vec::new();
    for first in 0..orders.len() {
        for last in first + 1..orders.len() {
            let exponent = -xi_exponent(basis, tau2, &orders[first..=last])?;
            terms.push(FusionTerm {
                first,
                last,
                exponent,
            });
        }
    }
    Ok(terms)
}

/// Exponent tables over a range of orders; `None` marks an undefined moment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentTable {
    pub tau2: f64,
    pub tau: Vec<(u32, u32, Option<f64>)>,
    pub mu: Vec<(u32, Option<f64>, ConditionStatus)>,
    pub h: Vec<(u32, Option<f64>)>,
    /// `xi` of `j` unit orders, `j = 2..=max_order`.
    pub xi_unit: Vec<(u32, Option<f64>)>,
}

impl ExponentTable {
    pub fn compute(basis: &LevyBasis, tau2: f64, max_order: u32) -> Self {
        let mut tau = Vec::new();
        for n1 in 1..=max_order {
            for n2 in 1..=max_order {
                tau.push((n1, n2, tau_exponent(basis, tau2, n1, n2).ok()));
            }
        }
        let mu = (1..=max_order)
            .map(|n| {
                (
                    n,
                    mu_exponent(basis, tau2, n).ok(),
                    ConditionStatus::evaluate(basis, tau2, n),
                )
            })
            .collect();
        let h = (1..=max_order)
            .map(|n| (n, h_increment(basis, tau2, n).ok()))
            .collect();
        let xi_unit = (2..=max_order)
            .map(|j| (j, xi_exponent(basis, tau2, &vec![1; j as usize]).ok()))
            .collect();
        Self {
            tau2,
            tau,
            mu,
            h,
            xi_unit,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bases() -> Vec<LevyBasis> {
        vec![
            LevyBasis::gaussian(0.0, 1.0).unwrap(),
            LevyBasis::poisson(1.5, 0.3).unwrap(),
            LevyBasis::gamma(2.0, 20.0).unwrap(),
            LevyBasis::stable(1.5, 0.5).unwrap(),
            LevyBasis::nig(12.0, 0.5, 1.0, 0.3).unwrap(),
        ]
    }

    #[test]
    fn gaussian_mu_is_quadratic() {
        let g = LevyBasis::gaussian(0.0, 1.0).unwrap();
        for n in 1..8 {
            let direct = 0.2 * (g.cumulant(n as f64).unwrap() - n as f64 * g.cumulant(1.0).unwrap())
                / (g.cumulant(2.0).unwrap() - 2.0 * g.cumulant(1.0).unwrap());
            let mu = mu_exponent(&g, 0.2, n).unwrap();
            assert!((mu - 0.1 * (n * (n - 1)) as f64).abs() < 1e-14);
            assert!((mu - direct).abs() < 1e-14);
        }
        assert!((mu_exponent(&g, 0.2, 3).unwrap() - 0.6).abs() < 1e-14);
    }

    #[test]
    fn defining_identities_are_exact() {
        for b in bases() {
            assert_eq!(tau_exponent(&b, 0.2, 1, 1).unwrap(), 0.2, "{b:?}");
            assert_eq!(mu_exponent(&b, 0.2, 1).unwrap(), 0.0);
            let mu2 = mu_exponent(&b, 0.2, 2).unwrap();
            assert_eq!(mu2, 0.2, "{b:?}");
        }
    }

    #[test]
    fn stable_mu_closed_form() {
        for &alpha in &[0.5, 1.5, 1.8] {
            let s = LevyBasis::stable(alpha, 0.7).unwrap();
            for n in 1..6u32 {
                let expected = 0.2 * ((n as f64).powf(alpha) - n as f64) / (2f64.powf(alpha) - 2.0);
                assert!((mu_exponent(&s, 0.2, n).unwrap() - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn nig_mu_shape_and_drift_independence() {
        let (alpha, beta) = (6.0f64, 0.5f64);
        let shape = |n: f64| {
            (1.0 - n) * (alpha * alpha - beta * beta).sqrt()
                + n * (alpha * alpha - (beta + 1.0).powi(2)).sqrt()
                - (alpha * alpha - (beta + n).powi(2)).sqrt()
        };
        let a = LevyBasis::nig(alpha, beta, 1.0, 0.0).unwrap();
        let b = LevyBasis::nig(alpha, beta, 2.5, -0.8).unwrap();
        for n in 1..=5u32 {
            let ma = mu_exponent(&a, 0.2, n).unwrap();
            let mb = mu_exponent(&b, 0.2, n).unwrap();
            assert!((ma - mb).abs() < 1e-12);
            assert!((ma - 0.2 * shape(n as f64) / shape(2.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn h_sums_to_minus_mu() {
        for b in bases() {
            for n in 2..=8u32 {
                let sum: f64 = (2..=n).map(|k| h_increment(&b, 0.2, k).unwrap()).sum();
                assert!((sum + mu_exponent(&b, 0.2, n).unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn h_from_unit_xi() {
        // h(k) = -sum_{j=1}^{k-1} xi of (j + 1) unit orders.
        for b in bases() {
            for k in 2..=7u32 {
                let s: f64 = (1..k)
                    .map(|j| xi_exponent(&b, 0.2, &vec![1; j as usize + 1]).unwrap())
                    .sum();
                assert!((h_increment(&b, 0.2, k).unwrap() + s).abs() < 1e-12);
            }
        }
        assert_eq!(h_increment(&bases()[0], 0.2, 1).unwrap(), 0.0);
    }

    #[test]
    fn xi_three_point_identity() {
        for b in bases() {
            for &(n1, n2, n3) in &[(1, 1, 1), (1, 2, 3), (2, 1, 2)] {
                let xi = xi_exponent(&b, 0.2, &[n1, n2, n3]).unwrap();
                let lhs = xi + tau_exponent(&b, 0.2, n2, n3).unwrap();
                assert!((lhs - tau_exponent(&b, 0.2, n1 + n2, n3).unwrap()).abs() < 1e-14);
            }
        }
        assert!(xi_exponent(&bases()[0], 0.2, &[1]).is_err());
    }

    #[test]
    fn gaussian_condition_flips_at_six() {
        let g = LevyBasis::gaussian(0.0, 1.0).unwrap();
        for n in 1..=5 {
            assert!(check_multifractal_condition(&g, 0.2, n).unwrap());
        }
        assert!(!check_multifractal_condition(&g, 0.2, 6).unwrap());
        let c = critical_order(&g, 0.2, 10).unwrap();
        assert_eq!((c.order, c.status), (6, ConditionStatus::Violated));
    }

    #[test]
    fn nig_condition_undefined_at_four() {
        let nig = LevyBasis::nig(3.0, 0.0, 1.0, 0.0).unwrap();
        assert!(check_multifractal_condition(&nig, 0.2, 3).is_ok());
        assert!(check_multifractal_condition(&nig, 0.2, 4).is_err());
        assert_eq!(ConditionStatus::evaluate(&nig, 0.2, 4), ConditionStatus::Undefined);
        assert_eq!(critical_order(&nig, 0.2, 10).unwrap().order, 4);
    }

    #[test]
    fn fusion_terms() {
        let g = LevyBasis::gaussian(0.0, 1.0).unwrap();
        let two = fusion_prediction(&[1, 2], &g, 0.2).unwrap();
        assert_eq!(two.len(), 1);
        assert!((two[0].exponent + tau_exponent(&g, 0.2, 1, 2).unwrap()).abs() < 1e-15);

        let three = fusion_prediction(&[1, 1, 1], &g, 0.2).unwrap();
        let by = |a, b| three.iter().find(|t| t.first == a && t.last == b).unwrap().exponent;
        let t11 = tau_exponent(&g, 0.2, 1, 1).unwrap();
        assert!((by(0, 1) + t11).abs() < 1e-15);
        assert!((by(1, 2) + t11).abs() < 1e-15);
        let xi = tau_exponent(&g, 0.2, 2, 1).unwrap() - t11;
        assert!((by(0, 2) + xi).abs() < 1e-15);
    }

    #[test]
    fn table_marks_missing_moments() {
        let nig = LevyBasis::nig(3.0, 0.0, 1.0, 0.0).unwrap();
        let t = ExponentTable::compute(&nig, 0.2, 5);
        assert!(t.mu[2].1.is_some());
        assert!(t.mu[3].1.is_none());
        assert_eq!(t.mu[3].2, ConditionStatus::Undefined);
        assert!(t.tau.iter().any(|r| r.2.is_none()));
    }
}
