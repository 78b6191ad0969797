//! Homogeneous Lévy bases.
//!
//! A basis is identified by its per-unit-area cumulant function
//! `K[xi] = ln <exp(xi Z(da))> / da`. Every correlator of the field is an
//! exponential of areas times values of `K`, so this module is the only place
//! the marginal law of the noise enters.
//!
//! Lattice simulation discretizes the basis into independent cells; a cell of
//! area `A` is infinitely divisible with cumulant `A K[xi]`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, InverseGaussian, Normal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, DomainError, Result};

/// Parameters of one of the supported infinitely divisible families.
///
/// Per-unit-area quantities (`lambda`, `shape`, `c`, `delta`, `nu`, `a`, `b^2`)
/// scale linearly with the area of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BasisKind {
    /// Brownian sheet with drift `a` and volatility `b`.
    Gaussian { a: f64, b: f64 },
    /// Compound Poisson with intensity `lambda` and a fixed jump size.
    Poisson { lambda: f64, jump: f64 },
    /// Gamma basis with shape `shape` per unit area and inverse scale `gamma`.
    Gamma { shape: f64, gamma: f64 },
    /// Maximally left-skewed stable law with index `alpha` and cumulant scale `c`.
    Stable { alpha: f64, c: f64 },
    /// Normal inverse Gaussian `NIG(alpha, beta, delta, nu)`.
    Nig {
        alpha: f64,
        beta: f64,
        delta: f64,
        nu: f64,
    },
}

/// A validated homogeneous Lévy basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BasisKind", into = "BasisKind")]
pub struct LevyBasis {
    kind: BasisKind,
}

impl TryFrom<BasisKind> for LevyBasis {
    type Error = crate::Error;

    fn try_from(kind: BasisKind) -> Result<Self> {
        LevyBasis::new(kind)
    }
}

impl From<LevyBasis> for BasisKind {
    fn from(basis: LevyBasis) -> Self {
        basis.kind
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        invalid(format!("{name} must be a positive finite number, got {v}"))
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        invalid(format!("{name} must be finite, got {v}"))
    }
}

impl LevyBasis {
    pub fn new(kind: BasisKind) -> Result<Self> {
        match kind {
            BasisKind::Gaussian { a, b } => {
                finite("gaussian drift a", a)?;
                positive("gaussian volatility b", b)?;
            }
            BasisKind::Poisson { lambda, jump } => {
                positive("poisson intensity lambda", lambda)?;
                positive("poisson jump size", jump)?;
            }
            BasisKind::Gamma { shape, gamma } => {
                positive("gamma shape", shape)?;
                positive("gamma inverse scale", gamma)?;
            }
            BasisKind::Stable { alpha, c } => {
                if !(alpha > 0.0 && alpha <= 2.0) || alpha == 1.0 {
                    return invalid(format!(
                        "stable index alpha must lie in (0, 2] and differ from 1, got {alpha}"
                    ));
                }
                positive("stable scale c", c)?;
            }
            BasisKind::Nig {
                alpha,
                beta,
                delta,
                nu,
            } => {
                positive("nig steepness alpha", alpha)?;
                finite("nig asymmetry beta", beta)?;
                if beta.abs() >= alpha {
                    return invalid(format!(
                        "nig asymmetry must satisfy |beta| < alpha, got beta={beta}, alpha={alpha}"
                    ));
                }
                positive("nig scale delta", delta)?;
                finite("nig drift nu", nu)?;
            }
        }
        Ok(Self { kind })
    }

    pub fn gaussian(a: f64, b: f64) -> Result<Self> {
        Self::new(BasisKind::Gaussian { a, b })
    }

    pub fn poisson(lambda: f64, jump: f64) -> Result<Self> {
        Self::new(BasisKind::Poisson { lambda, jump })
    }

    pub fn gamma(shape: f64, gamma: f64) -> Result<Self> {
        Self::new(BasisKind::Gamma { shape, gamma })
    }

    pub fn stable(alpha: f64, c: f64) -> Result<Self> {
        Self::new(BasisKind::Stable { alpha, c })
    }

    pub fn nig(alpha: f64, beta: f64, delta: f64, nu: f64) -> Result<Self> {
        Self::new(BasisKind::Nig {
            alpha,
            beta,
            delta,
            nu,
        })
    }

    pub fn kind(&self) -> &BasisKind {
        &self.kind
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            BasisKind::Gaussian { .. } => "gaussian",
            BasisKind::Poisson { .. } => "poisson",
            BasisKind::Gamma { .. } => "gamma",
            BasisKind::Stable { .. } => "stable",
            BasisKind::Nig { .. } => "nig",
        }
    }

    fn domain_error(&self, xi: f64, bound: String) -> DomainError {
        DomainError {
            basis: self.name(),
            argument: xi,
            bound,
        }
    }

    /// Per-unit-area cumulant `K[xi]`.
    ///
    /// Stable convention: `K[xi] = sign(alpha - 1) * c * xi^alpha` for `xi >= 0`.
    /// The sign makes `K` convex for both `alpha < 1` and `alpha > 1`; it is the
    /// exact log-Laplace transform of the maximally left-skewed (skewness -1)
    /// stable law, the only stable family with `<exp(xi Z)>` finite on `xi >= 0`.
    pub fn cumulant(&self, xi: f64) -> Result<f64, DomainError> {
        if xi.is_nan() {
            return Err(self.domain_error(xi, "a finite argument".into()));
        }
        match self.kind {
            BasisKind::Gaussian { a, b } => Ok(a * xi + 0.5 * b * b * xi * xi),
            BasisKind::Poisson { lambda, jump } => Ok(lambda * (jump * xi).exp_m1()),
            BasisKind::Gamma { shape, gamma } => {
                if xi < gamma {
                    Ok(-shape * (-xi / gamma).ln_1p())
                } else {
                    Err(self.domain_error(xi, format!("xi < gamma = {gamma}")))
                }
            }
            BasisKind::Stable { alpha, c } => {
                if xi >= 0.0 {
                    Ok((alpha - 1.0).signum() * c * xi.powf(alpha))
                } else {
                    Err(self.domain_error(xi, "xi >= 0".into()))
                }
            }
            BasisKind::Nig {
                alpha,
                beta,
                delta,
                nu,
            } => {
                let shifted = beta + xi;
                if shifted.abs() <= alpha {
                    let g0 = (alpha * alpha - beta * beta).sqrt();
                    let g1 = (alpha * alpha - shifted * shifted).sqrt();
                    Ok(nu * xi + delta * (g0 - g1))
                } else {
                    Err(self.domain_error(
                        xi,
                        format!(
                            "|beta + xi| <= alpha, i.e. xi in [{}, {}]",
                            -alpha - beta,
                            alpha - beta
                        ),
                    ))
                }
            }
        }
    }

    /// `K[n1 + n2] - K[n1] - K[n2]`, nonnegative by convexity.
    pub fn cumulant_gap(&self, n1: f64, n2: f64) -> Result<f64, DomainError> {
        Ok(self.cumulant(n1 + n2)? - self.cumulant(n1)? - self.cumulant(n2)?)
    }

    /// `K[2] - 2 K[1]`, the curvature constant every exponent is normalized by.
    pub fn kappa(&self) -> Result<f64, DomainError> {
        self.cumulant_gap(1.0, 1.0)
    }

    /// Law of `Z(cell)` for a cell of the given area.
    pub fn cell_sampler(&self, area: f64) -> Result<CellSampler> {
        positive("cell area", area)?;
        let law = match self.kind {
            BasisKind::Gaussian { a, b } => {
                CellLaw::Gaussian(Normal::new(a * area, b * area.sqrt()).expect("validated"))
            }
            BasisKind::Poisson { lambda, jump } => CellLaw::Poisson {
                count: Poisson::new(lambda * area).map_err(|e| {
                    crate::Error::InvalidParameter(format!("poisson cell intensity: {e}"))
                })?,
                jump,
            },
            BasisKind::Gamma { shape, gamma } => CellLaw::Gamma(
                Gamma::new(shape * area, 1.0 / gamma).map_err(|e| {
                    crate::Error::InvalidParameter(format!("gamma cell law: {e}"))
                })?,
            ),
            BasisKind::Stable { alpha, c } => {
                // Scale sigma with sigma^alpha = A c |cos(pi alpha / 2)|, skewness -1.
                let tan = (PI * alpha / 2.0).tan();
                let sigma = (area * c * (PI * alpha / 2.0).cos().abs()).powf(1.0 / alpha);
                CellLaw::Stable {
                    alpha,
                    sigma,
                    shift: (-tan).atan() / alpha,
                    stretch: (1.0 + tan * tan).powf(0.5 / alpha),
                }
            }
            BasisKind::Nig {
                alpha,
                beta,
                delta,
                nu,
            } => {
                let g0 = (alpha * alpha - beta * beta).sqrt();
                let d = delta * area;
                CellLaw::Nig {
                    subordinator: InverseGaussian::new(d / g0, d * d).map_err(|e| {
                        crate::Error::InvalidParameter(format!("nig subordinator: {e}"))
                    })?,
                    beta,
                    drift: nu * area,
                }
            }
        };
        Ok(CellSampler { law })
    }

    /// One draw of `Z(cell)` for a cell of the given area.
    pub fn sample_cell<R: Rng + ?Sized>(&self, area: f64, rng: &mut R) -> Result<f64> {
        Ok(self.cell_sampler(area)?.sample(rng))
    }
}

#[derive(Debug, Clone, Copy)]
enum CellLaw {
    Gaussian(Normal<f64>),
    Poisson {
        count: Poisson<f64>,
        jump: f64,
    },
    Gamma(Gamma<f64>),
    Stable {
        alpha: f64,
        sigma: f64,
        shift: f64,
        stretch: f64,
    },
    Nig {
        subordinator: InverseGaussian<f64>,
        beta: f64,
        drift: f64,
    },
}

/// Sampler for the basis measure of a single lattice cell.
#[derive(Debug, Clone, Copy)]
pub struct CellSampler {
    law: CellLaw,
}

impl Distribution<f64> for CellSampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.law {
            CellLaw::Gaussian(n) => n.sample(rng),
            CellLaw::Poisson { count, jump } => jump * count.sample(rng),
            CellLaw::Gamma(g) => g.sample(rng),
            CellLaw::Stable {
                alpha,
                sigma,
                shift,
                stretch,
            } => sigma * chambers_mallows_stuck(alpha, shift, stretch, rng),
            CellLaw::Nig {
                subordinator,
                beta,
                drift,
            } => {
                let z = subordinator.sample(rng);
                let n: f64 = rng.sample(StandardNormal);
                drift + beta * z + z.sqrt() * n
            }
        }
    }
}

/// Standard stable variate `S_alpha(1, beta, 0)` with `alpha != 1`, given the
/// precomputed `shift = atan(beta tan(pi alpha/2)) / alpha` and
/// `stretch = (1 + beta^2 tan^2(pi alpha/2))^(1/(2 alpha))`.
fn chambers_mallows_stuck<R: Rng + ?Sized>(alpha: f64, shift: f64, stretch: f64, rng: &mut R) -> f64 {
    loop {
        let v = PI * (rng.random::<f64>() - 0.5);
        let w: f64 = rng.sample(Exp1);
        let cos_v = v.cos();
        if cos_v <= 0.0 || w <= 0.0 {
            continue;
        }
        let arg = alpha * (v + shift);
        let x = stretch * arg.sin() / cos_v.powf(1.0 / alpha)
            * ((v - arg).cos() / w).powf((1.0 - alpha) / alpha);
        if x.is_finite() {
            return x;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn all_bases() -> Vec<LevyBasis> {
        vec![
            LevyBasis::gaussian(0.3, 1.2).unwrap(),
            LevyBasis::poisson(2.0, 0.5).unwrap(),
            LevyBasis::gamma(1.5, 6.0).unwrap(),
            LevyBasis::stable(1.5, 0.7).unwrap(),
            LevyBasis::stable(0.6, 0.7).unwrap(),
            LevyBasis::nig(8.0, 0.5, 1.0, 0.2).unwrap(),
        ]
    }

    #[test]
    fn gaussian_quadratic_cumulant() {
        let g = LevyBasis::gaussian(0.0, 1.0).unwrap();
        assert_eq!(g.cumulant(2.0).unwrap(), 2.0);
        assert_eq!(g.cumulant_gap(1.0, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn cumulant_vanishes_at_zero() {
        for b in all_bases() {
            assert_eq!(b.cumulant(0.0).unwrap(), 0.0, "{b:?}");
        }
    }

    #[test]
    fn gaussian_gap_is_bilinear() {
        // Direct three-evaluation oracle.
        let b = 0.7;
        let basis = LevyBasis::gaussian(-0.4, b).unwrap();
        for &(n1, n2) in &[(1.0, 1.0), (2.0, 3.0), (0.5, 4.0)] {
            let direct = basis.cumulant(n1 + n2).unwrap()
                - basis.cumulant(n1).unwrap()
                - basis.cumulant(n2).unwrap();
            let gap = basis.cumulant_gap(n1, n2).unwrap();
            assert!((gap - b * b * n1 * n2).abs() < 1e-12);
            assert!((gap - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn stable_gap() {
        let s = LevyBasis::stable(1.5, 1.0).unwrap();
        let expected = 2f64.powf(1.5) - 2.0;
        assert!((s.cumulant_gap(1.0, 1.0).unwrap() - expected).abs() < 1e-14);
        assert!((expected - 0.828427).abs() < 1e-6);
    }

    #[test]
    fn nig_domain_violation() {
        let nig = LevyBasis::nig(4.0, 0.0, 1.0, 0.0).unwrap();
        let err = nig.cumulant(5.0).unwrap_err();
        assert_eq!(err.basis, "nig");
        assert!(err.bound.contains("alpha"));
        assert!(nig.cumulant(4.0).is_ok());
    }

    #[test]
    fn gamma_and_stable_domains() {
        assert!(LevyBasis::gamma(1.0, 2.0).unwrap().cumulant(2.0).is_err());
        assert!(LevyBasis::stable(1.5, 1.0).unwrap().cumulant(-0.1).is_err());
    }

    #[test]
    fn construction_rejects_bad_parameters() {
        assert!(LevyBasis::gaussian(0.0, 0.0).is_err());
        assert!(LevyBasis::poisson(-1.0, 1.0).is_err());
        assert!(LevyBasis::gamma(1.0, f64::NAN).is_err());
        assert!(LevyBasis::stable(1.0, 1.0).is_err());
        assert!(LevyBasis::stable(2.5, 1.0).is_err());
        assert!(LevyBasis::stable(2.0, 1.0).is_ok());
        assert!(LevyBasis::nig(1.0, 1.0, 1.0, 0.0).is_err());
        assert!(LevyBasis::nig(1.0, 0.5, 0.0, 0.0).is_err());
    }

    #[test]
    fn zero_area_rejected() {
        let p = LevyBasis::poisson(2.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(p.sample_cell(0.0, &mut rng).is_err());
    }

    #[test]
    fn fixed_seed_reproduces_draws() {
        for b in all_bases() {
            let s = b.cell_sampler(0.3).unwrap();
            let a: Vec<f64> = s.sample_iter(ChaCha8Rng::seed_from_u64(9)).take(32).collect();
            let c: Vec<f64> = s.sample_iter(ChaCha8Rng::seed_from_u64(9)).take(32).collect();
            assert_eq!(a, c);
        }
    }

    #[test]
    fn gaussian_cell_moments() {
        let g = LevyBasis::gaussian(0.0, 1.0).unwrap().cell_sampler(4.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 1_000_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let x = g.sample(&mut rng);
            s += x;
            s2 += x * x;
        }
        let mean = s / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 4.0).abs() < 0.05, "var {var}");
    }
}
