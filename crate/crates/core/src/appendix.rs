//! Integral-moment scaling: the nested integral `F_n`, its product bound and
//! the relative-error estimate between exact and truncated integral moments.
//!
//! `F_n(l, l_scal) = l^{-n} int (l - l_n) prod_{k=2}^n prod_{j=1}^{k-1} (l_k - l_{k-j})^{-xi_{j+1}}`
//! over ordered `0 = l_1 < l_2 < ... < l_n < l` with consecutive gaps of at
//! least `l_scal`, where `xi_{j+1}` is the `xi` exponent of `j + 1` unit orders.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::exponents::{check_multifractal_condition, h_increment, xi_exponent};
use crate::levy::LevyBasis;

/// Monte Carlo value of `F_n` with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FnEstimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
}

/// `xi_{j+1}` for `j = 1..n-1`.
pub fn gap_exponents(basis: &LevyBasis, tau2: f64, n: u32) -> Result<Vec<f64>> {
    (1..n).map(|j| xi_exponent(basis, tau2, &vec![1; j as usize + 1])).collect()
}

fn require_condition(basis: &LevyBasis, tau2: f64, n: u32) -> Result<()> {
    for k in 2..=n {
        match check_multifractal_condition(basis, tau2, k) {
            Ok(true) => {}
            Ok(false) => {
                return invalid(format!(
                    "mu({k}) - mu({}) >= 1: the F_{n} integral is not bounded",
                    k - 1
                ))
            }
            Err(e) => return Err(e),
        }
    }
    Ok(())
}

/// Monte Carlo estimate of `F_n(l, l_scal)`.
///
/// Draws `n - 1` sorted uniforms on `[0, l]` per sample. A fixed `seed`
/// reuses the same draws for every `l`, so the estimate of `F_n(1, l_scal/l)`
/// is exactly nondecreasing in `l`.
pub fn fn_integral(
    basis: &LevyBasis,
    tau2: f64,
    n: u32,
    l: f64,
    l_scal: f64,
    samples: usize,
    seed: u64,
) -> Result<FnEstimate> {
    if n < 2 {
        return invalid(format!("F_n needs n >= 2, got {n}"));
    }
    if !(l_scal > 0.0 && l.is_finite()) || !(l > (n - 1) as f64 * l_scal) {
        return invalid(format!(
            "F_{n} needs l > (n-1) l_scal > 0, got l = {l}, l_scal = {l_scal}"
        ));
    }
    if samples < 2 {
        return invalid("F_n needs at least 2 Monte Carlo samples");
    }
    require_condition(basis, tau2, n)?;
    let xi = gap_exponents(basis, tau2, n)?;
    let m = n as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos = vec![0.0; m];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        for p in pos[1..].iter_mut() {
            *p = l * rng.random::<f64>();
        }
        pos[1..].sort_by(|a, b| a.total_cmp(b));
        let admissible = pos.windows(2).all(|w| w[1] - w[0] >= l_scal);
        let value = if admissible {
            let mut log_prod = (l - pos[m - 1]).ln();
            for k in 1..m {
                for j in 1..=k {
                    log_prod -= xi[j - 1] * (pos[k] - pos[k - j]).ln();
                }
            }
            log_prod.exp()
        } else {
            0.0
        };
        sum += value;
        sum_sq += value * value;
    }
    let count = samples as f64;
    let mean = sum / count;
    let var = ((sum_sq - count * mean * mean) / (count - 1.0)).max(0.0);
    // Volume of the ordered simplex in [0, l]^{n-1} times the l^{-n} prefactor.
    let log_factorial: f64 = (1..m).map(|k| (k as f64).ln()).sum();
    let scale = (-(l.ln()) - log_factorial).exp();
    Ok(FnEstimate {
        value: scale * mean,
        stderr: scale * (var / count).sqrt(),
        samples,
    })
}

/// `prod_{k=2}^n 1 / (1 + h(k))`; the `k = 1` factor is one since `h(1) = 0`.
pub fn product_bound(basis: &LevyBasis, tau2: f64, n: u32) -> Result<f64> {
    let mut acc = 1.0;
    for k in 2..=n {
        let h = h_increment(basis, tau2, k)?;
        if h <= -1.0 {
            return Err(Error::InvalidParameter(format!(
                "1 + h({k}) = {} is not positive",
                1.0 + h
            )));
        }
        acc /= 1.0 + h;
    }
    Ok(acc)
}

/// Relative-error bound `n! d_n(0) l^{mu - n} ((l_scal + l)^n - l^n)`.
pub fn error_bound(n: u32, l: f64, l_scal: f64, d_n_at_zero: f64, mu_n: f64) -> f64 {
    let log_factorial: f64 = (2..=n).map(|k| (k as f64).ln()).sum();
    let growth = ((n as f64) * (l_scal / l).ln_1p()).exp_m1();
    log_factorial.exp() * d_n_at_zero * l.powf(mu_n) * growth
}
