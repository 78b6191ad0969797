//! Adaptive Simpson quadrature for piecewise smooth integrands.
//!
//! Callers pass the known breakpoints of the integrand; each smooth piece is
//! integrated separately with a share of the tolerance proportional to its
//! length. Integrands may be vector valued, the error norm is the L1 norm.

use crate::error::{Error, Result};

const MAX_DEPTH: u32 = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct Integral {
    pub value: Vec<f64>,
    /// Sum of the local Richardson error estimates.
    pub error: f64,
    pub evaluations: usize,
}

struct Work<'f> {
    f: &'f mut dyn FnMut(f64, &mut [f64]),
    dim: usize,
    evaluations: usize,
    error: f64,
    unconverged: bool,
}

impl Work<'_> {
    fn eval(&mut self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        (self.f)(x, &mut out);
        self.evaluations += 1;
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn refine(
        &mut self,
        a: f64,
        b: f64,
        fa: &[f64],
        fm: &[f64],
        fb: &[f64],
        whole: &[f64],
        tol: f64,
        depth: u32,
        acc: &mut [f64],
    ) {
        let m = 0.5 * (a + b);
        let h = b - a;
        let flm = self.eval(0.5 * (a + m));
        let frm = self.eval(0.5 * (m + b));
        let mut left = vec![0.0; self.dim];
        let mut right = vec![0.0; self.dim];
        let mut delta = 0.0;
        for k in 0..self.dim {
            left[k] = h / 12.0 * (fa[k] + 4.0 * flm[k] + fm[k]);
            right[k] = h / 12.0 * (fm[k] + 4.0 * frm[k] + fb[k]);
            delta += (left[k] + right[k] - whole[k]).abs();
        }
        let converged = delta <= 15.0 * tol;
        let too_deep = depth >= MAX_DEPTH || m <= a || m >= b;
        if converged || too_deep {
            for k in 0..self.dim {
                let two = left[k] + right[k];
                acc[k] += two + (two - whole[k]) / 15.0;
            }
            self.error += delta / 15.0;
            if !converged {
                self.unconverged = true;
            }
            return;
        }
        self.refine(a, m, fa, &flm, fm, &left, 0.5 * tol, depth + 1, acc);
        self.refine(m, b, fm, &frm, fb, &right, 0.5 * tol, depth + 1, acc);
    }
}

/// Integrate a vector-valued `f` of dimension `dim` over the sorted `breakpoints`
/// (first and last entries are the integration limits).
///
/// Fails with [`Error::Quadrature`] when some subinterval hit the depth limit
/// and the accumulated error estimate exceeds `tol`.
pub fn integrate_vec(
    mut f: impl FnMut(f64, &mut [f64]),
    dim: usize,
    breakpoints: &[f64],
    tol: f64,
) -> Result<Integral> {
    let mut acc = vec![0.0; dim];
    let mut work = Work {
        f: &mut f,
        dim,
        evaluations: 0,
        error: 0.0,
        unconverged: false,
    };
    if breakpoints.len() < 2 {
        return Ok(Integral {
            value: acc,
            error: 0.0,
            evaluations: 0,
        });
    }
    let span = breakpoints[breakpoints.len() - 1] - breakpoints[0];
    if !(span > 0.0) {
        return Ok(Integral {
            value: acc,
            error: 0.0,
            evaluations: 0,
        });
    }
    for w in breakpoints.windows(2) {
        let (a, b) = (w[0], w[1]);
        if !(b > a) {
            continue;
        }
        let piece_tol = tol * (b - a) / span;
        let fa = work.eval(a);
        let fm = work.eval(0.5 * (a + b));
        let fb = work.eval(b);
        let whole: Vec<f64> = (0..dim)
            .map(|k| (b - a) / 6.0 * (fa[k] + 4.0 * fm[k] + fb[k]))
            .collect();
        work.refine(a, b, &fa, &fm, &fb, &whole, piece_tol, 0, &mut acc);
    }
    if work.unconverged && work.error > tol {
        return Err(Error::Quadrature {
            estimate: work.error,
            tolerance: tol,
        });
    }
    Ok(Integral {
        value: acc,
        error: work.error,
        evaluations: work.evaluations,
    })
}

/// Scalar counterpart of [`integrate_vec`]; returns `(value, error estimate)`.
pub fn integrate(mut f: impl FnMut(f64) -> f64, breakpoints: &[f64], tol: f64) -> Result<(f64, f64)> {
    let r = integrate_vec(|x, out| out[0] = f(x), 1, breakpoints, tol)?;
    Ok((r.value[0], r.error))
}

/// Sorted, deduplicated breakpoints clipped to `[lo, hi]`, always containing both ends.
pub(crate) fn breakpoints_within(lo: f64, hi: f64, candidates: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut pts: Vec<f64> = candidates
        .into_iter()
        .filter(|&p| p.is_finite() && p > lo && p < hi)
        .collect();
    pts.push(lo);
    pts.push(hi);
    pts.sort_by(|a, b| a.total_cmp(b));
    let scale = (hi - lo).abs().max(1.0);
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * scale);
    pts
}

/// Roots of `f` on `[a, b]`, located by sign changes on a uniform scan and bisection.
pub(crate) fn scan_roots(f: impl Fn(f64) -> f64, a: f64, b: f64, samples: usize) -> Vec<f64> {
    let mut roots = Vec::new();
    if !(b > a) {
        return roots;
    }
    let n = samples.max(2);
    let mut x0 = a;
    let mut f0 = f(a);
    for i in 1..=n {
        let x1 = a + (b - a) * i as f64 / n as f64;
        let f1 = f(x1);
        if f0 == 0.0 {
            roots.push(x0);
        } else if f0 * f1 < 0.0 {
            let (mut lo, mut hi, mut flo) = (x0, x1, f0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let fm = f(mid);
                if fm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if (fm < 0.0) == (flo < 0.0) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        x0 = x1;
        f0 = f1;
    }
    roots
}
