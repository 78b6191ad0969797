//! Closed-form tables: exponents, overlap volumes, correlators and the
//! integral-moment bounds.

use ambit_core::appendix::{error_bound, fn_integral, product_bound};
use ambit_core::exponents::{mu_exponent, ConditionStatus};
use ambit_core::{ExponentTable, Result};

use crate::config::Plan;
use crate::output::{num, Table};

/// `n` values log-spaced over `[lo, hi]`, endpoints included.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    hi
                } else {
                    lo * (hi / lo).powf(i as f64 / (n - 1) as f64)
                }
            })
            .collect(),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_else(|| "undefined".into())
}

/// `n1,n2,tau` and `n,mu,condition_ok`.
pub fn exponent_tables(plan: &Plan, max_order: u32) -> [Table; 2] {
    let t = ExponentTable::compute(&plan.basis, plan.tau2(), max_order);
    let mut tau = Table::new("exponents_tau", &["n1", "n2", "tau"]);
    for (n1, n2, v) in &t.tau {
        tau.push(vec![n1.to_string(), n2.to_string(), opt(*v)]);
    }
    let mut mu = Table::new("exponents_mu", &["n", "mu", "condition_ok"]);
    for (n, v, status) in &t.mu {
        mu.push(vec![n.to_string(), opt(*v), status.to_string()]);
    }
    [tau, mu]
}

/// Default `volume` and `correlate` grid: 50 temporal lags over
/// `[t_scal, T_scal]` at `dx = 0` and 50 spatial lags over
/// `[l_scal, L_scal]` at `dt = 0`.
pub fn default_pairs(plan: &Plan) -> Vec<(f64, f64)> {
    let spec = plan.boundary.spec();
    let mut pairs: Vec<(f64, f64)> = log_grid(spec.t_scal, spec.t_outer, 50).into_iter().map(|dt| (0.0, dt)).collect();
    pairs.extend(log_grid(spec.inner_length(), spec.outer_length(), 50).into_iter().map(|dx| (dx, 0.0)));
    pairs
}

/// Every `(dx, dt)` combination of two lists.
pub fn cross_pairs(dx: &[f64], dt: &[f64]) -> Vec<(f64, f64)> {
    dt.iter().flat_map(|&t| dx.iter().map(move |&x| (x, t))).collect()
}

pub fn volume_table(plan: &Plan, pairs: &[(f64, f64)]) -> Result<Table> {
    let mut t = Table::new("volume", &["dx", "dt", "volume"]);
    let tol = plan.model.quad_tol;
    for &(dx, dt) in pairs {
        let v = plan.boundary.overlap_volume(dx, dt, tol)?;
        t.push(vec![num(dx), num(dt), num(v)]);
    }
    Ok(t)
}

pub fn correlate_table(plan: &Plan, pairs: &[(f64, f64)], orders: (u32, u32)) -> Result<Table> {
    let mut t = Table::new("correlate", &["dx", "dt", "analytic"]);
    for &(dx, dt) in pairs {
        let v = plan.model.log_two_point_orders(dx, dt, orders.0, orders.1)?.exp();
        t.push(vec![num(dx), num(dt), num(v)]);
    }
    Ok(t)
}

/// `n,l,Fn,stderr,bound` with `l` the ratio `l / l_scal`, and the
/// relative-error bound `n,l,error_bound` over the same ratios.
pub fn appendix_tables(plan: &Plan, orders: &[u32], ratios: &[f64], samples: usize) -> Result<[Table; 2]> {
    let basis = &plan.basis;
    let tau2 = plan.tau2();
    let l_scal = plan.boundary.spec().inner_length();
    let vol = plan.model.ambit_volume()?;
    let mut fns = Table::new("appendix", &["n", "l", "Fn", "stderr", "bound"]);
    let mut errs = Table::new("appendix_error_bound", &["n", "l", "error_bound"]);
    for &n in orders {
        let bound = product_bound(basis, tau2, n)?;
        for &r in ratios {
            let est = fn_integral(basis, tau2, n, 1.0, 1.0 / r, samples, plan.config.seed)?;
            fns.push(vec![n.to_string(), num(r), num(est.value), num(est.stderr), num(bound)]);
        }
        let d_n = basis.cumulant(n as f64).ok().map(|k| (vol * k).exp());
        let mu = mu_exponent(basis, tau2, n).ok();
        for &r in ratios {
            let cell = match (d_n, mu) {
                (Some(d), Some(m)) => num(error_bound(n, r * l_scal, l_scal, d, m)),
                _ => "undefined".into(),
            };
            errs.push(vec![n.to_string(), num(r), cell]);
        }
    }
    Ok([fns, errs])
}

/// First order in `2..=max_order` where the multifractal condition fails or
/// the moment is undefined.
pub fn critical_order(plan: &Plan, max_order: u32) -> Option<(u32, ConditionStatus)> {
    ambit_core::exponents::critical_order(&plan.basis, plan.tau2(), max_order).map(|c| (c.order, c.status))
}
