//! Closed-form correlators of the field `eps = exp(Z(S))`.
//!
//! With unit weights, `ln <prod eps(p_i)^{n_i}> = sum_w area_w K[w]` where
//! `area_w` is the area covered by the ambit sets with total order `w`.

use std::cell::RefCell;

use crate::ambit::{AmbitBoundary, Point};
use crate::error::{Error, Result};
use crate::levy::LevyBasis;
use crate::quad::{breakpoints_within, integrate};

/// A basis together with an ambit boundary and the quadrature tolerance used
/// for every area it computes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmbitModel {
    pub basis: LevyBasis,
    pub boundary: AmbitBoundary,
    pub quad_tol: f64,
}

impl AmbitModel {
    pub fn new(basis: LevyBasis, boundary: AmbitBoundary) -> Self {
        Self {
            basis,
            boundary,
            quad_tol: crate::DEFAULT_QUAD_TOL,
        }
    }

    pub fn with_tolerance(mut self, quad_tol: f64) -> Self {
        self.quad_tol = quad_tol;
        self
    }

    /// `Vol(S0)` by quadrature.
    pub fn ambit_volume(&self) -> Result<f64> {
        self.boundary.overlap_volume(0.0, 0.0, self.quad_tol)
    }

    /// `ln <eps^n> = K[n] Vol(S0)`.
    pub fn log_moment(&self, n: f64) -> Result<f64> {
        Ok(self.basis.cumulant(n)? * self.ambit_volume()?)
    }

    /// `<eps> = exp(K[1] Vol(S0))`.
    pub fn mean_field(&self) -> Result<f64> {
        Ok(self.log_moment(1.0)?.exp())
    }

    pub fn log_two_point(&self, dx: f64, dt: f64) -> Result<f64> {
        let v = self.boundary.overlap_volume(dx, dt, self.quad_tol)?;
        Ok(2.0 * self.log_moment(1.0)? + v * self.basis.kappa()?)
    }

    /// `<eps(x,t) eps(x+dx, t+dt)> = <eps>^2 exp(kappa V(dx, dt))`.
    pub fn two_point(&self, dx: f64, dt: f64) -> Result<f64> {
        Ok(self.log_two_point(dx, dt)?.exp())
    }

    /// `ln <eps^n1 eps'^n2>` from the overlap volume:
    /// `(K[n1] + K[n2]) Vol + V (K[n1+n2] - K[n1] - K[n2])`.
    pub fn log_two_point_orders(&self, dx: f64, dt: f64, n1: u32, n2: u32) -> Result<f64> {
        let vol = self.ambit_volume()?;
        let v = self.boundary.overlap_volume(dx, dt, self.quad_tol)?;
        let (a, b) = (n1 as f64, n2 as f64);
        Ok((self.basis.cumulant(a)? + self.basis.cumulant(b)?) * vol + v * self.basis.cumulant_gap(a, b)?)
    }

    /// `ln <prod_i eps(p_i)^{n_i}>` through the coverage profile.
    pub fn log_n_point(&self, points: &[Point], orders: &[u32]) -> Result<f64> {
        let total: u32 = orders.iter().sum();
        // Surface the largest needed cumulant first so missing moments report the total order.
        self.basis.cumulant(total as f64)?;
        let profile = self.boundary.multiplicity_profile(points, orders, self.quad_tol)?;
        let mut acc = 0.0;
        for (w, area) in profile.entries() {
            acc += area * self.basis.cumulant(w as f64)?;
        }
        Ok(acc)
    }

    pub fn n_point(&self, points: &[Point], orders: &[u32]) -> Result<f64> {
        Ok(self.log_n_point(points, orders)?.exp())
    }

    /// `ln <exp(sum_i int_{S(p_i)} h_i dZ)> = int K[sum_i 1_{S(p_i)} h_i]`
    /// by iterated adaptive quadrature: exact segment splitting in `x`,
    /// adaptive Simpson within each segment and over `t`.
    ///
    /// Each weight receives the absolute coordinates of the basis point.
    pub fn log_n_point_weighted(&self, points: &[Point], weights: &[&dyn Fn(Point) -> f64]) -> Result<f64> {
        if points.is_empty() || points.len() != weights.len() || points.len() > 64 {
            return crate::error::invalid(format!(
                "need 1..=64 points with one weight each, got {} points and {} weights",
                points.len(),
                weights.len()
            ));
        }
        let b = &self.boundary;
        let big_t = b.decorrelation_time();
        let t_lo = points.iter().map(|p| p.t).fold(f64::INFINITY, f64::min) - big_t;
        let t_hi = points.iter().map(|p| p.t).fold(f64::NEG_INFINITY, f64::max);
        let span = t_hi - t_lo;
        let t_cuts = b.sweep_breakpoints(points);
        let inner_tol = 0.25 * self.quad_tol / span;
        let failure: RefCell<Option<Error>> = RefCell::new(None);
        let record = |e: Error| {
            failure.borrow_mut().get_or_insert(e);
        };

        let slice_integral = |t: f64| -> f64 {
            let mut events: Vec<(f64, usize, bool)> = Vec::with_capacity(2 * points.len());
            for (i, &p) in points.iter().enumerate() {
                let w = b.half_width(t - p.t + big_t);
                if w > 0.0 {
                    events.push((p.x - w, i, true));
                    events.push((p.x + w, i, false));
                }
            }
            events.sort_by(|a, b| a.0.total_cmp(&b.0));
            if events.is_empty() {
                return 0.0;
            }
            let x_span = events[events.len() - 1].0 - events[0].0;
            let mut active = 0u64;
            let mut last = f64::NAN;
            let mut total = 0.0;
            for &(x, i, open) in &events {
                if active != 0 && x > last {
                    let set = active;
                    let integrand = |xx: f64| {
                        let q = Point::new(xx, t);
                        let mut m = set;
                        let mut arg = 0.0;
                        while m != 0 {
                            let k = m.trailing_zeros() as usize;
                            arg += weights[k](q);
                            m &= m - 1;
                        }
                        match self.basis.cumulant(arg) {
                            Ok(v) => v,
                            Err(e) => {
                                record(e.into());
                                0.0
                            }
                        }
                    };
                    let seg_tol = inner_tol * (x - last) / x_span.max(f64::MIN_POSITIVE);
                    match integrate(integrand, &breakpoints_within(last, x, []), seg_tol.max(1e-15)) {
                        Ok((v, _)) => total += v,
                        Err(e) => record(e),
                    }
                }
                if open {
                    active |= 1 << i;
                } else {
                    active &= !(1 << i);
                }
                last = x;
            }
            total
        };

        let outer = integrate(slice_integral, &t_cuts, 0.75 * self.quad_tol);
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        Ok(outer?.0)
    }

    pub fn n_point_weighted(&self, points: &[Point], weights: &[&dyn Fn(Point) -> f64]) -> Result<f64> {
        Ok(self.log_n_point_weighted(points, weights)?.exp())
    }

    /// `d_n(0, ..., 0) = exp(Vol(S0) K[sum n_i])`: all ambit sets coincide.
    pub fn coincident_correlator(&self, orders: &[u32]) -> Result<f64> {
        let total: u32 = orders.iter().sum();
        self.log_moment(total as f64).map(f64::exp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> AmbitModel {
        let basis = LevyBasis::gaussian(0.0, 1.0).unwrap();
        let boundary = AmbitBoundary::build(0.2, &basis, 0.01, 1.0, 1.2).unwrap();
        AmbitModel::new(basis, boundary).with_tolerance(1e-10)
    }

    #[test]
    fn mean_field_default() {
        let m = model();
        let expected = (0.5 * m.boundary.ambit_area()).exp();
        assert!((m.mean_field().unwrap() - expected).abs() < 1e-8);
        assert!((m.mean_field().unwrap() - 1.7692).abs() < 1e-4);
    }

    #[test]
    fn zero_drift_cumulant_gives_unit_mean() {
        let basis = LevyBasis::gaussian(-0.5, 1.0).unwrap();
        let boundary = AmbitBoundary::build(0.2, &basis, 0.01, 1.0, 1.2).unwrap();
        let m = AmbitModel::new(basis, boundary);
        assert!((m.mean_field().unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn two_point_decorrelates() {
        let m = model();
        let mean = m.mean_field().unwrap();
        assert!((m.two_point(0.0, 1.2).unwrap() - mean * mean).abs() < 1e-12);
        assert!((m.two_point(25.0, 0.0).unwrap() - mean * mean).abs() < 1e-12);
    }

    #[test]
    fn temporal_and_spatial_slopes() {
        let m = model();
        let d = m.log_two_point(0.0, 0.2).unwrap() - m.log_two_point(0.0, 0.1).unwrap();
        assert!((d + 0.2 * 2f64.ln()).abs() < 1e-8);
        let d = m.log_two_point(4.0, 0.0).unwrap() - m.log_two_point(2.0, 0.0).unwrap();
        assert!((d + 0.2 * 2f64.ln()).abs() < 1e-8);
    }

    #[test]
    fn one_point_is_mean_field() {
        let m = model();
        let v = m.n_point(&[Point::new(2.0, 3.0)], &[1]).unwrap();
        assert!((v - m.mean_field().unwrap()).abs() < 1e-8);
    }

    #[test]
    fn two_point_orders_agree_with_profile_path() {
        let m = model();
        for &(dx, dt, n1, n2) in &[(0.0, 0.3, 1, 2), (1.5, 0.0, 2, 2), (0.7, 0.05, 3, 1)] {
            let direct = m.log_two_point_orders(dx, dt, n1, n2).unwrap();
            let prof = m
                .log_n_point(&[Point::new(0.0, 0.0), Point::new(dx, dt)], &[n1, n2])
                .unwrap();
            assert!((direct - prof).abs() < 1e-7, "{direct} vs {prof}");
        }
    }

    #[test]
    fn translation_invariance() {
        let m = model();
        let pts = [Point::new(0.0, 0.0), Point::new(0.8, 0.1), Point::new(-0.4, 0.35)];
        let shifted: Vec<Point> = pts.iter().map(|p| Point::new(p.x + 3.7, p.t - 1.9)).collect();
        let a = m.log_n_point(&pts, &[1, 2, 1]).unwrap();
        let b = m.log_n_point(&shifted, &[1, 2, 1]).unwrap();
        assert!((a - b).abs() < 1e-7);
    }

    #[test]
    fn nig_beyond_critical_order_is_domain_error() {
        let basis = LevyBasis::nig(3.0, 0.0, 1.0, 0.0).unwrap();
        let boundary = AmbitBoundary::build(0.2, &basis, 0.01, 1.0, 1.2).unwrap();
        let m = AmbitModel::new(basis, boundary);
        let r = m.n_point(&[Point::new(0.0, 0.0), Point::new(1.0, 0.0)], &[2, 2]);
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn weighted_reduces_to_unit_weights() {
        let m = model().with_tolerance(1e-9);
        let one = |_: Point| 1.0;
        let pts = [Point::new(0.0, 0.0), Point::new(1.3, 0.2)];
        let w = m.log_n_point_weighted(&pts, &[&one, &one]).unwrap();
        let u = m.log_n_point(&pts, &[1, 1]).unwrap();
        assert!((w - u).abs() < 1e-6 * u.abs().max(1.0));
    }

    #[test]
    fn weighted_constant_weight() {
        let m = model().with_tolerance(1e-9);
        let xi = |_: Point| 1.7;
        let v = m.log_n_point_weighted(&[Point::new(0.0, 0.0)], &[&xi]).unwrap();
        let expected = m.basis.cumulant(1.7).unwrap() * m.boundary.ambit_area();
        assert!((v - expected).abs() < 1e-7);
    }

    #[test]
    fn weighted_disjoint_ambits_factorize() {
        let m = model().with_tolerance(1e-9);
        let h1 = |p: Point| 1.0 + 0.1 * (p.t + 1.0);
        let h2 = |p: Point| 0.5 + 0.02 * p.x.abs();
        let a = Point::new(0.0, 0.0);
        let b = Point::new(50.0, 0.0);
        let joint = m.log_n_point_weighted(&[a, b], &[&h1, &h2]).unwrap();
        let sa = m.log_n_point_weighted(&[a], &[&h1]).unwrap();
        let sb = m.log_n_point_weighted(&[b], &[&h2]).unwrap();
        assert!((joint - sa - sb).abs() < 1e-7);
    }

    #[test]
    fn weighted_domain_violation_is_reported() {
        let basis = LevyBasis::gamma(1.0, 2.5).unwrap();
        let boundary = AmbitBoundary::build(0.2, &basis, 0.01, 1.0, 1.2).unwrap();
        let m = AmbitModel::new(basis, boundary);
        let big = |_: Point| 3.0;
        assert!(m.log_n_point_weighted(&[Point::new(0.0, 0.0)], &[&big]).is_err());
    }
}
