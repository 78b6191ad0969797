//! Geometry of the causal ambit set.
//!
//! The ambit set of the field value at the origin is
//! `S0 = {(x, t) : -T <= t <= 0, |x| <= g(t + T)}`, i.e. the half-width `g(s)`
//! is indexed by `s = t + T`: `s = 0` is the deepest past slice (widest), and
//! `s = T` is the apex at the observation time, where `g(T) = 0`.
//!
//! Inside the scaling range `[t_scal, T_scal]` the half-width is the hyperbola
//! `g(s) = tau2 / (2 kappa s)`, which is what makes two-point correlations pure
//! power laws in both space and time. Outside it `g` is completed by a plateau
//! (`s < t_scal`) and a linear taper down to zero (`s > T_scal`).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::levy::LevyBasis;
use crate::quad::{breakpoints_within, integrate, integrate_vec, scan_roots};

/// Default absolute tolerance for area quadratures.
pub const DEFAULT_QUAD_TOL: f64 = 1e-8;

/// Samples per smooth piece when scanning for crossings of interval endpoints.
const CROSSING_SCAN: usize = 24;

/// A point of space-time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub t: f64,
}

impl Point {
    pub const fn new(x: f64, t: f64) -> Self {
        Self { x, t }
    }
}

/// Prescribed two-point scaling: exponent `tau2` over `[t_scal, T_scal]`,
/// decorrelation time `T`, and the cached curvature `kappa = K[2] - 2K[1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingSpec {
    pub tau2: f64,
    pub t_scal: f64,
    #[serde(rename = "T_scal")]
    pub t_outer: f64,
    #[serde(rename = "T")]
    pub decorrelation: f64,
    pub kappa: f64,
}

impl ScalingSpec {
    pub fn new(tau2: f64, kappa: f64, t_scal: f64, t_outer: f64, decorrelation: f64) -> Result<Self> {
        for (name, v) in [
            ("tau2", tau2),
            ("kappa", kappa),
            ("t_scal", t_scal),
            ("T_scal", t_outer),
            ("T", decorrelation),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return invalid(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if !(t_scal < t_outer) {
            return invalid(format!(
                "empty temporal scaling range: need t_scal < T_scal, got {t_scal} >= {t_outer}"
            ));
        }
        if !(t_outer <= decorrelation) {
            return invalid(format!(
                "need T_scal <= T, got T_scal={t_outer}, T={decorrelation}"
            ));
        }
        Ok(Self {
            tau2,
            t_scal,
            t_outer,
            decorrelation,
            kappa,
        })
    }

    /// Outer spatial scale `L_scal = tau2 / (kappa t_scal)`.
    pub fn outer_length(&self) -> f64 {
        self.tau2 / (self.kappa * self.t_scal)
    }

    /// Inner spatial scale `l_scal = tau2 / (kappa T_scal)`.
    pub fn inner_length(&self) -> f64 {
        self.tau2 / (self.kappa * self.t_outer)
    }

    /// `tau2 / kappa`, the coefficient of every logarithmic overlap law.
    pub fn log_coefficient(&self) -> f64 {
        self.tau2 / self.kappa
    }
}

/// The half-width function `g` bounding `S0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmbitBoundary {
    spec: ScalingSpec,
}

impl AmbitBoundary {
    /// Build the boundary realizing scaling exponent `tau2` for `basis`.
    ///
    /// Rejects degenerate bases with `K[2] - 2K[1] = 0`, for which no finite
    /// ambit set produces a power law.
    pub fn build(tau2: f64, basis: &LevyBasis, t_scal: f64, t_outer: f64, decorrelation: f64) -> Result<Self> {
        let kappa = basis.kappa()?;
        if !(kappa > 0.0) {
            return invalid(format!(
                "cumulant gap K[2] - 2K[1] must be positive, got {kappa}"
            ));
        }
        Ok(Self::from_spec(ScalingSpec::new(
            tau2,
            kappa,
            t_scal,
            t_outer,
            decorrelation,
        )?))
    }

    pub fn from_spec(spec: ScalingSpec) -> Self {
        Self { spec }
    }

    pub fn spec(&self) -> &ScalingSpec {
        &self.spec
    }

    pub fn decorrelation_time(&self) -> f64 {
        self.spec.decorrelation
    }

    /// `L = 2 g(0)`.
    pub fn decorrelation_length(&self) -> f64 {
        2.0 * self.half_width(0.0)
    }

    /// Largest spatial separation with nonzero overlap at temporal lag `dt`.
    pub fn spatial_reach(&self, dt: f64) -> f64 {
        self.half_width(dt.abs()) + self.half_width(0.0)
    }

    /// `g(s)`; zero outside `[0, T]`.
    pub fn half_width(&self, s: f64) -> f64 {
        let sp = &self.spec;
        if !(s >= 0.0) || s >= sp.decorrelation {
            0.0
        } else if s <= sp.t_scal {
            0.5 * sp.outer_length()
        } else if s <= sp.t_outer {
            sp.tau2 / (2.0 * sp.kappa * s)
        } else {
            0.5 * sp.inner_length() * (sp.decorrelation - s) / (sp.decorrelation - sp.t_outer)
        }
    }

    /// Points where `g` is not smooth.
    fn kinks(&self) -> [f64; 3] {
        [self.spec.t_scal, self.spec.t_outer, self.spec.decorrelation]
    }

    /// Closed-form `Vol(S0) = (tau2/kappa)(1 + ln(T_scal/t_scal)) + (T - T_scal) l_scal / 2`.
    pub fn ambit_area(&self) -> f64 {
        let sp = &self.spec;
        sp.log_coefficient() * (1.0 + (sp.t_outer / sp.t_scal).ln())
            + (sp.decorrelation - sp.t_outer) * sp.inner_length() / 2.0
    }

    /// Area of `S(0,0) ∩ S(dx, dt)`, by adaptive quadrature over time of the
    /// intersection length of the two spatial intervals.
    pub fn overlap_volume(&self, dx: f64, dt: f64, quad_tol: f64) -> Result<f64> {
        let dx = dx.abs();
        let dt = dt.abs();
        let big_t = self.spec.decorrelation;
        if dt >= big_t || dx >= self.spatial_reach(dt) {
            return Ok(0.0);
        }
        // At slice s the later ambit has half-width g(s), the earlier g(s - dt) >= g(s).
        let length = |s: f64| {
            let near = self.half_width(s);
            let far = self.half_width(s - dt);
            (2.0 * near).min(near + far - dx).max(0.0)
        };
        let mut cuts: Vec<f64> = self.kinks().into_iter().chain(self.kinks().map(|k| k + dt)).collect();
        let base = breakpoints_within(dt, big_t, cuts.clone());
        for w in base.windows(2) {
            cuts.extend(scan_roots(
                |s| self.half_width(s) + self.half_width(s - dt) - dx,
                w[0],
                w[1],
                CROSSING_SCAN,
            ));
            cuts.extend(scan_roots(
                |s| self.half_width(s - dt) - self.half_width(s) - dx,
                w[0],
                w[1],
                CROSSING_SCAN,
            ));
        }
        let pts = breakpoints_within(dt, big_t, cuts);
        let (v, _) = integrate(length, &pts, quad_tol)?;
        Ok(v.max(0.0))
    }

    /// Spatial interval `[lo, hi]` of `S(p)` on the absolute time slice `t`,
    /// or `None` if the slice misses it.
    fn slice(&self, p: Point, t: f64) -> Option<(f64, f64)> {
        let w = self.half_width(t - p.t + self.spec.decorrelation);
        (w > 0.0).then(|| (p.x - w, p.x + w))
    }

    /// Time breakpoints of the coverage pattern of `points`: activity limits,
    /// the kinks of each `g`, and crossings of interval endpoints.
    pub(crate) fn sweep_breakpoints(&self, points: &[Point]) -> Vec<f64> {
        let big_t = self.spec.decorrelation;
        let lo = points.iter().map(|p| p.t).fold(f64::INFINITY, f64::min) - big_t;
        let hi = points.iter().map(|p| p.t).fold(f64::NEG_INFINITY, f64::max);
        let mut cuts: Vec<f64> = Vec::new();
        for p in points {
            let start = p.t - big_t;
            cuts.push(start);
            cuts.extend(self.kinks().map(|k| start + k));
        }
        let base = breakpoints_within(lo, hi, cuts.clone());
        let edge = |p: Point, sign: f64, t: f64| p.x + sign * self.half_width(t - p.t + big_t);
        for w in base.windows(2) {
            for (i, &p) in points.iter().enumerate() {
                for &q in &points[i + 1..] {
                    for sp in [-1.0, 1.0] {
                        for sq in [-1.0, 1.0] {
                            cuts.extend(scan_roots(
                                |t| edge(p, sp, t) - edge(q, sq, t),
                                w[0],
                                w[1],
                                CROSSING_SCAN,
                            ));
                        }
                    }
                }
            }
        }
        breakpoints_within(lo, hi, cuts)
    }

    /// Sweep every slice of the union of `S(points[i])`, calling `sink` with
    /// the set (bitmask) of ambit sets covering each elementary segment and its length.
    fn sweep_slice(&self, points: &[Point], t: f64, events: &mut Vec<(f64, usize, bool)>, mut sink: impl FnMut(u64, f64)) {
        events.clear();
        for (i, &p) in points.iter().enumerate() {
            if let Some((a, b)) = self.slice(p, t) {
                events.push((a, i, true));
                events.push((b, i, false));
            }
        }
        events.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut active = 0u64;
        let mut last = f64::NAN;
        for &(x, i, open) in events.iter() {
            if active != 0 && x > last {
                sink(active, x - last);
            }
            if open {
                active |= 1 << i;
            } else {
                active &= !(1 << i);
            }
            last = x;
        }
    }

    /// Areas of the regions covered by exactly the ambit sets in each subset,
    /// indexed by bitmask (entry 0 is unused). At most 16 points.
    pub fn subset_areas(&self, points: &[Point], quad_tol: f64) -> Result<Vec<f64>> {
        if points.is_empty() || points.len() > 16 {
            return invalid(format!(
                "subset areas need between 1 and 16 points, got {}",
                points.len()
            ));
        }
        let dim = 1usize << points.len();
        let pts = self.sweep_breakpoints(points);
        let mut events = Vec::with_capacity(2 * points.len());
        let r = integrate_vec(
            |t, out| {
                out.iter_mut().for_each(|v| *v = 0.0);
                self.sweep_slice(points, t, &mut events, |mask, len| out[mask as usize] += len);
            },
            dim,
            &pts,
            quad_tol,
        )?;
        Ok(r.value.into_iter().map(|v| v.max(0.0)).collect())
    }

    /// Coverage-weight profile of the union of `S(points[i])` with the given orders.
    pub fn multiplicity_profile(&self, points: &[Point], orders: &[u32], quad_tol: f64) -> Result<MultiplicityProfile> {
        if points.is_empty() || points.len() != orders.len() {
            return invalid(format!(
                "need equally many points and orders (at least one), got {} and {}",
                points.len(),
                orders.len()
            ));
        }
        if orders.contains(&0) {
            return invalid("orders must be positive integers");
        }
        // Coincident points contribute the same indicator; merge them.
        let mut merged: Vec<(Point, u32)> = Vec::new();
        for (&p, &n) in points.iter().zip(orders) {
            match merged.iter_mut().find(|(q, _)| *q == p) {
                Some((_, m)) => *m += n,
                None => merged.push((p, n)),
            }
        }
        if merged.len() > 64 {
            return invalid("at most 64 distinct points are supported");
        }
        let pts: Vec<Point> = merged.iter().map(|&(p, _)| p).collect();
        let ords: Vec<u32> = merged.iter().map(|&(_, n)| n).collect();
        let total: u32 = ords.iter().sum();
        let cuts = self.sweep_breakpoints(&pts);
        let mut events = Vec::with_capacity(2 * pts.len());
        let r = integrate_vec(
            |t, out| {
                out.iter_mut().for_each(|v| *v = 0.0);
                self.sweep_slice(&pts, t, &mut events, |mask, len| {
                    let mut w = 0u32;
                    let mut m = mask;
                    while m != 0 {
                        let i = m.trailing_zeros() as usize;
                        w += ords[i];
                        m &= m - 1;
                    }
                    out[w as usize - 1] += len;
                });
            },
            total as usize,
            &cuts,
            quad_tol,
        )?;
        let areas = r
            .value
            .into_iter()
            .enumerate()
            .filter(|&(_, a)| a > 0.0)
            .map(|(k, a)| (k as u32 + 1, a))
            .collect();
        Ok(MultiplicityProfile { areas })
    }

    /// Lattice stencil of `S0` for cell spacings `(dx, dt)`.
    pub fn ambit_mask(&self, dx: f64, dt: f64) -> Result<AmbitMask> {
        if !(dx.is_finite() && dx > 0.0 && dt.is_finite() && dt > 0.0) {
            return invalid(format!("mask spacings must be positive, got dx={dx}, dt={dt}"));
        }
        let big_t = self.spec.decorrelation;
        let mut half_counts = Vec::new();
        for j in 0.. {
            let s = big_t - (j as f64 + 0.5) * dt;
            if s < 0.0 {
                break;
            }
            let g = self.half_width(s);
            // Cell centre (i dx, -(j + 1/2) dt) lies in S0 iff |i| dx <= g.
            half_counts.push((g / dx * (1.0 + 1e-12)).floor() as usize);
        }
        Ok(AmbitMask { dx, dt, half_counts })
    }
}

/// Coverage weight -> area of the region covered with exactly that weight.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MultiplicityProfile {
    areas: BTreeMap<u32, f64>,
}

impl MultiplicityProfile {
    pub fn from_entries(entries: impl IntoIterator<Item = (u32, f64)>) -> Self {
        let mut areas = BTreeMap::new();
        for (w, a) in entries {
            *areas.entry(w).or_insert(0.0) += a;
        }
        Self { areas }
    }

    /// `(weight, area)` pairs with positive area, by increasing weight.
    pub fn entries(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.areas.iter().map(|(&w, &a)| (w, a))
    }

    pub fn area(&self, weight: u32) -> f64 {
        self.areas.get(&weight).copied().unwrap_or(0.0)
    }

    pub fn total_area(&self) -> f64 {
        self.areas.values().sum()
    }

    pub fn max_weight(&self) -> u32 {
        self.areas.keys().next_back().copied().unwrap_or(0)
    }
}

/// Discretized `S0`: row `j` holds the cells whose centres sit at time
/// `-(j + 1/2) dt`, spanning offsets `-half_counts[j] ..= half_counts[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbitMask {
    pub dx: f64,
    pub dt: f64,
    pub half_counts: Vec<usize>,
}

impl AmbitMask {
    /// Number of time rows.
    pub fn depth(&self) -> usize {
        self.half_counts.len()
    }

    pub fn cell_count(&self) -> usize {
        self.half_counts.iter().map(|&k| 2 * k + 1).sum()
    }

    /// `cell_count * dx * dt`, the lattice approximation of `Vol(S0)`.
    pub fn area(&self) -> f64 {
        self.cell_count() as f64 * self.dx * self.dt
    }

    pub fn max_half_count(&self) -> usize {
        self.half_counts.iter().copied().max().unwrap_or(0)
    }

    /// All `(i, j)` offsets of the stencil.
    pub fn offsets(&self) -> Vec<(i64, i64)> {
        self.half_counts
            .iter()
            .enumerate()
            .flat_map(|(j, &k)| (-(k as i64)..=k as i64).map(move |i| (i, j as i64)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_boundary() -> AmbitBoundary {
        let basis = LevyBasis::gaussian(0.0, 1.0).unwrap();
        AmbitBoundary::build(0.2, &basis, 0.01, 1.0, 1.2).unwrap()
    }

    /// Independent fine-grid midpoint Riemann sum of the overlap of two
    /// rasterized ambit sets, taken directly from the set definition.
    fn riemann_overlap(b: &AmbitBoundary, dx: f64, dt: f64, n: usize) -> f64 {
        let big_t = b.decorrelation_time();
        let h = big_t / n as f64;
        let mut total = 0.0;
        for k in 0..n {
            let t = -big_t + (k as f64 + 0.5) * h; // absolute time, S(0,0) occupies [-T, 0]
            let w1 = b.half_width(t + big_t);
            let w2 = b.half_width(t - dt + big_t);
            let lo = (-w1).max(dx - w2);
            let hi = w1.min(dx + w2);
            total += (hi - lo).max(0.0) * h;
        }
        total
    }

    #[test]
    fn default_geometry() {
        let b = default_boundary();
        let sp = b.spec();
        assert!((sp.outer_length() - 20.0).abs() < 1e-12);
        assert!((sp.inner_length() - 0.2).abs() < 1e-12);
        assert!((b.half_width(0.1) - 1.0).abs() < 1e-12);
        assert!((b.half_width(0.5) - 0.2).abs() < 1e-12);
        assert_eq!(b.half_width(1.2), 0.0);
        assert_eq!(b.half_width(1.5), 0.0);
        assert_eq!(b.half_width(-0.1), 0.0);
        assert!((b.half_width(0.01) - 10.0).abs() < 1e-12);
        assert!((b.half_width(1.0) - 0.1).abs() < 1e-12);
        assert!((b.decorrelation_length() - 20.0).abs() < 1e-12);
    }

    #[test]
    fn continuity_and_monotonicity() {
        let b = default_boundary();
        let sp = *b.spec();
        for &k in &[sp.t_scal, sp.t_outer] {
            assert!((b.half_width(k - 1e-12) - b.half_width(k + 1e-12)).abs() < 1e-8);
        }
        let mut prev = f64::INFINITY;
        for i in 0..=12_000 {
            let g = b.half_width(i as f64 * 1e-4);
            assert!(g <= prev + 1e-15);
            prev = g;
        }
    }

    #[test]
    fn empty_scaling_range_rejected() {
        let basis = LevyBasis::gaussian(0.0, 1.0).unwrap();
        assert!(AmbitBoundary::build(0.2, &basis, 1.0, 1.0, 1.2).is_err());
        assert!(AmbitBoundary::build(0.2, &basis, 0.01, 1.5, 1.2).is_err());
    }

    #[test]
    fn temporal_overlap_closed_form() {
        let b = default_boundary();
        let v = b.overlap_volume(0.0, 0.1, 1e-10).unwrap();
        let expected = 0.2 * 10f64.ln() + 0.02;
        assert!((v - expected).abs() < 1e-8, "{v} vs {expected}");
        assert!((expected - 0.48052).abs() < 1e-5);
        let raster = riemann_overlap(&b, 0.0, 0.1, 2_000_000);
        assert!((v - raster).abs() < 1e-4);
    }

    #[test]
    fn spatial_overlap_closed_form() {
        let b = default_boundary();
        for &dx in &[0.2, 1.0, 5.0, 19.0] {
            let v = b.overlap_volume(dx, 0.0, 1e-10).unwrap();
            let expected = 0.2 * (20.0 / dx).ln();
            assert!((v - expected).abs() < 1e-8, "dx={dx}: {v} vs {expected}");
        }
    }

    #[test]
    fn ambit_area_matches_quadrature() {
        let b = default_boundary();
        let v0 = b.overlap_volume(0.0, 0.0, 1e-10).unwrap();
        assert!((v0 - b.ambit_area()).abs() < 1e-8);
        assert!((v0 - 1.141034).abs() < 1e-6);
    }

    #[test]
    fn decorrelated_separations() {
        let b = default_boundary();
        assert_eq!(b.overlap_volume(3.0, 1.2, 1e-8).unwrap(), 0.0);
        assert_eq!(b.overlap_volume(0.0, 5.0, 1e-8).unwrap(), 0.0);
        assert_eq!(b.overlap_volume(20.0, 0.0, 1e-8).unwrap(), 0.0);
        // Just inside the reach the overlap is tiny but positive.
        assert!(b.overlap_volume(19.9, 0.0, 1e-10).unwrap() > 0.0);
    }

    #[test]
    fn overlap_is_monotone() {
        let b = default_boundary();
        let dxs: Vec<f64> = (0..12).map(|i| 0.05 * 1.8f64.powi(i)).collect();
        let dts: Vec<f64> = (0..12).map(|i| 0.002 * 1.75f64.powi(i)).collect();
        for &dt in &dts {
            let mut prev = f64::INFINITY;
            for &dx in &dxs {
                let v = b.overlap_volume(dx, dt, 1e-9).unwrap();
                assert!(v <= prev + 1e-8);
                prev = v;
            }
        }
        for &dx in &dxs {
            let mut prev = f64::INFINITY;
            for &dt in &dts {
                let v = b.overlap_volume(dx, dt, 1e-9).unwrap();
                assert!(v <= prev + 1e-8);
                prev = v;
            }
        }
    }

    #[test]
    fn mixed_overlap_against_raster() {
        let b = default_boundary();
        for &(dx, dt) in &[(0.5, 0.05), (3.0, 0.3), (0.1, 0.9), (12.0, 0.005), (0.15, 0.02)] {
            let v = b.overlap_volume(dx, dt, 1e-10).unwrap();
            let r = riemann_overlap(&b, dx, dt, 1_000_000);
            assert!((v - r).abs() < 1e-4f64.max(1e-3 * v), "({dx},{dt}): {v} vs {r}");
        }
    }

    #[test]
    fn single_point_profile() {
        let b = default_boundary();
        let p = b
            .multiplicity_profile(&[Point::new(0.3, -2.0)], &[1], 1e-9)
            .unwrap();
        assert_eq!(p.entries().count(), 1);
        assert!((p.area(1) - b.ambit_area()).abs() < 1e-7);
    }

    #[test]
    fn two_point_profile_is_inclusion_exclusion() {
        let b = default_boundary();
        for &dt in &[0.05, 0.4, 1.0] {
            let prof = b
                .multiplicity_profile(&[Point::new(0.0, 0.0), Point::new(0.0, dt)], &[1, 1], 1e-10)
                .unwrap();
            let v = b.overlap_volume(0.0, dt, 1e-10).unwrap();
            let vol = b.ambit_area();
            assert!((prof.area(2) - v).abs() < 1e-7);
            assert!((prof.area(1) - 2.0 * (vol - v)).abs() < 1e-7);
        }
    }

    #[test]
    fn coincident_points_are_merged() {
        let b = default_boundary();
        let p = Point::new(1.0, 0.5);
        let prof = b.multiplicity_profile(&[p, p], &[1, 2], 1e-9).unwrap();
        assert_eq!(prof.entries().count(), 1);
        assert!((prof.area(3) - b.ambit_area()).abs() < 1e-7);
    }

    #[test]
    fn profile_argument_errors() {
        let b = default_boundary();
        assert!(b.multiplicity_profile(&[], &[], 1e-8).is_err());
        assert!(b.multiplicity_profile(&[Point::new(0.0, 0.0)], &[1, 2], 1e-8).is_err());
        assert!(b.multiplicity_profile(&[Point::new(0.0, 0.0)], &[0], 1e-8).is_err());
    }

    #[test]
    fn mask_area_converges() {
        let b = default_boundary();
        let m = b.ambit_mask(0.005, 0.005).unwrap();
        let rel = (m.area() - b.ambit_area()).abs() / b.ambit_area();
        assert!(rel < 0.02, "relative mask error {rel}");
    }

    #[test]
    fn mask_shape() {
        let b = default_boundary();
        let m = b.ambit_mask(0.05, 0.05).unwrap();
        let offs = m.offsets();
        assert_eq!(offs.len(), m.cell_count());
        for &(i, j) in &offs {
            assert!(offs.contains(&(-i, j)));
        }
        assert_eq!(m.depth(), 24);
        assert!(b.ambit_mask(0.1, 1.2).unwrap().depth() <= 1);
        assert!(b.ambit_mask(0.1, 5.0).unwrap().depth() <= 1);
        assert!(b.ambit_mask(0.0, 0.1).is_err());
        assert!(b.ambit_mask(0.1, f64::NAN).is_err());
    }
}
