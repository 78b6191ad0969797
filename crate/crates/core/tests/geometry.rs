use std::collections::BTreeMap;

use ambit_core::{AmbitBoundary, LevyBasis, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TAU2: f64 = 0.2;
const T_SCAL: f64 = 0.01;
const T_OUTER: f64 = 1.0;
const BIG_T: f64 = 1.2;

fn boundary() -> AmbitBoundary {
    let basis = LevyBasis::gaussian(0.0, 1.0).unwrap();
    AmbitBoundary::build(TAU2, &basis, T_SCAL, T_OUTER, BIG_T).unwrap()
}

/// Half-width written out from the construction, kappa = 1.
fn g(s: f64) -> f64 {
    let l_inner = TAU2 / T_OUTER;
    if !(0.0..=BIG_T).contains(&s) {
        0.0
    } else if s <= T_SCAL {
        TAU2 / T_SCAL / 2.0
    } else if s <= T_OUTER {
        TAU2 / (2.0 * s)
    } else {
        l_inner / 2.0 * (BIG_T - s) / (BIG_T - T_OUTER)
    }
}

/// Row edges in `s` graded to the three pieces of `g`: 10% plateau,
/// 80% geometric over the hyperbola, 10% taper.
fn graded_rows(rows: usize) -> Vec<f64> {
    let (a, c) = (rows / 10, rows / 10);
    let b = rows - a - c;
    let mut edges: Vec<f64> = (0..a).map(|i| T_SCAL * i as f64 / a as f64).collect();
    edges.extend((0..b).map(|i| T_SCAL * (T_OUTER / T_SCAL).powf(i as f64 / b as f64)));
    edges.extend((0..=c).map(|i| T_OUTER + (BIG_T - T_OUTER) * i as f64 / c as f64));
    edges
}

/// Rasterized coverage profile: `rows` graded rows per point (merged), and
/// `cols` cells across the hull of each row.
fn raster_profile(points: &[Point], orders: &[u32], rows: usize, cols: usize) -> BTreeMap<u32, f64> {
    let mut edges: Vec<f64> = points
        .iter()
        .flat_map(|p| graded_rows(rows).into_iter().map(move |s| p.t - BIG_T + s))
        .collect();
    edges.sort_by(|a, b| a.total_cmp(b));
    edges.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
    let mut out = BTreeMap::new();
    for w in edges.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let t = 0.5 * (t0 + t1);
        let spans: Vec<(f64, f64)> = points
            .iter()
            .map(|p| {
                let half = g(t - p.t + BIG_T);
                (p.x - half, p.x + half)
            })
            .collect();
        let live: Vec<&(f64, f64)> = spans.iter().filter(|s| s.1 > s.0).collect();
        if live.is_empty() {
            continue;
        }
        let lo = live.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
        let hi = live.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
        let hx = (hi - lo) / cols as f64;
        for k in 0..cols {
            let x = lo + (k as f64 + 0.5) * hx;
            let weight: u32 = spans
                .iter()
                .zip(orders)
                .filter(|(s, _)| x >= s.0 && x <= s.1)
                .map(|(_, &n)| n)
                .sum();
            if weight > 0 {
                *out.entry(weight).or_insert(0.0) += hx * (t1 - t0);
            }
        }
    }
    out
}

#[test]
fn seven_region_decomposition() {
    let b = boundary();
    let pts = [Point::new(0.0, 0.0), Point::new(2.0, 0.0), Point::new(5.0, 0.0)];
    let orders = [1, 2, 4];
    let prof = b.multiplicity_profile(&pts, &orders, 1e-10).unwrap();
    let raster = raster_profile(&pts, &orders, 2000, 2000);
    for w in 1..=7 {
        let a = prof.area(w);
        let r = raster.get(&w).copied().unwrap_or(0.0);
        if w == 5 {
            // Sets 1 and 3 never meet outside set 2.
            assert_eq!(a, 0.0);
            assert_eq!(r, 0.0);
            continue;
        }
        assert!((a - r).abs() <= 1e-3 * a, "weight {w}: {a} vs raster {r}");
    }
    // Inclusion-exclusion with spatial overlaps V(d) = tau2 ln(L_scal / d).
    let v = |d: f64| TAU2 * (20.0 / d).ln();
    let vol = b.ambit_area();
    let expected = [
        (1, vol - v(2.0)),
        (2, vol - v(2.0) - v(3.0) + v(5.0)),
        (4, vol - v(3.0)),
        (3, v(2.0) - v(5.0)),
        (6, v(3.0) - v(5.0)),
        (7, v(5.0)),
    ];
    for (w, e) in expected {
        assert!((prof.area(w) - e).abs() < 1e-7, "weight {w}: {} vs {e}", prof.area(w));
    }
    let union = 3.0 * vol - v(2.0) - v(3.0);
    assert!((prof.total_area() - union).abs() < 1e-7);
}

#[test]
fn random_profiles_match_raster_union() {
    let b = boundary();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let pts: Vec<Point> = (0..3)
            .map(|_| Point::new(rng.random_range(-3.0..3.0), rng.random_range(-0.8..0.0)))
            .collect();
        let orders: Vec<u32> = (0..3).map(|_| rng.random_range(1..=3)).collect();
        let prof = b.multiplicity_profile(&pts, &orders, 1e-10).unwrap();
        let raster: f64 = raster_profile(&pts, &orders, 2000, 2000).values().sum();
        let total = prof.total_area();
        assert!((total - raster).abs() <= 1e-3 * total, "{pts:?}: {total} vs {raster}");
        let weighted: f64 = prof.entries().map(|(w, a)| w as f64 * a).sum();
        let expected: f64 = orders.iter().map(|&n| n as f64 * b.ambit_area()).sum();
        assert!((weighted - expected).abs() < 1e-7);
    }
}

#[test]
fn overlap_matches_raster_on_random_pairs() {
    let b = boundary();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let dx = 15.0 * rng.random::<f64>().powi(3);
        let dt = 1.1 * rng.random::<f64>().powi(2);
        let v = b.overlap_volume(dx, dt, 1e-10).unwrap();
        let pts = [Point::new(0.0, 0.0), Point::new(dx, dt)];
        let r = raster_profile(&pts, &[1, 1], 1000, 2000).get(&2).copied().unwrap_or(0.0);
        assert!((v - r).abs() <= 1e-4f64.max(1e-3 * v), "({dx}, {dt}): {v} vs {r}");
    }
}

#[test]
fn overlap_closed_forms_over_scaling_range() {
    let b = boundary();
    for i in 0..50 {
        let dt = T_SCAL * (T_OUTER / T_SCAL).powf(i as f64 / 49.0);
        let v = b.overlap_volume(0.0, dt, 1e-10).unwrap();
        let e = TAU2 * (T_OUTER / dt).ln() + (BIG_T - T_OUTER) * 0.2 / 2.0;
        assert!((v - e).abs() < 1e-6, "dt={dt}");
        let dx = 0.2 * 100f64.powf(i as f64 / 49.0);
        let v = b.overlap_volume(dx, 0.0, 1e-10).unwrap();
        assert!((v - TAU2 * (20.0 / dx).ln()).abs() < 1e-6, "dx={dx}");
    }
}
