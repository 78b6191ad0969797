//! Estimators closing the loop between simulated fields and the closed forms:
//! empirical two-point correlators, coarse-grained moments and log-log fits.
//!
//! Every estimator computes one mean per realization; standard errors come
//! from the spread between realizations.

use serde::{Deserialize, Serialize};

use crate::ambit::ScalingSpec;
use crate::error::{invalid, Error, Result};
use crate::simulate::FieldRealization;

/// Share of a moment carried by the top 1% of samples above which the
/// estimate is flagged as tail dominated.
pub const TAIL_SHARE_LIMIT: f64 = 0.5;
const TAIL_SUBSAMPLE: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Spatial,
    Temporal,
}

impl Axis {
    pub fn spacing(self, field: &FieldRealization) -> f64 {
        match self {
            Axis::Spatial => field.dx,
            Axis::Temporal => field.dt,
        }
    }

    /// `[3 t_scal, T_scal / 3]` in time, `[3 l_scal, L_scal / 3]` in space.
    pub fn default_fit_range(self, spec: &ScalingSpec) -> (f64, f64) {
        match self {
            Axis::Temporal => (3.0 * spec.t_scal, spec.t_outer / 3.0),
            Axis::Spatial => (3.0 * spec.inner_length(), spec.outer_length() / 3.0),
        }
    }
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Axis::Spatial => "spatial",
            Axis::Temporal => "temporal",
        })
    }
}

/// Neumaier compensated sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::default();
        iter.into_iter().for_each(|v| s.add(v));
        s
    }
}

/// Mean of per-realization values and its standard error.
pub fn between_realizations(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::Estimation(format!(
            "standard errors need at least 2 realizations, got {}",
            values.len()
        )));
    }
    let n = values.len() as f64;
    let mean = values.iter().copied().collect::<CompensatedSum>().value() / n;
    let ss = values.iter().map(|v| (v - mean).powi(2)).collect::<CompensatedSum>().value();
    Ok((mean, (ss / (n - 1.0) / n).sqrt()))
}

/// Share of `sum(samples)` carried by the largest 1% of them.
pub fn top_share(samples: &mut [f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.sort_by(|a, b| b.total_cmp(a));
    let top = samples.len().div_ceil(100);
    let total: CompensatedSum = samples.iter().copied().collect();
    let head: CompensatedSum = samples[..top].iter().copied().collect();
    if total.value() > 0.0 {
        head.value() / total.value()
    } else {
        0.0
    }
}

/// Per-realization output of an estimator: one mean per lag or window and
/// a strided subsample of the summands for the tail diagnostic.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationMeans {
    pub means: Vec<f64>,
    pub tail_samples: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LagEstimate {
    pub lag: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub tail_share: f64,
}

impl LagEstimate {
    pub fn tail_dominated(&self) -> bool {
        self.tail_share > TAIL_SHARE_LIMIT
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub l: f64,
    pub n: u32,
    pub estimate: f64,
    pub stderr: f64,
    pub tail_share: f64,
}

impl MomentEstimate {
    pub fn tail_dominated(&self) -> bool {
        self.tail_share > TAIL_SHARE_LIMIT
    }
}

/// Sum with eight independent accumulators.
fn lane_sum(values: &[f64]) -> f64 {
    let mut lanes = [0.0; 8];
    let chunks = values.chunks_exact(8);
    let rest = chunks.remainder();
    for c in chunks {
        for (l, v) in lanes.iter_mut().zip(c) {
            *l += v;
        }
    }
    lanes.iter().sum::<f64>() + rest.iter().sum::<f64>()
}

struct Collector {
    sum: CompensatedSum,
    count: usize,
    stride: usize,
    tail: Vec<f64>,
}

impl Collector {
    fn new(expected: usize) -> Self {
        Self {
            sum: CompensatedSum::default(),
            count: 0,
            stride: (expected / TAIL_SUBSAMPLE).max(1),
            tail: Vec::new(),
        }
    }

    /// Add a block of summands: lane sums within, compensated across blocks.
    fn add_block(&mut self, block: &[f64]) {
        let first = (self.stride - self.count % self.stride) % self.stride;
        self.tail.extend(block.iter().skip(first).step_by(self.stride));
        self.sum.add(lane_sum(block));
        self.count += block.len();
    }

    fn mean(&self) -> f64 {
        self.sum.value() / self.count as f64
    }
}

fn finish_means(per_lag: Vec<Collector>) -> RealizationMeans {
    let means = per_lag.iter().map(Collector::mean).collect();
    let tail_samples = per_lag.into_iter().map(|c| c.tail).collect();
    RealizationMeans { means, tail_samples }
}

fn combine(samples: &[RealizationMeans], k: usize) -> Result<(f64, f64, f64)> {
    let means: Vec<f64> = samples.iter().map(|s| s.means[k]).collect();
    let (mean, se) = between_realizations(&means)?;
    let mut pooled: Vec<f64> = samples.iter().flat_map(|s| s.tail_samples[k].iter().copied()).collect();
    Ok((mean, se, top_share(&mut pooled)))
}

#[inline(always)]
fn integer_power(v: f64, n: u32) -> f64 {
    match n {
        1 => v,
        2 => v * v,
        3 => v * v * v,
        _ => v.powi(n as i32),
    }
}

/// `<eps^n1(p) eps^n2(p + lag)>` along one axis, lags in lattice cells.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPointEstimator {
    axis: Axis,
    lags: Vec<usize>,
    orders: (u32, u32),
    samples: Vec<RealizationMeans>,
}

impl TwoPointEstimator {
    pub fn new(axis: Axis, lags: Vec<usize>, orders: (u32, u32)) -> Result<Self> {
        if lags.is_empty() {
            return invalid("two-point estimation needs at least one lag");
        }
        if orders.0 == 0 || orders.1 == 0 {
            return invalid("two-point orders must be positive");
        }
        Ok(Self {
            axis,
            lags,
            orders,
            samples: Vec::new(),
        })
    }

    /// Per-lag means over one field.
    pub fn realization_means(&self, field: &FieldRealization) -> Result<RealizationMeans> {
        let (nx, nt) = (field.nx, field.nt);
        let (n1, n2) = self.orders;
        let extent = match self.axis {
            Axis::Spatial => nx,
            Axis::Temporal => nt,
        };
        if let Some(&bad) = self.lags.iter().find(|&&k| k >= extent) {
            return Err(Error::Estimation(format!(
                "{} lag of {bad} cells does not fit a grid of {extent}",
                self.axis
            )));
        }
        let mut out = Vec::with_capacity(self.lags.len());
        let mut block = vec![0.0; nx];
        for &k in &self.lags {
            let mut c = match self.axis {
                Axis::Spatial => Collector::new(nx * nt),
                Axis::Temporal => Collector::new(nx * (nt - k)),
            };
            match self.axis {
                Axis::Spatial => {
                    for it in 0..nt {
                        let row = field.row(it);
                        for (ix, b) in block.iter_mut().enumerate() {
                            *b = integer_power(row[ix], n1) * integer_power(row[(ix + k) % nx], n2);
                        }
                        c.add_block(&block);
                    }
                }
                Axis::Temporal => {
                    for it in 0..nt - k {
                        let (a, b) = (field.row(it), field.row(it + k));
                        for ((out, &u), &v) in block.iter_mut().zip(a).zip(b) {
                            *out = integer_power(u, n1) * integer_power(v, n2);
                        }
                        c.add_block(&block);
                    }
                }
            }
            out.push(c);
        }
        Ok(finish_means(out))
    }

    pub fn push(&mut self, means: RealizationMeans) {
        self.samples.push(means);
    }

    pub fn add(&mut self, field: &FieldRealization) -> Result<()> {
        let m = self.realization_means(field)?;
        self.push(m);
        Ok(())
    }

    /// Estimates in lag order; `spacing` converts cell lags to lengths or durations.
    pub fn finish(&self, spacing: f64) -> Result<Vec<LagEstimate>> {
        (0..self.lags.len())
            .map(|k| {
                let (estimate, stderr, tail_share) = combine(&self.samples, k)?;
                Ok(LagEstimate {
                    lag: self.lags[k] as f64 * spacing,
                    estimate,
                    stderr,
                    tail_share,
                })
            })
            .collect()
    }
}

/// Empirical two-point correlator over a stream of fields.
pub fn empirical_two_point<'a>(
    fields: impl IntoIterator<Item = &'a FieldRealization>,
    axis: Axis,
    lags: &[usize],
    orders: (u32, u32),
) -> Result<Vec<LagEstimate>> {
    let mut est = TwoPointEstimator::new(axis, lags.to_vec(), orders)?;
    let mut spacing = None;
    for f in fields {
        spacing.get_or_insert(axis.spacing(f));
        est.add(f)?;
    }
    est.finish(spacing.unwrap_or(1.0))
}

/// `M_n(l) = <((1/l) int_window eps)^n>` along one axis, windows in cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseMomentEstimator {
    axis: Axis,
    n: u32,
    windows: Vec<usize>,
    samples: Vec<RealizationMeans>,
}

impl CoarseMomentEstimator {
    pub fn new(axis: Axis, n: u32, windows: Vec<usize>) -> Result<Self> {
        if windows.is_empty() {
            return invalid("coarse moments need at least one window");
        }
        if n == 0 {
            return invalid("moment order must be positive");
        }
        if let Some(&w) = windows.iter().find(|&&w| w < 2) {
            return invalid(format!("windows must span at least 2 cells, got {w}"));
        }
        Ok(Self {
            axis,
            n,
            windows,
            samples: Vec::new(),
        })
    }

    pub fn realization_means(&self, field: &FieldRealization) -> Result<RealizationMeans> {
        let (nx, nt) = (field.nx, field.nt);
        let extent = match self.axis {
            Axis::Spatial => nx,
            Axis::Temporal => nt,
        };
        if let Some(&bad) = self.windows.iter().find(|&&w| w > extent) {
            return Err(Error::Estimation(format!(
                "{} window of {bad} cells exceeds the grid extent {extent}",
                self.axis
            )));
        }
        let mut out = Vec::with_capacity(self.windows.len());
        let mut block = vec![0.0; nx];
        for &w in &self.windows {
            let inv = 1.0 / w as f64;
            match self.axis {
                Axis::Spatial => {
                    let mut c = Collector::new(nx * nt);
                    let mut prefix = vec![0.0; nx + w];
                    for it in 0..nt {
                        let row = field.row(it);
                        for m in 0..nx + w - 1 {
                            prefix[m + 1] = prefix[m] + row[m % nx];
                        }
                        for (ix, b) in block.iter_mut().enumerate() {
                            *b = integer_power((prefix[ix + w] - prefix[ix]) * inv, self.n);
                        }
                        c.add_block(&block);
                    }
                    out.push(c);
                }
                Axis::Temporal => {
                    let mut c = Collector::new(nx * (nt + 1 - w));
                    let mut window = vec![0.0; nx];
                    for it in 0..nt {
                        for (s, &v) in window.iter_mut().zip(field.row(it)) {
                            *s += v;
                        }
                        if it >= w {
                            for (s, &v) in window.iter_mut().zip(field.row(it - w)) {
                                *s -= v;
                            }
                        }
                        if it + 1 >= w {
                            for (b, &s) in block.iter_mut().zip(&window) {
                                *b = integer_power(s * inv, self.n);
                            }
                            c.add_block(&block);
                        }
                    }
                    out.push(c);
                }
            }
        }
        Ok(finish_means(out))
    }

    pub fn push(&mut self, means: RealizationMeans) {
        self.samples.push(means);
    }

    pub fn add(&mut self, field: &FieldRealization) -> Result<()> {
        let m = self.realization_means(field)?;
        self.push(m);
        Ok(())
    }

    pub fn finish(&self, spacing: f64) -> Result<Vec<MomentEstimate>> {
        (0..self.windows.len())
            .map(|k| {
                let (estimate, stderr, tail_share) = combine(&self.samples, k)?;
                Ok(MomentEstimate {
                    l: self.windows[k] as f64 * spacing,
                    n: self.n,
                    estimate,
                    stderr,
                    tail_share,
                })
            })
            .collect()
    }
}

pub fn coarse_moments<'a>(
    fields: impl IntoIterator<Item = &'a FieldRealization>,
    axis: Axis,
    n: u32,
    windows: &[usize],
) -> Result<Vec<MomentEstimate>> {
    let mut est = CoarseMomentEstimator::new(axis, n, windows.to_vec())?;
    let mut spacing = None;
    for f in fields {
        spacing.get_or_insert(axis.spacing(f));
        est.add(f)?;
    }
    est.finish(spacing.unwrap_or(1.0))
}

/// Ordinary least squares of `ln value` on `ln lag`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_stderr: f64,
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

/// Fit `value = exp(intercept) lag^slope` to the points with `lag` in `range`.
pub fn fit_powerlaw(points: &[(f64, f64)], range: (f64, f64)) -> Result<PowerLawFit> {
    let (lo, hi) = range;
    if !(lo <= hi) {
        return invalid(format!("empty fit range [{lo}, {hi}]"));
    }
    let slack = 1e-9 * hi.abs().max(lo.abs());
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, &(lag, value)) in points.iter().enumerate() {
        if !(lag >= lo - slack && lag <= hi + slack) {
            continue;
        }
        if !(lag > 0.0) {
            return Err(Error::Estimation(format!("point {i} has nonpositive lag {lag}")));
        }
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::Estimation(format!(
                "point {i} has value {value}, its logarithm is undefined"
            )));
        }
        xs.push(lag.ln());
        ys.push(value.ln());
    }
    let n = xs.len();
    if n < 5 {
        return Err(Error::Estimation(format!(
            "a power-law fit needs at least 5 points in [{lo}, {hi}], got {n}"
        )));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Estimation("fit abscissae have zero variance".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) } else { 1.0 };
    Ok(PowerLawFit {
        slope,
        intercept,
        r_squared,
        slope_stderr: (ss_res / (nf - 2.0) / sxx).sqrt(),
        lo,
        hi,
        points: n,
    })
}
