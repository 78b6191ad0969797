//! Field storage and the simulate-then-estimate pipeline.

use std::path::{Path, PathBuf};

use ambit_core::estimate::{between_realizations, CoarseMomentEstimator, RealizationMeans, TwoPointEstimator};
use ambit_core::{Axis, BasisKind, FieldRealization, LatticeConfig, Simulator};
use ambit_core::estimate::{LagEstimate, MomentEstimate};
use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Plan, ScalingTable};
use crate::output::{num, Table};

pub const SIDECAR: &str = "fields.json";

/// JSON header describing a directory of stored realizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub format: String,
    pub layout: String,
    pub nx: usize,
    pub nt: usize,
    pub dx: f64,
    pub dt: f64,
    pub burn_in: usize,
    pub seed: u64,
    pub realizations: usize,
    pub basis: BasisKind,
    pub scaling: ScalingTable,
    pub files: Vec<String>,
}

pub fn field_file_name(index: usize) -> String {
    format!("field_{index:05}.f64")
}

pub fn write_field(path: &Path, field: &FieldRealization) -> Result<()> {
    let mut bytes = Vec::with_capacity(field.values.len() * 8);
    for v in &field.values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub fn read_header(dir: &Path) -> Result<FieldHeader> {
    let path = dir.join(SIDECAR);
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn read_field(dir: &Path, header: &FieldHeader, index: usize) -> Result<FieldRealization> {
    let path = dir.join(&header.files[index]);
    let bytes = std::fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
    if bytes.len() != header.nx * header.nt * 8 {
        bail!(
            "{} holds {} bytes, expected {} for a {}x{} field",
            path.display(),
            bytes.len(),
            header.nx * header.nt * 8,
            header.nt,
            header.nx
        );
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok(FieldRealization {
        index,
        nx: header.nx,
        nt: header.nt,
        dx: header.dx,
        dt: header.dt,
        values,
    })
}

pub fn simulator(plan: &Plan) -> Result<Simulator<ambit_core::levy::CellSampler>> {
    Ok(Simulator::new(&plan.basis, &plan.boundary, plan.lattice)?)
}

/// Generate every realization into `dir` with its sidecar.
pub fn store_fields(plan: &Plan, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let sim = simulator(plan)?;
    let written: Vec<Result<PathBuf>> = sim.par_map(|f| {
        let path = dir.join(field_file_name(f.index));
        write_field(&path, &f)?;
        Ok(path)
    });
    let mut paths = written.into_iter().collect::<Result<Vec<_>>>()?;
    let header = header_for(plan, sim.burn_in());
    let sidecar = dir.join(SIDECAR);
    std::fs::write(&sidecar, serde_json::to_string_pretty(&header)?)?;
    paths.push(sidecar);
    Ok(paths)
}

pub fn header_for(plan: &Plan, burn_in: usize) -> FieldHeader {
    let LatticeConfig { nx, nt, dx, dt, seed, realizations, .. } = plan.lattice;
    FieldHeader {
        format: "f64-le".into(),
        layout: "row-major, t then x".into(),
        nx,
        nt,
        dx,
        dt,
        burn_in,
        seed,
        realizations,
        basis: plan.config.basis,
        scaling: plan.config.scaling,
        files: (0..realizations).map(field_file_name).collect(),
    }
}

/// Summary statistics of one realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSummary {
    pub mean: f64,
    pub log_mean: f64,
    pub log_var: f64,
    pub min: f64,
    pub max: f64,
}

pub fn summarize(field: &FieldRealization) -> FieldSummary {
    let n = field.values.len() as f64;
    let mut sum = 0.0;
    let mut log_sum = 0.0;
    let mut log_sq = 0.0;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in &field.values {
        sum += v;
        let l = v.ln();
        log_sum += l;
        log_sq += l * l;
        min = min.min(v);
        max = max.max(v);
    }
    let log_mean = log_sum / n;
    FieldSummary {
        mean: sum / n,
        log_mean,
        log_var: (log_sq / n - log_mean * log_mean).max(0.0) * n / (n - 1.0).max(1.0),
        min,
        max,
    }
}

/// `simulate --no-store`: one summary row per realization.
pub fn summary_table(plan: &Plan) -> Result<Table> {
    let sim = simulator(plan)?;
    let rows = sim.par_map(|f| summarize(&f));
    let mut t = Table::new("simulate_summary", &["realization", "mean", "log_mean", "log_var", "min", "max"]);
    for (i, s) in rows.iter().enumerate() {
        t.push(vec![i.to_string(), num(s.mean), num(s.log_mean), num(s.log_var), num(s.min), num(s.max)]);
    }
    Ok(t)
}

/// Where realizations come from.
pub enum FieldSource<'a> {
    /// Generated in-process from the plan.
    Generate,
    /// Read from a directory written by `simulate`.
    Stored { dir: &'a Path, header: &'a FieldHeader },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoPointSeries {
    pub axis: Axis,
    pub orders: (u32, u32),
    pub estimates: Vec<LagEstimate>,
}

impl TwoPointSeries {
    pub fn name(&self) -> String {
        format!("two_point_{}_{}_{}", self.axis, self.orders.0, self.orders.1)
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(&self.name(), &["lag", "estimate", "stderr"]);
        for e in &self.estimates {
            t.push(vec![num(e.lag), num(e.estimate), num(e.stderr)]);
        }
        t
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        self.estimates.iter().map(|e| (e.lag, e.estimate)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentSeries {
    pub axis: Axis,
    pub n: u32,
    pub estimates: Vec<MomentEstimate>,
}

impl MomentSeries {
    pub fn name(&self) -> String {
        format!("moments_{}_{}", self.axis, self.n)
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(&self.name(), &["l", "n", "Mn", "stderr"]);
        for e in &self.estimates {
            t.push(vec![num(e.l), e.n.to_string(), num(e.estimate), num(e.stderr)]);
        }
        t
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        self.estimates.iter().map(|e| (e.l, e.estimate)).collect()
    }
}

/// Everything estimated from one ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimates {
    pub realizations: usize,
    pub mean: f64,
    pub mean_stderr: f64,
    pub two_point: Vec<TwoPointSeries>,
    pub moments: Vec<MomentSeries>,
}

impl Estimates {
    pub fn mean_table(&self, mean_field: f64) -> Table {
        let mut t = Table::new("mean", &["estimate", "stderr", "mean_field"]);
        t.push(vec![num(self.mean), num(self.mean_stderr), num(mean_field)]);
        t
    }

    pub fn tables(&self) -> Vec<Table> {
        self.two_point
            .iter()
            .map(TwoPointSeries::table)
            .chain(self.moments.iter().map(MomentSeries::table))
            .collect()
    }

    /// Series whose tail diagnostic fired, with the offending lag or window.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        for s in &self.two_point {
            for e in s.estimates.iter().filter(|e| e.tail_dominated()) {
                out.push(format!(
                    "{}: at lag {} the top 1% of products carry {:.0}% of the sum",
                    s.name(),
                    num(e.lag),
                    100.0 * e.tail_share
                ));
            }
        }
        for s in &self.moments {
            for e in s.estimates.iter().filter(|e| e.tail_dominated()) {
                out.push(format!(
                    "{}: at window {} the top 1% of window powers carry {:.0}% of the sum",
                    s.name(),
                    num(e.l),
                    100.0 * e.tail_share
                ));
            }
        }
        out
    }
}

struct Bundle {
    mean: f64,
    two_point: Vec<RealizationMeans>,
    moments: Vec<RealizationMeans>,
}

/// Run every estimator of the plan over the ensemble.
pub fn estimate(plan: &Plan, source: FieldSource<'_>) -> Result<Estimates> {
    let est = &plan.config.estimate;
    let mut two_point = Vec::new();
    for &axis in &est.two_point_axes {
        for &[n1, n2] in &est.two_point_orders {
            two_point.push(TwoPointEstimator::new(axis, plan.lags(axis).to_vec(), (n1, n2))?);
        }
    }
    let mut moments = Vec::new();
    for &axis in &est.moment_axes {
        for &n in &est.moment_orders {
            moments.push(CoarseMomentEstimator::new(axis, n, plan.windows(axis).to_vec())?);
        }
    }
    let per_field = |f: FieldRealization| -> Result<Bundle> {
        let mean = f.values.iter().sum::<f64>() / f.values.len() as f64;
        Ok(Bundle {
            mean,
            two_point: two_point.iter().map(|e| e.realization_means(&f)).collect::<Result<_, _>>()?,
            moments: moments.iter().map(|e| e.realization_means(&f)).collect::<Result<_, _>>()?,
        })
    };
    let bundles: Vec<Result<Bundle>> = match source {
        FieldSource::Generate => simulator(plan)?.par_map(per_field),
        FieldSource::Stored { dir, header } => (0..header.realizations)
            .into_par_iter()
            .map(|i| per_field(read_field(dir, header, i)?))
            .collect(),
    };
    let bundles = bundles.into_iter().collect::<Result<Vec<_>>>()?;
    let means: Vec<f64> = bundles.iter().map(|b| b.mean).collect();
    let (mean, mean_stderr) = between_realizations(&means)?;
    for b in bundles {
        for (e, m) in two_point.iter_mut().zip(b.two_point) {
            e.push(m);
        }
        for (e, m) in moments.iter_mut().zip(b.moments) {
            e.push(m);
        }
    }
    let mut out = Estimates {
        realizations: means.len(),
        mean,
        mean_stderr,
        two_point: Vec::new(),
        moments: Vec::new(),
    };
    let mut tp = two_point.iter();
    for &axis in &est.two_point_axes {
        for &[n1, n2] in &est.two_point_orders {
            let e = tp.next().expect("one estimator per series");
            out.two_point.push(TwoPointSeries {
                axis,
                orders: (n1, n2),
                estimates: e.finish(plan.spacing(axis))?,
            });
        }
    }
    let mut mo = moments.iter();
    for &axis in &est.moment_axes {
        for &n in &est.moment_orders {
            let e = mo.next().expect("one estimator per series");
            out.moments.push(MomentSeries {
                axis,
                n,
                estimates: e.finish(plan.spacing(axis))?,
            });
        }
    }
    Ok(out)
}
