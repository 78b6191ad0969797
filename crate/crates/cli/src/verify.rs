//! End-to-end verification: analytic identities, then simulation, estimation
//! and fitted exponents against their closed forms.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ambit_core::estimate::fit_powerlaw;
use ambit_core::exponents::{h_increment, mu_exponent, tau_exponent};
use ambit_core::{Axis, PowerLawFit};
use anyhow::Result;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::Plan;
use crate::output::{emit, num, Table};
use crate::pipeline::{self, Estimates, FieldSource};
use crate::tables;

pub const REPORT: &str = "report.json";
pub const SUMMARY: &str = "summary.txt";

/// Points of the closed-form geometry and slope checks.
const ANALYTIC_POINTS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl Check {
    fn absolute(name: impl Into<String>, value: f64, expected: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: (value - expected).abs() <= tolerance,
            value,
            expected,
            tolerance,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitRecord {
    pub series: String,
    pub axis: Axis,
    pub expected_slope: f64,
    #[serde(flatten)]
    pub fit: PowerLawFit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub document: Value,
    pub checks: Vec<Check>,
    pub files: Vec<PathBuf>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{} {:<34} value {:<22} expected {:<22} tol {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                num(c.value),
                num(c.expected),
                num(c.tolerance)
            );
        }
        if let Some(w) = self.document.pointer("/simulation/warnings").and_then(Value::as_array) {
            for w in w {
                let _ = writeln!(s, "warning: {}", w.as_str().unwrap_or_default());
            }
        }
        let _ = writeln!(
            s,
            "{} of {} checks passed{}",
            self.checks.len() - failed,
            self.checks.len(),
            if failed == 0 { "" } else { "; verification FAILED" }
        );
        s
    }
}

fn fit_check(name: String, fit: &PowerLawFit, expected: f64, relative: f64) -> Check {
    let tol = relative * expected.abs();
    Check {
        detail: format!(
            "slope {} +- {} over [{}, {}], {} points, r2 {}",
            num(fit.slope),
            num(fit.slope_stderr),
            num(fit.lo),
            num(fit.hi),
            fit.points,
            num(fit.r_squared)
        ),
        ..Check::absolute(name, fit.slope, expected, tol, "")
    }
}

/// Closed-form tables and analytic checks.
fn analytic(plan: &Plan, tables: &mut Vec<Table>, checks: &mut Vec<Check>) -> Result<Value> {
    let basis = &plan.basis;
    let tau2 = plan.tau2();
    let spec = *plan.boundary.spec();
    let tol = plan.config.verify.analytic_tolerance;
    let max_order = plan.config.estimate.max_order;
    let kappa = spec.kappa;
    let quad_tol = plan.model.quad_tol;

    tables.extend(tables::exponent_tables(plan, max_order));
    let pairs = tables::default_pairs(plan);
    tables.push(tables::volume_table(plan, &pairs)?);
    tables.push(tables::correlate_table(plan, &pairs, (1, 1))?);

    let taper = (spec.decorrelation - spec.t_outer) * spec.inner_length() / 2.0;
    let mut worst_t: f64 = 0.0;
    for dt in tables::log_grid(spec.t_scal, spec.t_outer, ANALYTIC_POINTS) {
        let closed = tau2 / kappa * (spec.t_outer / dt).ln() + taper;
        worst_t = worst_t.max((plan.boundary.overlap_volume(0.0, dt, quad_tol)? - closed).abs());
    }
    checks.push(Check::absolute(
        "geometry_temporal_closed_form",
        worst_t,
        0.0,
        1e-6,
        "max |V(0, dt) - closed form| over [t_scal, T_scal]",
    ));
    let mut worst_x: f64 = 0.0;
    for dx in tables::log_grid(spec.inner_length(), spec.outer_length(), ANALYTIC_POINTS) {
        let closed = tau2 / kappa * (spec.outer_length() / dx).ln();
        worst_x = worst_x.max((plan.boundary.overlap_volume(dx, 0.0, quad_tol)? - closed).abs());
    }
    checks.push(Check::absolute(
        "geometry_spatial_closed_form",
        worst_x,
        0.0,
        1e-6,
        "max |V(dx, 0) - closed form| over [l_scal, L_scal]",
    ));

    let tau11 = tau_exponent(basis, tau2, 1, 1)?;
    let mu2 = mu_exponent(basis, tau2, 2)?;
    let identity = (tau11 - tau2).abs().max((mu2 - tau2).abs());
    checks.push(Check::absolute("exponent_identities", identity, 0.0, 0.0, "tau(1,1) = mu(2) = tau2 exactly"));
    let mut worst_h: f64 = 0.0;
    let mut checked = 0;
    for n in 2..=max_order {
        let Ok(mu) = mu_exponent(basis, tau2, n) else { break };
        let sum: f64 = (2..=n).map(|k| h_increment(basis, tau2, k)).sum::<ambit_core::Result<f64>>()?;
        worst_h = worst_h.max((sum + mu).abs());
        checked = n;
    }
    checks.push(Check::absolute(
        "increment_sum",
        worst_h,
        0.0,
        1e-12,
        format!("sum_k h(k) = -mu(n) for n <= {checked}"),
    ));

    let mut fits = Vec::new();
    let mut fit_table = Table::new("analytic_fits", &["series", "slope", "intercept", "r2", "lo", "hi", "npoints"]);
    for axis in [Axis::Temporal, Axis::Spatial] {
        let (lo, hi) = plan.fit_range(axis);
        let points = tables::log_grid(lo, hi, 21)
            .into_iter()
            .map(|d| {
                let (dx, dt) = match axis {
                    Axis::Temporal => (0.0, d),
                    Axis::Spatial => (d, 0.0),
                };
                Ok((d, plan.model.two_point(dx, dt)?))
            })
            .collect::<ambit_core::Result<Vec<_>>>()?;
        let fit = fit_powerlaw(&points, (lo, hi))?;
        let name = format!("analytic_slope_{axis}");
        fit_table.push(fit_row(&name, &fit));
        checks.push(Check {
            detail: format!("closed-form two-point over [{}, {}]", num(lo), num(hi)),
            ..Check::absolute(name.clone(), fit.slope, -tau2, tol, "")
        });
        fits.push(FitRecord {
            series: name,
            axis,
            expected_slope: -tau2,
            fit,
        });
    }
    tables.push(fit_table);

    let table = ambit_core::ExponentTable::compute(basis, tau2, max_order);
    let critical = tables::critical_order(plan, max_order)
        .map(|(order, status)| json!({ "order": order, "status": status }));
    Ok(json!({
        "ambit_volume": plan.model.ambit_volume()?,
        "mean_field": plan.model.mean_field()?,
        "outer_length": spec.outer_length(),
        "inner_length": spec.inner_length(),
        "exponents": {
            "tau": table.tau.iter().map(|(a, b, v)| json!({ "n1": a, "n2": b, "tau": v })).collect::<Vec<_>>(),
            "mu": table.mu.iter().map(|(n, v, s)| json!({ "n": n, "mu": v, "condition": s })).collect::<Vec<_>>(),
            "critical_order": critical,
        },
        "fits": fits,
    }))
}

fn fit_row(series: &str, fit: &PowerLawFit) -> Vec<String> {
    vec![
        series.to_string(),
        num(fit.slope),
        num(fit.intercept),
        num(fit.r_squared),
        num(fit.lo),
        num(fit.hi),
        fit.points.to_string(),
    ]
}

/// Simulated ensemble, estimates, fits and checks.
fn simulation(plan: &Plan, est: &Estimates, tables: &mut Vec<Table>, checks: &mut Vec<Check>) -> Result<Value> {
    let v = &plan.config.verify;
    let basis = &plan.basis;
    let tau2 = plan.tau2();
    let mean_field = plan.model.mean_field()?;
    tables.push(est.mean_table(mean_field));
    tables.extend(est.tables());
    checks.push(Check {
        detail: format!("ensemble mean {} +- {}", num(est.mean), num(est.mean_stderr)),
        ..Check::absolute("mean_field", est.mean, mean_field, v.mean_sigmas * est.mean_stderr, "")
    });

    let mut fits = Vec::new();
    let mut fit_table = Table::new("fits", &["series", "slope", "intercept", "r2", "lo", "hi", "npoints"]);
    for s in &est.two_point {
        let expected = -tau_exponent(basis, tau2, s.orders.0, s.orders.1)?;
        let fit = fit_powerlaw(&s.points(), plan.fit_range(s.axis))?;
        fit_table.push(fit_row(&s.name(), &fit));
        checks.push(fit_check(format!("{}_slope", s.name()), &fit, expected, v.slope_tolerance));
        fits.push(FitRecord {
            series: s.name(),
            axis: s.axis,
            expected_slope: expected,
            fit,
        });
    }
    for s in &est.moments {
        if s.n == 1 {
            let worst = s
                .estimates
                .iter()
                .map(|e| (e.estimate - mean_field).abs() / e.stderr)
                .fold(0.0, f64::max);
            checks.push(Check::absolute(
                format!("{}_mean", s.name()),
                worst,
                0.0,
                v.mean_sigmas,
                "largest |M_1(l) - mean field| in standard errors",
            ));
            continue;
        }
        let expected = -mu_exponent(basis, tau2, s.n)?;
        let fit = fit_powerlaw(&s.points(), plan.fit_range(s.axis))?;
        fit_table.push(fit_row(&s.name(), &fit));
        checks.push(fit_check(format!("{}_slope", s.name()), &fit, expected, v.moment_tolerance));
        fits.push(FitRecord {
            series: s.name(),
            axis: s.axis,
            expected_slope: expected,
            fit,
        });
    }
    tables.push(fit_table);
    let burn_in = plan.lattice.burn_in_depth(&plan.boundary);
    Ok(json!({
        "lattice": {
            "dx": plan.lattice.dx,
            "dt": plan.lattice.dt,
            "nx": plan.lattice.nx,
            "nt": plan.lattice.nt,
            "burn_in": burn_in,
            "realizations": est.realizations,
            "mask_area": plan.boundary.ambit_mask(plan.lattice.dx, plan.lattice.dt)?.area(),
        },
        "mean": { "estimate": est.mean, "stderr": est.mean_stderr, "mean_field": mean_field },
        "fits": fits,
        "warnings": est.warnings(),
    }))
}

/// Run verification and write every table, `report.json` and `summary.txt`
/// into `out`.
pub fn run(plan: &Plan, out: &Path, analytic_only: bool) -> Result<Report> {
    let mut tables = Vec::new();
    let mut checks = Vec::new();
    let analytic = analytic(plan, &mut tables, &mut checks)?;
    let mut document = json!({
        "schema": crate::config::SCHEMA_VERSION,
        "config": plan.config,
        "analytic": analytic,
    });
    if !analytic_only {
        let est = pipeline::estimate(plan, FieldSource::Generate)?;
        document["simulation"] = simulation(plan, &est, &mut tables, &mut checks)?;
    }
    let mut files = emit(&tables, Some(out))?;
    let report_path = out.join(REPORT);
    let summary_path = out.join(SUMMARY);
    files.push(report_path.clone());
    files.push(summary_path.clone());
    let mut report = Report {
        document,
        checks,
        files,
    };
    let names: Vec<String> = report
        .files
        .iter()
        .map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default())
        .collect();
    report.document["checks"] = serde_json::to_value(&report.checks)?;
    report.document["passed"] = Value::Bool(report.passed());
    report.document["files"] = json!(names);
    std::fs::write(&report_path, serde_json::to_string_pretty(&report.document)? + "\n")?;
    std::fs::write(&summary_path, report.summary())?;
    Ok(report)
}
