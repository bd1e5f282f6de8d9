//! Rendering of results as text, JSON and flat CSV.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use bec_design::de::{de_trajectory, DEFAULT_MAX_ITER, DEFAULT_TOL};
use bec_design::ensemble::{DegreeConvention, DegreeDistribution};
use bec_design::optimizer::DesignResult;
use serde::Serialize;
use serde_json::Value;

use crate::table::convention_name;

/// Points on `[0, 1]` in the emitted constraint curve.
pub const CURVE_POINTS: usize = 1000;

pub fn to_json<T: Serialize>(v: &T) -> anyhow::Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

/// Two-column `field,value` CSV with dotted paths for nested JSON.
pub fn to_flat_csv<T: Serialize>(v: &T) -> anyhow::Result<String> {
    fn walk(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
        let key = |k: &str| {
            if prefix.is_empty() {
                k.to_string()
            } else {
                format!("{prefix}.{k}")
            }
        };
        match v {
            Value::Object(m) => m.iter().for_each(|(k, v)| walk(&key(k), v, out)),
            Value::Array(a) => a.iter().enumerate().for_each(|(i, v)| walk(&key(&i.to_string()), v, out)),
            Value::Null => out.push((prefix.to_string(), String::new())),
            Value::String(s) => out.push((prefix.to_string(), s.clone())),
            other => out.push((prefix.to_string(), other.to_string())),
        }
    }
    let mut rows = Vec::new();
    walk("", &serde_json::to_value(v)?, &mut rows);
    let mut wr = csv::Writer::from_writer(Vec::new());
    wr.write_record(["field", "value"])?;
    for (k, v) in rows {
        wr.write_record([k, v])?;
    }
    Ok(String::from_utf8(wr.into_inner()?)?)
}

fn fmt_opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.prec$}"))
}

pub fn distribution_lines(d: &DegreeDistribution<f64>, convention: DegreeConvention) -> String {
    let mut s = String::new();
    for (&deg, &f) in d.coeffs() {
        let _ = writeln!(s, "    {:>4}  {f:.6}", convention.display(deg));
    }
    s
}

pub fn design_summary(r: &DesignResult, convention: DegreeConvention) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "mode        {:?} ({:?})", r.mode, r.method);
    let _ = writeln!(s, "status      {:?}", r.solver_status);
    let _ = writeln!(s, "fixed       {} = {}", r.fixed_side.side(), r.fixed_side.to_poly_string());
    if let Some(free) = &r.free_side {
        let _ = writeln!(s, "free        {} by {}:", free.side(), convention_name(convention));
        s += &distribution_lines(free, convention);
    }
    if let Some(t) = r.t_star {
        let _ = writeln!(s, "t*          {t:.10}");
    }
    let _ = writeln!(s, "epsilon     {}", fmt_opt(r.epsilon_used, 6));
    let _ = writeln!(s, "rate        {}", fmt_opt(r.rate, 6));
    let _ = writeln!(s, "delta       {}", fmt_opt(r.delta, 6));
    if let Some(c) = &r.certificate {
        let _ = writeln!(
            s,
            "certificate q={} residual={:.3e} min_eig={:.3e} accepted={}",
            c.q, c.reconstruction_residual, c.min_eigenvalue, c.accepted
        );
    }
    if let Some(de) = &r.de_verification {
        let _ = writeln!(
            s,
            "de          at {:.4}: converged={} final={:.3e} iterations={}",
            de.epsilon_tested, de.converged, de.final_erasure, de.iterations_used
        );
        let _ = writeln!(s, "            threshold {:.6}, grid min {:.3e}", de.threshold_estimate, de.grid_min);
    }
    let _ = writeln!(s, "solver      {} iterations, gap {:.3e}", r.solver_iterations, r.solver_gap);
    if let Some(n) = r.grid_size {
        let _ = writeln!(s, "grid        {n}");
    }
    s
}

/// Writes `constraint.csv` (`x`, `q`) and `de_trajectory.csv`
/// (`iteration`, `erasure`) into `dir`.
pub fn write_curves(
    dir: &Path,
    constraint: impl Fn(f64) -> f64,
    lambda: &DegreeDistribution<f64>,
    rho: &DegreeDistribution<f64>,
    epsilon: f64,
) -> anyhow::Result<()> {
    fs::create_dir_all(dir)?;
    let mut wr = csv::Writer::from_path(dir.join("constraint.csv"))?;
    wr.write_record(["x", "q"])?;
    for k in 0..=CURVE_POINTS {
        let x = k as f64 / CURVE_POINTS as f64;
        wr.write_record([x.to_string(), constraint(x).to_string()])?;
    }
    wr.flush()?;
    let traj = de_trajectory(epsilon, &lambda.to_poly(), &rho.to_poly(), DEFAULT_MAX_ITER, DEFAULT_TOL);
    let mut wr = csv::Writer::from_path(dir.join("de_trajectory.csv"))?;
    wr.write_record(["iteration", "erasure"])?;
    for (i, x) in traj.iter().enumerate() {
        wr.write_record([i.to_string(), x.to_string()])?;
    }
    wr.flush()?;
    Ok(())
}
