//! Named presets comparing published designs with recomputed ones.
//!
//! Printed values are reported next to what this crate computes. Differences
//! are flagged, never asserted away.

use bec_design::de::{threshold_bisect, DEFAULT_BISECT_TOL};
use bec_design::ensemble::{Ensemble, Side};
use bec_design::optimizer::{min_leading_coefficient, solve_design, DesignProblem};
use bec_design::sdp::{SolveStatus, SolverSettings};
use serde::Serialize;

use crate::polyspec::parse_poly_spec;

/// Relative size of a printed/recomputed difference worth flagging.
pub const FLAG_TOL: f64 = 1e-3;

#[derive(Clone, Debug)]
pub struct EnsemblePreset {
    pub key: &'static str,
    pub rho: &'static str,
    pub lambda: &'static str,
    pub dv_max: usize,
    pub rate: f64,
    pub capacity: f64,
}

pub const QUADRATIC_KEY: &str = "quadratic-bound";

pub fn ensemble_presets() -> Vec<EnsemblePreset> {
    vec![
        EnsemblePreset {
            key: "rho-x4-dv5",
            rho: "x^4",
            lambda: "0.4393x + 0.2097x^2 + 0.0536x^3 + 0.2974x^4",
            dv_max: 5,
            rate: 0.421,
            capacity: 0.44,
        },
        EnsemblePreset {
            key: "rho-x5-dv7",
            rho: "x^5",
            lambda: "0.4021x + 0.2137x^2 + 0.3902x^6",
            dv_max: 7,
            rate: 0.4922,
            capacity: 0.51,
        },
        EnsemblePreset {
            key: "rho-x5x6-dv7",
            rho: "0.48555*x^5 + 0.51445*x^6",
            lambda: "0.4032x + 0.1512x^2 + 0.4454x^6",
            dv_max: 7,
            rate: 0.5267,
            capacity: 0.55,
        },
    ]
}

#[derive(Clone, Debug, Serialize)]
pub struct QuadraticReport {
    pub key: &'static str,
    pub published_a: f64,
    pub status: SolveStatus,
    pub a: Option<f64>,
    pub certificate_accepted: Option<bool>,
    /// `max_k -(x_k + 1) / x_k²` over a uniform grid on `(0, 1]`.
    pub grid_oracle: f64,
    pub flags: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EnsembleReport {
    pub key: &'static str,
    pub rho: String,
    pub published_lambda: String,
    pub published_lambda_sum: f64,
    pub published_rate: f64,
    pub published_capacity: f64,
    /// Rate of the published λ (rescaled to sum 1).
    pub recomputed_rate: f64,
    pub published_lambda_threshold: f64,
    pub max_threshold_status: SolveStatus,
    pub max_threshold_epsilon: Option<f64>,
    pub max_threshold_rate: Option<f64>,
    /// Max-rate design at `ε = 1 - published capacity`.
    pub max_rate_status: SolveStatus,
    pub max_rate_lambda: Option<String>,
    pub max_rate_rate: Option<f64>,
    pub max_rate_delta: Option<f64>,
    pub flags: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
#[serde(untagged)]
pub enum PresetReport {
    Quadratic(QuadraticReport),
    Ensemble(EnsembleReport),
}

pub fn preset_keys() -> Vec<&'static str> {
    std::iter::once(QUADRATIC_KEY)
        .chain(ensemble_presets().iter().map(|p| p.key))
        .collect()
}

fn grid_oracle(n: usize) -> f64 {
    (1..=n)
        .map(|k| {
            let x = k as f64 / n as f64;
            -(x + 1.0) / (x * x)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn run_quadratic(settings: &SolverSettings) -> bec_design::Result<QuadraticReport> {
    let out = min_leading_coefficient(1.0, 1.0).solve(settings)?;
    let oracle = grid_oracle(100_000);
    let a = (out.status == SolveStatus::Optimal).then(|| out.z[0]);
    let mut flags = vec!["published value maximizes a, which is unbounded; minimum reported".to_string()];
    if let Some(a) = a {
        if (a - oracle).abs() > 1e-6 {
            flags.push(format!("solver a = {a} differs from grid oracle {oracle}"));
        }
    }
    Ok(QuadraticReport {
        key: QUADRATIC_KEY,
        published_a: 1.0,
        status: out.status,
        a,
        certificate_accepted: out.certificate.map(|c| c.accepted),
        grid_oracle: oracle,
        flags,
    })
}

fn differs(printed: f64, computed: f64) -> bool {
    (printed - computed).abs() > FLAG_TOL * printed.abs().max(1.0)
}

pub fn run_ensemble(p: &EnsemblePreset, settings: &SolverSettings) -> anyhow::Result<EnsembleReport> {
    let rho = parse_poly_spec(p.rho, Side::Rho, false)?;
    let raw_sum: f64 = crate::polyspec::parse_terms(p.lambda)?.iter().map(|t| t.1).sum();
    let lambda = parse_poly_spec(p.lambda, Side::Lambda, true)?;
    let ens = Ensemble::new(lambda.clone(), rho.clone());
    let recomputed_rate = ens.rate();
    let threshold = threshold_bisect(&lambda.to_poly(), &rho.to_poly(), DEFAULT_BISECT_TOL);

    let a = solve_design(&DesignProblem::max_threshold(rho.clone(), p.dv_max), settings)?;
    let eps = 1.0 - p.capacity;
    let b = solve_design(&DesignProblem::max_rate(rho.clone(), p.dv_max, eps), settings)?;

    let mut flags = Vec::new();
    if (raw_sum - 1.0).abs() > 1e-6 {
        flags.push(format!("published lambda sums to {raw_sum:.4}"));
    }
    if differs(p.rate, recomputed_rate) {
        flags.push(format!(
            "published rate {} but published lambda gives {recomputed_rate:.4}",
            p.rate
        ));
    }
    if threshold < eps - FLAG_TOL {
        flags.push(format!("published lambda has threshold {threshold:.4} < {eps:.4}"));
    }
    if let Some(r) = b.rate.filter(|&r| differs(p.rate, r)) {
        flags.push(format!("max-rate design at epsilon {eps:.4} has rate {r:.4}"));
    }
    if let Some(e) = a.epsilon_used.filter(|&e| differs(eps, e)) {
        flags.push(format!("max-threshold design reaches epsilon {e:.4}"));
    }
    Ok(EnsembleReport {
        key: p.key,
        rho: p.rho.into(),
        published_lambda: p.lambda.into(),
        published_lambda_sum: raw_sum,
        published_rate: p.rate,
        published_capacity: p.capacity,
        recomputed_rate,
        published_lambda_threshold: threshold,
        max_threshold_status: a.solver_status,
        max_threshold_epsilon: a.epsilon_used,
        max_threshold_rate: a.rate,
        max_rate_status: b.solver_status,
        max_rate_lambda: b.lambda().map(|l| l.to_poly_string()),
        max_rate_rate: b.rate,
        max_rate_delta: b.delta,
        flags,
    })
}

/// Runs the named presets (all when `keys` is `None`).
pub fn run_presets(keys: Option<&[String]>, settings: &SolverSettings) -> anyhow::Result<Vec<PresetReport>> {
    let wanted = |k: &str| keys.map_or(true, |ks| ks.iter().any(|x| x == k));
    if let Some(ks) = keys {
        if let Some(bad) = ks.iter().find(|k| !preset_keys().contains(&k.as_str())) {
            return Err(crate::UsageError(format!(
                "unknown preset `{bad}`; known: {}",
                preset_keys().join(", ")
            ))
            .into());
        }
    }
    let mut out = Vec::new();
    if wanted(QUADRATIC_KEY) {
        out.push(PresetReport::Quadratic(run_quadratic(settings)?));
    }
    for p in ensemble_presets().iter().filter(|p| wanted(p.key)) {
        out.push(PresetReport::Ensemble(run_ensemble(p, settings)?));
    }
    Ok(out)
}

fn opt(v: Option<f64>) -> String {
    v.map_or("-".into(), |x| format!("{x:.4}"))
}

pub fn render_text(reports: &[PresetReport]) -> String {
    let mut s = String::new();
    for r in reports {
        match r {
            PresetReport::Quadratic(q) => {
                s += &format!("[{}] min a s.t. a x^2 + x + 1 >= 0 on [0, 1]\n", q.key);
                s += &format!("  published a        {}\n", q.published_a);
                s += &format!("  solver a           {} ({:?})\n", opt(q.a), q.status);
                s += &format!("  grid oracle        {:.4}\n", q.grid_oracle);
            }
            PresetReport::Ensemble(e) => {
                s += &format!("[{}] rho = {}\n", e.key, e.rho);
                s += &format!("  published lambda   {}\n", e.published_lambda);
                s += &format!("  published rate     {:.4}  recomputed {:.4}\n", e.published_rate, e.recomputed_rate);
                s += &format!("  published capacity {:.4}  lambda threshold {:.4}\n", e.published_capacity, e.published_lambda_threshold);
                s += &format!(
                    "  max-threshold      epsilon {}  rate {} ({:?})\n",
                    opt(e.max_threshold_epsilon),
                    opt(e.max_threshold_rate),
                    e.max_threshold_status
                );
                s += &format!(
                    "  max-rate           rate {}  delta {} ({:?})\n",
                    opt(e.max_rate_rate),
                    opt(e.max_rate_delta),
                    e.max_rate_status
                );
                if let Some(l) = &e.max_rate_lambda {
                    s += &format!("  max-rate lambda    {l}\n");
                }
            }
        }
        let flags = match r {
            PresetReport::Quadratic(q) => &q.flags,
            PresetReport::Ensemble(e) => &e.flags,
        };
        for f in flags {
            s += &format!("  ! {f}\n");
        }
    }
    s
}
