use std::fs;
use std::io::Write;

use anyhow::Context;
use bec_design::de::{threshold_bisect, DeReport, DEFAULT_BISECT_TOL};
use bec_design::ensemble::{capacity_gap, DegreeConvention, DegreeDistribution, Ensemble, Side};
use bec_design::optimizer::{
    de_confirms, solve_baseline_lp, solve_design, DesignMode, DesignProblem, DesignResult, Method, DE_MARGIN,
    GRID_TOL, VERIFY_GRID,
};
use bec_design::sdp::SolveStatus;
use bec_design::Error as CoreError;
use serde::Serialize;

use crate::config::{Command, Format, RunConfig};
use crate::polyspec::parse_poly_spec;
use crate::report::{design_summary, to_flat_csv, to_json, write_curves};
use crate::{presets, table, UsageError, EXIT_FAILURE, EXIT_OK};

pub fn run(config: &RunConfig) -> anyhow::Result<i32> {
    match config.command {
        Command::Optimize => cmd_optimize(config),
        Command::Verify => cmd_verify(config),
        Command::Threshold => cmd_threshold(config),
        Command::Table => cmd_table(config),
        Command::Examples => cmd_examples(config),
    }
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Configuration-type core errors become usage errors.
fn core_err(e: CoreError) -> anyhow::Error {
    match e {
        CoreError::Config(_) | CoreError::InvalidChannel(_) | CoreError::InvalidDistribution(_) => usage(e.to_string()),
        other => other.into(),
    }
}

fn side_arg(config: &RunConfig, side: Side) -> anyhow::Result<DegreeDistribution<f64>> {
    let (flag, value) = match side {
        Side::Lambda => ("--lambda", &config.problem.lambda),
        Side::Rho => ("--rho", &config.problem.rho),
    };
    let s = value.as_deref().ok_or_else(|| usage(format!("{flag} is required")))?;
    parse_poly_spec(s, side, config.problem.renormalize).map_err(|e| usage(format!("{flag}: {e}")))
}

fn convention(config: &RunConfig) -> DegreeConvention {
    config.convention.into()
}

/// Builds the design problem described by the flags.
pub fn design_problem(config: &RunConfig) -> anyhow::Result<DesignProblem> {
    let mode: DesignMode = config.problem.mode.ok_or_else(|| usage("--mode is required"))?.into();
    let conv = convention(config);
    let (fixed, max_flag, max) = match mode {
        DesignMode::MinCheckAverage => (side_arg(config, Side::Lambda)?, "--dc-max", config.problem.dc_max),
        _ => (side_arg(config, Side::Rho)?, "--dv-max", config.problem.dv_max),
    };
    let max = max.ok_or_else(|| usage(format!("{max_flag} is required")))?;
    let problem = DesignProblem {
        mode,
        fixed_side: fixed,
        max_free_degree: conv.to_node_degree(max),
        epsilon: config.problem.epsilon,
        grid_size: config.problem.grid,
    };
    problem.validate().map_err(core_err)?;
    if config.problem.method == crate::config::MethodArg::GridLp && problem.grid_size < 2 {
        return Err(usage("--grid must be at least 2"));
    }
    Ok(problem)
}

/// Writes `body` to `--out` or stdout. When the body went to a file, or is
/// not text, `summary` is printed on stdout or stderr respectively.
fn emit(config: &RunConfig, body: &str, summary: Option<&str>) -> anyhow::Result<()> {
    match &config.output.out {
        Some(path) => {
            fs::write(path, body).with_context(|| format!("writing {}", path.display()))?;
            if let Some(s) = summary {
                print!("{s}");
            }
        }
        None => {
            std::io::stdout().write_all(body.as_bytes())?;
            if let Some(s) = summary.filter(|_| config.output.format != Format::Text) {
                eprint!("{s}");
            }
        }
    }
    Ok(())
}

fn render<T: Serialize>(config: &RunConfig, value: &T, text: &str) -> anyhow::Result<String> {
    match config.output.format {
        Format::Json => to_json(value),
        Format::Csv => to_flat_csv(value),
        Format::Text => Ok(text.to_string()),
    }
}

pub fn cmd_optimize(config: &RunConfig) -> anyhow::Result<i32> {
    let problem = design_problem(config)?;
    let settings = config.solver.settings();
    let method: Method = config.problem.method.into();
    let result = match method {
        Method::Sdp => solve_design(&problem, &settings),
        Method::GridLp => solve_baseline_lp(&problem, &settings),
    }
    .map_err(core_err)?;
    let summary = design_summary(&result, convention(config));
    emit(config, &render(config, &result, &summary)?, Some(&summary))?;
    if let (Some(dir), Some(ens), Some(eps)) = (&config.output.emit_curves, result.ensemble(), result.epsilon_used) {
        write_curves(
            dir,
            |x| result.constraint_value(x).unwrap_or(f64::NAN),
            &ens.lambda,
            &ens.rho,
            eps - DE_MARGIN,
        )?;
    }
    if result.solver_status == SolveStatus::Optimal {
        Ok(EXIT_OK)
    } else {
        eprintln!("solver finished with status {:?}", result.solver_status);
        Ok(EXIT_FAILURE)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub lambda: DegreeDistribution<f64>,
    pub rho: DegreeDistribution<f64>,
    pub epsilon: f64,
    pub rate: f64,
    pub delta: Option<f64>,
    /// `ε λ₂ ρ'(1)`, at most 1 for a decodable ensemble.
    pub stability: f64,
    pub certificate_accepted: Option<bool>,
    pub de: DeReport,
    pub passed: bool,
}

fn verify_text(r: &VerifyReport) -> String {
    format!(
        "lambda      {}\nrho         {}\nepsilon     {:.6}\nrate        {:.6}\ndelta       {}\nstability   {:.6}\n\
         de          converged={} final={:.3e} iterations={}\nthreshold   {:.6}\ngrid min    {:.3e}\ncertificate {}\n{}\n",
        r.lambda.to_poly_string(),
        r.rho.to_poly_string(),
        r.epsilon,
        r.rate,
        r.delta.map_or("-".into(), |d| format!("{d:.6}")),
        r.stability,
        r.de.converged,
        r.de.final_erasure,
        r.de.iterations_used,
        r.de.threshold_estimate,
        r.de.grid_min,
        r.certificate_accepted.map_or("-".into(), |a| a.to_string()),
        if r.passed { "PASS" } else { "FAIL" },
    )
}

fn stability(lambda: &DegreeDistribution<f64>, rho: &DegreeDistribution<f64>, epsilon: f64) -> f64 {
    epsilon * lambda.fraction(2) * rho.derivative_at_one()
}

pub fn cmd_verify(config: &RunConfig) -> anyhow::Result<i32> {
    let report = match &config.input {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let mut result: DesignResult =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            let ens = result.ensemble().ok_or_else(|| usage("the saved result has no design"))?;
            let eps = config
                .problem
                .epsilon
                .or(result.epsilon_used)
                .ok_or_else(|| usage("the saved result has no epsilon"))?;
            result.epsilon_used = Some(eps);
            let de = DeReport::run(
                &ens.lambda.to_poly(),
                &ens.rho.to_poly(),
                eps - DE_MARGIN,
                |x| result.constraint_value(x).unwrap_or(f64::NAN),
                VERIFY_GRID,
            );
            result.de_verification = Some(de.clone());
            let accepted = result.certificate.as_ref().map(|c| c.accepted);
            VerifyReport {
                stability: stability(&ens.lambda, &ens.rho, eps),
                rate: ens.rate(),
                delta: capacity_gap(ens.rate(), eps).ok(),
                lambda: ens.lambda,
                rho: ens.rho,
                epsilon: eps,
                certificate_accepted: accepted,
                passed: de_confirms(&result) && accepted != Some(false),
                de,
            }
        }
        None => {
            let lambda = side_arg(config, Side::Lambda)?;
            let rho = side_arg(config, Side::Rho)?;
            let eps = config.problem.epsilon.ok_or_else(|| usage("--epsilon is required"))?;
            if !(eps > 0.0 && eps < 1.0) {
                return Err(usage(format!("--epsilon {eps} outside (0, 1)")));
            }
            let (lp, rp) = (lambda.to_poly(), rho.to_poly());
            let de = DeReport::run(&lp, &rp, eps, |x| x / eps - lp.eval(1.0 - rp.eval(1.0 - x)), VERIFY_GRID);
            let rate = Ensemble::new(lambda.clone(), rho.clone()).rate();
            VerifyReport {
                stability: stability(&lambda, &rho, eps),
                rate,
                delta: capacity_gap(rate, eps).ok(),
                passed: de.converged && de.grid_min >= -GRID_TOL,
                lambda,
                rho,
                epsilon: eps,
                certificate_accepted: None,
                de,
            }
        }
    };
    let text = verify_text(&report);
    emit(config, &render(config, &report, &text)?, Some(&text))?;
    if let Some(dir) = &config.output.emit_curves {
        let (lp, rp) = (report.lambda.to_poly(), report.rho.to_poly());
        let eps = report.epsilon;
        write_curves(dir, |x| x / eps - lp.eval(1.0 - rp.eval(1.0 - x)), &report.lambda, &report.rho, report.de.epsilon_tested)?;
    }
    Ok(if report.passed { EXIT_OK } else { EXIT_FAILURE })
}

#[derive(Clone, Debug, Serialize)]
pub struct ThresholdReport {
    pub lambda: DegreeDistribution<f64>,
    pub rho: DegreeDistribution<f64>,
    pub threshold: f64,
    pub rate: f64,
    /// Capacity gap at the threshold.
    pub delta: Option<f64>,
    /// `1 / (λ₂ ρ'(1))`, the largest ε allowed by stability at the origin.
    pub stability_limit: Option<f64>,
}

pub fn cmd_threshold(config: &RunConfig) -> anyhow::Result<i32> {
    let lambda = side_arg(config, Side::Lambda)?;
    let rho = side_arg(config, Side::Rho)?;
    let (lp, rp) = (lambda.to_poly(), rho.to_poly());
    let threshold = threshold_bisect(&lp, &rp, DEFAULT_BISECT_TOL);
    let rate = Ensemble::new(lambda.clone(), rho.clone()).rate();
    let slope = lambda.fraction(2) * rho.derivative_at_one();
    let report = ThresholdReport {
        threshold,
        rate,
        delta: capacity_gap(rate, threshold).ok(),
        stability_limit: (slope > 0.0).then(|| 1.0 / slope),
        lambda,
        rho,
    };
    let text = format!(
        "lambda      {}\nrho         {}\nthreshold   {:.6}\nrate        {:.6}\ndelta       {}\nstability   {}\n",
        report.lambda.to_poly_string(),
        report.rho.to_poly_string(),
        report.threshold,
        report.rate,
        report.delta.map_or("-".into(), |d| format!("{d:.6}")),
        report.stability_limit.map_or("-".into(), |s| format!("{s:.6}")),
    );
    emit(config, &render(config, &report, &text)?, Some(&text))?;
    if let Some(dir) = &config.output.emit_curves {
        let eps = threshold.max(f64::MIN_POSITIVE);
        write_curves(
            dir,
            |x| x / eps - lp.eval(1.0 - rp.eval(1.0 - x)),
            &report.lambda,
            &report.rho,
            (threshold - DE_MARGIN).max(0.0),
        )?;
    }
    Ok(EXIT_OK)
}

pub fn cmd_table(config: &RunConfig) -> anyhow::Result<i32> {
    let keys = config.selection();
    let conv = convention(config);
    let (cols, live) = table::build_table(keys.as_deref(), conv, &config.solver.settings()).map_err(core_err)?;
    let text = table::render_text(&cols);
    let body = match config.output.format {
        Format::Json => to_json(&cols)?,
        Format::Csv => {
            let mut buf = Vec::new();
            table::write_csv(&cols, &mut buf)?;
            String::from_utf8(buf)?
        }
        Format::Text => text.clone(),
    };
    emit(config, &body, Some(&text))?;
    match live {
        Some(r) if !r.is_optimal() => {
            eprintln!("live column finished with status {:?}", r.solver_status);
            Ok(EXIT_FAILURE)
        }
        _ => Ok(EXIT_OK),
    }
}

pub fn cmd_examples(config: &RunConfig) -> anyhow::Result<i32> {
    let keys = config.selection();
    let reports = presets::run_presets(keys.as_deref(), &config.solver.settings())?;
    let text = presets::render_text(&reports);
    emit(config, &render(config, &reports, &text)?, Some(&text))?;
    Ok(EXIT_OK)
}
