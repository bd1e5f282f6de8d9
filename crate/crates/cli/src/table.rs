//! Comparison of the live design with published ensembles.

use bec_design::ensemble::{DegreeConvention, DegreeDistribution, Side};
use bec_design::optimizer::{solve_design, DesignProblem, DesignResult};
use bec_design::sdp::SolverSettings;
use serde::Serialize;

/// Erasure probability of the live column.
pub const LIVE_EPSILON: f64 = 0.49;
/// Check node degree of the live column (`ρ = x⁵`).
pub const LIVE_CHECK_DEGREE: usize = 6;
/// Largest variable node degree of the live column.
pub const LIVE_DV_MAX: usize = 7;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TableColumn {
    pub key: String,
    pub label: String,
    pub epsilon: f64,
    pub d_c: usize,
    pub d_v: usize,
    pub delta: f64,
    /// False for values copied from the literature.
    pub computed: bool,
}

/// Published ensembles, echoed as printed.
pub fn literature_columns() -> Vec<TableColumn> {
    let col = |key: &str, label: &str, epsilon, d_c, d_v, delta| TableColumn {
        key: key.into(),
        label: label.into(),
        epsilon,
        d_c,
        d_v,
        delta,
        computed: false,
    };
    vec![
        col("type-a", "Saeedi-Banihashemi 2010, type A", 0.48, 5, 12, 0.0389),
        col("type-b", "Saeedi-Banihashemi 2010, type B", 0.48, 5, 7, 0.0527),
        col("amraoui", "Amraoui-Montanari-Urbanke 2007", 0.5, 6, 14, 0.14),
        col("mct", "Richardson-Urbanke 2008, Ex. 3.63", 0.4741, 8, 19, 0.0493),
    ]
}

/// Rate-optimal design for `ρ = x⁵`, `D_v = 7` at `ε = 0.49`.
pub fn live_problem() -> DesignProblem {
    let rho = DegreeDistribution::regular(Side::Rho, LIVE_CHECK_DEGREE).expect("valid degree");
    DesignProblem::max_rate(rho, LIVE_DV_MAX, LIVE_EPSILON)
}

pub fn live_column(result: &DesignResult, convention: DegreeConvention) -> Option<TableColumn> {
    let ens = result.ensemble()?;
    Some(TableColumn {
        key: "live".into(),
        label: format!("this solver ({})", convention_name(convention)),
        epsilon: result.epsilon_used?,
        d_c: convention.display(ens.rho.max_degree()),
        d_v: convention.display(ens.lambda.max_degree()),
        delta: result.delta?,
        computed: true,
    })
}

pub fn convention_name(c: DegreeConvention) -> &'static str {
    match c {
        DegreeConvention::NodeDegree => "node degree",
        DegreeConvention::PolyDegree => "polynomial degree",
    }
}

/// Builds the columns named in `keys` (all when `None`), solving the live
/// column if requested.
pub fn build_table(
    keys: Option<&[String]>,
    convention: DegreeConvention,
    settings: &SolverSettings,
) -> bec_design::Result<(Vec<TableColumn>, Option<DesignResult>)> {
    let wanted = |k: &str| keys.map_or(true, |ks| ks.iter().any(|x| x == k));
    let mut cols = Vec::new();
    let mut live = None;
    if wanted("live") {
        let result = solve_design(&live_problem(), settings)?;
        if let Some(c) = live_column(&result, convention) {
            cols.push(c);
        }
        live = Some(result);
    }
    cols.extend(literature_columns().into_iter().filter(|c| wanted(&c.key)));
    Ok((cols, live))
}

pub const HEADER: [&str; 7] = ["key", "label", "epsilon", "d_c", "d_v", "delta", "computed"];

pub fn write_csv<W: std::io::Write>(cols: &[TableColumn], w: W) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(HEADER)?;
    for c in cols {
        wr.write_record([
            c.key.clone(),
            c.label.clone(),
            c.epsilon.to_string(),
            c.d_c.to_string(),
            c.d_v.to_string(),
            format!("{:.4}", c.delta),
            c.computed.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn render_text(cols: &[TableColumn]) -> String {
    let mut s = format!("{:<36} {:>8} {:>4} {:>4} {:>8}\n", "ensemble", "epsilon", "d_c", "d_v", "delta");
    for c in cols {
        let mark = if c.computed { "" } else { " *" };
        s += &format!(
            "{:<36} {:>8.4} {:>4} {:>4} {:>8.4}{mark}\n",
            c.label, c.epsilon, c.d_c, c.d_v, c.delta
        );
    }
    if cols.iter().any(|c| !c.computed) {
        s += "* published value, not recomputed\n";
    }
    s
}
