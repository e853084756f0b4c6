//! Fixed-width multi-model results table.

use super::{ColumnKind, GmmEstimate};
use crate::numerics::normal_two_sided_p;

/// Diagnostic row labels, in printed order, after the coefficient rows.
pub const TABLE_DIAGNOSTIC_ROWS: [&str; 6] = [
    "Adjusted R-squared",
    "Prob(J-statistic)",
    "Durbin-Watson stat",
    "Observations",
    "Instruments",
    "Countries",
];

const SIGNIFICANCE: f64 = 0.05;
const JUST_IDENTIFIED_MARK: &str = "—";

/// Coefficient rows in table order: regressors by first appearance, then lagged dependents, then C.
fn coefficient_rows(models: &[GmmEstimate]) -> Vec<String> {
    let mut rows: Vec<String> = Vec::new();
    for kind in [ColumnKind::Regressor, ColumnKind::LaggedDependent, ColumnKind::Intercept] {
        for m in models {
            for (name, k) in m.names.iter().zip(&m.kinds) {
                if *k == kind && !rows.contains(name) {
                    rows.push(name.clone());
                }
            }
        }
    }
    rows
}

fn coefficient_cell(m: &GmmEstimate, name: &str) -> String {
    match (m.coefficient(name), m.std_error(name)) {
        (Some(b), Some(se)) => {
            let star = if se > 0.0 && normal_two_sided_p(b / se) < SIGNIFICANCE { "*" } else { "" };
            format!("{b:.4}{star} ({se:.4})")
        }
        _ => String::new(),
    }
}

fn fmt_opt(v: Option<f64>, dp: usize) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.dp$}"))
}

/// Renders one column per model. Coefficients print with 4 decimals and
/// standard errors in parentheses; diagnostics with 2 decimals.
pub fn render_table(models: &[GmmEstimate], dependent_label: &str) -> String {
    let coef_rows = coefficient_rows(models);
    let mut body: Vec<(String, Vec<String>)> = Vec::new();
    for name in &coef_rows {
        body.push((name.clone(), models.iter().map(|m| coefficient_cell(m, name)).collect()));
    }
    let diag: [Vec<String>; 6] = [
        models.iter().map(|m| fmt_opt(m.adjusted_r2, 2)).collect(),
        models
            .iter()
            .map(|m| if m.just_identified { JUST_IDENTIFIED_MARK.to_string() } else { format!("{:.2}", m.j_pvalue) })
            .collect(),
        models.iter().map(|m| fmt_opt(m.durbin_watson, 2)).collect(),
        models.iter().map(|m| m.n_obs.to_string()).collect(),
        models.iter().map(|m| m.n_instruments.to_string()).collect(),
        models.iter().map(|m| m.n_countries.to_string()).collect(),
    ];
    for (label, cells) in TABLE_DIAGNOSTIC_ROWS.iter().zip(diag) {
        body.push((label.to_string(), cells));
    }

    let headers: Vec<String> = models
        .iter()
        .enumerate()
        .map(|(i, m)| if m.label.is_empty() { format!("({})", i + 1) } else { m.label.clone() })
        .collect();
    let label_w = body.iter().map(|(l, _)| l.chars().count()).max().unwrap_or(0) + 2;
    let col_w = body
        .iter()
        .flat_map(|(_, c)| c.iter().map(|s| s.chars().count()))
        .chain(headers.iter().map(|h| h.chars().count()))
        .max()
        .unwrap_or(0)
        + 2;
    let width = label_w + col_w * models.len();
    let pad = |s: &str, w: usize| format!("{}{s}", " ".repeat(w.saturating_sub(s.chars().count())));

    let mut out = String::new();
    out.push_str(&format!("Generalised method of moments (dependent variable: {dependent_label})\n"));
    out.push_str(&"=".repeat(width));
    out.push('\n');
    out.push_str(&" ".repeat(label_w));
    for h in &headers {
        out.push_str(&pad(h, col_w));
    }
    out.push('\n');
    out.push_str(&"-".repeat(width));
    out.push('\n');
    for (label, cells) in &body {
        out.push_str(&format!("{label:<label_w$}"));
        for c in cells {
            out.push_str(&pad(c, col_w));
        }
        out.push('\n');
    }
    out.push_str(&"=".repeat(width));
    out.push('\n');
    out.push_str("* p < 0.05 (two-sided, normal); two-step cluster-robust standard errors in parentheses.\n");
    if models.iter().any(|m| m.just_identified) {
        out.push_str(&format!("{JUST_IDENTIFIED_MARK} just-identified: no over-identifying restrictions to test.\n"));
    }
    if models.iter().any(|m| m.kinds.contains(&ColumnKind::TimeDummy)) {
        out.push_str("Year effects included where the model requests them (not shown).\n");
    }
    out
}

/// Row labels of a rendered table, in order (lines between the two rules).
pub fn table_row_labels(table: &str) -> Vec<String> {
    let lines: Vec<&str> = table.lines().collect();
    let start = lines.iter().position(|l| l.starts_with('-')).map_or(0, |i| i + 1);
    lines[start..]
        .iter()
        .take_while(|l| !l.starts_with('='))
        .map(|l| {
            let trimmed = l.trim_start();
            // labels are separated from the first cell by at least two spaces
            trimmed.split("  ").next().unwrap_or("").trim().to_string()
        })
        .collect()
}
