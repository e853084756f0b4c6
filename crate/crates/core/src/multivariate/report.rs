use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{BartlettResult, KmoResult, PcaModel, VarianceRow};

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// JSON view of a fitted model and its adequacy tests. Matrices are row-major,
/// one row per variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaReport {
    pub symbols: Vec<String>,
    pub n_obs: usize,
    pub retained: usize,
    pub rank_deficient: bool,
    pub eigenvalues: Vec<f64>,
    pub initial: Vec<VarianceRow>,
    pub extraction: Vec<VarianceRow>,
    pub rotation: Option<Vec<VarianceRow>>,
    pub loadings: Vec<Vec<f64>>,
    pub rotated_loadings: Option<Vec<Vec<f64>>>,
    pub communalities: Vec<f64>,
    pub varimax_sweeps: Option<usize>,
    pub correlation: Vec<Vec<f64>>,
    pub kmo: KmoResult,
    pub bartlett: BartlettResult,
}

impl PcaReport {
    pub fn new(model: &PcaModel, kmo: &KmoResult, bartlett: &BartlettResult) -> Self {
        PcaReport {
            symbols: model.symbols.clone(),
            n_obs: model.n_obs,
            retained: model.retained,
            rank_deficient: model.rank_deficient,
            eigenvalues: model.eigen.values.clone(),
            initial: model.variance_table.clone(),
            extraction: model.variance_table[..model.retained].to_vec(),
            rotation: model.rotation_sums(),
            loadings: rows_of(&model.loadings),
            rotated_loadings: model.rotated_loadings().map(rows_of),
            communalities: model.communalities(),
            varimax_sweeps: model.rotation.as_ref().map(|r| r.sweeps),
            correlation: rows_of(model.correlation.as_matrix()),
            kmo: kmo.clone(),
            bartlett: bartlett.clone(),
        }
    }
}

/// KMO and Bartlett block.
pub fn render_adequacy(kmo: &KmoResult, bartlett: &BartlettResult) -> String {
    let mut out = String::new();
    out.push_str("KMO and Bartlett's Test\n");
    out.push_str(&format!("{:<46}{:>12.3}\n", "Kaiser-Meyer-Olkin Measure of Sampling Adequacy", kmo.overall));
    out.push_str(&format!("{:<46}{:>12.2}\n", "Bartlett's Test of Sphericity  Approx. Chi-Square", bartlett.chi_square));
    out.push_str(&format!("{:<46}{:>12}\n", "                               df", bartlett.df));
    out.push_str(&format!("{:<46}{:>12.3}\n", "                               Sig.", bartlett.p_value));
    if let Some(eps) = kmo.ridge {
        out.push_str(&format!("note: correlation matrix singular; ridge {eps:e} added for KMO\n"));
    }
    if kmo.degenerate {
        out.push_str("note: correlations are essentially zero; KMO is not informative\n");
    }
    out
}

/// Total-variance-explained block: initial eigenvalues for every component,
/// extraction sums for the retained ones and rotation sums when rotated.
pub fn render_variance(model: &PcaModel) -> String {
    let rotation = model.rotation_sums();
    let group = |r: Option<&VarianceRow>| match r {
        Some(r) => format!("{:>9.3}{:>9.3}{:>9.3}", r.total, r.pct_of_variance, r.cumulative_pct),
        None => " ".repeat(27),
    };
    let mut out = String::new();
    out.push_str("Total Variance Explained\n");
    out.push_str(&format!("{:<10}{:<27}{:<27}", "", " Initial Eigenvalues", " Extraction Sums"));
    if rotation.is_some() {
        out.push_str(" Rotation Sums");
    }
    out.push('\n');
    let head = format!("{:>9}{:>9}{:>9}", "Total", "% Var", "Cumul%");
    out.push_str(&format!("{:<10}{head}{head}", "Component"));
    if rotation.is_some() {
        out.push_str(&head);
    }
    out.push('\n');
    for (k, row) in model.variance_table.iter().enumerate() {
        let mut line = format!("{:<10}{}", k + 1, group(Some(row)));
        if k < model.retained {
            line.push_str(&group(Some(row)));
            if let Some(rot) = &rotation {
                line.push_str(&group(rot.get(k)));
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::tests::{random_data, standardize};
    use super::super::{bartlett, kmo, pca_fit, Retention};
    use super::*;

    #[test]
    fn variance_block_lists_every_component() {
        let data = standardize(random_data(300, 6, 3));
        let syms: Vec<String> = (0..6).map(|j| format!("V{j}")).collect();
        let model = pca_fit(&data, &syms, Retention::TopK(2)).unwrap().rotate().unwrap();
        let text = render_variance(&model);
        assert_eq!(text.lines().count(), 3 + 6);
        assert!(text.lines().last().unwrap().contains("100.000"));
        let k = kmo(&model.correlation, None).unwrap();
        let b = bartlett(&model.correlation, 300).unwrap();
        let report = PcaReport::new(&model, &k, &b);
        assert_eq!(report.extraction.len(), 2);
        assert_eq!(report.rotation.as_ref().unwrap().len(), 2);
        let json = serde_json::to_string(&report).unwrap();
        let back: PcaReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.eigenvalues, report.eigenvalues);
        assert!(render_adequacy(&k, &b).contains("df"));
    }
}
