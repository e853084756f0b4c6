//! Planted-factor panels on disk with a matching pipeline config.

#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use inclusiveness::paneldata::{write_panel_csv, PanelDataset};
use inclusiveness::synth::{simulate_panel, CovariateMode, DgpSpec};

pub const N_INDICATORS: usize = 15;

/// Every standardized indicator stays above −4 for this seed, so ln(z + 4) is defined.
pub const SEED: u64 = 9;

pub fn planted_spec(k_factors: usize, seed: u64) -> DgpSpec {
    DgpSpec {
        n_covariates: N_INDICATORS,
        beta: vec![0.5, -0.3],
        gamma: vec![],
        covariates: CovariateMode::FactorStructure { k_factors, loadings_scale: 1.5 },
        seed,
        ..DgpSpec::default()
    }
}

pub fn planted_panel(k_factors: usize, seed: u64) -> PanelDataset {
    simulate_panel(&planted_spec(k_factors, seed)).expect("valid spec").panel
}

pub fn indicators() -> Vec<String> {
    (1..=N_INDICATORS).map(|j| format!("X{j}")).collect()
}

fn list(v: &[String]) -> String {
    let quoted: Vec<String> = v.iter().map(|s| format!("\"{s}\"")).collect();
    format!("[{}]", quoted.join(", "))
}

/// Seven regression columns on the index: one determinant each, the last an interaction.
pub fn seven_models() -> String {
    let mut out = String::new();
    for j in 1..=7 {
        let det = if j == 7 { "\"X3*X4\"".to_string() } else { format!("\"X{}\"", j + 2) };
        let _ = write!(out, "\n[[models]]\ncontrols = [\"Y\"]\ndeterminants = [{det}]\n");
    }
    out
}

pub fn config_text(csv_name: &str, models: &str) -> String {
    let ind = indicators();
    let mut out = format!("out_dir = \"out\"\n\n[input]\npath = \"{csv_name}\"\ngap_policy = \"none\"\n");
    for s in ind.iter().chain(std::iter::once(&"Y".to_string())) {
        let _ = write!(out, "\n[[variables]]\nsymbol = \"{s}\"\n");
    }
    let _ = write!(
        out,
        "\n[[transforms]]\nop = \"zscore\"\nvars = {l}\n\n[[transforms]]\nop = \"shift_log\"\nvars = {l}\n\n[index]\nindicators = {l}\nanchor = \"X1\"\n",
        l = list(&ind)
    );
    out.push_str(models);
    out
}

/// Writes `panel.csv` and `config.toml` into `dir`; returns the config path.
pub fn write_fixture(dir: &Path, panel: &PanelDataset, models: &str) -> PathBuf {
    let file = std::fs::File::create(dir.join("panel.csv")).unwrap();
    write_panel_csv(panel, file).unwrap();
    let cfg = dir.join("config.toml");
    std::fs::write(&cfg, config_text("panel.csv", models)).unwrap();
    cfg
}
